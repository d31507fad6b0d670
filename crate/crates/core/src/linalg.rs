//! Small dense complex matrices.
//!
//! The networks handled here have at most three ports, so matrices are stored
//! row-major in a flat `Vec` and every routine is a straightforward dense
//! algorithm. Hermitian eigendecomposition uses cyclic complex Jacobi
//! rotations, which keeps eigenvectors unitary to rounding.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_diagonal(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square matrix");
        Self { n, data: rows.iter().flatten().copied().collect() }
    }

    /// Row-major construction from a flat slice of length `n*n`.
    pub fn from_row_slice(n: usize, data: &[Complex<T>]) -> Self {
        assert_eq!(data.len(), n * n, "slice length must be n*n");
        Self { n, data: data.to_vec() }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, k: Complex<T>) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * k).collect() }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).map(|i| self[(i, i)]).fold(Complex::zero(), |a, b| a + b)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Copy with row and column `k` (0-based) removed.
    pub fn without(&self, k: usize) -> Self {
        let idx: Vec<usize> = (0..self.n).filter(|&i| i != k).collect();
        Self::from_fn(self.n - 1, |i, j| self[(idx[i], idx[j])])
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        CMatrix::from_fn(self.n, |i, j| {
            (0..self.n).fold(Complex::zero(), |acc, k| acc + self[(i, k)] * rhs[(k, j)])
        })
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// Eigendecomposition `A = V diag(w) V^H` of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; eigenvectors are the columns
/// of `V`. Only the Hermitian part of `a` is used.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = a.dim();
    let half = T::lit(0.5);
    let mut m = CMatrix::from_fn(n, |i, j| (a[(i, j)] + a[(j, i)].conj()).scale(half));
    let mut v = CMatrix::identity(n);
    let scale = m.max_abs();

    let mut last = T::infinity();
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .fold(T::zero(), |s, x| s + x)
            .sqrt();
        // Rotations at rounding level only erode the unitarity of V.
        if off <= T::epsilon() * scale || off >= last || scale == T::zero() {
            break;
        }
        last = off;
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[(p, q)];
                let babs = b.norm();
                if babs == T::zero() {
                    continue;
                }
                // Phase-rotate q so the (p,q) entry is real and positive, then
                // apply the real symmetric Jacobi rotation.
                let phase = b.unscale(babs);
                let theta = (m[(q, q)].re - m[(p, p)].re) / (T::lit(2.0) * babs);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let mut u = CMatrix::identity(n);
                u[(p, p)] = Complex::new(c, T::zero());
                u[(p, q)] = Complex::new(s, T::zero());
                u[(q, p)] = -phase.conj().scale(s);
                u[(q, q)] = phase.conj().scale(c);
                m = &(&u.adjoint() * &m) * &u;
                v = &v * &u;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// `exp(i * h)` for Hermitian `h`, computed through its eigendecomposition so
/// the result is unitary to rounding.
pub fn expi_hermitian<T: Real>(h: &CMatrix<T>) -> CMatrix<T> {
    let (w, v) = hermitian_eigen(h);
    let phases: Vec<Complex<T>> = w.iter().map(|&x| Complex::new(x.cos(), x.sin())).collect();
    &(&v * &CMatrix::from_diagonal(&phases)) * &v.adjoint()
}

/// Largest singular value, `sqrt(lambda_max(A^H A))`.
pub fn max_singular_value<T: Real>(a: &CMatrix<T>) -> T {
    let (w, _) = hermitian_eigen(&(&a.adjoint() * a));
    w.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes.
pub fn solve<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Option<Vec<Complex<T>>> {
    let n = a.dim();
    assert_eq!(b.len(), n, "right-hand side length must match matrix");
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).expect("finite"))?;
        if m[(pivot, col)].norm() == T::zero() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let factor = m[(row, col)] / m[(col, col)];
            for j in col..n {
                let sub = factor * m[(col, j)];
                m[(row, j)] -= sub;
            }
            let sub = factor * x[col];
            x[row] -= sub;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for j in (row + 1)..n {
            acc -= m[(row, j)] * x[j];
        }
        x[row] = acc / m[(row, row)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn random_hermitian(seed: u64, n: usize) -> CMatrix<f64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(next(), 0.0);
            for j in (i + 1)..n {
                let z = Complex::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn jacobi_reconstructs_hermitian() {
        for seed in 0..600 {
            let n = 2 + (seed % 3) as usize;
            let h = random_hermitian(seed, n);
            let (w, v) = hermitian_eigen(&h);
            let wd: Vec<_> = w.iter().map(|&x| Complex::new(x, 0.0)).collect();
            let back = &(&v * &CMatrix::from_diagonal(&wd)) * &v.adjoint();
            assert!((&back - &h).max_abs() < 1e-13, "seed {seed}");
            let orth = (&(&v.adjoint() * &v) - &CMatrix::identity(n)).max_abs();
            assert!(orth < 1e-13, "seed {seed}: {orth:e}");
            assert!(w.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn expi_is_unitary() {
        let h = random_hermitian(7, 3).scale(cplx(3.0, 0.0));
        let u = expi_hermitian(&h);
        assert!((&(&u.adjoint() * &u) - &CMatrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn expi_of_diagonal() {
        let h = CMatrix::from_diagonal(&[cplx::<f64>(0.3, 0.0), cplx(-1.1, 0.0)]);
        let u = expi_hermitian(&h);
        assert!((u[(0, 0)] - Complex::new(0.3f64.cos(), 0.3f64.sin())).norm() < 1e-15);
        assert!(u[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn singular_value_of_scaled_unitary() {
        let m = CMatrix::from_rows(&[
            vec![cplx::<f64>(0.0, 0.0), cplx(0.5, 0.0)],
            vec![cplx(0.9, 0.0), cplx(0.0, 0.0)],
        ]);
        assert!((max_singular_value(&m) - 0.9).abs() < 1e-14);
    }

    #[test]
    fn gaussian_elimination() {
        let a = CMatrix::from_rows(&[
            vec![cplx::<f64>(0.0, 0.0), cplx(2.0, 1.0), cplx(1.0, 0.0)],
            vec![cplx(1.0, -1.0), cplx(0.0, 0.0), cplx(3.0, 0.0)],
            vec![cplx(2.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 1.0)],
        ]);
        let x_true = [cplx(1.0, 2.0), cplx(-0.5, 0.0), cplx(0.0, -1.0)];
        let b: Vec<_> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x_true[j]).sum()).collect();
        let x = solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-14);
        }
        assert!(solve(&CMatrix::<f64>::zeros(2), &[cplx(1.0, 0.0), cplx(0.0, 0.0)]).is_none());
    }

    #[test]
    fn without_removes_row_and_column() {
        let m = CMatrix::from_fn(3, |i, j| cplx::<f64>((3 * i + j) as f64, 0.0));
        let r = m.without(1);
        assert_eq!(r[(0, 1)], cplx(2.0, 0.0));
        assert_eq!(r[(1, 0)], cplx(6.0, 0.0));
    }
}
