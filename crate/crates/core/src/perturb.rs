//! Unitary perturbations of a symmetric tee-junction over the Gell-Mann basis.
//!
//! A lossless junction close to `S0` is written `S = exp(-iG) S0 exp(iG)` with
//! Hermitian `G = sum g_n lambda_n`. To first order `S = S0 + [S0, iG]`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{expi_hermitian, CMatrix};
use crate::netcore::{check_reciprocity, reduce_network, FrequencySweep, ScatteringMatrix};
use crate::scalar::{db20, Real};
use crate::tee::TeeJunction;

/// The eight Gell-Mann matrices, indexed 1..=8.
#[derive(Debug, Clone)]
pub struct GellMannBasis<T> {
    lambdas: [CMatrix<T>; 8],
}

impl<T: Real> GellMannBasis<T> {
    pub fn new() -> Self {
        Self { lambdas: std::array::from_fn(|i| build_gell_mann(i + 1)) }
    }

    /// `lambda_n`, `n` in 1..=8.
    pub fn get(&self, n: usize) -> Result<&CMatrix<T>> {
        if !(1..=8).contains(&n) {
            return Err(Error::GellMannIndex(n));
        }
        Ok(&self.lambdas[n - 1])
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix<T>> {
        self.lambdas.iter()
    }
}

impl<T: Real> Default for GellMannBasis<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn build_gell_mann<T: Real>(n: usize) -> CMatrix<T> {
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let mut m = CMatrix::zeros(3);
    let mut put = |r: usize, c: usize, v: Complex<T>| m[(r, c)] = v;
    match n {
        1 => {
            put(0, 1, one);
            put(1, 0, one);
        }
        2 => {
            put(0, 1, -i);
            put(1, 0, i);
        }
        3 => {
            put(0, 0, one);
            put(1, 1, -one);
        }
        4 => {
            put(0, 2, one);
            put(2, 0, one);
        }
        5 => {
            put(0, 2, -i);
            put(2, 0, i);
        }
        6 => {
            put(1, 2, one);
            put(2, 1, one);
        }
        7 => {
            put(1, 2, -i);
            put(2, 1, i);
        }
        8 => {
            let k = T::one() / T::lit(3.0).sqrt();
            put(0, 0, Complex::new(k, T::zero()));
            put(1, 1, Complex::new(k, T::zero()));
            put(2, 2, Complex::new(-(k + k), T::zero()));
        }
        _ => unreachable!("index checked by caller"),
    }
    m
}

/// `lambda_n` for `n` in 1..=8.
pub fn gell_mann<T: Real>(n: usize) -> Result<CMatrix<T>> {
    if !(1..=8).contains(&n) {
        return Err(Error::GellMannIndex(n));
    }
    Ok(build_gell_mann(n))
}

/// Real coefficients `g1..g8` of the generator `G = sum g_n lambda_n`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct PerturbationGenerator<T> {
    pub g: [T; 8],
}

impl<T: Real> PerturbationGenerator<T> {
    pub fn zero() -> Self {
        Self { g: [T::zero(); 8] }
    }

    pub fn new(g: [T; 8]) -> Self {
        Self { g }
    }

    /// Single component `g_n = value`, `n` in 1..=8.
    pub fn single(n: usize, value: T) -> Result<Self> {
        if !(1..=8).contains(&n) {
            return Err(Error::GellMannIndex(n));
        }
        let mut g = [T::zero(); 8];
        g[n - 1] = value;
        Ok(Self { g })
    }

    /// `c lambda_+` with `lambda_+ = (lambda5 + lambda7)/sqrt2`.
    pub fn lambda_plus(c: T) -> Self {
        let mut g = [T::zero(); 8];
        g[4] = c * T::FRAC_1_SQRT_2();
        g[6] = c * T::FRAC_1_SQRT_2();
        Self { g }
    }

    /// `g2 lambda2 + c lambda_-` with `lambda_- = (lambda5 - lambda7)/sqrt2`:
    /// the symmetry-breaking reciprocal perturbations.
    pub fn reciprocal(g2: T, c_minus: T) -> Self {
        let mut g = [T::zero(); 8];
        g[1] = g2;
        g[4] = c_minus * T::FRAC_1_SQRT_2();
        g[6] = -c_minus * T::FRAC_1_SQRT_2();
        Self { g }
    }

    /// Coefficient along `lambda_-`, `(g5 - g7)/sqrt2`.
    pub fn lambda_minus_component(&self) -> T {
        (self.g[4] - self.g[6]) * T::FRAC_1_SQRT_2()
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().all(|x| *x == T::zero())
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> T {
        self.g.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
    }

    pub fn scaled(&self, k: T) -> Self {
        Self { g: self.g.map(|x| x * k) }
    }

    /// Projection onto `{lambda2, lambda_-}`, plus a flag telling whether any
    /// other component was discarded.
    pub fn reciprocal_part(&self) -> (Self, bool) {
        let kept = Self::reciprocal(self.g[1], self.lambda_minus_component());
        let dropped = self.g.iter().zip(kept.g.iter()).any(|(a, b)| (*a - *b).abs() > T::zero());
        (kept, dropped)
    }

    /// `G = sum g_n lambda_n`.
    pub fn matrix(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(3);
        for (n, &gn) in self.g.iter().enumerate() {
            if gn != T::zero() {
                m = &m + &build_gell_mann::<T>(n + 1).scale(Complex::new(gn, T::zero()));
            }
        }
        m
    }
}

/// `exp(-iG) S0 exp(iG)`, unitary to rounding for any generator.
pub fn perturb_exact<T: Real>(s0: &TeeJunction<T>, gen: &PerturbationGenerator<T>) -> ScatteringMatrix<T> {
    perturb_matrix_exact(&s0.matrix(), gen)
}

pub(crate) fn perturb_matrix_exact<T: Real>(s0: &CMatrix<T>, gen: &PerturbationGenerator<T>) -> ScatteringMatrix<T> {
    if gen.is_zero() {
        return ScatteringMatrix::new(s0.clone()).expect("square");
    }
    let u = expi_hermitian(&gen.matrix());
    ScatteringMatrix::new(&(&u.adjoint() * s0) * &u).expect("square")
}

/// `S0 + [S0, iG]`.
pub fn perturb_first_order<T: Real>(s0: &TeeJunction<T>, gen: &PerturbationGenerator<T>) -> ScatteringMatrix<T> {
    let m = s0.matrix();
    let ig = gen.matrix().scale(Complex::new(T::zero(), T::one()));
    ScatteringMatrix::new(&m + &m.commutator(&ig)).expect("square")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reciprocity {
    Reciprocal,
    NonReciprocal,
}

/// Decides whether the first-order perturbation along `lambda_n` keeps the
/// junction reciprocal, from the reciprocity residual of `[S0, i lambda_n]`.
pub fn classify_reciprocity<T: Real>(n: usize, s0: &TeeJunction<T>) -> Result<Reciprocity> {
    let lambda = gell_mann::<T>(n)?;
    let m = s0.matrix();
    let scale = m.max_abs().max(T::min_positive_value());
    let tiny = T::lit(1e-9) * scale;
    if s0.gamma.norm() <= tiny {
        return Err(Error::DegenerateJunction { generator: n });
    }
    let delta = m.commutator(&lambda.scale(Complex::new(T::zero(), T::one())));
    if delta.max_abs() <= tiny {
        return Err(Error::DegenerateJunction { generator: n });
    }
    let perturbed = ScatteringMatrix::new(&m + &delta).expect("square");
    if check_reciprocity(&perturbed) < T::lit(1e-12) {
        Ok(Reciprocity::Reciprocal)
    } else {
        Ok(Reciprocity::NonReciprocal)
    }
}

/// Result of terminating a first-order perturbed junction.
#[derive(Debug, Clone)]
pub struct ReducedSplitting<T> {
    /// Reduced two-port including the asymmetric splitting.
    pub reduced: ScatteringMatrix<T>,
    /// Port-exchange average `[[a, d], [d, a]]` of `reduced`.
    pub symmetric_part: ScatteringMatrix<T>,
    /// `(S11R - S22R)/2`.
    pub mu: Complex<T>,
}

/// Perturbs `s0` to first order along the reciprocal symmetry-breaking
/// directions of `gen` and terminates port 3 with `gamma_res`. Components of
/// `gen` outside `{lambda2, lambda_-}` are dropped with a warning.
pub fn reduced_splitting<T: Real>(
    s0: &TeeJunction<T>,
    gen: &PerturbationGenerator<T>,
    gamma_res: Complex<T>,
) -> Result<ReducedSplitting<T>> {
    let (kept, dropped) = gen.reciprocal_part();
    if dropped {
        log::warn!("generator components outside lambda2 and lambda_minus were discarded");
    }
    let s = perturb_first_order(s0, &kept);
    let reduced = reduce_network(&s, 3, gamma_res)?;
    let half = T::lit(0.5);
    let a = (reduced.s(1, 1) + reduced.s(2, 2)).scale(half);
    let d = (reduced.s(1, 2) + reduced.s(2, 1)).scale(half);
    let symmetric_part = ScatteringMatrix::from_rows(&[vec![a, d], vec![d, a]])?;
    let mu = (reduced.s(1, 1) - reduced.s(2, 2)).scale(half);
    Ok(ReducedSplitting { reduced, symmetric_part, mu })
}

/// Reflection splitting `mu(f) = (S11 - S22)/2` over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionAsymmetry<T> {
    pub frequencies: Vec<T>,
    pub mu: Vec<Complex<T>>,
}

impl<T: Real> JunctionAsymmetry<T> {
    /// `20 log10 |mu|` per point.
    pub fn db(&self) -> Vec<T> {
        self.mu.iter().map(|m| db20(m.norm())).collect()
    }

    /// `20 log10` of the band-averaged `|mu|`.
    pub fn band_average_db(&self) -> T {
        let n = T::from_count(self.mu.len().max(1));
        db20(self.mu.iter().fold(T::zero(), |s, m| s + m.norm()) / n)
    }
}

pub fn extract_mu<T: Real>(sweep: &FrequencySweep<T>) -> Result<JunctionAsymmetry<T>> {
    if sweep.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sweep.n_ports() });
    }
    let half = T::lit(0.5);
    let mu = sweep.matrices().iter().map(|s| (s.s(1, 1) - s.s(2, 2)).scale(half)).collect();
    Ok(JunctionAsymmetry { frequencies: sweep.frequencies().to_vec(), mu })
}
