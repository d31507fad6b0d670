//! Scattering-network algebra: single-port reduction, reference-plane shifts,
//! common/differential eigenmodes of symmetric two-ports and passivity
//! diagnostics.
//!
//! Port numbers at this API surface are 1-based (`S11`, `S21`, ...). Raw
//! matrix indexing through [`CMatrix`] is 0-based.

use num_complex::Complex;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cis, Real};

/// Default threshold on `|1 - S_kk * gamma|` below which a reduction is
/// reported as a singular loop.
pub const EPS_SINGULAR: f64 = 1e-14;

/// Default tolerance for unitarity and reciprocity checks.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Complex scattering matrix of an `n`-port network.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix<T>(CMatrix<T>);

impl<T: Real> ScatteringMatrix<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: rows.iter().map(Vec::len).find(|&l| l != rows.len()).unwrap_or(0),
            });
        }
        Ok(Self(CMatrix::from_rows(rows)))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn n_ports(&self) -> usize {
        self.0.dim()
    }

    /// Entry `S_ij` with 1-based port numbers.
    #[inline]
    pub fn s(&self, i: usize, j: usize) -> Complex<T> {
        self.0[(i - 1, j - 1)]
    }

    pub fn as_matrix(&self) -> &CMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.0
    }

    /// Multiplies every entry by `k`.
    pub fn scaled(&self, k: Complex<T>) -> Self {
        Self(self.0.scale(k))
    }
}

impl<T> std::ops::Index<(usize, usize)> for ScatteringMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, idx: (usize, usize)) -> &Complex<T> {
        &self.0[idx]
    }
}

/// A strictly increasing frequency grid with one scattering matrix per point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep<T> {
    frequencies: Vec<T>,
    matrices: Vec<ScatteringMatrix<T>>,
}

impl<T: Real> FrequencySweep<T> {
    pub fn new(frequencies: Vec<T>, matrices: Vec<ScatteringMatrix<T>>) -> Result<Self> {
        if frequencies.len() != matrices.len() {
            return Err(Error::InvalidSweep(format!(
                "{} frequencies but {} matrices",
                frequencies.len(),
                matrices.len()
            )));
        }
        if frequencies.len() < 2 {
            return Err(Error::InvalidSweep("a sweep needs at least two points".into()));
        }
        if let Some(i) = frequencies.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSweep(format!(
                "frequencies not strictly increasing at index {}",
                i + 1
            )));
        }
        let n = matrices[0].n_ports();
        if let Some(m) = matrices.iter().find(|m| m.n_ports() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: m.n_ports() });
        }
        Ok(Self { frequencies, matrices })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn n_ports(&self) -> usize {
        self.matrices[0].n_ports()
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn matrices(&self) -> &[ScatteringMatrix<T>] {
        &self.matrices
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &ScatteringMatrix<T>)> {
        self.frequencies.iter().copied().zip(self.matrices.iter())
    }

    /// Trace of a single parameter `S_ij` (1-based) over the sweep.
    pub fn parameter(&self, i: usize, j: usize) -> Vec<Complex<T>> {
        self.matrices.iter().map(|m| m.s(i, j)).collect()
    }

    /// Applies `f` to every matrix, keeping the frequency grid.
    pub fn map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(T, &ScatteringMatrix<T>) -> Result<ScatteringMatrix<T>>,
    {
        let matrices = self.iter().map(|(fr, m)| f(fr, m)).collect::<Result<Vec<_>>>()?;
        Self::new(self.frequencies.clone(), matrices)
    }

    /// Points whose frequency lies in `[lo, hi]`.
    pub fn select_band(&self, lo: T, hi: T) -> Result<Self> {
        let (f, m): (Vec<T>, Vec<ScatteringMatrix<T>>) = self
            .iter()
            .filter(|(f, _)| *f >= lo && *f <= hi)
            .map(|(f, m)| (f, m.clone()))
            .unzip();
        Self::new(f, m)
    }
}

/// One-way electrical delay per port, `P_kk(f) = exp(2 pi i f tau_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePlaneShift<T> {
    pub delays: Vec<T>,
}

impl<T: Real> ReferencePlaneShift<T> {
    pub fn new(delays: Vec<T>) -> Self {
        Self { delays }
    }

    /// Diagonal of `P` at frequency `f`.
    pub fn phases(&self, f: T) -> Vec<Complex<T>> {
        self.delays.iter().map(|&tau| cis(T::TAU() * f * tau)).collect()
    }

    /// The shift that undoes this one.
    pub fn inverse(&self) -> Self {
        Self { delays: self.delays.iter().map(|&t| -t).collect() }
    }
}

/// Terminates port `k` (1-based) with reflection coefficient `gamma`:
///
/// `S^R_ij = S_ij + S_ik gamma S_kj / (1 - S_kk gamma)`, with port `k`
/// removed from the labelling.
pub fn reduce_network<T: Real>(
    s: &ScatteringMatrix<T>,
    k: usize,
    gamma: Complex<T>,
) -> Result<ScatteringMatrix<T>> {
    reduce_network_with_eps(s, k, gamma, T::lit(EPS_SINGULAR))
}

pub fn reduce_network_with_eps<T: Real>(
    s: &ScatteringMatrix<T>,
    k: usize,
    gamma: Complex<T>,
    eps: T,
) -> Result<ScatteringMatrix<T>> {
    let n = s.n_ports();
    if k == 0 || k > n {
        return Err(Error::PortOutOfRange { index: k, n_ports: n });
    }
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: n });
    }
    let kk = k - 1;
    let denom = Complex::<T>::one() - s[(kk, kk)] * gamma;
    if denom.norm() <= eps {
        return Err(Error::SingularLoop {
            port: k,
            denominator: denom.norm().to_f64().unwrap_or(0.0),
        });
    }
    let loop_gain = gamma / denom;
    let keep: Vec<usize> = (0..n).filter(|&i| i != kk).collect();
    let m = CMatrix::from_fn(n - 1, |i, j| {
        let (i, j) = (keep[i], keep[j]);
        s[(i, j)] + s[(i, kk)] * loop_gain * s[(kk, j)]
    });
    Ok(ScatteringMatrix(m))
}

/// `S' = P S P` at every frequency. `P` appears twice, never inverted: a
/// positive delay moves the reference plane away from the device.
pub fn shift_reference_planes<T: Real>(
    sweep: &FrequencySweep<T>,
    shift: &ReferencePlaneShift<T>,
) -> Result<FrequencySweep<T>> {
    let n = sweep.n_ports();
    if shift.delays.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: shift.delays.len() });
    }
    sweep.map(|f, s| Ok(shift_matrix(s, &shift.phases(f))))
}

/// `P S P` for a diagonal `P` given by `phases`.
pub fn shift_matrix<T: Real>(s: &ScatteringMatrix<T>, phases: &[Complex<T>]) -> ScatteringMatrix<T> {
    let m = CMatrix::from_fn(s.n_ports(), |i, j| phases[i] * s[(i, j)] * phases[j]);
    ScatteringMatrix(m)
}

/// Common- and differential-mode eigenvalues of a two-port.
///
/// Uses the port-averaged form `s_cm = S21 + (S11+S22)/2`,
/// `s_dm = (S11+S22)/2 - S21`, which reduces to `a +/- d` for
/// `S = [[a, d], [d, a]]` and is insensitive to an antisymmetric reflection
/// splitting `diag(+mu, -mu)`.
pub fn eigenmodes_symmetric2<T: Real>(s: &ScatteringMatrix<T>) -> Result<(Complex<T>, Complex<T>)> {
    if s.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: s.n_ports() });
    }
    let avg = (s.s(1, 1) + s.s(2, 2)).unscale(T::lit(2.0));
    let s21 = s.s(2, 1);
    Ok((avg + s21, avg - s21))
}

/// Largest singular value; `<= 1` for a passive network.
pub fn check_passivity<T: Real>(s: &ScatteringMatrix<T>) -> T {
    linalg::max_singular_value(s.as_matrix())
}

/// `max |S_ij - S_ji|`.
pub fn check_reciprocity<T: Real>(s: &ScatteringMatrix<T>) -> T {
    let m = s.as_matrix();
    (&m.transpose() - m).max_abs()
}

/// `max |(S^H S - I)_ij|`.
pub fn check_unitarity<T: Real>(s: &ScatteringMatrix<T>) -> T {
    let m = s.as_matrix();
    (&(&m.adjoint() * m) - &CMatrix::identity(m.dim())).max_abs()
}

/// True when every entry of `a` and `b` differs by at most `tol`.
pub fn approx_eq<T: Real>(a: &ScatteringMatrix<T>, b: &ScatteringMatrix<T>, tol: T) -> bool {
    a.n_ports() == b.n_ports() && (a.as_matrix() - b.as_matrix()).max_abs() <= tol
}

impl<T: Real> Default for ReferencePlaneShift<T> {
    fn default() -> Self {
        Self { delays: vec![T::zero(); 2] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn matched_tee() -> ScatteringMatrix<f64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        ScatteringMatrix::from_rows(&[
            vec![c(-0.5, 0.0), c(0.5, 0.0), c(r, 0.0)],
            vec![c(0.5, 0.0), c(-0.5, 0.0), c(r, 0.0)],
            vec![c(r, 0.0), c(r, 0.0), c(0.0, 0.0)],
        ])
        .unwrap()
    }

    #[test]
    fn thru_passes_termination() {
        let thru = ScatteringMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        let r = reduce_network(&thru, 2, c(0.5, 0.0)).unwrap();
        assert_eq!(r.n_ports(), 1);
        assert!((r.s(1, 1) - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matched_tee_terminated_by_open_is_a_thru() {
        let r = reduce_network(&matched_tee(), 3, c(1.0, 0.0)).unwrap();
        assert!((r.s(1, 1)).norm() < 1e-15);
        assert!((r.s(2, 2)).norm() < 1e-15);
        assert!((r.s(1, 2) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((r.s(2, 1) - c(1.0, 0.0)).norm() < 1e-15);
        let (cm, dm) = eigenmodes_symmetric2(&r).unwrap();
        assert!((cm - c(1.0, 0.0)).norm() < 1e-15);
        assert!((dm - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matched_termination_deletes_port() {
        let s = matched_tee();
        for k in 1..=3 {
            let r = reduce_network(&s, k, c(0.0, 0.0)).unwrap();
            assert_eq!(r.as_matrix(), &s.as_matrix().without(k - 1));
        }
    }

    #[test]
    fn singular_loop_detected() {
        let s = ScatteringMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        match reduce_network(&s, 2, c(1.0, 0.0)) {
            Err(Error::SingularLoop { port: 2, .. }) => {}
            other => panic!("expected singular loop, got {other:?}"),
        }
    }

    #[test]
    fn port_index_checked() {
        let s = matched_tee();
        assert!(matches!(reduce_network(&s, 0, c(0.0, 0.0)), Err(Error::PortOutOfRange { .. })));
        assert!(matches!(reduce_network(&s, 4, c(0.0, 0.0)), Err(Error::PortOutOfRange { .. })));
    }

    fn thru_sweep() -> FrequencySweep<f64> {
        let thru = ScatteringMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        FrequencySweep::new(vec![1e9, 2e9, 3e9], vec![thru.clone(), thru.clone(), thru]).unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let sw = thru_sweep();
        let out = shift_reference_planes(&sw, &ReferencePlaneShift::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(out, sw);
    }

    #[test]
    fn shift_on_port_one_rotates_transmission_only() {
        let sw = thru_sweep();
        let t = 37e-12;
        let out = shift_reference_planes(&sw, &ReferencePlaneShift::new(vec![t, 0.0])).unwrap();
        for (f, m) in out.iter() {
            let p = cis(std::f64::consts::TAU * f * t);
            assert!((m.s(2, 1) - p).norm() < 1e-15);
            assert!((m.s(1, 2) - p).norm() < 1e-15);
            assert!(m.s(1, 1).norm() < 1e-15);
            assert!(m.s(2, 2).norm() < 1e-15);
        }
    }

    #[test]
    fn shift_round_trip() {
        let sw = thru_sweep();
        let sh = ReferencePlaneShift::new(vec![0.0, 1.3e-10]);
        let back = shift_reference_planes(&shift_reference_planes(&sw, &sh).unwrap(), &sh.inverse()).unwrap();
        for (a, b) in back.matrices().iter().zip(sw.matrices()) {
            assert!(approx_eq(a, b, 1e-12));
        }
    }

    #[test]
    fn shift_dimension_checked() {
        assert!(matches!(
            shift_reference_planes(&thru_sweep(), &ReferencePlaneShift::new(vec![0.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn eigenmodes_of_symmetric_two_port() {
        let s = ScatteringMatrix::from_rows(&[vec![c(0.2, 0.0), c(0.5, 0.0)], vec![c(0.5, 0.0), c(0.2, 0.0)]])
            .unwrap();
        let (cm, dm) = eigenmodes_symmetric2(&s).unwrap();
        assert!((cm - c(0.7, 0.0)).norm() < 1e-15);
        assert!((dm - c(-0.3, 0.0)).norm() < 1e-15);

        let mu = c(0.03, -0.01);
        let split = ScatteringMatrix::from_rows(&[
            vec![c(0.2, 0.0) + mu, c(0.5, 0.0)],
            vec![c(0.5, 0.0), c(0.2, 0.0) - mu],
        ])
        .unwrap();
        let (cm2, dm2) = eigenmodes_symmetric2(&split).unwrap();
        assert!((cm2 - cm).norm() < 1e-15 && (dm2 - dm).norm() < 1e-15);
    }

    #[test]
    fn diagnostics() {
        let id = ScatteringMatrix::<f64>::identity(3);
        assert_eq!(check_unitarity(&id), 0.0);
        assert_eq!(check_reciprocity(&id), 0.0);
        assert!(check_unitarity(&matched_tee()) < 1e-15);
        let nr = ScatteringMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.5, 0.0)], vec![c(0.9, 0.0), c(0.0, 0.0)]])
            .unwrap();
        assert!((check_reciprocity(&nr) - 0.4).abs() < 1e-15);
        assert!((check_passivity(&nr) - 0.9).abs() < 1e-14);
    }

    #[test]
    fn sweep_validation() {
        let m = ScatteringMatrix::<f64>::identity(2);
        assert!(FrequencySweep::new(vec![1.0], vec![m.clone()]).is_err());
        assert!(FrequencySweep::new(vec![1.0, 1.0], vec![m.clone(), m.clone()]).is_err());
        assert!(FrequencySweep::new(vec![1.0, 2.0], vec![m.clone()]).is_err());
        assert!(FrequencySweep::new(vec![1.0, 2.0], vec![m, ScatteringMatrix::identity(3)]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let thru = ScatteringMatrix::from_rows(&[
            vec![cplx::<f32>(0.0, 0.0), cplx(1.0, 0.0)],
            vec![cplx(1.0, 0.0), cplx(0.0, 0.0)],
        ])
        .unwrap();
        let r = reduce_network(&thru, 2, cplx(0.25, 0.0)).unwrap();
        assert!((r.s(1, 1) - cplx(0.25, 0.0)).norm() < 1e-6);
    }
}
