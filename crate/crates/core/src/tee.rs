//! Symmetric lossless tee-junctions.
//!
//! Ports 1 and 2 are interchangeable, port 3 is the branch. The scattering
//! matrix has the layout
//!
//! ```text
//! [ alpha  delta  gamma ]
//! [ delta  alpha  gamma ]
//! [ gamma  gamma  beta  ]
//! ```
//!
//! and is diagonalized by the fixed real orthogonal basis
//! `a1 = (1, -1, 0)/sqrt2`, `a2 = (1, 1, -sqrt2)/2`, `a3 = (1, 1, sqrt2)/2`,
//! which also diagonalizes the port-1/port-2 exchange.

use num_complex::Complex;
use num_traits::One;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::models::{mobius_map, CouplingBeta};
use crate::netcore::{check_unitarity, reduce_network, ScatteringMatrix};
use crate::scalar::{cis, wrap_pi, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeeJunction<T> {
    pub alpha: Complex<T>,
    pub beta: Complex<T>,
    pub gamma: Complex<T>,
    pub delta: Complex<T>,
}

/// Eigenvalues `s_n = exp(i theta_n)` of a symmetric lossless tee, indexed by
/// the basis vectors `a1`, `a2`, `a3`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TeeEigenphases<T> {
    pub theta1: T,
    pub theta2: T,
    pub theta3: T,
}

impl<T: Real> TeeEigenphases<T> {
    pub fn new(theta1: T, theta2: T, theta3: T) -> Self {
        Self { theta1, theta2, theta3 }
    }

    pub fn eigenvalues(&self) -> [Complex<T>; 3] {
        [cis(self.theta1), cis(self.theta2), cis(self.theta3)]
    }

    /// Phases with `s3 = 1` whose coupling-port reflection is the given
    /// `beta` (`s2 = 2 beta - 1`); `theta1` sets the differential mode.
    pub fn for_coupling(beta: &CouplingBeta<T>, theta1: T) -> Self {
        let s2 = beta.value().scale(T::lit(2.0)) - Complex::one();
        Self { theta1, theta2: s2.arg(), theta3: T::zero() }
    }
}

fn basis<T: Real>() -> [[T; 3]; 3] {
    let h = T::FRAC_1_SQRT_2();
    let half = T::lit(0.5);
    [[h, -h, T::zero()], [half, half, -h], [half, half, h]]
}

/// Builds the junction from its eigenphases:
/// `alpha = (2 s1 + s2 + s3)/4`, `beta = (s2 + s3)/2`,
/// `gamma = sqrt2 (s3 - s2)/4`, `delta = (s2 + s3 - 2 s1)/4`.
pub fn tee_from_eigenphases<T: Real>(e: &TeeEigenphases<T>) -> TeeJunction<T> {
    let [s1, s2, s3] = e.eigenvalues();
    let quarter = T::lit(0.25);
    let two = T::lit(2.0);
    TeeJunction {
        alpha: (s1.scale(two) + s2 + s3).scale(quarter),
        beta: (s2 + s3).scale(T::lit(0.5)),
        gamma: (s3 - s2).scale(T::SQRT_2() * quarter),
        delta: (s2 + s3 - s1.scale(two)).scale(quarter),
    }
}

/// Recovers the eigenphases by projecting onto the fixed basis, so each phase
/// is tied to its eigenvector rather than to a sort order.
pub fn eigenphases_from_tee<T: Real>(t: &TeeJunction<T>) -> Result<TeeEigenphases<T>> {
    eigenphases_from_matrix(&t.scattering_matrix(), T::lit(1e-10))
}

/// As [`eigenphases_from_tee`] for an arbitrary 3x3 matrix; fails with
/// `NotSymmetric` if the basis vectors are not eigenvectors within `tol`.
pub fn eigenphases_from_matrix<T: Real>(s: &ScatteringMatrix<T>, tol: T) -> Result<TeeEigenphases<T>> {
    if s.n_ports() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: s.n_ports() });
    }
    let covering = verify_covering_symmetry(s)?;
    if covering > tol {
        return Err(Error::NotSymmetric { residual: covering.to_f64().unwrap_or(f64::NAN) });
    }
    let a = basis::<T>();
    let mut theta = [T::zero(); 3];
    for (n, v) in a.iter().enumerate() {
        let sv: Vec<Complex<T>> =
            (0..3).map(|i| (0..3).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + s[(i, j)].scale(v[j]))).collect();
        let lambda = (0..3).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + sv[i].scale(v[i]));
        let resid = (0..3).map(|i| (sv[i] - lambda.scale(v[i])).norm()).fold(T::zero(), T::max);
        if resid > tol {
            return Err(Error::NotSymmetric { residual: resid.to_f64().unwrap_or(f64::NAN) });
        }
        theta[n] = wrap_pi(lambda.arg());
    }
    Ok(TeeEigenphases { theta1: theta[0], theta2: theta[1], theta3: theta[2] })
}

/// `max |F^-1 S F - S|` with `F` exchanging ports 1 and 2; zero iff the two
/// ports are interchangeable.
pub fn verify_covering_symmetry<T: Real>(s: &ScatteringMatrix<T>) -> Result<T> {
    let n = s.n_ports();
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 3, found: n });
    }
    let swap = |i: usize| match i {
        0 => 1,
        1 => 0,
        k => k,
    };
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((s[(swap(i), swap(j))] - s[(i, j)]).norm());
        }
    }
    Ok(worst)
}

impl<T: Real> TeeJunction<T> {
    /// Builds a junction and checks `alpha + delta = beta`,
    /// `beta + sqrt2 gamma = 1` and unitarity within `tol`.
    pub fn new(alpha: Complex<T>, beta: Complex<T>, gamma: Complex<T>, delta: Complex<T>, tol: T) -> Result<Self> {
        let t = Self { alpha, beta, gamma, delta };
        let (r1, r2) = t.symmetry_residuals(Complex::one());
        let unit = check_unitarity(&t.scattering_matrix());
        if r1 > tol || r2 > tol || unit > tol {
            return Err(Error::InvalidParameter(format!(
                "tee violates symmetry conditions (|alpha+delta-beta|={r1:e}, |beta+sqrt2 gamma-1|={r2:e}, unitarity {unit:e})"
            )));
        }
        Ok(t)
    }

    pub fn matrix(&self) -> CMatrix<T> {
        let (a, b, g, d) = (self.alpha, self.beta, self.gamma, self.delta);
        CMatrix::from_rows(&[vec![a, d, g], vec![d, a, g], vec![g, g, b]])
    }

    pub fn scattering_matrix(&self) -> ScatteringMatrix<T> {
        ScatteringMatrix::new(self.matrix()).expect("3x3 matrix")
    }

    /// `(|alpha + delta - beta|, |beta + sqrt2 gamma - s3|)`. With `s3 = 1`
    /// these are the two symmetry conditions of the lossless junction.
    pub fn symmetry_residuals(&self, s3: Complex<T>) -> (T, T) {
        (
            (self.alpha + self.delta - self.beta).norm(),
            (self.beta + self.gamma.scale(T::SQRT_2()) - s3).norm(),
        )
    }

    /// Branch-port reflection as a coupling coefficient.
    pub fn coupling_beta(&self) -> CouplingBeta<T> {
        CouplingBeta::new_unchecked(self.beta)
    }

    /// Differential-mode eigenvalue `alpha - delta = s1`, independent of the
    /// termination at port 3.
    pub fn s_dm(&self) -> Complex<T> {
        self.alpha - self.delta
    }

    /// `zeta = gamma^2 Gamma / (1 - beta Gamma)`.
    pub fn zeta(&self, gamma_res: Complex<T>) -> Result<Complex<T>> {
        let denom = Complex::<T>::one() - self.beta * gamma_res;
        if denom.norm() <= T::lit(crate::netcore::EPS_SINGULAR) {
            return Err(Error::SingularLoop { port: 3, denominator: denom.norm().to_f64().unwrap_or(0.0) });
        }
        Ok(self.gamma * self.gamma * gamma_res / denom)
    }

    /// Closed-form two-port after terminating port 3:
    /// `[[alpha + zeta, delta + zeta], [delta + zeta, alpha + zeta]]`.
    pub fn reduced(&self, gamma_res: Complex<T>) -> Result<ScatteringMatrix<T>> {
        let z = self.zeta(gamma_res)?;
        let (d, o) = (self.alpha + z, self.delta + z);
        ScatteringMatrix::from_rows(&[vec![d, o], vec![o, d]])
    }
}

/// Terminates port 3 of `t` with `gamma_res` and returns
/// `(S11R + S21R, M(gamma_res))`; the two agree for a symmetric lossless tee.
pub fn erm_identity_check<T: Real>(t: &TeeJunction<T>, gamma_res: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
    let r = reduce_network(&t.scattering_matrix(), 3, gamma_res)?;
    let lhs = r.s(1, 1) + r.s(2, 1);
    let rhs = mobius_map(&t.coupling_beta(), gamma_res)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{check_reciprocity, eigenmodes_symmetric2};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn matched() -> TeeJunction<f64> {
        tee_from_eigenphases(&TeeEigenphases::new(PI, PI, 0.0))
    }

    #[test]
    fn identity_phases_give_open_ports() {
        let t = tee_from_eigenphases(&TeeEigenphases::new(0.0, 0.0, 0.0));
        assert!((t.alpha - c(1.0, 0.0)).norm() < 1e-15);
        assert!((t.beta - c(1.0, 0.0)).norm() < 1e-15);
        assert!(t.gamma.norm() < 1e-15 && t.delta.norm() < 1e-15);
    }

    #[test]
    fn matched_shunt_tee() {
        let t = matched();
        let expect = [
            [c(-0.5, 0.0), c(0.5, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            [c(0.5, 0.0), c(-0.5, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0)],
        ];
        let m = t.matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - expect[i][j]).norm() < 1e-15);
            }
        }
        assert!(check_unitarity(&t.scattering_matrix()) < 1e-15);
    }

    #[test]
    fn thru_decoupled_from_branch() {
        let t = tee_from_eigenphases(&TeeEigenphases::new(PI, 0.0, 0.0));
        assert!(t.alpha.norm() < 1e-15 && t.gamma.norm() < 1e-15);
        assert!((t.beta - c(1.0, 0.0)).norm() < 1e-15 && (t.delta - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn covering_residuals() {
        assert_eq!(verify_covering_symmetry(&matched().scattering_matrix()).unwrap(), 0.0);
        let s = ScatteringMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.5, 0.0), c(0.3, 0.0)],
            vec![c(0.5, 0.0), c(0.0, 0.0), c(0.7, 0.0)],
            vec![c(0.3, 0.0), c(0.7, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!((verify_covering_symmetry(&s).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn eigenphase_round_trips() {
        let m = eigenphases_from_tee(&matched()).unwrap();
        assert!((m.theta1 - PI).abs() < 1e-12 && (m.theta2 - PI).abs() < 1e-12 && m.theta3.abs() < 1e-12);
        let open = tee_from_eigenphases(&TeeEigenphases::new(0.0f64, 0.0, 0.0));
        let z = eigenphases_from_tee(&open).unwrap();
        assert!(z.theta1.abs() < 1e-15 && z.theta2.abs() < 1e-15 && z.theta3.abs() < 1e-15);
    }

    #[test]
    fn eigenphases_reject_asymmetric_matrix() {
        let s = ScatteringMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.5, 0.0), c(0.3, 0.0)],
            vec![c(0.5, 0.0), c(0.0, 0.0), c(0.7, 0.0)],
            vec![c(0.3, 0.0), c(0.7, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(eigenphases_from_matrix(&s, 1e-10), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn symmetry_conditions_hold_iff_s3_is_one() {
        let t = tee_from_eigenphases(&TeeEigenphases::new(0.4, -1.1, 0.0));
        let (r1, r2) = t.symmetry_residuals(c(1.0, 0.0));
        assert!(r1 < 1e-15 && r2 < 1e-15);
        assert!(TeeJunction::new(t.alpha, t.beta, t.gamma, t.delta, 1e-12).is_ok());

        let e = TeeEigenphases::new(0.4, -1.1, 0.7);
        let t = tee_from_eigenphases(&e);
        let (r1, r2) = t.symmetry_residuals(c(1.0, 0.0));
        assert!(r1 < 1e-15 && r2 > 0.1);
        assert!(t.symmetry_residuals(e.eigenvalues()[2]).1 < 1e-15);
    }

    #[test]
    fn matched_tee_identity_map() {
        let t = matched();
        for g in [c(0.3, 0.4), c(-0.9, 0.1), c(0.0, -1.0)] {
            let (lhs, rhs) = erm_identity_check(&t, g).unwrap();
            assert!((lhs - g).norm() < 1e-15 && (rhs - g).norm() < 1e-15);
        }
    }

    #[test]
    fn open_termination_is_fixed_point() {
        let t = tee_from_eigenphases(&TeeEigenphases::new(1.3, 2.2, 0.0));
        let (lhs, rhs) = erm_identity_check(&t, c(1.0, 0.0)).unwrap();
        assert!((lhs - c(1.0, 0.0)).norm() < 1e-14 && (rhs - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn closed_form_reduction_matches_general_formula() {
        let t = tee_from_eigenphases(&TeeEigenphases::new(-2.0f64, 0.8, 0.0));
        let g = cis(0.3).scale(0.9);
        let a = t.reduced(g).unwrap();
        let b = reduce_network(&t.scattering_matrix(), 3, g).unwrap();
        assert!(crate::netcore::approx_eq(&a, &b, 1e-14));
        let (_, dm) = eigenmodes_symmetric2(&b).unwrap();
        assert!((dm - t.s_dm()).norm() < 1e-14);
        assert!((dm.norm() - 1.0).abs() < 1e-14);
        assert!(check_reciprocity(&b) < 1e-15);
    }

    #[test]
    fn phases_for_coupling_reproduce_beta() {
        let beta = CouplingBeta::from_reactance(1.4f64);
        let t = tee_from_eigenphases(&TeeEigenphases::for_coupling(&beta, 2.5));
        assert!((t.beta - beta.value()).norm() < 1e-15);
        assert!((t.coupling_beta().reactance().unwrap() - 1.4).abs() < 1e-13);
    }
}
