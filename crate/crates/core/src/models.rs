//! Closed-form frequency responses of a parallel RLC resonator seen through a
//! coupling network.
//!
//! Conventions: time dependence `exp(-i omega t)`, so detuning enters as
//! `1 - 2iQ(f - f0)/f0`. The isolated resonator sits at the plane of detuned
//! short (off-resonant point `-1`); reflection modes and effective reflection
//! modes are expressed at the plane of detuned open (off-resonant point `+1`).

use num_complex::Complex;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Real};

/// Resonant frequency (Hz), internal and coupling quality factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams<T> {
    pub f0: T,
    pub qi: T,
    pub qc: T,
}

impl<T: Real> ResonatorParams<T> {
    pub fn new(f0: T, qi: T, qc: T) -> Result<Self> {
        let p = Self { f0, qi, qc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite() && x > T::zero();
        if !ok(self.f0) {
            return Err(Error::InvalidParameter(format!("f0 must be positive, got {}", self.f0)));
        }
        if !ok(self.qi) || !ok(self.qc) {
            return Err(Error::InvalidParameter(format!(
                "quality factors must be positive, got Qi={} Qc={}",
                self.qi, self.qc
            )));
        }
        Ok(())
    }

    /// Loaded quality factor, `1/Q = 1/Qc + 1/Qi`.
    pub fn q(&self) -> T {
        self.qi * self.qc / (self.qi + self.qc)
    }

    /// `Q/Qc`; half the diameter of the reflection circle.
    pub fn coupling_ratio(&self) -> T {
        self.qi / (self.qi + self.qc)
    }

    /// Full width at half power, `f0/Q`.
    pub fn linewidth(&self) -> T {
        self.f0 / self.q()
    }

    /// `1 / (1 - 2iQ(f - f0)/f0)`.
    #[inline]
    pub fn lorentzian(&self, f: T) -> Complex<T> {
        let x = T::lit(2.0) * self.q() * (f - self.f0) / self.f0;
        Complex::new(T::one(), -x).inv()
    }
}

/// Reflection coefficient of a parallel RLC at the plane of detuned short:
/// `-1 + (2Q/Qc) / (1 - 2iQ(f - f0)/f0)`.
pub fn rlc_reflection<T: Real>(p: &ResonatorParams<T>, f: T) -> Complex<T> {
    p.lorentzian(f).scale(T::lit(2.0) * p.coupling_ratio()) - Complex::one()
}

/// Reflection mode at the plane of detuned open:
/// `1 - (2Q/Qc) / (1 - 2iQ(f - f0)/f0)`.
pub fn erm_response<T: Real>(p: &ResonatorParams<T>, f: T) -> Complex<T> {
    Complex::<T>::one() - p.lorentzian(f).scale(T::lit(2.0) * p.coupling_ratio())
}

/// Reflection coefficient `beta` of the coupling port of a lossless coupling
/// network. Unitarity forces `beta` and `1 - beta` to be orthogonal, so
/// `2 beta / (1 - beta) = -i x_e` for a real reactance `x_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingBeta<T>(Complex<T>);

impl<T: Real> CouplingBeta<T> {
    /// Validates orthogonality of `beta` and `1 - beta` within `tol`.
    pub fn new(beta: Complex<T>, tol: T) -> Result<Self> {
        let one_minus = Complex::<T>::one() - beta;
        let inner = (beta * one_minus.conj()).re;
        let scale = beta.norm() * one_minus.norm();
        if inner.abs() > tol * scale.max(T::epsilon()) {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} is not orthogonal to 1 - beta (inner product {inner:e})"
            )));
        }
        let energy = beta.norm_sqr() + one_minus.norm_sqr();
        if (energy - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "|beta|^2 + |1-beta|^2 = {energy}, expected 1"
            )));
        }
        Ok(Self(beta))
    }

    /// Wraps `beta` without checking the unitarity conditions; for diagnostics
    /// on junctions that need not be lossless.
    pub fn new_unchecked(beta: Complex<T>) -> Self {
        Self(beta)
    }

    /// The coupling port reflection for normalized external reactance `x_e`:
    /// `beta = -i x_e / (2 - i x_e)`.
    pub fn from_reactance(x_e: T) -> Self {
        let num = Complex::new(T::zero(), -x_e);
        Self(num / Complex::new(T::lit(2.0), -x_e))
    }

    pub fn value(&self) -> Complex<T> {
        self.0
    }

    /// `x_e = i * 2 beta / (1 - beta)`; real for a valid beta.
    /// Returns `None` when the port is fully decoupled (`beta = 1`).
    pub fn reactance(&self) -> Option<T> {
        let one_minus = Complex::<T>::one() - self.0;
        if one_minus.norm() <= T::epsilon() {
            return None;
        }
        Some((Complex::new(T::zero(), T::lit(2.0)) * self.0 / one_minus).re)
    }

    /// Off-resonant point `M(-1)`, on the unit circle for valid beta.
    pub fn off_resonant_point(&self) -> Complex<T> {
        let b = self.0;
        (b.scale(T::lit(3.0)) - Complex::one()) / (Complex::<T>::one() + b)
    }
}

/// Reflection-mode map `M(gamma) = (beta + (1 - 2 beta) gamma) / (1 - beta gamma)`.
pub fn mobius_map<T: Real>(beta: &CouplingBeta<T>, gamma: Complex<T>) -> Result<Complex<T>> {
    let b = beta.value();
    let one = Complex::<T>::one();
    let denom = one - b * gamma;
    if denom.norm() <= T::lit(crate::netcore::EPS_SINGULAR) {
        return Err(Error::SingularLoop { port: 0, denominator: denom.norm().to_f64().unwrap_or(0.0) });
    }
    Ok((b + (one - b.scale(T::lit(2.0))) * gamma) / denom)
}

/// Equivalent circuit of a reflection mode seen from the plane of detuned
/// open: external reactance `x_e`, resonator conductance `g = Z0/R`,
/// resistance `r = (x_e^2 + 1) g` and the coupling-induced shift `nu'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErmEquivalentCircuit<T> {
    pub x_e: T,
    pub g: T,
    pub r: T,
    pub nu_shift: T,
}

impl<T: Real> ErmEquivalentCircuit<T> {
    /// Circuit consistent with `p` (`r = Qc/Qi`) for reactance `x_e`.
    pub fn from_params(p: &ResonatorParams<T>, x_e: T) -> Self {
        let r = p.qc / p.qi;
        let g = r / (x_e * x_e + T::one());
        let nu_shift = x_e / (T::lit(2.0) * p.q() * (r + T::one()));
        Self { x_e, g, r, nu_shift }
    }

    /// Checks `1/(r+1) = Q/Qc`, `r/(r+1) = Q/Qi` and the definitions of `r`
    /// and `nu'` within `tol`.
    pub fn validate(&self, p: &ResonatorParams<T>, tol: T) -> Result<()> {
        let one = T::one();
        let q = p.q();
        let checks = [
            (one / (self.r + one) - q / p.qc, "1/(r+1) = Q/Qc"),
            (self.r / (self.r + one) - q / p.qi, "r/(r+1) = Q/Qi"),
            ((self.x_e * self.x_e + one) * self.g / self.r - one, "r = (x_e^2+1) g"),
            (self.nu_shift * T::lit(2.0) * q * (self.r + one) - self.x_e, "nu' = x_e/(2Q(r+1))"),
        ];
        for (resid, what) in checks {
            if resid.abs() > tol {
                return Err(Error::InvalidParameter(format!("equivalent circuit violates {what} ({resid:e})")));
            }
        }
        Ok(())
    }

    /// Parameters of the reflection mode after absorbing the shift into the
    /// detuning: `f0, Qi, Qc` all scale by `1 + nu'`, which reproduces
    /// `1 - (2Q/Qc)/(1 - 2iQ(nu - nu'))` exactly.
    pub fn absorbed_params(&self, p: &ResonatorParams<T>) -> ResonatorParams<T> {
        let k = T::one() + self.nu_shift;
        ResonatorParams { f0: p.f0 * k, qi: p.qi * k, qc: p.qc * k }
    }

    /// Isolated parallel RLC (plane of detuned short) whose admittance is
    /// `y = g (1 - 2i Qi nu)`: same `f0` and `Qi`, coupling `Qc = g Qi`.
    pub fn bare_rlc(&self, p: &ResonatorParams<T>) -> ResonatorParams<T> {
        ResonatorParams { f0: p.f0, qi: p.qi, qc: self.g * p.qi }
    }

    /// Inverse of [`absorbed_params`](Self::absorbed_params): given the
    /// observed reflection-mode parameters and the coupling reactance, returns
    /// the circuit and the unshifted parameters.
    pub fn for_observed(observed: &ResonatorParams<T>, x_e: T) -> Result<(Self, ResonatorParams<T>)> {
        let two_qc = T::lit(2.0) * observed.qc;
        if two_qc <= x_e {
            return Err(Error::InvalidParameter(format!(
                "coupling reactance {x_e} too large for Qc = {}",
                observed.qc
            )));
        }
        let k = T::one() + x_e / (two_qc - x_e);
        let p = ResonatorParams { f0: observed.f0 / k, qi: observed.qi / k, qc: observed.qc / k };
        Ok((Self::from_params(&p, x_e), p))
    }
}

/// Reflection mode through the effective input impedance
/// `z = (x_e^2 + 1) y + i x_e`, `y = g (1 - 2i Qi (f - f0)/f0)`:
/// `Gamma = 1 - 2 / (z + 1)`.
pub fn erm_via_admittance<T: Real>(c: &ErmEquivalentCircuit<T>, p: &ResonatorParams<T>, f: T) -> Complex<T> {
    let nu = (f - p.f0) / p.f0;
    let y = Complex::new(c.g, -T::lit(2.0) * c.g * p.qi * nu);
    let z = y.scale(c.x_e * c.x_e + T::one()) + Complex::new(T::zero(), c.x_e);
    Complex::<T>::one() - (z + Complex::one()).inv().scale(T::lit(2.0))
}

/// Hanger-mode resonator: reflection-mode parameters plus the Fano angle
/// `phi(f) = phi0 + phi_slope (f - f0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HangerParams<T> {
    pub base: ResonatorParams<T>,
    pub phi0: T,
    #[serde(default)]
    pub phi_slope: T,
}

impl<T: Real> HangerParams<T> {
    pub fn new(base: ResonatorParams<T>, phi0: T, phi_slope: T) -> Result<Self> {
        if !(phi0 > -T::PI() && phi0 <= T::PI()) {
            return Err(Error::InvalidParameter(format!("phi0 = {phi0} outside (-pi, pi]")));
        }
        Ok(Self { base, phi0, phi_slope })
    }

    pub fn phi(&self, f: T) -> T {
        self.phi0 + self.phi_slope * (f - self.base.f0)
    }
}

/// Hanger transmission as the half-sum of the two eigenmodes,
/// `S21 = (exp(-2i phi) + Gamma_ERM) / 2`.
pub fn hanger_s21<T: Real>(h: &HangerParams<T>, f: T) -> Complex<T> {
    (cis(-T::lit(2.0) * h.phi(f)) + erm_response(&h.base, f)).scale(T::lit(0.5))
}

/// The same lineshape written with the `exp(-i phi) cos(phi)` prefactor:
/// `exp(-i phi) cos(phi) (1 - (Q/Qc)(1 + i tan phi) / (1 - 2iQ(f - f0)/f0))`.
/// Singular at `cos(phi) = 0`; kept for cross-checking [`hanger_s21`].
pub fn hanger_s21_prefactor_form<T: Real>(h: &HangerParams<T>, f: T) -> Complex<T> {
    let phi = h.phi(f);
    let pref = cis(-phi).scale(phi.cos());
    let num = Complex::new(T::one(), phi.tan()).scale(h.base.coupling_ratio());
    pref * (Complex::<T>::one() - num * h.base.lorentzian(f))
}

/// Reflection mode with loss in the coupling arm modelled by a normalized
/// external shunt conductance `g_ext`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossyErmParams<T> {
    pub base: ResonatorParams<T>,
    pub g_ext: T,
}

impl<T: Real> LossyErmParams<T> {
    pub fn new(base: ResonatorParams<T>, g_ext: T) -> Result<Self> {
        if !(g_ext >= T::zero()) {
            return Err(Error::InvalidParameter(format!("g_ext must be non-negative, got {g_ext}")));
        }
        Ok(Self { base, g_ext })
    }

    /// Off-resonant magnitude `(1 - g_ext) / (1 + g_ext)`.
    pub fn attenuation(&self) -> T {
        coupling_loss_factor(self.g_ext)
    }
}

/// `(1 - g) / (1 + g)`.
pub fn coupling_loss_factor<T: Real>(g_ext: T) -> T {
    (T::one() - g_ext) / (T::one() + g_ext)
}

/// `s_cm = ((1 - g_ext)/(1 + g_ext)) Gamma_ERM`.
pub fn lossy_erm_response<T: Real>(l: &LossyErmParams<T>, f: T) -> Complex<T> {
    erm_response(&l.base, f).scale(l.attenuation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::fit_circle;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn params(qi: f64, qc: f64) -> ResonatorParams<f64> {
        ResonatorParams::new(5e9, qi, qc).unwrap()
    }

    #[test]
    fn quality_factor_combination() {
        let p = params(1e6, 1e5);
        assert!((1.0 / p.q() - (1.0 / 1e6 + 1.0 / 1e5)).abs() < 1e-18);
        assert!(p.q() < p.qi.min(p.qc));
        assert!(ResonatorParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ResonatorParams::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn rlc_limits() {
        let p = params(1e5, 1e5);
        assert!(rlc_reflection(&p, p.f0).norm() < 1e-15);
        assert!((rlc_reflection(&p, 1e15) + c(1.0, 0.0)).norm() < 1e-5);
        let lossless = params(1e300, 1e5);
        assert!((rlc_reflection(&lossless, lossless.f0) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn erm_is_negated_rlc() {
        let p = params(3e5, 1e5);
        for k in -20..=20 {
            let f = p.f0 + k as f64 * p.linewidth() * 0.5;
            assert!((erm_response(&p, f) + rlc_reflection(&p, f)).norm() < 1e-15);
        }
        assert!((erm_response(&p, 1e15) - c(1.0, 0.0)).norm() < 1e-5);
        assert!(erm_response(&params(1e5, 1e5), 5e9).norm() < 1e-15);
    }

    #[test]
    fn mobius_examples() {
        let ident = CouplingBeta::new(c(0.0, 0.0), 1e-12).unwrap();
        assert!((mobius_map(&ident, c(0.3, 0.4)).unwrap() - c(0.3, 0.4)).norm() < 1e-15);
        let b = CouplingBeta::new(c(0.5, -0.5), 1e-12).unwrap();
        assert!((b.reactance().unwrap() - 2.0).abs() < 1e-15);
        assert!((mobius_map(&b, c(1.0, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((mobius_map(&b, c(-1.0, 0.0)).unwrap() - c(0.6, -0.8)).norm() < 1e-15);
        assert!((b.off_resonant_point() - c(0.6, -0.8)).norm() < 1e-15);
        let from_x = CouplingBeta::from_reactance(2.0);
        assert!((from_x.value() - c(0.5, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn beta_validation() {
        assert!(CouplingBeta::new(c(0.5, 0.2), 1e-9).is_err());
        assert!(CouplingBeta::new(c(0.5, 0.5), 1e-12).is_ok());
    }

    #[test]
    fn off_resonant_point_on_unit_circle() {
        for k in -40..=40 {
            let b = CouplingBeta::from_reactance(0.25 * k as f64);
            assert!((b.off_resonant_point().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mobius_maps_resonance_circle_to_circle() {
        let p = params(2e5, 5e4);
        let beta = CouplingBeta::from_reactance(1.3);
        let pts: Vec<Complex<f64>> = (0..=400)
            .map(|k| p.f0 + (k as f64 - 200.0) / 10.0 * p.linewidth())
            .map(|f| mobius_map(&beta, rlc_reflection(&p, f)).unwrap())
            .collect();
        let circ = fit_circle(&pts).unwrap();
        assert!(circ.max_radial_residual(&pts) < 1e-9 * circ.radius);
    }

    #[test]
    fn admittance_route_matches_shifted_erm() {
        for &(qi, qc, x_e) in &[(1e6, 1e5, 0.0), (1e5, 1e5, 2.0), (3e5, 2e4, -0.7), (5e5, 1e5, 5.0)] {
            let p = params(qi, qc);
            let circ = ErmEquivalentCircuit::from_params(&p, x_e);
            circ.validate(&p, 1e-12).unwrap();
            let shifted = circ.absorbed_params(&p);
            for k in -200..=200 {
                let f = p.f0 + k as f64 * 0.1 * p.linewidth();
                let a = erm_via_admittance(&circ, &p, f);
                let b = erm_response(&shifted, f);
                assert!((a - b).norm() < 1e-10, "x_e={x_e} k={k}");
            }
        }
    }

    #[test]
    fn admittance_route_without_reactance() {
        let p = params(4e5, 1e5);
        let circ = ErmEquivalentCircuit::from_params(&p, 0.0);
        assert!((circ.g - p.coupling_ratio() / (p.q() / p.qi) * 0.0 - p.qc / p.qi).abs() < 1e-15);
        for k in -10..=10 {
            let f = p.f0 + k as f64 * p.linewidth();
            let nu = (f - p.f0) / p.f0;
            let y = c(circ.g, -2.0 * circ.g * p.qi * nu);
            let direct = (c(1.0, 0.0) - y) / (c(1.0, 0.0) + y);
            assert!((erm_via_admittance(&circ, &p, f) + direct).norm() < 1e-14);
        }
    }

    #[test]
    fn critical_reflection_mode_with_reactance() {
        let p = params(1e5, 1e5);
        let circ = ErmEquivalentCircuit::from_params(&p, 2.0);
        assert!((circ.r - 1.0).abs() < 1e-15 && (circ.g - 0.2).abs() < 1e-15);
        let shifted = circ.absorbed_params(&p);
        assert!(erm_via_admittance(&circ, &p, shifted.f0).norm() < 1e-12);
        assert!((erm_via_admittance(&circ, &p, 1e14) - c(1.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn admittance_route_matches_rotated_mobius_route() {
        let p = params(3e5, 8e4);
        let x_e = 1.7;
        let circ = ErmEquivalentCircuit::from_params(&p, x_e);
        let beta = CouplingBeta::from_reactance(x_e);
        let bare = circ.bare_rlc(&p);
        let m_open = beta.off_resonant_point();
        for k in -300..=300 {
            let f = p.f0 + k as f64 * 0.07 * p.linewidth();
            let via_map = mobius_map(&beta, rlc_reflection(&bare, f)).unwrap() / m_open;
            assert!((via_map - erm_via_admittance(&circ, &p, f)).norm() < 1e-10);
        }
    }

    #[test]
    fn observed_inversion_round_trip() {
        let observed = params(5e5, 1e5);
        let (circ, p) = ErmEquivalentCircuit::for_observed(&observed, 0.8).unwrap();
        let back = circ.absorbed_params(&p);
        assert!((back.f0 / observed.f0 - 1.0).abs() < 1e-15);
        assert!((back.qi / observed.qi - 1.0).abs() < 1e-14);
        assert!((back.qc / observed.qc - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hanger_examples() {
        let p = params(1e5, 1e5);
        let h0 = HangerParams::new(p, 0.0, 0.0).unwrap();
        assert!((hanger_s21(&h0, p.f0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((hanger_s21(&h0, 1e15) - c(1.0, 0.0)).norm() < 1e-5);

        let p2 = params(4e5, 1e5);
        let h = HangerParams::new(p2, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        assert!((hanger_s21(&h, p2.f0) + c(p2.coupling_ratio(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hanger_turns_into_a_peak_past_quarter_turn() {
        let p = params(4e5, 1e5);
        let h = HangerParams::new(p, 1.8, 0.0).unwrap();
        let off = hanger_s21(&h, p.f0 + 1e3 * p.linewidth()).norm();
        let max_near = (-30..=30)
            .map(|k| hanger_s21(&h, p.f0 + k as f64 * 0.1 * p.linewidth()).norm())
            .fold(0.0, f64::max);
        assert!(max_near > off);
    }

    #[test]
    fn eigenvalue_form_matches_prefactor_form() {
        let p = params(2e5, 6e4);
        for &phi in &[0.0, 0.3, -0.3, 1.2, -1.2] {
            let h = HangerParams::new(p, phi, 0.0).unwrap();
            let worst = (-1000..=1000)
                .map(|k| p.f0 + k as f64 * 0.01 * p.linewidth())
                .map(|f| (hanger_s21(&h, f) - hanger_s21_prefactor_form(&h, f)).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "phi={phi}: {worst:e}");
        }
    }

    #[test]
    fn phi_range_checked() {
        let p = params(1e5, 1e5);
        assert!(HangerParams::new(p, -std::f64::consts::PI, 0.0).is_err());
        assert!(HangerParams::new(p, std::f64::consts::PI, 0.0).is_ok());
    }

    #[test]
    fn lossy_variants() {
        let p = params(3e5, 1e5);
        let l0 = LossyErmParams::new(p, 0.0).unwrap();
        let l1 = LossyErmParams::new(p, 1.0).unwrap();
        let l5 = LossyErmParams::new(p, 0.05).unwrap();
        for k in -5..=5 {
            let f = p.f0 + k as f64 * p.linewidth();
            assert_eq!(lossy_erm_response(&l0, f), erm_response(&p, f));
            assert_eq!(lossy_erm_response(&l1, f), c(0.0, 0.0));
        }
        assert!((lossy_erm_response(&l5, 1e16).norm() - 0.95 / 1.05).abs() < 1e-6);
        assert!((l5.attenuation() - 0.904_761_904_761_904_8).abs() < 1e-15);
        assert!(LossyErmParams::new(p, -0.1).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let p = ResonatorParams::new(5e9f32, 1e5, 1e5).unwrap();
        assert!(erm_response(&p, 5e9).norm() < 1e-5);
    }
}
