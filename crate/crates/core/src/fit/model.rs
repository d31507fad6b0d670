//! Lineshape evaluation and analytic derivatives in fit coordinates.

use num_complex::Complex64;

use super::{FitParams, Model};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One free coordinate of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Coord {
    /// Resonance offset from the reference frequency, in reference linewidths.
    F0,
    LnQi,
    /// `ln Qc`, or `ln |Qc_hat|` for the diameter-correction model.
    LnQc,
    Phi0,
    /// Fano angle slope in radians per reference linewidth.
    PhiSlope,
    GExt,
    Amplitude,
    Phase,
}

impl Coord {
    pub(crate) fn label(self) -> &'static str {
        match self {
            Coord::F0 => "f0",
            Coord::LnQi => "qi",
            Coord::LnQc => "qc",
            Coord::Phi0 => "phi0",
            Coord::PhiSlope => "phi_slope",
            Coord::GExt => "g_ext",
            Coord::Amplitude => "amplitude",
            Coord::Phase => "phase_offset",
        }
    }
}

/// Maps optimizer coordinates to physical parameters and back.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub model: Model,
    pub coords: Vec<Coord>,
    /// Reference frequency and linewidth used to scale `f0` and `phi_slope`.
    pub f_ref: f64,
    pub lw_ref: f64,
    /// Values of parameters that are not optimized.
    pub fixed: FitParams,
}

impl Layout {
    pub(crate) fn new(model: Model, fit_phi_slope: bool, start: &FitParams) -> Self {
        use Coord::*;
        let mut coords = vec![F0, LnQi, LnQc];
        match model {
            Model::Erm | Model::Reflection => coords.extend([Amplitude, Phase]),
            Model::Hanger => {
                coords.push(Phi0);
                if fit_phi_slope {
                    coords.push(PhiSlope);
                }
                coords.extend([Amplitude, Phase]);
            }
            Model::LossyErm => coords.extend([GExt, Phase]),
            Model::Dcm => coords.extend([Phi0, Amplitude, Phase]),
        }
        let lw_ref = start.f0 / start.q_loaded(model);
        Self { model, coords, f_ref: start.f0, lw_ref, fixed: *start }
    }

    pub(crate) fn to_vector(&self, p: &FitParams) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match c {
                Coord::F0 => (p.f0 - self.f_ref) / self.lw_ref,
                Coord::LnQi => p.qi.ln(),
                Coord::LnQc => p.qc.ln(),
                Coord::Phi0 => p.phi0.unwrap_or(0.0),
                Coord::PhiSlope => p.phi_slope.unwrap_or(0.0) * self.lw_ref,
                Coord::GExt => p.g_ext.unwrap_or(0.0),
                Coord::Amplitude => p.amplitude,
                Coord::Phase => p.phase_offset,
            })
            .collect()
    }

    pub(crate) fn from_vector(&self, v: &[f64]) -> FitParams {
        let mut p = self.fixed;
        for (c, &x) in self.coords.iter().zip(v) {
            match c {
                Coord::F0 => p.f0 = self.f_ref + x * self.lw_ref,
                Coord::LnQi => p.qi = x.exp(),
                Coord::LnQc => p.qc = x.exp(),
                Coord::Phi0 => p.phi0 = Some(x),
                Coord::PhiSlope => p.phi_slope = Some(x / self.lw_ref),
                Coord::GExt => p.g_ext = Some(x),
                Coord::Amplitude => p.amplitude = x,
                Coord::Phase => p.phase_offset = x,
            }
        }
        p
    }

    /// `d(physical)/d(coordinate)` for each coordinate, for the delta method.
    pub(crate) fn physical_scale(&self, p: &FitParams) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match c {
                Coord::F0 => self.lw_ref,
                Coord::LnQi => p.qi,
                Coord::LnQc => p.qc,
                Coord::PhiSlope => 1.0 / self.lw_ref,
                _ => 1.0,
            })
            .collect()
    }
}

/// Model value at `f` and its derivative with respect to each coordinate.
pub(crate) fn evaluate(layout: &Layout, p: &FitParams, f: f64, grad: &mut [Complex64]) -> Complex64 {
    let x = (f - p.f0) / p.f0;
    let dx_df0 = -f / (p.f0 * p.f0) * layout.lw_ref;
    let pref = p.amplitude * Complex64::from_polar(1.0, p.phase_offset);
    let unit = Complex64::from_polar(1.0, p.phase_offset);

    // Loaded Q and its derivatives with respect to ln Qi, ln Qc and phi.
    let (q, dq_dlnqi, dq_dlnqc, dq_dphi) = match layout.model {
        Model::Dcm => {
            let phi = p.phi0.unwrap_or(0.0);
            let c = phi.cos();
            let inv = 1.0 / p.qi + c / p.qc;
            let q = 1.0 / inv;
            (q, q * q / p.qi, q * q * c / p.qc, q * q * phi.sin() / p.qc)
        }
        _ => {
            let q = p.qi * p.qc / (p.qi + p.qc);
            (q, q * q / p.qi, q * q / p.qc, 0.0)
        }
    };
    let l = Complex64::new(1.0, -2.0 * q * x).inv();
    let l2 = l * l;
    // dL/dp = 2i L^2 (x dQ/dp + Q dx/dp)
    let dl = |dq: f64, dx: f64| 2.0 * I * l2 * (x * dq + q * dx);

    match layout.model {
        Model::Erm | Model::Reflection | Model::LossyErm | Model::Hanger => {
            let k = q / p.qc;
            let dk_dlnqi = k * (1.0 - k);
            let gamma = 1.0 - 2.0 * k * l;
            let d_gamma = |dk: f64, dq: f64, dx: f64| -2.0 * dk * l - 2.0 * k * dl(dq, dx);
            let g_f0 = d_gamma(0.0, 0.0, dx_df0);
            let g_lnqi = d_gamma(dk_dlnqi, dq_dlnqi, 0.0);
            let g_lnqc = d_gamma(-dk_dlnqi, dq_dlnqc, 0.0);

            let (base, scale_b, extra): (Complex64, Complex64, Option<(f64, Complex64)>) = match layout.model {
                Model::Erm => (gamma, Complex64::new(1.0, 0.0), None),
                Model::Reflection => (-gamma, Complex64::new(-1.0, 0.0), None),
                Model::LossyErm => {
                    let g = p.g_ext.unwrap_or(0.0);
                    let att = (1.0 - g) / (1.0 + g);
                    (att * gamma, Complex64::new(att, 0.0), None)
                }
                Model::Hanger => {
                    let slope = p.phi_slope.unwrap_or(0.0);
                    let phi = p.phi0.unwrap_or(0.0) + slope * (f - p.f0);
                    let e = Complex64::from_polar(1.0, -2.0 * phi);
                    (0.5 * (e + gamma), Complex64::new(0.5, 0.0), Some((slope, e)))
                }
                Model::Dcm => unreachable!(),
            };
            let value = match layout.model {
                Model::LossyErm => unit * base,
                _ => pref * base,
            };
            let outer = match layout.model {
                Model::LossyErm => unit,
                _ => pref,
            };
            for (slot, c) in grad.iter_mut().zip(&layout.coords) {
                *slot = match c {
                    Coord::F0 => {
                        let mut d = scale_b * g_f0;
                        if let Some((slope, e)) = extra {
                            // phi(f) depends on f0 through (f - f0).
                            d += -I * e * (-slope * layout.lw_ref);
                        }
                        outer * d
                    }
                    Coord::LnQi => outer * scale_b * g_lnqi,
                    Coord::LnQc => outer * scale_b * g_lnqc,
                    Coord::Phi0 => {
                        let (_, e) = extra.expect("hanger");
                        outer * (-I * e)
                    }
                    Coord::PhiSlope => {
                        let (_, e) = extra.expect("hanger");
                        outer * (-I * e * ((f - p.f0) / layout.lw_ref))
                    }
                    Coord::GExt => {
                        let g = p.g_ext.unwrap_or(0.0);
                        unit * gamma * (-2.0 / ((1.0 + g) * (1.0 + g)))
                    }
                    Coord::Amplitude => unit * base,
                    Coord::Phase => I * value,
                };
            }
            value
        }
        Model::Dcm => {
            let phi = p.phi0.unwrap_or(0.0);
            let e = Complex64::from_polar(1.0, phi);
            let kk = (q / p.qc) * e;
            let base = 1.0 - kk * l;
            let value = pref * base;
            for (slot, c) in grad.iter_mut().zip(&layout.coords) {
                *slot = match c {
                    Coord::F0 => pref * (-kk * dl(0.0, dx_df0)),
                    Coord::LnQi => {
                        let dk = (dq_dlnqi / p.qc) * e;
                        pref * (-dk * l - kk * dl(dq_dlnqi, 0.0))
                    }
                    Coord::LnQc => {
                        let dk = ((dq_dlnqc - q) / p.qc) * e;
                        pref * (-dk * l - kk * dl(dq_dlnqc, 0.0))
                    }
                    Coord::Phi0 => {
                        let dk = (dq_dphi / p.qc) * e + I * kk;
                        pref * (-dk * l - kk * dl(dq_dphi, 0.0))
                    }
                    Coord::Amplitude => unit * base,
                    Coord::Phase => I * value,
                    Coord::PhiSlope | Coord::GExt => unreachable!("not part of the diameter-correction layout"),
                };
            }
            value
        }
    }
}

/// Model value only.
pub fn model_value(model: Model, p: &FitParams, f: f64) -> Complex64 {
    let layout = Layout::new(model, false, p);
    evaluate(&layout, p, f, &mut [])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{erm_response, hanger_s21, HangerParams, ResonatorParams};

    fn base() -> FitParams {
        FitParams {
            f0: 5e9,
            qi: 3e5,
            qc: 8e4,
            phi0: None,
            phi_slope: None,
            g_ext: None,
            amplitude: 0.8,
            phase_offset: 0.4,
        }
    }

    #[test]
    fn values_match_closed_forms() {
        let p = base();
        let r = ResonatorParams::new(p.f0, p.qi, p.qc).unwrap();
        let pref = 0.8 * Complex64::from_polar(1.0, 0.4);
        for k in -5..=5 {
            let f = p.f0 + k as f64 * 2e4;
            assert!((model_value(Model::Erm, &p, f) - pref * erm_response(&r, f)).norm() < 1e-14);
            assert!((model_value(Model::Reflection, &p, f) + pref * erm_response(&r, f)).norm() < 1e-14);
            let h = FitParams { phi0: Some(0.7), phi_slope: Some(1e-6), ..p };
            let hp = HangerParams::new(r, 0.7, 1e-6).unwrap();
            assert!((model_value(Model::Hanger, &h, f) - pref * hanger_s21(&hp, f)).norm() < 1e-14);
        }
    }

    #[test]
    fn dcm_matches_prefactor_form() {
        // 1 - (Q/Qc_hat) e^{i phi} L with Qc_hat = Qc cos(phi) is the hanger
        // lineshape divided by its prefactor exp(-i phi) cos(phi).
        let phi: f64 = 0.6;
        let p = base();
        let r = ResonatorParams::new(p.f0, p.qi, p.qc).unwrap();
        let hp = HangerParams::new(r, phi, 0.0).unwrap();
        let d = FitParams { qc: p.qc * phi.cos(), phi0: Some(phi), amplitude: 1.0, phase_offset: 0.0, ..p };
        for k in -5..=5 {
            let f = p.f0 + k as f64 * 2e4;
            let expect = hanger_s21(&hp, f) / (Complex64::from_polar(1.0, -phi) * phi.cos());
            assert!((model_value(Model::Dcm, &d, f) - expect).norm() < 1e-12);
        }
    }

    fn check_jacobian(model: Model, p: FitParams, slope: bool) {
        let layout = Layout::new(model, slope, &p);
        let v = layout.to_vector(&p);
        let n = v.len();
        for k in -8..=8 {
            let f = p.f0 + k as f64 * 0.3 * layout.lw_ref;
            let mut grad = vec![Complex64::new(0.0, 0.0); n];
            evaluate(&layout, &p, f, &mut grad);
            for c in 0..n {
                let h = 1e-6 * (1.0 + v[c].abs());
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[c] += h;
                vm[c] -= h;
                let fp = evaluate(&layout, &layout.from_vector(&vp), f, &mut []);
                let fm = evaluate(&layout, &layout.from_vector(&vm), f, &mut []);
                // Realized step, since f0 offsets round at the scale of f0.
                let h2 = layout.to_vector(&layout.from_vector(&vp))[c] - layout.to_vector(&layout.from_vector(&vm))[c];
                let fd = (fp - fm) / h2;
                let err = (fd - grad[c]).norm();
                assert!(err <= 1e-6 * grad[c].norm().max(1e-3), "{model:?} {:?}: {err:e}", layout.coords[c]);
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let p = base();
        check_jacobian(Model::Erm, p, false);
        check_jacobian(Model::Reflection, p, false);
        check_jacobian(Model::Hanger, FitParams { phi0: Some(0.5), phi_slope: Some(2e-5), ..p }, true);
        check_jacobian(Model::Hanger, FitParams { phi0: Some(1.8), phi_slope: Some(0.0), ..p }, false);
        check_jacobian(Model::LossyErm, FitParams { g_ext: Some(0.05), amplitude: 1.0, ..p }, false);
        check_jacobian(Model::Dcm, FitParams { phi0: Some(-0.4), ..p }, false);
    }
}
