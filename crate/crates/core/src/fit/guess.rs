//! Starting values from resonance-circle geometry.

use num_complex::Complex64;

use super::{FitParams, Model};
use crate::circle::fit_circle;
use crate::error::{Error, Result};
use crate::scalar::wrap_pi;

pub const MIN_POINTS: usize = 16;
pub const MIN_SPAN_LINEWIDTHS: f64 = 3.0;

fn edge_mean(z: &[Complex64]) -> Complex64 {
    let k = (z.len() / 20).max(1);
    let n = z.len();
    (z[..k].iter().sum::<Complex64>() + z[n - k..].iter().sum::<Complex64>()) / (2 * k) as f64
}

/// Half-power width of `w` (peaked at `k`), linearly interpolated between
/// samples. `None` if either side never drops below half the peak.
fn half_power_width(freqs: &[f64], w: &[f64], k: usize) -> Option<f64> {
    let half = 0.5 * w[k];
    let crossing = |i: usize, j: usize| {
        let t = (w[i] - half) / (w[i] - w[j]);
        freqs[i] + t * (freqs[j] - freqs[i])
    };
    let left = (1..=k).rev().find(|&i| w[i - 1] <= half).map(|i| crossing(i, i - 1))?;
    let right = (k..w.len() - 1).find(|&i| w[i + 1] <= half).map(|i| crossing(i, i + 1))?;
    Some(right - left)
}

/// Geometric initial estimate.
///
/// The resonance is the sample farthest from the off-resonant level; the
/// off-resonant point is then refined as the point of the fitted circle
/// diametrically opposite the resonance. The loaded Q comes from the
/// half-power width of `|z - off|^2` and the coupling ratio from the circle
/// diameter.
pub fn initial_guess(freqs: &[f64], z: &[Complex64], model: Model) -> Result<FitParams> {
    if freqs.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: freqs.len(), found: z.len() });
    }
    if z.len() < MIN_POINTS {
        return Err(Error::InsufficientSpan(format!("{} points, need at least {MIN_POINTS}", z.len())));
    }
    let edge = edge_mean(z);
    let (k_res, _) = z
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - edge).norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let circle = fit_circle(z).ok_or_else(|| Error::InsufficientSpan("no resonance circle in data".into()))?;
    let z_res = z[k_res];
    // Use the circle only if it is consistent with the resonance point.
    let off = if (z_res - circle.center).norm() > 0.5 * circle.radius {
        2.0 * circle.center - z_res
    } else {
        edge
    };
    let diameter = (off - z_res).norm();
    let w: Vec<f64> = z.iter().map(|v| (v - off).norm_sqr()).collect();
    let (k_peak, _) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let f0 = freqs[k_peak];
    let fwhm = half_power_width(freqs, &w, k_peak)
        .ok_or_else(|| Error::InsufficientSpan("resonance half-power points not inside the band".into()))?;
    let span = freqs[freqs.len() - 1] - freqs[0];
    if span < MIN_SPAN_LINEWIDTHS * fwhm {
        return Err(Error::InsufficientSpan(format!(
            "band spans {:.2} linewidths, need at least {MIN_SPAN_LINEWIDTHS}",
            span / fwhm
        )));
    }
    let q = f0 / fwhm;

    let clamp_k = |k: f64| k.clamp(1e-6, 1.0 - 1e-6);
    let from_ratio = |k: f64| {
        let k = clamp_k(k);
        (q / (1.0 - k), q / k)
    };
    let mut p = FitParams {
        f0,
        qi: 0.0,
        qc: 0.0,
        phi0: None,
        phi_slope: None,
        g_ext: None,
        amplitude: off.norm(),
        phase_offset: off.arg(),
    };
    match model {
        Model::Erm | Model::Reflection => {
            (p.qi, p.qc) = from_ratio(diameter / (2.0 * p.amplitude));
            if model == Model::Reflection {
                p.phase_offset = wrap_pi(p.phase_offset + std::f64::consts::PI);
            }
        }
        Model::LossyErm => {
            let att = off.norm().min(1.0);
            p.g_ext = Some((1.0 - att) / (1.0 + att));
            p.amplitude = 1.0;
            (p.qi, p.qc) = from_ratio(diameter / (2.0 * att.max(1e-12)));
        }
        Model::Hanger => {
            let center = 0.5 * (off + z_res);
            let theta = (off - center).arg();
            let wv = off * Complex64::from_polar(1.0, -theta);
            let a = if wv.re > 0.0 { wv.norm_sqr() / wv.re } else { wv.norm() };
            let e = 2.0 * wv / a - 1.0;
            p.amplitude = a;
            p.phase_offset = theta;
            p.phi0 = Some(canonical_phi(-0.5 * e.arg()));
            p.phi_slope = Some(0.0);
            (p.qi, p.qc) = from_ratio(diameter / a);
        }
        Model::Dcm => {
            let center = 0.5 * (off + z_res);
            let phi = wrap_pi((off - center).arg() - off.arg());
            let ratio = diameter / off.norm();
            let qc_hat = q / ratio.max(1e-6);
            let inv_qi = (1.0 / q - phi.cos() / qc_hat).max(1e-3 / q);
            p.phi0 = Some(phi);
            p.qc = qc_hat;
            p.qi = 1.0 / inv_qi;
        }
    }
    Ok(p)
}

/// The hanger lineshape depends on the Fano angle only modulo `pi`; this
/// picks the representative in `(-pi/2, pi/2]`.
pub fn canonical_phi(phi: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let mut x = phi % std::f64::consts::PI;
    if x <= -half {
        x += std::f64::consts::PI;
    } else if x > half {
        x -= std::f64::consts::PI;
    }
    x
}
