//! Nonlinear least-squares fits of resonator lineshapes.
//!
//! Residuals are `data - model` with real and imaginary parts as separate
//! entries. The optimizer works in `{f0 offset in linewidths, ln Qi, ln Qc,
//! phi0, phi_slope, amplitude, phase_offset}`; uncertainties are propagated
//! back to physical units by the delta method. Confidence intervals are
//! linearized: `1.96 sigma` from `rms^2 (J^T J)^-1`.

mod guess;
mod lm;
mod model;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::wrap_pi;

pub use guess::{canonical_phi, initial_guess};
pub use model::model_value;

use lm::{levenberg_marquardt, LmSettings};
use model::{evaluate, Coord, Layout};

/// Lineshape family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `A e^{i theta} (1 - (2Q/Qc) L)`.
    Erm,
    /// `A e^{i theta} (-1 + (2Q/Qc) L)`.
    Reflection,
    /// `A e^{i theta} (e^{-2i phi(f)} + 1 - (2Q/Qc) L) / 2`.
    Hanger,
    /// `e^{i theta} ((1 - g)/(1 + g)) (1 - (2Q/Qc) L)`. The amplitude is fixed
    /// to one because it is indistinguishable from the loss factor.
    LossyErm,
    /// Diameter-correction form `A e^{i theta} (1 - (Q/Qc_hat) e^{i phi} L)`
    /// with `1/Q = 1/Qi + cos(phi)/Qc_hat`.
    Dcm,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Erm => "erm",
            Model::Reflection => "reflection",
            Model::Hanger => "hanger",
            Model::LossyErm => "lossy-erm",
            Model::Dcm => "dcm",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "erm" => Ok(Model::Erm),
            "reflection" => Ok(Model::Reflection),
            "hanger" => Ok(Model::Hanger),
            "lossy-erm" => Ok(Model::LossyErm),
            "dcm" => Ok(Model::Dcm),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Lineshape parameters. Optional fields are present only for the models
/// that use them. For [`Model::Dcm`], `qc` holds `|Qc_hat|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub f0: f64,
    pub qi: f64,
    pub qc: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g_ext: Option<f64>,
    pub amplitude: f64,
    pub phase_offset: f64,
}

impl FitParams {
    /// Loaded Q under the model's definition of the coupling Q.
    pub fn q_loaded(&self, model: Model) -> f64 {
        match model {
            Model::Dcm => 1.0 / (1.0 / self.qi + self.phi0.unwrap_or(0.0).cos() / self.qc),
            _ => self.qi * self.qc / (self.qi + self.qc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: Model,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub damping_init: f64,
    /// Fit a linear frequency dependence of the Fano angle (hanger only).
    #[serde(default)]
    pub fit_phi_slope: bool,
    /// Optional per-point weights multiplying the residuals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl FitConfig {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            damping_init: 1e-3,
            fit_phi_slope: false,
            weights: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let tols = [self.gradient_tolerance, self.step_tolerance, self.damping_init];
        if tols.iter().any(|t| !(*t > 0.0)) || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("fit tolerances and iteration limit must be positive".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: w.len() });
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub params: FitParams,
    /// 95% half-widths; zero for parameters held fixed.
    pub ci95: FitParams,
    /// Labels of the rows/columns of `covariance`, in physical units.
    pub covariance_labels: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    /// Root-mean-square residual per real component.
    pub rms_residual: f64,
    pub n_points: usize,
    pub converged: bool,
    pub n_iterations: usize,
}

impl FitResult {
    pub fn q_loaded(&self) -> f64 {
        self.params.q_loaded(self.model)
    }

    /// Standard deviation of a fitted parameter by label.
    pub fn sigma(&self, label: &str) -> Option<f64> {
        let k = self.covariance_labels.iter().position(|l| l == label)?;
        Some(self.covariance[k][k].sqrt())
    }
}

/// Fits starting from [`initial_guess`].
pub fn fit_lineshape(freqs: &[f64], z: &[Complex64], config: &FitConfig) -> Result<FitResult> {
    let start = initial_guess(freqs, z, config.model)?;
    fit_lineshape_from(freqs, z, config, &start)
}

/// Fits starting from `start`.
pub fn fit_lineshape_from(freqs: &[f64], z: &[Complex64], config: &FitConfig, start: &FitParams) -> Result<FitResult> {
    if freqs.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: freqs.len(), found: z.len() });
    }
    config.validate(z.len())?;
    let mut start = *start;
    if config.model == Model::Hanger {
        start.phi0.get_or_insert(0.0);
        start.phi_slope.get_or_insert(0.0);
    }
    if config.model == Model::Dcm {
        start.phi0.get_or_insert(0.0);
    }
    if config.model == Model::LossyErm {
        start.g_ext.get_or_insert(0.0);
        start.amplitude = 1.0;
    }
    if !(start.qi > 0.0 && start.qc > 0.0 && start.f0 > 0.0) {
        return Err(Error::InvalidParameter("starting point must have positive f0, Qi, Qc".into()));
    }
    let layout = Layout::new(config.model, config.fit_phi_slope, &start);
    let n = z.len();
    let np = layout.coords.len();
    let weights = config.weights.clone();

    let eval = |v: &[f64]| -> Option<lm::Evaluation> {
        let p = layout.from_vector(v);
        if !(p.qi.is_finite() && p.qc.is_finite() && p.f0 > 0.0) {
            return None;
        }
        let mut r = DVector::zeros(2 * n);
        let mut j = DMatrix::zeros(2 * n, np);
        let mut grad = vec![Complex64::new(0.0, 0.0); np];
        for (i, (&f, &d)) in freqs.iter().zip(z).enumerate() {
            let m = evaluate(&layout, &p, f, &mut grad);
            let w = weights.as_ref().map_or(1.0, |w| w[i]);
            let res = (d - m) * w;
            r[2 * i] = res.re;
            r[2 * i + 1] = res.im;
            for (c, g) in grad.iter().enumerate() {
                j[(2 * i, c)] = g.re * w;
                j[(2 * i + 1, c)] = g.im * w;
            }
        }
        (r.iter().all(|x| x.is_finite()) && j.iter().all(|x| x.is_finite())).then_some((r, j))
    };

    let settings = LmSettings {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        step_tolerance: config.step_tolerance,
        damping_init: config.damping_init,
    };
    let v0 = layout.to_vector(&start);
    if eval(&v0).is_none() {
        return Err(Error::InvalidParameter("model is not finite at the starting point".into()));
    }
    let out = levenberg_marquardt(&v0, eval, &settings);
    let mut params = layout.from_vector(&out.params);

    let dof = (2 * n).saturating_sub(np).max(1) as f64;
    let rms2 = out.ssr / dof;
    let cov_internal = invert_normal_matrix(&out.jtj, &layout)?;
    let scale = layout.physical_scale(&params);
    let labels: Vec<String> = layout.coords.iter().map(|c| c.label().to_string()).collect();
    let covariance: Vec<Vec<f64>> =
        (0..np).map(|a| (0..np).map(|b| rms2 * cov_internal[(a, b)] * scale[a] * scale[b]).collect()).collect();

    let half = |label: Coord| {
        layout.coords.iter().position(|c| *c == label).map(|k| 1.96 * covariance[k][k].max(0.0).sqrt())
    };
    let mut ci95 = FitParams {
        f0: half(Coord::F0).unwrap_or(0.0),
        qi: half(Coord::LnQi).unwrap_or(0.0),
        qc: half(Coord::LnQc).unwrap_or(0.0),
        phi0: params.phi0.map(|_| half(Coord::Phi0).unwrap_or(0.0)),
        phi_slope: params.phi_slope.map(|_| half(Coord::PhiSlope).unwrap_or(0.0)),
        g_ext: params.g_ext.map(|_| half(Coord::GExt).unwrap_or(0.0)),
        amplitude: half(Coord::Amplitude).unwrap_or(0.0),
        phase_offset: half(Coord::Phase).unwrap_or(0.0),
    };

    if params.amplitude < 0.0 {
        params.amplitude = -params.amplitude;
        params.phase_offset += std::f64::consts::PI;
    }
    params.phase_offset = wrap_pi(params.phase_offset);
    match config.model {
        Model::Hanger => params.phi0 = params.phi0.map(canonical_phi),
        Model::Dcm => params.phi0 = params.phi0.map(wrap_pi),
        _ => {}
    }
    if ci95.phi_slope.is_some() && !config.fit_phi_slope {
        ci95.phi_slope = Some(0.0);
    }

    let unweighted_ssr: f64 = freqs.iter().zip(z).map(|(&f, &d)| (d - model_value(config.model, &params, f)).norm_sqr()).sum();
    if !out.converged {
        log::warn!("{} fit did not converge in {} iterations", config.model, out.iterations);
    }
    Ok(FitResult {
        model: config.model,
        params,
        ci95,
        covariance_labels: labels,
        covariance,
        rms_residual: (unweighted_ssr / (2 * n) as f64).sqrt(),
        n_points: n,
        converged: out.converged,
        n_iterations: out.iterations,
    })
}

/// `(J^T J)^-1`, rejecting matrices that are numerically singular.
fn invert_normal_matrix(jtj: &DMatrix<f64>, layout: &Layout) -> Result<DMatrix<f64>> {
    let n = jtj.nrows();
    // Equilibrate so the condition number reflects identifiability, not units.
    let d: Vec<f64> = (0..n).map(|k| jtj[(k, k)].max(0.0).sqrt()).collect();
    if let Some(k) = d.iter().position(|x| *x == 0.0 || !x.is_finite()) {
        return Err(Error::SingularJacobian(format!("model is insensitive to {}", layout.coords[k].label())));
    }
    let scaled = DMatrix::from_fn(n, n, |a, b| jtj[(a, b)] / (d[a] * d[b]));
    let eig = scaled.clone().symmetric_eigen();
    let (min, max) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(min > 1e-14 * max) {
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        let worst = v.iamax();
        return Err(Error::SingularJacobian(format!(
            "parameters are not identifiable from the data (weakest direction dominated by {})",
            layout.coords[worst].label()
        )));
    }
    let inv = scaled.try_inverse().ok_or_else(|| Error::SingularJacobian("normal matrix not invertible".into()))?;
    Ok(DMatrix::from_fn(n, n, |a, b| inv[(a, b)] / (d[a] * d[b])))
}

/// One trace of a power sweep.
#[derive(Debug, Clone)]
pub struct PowerTrace {
    pub power_dbm: f64,
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
}

#[derive(Debug)]
pub struct PowerFit {
    pub power_dbm: f64,
    pub result: Result<FitResult>,
    /// Set when `ci95(Qi)/Qi > 1`.
    pub flagged: bool,
}

/// Fits every trace, visiting them from high to low power and starting each
/// fit from the previous optimum when it succeeded. Results come back in
/// input order; per-trace failures are recorded, not propagated.
pub fn fit_power_sweep(traces: &[PowerTrace], config: &FitConfig) -> Result<Vec<PowerFit>> {
    if traces.is_empty() {
        return Err(Error::InvalidParameter("power sweep is empty".into()));
    }
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| traces[b].power_dbm.total_cmp(&traces[a].power_dbm));
    let mut results: Vec<Option<PowerFit>> = (0..traces.len()).map(|_| None).collect();
    let mut warm: Option<FitParams> = None;
    for &i in &order {
        let t = &traces[i];
        let fresh = || fit_lineshape(&t.frequencies, &t.values, config);
        let result = match warm {
            Some(start) => match fit_lineshape_from(&t.frequencies, &t.values, config, &start) {
                Ok(r) if r.converged => Ok(r),
                _ => fresh(),
            },
            None => fresh(),
        };
        if let Ok(r) = &result {
            if r.converged {
                warm = Some(r.params);
            }
        }
        let flagged = result.as_ref().map_or(false, |r| r.ci95.qi / r.params.qi > 1.0);
        results[i] = Some(PowerFit { power_dbm: t.power_dbm, result, flagged });
    }
    Ok(results.into_iter().map(|r| r.expect("every trace visited")).collect())
}
