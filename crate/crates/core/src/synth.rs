//! Synthetic two-port sweeps of a tee-coupled resonator.
//!
//! Per frequency: perturbed tee, port 3 terminated by a parallel RLC,
//! optional coupling-arm loss on the common mode, reference-plane delays, a
//! global phase and additive Gaussian noise. Noise comes from ChaCha8 seeded
//! with `seed`, drawn frequency-major and then `S11, S12, S21, S22`, real part
//! before imaginary part, so a scenario reproduces bit for bit on any
//! platform.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{coupling_loss_factor, mobius_map, rlc_reflection, ErmEquivalentCircuit, ResonatorParams};
use crate::netcore::{reduce_network, shift_matrix, FrequencySweep, ReferencePlaneShift, ScatteringMatrix};
use crate::perturb::{extract_mu, perturb_exact, perturb_first_order, PerturbationGenerator};
use crate::tee::{tee_from_eigenphases, TeeEigenphases, TeeJunction};

/// `g2` of [`default_cpw_scenario`], found by [`calibrate_mu`] for a
/// band-averaged `|mu|` of -25 dB.
pub const DEFAULT_CPW_G2: f64 = 0.052_403_689_909_139_86;

/// A synthetic measurement. Missing fields in a config file take the values
/// of [`default_cpw_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Reflection-mode parameters as they appear in the normalized common
    /// mode; the bare resonator is derived from these and the tee coupling.
    pub resonator: ResonatorParams<f64>,
    pub tee: TeeEigenphases<f64>,
    pub generator: PerturbationGenerator<f64>,
    /// External shunt conductance of the coupling arm.
    pub g_ext: f64,
    /// One-way delays of ports 1 and 2, seconds.
    pub delays: [f64; 2],
    pub global_phase: f64,
    /// Standard deviation of the real and of the imaginary part of the noise
    /// added to each S-parameter.
    pub noise_sigma: f64,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
    pub seed: u64,
    /// Exact unitary perturbation; first order when false.
    pub exact_perturbation: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        default_cpw_scenario()
    }
}

/// Coplanar-waveguide analog: a tee with a small `lambda2` asymmetry tuned
/// so that `|mu|` averages -25 dB, a 37 ps port mismatch on top of a 1.2 ns
/// cable delay, and no noise.
pub fn default_cpw_scenario() -> Scenario {
    let resonator = ResonatorParams { f0: 4.7076e9, qi: 5e5, qc: 1e5 };
    let beta = crate::models::CouplingBeta::from_reactance(0.2);
    let mut generator = PerturbationGenerator::zero();
    generator.g[1] = DEFAULT_CPW_G2;
    Scenario {
        resonator,
        tee: TeeEigenphases::for_coupling(&beta, 2.4),
        generator,
        g_ext: 0.0,
        delays: [1.2e-9, 1.237e-9],
        global_phase: 0.7,
        noise_sigma: 0.0,
        f_start: resonator.f0 - 5e6,
        f_stop: resonator.f0 + 5e6,
        n_points: 2001,
        seed: 1,
        exact_perturbation: true,
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.resonator.validate()?;
        if !(self.f_start < self.resonator.f0 && self.resonator.f0 < self.f_stop) {
            return Err(Error::InvalidParameter(format!(
                "resonance {} Hz outside band [{}, {}]",
                self.resonator.f0, self.f_start, self.f_stop
            )));
        }
        if self.n_points < 16 {
            return Err(Error::InvalidParameter(format!("n_points = {}, need at least 16", self.n_points)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter("noise_sigma must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.g_ext) {
            return Err(Error::InvalidParameter(format!("g_ext = {} outside [0, 1)", self.g_ext)));
        }
        if self.delays.iter().chain([&self.global_phase]).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("delays and global phase must be finite".into()));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_points;
        let step = (self.f_stop - self.f_start) / (n - 1) as f64;
        (0..n).map(|k| if k + 1 == n { self.f_stop } else { self.f_start + k as f64 * step }).collect()
    }

    /// The unperturbed junction.
    pub fn junction(&self) -> TeeJunction<f64> {
        tee_from_eigenphases(&self.tee)
    }

    /// Bare parallel RLC that, behind this scenario's tee, shows
    /// [`resonator`](Self::resonator) as its normalized reflection mode.
    pub fn bare_resonator(&self) -> Result<ResonatorParams<f64>> {
        let x_e = self.junction().coupling_beta().reactance().ok_or_else(|| {
            Error::InvalidParameter("tee decouples the resonator (beta = 1)".into())
        })?;
        let (circuit, p) = ErmEquivalentCircuit::for_observed(&self.resonator, x_e)?;
        Ok(circuit.bare_rlc(&p))
    }

    /// Same scenario without noise.
    pub fn noiseless(&self) -> Self {
        Self { noise_sigma: 0.0, ..self.clone() }
    }
}

/// Attenuates the common mode by `k` as `D S D` with
/// `D = I - (1 - sqrt k) P`, `P = [[1,1],[1,1]]/2`. For a symmetric `S` this
/// scales the common-mode eigenvalue by `k` and leaves the differential mode
/// alone, which never reaches the coupling arm; `D` is a contraction, so the
/// result stays passive when the junction is perturbed.
fn attenuate_common_mode(s: &ScatteringMatrix<f64>, k: f64) -> ScatteringMatrix<f64> {
    let a = 1.0 - k.sqrt();
    let d = [[1.0 - 0.5 * a, -0.5 * a], [-0.5 * a, 1.0 - 0.5 * a]];
    let m = |i: usize, j: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..2 {
            for q in 0..2 {
                acc += d[i][p] * s[(p, q)] * d[q][j];
            }
        }
        acc
    };
    ScatteringMatrix::from_rows(&[vec![m(0, 0), m(0, 1)], vec![m(1, 0), m(1, 1)]]).expect("2x2")
}

pub fn generate(sc: &Scenario) -> Result<FrequencySweep<f64>> {
    sc.validate()?;
    let bare = sc.bare_resonator()?;
    let junction = sc.junction();
    let perturbed = if sc.exact_perturbation {
        perturb_exact(&junction, &sc.generator)
    } else {
        perturb_first_order(&junction, &sc.generator)
    };
    let attenuation = coupling_loss_factor(sc.g_ext);
    let shift = ReferencePlaneShift::new(sc.delays.to_vec());
    let rot = Complex64::from_polar(1.0, sc.global_phase);
    let mut noise = (sc.noise_sigma > 0.0).then(|| {
        let dist = Normal::new(0.0, sc.noise_sigma).expect("finite sigma");
        (ChaCha8Rng::seed_from_u64(sc.seed), dist)
    });

    let freqs = sc.frequencies();
    let mut mats = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let reduced = reduce_network(&perturbed, 3, rlc_reflection(&bare, f))?;
        let lossy = if sc.g_ext > 0.0 { attenuate_common_mode(&reduced, attenuation) } else { reduced };
        let shifted = shift_matrix(&lossy, &shift.phases(f));
        let mut rows = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rot * shifted[(i, j)];
                if let Some((rng, dist)) = noise.as_mut() {
                    let re = dist.sample(rng);
                    let im = dist.sample(rng);
                    *v += Complex64::new(re, im);
                }
            }
        }
        mats.push(ScatteringMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()])?);
    }
    FrequencySweep::new(freqs, mats)
}

/// Common mode `S11 + S21` of the noiseless, unperturbed, undelayed
/// scenario: the Möbius image of the bare resonator.
pub fn ideal_common_mode(sc: &Scenario, f: f64) -> Result<Complex64> {
    let beta = sc.junction().coupling_beta();
    let bare = sc.bare_resonator()?;
    Ok(coupling_loss_factor(sc.g_ext) * mobius_map(&beta, rlc_reflection(&bare, f))?)
}

/// Band-averaged `|mu|` in dB of the noiseless scenario with both reference
/// planes at the junction; a port delay mismatch would otherwise dominate.
pub fn band_average_mu_db(sc: &Scenario) -> Result<f64> {
    let at_junction = Scenario { delays: [0.0, 0.0], ..sc.noiseless() };
    Ok(extract_mu(&generate(&at_junction)?)?.band_average_db())
}

/// Finds the value of generator component `component` (1..=8) for which the
/// band-averaged `|mu|` equals `target_db`, by bisection in `ln g` over
/// `[1e-5, 0.5]`. Other components are kept.
pub fn calibrate_mu(sc: &Scenario, component: usize, target_db: f64) -> Result<f64> {
    PerturbationGenerator::<f64>::single(component, 0.0)?;
    let at = |g: f64| {
        let mut s = sc.noiseless();
        s.generator.g[component - 1] = g;
        band_average_mu_db(&s).map(|db| db - target_db)
    };
    let (mut lo, mut hi) = (1e-5f64.ln(), 0.5f64.ln());
    let (f_lo, f_hi) = (at(lo.exp())?, at(hi.exp())?);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket { lo: lo.exp(), hi: hi.exp() });
    }
    let rising = f_hi > f_lo;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (at(mid.exp())? > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
