//! ERM extraction from calibrated two-port sweeps.
//!
//! The steps are: remove an electrical delay common to both ports, align the
//! port-2 reference plane so the differential mode loses its resonance circle,
//! then split the sweep into common mode, differential mode and reflection
//! splitting `mu`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::circle::fit_circle;
use crate::error::{Error, Result};
use crate::netcore::{shift_reference_planes, FrequencySweep, ReferencePlaneShift};

/// Minimum number of points for delay estimation.
pub const MIN_POINTS: usize = 16;

/// Common-delay estimation is refused when the band is narrower than this
/// many estimated linewidths; the resonance would bias the phase slope.
pub const MIN_SPAN_LINEWIDTHS: f64 = 100.0;

/// Unwraps a phase sequence, failing if a step is too close to a half turn
/// to be assigned a branch reliably.
pub fn unwrap_phase(values: &[Complex64], max_jump: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev: Option<(f64, f64)> = None;
    for (i, z) in values.iter().enumerate() {
        let a = z.arg();
        let next = match prev {
            None => a,
            Some((raw, acc)) => {
                let mut d = a - raw;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d <= -PI {
                    d += 2.0 * PI;
                }
                if d.abs() > max_jump {
                    return Err(Error::PhaseUnwrapAmbiguity { index: i, jump: d });
                }
                acc + d
            }
        };
        prev = Some((a, next));
        out.push(next);
    }
    Ok(out)
}

/// Least-squares slope and intercept of `y` against `x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `y` against `x` in the model `a + b x + P(1/(x - x0))`, `P` a
/// cubic without constant term, using only points with `|x - x0| > exclude`.
/// `None` if too few points remain on either side.
fn tail_corrected_slope(x: &[f64], y: &[f64], x0: f64, exclude: f64) -> Option<f64> {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - x0).abs() > exclude).collect();
    let below = keep.iter().filter(|&&i| x[i] < x0).count();
    if below < 3 || keep.len() - below < 3 {
        return None;
    }
    // Centre and scale so the normal equations are well conditioned.
    let xm = keep.iter().map(|&i| x[i]).sum::<f64>() / keep.len() as f64;
    let scale = keep.iter().map(|&i| (x[i] - xm).abs()).fold(0.0, f64::max);
    let mut ata = nalgebra::Matrix5::<f64>::zeros();
    let mut aty = nalgebra::Vector5::<f64>::zeros();
    for &i in &keep {
        let u = exclude / (x[i] - x0);
        let row = nalgebra::Vector5::new(1.0, (x[i] - xm) / scale, u, u * u, u * u * u);
        ata += row * row.transpose();
        aty += row * y[i];
    }
    let sol = ata.lu().solve(&aty)?;
    Some(sol[1] / scale)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Location and rough full width of the strongest feature in `|z|` about its
/// median. `None` when the trace is flat.
fn strongest_feature(freqs: &[f64], z: &[Complex64]) -> Option<(f64, f64)> {
    let mags: Vec<f64> = z.iter().map(|v| v.norm()).collect();
    let level = median(mags.clone());
    let dev: Vec<f64> = mags.iter().map(|m| (m - level).abs()).collect();
    let (k, &peak) = dev.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 1e-9 * level.max(1e-300) {
        return None;
    }
    let half = 0.5 * peak;
    let mut lo = k;
    while lo > 0 && dev[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < dev.len() && dev[hi + 1] > half {
        hi += 1;
    }
    let left = if lo > 0 { 0.5 * (freqs[lo - 1] + freqs[lo]) } else { freqs[0] };
    let right = if hi + 1 < freqs.len() { 0.5 * (freqs[hi] + freqs[hi + 1]) } else { freqs[freqs.len() - 1] };
    Some((freqs[k], right - left))
}

/// Rough full width of the strongest feature in `|z|` about its median, in
/// the units of `freqs`. `None` when the trace is flat.
pub fn estimate_linewidth(freqs: &[f64], z: &[Complex64]) -> Option<f64> {
    strongest_feature(freqs, z).map(|(_, w)| w)
}

/// Points closer than this many linewidths to the resonance are left out of
/// the delay regression.
const DELAY_EXCLUSION_LINEWIDTHS: f64 = 5.0;

/// Removes the electrical delay shared by both ports.
///
/// A delay `tau` in the transmission path multiplies `S21` by
/// `exp(2 pi i f tau)`. Away from the resonance its phase tail falls off as
/// `1/(f - f0)`, which biases a plain linear fit by far more than typical
/// cable mismatches, so the unwrapped phase is regressed on
/// `f` and powers of `1/(f - f0)` outside a window around the resonance. Each port's
/// reference plane is moved by `-tau/2`. Returns the adjusted sweep and the
/// delay that was found.
pub fn remove_common_delay(sweep: &FrequencySweep<f64>) -> Result<(FrequencySweep<f64>, f64)> {
    if sweep.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sweep.n_ports() });
    }
    if sweep.len() < MIN_POINTS {
        return Err(Error::InvalidSweep(format!("{} points, need at least {MIN_POINTS}", sweep.len())));
    }
    let f = sweep.frequencies();
    let s21 = sweep.parameter(2, 1);
    let span = f[f.len() - 1] - f[0];
    let feature = strongest_feature(f, &s21);
    if let Some((_, lw)) = feature {
        if span < MIN_SPAN_LINEWIDTHS * lw {
            return Err(Error::ResonanceDominatedBand { span_hz: span, linewidth_hz: lw });
        }
    }
    let phase = unwrap_phase(&s21, 0.9 * PI)?;
    let slope = match feature {
        Some((fr, lw)) => tail_corrected_slope(f, &phase, fr, DELAY_EXCLUSION_LINEWIDTHS * lw.max(span / f.len() as f64)),
        None => None,
    }
    .unwrap_or_else(|| linear_fit(f, &phase).0);
    let tau = slope / (2.0 * PI);
    let shifted = shift_reference_planes(sweep, &ReferencePlaneShift::new(vec![-0.5 * tau, -0.5 * tau]))?;
    Ok((shifted, tau))
}

/// `(S11 + S22)/2 - S21` per point.
pub fn differential_mode(sweep: &FrequencySweep<f64>) -> Vec<Complex64> {
    sweep.matrices().iter().map(|s| 0.5 * (s.s(1, 1) + s.s(2, 2)) - s.s(2, 1)).collect()
}

/// `S21 + (S11 + S22)/2` per point.
pub fn common_mode(sweep: &FrequencySweep<f64>) -> Vec<Complex64> {
    sweep.matrices().iter().map(|s| 0.5 * (s.s(1, 1) + s.s(2, 2)) + s.s(2, 1)).collect()
}

/// Size of the residual circle traced by `points`: the Taubin diameter,
/// capped by twice the largest distance from the centroid so that nearly
/// collinear or coincident points do not report a huge circle.
pub fn circle_extent(points: &[Complex64]) -> f64 {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Complex64>() / n;
    let spread = 2.0 * points.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
    match fit_circle(points) {
        Some(c) => c.diameter().min(spread),
        None => spread,
    }
}

/// `S_DM` residual circle after shifting port 2 by `tau2`, without building a
/// new sweep: `S11' = S11`, `S22' = p^2 S22`, `S21' = p S21`.
///
/// A delay common to both ports turns a flat `S_DM` into an arc of the unit
/// circle, so the mean phase rate is removed before measuring the extent;
/// otherwise the search would trade the port-2 delay against that arc.
fn dm_extent_at(sweep: &FrequencySweep<f64>, tau2: f64, buf: &mut Vec<Complex64>) -> f64 {
    buf.clear();
    for (f, s) in sweep.iter() {
        let p = Complex64::from_polar(1.0, 2.0 * PI * f * tau2);
        buf.push(0.5 * (s.s(1, 1) + p * p * s.s(2, 2)) - p * s.s(2, 1));
    }
    detrend_phase(sweep.frequencies(), buf);
    circle_extent(buf)
}

/// Removes the average phase rate of `z`, summed from successive increments
/// so that no unwrapping is needed.
fn detrend_phase(freqs: &[f64], z: &mut [Complex64]) {
    let n = z.len();
    let span = freqs[n - 1] - freqs[0];
    let total: f64 = z.windows(2).map(|w| (w[1] * w[0].conj()).arg()).sum();
    let rate = total / span;
    for (v, &f) in z.iter_mut().zip(freqs) {
        *v *= Complex64::from_polar(1.0, -rate * (f - freqs[0]));
    }
}

/// Relative margin within which delay-matching minima count as equally good.
pub const ALIAS_TIE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMatchOptions {
    /// Search interval for the port-2 adjustment, seconds.
    pub bracket: (f64, f64),
    /// Residual threshold relative to `|mean S_DM|`.
    pub max_relative_residual: f64,
}

impl Default for DelayMatchOptions {
    fn default() -> Self {
        Self { bracket: (-1e-9, 1e-9), max_relative_residual: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct DelayMatch {
    pub sweep: FrequencySweep<f64>,
    /// Port-2 delay mismatch present in the input; the sweep was shifted by
    /// `-tau2` on port 2.
    pub tau2: f64,
    /// Residual circle extent of `S_DM` at the optimum, after removing its
    /// mean phase rate.
    pub dm_flatness: f64,
}

/// Aligns the port-2 reference plane so that the differential mode shows
/// complete destructive interference of the resonance.
///
/// The objective is the extent of the circle traced by `S_DM`. It is close to
/// periodic in the adjustment with period `1/f`, so a grid finer than that
/// period is scanned first, then every grid minimum is refined by
/// golden-section search and a parabolic step. Minima within
/// [`ALIAS_TIE_TOLERANCE`] of the lowest are aliases of each other and the one
/// closest to zero adjustment is kept.
pub fn match_port_delay(sweep: &FrequencySweep<f64>, opts: &DelayMatchOptions) -> Result<DelayMatch> {
    if sweep.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sweep.n_ports() });
    }
    let (lo, hi) = opts.bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad delay bracket [{lo}, {hi}]")));
    }
    let f_max = sweep.frequencies()[sweep.len() - 1];
    let mut buf = Vec::with_capacity(sweep.len());
    let mut j = |t: f64| dm_extent_at(sweep, t, &mut buf);

    let step_target = 1.0 / (16.0 * f_max);
    let n_cells = (((hi - lo) / step_target).ceil() as usize).clamp(8, 200_000);
    let step = (hi - lo) / n_cells as f64;
    let grid: Vec<f64> = (0..=n_cells).map(|k| j(lo + k as f64 * step)).collect();
    // Every interior local minimum of the grid is a candidate basin; the
    // near-aliases differ from the true minimum only after refinement.
    // A coarse pass ranks the basins; only those near the best are polished
    // to full precision.
    let mut candidates = Vec::new();
    for k in 1..n_cells {
        if !(grid[k] <= grid[k - 1] && grid[k] <= grid[k + 1]) {
            continue;
        }
        let (t, jt) = refine_minimum(&mut j, lo + (k - 1) as f64 * step, lo + (k + 1) as f64 * step, 1e-4 * step);
        candidates.push(if grid[k] < jt { (lo + k as f64 * step, grid[k]) } else { (t, jt) });
    }
    let coarse_floor = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    for c in candidates.iter_mut().filter(|c| c.1 <= 2.0 * coarse_floor) {
        let (t, jt) = refine_minimum(&mut j, c.0 - 1e-4 * step, c.0 + 1e-4 * step, 0.0);
        if jt < c.1 {
            *c = (t, jt);
        }
    }
    // With noise or junction asymmetry the aliases reach nearly the same
    // floor; among those the smallest adjustment wins. If that is a bracket
    // edge, the minimum may lie outside.
    let edges = [(lo, grid[0]), (hi, grid[n_cells])];
    let floor = candidates.iter().chain(&edges).map(|c| c.1).fold(f64::INFINITY, f64::min);
    let tied = |c: &&(f64, f64)| c.1 <= floor * (1.0 + ALIAS_TIE_TOLERANCE);
    let closest = |a: &&(f64, f64), b: &&(f64, f64)| a.0.abs().total_cmp(&b.0.abs());
    let best = candidates.iter().filter(tied).min_by(closest).copied();
    if let Some(edge) = edges.iter().filter(tied).min_by(closest) {
        if best.is_none_or(|b| edge.0.abs() < b.0.abs()) {
            return Err(Error::NoBracket { lo, hi });
        }
    }
    let (t, jt) = best.ok_or(Error::NoBracket { lo, hi })?;
    let matched = shift_reference_planes(sweep, &ReferencePlaneShift::new(vec![0.0, t]))?;
    let dm = differential_mode(&matched);
    let mean_dm = (dm.iter().sum::<Complex64>() / dm.len() as f64).norm();
    let threshold = opts.max_relative_residual * mean_dm;
    if jt > threshold {
        return Err(Error::ResidualTooLarge { residual: jt, threshold });
    }
    log::debug!("port-2 delay adjustment {t:e} s, S_DM residual {jt:e}");
    Ok(DelayMatch { sweep: matched, tau2: -t, dm_flatness: jt })
}

/// Golden-section search on `[a, b]` followed by one parabolic step.
fn refine_minimum(j: &mut impl FnMut(f64) -> f64, a: f64, b: f64, min_width: f64) -> (f64, f64) {
    let (mut a, mut b) = (a, b);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut j1, mut j2) = (j(x1), j(x2));
    for _ in 0..200 {
        if b - a <= min_width.max(4.0 * f64::EPSILON * a.abs().max(b.abs())) {
            break;
        }
        if j1 <= j2 {
            b = x2;
            x2 = x1;
            j2 = j1;
            x1 = b - g * (b - a);
            j1 = j(x1);
        } else {
            a = x1;
            x1 = x2;
            j1 = j2;
            x2 = a + g * (b - a);
            j2 = j(x2);
        }
    }
    let (mut t, mut jt) = if j1 <= j2 { (x1, j1) } else { (x2, j2) };
    let h = b - a;
    let (jm, jp) = (j(t - h), j(t + h));
    let curv = jm - 2.0 * jt + jp;
    if curv > 0.0 {
        let cand = t - 0.5 * h * (jp - jm) / curv;
        if (cand - t).abs() <= h {
            let jc = j(cand);
            if jc < jt {
                t = cand;
                jt = jc;
            }
        }
    }
    (t, jt)
}

/// Common mode, differential mode and splitting of a delay-matched sweep.
#[derive(Debug, Clone)]
pub struct ErmExtraction {
    pub frequencies: Vec<f64>,
    /// Port-2 delay mismatch removed upstream, seconds.
    pub tau2: f64,
    /// Common delay removed upstream, seconds.
    pub common_delay: f64,
    /// Common mode rotated so its off-resonant point sits at `+1`.
    pub s_cm_sweep: Vec<Complex64>,
    pub s_dm_sweep: Vec<Complex64>,
    pub mu_sweep: Vec<Complex64>,
    /// Phase removed from the common mode, radians.
    pub normalization_phase: f64,
    pub dm_flatness: f64,
}

/// Indices of the first and last 5% of `n` points (at least one each).
fn edge_indices(n: usize) -> impl Iterator<Item = usize> {
    let k = (n / 20).max(1);
    (0..k).chain(n - k..n)
}

/// Splits a delay-matched sweep into its eigenmodes. `tau2` and
/// `common_delay` are left at zero; [`run_extraction`] fills them in.
pub fn extract_erm(sweep: &FrequencySweep<f64>) -> Result<ErmExtraction> {
    if sweep.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sweep.n_ports() });
    }
    let cm = common_mode(sweep);
    let dm = differential_mode(sweep);
    let mu: Vec<Complex64> = sweep.matrices().iter().map(|s| 0.5 * (s.s(1, 1) - s.s(2, 2))).collect();
    let off: Complex64 = edge_indices(cm.len()).map(|i| cm[i]).sum();
    let theta = off.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    Ok(ErmExtraction {
        frequencies: sweep.frequencies().to_vec(),
        tau2: 0.0,
        common_delay: 0.0,
        s_cm_sweep: cm.iter().map(|z| z * rot).collect(),
        dm_flatness: {
            let mut d = dm.clone();
            detrend_phase(sweep.frequencies(), &mut d);
            circle_extent(&d)
        },
        s_dm_sweep: dm,
        mu_sweep: mu,
        normalization_phase: theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtractionOptions {
    /// Try common-delay removal first; skipped with a warning when the band
    /// is dominated by the resonance.
    pub remove_common_delay: bool,
    pub delay: DelayMatchOptions,
}

/// Common-delay removal (optional), port-2 matching and eigenmode split.
/// Returns the matched sweep alongside the extraction.
///
/// Matching moves only port 2, so half of the mismatch is left behind as a
/// common delay; when common-delay removal is enabled it runs again on the
/// matched sweep and `common_delay` is the total.
pub fn run_extraction(sweep: &FrequencySweep<f64>, opts: &ExtractionOptions) -> Result<(FrequencySweep<f64>, ErmExtraction)> {
    let (work, mut common, remove) = if opts.remove_common_delay {
        match remove_common_delay(sweep) {
            Ok((s, tau)) => (s, tau, true),
            Err(e @ Error::ResonanceDominatedBand { .. }) => {
                log::warn!("common delay not removed: {e}");
                (sweep.clone(), 0.0, false)
            }
            Err(e) => return Err(e),
        }
    } else {
        (sweep.clone(), 0.0, false)
    };
    let m = match_port_delay(&work, &opts.delay)?;
    let matched = if remove {
        let (s, tau) = remove_common_delay(&m.sweep)?;
        common += tau;
        s
    } else {
        m.sweep
    };
    let mut ex = extract_erm(&matched)?;
    ex.tau2 = m.tau2;
    ex.common_delay = common;
    Ok((matched, ex))
}

/// A feature in `|S21|` that stands out from the median level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dip {
    pub frequency: f64,
    /// Signed excursion from the median level, dB (negative for a dip).
    pub depth_db: f64,
    /// Width of the region exceeding the prominence threshold, Hz.
    pub width_hz: f64,
}

/// Finds contiguous runs where `20 log10 |S21|` deviates from its median by
/// more than `prominence_db` and reports the extremum of each run, strongest
/// first.
pub fn find_dips(sweep: &FrequencySweep<f64>, prominence_db: f64) -> Result<Vec<Dip>> {
    if sweep.n_ports() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sweep.n_ports() });
    }
    let f = sweep.frequencies();
    let db: Vec<f64> = sweep.parameter(2, 1).iter().map(|z| 20.0 * z.norm().max(1e-300).log10()).collect();
    let level = median(db.clone());
    let mut dips = Vec::new();
    let mut k = 0;
    while k < db.len() {
        if (db[k] - level).abs() <= prominence_db {
            k += 1;
            continue;
        }
        let start = k;
        while k < db.len() && (db[k] - level).abs() > prominence_db {
            k += 1;
        }
        let run = start..k;
        let ext = run.clone().max_by(|&a, &b| (db[a] - level).abs().total_cmp(&(db[b] - level).abs())).expect("non-empty run");
        dips.push(Dip { frequency: f[ext], depth_db: db[ext] - level, width_hz: f[k - 1] - f[start] });
    }
    dips.sort_by(|a, b| b.depth_db.abs().total_cmp(&a.depth_db.abs()));
    Ok(dips)
}
