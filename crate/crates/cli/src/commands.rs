use std::path::Path;

use ermkit::dataio::{
    ports_from_extension, read_csv, read_touchstone, sweep_figure_svg, write_csv, write_fit_report,
    write_touchstone_file, InputDigest, Report, TouchstoneOptions, Trace,
};
use ermkit::fit::{fit_lineshape, FitConfig, FitResult, Model};
use ermkit::pipeline::{find_dips, remove_common_delay, run_extraction, DelayMatchOptions, ErmExtraction, ExtractionOptions};
use ermkit::synth::{generate, Scenario};
use ermkit::{Error, FrequencySweep64};
use num_complex::Complex64;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

/// Prominence for the fallback band finder, dB.
const DIP_PROMINENCE_DB: f64 = 3.0;
/// Features closer than this many feature widths count as one resonance.
const SAME_RESONANCE_WIDTHS: f64 = 20.0;

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn check_input(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(data_err(format!("{}: no such file", path.display())));
    }
    Ok(())
}

fn check_output(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(data_err(format!("{}: directory does not exist", parent.display())));
        }
    }
    let canon = |p: &Path| std::fs::canonicalize(p).ok();
    if let Some(o) = canon(out) {
        if inputs.iter().any(|i| canon(i).as_ref() == Some(&o)) {
            return Err(data_err(format!("{}: refusing to overwrite an input file", out.display())));
        }
    }
    Ok(())
}

fn load_sweep(path: &Path) -> Result<FrequencySweep64, CliError> {
    let (sweep, _) = read_touchstone(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    Ok(sweep)
}

/// Applies `--f-center/--f-span`, or isolates the strongest `|S21|` feature
/// when the sweep holds several.
fn choose_band(sweep: &FrequencySweep64, cfg: &RunConfig) -> Result<FrequencySweep64, CliError> {
    if let Some((lo, hi)) = cfg.band()? {
        return Ok(sweep.select_band(lo, hi)?);
    }
    if sweep.n_ports() != 2 {
        return Ok(sweep.clone());
    }
    let dips = find_dips(sweep, DIP_PROMINENCE_DB)?;
    let Some(main) = dips.first() else {
        return Err(data_err("no resonance found; pass --f-center and --f-span"));
    };
    // A Fano peak beside the dip belongs to the same resonance.
    let same = SAME_RESONANCE_WIDTHS * main.width_hz.max(sweep.frequencies()[1] - sweep.frequencies()[0]);
    let half = dips[1..]
        .iter()
        .map(|d| (d.frequency - main.frequency).abs())
        .filter(|&d| d > same)
        .fold(f64::INFINITY, |m, d| m.min(0.5 * d));
    if half.is_infinite() {
        log::info!("single feature at {:.6e} Hz; using the full band", main.frequency);
        return Ok(sweep.clone());
    }
    log::info!("{} features; keeping {:.6e} Hz +/- {:.3e} Hz", dips.len(), main.frequency, half);
    Ok(sweep.select_band(main.frequency - half, main.frequency + half)?)
}

fn extraction(sweep: &FrequencySweep64, cfg: &RunConfig) -> Result<(FrequencySweep64, ErmExtraction), CliError> {
    let opts = ExtractionOptions {
        remove_common_delay: true,
        delay: DelayMatchOptions { bracket: cfg.bracket_s()?, ..Default::default() },
    };
    Ok(run_extraction(sweep, &opts)?)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn describe(label: &str, r: &FitResult) {
    let p = &r.params;
    eprintln!(
        "{label} ({}): f0 = {:.9e} Hz, Qi = {:.6e} +/- {:.2e}, Qc = {:.6e} +/- {:.2e}, rms = {:.2e}, {} iterations{}",
        r.model,
        p.f0,
        p.qi,
        r.ci95.qi,
        p.qc,
        r.ci95.qc,
        r.rms_residual,
        r.n_iterations,
        if r.converged { "" } else { ", NOT converged" }
    );
}

fn emit_report(report: &Report, path: Option<&Path>) -> Result<(), CliError> {
    let text = write_fit_report(report);
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn synth(scenario: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(p) = scenario {
        check_input(p)?;
    }
    check_output(out, &scenario.into_iter().collect::<Vec<_>>())?;
    let mut sc = match scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            toml::from_str::<Scenario>(&text).map_err(|e| data_err(format!("{}: {e}", p.display())))?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = cfg.seed {
        sc.seed = seed;
    }
    let sweep = generate(&sc)?;
    write_touchstone_file(out, &sweep, &TouchstoneOptions::lossless())?;
    eprintln!("wrote {} points to {}", sweep.len(), out.display());
    Ok(())
}

pub fn delay_match(input: &Path, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    check_input(input)?;
    check_output(out, &[input])?;
    let sweep = choose_band(&load_sweep(input)?, cfg)?;
    let (matched, ex) = extraction(&sweep, cfg)?;
    write_touchstone_file(out, &matched, &TouchstoneOptions::lossless())?;
    eprintln!(
        "common delay {:.6e} s, port-2 delay {:.6e} s, dm flatness {:.3e}",
        ex.common_delay, ex.tau2, ex.dm_flatness
    );
    print_json(&json!({
        "common_delay_s": ex.common_delay,
        "tau2_s": ex.tau2,
        "dm_flatness": ex.dm_flatness,
    }));
    Ok(())
}

pub fn extract_erm(input: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    check_input(input)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(format!("{}: {e}", out_dir.display())))?;
    let sweep = choose_band(&load_sweep(input)?, cfg)?;
    let (matched, ex) = extraction(&sweep, cfg)?;
    let f = &ex.frequencies;
    for (name, trace) in [("s_cm", &ex.s_cm_sweep), ("s_dm", &ex.s_dm_sweep), ("mu", &ex.mu_sweep)] {
        write_text(&out_dir.join(format!("{name}.csv")), &write_csv(f, trace)?)?;
    }
    let s11 = matched.parameter(1, 1);
    let s21 = matched.parameter(2, 1);
    let traces = [
        Trace { label: "S11", values: &s11 },
        Trace { label: "S21", values: &s21 },
        Trace { label: "s_cm", values: &ex.s_cm_sweep },
        Trace { label: "s_dm", values: &ex.s_dm_sweep },
    ];
    write_text(&out_dir.join("extraction.svg"), &sweep_figure_svg(f, &traces))?;
    eprintln!("wrote s_cm.csv, s_dm.csv, mu.csv and extraction.svg to {}", out_dir.display());
    print_json(&json!({
        "common_delay_s": ex.common_delay,
        "tau2_s": ex.tau2,
        "dm_flatness": ex.dm_flatness,
        "normalization_phase_rad": ex.normalization_phase,
        "n_points": f.len(),
    }));
    Ok(())
}

/// The trace a model is fitted to: the common mode for reflection-type
/// models, delay-corrected `S21` for hanger-type models.
fn fit_data(input: &Path, model: Model, cfg: &RunConfig, report: &mut Report) -> Result<(Vec<f64>, Vec<Complex64>), CliError> {
    let is_csv = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let (f, z) = read_csv(input)?;
        if let Some((lo, hi)) = cfg.band()? {
            let keep: Vec<usize> = (0..f.len()).filter(|&k| f[k] >= lo && f[k] <= hi).collect();
            return Ok((keep.iter().map(|&k| f[k]).collect(), keep.iter().map(|&k| z[k]).collect()));
        }
        return Ok((f, z));
    }
    if ports_from_extension(input).is_none() {
        return Err(data_err(format!("{}: expected .s1p, .s2p or .csv", input.display())));
    }
    let sweep = choose_band(&load_sweep(input)?, cfg)?;
    match (sweep.n_ports(), model) {
        (1, _) => Ok((sweep.frequencies().to_vec(), sweep.parameter(1, 1))),
        (2, Model::Hanger | Model::Dcm) => {
            let corrected = match remove_common_delay(&sweep) {
                Ok((s, tau)) => {
                    report.note("common_delay_s", tau);
                    s
                }
                Err(e @ Error::ResonanceDominatedBand { .. }) => {
                    log::warn!("common delay not removed: {e}");
                    sweep
                }
                Err(e) => return Err(e.into()),
            };
            Ok((corrected.frequencies().to_vec(), corrected.parameter(2, 1)))
        }
        (2, _) => {
            let (_, ex) = extraction(&sweep, cfg)?;
            report.note("common_delay_s", ex.common_delay);
            report.note("tau2_s", ex.tau2);
            report.note("dm_flatness", ex.dm_flatness);
            Ok((ex.frequencies, ex.s_cm_sweep))
        }
        (n, _) => Err(data_err(format!("{}: {n}-port data cannot be fitted directly", input.display()))),
    }
}

pub fn fit(input: &Path, report_path: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    check_input(input)?;
    if let Some(r) = report_path {
        check_output(r, &[input])?;
    }
    let model = cfg.model.unwrap_or(Model::Erm);
    let mut report = Report::new(cfg.fixed_timestamp);
    report.inputs.push(InputDigest::of_file(input)?);
    let (f, z) = fit_data(input, model, cfg, &mut report)?;
    let result = fit_lineshape(&f, &z, &FitConfig::new(model))?;
    describe("fit", &result);
    let converged = result.converged;
    report.add_fit(model.name(), result);
    emit_report(&report, report_path)?;
    if !converged {
        return Err(CliError::NonConvergence(format!("{model} fit of {}", input.display())));
    }
    Ok(())
}

pub fn compare(input: &Path, report_path: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    check_input(input)?;
    if let Some(r) = report_path {
        check_output(r, &[input])?;
    }
    let mut report = Report::new(cfg.fixed_timestamp);
    report.inputs.push(InputDigest::of_file(input)?);
    let sweep = choose_band(&load_sweep(input)?, cfg)?;
    if sweep.n_ports() != 2 {
        return Err(data_err(format!("{}: compare needs two-port data", input.display())));
    }
    let (matched, ex) = extraction(&sweep, cfg)?;
    let f = &ex.frequencies;
    let hanger = fit_lineshape(f, &matched.parameter(2, 1), &FitConfig::new(Model::Hanger))?;
    let erm = fit_lineshape(f, &ex.s_cm_sweep, &FitConfig::new(Model::Erm))?;
    describe("hanger", &hanger);
    describe("erm", &erm);

    let diff = (erm.params.qi - hanger.params.qi).abs();
    let combined = erm.ci95.qi + hanger.ci95.qi;
    let ratio = hanger.ci95.qi / erm.ci95.qi;
    eprintln!(
        "Qi difference {diff:.3e} vs combined ci95 {combined:.3e} ({}); hanger/erm ci95 ratio {ratio:.3}",
        if diff <= combined { "agree" } else { "disagree" }
    );
    report.note("common_delay_s", ex.common_delay);
    report.note("tau2_s", ex.tau2);
    report.note("dm_flatness", ex.dm_flatness);
    report.note("qi_difference", diff);
    report.note("qi_combined_ci95", combined);
    report.note("qi_agree", diff <= combined);
    report.note("ci95_ratio_hanger_over_erm", ratio);
    let converged = hanger.converged && erm.converged;
    report.add_fit("hanger", hanger);
    report.add_fit("erm", erm);
    emit_report(&report, report_path)?;
    if !converged {
        return Err(CliError::NonConvergence(format!("compare of {}", input.display())));
    }
    Ok(())
}
