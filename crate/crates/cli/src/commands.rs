//! The seven operations behind the `opo` subcommands. Each one computes
//! first, then writes its files plus a `manifest.json` recording the fully
//! resolved scenario, so failed runs leave nothing half-written.

use std::path::Path;

use serde_json::json;

use opo_qed::lindblad::MasterEquation;
use opo_qed::oracle::{compare_spectra, oracle_spectrum};
use opo_qed::spectra::{
    find_holes, fluorescent_spectrum, fwhm_numeric, squeezing_check, squeezing_spectrum,
    transmitted_spectrum, CorrelationChannel, RegressionSystem,
};
use opo_qed::trajectories;
use opo_qed::weakfield::{default_scaling_drives, verify_scalings};

use crate::config::{Scenario, SpectrumChannel};
use crate::output::{csv_numeric, fmt_f64, OutputSet};
use crate::{CliError, CliResult};

/// What a command reports back: stdout lines and the files it wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub files: Vec<String>,
}

/// Scenario snapshot written next to every output set; replaying the same
/// manifest reproduces the files byte for byte.
fn manifest(scn: &Scenario, command: &str, outputs: &[String]) -> serde_json::Value {
    json!({
        "command": command,
        "preset": scn.preset,
        "parameters": {
            "g": scn.params.g(),
            "kappa": scn.params.kappa(),
            "gamma": scn.params.gamma(),
            "drive": scn.params.drive(),
            "n_max": scn.params.n_max(),
        },
        "channel": scn.channel.label(),
        "grid": {
            "omega_max": scn.omega_max,
            "omega_points": scn.omega_points,
        },
        "seed": scn.seed,
        "trajectories": scn.trajectories,
        "index": scn.index,
        "t_end": scn.t_end,
        "sample_dt": scn.sample_dt,
        "outputs": outputs,
        "generator": { "name": "opo", "version": env!("CARGO_PKG_VERSION") },
    })
}

fn finish(
    scn: &Scenario,
    command: &str,
    mut set: OutputSet,
    lines: Vec<String>,
) -> CliResult<RunSummary> {
    let m = manifest(scn, command, &set.files().to_vec());
    set.write_json("manifest.json", &m)?;
    Ok(RunSummary {
        lines,
        files: set.files().to_vec(),
    })
}

fn warn_if_strained(scn: &Scenario) {
    if scn.params.weak_field_strained() {
        eprintln!(
            "warning: drive {} exceeds a tenth of kappa; spectra assume the \
             weak-pump regime and lowest-order scalings will be visibly bent",
            scn.params.drive()
        );
    }
}

/// Incoherent optical spectrum of the selected output channel.
pub fn run_spectrum(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    warn_if_strained(scn);
    let me = MasterEquation::new(scn.params);
    let omegas = scn.frequency_grid()?;
    let table = match scn.channel {
        SpectrumChannel::Transmitted => transmitted_spectrum(&me, &omegas)?,
        SpectrumChannel::Fluorescent => fluorescent_spectrum(&me, &omegas)?,
    };

    let mut lines = vec![format!(
        "{} spectrum on {} frequencies in [{}, {}]",
        scn.channel.label(),
        omegas.len(),
        fmt_f64(-scn.omega_max),
        fmt_f64(scn.omega_max),
    )];
    if let Some(width) = fwhm_numeric(&table.omegas, &table.incoherent) {
        lines.push(format!("full width at half maximum: {}", fmt_f64(width)));
    }
    let holes = find_holes(&table.omegas, &table.normalized, 0.01);
    if holes.is_empty() {
        lines.push("no spectral holes above 1% contrast".into());
    } else {
        for h in &holes {
            lines.push(format!(
                "spectral hole at omega {} with contrast {:.3}%",
                fmt_f64(h.omega),
                100.0 * h.contrast
            ));
        }
    }

    let mut set = OutputSet::new(out)?;
    set.write_text(
        "spectrum.csv",
        &csv_numeric(
            "omega,incoherent,normalized",
            &[&table.omegas, &table.incoherent, &table.normalized],
        ),
    )?;
    finish(scn, "spectrum", set, lines)
}

/// Squeezing spectra of the transmitted field at quadrature angles 0 and 90
/// degrees, with the incoherent spectrum synthesized from the same modes.
pub fn run_squeeze(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    warn_if_strained(scn);
    let me = MasterEquation::new(scn.params);
    let omegas = scn.frequency_grid()?;
    let table = squeezing_spectrum(&me, &omegas)?;
    let check = squeezing_check(&table);

    let mut best = (0usize, 0.0f64, "0");
    for (i, (&s0, &s90)) in table
        .theta_zero
        .iter()
        .zip(table.theta_ninety.iter())
        .enumerate()
    {
        if s0 < best.1 {
            best = (i, s0, "0");
        }
        if s90 < best.1 {
            best = (i, s90, "90");
        }
    }
    let mut lines = vec![format!(
        "squeezing spectra on {} frequencies; identity residual {}",
        omegas.len(),
        fmt_f64(check.identity_residual),
    )];
    if best.1 < 0.0 {
        lines.push(format!(
            "deepest squeezing {} at omega {} (theta = {} deg)",
            fmt_f64(best.1),
            fmt_f64(table.omegas[best.0]),
            best.2
        ));
    }
    lines.push(format!(
        "quadrature cancellation metric: {}",
        fmt_f64(check.cancellation_metric)
    ));

    let mut set = OutputSet::new(out)?;
    set.write_text(
        "squeeze.csv",
        &csv_numeric(
            "omega,squeeze_0,squeeze_90,incoherent",
            &[
                &table.omegas,
                &table.theta_zero,
                &table.theta_ninety,
                &table.incoherent,
            ],
        ),
    )?;
    finish(scn, "squeeze", set, lines)
}

/// Weak-drive scaling survey: fit each stationary element's power law in the
/// pump amplitude.
pub fn run_scaling(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    let report = verify_scalings(&scn.params, &default_scaling_drives(&scn.params))?;
    let lines = vec![
        format!(
            "first-order elements scale as drive^{}",
            fmt_f64(report.first_order_exponent)
        ),
        format!(
            "second-order elements scale as drive^{}",
            fmt_f64(report.second_order_exponent)
        ),
        format!(
            "largest coherent field amplitude: {}",
            fmt_f64(report.max_coherent_amplitude)
        ),
    ];
    let value = serde_json::to_value(&report)
        .expect("scaling reports contain only plain numbers and strings");
    let mut set = OutputSet::new(out)?;
    set.write_json("scaling.json", &value)?;
    finish(scn, "scaling", set, lines)
}

/// One conditioned realization: sampled observables plus the event log.
pub fn run_trajectory(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    let record = trajectories::run_trajectory(
        &scn.params,
        scn.seed,
        scn.index,
        scn.t_end,
        scn.sample_dt,
    )?;
    let cavity = record
        .jumps
        .iter()
        .filter(|j| matches!(j.channel, trajectories::JumpChannel::Cavity))
        .count();
    let lines = vec![format!(
        "trajectory (seed {}, stream {}): {} cavity and {} atomic emissions over t = {}",
        scn.seed,
        scn.index,
        cavity,
        record.jumps.len() - cavity,
        fmt_f64(scn.t_end),
    )];

    let mut jumps_text = String::from("time,channel\n");
    for j in &record.jumps {
        jumps_text.push_str(&fmt_f64(j.time));
        jumps_text.push(',');
        jumps_text.push_str(j.channel.label());
        jumps_text.push('\n');
    }

    let mut set = OutputSet::new(out)?;
    set.write_text(
        "trajectory.csv",
        &csv_numeric(
            "time,photon_number,excitation",
            &[&record.times, &record.photon_number, &record.excitation],
        ),
    )?;
    set.write_text("jumps.csv", &jumps_text)?;
    finish(scn, "trajectory", set, lines)
}

/// Ensemble mean and standard error over many conditioned realizations.
pub fn run_ensemble(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    let record = trajectories::ensemble_average(
        &scn.params,
        scn.trajectories,
        scn.seed,
        scn.t_end,
        scn.sample_dt,
    )?;
    let lines = vec![format!(
        "{} trajectories (seed {}): mean emissions per trajectory {}",
        record.trajectories,
        scn.seed,
        fmt_f64(record.mean_jumps),
    )];
    let mut set = OutputSet::new(out)?;
    set.write_text(
        "ensemble.csv",
        &csv_numeric(
            "time,photon_mean,photon_se,excitation_mean,excitation_se",
            &[
                &record.times,
                &record.photon_mean,
                &record.photon_se,
                &record.excitation_mean,
                &record.excitation_se,
            ],
        ),
    )?;
    finish(scn, "ensemble", set, lines)
}

/// Deterministic conditioned evolution after a cavity emission from steady
/// state.
pub fn run_conditioned(scn: &Scenario, out: &Path) -> CliResult<RunSummary> {
    let record =
        trajectories::conditioned_after_emission(&scn.params, scn.t_end, scn.sample_dt)?;
    let (mut peak, mut peak_t) = (0.0f64, 0.0f64);
    for (&t, &e) in record.times.iter().zip(record.excitation.iter()) {
        if e > peak {
            peak = e;
            peak_t = t;
        }
    }
    let lines = vec![format!(
        "conditioned excitation peaks at {} at t = {}",
        fmt_f64(peak),
        fmt_f64(peak_t),
    )];
    let mut set = OutputSet::new(out)?;
    set.write_text(
        "conditioned.csv",
        &csv_numeric(
            "time,photon_number,excitation",
            &[&record.times, &record.photon_number, &record.excitation],
        ),
    )?;
    finish(scn, "conditioned", set, lines)
}

/// Tolerances for the validation suite: the dual-path comparison budget, the
/// modal-versus-direct resolvent budget, and the squeezing identity budget.
const DUAL_PATH_TOLERANCE: f64 = 1e-6;
const MODAL_DIRECT_TOLERANCE: f64 = 1e-8;
const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Cross-check the resolvent spectra against the independent time-domain
/// path, the modal synthesis against per-frequency solves, and the squeezing
/// identity. Writes `validation.json` whether or not the checks pass;
/// returns an error (exit code 3) when any fail.
///
/// `corrupt_regression` injects a one-sample perturbation into the resolvent
/// result before comparison — a fault-injection hook proving the validator
/// can actually catch a broken spectral path.
pub fn run_validate(scn: &Scenario, out: &Path, corrupt_regression: bool) -> CliResult<RunSummary> {
    let me = MasterEquation::new(scn.params);
    // Validation compares the two paths pointwise, so it does not need the
    // hole-resolving sampling density the display grid enforces; a plain
    // uniform grid keeps the time-domain transform affordable everywhere.
    let points = scn.omega_points.unwrap_or(1601);
    if points < 9 {
        return Err(CliError::Config(format!(
            "validation grid needs at least 9 points, got {points}"
        )));
    }
    let omegas: Vec<f64> = (0..points)
        .map(|i| -scn.omega_max + 2.0 * scn.omega_max * i as f64 / (points - 1) as f64)
        .collect();
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    let mut all_pass = true;
    let record = |name: String, pass: bool, detail: serde_json::Value, lines: &mut Vec<String>| {
        lines.push(format!(
            "{name}: {} {detail}",
            if pass { "PASS" } else { "FAIL" }
        ));
        pass
    };

    for (label, channel) in [
        ("transmitted", CorrelationChannel::FieldNormal),
        ("fluorescent", CorrelationChannel::AtomNormal),
    ] {
        let sys = RegressionSystem::full(&me, channel)?;
        let mut resolvent = sys.spectrum(&omegas)?;
        if corrupt_regression && label == "transmitted" {
            let mid = resolvent.len() / 2;
            resolvent[mid] *= 1.001;
        }

        let direct = sys.spectrum_direct(&omegas)?;
        let modal = compare_spectra(&direct, &resolvent)?;
        let pass = modal.scale_consistent && modal.max_deviation < MODAL_DIRECT_TOLERANCE;
        all_pass &= record(
            format!("{label} modal-vs-direct"),
            pass,
            json!({ "max_deviation": modal.max_deviation }),
            &mut lines,
        );
        checks.push(json!({
            "name": format!("{label}-modal-vs-direct"),
            "pass": pass,
            "max_deviation": modal.max_deviation,
            "tolerance": MODAL_DIRECT_TOLERANCE,
            "scale_consistent": modal.scale_consistent,
        }));

        let oracle = oracle_spectrum(&sys, &omegas)?;
        let dual = compare_spectra(&resolvent, &oracle)?;
        let pass = dual.scale_consistent && dual.max_deviation < DUAL_PATH_TOLERANCE;
        all_pass &= record(
            format!("{label} dual-path"),
            pass,
            json!({ "max_deviation": dual.max_deviation }),
            &mut lines,
        );
        checks.push(json!({
            "name": format!("{label}-dual-path"),
            "pass": pass,
            "max_deviation": dual.max_deviation,
            "tolerance": DUAL_PATH_TOLERANCE,
            "scale_consistent": dual.scale_consistent,
        }));
    }

    let sq = squeezing_spectrum(&me, &omegas)?;
    let check = squeezing_check(&sq);
    let pass = check.identity_residual < IDENTITY_TOLERANCE;
    all_pass &= record(
        "squeezing identity".into(),
        pass,
        json!({ "identity_residual": check.identity_residual }),
        &mut lines,
    );
    checks.push(json!({
        "name": "squeezing-identity",
        "pass": pass,
        "identity_residual": check.identity_residual,
        "cancellation_metric": check.cancellation_metric,
        "tolerance": IDENTITY_TOLERANCE,
    }));

    let report = json!({
        "pass": all_pass,
        "omega_points": omegas.len(),
        "corrupt_regression": corrupt_regression,
        "checks": checks,
    });
    let mut set = OutputSet::new(out)?;
    set.write_json("validation.json", &report)?;
    let summary = finish(scn, "validate", set, lines)?;
    if !all_pass {
        for line in &summary.lines {
            eprintln!("{line}");
        }
        return Err(CliError::Core(opo_qed::Error::Numerical(
            "validation failed; see validation.json".into(),
        )));
    }
    Ok(summary)
}
