//! Scenario resolution: defaults, then preset, then config file, then flags,
//! each layer overriding the one before it, validated once at the end.

use std::path::Path;

use serde::Deserialize;

use opo_qed::presets::{PresetTask, SPECTRAL_DRIVE};
use opo_qed::{preset, SystemParams};

use crate::{CliError, CliResult};

/// One flat scenario layer. Every field is optional so the same shape serves
/// as config-file payload and as the bag of command-line overrides; unknown
/// keys in a file are rejected rather than silently ignored.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub g: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub drive: Option<f64>,
    pub n_max: Option<usize>,
    /// "transmitted" or "fluorescent".
    pub channel: Option<String>,
    pub omega_max: Option<f64>,
    pub omega_points: Option<usize>,
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub index: Option<u64>,
    pub t_end: Option<f64>,
    pub sample_dt: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("invalid config {}: {e}", path.display()))
        })
    }

    /// Layer `over` on top of `self`: set fields of `over` win.
    pub fn overlay(self, over: &ScenarioConfig) -> Self {
        Self {
            g: over.g.or(self.g),
            kappa: over.kappa.or(self.kappa),
            gamma: over.gamma.or(self.gamma),
            drive: over.drive.or(self.drive),
            n_max: over.n_max.or(self.n_max),
            channel: over.channel.clone().or(self.channel),
            omega_max: over.omega_max.or(self.omega_max),
            omega_points: over.omega_points.or(self.omega_points),
            seed: over.seed.or(self.seed),
            trajectories: over.trajectories.or(self.trajectories),
            index: over.index.or(self.index),
            t_end: over.t_end.or(self.t_end),
            sample_dt: over.sample_dt.or(self.sample_dt),
        }
    }
}

/// Which emitted field a spectrum describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumChannel {
    /// Light leaving through the cavity mirror.
    Transmitted,
    /// Light scattered out the side by the atom.
    Fluorescent,
}

impl SpectrumChannel {
    pub fn label(&self) -> &'static str {
        match self {
            SpectrumChannel::Transmitted => "transmitted",
            SpectrumChannel::Fluorescent => "fluorescent",
        }
    }
}

/// What kind of computation the scenario will drive; decides the default
/// truncation when none is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Spectral,
    Trajectory,
}

/// A fully resolved, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub preset: Option<String>,
    pub params: SystemParams,
    pub channel: SpectrumChannel,
    pub omega_max: f64,
    /// `None` means "derive the point count from the sampling guard".
    pub omega_points: Option<usize>,
    pub seed: u64,
    pub trajectories: usize,
    pub index: u64,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Scenario {
    /// The frequency grid this scenario asks for, guard included.
    pub fn frequency_grid(&self) -> CliResult<Vec<f64>> {
        let points = self
            .omega_points
            .unwrap_or_else(|| opo_qed::spectra::auto_points(&self.params, self.omega_max));
        Ok(opo_qed::spectra::frequency_grid(
            &self.params,
            self.omega_max,
            points,
        )?)
    }
}

/// Merge preset, optional config file, and flag overrides into a validated
/// scenario. Precedence, lowest to highest: built-in defaults, preset,
/// config file, command-line flags.
pub fn resolve(
    kind: TaskKind,
    preset_name: Option<&str>,
    file: Option<&ScenarioConfig>,
    flags: &ScenarioConfig,
) -> CliResult<Scenario> {
    let mut merged = ScenarioConfig::default();
    let mut preset_label = None;
    if let Some(name) = preset_name {
        let p = preset(name)?;
        preset_label = Some(p.name.to_string());
        merged.g = Some(p.g);
        merged.kappa = Some(p.kappa);
        merged.gamma = Some(p.gamma);
        merged.drive = Some(p.drive);
        merged.n_max = Some(p.n_max);
        merged.channel = Some(
            match p.task {
                PresetTask::Fluorescent => "fluorescent",
                _ => "transmitted",
            }
            .to_string(),
        );
    }
    if let Some(f) = file {
        merged = merged.overlay(f);
    }
    let merged = merged.overlay(flags);

    let g = merged.g.ok_or_else(|| {
        CliError::Config("the coupling g is required (set --preset, a config file, or --g)".into())
    })?;
    let kappa = merged.kappa.ok_or_else(|| {
        CliError::Config(
            "the cavity rate kappa is required (set --preset, a config file, or --kappa)".into(),
        )
    })?;
    let gamma = merged.gamma.unwrap_or(1.0);
    let drive = merged.drive.unwrap_or(SPECTRAL_DRIVE);
    let n_max = match merged.n_max {
        Some(n) => n,
        None => match kind {
            TaskKind::Spectral => 2,
            TaskKind::Trajectory => {
                SystemParams::new(g, kappa, gamma, drive, 2)?.trajectory_n_max()
            }
        },
    };
    let params = SystemParams::new(g, kappa, gamma, drive, n_max)?;

    let channel = match merged.channel.as_deref() {
        None | Some("transmitted") => SpectrumChannel::Transmitted,
        Some("fluorescent") => SpectrumChannel::Fluorescent,
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown channel {other:?}; use \"transmitted\" or \"fluorescent\""
            )))
        }
    };

    let omega_max = merged.omega_max.unwrap_or_else(|| params.default_omega_max());
    if !omega_max.is_finite() || omega_max <= 0.0 {
        return Err(CliError::Config(format!(
            "omega_max must be positive and finite, got {omega_max}"
        )));
    }

    let t_end = merged.t_end.unwrap_or(20.0);
    let sample_dt = merged.sample_dt.unwrap_or(0.05);
    if !t_end.is_finite() || t_end <= 0.0 || !sample_dt.is_finite() || sample_dt <= 0.0 {
        return Err(CliError::Config(format!(
            "t_end and sample_dt must be positive and finite, got {t_end} and {sample_dt}"
        )));
    }
    if sample_dt > t_end {
        return Err(CliError::Config(format!(
            "sample_dt ({sample_dt}) must not exceed t_end ({t_end})"
        )));
    }

    Ok(Scenario {
        preset: preset_label,
        params,
        channel,
        omega_max,
        omega_points: merged.omega_points,
        seed: merged.seed.unwrap_or(1),
        trajectories: merged.trajectories.unwrap_or(512),
        index: merged.index.unwrap_or(0),
        t_end,
        sample_dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_which_overrides_preset() {
        let file = ScenarioConfig {
            kappa: Some(5.0),
            seed: Some(9),
            ..Default::default()
        };
        let flags = ScenarioConfig {
            kappa: Some(7.0),
            ..Default::default()
        };
        let scn = resolve(TaskKind::Spectral, Some("fig2"), Some(&file), &flags).unwrap();
        assert_eq!(scn.params.g(), 0.1); // from the preset
        assert_eq!(scn.params.kappa(), 7.0); // flag beat the file
        assert_eq!(scn.seed, 9); // file beat the default
        assert_eq!(scn.preset.as_deref(), Some("fig2"));
    }

    #[test]
    fn missing_required_rates_are_config_errors() {
        let err = resolve(
            TaskKind::Spectral,
            None,
            None,
            &ScenarioConfig {
                kappa: Some(1.0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(crate::exit_code(&err), crate::EXIT_CONFIG);
    }

    #[test]
    fn trajectory_tasks_pick_a_drive_dependent_truncation() {
        let flags = ScenarioConfig {
            g: Some(1.0),
            kappa: Some(10.0),
            drive: Some(0.1),
            ..Default::default()
        };
        let scn = resolve(TaskKind::Trajectory, None, None, &flags).unwrap();
        assert!(scn.params.n_max() > 2);
        let spectral = resolve(TaskKind::Spectral, None, None, &flags).unwrap();
        assert_eq!(spectral.params.n_max(), 2);
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let flags = ScenarioConfig {
            g: Some(1.0),
            kappa: Some(10.0),
            channel: Some("sideways".into()),
            ..Default::default()
        };
        let err = resolve(TaskKind::Spectral, None, None, &flags).unwrap_err();
        assert_eq!(crate::exit_code(&err), crate::EXIT_CONFIG);
    }
}
