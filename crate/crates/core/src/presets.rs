//! Named parameter sets covering the regimes the simulator is built around.
//!
//! Each preset pins the rate ratios for one survey point: transmitted-light
//! spectra scanning the coupling from perturbative to vacuum-Rabi, the
//! matching fluorescence scan on both sides of the good-cavity/bad-cavity
//! divide, and two conditioned-evolution operating points at stronger pumping.
//! Units: gamma = 1 throughout.

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Which quantity a preset was designed to showcase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetTask {
    /// Incoherent spectrum of the light leaving the cavity mirror.
    Transmitted,
    /// Incoherent spectrum of the atom's side-scattered light.
    Fluorescent,
    /// Single quantum-trajectory records at non-perturbative pumping.
    Trajectory,
}

/// A named operating point.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    /// Stable identifier (`fig2` .. `fig17`) used by the CLI.
    pub name: &'static str,
    pub task: PresetTask,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub drive: f64,
    pub n_max: usize,
    /// What this operating point demonstrates.
    pub note: &'static str,
}

/// Default pump amplitude for spectral presets, well inside the weak-field
/// regime at every tabulated kappa.
pub const SPECTRAL_DRIVE: f64 = 1e-3;

/// The full preset table.
pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2",
        task: PresetTask::Transmitted,
        g: 0.1,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "bad cavity, weak coupling: single broadened Lorentzian line",
    },
    Preset {
        name: "fig3",
        task: PresetTask::Transmitted,
        g: 1.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "bad cavity, moderate coupling: narrow spectral hole at line center",
    },
    Preset {
        name: "fig4",
        task: PresetTask::Transmitted,
        g: 3.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "bad cavity, stronger coupling: hole widens toward a doublet",
    },
    Preset {
        name: "fig5",
        task: PresetTask::Transmitted,
        g: 5.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "onset of mode splitting inside the cavity line",
    },
    Preset {
        name: "fig6",
        task: PresetTask::Transmitted,
        g: 10.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "g = kappa: resolved two-peak structure",
    },
    Preset {
        name: "fig7",
        task: PresetTask::Transmitted,
        g: 50.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "deep vacuum-Rabi regime: pair peaks near +/- g, each carrying a hole",
    },
    Preset {
        name: "fig8",
        task: PresetTask::Transmitted,
        g: 30.0,
        kappa: 100.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "faster cavity at strong coupling: deeper holes in the Rabi peaks",
    },
    Preset {
        name: "fig9",
        task: PresetTask::Transmitted,
        g: 0.1,
        kappa: 0.1,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "good cavity, weak coupling: transmitted line narrower than the atom",
    },
    Preset {
        name: "fig10",
        task: PresetTask::Transmitted,
        g: 20.0,
        kappa: 0.1,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "good cavity, strong coupling: clean vacuum-Rabi doublet",
    },
    Preset {
        name: "fig11",
        task: PresetTask::Fluorescent,
        g: 3.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "bad-cavity fluorescence: single line, no hole",
    },
    Preset {
        name: "fig12",
        task: PresetTask::Fluorescent,
        g: 50.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "bad-cavity fluorescence at strong coupling: smooth Rabi doublet",
    },
    Preset {
        name: "fig13",
        task: PresetTask::Fluorescent,
        g: 0.3,
        kappa: 0.1,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "good cavity, weak coupling: fluorescent line develops structure",
    },
    Preset {
        name: "fig14",
        task: PresetTask::Fluorescent,
        g: 10.0,
        kappa: 0.1,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "good cavity, strong coupling: holes cut into the fluorescent doublet",
    },
    Preset {
        name: "fig15",
        task: PresetTask::Fluorescent,
        g: 5.0,
        kappa: 0.01,
        gamma: 1.0,
        drive: SPECTRAL_DRIVE,
        n_max: 2,
        note: "very good cavity: deepest fluorescent holes",
    },
    Preset {
        name: "fig16",
        task: PresetTask::Trajectory,
        g: 1.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: 0.1,
        n_max: 6,
        note: "conditioned evolution after a transmitted-photon detection",
    },
    Preset {
        name: "fig17",
        task: PresetTask::Trajectory,
        g: 40.0,
        kappa: 10.0,
        gamma: 1.0,
        drive: 1.0,
        n_max: 10,
        note: "strong coupling and pumping: conditioned photon number exceeding one",
    },
];

/// Look a preset up by name (`fig2` .. `fig17`).
pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            Error::InvalidParams(format!(
                "unknown preset {name:?}; available: {}",
                PRESETS
                    .iter()
                    .map(|p| p.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

impl Preset {
    /// The preset's rates as a validated parameter set.
    pub fn params(&self) -> SystemParams {
        SystemParams::new(self.g, self.kappa, self.gamma, self.drive, self.n_max)
            .expect("preset table entries are valid by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let params = p.params();
            assert_eq!(params.g(), p.g, "{}", p.name);
            assert_eq!(params.n_max(), p.n_max, "{}", p.name);
        }
    }

    #[test]
    fn lookup_by_name() {
        let p = preset("fig7").unwrap();
        assert_eq!(p.g, 50.0);
        assert_eq!(p.kappa, 10.0);
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn spectral_presets_stay_weak_field() {
        for p in PRESETS.iter().filter(|p| p.task != PresetTask::Trajectory) {
            assert!(
                !p.params().weak_field_strained(),
                "{} should sit safely in the weak-field regime",
                p.name
            );
        }
    }

    #[test]
    fn trajectory_presets_use_deeper_truncation() {
        for p in PRESETS.iter().filter(|p| p.task == PresetTask::Trajectory) {
            assert!(p.n_max >= 6, "{}", p.name);
            assert_eq!(p.params().trajectory_n_max(), p.n_max, "{}", p.name);
        }
    }
}
