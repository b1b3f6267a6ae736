//! Physical parameters of the atom-cavity-pump system.

use serde::Serialize;

use crate::error::{Error, Result};

/// Rates of the coupled system, all in the same frequency units.
///
/// The model is a two-level atom (raising/lowering operators sigma+/sigma-)
/// coupled at strength `g` to a single cavity mode (operators a, a-dagger)
/// whose intracavity crystal down-converts a far-off-resonant pump into
/// photon pairs with effective amplitude `drive`. The cavity field decays at
/// rate `kappa` (amplitude decay; the photon-number decay rate is 2 kappa)
/// and the atom radiates out the side at rate `gamma`. Everything is resolved
/// in the frame rotating at the common resonance frequency, so no detuning
/// appears. Conventionally gamma = 1 fixes the unit of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    g: f64,
    kappa: f64,
    gamma: f64,
    drive: f64,
    n_max: usize,
}

impl SystemParams {
    /// Validate and build a parameter set.
    ///
    /// Requirements: `g >= 0`, `kappa > 0`, `gamma >= 0`, `drive >= 0`,
    /// `n_max >= 1`, and every rate finite.
    pub fn new(g: f64, kappa: f64, gamma: f64, drive: f64, n_max: usize) -> Result<Self> {
        for (name, v) in [("g", g), ("kappa", kappa), ("gamma", gamma), ("drive", drive)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if g < 0.0 {
            return Err(Error::InvalidParams(format!("g must be >= 0, got {g}")));
        }
        if kappa <= 0.0 {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {kappa}")));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {gamma}")));
        }
        if drive < 0.0 {
            return Err(Error::InvalidParams(format!("drive must be >= 0, got {drive}")));
        }
        if n_max < 1 {
            return Err(Error::InvalidParams("n_max must be >= 1".into()));
        }
        Ok(Self {
            g,
            kappa,
            gamma,
            drive,
            n_max,
        })
    }

    /// Atom-cavity coupling rate.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Cavity field (amplitude) decay rate.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Atomic spontaneous-emission rate.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Effective two-photon pump amplitude.
    pub fn drive(&self) -> f64 {
        self.drive
    }

    /// Total-quanta truncation of the joint Hilbert space.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Same rates with a different pump amplitude.
    pub fn with_drive(&self, drive: f64) -> Result<Self> {
        Self::new(self.g, self.kappa, self.gamma, drive, self.n_max)
    }

    /// Same rates with a different truncation.
    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::new(self.g, self.kappa, self.gamma, self.drive, n_max)
    }

    /// True when the pump is strong enough (drive > kappa/10) that the
    /// weak-field hierarchy behind the n_max = 2 truncation and the reduced
    /// spectral model starts to strain.
    pub fn weak_field_strained(&self) -> bool {
        self.drive > 0.1 * self.kappa
    }

    /// Half-width of the default frequency window: four times the fastest
    /// rate, enough to contain vacuum-Rabi sidebands and cavity wings.
    pub fn default_omega_max(&self) -> f64 {
        4.0 * self.g.max(self.kappa).max(self.gamma)
    }

    /// Narrowest linewidth in the problem; frequency grids must resolve it.
    /// gamma = 0 is legal, in which case the cavity width takes over.
    pub fn narrowest_linewidth(&self) -> f64 {
        if self.gamma > 0.0 {
            self.kappa.min(self.gamma)
        } else {
            self.kappa
        }
    }

    /// Truncation for conditioned-trajectory work at this pump strength:
    /// deeper pumping populates higher pair states.
    pub fn trajectory_n_max(&self) -> usize {
        let ratio = if self.gamma > 0.0 {
            self.drive / self.gamma
        } else {
            self.drive / self.kappa
        };
        if ratio <= 0.01 {
            2
        } else if ratio <= 0.5 {
            6
        } else {
            10
        }
    }
}
