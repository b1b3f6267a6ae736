//! Dynamics of a single two-level atom inside a weakly pumped degenerate
//! optical parametric oscillator.
//!
//! The crate models one atom coupled to a single cavity mode that is pumped
//! below threshold through an intracavity parametric down-converter, so the
//! cavity is driven with photon *pairs* rather than a coherent field. It
//! provides:
//!
//! - the truncated joint state space and its operators ([`hilbert`]),
//! - the master equation, its steady state, and time evolution ([`lindblad`]),
//! - the weak-pump structure of the steady state ([`weakfield`]),
//! - transmitted/fluorescent incoherent spectra and quadrature squeezing
//!   spectra via the regression theorem ([`spectra`]),
//! - an independent time-domain cross-check path ([`oracle`]),
//! - and Monte Carlo quantum trajectories of the conditioned dynamics
//!   ([`trajectories`]).

pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod lindblad;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod spectra;
pub mod trajectories;
pub mod weakfield;

pub use error::{Error, Result};
pub use hilbert::{AtomState, BasisState, StateSpace};
pub use linalg::C64;
pub use params::SystemParams;
pub use presets::{preset, Preset, PresetTask, PRESETS};

#[cfg(test)]
mod smoke {
    use ndarray::array;
    use ndarray_linalg::{Eig, Solve};
    use num_complex::Complex64 as C64;

    #[test]
    fn lapack_linkage_eig_and_solve() {
        let m = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
        ];
        let (vals, _vecs) = m.eig().unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + 1.0).abs() < 1e-12 && (ims[1] - 1.0).abs() < 1e-12);

        let b = array![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        let x = m.solve(&b).unwrap();
        let r0 = x[1] - b[0];
        let r1 = -x[0] - b[1];
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }
}
