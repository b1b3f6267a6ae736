//! Monte Carlo quantum trajectories: single conditioned realizations of the
//! open dynamics whose ensemble average reproduces the master equation.
//!
//! Between detection events the (unnormalized) state follows the non-Hermitian
//! drift `d psi/dt = G psi` with `G = -iH - kappa a'a - (gamma/2) s+s-`; its
//! squared norm is the no-event survival probability, so an event time is the
//! root of `|psi(t)|^2 = u` for a uniform draw `u`. Events project the state
//! through one of the collapse operators:
//!
//! * cavity emission, `sqrt(2 kappa) a` (the photon-number decay rate is
//!   `2 kappa` in these conventions), and
//! * atomic (side) emission, `sqrt(gamma) s-`.
//!
//! The survival norm is evaluated through the eigendecomposition of the drift
//! generator, which makes the state available at arbitrary times between
//! events at matrix-vector cost; a dense matrix-exponential path backs it up
//! when the eigenbasis is too ill-conditioned to trust.
//!
//! Randomness is drawn from counter-based ChaCha streams, one stream per
//! trajectory index, so ensembles are reproducible run-to-run and independent
//! of how work is scheduled across threads.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::StateSpace;
use crate::linalg::{eig, expm, lu_solve, re, C64};
use crate::params::SystemParams;

/// Which collapse operator fired at a detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpChannel {
    /// Photon left through the cavity mirror (`sqrt(2 kappa) a`).
    Cavity,
    /// Photon was emitted out the side by the atom (`sqrt(gamma) s-`).
    Atom,
}

impl JumpChannel {
    pub fn label(&self) -> &'static str {
        match self {
            JumpChannel::Cavity => "cavity",
            JumpChannel::Atom => "atom",
        }
    }
}

/// One detection event in a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: JumpChannel,
}

/// A single conditioned realization sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Conditional `<a'a>` of the normalized state at each sample time.
    pub photon_number: Vec<f64>,
    /// Conditional excited-state population at each sample time.
    pub excitation: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
}

/// Ensemble mean and standard error of the conditioned observables.
#[derive(Debug, Clone)]
pub struct EnsembleRecord {
    pub times: Vec<f64>,
    pub photon_mean: Vec<f64>,
    pub photon_se: Vec<f64>,
    pub excitation_mean: Vec<f64>,
    pub excitation_se: Vec<f64>,
    pub trajectories: usize,
    pub mean_jumps: f64,
}

/// Deterministic evolution conditioned on a cavity emission from steady
/// state followed by no further detections.
#[derive(Debug, Clone)]
pub struct ConditionedRecord {
    pub times: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub excitation: Vec<f64>,
}

/// Fraction of the normalized state allowed in the top total-quanta shell
/// before the truncation is declared too small to trust.
const TOP_SHELL_TOLERANCE: f64 = 1e-6;

/// Acceptable residual of the eigenbasis inversion probe, relative to one.
const EIGENBASIS_TOLERANCE: f64 = 1e-8;

/// Relative width at which the event-time bisection stops.
const BISECTION_TOLERANCE: f64 = 1e-13;

/// The non-Hermitian drift generator `G = -iH - kappa a'a - (gamma/2) s+s-`.
pub fn drift_generator(space: &StateSpace, params: &SystemParams) -> Array2<C64> {
    let mut gen = space.hamiltonian(params).mapv(|h| h * C64::new(0.0, -1.0));
    for (i, state) in space.basis().iter().enumerate() {
        let mut damping = params.kappa() * state.photons as f64;
        if state.total_quanta() > state.photons {
            damping += 0.5 * params.gamma();
        }
        gen[(i, i)] -= re(damping);
    }
    gen
}

/// ChaCha stream dedicated to one trajectory index under a run seed.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Propagation {
    /// Drift eigenbasis: `psi(t) = V exp(diag(rates) t) z`, `z = V^-1 psi(0)`.
    Eigen {
        rates: Array1<C64>,
        modes: Array2<C64>,
        inverse: Array2<C64>,
    },
    /// Dense matrix exponential per evaluation; slow but unconditional.
    Direct,
}

/// Precomputed machinery for running trajectories at fixed parameters.
pub struct TrajectorySolver {
    space: StateSpace,
    generator: Array2<C64>,
    propagation: Propagation,
    jump_cavity: Array2<C64>,
    jump_atom: Array2<C64>,
    photon_diag: Vec<f64>,
    excited_diag: Vec<f64>,
    top_shell: Vec<usize>,
}

/// Conditional observables of a (possibly unnormalized) state.
struct Readout {
    photon: f64,
    excitation: f64,
    top_shell: f64,
}

impl TrajectorySolver {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let space = StateSpace::new(params.n_max());
        let generator = drift_generator(&space, params);
        let d = space.dim();

        // Probe the eigenbasis: if V V^-1 reproduces the identity to working
        // precision the event search can run in the eigenrepresentation;
        // otherwise fall back to dense exponentials.
        let propagation = match eig(&generator) {
            Ok((rates, modes)) => {
                let mut inverse = Array2::<C64>::zeros((d, d));
                let mut healthy = true;
                for j in 0..d {
                    let mut unit = Array1::<C64>::zeros(d);
                    unit[j] = re(1.0);
                    match lu_solve(&modes, &unit) {
                        Ok(col) => {
                            for i in 0..d {
                                inverse[(i, j)] = col[i];
                            }
                        }
                        Err(_) => {
                            healthy = false;
                            break;
                        }
                    }
                }
                if healthy {
                    let product = modes.dot(&inverse);
                    let mut residual: f64 = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            let target = if i == j { re(1.0) } else { re(0.0) };
                            residual = residual.max((product[(i, j)] - target).norm());
                        }
                    }
                    healthy = residual <= EIGENBASIS_TOLERANCE;
                }
                if healthy {
                    Propagation::Eigen {
                        rates,
                        modes,
                        inverse,
                    }
                } else {
                    Propagation::Direct
                }
            }
            Err(_) => Propagation::Direct,
        };

        let jump_cavity = space.annihilation().mapv(|x| x * re((2.0 * params.kappa()).sqrt()));
        let jump_atom = space.sigma_minus().mapv(|x| x * re(params.gamma().sqrt()));
        let photon_diag: Vec<f64> = space.basis().iter().map(|b| b.photons as f64).collect();
        let excited_diag: Vec<f64> = space
            .basis()
            .iter()
            .map(|b| (b.total_quanta() - b.photons) as f64)
            .collect();
        let top_shell: Vec<usize> = space
            .basis()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.total_quanta() == space.n_max())
            .map(|(i, _)| i)
            .collect();

        Ok(Self {
            space,
            generator,
            propagation,
            jump_cavity,
            jump_atom,
            photon_diag,
            excited_diag,
            top_shell,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn generator(&self) -> &Array2<C64> {
        &self.generator
    }

    /// True when the event search runs in the drift eigenbasis rather than
    /// through dense matrix exponentials.
    pub fn uses_eigenbasis(&self) -> bool {
        matches!(self.propagation, Propagation::Eigen { .. })
    }

    pub fn ground_state(&self) -> Array1<C64> {
        let mut psi = Array1::<C64>::zeros(self.space.dim());
        psi[0] = re(1.0);
        psi
    }

    /// Represent a post-event state for fast propagation.
    fn represent(&self, psi: &Array1<C64>) -> Array1<C64> {
        match &self.propagation {
            Propagation::Eigen { inverse, .. } => inverse.dot(psi),
            Propagation::Direct => psi.clone(),
        }
    }

    /// Unnormalized state a time `t` after the event that produced `z`.
    fn at(&self, z: &Array1<C64>, t: f64) -> Result<Array1<C64>> {
        match &self.propagation {
            Propagation::Eigen { rates, modes, .. } => {
                let weighted = Array1::from_shape_fn(z.len(), |k| z[k] * (rates[k] * re(t)).exp());
                Ok(modes.dot(&weighted))
            }
            Propagation::Direct => {
                let prop = expm(&self.generator.mapv(|x| x * re(t)))?;
                Ok(prop.dot(z))
            }
        }
    }

    fn norm2(psi: &Array1<C64>) -> f64 {
        psi.iter().map(|x| x.norm_sqr()).sum()
    }

    fn readout(&self, psi: &Array1<C64>) -> Readout {
        let mut norm = 0.0;
        let mut photon = 0.0;
        let mut excitation = 0.0;
        for (i, x) in psi.iter().enumerate() {
            let p = x.norm_sqr();
            norm += p;
            photon += self.photon_diag[i] * p;
            excitation += self.excited_diag[i] * p;
        }
        let top: f64 = self.top_shell.iter().map(|&i| psi[i].norm_sqr()).sum();
        if norm == 0.0 {
            Readout {
                photon: 0.0,
                excitation: 0.0,
                top_shell: 0.0,
            }
        } else {
            Readout {
                photon: photon / norm,
                excitation: excitation / norm,
                top_shell: top / norm,
            }
        }
    }

    fn check_truncation(&self, readout: &Readout, t: f64) -> Result<()> {
        if readout.top_shell > TOP_SHELL_TOLERANCE {
            return Err(Error::TruncationOverflow {
                population: readout.top_shell,
                t,
            });
        }
        Ok(())
    }

    /// Find the event time `t` in `(0, horizon]` where the survival norm
    /// crosses `u`, or `None` when the state survives the whole horizon.
    /// The survival probability is monotone nonincreasing, so bisection on
    /// the squared norm is safe.
    fn next_event(&self, z: &Array1<C64>, u: f64, horizon: f64) -> Result<Option<f64>> {
        if Self::norm2(&self.at(z, horizon)?) > u {
            return Ok(None);
        }
        let mut lo = 0.0;
        let mut hi = horizon;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::norm2(&self.at(z, mid)?) > u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= BISECTION_TOLERANCE * horizon.max(1.0) {
                break;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }

    /// Run one trajectory from `psi0`, sampling conditional observables every
    /// `sample_dt` up to `t_end` and logging every detection event.
    pub fn run(
        &self,
        psi0: &Array1<C64>,
        t_end: f64,
        sample_dt: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<TrajectoryRecord> {
        if !(t_end.is_finite() && t_end > 0.0 && sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "trajectory window and sample step must be positive, got \
                 t_end={t_end}, sample_dt={sample_dt}"
            )));
        }
        if psi0.len() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: psi0.len(),
            });
        }
        let norm0 = Self::norm2(psi0).sqrt();
        if norm0 == 0.0 {
            return Err(Error::InvalidParams(
                "initial trajectory state has zero norm".into(),
            ));
        }

        let n_samples = (t_end / sample_dt + 1e-9).floor() as usize + 1;
        let times: Vec<f64> = (0..n_samples).map(|i| i as f64 * sample_dt).collect();
        let mut photon_number = Vec::with_capacity(n_samples);
        let mut excitation = Vec::with_capacity(n_samples);
        let mut jumps = Vec::new();

        let mut psi_event = psi0.mapv(|x| x / re(norm0));
        let mut t_event = 0.0f64;
        let mut z = self.represent(&psi_event);
        let mut sample = 0usize;

        while sample < n_samples {
            let u: f64 = rng.gen();
            let horizon = t_end - t_event;
            let event = if horizon > 0.0 {
                self.next_event(&z, u, horizon)?
            } else {
                None
            };
            let segment_end = event.map_or(t_end, |dt| t_event + dt);

            while sample < n_samples && times[sample] <= segment_end {
                let psi = self.at(&z, times[sample] - t_event)?;
                let out = self.readout(&psi);
                self.check_truncation(&out, times[sample])?;
                photon_number.push(out.photon);
                excitation.push(out.excitation);
                sample += 1;
            }

            match event {
                None => break,
                Some(dt) => {
                    let t_jump = t_event + dt;
                    let psi = self.at(&z, dt)?;
                    let rate_cavity = Self::norm2(&self.jump_cavity.dot(&psi));
                    let rate_atom = Self::norm2(&self.jump_atom.dot(&psi));
                    let total = rate_cavity + rate_atom;
                    if total <= 0.0 {
                        return Err(Error::Numerical(format!(
                            "survival norm crossed the event threshold at t={t_jump} \
                             but no collapse channel has any rate"
                        )));
                    }
                    let channel = if rng.gen::<f64>() * total < rate_cavity {
                        JumpChannel::Cavity
                    } else {
                        JumpChannel::Atom
                    };
                    let collapsed = match channel {
                        JumpChannel::Cavity => self.jump_cavity.dot(&psi),
                        JumpChannel::Atom => self.jump_atom.dot(&psi),
                    };
                    let norm = Self::norm2(&collapsed).sqrt();
                    psi_event = collapsed.mapv(|x| x / re(norm));
                    let out = self.readout(&psi_event);
                    self.check_truncation(&out, t_jump)?;
                    jumps.push(JumpEvent {
                        time: t_jump,
                        channel,
                    });
                    t_event = t_jump;
                    z = self.represent(&psi_event);
                }
            }
        }

        Ok(TrajectoryRecord {
            times,
            photon_number,
            excitation,
            jumps,
        })
    }
}

/// One trajectory from the ground state on stream `index` of `seed`.
pub fn run_trajectory(
    params: &SystemParams,
    seed: u64,
    index: u64,
    t_end: f64,
    sample_dt: f64,
) -> Result<TrajectoryRecord> {
    let solver = TrajectorySolver::new(params)?;
    let mut rng = stream_rng(seed, index);
    solver.run(&solver.ground_state(), t_end, sample_dt, &mut rng)
}

/// Ensemble average over trajectories started from the ground state.
pub fn ensemble_average(
    params: &SystemParams,
    trajectories: usize,
    seed: u64,
    t_end: f64,
    sample_dt: f64,
) -> Result<EnsembleRecord> {
    let solver = TrajectorySolver::new(params)?;
    let psi0 = solver.ground_state();
    ensemble_average_from(params, &psi0, trajectories, seed, t_end, sample_dt)
}

/// Ensemble average over trajectories started from `psi0`. Trajectory `i`
/// always consumes stream `i` of the seed, so results are independent of the
/// parallel schedule and reproducible bit-for-bit.
pub fn ensemble_average_from(
    params: &SystemParams,
    psi0: &Array1<C64>,
    trajectories: usize,
    seed: u64,
    t_end: f64,
    sample_dt: f64,
) -> Result<EnsembleRecord> {
    if trajectories < 2 {
        return Err(Error::InvalidParams(format!(
            "an ensemble needs at least two trajectories to carry standard \
             errors, got {trajectories}"
        )));
    }
    let solver = TrajectorySolver::new(params)?;
    let records: Result<Vec<TrajectoryRecord>> = (0..trajectories)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(seed, index as u64);
            solver.run(psi0, t_end, sample_dt, &mut rng)
        })
        .collect();
    let records = records?;

    let times = records[0].times.clone();
    let n = records.len() as f64;
    let n_samples = times.len();
    let mut photon_mean = vec![0.0; n_samples];
    let mut excitation_mean = vec![0.0; n_samples];
    for record in &records {
        for k in 0..n_samples {
            photon_mean[k] += record.photon_number[k];
            excitation_mean[k] += record.excitation[k];
        }
    }
    for k in 0..n_samples {
        photon_mean[k] /= n;
        excitation_mean[k] /= n;
    }
    let mut photon_se = vec![0.0; n_samples];
    let mut excitation_se = vec![0.0; n_samples];
    for record in &records {
        for k in 0..n_samples {
            photon_se[k] += (record.photon_number[k] - photon_mean[k]).powi(2);
            excitation_se[k] += (record.excitation[k] - excitation_mean[k]).powi(2);
        }
    }
    for k in 0..n_samples {
        photon_se[k] = (photon_se[k] / (n * (n - 1.0))).sqrt();
        excitation_se[k] = (excitation_se[k] / (n * (n - 1.0))).sqrt();
    }
    let mean_jumps = records.iter().map(|r| r.jumps.len()).sum::<usize>() as f64 / n;

    Ok(EnsembleRecord {
        times,
        photon_mean,
        photon_se,
        excitation_mean,
        excitation_se,
        trajectories,
        mean_jumps,
    })
}

/// Deterministic conditioned evolution after a cavity emission from steady
/// state: take the dominant pure component of the stationary density matrix,
/// apply the cavity collapse operator, and follow the no-event drift.
///
/// In the weak-pump regime the stationary state is almost pure, so this
/// captures the conditional dynamics an emission heralds: the surviving
/// single quantum coherently swaps between cavity and atom while the
/// no-event renormalization concentrates the state in the slowest-decaying
/// branch.
pub fn conditioned_after_emission(
    params: &SystemParams,
    t_end: f64,
    sample_dt: f64,
) -> Result<ConditionedRecord> {
    if !(t_end.is_finite() && t_end > 0.0 && sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::InvalidParams(format!(
            "conditioned window and sample step must be positive, got \
             t_end={t_end}, sample_dt={sample_dt}"
        )));
    }
    let emitted = post_detection_state(params)?;
    let solver = TrajectorySolver::new(params)?;
    let z = solver.represent(&emitted);
    let n_samples = (t_end / sample_dt + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut photon_number = Vec::with_capacity(n_samples);
    let mut excitation = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 * sample_dt;
        let psi = solver.at(&z, t)?;
        let out = solver.readout(&psi);
        solver.check_truncation(&out, t)?;
        times.push(t);
        photon_number.push(out.photon);
        excitation.push(out.excitation);
    }
    Ok(ConditionedRecord {
        times,
        photon_number,
        excitation,
    })
}

/// The normalized state right after a cavity emission from steady state:
/// the annihilation operator applied to the purified stationary state.
///
/// In the weak-pump regime the stationary state is almost pure (its largest
/// eigenvalue carries essentially all the weight), so the dominant
/// eigenvector is the state the emission is conditioned on.
pub fn post_detection_state(params: &SystemParams) -> Result<Array1<C64>> {
    use crate::lindblad::MasterEquation;

    let me = MasterEquation::new(*params);
    let rho = me.steady_state()?;
    let (weights, states) = eig(&rho)?;
    let mut dominant = 0;
    for k in 1..weights.len() {
        if weights[k].re > weights[dominant].re {
            dominant = k;
        }
    }
    let psi: Array1<C64> = states.column(dominant).to_owned();

    let space = StateSpace::new(params.n_max());
    let emitted = space.annihilation().dot(&psi);
    let norm = TrajectorySolver::norm2(&emitted).sqrt();
    if norm < 1e-12 {
        return Err(Error::Numerical(
            "stationary state has no photonic component to emit from".into(),
        ));
    }
    Ok(emitted.mapv(|x| x / re(norm)))
}
