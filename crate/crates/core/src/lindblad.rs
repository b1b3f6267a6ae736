//! Master equation of the damped atom-cavity system, its steady state, and
//! time evolution of density matrices.
//!
//! The equation of motion is
//!
//! ```text
//! d rho / dt = -i [H, rho]
//!              + (gamma/2) (2 sm rho sp - sp sm rho - rho sp sm)
//!              + kappa     (2 a  rho ad - ad a  rho - rho ad a)
//! ```
//!
//! with `H` from [`StateSpace::hamiltonian`]. `kappa` multiplies the cavity
//! dissipator without a factor 1/2, so the intracavity photon number decays
//! at `2 kappa`; the matching collapse operators for unravelled dynamics are
//! `sqrt(2 kappa) a` and `sqrt(gamma) sm`.
//!
//! Superoperators are stored as `d^2 x d^2` matrices acting on column-stacked
//! density matrices (see [`crate::linalg::vec_density`]). Because `H` is
//! purely imaginary and the dissipators are real, the generator built here is
//! a real matrix; spectra computed from it are exactly even in frequency.

use ndarray::{linalg::kron, Array1, Array2};

use crate::error::{Error, Result};
use crate::hilbert::StateSpace;
use crate::linalg::{
    dagger, integrate_linear, lu_solve, max_abs, null_space_dim, re, unvec_density, vec_density,
    C64,
};
use crate::params::SystemParams;

/// Superoperator matrix of the map `rho -> A rho B` under column stacking:
/// `vec(A rho B) = (B^T kron A) vec(rho)`.
pub fn sandwich(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    kron(&b.t().to_owned(), a)
}

/// Liouvillian matrix for the master equation above.
pub fn liouvillian(space: &StateSpace, params: &SystemParams) -> Array2<C64> {
    let d = space.dim();
    let id = Array2::<C64>::eye(d);
    let h = space.hamiltonian(params);
    let i = C64::new(0.0, 1.0);

    // -i (H rho - rho H)
    let mut l = sandwich(&h, &id).mapv(|z| -i * z) + sandwich(&id, &h).mapv(|z| i * z);

    // Atomic emission at rate gamma.
    let sm = space.sigma_minus();
    let sp = space.sigma_plus();
    let spsm = sp.dot(&sm);
    let atom = sandwich(&sm, &sp).mapv(|z| re(2.0) * z) - sandwich(&spsm, &id) - sandwich(&id, &spsm);
    l = l + atom.mapv(|z| re(0.5 * params.gamma()) * z);

    // Cavity loss at rate 2 kappa (photon number).
    let a = space.annihilation();
    let ad = space.creation();
    let ada = ad.dot(&a);
    let cavity = sandwich(&a, &ad).mapv(|z| re(2.0) * z) - sandwich(&ada, &id) - sandwich(&id, &ada);
    l + cavity.mapv(|z| re(params.kappa()) * z)
}

/// Trace of a square matrix.
pub fn trace(m: &Array2<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Expectation value `tr(op rho)`.
pub fn expectation(op: &Array2<C64>, rho: &Array2<C64>) -> C64 {
    // tr(op rho) = sum_{i,k} op[i,k] rho[k,i]; avoids the full product.
    let d = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += op[(i, k)] * rho[(k, i)];
        }
    }
    acc
}

/// The master equation for one parameter set: state space, generator, and
/// the solvers built on them.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    params: SystemParams,
    space: StateSpace,
    generator: Array2<C64>,
}

impl MasterEquation {
    pub fn new(params: SystemParams) -> Self {
        let space = StateSpace::new(params.n_max());
        let generator = liouvillian(&space, &params);
        Self {
            params,
            space,
            generator,
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// The `d^2 x d^2` generator acting on column-stacked density matrices.
    pub fn generator(&self) -> &Array2<C64> {
        &self.generator
    }

    /// Unique steady state of the master equation.
    ///
    /// `L vec(rho) = 0` is degenerate by trace conservation, so the first row
    /// is replaced by the trace condition `tr rho = 1` and the system LU
    /// solved. The solution is accepted only if it annihilates the *original*
    /// generator to high precision; otherwise the generator's null space is
    /// measured to distinguish a genuinely non-unique steady state (for
    /// example an undamped, uncoupled atom) from numerical breakdown.
    pub fn steady_state(&self) -> Result<Array2<C64>> {
        let d = self.space.dim();
        let n = d * d;
        let mut m = self.generator.clone();
        for col in 0..n {
            m[(0, col)] = C64::new(0.0, 0.0);
        }
        for i in 0..d {
            m[(0, i * (d + 1))] = C64::new(1.0, 0.0);
        }
        let mut rhs = Array1::<C64>::zeros(n);
        rhs[0] = C64::new(1.0, 0.0);

        let solved = lu_solve(&m, &rhs);
        let v = match solved {
            Ok(v) => v,
            Err(_) => return Err(self.diagnose_degeneracy()),
        };

        let residual = self.generator.dot(&v);
        let tol = 1e-10 * max_abs(&self.generator).max(1.0);
        let worst = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !worst.is_finite() || worst > tol {
            return Err(self.diagnose_degeneracy());
        }

        let rho = unvec_density(&v, d);
        // Physical clean-up: exact hermiticity and unit trace. Both hold to
        // solver precision already; this removes the last-epsilon dust.
        let herm = (&rho + &dagger(&rho)).mapv(|z| re(0.5) * z);
        let tr = trace(&herm);
        Ok(herm.mapv(|z| z / tr))
    }

    fn diagnose_degeneracy(&self) -> Error {
        match null_space_dim(&self.generator, 1e-9) {
            Ok(k) if k > 1 => Error::NonUniqueSteadyState { null_dim: k },
            Ok(_) => Error::SingularSystem,
            Err(e) => e,
        }
    }

    /// Evolve a density matrix forward by `t`.
    pub fn evolve(&self, rho0: &Array2<C64>, t: f64, rtol: f64) -> Result<Array2<C64>> {
        let d = self.space.dim();
        if rho0.nrows() != d || rho0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rho0.nrows(),
            });
        }
        let v = integrate_linear(&self.generator, &vec_density(rho0), t, rtol)?;
        Ok(unvec_density(&v, d))
    }
}
