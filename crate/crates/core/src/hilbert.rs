//! Joint atom-cavity state space and the operators acting on it.
//!
//! The infinite Fock ladder is truncated by **total quanta** (photons plus
//! atomic excitation) rather than by photon number alone: the pump injects
//! photons in pairs and the coupling exchanges a photon for an atomic
//! excitation, so shells of fixed total quanta are the natural organizing
//! principle at weak pumping. Keeping entire shells up to `n_max` quanta
//! gives `2 * n_max + 1` basis states.
//!
//! Truncated operator matrices are built so that every retained matrix
//! element equals the exact infinite-space value. Lowering-type products
//! (`a * a`, `adag * sm`) are safe to form from truncated factors because the
//! intermediate state never leaves the retained space; raising-type operators
//! are obtained by conjugate transpose of their lowering partners. Forming,
//! say, `a * sp` from truncated factors instead would silently drop the
//! top-shell exchange coupling.

use ndarray::Array2;

use crate::linalg::{dagger, C64};
use crate::params::SystemParams;

/// Internal state of the two-level atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomState {
    Ground,
    Excited,
}

/// One joint basis state: the atom's level and the cavity photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub atom: AtomState,
    pub photons: usize,
}

impl BasisState {
    pub fn ground(photons: usize) -> Self {
        Self {
            atom: AtomState::Ground,
            photons,
        }
    }

    pub fn excited(photons: usize) -> Self {
        Self {
            atom: AtomState::Excited,
            photons,
        }
    }

    /// Photons plus one if the atom is excited; conserved by the coherent
    /// dynamics except for pair injection by the pump.
    pub fn total_quanta(&self) -> usize {
        self.photons
            + match self.atom {
                AtomState::Ground => 0,
                AtomState::Excited => 1,
            }
    }
}

/// The truncated joint Hilbert space.
///
/// Basis ordering: ascending total quanta, and within each shell the
/// ground-state member precedes the excited one. For `n_max = 2` that is
/// `|g,0>, |g,1>, |e,0>, |g,2>, |e,1>`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_max: usize,
    basis: Vec<BasisState>,
}

impl StateSpace {
    /// Build the space holding every state with at most `n_max` total quanta.
    pub fn new(n_max: usize) -> Self {
        let mut basis = Vec::with_capacity(2 * n_max + 1);
        basis.push(BasisState::ground(0));
        for shell in 1..=n_max {
            basis.push(BasisState::ground(shell));
            basis.push(BasisState::excited(shell - 1));
        }
        Self { n_max, basis }
    }

    /// Number of retained basis states, `2 * n_max + 1`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Truncation shell.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// The ordered basis.
    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    /// Position of `state` in the ordering, if it is retained.
    pub fn index(&self, state: BasisState) -> Option<usize> {
        let t = state.total_quanta();
        if t > self.n_max {
            return None;
        }
        if t == 0 {
            return Some(0);
        }
        // Shell t starts after the 2(t-1)+1 states of shells 0..t.
        let shell_start = 2 * t - 1;
        Some(match state.atom {
            AtomState::Ground => shell_start,
            AtomState::Excited => shell_start + 1,
        })
    }

    /// Build a matrix from a single-target action `state -> (amplitude, state)`.
    /// Actions leaving the retained space contribute nothing, which is exactly
    /// the truncation of the matrix elements.
    fn operator(&self, action: impl Fn(BasisState) -> Option<(f64, BasisState)>) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for (col, &src) in self.basis.iter().enumerate() {
            if let Some((amp, dst)) = action(src) {
                if let Some(row) = self.index(dst) {
                    m[(row, col)] = C64::new(amp, 0.0);
                }
            }
        }
        m
    }

    /// Photon annihilation operator `a`.
    pub fn annihilation(&self) -> Array2<C64> {
        self.operator(|s| {
            (s.photons > 0).then(|| {
                (
                    (s.photons as f64).sqrt(),
                    BasisState {
                        atom: s.atom,
                        photons: s.photons - 1,
                    },
                )
            })
        })
    }

    /// Photon creation operator `a^dag` (conjugate transpose of `a`, so the
    /// retained matrix elements are exact).
    pub fn creation(&self) -> Array2<C64> {
        dagger(&self.annihilation())
    }

    /// Atomic lowering operator `sigma_-`.
    pub fn sigma_minus(&self) -> Array2<C64> {
        self.operator(|s| {
            (s.atom == AtomState::Excited).then(|| (1.0, BasisState::ground(s.photons)))
        })
    }

    /// Atomic raising operator `sigma_+`.
    pub fn sigma_plus(&self) -> Array2<C64> {
        dagger(&self.sigma_minus())
    }

    /// Photon number operator `a^dag a` (diagonal).
    pub fn photon_number(&self) -> Array2<C64> {
        self.operator(|s| Some((s.photons as f64, s)))
    }

    /// Atomic excitation projector `sigma_+ sigma_-` (diagonal).
    pub fn excitation(&self) -> Array2<C64> {
        self.operator(|s| (s.atom == AtomState::Excited).then_some((1.0, s)))
    }

    /// System Hamiltonian (units of hbar, rotating frame at resonance):
    ///
    /// ```text
    /// H = i F (a^dag^2 - a^2) + i g (a^dag sigma_- - a sigma_+)
    /// ```
    ///
    /// The pair term injects and removes photons two at a time; the exchange
    /// term swaps a photon for an atomic excitation. Both products are formed
    /// lowering-side first and mirrored by conjugate transpose, which keeps
    /// every retained matrix element exact — including the top-shell exchange
    /// element (`sqrt(2) g` between `|g,2>` and `|e,1>` when `n_max = 2`).
    pub fn hamiltonian(&self, params: &SystemParams) -> Array2<C64> {
        let a = self.annihilation();
        let a2 = a.dot(&a);
        // a^dag sigma_-: the intermediate state after sigma_- sits one shell
        // below the source, so the truncated product is exact.
        let exchange = self.creation().dot(&self.sigma_minus());
        let i = C64::new(0.0, 1.0);
        let pair = &dagger(&a2) - &a2;
        let swap = &exchange - &dagger(&exchange);
        pair.mapv(|x| i * params.drive() * x) + swap.mapv(|x| i * params.g() * x)
    }
}
