//! Chain states over group-valued atoms.
//!
//! A state is a ring of atoms (each atom a qudit whose basis is indexed by
//! group elements), cut open at a fixed seam for storage. Two backends share
//! one API: a dense amplitude vector (the oracle, capped in size) and a
//! structured matrix-product form whose bonds are kept exact by
//! rank-revealing splits. Protocol drivers use the primitives here: local
//! monomial operators, block "recipe" projectors (sums of products of local
//! monomials), diagonal pair projections, rank-one block collapse, adjacent
//! swaps, and moments.
//!
//! Atom orders used by the builtin constructors:
//!
//! * Entangled-pair chain over N sites: atoms `[L_1, R_1, L_2, R_2, ...,
//!   L_N, R_N]`; maximally entangled pairs sit on `(R_i, L_{i+1})` and the
//!   wrap pair `(R_N, L_1)` runs through the seam.
//! * Fiducial GHZ chain over N sites: atoms `[R_1, L_2, P_2, R_2, ...,
//!   L_N, P_N, R_N, L_1, P_1]`; each site's triple `(L_i, P_i, R_i)` holds
//!   Σ_g |ggg⟩, the site-1 triple runs through the seam, and the pair
//!   `(R_N, L_1)` is contiguous.

pub mod dense;
pub mod mps;

pub use dense::DenseState;
pub use mps::MpsState;

use crate::meas::MonomialOp;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cap on dense amplitude vectors.
pub const DENSE_STATE_CAP: usize = 1 << 22;
/// Relative tolerance for exact rank decisions in tensor splits.
pub const RANK_TOL: f64 = 1e-11;
/// Outcome probabilities below this are treated as exactly zero.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("dense representation would need {0} amplitudes (cap {DENSE_STATE_CAP})")]
    DenseCap(usize),
    #[error("all outcome probabilities vanished ({0})")]
    Underflow(String),
    #[error("internal state error: {0}")]
    Internal(String),
}

/// Which simulation backend a state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Dense,
    Structured,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Backend::Dense),
            "structured" | "mps" => Ok(Backend::Structured),
            other => Err(format!("unknown backend '{}'", other)),
        }
    }
}

/// One projective measurement event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// (first atom position, atom count) at the time of measurement.
    pub block: (usize, usize),
    /// Hierarchy level of the measured class family (0 for label readouts).
    pub level: usize,
    /// Index of the sampled outcome.
    pub outcome: usize,
    /// Born probability of the sampled outcome.
    pub probability: f64,
}

/// A block vector of the form Σ_x coeff[x] · ⊗_t |maps[t][x]⟩: a label
/// chain with one free group label. GHZ states, the rank-one measurement
/// basis, and all correction targets take this shape.
#[derive(Debug, Clone)]
pub struct LabelChainVector {
    pub coeff: Vec<C64>,
    pub maps: Vec<Vec<usize>>,
}

impl LabelChainVector {
    pub fn new(coeff: Vec<C64>, maps: Vec<Vec<usize>>) -> Self {
        for m in &maps {
            assert_eq!(m.len(), coeff.len());
        }
        Self { coeff, maps }
    }

    /// Uniform GHZ state over `n_atoms` atoms of dimension `dim`.
    pub fn ghz(dim: usize, n_atoms: usize) -> Self {
        let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self {
            coeff: vec![amp; dim],
            maps: vec![(0..dim).collect(); n_atoms],
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.maps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// A chain state on either backend.
#[derive(Debug, Clone)]
pub enum ChainState {
    Dense(DenseState),
    Mps(MpsState),
}

impl ChainState {
    /// Ring of maximally entangled pairs `(R_i, L_{i+1})` (see module docs
    /// for the atom order).
    pub fn bell_pair_chain(dim: usize, n_sites: usize, backend: Backend) -> Result<Self, StateError> {
        match backend {
            Backend::Dense => Ok(ChainState::Dense(DenseState::bell_pair_chain(dim, n_sites)?)),
            Backend::Structured => Ok(ChainState::Mps(MpsState::bell_pair_chain(dim, n_sites))),
        }
    }

    /// Ring of per-site fiducial GHZ triples, already in the relocated atom
    /// order (see module docs).
    pub fn ghz_fiducial_chain(
        dim: usize,
        n_sites: usize,
        backend: Backend,
    ) -> Result<Self, StateError> {
        match backend {
            Backend::Dense => Ok(ChainState::Dense(DenseState::ghz_fiducial_chain(
                dim, n_sites,
            )?)),
            Backend::Structured => Ok(ChainState::Mps(MpsState::ghz_fiducial_chain(dim, n_sites))),
        }
    }

    /// Open chain of per-site fiducial GHZ factors: two atoms on each end
    /// site, three on interior sites (see module docs for the atom order).
    pub fn ghz_fiducial_open(
        dim: usize,
        n_sites: usize,
        backend: Backend,
    ) -> Result<Self, StateError> {
        match backend {
            Backend::Dense => Ok(ChainState::Dense(DenseState::ghz_fiducial_open(
                dim, n_sites,
            )?)),
            Backend::Structured => Ok(ChainState::Mps(MpsState::ghz_fiducial_open(dim, n_sites))),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            ChainState::Dense(_) => Backend::Dense,
            ChainState::Mps(_) => Backend::Structured,
        }
    }

    pub fn n_atoms(&self) -> usize {
        match self {
            ChainState::Dense(s) => s.n_atoms(),
            ChainState::Mps(s) => s.n_atoms(),
        }
    }

    pub fn atom_dims(&self) -> Vec<usize> {
        match self {
            ChainState::Dense(s) => s.atom_dims().to_vec(),
            ChainState::Mps(s) => s.atom_dims(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        match self {
            ChainState::Dense(s) => s.norm_sqr(),
            ChainState::Mps(s) => s.norm_sqr(),
        }
    }

    pub fn normalize(&mut self) {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            self.scale(1.0 / n2.sqrt());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            ChainState::Dense(s) => s.scale(factor),
            ChainState::Mps(s) => s.scale(factor),
        }
    }

    /// Applies a monomial operator to one atom.
    pub fn apply_monomial(&mut self, pos: usize, op: &MonomialOp) {
        match self {
            ChainState::Dense(s) => s.apply_monomial(pos, op),
            ChainState::Mps(s) => s.apply_monomial(pos, op),
        }
    }

    /// Expectation values ⟨ψ| Π_t O_t |ψ⟩ for several operator strings on
    /// the block starting at `start` (one entry per op set; each set has one
    /// operator per block atom).
    pub fn moment_batch(&self, start: usize, op_sets: &[Vec<MonomialOp>]) -> Vec<C64> {
        match self {
            ChainState::Dense(s) => s.moment_batch(start, op_sets),
            ChainState::Mps(s) => s.moment_batch(start, op_sets),
        }
    }

    /// Applies Σ_t coeff_t Π_a O_{t,a} to the block at `start`. Leaves the
    /// state unnormalized (the norm² drop is the outcome probability).
    pub fn apply_recipe(&mut self, start: usize, terms: &[(C64, Vec<MonomialOp>)]) {
        match self {
            ChainState::Dense(s) => s.apply_recipe(start, terms),
            ChainState::Mps(s) => s.apply_recipe(start, terms),
        }
    }

    /// Joint computational-label distribution of two adjacent atoms.
    pub fn pair_diagonal_distribution(&self, pos: usize) -> ndarray::Array2<f64> {
        match self {
            ChainState::Dense(s) => s.pair_diagonal_distribution(pos),
            ChainState::Mps(s) => s.pair_diagonal_distribution(pos),
        }
    }

    /// Projects two adjacent atoms onto the label pairs selected by `keep`;
    /// returns the outcome probability and renormalizes.
    pub fn project_pair_diagonal(
        &mut self,
        pos: usize,
        keep: &dyn Fn(usize, usize) -> bool,
    ) -> f64 {
        match self {
            ChainState::Dense(s) => s.project_pair_diagonal(pos, keep),
            ChainState::Mps(s) => s.project_pair_diagonal(pos, keep),
        }
    }

    /// Contracts ⟨bra| against a contiguous block, removing those atoms.
    /// Returns the outcome probability; the remaining state is renormalized.
    pub fn collapse_block(
        &mut self,
        start: usize,
        bra: &LabelChainVector,
    ) -> Result<f64, StateError> {
        match self {
            ChainState::Dense(s) => s.collapse_block(start, bra),
            ChainState::Mps(s) => {
                let (prob, leftover) = s.collapse_block(start, bra)?;
                if let Some(scalar) = leftover {
                    *self = ChainState::Dense(DenseState::scalar(scalar));
                }
                Ok(prob)
            }
        }
    }

    /// Inserts a maximally entangled pair Σ_d |d,d⟩/√dim before `pos`.
    pub fn insert_bell_pair(&mut self, pos: usize, dim: usize) -> Result<(), StateError> {
        match self {
            ChainState::Dense(s) => s.insert_bell_pair(pos, dim),
            ChainState::Mps(s) => {
                s.insert_bell_pair(pos, dim);
                Ok(())
            }
        }
    }

    /// Swaps atoms at positions `pos` and `pos + 1`.
    pub fn swap_adjacent(&mut self, pos: usize) {
        match self {
            ChainState::Dense(s) => s.swap_adjacent(pos),
            ChainState::Mps(s) => s.swap_adjacent(pos),
        }
    }

    /// Full amplitude vector (row-major over atom labels).
    pub fn to_dense(&self) -> Result<Vec<C64>, StateError> {
        match self {
            ChainState::Dense(s) => Ok(s.amplitudes().to_vec()),
            ChainState::Mps(s) => s.to_dense(DENSE_STATE_CAP),
        }
    }

    /// ⟨self|other⟩ for states with identical atom dimensions.
    pub fn overlap(&self, other: &ChainState) -> Result<C64, StateError> {
        if self.atom_dims() != other.atom_dims() {
            return Err(StateError::DimMismatch(
                "overlap of states with different atom layouts".into(),
            ));
        }
        match (self, other) {
            (ChainState::Mps(a), ChainState::Mps(b)) => a.overlap(b),
            _ => {
                let a = self.to_dense()?;
                let b = other.to_dense()?;
                Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
            }
        }
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &ChainState) -> Result<f64, StateError> {
        Ok(self.overlap(other)?.norm_sqr())
    }

    /// Largest bond dimension (0 on the dense backend).
    pub fn max_bond(&self) -> usize {
        match self {
            ChainState::Dense(_) => 0,
            ChainState::Mps(s) => s.max_bond(),
        }
    }
}

/// Samples an index from an unnormalized probability list. Small negative
/// entries (float noise) are clamped to zero.
pub fn sample_outcome(probs: &[f64], rng: &mut impl Rng) -> Result<usize, StateError> {
    let cleaned: Vec<f64> = probs
        .iter()
        .map(|&p| {
            debug_assert!(p > -1e-9, "negative probability {}", p);
            p.max(0.0)
        })
        .collect();
    let total: f64 = cleaned.iter().sum();
    if total < PROB_FLOOR {
        return Err(StateError::Underflow(format!(
            "probabilities sum to {:.3e}",
            total
        )));
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, &p) in cleaned.iter().enumerate() {
        if u < p {
            return Ok(i);
        }
        u -= p;
    }
    Ok(cleaned.len() - 1)
}
