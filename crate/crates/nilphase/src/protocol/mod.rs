//! Measurement-and-feedforward protocol drivers: the round cascade that
//! disentangles a symmetry-protected chain into a product state, and the
//! three-part procedure that fuses per-site fiducial states into a
//! group-register GHZ state.
//!
//! The module splits into:
//!
//! * [`partition`]: pure outcome-string bookkeeping (greedy minimal
//!   partitions, cancellation-aware reordering, swap schedules, the
//!   remainder ledger, closed-form samplers);
//! * [`ChainSim`] and [`Block`]: a chain of group-valued atoms with a
//!   stable atom roster layered over [`ChainState`], plus the contiguous
//!   block bookkeeping the drivers share;
//! * [`spt::run_spt_protocol`] and [`ghz::run_ghz_protocol`]: the two
//!   end-to-end drivers, each producing a [`ProtocolTrace`].

pub mod ghz;
pub mod partition;
pub mod spt;

pub use ghz::{part2_measurement_set, run_ghz_protocol};
pub use partition::{
    find_cancelling_run, odd_even_schedule, partition_minimal, permutation_span, plan_compaction,
    remainder_update, sample_closed_form, sample_closed_form_with, LevelClass, OutcomeString,
    Partition, PartitionResult, RemainderAction, RemainderTuple, RoundKind,
};
pub use spt::run_spt_protocol;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{GroupError, GroupTable};
use crate::meas::{clock_op, Cocycle, MeasError, MonomialOp};
use crate::repr::{CharacterTable, ReprError, StructureData};
use crate::state::{Backend, ChainState, LabelChainVector, StateError};

/// Tolerance for completeness and norm bookkeeping checks during
/// measurement rounds.
pub const MEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Meas(#[from] MeasError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("invalid protocol config: {0}")]
    Config(String),
    #[error("outcome parity violated: {0}")]
    ParityViolation(String),
    #[error("internal protocol invariant violated: {0}")]
    Internal(String),
}

// ---------------------------------------------------------------------------
// Configuration and thresholds

/// Inputs shared by both protocol drivers.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub group: GroupTable,
    /// Cocycle twisting the on-site representation (chain driver only);
    /// `None` means the trivial cocycle.
    pub cocycle: Option<Cocycle>,
    pub n_sites: usize,
    /// Overheads R_m > 0 per round; the last entry is reused when a
    /// protocol has more rounds than entries.
    pub r_rounds: Vec<f64>,
    /// Explicit per-round depth thresholds, overriding the
    /// C_m log N defaults.
    pub l_override: Option<Vec<usize>>,
    pub seed: u64,
    pub backend: Backend,
}

impl ProtocolConfig {
    pub fn new(group: GroupTable, n_sites: usize) -> Self {
        Self {
            group,
            cocycle: None,
            n_sites,
            r_rounds: vec![1.0],
            l_override: None,
            seed: 0,
            backend: Backend::Dense,
        }
    }

    pub fn r_for(&self, round_index: usize) -> f64 {
        self.r_rounds
            .get(round_index)
            .or(self.r_rounds.last())
            .copied()
            .unwrap_or(1.0)
    }

    pub fn validate(&self, min_sites: usize) -> Result<(), ProtocolError> {
        if self.n_sites < min_sites {
            return Err(ProtocolError::Config(format!(
                "need at least {} sites, got {}",
                min_sites, self.n_sites
            )));
        }
        if self.r_rounds.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
            return Err(ProtocolError::Config(
                "round overheads must be positive and finite".into(),
            ));
        }
        if let Some(ls) = &self.l_override {
            if ls.iter().any(|&l| l == 0) {
                return Err(ProtocolError::Config(
                    "depth thresholds must be at least 1".into(),
                ));
            }
        }
        if let Some(c) = &self.cocycle {
            c.validate(&self.group)?;
        }
        Ok(())
    }
}

/// Threshold data for one class-measurement round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundPlan {
    /// 1-based round number.
    pub round: usize,
    /// Irrep level measured this round.
    pub level: usize,
    /// Identity-class probability 1/r of a uniform outcome.
    pub q: f64,
    /// Growth constant C = -(1+R)/ln(1-q).
    pub c: f64,
    /// Depth threshold L = max(1, ceil(C ln N)).
    pub l: usize,
}

fn threshold_from(c: f64, n_sites: usize) -> usize {
    let raw = c * (n_sites as f64).ln();
    (raw - 1e-9).ceil().max(1.0) as usize
}

/// Class-round schedule for a chain of `n_sites`: rounds m = 1..M-1
/// measuring level M-(m-1). Empty when the group is abelian.
pub fn round_plans(
    sd: &StructureData,
    n_sites: usize,
    cfg: &ProtocolConfig,
) -> Result<Vec<RoundPlan>, ProtocolError> {
    let m_depth = sd.depth();
    let mut plans = Vec::new();
    for round in 1..m_depth {
        let level = m_depth - (round - 1);
        let r = sd.class_group(level).num_classes();
        if r < 2 {
            return Err(ProtocolError::Internal(format!(
                "degenerate class group of order {} at level {}",
                r, level
            )));
        }
        let q = 1.0 / r as f64;
        let c = -(1.0 + cfg.r_for(round - 1)) / (1.0 - q).ln();
        let l = match &cfg.l_override {
            Some(ls) => *ls.get(round - 1).ok_or_else(|| {
                ProtocolError::Config(format!("no threshold override for round {}", round))
            })?,
            None => threshold_from(c, n_sites),
        };
        plans.push(RoundPlan {
            round,
            level,
            q,
            c,
            l,
        });
    }
    Ok(plans)
}

/// Number of projectors in the mixed-level family used on appended
/// pairs: all level-2 classes plus the non-identity classes of levels
/// 3..=M.
pub fn part2_family_size(sd: &StructureData) -> usize {
    let m_depth = sd.depth();
    if m_depth < 2 {
        return 0;
    }
    let mut size = sd.class_group(2).num_classes();
    for level in 3..=m_depth {
        size += sd.class_group(level).num_classes() - 1;
    }
    size
}

/// Cap on appended auxiliary pairs in the fusion driver, derived the
/// same way as the round thresholds with q = 1/family size.
pub fn append_cap_plan(
    sd: &StructureData,
    n_sites: usize,
    cfg: &ProtocolConfig,
) -> Result<Option<RoundPlan>, ProtocolError> {
    let m_depth = sd.depth();
    if m_depth < 2 {
        return Ok(None);
    }
    let size = part2_family_size(sd);
    let q = 1.0 / size as f64;
    let round = m_depth;
    let c = -(1.0 + cfg.r_for(round - 1)) / (1.0 - q).ln();
    let l = match &cfg.l_override {
        Some(ls) => *ls.get(round - 1).ok_or_else(|| {
            ProtocolError::Config("no threshold override for the append cap".into())
        })?,
        None => threshold_from(c, n_sites),
    };
    Ok(Some(RoundPlan {
        round,
        level: m_depth,
        q,
        c,
        l,
    }))
}

// ---------------------------------------------------------------------------
// Atoms, blocks, and the byproduct frame

/// What an atom is for, and which site or appended pair it came from.
/// Sites are 0-indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomRole {
    /// Left half of a chain site (conjugate projective action).
    Left(usize),
    /// Right half of a chain site (projective action).
    Right(usize),
    /// Right auxiliary of a fiducial site.
    AuxRight(usize),
    /// Left auxiliary of a fiducial site.
    AuxLeft(usize),
    /// Physical (output) register of a fiducial site.
    Carrier(usize),
    /// Half 0 or 1 of appended auxiliary pair `p`.
    Fresh(usize, u8),
}

impl AtomRole {
    /// The correction variable this atom's label is tied to.
    pub fn owner(&self) -> FrameVar {
        match *self {
            AtomRole::Left(s) | AtomRole::Right(s) => FrameVar::Site(s),
            AtomRole::AuxRight(s) | AtomRole::AuxLeft(s) | AtomRole::Carrier(s) => {
                FrameVar::Site(s)
            }
            AtomRole::Fresh(p, _) => FrameVar::Pair(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub id: usize,
    pub role: AtomRole,
}

/// Variables of the correction-frame relation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameVar {
    Site(usize),
    Pair(usize),
    Block(usize),
}

/// Phase convention of a translation correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Twist {
    /// |h⟩ ↦ |h∘u⟩.
    Plain,
    /// |h⟩ ↦ γ(h,u) |h∘u⟩.
    Gamma,
    /// |h⟩ ↦ conj(γ(h,u)) |h∘u⟩.
    GammaConj,
}

/// One tracked correction operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrameOp {
    /// Diagonal character operator Σ_h χ^α(h⁻¹)|h⟩⟨h|, or its adjoint.
    Phase { alpha: usize, adjoint: bool },
    /// Translation T_u in the given twist convention, or its adjoint.
    Translate {
        element: usize,
        twist: Twist,
        adjoint: bool,
    },
    /// Diagonal sign operator |h⟩ ↦ s(h∘shift)|h⟩, where s is the
    /// alternating sign over cosets of the order-2 subgroup generated
    /// by `central` (see [`central_sign_mask`]). Self-adjoint.
    Mask { central: usize, shift: usize },
}

/// Classically tracked corrections mapping the raw protocol output to
/// the canonical target state. Entries are (atom id, operator).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ByproductFrame {
    pub ops: Vec<(usize, FrameOp)>,
}

impl ByproductFrame {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Builds the translation monomial T_u for one twist convention.
pub fn translate_op(
    group: &GroupTable,
    cocycle: Option<&Cocycle>,
    u: usize,
    twist: Twist,
) -> MonomialOp {
    MonomialOp::from_fn(group.order(), |h| {
        let target = group.mul(h, u);
        let phase = match (twist, cocycle) {
            (Twist::Plain, _) | (_, None) => C64::new(1.0, 0.0),
            (Twist::Gamma, Some(c)) => c.value(h, u),
            (Twist::GammaConj, Some(c)) => c.value(h, u).conj(),
        };
        (target, phase)
    })
}

fn frame_monomial(
    op: &FrameOp,
    group: &GroupTable,
    ct: &CharacterTable,
    cocycle: Option<&Cocycle>,
) -> MonomialOp {
    match *op {
        FrameOp::Phase { alpha, adjoint } => {
            let m = clock_op(group, ct, alpha);
            if adjoint {
                m.adjoint()
            } else {
                m
            }
        }
        FrameOp::Translate {
            element,
            twist,
            adjoint,
        } => {
            let m = translate_op(group, cocycle, element, twist);
            if adjoint {
                m.adjoint()
            } else {
                m
            }
        }
        FrameOp::Mask { central, shift } => {
            let s = central_sign_mask(group, central);
            MonomialOp::from_fn(group.order(), |h| {
                (h, C64::new(s[group.mul(h, shift)], 0.0))
            })
        }
    }
}

/// A ±1 labeling of the group that alternates between the two members
/// of each left coset {x, central∘x}: the member with the smaller
/// index gets +1. Requires `central∘central = e` and `central ≠ e`;
/// then s(central∘x) = −s(x) for every x, making diag(s) anticommute
/// with the left translation by `central`.
pub fn central_sign_mask(group: &GroupTable, central: usize) -> Vec<f64> {
    assert_ne!(central, group.identity(), "sign mask needs a nontrivial generator");
    assert_eq!(
        group.mul(central, central),
        group.identity(),
        "sign mask generator must square to the identity"
    );
    (0..group.order())
        .map(|x| if x < group.mul(central, x) { 1.0 } else { -1.0 })
        .collect()
}

/// Conjugates a monomial operator by the diagonal sign mask `s`:
/// |h⟩ ↦ phase·|img⟩ becomes |h⟩ ↦ s(img)·s(h)·phase·|img⟩.
pub fn mask_conjugate(op: &MonomialOp, s: &[f64]) -> MonomialOp {
    MonomialOp::from_fn(s.len(), |h| {
        let (img, phase) = op.image(h);
        (img, phase * s[img] * s[h])
    })
}

// ---------------------------------------------------------------------------
// Chain simulator

/// A quantum chain plus a stable atom roster. Every structural
/// operation (swap, insert, collapse) updates both in lockstep, so
/// blocks can reference atoms by id while the state works by position.
#[derive(Debug, Clone)]
pub struct ChainSim {
    pub state: ChainState,
    pub atoms: Vec<Atom>,
    /// Total adjacent transpositions executed.
    pub atom_swaps: usize,
    next_id: usize,
    next_pair: usize,
}

impl ChainSim {
    /// Chain of maximally entangled pairs: site i owns atoms
    /// (Left(i), Right(i)) at positions (2i, 2i+1); the pair on bond i
    /// links Right(i) with Left(i+1 mod N).
    pub fn short_range(
        group: &GroupTable,
        n_sites: usize,
        backend: Backend,
    ) -> Result<Self, ProtocolError> {
        let state = ChainState::bell_pair_chain(group.order(), n_sites, backend)?;
        let mut atoms = Vec::with_capacity(2 * n_sites);
        for s in 0..n_sites {
            atoms.push(Atom {
                id: 2 * s,
                role: AtomRole::Left(s),
            });
            atoms.push(Atom {
                id: 2 * s + 1,
                role: AtomRole::Right(s),
            });
        }
        Ok(Self {
            state,
            next_id: atoms.len(),
            atoms,
            atom_swaps: 0,
            next_pair: 0,
        })
    }

    /// Open chain of per-site fiducial factors in the relocated atom order:
    /// Carrier(0) sits at position 0, and bond i (for i in 0..N-1) holds
    /// (AuxRight(i), AuxLeft(i+1), Carrier(i+1)) at positions
    /// (3i+1, 3i+2, 3i+3). End sites own two atoms, interior sites three.
    pub fn long_range(
        group: &GroupTable,
        n_sites: usize,
        backend: Backend,
    ) -> Result<Self, ProtocolError> {
        let state = ChainState::ghz_fiducial_open(group.order(), n_sites, backend)?;
        let mut atoms = Vec::with_capacity(3 * n_sites - 2);
        atoms.push(Atom {
            id: 0,
            role: AtomRole::Carrier(0),
        });
        for i in 0..n_sites - 1 {
            atoms.push(Atom {
                id: 3 * i + 1,
                role: AtomRole::AuxRight(i),
            });
            atoms.push(Atom {
                id: 3 * i + 2,
                role: AtomRole::AuxLeft(i + 1),
            });
            atoms.push(Atom {
                id: 3 * i + 3,
                role: AtomRole::Carrier(i + 1),
            });
        }
        Ok(Self {
            state,
            next_id: atoms.len(),
            atoms,
            atom_swaps: 0,
            next_pair: 0,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn position_of(&self, id: usize) -> Result<usize, ProtocolError> {
        self.atoms
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| ProtocolError::Internal(format!("atom {} not in the chain", id)))
    }

    pub fn atom(&self, id: usize) -> Result<&Atom, ProtocolError> {
        let pos = self.position_of(id)?;
        Ok(&self.atoms[pos])
    }

    /// Swaps the atoms at positions `pos` and `pos + 1`.
    pub fn swap_adjacent(&mut self, pos: usize) {
        self.state.swap_adjacent(pos);
        self.atoms.swap(pos, pos + 1);
        self.atom_swaps += 1;
    }

    /// Bubbles the atom at `from` to position `to` by adjacent swaps.
    pub fn move_atom(&mut self, from: usize, to: usize) {
        let mut p = from;
        while p < to {
            self.swap_adjacent(p);
            p += 1;
        }
        while p > to {
            self.swap_adjacent(p - 1);
            p -= 1;
        }
    }

    /// Inserts a maximally entangled fresh pair before `pos`; returns
    /// the two new atom ids (left half first).
    pub fn insert_fresh_pair(&mut self, pos: usize, dim: usize) -> Result<(usize, usize), ProtocolError> {
        self.state.insert_bell_pair(pos, dim)?;
        let pair = self.next_pair;
        self.next_pair += 1;
        let id0 = self.next_id;
        let id1 = self.next_id + 1;
        self.next_id += 2;
        self.atoms.insert(
            pos,
            Atom {
                id: id1,
                role: AtomRole::Fresh(pair, 1),
            },
        );
        self.atoms.insert(
            pos,
            Atom {
                id: id0,
                role: AtomRole::Fresh(pair, 0),
            },
        );
        Ok((id0, id1))
    }

    /// Contracts `bra` against the `bra.n_atoms()` atoms starting at
    /// `start`, removing them. Returns the outcome probability.
    pub fn collapse(&mut self, start: usize, bra: &LabelChainVector) -> Result<f64, ProtocolError> {
        let prob = self.state.collapse_block(start, bra)?;
        self.atoms.drain(start..start + bra.n_atoms());
        Ok(prob)
    }

    /// Applies one monomial to the atom with the given id.
    pub fn apply_to_atom(&mut self, id: usize, op: &MonomialOp) -> Result<(), ProtocolError> {
        let pos = self.position_of(id)?;
        self.state.apply_monomial(pos, op);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Blocks

/// Lifecycle of a block in the fusion driver. The chain driver only
/// ever uses `Active`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockStatus {
    /// Participates in the current measurement round.
    Active,
    /// Parked with a known non-identity class at the given level.
    Frozen(LevelClass),
    /// Supported on the abelian sector; waits for the closing round.
    Ready,
    /// A single unmeasured open-end atom, not yet owned by any block.
    Loose,
}

/// A contiguous run of atoms: measured auxiliaries first, then the
/// untouched output registers. Atoms are referenced by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub aux: Vec<usize>,
    pub phys: Vec<usize>,
    /// Number of original sites merged into this block.
    pub sites: usize,
    pub status: BlockStatus,
}

impl Block {
    pub fn len(&self) -> usize {
        self.aux.len() + self.phys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aux.is_empty() && self.phys.is_empty()
    }

    /// Start position of the block, verifying the [aux.. phys..] layout
    /// is contiguous in the chain.
    pub fn span(&self, sim: &ChainSim) -> Result<(usize, usize), ProtocolError> {
        let ids: Vec<usize> = self.aux.iter().chain(self.phys.iter()).copied().collect();
        let start = sim.position_of(ids[0])?;
        for (off, &id) in ids.iter().enumerate() {
            let pos = sim.position_of(id)?;
            if pos != start + off {
                return Err(ProtocolError::Internal(format!(
                    "block atom {} at position {}, expected {}",
                    id,
                    pos,
                    start + off
                )));
            }
        }
        Ok((start, ids.len()))
    }
}

/// Swaps two physically adjacent blocks by rotating their atom ranges.
pub fn swap_blocks(sim: &mut ChainSim, left: &Block, right: &Block) -> Result<(), ProtocolError> {
    let (ls, ll) = left.span(sim)?;
    let (rs, rl) = right.span(sim)?;
    if rs != ls + ll {
        return Err(ProtocolError::Internal(format!(
            "blocks not adjacent: {}+{} vs {}",
            ls, ll, rs
        )));
    }
    for k in 0..rl {
        sim.move_atom(rs + k, ls + k);
    }
    Ok(())
}

/// Merges two physically adjacent blocks into `[aux_l aux_r | phys_l
/// phys_r]` by bubbling the right block's auxiliaries left past the
/// left block's output registers.
pub fn merge_adjacent(
    sim: &mut ChainSim,
    left: Block,
    right: Block,
) -> Result<Block, ProtocolError> {
    let (ls, ll) = left.span(sim)?;
    let (rs, _) = right.span(sim)?;
    if rs != ls + ll {
        return Err(ProtocolError::Internal("merge of non-adjacent blocks".into()));
    }
    let boundary = ls + left.aux.len();
    for (k, &id) in right.aux.iter().enumerate() {
        let from = sim.position_of(id)?;
        sim.move_atom(from, boundary + k);
    }
    let mut aux = left.aux;
    aux.extend_from_slice(&right.aux);
    let mut phys = left.phys;
    phys.extend_from_slice(&right.phys);
    let merged = Block {
        aux,
        phys,
        sites: left.sites + right.sites,
        status: BlockStatus::Active,
    };
    merged.span(sim)?;
    Ok(merged)
}

/// Moves the members of `blocks` listed in `members` (ascending) next
/// to each other, preserving their relative order, by repeatedly
/// swapping non-member blocks out of the gaps. Returns the number of
/// block-granularity swap steps used.
pub fn gather_blocks(
    sim: &mut ChainSim,
    blocks: &mut Vec<Block>,
    members: &[usize],
) -> Result<(usize, Vec<usize>), ProtocolError> {
    let mut idx: Vec<usize> = members.to_vec();
    let mut steps = 0usize;
    for w in 1..idx.len() {
        // Bubble member w left until it sits right after member w-1.
        while idx[w] > idx[w - 1] + 1 {
            let at = idx[w];
            let left = blocks[at - 1].clone();
            let right = blocks[at].clone();
            swap_blocks(sim, &left, &right)?;
            blocks.swap(at - 1, at);
            steps += 1;
            for v in idx.iter_mut() {
                if *v == at - 1 {
                    *v = at;
                } else if *v == at {
                    *v = at - 1;
                }
            }
        }
    }
    Ok((steps, idx))
}

/// Reorders the adjacent run of blocks `run` (indices into `blocks`,
/// consecutive) by `perm` in one-line notation, using the odd-even
/// schedule. Returns the schedule depth.
pub fn permute_block_run(
    sim: &mut ChainSim,
    blocks: &mut [Block],
    run_start: usize,
    perm: &[usize],
) -> Result<usize, ProtocolError> {
    let rounds = odd_even_schedule(perm)?;
    for round in &rounds {
        for &p in round {
            let left = blocks[run_start + p].clone();
            let right = blocks[run_start + p + 1].clone();
            swap_blocks(sim, &left, &right)?;
            blocks.swap(run_start + p, run_start + p + 1);
        }
    }
    Ok(rounds.len())
}

// ---------------------------------------------------------------------------
// Block measurements

/// A family of class projectors to measure together on one block, each
/// tagged with the level its outcome lives on.
#[derive(Debug, Clone)]
pub struct MeasureFamily {
    pub labels: Vec<LevelClass>,
    pub recipes: Vec<crate::meas::ClassRecipe>,
}

impl MeasureFamily {
    /// All classes of one level, in class order.
    pub fn level_classes(sd: &StructureData, level: usize) -> Self {
        let icg = sd.class_group(level);
        let mut labels = Vec::new();
        let mut recipes = Vec::new();
        for class in 0..icg.num_classes() {
            labels.push(LevelClass { level, class });
            recipes.push(crate::meas::ClassRecipe::from_scalar_phases(icg, class));
        }
        Self { labels, recipes }
    }
}

/// Per-atom symmetry action used inside recipes: the twisted halves of
/// a chain site pick up the cocycle, everything else is the plain
/// left-regular action.
pub fn recipe_atom_op(
    group: &GroupTable,
    cocycle: Option<&Cocycle>,
    role: AtomRole,
    g: usize,
) -> MonomialOp {
    match (role, cocycle) {
        (AtomRole::Left(_), Some(c)) => MonomialOp::projective_conj(group, c, g),
        (AtomRole::Right(_), Some(c)) => MonomialOp::projective(group, c, g),
        _ => MonomialOp::regular(group, g),
    }
}

/// Outcome of measuring a family on a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub label: LevelClass,
    pub probability: f64,
    /// 1 minus the family's summed probability on this block.
    pub completion_defect: f64,
}

/// Measures a projector family on the contiguous atoms `[start,
/// start+len)`: computes all outcome probabilities from one moment
/// batch over the union of recipe elements, samples, applies the chosen
/// recipe, and renormalizes. When `first_mask` is given, every recipe
/// is conjugated by that diagonal sign mask on the first atom, which
/// turns the family into its opposite-parity counterpart.
pub fn measure_block_family(
    sim: &mut ChainSim,
    rng: &mut impl Rng,
    start: usize,
    len: usize,
    family: &MeasureFamily,
    group: &GroupTable,
    cocycle: Option<&Cocycle>,
    first_mask: Option<&[f64]>,
) -> Result<FamilyOutcome, ProtocolError> {
    let roles: Vec<AtomRole> = sim.atoms[start..start + len].iter().map(|a| a.role).collect();
    let atom_op = |pos: usize, g: usize| -> MonomialOp {
        let op = recipe_atom_op(group, cocycle, roles[pos], g);
        match (pos, first_mask) {
            (0, Some(s)) => mask_conjugate(&op, s),
            _ => op,
        }
    };
    let mut elements: Vec<usize> = family
        .recipes
        .iter()
        .flat_map(|r| r.terms.iter().map(|&(g, _)| g))
        .collect();
    elements.sort_unstable();
    elements.dedup();
    let op_sets: Vec<Vec<MonomialOp>> = elements
        .iter()
        .map(|&g| (0..roles.len()).map(|pos| atom_op(pos, g)).collect())
        .collect();
    let moments = sim.state.moment_batch(start, &op_sets);
    let moment_of = |g: usize| -> C64 {
        let k = elements.binary_search(&g).expect("recipe element listed");
        moments[k]
    };
    let mut probs = Vec::with_capacity(family.recipes.len());
    for recipe in &family.recipes {
        let p: C64 = recipe
            .terms
            .iter()
            .map(|&(g, coeff)| coeff * moment_of(g))
            .sum();
        if p.im.abs() > MEAS_TOL {
            return Err(ProtocolError::Internal(format!(
                "projector expectation has imaginary part {:.3e}",
                p.im
            )));
        }
        probs.push(p.re);
    }
    let total: f64 = probs.iter().sum();
    let completion_defect = 1.0 - total;
    if completion_defect.abs() > MEAS_TOL {
        return Err(ProtocolError::Internal(format!(
            "measurement family incomplete on its block: defect {:.3e}",
            completion_defect
        )));
    }
    let choice = crate::state::sample_outcome(&probs, rng)?;
    let recipe = &family.recipes[choice];
    let terms: Vec<(C64, Vec<MonomialOp>)> = recipe
        .terms
        .iter()
        .map(|&(g, coeff)| {
            (
                coeff,
                (0..roles.len()).map(|pos| atom_op(pos, g)).collect(),
            )
        })
        .collect();
    sim.state.apply_recipe(start, &terms);
    let norm2 = sim.state.norm_sqr();
    if (norm2 - probs[choice]).abs() > MEAS_TOL.max(1e-9 * probs[choice]) {
        return Err(ProtocolError::Internal(format!(
            "post-measurement norm {} disagrees with Born probability {}",
            norm2, probs[choice]
        )));
    }
    sim.state.normalize();
    Ok(FamilyOutcome {
        label: family.labels[choice],
        probability: probs[choice],
        completion_defect,
    })
}

// ---------------------------------------------------------------------------
// Rank-one closing measurements

/// Result of resolving a block down to a single abelian basis vector:
/// the 1D irrep, the per-atom translation labels (first entry always
/// the identity), and the probability of each projective step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbelianOutcome {
    pub alpha: usize,
    pub shifts: Vec<usize>,
    pub step_probs: Vec<f64>,
}

/// Measures relative labels between consecutive atoms of the run
/// `[start, start+len)` and then the level-1 class family on the whole
/// run, pinning it to one twisted abelian basis vector. A `first_mask`
/// switches the closing family to the opposite-parity sector.
pub fn measure_abelian_labels(
    sim: &mut ChainSim,
    rng: &mut impl Rng,
    start: usize,
    len: usize,
    sd: &StructureData,
    cocycle: Option<&Cocycle>,
    first_mask: Option<&[f64]>,
) -> Result<AbelianOutcome, ProtocolError> {
    if len == 0 {
        return Err(ProtocolError::Internal(
            "irrep measurement needs a nonempty run".into(),
        ));
    }
    let group = &sd.group;
    let n = group.order();
    let mut shifts = vec![group.identity()];
    let mut step_probs = Vec::new();
    for t in 1..len {
        let dist = sim.state.pair_diagonal_distribution(start + t - 1);
        let mut rel = vec![0.0f64; n];
        for a in 0..n {
            for (rho, item) in rel.iter_mut().enumerate() {
                *item += dist[[a, group.mul(a, rho)]];
            }
        }
        let rho = crate::state::sample_outcome(&rel, rng)?;
        let keep = move |a: usize, b: usize| b == group.mul(a, rho);
        let p = sim.state.project_pair_diagonal(start + t - 1, &keep);
        step_probs.push(p);
        let u = group.mul(shifts[t - 1], rho);
        shifts.push(u);
    }
    let family = MeasureFamily::level_classes(sd, 1);
    let out = measure_block_family(sim, rng, start, len, &family, group, cocycle, first_mask)?;
    let class_members = &sd.class_group(1).classes[out.label.class];
    if class_members.len() != 1 {
        return Err(ProtocolError::Internal(
            "level-1 classes must be single irreps".into(),
        ));
    }
    step_probs.push(out.probability);
    Ok(AbelianOutcome {
        alpha: class_members[0],
        shifts,
        step_probs,
    })
}

/// The twisted abelian basis vector v_{α,u} on `twists.len()` atoms:
/// the translations T_{u_t} (in each atom's twist convention) applied
/// to the character-weighted uniform superposition, optionally with a
/// diagonal sign mask on the first atom. `shifts[0]` must be the
/// identity.
pub fn abelian_block_vector(
    group: &GroupTable,
    ct: &CharacterTable,
    cocycle: Option<&Cocycle>,
    alpha: usize,
    shifts: &[usize],
    twists: &[Twist],
    first_mask: Option<&[f64]>,
) -> Result<LabelChainVector, ProtocolError> {
    if shifts.len() != twists.len() || shifts.is_empty() {
        return Err(ProtocolError::Internal(
            "shift and twist lists must match per atom".into(),
        ));
    }
    if shifts[0] != group.identity() {
        return Err(ProtocolError::Internal(
            "first translation label must be the identity".into(),
        ));
    }
    let n = group.order();
    let norm = 1.0 / (n as f64).sqrt();
    let mut coeff = Vec::with_capacity(n);
    for x in 0..n {
        let mut c = ct.value_at(alpha, group.inv(x)) * norm;
        if let Some(s) = first_mask {
            c *= s[x];
        }
        for (t, &u) in shifts.iter().enumerate() {
            c *= match (twists[t], cocycle) {
                (Twist::Plain, _) | (_, None) => C64::new(1.0, 0.0),
                (Twist::Gamma, Some(cc)) => cc.value(x, u),
                (Twist::GammaConj, Some(cc)) => cc.value(x, u).conj(),
            };
        }
        coeff.push(c);
    }
    let maps: Vec<Vec<usize>> = shifts
        .iter()
        .map(|&u| (0..n).map(|x| group.mul(x, u)).collect())
        .collect();
    Ok(LabelChainVector::new(coeff, maps))
}

/// Applies every tracked correction to the live chain.
pub fn apply_final_corrections(
    sim: &mut ChainSim,
    frame: &ByproductFrame,
    sd: &StructureData,
    cocycle: Option<&Cocycle>,
) -> Result<(), ProtocolError> {
    for (atom, op) in &frame.ops {
        let m = frame_monomial(op, &sd.group, &sd.ct, cocycle);
        sim.apply_to_atom(*atom, &m)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Trace types

/// Everything recorded about one class-measurement round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub level: usize,
    pub threshold: usize,
    pub outcomes: OutcomeString,
    /// (start, len) parts of the greedy partition, in entry indices.
    pub parts: Vec<(usize, usize)>,
    /// Entry indices left unmatched (fusion driver only).
    pub tail: Vec<usize>,
    /// One compaction permutation per part, one-line notation.
    pub permutations: Vec<Vec<usize>>,
    /// Block-granularity parallel swap depth used this round.
    pub swap_depth: usize,
    /// Largest measured block, in original sites.
    pub max_block_sites: usize,
    /// Worst measurement-family completion defect seen this round.
    pub completion_defect: f64,
}

/// One appended-pair event of the fusion driver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppendRecord {
    pub index: usize,
    /// Outcome of the mixed-level measurement on the appended block.
    pub outcome: LevelClass,
    pub probability: f64,
    /// Remainder after folding the outcome in.
    pub remainder: RemainderTuple,
}

/// Closing-round record for one block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalBlockRecord {
    pub atoms: Vec<usize>,
    pub alpha: usize,
    pub shifts: Vec<usize>,
    /// Probability of the rank-one collapse against the measured basis
    /// vector (consistency; ≈ 1).
    pub collapse_probability: f64,
    /// True when the block was drained through the opposite-parity
    /// sector (sign-masked family and basis vector).
    pub masked: bool,
}

/// Full record of one protocol execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub group: String,
    pub n_sites: usize,
    pub seed: u64,
    pub backend: String,
    pub thresholds: Vec<usize>,
    pub append_cap: Option<usize>,
    pub rounds: Vec<RoundRecord>,
    pub appends: Vec<AppendRecord>,
    pub remainder_history: Vec<RemainderTuple>,
    pub final_blocks: Vec<FinalBlockRecord>,
    pub frame: ByproductFrame,
    pub success: bool,
    pub failure: Option<String>,
    /// Fidelity with the canonical target after corrections, when the
    /// run succeeded.
    pub fidelity: Option<f64>,
    pub cumulative_depth: usize,
    pub appended_pairs: usize,
    /// Auxiliary atoms consumed per output site.
    pub aux_per_site: f64,
    pub max_bond: usize,
    /// Redundant relation-graph edges that disagreed with the spanning
    /// tree; gauge-variant duplicates, kept as a diagnostic.
    pub frame_mismatches: usize,
}

impl ProtocolTrace {
    pub fn new(cfg: &ProtocolConfig) -> Self {
        Self {
            group: cfg.group.id().to_string(),
            n_sites: cfg.n_sites,
            seed: cfg.seed,
            backend: match cfg.backend {
                Backend::Dense => "dense".into(),
                Backend::Structured => "structured".into(),
            },
            thresholds: Vec::new(),
            append_cap: None,
            rounds: Vec::new(),
            appends: Vec::new(),
            remainder_history: Vec::new(),
            final_blocks: Vec::new(),
            frame: ByproductFrame::default(),
            success: false,
            failure: None,
            fidelity: None,
            cumulative_depth: 0,
            appended_pairs: 0,
            aux_per_site: 0.0,
            max_bond: 0,
            frame_mismatches: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meas::abelian_basis;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn d8_structure() -> StructureData {
        StructureData::compute(GroupTable::dihedral(8)).unwrap()
    }

    #[test]
    fn round_plans_follow_the_log_rule() {
        let sd = d8_structure();
        let cfg = ProtocolConfig::new(sd.group.clone(), 3);
        let plans = round_plans(&sd, 3, &cfg).unwrap();
        assert_eq!(plans.len(), 1);
        let p = &plans[0];
        assert_eq!(p.level, 2);
        assert_abs_diff_eq!(p.q, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.c, 2.0 / 2f64.ln(), epsilon = 1e-12);
        assert_eq!(p.l, 4);
        let cfg1 = ProtocolConfig::new(sd.group.clone(), 1);
        assert_eq!(round_plans(&sd, 1, &cfg1).unwrap()[0].l, 1);
    }

    #[test]
    fn append_cap_matches_the_family_size() {
        let sd = d8_structure();
        let cfg = ProtocolConfig::new(sd.group.clone(), 2);
        assert_eq!(part2_family_size(&sd), 2);
        let cap = append_cap_plan(&sd, 2, &cfg).unwrap().unwrap();
        assert_abs_diff_eq!(cap.q, 0.5, epsilon = 1e-12);
        assert_eq!(cap.l, 2);
    }

    #[test]
    fn chain_sim_roster_tracks_swaps_and_moves() {
        let g = GroupTable::cyclic(2);
        let mut sim = ChainSim::short_range(&g, 3, Backend::Dense).unwrap();
        assert_eq!(sim.n_atoms(), 6);
        let before = sim.state.to_dense().unwrap();
        sim.move_atom(0, 3);
        sim.move_atom(3, 0);
        let after = sim.state.to_dense().unwrap();
        for (a, b) in before.iter().zip(after.iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
        assert_eq!(sim.atoms[0].role, AtomRole::Left(0));
        assert_eq!(sim.atom_swaps, 6);
    }

    #[test]
    fn fresh_pairs_get_unique_ids_and_roles() {
        let g = GroupTable::cyclic(3);
        let mut sim = ChainSim::long_range(&g, 2, Backend::Dense).unwrap();
        let n0 = sim.n_atoms();
        let (a, b) = sim.insert_fresh_pair(n0 - 1, 3).unwrap();
        assert_eq!(sim.n_atoms(), n0 + 1 + 1);
        assert_eq!(sim.atom(a).unwrap().role, AtomRole::Fresh(0, 0));
        assert_eq!(sim.atom(b).unwrap().role, AtomRole::Fresh(0, 1));
        assert_eq!(sim.position_of(a).unwrap() + 1, sim.position_of(b).unwrap());
        let (c, _) = sim.insert_fresh_pair(2, 3).unwrap();
        assert_eq!(sim.atom(c).unwrap().role, AtomRole::Fresh(1, 0));
    }

    #[test]
    fn merge_adjacent_moves_aux_past_phys() {
        let g = GroupTable::cyclic(2);
        let mut sim = ChainSim::long_range(&g, 3, Backend::Dense).unwrap();
        // Unit blocks: [3i+1, 3i+2 | 3i+3] after the anchor carrier.
        let left = Block {
            aux: vec![1, 2],
            phys: vec![3],
            sites: 1,
            status: BlockStatus::Active,
        };
        let right = Block {
            aux: vec![4, 5],
            phys: vec![6],
            sites: 1,
            status: BlockStatus::Active,
        };
        let merged = merge_adjacent(&mut sim, left, right).unwrap();
        assert_eq!(merged.aux, vec![1, 2, 4, 5]);
        assert_eq!(merged.phys, vec![3, 6]);
        assert_eq!(merged.sites, 2);
        let order: Vec<usize> = sim.atoms.iter().map(|a| a.id).collect();
        assert_eq!(order, vec![0, 1, 2, 4, 5, 3, 6]);
    }

    #[test]
    fn gather_pulls_members_together_across_a_gap() {
        let g = GroupTable::cyclic(2);
        let mut sim = ChainSim::long_range(&g, 4, Backend::Dense).unwrap();
        let mut blocks: Vec<Block> = (0..3)
            .map(|i| Block {
                aux: vec![3 * i + 1, 3 * i + 2],
                phys: vec![3 * i + 3],
                sites: 1,
                status: BlockStatus::Active,
            })
            .collect();
        let (steps, idx) = gather_blocks(&mut sim, &mut blocks, &[0, 2]).unwrap();
        assert_eq!(steps, 1);
        assert_eq!(idx, vec![0, 1]);
        assert_eq!(blocks[1].aux, vec![7, 8]);
        blocks[0].span(&sim).unwrap();
        blocks[1].span(&sim).unwrap();
        blocks[2].span(&sim).unwrap();
    }

    #[test]
    fn plain_block_vectors_match_the_dense_abelian_basis() {
        let sd = d8_structure();
        let g = &sd.group;
        let basis = abelian_basis(g, &sd.ct, 2).unwrap();
        for (label, dense) in &basis {
            let shifts = {
                let mut s = vec![g.identity()];
                s.extend_from_slice(&label.shifts);
                s
            };
            let v = abelian_block_vector(
                g,
                &sd.ct,
                None,
                label.alpha,
                &shifts,
                &[Twist::Plain, Twist::Plain],
                None,
            )
            .unwrap();
            // Expand the label-chain form and compare amplitudes.
            let n = g.order();
            let mut expanded = vec![C64::new(0.0, 0.0); n * n];
            for x in 0..n {
                let idx = v.maps[0][x] * n + v.maps[1][x];
                expanded[idx] += v.coeff[x];
            }
            for (i, amp) in expanded.iter().enumerate() {
                assert_abs_diff_eq!((amp - dense[i]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn level_family_on_a_fresh_site_is_uniform() {
        let sd = d8_structure();
        let cocycle = Cocycle::dihedral_nontrivial(&sd.group).unwrap();
        let mut sim = ChainSim::short_range(&sd.group, 2, Backend::Dense).unwrap();
        let family = MeasureFamily::level_classes(&sd, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let out = measure_block_family(
            &mut sim,
            &mut rng,
            0,
            2,
            &family,
            &sd.group,
            Some(&cocycle),
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(out.probability, 0.5, epsilon = 1e-9);
        assert!(out.completion_defect.abs() < 1e-12);
        assert_abs_diff_eq!(sim.state.norm_sqr(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn frame_ops_round_trip_through_monomials() {
        let sd = d8_structure();
        let alpha = sd.hierarchy.level(1)[1];
        let phase = FrameOp::Phase {
            alpha,
            adjoint: true,
        };
        let m = frame_monomial(&phase, &sd.group, &sd.ct, None);
        let plain = clock_op(&sd.group, &sd.ct, alpha);
        let composed = m.compose(&plain);
        let id = MonomialOp::identity(sd.group.order());
        for h in 0..sd.group.order() {
            let (p, c) = composed.image(h);
            let (pi, ci) = id.image(h);
            assert_eq!(p, pi);
            assert_abs_diff_eq!((c - ci).norm(), 0.0, epsilon = 1e-12);
        }
        let t = FrameOp::Translate {
            element: 3,
            twist: Twist::Plain,
            adjoint: false,
        };
        let tm = frame_monomial(&t, &sd.group, &sd.ct, None);
        assert_eq!(tm.image(0).0, sd.group.mul(0, 3));
    }
}
