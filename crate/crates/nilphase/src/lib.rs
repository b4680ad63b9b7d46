//! Representation-theoretic machinery for finite nilpotent groups and exact
//! simulation of the measurement-and-feedforward protocols built on it.
//!
//! The crate is organized in layers:
//!
//! * [`group`]: finite group tables, lower central series, quotients.
//! * [`repr`]: character tables, the irrep hierarchy attached to the lower
//!   central series, fusion classes and their abelian group structure.
//! * [`meas`]: cocycles, (projective) regular representations, class
//!   projectors and the rank-one measurement bases they refine to.
//! * [`state`]: dense and matrix-product backends for chains of group-valued
//!   atoms, with exact (rank-revealing) compression.
//! * [`protocol`]: the measurement rounds that disentangle a symmetry
//!   protected chain and that grow/stabilize a GHZ state, plus closed-form
//!   samplers for their outcome statistics.
//! * [`experiment`]: batch drivers, Monte Carlo scans, and report emission.
//!
//! Runnable walkthroughs live in `examples/`; the `nilphase` binary exposes
//! the same functionality as a command line tool.

pub mod group;
pub mod linalg;
pub mod meas;
pub mod protocol;
pub mod repr;
pub mod state;

pub use group::{GroupError, GroupTable, LowerCentralSeries, QuotientGroup, Subgroup};
pub use meas::{AtomKind, ClassProjector, ClassRecipe, Cocycle, MeasError, UnitaryRep};
pub use protocol::{
    run_ghz_protocol, run_spt_protocol, ProtocolConfig, ProtocolError, ProtocolTrace,
};
pub use repr::{CharacterTable, ClassGroup, FusionTable, Hierarchy, ReprError, StructureData};
pub use state::{Backend, ChainState, LabelChainVector, MeasurementRecord, StateError};
