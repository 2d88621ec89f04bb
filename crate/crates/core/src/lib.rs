//! Data-driven fair Büchi game abstractions with incremental progress-measure solving.
//!
//! Samples of an unknown system are turned into Lipschitz reach bounds
//! ([`learning`]), cell-level approximation sets and a fair Büchi game
//! ([`abstraction`]), solved once by fixpoint evaluation ([`fixpoint`]) and
//! then kept current by warm-started lifting ([`pm`], [`session`]).

pub mod abstraction;
pub mod bench;
pub mod fixpoint;
pub mod fixtures;
pub mod game;
pub mod grid;
pub mod learning;
pub mod oracle;
pub mod pm;
pub mod session;
pub mod set;
pub mod sim;

pub use abstraction::{
    apply_delta, build_abstract_game, diff_approx, AbstractGame, AbstractionError, ApproxTable, GraphDelta,
    PairSets,
};
pub use fixpoint::{solve_big_psi, solve_psi, synth_controller, FixpointError, Policy};
pub use game::{Flavor, GameError, GameGraph, Owner, Spec, SpecKind, VertexId};
pub use grid::{CellId, GridPartition};
pub use learning::{Dataset, DomainPolicy, HyperBox, InputId, LearnerConfig, NoiseSupport, ReachLearner, Sample};
pub use pm::{PmFlavor, ProgressMeasure, Rank};
pub use session::{SessionError, SessionOptions, StepReport, SynthesisSession};
pub use set::VertexSet;
