//! Cantor constructions: covering intervals, gaps, generators and their checks.

mod alpha;
mod checks;
mod embed;
mod explicit;
mod interval;
mod middle;
mod node;
mod spec_file;

use thiserror::Error;

pub use alpha::{AlphaSeq, SeqSpec};
pub use checks::{
    check_nice, check_porous, check_regular, check_small_gaps, check_thick, expand, gap_separation,
    gap_separation_exact, NodeWitness, ShrinkProfile, Verdict,
};
pub use embed::{
    block_inequality, block_length, embed_porous, AvoidanceOracle, BlockCertificate, ClosedPiece, EmbedCertificate,
    FiniteSet,
};
pub use explicit::{Explicit, ExplicitNode};
pub use interval::{IntervalKind, IntervalR};
pub use middle::{middle_interval, middle_thirds, MiddleInterval};
pub use node::{
    Construction, Expansion, FoundGap, Generator, Location, Node, RawChild, RawExpansion, DEFAULT_CACHE_LEVELS,
};
pub use spec_file::{materialize, Built, ConstructionSpec};

use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("structural invariant violated at {node}: {reason}")]
    Structure { node: String, reason: String },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("embedding failed at {interval}: {reason}")]
    Embedding { interval: String, reason: String },
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
