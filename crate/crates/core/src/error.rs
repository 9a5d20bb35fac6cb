use thiserror::Error;

use crate::tree::Label;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("newick syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("duplicate leaf label {0}")]
    DuplicateLabel(Label),

    #[error("non-binary internal node at byte {pos} ({degree} children)")]
    NonBinary { pos: usize, degree: usize },

    #[error("top-level node has {0} children; expected 1, 2 or 3")]
    TopLevelDegree(usize),

    #[error("invalid tree structure: {0}")]
    Structure(String),

    #[error("{{{0}, {1}}} is not an edge of the tree")]
    NotAnEdge(usize, usize),

    #[error("need at least {need} leaves, got {got}")]
    TooFewLeaves { need: usize, got: usize },

    #[error("leaf {0} is not in the tree")]
    UnknownLabel(Label),

    #[error("leaf-sets overlap on label {0}")]
    Overlap(Label),

    #[error("trees disagree on {0}")]
    Disagreement(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("guard exceeded: {0} (set AGREETREE_GUARDS=off to lift)")]
    Guard(String),

    #[error("empty intersection in recursive call on nodes ({0}, {1})")]
    EmptyIntersection(usize, usize),

    #[error("balanced-or-path split failed its thresholds: {0}")]
    RamseyViolation(String),
}
