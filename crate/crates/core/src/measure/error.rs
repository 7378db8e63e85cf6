use thiserror::Error;

use super::SubsetMask;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("a finite space needs at least one atom")]
    EmptySpace,
    #[error("duplicate atom label `{0}`")]
    DuplicateLabel(String),
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("operation needs at most {cap} atoms, space has {atoms}")]
    TooLarge { atoms: usize, cap: usize },
    #[error("capacity is not grounded: V(empty)={empty}, V(full)={full}")]
    NotGrounded { empty: f64, full: f64 },
    #[error("capacity is not monotone: V({subset:?})={lower} > V({superset:?})={upper}")]
    NotMonotone {
        subset: SubsetMask,
        superset: SubsetMask,
        lower: f64,
        upper: f64,
    },
    #[error("negative probability {value} at atom {atom}")]
    NegativeProbability { atom: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("credal set has no members")]
    EmptyCredalSet,
    #[error("capacity is not 2-alternating: witness ({0:?}, {1:?})")]
    NotTwoAlternating(SubsetMask, SubsetMask),
}
