//! Discrimination and distortion constraints, linear in the transform kernel.

mod discrimination;
mod distortion;
mod linear;

pub use discrimination::{
    build_discrimination_constraints, ratio_distance, segment_map, DiscriminationMode,
    DiscriminationSpec, Epsilon, EpsilonEntry, DEFAULT_MIN_SEGMENT_COUNT,
};
pub use distortion::{
    build_distortion_constraints, AttributePenalty, AttributeRule, Combiner, CompiledMetric, Condition,
    DistortionBudget, DistortionMetric, Level, Rule, FORBIDDEN,
};
pub use linear::{kernel_var, ConstraintLabel, LinearConstraint, LinearConstraintSet};
