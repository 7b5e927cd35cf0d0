//! Deterministic hidden-variable region models.
//!
//! A station's model assigns an [`OutcomeCell`](crate::bell::OutcomeCell) to
//! every point of the chart `[0, 2pi) x [0, 1)`. The horizontal coordinate is
//! the hidden angle shifted by the local setting (`theta - phi` on the left,
//! `theta + psi` on the right); the vertical coordinate is the auxiliary
//! variable `r`. Regions are bounded by curves `c + A sin(x - delta)`.

mod curve;
mod joint;
mod model;
pub mod quadrature;
mod validate;

pub use curve::{Primitive, PrimitiveKind, SineCurve};
pub use joint::{
    find_sliver_pair, joint_table, joint_table_monte_carlo, joint_table_with, sliver_overlap_quadrature,
    sliver_rectangle_overlap, JointOptions, SliverPair,
};
pub use model::{HiddenVars, Layer, ModelPair, RegionModel, Side, MODEL_FORMAT_VERSION};
pub(crate) use validate::residual_with;
pub use validate::{chi_grid, residual, validate, validate_with, validation_grid, Residual, ValidationReport};
