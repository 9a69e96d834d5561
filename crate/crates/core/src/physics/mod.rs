//! Two-phase incompressible flow operators and reference problems.

mod exact;
mod manufactured;
mod residual;

pub use exact::{ExactModel, ExactSolution};
pub use manufactured::{manufacture_data, Manufactured};
pub use residual::{
    divergence_residual, interface_residuals, momentum_residual, stress_apply, Algebra, FlowSlots,
    PhaseParams, Plain,
};
