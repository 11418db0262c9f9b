//! Operator kernels on ℤ²: periodic, periodic up to an odd offset weight, and
//! windowed, with compositions, commutators and norm bounds.

pub mod block;
mod bounds;
mod local;
mod offset;
mod periodic;
mod window;

pub use bounds::{tail_bound, HolmgrenNorm};
pub use local::{Expr, LocalOperator};
pub use offset::{commutator_position_spin, OffsetFunction, OffsetPeriodicKernel};
pub use periodic::{
    commutator_internal, commutator_position, compose_chain, compose_periodic, KernelShapeError,
    PeriodicKernel,
};
pub use window::{commutator_switch, CellRect, WindowKernel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Shape(#[from] KernelShapeError),
    #[error("window too small: omitted mass {omitted:.3e} exceeds tolerance {tolerance:.3e}")]
    WindowTooSmall { omitted: f64, tolerance: f64 },
    #[error("offset weight is not odd along its declared axis (defect {defect:.3e})")]
    OddnessViolated { defect: f64 },
    #[error("left composition needs a linear offset weight")]
    NonLinearOffset,
    #[error("offset kernels with different weights cannot be combined")]
    IncompatibleOffsets,
    #[error("expression too complex for local evaluation: {reason}")]
    ExpressionTooComplex { reason: String },
}
