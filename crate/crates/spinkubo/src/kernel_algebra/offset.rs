//! Kernels that are periodic up to an offset-dependent correction:
//! `A_{m,n} = A⁰_{0,n-m} + g(m) B_{0,n-m}`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::periodic::{commutator_internal, commutator_position, compose_periodic, PeriodicKernel};
use super::KernelError;
use crate::lattice_model::{Axis, Offset, C64};

/// Weight `g(p)` multiplying the correction part in cell `p`.
#[derive(Clone)]
pub enum OffsetFunction {
    /// `g(p) = coeff · p_axis`.
    Linear { axis: Axis, coeff: f64 },
    /// Arbitrary weight; `odd_axis` is the axis along which it is claimed odd.
    Custom {
        odd_axis: Axis,
        f: Arc<dyn Fn(Offset) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for OffsetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffsetFunction::Linear { axis, coeff } => write!(f, "Linear({axis:?}, {coeff})"),
            OffsetFunction::Custom { odd_axis, .. } => write!(f, "Custom(odd in {odd_axis:?})"),
        }
    }
}

impl OffsetFunction {
    pub fn eval(&self, p: Offset) -> f64 {
        match self {
            OffsetFunction::Linear { axis, coeff } => coeff * p[axis.index()] as f64,
            OffsetFunction::Custom { f, .. } => f(p),
        }
    }

    pub fn odd_axis(&self) -> Axis {
        match self {
            OffsetFunction::Linear { axis, .. } => *axis,
            OffsetFunction::Custom { odd_axis, .. } => *odd_axis,
        }
    }

    /// Largest `|g(p) + g(p')|` with `p'` the reflection of `p` along the odd
    /// axis, over `‖p‖∞ ≤ radius`.
    pub fn oddness_defect(&self, radius: i64) -> f64 {
        let j = self.odd_axis().index();
        let mut worst: f64 = 0.0;
        for a in -radius..=radius {
            for b in -radius..=radius {
                let p = [a, b];
                let mut q = p;
                q[j] = -q[j];
                worst = worst.max((self.eval(p) + self.eval(q)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct OffsetPeriodicKernel {
    periodic: PeriodicKernel,
    correction: PeriodicKernel,
    weight: OffsetFunction,
}

impl OffsetPeriodicKernel {
    pub fn new(
        periodic: PeriodicKernel,
        correction: PeriodicKernel,
        weight: OffsetFunction,
    ) -> Self {
        assert_eq!(periodic.dim(), correction.dim(), "dimension mismatch");
        Self {
            periodic,
            correction,
            weight,
        }
    }

    pub fn periodic_part(&self) -> &PeriodicKernel {
        &self.periodic
    }

    pub fn correction_part(&self) -> &PeriodicKernel {
        &self.correction
    }

    pub fn weight(&self) -> &OffsetFunction {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.periodic.dim()
    }

    /// Block `A_{m,n}`.
    pub fn block(&self, m: Offset, n: Offset) -> DMatrix<C64> {
        let d = [n[0] - m[0], n[1] - m[1]];
        let g = self.weight.eval(m);
        let mut b = self.periodic.block_matrix(d);
        if g != 0.0 {
            b += self.correction.block_matrix(d) * C64::new(g, 0.0);
        }
        b
    }

    pub fn diagonal_trace(&self, m: Offset) -> C64 {
        self.periodic.trace_at_origin() + self.correction.trace_at_origin() * self.weight.eval(m)
    }

    pub fn error_bound(&self) -> f64 {
        self.periodic.error_bound() + self.correction.error_bound()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::new(
            self.periodic.scale(c),
            self.correction.scale(c),
            self.weight.clone(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self, KernelError> {
        self.same_weight(other)?;
        Ok(Self::new(
            self.periodic.sub(&other.periodic),
            self.correction.sub(&other.correction),
            self.weight.clone(),
        ))
    }

    fn same_weight(&self, other: &Self) -> Result<(), KernelError> {
        match (&self.weight, &other.weight) {
            (
                OffsetFunction::Linear { axis: a, coeff: c },
                OffsetFunction::Linear { axis: b, coeff: d },
            ) if a == b && c == d => Ok(()),
            _ => Err(KernelError::IncompatibleOffsets),
        }
    }

    /// `O·K`: the weight sits on the row index, so both parts compose directly.
    pub fn compose_right(&self, k: &PeriodicKernel, r_out: Option<usize>) -> Self {
        Self::new(
            compose_periodic(&self.periodic, k, r_out),
            compose_periodic(&self.correction, k, r_out),
            self.weight.clone(),
        )
    }

    /// `K·O`. With `g(p) = c·p_j` one has `g(p) = g(m) + c·(p-m)_j`, which moves
    /// a `c·[K,X_j]·B` term into the periodic part.
    pub fn compose_left(
        &self,
        k: &PeriodicKernel,
        r_out: Option<usize>,
    ) -> Result<Self, KernelError> {
        let OffsetFunction::Linear { axis, coeff } = self.weight else {
            return Err(KernelError::NonLinearOffset);
        };
        let mut periodic = compose_periodic(k, &self.periodic, r_out);
        if coeff != 0.0 && self.correction.max_abs() > 0.0 {
            let shift = compose_periodic(&commutator_position(k, axis), &self.correction, r_out);
            periodic = periodic.add(&shift.scale(C64::new(coeff, 0.0)));
        }
        Ok(Self::new(
            periodic,
            compose_periodic(k, &self.correction, r_out),
            self.weight.clone(),
        ))
    }

    /// Trace of the unit-cell block, valid when the weight is odd
    /// (the correction sums to zero over every centred square).
    pub fn tuv(&self) -> Result<C64, KernelError> {
        let defect = self.weight.oddness_defect(8);
        if defect > 1e-12 {
            return Err(KernelError::OddnessViolated { defect });
        }
        Ok(self.periodic.trace_at_origin())
    }
}

/// `[A, X_j S]` with `A` periodic and `S` internal:
/// periodic part `n_j A_{0,n} S`, correction `[A,S]`, weight `g(p) = +p_j`.
pub fn commutator_position_spin(
    a: &PeriodicKernel,
    axis: Axis,
    s: &DMatrix<C64>,
) -> OffsetPeriodicKernel {
    OffsetPeriodicKernel::new(
        commutator_position(a, axis).mul_internal_right(s),
        commutator_internal(a, s),
        OffsetFunction::Linear { axis, coeff: 1.0 },
    )
}
