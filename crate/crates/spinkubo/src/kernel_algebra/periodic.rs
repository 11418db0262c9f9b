//! Translation invariant kernels `A_{m,n} = A_{0,n-m}` with finite support.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::block;
use crate::lattice_model::{Axis, Offset, C64};

/// Periodic operator kernel stored on the box `‖n‖∞ ≤ radius`.
///
/// With `period = Some(M)` (odd `M`, `radius = (M-1)/2`) the stored offsets are
/// the minimal images of an `M×M` torus and products are cyclic convolutions.
/// Otherwise the kernel is an operator on ℤ² and products are exact linear
/// convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicKernel {
    dim: usize,
    radius: usize,
    period: Option<usize>,
    data: Vec<C64>,
    error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelShapeError {
    #[error("period {period} must be odd and equal 2·radius+1 (radius {radius})")]
    BadPeriod { period: usize, radius: usize },
    #[error("block at {offset:?} outside radius {radius}")]
    OutsideSupport { offset: Offset, radius: usize },
    #[error("block has {got} entries, expected {expected}")]
    BlockSize { got: usize, expected: usize },
}

impl PeriodicKernel {
    pub fn zeros(dim: usize, radius: usize) -> Self {
        let w = 2 * radius + 1;
        Self {
            dim,
            radius,
            period: None,
            data: vec![C64::new(0.0, 0.0); w * w * dim * dim],
            error_bound: 0.0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::internal(&DMatrix::identity(dim, dim))
    }

    /// On-site kernel carrying the internal matrix `s`.
    pub fn internal(s: &DMatrix<C64>) -> Self {
        let mut k = Self::zeros(s.nrows(), 0);
        k.data.copy_from_slice(&block::from_matrix(s));
        k
    }

    /// Kernel with a single nonzero block at `offset`.
    pub fn single(offset: Offset, b: &DMatrix<C64>) -> Self {
        let r = offset[0].unsigned_abs().max(offset[1].unsigned_abs()) as usize;
        let mut k = Self::zeros(b.nrows(), r);
        k.set_block(offset, &block::from_matrix(b));
        k
    }

    pub fn from_fn(
        dim: usize,
        radius: usize,
        mut f: impl FnMut(Offset) -> Option<DMatrix<C64>>,
    ) -> Self {
        let mut k = Self::zeros(dim, radius);
        for n in k.offsets().collect::<Vec<_>>() {
            if let Some(b) = f(n) {
                k.set_block(n, &block::from_matrix(&b));
            }
        }
        k
    }

    /// Marks the kernel as a complete `M×M` torus kernel.
    pub fn into_cyclic(mut self, period: usize) -> Result<Self, KernelShapeError> {
        if period.is_multiple_of(2) || period != 2 * self.radius + 1 {
            return Err(KernelShapeError::BadPeriod {
                period,
                radius: self.radius,
            });
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn with_error_bound(mut self, bound: f64) -> Self {
        self.error_bound = bound;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    /// Accumulated bound on `Σ_n ‖A_{0,n} - A^{exact}_{0,n}‖_F`.
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    fn width(&self) -> usize {
        2 * self.radius + 1
    }

    fn index(&self, n: Offset) -> Option<usize> {
        let r = self.radius as i64;
        if n[0].abs() > r || n[1].abs() > r {
            return None;
        }
        let w = self.width() as i64;
        Some((((n[0] + r) * w + (n[1] + r)) as usize) * self.dim * self.dim)
    }

    /// Offsets of the storage box in row-major order.
    pub fn offsets(&self) -> impl Iterator<Item = Offset> {
        let r = self.radius as i64;
        (-r..=r).flat_map(move |a| (-r..=r).map(move |b| [a, b]))
    }

    fn offset_of(&self, slot: usize) -> Offset {
        let w = self.width();
        let r = self.radius as i64;
        [(slot / w) as i64 - r, (slot % w) as i64 - r]
    }

    pub fn block(&self, n: Offset) -> Option<&[C64]> {
        let dd = self.dim * self.dim;
        self.index(n).map(|i| &self.data[i..i + dd])
    }

    pub fn block_matrix(&self, n: Offset) -> DMatrix<C64> {
        match self.block(n) {
            Some(b) => block::to_matrix(b, self.dim),
            None => DMatrix::zeros(self.dim, self.dim),
        }
    }

    pub fn set_block(&mut self, n: Offset, b: &[C64]) {
        let dd = self.dim * self.dim;
        let i = self
            .index(n)
            .unwrap_or_else(|| panic!("offset {n:?} outside radius {}", self.radius));
        self.data[i..i + dd].copy_from_slice(b);
    }

    pub fn try_set_block(&mut self, n: Offset, b: &[C64]) -> Result<(), KernelShapeError> {
        let dd = self.dim * self.dim;
        if b.len() != dd {
            return Err(KernelShapeError::BlockSize {
                got: b.len(),
                expected: dd,
            });
        }
        let i = self.index(n).ok_or(KernelShapeError::OutsideSupport {
            offset: n,
            radius: self.radius,
        })?;
        self.data[i..i + dd].copy_from_slice(b);
        Ok(())
    }

    /// Iterates `(offset, block)` over all stored, not identically zero blocks.
    pub fn nonzero_blocks(&self) -> impl Iterator<Item = (Offset, &[C64])> {
        let dd = self.dim * self.dim;
        self.data
            .chunks(dd)
            .enumerate()
            .filter(|(_, b)| !block::is_zero(b))
            .map(move |(slot, b)| (self.offset_of(slot), b))
    }

    pub fn trace_at_origin(&self) -> C64 {
        block::trace(
            self.block([0, 0]).expect("origin is always stored"),
            self.dim,
        )
    }

    /// Largest `‖n‖∞` carrying a nonzero block.
    pub fn effective_radius(&self) -> usize {
        self.nonzero_blocks()
            .map(|(n, _)| n[0].unsigned_abs().max(n[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Drops blocks outside `‖n‖∞ ≤ radius`, adding their mass to the error bound.
    pub fn truncated(&self, radius: usize) -> PeriodicKernel {
        if radius >= self.radius {
            return self.clone();
        }
        let mut out = PeriodicKernel::zeros(self.dim, radius);
        let mut dropped = 0.0;
        for (n, b) in self.nonzero_blocks() {
            if out.index(n).is_some() {
                out.set_block(n, b);
            } else {
                dropped += block::frobenius(b);
            }
        }
        out.error_bound = self.error_bound + dropped;
        out
    }

    /// Re-embeds into a larger storage box (no-op for cyclic kernels).
    pub fn padded(&self, radius: usize) -> PeriodicKernel {
        if radius <= self.radius || self.period.is_some() {
            return self.clone();
        }
        let mut out = PeriodicKernel::zeros(self.dim, radius);
        for (n, b) in self.nonzero_blocks() {
            out.set_block(n, b);
        }
        out.error_bound = self.error_bound;
        out
    }

    /// `(A†)_{0,n} = (A_{0,-n})†`.
    pub fn adjoint(&self) -> PeriodicKernel {
        let mut out = PeriodicKernel::zeros(self.dim, self.radius);
        out.period = self.period;
        out.error_bound = self.error_bound;
        for (n, b) in self.nonzero_blocks() {
            out.set_block([-n[0], -n[1]], &block::adjoint(b, self.dim));
        }
        out
    }

    pub fn scale(&self, c: C64) -> PeriodicKernel {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out.error_bound *= c.norm();
        out
    }

    fn combine(&self, other: &PeriodicKernel, sign: f64) -> PeriodicKernel {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let period = merged_period(self, other);
        let r = self.radius.max(other.radius);
        let mut out = self.padded(r);
        out.period = period;
        for (n, b) in other.nonzero_blocks() {
            let i = out.index(n).expect("padded box");
            for (o, z) in out.data[i..i + b.len()].iter_mut().zip(b) {
                *o += z * sign;
            }
        }
        out.error_bound = self.error_bound + other.error_bound;
        out
    }

    pub fn add(&self, other: &PeriodicKernel) -> PeriodicKernel {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &PeriodicKernel) -> PeriodicKernel {
        self.combine(other, -1.0)
    }

    /// Blocks `A_{0,n} S`.
    pub fn mul_internal_right(&self, s: &DMatrix<C64>) -> PeriodicKernel {
        let sb = block::from_matrix(s);
        self.map_blocks(|_, b| block::mul(b, &sb, self.dim), spectral_or_one(s))
    }

    /// Blocks `S A_{0,n}`.
    pub fn mul_internal_left(&self, s: &DMatrix<C64>) -> PeriodicKernel {
        let sb = block::from_matrix(s);
        self.map_blocks(|_, b| block::mul(&sb, b, self.dim), spectral_or_one(s))
    }

    pub(crate) fn map_blocks(
        &self,
        f: impl Fn(Offset, &[C64]) -> Vec<C64>,
        error_factor: f64,
    ) -> PeriodicKernel {
        let mut out = PeriodicKernel::zeros(self.dim, self.radius);
        out.period = self.period;
        for (n, b) in self.nonzero_blocks() {
            out.set_block(n, &f(n, b));
        }
        out.error_bound = self.error_bound * error_factor;
        out
    }

    /// `Σ_n ‖A_{0,n}‖_F`, an upper bound for the operator norm.
    pub fn frobenius_mass(&self) -> f64 {
        self.nonzero_blocks()
            .map(|(_, b)| block::frobenius(b))
            .sum()
    }

    pub fn block_norms(&self) -> Vec<(Offset, f64)> {
        self.offsets()
            .map(|n| (n, block::spectral_norm(self.block(n).unwrap(), self.dim)))
            .collect()
    }

    /// `max_n max_{ij} |A_{0,n} - B_{0,n}|` over the union of supports.
    pub fn max_abs_diff(&self, other: &PeriodicKernel) -> f64 {
        let r = self.radius.max(other.radius);
        let a = self.padded(r);
        let b = other.padded(r);
        a.data
            .iter()
            .zip(&b.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

fn spectral_or_one(s: &DMatrix<C64>) -> f64 {
    crate::lattice_model::spectral_norm(s).max(0.0)
}

fn merged_period(a: &PeriodicKernel, b: &PeriodicKernel) -> Option<usize> {
    match (a.period, b.period) {
        (Some(p), Some(q)) => {
            assert_eq!(p, q, "cannot mix torus kernels of different periods");
            Some(p)
        }
        (Some(p), None) | (None, Some(p)) => {
            let other = if a.period.is_some() { b } else { a };
            assert!(
                2 * other.effective_radius() < p,
                "linear kernel too wide for a torus of period {p}"
            );
            Some(p)
        }
        (None, None) => None,
    }
}

#[inline]
fn wrap(x: i64, period: i64) -> i64 {
    let h = period / 2;
    (x + h).rem_euclid(period) - h
}

/// `(AB)_{0,n} = Σ_p A_{0,p} B_{0,n-p}`, kept on `‖n‖∞ ≤ r_out`.
///
/// `r_out = None` keeps the full support `R_A + R_B` (or the whole torus).
/// The attached error bound propagates the input bounds and adds the mass of
/// every discarded product term.
pub fn compose_periodic(
    a: &PeriodicKernel,
    b: &PeriodicKernel,
    r_out: Option<usize>,
) -> PeriodicKernel {
    assert_eq!(a.dim, b.dim, "dimension mismatch");
    let d = a.dim;
    let dd = d * d;
    let period = merged_period(a, b);
    let ea = a.error_bound;
    let eb = b.error_bound;
    let ma = a.frobenius_mass();
    let mb = b.frobenius_mass();
    let a_nz: Vec<(Offset, &[C64])> = a.nonzero_blocks().collect();

    let (mut out, discarded) = if let Some(m) = period {
        let r = (m - 1) / 2;
        let a = a.padded(r);
        let b = b.padded(r);
        let mut out = PeriodicKernel::zeros(d, r);
        out.period = Some(m);
        let mi = m as i64;
        let a_nz: Vec<(Offset, &[C64])> = a.nonzero_blocks().collect();
        out.data
            .par_chunks_mut(dd)
            .enumerate()
            .for_each(|(slot, o)| {
                let w = 2 * r + 1;
                let n = [(slot / w) as i64 - r as i64, (slot % w) as i64 - r as i64];
                for (p, ab) in &a_nz {
                    let q = [wrap(n[0] - p[0], mi), wrap(n[1] - p[1], mi)];
                    let bb = b.block(q).unwrap();
                    if !block::is_zero(bb) {
                        block::gemm_acc(o, ab, bb, d);
                    }
                }
            });
        (out, 0.0)
    } else {
        let full = a.radius + b.radius;
        let r = r_out.unwrap_or(full).min(full);
        let mut out = PeriodicKernel::zeros(d, r);
        let rb = b.radius as i64;
        out.data
            .par_chunks_mut(dd)
            .enumerate()
            .for_each(|(slot, o)| {
                let w = 2 * r + 1;
                let n = [(slot / w) as i64 - r as i64, (slot % w) as i64 - r as i64];
                for (p, ab) in &a_nz {
                    let q = [n[0] - p[0], n[1] - p[1]];
                    if q[0].abs() > rb || q[1].abs() > rb {
                        continue;
                    }
                    let bb = b.block(q).unwrap();
                    if !block::is_zero(bb) {
                        block::gemm_acc(o, ab, bb, d);
                    }
                }
            });
        let discarded = if r < full {
            discarded_mass(a, b, r)
        } else {
            0.0
        };
        (out, discarded)
    };
    out.error_bound = ea * mb + ma * eb + ea * eb + discarded;
    out
}

/// `Σ_{p,q: ‖p+q‖∞ > r} ‖A_p‖_F ‖B_q‖_F`.
fn discarded_mass(a: &PeriodicKernel, b: &PeriodicKernel, r: usize) -> f64 {
    let na: Vec<(Offset, f64)> = a
        .nonzero_blocks()
        .map(|(n, x)| (n, block::frobenius(x)))
        .collect();
    let nb: Vec<(Offset, f64)> = b
        .nonzero_blocks()
        .map(|(n, x)| (n, block::frobenius(x)))
        .collect();
    let r = r as i64;
    let mut s = 0.0;
    for (p, x) in &na {
        for (q, y) in &nb {
            if (p[0] + q[0]).abs() > r || (p[1] + q[1]).abs() > r {
                s += x * y;
            }
        }
    }
    s
}

/// Composes a chain left to right; intermediate products keep only the offsets
/// that can still reach the requested output box.
pub fn compose_chain(factors: &[&PeriodicKernel], r_out: Option<usize>) -> PeriodicKernel {
    assert!(!factors.is_empty(), "empty product");
    let total: usize = factors.iter().map(|k| k.radius).sum();
    let r_final = r_out.unwrap_or(total).min(total);
    let mut acc = factors[0].clone();
    for (i, k) in factors.iter().enumerate().skip(1) {
        let remaining: usize = factors[i + 1..].iter().map(|k| k.radius).sum();
        acc = compose_periodic(&acc, k, Some(r_final + remaining));
    }
    if acc.period.is_none() {
        acc = acc.truncated(r_final);
    }
    acc
}

/// `([A, X_j])_{0,n} = n_j A_{0,n}`; on a torus `n_j` is the minimal image.
pub fn commutator_position(a: &PeriodicKernel, axis: Axis) -> PeriodicKernel {
    let j = axis.index();
    let weight = a.radius.max(1) as f64;
    a.map_blocks(
        |n, b| {
            let c = C64::new(n[j] as f64, 0.0);
            b.iter().map(|z| z * c).collect()
        },
        weight,
    )
}

/// `A_{0,n} S - S A_{0,n}`.
pub fn commutator_internal(a: &PeriodicKernel, s: &DMatrix<C64>) -> PeriodicKernel {
    let sb = block::from_matrix(s);
    let d = a.dim;
    a.map_blocks(
        |_, b| {
            let mut x = block::mul(b, &sb, d);
            let y = block::mul(&sb, b, d);
            x.iter_mut().zip(y).for_each(|(u, v)| *u -= v);
            x
        },
        2.0 * spectral_or_one(s),
    )
}
