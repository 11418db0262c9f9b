//! Non-periodic kernels stored on a finite block of rows.

use super::block;
use super::periodic::PeriodicKernel;
use super::KernelError;
use crate::lattice_model::{Axis, Offset, SwitchFunction, C64};

/// Inclusive rectangle of lattice cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub lo: Offset,
    pub hi: Offset,
}

impl CellRect {
    pub fn contains(&self, m: Offset) -> bool {
        (0..2).all(|i| self.lo[i] <= m[i] && m[i] <= self.hi[i])
    }

    pub fn extent(&self, i: usize) -> usize {
        (self.hi[i] - self.lo[i] + 1).max(0) as usize
    }

    pub fn cells(&self) -> impl Iterator<Item = Offset> + '_ {
        (self.lo[0]..=self.hi[0]).flat_map(move |a| (self.lo[1]..=self.hi[1]).map(move |b| [a, b]))
    }
}

/// Kernel with rows in `rows` and columns within `radius` (sup norm) of each row.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    dim: usize,
    rows: CellRect,
    radius: usize,
    decay_axis: Option<Axis>,
    data: Vec<C64>,
    tail_bound: f64,
}

impl WindowKernel {
    pub fn zeros(dim: usize, rows: CellRect, radius: usize) -> Self {
        let w = 2 * radius + 1;
        let n = rows.extent(0) * rows.extent(1) * w * w * dim * dim;
        Self {
            dim,
            rows,
            radius,
            decay_axis: None,
            data: vec![C64::new(0.0, 0.0); n],
            tail_bound: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> CellRect {
        self.rows
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn decay_axis(&self) -> Option<Axis> {
        self.decay_axis
    }

    /// Bound on the block mass dropped per unit length along the undeclared axis.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    fn index(&self, m: Offset, n: Offset) -> Option<usize> {
        if !self.rows.contains(m) {
            return None;
        }
        let r = self.radius as i64;
        let d = [n[0] - m[0], n[1] - m[1]];
        if d[0].abs() > r || d[1].abs() > r {
            return None;
        }
        let w = 2 * r + 1;
        let row = ((m[0] - self.rows.lo[0]) as usize) * self.rows.extent(1)
            + (m[1] - self.rows.lo[1]) as usize;
        let col = ((d[0] + r) * w + (d[1] + r)) as usize;
        Some((row * (w * w) as usize + col) * self.dim * self.dim)
    }

    pub fn block(&self, m: Offset, n: Offset) -> Option<&[C64]> {
        let dd = self.dim * self.dim;
        self.index(m, n).map(|i| &self.data[i..i + dd])
    }

    fn block_mut(&mut self, m: Offset, n: Offset) -> Option<&mut [C64]> {
        let dd = self.dim * self.dim;
        self.index(m, n).map(move |i| &mut self.data[i..i + dd])
    }

    pub fn diagonal_trace(&self, m: Offset) -> C64 {
        self.block(m, m)
            .map(|b| block::trace(b, self.dim))
            .unwrap_or_default()
    }

    /// Row-wise stored blocks `(m, n, block)`.
    pub fn entries(&self) -> impl Iterator<Item = (Offset, Offset, &[C64])> {
        let r = self.radius as i64;
        let dd = self.dim * self.dim;
        self.rows.cells().flat_map(move |m| {
            (-r..=r)
                .flat_map(move |a| (-r..=r).map(move |b| [m[0] + a, m[1] + b]))
                .filter_map(move |n| {
                    let i = self.index(m, n)?;
                    let blk = &self.data[i..i + dd];
                    (!block::is_zero(blk)).then_some((m, n, blk))
                })
        })
    }

    /// Largest block norm in each row slice perpendicular to `axis`.
    pub fn row_profile(&self, axis: Axis) -> Vec<(i64, f64)> {
        let j = axis.index();
        let mut out: Vec<(i64, f64)> = (self.rows.lo[j]..=self.rows.hi[j])
            .map(|x| (x, 0.0))
            .collect();
        for (m, _, b) in self.entries() {
            let slot = (m[j] - self.rows.lo[j]) as usize;
            out[slot].1 = out[slot].1.max(block::spectral_norm(b, self.dim));
        }
        out
    }
}

/// `[A, Λ]` restricted to rows within `half_width` of the switch window along
/// its axis and `|m_other| ≤ transverse`.
///
/// Blocks are `A_{0,n-m}(Λ(n_j) - Λ(m_j))`. Rows farther from the wall than
/// the kernel radius vanish exactly; rows dropped before that are summed into
/// the omitted mass, which must stay below `tail_tol`.
pub fn commutator_switch(
    a: &PeriodicKernel,
    switch: &SwitchFunction,
    half_width: usize,
    transverse: usize,
    tail_tol: f64,
) -> Result<WindowKernel, KernelError> {
    let j = switch.axis.index();
    let o = 1 - j;
    let (lo, hi) = switch.window();
    let hw = half_width as i64;
    let mut rows = CellRect {
        lo: [0, 0],
        hi: [0, 0],
    };
    rows.lo[j] = lo - hw;
    rows.hi[j] = hi - 1 + hw;
    rows.lo[o] = -(transverse as i64);
    rows.hi[o] = transverse as i64;

    let nz: Vec<(Offset, &[C64])> = a.nonzero_blocks().collect();
    let r = a.radius() as i64;
    let mut omitted = 0.0;
    for mj in (lo - r - 1)..=(hi + r) {
        if mj >= rows.lo[j] && mj <= rows.hi[j] {
            continue;
        }
        for (d, b) in &nz {
            let w = switch.eval(mj + d[j]) - switch.eval(mj);
            omitted += w.abs() * block::frobenius(b);
        }
    }
    if omitted > tail_tol {
        return Err(KernelError::WindowTooSmall {
            omitted,
            tolerance: tail_tol,
        });
    }

    let mut out = WindowKernel::zeros(a.dim(), rows, a.radius());
    out.decay_axis = Some(switch.axis);
    out.tail_bound = omitted;
    let cells: Vec<Offset> = rows.cells().collect();
    for m in cells {
        let lm = switch.eval(m[j]);
        for (d, b) in &nz {
            let n = [m[0] + d[0], m[1] + d[1]];
            let w = switch.eval(n[j]) - lm;
            if w == 0.0 {
                continue;
            }
            let dst = out.block_mut(m, n).expect("column within radius");
            for (x, y) in dst.iter_mut().zip(b.iter()) {
                *x = y * w;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn diagonal_kernel_commutes_with_switch() {
        let a = PeriodicKernel::internal(&DMatrix::from_element(2, 2, C64::new(1.0, 0.5)));
        let w = commutator_switch(&a, &SwitchFunction::sharp(Axis::Two), 2, 2, 0.0).unwrap();
        assert_eq!(w.entries().count(), 0);
    }

    #[test]
    fn hop_across_the_wall_only() {
        let b = DMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let a = PeriodicKernel::single([0, 1], &b);
        let w = commutator_switch(&a, &SwitchFunction::sharp(Axis::Two), 3, 1, 0.0).unwrap();
        let rows: Vec<i64> = w.entries().map(|(m, _, _)| m[1]).collect();
        assert!(!rows.is_empty());
        // Λ jumps between 0 and 1, so only m₂ = 0 → n₂ = 1 crosses it
        assert!(rows.iter().all(|&r| r == 0));
        let (m, n, blk) = w.entries().next().unwrap();
        assert_eq!(n[1] - m[1], 1);
        assert_eq!(blk[0], C64::new(2.0, 0.0));
    }

    #[test]
    fn narrow_window_is_refused() {
        let b = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let a = PeriodicKernel::single([0, 3], &b);
        let r = commutator_switch(&a, &SwitchFunction::sharp(Axis::Two), 0, 0, 1e-3);
        assert!(matches!(r, Err(KernelError::WindowTooSmall { .. })));
        assert!(commutator_switch(&a, &SwitchFunction::sharp(Axis::Two), 3, 0, 0.0).is_ok());
    }
}
