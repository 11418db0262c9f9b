//! Periodic tight-binding Hamiltonians on the square Bravais lattice ℤ².
//!
//! A [`HoppingKernel`] stores the blocks `H_{0,d}` of a translation invariant
//! Hamiltonian; the full operator is recovered as `H_{m,n} = H_{0,n-m}`.
//! Internal degrees of freedom are ordered (orbital, spin), so for the
//! honeycomb lattice the basis reads (A↑, A↓, B↑, B↓).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

/// Lattice offset or site label `(n₁, n₂)` in Bravais coordinates.
pub type Offset = [i64; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// One of the two lattice directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::One => 0,
            Axis::Two => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::One => Axis::Two,
            Axis::Two => Axis::One,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        if i == 0 {
            Axis::One
        } else {
            Axis::Two
        }
    }
}

/// Kane-Mele couplings, in units where the lattice spacing is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KaneMeleParams {
    pub t: f64,
    pub lambda_v: f64,
    pub lambda_so: f64,
    pub lambda_r: f64,
}

impl KaneMeleParams {
    pub fn new(t: f64, lambda_v: f64, lambda_so: f64, lambda_r: f64) -> Self {
        Self {
            t,
            lambda_v,
            lambda_so,
            lambda_r,
        }
    }
}

/// Internal space `ℂ^N ⊗ ℂ^s`: `N` orbitals, each with `s ∈ {1, 2}` spin states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalBasis {
    pub n_orbitals: usize,
    pub spin_dim: usize,
}

impl InternalBasis {
    pub fn spinful(n_orbitals: usize) -> Self {
        Self {
            n_orbitals,
            spin_dim: 2,
        }
    }

    pub fn spinless(n_orbitals: usize) -> Self {
        Self {
            n_orbitals,
            spin_dim: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_orbitals * self.spin_dim
    }

    pub fn is_spinful(&self) -> bool {
        self.spin_dim == 2
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("block at offset {offset:?} is {rows}x{cols}, expected {dim}x{dim}")]
    BlockShape {
        offset: Offset,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("hopping kernel is not hermitian: residual {residual:e} at offset {offset:?}")]
    NotHermitian { offset: Offset, residual: f64 },
    #[error("entry ({row}, {col}) outside internal dimension {dim}")]
    EntryOutOfRange { row: usize, col: usize, dim: usize },
    #[error("operation needs a spinful basis")]
    Spinless,
    #[error("spin sectors are coupled (‖[H,S_z]‖ = {norm:e})")]
    SpinMixing { norm: f64 },
}

/// Finite-range periodic Hamiltonian, `offset ↦ H_{0,offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingKernel {
    basis: InternalBasis,
    hoppings: BTreeMap<Offset, DMatrix<C64>>,
}

impl HoppingKernel {
    pub fn new(basis: InternalBasis) -> Self {
        Self {
            basis,
            hoppings: BTreeMap::new(),
        }
    }

    pub fn basis(&self) -> InternalBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Adds `block` to `H_{0,offset}`; does not touch the mirrored offset.
    pub fn add_block(&mut self, offset: Offset, block: &DMatrix<C64>) -> Result<(), LatticeError> {
        let dim = self.dim();
        if block.nrows() != dim || block.ncols() != dim {
            return Err(LatticeError::BlockShape {
                offset,
                rows: block.nrows(),
                cols: block.ncols(),
                dim,
            });
        }
        let entry = self
            .hoppings
            .entry(offset)
            .or_insert_with(|| DMatrix::zeros(dim, dim));
        *entry += block;
        Ok(())
    }

    /// Adds a single matrix element `H_{0,offset}[row, col] += value` together
    /// with its hermitian partner at `-offset`.
    pub fn add_hermitian_entry(
        &mut self,
        offset: Offset,
        row: usize,
        col: usize,
        value: C64,
    ) -> Result<(), LatticeError> {
        let dim = self.dim();
        if row >= dim || col >= dim {
            return Err(LatticeError::EntryOutOfRange { row, col, dim });
        }
        let mut block = DMatrix::zeros(dim, dim);
        block[(row, col)] = value;
        if offset == [0, 0] {
            let herm = block.adjoint();
            if row == col {
                block[(row, col)] = C64::new(value.re, 0.0);
                self.add_block(offset, &block)?;
            } else {
                self.add_block(offset, &(block + herm))?;
            }
        } else {
            self.add_block(offset, &block)?;
            self.add_block([-offset[0], -offset[1]], &block.adjoint())?;
        }
        Ok(())
    }

    /// Drops blocks whose entries are all exactly zero.
    pub fn prune(&mut self) {
        self.hoppings.retain(|_, b| b.iter().any(|z| *z != ZERO));
    }

    pub fn block(&self, offset: Offset) -> Option<&DMatrix<C64>> {
        self.hoppings.get(&offset)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Offset, &DMatrix<C64>)> {
        self.hoppings.iter()
    }

    pub fn support(&self) -> Vec<Offset> {
        self.hoppings.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.hoppings.is_empty()
    }

    /// Largest `‖d‖₁` over stored offsets.
    pub fn range(&self) -> i64 {
        self.hoppings
            .keys()
            .map(|d| d[0].abs() + d[1].abs())
            .max()
            .unwrap_or(0)
    }

    /// Largest `‖d‖∞` over stored offsets.
    pub fn sup_range(&self) -> i64 {
        self.hoppings
            .keys()
            .map(|d| d[0].abs().max(d[1].abs()))
            .max()
            .unwrap_or(0)
    }

    /// `max_d ‖H_{0,-d} - H_{0,d}^†‖` (missing blocks count as zero).
    pub fn hermiticity_residual(&self) -> (f64, Offset) {
        let dim = self.dim();
        let zero = DMatrix::zeros(dim, dim);
        let mut worst = (0.0, [0, 0]);
        for (d, b) in &self.hoppings {
            let mirror = self.hoppings.get(&[-d[0], -d[1]]).unwrap_or(&zero);
            let r = max_abs(&(mirror - b.adjoint()));
            if r > worst.0 {
                worst = (r, *d);
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<(), LatticeError> {
        let (residual, offset) = self.hermiticity_residual();
        if residual > tol {
            return Err(LatticeError::NotHermitian { offset, residual });
        }
        Ok(())
    }

    /// Restriction to one `s_z` sector; fails unless `[H, S_z] = 0`.
    pub fn spin_sector(&self, up: bool) -> Result<HoppingKernel, LatticeError> {
        if !self.basis.is_spinful() {
            return Err(LatticeError::Spinless);
        }
        let norm = spin_commutator_norm(self)?;
        if norm > 1e-12 {
            return Err(LatticeError::SpinMixing { norm });
        }
        let n = self.basis.n_orbitals;
        let s = if up { 0 } else { 1 };
        let mut out = HoppingKernel::new(InternalBasis::spinless(n));
        for (d, b) in &self.hoppings {
            let sub = DMatrix::from_fn(n, n, |i, j| b[(2 * i + s, 2 * j + s)]);
            out.hoppings.insert(*d, sub);
        }
        out.prune();
        Ok(out)
    }
}

/// Sum over offsets of the spectral norms of `[H_{0,d}, S_z]`.
pub fn spin_commutator_norm(kernel: &HoppingKernel) -> Result<f64, LatticeError> {
    let s = spin_z(kernel.basis())?;
    Ok(kernel
        .blocks()
        .map(|(_, b)| spectral_norm(&(b * &s - &s * b)))
        .sum())
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

pub fn pauli() -> [DMatrix<C64>; 4] {
    let s0 = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]);
    let sx = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let sy = DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let sz = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [s0, sx, sy, sz]
}

/// `S_z = ½ Id_N ⊗ s_z`.
pub fn spin_z(basis: InternalBasis) -> Result<DMatrix<C64>, LatticeError> {
    if !basis.is_spinful() {
        return Err(LatticeError::Spinless);
    }
    let [_, _, _, sz] = pauli();
    Ok(
        DMatrix::<C64>::identity(basis.n_orbitals, basis.n_orbitals).kronecker(&sz)
            * C64::new(0.5, 0.0),
    )
}

/// Writes the 2×2 spin block `blk` at orbital pair `(a, b)`.
fn orbital_block(n: usize, a: usize, b: usize, blk: &DMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((2 * a, 2 * b), (2, 2)).copy_from(blk);
    m
}

/// Kane-Mele Hamiltonian on the honeycomb lattice.
///
/// Cell `n` holds A at `n₁a₁ + n₂a₂` and B at the same point shifted by `d₁`.
/// With `a₁ = d₂ - d₃` and `a₂ = d₃ - d₁` the three nearest neighbours of an
/// A site sit in cells `(0,0)`, `(1,1)` and `(0,1)`; the second neighbours are
/// `±a₁, ±a₂, ±a₃` with `a₃ = -a₁ - a₂`.
pub fn build_kane_mele(params: &KaneMeleParams) -> HoppingKernel {
    let mut h = HoppingKernel::new(InternalBasis::spinful(2));
    let [s0, sx, sy, sz] = pauli();
    let r3 = 3f64.sqrt();
    let half = C64::new(0.5, 0.0);
    // Rashba spin matrices (d̂_i × s)_z for the three bond directions.
    let rashba = [
        -(sx.clone() * C64::new(r3, 0.0) + &sy) * half,
        (sx.clone() * C64::new(r3, 0.0) - &sy) * half,
        sy.clone(),
    ];
    let bond_cells: [Offset; 3] = [[0, 0], [1, 1], [0, 1]];
    let t = C64::new(params.t, 0.0);
    let lr = C64::new(params.lambda_r, 0.0);
    for (cell, r) in bond_cells.iter().zip(rashba.iter()) {
        let ab = s0.clone() * t - r * (I * lr);
        let blk = orbital_block(2, 0, 1, &ab);
        let _ = h.add_block(*cell, &blk);
        let _ = h.add_block([-cell[0], -cell[1]], &blk.adjoint());
    }

    let lv = C64::new(params.lambda_v, 0.0);
    let onsite =
        orbital_block(2, 0, 0, &(s0.clone() * lv)) + orbital_block(2, 1, 1, &(s0.clone() * -lv));
    let _ = h.add_block([0, 0], &onsite);

    let lso = C64::new(params.lambda_so, 0.0);
    for a in [[1, 0], [0, 1], [-1, -1]] {
        for (sgn, off) in [(1.0, [-a[0], -a[1]]), (-1.0, a)] {
            let amp = I * lso * sgn;
            let blk = orbital_block(2, 0, 0, &(sz.clone() * -amp))
                + orbital_block(2, 1, 1, &(sz.clone() * amp));
            let _ = h.add_block(off, &blk);
        }
    }
    h.prune();
    h
}

/// `H(k) = Σ_d e^{i k·d} H_{0,d}`.
pub fn bloch_fiber(kernel: &HoppingKernel, k: [f64; 2]) -> DMatrix<C64> {
    let dim = kernel.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for (d, b) in kernel.blocks() {
        let phase = C64::from_polar(1.0, k[0] * d[0] as f64 + k[1] * d[1] as f64);
        out += b * phase;
    }
    out
}

/// Largest deviation of `Θ H Θ⁻¹` from `H`, with `Θ = (Id ⊗ i s_y) K`.
///
/// Θ acts on-site, so it maps `H_{0,d}` to `U conj(H_{0,d}) U†` at the same offset.
pub fn verify_time_reversal(kernel: &HoppingKernel) -> Result<f64, LatticeError> {
    let basis = kernel.basis();
    if !basis.is_spinful() {
        return Err(LatticeError::Spinless);
    }
    let [_, _, sy, _] = pauli();
    let u = DMatrix::<C64>::identity(basis.n_orbitals, basis.n_orbitals).kronecker(&(sy * I));
    let mut worst: f64 = 0.0;
    for (_, b) in kernel.blocks() {
        let conj = b.map(|z| z.conj());
        let flipped = &u * conj * u.adjoint();
        worst = worst.max(spectral_norm(&(flipped - b)));
    }
    Ok(worst)
}

/// Shapes of switch functions along one lattice axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchProfile {
    /// 0 for `n < at`, 1 for `n ≥ at`.
    Step { at: i64 },
    /// 0 below `start`, `(n - start)/(end - start)` on `[start, end)`, 1 from `end` on.
    Ramp { start: i64, end: i64 },
    /// `Ξ(n/l)` with `Ξ(x) = clamp(x + ½, 0, 1)`.
    Xi { l: f64 },
}

impl SwitchProfile {
    pub fn eval(&self, n: i64) -> f64 {
        match *self {
            SwitchProfile::Step { at } => {
                if n >= at {
                    1.0
                } else {
                    0.0
                }
            }
            SwitchProfile::Ramp { start, end } => {
                if n < start {
                    0.0
                } else if n >= end {
                    1.0
                } else {
                    (n - start) as f64 / (end - start) as f64
                }
            }
            SwitchProfile::Xi { l } => (n as f64 / l + 0.5).clamp(0.0, 1.0),
        }
    }

    /// Jump window `[n₋, n₊)`: 0 below `n₋`, 1 from `n₊` on.
    pub fn window(&self) -> (i64, i64) {
        match *self {
            SwitchProfile::Step { at } => (at - 1, at),
            SwitchProfile::Ramp { start, end } => (start, end),
            SwitchProfile::Xi { l } => ((-l / 2.0).ceil() as i64, (l / 2.0).ceil() as i64),
        }
    }

    pub fn shifted(&self, by: i64) -> SwitchProfile {
        match *self {
            SwitchProfile::Step { at } => SwitchProfile::Step { at: at + by },
            SwitchProfile::Ramp { start, end } => SwitchProfile::Ramp {
                start: start + by,
                end: end + by,
            },
            SwitchProfile::Xi { .. } => *self,
        }
    }
}

/// A switch function `Λ` along `axis`, acting as multiplication by `Λ(n_axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFunction {
    pub axis: Axis,
    pub profile: SwitchProfile,
}

impl SwitchFunction {
    /// Sharp step with `n₋ = 0`, `n₊ = 1` and `Λ(0) = 0`.
    pub fn sharp(axis: Axis) -> Self {
        Self {
            axis,
            profile: SwitchProfile::Step { at: 1 },
        }
    }

    pub fn ramp(axis: Axis, start: i64, end: i64) -> Self {
        assert!(end > start, "ramp needs end > start");
        Self {
            axis,
            profile: SwitchProfile::Ramp { start, end },
        }
    }

    /// Default linear ramp over `[-5, 6)`.
    pub fn default_ramp(axis: Axis) -> Self {
        Self::ramp(axis, -5, 6)
    }

    pub fn xi(axis: Axis, l: f64) -> Self {
        assert!(l > 0.0, "ramp width must be positive");
        Self {
            axis,
            profile: SwitchProfile::Xi { l },
        }
    }

    pub fn eval(&self, n: i64) -> f64 {
        self.profile.eval(n)
    }

    pub fn window(&self) -> (i64, i64) {
        self.profile.window()
    }

    pub fn shifted(&self, by: i64) -> Self {
        Self {
            axis: self.axis,
            profile: self.profile.shifted(by),
        }
    }

    /// `Σ_m (Λ(m+n) - Λ(m))`, summed over the finite range where terms can be nonzero.
    pub fn summation_identity(&self, n: i64) -> f64 {
        let (lo, hi) = self.window();
        let span = n.abs() + 1;
        (lo - span..=hi + span)
            .map(|m| self.eval(m + n) - self.eval(m))
            .sum()
    }
}

/// Real functions of one lattice coordinate, used as multiplication operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SiteProfile {
    Switch(SwitchProfile),
    /// `X^{(l)}(n) = l (Ξ^{(l)}(n) - ½)`: equals `n` for `|n| ≤ l/2`, saturates at `±l/2`.
    ApproxPosition {
        l: f64,
    },
    /// The position `n` itself.
    Position,
    /// Indicator of `lo ≤ n ≤ hi`.
    Indicator {
        lo: i64,
        hi: i64,
    },
    Constant(f64),
}

impl SiteProfile {
    pub fn eval(&self, n: i64) -> f64 {
        match *self {
            SiteProfile::Switch(p) => p.eval(n),
            SiteProfile::ApproxPosition { l } => l * (SwitchProfile::Xi { l }.eval(n) - 0.5),
            SiteProfile::Position => n as f64,
            SiteProfile::Indicator { lo, hi } => {
                if (lo..=hi).contains(&n) {
                    1.0
                } else {
                    0.0
                }
            }
            SiteProfile::Constant(c) => c,
        }
    }

    /// Values at `n → -∞` and `n → +∞`, or `None` when unbounded.
    pub fn asymptotes(&self) -> Option<(f64, f64)> {
        match *self {
            SiteProfile::Switch(_) => Some((0.0, 1.0)),
            SiteProfile::ApproxPosition { l } => Some((-l / 2.0, l / 2.0)),
            SiteProfile::Position => None,
            SiteProfile::Indicator { .. } => Some((0.0, 0.0)),
            SiteProfile::Constant(c) => Some((c, c)),
        }
    }

    /// Interval outside of which the profile equals its asymptotes.
    pub fn transition(&self) -> Option<(i64, i64)> {
        match *self {
            SiteProfile::Switch(p) => Some(p.window()),
            SiteProfile::ApproxPosition { l } => Some(SwitchProfile::Xi { l }.window()),
            SiteProfile::Position => None,
            SiteProfile::Indicator { lo, hi } => Some((lo, hi + 1)),
            SiteProfile::Constant(_) => Some((0, 0)),
        }
    }
}

impl From<SwitchFunction> for SiteProfile {
    fn from(s: SwitchFunction) -> Self {
        SiteProfile::Switch(s.profile)
    }
}
