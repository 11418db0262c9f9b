//! Spin conductivity, spin conductance, spin torque response, charge
//! conductivity and lattice Chern numbers.
//!
//! Conductance-type quantities are reported in units of the conductance
//! quantum, i.e. `2π` times the raw trace. The torque response is reported raw.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kernel_algebra::{
    commutator_internal, commutator_position, commutator_position_spin, compose_periodic, Expr,
    HolmgrenNorm, KernelError, LocalOperator, OffsetPeriodicKernel, PeriodicKernel,
};
use crate::lattice_model::{
    spin_z, Axis, HoppingKernel, InternalBasis, LatticeError, SiteProfile, SwitchFunction, C64,
};
use crate::spectral::{band_spectrum, detect_gap, fermi_fibers, BzGrid, FiberField, SpectralError};
use crate::trace_functionals::{
    jpv_trace, pv_trace, DiagonalTrace, TraceError, TraceSeries, Verdict,
};

/// Imaginary parts above this make a reported real quantity suspect.
pub const IMAG_TOLERANCE: f64 = 1e-9;
/// Smallest admissible link overlap modulus in the plaquette sum.
pub const LINK_TOLERANCE: f64 = 1e-8;

const QUANTUM: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{quantity} has imaginary part {imag:.3e}")]
    ImaginaryPart { quantity: &'static str, imag: f64 },
    #[error("link overlap {modulus:.3e} at k-index {k:?}: grid too coarse")]
    SingularPlaquette { k: [usize; 2], modulus: f64 },
    #[error("fiber rank changes across the grid")]
    RankNotConstant,
}

/// Real value with its discarded imaginary part and an error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub imag: f64,
    pub bound: f64,
}

impl Estimate {
    fn checked(quantity: &'static str, z: C64, bound: f64) -> Result<Self, TransportError> {
        if z.im.abs() > IMAG_TOLERANCE {
            return Err(TransportError::ImaginaryPart {
                quantity,
                imag: z.im,
            });
        }
        Ok(Self {
            value: z.re,
            imag: z.im,
            bound,
        })
    }
}

/// `S_z = ½ Id ⊗ s_z` for a kernel whose blocks are (orbital ⊗ spin).
pub fn spin_operator(dim: usize) -> Result<DMatrix<C64>, LatticeError> {
    spin_z(InternalBasis::spinful(dim / 2))
}

/// Bound on the error in `tr (F₁⋯F_k)_{0,0}` inherited from the error bounds
/// of the factors: `d · (Π(‖F_i‖ + ε_i) - Π‖F_i‖)` in Hölmgren norm.
fn chain_bound(factors: &[&PeriodicKernel]) -> f64 {
    let d = factors.first().map_or(0, |f| f.dim()) as f64;
    let (with, without) = factors.iter().fold((1.0, 1.0), |(w, wo), f| {
        let h = f.holmgren_norm();
        (w * (h + f.error_bound()), wo * h)
    });
    d * (with - without)
}

fn i_unit() -> C64 {
    C64::new(0.0, 1.0)
}

/// `T = iP[[P,S_z],[P,X₂]]P`, kept on `‖n‖∞ ≤ r_out` (default: radius of `P`).
pub fn torque_kernel(
    p: &PeriodicKernel,
    r_out: Option<usize>,
) -> Result<PeriodicKernel, TransportError> {
    let s = spin_operator(p.dim())?;
    let r = r_out.unwrap_or(p.radius());
    let a = commutator_internal(p, &s);
    let c2 = commutator_position(p, Axis::Two);
    let pa = compose_periodic(p, &a, None);
    let pc = compose_periodic(p, &c2, None);
    let c2p = compose_periodic(&c2, p, None);
    let ap = compose_periodic(&a, p, None);
    let t = compose_periodic(&pa, &c2p, Some(r)).sub(&compose_periodic(&pc, &ap, Some(r)));
    Ok(t.scale(i_unit()))
}

/// `τ(T) = tr T_{0,0}` (raw units).
pub fn torque_response(p: &PeriodicKernel) -> Result<Estimate, TransportError> {
    let t = torque_kernel(p, Some(0))?;
    let a = commutator_internal(p, &spin_operator(p.dim())?);
    let c2 = commutator_position(p, Axis::Two);
    Estimate::checked(
        "torque response",
        t.trace_at_origin(),
        2.0 * chain_bound(&[p, &a, &c2, p]),
    )
}

/// `Σ_K = iP[[P,X₁S_z],[P,X₂]]P` as a periodic part plus `p₁`-weighted correction.
///
/// The correction part equals the torque kernel.
pub fn sigma_k_kernel(
    p: &PeriodicKernel,
    r_out: Option<usize>,
) -> Result<OffsetPeriodicKernel, TransportError> {
    let s = spin_operator(p.dim())?;
    let r = r_out.unwrap_or(p.radius());
    let rp = p.radius();
    let o = commutator_position_spin(p, Axis::One, &s);
    let c2 = commutator_position(p, Axis::Two);
    // P·(O·(C₂·P))
    let c2p = compose_periodic(&c2, p, None);
    let first = o
        .compose_right(&c2p, Some(r + rp))
        .compose_left(p, Some(r))?;
    // (P·C₂)·(O·P)
    let pc2 = compose_periodic(p, &c2, None);
    let second = o
        .compose_right(p, Some(r + 2 * rp))
        .compose_left(&pc2, Some(r))?;
    Ok(first.sub(&second)?.scale(i_unit()))
}

/// `σ_K = τ(Σ_K)` in conductance quanta.
pub fn sigma_k(p: &PeriodicKernel) -> Result<Estimate, TransportError> {
    let k = sigma_k_kernel(p, Some(0))?;
    let z = k.tuv()? * QUANTUM;
    let c1 = commutator_position(p, Axis::One);
    let c2 = commutator_position(p, Axis::Two);
    Estimate::checked("sigma_K", z, 2.0 * chain_bound(&[p, &c1, &c2, p]) * QUANTUM)
}

/// `τ(iP[[P,X₁],[P,X₂]]P)` in conductance quanta.
pub fn charge_conductivity(p: &PeriodicKernel) -> Result<Estimate, TransportError> {
    let c1 = commutator_position(p, Axis::One);
    let c2 = commutator_position(p, Axis::Two);
    let pc1 = compose_periodic(p, &c1, None);
    let pc2 = compose_periodic(p, &c2, None);
    let c1p = compose_periodic(&c1, p, None);
    let c2p = compose_periodic(&c2, p, None);
    let t = compose_periodic(&pc1, &c2p, Some(0)).sub(&compose_periodic(&pc2, &c1p, Some(0)));
    let t = t.scale(i_unit() * QUANTUM);
    Estimate::checked(
        "charge conductivity",
        t.trace_at_origin(),
        2.0 * chain_bound(&[p, &c1, &c2, p]) * QUANTUM,
    )
}

fn site(dim: usize, sw: &SwitchFunction) -> Expr {
    Expr::site(dim, sw.axis, SiteProfile::from(*sw))
}

/// `G = iP[[P,Λ₁S_z],[P,Λ₂]]P` as a locally evaluable operator.
pub fn conductance_operator(
    p: &PeriodicKernel,
    lambda1: &SwitchFunction,
    lambda2: &SwitchFunction,
) -> Result<LocalOperator, TransportError> {
    let d = p.dim();
    let ep = Expr::kernel(Arc::new(p.clone()));
    let es = Expr::internal(&spin_operator(d)?);
    let x = ep.commutator(&(&site(d, lambda1) * &es));
    let y = ep.commutator(&site(d, lambda2));
    let g = (&(&ep * &x.commutator(&y)) * &ep).scale(i_unit());
    Ok(LocalOperator::compile(&g)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conductance {
    /// Stripe partial sums along axis 1, in conductance quanta.
    pub series: TraceSeries,
    pub value: Estimate,
}

/// `G_K(Λ₁,Λ₂)`: stripe principal-value trace of the conductance operator
/// along axis 1, reported at `L = l_max`.
///
/// The bound covers the stripe tail and the last increment; truncation error
/// of `P` itself is reported separately by the projector.
pub fn conductance_gk(
    p: &PeriodicKernel,
    lambda1: &SwitchFunction,
    lambda2: &SwitchFunction,
    l_max: usize,
    transverse_cutoff: Option<usize>,
) -> Result<Conductance, TransportError> {
    let op = conductance_operator(p, lambda1, lambda2)?;
    let series = scaled(
        jpv_trace(&op, Axis::One, l_max, transverse_cutoff)?,
        QUANTUM,
        0.0,
    );
    let value = Estimate::checked(
        "G_K",
        series.value(),
        series.tail_bound() + series.last_increment(),
    )?;
    Ok(Conductance { series, value })
}

fn scaled(mut s: TraceSeries, c: f64, extra_bound: f64) -> TraceSeries {
    for x in &mut s.samples {
        x.value *= c;
        x.tail_bound = (x.tail_bound + extra_bound) * c;
    }
    s
}

/// Full trace of a trace-class local operator, over the smallest square
/// outside which its diagonal is known to be constant (and checked to vanish).
fn full_trace(op: &LocalOperator) -> Result<(C64, f64), TransportError> {
    let mut h = 0i64;
    for axis in [Axis::One, Axis::Two] {
        let (lo, hi) = op.constant_beyond(axis).unwrap_or((-64, 64));
        h = h.max(-lo).max(hi);
    }
    let edge = [
        [h + 1, 0],
        [-h - 1, 0],
        [0, h + 1],
        [0, -h - 1],
        [h + 1, h + 1],
    ]
    .iter()
    .map(|&m| op.diagonal_trace(m).norm())
    .fold(0.0, f64::max);
    if edge > 1e-12 {
        return Err(TraceError::TailNotControlled {
            density: edge,
            cutoff: h,
        }
        .into());
    }
    let s = pv_trace(op, (2 * h + 1) as usize)?;
    Ok((s.value(), s.last_increment()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `Tr(G_a + G_a†)/l` in conductance quanta.
    pub g_a_over_l: Estimate,
    /// Stripe partial sums of `G_b + G_b†` along axis 1, in conductance quanta.
    pub g_b_series: TraceSeries,
    pub g_b_max_abs: f64,
    pub l: f64,
}

/// Split of the conductance with the switch `Λ₁` replaced by the approximate
/// position `X^{(l)} = l(Ξ^{(l)} - ½)`:
/// `G_a = i[P,X^{(l)}]S_z P^⊥[P,Λ₂]` and `G_b = X^{(l)} i[P,S_z] P^⊥[P,Λ₂]`,
/// each with its adjoint added.
pub fn gk_decomposition(
    p: &PeriodicKernel,
    l: f64,
    lambda2: &SwitchFunction,
    l_max: usize,
) -> Result<Decomposition, TransportError> {
    let d = p.dim();
    let ep = Expr::kernel(Arc::new(p.clone()));
    let es = Expr::internal(&spin_operator(d)?);
    let perp = &Expr::identity(d) - &ep;
    let xl = Expr::site(d, Axis::One, SiteProfile::ApproxPosition { l });
    let wall = ep.commutator(&site(d, lambda2));

    let ga = (&(&(&ep.commutator(&xl) * &es) * &perp) * &wall)
        .scale(i_unit())
        .plus_adjoint();
    let (tr_a, inc) = full_trace(&LocalOperator::compile(&ga)?)?;
    let g_a_over_l = Estimate::checked(
        "G_a/l",
        tr_a * (QUANTUM / l),
        (inc + p.error_bound()) * QUANTUM / l,
    )?;

    let gb = (&(&(&xl * &ep.commutator(&es)) * &perp) * &wall)
        .scale(i_unit())
        .plus_adjoint();
    let g_b_series = scaled(
        jpv_trace(&LocalOperator::compile(&gb)?, Axis::One, l_max, None)?,
        QUANTUM,
        0.0,
    );
    let g_b_max_abs = g_b_series
        .samples
        .iter()
        .map(|s| s.value.norm())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        g_a_over_l,
        g_b_series,
        g_b_max_abs,
        l,
    })
}

/// Hölmgren bound of `[H, S_z]`; zero exactly when the model conserves `S_z`.
pub fn spin_commuting_check(h: &HoppingKernel) -> Result<f64, LatticeError> {
    let s = spin_z(h.basis())?;
    Ok(h.blocks()
        .map(|(_, b)| crate::lattice_model::spectral_norm(&(b * &s - &s * b)))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernNumber {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
}

fn occupied_frame(p: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = p.clone().symmetric_eigen();
    let cols: Vec<usize> = (0..p.nrows())
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .collect();
    let mut v = DMatrix::zeros(p.nrows(), cols.len());
    for (c, &i) in cols.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    v
}

/// Lattice field-strength Chern number of a projector field.
///
/// Plaquettes are traversed `k → k+e₁ → k+e₁+e₂ → k+e₂`, the orientation for
/// which the result agrees in sign with [`charge_conductivity`].
pub fn chern_fhs(fibers: &FiberField) -> Result<ChernNumber, TransportError> {
    let grid = fibers.grid();
    let m = grid.m();
    let frames: Vec<DMatrix<C64>> = grid
        .indices()
        .iter()
        .map(|&[i, j]| occupied_frame(fibers.at(i, j)))
        .collect();
    let rank = frames[0].ncols();
    if frames.iter().any(|f| f.ncols() != rank) {
        return Err(TransportError::RankNotConstant);
    }
    let frame = |i: usize, j: usize| &frames[(i % m) * m + (j % m)];
    let link = |a: [usize; 2], b: [usize; 2]| -> Result<C64, TransportError> {
        let u = (frame(a[0], a[1]).adjoint() * frame(b[0], b[1])).determinant();
        if u.norm() < LINK_TOLERANCE {
            return Err(TransportError::SingularPlaquette {
                k: a,
                modulus: u.norm(),
            });
        }
        Ok(u / u.norm())
    };
    let mut total = 0.0;
    for [i, j] in grid.indices() {
        let u = link([i, j], [i + 1, j])?
            * link([i + 1, j], [i + 1, j + 1])?
            * link([i + 1, j + 1], [i, j + 1])?
            * link([i, j + 1], [i, j])?;
        total += u.arg();
    }
    let raw = total / (2.0 * PI);
    let value = raw.round() as i64;
    Ok(ChernNumber {
        value,
        raw,
        residual: (raw - value as f64).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub chern_total: ChernNumber,
    /// Present only when the model conserves `S_z`.
    pub chern_up: Option<ChernNumber>,
    pub chern_down: Option<ChernNumber>,
    pub spin_commuting_norm: f64,
}

impl InvariantReport {
    /// `(C↑ - C↓)/2` when both sectors are defined.
    pub fn spin_chern(&self) -> Option<f64> {
        Some(0.5 * (self.chern_up?.value - self.chern_down?.value) as f64)
    }
}

/// Total and, when `S_z` is conserved, per-spin Chern numbers at filling
/// `filled_bands`; each spin sector is filled up to the same Fermi level.
pub fn invariants(
    h: &HoppingKernel,
    m: usize,
    filled_bands: usize,
    mu: Option<f64>,
) -> Result<InvariantReport, TransportError> {
    let grid = BzGrid::new(m)?;
    let gap = detect_gap(&band_spectrum(h, grid), filled_bands, mu)?;
    let chern_total = chern_fhs(&fermi_fibers(h, grid, &gap)?)?;
    let norm = spin_commuting_check(h)?;
    let (mut up, mut down) = (None, None);
    if norm <= 1e-12 {
        for (flag, slot) in [(true, &mut up), (false, &mut down)] {
            let sector = h.spin_sector(flag)?;
            let bands = band_spectrum(&sector, grid);
            let filled = bands
                .rows()
                .next()
                .map(|(_, e)| e.iter().filter(|&&x| x < gap.mu).count())
                .unwrap_or(0);
            let sgap = detect_gap(&bands, filled, Some(gap.mu))?;
            *slot = Some(chern_fhs(&fermi_fibers(&sector, grid, &sgap)?)?);
        }
    }
    Ok(InvariantReport {
        chern_total,
        chern_up: up,
        chern_down: down,
        spin_commuting_norm: norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub sigma_k: Estimate,
    pub torque_tau: Estimate,
    pub charge_conductivity: Estimate,
    pub g_k: Option<Estimate>,
    pub g_k_verdict: Option<Verdict>,
    pub switches: Vec<SwitchFunction>,
    pub grid_m: usize,
    pub radius: usize,
    pub torus_complete: bool,
    pub kernel_tail: f64,
    pub holmgren_p: f64,
}

impl TransportReport {
    pub fn assemble(p: &crate::spectral::FermiProjectionKernel) -> Result<Self, TransportError> {
        let k = p.kernel();
        Ok(Self {
            sigma_k: sigma_k(k)?,
            torque_tau: torque_response(k)?,
            charge_conductivity: charge_conductivity(k)?,
            g_k: None,
            g_k_verdict: None,
            switches: Vec::new(),
            grid_m: p.grid_m(),
            radius: p.radius(),
            torus_complete: p.is_torus_complete(),
            kernel_tail: p.tail_estimate(),
            holmgren_p: k.holmgren_norm(),
        })
    }

    pub fn with_conductance(mut self, g: &Conductance, switches: Vec<SwitchFunction>) -> Self {
        self.g_k = Some(g.value);
        self.g_k_verdict = Some(g.series.verdict);
        self.switches = switches;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::{build_kane_mele, KaneMeleParams};
    use crate::spectral::fermi_projection;

    fn kernel(p: (f64, f64, f64, f64), m: usize, r: usize) -> PeriodicKernel {
        let h = build_kane_mele(&KaneMeleParams::new(p.0, p.1, p.2, p.3));
        fermi_projection(&h, m, Some(r), 2, None)
            .unwrap()
            .2
            .into_kernel()
    }

    #[test]
    fn atomic_limit_is_inert() {
        let p = kernel((0.0, 1.0, 0.0, 0.0), 12, 4);
        assert!(torque_kernel(&p, None).unwrap().max_abs() < 1e-14);
        assert!(sigma_k(&p).unwrap().value.abs() < 1e-14);
        assert!(charge_conductivity(&p).unwrap().value.abs() < 1e-14);
        let g = conductance_gk(
            &p,
            &SwitchFunction::sharp(Axis::One),
            &SwitchFunction::sharp(Axis::Two),
            9,
            None,
        )
        .unwrap();
        assert!(g.series.samples.iter().all(|s| s.value.norm() < 1e-14));
    }

    #[test]
    fn spin_conserving_torque_vanishes() {
        let p = kernel((1.0, 0.1, 0.06, 0.0), 24, 6);
        assert!(torque_kernel(&p, None).unwrap().max_abs() < 1e-12);
        let s = sigma_k_kernel(&p, None).unwrap();
        assert!(s.correction_part().max_abs() < 1e-12);
    }

    #[test]
    fn sigma_correction_is_the_torque_kernel() {
        let p = kernel((1.0, 0.1, 0.06, 0.05), 24, 5);
        let s = sigma_k_kernel(&p, Some(3)).unwrap();
        let t = torque_kernel(&p, Some(3)).unwrap();
        assert!(t.max_abs() > 1e-6);
        assert!(s.correction_part().max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn sigma_kernel_matches_dense_commutators_at_shifted_cells() {
        // direct evaluation of iP[[P,X₁S],[P,X₂]]P blocks against the offset form
        let p = kernel((1.0, 0.1, 0.06, 0.05), 12, 2);
        let s = spin_operator(4).unwrap();
        let k = sigma_k_kernel(&p, Some(1)).unwrap();
        let blk = |m: [i64; 2], n: [i64; 2]| p.block_matrix([n[0] - m[0], n[1] - m[1]]);
        let cell_range = |c: [i64; 2], r: i64| {
            (-r..=r).flat_map(move |a| (-r..=r).map(move |b| [c[0] + a, c[1] + b]))
        };
        let x1s = |m: [i64; 2], n: [i64; 2]| {
            blk(m, n) * &s * C64::new(n[0] as f64, 0.0)
                - &s * blk(m, n) * C64::new(m[0] as f64, 0.0)
        };
        let x2 = |m: [i64; 2], n: [i64; 2]| blk(m, n) * C64::new((n[1] - m[1]) as f64, 0.0);
        for (m, n) in [
            ([1i64, 0i64], [1i64, 0i64]),
            ([0, 1], [1, 1]),
            ([2, -1], [1, 0]),
        ] {
            // (P A B P)_{m,n} with A = [P,X₁S], B = [P,X₂], summing intermediate cells
            let mut ab = DMatrix::<C64>::zeros(4, 4);
            let mut ba = DMatrix::<C64>::zeros(4, 4);
            for a in cell_range(m, 2) {
                for b in cell_range(a, 2) {
                    for c in cell_range(b, 2) {
                        ab += blk(m, a) * x1s(a, b) * x2(b, c) * blk(c, n);
                        ba += blk(m, a) * x2(a, b) * x1s(b, c) * blk(c, n);
                    }
                }
            }
            let direct = (ab - ba) * i_unit();
            assert!((direct - k.block(m, n)).norm() < 1e-12, "m={m:?} n={n:?}");
        }
    }

    #[test]
    fn spin_commuting_norms() {
        let km = |r| build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, r));
        assert_eq!(spin_commuting_check(&km(0.0)).unwrap(), 0.0);
        assert!(spin_commuting_check(&km(0.05)).unwrap() > 0.0);
        let hv = build_kane_mele(&KaneMeleParams::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(spin_commuting_check(&hv).unwrap(), 0.0);
    }

    #[test]
    fn constant_projector_field_has_zero_chern() {
        let grid = BzGrid::new(6).unwrap();
        let f = FiberField::from_fn(grid, 2, |_| {
            DMatrix::from_diagonal_element(2, 2, C64::new(0.0, 0.0)).map(|z| z) + {
                let mut p = DMatrix::zeros(2, 2);
                p[(0, 0)] = C64::new(1.0, 0.0);
                p
            }
        });
        let c = chern_fhs(&f).unwrap();
        assert_eq!(c.value, 0);
        assert!(c.residual < 1e-14);
    }

    #[test]
    fn spin_sectors_and_orientation() {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.0));
        let inv = invariants(&h, 30, 2, None).unwrap();
        let up = inv.chern_up.unwrap();
        let down = inv.chern_down.unwrap();
        assert_eq!(up.value.abs(), 1);
        assert_eq!(up.value + down.value, 0);
        assert_eq!(inv.chern_total.value, 0);
        assert!(up.residual < 1e-10);

        // the spin-up block alone: Kubo charge response agrees with the plaquette sum
        let sector = h.spin_sector(true).unwrap();
        let (_, _, p) = fermi_projection(&sector, 30, Some(14), 1, None).unwrap();
        let charge = charge_conductivity(p.kernel()).unwrap();
        assert!(
            (charge.value - up.value as f64).abs() < 1e-2,
            "{charge:?} vs {up:?}"
        );
    }
}
