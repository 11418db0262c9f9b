//! Trace-like functionals on ℤ²: trace per unit volume, principal value trace
//! over centred squares and directional principal value trace over stripes.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel_algebra::{
    compose_periodic, Expr, HolmgrenNorm, KernelError, LocalOperator, OffsetPeriodicKernel,
    PeriodicKernel, WindowKernel,
};
use crate::lattice_model::{Axis, Offset, SiteProfile, SwitchFunction, C64};

/// Absolute increment tolerance of the convergence verdict.
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Densities below this are treated as vanishing when checking transverse tails.
pub const VANISHING_DENSITY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("L_max must be odd and positive, got {l_max}")]
    BadLength { l_max: usize },
    #[error("transverse tail not controlled: density {density:.3e} at the cutoff {cutoff}")]
    TailNotControlled { density: f64, cutoff: i64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Operators whose diagonal block traces can be evaluated cell by cell.
pub trait DiagonalTrace: Sync {
    /// `tr(A_{m,m})`.
    fn diagonal_trace(&self, m: Offset) -> C64;

    /// `(lo, hi)` such that the diagonal is constant in `m_axis` for
    /// `m_axis < lo` and for `m_axis ≥ hi`; `None` when not known.
    fn constant_beyond(&self, _axis: Axis) -> Option<(i64, i64)> {
        None
    }

    /// Error bound attached to the operator itself.
    fn error_bound(&self) -> f64 {
        0.0
    }
}

impl DiagonalTrace for PeriodicKernel {
    fn diagonal_trace(&self, _m: Offset) -> C64 {
        self.trace_at_origin()
    }
    fn constant_beyond(&self, _axis: Axis) -> Option<(i64, i64)> {
        Some((0, 0))
    }
    fn error_bound(&self) -> f64 {
        PeriodicKernel::error_bound(self)
    }
}

impl DiagonalTrace for OffsetPeriodicKernel {
    fn diagonal_trace(&self, m: Offset) -> C64 {
        OffsetPeriodicKernel::diagonal_trace(self, m)
    }
    fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        if self.correction_part().trace_at_origin() == C64::new(0.0, 0.0)
            || axis != self.weight().odd_axis()
        {
            Some((0, 0))
        } else {
            None
        }
    }
    fn error_bound(&self) -> f64 {
        OffsetPeriodicKernel::error_bound(self)
    }
}

impl DiagonalTrace for WindowKernel {
    fn diagonal_trace(&self, m: Offset) -> C64 {
        WindowKernel::diagonal_trace(self, m)
    }
    fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        let i = axis.index();
        Some((self.rows().lo[i], self.rows().hi[i] + 1))
    }
    fn error_bound(&self) -> f64 {
        self.tail_bound()
    }
}

impl DiagonalTrace for LocalOperator {
    fn diagonal_trace(&self, m: Offset) -> C64 {
        self.density(m)
    }
    fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        LocalOperator::constant_beyond(self, axis)
    }
}

/// Diagonal given cell by cell on a finite set, zero elsewhere.
#[derive(Debug, Clone, Default)]
pub struct FiniteDiagonal {
    values: BTreeMap<Offset, C64>,
}

impl FiniteDiagonal {
    pub fn new(values: impl IntoIterator<Item = (Offset, C64)>) -> Self {
        Self {
            values: values.into_iter().collect(),
        }
    }

    pub fn total(&self) -> C64 {
        self.values.values().sum()
    }
}

impl DiagonalTrace for FiniteDiagonal {
    fn diagonal_trace(&self, m: Offset) -> C64 {
        self.values.get(&m).copied().unwrap_or_default()
    }
    fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        let i = axis.index();
        let lo = self.values.keys().map(|m| m[i]).min().unwrap_or(0);
        let hi = self.values.keys().map(|m| m[i]).max().unwrap_or(0);
        Some((lo, hi + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverging,
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Centred `L×L` squares.
    Volume,
    /// Stripes `|m_axis| ≤ L/2`.
    Stripe(Axis),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub l: usize,
    pub value: C64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub kind: SeriesKind,
    pub samples: Vec<TraceSample>,
    pub verdict: Verdict,
}

impl TraceSeries {
    fn new(kind: SeriesKind, samples: Vec<TraceSample>) -> Self {
        let verdict = verdict(&samples);
        Self {
            kind,
            samples,
            verdict,
        }
    }

    /// Value at the largest `L`.
    pub fn value(&self) -> C64 {
        self.samples.last().map(|s| s.value).unwrap_or_default()
    }

    pub fn tail_bound(&self) -> f64 {
        self.samples.last().map(|s| s.tail_bound).unwrap_or(0.0)
    }

    /// Largest of the last three increments, a Cauchy-type remainder estimate.
    pub fn last_increment(&self) -> f64 {
        increments(&self.samples)
            .iter()
            .rev()
            .take(3)
            .fold(0.0, |a: f64, &b| a.max(b))
    }

    /// CSV with header `L,value_re,value_im,tail_bound`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        self.write_csv_with_header(w, ["L", "value_re", "value_im", "tail_bound"])
    }

    pub fn write_csv_with_header<W: Write>(&self, w: W, header: [&str; 4]) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for s in &self.samples {
            out.write_record([
                s.l.to_string(),
                format!("{:e}", s.value.re),
                format!("{:e}", s.value.im),
                format!("{:e}", s.tail_bound),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn increments(samples: &[TraceSample]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| (w[1].value - w[0].value).norm())
        .collect()
}

fn verdict(samples: &[TraceSample]) -> Verdict {
    let inc = increments(samples);
    let tail = samples.last().map(|s| s.tail_bound).unwrap_or(0.0);
    let last: Vec<f64> = inc.iter().rev().take(3).rev().copied().collect();
    if last.iter().all(|&d| d <= CONVERGENCE_TOL + tail) {
        Verdict::Converged
    } else if last.len() >= 2 && last.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)) {
        Verdict::Diverging
    } else {
        Verdict::Oscillating
    }
}

fn check_length(l_max: usize) -> Result<(), TraceError> {
    if l_max == 0 || l_max.is_multiple_of(2) {
        return Err(TraceError::BadLength { l_max });
    }
    Ok(())
}

/// Trace per unit volume of a periodic operator: `tr(A_{0,0})`.
pub fn tuv_periodic(a: &PeriodicKernel) -> C64 {
    a.trace_at_origin()
}

/// Trace per unit volume of a kernel periodic up to an odd correction.
pub fn tuv_offset(a: &OffsetPeriodicKernel) -> Result<C64, TraceError> {
    Ok(a.tuv()?)
}

/// `Tr(χ_L A χ_L)` for odd `L ≤ l_max`.
pub fn pv_trace<A: DiagonalTrace + ?Sized>(a: &A, l_max: usize) -> Result<TraceSeries, TraceError> {
    check_length(l_max)?;
    let h = (l_max / 2) as i64;
    // ring k holds the cells with ‖m‖∞ = k
    let rings: Vec<C64> = (0..=h)
        .into_par_iter()
        .map(|k| ring(k).into_iter().map(|m| a.diagonal_trace(m)).sum())
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    let bound = a.error_bound();
    let samples = rings
        .iter()
        .enumerate()
        .map(|(k, r)| {
            acc += r;
            TraceSample {
                l: 2 * k + 1,
                value: acc,
                tail_bound: bound,
            }
        })
        .collect();
    Ok(TraceSeries::new(SeriesKind::Volume, samples))
}

fn ring(k: i64) -> Vec<Offset> {
    if k == 0 {
        return vec![[0, 0]];
    }
    let mut out = Vec::with_capacity(8 * k as usize);
    for b in -k..=k {
        out.push([-k, b]);
        out.push([k, b]);
    }
    for a in (-k + 1)..k {
        out.push([a, -k]);
        out.push([a, k]);
    }
    out
}

/// Partial traces over stripes `|m_j| ≤ L/2`, `|m_other| ≤ cutoff`.
///
/// Without an explicit cutoff one is chosen beyond which the diagonal is known
/// to be constant along the transverse axis. In either case the diagonal just
/// outside the cutoff must vanish, otherwise the transverse sum is not under
/// control and [`TraceError::TailNotControlled`] is returned.
pub fn jpv_trace<A: DiagonalTrace + ?Sized>(
    a: &A,
    axis: Axis,
    l_max: usize,
    transverse_cutoff: Option<usize>,
) -> Result<TraceSeries, TraceError> {
    check_length(l_max)?;
    let j = axis.index();
    let o = axis.other().index();
    let h = (l_max / 2) as i64;
    let known = a.constant_beyond(axis.other());
    let cutoff = match (transverse_cutoff, known) {
        (Some(c), _) => c as i64,
        (None, Some((lo, hi))) => (-lo).max(hi - 1).max(0),
        (None, None) => 64,
    };
    let cell = |mj: i64, mo: i64| {
        let mut m = [0, 0];
        m[j] = mj;
        m[o] = mo;
        m
    };

    // transverse tail: cells just outside the cutoff on every stripe row
    let edge: f64 = (-h..=h)
        .map(|mj| {
            a.diagonal_trace(cell(mj, cutoff + 1))
                .norm()
                .max(a.diagonal_trace(cell(mj, -cutoff - 1)).norm())
        })
        .fold(0.0, f64::max);
    if edge > VANISHING_DENSITY {
        return Err(TraceError::TailNotControlled {
            density: edge,
            cutoff,
        });
    }
    let beyond_is_constant =
        matches!(known, Some((lo, hi)) if -cutoff - 1 < lo && cutoff + 1 >= hi);
    // an unverified but vanishing edge is charged once per stripe row
    let tail = if beyond_is_constant {
        0.0
    } else {
        edge * (2 * h + 1) as f64
    };

    let columns: Vec<C64> = (-h..=h)
        .into_par_iter()
        .map(|mj| {
            (-cutoff..=cutoff)
                .map(|mo| a.diagonal_trace(cell(mj, mo)))
                .sum()
        })
        .collect();
    let bound = a.error_bound() + tail;
    let mut samples = Vec::with_capacity(h as usize + 1);
    let mut acc = columns[h as usize];
    samples.push(TraceSample {
        l: 1,
        value: acc,
        tail_bound: bound,
    });
    for k in 1..=h {
        acc += columns[(h - k) as usize] + columns[(h + k) as usize];
        samples.push(TraceSample {
            l: (2 * k + 1) as usize,
            value: acc,
            tail_bound: bound,
        });
    }
    Ok(TraceSeries::new(SeriesKind::Stripe(axis), samples))
}

/// Square partial traces divided by the volume, `Tr(χ_L A χ_L)/L²`.
pub fn volume_averages<A: DiagonalTrace + ?Sized>(
    a: &A,
    l_max: usize,
) -> Result<Vec<(usize, C64)>, TraceError> {
    Ok(pv_trace(a, l_max)?
        .samples
        .iter()
        .map(|s| (s.l, s.value / (s.l * s.l) as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicityCheck {
    pub residual: f64,
    pub bound: f64,
}

/// `|τ(AB) - τ(BA)|` together with the truncation bound it is compared against.
pub fn cyclicity_residual(a: &PeriodicKernel, b: &PeriodicKernel) -> CyclicityCheck {
    let ab = compose_periodic(a, b, Some(0)).trace_at_origin();
    let ba = compose_periodic(b, a, Some(0)).trace_at_origin();
    let bound =
        2.0 * (a.error_bound() * b.holmgren_norm() + a.holmgren_norm() * b.error_bound()) + 1e-13;
    CyclicityCheck {
        residual: (ab - ba).norm(),
        bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub bound: f64,
}

impl IdentityCheck {
    fn new(lhs: C64, rhs: C64, bound: f64) -> Self {
        Self {
            lhs,
            rhs,
            residual: (lhs - rhs).norm(),
            bound,
        }
    }

    pub fn holds(&self) -> bool {
        self.residual <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationChecks {
    /// `Tr(A[B,Λ₂]C) = -Tr(A X₂ B χ_{m₂=0} C)` with `A = [P,Λ₁]S`, `B = 1-P`,
    /// `C` the indicator of `|m₁| ≤ w`.
    pub single_switch: IdentityCheck,
    /// `Tr([P,Λ₁] S(1-P) [P,Λ₂]) = -tr(P X₁ S(1-P) X₂ P)_{0,0}`.
    pub double_switch: IdentityCheck,
    /// The double-switch left side with both switches moved by three cells.
    pub shifted_double_switch: IdentityCheck,
}

/// Evaluates both sides of the switch-to-position identities for a periodic
/// kernel `p` and internal matrix `s`.
///
/// Left sides are square partial traces up to `window` (odd); the attached
/// bound is the last increment of that series plus a rounding allowance.
pub fn verify_localization_identities(
    p: &PeriodicKernel,
    s: &DMatrix<C64>,
    lambda1: &SwitchFunction,
    lambda2: &SwitchFunction,
    window: usize,
) -> Result<LocalizationChecks, TraceError> {
    check_length(window)?;
    let d = p.dim();
    let ep = Expr::kernel(Arc::new(p.clone()));
    let es = Expr::internal(s);
    let perp = &Expr::identity(d) - &ep;
    let site = |sw: &SwitchFunction| Expr::site(d, sw.axis, SiteProfile::from(*sw));
    let x1 = Expr::site(d, Axis::One, SiteProfile::Position);
    let x2 = Expr::site(d, Axis::Two, SiteProfile::Position);
    let scale = p.holmgren_norm().max(1.0).powi(4);

    let lhs_of = |expr: &Expr| -> Result<(C64, f64), TraceError> {
        let op = LocalOperator::compile(expr)?;
        let series = pv_trace(&op, window)?;
        Ok((series.value(), series.last_increment()))
    };

    // single switch
    let w = (window / 4) as i64;
    let strip = Expr::site(d, Axis::One, SiteProfile::Indicator { lo: -w, hi: w });
    let line = Expr::site(d, Axis::Two, SiteProfile::Indicator { lo: 0, hi: 0 });
    let a = &ep.commutator(&site(lambda1)) * &es;
    let lhs_expr = &(&a * &perp.commutator(&site(lambda2))) * &strip;
    let (lhs, inc) = lhs_of(&lhs_expr)?;
    let rhs_expr = &(&(&(&a * &x2) * &perp) * &line) * &strip;
    let rhs = -pv_trace(&LocalOperator::compile(&rhs_expr)?, window)?.value();
    let single_switch = IdentityCheck::new(lhs, rhs, inc + 1e-12 * scale);

    // double switch
    let double = |l1: &SwitchFunction, l2: &SwitchFunction| -> Result<(C64, f64), TraceError> {
        let e = &(&(&ep.commutator(&site(l1)) * &es) * &perp) * &ep.commutator(&site(l2));
        lhs_of(&e)
    };
    let (lhs, inc) = double(lambda1, lambda2)?;
    let rhs_expr = &(&(&(&(&ep * &x1) * &es) * &perp) * &x2) * &ep;
    let rhs = -LocalOperator::compile(&rhs_expr)?.density([0, 0]);
    let double_switch = IdentityCheck::new(lhs, rhs, inc + 1e-12 * scale);
    let (lhs, inc) = double(&lambda1.shifted(3), &lambda2.shifted(3))?;
    let shifted_double_switch = IdentityCheck::new(lhs, rhs, inc + 1e-12 * scale);

    Ok(LocalizationChecks {
        single_switch,
        double_switch,
        shifted_double_switch,
    })
}
