//! Diagonal densities of words in periodic kernels and multiplication operators.
//!
//! An [`Expr`] is a linear combination of products whose factors are periodic
//! kernels or functions of one lattice coordinate (switches, ramps, positions).
//! Compiling merges adjacent kernels, after which every product reads
//!
//! `f₀(m) K⁰ f₁ K¹ f₂ … Kʳ f_{r+1}(m)`
//!
//! and its diagonal block trace at cell `m` is
//! `f₀(m) f_{r+1}(m) Σ_{a,b} tr(K⁰_a K¹_{b-a} K²_{-b}) f₁(m+a) f₂(m+b)`.
//! The coordinate sums collapse onto the (at most two) coordinates the inner
//! functions actually depend on, giving an `m`-independent coefficient table.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::block;
use super::periodic::{compose_periodic, PeriodicKernel};
use super::KernelError;
use crate::lattice_model::{Axis, Offset, SiteProfile, C64};

#[derive(Debug, Clone)]
enum Factor {
    Kernel {
        k: Arc<PeriodicKernel>,
        dagger: bool,
    },
    Site(Axis, SiteProfile),
}

#[derive(Debug, Clone)]
struct Product {
    coeff: C64,
    factors: Vec<Factor>,
}

/// Formal sum of operator words.
#[derive(Debug, Clone)]
pub struct Expr {
    dim: usize,
    terms: Vec<Product>,
}

impl Expr {
    pub fn kernel(k: Arc<PeriodicKernel>) -> Self {
        Self {
            dim: k.dim(),
            terms: vec![Product {
                coeff: C64::new(1.0, 0.0),
                factors: vec![Factor::Kernel { k, dagger: false }],
            }],
        }
    }

    pub fn internal(s: &DMatrix<C64>) -> Self {
        Self::kernel(Arc::new(PeriodicKernel::internal(s)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            terms: vec![Product {
                coeff: C64::new(1.0, 0.0),
                factors: Vec::new(),
            }],
        }
    }

    pub fn site(dim: usize, axis: Axis, profile: SiteProfile) -> Self {
        Self {
            dim,
            terms: vec![Product {
                coeff: C64::new(1.0, 0.0),
                factors: vec![Factor::Site(axis, profile)],
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= c);
        out
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Expr) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Product {
                coeff: t.coeff.conj(),
                factors: t
                    .factors
                    .iter()
                    .rev()
                    .map(|f| match f {
                        Factor::Kernel { k, dagger } => Factor::Kernel {
                            k: k.clone(),
                            dagger: !dagger,
                        },
                        Factor::Site(a, p) => Factor::Site(*a, *p),
                    })
                    .collect(),
            })
            .collect();
        Self {
            dim: self.dim,
            terms,
        }
    }

    /// `self + self†`.
    pub fn plus_adjoint(&self) -> Self {
        self + &self.adjoint()
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Product {
                    coeff: a.coeff * b.coeff,
                    factors,
                });
            }
        }
        Expr {
            dim: self.dim,
            terms,
        }
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        Expr {
            dim: self.dim,
            terms,
        }
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self + &(-rhs)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// One inner coordinate a compiled product depends on.
#[derive(Debug, Clone)]
struct Coord {
    axis: Axis,
    profiles: Vec<SiteProfile>,
    lo: i64,
    hi: i64,
}

impl Coord {
    fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    fn weights(&self, m: Offset) -> Vec<f64> {
        let x = m[self.axis.index()];
        (self.lo..=self.hi)
            .map(|i| self.profiles.iter().map(|p| p.eval(x + i)).product())
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Compiled {
    coeff: C64,
    base: Vec<(Axis, SiteProfile)>,
    coords: Vec<Coord>,
    table: Vec<C64>,
}

impl Compiled {
    fn density(&self, m: Offset) -> C64 {
        let base: f64 = self
            .base
            .iter()
            .map(|(a, p)| p.eval(m[a.index()]))
            .product();
        if base == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let s = match self.coords.as_slice() {
            [] => self.table[0],
            [c] => {
                let w = c.weights(m);
                self.table.iter().zip(&w).map(|(t, x)| t * x).sum()
            }
            [c1, c2] => {
                let w1 = c1.weights(m);
                let w2 = c2.weights(m);
                let n2 = c2.len();
                let mut s = C64::new(0.0, 0.0);
                for (i, x) in w1.iter().enumerate() {
                    if *x == 0.0 {
                        continue;
                    }
                    let row = &self.table[i * n2..(i + 1) * n2];
                    let r: C64 = row.iter().zip(&w2).map(|(t, y)| t * y).sum();
                    s += r * x;
                }
                s
            }
            _ => unreachable!("at most two coordinates"),
        };
        self.coeff * base * s
    }

    /// Interval `(lo, hi)` such that the density is constant in `m_axis`
    /// for `m_axis < lo` and for `m_axis ≥ hi`.
    fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        let mut widen = |t: (i64, i64), shift_lo: i64, shift_hi: i64| {
            lo = lo.min(t.0 - shift_hi);
            hi = hi.max(t.1 - shift_lo);
        };
        for (a, p) in &self.base {
            if *a == axis {
                widen(p.transition()?, 0, 0);
            }
        }
        for c in &self.coords {
            if c.axis == axis {
                for p in &c.profiles {
                    widen(p.transition()?, c.lo, c.hi);
                }
            }
        }
        if lo > hi {
            Some((0, 0))
        } else {
            Some((lo, hi))
        }
    }
}

/// Compiled [`Expr`] whose diagonal block traces can be evaluated cell by cell.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    products: Vec<Compiled>,
}

type RunKey = Vec<(usize, bool)>;

struct Compiler {
    dim: usize,
    adjoints: HashMap<usize, Arc<PeriodicKernel>>,
    runs: HashMap<RunKey, Arc<PeriodicKernel>>,
}

impl Compiler {
    fn resolve(&mut self, k: &Arc<PeriodicKernel>, dagger: bool) -> Arc<PeriodicKernel> {
        if !dagger {
            return k.clone();
        }
        let key = Arc::as_ptr(k) as usize;
        self.adjoints
            .entry(key)
            .or_insert_with(|| Arc::new(k.adjoint()))
            .clone()
    }

    /// Product of a run of adjacent kernels, memoised by prefix.
    fn run(&mut self, run: &[(Arc<PeriodicKernel>, bool)]) -> Arc<PeriodicKernel> {
        let key: RunKey = run
            .iter()
            .map(|(k, d)| (Arc::as_ptr(k) as usize, *d))
            .collect();
        if let Some(k) = self.runs.get(&key) {
            return k.clone();
        }
        let out = if run.len() == 1 {
            let (k, d) = &run[0];
            let k = self.resolve(k, *d);
            Arc::new(linear(&k))
        } else {
            let head = self.run(&run[..run.len() - 1]);
            let (k, d) = &run[run.len() - 1];
            let tail = Arc::new(linear(&self.resolve(k, *d)));
            Arc::new(compose_periodic(&head, &tail, None))
        };
        self.runs.insert(key, out.clone());
        out
    }

    fn compile(&mut self, p: &Product) -> Result<Compiled, KernelError> {
        let mut base: Vec<(Axis, SiteProfile)> = Vec::new();
        let mut kernels: Vec<Arc<PeriodicKernel>> = Vec::new();
        let mut groups: Vec<Vec<(Axis, SiteProfile)>> = Vec::new();
        let mut run: Vec<(Arc<PeriodicKernel>, bool)> = Vec::new();
        let mut pending: Vec<(Axis, SiteProfile)> = Vec::new();

        for f in &p.factors {
            match f {
                Factor::Kernel { k, dagger } => {
                    if run.is_empty() && !kernels.is_empty() {
                        groups.push(std::mem::take(&mut pending));
                    }
                    run.push((k.clone(), *dagger));
                }
                Factor::Site(a, prof) => {
                    if !run.is_empty() {
                        kernels.push(self.run(&run));
                        run.clear();
                    }
                    if kernels.is_empty() {
                        base.push((*a, *prof));
                    } else {
                        pending.push((*a, *prof));
                    }
                }
            }
        }
        if !run.is_empty() {
            kernels.push(self.run(&run));
        }
        // functions after the last kernel act at the diagonal cell again
        base.append(&mut pending);
        if kernels.is_empty() {
            kernels.push(Arc::new(PeriodicKernel::identity(self.dim)));
        }
        if kernels.len() > 3 {
            return Err(KernelError::ExpressionTooComplex {
                reason: format!("{} separated kernel runs (at most 3)", kernels.len()),
            });
        }

        let mut coords: Vec<(usize, Coord)> = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            for axis in [Axis::One, Axis::Two] {
                let profiles: Vec<SiteProfile> = g
                    .iter()
                    .filter(|(a, _)| *a == axis)
                    .map(|(_, p)| *p)
                    .collect();
                if profiles.is_empty() {
                    continue;
                }
                let r = kernels[if gi == 0 { 0 } else { kernels.len() - 1 }].radius() as i64;
                coords.push((
                    gi,
                    Coord {
                        axis,
                        profiles,
                        lo: -r,
                        hi: r,
                    },
                ));
            }
        }
        if coords.len() > 2 {
            return Err(KernelError::ExpressionTooComplex {
                reason: format!("{} inner coordinates (at most 2)", coords.len()),
            });
        }
        let table = coefficient_table(&kernels, &coords);
        Ok(Compiled {
            coeff: p.coeff,
            base,
            coords: coords.into_iter().map(|(_, c)| c).collect(),
            table,
        })
    }
}

fn linear(k: &PeriodicKernel) -> PeriodicKernel {
    if k.period().is_none() {
        return k.clone();
    }
    let mut out = PeriodicKernel::zeros(k.dim(), k.radius()).with_error_bound(k.error_bound());
    for (n, b) in k.nonzero_blocks() {
        out.set_block(n, b);
    }
    out
}

/// Sums `tr(K⁰_a K¹_{b-a} K²_{-b})` (or the shorter chains) onto the used
/// coordinates. Partial tables are produced per `a` in parallel and added in a
/// fixed order so results do not depend on scheduling.
fn coefficient_table(kernels: &[Arc<PeriodicKernel>], coords: &[(usize, Coord)]) -> Vec<C64> {
    let d = kernels[0].dim();
    let size: usize = coords.iter().map(|(_, c)| c.len()).product();
    let slot = |a: Offset, b: Offset| -> usize {
        let mut s = 0usize;
        for (g, c) in coords {
            let v = if *g == 0 { a } else { b }[c.axis.index()];
            s = s * c.len() + (v - c.lo) as usize;
        }
        s
    };
    match kernels.len() {
        1 => vec![kernels[0].trace_at_origin()],
        2 => {
            let mut t = vec![C64::new(0.0, 0.0); size];
            for (a, ka) in kernels[0].nonzero_blocks() {
                if let Some(kb) = kernels[1].block([-a[0], -a[1]]) {
                    t[slot(a, a)] += block::trace_of_product(ka, kb, d);
                }
            }
            t
        }
        _ => {
            let (k0, k1, k2) = (&kernels[0], &kernels[1], &kernels[2]);
            let firsts: Vec<(Offset, &[C64])> = k0.nonzero_blocks().collect();
            let lasts: Vec<(Offset, &[C64])> = k2
                .nonzero_blocks()
                .map(|(n, b)| ([-n[0], -n[1]], b))
                .collect();
            let r1 = k1.radius() as i64;
            let partials: Vec<Vec<(usize, C64)>> = firsts
                .par_iter()
                .map(|(a, ka)| {
                    let mut acc: HashMap<usize, C64> = HashMap::new();
                    let mut order: Vec<usize> = Vec::new();
                    let mut tmp = vec![C64::new(0.0, 0.0); d * d];
                    for (b, kc) in &lasts {
                        let mid = [b[0] - a[0], b[1] - a[1]];
                        if mid[0].abs() > r1 || mid[1].abs() > r1 {
                            continue;
                        }
                        let kb = k1.block(mid).unwrap();
                        if block::is_zero(kb) {
                            continue;
                        }
                        tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        block::gemm_acc(&mut tmp, ka, kb, d);
                        let v = block::trace_of_product(&tmp, kc, d);
                        let s = slot(*a, *b);
                        acc.entry(s).and_modify(|x| *x += v).or_insert_with(|| {
                            order.push(s);
                            v
                        });
                    }
                    order.into_iter().map(|s| (s, acc[&s])).collect()
                })
                .collect();
            let mut t = vec![C64::new(0.0, 0.0); size];
            for part in partials {
                for (s, v) in part {
                    t[s] += v;
                }
            }
            t
        }
    }
}

impl LocalOperator {
    pub fn compile(expr: &Expr) -> Result<Self, KernelError> {
        let mut c = Compiler {
            dim: expr.dim,
            adjoints: HashMap::new(),
            runs: HashMap::new(),
        };
        let products = expr
            .terms
            .iter()
            .map(|p| c.compile(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { products })
    }

    /// `tr(A_{m,m})`.
    pub fn density(&self, m: Offset) -> C64 {
        self.products.iter().map(|p| p.density(m)).sum()
    }

    /// See [`crate::trace_functionals::DiagonalTrace::constant_beyond`].
    pub fn constant_beyond(&self, axis: Axis) -> Option<(i64, i64)> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for p in &self.products {
            let (a, b) = p.constant_beyond(axis)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Some(if lo > hi { (0, 0) } else { (lo, hi) })
    }

    /// Largest coefficient-table extent along `axis` among the products.
    pub fn reach(&self, axis: Axis) -> i64 {
        self.products
            .iter()
            .flat_map(|p| p.coords.iter())
            .filter(|c| c.axis == axis)
            .map(|c| c.hi.max(-c.lo))
            .max()
            .unwrap_or(0)
    }
}
