//! Bloch diagonalization on a Brillouin-zone grid, gap detection and synthesis
//! of the real-space Fermi projection kernel.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel_algebra::{block, tail_bound, PeriodicKernel};
use crate::lattice_model::{bloch_fiber, HoppingKernel, C64};

pub const GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("grid needs at least 2 points per axis, got {m}")]
    GridTooSmall { m: usize },
    #[error("grid size {m} is not a multiple of 3")]
    GridMissesDirac { m: usize },
    #[error("filled_bands = {filled} must lie in [1, {dim})")]
    FillingOutOfRange { filled: usize, dim: usize },
    #[error("spectral gap closed: lower band top {lower:.6e}, upper band bottom {upper:.6e}")]
    GapClosed { lower: f64, upper: f64 },
    #[error("eigenvalue {energy:.6e} at k-index {k:?} lies within tolerance of mu = {mu:.6e}")]
    FermiLevelInBand { k: [usize; 2], energy: f64, mu: f64 },
    #[error("mu = {mu} is outside the gap ({lower}, {upper})")]
    MuOutsideGap { mu: f64, lower: f64, upper: f64 },
    #[error("truncation radius {r} is not below M/2 for M = {m}")]
    AliasingRisk { r: usize, m: usize },
    #[error("decay fit needs radius ≥ 4, got {r}")]
    FitTooShort { r: usize },
    #[error("all off-diagonal blocks vanish: no decay length to fit")]
    DegenerateFit,
    #[error("kernel does not decay (fitted slope {slope:.3e})")]
    NotDecaying { slope: f64 },
}

/// Uniform grid `k_{ij} = (2πi/M, 2πj/M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BzGrid {
    m: usize,
}

impl BzGrid {
    pub fn new(m: usize) -> Result<Self, SpectralError> {
        if m < 2 {
            return Err(SpectralError::GridTooSmall { m });
        }
        Ok(Self { m })
    }

    /// Grid that contains the honeycomb Dirac momenta.
    pub fn with_dirac_points(m: usize) -> Result<Self, SpectralError> {
        let g = Self::new(m)?;
        if !m.is_multiple_of(3) {
            return Err(SpectralError::GridMissesDirac { m });
        }
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let s = 2.0 * PI / self.m as f64;
        [s * i as f64, s * j as f64]
    }

    /// Grid indices in row-major order.
    pub fn indices(&self) -> Vec<[usize; 2]> {
        let m = self.m;
        (0..m).flat_map(|i| (0..m).map(move |j| [i, j])).collect()
    }
}

/// Ascending eigenvalues per grid point, rows in [`BzGrid::indices`] order.
#[derive(Debug, Clone)]
pub struct BandTable {
    grid: BzGrid,
    dim: usize,
    values: Vec<f64>,
}

impl BandTable {
    pub fn grid(&self) -> BzGrid {
        self.grid
    }

    pub fn n_bands(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let r = i * self.grid.m + j;
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = ([usize; 2], &[f64])> {
        self.grid
            .indices()
            .into_iter()
            .zip(self.values.chunks(self.dim))
    }

    /// Smallest direct gap between bands `band` and `band + 1` (0-based).
    pub fn min_direct_gap(&self, band: usize) -> f64 {
        self.values
            .chunks(self.dim)
            .map(|e| e[band + 1] - e[band])
            .fold(f64::INFINITY, f64::min)
    }
}

fn sorted_eigenvalues(h: DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn band_spectrum(kernel: &HoppingKernel, grid: BzGrid) -> BandTable {
    let values: Vec<f64> = grid
        .indices()
        .par_iter()
        .flat_map_iter(|&[i, j]| sorted_eigenvalues(bloch_fiber(kernel, grid.point(i, j))))
        .collect();
    BandTable {
        grid,
        dim: kernel.dim(),
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapInfo {
    /// Top of the filled bands over the grid.
    pub a: f64,
    /// Bottom of the empty bands over the grid.
    pub b: f64,
    pub mu: f64,
    pub filled_bands: usize,
}

impl GapInfo {
    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Same gap with `mu` placed at fraction `t` of the way from `a` to `b`.
    pub fn with_mu_fraction(&self, t: f64) -> GapInfo {
        GapInfo {
            mu: self.a + t * (self.b - self.a),
            ..*self
        }
    }
}

pub fn detect_gap(
    bands: &BandTable,
    filled_bands: usize,
    mu: Option<f64>,
) -> Result<GapInfo, SpectralError> {
    detect_gap_with_tolerance(bands, filled_bands, mu, GAP_TOLERANCE)
}

pub fn detect_gap_with_tolerance(
    bands: &BandTable,
    filled_bands: usize,
    mu: Option<f64>,
    tolerance: f64,
) -> Result<GapInfo, SpectralError> {
    if filled_bands == 0 || filled_bands >= bands.dim {
        return Err(SpectralError::FillingOutOfRange {
            filled: filled_bands,
            dim: bands.dim,
        });
    }
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
    for e in bands.values.chunks(bands.dim) {
        a = a.max(e[filled_bands - 1]);
        b = b.min(e[filled_bands]);
    }
    if b - a <= tolerance {
        return Err(SpectralError::GapClosed { lower: a, upper: b });
    }
    let mu = mu.unwrap_or(0.5 * (a + b));
    if !(a < mu && mu < b) {
        return Err(SpectralError::MuOutsideGap {
            mu,
            lower: a,
            upper: b,
        });
    }
    Ok(GapInfo {
        a,
        b,
        mu,
        filled_bands,
    })
}

/// Fiber projectors `P(k)` on a grid, rows in [`BzGrid::indices`] order.
#[derive(Debug, Clone)]
pub struct FiberField {
    grid: BzGrid,
    dim: usize,
    fibers: Vec<DMatrix<C64>>,
}

impl FiberField {
    pub fn from_fn(grid: BzGrid, dim: usize, f: impl Fn([f64; 2]) -> DMatrix<C64> + Sync) -> Self {
        let fibers = grid
            .indices()
            .par_iter()
            .map(|&[i, j]| f(grid.point(i, j)))
            .collect();
        Self { grid, dim, fibers }
    }

    pub fn grid(&self) -> BzGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> &DMatrix<C64> {
        &self.fibers[(i % self.grid.m) * self.grid.m + (j % self.grid.m)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<C64>> {
        self.fibers.iter()
    }

    /// `max_k ‖P(k)² - P(k)‖` and `max_k ‖P(k)† - P(k)‖` (max-abs entries).
    pub fn projector_residuals(&self) -> (f64, f64) {
        self.fibers.iter().fold((0.0f64, 0.0f64), |(x, y), p| {
            let idem = (p * p - p).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            let herm = (p.adjoint() - p)
                .iter()
                .fold(0.0f64, |a, z| a.max(z.norm()));
            (x.max(idem), y.max(herm))
        })
    }

    /// Traces `tr P(k)` in grid order.
    pub fn ranks(&self) -> Vec<f64> {
        self.fibers.iter().map(|p| p.trace().re).collect()
    }
}

/// Spectral projector onto eigenvalues below `mu`.
pub fn fiber_projector(h: DMatrix<C64>, mu: f64, tolerance: f64) -> Result<DMatrix<C64>, f64> {
    let d = h.nrows();
    let eig = h.symmetric_eigen();
    let mut p = DMatrix::zeros(d, d);
    for (idx, &e) in eig.eigenvalues.iter().enumerate() {
        if (e - mu).abs() <= tolerance {
            return Err(e);
        }
        if e < mu {
            let v = eig.eigenvectors.column(idx);
            p += v * v.adjoint();
        }
    }
    Ok(p)
}

pub fn fermi_fibers(
    kernel: &HoppingKernel,
    grid: BzGrid,
    gap: &GapInfo,
) -> Result<FiberField, SpectralError> {
    let results: Vec<Result<DMatrix<C64>, SpectralError>> = grid
        .indices()
        .par_iter()
        .map(|&[i, j]| {
            let h = bloch_fiber(kernel, grid.point(i, j));
            fiber_projector(h, gap.mu, GAP_TOLERANCE).map_err(|energy| {
                SpectralError::FermiLevelInBand {
                    k: [i, j],
                    energy,
                    mu: gap.mu,
                }
            })
        })
        .collect();
    let fibers = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(FiberField {
        grid,
        dim: kernel.dim(),
        fibers,
    })
}

/// Envelope fit `‖P_{0,n}‖ ≈ C e^{-‖n‖₁/ζ}` over shell maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Smallest constant with `‖P_{0,n}‖ ≤ C e^{-‖n‖₁/ζ}` on every stored block.
    pub c: f64,
    pub zeta: f64,
    pub r_squared: f64,
    /// Intercept of the regression line, `log C_fit`.
    pub log_c_fit: f64,
    /// `(‖n‖₁, max block norm)` for the fitted shells.
    pub shells: Vec<(usize, f64)>,
}

impl DecayFit {
    pub fn tail(&self, radius: usize) -> f64 {
        tail_bound(self.c, self.zeta, radius)
    }
}

/// Shell-maximum fit over `2 ≤ ‖n‖₁ ≤ R`.
pub fn decay_profile(kernel: &PeriodicKernel) -> Result<DecayFit, SpectralError> {
    let r = kernel.radius();
    if r < 4 {
        return Err(SpectralError::FitTooShort { r });
    }
    let norms: Vec<(usize, f64)> = kernel
        .offsets()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| {
            let l1 = (n[0].abs() + n[1].abs()) as usize;
            (
                l1,
                block::spectral_norm(kernel.block(n).unwrap(), kernel.dim()),
            )
        })
        .collect();
    if norms.iter().all(|&(l1, x)| l1 == 0 || x < 1e-15) {
        return Err(SpectralError::DegenerateFit);
    }
    let mut shell = vec![0.0f64; r + 1];
    for &(l1, x) in &norms {
        if l1 <= r {
            shell[l1] = shell[l1].max(x);
        }
    }
    let shells: Vec<(usize, f64)> = (2..=r)
        .map(|s| (s, shell[s]))
        .filter(|&(_, x)| x > 0.0)
        .collect();
    if shells.len() < 2 {
        return Err(SpectralError::DegenerateFit);
    }
    let n = shells.len() as f64;
    let xs: Vec<f64> = shells.iter().map(|&(s, _)| s as f64).collect();
    let ys: Vec<f64> = shells.iter().map(|&(_, x)| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(SpectralError::NotDecaying { slope });
    }
    let zeta = -1.0 / slope;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    let c = norms
        .iter()
        .map(|&(l1, x)| x * (l1 as f64 / zeta).exp())
        .fold(0.0f64, f64::max);
    Ok(DecayFit {
        c,
        zeta,
        r_squared,
        log_c_fit: my - slope * mx,
        shells,
    })
}

/// Truncated real-space Fermi projection with its provenance.
#[derive(Debug, Clone)]
pub struct FermiProjectionKernel {
    kernel: PeriodicKernel,
    grid_m: usize,
    mu: f64,
    filled_bands: usize,
    decay: Option<DecayFit>,
}

impl FermiProjectionKernel {
    pub fn kernel(&self) -> &PeriodicKernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> PeriodicKernel {
        self.kernel
    }

    pub fn radius(&self) -> usize {
        self.kernel.radius()
    }

    pub fn grid_m(&self) -> usize {
        self.grid_m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn filled_bands(&self) -> usize {
        self.filled_bands
    }

    /// `None` in the atomic limit (no off-diagonal blocks) or for short kernels.
    pub fn decay(&self) -> Option<&DecayFit> {
        self.decay.as_ref()
    }

    /// Estimated mass of the blocks lost to truncation and grid aliasing.
    pub fn tail_estimate(&self) -> f64 {
        self.kernel.error_bound()
    }

    /// Whether the kernel holds every offset of an `M×M` torus.
    pub fn is_torus_complete(&self) -> bool {
        self.kernel.period().is_some()
    }

    /// `max_{‖n‖∞ ≤ R/2} ‖(P·P - P)_{0,n}‖` (max-abs entries).
    pub fn idempotency_residual(&self) -> f64 {
        let p = &self.kernel;
        let half = p.radius() / 2;
        let pp = crate::kernel_algebra::compose_periodic(p, p, Some(half));
        pp.truncated(half).max_abs_diff(&p.truncated(half))
    }
}

/// Default radius `min(M/2 - 1, ⌈36 ζ⌉)`.
pub fn default_radius(m: usize, zeta: Option<f64>) -> usize {
    let cap = (m / 2).saturating_sub(1);
    match zeta {
        Some(z) if z > 0.0 => cap.min((36.0 * z).ceil() as usize),
        _ => cap,
    }
}

/// `P_{0,n} = M⁻² Σ_k e^{-ik·n} P(k)` on `‖n‖∞ ≤ R`.
///
/// With odd `M` and `2R + 1 = M` every torus offset is kept and the kernel is
/// marked cyclic; its algebra is then exactly that of the `M×M` torus.
pub fn projection_kernel(
    fibers: &FiberField,
    r: usize,
    mu: f64,
    filled_bands: usize,
) -> Result<FermiProjectionKernel, SpectralError> {
    let m = fibers.grid.m;
    if 2 * r >= m {
        return Err(SpectralError::AliasingRisk { r, m });
    }
    let d = fibers.dim;
    let dd = d * d;
    let ri = r as i64;
    let phase: Vec<C64> = (0..m)
        .map(|t| C64::from_polar(1.0, -2.0 * PI * t as f64 / m as f64))
        .collect();
    let ph = |k: usize, n: i64| phase[((k as i64 * n).rem_euclid(m as i64)) as usize];
    let flat: Vec<Vec<C64>> = fibers.fibers.iter().map(block::from_matrix).collect();

    // stage 1: transform along the first momentum index
    let partial: Vec<Vec<C64>> = (-ri..=ri)
        .into_par_iter()
        .map(|n1| {
            let mut q = vec![C64::new(0.0, 0.0); m * dd];
            for i in 0..m {
                let w = ph(i, n1);
                for j in 0..m {
                    let src = &flat[i * m + j];
                    let dst = &mut q[j * dd..(j + 1) * dd];
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += w * y;
                    }
                }
            }
            q
        })
        .collect();

    let width = 2 * r + 1;
    let norm = 1.0 / (m * m) as f64;
    let blocks: Vec<Vec<C64>> = (0..width * width)
        .into_par_iter()
        .map(|slot| {
            let a = slot / width;
            let n2 = (slot % width) as i64 - ri;
            let q = &partial[a];
            let mut out = vec![C64::new(0.0, 0.0); dd];
            for j in 0..m {
                let w = ph(j, n2);
                for (x, y) in out.iter_mut().zip(&q[j * dd..(j + 1) * dd]) {
                    *x += w * y;
                }
            }
            out.iter_mut().for_each(|z| *z *= norm);
            out
        })
        .collect();

    let mut kernel = PeriodicKernel::zeros(d, r);
    for (slot, b) in blocks.iter().enumerate() {
        let n = [(slot / width) as i64 - ri, (slot % width) as i64 - ri];
        kernel.set_block(n, b);
    }
    let decay = if r >= 4 {
        decay_profile(&kernel).ok()
    } else {
        None
    };
    let complete = m % 2 == 1 && width == m;
    if complete {
        kernel = kernel
            .into_cyclic(m)
            .expect("odd period equal to box width");
    } else if let Some(fit) = &decay {
        // blocks beyond R plus images folded in from the grid period
        let alias = tail_bound(fit.c, fit.zeta, m.saturating_sub(r + 1));
        kernel = kernel.with_error_bound(fit.tail(r) + alias);
    }
    Ok(FermiProjectionKernel {
        kernel,
        grid_m: m,
        mu,
        filled_bands,
        decay,
    })
}

/// Band spectrum, gap, fibers and kernel in one call.
pub fn fermi_projection(
    kernel: &HoppingKernel,
    m: usize,
    r: Option<usize>,
    filled_bands: usize,
    mu: Option<f64>,
) -> Result<(GapInfo, FiberField, FermiProjectionKernel), SpectralError> {
    let grid = BzGrid::new(m)?;
    let bands = band_spectrum(kernel, grid);
    let gap = detect_gap(&bands, filled_bands, mu)?;
    let fibers = fermi_fibers(kernel, grid, &gap)?;
    let r = match r {
        Some(r) => r,
        None => {
            let first = projection_kernel(&fibers, default_radius(m, None), gap.mu, filled_bands)?;
            default_radius(m, first.decay().map(|f| f.zeta))
        }
    };
    let p = projection_kernel(&fibers, r, gap.mu, filled_bands)?;
    Ok((gap, fibers, p))
}

/// Serializable block listing of a periodic kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDump {
    pub dim: usize,
    pub radius: usize,
    pub period: Option<usize>,
    pub blocks: Vec<BlockDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDump {
    pub n1: i64,
    pub n2: i64,
    /// Row-major real parts.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl KernelDump {
    pub fn from_kernel(k: &PeriodicKernel) -> Self {
        let blocks = k
            .nonzero_blocks()
            .map(|(n, b)| BlockDump {
                n1: n[0],
                n2: n[1],
                re: b.iter().map(|z| z.re).collect(),
                im: b.iter().map(|z| z.im).collect(),
            })
            .collect();
        Self {
            dim: k.dim(),
            radius: k.radius(),
            period: k.period(),
            blocks,
        }
    }

    pub fn to_kernel(&self) -> Result<PeriodicKernel, crate::kernel_algebra::KernelShapeError> {
        let mut k = PeriodicKernel::zeros(self.dim, self.radius);
        for b in &self.blocks {
            let vals: Vec<C64> =
                b.re.iter()
                    .zip(&b.im)
                    .map(|(&x, &y)| C64::new(x, y))
                    .collect();
            k.try_set_block([b.n1, b.n2], &vals)?;
        }
        match self.period {
            Some(p) => k.into_cyclic(p),
            None => Ok(k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::{build_kane_mele, KaneMeleParams};

    fn km(t: f64, v: f64, so: f64, r: f64) -> HoppingKernel {
        build_kane_mele(&KaneMeleParams::new(t, v, so, r))
    }

    #[test]
    fn flat_bands_of_staggering() {
        let bands = band_spectrum(&km(0.0, 1.0, 0.0, 0.0), BzGrid::new(6).unwrap());
        for (_, e) in bands.rows() {
            assert_eq!(e, &[-1.0, -1.0, 1.0, 1.0]);
        }
        let gap = detect_gap(&bands, 2, None).unwrap();
        assert_eq!((gap.a, gap.b, gap.mu), (-1.0, 1.0, 0.0));
    }

    #[test]
    fn graphene_is_gapless_on_dirac_grids() {
        let bands = band_spectrum(
            &km(1.0, 0.0, 0.0, 0.0),
            BzGrid::with_dirac_points(30).unwrap(),
        );
        assert!(bands.min_direct_gap(1) < 1e-12);
        assert!(matches!(
            detect_gap(&bands, 2, None),
            Err(SpectralError::GapClosed { .. })
        ));
        assert!(BzGrid::with_dirac_points(31).is_err());
    }

    #[test]
    fn spin_orbit_gap_at_the_dirac_point() {
        let bands = band_spectrum(&km(1.0, 0.0, 0.06, 0.0), BzGrid::new(30).unwrap());
        let expected = 6.0 * 3f64.sqrt() * 0.06;
        assert!((bands.min_direct_gap(1) - expected).abs() < 1e-6);
        // direct 4×4 check at K = (2π/3, 2π/3)
        let e = sorted_eigenvalues(bloch_fiber(&km(1.0, 0.0, 0.06, 0.0), [2.0 * PI / 3.0; 2]));
        assert!((e[2] - e[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn rashba_point_stays_gapped() {
        let bands = band_spectrum(&km(1.0, 0.0, 0.06, 0.05), BzGrid::new(30).unwrap());
        assert!(detect_gap(&bands, 2, None).unwrap().width() > 0.1);
    }

    #[test]
    fn atomic_projector_and_kernel() {
        let h = km(0.0, 1.0, 0.0, 0.0);
        let grid = BzGrid::new(10).unwrap();
        let gap = detect_gap(&band_spectrum(&h, grid), 2, None).unwrap();
        let fibers = fermi_fibers(&h, grid, &gap).unwrap();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        assert!(fibers.iter().all(|p| (p - &diag).norm() < 1e-14));
        let p = projection_kernel(&fibers, 4, gap.mu, 2).unwrap();
        assert!((p.kernel().block_matrix([0, 0]) - diag).norm() < 1e-14);
        assert!(p
            .kernel()
            .nonzero_blocks()
            .all(|(n, b)| n == [0, 0] || block::frobenius(b) < 1e-15));
        assert!(p.decay().is_none());
        assert!(matches!(
            decay_profile(p.kernel()),
            Err(SpectralError::DegenerateFit)
        ));
    }

    #[test]
    fn aliasing_guard() {
        let h = km(0.0, 1.0, 0.0, 0.0);
        let grid = BzGrid::new(8).unwrap();
        let gap = detect_gap(&band_spectrum(&h, grid), 2, None).unwrap();
        let fibers = fermi_fibers(&h, grid, &gap).unwrap();
        assert!(matches!(
            projection_kernel(&fibers, 4, 0.0, 2),
            Err(SpectralError::AliasingRisk { .. })
        ));
    }

    #[test]
    fn rank_and_trace_of_kane_mele_kernel() {
        let (_, fibers, p) =
            fermi_projection(&km(1.0, 0.1, 0.06, 0.05), 48, Some(12), 2, None).unwrap();
        assert!(fibers.ranks().iter().all(|t| (t - 2.0).abs() < 1e-10));
        let (idem, herm) = fibers.projector_residuals();
        assert!(idem < 1e-12 && herm < 1e-12);
        assert!((p.kernel().trace_at_origin() - C64::new(2.0, 0.0)).norm() < 1e-10);
        let fit = p.decay().unwrap();
        assert!(fit.zeta > 0.0 && fit.c < 10.0, "{fit:?}");
        assert!(p.kernel().adjoint().max_abs_diff(p.kernel()) < 1e-13);
    }

    #[test]
    fn brute_force_fourier_sum() {
        let h = km(1.0, 0.1, 0.06, 0.05);
        let (_, fibers, p) = fermi_projection(&h, 12, Some(3), 2, None).unwrap();
        let g = fibers.grid();
        for n in [[0i64, 0], [1, 0], [2, -3], [-1, 1]] {
            let mut acc = DMatrix::<C64>::zeros(4, 4);
            for [i, j] in g.indices() {
                let k = g.point(i, j);
                let w = C64::from_polar(1.0, -(k[0] * n[0] as f64 + k[1] * n[1] as f64));
                acc += fibers.at(i, j) * w;
            }
            acc /= C64::new(144.0, 0.0);
            assert!((acc - p.kernel().block_matrix(n)).norm() < 1e-13);
        }
    }

    #[test]
    fn odd_complete_kernels_are_cyclic() {
        let (_, _, p) = fermi_projection(&km(1.0, 0.1, 0.06, 0.0), 15, Some(7), 2, None).unwrap();
        assert!(p.is_torus_complete());
        assert_eq!(p.kernel().period(), Some(15));
        assert!(p.idempotency_residual() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let (_, _, p) = fermi_projection(&km(1.0, 0.1, 0.06, 0.05), 12, Some(3), 2, None).unwrap();
        let json = serde_json::to_string(&KernelDump::from_kernel(p.kernel())).unwrap();
        let back: KernelDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_kernel().unwrap().max_abs_diff(p.kernel()), 0.0);
    }
}
