//! Brute-force reference on an `L × L` torus: dense Hamiltonian, full
//! diagonalization and transport traces with minimal-image positions.
//!
//! Dense cost grows as `L⁶`; intended for `L ≲ 21`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kernel_algebra::PeriodicKernel;
use crate::lattice_model::{spin_z, HoppingKernel, LatticeError, Offset, C64};
use crate::spectral::{band_spectrum, decay_profile, BzGrid, SpectralError};

/// Eigenvalues closer than this to the Fermi level count as a closed gap.
pub const TORUS_GAP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TorusError {
    #[error("torus side {l} must be odd")]
    EvenSide { l: usize },
    #[error("torus side {l} too small for hopping range {range}")]
    LTooSmall { l: usize, range: i64 },
    #[error("eigenvalue {eigenvalue} within {TORUS_GAP_TOLERANCE:e} of mu = {mu}")]
    GapClosed { eigenvalue: f64, mu: f64 },
    #[error("projector decay length {zeta:.3} exceeds half the torus side {l}")]
    DecayTooSlow { zeta: f64, l: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Dense Hamiltonian on the torus. Sites are ordered `(n₁, n₂, internal)`
/// with `n ∈ [-(L-1)/2, (L-1)/2]²`.
#[derive(Debug, Clone)]
pub struct TorusSystem {
    l: usize,
    dim: usize,
    spinful: bool,
    hamiltonian: DMatrix<C64>,
}

impl TorusSystem {
    pub fn side(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.hamiltonian
    }

    fn half(&self) -> i64 {
        (self.l as i64 - 1) / 2
    }

    /// Cell coordinate wrapped into `[-h, h]`.
    fn wrap(&self, x: i64) -> i64 {
        let l = self.l as i64;
        (x + self.half()).rem_euclid(l) - self.half()
    }

    fn cell(&self, n: Offset) -> usize {
        let h = self.half();
        ((self.wrap(n[0]) + h) as usize) * self.l + (self.wrap(n[1]) + h) as usize
    }

    fn coords(&self, cell: usize) -> Offset {
        let h = self.half();
        [(cell / self.l) as i64 - h, (cell % self.l) as i64 - h]
    }

    /// Dense row index of internal state `a` in cell `n`.
    pub fn site_index(&self, n: Offset, a: usize) -> usize {
        self.cell(n) * self.dim + a
    }
}

/// Wraps every hopping block cyclically onto the `L × L` torus.
pub fn build_torus(kernel: &HoppingKernel, l: usize) -> Result<TorusSystem, TorusError> {
    if l.is_multiple_of(2) {
        return Err(TorusError::EvenSide { l });
    }
    let range = kernel.range();
    if (l as i64) <= 2 * range {
        return Err(TorusError::LTooSmall { l, range });
    }
    let dim = kernel.dim();
    let mut sys = TorusSystem {
        l,
        dim,
        spinful: kernel.basis().is_spinful(),
        hamiltonian: DMatrix::zeros(dim * l * l, dim * l * l),
    };
    let mut blocks: Vec<(&Offset, &DMatrix<C64>)> = kernel.blocks().collect();
    blocks.sort_by_key(|(d, _)| **d);
    for c in 0..l * l {
        let m = sys.coords(c);
        for (d, b) in &blocks {
            let n = sys.cell([m[0] + d[0], m[1] + d[1]]);
            let mut view = sys.hamiltonian.view_mut((c * dim, n * dim), (dim, dim));
            view += *b;
        }
    }
    Ok(sys)
}

#[derive(Debug, Clone)]
pub struct TorusProjection {
    pub projector: DMatrix<C64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub mu: f64,
}

impl TorusProjection {
    /// `max(‖P² - P‖, ‖P - P†‖)` entrywise.
    pub fn residual(&self) -> f64 {
        let p = &self.projector;
        let idem = (p * p - p).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let herm = (p - p.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        idem.max(herm)
    }
}

/// Spectral projector onto eigenvalues below `mu`.
pub fn torus_fermi_projection(sys: &TorusSystem, mu: f64) -> Result<TorusProjection, TorusError> {
    let eig = sys.hamiltonian.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if let Some(&e) = eigenvalues
        .iter()
        .find(|&&e| (e - mu).abs() < TORUS_GAP_TOLERANCE)
    {
        return Err(TorusError::GapClosed { eigenvalue: e, mu });
    }
    let occ: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] < mu)
        .collect();
    let n = eigenvalues.len();
    let mut v = DMatrix::<C64>::zeros(n, occ.len());
    for (c, &i) in occ.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    let projector = &v * v.adjoint();
    Ok(TorusProjection {
        projector,
        eigenvalues,
        rank: occ.len(),
        mu,
    })
}

/// Central-row blocks `P_{0,n}`, `‖n‖∞ ≤ (L-1)/2`, as a cyclic kernel.
pub fn central_row(sys: &TorusSystem, proj: &TorusProjection) -> PeriodicKernel {
    let d = sys.dim;
    let h = sys.half() as usize;
    let row = sys.cell([0, 0]) * d;
    let k = PeriodicKernel::from_fn(d, h, |n| {
        Some(
            proj.projector
                .view((row, sys.cell(n) * d), (d, d))
                .into_owned(),
        )
    });
    k.into_cyclic(sys.l).expect("radius matches the torus side")
}

/// `2π · tr` of the central-cell block of `iP[[P,X₁S_z],[P,X₂]]P`, in
/// conductance quanta.
///
/// `[P,X₂]` uses minimal-image displacements; `[P,X₁S_z]` is expanded as
/// `[P,X₁]S_z + X₁[P,S_z]` with minimal-image `[P,X₁]` and centred `X₁`.
pub fn torus_sigma_k(sys: &TorusSystem, proj: &TorusProjection) -> Result<f64, TorusError> {
    if let Ok(fit) = decay_profile(&central_row(sys, proj)) {
        if fit.zeta > sys.l as f64 / 2.0 {
            return Err(TorusError::DecayTooSlow {
                zeta: fit.zeta,
                l: sys.l,
            });
        }
    }
    let d = sys.dim;
    let n = d * sys.l * sys.l;
    let s_int = if sys.spinful {
        spin_z(crate::lattice_model::InternalBasis::spinful(d / 2))?
    } else {
        return Err(LatticeError::Spinless.into());
    };
    let p = &proj.projector;
    let coord = |i: usize| sys.coords(i / d);
    let disp = |i: usize, j: usize, axis: usize| sys.wrap(coord(j)[axis] - coord(i)[axis]) as f64;
    // S_z is diagonal in this basis
    let sz: Vec<f64> = (0..n).map(|i| s_int[(i % d, i % d)].re).collect();

    let c2 = DMatrix::from_fn(n, n, |i, j| p[(i, j)] * disp(i, j, 1));
    let o = DMatrix::from_fn(n, n, |i, j| {
        p[(i, j)] * (disp(i, j, 0) * sz[j] + coord(i)[0] as f64 * (sz[j] - sz[i]))
    });

    let row0 = sys.cell([0, 0]) * d;
    let rows = p.rows(row0, d).into_owned();
    let cols = p.columns(row0, d).into_owned();
    let left = &rows * &o * &c2 - &rows * &c2 * &o;
    let t = (left * cols).trace() * C64::new(0.0, 1.0);
    Ok(2.0 * PI * t.re)
}

/// Largest gap between sorted torus eigenvalues and the sorted union of
/// fiber eigenvalues on the `M = L` grid.
pub fn spectral_duality_residual(
    kernel: &HoppingKernel,
    sys: &TorusSystem,
    proj: &TorusProjection,
) -> Result<f64, TorusError> {
    let bands = band_spectrum(kernel, BzGrid::new(sys.l)?);
    let mut union: Vec<f64> = bands.rows().flat_map(|(_, e)| e.iter().copied()).collect();
    union.sort_by(f64::total_cmp);
    Ok(union
        .iter()
        .zip(&proj.eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Largest entrywise difference between the torus central row and `kernel`
/// on `‖n‖∞ ≤ (L-1)/2`.
pub fn projector_duality_residual(
    sys: &TorusSystem,
    proj: &TorusProjection,
    kernel: &PeriodicKernel,
) -> f64 {
    let row = central_row(sys, proj);
    let h = sys.half();
    let mut worst = 0.0f64;
    for a in -h..=h {
        for b in -h..=h {
            let x = row.block_matrix([a, b]);
            let y = kernel.block_matrix([a, b]);
            worst = worst.max((x - y).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Transport(#[from] crate::transport::TransportError),
}

/// Pipeline versus torus comparison at one side length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub l: usize,
    pub sigma_torus: f64,
    pub sigma_pipeline: f64,
    pub sigma_diff: f64,
    pub projector_diff: f64,
    pub spectral_residual: f64,
    pub projector_residual: f64,
}

/// Runs both evaluations with the pipeline at `M = L`, `R = (L-1)/2`.
pub fn oracle_check(
    kernel: &HoppingKernel,
    l: usize,
    filled_bands: usize,
    mu: Option<f64>,
) -> Result<OracleComparison, OracleError> {
    let sys = build_torus(kernel, l)?;
    let (gap, _, pk) =
        crate::spectral::fermi_projection(kernel, l, Some((l - 1) / 2), filled_bands, mu)?;
    let proj = torus_fermi_projection(&sys, gap.mu)?;
    let sigma_torus = torus_sigma_k(&sys, &proj)?;
    let sigma_pipeline = crate::transport::sigma_k(pk.kernel())?.value;
    Ok(OracleComparison {
        l,
        sigma_torus,
        sigma_pipeline,
        sigma_diff: (sigma_torus - sigma_pipeline).abs(),
        projector_diff: projector_duality_residual(&sys, &proj, pk.kernel()),
        spectral_residual: spectral_duality_residual(kernel, &sys, &proj)?,
        projector_residual: proj.residual(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::{build_kane_mele, KaneMeleParams};

    #[test]
    fn atomic_limit_is_diagonal() {
        let h = build_kane_mele(&KaneMeleParams::new(0.0, 1.0, 0.0, 0.0));
        let sys = build_torus(&h, 5).unwrap();
        assert_eq!(sys.hamiltonian().nrows(), 100);
        let off: f64 = (0..100)
            .flat_map(|i| (0..100).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| sys.hamiltonian()[(i, j)].norm())
            .sum();
        assert_eq!(off, 0.0);
        let proj = torus_fermi_projection(&sys, 0.0).unwrap();
        assert_eq!(proj.rank, 50);
        assert!(torus_sigma_k(&sys, &proj).unwrap().abs() < 1e-14);
    }

    #[test]
    fn nearest_neighbour_bond_count() {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.0, 0.0, 0.0));
        let sys = build_torus(&h, 9).unwrap();
        let ham = sys.hamiltonian();
        for i in 0..ham.nrows() {
            let bonds = (0..ham.ncols())
                .filter(|&j| j != i && ham[(i, j)].norm() > 0.0)
                .count();
            assert_eq!(bonds, 3, "row {i}");
        }
    }

    #[test]
    fn guards() {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.0));
        assert!(matches!(
            build_torus(&h, 4),
            Err(TorusError::EvenSide { .. })
        ));
        assert!(matches!(
            build_torus(&h, 3),
            Err(TorusError::LTooSmall { .. })
        ));
        let sys = build_torus(&h, 5).unwrap();
        let e = torus_fermi_projection(&sys, 0.0).unwrap().eigenvalues[0];
        assert!(matches!(
            torus_fermi_projection(&sys, e),
            Err(TorusError::GapClosed { .. })
        ));
    }

    #[test]
    fn dualities_at_small_side() {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
        let c = oracle_check(&h, 9, 2, None).unwrap();
        assert!(c.spectral_residual < 1e-12, "{c:?}");
        assert!(c.projector_diff < 1e-12, "{c:?}");
        assert!(c.projector_residual < 1e-12, "{c:?}");
        assert!(c.sigma_diff < 1e-9, "{c:?}");
    }
}
