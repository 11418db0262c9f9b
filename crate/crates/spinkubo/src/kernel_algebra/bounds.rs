//! Hölmgren operator-norm bounds and geometric tail estimates.

use std::collections::HashMap;

use super::block;
use super::offset::{OffsetFunction, OffsetPeriodicKernel};
use super::periodic::PeriodicKernel;
use super::window::WindowKernel;
use crate::lattice_model::{spectral_norm, HoppingKernel, Offset};

/// `max(sup_m Σ_n ‖A_{m,n}‖, sup_n Σ_m ‖A_{m,n}‖)`, an upper bound for `‖A‖`.
pub trait HolmgrenNorm {
    fn holmgren_norm(&self) -> f64;
}

impl HolmgrenNorm for PeriodicKernel {
    fn holmgren_norm(&self) -> f64 {
        // row and column sums coincide for a periodic kernel
        self.nonzero_blocks()
            .map(|(_, b)| block::spectral_norm(b, self.dim()))
            .sum()
    }
}

impl HolmgrenNorm for HoppingKernel {
    fn holmgren_norm(&self) -> f64 {
        self.blocks().map(|(_, b)| spectral_norm(b)).sum()
    }
}

impl HolmgrenNorm for OffsetPeriodicKernel {
    fn holmgren_norm(&self) -> f64 {
        let unbounded =
            matches!(self.weight(), OffsetFunction::Linear { coeff, .. } if *coeff != 0.0);
        if unbounded && self.correction_part().max_abs() > 0.0 {
            return f64::INFINITY;
        }
        self.periodic_part().holmgren_norm()
    }
}

impl HolmgrenNorm for WindowKernel {
    fn holmgren_norm(&self) -> f64 {
        let mut rows: HashMap<Offset, f64> = HashMap::new();
        let mut cols: HashMap<Offset, f64> = HashMap::new();
        for (m, n, b) in self.entries() {
            let x = block::spectral_norm(b, self.dim());
            *rows.entry(m).or_default() += x;
            *cols.entry(n).or_default() += x;
        }
        rows.values()
            .chain(cols.values())
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// `C · Σ_{‖n‖∞ > radius} e^{-‖n‖₁/ζ}` in closed form.
///
/// With `q = e^{-1/ζ}` the full lattice sum is `S²`, `S = (1+q)/(1-q)`, and the
/// box sum is `S_r²`, `S_r = 1 + 2q(1-q^r)/(1-q)`.
pub fn tail_bound(c: f64, zeta: f64, radius: usize) -> f64 {
    assert!(zeta > 0.0, "decay length must be positive");
    let q = (-1.0 / zeta).exp();
    let r = radius as i32;
    let full = (1.0 + q) / (1.0 - q);
    let inner = 1.0 + 2.0 * q * (1.0 - q.powi(r)) / (1.0 - q);
    c * (2.0 * q.powi(r + 1) / (1.0 - q)) * (full + inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::C64;
    use nalgebra::DMatrix;

    fn brute(c: f64, zeta: f64, r: i64) -> f64 {
        let mut s = 0.0;
        for a in -400i64..=400 {
            for b in -400i64..=400 {
                if a.abs().max(b.abs()) > r {
                    s += (-((a.abs() + b.abs()) as f64) / zeta).exp();
                }
            }
        }
        c * s
    }

    #[test]
    fn closed_form_matches_lattice_sum() {
        for (zeta, r) in [(1.0, 0), (1.0, 3), (2.0, 5), (0.5, 1)] {
            let exact = brute(1.0, zeta, r);
            assert!((tail_bound(1.0, zeta, r as usize) - exact).abs() < 1e-10 * exact.max(1.0));
        }
        // radius 0 leaves every n ≠ 0: (coth(1/2))² - 1
        let q = (-1.0f64).exp();
        let s = (1.0 + q) / (1.0 - q);
        assert!((tail_bound(1.0, 1.0, 0) - (s * s - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn monotone_and_geometric() {
        let mut prev = f64::INFINITY;
        for r in 0..60 {
            let t = tail_bound(1.0, 2.0, r);
            assert!(t < prev);
            prev = t;
        }
        for r in [4usize, 8, 16] {
            // leading factor e^{-r/ζ}, times a prefactor ratio in [1, 1.1)
            let ratio =
                tail_bound(1.0, 2.0, 2 * r) / tail_bound(1.0, 2.0, r) / (-(r as f64) / 2.0).exp();
            assert!((1.0..1.1).contains(&ratio), "r={r} ratio={ratio}");
        }
    }

    #[test]
    fn holmgren_of_simple_kernels() {
        assert!((PeriodicKernel::identity(4).holmgren_norm() - 1.0).abs() < 1e-14);
        let b = DMatrix::from_diagonal_element(3, 3, C64::new(0.0, 2.5));
        assert!((PeriodicKernel::single([1, -1], &b).holmgren_norm() - 2.5).abs() < 1e-14);
    }
}
