//! A model assembled from hopping blocks: two time-reversed copies of a
//! two-orbital Chern insulator, one per spin.
use nalgebra::DMatrix;
use spinkubo::lattice_model::{HoppingKernel, InternalBasis, C64};
use spinkubo::spectral::fermi_projection;
use spinkubo::transport::{invariants, sigma_k, spin_commuting_check};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Spin up carries `sin k₁ σx + sin k₂ σy + (u + cos k₁ + cos k₂) σz` on the
/// two orbitals; spin down carries its time-reversed partner `H↑(-k)*`.
/// Internal ordering is (orbital, spin).
fn model(u: f64) -> Result<HoppingKernel, Box<dyn std::error::Error>> {
    let sx = [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
    let sy = [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
    let sz = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
    let mut h = HoppingKernel::new(InternalBasis::spinful(2));
    for up in [true, false] {
        let spin = usize::from(!up);
        // orbital 2x2 matrix embedded into the spin sector
        let embed = |m: &dyn Fn(usize, usize) -> C64| {
            DMatrix::from_fn(4, 4, |i, j| {
                if i % 2 == spin && j % 2 == spin {
                    m(i / 2, j / 2)
                } else {
                    c(0.0, 0.0)
                }
            })
        };
        let x_sign = if up { -1.0 } else { 1.0 };
        let blocks = [
            ([0i64, 0i64], embed(&|i, j| sz[i][j] * u)),
            (
                [1, 0],
                embed(&|i, j| sz[i][j] * 0.5 + sx[i][j] * c(0.0, 0.5 * x_sign)),
            ),
            (
                [0, 1],
                embed(&|i, j| sz[i][j] * 0.5 + sy[i][j] * c(0.0, -0.5)),
            ),
        ];
        for (d, b) in blocks {
            h.add_block(d, &b)?;
            if d != [0, 0] {
                h.add_block([-d[0], -d[1]], &b.adjoint())?;
            }
        }
    }
    h.check_hermitian(1e-14)?;
    Ok(h)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for u in [-1.0, 1.0, 3.0] {
        let h = model(u)?;
        let inv = invariants(&h, 36, 2, None)?;
        let (_, _, p) = fermi_projection(&h, 36, Some(12), 2, None)?;
        println!(
            "u = {u:>4}: ‖[H,S_z]‖ = {:.1e}, C↑ = {:?}, C↓ = {:?}, sigma_K = {:.6}",
            spin_commuting_check(&h)?,
            inv.chern_up.map(|c| c.value),
            inv.chern_down.map(|c| c.value),
            sigma_k(p.kernel())?.value
        );
    }
    Ok(())
}
