//! Band structure of the Kane-Mele model and the gap around half filling.
use spinkubo::lattice_model::{build_kane_mele, KaneMeleParams};
use spinkubo::spectral::{band_spectrum, detect_gap, BzGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
    let grid = BzGrid::with_dirac_points(48)?;
    let bands = band_spectrum(&h, grid);
    let gap = detect_gap(&bands, 2, None)?;
    println!(
        "bands: {} on a {}x{} grid",
        bands.n_bands(),
        grid.m(),
        grid.m()
    );
    println!("gap [{:.6}, {:.6}], mu = {:.6}", gap.a, gap.b, gap.mu);
    for b in 0..bands.n_bands() - 1 {
        println!(
            "min direct gap above band {b}: {:.6}",
            bands.min_direct_gap(b)
        );
    }
    Ok(())
}
