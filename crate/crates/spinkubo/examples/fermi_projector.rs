//! Fermi projection kernel: decay fit, truncation tail and idempotency defect
//! as the kernel radius grows.
use spinkubo::lattice_model::{build_kane_mele, KaneMeleParams};
use spinkubo::spectral::fermi_projection;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
    println!(
        "{:>3} {:>8} {:>8} {:>11} {:>11}",
        "R", "zeta", "R^2", "tail", "P^2-P"
    );
    for r in [8, 12, 16, 20] {
        let (_, _, p) = fermi_projection(&h, 48, Some(r), 2, None)?;
        let fit = p.decay().expect("radius is large enough for a fit");
        println!(
            "{r:>3} {:>8.4} {:>8.5} {:>11.3e} {:>11.3e}",
            fit.zeta,
            fit.r_squared,
            p.tail_estimate(),
            p.idempotency_residual()
        );
    }
    Ok(())
}
