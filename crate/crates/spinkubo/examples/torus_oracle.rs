//! Dense diagonalization on a torus against the Brillouin-zone pipeline.
use spinkubo::lattice_model::{build_kane_mele, KaneMeleParams};
use spinkubo::torus_oracle::oracle_check;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for lr in [0.0, 0.05] {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, lr));
        for l in [9, 15] {
            let c = oracle_check(&h, l, 2, None)?;
            println!(
                "lambda_R = {lr:.2}, L = {l:>2}: torus {:.12}, pipeline {:.12}, |diff| {:.1e}, projector {:.1e}, spectrum {:.1e}",
                c.sigma_torus, c.sigma_pipeline, c.sigma_diff, c.projector_diff, c.spectral_residual
            );
        }
    }
    Ok(())
}
