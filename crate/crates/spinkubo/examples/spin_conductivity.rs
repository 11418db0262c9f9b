//! Spin conductivity, spin torque response and charge conductivity from the
//! trace per unit volume, across Rashba couplings.
use spinkubo::lattice_model::{build_kane_mele, KaneMeleParams};
use spinkubo::spectral::fermi_projection;
use spinkubo::transport::{charge_conductivity, sigma_k, torque_response};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>8} {:>12} {:>12} {:>12}",
        "lambda_R", "sigma_K", "tau", "charge"
    );
    for lr in [0.0, 0.05, 0.1, 0.3] {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, lr));
        let (_, _, p) = fermi_projection(&h, 48, Some(16), 2, None)?;
        let k = p.kernel();
        println!(
            "{lr:>8.2} {:>12.8} {:>12.3e} {:>12.3e}",
            sigma_k(k)?.value,
            torque_response(k)?.value,
            charge_conductivity(k)?.value
        );
    }
    Ok(())
}
