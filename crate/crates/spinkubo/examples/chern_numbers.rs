//! Chern numbers on both sides of the staggered-potential transition.
use spinkubo::lattice_model::{build_kane_mele, KaneMeleParams};
use spinkubo::transport::invariants;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for lv in [0.1, 0.5] {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, lv, 0.06, 0.0));
        let inv = invariants(&h, 48, 2, None)?;
        println!(
            "lambda_v = {lv}: total {}, up {:?}, down {:?}, spin Chern {:?}",
            inv.chern_total.value,
            inv.chern_up.map(|c| c.value),
            inv.chern_down.map(|c| c.value),
            inv.spin_chern()
        );
    }
    let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
    let inv = invariants(&h, 48, 2, None)?;
    println!(
        "with Rashba: total {}, ‖[H,S_z]‖ = {:.3}",
        inv.chern_total.value, inv.spin_commuting_norm
    );
    Ok(())
}
