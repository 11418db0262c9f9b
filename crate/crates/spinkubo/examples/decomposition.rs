//! Conductance with the first switch replaced by a saturating position,
//! split into a volume part and stripe sums that cancel by symmetry.
use spinkubo::lattice_model::{build_kane_mele, Axis, KaneMeleParams, SwitchFunction};
use spinkubo::spectral::fermi_projection;
use spinkubo::transport::{gk_decomposition, sigma_k};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
    let (_, _, p) = fermi_projection(&h, 48, Some(16), 2, None)?;
    let lambda2 = SwitchFunction::sharp(Axis::Two);
    println!("sigma_K = {:.10}", sigma_k(p.kernel())?.value);
    for l in [7.0, 14.0] {
        let d = gk_decomposition(p.kernel(), l, &lambda2, 41)?;
        println!(
            "l = {l:>4}: G_a/l = {:.10}, max |G_b stripe sum| = {:.2e}",
            d.g_a_over_l.value, d.g_b_max_abs
        );
    }
    Ok(())
}
