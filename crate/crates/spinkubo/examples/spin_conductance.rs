//! Spin conductance from switch functions: stripe partial sums along axis 1
//! for a sharp and a ramped switch, compared with the spin conductivity.
use spinkubo::lattice_model::{build_kane_mele, Axis, KaneMeleParams, SwitchFunction};
use spinkubo::spectral::fermi_projection;
use spinkubo::transport::{conductance_gk, sigma_k};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = build_kane_mele(&KaneMeleParams::new(1.0, 0.1, 0.06, 0.05));
    let (_, _, p) = fermi_projection(&h, 48, Some(16), 2, None)?;
    let k = p.kernel();
    let lambda2 = SwitchFunction::sharp(Axis::Two);
    let sharp = conductance_gk(k, &SwitchFunction::sharp(Axis::One), &lambda2, 41, None)?;
    let ramp = conductance_gk(
        k,
        &SwitchFunction::default_ramp(Axis::One),
        &lambda2,
        41,
        None,
    )?;
    println!("{:>3} {:>14} {:>14}", "L", "sharp", "ramp");
    for (a, b) in sharp.series.samples.iter().zip(&ramp.series.samples) {
        println!("{:>3} {:>14.10} {:>14.10}", a.l, a.value.re, b.value.re);
    }
    println!("sigma_K = {:.10}", sigma_k(k)?.value);
    println!("sharp verdict: {:?}", sharp.series.verdict);
    Ok(())
}
