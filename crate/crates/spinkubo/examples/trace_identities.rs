//! Trace-functional checks: cyclicity of the trace per unit volume and the
//! identities that trade switch commutators for positions.
use spinkubo::kernel_algebra::commutator_position;
use spinkubo::lattice_model::{build_kane_mele, spin_z, Axis, KaneMeleParams, SwitchFunction};
use spinkubo::spectral::fermi_projection;
use spinkubo::trace_functionals::{cyclicity_residual, verify_localization_identities};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = KaneMeleParams::new(1.0, 0.1, 0.06, 0.05);
    let h = build_kane_mele(&params);
    let (_, _, p) = fermi_projection(&h, 24, Some(6), 2, None)?;
    let k = p.kernel();

    let c = cyclicity_residual(k, &commutator_position(k, Axis::Two));
    println!(
        "cyclicity: residual {:.2e} (bound {:.2e})",
        c.residual, c.bound
    );

    let s = spin_z(h.basis())?;
    let checks = verify_localization_identities(
        k,
        &s,
        &SwitchFunction::sharp(Axis::One),
        &SwitchFunction::sharp(Axis::Two),
        41,
    )?;
    for (name, c) in [
        ("single switch", checks.single_switch),
        ("double switch", checks.double_switch),
        ("shifted", checks.shifted_double_switch),
    ] {
        println!(
            "{name:>14}: residual {:.2e}, bound {:.2e}, holds {}",
            c.residual,
            c.bound,
            c.holds()
        );
    }
    Ok(())
}
