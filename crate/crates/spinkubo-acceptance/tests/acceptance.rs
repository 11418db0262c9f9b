//! Acceptance criteria 1 to 10 at the production grid sizes.
//!
//! Prints one PASS/FAIL line per criterion followed by its individual checks,
//! and exits non-zero if any criterion fails.

use std::error::Error;
use std::time::Instant;

use spinkubo::kernel_algebra::commutator_position;
use spinkubo::lattice_model::{build_kane_mele, spin_z, Axis, KaneMeleParams, SwitchFunction};
use spinkubo::spectral::{fermi_projection, FermiProjectionKernel};
use spinkubo::torus_oracle::oracle_check;
use spinkubo::trace_functionals::{
    cyclicity_residual, jpv_trace, pv_trace, tuv_periodic, verify_localization_identities,
    volume_averages, FiniteDiagonal, Verdict,
};
use spinkubo::transport::{
    charge_conductivity, conductance_gk, gk_decomposition, invariants, sigma_k, sigma_k_kernel,
    torque_response,
};
use spinkubo_acceptance::{Criterion, Outcome};

type Res = Result<(), Box<dyn Error>>;

const M: usize = 48;
const R: usize = 16;
const L_MAX: usize = 41;

fn km(t: f64, v: f64, so: f64, r: f64) -> KaneMeleParams {
    KaneMeleParams::new(t, v, so, r)
}

fn projector(
    p: &KaneMeleParams,
    m: usize,
    r: usize,
) -> Result<FermiProjectionKernel, Box<dyn Error>> {
    Ok(fermi_projection(&build_kane_mele(p), m, Some(r), 2, None)?.2)
}

fn run(id: u32, title: &'static str, body: impl FnOnce(&mut Criterion) -> Res) -> Outcome {
    let mut c = Criterion::new(id, title);
    if let Err(e) = body(&mut c) {
        c.fail(format!("error: {e}"));
    }
    c.finish()
}

fn torque_vanishes() -> Outcome {
    run(
        1,
        "torque response vanishes (|tau| <= 1e-8, M=48, R=16)",
        |c| {
            for p in [
                km(1.0, 0.1, 0.06, 0.0),
                km(1.0, 0.1, 0.06, 0.05),
                km(1.0, 0.1, 0.06, 0.3),
            ] {
                let start = Instant::now();
                let tau = torque_response(projector(&p, M, R)?.kernel())?;
                let secs = start.elapsed().as_secs_f64();
                c.check(
                    tau.value.abs() <= 1e-8,
                    format!("lambda_R={}: tau = {:.3e}", p.lambda_r, tau.value),
                );
                c.check(
                    secs < 120.0,
                    format!("lambda_R={}: runtime {secs:.1}s", p.lambda_r),
                );
            }
            Ok(())
        },
    )
}

fn conductance_matches_conductivity() -> Outcome {
    run(
        2,
        "G_K equals sigma_K within 1e-4 (sharp switches, L_max=41)",
        |c| {
            for p in [km(1.0, 0.1, 0.06, 0.0), km(1.0, 0.1, 0.06, 0.05)] {
                let pk = projector(&p, M, R)?;
                let s = sigma_k(pk.kernel())?;
                let g = conductance_gk(
                    pk.kernel(),
                    &SwitchFunction::sharp(Axis::One),
                    &SwitchFunction::sharp(Axis::Two),
                    L_MAX,
                    None,
                )?;
                let diff = (g.value.value - s.value).abs();
                c.check(
                    diff <= 1e-4,
                    format!(
                        "lambda_R={}: G_K = {:.8}, sigma_K = {:.8}, |diff| = {diff:.2e}",
                        p.lambda_r, g.value.value, s.value
                    ),
                );
                c.check(
                    g.value.imag.abs() <= 1e-9 && s.imag.abs() <= 1e-9,
                    format!(
                        "lambda_R={}: imaginary parts {:.1e}, {:.1e}",
                        p.lambda_r, g.value.imag, s.imag
                    ),
                );
            }
            Ok(())
        },
    )
}

fn switch_independence() -> Outcome {
    run(3, "G_K independent of the first switch within 1e-6", |c| {
        let pk = projector(&km(1.0, 0.1, 0.06, 0.05), M, R)?;
        let l2 = SwitchFunction::sharp(Axis::Two);
        let sharp = conductance_gk(
            pk.kernel(),
            &SwitchFunction::sharp(Axis::One),
            &l2,
            L_MAX,
            None,
        )?;
        let ramp = conductance_gk(
            pk.kernel(),
            &SwitchFunction::default_ramp(Axis::One),
            &l2,
            L_MAX,
            None,
        )?;
        let diff = (sharp.value.value - ramp.value.value).abs();
        c.check(
            diff <= 1e-6,
            format!(
                "sharp {:.10}, ramp {:.10}, |diff| = {diff:.2e}",
                sharp.value.value, ramp.value.value
            ),
        );
        Ok(())
    })
}

fn quantization() -> Outcome {
    run(
        4,
        "spin-commuting quantization against the spin-up Chern number",
        |c| {
            let top = km(1.0, 0.1, 0.06, 0.0);
            let inv = invariants(&build_kane_mele(&top), M, 2, None)?;
            let up = inv.chern_up.ok_or("spin-up sector unavailable")?.value;
            let s = sigma_k(projector(&top, M, R)?.kernel())?.value;
            c.check(up.abs() == 1, format!("topological: C_up = {up}"));
            c.check(
                (s - up as f64).abs() <= 1e-3,
                format!(
                    "topological: sigma_K = {s:.6}, |sigma_K - C_up| = {:.2e}",
                    (s - up as f64).abs()
                ),
            );
            let again = sigma_k(projector(&top, M, R)?.kernel())?.value;
            c.check(
                again.to_bits() == s.to_bits(),
                "repeat run reproduces sigma_K bit for bit",
            );

            let trivial = km(1.0, 0.7, 0.06, 0.0);
            let inv = invariants(&build_kane_mele(&trivial), M, 2, None)?;
            let up = inv.chern_up.ok_or("spin-up sector unavailable")?.value;
            let s = sigma_k(projector(&trivial, M, R)?.kernel())?.value;
            c.check(up == 0, format!("trivial (lambda_v=0.7): C_up = {up}"));
            c.check(
                s.abs() <= 1e-3,
                format!("trivial (lambda_v=0.7): sigma_K = {s:.2e}"),
            );
            Ok(())
        },
    )
}

fn charge_transport() -> Outcome {
    run(
        5,
        "time reversal: no charge response, opposite spin Chern numbers",
        |c| {
            for p in [
                km(1.0, 0.1, 0.06, 0.0),
                km(1.0, 0.1, 0.06, 0.05),
                km(1.0, 0.1, 0.06, 0.3),
                km(1.0, 0.7, 0.06, 0.0),
            ] {
                let q = charge_conductivity(projector(&p, M, R)?.kernel())?;
                let tag = format!("(lambda_v={}, lambda_R={})", p.lambda_v, p.lambda_r);
                c.check(
                    q.value.abs() <= 1e-6,
                    format!("{tag}: charge conductivity {:.2e}", q.value),
                );
                let inv = invariants(&build_kane_mele(&p), M, 2, None)?;
                c.check(
                    inv.chern_total.value == 0,
                    format!("{tag}: total Chern number {}", inv.chern_total.value),
                );
                if let (Some(u), Some(d)) = (inv.chern_up, inv.chern_down) {
                    c.check(
                        u.value + d.value == 0,
                        format!("{tag}: C_up + C_down = {} + {}", u.value, d.value),
                    );
                }
            }
            Ok(())
        },
    )
}

fn oracle_equivalence() -> Outcome {
    run(
        6,
        "dense torus oracle agrees with the pipeline (L=15)",
        |c| {
            for p in [km(1.0, 0.1, 0.06, 0.0), km(1.0, 0.1, 0.06, 0.05)] {
                let start = Instant::now();
                let o = oracle_check(&build_kane_mele(&p), 15, 2, None)?;
                let secs = start.elapsed().as_secs_f64();
                let tag = format!("lambda_R={}", p.lambda_r);
                c.check(
                    o.sigma_diff <= 1e-6,
                    format!(
                        "{tag}: torus {:.10} vs pipeline {:.10}",
                        o.sigma_torus, o.sigma_pipeline
                    ),
                );
                c.check(
                    o.projector_diff <= 1e-12,
                    format!("{tag}: projector blocks differ by {:.1e}", o.projector_diff),
                );
                c.check(
                    o.spectral_residual <= 1e-12,
                    format!(
                        "{tag}: spectral duality residual {:.1e}",
                        o.spectral_residual
                    ),
                );
                c.check(secs < 60.0, format!("{tag}: runtime {secs:.1}s"));
            }
            Ok(())
        },
    )
}

fn trace_functionals() -> Outcome {
    run(
        7,
        "trace functionals: extension, exact averages, cyclicity",
        |c| {
            let pk = projector(&km(1.0, 0.1, 0.06, 0.05), M, R)?;
            let p = pk.kernel();

            // finitely supported diagonal built from the kernel's own block traces
            let diag = FiniteDiagonal::new(
                p.offsets()
                    .filter(|n| n[0].abs() <= 4 && n[1].abs() <= 4)
                    .map(|n| {
                        let b = p.block_matrix(n);
                        (n, b.trace() + b[(0, 1)])
                    }),
            );
            let total = diag.total();
            for (name, s) in [
                ("pvTr", pv_trace(&diag, 21)?),
                ("1-pvTr", jpv_trace(&diag, Axis::One, 21, None)?),
                ("2-pvTr", jpv_trace(&diag, Axis::Two, 21, None)?),
            ] {
                let err = (s.value() - total).norm();
                c.check(
                    s.verdict == Verdict::Converged && err <= 1e-12,
                    format!("extension {name}: |limit - Tr| = {err:.1e}"),
                );
            }

            let t = tuv_periodic(p);
            let worst = volume_averages(p, 21)?
                .iter()
                .map(|(_, v)| (v - t).norm())
                .fold(0.0, f64::max);
            c.check(
                worst <= 1e-12,
                format!("periodic square averages equal tr P_00 to {worst:.1e}"),
            );

            let sk = sigma_k_kernel(p, Some(4))?;
            let t0 = sk.periodic_part().trace_at_origin();
            let worst = volume_averages(&sk, 21)?
                .iter()
                .map(|(_, v)| (v - t0).norm())
                .fold(0.0, f64::max);
            c.check(
                worst <= 1e-12,
                format!("odd-offset square averages equal the periodic-part trace to {worst:.1e}"),
            );

            let cyc = cyclicity_residual(p, &commutator_position(p, Axis::Two));
            c.check(
                cyc.residual <= cyc.bound,
                format!(
                    "cyclicity residual {:.1e} <= bound {:.1e}",
                    cyc.residual, cyc.bound
                ),
            );
            Ok(())
        },
    )
}

fn localization_identities() -> Outcome {
    run(
        8,
        "switch-to-position identities and switch summation identity",
        |c| {
            let params = km(1.0, 0.1, 0.06, 0.05);
            let pk = projector(&params, M, R)?;
            let s = spin_z(build_kane_mele(&params).basis())?;
            let checks = verify_localization_identities(
                pk.kernel(),
                &s,
                &SwitchFunction::sharp(Axis::One),
                &SwitchFunction::sharp(Axis::Two),
                L_MAX,
            )?;
            for (name, x) in [
                ("single switch", checks.single_switch),
                ("double switch", checks.double_switch),
                ("shifted double switch", checks.shifted_double_switch),
            ] {
                c.check(
                    x.holds(),
                    format!(
                        "{name}: residual {:.1e} <= bound {:.1e}",
                        x.residual, x.bound
                    ),
                );
            }
            for sw in [
                SwitchFunction::sharp(Axis::One),
                SwitchFunction::default_ramp(Axis::One),
                SwitchFunction::xi(Axis::One, 7.0),
            ] {
                let worst = (-20..=20)
                    .map(|n| (sw.summation_identity(n) - n as f64).abs())
                    .fold(0.0, f64::max);
                c.check(
                    worst <= 1e-12,
                    format!(
                        "summation identity for {:?}, |n| <= 20: residual {worst:.1e}",
                        sw.profile
                    ),
                );
            }
            Ok(())
        },
    )
}

fn decomposition() -> Outcome {
    run(9, "approximate-position decomposition of G_K", |c| {
        let pk = projector(&km(1.0, 0.1, 0.06, 0.05), M, R)?;
        let s = sigma_k(pk.kernel())?.value;
        let l2 = SwitchFunction::sharp(Axis::Two);
        let d7 = gk_decomposition(pk.kernel(), 7.0, &l2, L_MAX)?;
        let d14 = gk_decomposition(pk.kernel(), 14.0, &l2, L_MAX)?;
        for d in [&d7, &d14] {
            let diff = (d.g_a_over_l.value - s).abs();
            c.check(
                diff <= 1e-4,
                format!(
                    "l={}: G_a/l = {:.8}, |G_a/l - sigma_K| = {diff:.2e}",
                    d.l, d.g_a_over_l.value
                ),
            );
            c.check(
                d.g_b_max_abs <= 1e-8,
                format!("l={}: max |G_b stripe sum| = {:.1e}", d.l, d.g_b_max_abs),
            );
        }
        let drift = (d7.g_a_over_l.value - d14.g_a_over_l.value).abs();
        c.check(drift <= 1e-6, format!("l -> 2l drift {drift:.1e}"));
        Ok(())
    })
}

fn near_sightedness() -> Outcome {
    run(10, "exponential decay fit of the Fermi projection", |c| {
        let mut zeta = Vec::new();
        for p in [
            km(1.0, 0.1, 0.06, 0.0),
            km(1.0, 0.1, 0.06, 0.05),
            km(1.0, 0.1, 0.2, 0.0),
            km(1.0, 0.1, 0.06, 0.3),
        ] {
            let pk = projector(&p, M, R)?;
            let fit = pk.decay().ok_or("no decay fit")?;
            c.check(
                fit.r_squared >= 0.99,
                format!(
                    "(lambda_so={}, lambda_R={}): R^2 = {:.4}, zeta = {:.3}",
                    p.lambda_so, p.lambda_r, fit.r_squared, fit.zeta
                ),
            );
            if p.lambda_r == 0.0 {
                zeta.push(fit.zeta);
            }
        }
        c.check(
            zeta[1] < zeta[0],
            format!(
                "zeta shrinks from {:.3} to {:.3} as lambda_so goes 0.06 -> 0.2",
                zeta[0], zeta[1]
            ),
        );
        Ok(())
    })
}

fn main() {
    let criteria: [fn() -> Outcome; 10] = [
        torque_vanishes,
        conductance_matches_conductivity,
        switch_independence,
        quantization,
        charge_transport,
        oracle_equivalence,
        trace_functionals,
        localization_identities,
        decomposition,
        near_sightedness,
    ];
    let outcomes: Vec<Outcome> = criteria.iter().map(|f| f()).collect();
    println!();
    for o in &outcomes {
        println!("{}", o.line());
        for d in &o.details {
            println!("    {d}");
        }
    }
    let failed: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    println!();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        outcomes.len() - failed.len(),
        failed.len(),
        failed
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
