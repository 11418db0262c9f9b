use nalgebra::DMatrix;
use proptest::prelude::*;

use spinkubo::kernel_algebra::HolmgrenNorm;
use spinkubo::lattice_model::{
    bloch_fiber, build_kane_mele, verify_time_reversal, Axis, KaneMeleParams, SwitchFunction,
    SwitchProfile, C64,
};
use spinkubo::spectral::{
    band_spectrum, detect_gap, fermi_fibers, fermi_projection, projection_kernel, BzGrid,
};
use spinkubo::torus_oracle::{build_torus, spectral_duality_residual, torus_fermi_projection};
use spinkubo::transport::{conductance_gk, sigma_k, torque_response};

fn topological() -> impl Strategy<Value = KaneMeleParams> {
    (0.0..0.15f64, 0.05..0.2f64, 0.0..0.08f64)
        .prop_map(|(v, so, r)| KaneMeleParams::new(1.0, v, so, r))
}

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fibers_are_hermitian(p in topological(), k1 in -4.0..4.0f64, k2 in -4.0..4.0f64) {
        let h = bloch_fiber(&build_kane_mele(&p), [k1, k2]);
        prop_assert!(max_entry(&(&h - h.adjoint())) <= 1e-13);
    }

    #[test]
    fn time_reversal_holds_for_all_couplings(p in topological()) {
        prop_assert!(verify_time_reversal(&build_kane_mele(&p)).unwrap() <= 1e-13);
    }

    #[test]
    fn spectrum_is_symmetric_without_staggering_or_rashba(
        t in 0.5..1.5f64, so in 0.0..0.3f64, k1 in -4.0..4.0f64, k2 in -4.0..4.0f64,
    ) {
        let h = build_kane_mele(&KaneMeleParams::new(t, 0.0, so, 0.0));
        let mut e: Vec<f64> = bloch_fiber(&h, [k1, k2]).symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for i in 0..e.len() {
            prop_assert!((e[i] + e[e.len() - 1 - i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn switch_summation_identity_is_exact(at in -10i64..10, start in -10i64..0, width in 1i64..12, l in 1.0..15.0f64) {
        for profile in [
            SwitchProfile::Step { at },
            SwitchProfile::Ramp { start, end: start + width },
            SwitchProfile::Xi { l },
        ] {
            let sw = SwitchFunction { axis: Axis::One, profile };
            for n in -20i64..=20 {
                let s = sw.summation_identity(n);
                prop_assert!((s - n as f64).abs() <= 1e-12, "{profile:?} n={n} sum={s}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn kernel_rank_and_self_adjointness(p in topological()) {
        let h = build_kane_mele(&p);
        let grid = BzGrid::new(24).unwrap();
        let gap = detect_gap(&band_spectrum(&h, grid), 2, None);
        prop_assume!(gap.is_ok());
        let fibers = fermi_fibers(&h, grid, &gap.unwrap()).unwrap();
        prop_assert!(fibers.ranks().iter().all(|r| (r - 2.0).abs() <= 1e-10));
        let k = projection_kernel(&fibers, 8, 0.0, 2).unwrap();
        let k = k.kernel();
        for n in k.offsets() {
            let diff = k.block_matrix([-n[0], -n[1]]) - k.block_matrix(n).adjoint();
            prop_assert!(max_entry(&diff) <= 1e-13);
        }
    }

    #[test]
    fn idempotency_defect_within_tail_estimate(p in topological()) {
        let h = build_kane_mele(&p);
        let r = fermi_projection(&h, 24, Some(8), 2, None);
        prop_assume!(r.is_ok());
        let (_, _, k) = r.unwrap();
        prop_assert!(k.idempotency_residual() <= k.tail_estimate(), "{} > {}", k.idempotency_residual(), k.tail_estimate());
    }

    #[test]
    fn grid_refinement_is_stable_for_short_range_kernels(v in 0.8..1.2f64, so in 0.0..0.1f64, r in 0.0..0.1f64) {
        let h = build_kane_mele(&KaneMeleParams::new(1.0, v, so, r));
        let (_, _, a) = fermi_projection(&h, 36, Some(6), 2, None).unwrap();
        let (_, _, b) = fermi_projection(&h, 72, Some(6), 2, None).unwrap();
        prop_assert!(a.kernel().max_abs_diff(b.kernel()) <= 1e-8);
    }

    #[test]
    fn holmgren_dominates_finite_sections(p in topological()) {
        let (_, _, k) = fermi_projection(&build_kane_mele(&p), 24, Some(6), 2, None).unwrap();
        let k = k.kernel();
        let cells: Vec<[i64; 2]> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, b])).collect();
        let d = k.dim();
        let mut section = DMatrix::<C64>::zeros(d * cells.len(), d * cells.len());
        for (i, m) in cells.iter().enumerate() {
            for (j, n) in cells.iter().enumerate() {
                section.view_mut((i * d, j * d), (d, d)).copy_from(&k.block_matrix([n[0] - m[0], n[1] - m[1]]));
            }
        }
        let top = section.singular_values().max();
        prop_assert!(k.holmgren_norm() >= top - 1e-12);
    }

    #[test]
    fn sigma_is_independent_of_mu_inside_the_gap(p in topological()) {
        let h = build_kane_mele(&p);
        let grid = BzGrid::new(24).unwrap();
        let gap = detect_gap(&band_spectrum(&h, grid), 2, None);
        prop_assume!(gap.is_ok());
        let gap = gap.unwrap();
        let values: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&f| {
                let (_, _, k) = fermi_projection(&h, 24, Some(8), 2, Some(gap.with_mu_fraction(f).mu)).unwrap();
                sigma_k(k.kernel()).unwrap().value
            })
            .collect();
        prop_assert!((values[0] - values[1]).abs() <= 1e-10 && (values[2] - values[1]).abs() <= 1e-10, "{values:?}");
    }

    #[test]
    fn reported_quantities_are_real(p in topological()) {
        let r = fermi_projection(&build_kane_mele(&p), 24, Some(6), 2, None);
        prop_assume!(r.is_ok());
        let (_, _, k) = r.unwrap();
        let k = k.kernel();
        prop_assert!(sigma_k(k).unwrap().imag.abs() <= 1e-9);
        prop_assert!(torque_response(k).unwrap().imag.abs() <= 1e-9);
        let g = conductance_gk(k, &SwitchFunction::sharp(Axis::One), &SwitchFunction::sharp(Axis::Two), 15, None).unwrap();
        prop_assert!(g.value.imag.abs() <= 1e-9);
    }

    #[test]
    fn torus_spectrum_is_the_union_of_fiber_spectra(p in topological()) {
        let h = build_kane_mele(&p);
        let sys = build_torus(&h, 7).unwrap();
        let proj = torus_fermi_projection(&sys, 1e3).unwrap();
        prop_assert!(spectral_duality_residual(&h, &sys, &proj).unwrap() <= 1e-12);
    }
}
