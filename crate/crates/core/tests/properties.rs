//! Randomized invariants across the library.

use cdlab::blockops::{
    adjoint_isometry_check, assemble, blockwise_contraction_scan, contraction_check, ex48_trial, frame_solver,
    random_ex48_instance, Block, BlockOperator,
};
use cdlab::matrix::{block_determinant, psd_check, schur_split_psd, ComplexMatrix};
use cdlab::random::{complex_gaussian_matrix, hermitian_with_spectrum, random_psd, random_unitary, seeded, uniform};
use cdlab::rkhs::{
    curvature_fd, curvature_profile, curvature_series, metric_eval, shift_from_kernel, szego_power_coeffs,
    CurvatureMethod,
};
use cdlab::shifts::{
    binomial, defect_operator, defect_operator_recursive, defect_report, hypercontractivity_report, materialize,
    partial_product_extremes, sandwich_operator, WeightSequence,
};
use cdlab::similarity::{
    commutator_example, curvature_quotient_necessary, det_ratio_profile, direct_sum_det, subharmonic_witness_check,
    DiagonalX, MetricSource,
};
use cdlab::LabError;
use num_complex::Complex64;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

/// Gaussian elimination with partial pivoting, kept separate from the library's LU.
fn oracle_det(m: &ComplexMatrix) -> Complex64 {
    let n = m.rows();
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
        if a[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    det
}

fn random_weights(seed: u64, len: usize, hi: f64) -> WeightSequence {
    let mut rng = seeded(seed);
    WeightSequence::explicit((0..len).map(|_| uniform(&mut rng, 0.05, hi)).collect()).unwrap()
}

fn szego_shift(k: u32) -> WeightSequence {
    WeightSequence::szego(k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn schur_split_matches_psd_check(seed in any::<u64>(), n in 2usize..=12, split_frac in 0.0f64..1.0, neg in 0usize..3) {
        let mut rng = seeded(seed);
        let spectrum: Vec<f64> = (0..n).map(|i| if i < neg { -uniform(&mut rng, 0.01, 1.0) } else { uniform(&mut rng, 0.01, 2.0) }).collect();
        let a = hermitian_with_spectrum(&spectrum, &mut rng);
        let split = 1 + ((n - 1) as f64 * split_frac) as usize;
        let split = split.min(n - 1);
        match schur_split_psd(&a, split, TOL) {
            Ok((lead, schur)) => prop_assert_eq!(psd_check(&a, TOL).unwrap().is_psd, lead.is_psd && schur.is_psd),
            Err(LabError::Singularity(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn block_determinant_matches_elimination(seed in any::<u64>(), n in 2usize..=10, split in 1usize..=9) {
        prop_assume!(split < n);
        let mut rng = seeded(seed);
        let a = complex_gaussian_matrix(n, n, &mut rng);
        let lead = a.leading(split);
        prop_assume!(lead.condition_number().map(|c| c < 1e8).unwrap_or(false));
        let got = block_determinant(&a, split).unwrap();
        let want = oracle_det(&a);
        prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0) * 10.0, "{got} vs {want}");
    }

    #[test]
    fn determinant_superadditive_on_psd(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = seeded(seed);
        let n1 = random_psd(n, 0.0, &mut rng);
        let n2 = random_psd(n, 0.0, &mut rng);
        let d = |m: &ComplexMatrix| oracle_det(m).re;
        prop_assert!(d(&(&n1 + &n2)) >= (d(&n1) + d(&n2)) * (1.0 - 1e-10) - 1e-12);
    }

    #[test]
    fn psd_min_eigenvalue_unitarily_invariant(seed in any::<u64>(), n in 2usize..=10) {
        let mut rng = seeded(seed);
        let spectrum: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let a = hermitian_with_spectrum(&spectrum, &mut rng);
        let u = random_unitary(n, &mut rng);
        let b = &(&u.adjoint() * &a) * &u;
        let (va, vb) = (psd_check(&a, TOL).unwrap(), psd_check(&b.hermitian_part(), TOL).unwrap());
        prop_assert!((va.min_eigenvalue - vb.min_eigenvalue).abs() < 1e-10);
    }

    #[test]
    fn defect_recursion_matches_binomial_sum(seed in any::<u64>(), k in 1usize..=5, n in 8usize..=20) {
        let t = materialize(&random_weights(seed, n, 1.3), n).unwrap();
        let sum = defect_operator(&t, k).unwrap();
        let rec = defect_operator_recursive(&t, k).unwrap();
        prop_assert!((&sum - &rec).max_abs_entry() <= 1e-12);
    }

    #[test]
    fn interior_window_is_stable(seed in any::<u64>(), k in 1usize..=4, n in 10usize..=24) {
        let w = random_weights(seed, n + 8, 1.2);
        let small = defect_operator(&materialize(&w, n).unwrap(), k).unwrap();
        let large = defect_operator(&materialize(&w, n + 8).unwrap(), k).unwrap();
        let keep = n - k;
        prop_assert!((&small.leading(keep) - &large.leading(keep)).max_abs_entry() <= 1e-14);
    }

    #[test]
    fn shields_reflexive(seed in any::<u64>(), horizon in 2usize..200) {
        let a = random_weights(seed, horizon, 2.0);
        let b = random_weights(seed ^ 0x9e37, horizon, 2.0);
        let (sup_ab, _) = partial_product_extremes(&a, &b, horizon).unwrap();
        let (_, inf_ba) = partial_product_extremes(&b, &a, horizon).unwrap();
        prop_assert!((sup_ab.ln() + inf_ba.ln()).abs() < 1e-10);
        let (sup_aa, inf_aa) = partial_product_extremes(&a, &a, horizon).unwrap();
        prop_assert_eq!((sup_aa, inf_aa), (1.0, 1.0));
    }

    #[test]
    fn sandwich_contractive_when_hypercontractive(k in 1u32..=4, scale in 0.3f64..=1.0, bump in 0usize..6, shrink in 0.3f64..=1.0) {
        let w = szego_shift(k).scaled(scale).unwrap();
        let w = w.with_weight(bump, w.weight(bump).unwrap() * shrink).unwrap();
        let n = k as usize;
        let order = 24;
        let t = materialize(&w, order).unwrap();
        prop_assume!(defect_report(&t, n, TOL).unwrap().passes());
        let s = sandwich_operator(&t, n).unwrap();
        let keep = t.interior_indices(n);
        let eig = s.principal(&keep).hermitian_eigenvalues().unwrap();
        prop_assert!(eig[0] >= -TOL && *eig.last().unwrap() <= 1.0 + TOL, "{eig:?}");
    }

    #[test]
    fn fd_curvature_tracks_series(k in 1u32..=5, r in 0.0f64..0.95, step in 1e-3f64..1e-2) {
        let kern = szego_power_coeffs(k).unwrap();
        let fd = curvature_fd(&kern, r, step).unwrap();
        let s = curvature_series(&kern, r).unwrap();
        prop_assert!((fd - s).abs() <= 1e-6f64.max(10.0 * step * step) * s.abs().max(1.0));
    }

    #[test]
    fn curvature_scales_with_power(k in 1u32..=6, r in 0.0f64..0.98) {
        let a = curvature_series(&szego_power_coeffs(k).unwrap(), r).unwrap();
        let b = curvature_series(&szego_power_coeffs(k + 1).unwrap(), r).unwrap();
        prop_assert!((b / a - (k + 1) as f64 / k as f64).abs() < 1e-10);
    }

    #[test]
    fn szego_section_norm(k in 1u32..=6, r in 0.0f64..0.99) {
        let h = metric_eval(&szego_power_coeffs(k).unwrap(), r).unwrap();
        prop_assert!((h * (1.0 - r * r).powi(k as i32) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn blocks_of_contractions_contract(seed in any::<u64>(), grid in 1usize..=3, n in 3usize..=6) {
        let mut rng = seeded(seed);
        let blocks: Vec<Vec<Block>> = (0..grid)
            .map(|i| (0..grid).map(|j| if j >= i { Block::Explicit(complex_gaussian_matrix(n, n, &mut rng)) } else { Block::Zero }).collect())
            .collect();
        let op = BlockOperator::new(blocks, n, true).unwrap();
        let norm = assemble(&op).unwrap().matrix().spectral_norm();
        let scaled: Vec<Vec<Block>> = (0..grid)
            .map(|i| (0..grid).map(|j| match op.block(i, j) {
                Block::Explicit(m) => Block::Explicit(m.scale_real(uniform(&mut rng, 0.5, 1.0) / norm)),
                other => other.clone(),
            }).collect())
            .collect();
        let op = BlockOperator::new(scaled, n, true).unwrap();
        let scan = blockwise_contraction_scan(&op, TOL).unwrap();
        prop_assume!(scan.assembled.is_psd);
        prop_assert!(scan.block_violations.is_empty());
        prop_assert!(scan.blocks.iter().all(|b| b.contraction));
        prop_assert!(scan.column_contractions.iter().all(|&c| c));
    }

    #[test]
    fn assembled_hypercontraction_passes_to_leading_block(k in 1u32..=3, s1 in 0.5f64..=1.0, s2 in 0.5f64..=1.0, d in 0.0f64..0.6, n in 1usize..=3) {
        let op = BlockOperator::upper_2x2(
            Block::Shift(szego_shift(k).scaled(s1).unwrap()),
            Block::real_diagonal(&[d], 0.0),
            Block::Shift(szego_shift(k).scaled(s2).unwrap()),
            16,
        ).unwrap();
        let whole = defect_report(&assemble(&op).unwrap(), n, TOL).unwrap();
        prop_assume!(whole.passes());
        let lead = defect_report(&materialize(&szego_shift(k).scaled(s1).unwrap(), 16).unwrap(), n, TOL).unwrap();
        prop_assert!(lead.passes());
    }

    #[test]
    fn ex48_closed_form_agrees_with_oracle(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let trial = ex48_trial(&random_ex48_instance(&mut rng, 16, 5), 1e6, TOL).unwrap();
        prop_assert!(trial.agrees(), "{trial:?}");
        prop_assert!(trial.schur_agrees(), "{trial:?}");
    }

    #[test]
    fn frame_gram_positive_definite(k in 1u32..=3, d in 0.0f64..1.0, re in -0.67f64..0.67, im in -0.67f64..0.67) {
        let op = BlockOperator::upper_2x2(
            Block::Shift(szego_shift(k)),
            Block::real_diagonal(&[d], 0.0),
            Block::Shift(szego_shift(1)),
            512,
        ).unwrap();
        let g = frame_solver(&op, Complex64::new(re, im)).unwrap();
        let eig = g.gram.hermitian_eigenvalues().unwrap();
        prop_assert!(eig[0] > 0.0);
        prop_assert!(g.det > 0.0);
    }

    #[test]
    fn commutator_pinch(entries in proptest::collection::vec(-1.0f64..1.0, 1..4), fill in -0.5f64..0.5) {
        let x = DiagonalX::new(entries, fill).unwrap();
        let radii = [0.1, 0.3, 0.5, 0.7];
        let rep = commutator_example(&x, 256, &radii).unwrap();
        prop_assert!(rep.pinch_ok, "{:?}", rep.profile.ratio);
        prop_assert!(rep.profile.ratio.iter().all(|&q| q > 0.0));
        let h: Vec<f64> = radii.iter().map(|&r| 1.0 / (1.0 - r * r)).collect();
        let split = direct_sum_det(&h, &h).unwrap();
        for (f, s) in rep.frame_det.iter().zip(&split) {
            prop_assert!(*f >= s * (1.0 - 1e-10));
        }
    }

    #[test]
    fn curvature_quotient_reflexive(k in 1u32..=4, bound in 1.0f64..4.0) {
        let radii: Vec<f64> = (0..=9).map(|i| i as f64 / 10.0).collect();
        let p = curvature_profile(&szego_power_coeffs(k).unwrap(), &radii, CurvatureMethod::Series, 1e-3).unwrap();
        prop_assert!(curvature_quotient_necessary(&p, &p, bound).unwrap().passes);
    }
}

#[test]
fn hockey_stick_identity() {
    for n in 2..=40u64 {
        for j in 1..n {
            let tail: u128 = (j - 1..n).map(|l| binomial(l, j - 1)).sum();
            assert_eq!(binomial(n, j), tail, "n = {n}, j = {j}");
        }
    }
}

#[test]
fn kernel_shift_round_trip_is_hypercontractive() {
    for k in 1..=4u32 {
        let w = shift_from_kernel(&szego_power_coeffs(k).unwrap()).unwrap();
        let rep = hypercontractivity_report(&w, k as usize, 32, TOL).unwrap();
        assert!(rep.passes(), "Szegő-{k}: {rep:?}");
    }
}

#[test]
fn isometry_forces_hardy_curvature() {
    let w = WeightSequence::hardy();
    assert!(adjoint_isometry_check(&w, 4096, 1e-12).unwrap().isometry);
    let k = cdlab::rkhs::DiagonalKernel::from_shift(1.0, w).unwrap();
    for i in 0..10 {
        let r = i as f64 / 10.0;
        let want = -1.0 / (1.0 - r * r).powi(2);
        assert!((curvature_series(&k, r).unwrap() - want).abs() < 1e-10 * want.abs());
    }
}

#[test]
fn witness_vanishes_for_matching_direct_sum() {
    let radii: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for k in 1..=3u32 {
        let kern = szego_power_coeffs(k).unwrap();
        let src = MetricSource::Kernels(vec![kern.clone(), kern.clone()]);
        let prof = det_ratio_profile(&src, &kern, 2, &radii).unwrap();
        assert!(prof.phi().iter().all(|p| p.abs() < 1e-12), "{:?}", prof.phi());
        let w = subharmonic_witness_check(&src, &src, &kern, 2, &radii, 1e-3, TOL).unwrap();
        assert!(w.max_residual < 1e-10, "{w:?}");
        assert!(w.phi_sup < 1e-12);
    }
}

#[test]
fn contraction_check_sees_scaled_shift() {
    for k in 1..=3 {
        let t = materialize(&szego_shift(k), 16).unwrap();
        assert!(contraction_check(&t, TOL).unwrap().is_psd);
        assert!(!contraction_check(&t.scaled(1.1), TOL).unwrap().is_psd);
    }
}
