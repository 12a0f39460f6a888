//! Property tests for the structural invariants every build must keep.

use proptest::prelude::*;
use selfaffine::{
    build_cylinders, build_pseudo_norm, build_renorm, count_distinct, decide_osc, default_theta,
    expansion_enumerate, ExpandingMatrix, ExpandingSystem, NormVariant, OscVerdict, PseudoNorm,
    RenormedNorm,
};

fn matrix_pool() -> Vec<ExpandingMatrix> {
    vec![
        ExpandingMatrix::from_i64(1, &[3]).unwrap(),
        ExpandingMatrix::from_i64(1, &[-2]).unwrap(),
        ExpandingMatrix::from_i64(2, &[2, 0, 0, 3]).unwrap(),
        ExpandingMatrix::from_i64(2, &[1, -1, 1, 1]).unwrap(),
        ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap(),
        ExpandingMatrix::from_f64(2, &[1.5, 0.25, 0.0, -1.75]).unwrap(),
    ]
}

fn norms_for(idx: usize) -> (ExpandingMatrix, RenormedNorm, PseudoNorm) {
    let pool = matrix_pool();
    let a = pool[idx % pool.len()].clone();
    let rn = build_renorm(&a, default_theta(&a)).unwrap();
    let pn = build_pseudo_norm(&a, NormVariant::Step, None).unwrap();
    (a, rn, pn)
}

fn system_pool() -> Vec<ExpandingSystem> {
    vec![
        ExpandingSystem::new_integer(1, &[3], &[0, 2]).unwrap(),
        ExpandingSystem::new_integer(1, &[3], &[0, 1, 3]).unwrap(),
        ExpandingSystem::new_integer(1, &[2], &[0, 1]).unwrap(),
        ExpandingSystem::new_integer(2, &[2, 0, 0, 2], &[0, 0, 1, 0, 0, 1, 1, 1]).unwrap(),
        ExpandingSystem::new_integer(2, &[1, -1, 1, 1], &[0, 0, 1, 0]).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_norm_is_symmetric_bit_exact(
        idx in 0usize..6,
        coords in prop::collection::vec(-50.0f64..50.0, 2),
    ) {
        let (a, _, pn) = norms_for(idx);
        let x = &coords[..a.n];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(pn.eval(x).to_bits(), pn.eval(&neg).to_bits());
    }

    #[test]
    fn pseudo_norm_is_homogeneous(
        idx in 0usize..6,
        coords in prop::collection::vec(-50.0f64..50.0, 2),
    ) {
        let (a, rn, pn) = norms_for(idx);
        let x = &coords[..a.n];
        let w = pn.eval(x);
        prop_assume!(w > 1e-12);
        let ax = rn.apply_a(x);
        let scale = a.q.powf(1.0 / a.n as f64);
        let rel = (pn.eval(&ax) - scale * w).abs() / (scale * w);
        prop_assert!(rel < 1e-9, "homogeneity off by {rel}");
    }

    #[test]
    fn certified_brackets_contain_the_value(
        idx in 0usize..6,
        coords in prop::collection::vec(-50.0f64..50.0, 2),
    ) {
        let (a, rn, pn) = norms_for(idx);
        let x = &coords[..a.n];
        let t = rn.eval(x);
        prop_assume!(t > 1e-12);
        let w = pn.eval(x);
        let hi = pn.upper_bound_for_renorm(t);
        prop_assert!(w <= hi * (1.0 + 1e-9), "w {w} above certified {hi}");
        if let Ok(lo) = pn.lower_bound_for_renorm(t) {
            prop_assert!(w >= lo * (1.0 - 1e-9), "w {w} below certified {lo}");
        }
    }

    #[test]
    fn renormed_norm_is_a_norm_and_expands(
        idx in 0usize..6,
        ca in prop::collection::vec(-20.0f64..20.0, 2),
        cb in prop::collection::vec(-20.0f64..20.0, 2),
    ) {
        let (a, rn, _) = norms_for(idx);
        let x = &ca[..a.n];
        let y = &cb[..a.n];
        let sum: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
        prop_assert!(rn.eval(&sum) <= rn.eval(x) + rn.eval(y) + 1e-9);
        let nx = rn.eval(x);
        prop_assume!(nx > 1e-9);
        let ax = rn.apply_a(x);
        prop_assert!(rn.eval(&ax) >= rn.theta * nx * (1.0 - 1e-9));
    }

    #[test]
    fn distinct_counts_match_osc(idx in 0usize..5, depth in 1usize..5) {
        let sys = &system_pool()[idx];
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let set = expansion_enumerate(sys, depth, 1 << 20).unwrap();
        let words = sys.words_at_depth(depth) as usize;
        let distinct = count_distinct(sys, &set);
        prop_assert!(distinct <= words);
        let rep = decide_osc(sys, &rn, 32, 1 << 20).unwrap();
        match rep.verdict {
            OscVerdict::Holds => prop_assert_eq!(distinct, words),
            OscVerdict::Fails { .. } => {
                // A collision at some depth need not show at every depth, but
                // the witness depth itself must lose at least one word.
            }
            OscVerdict::Unknown { .. } => {}
        }
    }

    #[test]
    fn cylinder_masses_form_a_distribution(idx in 0usize..5, depth in 1usize..7) {
        let sys = &system_pool()[idx];
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let cyl = build_cylinders(sys, &rn, depth, 1 << 20).unwrap();
        let total: f64 = cyl.masses.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "masses sum to {total}");
        prop_assert!(cyl.masses.iter().all(|&m| m > 0.0));
        let heaviest = cyl.multiplicities.iter().copied().max().unwrap();
        prop_assert_eq!(heaviest, cyl.max_multiplicity);
    }

    #[test]
    fn shell_reduction_matches_direct_eval(
        idx in 0usize..6,
        coords in prop::collection::vec(-900.0f64..900.0, 2),
    ) {
        let (a, _, pn) = norms_for(idx);
        let x = &coords[..a.n];
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        // Shell reduction: w(x) = q^{k/n}·w(A^{-k}x) with the reduced point in
        // the base annulus.
        if let Some((k, y)) = pn.shell_reduce(x) {
            let w = pn.eval(x);
            let wy = pn.eval(&y);
            let rel = (w - pn.q_pow(k) * wy).abs() / w.max(1e-300);
            prop_assert!(rel < 1e-9, "shell reduction off by {rel}");
        }
    }
}
