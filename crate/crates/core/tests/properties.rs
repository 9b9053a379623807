use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slnq_core::bogolyubov::GroupSet;
use slnq_core::calculus::{avg_quotient, laplacian};
use slnq_core::fqlin::{enumerate_all_subspaces, SUBSPACE_CAP};
use slnq_core::gf::FieldCtx;
use slnq_core::globality::global_audit;
use slnq_core::groups::{GroupKind, GroupTable, LevelBasisSet, LevelOptions};
use slnq_core::scheme::{DegreeMode, FnTable, SchemeCtx};
use slnq_core::spectra::inequalities::holds_log;
use slnq_core::spectra::level_invariance_residual;

fn scheme(q: usize, n: usize, m: usize) -> SchemeCtx {
    SchemeCtx::new(Arc::new(FieldCtx::new(q).unwrap()), n, m).unwrap()
}

fn noise(len: usize, tag: slnq_core::scheme::Domain, seed: u64) -> FnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FnTable::new(tag, (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

fn domain() -> impl Strategy<Value = (usize, usize, usize)> {
    (prop::sample::select(vec![2usize, 3, 4, 5]), 1usize..=2, 1usize..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_is_unitary((q, n, m) in domain(), seed in any::<u64>()) {
        let ctx = scheme(q, n, m);
        let f = noise(ctx.size(), ctx.tag(), seed);
        let s = ctx.forward(&f);
        prop_assert!((s.energy() - f.norm2_sq()).abs() < 1e-10);
        prop_assert!(ctx.inverse(&s).max_abs_diff(&f) < 1e-10);
        let d = ctx.forward_direct(&f);
        let gap = s.coeffs.iter().zip(&d.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-10);
    }

    #[test]
    fn degree_parts_are_an_orthogonal_decomposition((q, n, m) in domain(), seed in any::<u64>()) {
        let ctx = scheme(q, n, m);
        let f = noise(ctx.size(), ctx.tag(), seed);
        let parts: Vec<FnTable> = (0..=ctx.max_degree()).map(|d| ctx.degree_project(&f, d, DegreeMode::Pure).unwrap()).collect();
        let mut sum = ctx.constant(0.0);
        let mut energy = 0.0;
        for p in &parts {
            sum = sum.add(p);
            energy += p.norm2_sq();
        }
        prop_assert!(sum.max_abs_diff(&f) < 1e-10);
        prop_assert!((energy - f.norm2_sq()).abs() < 1e-10);
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                prop_assert!(a.inner(b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn laplacians_and_quotient_averages_are_projections((q, n, m) in domain(), seed in any::<u64>()) {
        let ctx = scheme(q, n, m);
        let f = noise(ctx.size(), ctx.tag(), seed);
        let vs = enumerate_all_subspaces(&ctx.field, n, SUBSPACE_CAP).unwrap();
        let ws = enumerate_all_subspaces(&ctx.field, m, SUBSPACE_CAP).unwrap();
        for v in &vs {
            let e = avg_quotient(&ctx, &f, v).unwrap();
            prop_assert!(avg_quotient(&ctx, &e, v).unwrap().max_abs_diff(&e) < 1e-10);
            for w in &ws {
                let l = laplacian(&ctx, &f, v, w);
                prop_assert!(laplacian(&ctx, &l, v, w).max_abs_diff(&l) < 1e-10);
                prop_assert!(l.norm2_sq() <= f.norm2_sq() + 1e-10);
            }
        }
    }

    #[test]
    fn restriction_maxima_grow_with_order((q, n, m) in domain(), seed in any::<u64>()) {
        let ctx = scheme(q, n, m);
        let f = noise(ctx.size(), ctx.tag(), seed);
        let r = global_audit(&ctx, &f, n + m, &|_| None).unwrap();
        prop_assert!((r.max_at(0) - f.norm2_sq()).abs() < 1e-10);
        for d in 1..r.rows.len() {
            prop_assert!(r.max_at(d) >= r.max_at(d - 1) - 1e-10);
        }
        let top = r.rows.last().unwrap().max;
        prop_assert!((top - f.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)).abs() < 1e-10);
    }

    #[test]
    fn log_domain_comparison(x in 1e-6f64..1e6) {
        prop_assert!(holds_log(x, x.ln()));
        prop_assert!(holds_log(x, x.ln() + 1.0));
        prop_assert!(!holds_log(1.01 * x + 1e-9, x.ln()));
    }
}

fn sl(n: usize, q: usize) -> GroupTable {
    GroupTable::enumerate(GroupKind::SL, n, Arc::new(FieldCtx::new(q).unwrap())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn group_convolution_is_associative(seed in any::<u64>()) {
        let g = sl(2, 3);
        let f = noise(g.order(), g.tag(), seed);
        let h = noise(g.order(), g.tag(), seed ^ 1);
        let k = noise(g.order(), g.tag(), seed ^ 2);
        let left = g.convolve(&g.convolve(&f, &h), &k);
        let right = g.convolve(&f, &g.convolve(&h, &k));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn level_parts_decompose_and_are_invariant(seed in any::<u64>()) {
        let g = sl(2, 3);
        let lv = LevelBasisSet::build(&g, LevelOptions::strict(2)).unwrap();
        let f = noise(g.order(), g.tag(), seed);
        let mut energy = 0.0;
        let mut sum = g.constant(0.0);
        for d in 0..=2 {
            let p = lv.level_project(&f, d, DegreeMode::Pure).unwrap();
            energy += p.norm2_sq();
            sum = sum.add(&p);
            if lv.level_dim(d) > 0 {
                prop_assert!(level_invariance_residual(&g, &lv, &f, d).unwrap() < 1e-9);
            }
        }
        prop_assert!((energy - f.norm2_sq()).abs() < 1e-9);
        prop_assert!(sum.max_abs_diff(&f) < 1e-9);
    }

    #[test]
    fn set_products(bits in prop::collection::vec(any::<bool>(), 24), bits2 in prop::collection::vec(any::<bool>(), 24)) {
        let g = sl(2, 3);
        let a = GroupSet::new(&g, (0..24).filter(|&i| bits[i])).unwrap();
        let b = GroupSet::new(&g, (0..24).filter(|&i| bits2[i])).unwrap();
        prop_assert_eq!(a.inverse(&g).inverse(&g), a.clone());
        let ab = a.product(&g, &b);
        if !a.is_empty() && !b.is_empty() {
            prop_assert!(ab.len() >= a.len().max(b.len()));
        }
        prop_assert_eq!(ab.inverse(&g), b.inverse(&g).product(&g, &a.inverse(&g)));
    }
}
