use acd::harness::{gen_lasso, gen_random_quadratic};
use acd::lipschitz::{
    diagonal_scaling, estimate_coord_lipschitz, max_parallelism, profile, profile_quadratic, rescale_uniform_diagonal,
};
use acd::{CsrMatrix, LipschitzProfile, ProblemInstance, Regularizer, SmoothPart};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sparse_row_norm_bound() {
    for s in [1, 3, 5, 10, 17] {
        for seed in 0..5 {
            let p = gen_random_quadratic(80, s, 0.05, 1.0, seed).unwrap();
            let prof = profile(p.smooth()).unwrap();
            assert!(prof.l_res_bar <= (s as f64).sqrt() * prof.l_max + 1e-9);
        }
    }
}

fn uneven_quadratic(seed: u64) -> ProblemInstance {
    let base = gen_random_quadratic(20, 5, 0.2, 1.0, seed).unwrap();
    let SmoothPart::Quadratic { a, b } = base.smooth() else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale: Vec<f64> = (0..20).map(|_| rng.gen_range(0.3..3.0)).collect();
    let a2 = a.scale_symmetric(&scale);
    let regs = (0..20)
        .map(|k| match k % 4 {
            0 => Regularizer::Zero,
            1 => Regularizer::L1 { lambda: 0.3 },
            2 => Regularizer::SquaredL2 { lambda: 0.5 },
            _ => Regularizer::Hinge { lambda: 0.2 },
        })
        .collect();
    ProblemInstance::new(SmoothPart::quadratic(a2, b.clone()).unwrap(), regs).unwrap()
}

#[test]
fn rescaling_equalizes_the_diagonal_and_preserves_values() {
    for seed in 0..5 {
        let p = uneven_quadratic(seed);
        let s = diagonal_scaling(&p).unwrap();
        let r = rescale_uniform_diagonal(&p).unwrap();
        let prof = profile(r.smooth()).unwrap();
        let top = prof.l_diag.iter().copied().fold(0.0, f64::max);
        assert!(prof.l_diag.iter().all(|&d| (d - top).abs() <= 1e-12 * top));
        let again = profile_quadratic(&match r.smooth() {
            SmoothPart::Quadratic { a, .. } => a.clone(),
            _ => unreachable!(),
        })
        .unwrap();
        assert_eq!(again.l_diag, prof.l_diag);

        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..50 {
            let xp: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = xp.iter().zip(&s).map(|(v, si)| v * si).collect();
            let (f, fp) = (p.eval_objective(&x).unwrap(), r.eval_objective(&xp).unwrap());
            assert!((f - fp).abs() <= 1e-10 * f.abs().max(1.0));
        }
    }
}

#[test]
fn rescaling_rejects_least_squares() {
    assert!(rescale_uniform_diagonal(&gen_lasso(10, 5, 0.5, 0.1, 1).unwrap()).is_err());
}

#[test]
fn least_squares_estimates_match_the_gram_matrix() {
    let p = gen_lasso(15, 8, 0.4, 0.1, 9).unwrap();
    let SmoothPart::LeastSquares { m, .. } = p.smooth() else { unreachable!() };
    let gram = m.gram();
    let est = estimate_coord_lipschitz(p.smooth(), 2, 5);
    for (j, row) in est.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            assert!((v - gram.get(j, k).abs()).abs() <= 1e-9 * v.max(1.0));
        }
    }
}

#[test]
fn identity_has_unit_profile() {
    let prof = profile_quadratic(&CsrMatrix::identity(9)).unwrap();
    assert_eq!(prof.l_diag, vec![1.0; 9]);
}

fn unit_profile(l_res_bar: f64) -> LipschitzProfile {
    LipschitzProfile { l_diag: vec![], l_max: 1.0, l_res: l_res_bar, l_res_bar, l_global: l_res_bar }
}

proptest! {
    #[test]
    fn parallelism_is_monotone(n in 1usize..2_000_000, extra in 0usize..1_000_000, r1 in 0.5..50.0f64, r2 in 0.0..50.0f64,
                               g1 in 1.0..10.0f64, g2 in 0.0..10.0f64) {
        let base = max_parallelism(&unit_profile(r1), g1, n).unwrap();
        prop_assert!(max_parallelism(&unit_profile(r1 + r2), g1, n).unwrap() <= base);
        prop_assert!(max_parallelism(&unit_profile(r1), g1, n + extra).unwrap() >= base);
        prop_assert!(max_parallelism(&unit_profile(r1), g1 + g2, n).unwrap() >= base);
    }
}
