use asymlora_core::bound::{
    generalization_bound, matched_rank, trainable_params, FineTuneSpec, LayerShape, MatchCriterion, TuneMode,
};
use asymlora_core::rng::{gaussian_matrix, substream};
use asymlora_core::similarity::{cca_similarity, Side};
use asymlora_core::stiefel::{random_low_rank, sample_stiefel};
use asymlora_core::{Matrix, Orientation};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_are_orthonormal(d in 1usize..24, k in 1usize..24, seed in any::<u64>()) {
        let k = k.min(d);
        let q = sample_stiefel::<f64>(k, d, Orientation::RowOrthonormal, seed).unwrap();
        prop_assert!(q.residual() < 1e-10);
        let u = sample_stiefel::<f64>(d, k, Orientation::ColumnOrthonormal, seed).unwrap();
        prop_assert!(u.residual() < 1e-10);
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(
        d in 2usize..20, r1 in 1usize..6, r2 in 1usize..6, seed in any::<u64>(), row in any::<bool>()
    ) {
        let (r1, r2) = (r1.min(d), r2.min(d));
        let mut rng = substream(seed, 0);
        let side = if row { Side::RowSpace } else { Side::ColumnSpace };
        let (x, y) = if row {
            (gaussian_matrix::<f64, _>(&mut rng, r1, d, 1.0), gaussian_matrix(&mut rng, r2, d, 1.0))
        } else {
            (gaussian_matrix::<f64, _>(&mut rng, d, r1, 1.0), gaussian_matrix(&mut rng, d, r2, 1.0))
        };
        let xy = cca_similarity(&x, &y, side).unwrap();
        let yx = cca_similarity(&y, &x, side).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert!((-1e-10..=1.0 + 1e-10).contains(&xy));
    }

    #[test]
    fn similarity_ignores_reparameterization(d in 4usize..20, r in 1usize..4, seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let b = gaussian_matrix::<f64, _>(&mut rng, d, r, 1.0);
        let a = gaussian_matrix::<f64, _>(&mut rng, r, d, 1.0);
        let c = gaussian_matrix::<f64, _>(&mut rng, r, r, 1.0) + Matrix::identity(r, r) * 3.0;
        let c_inv = c.clone().try_inverse().unwrap();
        prop_assert!((cca_similarity(&b, &(&b * &c), Side::ColumnSpace).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((cca_similarity(&a, &(&c_inv * &a), Side::RowSpace).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn low_rank_shift_has_requested_norm(d in 2usize..16, rank in 1usize..8, scale in 0.1f64..10.0, seed in any::<u64>()) {
        let rank = rank.min(d);
        let m = random_low_rank::<f64>(d, d, rank, scale, seed).unwrap();
        prop_assert!((m.norm() - scale).abs() < 1e-9 * scale);
        let sv = m.singular_values();
        let kept = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
        prop_assert_eq!(kept, rank);
    }

    #[test]
    fn bound_grows_with_rank_and_shrinks_with_samples(
        d_in in 4usize..200, d_out in 4usize..200, r in 1usize..4, n in 1u64..100_000
    ) {
        let spec = FineTuneSpec::uniform(2, d_in, d_out, r, 16, n, 1.0, TuneMode::BA).unwrap();
        let bigger = spec.with_rank(r + 1).unwrap();
        prop_assert!(generalization_bound(&bigger) > generalization_bound(&spec));
        let more = spec.with_samples(n * 4).unwrap();
        prop_assert!((generalization_bound(&spec) / generalization_bound(&more) - 2.0).abs() < 1e-12);
        let b = spec.with_mode(TuneMode::BOnly);
        let a = spec.with_mode(TuneMode::AOnly);
        prop_assert_eq!(trainable_params(&a) + trainable_params(&b), trainable_params(&spec));
    }

    #[test]
    fn sigma_scaling_is_linear(sigma in 0.01f64..100.0) {
        let base = FineTuneSpec::uniform(1, 64, 64, 4, 16, 1000, 1.0, TuneMode::BA).unwrap();
        let scaled = FineTuneSpec::uniform(1, 64, 64, 4, 16, 1000, sigma, TuneMode::BA).unwrap();
        prop_assert!((generalization_bound(&scaled) / generalization_bound(&base) - sigma).abs() < 1e-12 * sigma.max(1.0));
    }
}

#[test]
fn mixed_layers_match_parameter_budget() {
    // Σ(d_in + d_out) = 4608 and Σ d_out = 2560, so r_B = ⌊8 · 4608 / 2560⌋ = 14.
    let layers = vec![LayerShape { d_in: 768, d_out: 768 }, LayerShape { d_in: 1280, d_out: 1792 }];
    let spec = FineTuneSpec::new(layers, 8, 16, 1000, 1.0, TuneMode::BA).unwrap();
    let width_ba = 768 + 768 + 1280 + 1792;
    let width_b = 768 + 1792;
    let expect = 8 * width_ba / width_b;
    assert_eq!(matched_rank(&spec, MatchCriterion::EqualParams).unwrap(), expect);
    // The bound is √rank, so equal-bound gives the same floor.
    assert_eq!(matched_rank(&spec, MatchCriterion::EqualBound).unwrap(), expect);
}

#[test]
fn independent_low_rank_draws_are_dissimilar() {
    for seed in 0..20 {
        let x = random_low_rank::<f64>(64, 64, 8, 1.0, seed).unwrap();
        let y = random_low_rank::<f64>(64, 64, 8, 1.0, seed + 1000).unwrap();
        assert!(cca_similarity(&x, &y, Side::ColumnSpace).unwrap() < 0.9);
    }
}
