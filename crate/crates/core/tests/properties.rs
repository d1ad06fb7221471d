use adaptive_smc::adaptation::{decide, AdaptiveConfig};
use adaptive_smc::assessment::{hellinger_to_uniform, pearson_statistic, rank_statistic};
use adaptive_smc::filter::{multinomial_ancestors, FilterState, ParticleSet, Stage};
use adaptive_smc::models::{LinearGaussian, LinearGaussianConfig};
use adaptive_smc::special::chi_squared_p_value;
use adaptive_smc::{Observation, RngStream, StateVector};
use proptest::prelude::*;

fn lg(a: f64, q: f64, r: f64) -> LinearGaussian {
    LinearGaussian::new(LinearGaussianConfig {
        a,
        q,
        r_obs: r,
        ..LinearGaussianConfig::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_normalized(
        seed in any::<u64>(),
        m in 1usize..400,
        a in -1.2f64..1.2,
        q in 0.01f64..4.0,
        r in 1e-4f64..4.0,
        y in -50.0f64..50.0,
    ) {
        let model = lg(a, q, r);
        let root = RngStream::new(seed);
        let mut f = FilterState::initialize(&model, m, root.derive(0)).unwrap();
        f.predict(root.derive(1)).unwrap();
        f.weight(&Observation::new(vec![y])).unwrap();
        let w = f.weights();
        prop_assert!(w.iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn particle_count_follows_requests(seed in any::<u64>(), m0 in 1usize..300, m_next in 1usize..300) {
        let model = lg(0.9, 1.0, 0.1);
        let root = RngStream::new(seed);
        let mut f = FilterState::initialize(&model, m0, root.derive(0)).unwrap();
        prop_assert_eq!(f.len(), m0);
        f.predict(root.derive(1)).unwrap();
        prop_assert_eq!(f.len(), m0);
        f.weight(&Observation::new(vec![0.3])).unwrap();
        prop_assert_eq!(f.len(), m0);
        f.resample_multinomial(m_next, root.derive(2)).unwrap();
        prop_assert_eq!(f.len(), m_next);
        prop_assert_eq!(f.stage(), Stage::Resampled);
        prop_assert!(f.weights().iter().all(|&w| w == 1.0 / m_next as f64));
    }

    #[test]
    fn resampling_stays_in_support(
        seed in any::<u64>(),
        raw in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], 1..30),
        n in 1usize..500,
    ) {
        prop_assume!(raw.iter().any(|&w| w > 0.0));
        let particles: Vec<StateVector> = (0..raw.len()).map(|i| StateVector::new(vec![i as f64])).collect();
        let set = ParticleSet::weighted(particles, raw.clone()).unwrap();
        let model = lg(0.9, 1.0, 0.1);
        let mut f = FilterState::from_parts(&model, set, 1);
        f.resample_multinomial(n, RngStream::new(seed)).unwrap();
        for x in f.particles() {
            prop_assert!(raw[x[0] as usize] > 0.0);
        }
        let total: f64 = raw.iter().sum();
        let ancestors = multinomial_ancestors(&raw.iter().map(|w| w / total).collect::<Vec<_>>(), n, RngStream::new(seed));
        prop_assert!(ancestors.iter().all(|&i| raw[i] > 0.0));
    }

    #[test]
    fn pearson_is_permutation_invariant(
        counts in prop::collection::vec(0usize..50, 2..12),
        seed in any::<u64>(),
    ) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let mut shuffled = counts.clone();
        let mut r = RngStream::new(seed).rng();
        for i in (1..shuffled.len()).rev() {
            let j = r.index(i + 1);
            shuffled.swap(i, j);
        }
        let (a, b) = (pearson_statistic(&counts), pearson_statistic(&shuffled));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn p_value_strictly_decreasing(dof in 1usize..30, x in 0.0f64..40.0, dx in 0.01f64..5.0) {
        let p1 = chi_squared_p_value(x, dof).unwrap();
        let p2 = chi_squared_p_value(x + dx, dof).unwrap();
        prop_assert!((0.0..=1.0).contains(&p1));
        prop_assert!(p2 < p1);
    }

    #[test]
    fn hellinger_is_bounded(counts in prop::collection::vec(0usize..30, 2..10)) {
        let w: usize = counts.iter().sum();
        prop_assume!(w > 0);
        let h = hellinger_to_uniform(&counts, w).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn decision_respects_bounds_and_direction(
        m_min in 1usize..100,
        span in 0usize..5000,
        frac in 0.0f64..1.0,
        p_low in 0.01f64..0.5,
        gap in 0.01f64..0.49,
        p in 0.0f64..1.0,
    ) {
        let cfg = AdaptiveConfig {
            m0: m_min,
            m_min,
            m_max: m_min + span,
            p_low,
            p_high: p_low + gap,
            ..AdaptiveConfig::default()
        };
        let m = m_min + (frac * span as f64) as usize;
        let d = decide(&cfg, m, p).unwrap();
        prop_assert!((cfg.m_min..=cfg.m_max).contains(&d.m_next));
        if p <= cfg.p_low {
            prop_assert!(d.m_next >= m);
        } else if p >= cfg.p_high {
            prop_assert!(d.m_next <= m);
        } else {
            prop_assert_eq!(d.m_next, m);
        }
    }

    #[test]
    fn rank_is_invariant_under_monotone_maps(
        y in -10.0f64..10.0,
        fict in prop::collection::vec(-10.0f64..10.0, 1..20),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let r = rank_statistic(y, &fict);
        prop_assert!(r <= fict.len());
        let g = |v: f64| (scale * v + shift).exp();
        let mapped: Vec<f64> = fict.iter().map(|&v| g(v)).collect();
        prop_assert_eq!(rank_statistic(g(y), &mapped), r);
    }

    #[test]
    fn same_stream_same_draws(seed in any::<u64>(), label in any::<u64>()) {
        let mut a = RngStream::new(seed).derive(label).rng();
        let mut b = RngStream::new(seed).derive(label).rng();
        for _ in 0..8 {
            prop_assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }
}

/// Offspring counts have mean `n w_i`, checked within 4 standard errors.
#[test]
fn multinomial_resampling_is_unbiased() {
    let w = [0.05, 0.4, 0.15, 0.3, 0.1];
    let n = 200;
    let reps = 5000u64;
    let mut sum = [0.0f64; 5];
    let mut sum_sq = [0.0f64; 5];
    for rep in 0..reps {
        let mut c = [0.0f64; 5];
        for i in multinomial_ancestors(&w, n, RngStream::new(3).derive(rep)) {
            c[i] += 1.0;
        }
        for j in 0..5 {
            sum[j] += c[j];
            sum_sq[j] += c[j] * c[j];
        }
    }
    for j in 0..5 {
        let mean = sum[j] / reps as f64;
        let se = ((sum_sq[j] / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - n as f64 * w[j]).abs() <= 4.0 * se, "bin {j}: {mean}");
    }
}
