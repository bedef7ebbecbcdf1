use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcbound::bounds::{massart_finite_bound, thm3_indicator_bound};
use vcbound::chaining::{conditional_rademacher_exhaustive, eta0};
use vcbound::families::Family;
use vcbound::montecarlo::{estimate_zbar, exhaustive_zbar, McConfig, MC_SLACK};
use vcbound::sample::{Distribution, Sample, SampleLaw};
use vcbound::sets::{trace, TraceSet};

fn vectors(t: &TraceSet) -> Vec<Vec<f64>> {
    t.masks
        .iter()
        .map(|m| (0..t.n).map(|i| f64::from((m >> i & 1) as u8)).collect())
        .collect()
}

fn indicator(k: bool) -> Family {
    if k {
        Family::Intervals { max_length: None }
    } else {
        Family::HalfLines
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Exact sign averages sit under the finite-maximum and indicator bounds.
    #[test]
    fn exact_rademacher_mean_is_bounded(seed in any::<u64>(), n in 1usize..=12, k in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = indicator(k);
        let sample = Sample::draw(&SampleLaw::Iid(Distribution::Uniform), n, &mut rng).unwrap();
        let exact = exhaustive_zbar(&family, &sample).unwrap();
        let t = trace(&family.level_class(0.5).unwrap(), &sample).unwrap();
        let via_traces = conditional_rademacher_exhaustive(&t).unwrap();
        prop_assert!((exact - via_traces).abs() <= 1e-12 * exact.max(1.0));
        let massart = massart_finite_bound(&vectors(&t)).unwrap();
        prop_assert!(exact <= massart);
        let gamma = (2.0 * t.len() as f64).ln();
        let thm3 = thm3_indicator_bound(eta0(&t).sqrt(), n as u64, gamma).unwrap();
        prop_assert!(massart <= thm3);
    }
}

#[test]
fn sampled_signs_match_the_exact_mean() {
    // Without a cap the sup depends only on the order of the signs, so any
    // sample of distinct points gives the unconditional mean.
    let points: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
    for family in [indicator(false), indicator(true)] {
        let exact = exhaustive_zbar(&family, &Sample::uniform(points.clone()).unwrap()).unwrap();
        let cfg = McConfig::new(family, SampleLaw::Iid(Distribution::Uniform), 10, 4000, 11);
        let est = estimate_zbar(&cfg).unwrap();
        assert!((est.mean - exact).abs() <= MC_SLACK * est.stderr, "{exact} vs {est:?}");
    }
}
