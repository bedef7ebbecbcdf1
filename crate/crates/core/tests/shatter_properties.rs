use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcbound::families::{Family, Member, MonotoneMap};
use vcbound::sample::{Distribution, Sample, SampleLaw};
use vcbound::sets::{trace, trace_with_cap};
use vcbound::shatter::{
    member_grid, sauer_check, u_grid, vc_dim_on_sample, weak_vc_dim_estimate, weak_vc_dim_members,
    DEFAULT_BUDGET,
};

const CANONICAL: &[&str] = &[
    "halflines",
    "intervals",
    "monotone-nondecr",
    "monotone-nonincr",
    "monotone",
    "translated-monotone",
];

fn draw(rng: &mut ChaCha8Rng, n: usize) -> Sample {
    Sample::draw(&SampleLaw::Iid(Distribution::Uniform), n, rng).unwrap()
}

fn weak_dim(members: &[Member], xs: &[f64], strict: bool) -> usize {
    let grid = member_grid(members, xs);
    let est = weak_vc_dim_members(members, xs, &grid, strict, DEFAULT_BUDGET).unwrap();
    assert!(est.exhaustive);
    est.dim
}

fn random_map(rng: &mut ChaCha8Rng) -> MonotoneMap {
    match rng.random_range(0..4) {
        0 => MonotoneMap::Square,
        1 => MonotoneMap::Negate,
        2 => MonotoneMap::PositivePart,
        _ => MonotoneMap::Affine {
            scale: rng.random_range(-3.0..3.0),
            shift: rng.random_range(-1.0..1.0),
        },
    }
}

proptest! {
    #[test]
    fn sauer_holds_on_canonical_traces(seed in any::<u64>(), k in 0..CANONICAL.len(), n in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = Family::from_name(CANONICAL[k], None).unwrap();
        let sample = draw(&mut rng, n);
        let u = rng.random_range(-0.1..1.1);
        let t = trace(&family.level_class(u).unwrap(), &sample).unwrap();
        prop_assert!(sauer_check(&t, family.declared().weak));
    }

    #[test]
    fn traces_ignore_order_preserving_relabels(seed in any::<u64>(), k in 0..CANONICAL.len(), n in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = Family::from_name(CANONICAL[k], None).unwrap();
        let sample = draw(&mut rng, n);
        // Squaring keeps [0, 1] and the order of its points.
        let moved = Sample::uniform(sample.values().iter().map(|x| x * x).collect()).unwrap();
        for u in [0.25, 0.5, 0.75] {
            let class = family.level_class(u).unwrap();
            prop_assert_eq!(trace(&class, &sample).unwrap().len(), trace(&class, &moved).unwrap().len());
        }
    }

    #[test]
    fn dimensions_on_distinct_points(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = draw(&mut rng, n);
        for (name, vc) in [("intervals", 2), ("halflines", 1)] {
            let family = Family::from_name(name, None).unwrap();
            let est = vc_dim_on_sample(&trace(&family.level_class(0.5).unwrap(), &sample).unwrap(), DEFAULT_BUDGET);
            prop_assert!(est.exhaustive);
            prop_assert_eq!(est.dim, vc);
        }
        for name in CANONICAL {
            let family = Family::from_name(name, None).unwrap();
            let grid = u_grid(&family.level_breaks());
            let est = weak_vc_dim_estimate(&family, &sample, &grid, DEFAULT_BUDGET).unwrap();
            prop_assert!(est.dim as u64 <= family.declared().weak, "{}", name);
        }
    }

    /// Translates and rescalings of one monotone function: level sets are half-lines.
    #[test]
    fn vc_major_families_have_small_weak_dimension(seed in any::<u64>(), n in 3usize..=8, both in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = draw(&mut rng, n);
        let members: Vec<Member> = (0..30)
            .map(|_| {
                let scale = rng.random_range(0.02..1.0);
                Member::Logistic {
                    center: rng.random_range(-0.5..1.5),
                    scale: if both && rng.random_bool(0.5) { -scale } else { scale },
                }
            })
            .collect();
        let d = if both { 2 } else { 1 };
        prop_assert!(weak_dim(&members, sample.values(), true) <= d);
    }

    #[test]
    fn strict_and_closed_level_sets_agree(seed in any::<u64>(), k in 0..CANONICAL.len(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = Family::from_name(CANONICAL[k], None).unwrap();
        let sample = draw(&mut rng, n);
        // Keep finitely-valued members only.
        let members: Vec<Member> = family
            .probe_members(&mut rng, 60, &Distribution::Uniform)
            .unwrap()
            .into_iter()
            .filter(|m| !matches!(m, Member::Logistic { .. }) && !matches!(m, Member::Windowed(inner) if matches!(**inner, Member::Logistic { .. })))
            .take(30)
            .collect();
        prop_assume!(!members.is_empty());
        let xs = sample.values();
        prop_assert_eq!(weak_dim(&members, xs, true), weak_dim(&members, xs, false));
    }

    #[test]
    fn monotone_maps_never_raise_the_weak_dimension(seed in any::<u64>(), k in 0..CANONICAL.len(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = Family::from_name(CANONICAL[k], None).unwrap();
        let sample = draw(&mut rng, n);
        let members = family.probe_members(&mut rng, 30, &Distribution::Uniform).unwrap();
        let map = random_map(&mut rng);
        let mapped: Vec<Member> = members.iter().cloned().map(|m| m.mapped(map)).collect();
        let xs = sample.values();
        prop_assert!(weak_dim(&mapped, xs, true) <= weak_dim(&members, xs, true), "{:?}", map);
    }

    #[test]
    fn centering_keeps_the_vc_major_dimension(seed in any::<u64>(), k in 0..CANONICAL.len(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Family::from_name(CANONICAL[k], None).unwrap();
        let family = Family::CenteredHalved(Box::new(base.clone()));
        let sample = draw(&mut rng, n);
        let members = family.probe_members(&mut rng, 30, &Distribution::Uniform).unwrap();
        let vc_major = base.declared().vc_major.unwrap() as usize;
        prop_assert!(weak_dim(&members, sample.values(), true) <= vc_major);
        prop_assert_eq!(family.declared().weak as usize, vc_major);
    }
}

#[test]
fn large_samples_fall_back_to_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sample = draw(&mut rng, 60);
    let t = trace_with_cap(&Family::from_name("intervals", None).unwrap().level_class(0.5).unwrap(), &sample, 60)
        .unwrap();
    let est = vc_dim_on_sample(&t, 500);
    assert!(!est.exhaustive);
    assert!(est.dim <= 2 && est.dim >= 1);
}
