use fuzzkd::fuzzy::{
    confidence_memberships, rule_activations, uncertainty_memberships, weight_mamdani,
    weight_weighted_sum, FuzzyEngine, Level, LevelWeights, Method, RuleTable, UncertaintyMode,
    CENTROID_SAMPLES,
};
use fuzzkd::loss::softmax_t;
use proptest::prelude::*;

/// Centroid on a 50k-point grid with the output sets written out by hand.
fn fine_centroid(act: [f64; 3]) -> f64 {
    let n = 50_000;
    let sets = |x: f64| {
        let low = if x <= 0.4 { 1.0 - x / 0.4 } else { 0.0 };
        let med = if (0.3..=0.5).contains(&x) {
            (x - 0.3) / 0.2
        } else if (0.5..=0.7).contains(&x) {
            (0.7 - x) / 0.2
        } else {
            0.0
        };
        let high = if x >= 0.6 { (x - 0.6) / 0.4 } else { 0.0 };
        [low, med, high]
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let s = sets(x);
        let mu = (0..3).map(|k| s[k].min(act[k])).fold(0.0, f64::max);
        num += x * mu;
        den += mu;
    }
    num / den
}

#[test]
fn centroid_quadrature_error_is_small() {
    let rules = RuleTable::default();
    let levels = LevelWeights::default();
    for i in 0..=10 {
        for j in 0..=10 {
            let (c, u) = (i as f64 / 10.0, j as f64 / 10.0);
            let a = weight_mamdani(c, u, &rules, &levels).unwrap();
            let act = rule_activations(&a.conf_grades, &a.unc_grades, &rules);
            let fine = fine_centroid(act);
            assert!(
                (a.weight - fine).abs() < 1e-3,
                "({c}, {u}): {} vs {fine}",
                a.weight
            );
        }
    }
    assert_eq!(CENTROID_SAMPLES, 1001);
}

#[test]
fn complement_mode_example() {
    let engine = FuzzyEngine {
        uncertainty_mode: UncertaintyMode::Complement,
        ..FuzzyEngine::default()
    };
    let p = fuzzkd::loss::ProbVector::new(vec![0.9, 0.05, 0.05], 1.0).unwrap();
    let w = engine.weight_for(&p).unwrap().weight;
    assert!((0.80..=0.95).contains(&w), "{w}");
}

#[test]
fn constant_rule_tables_give_their_set_centroid() {
    let levels = LevelWeights::default();
    let expect = [
        (Level::Low, 0.4 / 3.0),
        (Level::Medium, 0.5),
        (Level::High, 1.0 - 0.4 / 3.0),
    ];
    for (level, centroid) in expect {
        let rules = RuleTable::constant(level);
        for &(c, u) in &[(0.0, 0.0), (0.5, 0.6), (1.0, 1.0)] {
            let w = weight_mamdani(c, u, &rules, &levels).unwrap().weight;
            assert!((w - centroid).abs() < 2e-3, "{level}: {w}");
        }
    }
}

#[test]
fn weighted_sum_plateaus() {
    let l = LevelWeights::default();
    assert!((weight_weighted_sum(0.1, &l, true).unwrap().weight - 0.2).abs() < 1e-12);
    assert!((weight_weighted_sum(0.5, &l, true).unwrap().weight - 0.5).abs() < 1e-12);
    assert!((weight_weighted_sum(1.0, &l, true).unwrap().weight - 0.8).abs() < 1e-12);
}

proptest! {
    #[test]
    fn memberships_stay_in_unit_range(x in 0.0f64..=1.0) {
        for m in [confidence_memberships(x).unwrap(), uncertainty_memberships(x).unwrap()] {
            for v in [m.low, m.medium, m.high] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn memberships_are_lipschitz(x in 0.0f64..=1.0, d in 1e-9f64..1e-3) {
        let y = (x + d).min(1.0);
        let pairs = [
            (confidence_memberships(x).unwrap(), confidence_memberships(y).unwrap()),
            (uncertainty_memberships(x).unwrap(), uncertainty_memberships(y).unwrap()),
        ];
        for (a, b) in pairs {
            for l in Level::ALL {
                // steepest ramp has slope 5
                prop_assert!((a.get(l) - b.get(l)).abs() <= 5.0 * (y - x) + 1e-12);
            }
        }
    }

    #[test]
    fn grade_shapes(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let (a, b) = (confidence_memberships(lo).unwrap(), confidence_memberships(hi).unwrap());
        prop_assert!(a.low >= b.low);
        prop_assert!(a.high <= b.high);
        let (a, b) = (uncertainty_memberships(lo).unwrap(), uncertainty_memberships(hi).unwrap());
        prop_assert!(a.low >= b.low);
        prop_assert!(a.high <= b.high);
    }

    #[test]
    fn confidence_coverage(c in 0.0f64..=1.0) {
        prop_assert!(confidence_memberships(c).unwrap().max() >= 0.375 - 1e-12);
    }

    #[test]
    fn weights_stay_in_unit_range(c in 0.0f64..=1.0, u in 0.0f64..=1.0) {
        let r = RuleTable::default();
        let l = LevelWeights::default();
        let m = weight_mamdani(c, u, &r, &l).unwrap().weight;
        prop_assert!((0.0..=1.0).contains(&m));
        for normalize in [true, false] {
            let w = weight_weighted_sum(c, &l, normalize).unwrap().weight;
            prop_assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn weighted_sum_is_monotone_in_confidence(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let l = LevelWeights::default();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let a = weight_weighted_sum(lo, &l, true).unwrap().weight;
        let b = weight_weighted_sum(hi, &l, true).unwrap().weight;
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn assessment_from_logits_is_in_range(
        logits in prop::collection::vec(-20.0f64..20.0, 2..8),
        mode in prop_oneof![Just(UncertaintyMode::Entropy), Just(UncertaintyMode::Complement)],
        method in prop_oneof![Just(Method::Mamdani), Just(Method::WeightedSum)],
    ) {
        let p = softmax_t(&logits, 1.0).unwrap();
        let engine = FuzzyEngine { uncertainty_mode: mode, method, ..FuzzyEngine::default() };
        let a = engine.weight_for(&p).unwrap();
        let k = logits.len() as f64;
        prop_assert!(a.confidence >= 1.0 / k - 1e-12 && a.confidence <= 1.0);
        prop_assert!((0.0..=1.0).contains(&a.uncertainty));
        prop_assert!((0.0..=1.0).contains(&a.weight));
    }
}

#[test]
fn default_rules_rise_with_confidence_and_fall_with_uncertainty() {
    let rank = |l: Level| Level::ALL.iter().position(|&x| x == l).unwrap();
    let r = RuleTable::default();
    for a in 0..3 {
        for b in 0..2 {
            let (lo, hi) = (Level::ALL[b], Level::ALL[b + 1]);
            let fixed = Level::ALL[a];
            assert!(rank(r.output(lo, fixed)) <= rank(r.output(hi, fixed)));
            assert!(rank(r.output(fixed, lo)) >= rank(r.output(fixed, hi)));
        }
    }
}

#[test]
fn out_of_range_inputs_fail() {
    for x in [-1e-9, 1.0 + 1e-9, f64::NAN, f64::INFINITY] {
        assert!(confidence_memberships(x).is_err());
        assert!(uncertainty_memberships(x).is_err());
    }
}
