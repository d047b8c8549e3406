mod common;

use std::sync::Arc;

use proptest::prelude::*;
use susrate_core::ontology::*;
use susrate_core::rating::{
    snap_to_zero, PreferenceScoreVector, RatingConfig, RatingEngine, RatingError, ReferenceStrategy,
};
use susrate_core::seed_ontology;
use susrate_core::testkit::{random_ontology, random_scores, rng, three_concept_ontology, RandomSpec};

use common::{Oracle, Refs};

fn engine(o: Ontology, strategy: ReferenceStrategy) -> RatingEngine<f64> {
    let cfg = RatingConfig { reference_strategy: strategy, ..RatingConfig::default() };
    RatingEngine::new(Arc::new(o), cfg).unwrap()
}

fn set_override(o: &mut Ontology, z: &str, w: &str, score: f64) {
    o.overrides.insert(
        (z.into(), w.into()),
        AssociationOverride {
            product_tag_id: z.into(),
            preference_tag_id: w.into(),
            score,
            source: OverrideSource::Expert,
        },
    );
}

/// Tags `t0..` over disjoint concepts, each with an override against `w`.
fn calibrated(scores: &[f64]) -> Ontology {
    let mut o = Ontology::with_concepts(["s", "x"]);
    o.add_preference_tag(PreferenceTag::new("w", "w", ["s"], ["x"])).unwrap();
    for (i, s) in scores.iter().enumerate() {
        let c = format!("c{i}");
        o.add_concept(c.clone(), c.clone()).unwrap();
        o.add_product_tag(ProductTag::new(format!("t{i}"), "t", [c])).unwrap();
        set_override(&mut o, &format!("t{i}"), "w", *s);
    }
    o
}

#[test]
fn single_tag_reference_under_every_strategy() {
    for strategy in ReferenceStrategy::ALL {
        let mut o = calibrated(&[0.7]);
        o.add_product(Product::new("p", "x", ["t0"])).unwrap();
        let e = engine(o, strategy);
        assert_eq!(e.reference_positive("w"), Some(0.7), "{strategy}");
        assert_eq!(e.reference_negative("w"), None, "{strategy}");
    }
    for strategy in ReferenceStrategy::ALL {
        let mut o = calibrated(&[-0.4]);
        o.add_product(Product::new("p", "x", ["t0"])).unwrap();
        assert_eq!(engine(o, strategy).reference_negative("w"), Some(-0.4), "{strategy}");
    }
}

#[test]
fn clipped_references_saturate() {
    let e = engine(calibrated(&[0.6, 0.8]), ReferenceStrategy::TheoreticalUnreducedClipped);
    assert_eq!(e.reference_positive("w"), Some(1.0));
    let e = engine(calibrated(&[-0.6, -0.9]), ReferenceStrategy::TheoreticalUnreducedClipped);
    assert_eq!(e.reference_negative("w"), Some(-1.0));
    assert_eq!(e.reference_positive("w"), None);
}

#[test]
fn disjoint_pair_normalizes_to_one() {
    let mut o = Ontology::with_concepts(["a", "b", "c"]);
    o.add_product_tag(ProductTag::new("za", "a", ["a"])).unwrap();
    o.add_product_tag(ProductTag::new("zc", "c", ["c"])).unwrap();
    o.add_preference_tag(PreferenceTag::new("w", "w", ["a", "c"], ["b"])).unwrap();
    o.add_product(Product::new("p", "x", ["za", "zc"])).unwrap();
    o.add_product(Product::new("empty", "x", std::iter::empty::<String>())).unwrap();
    o.add_preference(Preference {
        id: "pi".into(),
        statement: String::new(),
        description: String::new(),
        category: Category::Health,
        tag_ids: ["w".to_owned()].into(),
        strict: false,
    })
    .unwrap();
    for strategy in ReferenceStrategy::ALL {
        let e = engine(o.clone(), strategy);
        assert_eq!(e.normalized_aggregated_association("p", "w").unwrap(), 1.0);
        assert_eq!(e.normalized_aggregated_association("empty", "w").unwrap(), 0.0);
        assert_eq!(e.sustainability_index("empty", "pi").unwrap().value, 0.0);
    }
}

#[test]
fn index_is_the_mean_over_preference_tags() {
    let mut o = three_concept_ontology();
    o.products.insert("only_c".into(), Product::new("only_c", "x", ["C"]));
    let e = engine(o, ReferenceStrategy::TheoreticalUnreducedClipped);
    // C normalizes to 1, AB to 0.
    assert_eq!(e.sustainability_index("only_c", "pi").unwrap().value, 0.5);
}

#[test]
fn three_concept_pipeline_matches_hand_derivation() {
    // Positive references: C is carried by C, AC, BC, ABC (sum 4); AB by
    // A, B, AB, AC, BC, ABC (sum 4). Both clip to 1 and both equal the
    // union {A,B,C} after reduction. The product scores 1 on C and 0.5 on AB.
    for (strategy, expected) in [
        (ReferenceStrategy::TheoreticalUnreducedClipped, 0.75),
        (ReferenceStrategy::TheoreticalReduced, 0.75),
        // The product itself is the best existing one: 1/1 and 0.5/0.5.
        (ReferenceStrategy::ExistingBest, 1.0),
    ] {
        let e = engine(three_concept_ontology(), strategy);
        assert_eq!(e.sustainability_index("p", "pi").unwrap().value, expected, "{strategy}");
    }
    let o = three_concept_ontology();
    let oracle = Oracle { o: &o, refs: Refs::Clipped, tau: 1.0, s_mean: 5.0, alpha: 5.0, beta: 5.0 };
    assert_eq!(oracle.index("p", "pi"), 0.75);
}

#[test]
fn raw_rating_examples() {
    let mut o = three_concept_ontology();
    o.products.insert("c".into(), Product::new("c", "x", ["C"]));
    o.preferences.insert(
        "only_c".into(),
        Preference {
            id: "only_c".into(),
            statement: String::new(),
            description: String::new(),
            category: Category::Health,
            tag_ids: ["C".to_owned()].into(),
            strict: false,
        },
    );
    let e = engine(o, ReferenceStrategy::default());
    assert_eq!(e.sustainability_index("c", "only_c").unwrap().value, 1.0);
    let v = PreferenceScoreVector::new().with("only_c", 10.0);
    assert_eq!(e.raw_rating("c", &v).unwrap(), 1.0);
    assert_eq!(e.rate("c", &v).unwrap().scaled, 10.0);
    let neutral = PreferenceScoreVector::new().with("only_c", 5.0).with("pi", 5.0);
    assert_eq!(e.raw_rating("c", &neutral).unwrap(), 0.0);
    assert_eq!(e.rate("c", &neutral).unwrap().scaled, 5.0);
}

#[test]
fn opposing_an_opposed_preference_is_support() {
    let mut o = calibrated(&[-1.0]);
    o.add_product(Product::new("p", "x", ["t0"])).unwrap();
    o.add_preference(Preference {
        id: "pi".into(),
        statement: String::new(),
        description: String::new(),
        category: Category::Health,
        tag_ids: ["w".to_owned()].into(),
        strict: false,
    })
    .unwrap();
    let e = engine(o, ReferenceStrategy::default());
    assert_eq!(e.sustainability_index("p", "pi").unwrap().value, -1.0);
    assert_eq!(e.raw_rating("p", &PreferenceScoreVector::new().with("pi", 0.0)).unwrap(), 1.0);
}

#[test]
fn strict_vegan_floors_egg_products() {
    let e = engine(seed_ontology(), ReferenceStrategy::default());
    assert!(e.sustainability_index("p.eggs", "H.12").unwrap().value < 0.0);
    let v = PreferenceScoreVector::new().with("H.12", 10.0).with("Q.3", 10.0);
    let r = e.rate("p.eggs", &v).unwrap();
    assert_eq!(r.scaled, 0.0);
    assert_eq!(r.raw, -1.0);
    assert_eq!(r.strict_violation.as_deref(), Some("H.12"));
    // Just below the maximum the rule does not apply.
    let r = e.rate("p.eggs", &PreferenceScoreVector::new().with("H.12", 9.99)).unwrap();
    assert_eq!(r.strict_violation, None);
    // Products that do not oppose pass.
    assert_eq!(e.rate("p.carrots", &v).unwrap().strict_violation, None);

    let lenient = RatingEngine::new(
        Arc::new(seed_ontology()),
        RatingConfig { strict_enforcement: false, ..RatingConfig::default() },
    )
    .unwrap();
    assert_eq!(lenient.rate("p.eggs", &v).unwrap().strict_violation, None);
}

#[test]
fn errors_name_the_offending_input() {
    let e = engine(seed_ontology(), ReferenceStrategy::default());
    let v = PreferenceScoreVector::new().with("H.12", 10.5);
    assert!(matches!(
        e.rate("p.eggs", &v),
        Err(RatingError::OutOfRangeScore { preference_id, .. }) if preference_id == "H.12"
    ));
    let v = PreferenceScoreVector::new().with("X.1", 3.0);
    assert!(matches!(e.rate("p.eggs", &v), Err(RatingError::UnknownPreference(id)) if id == "X.1"));
    assert!(matches!(e.rate("nope", &PreferenceScoreVector::new()), Err(RatingError::UnknownProduct(_))));
    let mut o = three_concept_ontology();
    o.preferences.get_mut("pi").unwrap().tag_ids.clear();
    assert!(matches!(
        RatingEngine::<f64>::new(Arc::new(o), RatingConfig::default()),
        Err(RatingError::EmptyPreference(_))
    ));
}

#[test]
fn ranking_breaks_ties_by_id() {
    let mut o = three_concept_ontology();
    o.products.insert("b".into(), Product::new("b", "x", ["A", "C"]));
    o.products.insert("z".into(), Product::new("z", "x", ["B"]));
    let e = engine(o, ReferenceStrategy::default());
    let v = PreferenceScoreVector::new().with("pi", 8.0);
    let ranked = e.rank_products(["z", "p", "b"], &v).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|r| r.product_id.as_str()).collect();
    assert_eq!(ids, ["b", "p", "z"]);
    assert!(ranked[1].scaled > ranked[2].scaled);
}

#[test]
fn missing_reference_clamps_to_the_sign() {
    let mut o = calibrated(&[-0.5]);
    o.add_product(Product::new("p", "x", ["t0"])).unwrap();
    let e = engine(o, ReferenceStrategy::ExistingBest);
    assert_eq!(e.reference_positive("w"), None);
    assert_eq!(e.normalize_aggregate("w", 0.3).unwrap(), 1.0);
    assert_eq!(e.normalize_aggregate("w", -0.25).unwrap(), -0.5);
    assert!(e.warnings().is_empty());
}

#[test]
fn cached_indices_match_direct_recomputation_on_seed() {
    for strategy in ReferenceStrategy::ALL {
        let e = engine(seed_ontology(), strategy);
        for p in e.product_ids() {
            let rep = e.product_representation(p).unwrap();
            assert_eq!(rep.indices.len(), 25);
            for idx in &rep.indices {
                let direct = e.sustainability_index_uncached(p, &idx.preference_id).unwrap();
                assert!((direct - idx.value).abs() <= 1e-12);
            }
        }
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn spec() -> RandomSpec {
    RandomSpec { override_probability: 0.15, ..RandomSpec::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>(), tau in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let mut g = rng(seed);
        let o = random_ontology(&mut g, &spec());
        for (strategy, refs) in [
            (ReferenceStrategy::TheoreticalUnreducedClipped, Refs::Clipped),
            (ReferenceStrategy::ExistingBest, Refs::ExistingBest),
        ] {
            let cfg = RatingConfig { tau, reference_strategy: strategy, ..RatingConfig::default() };
            let e = RatingEngine::new(Arc::new(o.clone()), cfg).unwrap();
            let oracle = Oracle { o: &o, refs, tau, s_mean: 5.0, alpha: 5.0, beta: 5.0 };
            let v = random_scores::<f64, _>(&mut g, &o, 5.0);
            let pairs: Vec<(String, f64)> = v.scores.iter().map(|(k, s)| (k.clone(), *s)).collect();
            for p in o.products.keys() {
                for pi in o.preferences.keys() {
                    let got = e.sustainability_index(p, pi).unwrap().value;
                    prop_assert!((got - oracle.index(p, pi)).abs() <= 1e-12);
                }
                let got = e.rate(p, &v).unwrap();
                let (raw, scaled, strict) = oracle.rate(p, &pairs);
                prop_assert!((got.raw - raw).abs() <= 1e-12);
                prop_assert!((got.scaled - scaled).abs() <= 1e-12);
                prop_assert_eq!(got.strict_violation.is_some(), strict.is_some());
            }
        }
    }

    #[test]
    fn everything_stays_bounded(seed in any::<u64>()) {
        let mut g = rng(seed);
        let o = random_ontology(&mut g, &spec());
        for strategy in ReferenceStrategy::ALL {
            let e = engine(o.clone(), strategy);
            let v = random_scores::<f64, _>(&mut g, &o, 5.0);
            for p in o.products.keys() {
                for w in o.preference_tags.keys() {
                    let n = e.normalized_aggregated_association(p, w).unwrap();
                    prop_assert!((-1.0..=1.0).contains(&n));
                    let a = snap_to_zero(e.effective_aggregate(e.aggregate(p, w).unwrap()));
                    prop_assert_eq!(sign(n), sign(a));
                }
                for c in e.index_row(p).unwrap() {
                    prop_assert!((-1.0..=1.0).contains(c));
                }
                let r = e.rate(p, &v).unwrap();
                prop_assert!((-1.0..=1.0).contains(&r.raw));
                prop_assert!((0.0..=10.0).contains(&r.scaled));
            }
        }
    }

    #[test]
    fn neutral_preferences_do_not_matter(seed in any::<u64>()) {
        let mut g = rng(seed);
        let o = random_ontology(&mut g, &spec());
        let e = engine(o.clone(), ReferenceStrategy::default());
        let v = random_scores::<f64, _>(&mut g, &o, 5.0);
        let without: PreferenceScoreVector<f64> =
            v.scores.iter().filter(|(_, s)| **s != 5.0).map(|(k, s)| (k.clone(), *s)).collect();
        for p in o.products.keys() {
            prop_assert_eq!(e.raw_rating(p, &v).unwrap(), e.raw_rating(p, &without).unwrap());
        }
    }

    #[test]
    fn ranking_survives_affine_rescaling(seed in any::<u64>()) {
        let mut g = rng(seed);
        let o = random_ontology(&mut g, &RandomSpec { products: 20, ..spec() });
        let v = random_scores::<f64, _>(&mut g, &o, 5.0);
        let ids: Vec<&str> = o.products.keys().map(String::as_str).collect();
        let order = |alpha: f64, beta: f64| {
            let cfg = RatingConfig { alpha, beta, ..RatingConfig::default() };
            let e = RatingEngine::new(Arc::new(o.clone()), cfg).unwrap();
            e.rank_products(ids.iter().copied(), &v).unwrap().into_iter().map(|r| r.product_id).collect::<Vec<_>>()
        };
        let base = order(5.0, 5.0);
        prop_assert_eq!(&base, &order(10.0, 0.0));
        prop_assert_eq!(&base, &order(1.0, 0.0));
    }

    #[test]
    fn rating_grows_with_supported_index(r1 in -1.0f64..1.0, r2 in -1.0f64..1.0, s in 5.01f64..10.0, other in 0.0f64..10.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let rate = |score: f64| {
            let mut o = calibrated(&[score, 0.4]);
            o.add_product(Product::new("p", "x", ["t0", "t1"])).unwrap();
            o.add_preference_tag(PreferenceTag::new("v", "v", ["c1"], std::iter::empty::<String>())).unwrap();
            for (id, tag) in [("pi", "w"), ("other", "v")] {
                o.add_preference(Preference {
                    id: id.into(),
                    statement: String::new(),
                    description: String::new(),
                    category: Category::Social,
                    tag_ids: [tag.to_owned()].into(),
                    strict: false,
                }).unwrap();
            }
            // A second product pins the existing references.
            o.add_product(Product::new("q", "x", ["t1"])).unwrap();
            let e = engine(o, ReferenceStrategy::TheoreticalUnreducedClipped);
            let v = PreferenceScoreVector::new().with("pi", s).with("other", other);
            (e.sustainability_index("p", "pi").unwrap().value, e.raw_rating("p", &v).unwrap())
        };
        let (c_lo, raw_lo) = rate(lo);
        let (c_hi, raw_hi) = rate(hi);
        if c_lo <= c_hi {
            prop_assert!(raw_lo <= raw_hi + 1e-15);
        }
    }

    #[test]
    fn single_precision_tracks_double(seed in any::<u64>()) {
        let mut g = rng(seed);
        let o = Arc::new(random_ontology(&mut g, &spec()));
        let e64 = RatingEngine::<f64>::new(o.clone(), RatingConfig::default()).unwrap();
        let e32 = RatingEngine::<f32>::new(o.clone(), RatingConfig::default()).unwrap();
        let v = random_scores::<f64, _>(&mut g, &o, 5.0);
        let v32: PreferenceScoreVector<f32> = v.scores.iter().map(|(k, s)| (k.clone(), *s as f32)).collect();
        for p in o.products.keys() {
            let a = e64.rate(p, &v).unwrap();
            let b = e32.rate(p, &v32).unwrap();
            prop_assert!((a.scaled - f64::from(b.scaled)).abs() < 1e-4);
        }
    }
}
