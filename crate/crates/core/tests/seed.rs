use std::collections::BTreeMap;

use susrate_core::ontology::{association, validate_ontology};
use susrate_core::{
    apply_reduction_principle, assign_all, seed_ontology, to_canonical_json, Category, SEED_ONTOLOGY_JSON,
};

#[test]
fn has_the_twenty_five_preferences() {
    let o = seed_ontology();
    let ids: Vec<&str> = o.preferences.keys().map(String::as_str).collect();
    let mut expected: Vec<String> = Vec::new();
    expected.extend((1..=3).map(|i| format!("E.{i}")));
    expected.extend((1..=13).map(|i| format!("H.{i}")));
    expected.extend((1..=3).map(|i| format!("Q.{i}")));
    expected.extend((1..=6).map(|i| format!("S.{i}")));
    expected.sort();
    assert_eq!(ids, expected);

    let mut per_category: BTreeMap<Category, usize> = BTreeMap::new();
    for p in o.preferences.values() {
        *per_category.entry(p.category).or_default() += 1;
    }
    assert_eq!(per_category[&Category::Environment], 3);
    assert_eq!(per_category[&Category::Quality], 3);
    assert_eq!(per_category[&Category::Social], 6);
    assert_eq!(per_category[&Category::Health], 13);
}

#[test]
fn strict_preferences_are_the_diet_ones() {
    let o = seed_ontology();
    let strict: Vec<&str> = o.preferences.values().filter(|p| p.strict).map(|p| p.id.as_str()).collect();
    assert_eq!(strict, ["H.12", "H.13", "H.2", "H.4"]);
}

#[test]
fn validates_without_findings() {
    let report = validate_ontology(&seed_ontology());
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
}

#[test]
fn is_a_fixed_point_of_rules_and_reduction() {
    let o = seed_ontology();
    assert_eq!(assign_all(&o, &o.rules).unwrap(), o);
    let reduction = apply_reduction_principle(&o);
    assert!(reduction.report.is_noop());
    assert_eq!(reduction.ontology, o);
}

#[test]
fn bundled_file_is_canonical() {
    assert_eq!(to_canonical_json(&seed_ontology()), SEED_ONTOLOGY_JSON);
}

#[test]
fn calibrated_meanings_pass_through() {
    let o = seed_ontology();
    let r = |z: &str, w: &str| association::<f64>(&o, &o.product_tags[z], &o.preference_tags[w]);
    assert_eq!(r("z.vegetable", "pt.vegetarian-diet"), 1.0);
    assert_eq!(r("z.contains-eggs", "pt.vegan-diet"), -1.0);
}

#[test]
fn low_fat_rule_fires_on_fat_content() {
    let o = seed_ontology();
    let chicken = &o.products["p.chicken"];
    assert!(chicken.tag_ids.contains("z.low-fat"));
    assert!(!o.products["p.mayonnaise"].tag_ids.contains("z.low-fat"));
}
