use std::fs;

use proptest::prelude::*;
use susrate_core::ontology::{overlap_error, Finding};
use susrate_core::store::*;
use susrate_core::testkit::{random_ontology, rng, RandomSpec};
use susrate_core::{apply_reduction_principle, seed_ontology, AttributeValue};

#[test]
fn seed_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.json");
    let o = seed_ontology();
    save_ontology(&o, &path).unwrap();
    let first = fs::read(&path).unwrap();
    let loaded = load_ontology(&path).unwrap();
    assert_eq!(loaded.ontology, o);
    assert!(loaded.warnings.is_empty());
    save_ontology(&loaded.ontology, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn dangling_concept_is_named() {
    let text = to_canonical_json(&seed_ontology()).replacen("\"plant_origin\"\n", "\"plant_origin_x\"\n", 1);
    match parse_ontology(&text) {
        Err(StoreError::Integrity(findings)) => {
            let text = format!("{findings:?}");
            assert!(text.contains("plant_origin_x"), "{text}");
        }
        other => panic!("expected integrity error, got {other:?}"),
    }
}

#[test]
fn duplicate_ids_and_bad_scores_are_rejected() {
    let doc = r#"{"schema_version":"1","concepts":[{"id":"a","label":"a"},{"id":"a","label":"b"}]}"#;
    assert!(matches!(parse_ontology(doc), Err(StoreError::Model(_))));
    let doc = r#"{"schema_version":"1",
        "concepts":[{"id":"a","label":"a"}],
        "product_tags":[{"id":"z","name":"z","concepts":["a"]}],
        "preference_tags":[{"id":"w","name":"w","support_concepts":["a"],"oppose_concepts":[]}],
        "overrides":[{"product_tag_id":"z","preference_tag_id":"w","score":"high","source":"expert"}]}"#;
    assert!(matches!(parse_ontology(doc), Err(StoreError::Score { .. })));
    assert!(matches!(parse_ontology("{"), Err(StoreError::Parse(_))));
    assert!(matches!(load_ontology("/nonexistent/o.json"), Err(StoreError::Io { .. })));
}

#[test]
fn reduced_ontology_saves_clean() {
    let o = random_ontology(&mut rng(11), &RandomSpec { products: 12, ..RandomSpec::default() });
    let reduced = apply_reduction_principle(&o).ontology;
    let loaded = parse_ontology(&to_canonical_json(&reduced)).unwrap();
    assert!(!loaded.warnings.iter().any(|f| matches!(f, Finding::OverlappingTags { .. })));
    for p in loaded.ontology.products.values() {
        for w in loaded.ontology.preference_tags.values() {
            assert_eq!(overlap_error::<f64>(&loaded.ontology, p, w), 0.0);
        }
    }
}

const CSV: &str = "\
id,name,category,unit_price,attr:fat_g_per_100g,attr:salt_g_per_100g,attr:labels
n.yoghurt,Plain yoghurt,dairy-eggs,0.95,1.5,0.1,organic
n.crisps,\"Crisps, salted\",sweets,1.49,30,2.1,
n.oats,Rolled oats,pantry,1.20,7,0.01,organic;fairtrade
";

#[test]
fn ingest_applies_rules_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("products.csv");
    fs::write(&path, CSV).unwrap();
    let seed = seed_ontology();
    let once = ingest_products(&path, &seed).unwrap();
    assert_eq!(once.products.len(), seed.products.len() + 3);
    let tags = |id: &str| once.products[id].tag_ids.iter().cloned().collect::<Vec<_>>();
    assert_eq!(tags("n.yoghurt"), ["z.low-fat", "z.low-salt", "z.organic"]);
    assert_eq!(tags("n.crisps"), ["z.high-fat", "z.high-salt"]);
    assert_eq!(tags("n.oats"), ["z.fairtrade", "z.low-salt", "z.organic"]);
    assert_eq!(once.products["n.crisps"].name, "Crisps, salted");
    assert_eq!(once.products["n.oats"].attributes["fat_g_per_100g"], AttributeValue::Number(7.0));

    let twice = ingest_products(&path, &once).unwrap();
    assert_eq!(twice, once);
    assert_eq!(to_canonical_json(&twice), to_canonical_json(&once));
    assert_ne!(ontology_version(&once), ontology_version(&seed));
}

#[test]
fn newer_rows_replace_attributes() {
    let seed = seed_ontology();
    let rows = "id,name,category,unit_price,attr:fat_g_per_100g\np.chicken,Chicken breast,meat-fish,7.10,1.2\n";
    let merged = merge_products(&seed, read_products(rows.as_bytes()).unwrap()).unwrap();
    let chicken = &merged.products["p.chicken"];
    assert_eq!(chicken.unit_price, Some(7.1));
    assert!(!chicken.attributes.contains_key("salt_g_per_100g"));
    // Manual assignments survive.
    assert!(chicken.tag_ids.contains("z.factory-farmed"));
}

#[test]
fn malformed_price_reports_its_line() {
    let rows = "id,name,category,unit_price\na,A,x,1.0\nb,B,x,1.0\nc,C,x,-2\n";
    match read_products(rows.as_bytes()) {
        Err(StoreError::Row { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_manual_tag_fails_integrity() {
    let rows = "id,name,category,unit_price,tags\nq,Q,x,1,z.nope\n";
    let err = merge_products(&seed_ontology(), read_products(rows.as_bytes()).unwrap()).unwrap_err();
    assert!(matches!(err, StoreError::Integrity(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_ontologies_round_trip(seed in any::<u64>()) {
        let o = random_ontology(&mut rng(seed), &RandomSpec { override_probability: 0.3, ..RandomSpec::default() });
        let json = to_canonical_json(&o);
        let back = parse_ontology(&json).unwrap().ontology;
        prop_assert_eq!(&back, &o);
        prop_assert_eq!(to_canonical_json(&back), json);
        prop_assert_eq!(ontology_version(&back), ontology_version(&o));
    }
}
