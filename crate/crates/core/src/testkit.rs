//! Random ontologies, score vectors and catalogs for property and load tests.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ontology::model::{
    AssociationOverride, Category, Ontology, OverrideSource, Preference, PreferenceTag, Product, ProductTag,
};
use crate::rating::PreferenceScoreVector;
use crate::scalar::Scalar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper bounds for [`random_ontology`]; each count is drawn from `1..=max`.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub concepts: usize,
    pub product_tags: usize,
    pub preference_tags: usize,
    pub preferences: usize,
    pub products: usize,
    /// Chance that a (product tag, preference tag) pair carries an override.
    pub override_probability: f64,
    /// Make product tags pairwise concept-disjoint.
    pub disjoint_tags: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            concepts: 12,
            product_tags: 8,
            preference_tags: 5,
            preferences: 4,
            products: 6,
            override_probability: 0.0,
            disjoint_tags: false,
        }
    }
}

const CATEGORIES: [Category; 4] = [Category::Environment, Category::Health, Category::Social, Category::Quality];

fn concept_id(i: usize) -> String {
    format!("q{i:02}")
}

pub fn random_ontology<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Ontology {
    let n_concepts = rng.random_range(1..=spec.concepts.max(1));
    let mut o = Ontology::with_concepts((0..n_concepts).map(concept_id));

    let n_tags = rng.random_range(1..=spec.product_tags.max(1));
    if spec.disjoint_tags {
        // Each concept goes to at most one tag; tags left empty are dropped.
        let mut sets = vec![Vec::new(); n_tags];
        for q in 0..n_concepts {
            let slot = rng.random_range(0..=n_tags);
            if slot < n_tags {
                sets[slot].push(concept_id(q));
            }
        }
        for (i, set) in sets.into_iter().enumerate().filter(|(_, s)| !s.is_empty()) {
            o.product_tags.insert(format!("z{i}"), ProductTag::new(format!("z{i}"), format!("tag {i}"), set));
        }
        if o.product_tags.is_empty() {
            o.product_tags.insert("z0".into(), ProductTag::new("z0", "tag 0", [concept_id(0)]));
        }
    } else {
        for i in 0..n_tags {
            let p = rng.random_range(0.15..0.6);
            let mut set: Vec<String> = (0..n_concepts).filter(|_| rng.random_bool(p)).map(concept_id).collect();
            if set.is_empty() {
                set.push(concept_id(rng.random_range(0..n_concepts)));
            }
            o.product_tags.insert(format!("z{i}"), ProductTag::new(format!("z{i}"), format!("tag {i}"), set));
        }
    }

    let n_pref_tags = rng.random_range(1..=spec.preference_tags.max(1));
    for i in 0..n_pref_tags {
        let (mut support, mut oppose) = (Vec::new(), Vec::new());
        for q in 0..n_concepts {
            match rng.random_range(0..10) {
                0..=1 => support.push(concept_id(q)),
                2..=3 => oppose.push(concept_id(q)),
                _ => {}
            }
        }
        if support.is_empty() && oppose.is_empty() {
            support.push(concept_id(rng.random_range(0..n_concepts)));
        }
        o.preference_tags
            .insert(format!("w{i}"), PreferenceTag::new(format!("w{i}"), format!("pref tag {i}"), support, oppose));
    }

    let pref_tag_ids: Vec<String> = o.preference_tags.keys().cloned().collect();
    let n_prefs = rng.random_range(1..=spec.preferences.max(1));
    for i in 0..n_prefs {
        let k = rng.random_range(1..=pref_tag_ids.len().min(3));
        let tag_ids = pref_tag_ids.choose_multiple(rng, k).cloned().collect();
        o.preferences.insert(
            format!("P{i}"),
            Preference {
                id: format!("P{i}"),
                statement: format!("preference {i}"),
                description: String::new(),
                category: *CATEGORIES.choose(rng).expect("non-empty"),
                tag_ids,
                strict: rng.random_bool(0.25),
            },
        );
    }

    let tag_ids: Vec<String> = o.product_tags.keys().cloned().collect();
    let n_products = rng.random_range(1..=spec.products.max(1));
    for i in 0..n_products {
        let k = rng.random_range(0..=tag_ids.len());
        let tags: Vec<String> = tag_ids.choose_multiple(rng, k).cloned().collect();
        let mut p = Product::new(format!("p{i:03}"), format!("c{}", i % 3), tags);
        p.unit_price = Some(f64::from(rng.random_range(10..1000u32)) / 100.0);
        o.products.insert(p.id.clone(), p);
    }

    if spec.override_probability > 0.0 {
        for z in &tag_ids {
            for w in &pref_tag_ids {
                if rng.random_bool(spec.override_probability) {
                    let score = f64::from(rng.random_range(-100..=100i32)) / 100.0;
                    o.overrides.insert(
                        (z.clone(), w.clone()),
                        AssociationOverride {
                            product_tag_id: z.clone(),
                            preference_tag_id: w.clone(),
                            score,
                            source: OverrideSource::Expert,
                        },
                    );
                }
            }
        }
    }
    o
}

/// Scores over the ontology's preferences with extra mass on the edge cases:
/// omitted, exactly neutral, and both ends of the scale.
pub fn random_scores<S: Scalar, R: Rng>(rng: &mut R, o: &Ontology, s_mean: f64) -> PreferenceScoreVector<S> {
    let max = 2.0 * s_mean;
    o.preferences
        .keys()
        .filter_map(|id| {
            let s = match rng.random_range(0..10) {
                0..=1 => return None,
                2 => s_mean,
                3 => 0.0,
                4 => max,
                _ => rng.random_range(0.0..=max),
            };
            Some((id.clone(), S::of(s)))
        })
        .collect()
}

/// Replaces the products of `base` with `n` synthetic ones carrying 1 to 6
/// random tags from its vocabulary.
pub fn synthetic_catalog(base: &Ontology, n: usize, seed: u64) -> Ontology {
    let mut rng = rng(seed);
    let mut o = base.clone();
    o.products.clear();
    let tag_ids: Vec<&String> = base.product_tags.keys().collect();
    for i in 0..n {
        let k = rng.random_range(1..=6.min(tag_ids.len()));
        let tags: Vec<String> = tag_ids.choose_multiple(&mut rng, k).map(|t| (*t).clone()).collect();
        let p = Product::new(format!("s{i:06}"), format!("cat{}", i % 12), tags);
        o.products.insert(p.id.clone(), p);
    }
    o
}

/// Three primitive concepts, the seven tags they compose, one product tagged
/// `A` and `C`, and one preference made of the preference tags `C` and `AB`.
pub fn three_concept_ontology() -> Ontology {
    let mut o = Ontology::with_concepts(["A", "B", "C"]);
    for tag in ["A", "B", "C", "AB", "AC", "BC", "ABC"] {
        o.product_tags.insert(tag.into(), ProductTag::new(tag, tag, tag.chars().map(|c| c.to_string())));
    }
    for tag in ["C", "AB"] {
        o.preference_tags.insert(
            tag.into(),
            PreferenceTag::new(tag, tag, tag.chars().map(|c| c.to_string()), std::iter::empty::<String>()),
        );
    }
    o.preferences.insert(
        "pi".into(),
        Preference {
            id: "pi".into(),
            statement: "example preference".into(),
            description: String::new(),
            category: Category::Environment,
            tag_ids: ["C".to_owned(), "AB".to_owned()].into(),
            strict: false,
        },
    );
    o.products.insert("p".into(), Product::new("p", "example", ["A", "C"]));
    o
}
