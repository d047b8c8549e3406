use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ontology::model::{Ontology, ProductTag};

/// A single validation observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    EmptyId {
        collection: &'static str,
    },
    DanglingConcept {
        owner: String,
        concept_id: String,
    },
    DanglingProductTag {
        product_id: String,
        tag_id: String,
    },
    DanglingPreferenceTag {
        preference_id: String,
        tag_id: String,
    },
    DanglingOverride {
        product_tag_id: String,
        preference_tag_id: String,
    },
    OverrideOutOfBounds {
        product_tag_id: String,
        preference_tag_id: String,
        score: f64,
    },
    /// Neither supporting nor opposing concepts.
    EmptyPreferenceTag {
        tag_id: String,
    },
    /// A concept both supports and opposes the same tag.
    ContradictoryPreferenceTag {
        tag_id: String,
        concepts: BTreeSet<String>,
    },
    EmptyPreference {
        preference_id: String,
    },
    NegativePrice {
        product_id: String,
        unit_price: f64,
    },
    InvalidRule {
        rule_id: String,
        reason: String,
    },
    /// Product tag with no concepts; its associations come from overrides only.
    PlaceholderTag {
        tag_id: String,
    },
    /// Two co-assigned product tags share concepts. `epsilon` lists the
    /// non-zero overlap error the pair adds per preference tag.
    OverlappingTags {
        product_id: String,
        tags: (String, String),
        shared: BTreeSet<String>,
        epsilon: BTreeMap<String, f64>,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::EmptyId { collection } => write!(f, "empty id in {collection}"),
            Finding::DanglingConcept { owner, concept_id } => {
                write!(f, "{owner} references unknown concept `{concept_id}`")
            }
            Finding::DanglingProductTag { product_id, tag_id } => {
                write!(f, "product `{product_id}` references unknown product tag `{tag_id}`")
            }
            Finding::DanglingPreferenceTag { preference_id, tag_id } => {
                write!(f, "preference `{preference_id}` references unknown preference tag `{tag_id}`")
            }
            Finding::DanglingOverride { product_tag_id, preference_tag_id } => {
                write!(f, "override ({product_tag_id}, {preference_tag_id}) references an unknown tag")
            }
            Finding::OverrideOutOfBounds { product_tag_id, preference_tag_id, score } => {
                write!(f, "override ({product_tag_id}, {preference_tag_id}) score {score} outside [-1, 1]")
            }
            Finding::EmptyPreferenceTag { tag_id } => write!(f, "preference tag `{tag_id}` has no concepts"),
            Finding::ContradictoryPreferenceTag { tag_id, concepts } => {
                let list: Vec<&str> = concepts.iter().map(String::as_str).collect();
                write!(f, "preference tag `{tag_id}` both supports and opposes {}", list.join(", "))
            }
            Finding::EmptyPreference { preference_id } => write!(f, "preference `{preference_id}` has no tags"),
            Finding::NegativePrice { product_id, unit_price } => {
                write!(f, "product `{product_id}` has negative price {unit_price}")
            }
            Finding::InvalidRule { rule_id, reason } => write!(f, "rule `{rule_id}`: {reason}"),
            Finding::PlaceholderTag { tag_id } => write!(f, "product tag `{tag_id}` has no concepts"),
            Finding::OverlappingTags { product_id, tags, shared, epsilon } => {
                let shared: Vec<&str> = shared.iter().map(String::as_str).collect();
                write!(f, "product `{product_id}`: tags `{}` and `{}` share {}", tags.0, tags.1, shared.join(", "))?;
                for (w, e) in epsilon {
                    write!(f, "; eps({w}) = {e}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Integrity failures; an ontology with errors is rejected on load.
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

pub fn validate_ontology(o: &Ontology) -> ValidationReport {
    let mut r = ValidationReport::default();
    check_ids(o, &mut r);
    check_tags(o, &mut r);
    check_preferences(o, &mut r);
    check_products(o, &mut r);
    check_overrides(o, &mut r);
    for rule in &o.rules {
        if let Err(e) = rule.check(o) {
            r.errors.push(Finding::InvalidRule { rule_id: rule.id.clone(), reason: e.to_string() });
        }
    }
    check_overlaps(o, &mut r);
    r
}

fn check_ids(o: &Ontology, r: &mut ValidationReport) {
    let empties = [
        ("concepts", o.concepts.keys().any(String::is_empty)),
        ("product_tags", o.product_tags.keys().any(String::is_empty)),
        ("preference_tags", o.preference_tags.keys().any(String::is_empty)),
        ("preferences", o.preferences.keys().any(String::is_empty)),
        ("products", o.products.keys().any(String::is_empty)),
    ];
    for (collection, empty) in empties {
        if empty {
            r.errors.push(Finding::EmptyId { collection });
        }
    }
}

fn check_tags(o: &Ontology, r: &mut ValidationReport) {
    for tag in o.product_tags.values() {
        if tag.is_placeholder() {
            r.warnings.push(Finding::PlaceholderTag { tag_id: tag.id.clone() });
        }
        for c in &tag.concepts {
            if !o.concepts.contains_key(c) {
                r.errors.push(Finding::DanglingConcept { owner: tag.id.clone(), concept_id: c.clone() });
            }
        }
    }
    for tag in o.preference_tags.values() {
        for c in tag.concepts() {
            if !o.concepts.contains_key(c) {
                r.errors.push(Finding::DanglingConcept { owner: tag.id.clone(), concept_id: c.clone() });
            }
        }
        if tag.support_concepts.is_empty() && tag.oppose_concepts.is_empty() {
            r.errors.push(Finding::EmptyPreferenceTag { tag_id: tag.id.clone() });
        }
        let both: BTreeSet<String> = tag.support_concepts.intersection(&tag.oppose_concepts).cloned().collect();
        if !both.is_empty() {
            r.errors.push(Finding::ContradictoryPreferenceTag { tag_id: tag.id.clone(), concepts: both });
        }
    }
}

fn check_preferences(o: &Ontology, r: &mut ValidationReport) {
    for pref in o.preferences.values() {
        if pref.tag_ids.is_empty() {
            r.errors.push(Finding::EmptyPreference { preference_id: pref.id.clone() });
        }
        for t in &pref.tag_ids {
            if !o.preference_tags.contains_key(t) {
                r.errors.push(Finding::DanglingPreferenceTag { preference_id: pref.id.clone(), tag_id: t.clone() });
            }
        }
    }
}

fn check_products(o: &Ontology, r: &mut ValidationReport) {
    for p in o.products.values() {
        for t in &p.tag_ids {
            if !o.product_tags.contains_key(t) {
                r.errors.push(Finding::DanglingProductTag { product_id: p.id.clone(), tag_id: t.clone() });
            }
        }
        if let Some(price) = p.unit_price.filter(|v| *v < 0.0 || v.is_nan()) {
            r.errors.push(Finding::NegativePrice { product_id: p.id.clone(), unit_price: price });
        }
    }
}

fn check_overrides(o: &Ontology, r: &mut ValidationReport) {
    for ((z, w), ov) in &o.overrides {
        if !o.product_tags.contains_key(z) || !o.preference_tags.contains_key(w) {
            r.errors.push(Finding::DanglingOverride { product_tag_id: z.clone(), preference_tag_id: w.clone() });
        }
        if ov.score.is_nan() || ov.score.abs() > 1.0 {
            r.errors.push(Finding::OverrideOutOfBounds {
                product_tag_id: z.clone(),
                preference_tag_id: w.clone(),
                score: ov.score,
            });
        }
    }
}

fn check_overlaps(o: &Ontology, r: &mut ValidationReport) {
    for p in o.products.values() {
        let tags: Vec<&ProductTag> = o.tags_of(p).collect();
        for (i, a) in tags.iter().enumerate() {
            for b in &tags[i + 1..] {
                let shared: BTreeSet<String> = a.concepts.intersection(&b.concepts).cloned().collect();
                if shared.is_empty() {
                    continue;
                }
                let mut epsilon = BTreeMap::new();
                for w in o.preference_tags.values() {
                    let pos = shared.intersection(&w.support_concepts).count();
                    let neg = shared.intersection(&w.oppose_concepts).count();
                    let mut e = 0.0;
                    if pos > 0 {
                        e += pos as f64 / w.support_concepts.len() as f64;
                    }
                    if neg > 0 {
                        e -= neg as f64 / w.oppose_concepts.len() as f64;
                    }
                    if e != 0.0 {
                        epsilon.insert(w.id.clone(), e);
                    }
                }
                r.warnings.push(Finding::OverlappingTags {
                    product_id: p.id.clone(),
                    tags: (a.id.clone(), b.id.clone()),
                    shared,
                    epsilon,
                });
            }
        }
    }
}
