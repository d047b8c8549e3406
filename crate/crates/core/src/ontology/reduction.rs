//! Rewrites an ontology so that the product tags co-assigned to any product
//! share no primitive concepts.
//!
//! Two rules are applied until neither fires:
//!
//! 1. When one assigned tag's concepts contain another's, only the containing
//!    tag stays assigned to that product (identical sets keep the smaller id).
//! 2. When two co-assigned tags overlap without containment, the shared
//!    concepts become a new tag assigned to every product carrying either
//!    original, and are removed from both originals. Overrides on the
//!    originals are reduced by the set-theoretic association `δ` of the
//!    shared concepts, which the new tag carries.
//!
//! Both rules preserve the concept union of every product, so the exact
//! aggregated association is unchanged while the overlap error drops to zero.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ontology::association::computed_association;
use crate::ontology::model::{Ontology, PreferenceTag, ProductTag};

const SHARED_TAG_PREFIX: &str = "shared:";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedTag {
    pub tag_id: String,
    pub concepts: BTreeSet<String>,
    pub split_from: (String, String),
    pub products: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Unassignment {
    pub product_id: String,
    pub tag_id: String,
    pub kept_tag_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConflictReason {
    /// The tag has overrides but no concepts, so the overlap cannot be decomposed.
    PlaceholderConcepts { tag_id: String },
    /// Subtracting `δ` would push a calibrated score outside `[-1, 1]`.
    OverrideOutOfBounds { tag_id: String, preference_tag_id: String, score: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionConflict {
    pub product_tags: (String, String),
    pub reason: ConflictReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReductionReport {
    pub extracted: Vec<ExtractedTag>,
    pub unassigned: Vec<Unassignment>,
    pub conflicts: Vec<ReductionConflict>,
}

impl ReductionReport {
    pub fn is_noop(&self) -> bool {
        self.extracted.is_empty() && self.unassigned.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub ontology: Ontology,
    pub report: ReductionReport,
}

/// Deterministic id for the tag holding `concepts`.
pub fn shared_tag_id(concepts: &BTreeSet<String>) -> String {
    let joined: Vec<&str> = concepts.iter().map(String::as_str).collect();
    format!("{SHARED_TAG_PREFIX}{}", joined.join("+"))
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

pub fn apply_reduction_principle(source: &Ontology) -> Reduction {
    let mut o = source.clone();
    let mut report = ReductionReport::default();
    let mut skipped: BTreeSet<(String, String)> = BTreeSet::new();

    record_placeholder_conflicts(&o, &mut report, &mut skipped);

    loop {
        remove_contained_tags(&mut o, &mut report);

        let Some((a, b)) = next_overlapping_pair(&o, &skipped) else {
            break;
        };
        let shared: BTreeSet<String> =
            o.product_tags[&a].concepts.intersection(&o.product_tags[&b].concepts).cloned().collect();

        match split_overrides(&o, &a, &b, &shared) {
            Ok(updates) => {
                for (key, score) in updates {
                    if let Some(ov) = o.overrides.get_mut(&key) {
                        ov.score = score;
                    }
                }
            }
            Err(reason) => {
                report.conflicts.push(ReductionConflict { product_tags: (a.clone(), b.clone()), reason });
                skipped.insert((a, b));
                continue;
            }
        }

        let tag_id = ensure_shared_tag(&mut o, &shared);
        for id in [&a, &b] {
            if let Some(tag) = o.product_tags.get_mut(id) {
                tag.concepts.retain(|c| !shared.contains(c));
            }
        }
        let mut carriers = Vec::new();
        for product in o.products.values_mut() {
            if product.tag_ids.contains(&a) || product.tag_ids.contains(&b) {
                product.tag_ids.insert(tag_id.clone());
                carriers.push(product.id.clone());
            }
        }
        report.extracted.push(ExtractedTag { tag_id, concepts: shared, split_from: (a, b), products: carriers });
    }

    Reduction { ontology: o, report }
}

/// Pairs involving a placeholder tag with overrides cannot be decomposed.
fn record_placeholder_conflicts(o: &Ontology, report: &mut ReductionReport, skipped: &mut BTreeSet<(String, String)>) {
    for product in o.products.values() {
        let tags: Vec<&ProductTag> = o.tags_of(product).collect();
        for (i, x) in tags.iter().enumerate() {
            for y in &tags[i + 1..] {
                let culprit = [x, y].into_iter().find(|t| t.is_placeholder() && o.has_overrides_for_product_tag(&t.id));
                if let Some(t) = culprit {
                    let pair = ordered(&x.id, &y.id);
                    if skipped.insert(pair.clone()) {
                        report.conflicts.push(ReductionConflict {
                            product_tags: pair,
                            reason: ConflictReason::PlaceholderConcepts { tag_id: t.id.clone() },
                        });
                    }
                }
            }
        }
    }
}

fn remove_contained_tags(o: &mut Ontology, report: &mut ReductionReport) {
    let tags = &o.product_tags;
    for product in o.products.values_mut() {
        let assigned: Vec<&ProductTag> =
            product.tag_ids.iter().filter_map(|id| tags.get(id)).filter(|t| !t.is_placeholder()).collect();
        let mut drop = Vec::new();
        for inner in &assigned {
            let keeper = assigned.iter().find(|outer| {
                outer.id != inner.id
                    && outer.concepts.is_superset(&inner.concepts)
                    && (outer.concepts.len() > inner.concepts.len() || outer.id < inner.id)
            });
            if let Some(outer) = keeper {
                drop.push((inner.id.clone(), outer.id.clone()));
            }
        }
        for (tag_id, kept_tag_id) in drop {
            product.tag_ids.remove(&tag_id);
            report.unassigned.push(Unassignment { product_id: product.id.clone(), tag_id, kept_tag_id });
        }
    }
}

fn next_overlapping_pair(o: &Ontology, skipped: &BTreeSet<(String, String)>) -> Option<(String, String)> {
    let mut best: Option<(String, String)> = None;
    for product in o.products.values() {
        let tags: Vec<&ProductTag> = o.tags_of(product).filter(|t| !t.is_placeholder()).collect();
        for (i, x) in tags.iter().enumerate() {
            for y in &tags[i + 1..] {
                if x.concepts.is_disjoint(&y.concepts) {
                    continue;
                }
                let pair = ordered(&x.id, &y.id);
                if skipped.contains(&pair) {
                    continue;
                }
                if best.as_ref().is_none_or(|b| pair < *b) {
                    best = Some(pair);
                }
            }
        }
    }
    best
}

/// (product tag, preference tag) key with its new override score.
type OverrideUpdate = ((String, String), f64);

/// New override scores for the originals, or the reason they cannot be split.
fn split_overrides(
    o: &Ontology,
    a: &str,
    b: &str,
    shared: &BTreeSet<String>,
) -> Result<Vec<OverrideUpdate>, ConflictReason> {
    let shared_tag = ProductTag { id: String::new(), name: String::new(), concepts: shared.clone() };
    let mut updates = Vec::new();
    for ((z, w), ov) in &o.overrides {
        if z != a && z != b {
            continue;
        }
        let delta = o
            .preference_tags
            .get(w)
            .map(|pt: &PreferenceTag| computed_association::<f64>(&shared_tag, pt))
            .unwrap_or(0.0);
        let score = ov.score - delta;
        if !(-1.0..=1.0).contains(&score) {
            return Err(ConflictReason::OverrideOutOfBounds {
                tag_id: z.clone(),
                preference_tag_id: w.clone(),
                score: ov.score,
                delta,
            });
        }
        updates.push(((z.clone(), w.clone()), score));
    }
    Ok(updates)
}

/// Returns the id of a tag holding exactly `concepts`, creating one if needed.
fn ensure_shared_tag(o: &mut Ontology, concepts: &BTreeSet<String>) -> String {
    if let Some(existing) = o.product_tags.values().find(|t| &t.concepts == concepts) {
        return existing.id.clone();
    }
    let base = shared_tag_id(concepts);
    let mut id = base.clone();
    let mut n = 2;
    while o.product_tags.contains_key(&id) {
        id = format!("{base}~{n}");
        n += 1;
    }
    let name = concepts
        .iter()
        .map(|c| o.concepts.get(c).map_or(c.as_str(), |pc| pc.label.as_str()))
        .collect::<Vec<_>>()
        .join(", ");
    o.product_tags.insert(id.clone(), ProductTag { id: id.clone(), name, concepts: concepts.clone() });
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::association::{exact_aggregated_association, overlap_error};
    use crate::ontology::model::{AssociationOverride, OverrideSource, Product};

    fn salad_ontology() -> Ontology {
        let mut o = Ontology::with_concepts(["co2-min", "plant-part", "not-animal", "sweet", "leafy"]);
        o.add_product_tag(ProductTag::new("vegetable", "vegetable", ["co2-min", "plant-part", "not-animal", "leafy"]))
            .unwrap();
        o.add_product_tag(ProductTag::new("fruit", "fruit", ["plant-part", "not-animal", "sweet"])).unwrap();
        o.add_preference_tag(PreferenceTag::new(
            "vegetarian-diet",
            "vegetarian diet",
            ["plant-part", "not-animal"],
            Vec::<String>::new(),
        ))
        .unwrap();
        o.add_product(Product::new("salad", "prepared", ["vegetable", "fruit"])).unwrap();
        o.add_product(Product::new("lettuce", "vegetables", ["vegetable"])).unwrap();
        o.add_product(Product::new("apple", "fruit", ["fruit"])).unwrap();
        o
    }

    #[test]
    fn shared_concepts_become_a_new_tag() {
        let o = salad_ontology();
        let r = apply_reduction_principle(&o);
        let id = "shared:not-animal+plant-part";
        assert_eq!(r.report.extracted.len(), 1);
        assert_eq!(r.report.extracted[0].tag_id, id);
        let shared = &r.ontology.product_tags[id];
        assert_eq!(shared.name, "not-animal, plant-part");
        assert_eq!(
            r.ontology.product_tags["vegetable"].concepts,
            ["co2-min", "leafy"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(r.ontology.product_tags["fruit"].concepts, ["sweet"].iter().map(|s| s.to_string()).collect());
        for p in ["salad", "lettuce", "apple"] {
            assert!(r.ontology.products[p].tag_ids.contains(id), "{p}");
        }
        let w = &r.ontology.preference_tags["vegetarian-diet"];
        for p in r.ontology.products.values() {
            assert_eq!(overlap_error::<f64>(&r.ontology, p, w), 0.0);
            assert_eq!(
                exact_aggregated_association::<f64>(&r.ontology, p, w),
                exact_aggregated_association::<f64>(&o, &o.products[&p.id], w)
            );
        }
    }

    #[test]
    fn disjoint_ontology_is_a_fixed_point() {
        let mut o = Ontology::with_concepts(["a", "b"]);
        o.add_product_tag(ProductTag::new("x", "x", ["a"])).unwrap();
        o.add_product_tag(ProductTag::new("y", "y", ["b"])).unwrap();
        o.add_product(Product::new("p", "c", ["x", "y"])).unwrap();
        let r = apply_reduction_principle(&o);
        assert_eq!(r.ontology, o);
        assert!(r.report.is_noop());
    }

    #[test]
    fn contained_tag_is_unassigned() {
        let mut o = Ontology::with_concepts(["a", "b"]);
        o.add_product_tag(ProductTag::new("ab", "ab", ["a", "b"])).unwrap();
        o.add_product_tag(ProductTag::new("b", "b", ["b"])).unwrap();
        o.add_preference_tag(PreferenceTag::new("w", "w", ["a", "b"], Vec::<String>::new())).unwrap();
        o.add_product(Product::new("p", "c", ["ab", "b"])).unwrap();
        o.add_product(Product::new("q", "c", ["b"])).unwrap();
        let r = apply_reduction_principle(&o);
        assert_eq!(
            r.report.unassigned,
            vec![Unassignment { product_id: "p".into(), tag_id: "b".into(), kept_tag_id: "ab".into() }]
        );
        assert_eq!(r.ontology.products["p"].tag_ids.len(), 1);
        assert!(r.ontology.products["q"].tag_ids.contains("b"));
        let w = &r.ontology.preference_tags["w"];
        assert_eq!(overlap_error::<f64>(&r.ontology, &r.ontology.products["p"], w), 0.0);
    }

    #[test]
    fn identical_tags_keep_smaller_id() {
        let mut o = Ontology::with_concepts(["a"]);
        o.add_product_tag(ProductTag::new("t1", "t1", ["a"])).unwrap();
        o.add_product_tag(ProductTag::new("t2", "t2", ["a"])).unwrap();
        o.add_product(Product::new("p", "c", ["t1", "t2"])).unwrap();
        let r = apply_reduction_principle(&o);
        assert_eq!(r.ontology.products["p"].tag_ids.iter().collect::<Vec<_>>(), vec!["t1"]);
    }

    #[test]
    fn overrides_are_split_by_delta() {
        let mut o = salad_ontology();
        o.add_override(AssociationOverride {
            product_tag_id: "vegetable".into(),
            preference_tag_id: "vegetarian-diet".into(),
            score: 1.0,
            source: OverrideSource::Expert,
        })
        .unwrap();
        let r = apply_reduction_principle(&o);
        // The shared concepts fully support the preference tag, so δ = 1.
        let ov = r.ontology.override_for("vegetable", "vegetarian-diet").unwrap();
        assert_eq!(ov.score, 0.0);
        assert!(r.report.conflicts.is_empty());
    }

    #[test]
    fn unsplittable_override_is_reported() {
        let mut o = salad_ontology();
        o.add_override(AssociationOverride {
            product_tag_id: "fruit".into(),
            preference_tag_id: "vegetarian-diet".into(),
            score: -0.5,
            source: OverrideSource::Crowd,
        })
        .unwrap();
        let r = apply_reduction_principle(&o);
        assert_eq!(r.report.conflicts.len(), 1);
        assert!(matches!(r.report.conflicts[0].reason, ConflictReason::OverrideOutOfBounds { .. }));
        assert_eq!(r.ontology.product_tags, o.product_tags);
    }

    #[test]
    fn placeholder_with_override_is_reported_and_untouched() {
        let mut o = salad_ontology();
        o.add_product_tag(ProductTag::new("organic", "organic", Vec::<String>::new())).unwrap();
        o.add_override(AssociationOverride {
            product_tag_id: "organic".into(),
            preference_tag_id: "vegetarian-diet".into(),
            score: 0.2,
            source: OverrideSource::Ml,
        })
        .unwrap();
        o.products.get_mut("lettuce").unwrap().tag_ids.insert("organic".into());
        let r = apply_reduction_principle(&o);
        assert!(r.report.conflicts.iter().any(|c| matches!(
            &c.reason,
            ConflictReason::PlaceholderConcepts { tag_id } if tag_id == "organic"
        )));
        assert!(r.ontology.products["lettuce"].tag_ids.contains("organic"));
    }

    #[test]
    fn reduction_is_idempotent() {
        let once = apply_reduction_principle(&salad_ontology()).ontology;
        let twice = apply_reduction_principle(&once);
        assert_eq!(twice.ontology, once);
        assert!(twice.report.is_noop());
    }
}
