//! Set-theoretic association scores between product tags and preference tags,
//! their aggregation over a product, and the overlap error of the additive
//! aggregate.

use std::collections::BTreeSet;

use crate::ontology::model::{Ontology, PreferenceTag, Product, ProductTag};
use crate::scalar::Scalar;

/// Products with more tags than this fall back to the direct union when an
/// inclusion-exclusion expansion is requested.
pub const INCLUSION_EXCLUSION_MAX_TAGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssociationError {
    #[error("inclusion-exclusion expansion over {count} tags exceeds the limit of {INCLUSION_EXCLUSION_MAX_TAGS}")]
    TooManyTags { count: usize },
}

/// `|Q_z ∩ Q⁺| / |Q⁺|`, zero when the tag has no supporting concepts.
pub fn positive_association<S: Scalar>(z: &ProductTag, w: &PreferenceTag) -> S {
    let shared = z.concepts.intersection(&w.support_concepts).count();
    S::ratio(shared, w.support_concepts.len())
}

/// `|Q_z ∩ Q⁻| / |Q⁻|`, zero when the tag has no opposing concepts.
pub fn negative_association<S: Scalar>(z: &ProductTag, w: &PreferenceTag) -> S {
    let shared = z.concepts.intersection(&w.oppose_concepts).count();
    S::ratio(shared, w.oppose_concepts.len())
}

/// The set-theoretic association, ignoring any stored override.
pub fn computed_association<S: Scalar>(z: &ProductTag, w: &PreferenceTag) -> S {
    positive_association::<S>(z, w) - negative_association::<S>(z, w)
}

/// Association score in `[-1, 1]`; a stored override takes precedence over
/// the set-theoretic value.
pub fn association<S: Scalar>(o: &Ontology, z: &ProductTag, w: &PreferenceTag) -> S {
    match o.override_for(&z.id, &w.id) {
        Some(ov) => S::of(ov.score.clamp(-1.0, 1.0)),
        None => computed_association(z, w),
    }
}

/// Union of the primitive concepts of every tag assigned to `p`.
pub fn product_concepts<'a>(o: &'a Ontology, p: &'a Product) -> BTreeSet<&'a str> {
    o.tags_of(p).flat_map(|z| z.concepts.iter().map(String::as_str)).collect()
}

/// Aggregated association computed on the concept union of the product.
pub fn exact_aggregated_association<S: Scalar>(o: &Ontology, p: &Product, w: &PreferenceTag) -> S {
    let concepts = product_concepts(o, p);
    let support = w.support_concepts.iter().filter(|c| concepts.contains(c.as_str())).count();
    let oppose = w.oppose_concepts.iter().filter(|c| concepts.contains(c.as_str())).count();
    S::ratio(support, w.support_concepts.len()) - S::ratio(oppose, w.oppose_concepts.len())
}

/// Sum of the tag associations of `p`. Not clipped; exceeds `[-1, 1]` when
/// co-assigned tags share concepts.
pub fn additive_aggregated_association<S: Scalar>(o: &Ontology, p: &Product, w: &PreferenceTag) -> S {
    o.tags_of(p).map(|z| association::<S>(o, z, w)).sum()
}

/// Integer intersection counts behind the overlap error of one (product, preference tag) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverlapCounts {
    /// `Σ_z |Q_z ∩ Q⁺|`
    pub support_sum: usize,
    /// `|Q_p ∩ Q⁺|`
    pub support_union: usize,
    /// `Σ_z |Q_z ∩ Q⁻|`
    pub oppose_sum: usize,
    /// `|Q_p ∩ Q⁻|`
    pub oppose_union: usize,
    pub support_len: usize,
    pub oppose_len: usize,
}

impl OverlapCounts {
    pub fn of(o: &Ontology, p: &Product, w: &PreferenceTag) -> Self {
        let mut counts = OverlapCounts {
            support_len: w.support_concepts.len(),
            oppose_len: w.oppose_concepts.len(),
            ..Default::default()
        };
        for z in o.tags_of(p) {
            counts.support_sum += z.concepts.intersection(&w.support_concepts).count();
            counts.oppose_sum += z.concepts.intersection(&w.oppose_concepts).count();
        }
        let concepts = product_concepts(o, p);
        counts.support_union = w.support_concepts.iter().filter(|c| concepts.contains(c.as_str())).count();
        counts.oppose_union = w.oppose_concepts.iter().filter(|c| concepts.contains(c.as_str())).count();
        counts
    }

    pub fn epsilon<S: Scalar>(&self) -> S {
        S::ratio(self.support_sum - self.support_union, self.support_len)
            - S::ratio(self.oppose_sum - self.oppose_union, self.oppose_len)
    }
}

/// Overlap error `ε` such that `additive = exact + ε` for the set-theoretic
/// associations. Computed from integer counts, so it is exactly zero when the
/// product's tags are pairwise concept-disjoint.
pub fn overlap_error<S: Scalar>(o: &Ontology, p: &Product, w: &PreferenceTag) -> S {
    OverlapCounts::of(o, p, w).epsilon()
}

/// Overlap error expanded with the inclusion-exclusion principle over every
/// subset of two or more co-assigned tags. Exponential in the tag count.
pub fn inclusion_exclusion_overlap_error<S: Scalar>(
    o: &Ontology,
    p: &Product,
    w: &PreferenceTag,
) -> Result<S, AssociationError> {
    let tags: Vec<&ProductTag> = o.tags_of(p).collect();
    if tags.len() > INCLUSION_EXCLUSION_MAX_TAGS {
        return Err(AssociationError::TooManyTags { count: tags.len() });
    }
    let support = inclusion_exclusion_correction(&tags, &w.support_concepts);
    let oppose = inclusion_exclusion_correction(&tags, &w.oppose_concepts);
    // The correction enters the union with a negative sign for overlaps; the
    // additive sum over-counts by its negation.
    let pos = ratio_signed::<S>(-support, w.support_concepts.len());
    let neg = ratio_signed::<S>(-oppose, w.oppose_concepts.len());
    Ok(pos - neg)
}

fn ratio_signed<S: Scalar>(numerator: i64, denominator: usize) -> S {
    if denominator == 0 {
        S::zero()
    } else {
        S::of(numerator as f64) / S::of(denominator as f64)
    }
}

/// `Σ_{S ⊆ tags, |S| ≥ 2} (-1)^{|S|-1} |⋂_S Q_z ∩ target|`.
fn inclusion_exclusion_correction(tags: &[&ProductTag], target: &BTreeSet<String>) -> i64 {
    let restricted: Vec<BTreeSet<&str>> =
        tags.iter().map(|z| z.concepts.intersection(target).map(String::as_str).collect()).collect();
    let mut total = 0i64;
    for (i, set) in restricted.iter().enumerate() {
        if !set.is_empty() {
            expand(&restricted, i + 1, set, 1, &mut total);
        }
    }
    total
}

fn expand(sets: &[BTreeSet<&str>], start: usize, acc: &BTreeSet<&str>, depth: usize, total: &mut i64) {
    for j in start..sets.len() {
        let next: BTreeSet<&str> = acc.intersection(&sets[j]).copied().collect();
        if next.is_empty() {
            // Every superset of this selection intersects to the empty set.
            continue;
        }
        let size = depth + 1;
        let sign = if size.is_multiple_of(2) { -1 } else { 1 };
        *total += sign * next.len() as i64;
        expand(sets, j + 1, &next, size, total);
    }
}
