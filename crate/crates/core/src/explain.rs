//! Additive decomposition of a scaled rating into per-preference,
//! per-preference-tag and per-product-tag contributions, plus the
//! user-independent inputs a client needs to redo it locally.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::rating::{PreferenceScoreVector, RatingEngine, RatingError, UserProfile};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("every preference score is neutral; the rating is the baseline alone")]
    AllNeutral,
    #[error("{level} contributions sum to {sum}, rating is {scaled}")]
    IdentityViolation { level: &'static str, sum: f64, scaled: f64 },
    #[error(transparent)]
    Rating(#[from] RatingError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct RatingExplanation<S: Scalar> {
    pub product_id: String,
    pub scaled_rating: S,
    pub raw_rating: S,
    pub beta: S,
    /// Set when the rating was floored by a strict preference; the maps are then empty.
    pub strict_violation: Option<String>,
    pub preference_contributions: BTreeMap<String, S>,
    pub preference_tag_contributions: BTreeMap<String, S>,
    pub product_tag_contributions: BTreeMap<String, S>,
}

impl<S: Scalar> RatingExplanation<S> {
    /// Product tags that raise the rating, largest first.
    pub fn positive_product_tags(&self) -> Vec<(&str, S)> {
        let mut v: Vec<_> = self
            .product_tag_contributions
            .iter()
            .filter(|(_, c)| **c > S::zero())
            .map(|(id, c)| (id.as_str(), *c))
            .collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        v
    }

    /// Product tags that lower the rating, most negative first.
    pub fn negative_product_tags(&self) -> Vec<(&str, S)> {
        let mut v: Vec<_> = self
            .product_tag_contributions
            .iter()
            .filter(|(_, c)| **c < S::zero())
            .map(|(id, c)| (id.as_str(), *c))
            .collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        v
    }
}

/// Tolerance of the sum identities: 1e-9 in `f64`, looser in `f32`.
pub fn identity_tolerance<S: Scalar>() -> S {
    S::of(1e-9).max(S::epsilon() * S::of(1024.0))
}

struct Weights<S> {
    /// Per preference index: `α · Δ_π / Σ|Δ|`.
    weight: Vec<S>,
}

fn weights<S: Scalar>(engine: &RatingEngine<S>, profile: &UserProfile<S>) -> Result<Weights<S>, ExplainError> {
    if profile.is_neutral() {
        return Err(ExplainError::AllNeutral);
    }
    let alpha = engine.config().alpha;
    let d = profile.abs_offset_sum();
    let weight = engine.offsets(profile).map(|(_, delta)| alpha * delta / d).collect();
    Ok(Weights { weight })
}

/// `α · c(p,π) · Δ_π / Σ|Δ|` for every preference of the ontology.
pub fn explain_by_preference<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    scores: &PreferenceScoreVector<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let profile = engine.profile(scores)?;
    by_preference(engine, product_id, &profile)
}

fn by_preference<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    profile: &UserProfile<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let w = weights(engine, profile)?;
    let row = engine.index_row(product_id).ok_or_else(|| RatingError::UnknownProduct(product_id.to_owned()))?;
    Ok(engine
        .preference_ids()
        .iter()
        .zip(row.iter().zip(&w.weight))
        .map(|(id, (c, wt))| (id.clone(), *c * *wt))
        .collect())
}

/// Contributions of the preference tags of `preference_id` alone; they sum to
/// that preference's contribution.
pub fn preference_tag_breakdown<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    preference_id: &str,
    scores: &PreferenceScoreVector<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let profile = engine.profile(scores)?;
    let w = weights(engine, &profile)?;
    let pi = engine
        .preference_ids()
        .iter()
        .position(|id| id == preference_id)
        .ok_or_else(|| RatingError::UnknownPreference(preference_id.to_owned()))?;
    let tags = engine.preference_tag_ids(preference_id)?;
    let size = S::of(tags.len() as f64);
    tags.into_iter()
        .map(|t| {
            let n = engine.normalized_aggregated_association(product_id, t)?;
            Ok((t.to_owned(), n / size * w.weight[pi]))
        })
        .collect()
}

/// `α · Σ_π n(p,ω) · 1{ω ∈ Ω_π} / |Ω_π| · Δ_π / Σ|Δ|` for every preference tag
/// used by some preference.
pub fn explain_by_preference_tag<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    scores: &PreferenceScoreVector<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let profile = engine.profile(scores)?;
    by_preference_tag(engine, product_id, &profile)
}

fn by_preference_tag<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    profile: &UserProfile<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let w = weights(engine, profile)?;
    let mut out = BTreeMap::new();
    for (pi, pref) in engine.preference_ids().iter().enumerate() {
        let tags = engine.preference_tag_ids(pref)?;
        let size = S::of(tags.len() as f64);
        for t in tags {
            let n = engine.normalized_aggregated_association(product_id, t)?;
            *out.entry(t.to_owned()).or_insert_with(S::zero) += n / size * w.weight[pi];
        }
    }
    Ok(out)
}

/// Share of a product tag in the normalized aggregate of one preference tag:
/// `r(z,ω) · n(p,ω) / a(p,ω)`, with `a` the unclipped aggregate.
///
/// Without clamping this is `r(z,ω) / η`, η being the reference in use; under
/// clipping each tag keeps its proportion of the clipped mass. Zero when the
/// aggregate is zero.
pub fn product_tag_share<S: Scalar>(r: S, normalized: S, aggregate: S) -> S {
    if aggregate == S::zero() {
        S::zero()
    } else {
        r * normalized / aggregate
    }
}

/// Contribution of each product tag assigned to the product.
pub fn explain_by_product_tag<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    scores: &PreferenceScoreVector<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let profile = engine.profile(scores)?;
    by_product_tag(engine, product_id, &profile)
}

fn by_product_tag<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    profile: &UserProfile<S>,
) -> Result<BTreeMap<String, S>, ExplainError> {
    let w = weights(engine, profile)?;
    let product =
        engine.ontology().products.get(product_id).ok_or_else(|| RatingError::UnknownProduct(product_id.to_owned()))?;

    // Weight each preference tag receives from the preferences that include it.
    let mut tag_weight: BTreeMap<&str, S> = BTreeMap::new();
    for (pi, pref) in engine.preference_ids().iter().enumerate() {
        let tags = engine.preference_tag_ids(pref)?;
        let size = S::of(tags.len() as f64);
        for t in tags {
            *tag_weight.entry(t).or_insert_with(S::zero) += w.weight[pi] / size;
        }
    }

    let mut out: BTreeMap<String, S> = product
        .tag_ids
        .iter()
        .filter(|z| engine.ontology().product_tags.contains_key(*z))
        .map(|z| (z.clone(), S::zero()))
        .collect();
    for (t, tw) in tag_weight {
        let aggregate = engine.aggregate(product_id, t)?;
        let normalized = engine.normalized_aggregated_association(product_id, t)?;
        for (z, c) in out.iter_mut() {
            let r = engine.association(z, t).unwrap_or(S::zero());
            *c += product_tag_share(r, normalized, aggregate) * tw;
        }
    }
    Ok(out)
}

fn check<S: Scalar>(level: &'static str, beta: S, map: &BTreeMap<String, S>, scaled: S) -> Result<(), ExplainError> {
    let sum = beta + map.values().copied().sum::<S>();
    if (sum - scaled).abs() > identity_tolerance::<S>() {
        return Err(ExplainError::IdentityViolation { level, sum: sum.as_f64(), scaled: scaled.as_f64() });
    }
    Ok(())
}

/// All three decompositions, checked against the rating.
///
/// A neutral user gets empty maps and the baseline rating; a strict
/// violation gets empty maps and the violated preference.
pub fn explain<S: Scalar>(
    engine: &RatingEngine<S>,
    product_id: &str,
    scores: &PreferenceScoreVector<S>,
) -> Result<RatingExplanation<S>, ExplainError> {
    let profile = engine.profile(scores)?;
    let rating = engine.rate_profile(&profile, product_id)?;
    let beta = engine.config().beta;
    let mut explanation = RatingExplanation {
        product_id: product_id.to_owned(),
        scaled_rating: rating.scaled,
        raw_rating: rating.raw,
        beta,
        strict_violation: rating.strict_violation,
        preference_contributions: BTreeMap::new(),
        preference_tag_contributions: BTreeMap::new(),
        product_tag_contributions: BTreeMap::new(),
    };
    if profile.is_neutral() || explanation.strict_violation.is_some() {
        return Ok(explanation);
    }
    explanation.preference_contributions = by_preference(engine, product_id, &profile)?;
    explanation.preference_tag_contributions = by_preference_tag(engine, product_id, &profile)?;
    explanation.product_tag_contributions = by_product_tag(engine, product_id, &profile)?;
    check("preference", beta, &explanation.preference_contributions, rating.scaled)?;
    check("preference tag", beta, &explanation.preference_tag_contributions, rating.scaled)?;
    check("product tag", beta, &explanation.product_tag_contributions, rating.scaled)?;
    Ok(explanation)
}

/// One association row of a product tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct TagAssociation<S: Scalar> {
    pub preference_tag_id: String,
    pub association: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct ProductTagDetail<S: Scalar> {
    pub product_tag_id: String,
    pub name: String,
    /// Non-zero associations only.
    pub associations: Vec<TagAssociation<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct PreferenceTagDetail<S: Scalar> {
    pub preference_tag_id: String,
    /// Unclipped sum of the product's tag associations.
    pub aggregate: S,
    /// The aggregate as normalized (clipped under the clipped strategy).
    pub effective_aggregate: S,
    pub normalized: S,
    pub reference_positive: Option<S>,
    pub reference_negative: Option<S>,
}

/// Everything user-independent a client needs to recompute the indices and
/// the product-tag decomposition of one product.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct TagDetail<S: Scalar> {
    pub product_id: String,
    pub product_tags: Vec<ProductTagDetail<S>>,
    pub preference_tags: Vec<PreferenceTagDetail<S>>,
    /// Preference id to its preference tag ids.
    pub preferences: BTreeMap<String, Vec<String>>,
}

pub fn tag_detail<S: Scalar>(engine: &RatingEngine<S>, product_id: &str) -> Result<TagDetail<S>, RatingError> {
    let o = engine.ontology();
    let product = o.products.get(product_id).ok_or_else(|| RatingError::UnknownProduct(product_id.to_owned()))?;
    let product_tags = o
        .tags_of(product)
        .map(|z| ProductTagDetail {
            product_tag_id: z.id.clone(),
            name: z.name.clone(),
            associations: engine
                .tag_associations(&z.id)
                .map(|(w, r)| TagAssociation { preference_tag_id: w.to_owned(), association: r })
                .collect(),
        })
        .collect();

    let mut preferences = BTreeMap::new();
    let mut used: Vec<&str> = Vec::new();
    for pref in engine.preference_ids() {
        let tags = engine.preference_tag_ids(pref)?;
        used.extend(tags.iter().copied());
        preferences.insert(pref.clone(), tags.into_iter().map(str::to_owned).collect());
    }
    used.sort_unstable();
    used.dedup();
    let preference_tags = used
        .into_iter()
        .map(|t| {
            let aggregate = engine.aggregate(product_id, t)?;
            Ok(PreferenceTagDetail {
                preference_tag_id: t.to_owned(),
                aggregate,
                effective_aggregate: engine.effective_aggregate(aggregate),
                normalized: engine.normalized_aggregated_association(product_id, t)?,
                reference_positive: engine.reference_positive(t),
                reference_negative: engine.reference_negative(t),
            })
        })
        .collect::<Result<_, RatingError>>()?;
    Ok(TagDetail { product_id: product_id.to_owned(), product_tags, preference_tags, preferences })
}
