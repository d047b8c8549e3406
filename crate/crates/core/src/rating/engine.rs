use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use super::{
    clip, snap_to_zero, PreferenceScoreVector, ProductRating, ProductRepresentation, RatingConfig, RatingError,
    ReferenceStrategy, SustainabilityIndex,
};
use crate::ontology::association::{additive_aggregated_association, association, computed_association};
use crate::ontology::model::{Ontology, PreferenceTag, Product};
use crate::ontology::reduction::apply_reduction_principle;
use crate::scalar::Scalar;

/// Reference associations of one preference tag. `negative` is stored with its sign.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(bound = "")]
pub struct Reference<S: Scalar> {
    pub positive: Option<S>,
    pub negative: Option<S>,
}

/// A non-zero aggregate had no reference to normalize against; the
/// normalized value was clamped to its sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingWarning {
    pub product_id: String,
    pub preference_tag_id: String,
    pub missing: &'static str,
}

/// Offsets of one user's scores, prepared once and reused across products.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile<S: Scalar> {
    /// Non-neutral preferences as (preference index, offset).
    offsets: Vec<(usize, S)>,
    abs_sum: S,
    /// Strict preferences scored at the top of the scale.
    strict_at_max: Vec<usize>,
}

impl<S: Scalar> UserProfile<S> {
    pub fn is_neutral(&self) -> bool {
        self.offsets.is_empty()
    }

    /// `Σ_π |s_π - s̄|`
    pub fn abs_offset_sum(&self) -> S {
        self.abs_sum
    }
}

/// Precomputed association table, reference associations and the
/// (product × preference) sustainability-index cache for one ontology snapshot.
///
/// The engine is immutable; a changed ontology needs a new engine.
#[derive(Debug, Clone)]
pub struct RatingEngine<S: Scalar> {
    ontology: Arc<Ontology>,
    config: RatingConfig<S>,
    pref_tag_ids: Vec<String>,
    pref_tag_index: HashMap<String, usize>,
    product_tag_index: HashMap<String, usize>,
    /// Per product tag, its non-zero associations as (preference tag index, score).
    associations: Vec<Vec<(usize, S)>>,
    references: Vec<Reference<S>>,
    preference_ids: Vec<String>,
    preference_index: HashMap<String, usize>,
    preference_tags: Vec<Vec<usize>>,
    strict: Vec<bool>,
    product_ids: Vec<String>,
    product_index: HashMap<String, usize>,
    /// Row-major, one row of preference indices per product.
    indices: Vec<S>,
    warnings: Vec<RatingWarning>,
}

fn index_of(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

impl<S: Scalar> RatingEngine<S> {
    pub fn new(ontology: Arc<Ontology>, config: RatingConfig<S>) -> Result<Self, RatingError> {
        config.validate()?;
        let o = &*ontology;

        let pref_tag_ids: Vec<String> = o.preference_tags.keys().cloned().collect();
        let pref_tag_index = index_of(&pref_tag_ids);
        let product_tag_ids: Vec<String> = o.product_tags.keys().cloned().collect();
        let product_tag_index = index_of(&product_tag_ids);

        let mut associations: Vec<Vec<(usize, S)>> = Vec::with_capacity(product_tag_ids.len());
        for z in o.product_tags.values() {
            let mut row = Vec::new();
            for (wi, w) in o.preference_tags.values().enumerate() {
                let r = match o.overrides.get(&(z.id.clone(), w.id.clone())) {
                    Some(ov) => S::of(ov.score.clamp(-1.0, 1.0)),
                    None => computed_association::<S>(z, w),
                };
                if r != S::zero() {
                    row.push((wi, r));
                }
            }
            associations.push(row);
        }

        let preference_ids: Vec<String> = o.preferences.keys().cloned().collect();
        let preference_index = index_of(&preference_ids);
        let mut preference_tags = Vec::with_capacity(preference_ids.len());
        for pref in o.preferences.values() {
            if pref.tag_ids.is_empty() {
                return Err(RatingError::EmptyPreference(pref.id.clone()));
            }
            let mut tags = Vec::with_capacity(pref.tag_ids.len());
            for t in &pref.tag_ids {
                let idx = pref_tag_index.get(t).ok_or_else(|| RatingError::UnknownPreferenceTag(t.clone()))?;
                tags.push(*idx);
            }
            preference_tags.push(tags);
        }
        let strict = o.preferences.values().map(|p| p.strict).collect();

        let product_ids: Vec<String> = o.products.keys().cloned().collect();
        let product_index = index_of(&product_ids);

        let mut engine = Self {
            ontology: ontology.clone(),
            config,
            pref_tag_ids,
            pref_tag_index,
            product_tag_index,
            associations,
            references: Vec::new(),
            preference_ids,
            preference_index,
            preference_tags,
            strict,
            product_ids,
            product_index,
            indices: Vec::new(),
            warnings: Vec::new(),
        };
        engine.references = engine.compute_references();
        engine.build_index_cache();
        Ok(engine)
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn config(&self) -> &RatingConfig<S> {
        &self.config
    }

    /// Absent-reference warnings collected while building the index cache.
    pub fn warnings(&self) -> &[RatingWarning] {
        &self.warnings
    }

    /// Preference ids in index order.
    pub fn preference_ids(&self) -> &[String] {
        &self.preference_ids
    }

    pub fn product_ids(&self) -> &[String] {
        &self.product_ids
    }

    pub fn association(&self, product_tag: &str, preference_tag: &str) -> Option<S> {
        let z = *self.product_tag_index.get(product_tag)?;
        let w = *self.pref_tag_index.get(preference_tag)?;
        Some(self.associations[z].iter().find(|(wi, _)| *wi == w).map_or(S::zero(), |(_, r)| *r))
    }

    /// Non-zero associations of a product tag as (preference tag id, score).
    pub fn tag_associations<'a>(&'a self, product_tag: &str) -> impl Iterator<Item = (&'a str, S)> + 'a {
        let row = self.product_tag_index.get(product_tag).map(|z| self.associations[*z].as_slice()).unwrap_or(&[]);
        row.iter().map(|(w, r)| (self.pref_tag_ids[*w].as_str(), *r))
    }

    pub fn reference(&self, preference_tag: &str) -> Option<Reference<S>> {
        self.pref_tag_index.get(preference_tag).map(|w| self.references[*w])
    }

    /// Positive reference association, absent when no tag supports `preference_tag`.
    pub fn reference_positive(&self, preference_tag: &str) -> Option<S> {
        self.reference(preference_tag).and_then(|r| r.positive)
    }

    /// Negative reference association, absent when no tag opposes `preference_tag`.
    pub fn reference_negative(&self, preference_tag: &str) -> Option<S> {
        self.reference(preference_tag).and_then(|r| r.negative)
    }

    fn product(&self, product_id: &str) -> Result<(usize, &Product), RatingError> {
        let idx =
            *self.product_index.get(product_id).ok_or_else(|| RatingError::UnknownProduct(product_id.to_owned()))?;
        Ok((idx, &self.ontology.products[product_id]))
    }

    fn pref_tag(&self, preference_tag: &str) -> Result<usize, RatingError> {
        self.pref_tag_index
            .get(preference_tag)
            .copied()
            .ok_or_else(|| RatingError::UnknownPreferenceTag(preference_tag.to_owned()))
    }

    fn preference(&self, preference_id: &str) -> Result<usize, RatingError> {
        self.preference_index
            .get(preference_id)
            .copied()
            .ok_or_else(|| RatingError::UnknownPreference(preference_id.to_owned()))
    }

    /// Preference tag ids of a preference.
    pub fn preference_tag_ids(&self, preference_id: &str) -> Result<Vec<&str>, RatingError> {
        let pi = self.preference(preference_id)?;
        Ok(self.preference_tags[pi].iter().map(|w| self.pref_tag_ids[*w].as_str()).collect())
    }

    /// Unclipped sum of the product's tag associations with `preference_tag`.
    pub fn aggregate(&self, product_id: &str, preference_tag: &str) -> Result<S, RatingError> {
        let (_, p) = self.product(product_id)?;
        let w = self.pref_tag(preference_tag)?;
        Ok(self.aggregate_of(p, w))
    }

    fn aggregate_of(&self, p: &Product, w: usize) -> S {
        let mut sum = S::zero();
        for t in &p.tag_ids {
            if let Some(z) = self.product_tag_index.get(t) {
                if let Some((_, r)) = self.associations[*z].iter().find(|(wi, _)| *wi == w) {
                    sum += *r;
                }
            }
        }
        sum
    }

    /// The aggregate as entered into normalization: clipped to `tau` under
    /// the clipped strategy, unchanged otherwise.
    pub fn effective_aggregate(&self, aggregate: S) -> S {
        match self.config.reference_strategy {
            ReferenceStrategy::TheoreticalUnreducedClipped => clip(aggregate, self.config.tau),
            _ => aggregate,
        }
    }

    /// Normalized value of an aggregate and, when a needed reference was
    /// absent, which side was missing.
    fn normalize(&self, w: usize, aggregate: S) -> (S, Option<&'static str>) {
        let a = snap_to_zero(self.effective_aggregate(aggregate));
        let refs = &self.references[w];
        let one = S::one();
        if a > S::zero() {
            match refs.positive {
                Some(r) => ((a / r).min(one), None),
                None => (one, Some("positive")),
            }
        } else if a < S::zero() {
            match refs.negative {
                Some(r) => ((a / r.abs()).max(-one), None),
                None => (-one, Some("negative")),
            }
        } else {
            (S::zero(), None)
        }
    }

    pub fn normalized_aggregated_association(&self, product_id: &str, preference_tag: &str) -> Result<S, RatingError> {
        let (_, p) = self.product(product_id)?;
        let w = self.pref_tag(preference_tag)?;
        Ok(self.normalize(w, self.aggregate_of(p, w)).0)
    }

    /// Normalizes an externally computed aggregate against this engine's references.
    pub fn normalize_aggregate(&self, preference_tag: &str, aggregate: S) -> Result<S, RatingError> {
        let w = self.pref_tag(preference_tag)?;
        Ok(self.normalize(w, aggregate).0)
    }

    fn compute_references(&self) -> Vec<Reference<S>> {
        let o = &*self.ontology;
        let n = self.pref_tag_ids.len();
        let mut positive_tags: Vec<Vec<&str>> = vec![Vec::new(); n];
        let mut negative_tags: Vec<Vec<&str>> = vec![Vec::new(); n];
        let mut pos_sum = vec![S::zero(); n];
        let mut neg_sum = vec![S::zero(); n];
        for (z, id) in o.product_tags.keys().enumerate() {
            for &(w, r) in &self.associations[z] {
                if r > S::zero() {
                    positive_tags[w].push(id);
                    pos_sum[w] += r;
                } else {
                    negative_tags[w].push(id);
                    neg_sum[w] += r;
                }
            }
        }
        let positive = |v: S| (v > S::zero()).then_some(v);
        let negative = |v: S| (v < S::zero()).then_some(v);

        match self.config.reference_strategy {
            ReferenceStrategy::TheoreticalUnreducedClipped => (0..n)
                .map(|w| Reference {
                    positive: positive(clip(pos_sum[w], self.config.tau)),
                    negative: negative(clip(neg_sum[w], self.config.tau)),
                })
                .collect(),
            ReferenceStrategy::TheoreticalReduced => o
                .preference_tags
                .values()
                .enumerate()
                .map(|(w, pt)| Reference {
                    positive: reduced_reference::<S>(o, pt, &positive_tags[w], true).and_then(positive),
                    negative: reduced_reference::<S>(o, pt, &negative_tags[w], false).and_then(negative),
                })
                .collect(),
            ReferenceStrategy::ExistingBest => {
                let mut best = vec![Reference::<S>::default(); n];
                let mut pos = vec![S::zero(); n];
                let mut neg = vec![S::zero(); n];
                for p in o.products.values() {
                    pos.iter_mut().for_each(|v| *v = S::zero());
                    neg.iter_mut().for_each(|v| *v = S::zero());
                    for t in &p.tag_ids {
                        let Some(z) = self.product_tag_index.get(t) else { continue };
                        for &(w, r) in &self.associations[*z] {
                            if r > S::zero() {
                                pos[w] += r;
                            } else {
                                neg[w] += r;
                            }
                        }
                    }
                    for w in 0..n {
                        if pos[w] > best[w].positive.unwrap_or(S::zero()) {
                            best[w].positive = Some(pos[w]);
                        }
                        if neg[w] < best[w].negative.unwrap_or(S::zero()) {
                            best[w].negative = Some(neg[w]);
                        }
                    }
                }
                best
            }
        }
    }

    fn build_index_cache(&mut self) {
        let n_tags = self.pref_tag_ids.len();
        let n_prefs = self.preference_ids.len();
        let mut indices = vec![S::zero(); self.product_ids.len() * n_prefs];
        let mut aggregate = vec![S::zero(); n_tags];
        let mut normalized = vec![S::zero(); n_tags];
        let mut touched: Vec<usize> = Vec::new();
        let mut warnings = Vec::new();

        for (pi, p) in self.ontology.products.values().enumerate() {
            for &w in &touched {
                aggregate[w] = S::zero();
                normalized[w] = S::zero();
            }
            touched.clear();
            for t in &p.tag_ids {
                let Some(z) = self.product_tag_index.get(t) else { continue };
                for &(w, r) in &self.associations[*z] {
                    if aggregate[w] == S::zero() && !touched.contains(&w) {
                        touched.push(w);
                    }
                    aggregate[w] += r;
                }
            }
            touched.sort_unstable();
            for &w in &touched {
                let (n, missing) = self.normalize(w, aggregate[w]);
                normalized[w] = n;
                if let Some(missing) = missing {
                    warnings.push(RatingWarning {
                        product_id: p.id.clone(),
                        preference_tag_id: self.pref_tag_ids[w].clone(),
                        missing,
                    });
                }
            }
            let row = &mut indices[pi * n_prefs..(pi + 1) * n_prefs];
            for (c, tags) in self.preference_tags.iter().enumerate() {
                let sum: S = tags.iter().map(|w| normalized[*w]).sum();
                row[c] = snap_to_zero(sum / S::of(tags.len() as f64));
            }
        }
        self.indices = indices;
        self.warnings = warnings;
    }

    /// Cached sustainability indices of a product, in [`Self::preference_ids`] order.
    pub fn index_row(&self, product_id: &str) -> Option<&[S]> {
        let n = self.preference_ids.len();
        self.product_index.get(product_id).map(|pi| &self.indices[pi * n..(pi + 1) * n])
    }

    pub fn sustainability_index(
        &self,
        product_id: &str,
        preference_id: &str,
    ) -> Result<SustainabilityIndex<S>, RatingError> {
        let (pi, _) = self.product(product_id)?;
        let c = self.preference(preference_id)?;
        Ok(SustainabilityIndex {
            product_id: product_id.to_owned(),
            preference_id: preference_id.to_owned(),
            value: self.indices[pi * self.preference_ids.len() + c],
        })
    }

    /// Recomputes an index from the ontology without the association table
    /// or the cache. Shares only the reference associations with the cached path.
    pub fn sustainability_index_uncached(&self, product_id: &str, preference_id: &str) -> Result<S, RatingError> {
        let (_, p) = self.product(product_id)?;
        let o = &*self.ontology;
        let pref =
            o.preferences.get(preference_id).ok_or_else(|| RatingError::UnknownPreference(preference_id.to_owned()))?;
        if pref.tag_ids.is_empty() {
            return Err(RatingError::EmptyPreference(preference_id.to_owned()));
        }
        let mut sum = S::zero();
        for t in &pref.tag_ids {
            let w = o.preference_tags.get(t).ok_or_else(|| RatingError::UnknownPreferenceTag(t.clone()))?;
            let aggregate = additive_aggregated_association::<S>(o, p, w);
            sum += self.normalize(self.pref_tag(t)?, aggregate).0;
        }
        Ok(snap_to_zero(sum / S::of(pref.tag_ids.len() as f64)))
    }

    pub fn product_representation(&self, product_id: &str) -> Result<ProductRepresentation<S>, RatingError> {
        let row = self.index_row(product_id).ok_or_else(|| RatingError::UnknownProduct(product_id.to_owned()))?;
        let indices: Vec<SustainabilityIndex<S>> = self
            .preference_ids
            .iter()
            .zip(row)
            .map(|(pref, v)| SustainabilityIndex {
                product_id: product_id.to_owned(),
                preference_id: pref.clone(),
                value: *v,
            })
            .collect();
        let mean = if row.is_empty() { S::zero() } else { row.iter().copied().sum::<S>() / S::of(row.len() as f64) };
        Ok(ProductRepresentation { product_id: product_id.to_owned(), indices, mean })
    }

    /// Validates scores and converts them into offsets.
    pub fn profile(&self, scores: &PreferenceScoreVector<S>) -> Result<UserProfile<S>, RatingError> {
        let mut offsets = Vec::new();
        let mut abs_sum = S::zero();
        let mut strict_at_max = Vec::new();
        for (id, s) in &scores.scores {
            let c = self.preference(id)?;
            let delta = self.config.offset(id, *s)?;
            if delta != S::zero() {
                offsets.push((c, delta));
                abs_sum += delta.abs();
            }
            if self.config.strict_enforcement && self.strict[c] && *s == self.config.max_score() {
                strict_at_max.push(c);
            }
        }
        offsets.sort_unstable_by_key(|(c, _)| *c);
        strict_at_max.sort_unstable();
        Ok(UserProfile { offsets, abs_sum, strict_at_max })
    }

    /// Offset of each scored preference, keyed by preference id; neutral ones included.
    pub fn offsets(&self, profile: &UserProfile<S>) -> impl Iterator<Item = (&str, S)> + '_ {
        let by_pref: HashMap<usize, S> = profile.offsets.iter().copied().collect();
        self.preference_ids
            .iter()
            .enumerate()
            .map(move |(c, id)| (id.as_str(), by_pref.get(&c).copied().unwrap_or(S::zero())))
    }

    fn raw_of(&self, profile: &UserProfile<S>, product: usize) -> S {
        if profile.offsets.is_empty() {
            return S::zero();
        }
        let n = self.preference_ids.len();
        let row = &self.indices[product * n..(product + 1) * n];
        let weighted: S = profile.offsets.iter().map(|(c, d)| row[*c] * *d).sum();
        weighted / profile.abs_sum
    }

    /// `Σ_π c(p,π)·Δ(s_π) / Σ_π |Δ(s_π)|`, zero for an all-neutral user.
    pub fn raw_rating(&self, product_id: &str, scores: &PreferenceScoreVector<S>) -> Result<S, RatingError> {
        let profile = self.profile(scores)?;
        let (pi, _) = self.product(product_id)?;
        Ok(self.raw_of(&profile, pi))
    }

    pub fn rate(&self, product_id: &str, scores: &PreferenceScoreVector<S>) -> Result<ProductRating<S>, RatingError> {
        let profile = self.profile(scores)?;
        self.rate_profile(&profile, product_id)
    }

    /// Rates one product for a prepared profile; the per-request hot path.
    pub fn rate_profile(&self, profile: &UserProfile<S>, product_id: &str) -> Result<ProductRating<S>, RatingError> {
        let (pi, _) = self.product(product_id)?;
        Ok(self.rate_index(profile, pi))
    }

    fn rate_index(&self, profile: &UserProfile<S>, pi: usize) -> ProductRating<S> {
        let n = self.preference_ids.len();
        let violation = profile.strict_at_max.iter().find(|c| self.indices[pi * n + **c] < S::zero());
        let product_id = self.product_ids[pi].clone();
        match violation {
            Some(c) => ProductRating {
                product_id,
                raw: -S::one(),
                scaled: self.config.beta - self.config.alpha,
                strict_violation: Some(self.preference_ids[*c].clone()),
            },
            None => {
                let raw = self.raw_of(profile, pi);
                ProductRating { product_id, raw, scaled: self.config.scale(raw), strict_violation: None }
            }
        }
    }

    /// Ratings in descending order, ties broken by ascending product id.
    ///
    /// Ordering uses the raw rating: the scaled value is a positive affine
    /// map of it, and rounding in that map must not reorder products.
    pub fn rank_products<'a, I>(
        &self,
        product_ids: I,
        scores: &PreferenceScoreVector<S>,
    ) -> Result<Vec<ProductRating<S>>, RatingError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let profile = self.profile(scores)?;
        let mut ratings =
            product_ids.into_iter().map(|id| self.rate_profile(&profile, id)).collect::<Result<Vec<_>, _>>()?;
        ratings.sort_by(rank_order);
        Ok(ratings)
    }
}

/// Ranking order: higher raw rating first, then ascending product id.
pub fn rank_order<S: Scalar>(a: &ProductRating<S>, b: &ProductRating<S>) -> std::cmp::Ordering {
    b.raw.partial_cmp(&a.raw).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.product_id.cmp(&b.product_id))
}

/// Sum of same-signed associations over a theoretical product carrying
/// `tag_ids`, after the product's tags are made concept-disjoint.
fn reduced_reference<S: Scalar>(o: &Ontology, w: &PreferenceTag, tag_ids: &[&str], positive: bool) -> Option<S> {
    if tag_ids.is_empty() {
        return None;
    }
    const REFERENCE: &str = "\u{0}reference";
    let mut mini = Ontology::default();
    for id in tag_ids {
        let tag = o.product_tags[*id].clone();
        for c in &tag.concepts {
            if let Some(concept) = o.concepts.get(c) {
                mini.concepts.insert(c.clone(), concept.clone());
            }
        }
        if let Some(ov) = o.override_for(id, &w.id) {
            mini.overrides.insert((ov.product_tag_id.clone(), ov.preference_tag_id.clone()), ov.clone());
        }
        mini.product_tags.insert(tag.id.clone(), tag);
    }
    mini.preference_tags.insert(w.id.clone(), w.clone());
    mini.products.insert(REFERENCE.to_owned(), Product::new(REFERENCE, "", tag_ids.iter().copied()));

    let reduced = apply_reduction_principle(&mini).ontology;
    let product = &reduced.products[REFERENCE];
    let sum = reduced
        .tags_of(product)
        .map(|z| association::<S>(&reduced, z, w))
        .filter(|r| if positive { *r > S::zero() } else { *r < S::zero() })
        .sum();
    Some(sum)
}
