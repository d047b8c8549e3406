use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rules::AssignmentRule;

/// Identifier of a primitive concept.
pub type ConceptId = String;

/// An atomic, non-decomposable unit of the shared semantic space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveConcept {
    pub id: ConceptId,
    pub label: String,
}

/// A product characteristic expressed as a set of primitive concepts.
///
/// An empty concept set marks a placeholder tag whose associations are only
/// known through stored overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductTag {
    pub id: String,
    pub name: String,
    pub concepts: BTreeSet<ConceptId>,
}

impl ProductTag {
    pub fn new<I, C>(id: impl Into<String>, name: impl Into<String>, concepts: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<ConceptId>,
    {
        Self { id: id.into(), name: name.into(), concepts: concepts.into_iter().map(Into::into).collect() }
    }

    pub fn is_placeholder(&self) -> bool {
        self.concepts.is_empty()
    }
}

/// One aspect of a preference: the concepts that support it and those that oppose it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTag {
    pub id: String,
    pub name: String,
    pub support_concepts: BTreeSet<ConceptId>,
    pub oppose_concepts: BTreeSet<ConceptId>,
}

impl PreferenceTag {
    pub fn new<I, J, C, D>(id: impl Into<String>, name: impl Into<String>, support: I, oppose: J) -> Self
    where
        I: IntoIterator<Item = C>,
        J: IntoIterator<Item = D>,
        C: Into<ConceptId>,
        D: Into<ConceptId>,
    {
        Self {
            id: id.into(),
            name: name.into(),
            support_concepts: support.into_iter().map(Into::into).collect(),
            oppose_concepts: oppose.into_iter().map(Into::into).collect(),
        }
    }

    /// All concepts the tag refers to, supporting or opposing.
    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.support_concepts.iter().chain(self.oppose_concepts.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Environment,
    Health,
    Social,
    Quality,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Environment => "environment",
            Category::Health => "health",
            Category::Social => "social",
            Category::Quality => "quality",
        })
    }
}

/// A user-facing sustainability statement composed of preference tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub description: String,
    pub category: Category,
    pub tag_ids: BTreeSet<String>,
    #[serde(default)]
    pub strict: bool,
}

/// Attribute value attached to a product and consumed by assignment rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Text(String),
    Labels(Vec<String>),
}

impl From<f64> for AttributeValue {
    fn from(v: f64) -> Self {
        AttributeValue::Number(v)
    }
}

impl From<&str> for AttributeValue {
    fn from(v: &str) -> Self {
        AttributeValue::Text(v.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub name: String,
    pub category_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_price: Option<f64>,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub tag_ids: BTreeSet<String>,
}

impl Product {
    pub fn new<I, T>(id: impl Into<String>, category_id: impl Into<String>, tag_ids: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            category_id: category_id.into(),
            unit_price: None,
            attributes: BTreeMap::new(),
            tag_ids: tag_ids.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverrideSource {
    Expert,
    Crowd,
    Ml,
}

/// A calibrated association score that replaces the set-theoretic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationOverride {
    pub product_tag_id: String,
    pub preference_tag_id: String,
    pub score: f64,
    pub source: OverrideSource,
}

pub type OverrideKey = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("duplicate override for ({product_tag}, {preference_tag})")]
    DuplicateOverride { product_tag: String, preference_tag: String },
}

/// The knowledge base: concepts, tags, preferences, products, calibrated
/// overrides and the rules that assign product tags.
///
/// Every collection is keyed by id so iteration order is canonical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ontology {
    pub concepts: BTreeMap<ConceptId, PrimitiveConcept>,
    pub product_tags: BTreeMap<String, ProductTag>,
    pub preference_tags: BTreeMap<String, PreferenceTag>,
    pub preferences: BTreeMap<String, Preference>,
    pub products: BTreeMap<String, Product>,
    pub overrides: BTreeMap<OverrideKey, AssociationOverride>,
    pub rules: Vec<AssignmentRule>,
}

fn insert_unique<T>(map: &mut BTreeMap<String, T>, kind: &'static str, id: &str, value: T) -> Result<(), ModelError> {
    if map.contains_key(id) {
        return Err(ModelError::DuplicateId { kind, id: id.to_owned() });
    }
    map.insert(id.to_owned(), value);
    Ok(())
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_concept(&mut self, id: impl Into<String>, label: impl Into<String>) -> Result<(), ModelError> {
        let concept = PrimitiveConcept { id: id.into(), label: label.into() };
        let id = concept.id.clone();
        insert_unique(&mut self.concepts, "concept", &id, concept)
    }

    /// Registers each id as a concept labelled with itself; convenient for fixtures.
    pub fn with_concepts<I, C>(ids: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<String>,
    {
        let mut o = Self::default();
        for id in ids {
            let id = id.into();
            o.concepts.insert(id.clone(), PrimitiveConcept { label: id.clone(), id });
        }
        o
    }

    pub fn add_product_tag(&mut self, tag: ProductTag) -> Result<(), ModelError> {
        let id = tag.id.clone();
        insert_unique(&mut self.product_tags, "product tag", &id, tag)
    }

    pub fn add_preference_tag(&mut self, tag: PreferenceTag) -> Result<(), ModelError> {
        let id = tag.id.clone();
        insert_unique(&mut self.preference_tags, "preference tag", &id, tag)
    }

    pub fn add_preference(&mut self, preference: Preference) -> Result<(), ModelError> {
        let id = preference.id.clone();
        insert_unique(&mut self.preferences, "preference", &id, preference)
    }

    pub fn add_product(&mut self, product: Product) -> Result<(), ModelError> {
        let id = product.id.clone();
        insert_unique(&mut self.products, "product", &id, product)
    }

    pub fn add_override(&mut self, ov: AssociationOverride) -> Result<(), ModelError> {
        let key = (ov.product_tag_id.clone(), ov.preference_tag_id.clone());
        if self.overrides.contains_key(&key) {
            return Err(ModelError::DuplicateOverride { product_tag: key.0, preference_tag: key.1 });
        }
        self.overrides.insert(key, ov);
        Ok(())
    }

    pub fn override_for(&self, product_tag: &str, preference_tag: &str) -> Option<&AssociationOverride> {
        // BTreeMap<(String, String)> cannot be queried by (&str, &str) without allocating.
        self.overrides.get(&(product_tag.to_owned(), preference_tag.to_owned()))
    }

    pub fn has_overrides_for_product_tag(&self, product_tag: &str) -> bool {
        self.overrides
            .range((product_tag.to_owned(), String::new())..)
            .next()
            .is_some_and(|((z, _), _)| z == product_tag)
    }

    /// Product tags assigned to `product` that resolve in this ontology.
    pub fn tags_of<'a>(&'a self, product: &'a Product) -> impl Iterator<Item = &'a ProductTag> + 'a {
        product.tag_ids.iter().filter_map(move |id| self.product_tags.get(id))
    }

    /// Preference tags of `preference` that resolve in this ontology.
    pub fn preference_tags_of<'a>(
        &'a self,
        preference: &'a Preference,
    ) -> impl Iterator<Item = &'a PreferenceTag> + 'a {
        preference.tag_ids.iter().filter_map(move |id| self.preference_tags.get(id))
    }
}
