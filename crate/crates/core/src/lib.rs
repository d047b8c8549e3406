//! Sustainability knowledge base and personalized product rating.
//!
//! Product tags and preference tags are sets of primitive concepts; their
//! overlap gives association scores, which aggregate per product into
//! user-independent sustainability indices. A user's preference scores turn
//! the indices into a rating on a `[β - α, β + α]` scale, and the rating
//! decomposes exactly into contributions of preferences, preference tags and
//! product tags.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod analysis;
pub mod explain;
pub mod ontology;
pub mod rating;
pub mod rules;
pub mod scalar;
pub mod store;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use ontology::{
    apply_reduction_principle, validate_ontology, AssociationOverride, AttributeValue, Category, Ontology, Preference,
    PreferenceTag, PrimitiveConcept, Product, ProductTag,
};
pub use rating::{RatingError, ReferenceStrategy};
pub use rules::{assign_all, evaluate_rules, AssignmentRule};
pub use scalar::Scalar;
pub use store::{load_ontology, ontology_version, save_ontology, to_canonical_json};

pub type RatingEngine = rating::RatingEngine<f64>;
pub type RatingConfig = rating::RatingConfig<f64>;
pub type ProductRating = rating::ProductRating<f64>;
pub type SustainabilityIndex = rating::SustainabilityIndex<f64>;
pub type PreferenceScoreVector = rating::PreferenceScoreVector<f64>;
pub type RatingExplanation = explain::RatingExplanation<f64>;
pub type InteractionMatrix = analysis::InteractionMatrix<f64>;

pub type RatingEngineF32 = rating::RatingEngine<f32>;
pub type RatingConfigF32 = rating::RatingConfig<f32>;
pub type PreferenceScoreVectorF32 = rating::PreferenceScoreVector<f32>;

/// The bundled seed ontology document.
pub const SEED_ONTOLOGY_JSON: &str = include_str!("../data/seed_ontology.json");

/// Parses the bundled seed ontology.
pub fn seed_ontology() -> Ontology {
    store::parse_ontology(SEED_ONTOLOGY_JSON).expect("bundled seed ontology is valid").ontology
}
