//! Ontology data model and the set-theoretic association mathematics.

pub mod association;
pub mod model;
pub mod reduction;
pub mod validate;

pub use association::{
    additive_aggregated_association, association, computed_association, exact_aggregated_association,
    inclusion_exclusion_overlap_error, negative_association, overlap_error, positive_association, product_concepts,
    AssociationError, OverlapCounts, INCLUSION_EXCLUSION_MAX_TAGS,
};
pub use model::{
    AssociationOverride, AttributeValue, Category, ConceptId, ModelError, Ontology, OverrideSource, Preference,
    PreferenceTag, PrimitiveConcept, Product, ProductTag,
};
pub use reduction::{
    apply_reduction_principle, shared_tag_id, ConflictReason, Reduction, ReductionConflict, ReductionReport,
};
pub use validate::{validate_ontology, Finding, ValidationReport};
