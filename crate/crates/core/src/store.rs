//! Ontology files and product catalogs on disk.
//!
//! The JSON document keeps every collection as an array sorted by id, so
//! equal ontologies serialize to identical bytes. Override scores are written
//! as decimal strings.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ontology::model::{
    AssociationOverride, AttributeValue, ModelError, Ontology, OverrideSource, Preference, PreferenceTag,
    PrimitiveConcept, Product, ProductTag,
};
use crate::ontology::validate::{validate_ontology, Finding};
use crate::rules::{assign_all, AssignmentRule, RuleError};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredOverride {
    pub product_tag_id: String,
    pub preference_tag_id: String,
    pub score: String,
    pub source: OverrideSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyDocument {
    pub schema_version: String,
    #[serde(default)]
    pub concepts: Vec<PrimitiveConcept>,
    #[serde(default)]
    pub product_tags: Vec<ProductTag>,
    #[serde(default)]
    pub preference_tags: Vec<PreferenceTag>,
    #[serde(default)]
    pub preferences: Vec<Preference>,
    #[serde(default)]
    pub products: Vec<Product>,
    #[serde(default)]
    pub overrides: Vec<StoredOverride>,
    #[serde(default)]
    pub rules: Vec<AssignmentRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema version `{0}`")]
    UnsupportedSchema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("override ({product_tag}, {preference_tag}) has non-decimal score `{score}`")]
    Score { product_tag: String, preference_tag: String, score: String },
    #[error("integrity errors: {}", describe(.0))]
    Integrity(Vec<Finding>),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: product `{id}` appears more than once in the file")]
    DuplicateRow { line: u64, id: String },
    #[error(transparent)]
    Rules(#[from] RuleError),
}

fn describe(findings: &[Finding]) -> String {
    findings.iter().map(|f| serde_json::to_string(f).unwrap_or_default()).collect::<Vec<_>>().join("; ")
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_owned(), source }
    }
}

/// A loaded ontology with the non-fatal findings of its validation.
#[derive(Debug, Clone)]
pub struct LoadedOntology {
    pub ontology: Ontology,
    pub warnings: Vec<Finding>,
}

/// Shortest decimal that reads back as the same `f64`.
pub fn format_score(score: f64) -> String {
    let s = format!("{score}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

impl OntologyDocument {
    pub fn from_ontology(o: &Ontology) -> Self {
        let mut rules = o.rules.clone();
        rules.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            schema_version: SCHEMA_VERSION.into(),
            concepts: o.concepts.values().cloned().collect(),
            product_tags: o.product_tags.values().cloned().collect(),
            preference_tags: o.preference_tags.values().cloned().collect(),
            preferences: o.preferences.values().cloned().collect(),
            products: o.products.values().cloned().collect(),
            overrides: o
                .overrides
                .values()
                .map(|ov| StoredOverride {
                    product_tag_id: ov.product_tag_id.clone(),
                    preference_tag_id: ov.preference_tag_id.clone(),
                    score: format_score(ov.score),
                    source: ov.source,
                })
                .collect(),
            rules,
        }
    }

    /// Builds the ontology, rejecting duplicate ids and unreadable scores.
    /// Referential integrity is not checked here.
    pub fn into_ontology(self) -> Result<Ontology, StoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema(self.schema_version));
        }
        let mut o = Ontology::new();
        for c in self.concepts {
            o.add_concept(c.id, c.label)?;
        }
        for t in self.product_tags {
            o.add_product_tag(t)?;
        }
        for t in self.preference_tags {
            o.add_preference_tag(t)?;
        }
        for p in self.preferences {
            o.add_preference(p)?;
        }
        for p in self.products {
            o.add_product(p)?;
        }
        for ov in self.overrides {
            let score =
                ov.score.trim().parse::<f64>().ok().filter(|s| s.is_finite()).ok_or_else(|| StoreError::Score {
                    product_tag: ov.product_tag_id.clone(),
                    preference_tag: ov.preference_tag_id.clone(),
                    score: ov.score.clone(),
                })?;
            o.add_override(AssociationOverride {
                product_tag_id: ov.product_tag_id,
                preference_tag_id: ov.preference_tag_id,
                score,
                source: ov.source,
            })?;
        }
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            if !seen.insert(r.id.clone()) {
                return Err(ModelError::DuplicateId { kind: "rule", id: r.id.clone() }.into());
            }
        }
        o.rules = self.rules;
        o.rules.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(o)
    }
}

/// Parses and validates a document; integrity errors are fatal.
pub fn parse_ontology(text: &str) -> Result<LoadedOntology, StoreError> {
    let doc: OntologyDocument = serde_json::from_str(text).map_err(|e| StoreError::Parse(e.to_string()))?;
    let ontology = doc.into_ontology()?;
    let report = validate_ontology(&ontology);
    if !report.is_ok() {
        return Err(StoreError::Integrity(report.errors));
    }
    Ok(LoadedOntology { ontology, warnings: report.warnings })
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<LoadedOntology, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    parse_ontology(&text)
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_canonical_json(o: &Ontology) -> String {
    let mut s =
        serde_json::to_string_pretty(&OntologyDocument::from_ontology(o)).expect("ontology documents always serialize");
    s.push('\n');
    s
}

pub fn save_ontology(o: &Ontology, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    fs::write(path, to_canonical_json(o)).map_err(|e| StoreError::io(path, e))
}

/// Hex SHA-256 of the canonical serialization.
pub fn ontology_version(o: &Ontology) -> String {
    hex::encode(Sha256::digest(to_canonical_json(o).as_bytes()))
}

const ATTR_PREFIX: &str = "attr:";
const TAGS_COLUMN: &str = "tags";

enum Column {
    Id,
    Name,
    Category,
    Price,
    Tags,
    Attr(String),
}

fn parse_attribute(raw: &str) -> AttributeValue {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => AttributeValue::Number(v),
        _ => AttributeValue::Text(raw.to_owned()),
    }
}

/// Reads products from CSV. Columns: `id`, `name`, `category`, `unit_price`,
/// an optional `tags` column of `;`-separated product tag ids, and any number
/// of `attr:<name>` columns. Empty attribute cells are left out.
pub fn read_products<R: Read>(reader: R) -> Result<Vec<Product>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let row_err = |line: u64, message: String| StoreError::Row { line, message };
    let headers = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        columns.push(match h.trim() {
            "id" => Column::Id,
            "name" => Column::Name,
            "category" => Column::Category,
            "unit_price" => Column::Price,
            TAGS_COLUMN => Column::Tags,
            other => match other.strip_prefix(ATTR_PREFIX) {
                Some(name) if !name.is_empty() => Column::Attr(name.to_owned()),
                _ => return Err(row_err(1, format!("unknown column `{other}`"))),
            },
        });
    }
    for required in ["id", "name", "category", "unit_price"] {
        if !headers.iter().any(|h| h.trim() == required) {
            return Err(row_err(1, format!("missing column `{required}`")));
        }
    }

    let mut products = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut product = Product::new("", "", std::iter::empty::<String>());
        for (col, value) in columns.iter().zip(record.iter()) {
            match col {
                Column::Id => product.id = value.trim().to_owned(),
                Column::Name => product.name = value.to_owned(),
                Column::Category => product.category_id = value.trim().to_owned(),
                Column::Price => {
                    let v = value.trim();
                    if !v.is_empty() {
                        let price = v
                            .parse::<f64>()
                            .ok()
                            .filter(|p| p.is_finite() && *p >= 0.0)
                            .ok_or_else(|| row_err(line, format!("invalid unit_price `{v}`")))?;
                        product.unit_price = Some(price);
                    }
                }
                Column::Tags => {
                    product.tag_ids =
                        value.split(';').map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned).collect();
                }
                Column::Attr(name) => {
                    if !value.trim().is_empty() {
                        product.attributes.insert(name.clone(), parse_attribute(value));
                    }
                }
            }
        }
        if product.id.is_empty() {
            return Err(row_err(line, "empty product id".into()));
        }
        if !seen.insert(product.id.clone()) {
            return Err(StoreError::DuplicateRow { line, id: product.id });
        }
        products.push(product);
    }
    Ok(products)
}

/// Merges `products` into `o` by id. A newer row replaces name, category,
/// price and attributes; tag assignments already present are kept. The
/// ontology's rules are then re-run.
pub fn merge_products(o: &Ontology, products: Vec<Product>) -> Result<Ontology, StoreError> {
    let mut merged = o.clone();
    for mut p in products {
        if let Some(existing) = merged.products.get(&p.id) {
            p.tag_ids.extend(existing.tag_ids.iter().cloned());
        }
        merged.products.insert(p.id.clone(), p);
    }
    let rules = merged.rules.clone();
    let merged = assign_all(&merged, &rules)?;
    let report = validate_ontology(&merged);
    if !report.is_ok() {
        return Err(StoreError::Integrity(report.errors));
    }
    Ok(merged)
}

pub fn ingest_products(csv_path: impl AsRef<Path>, o: &Ontology) -> Result<Ontology, StoreError> {
    let path = csv_path.as_ref();
    let file = fs::File::open(path).map_err(|e| StoreError::io(path, e))?;
    merge_products(o, read_products(file)?)
}

/// Attribute columns for a CSV export of `products`, in sorted order.
pub fn attribute_columns<'a>(products: impl IntoIterator<Item = &'a Product>) -> Vec<String> {
    let mut names = BTreeMap::new();
    for p in products {
        for k in p.attributes.keys() {
            names.insert(k.clone(), ());
        }
    }
    names.into_keys().collect()
}
