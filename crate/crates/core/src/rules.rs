//! Declarative assignment of product tags from product attributes.
//!
//! A rule fires when every one of its predicates holds. Disjunction is
//! written as several rules targeting the same tag. A predicate over a
//! missing attribute is false.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ontology::model::{AttributeValue, Ontology, Product};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// Substring of a text attribute, or of any entry of a label list.
    Contains,
    /// Exact membership in a label list; a text attribute is read as a
    /// `;`-separated label list.
    HasLabel,
}

impl PredicateOp {
    fn is_numeric(self) -> bool {
        matches!(self, PredicateOp::Lt | PredicateOp::Le | PredicateOp::Gt | PredicateOp::Ge)
    }

    fn is_textual(self) -> bool {
        matches!(self, PredicateOp::Contains | PredicateOp::HasLabel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredicateValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePredicate {
    pub attribute: String,
    pub op: PredicateOp,
    pub value: PredicateValue,
}

impl AttributePredicate {
    pub fn new(attribute: impl Into<String>, op: PredicateOp, value: PredicateValue) -> Self {
        Self { attribute: attribute.into(), op, value }
    }

    pub fn holds(&self, product: &Product) -> bool {
        let Some(attr) = product.attributes.get(&self.attribute) else {
            return false;
        };
        use PredicateOp::*;
        match (self.op, attr, &self.value) {
            (Eq, AttributeValue::Number(a), PredicateValue::Number(b)) => a == b,
            (Neq, AttributeValue::Number(a), PredicateValue::Number(b)) => a != b,
            (Eq, AttributeValue::Text(a), PredicateValue::Text(b)) => a == b,
            (Neq, AttributeValue::Text(a), PredicateValue::Text(b)) => a != b,
            (Lt, AttributeValue::Number(a), PredicateValue::Number(b)) => a < b,
            (Le, AttributeValue::Number(a), PredicateValue::Number(b)) => a <= b,
            (Gt, AttributeValue::Number(a), PredicateValue::Number(b)) => a > b,
            (Ge, AttributeValue::Number(a), PredicateValue::Number(b)) => a >= b,
            (Contains, AttributeValue::Text(a), PredicateValue::Text(b)) => a.contains(b.as_str()),
            (Contains, AttributeValue::Labels(ls), PredicateValue::Text(b)) => {
                ls.iter().any(|l| l.contains(b.as_str()))
            }
            (HasLabel, AttributeValue::Labels(ls), PredicateValue::Text(b)) => ls.iter().any(|l| l == b),
            (HasLabel, AttributeValue::Text(a), PredicateValue::Text(b)) => a.split(';').any(|l| l.trim() == b),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRule {
    pub id: String,
    pub product_tag_id: String,
    pub conditions: Vec<AttributePredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule `{rule}` targets unknown product tag `{tag}`")]
    UnknownTag { rule: String, tag: String },
    #[error("rule `{rule}` has no conditions")]
    NoConditions { rule: String },
    #[error("rule `{rule}`: operator {op:?} on `{attribute}` needs a {expected} value")]
    ValueType { rule: String, attribute: String, op: PredicateOp, expected: &'static str },
}

impl AssignmentRule {
    pub fn fires(&self, product: &Product) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.holds(product))
    }

    /// Structural checks plus tag resolution against `o`.
    pub fn check(&self, o: &Ontology) -> Result<(), RuleError> {
        if !o.product_tags.contains_key(&self.product_tag_id) {
            return Err(RuleError::UnknownTag { rule: self.id.clone(), tag: self.product_tag_id.clone() });
        }
        if self.conditions.is_empty() {
            return Err(RuleError::NoConditions { rule: self.id.clone() });
        }
        for c in &self.conditions {
            let mismatch = match (&c.value, c.op) {
                (PredicateValue::Text(_), op) if op.is_numeric() => Some("numeric"),
                (PredicateValue::Number(_), op) if op.is_textual() => Some("string"),
                _ => None,
            };
            if let Some(expected) = mismatch {
                return Err(RuleError::ValueType {
                    rule: self.id.clone(),
                    attribute: c.attribute.clone(),
                    op: c.op,
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Union of the target tags of every rule that fires on `product`.
pub fn evaluate_rules(product: &Product, rules: &[AssignmentRule]) -> BTreeSet<String> {
    rules.iter().filter(|r| r.fires(product)).map(|r| r.product_tag_id.clone()).collect()
}

/// Adds rule-derived tags to every product. Existing assignments are kept.
pub fn assign_all(o: &Ontology, rules: &[AssignmentRule]) -> Result<Ontology, RuleError> {
    for rule in rules {
        if !o.product_tags.contains_key(&rule.product_tag_id) {
            return Err(RuleError::UnknownTag { rule: rule.id.clone(), tag: rule.product_tag_id.clone() });
        }
    }
    let mut out = o.clone();
    for product in out.products.values_mut() {
        let derived = evaluate_rules(product, rules);
        product.tag_ids.extend(derived);
    }
    Ok(out)
}
