#![allow(dead_code)]

use std::collections::BTreeSet;

use susrate_core::ontology::{Ontology, PreferenceTag, Product};

/// Exact aggregate from the concept union, counted by hand.
pub fn union_aggregate(o: &Ontology, p: &Product, w: &PreferenceTag) -> f64 {
    let mut union = BTreeSet::new();
    for t in &p.tag_ids {
        if let Some(z) = o.product_tags.get(t) {
            union.extend(z.concepts.iter().cloned());
        }
    }
    frac(&union, &w.support_concepts) - frac(&union, &w.oppose_concepts)
}

pub fn frac(have: &BTreeSet<String>, of: &BTreeSet<String>) -> f64 {
    if of.is_empty() {
        0.0
    } else {
        of.iter().filter(|c| have.contains(*c)).count() as f64 / of.len() as f64
    }
}

/// Additive aggregate with plain set arithmetic and overrides.
pub fn tag_sum(o: &Ontology, p: &Product, w: &PreferenceTag) -> f64 {
    p.tag_ids
        .iter()
        .filter_map(|t| o.product_tags.get(t))
        .map(|z| match o.overrides.get(&(z.id.clone(), w.id.clone())) {
            Some(ov) => ov.score,
            None => frac(&z.concepts, &w.support_concepts) - frac(&z.concepts, &w.oppose_concepts),
        })
        .sum()
}

/// Products whose co-assigned tags share a concept.
pub fn has_overlap(o: &Ontology, p: &Product) -> bool {
    let tags: Vec<_> = p.tag_ids.iter().filter_map(|t| o.product_tags.get(t)).collect();
    tags.iter().enumerate().any(|(i, a)| tags[i + 1..].iter().any(|b| !a.concepts.is_disjoint(&b.concepts)))
}

pub fn r(o: &Ontology, z: &str, w: &str) -> f64 {
    if let Some(ov) = o.overrides.get(&(z.to_owned(), w.to_owned())) {
        return ov.score;
    }
    let (z, w) = (&o.product_tags[z], &o.preference_tags[w]);
    frac(&z.concepts, &w.support_concepts) - frac(&z.concepts, &w.oppose_concepts)
}

#[derive(Clone, Copy, PartialEq)]
pub enum Refs {
    Clipped,
    ExistingBest,
}

/// Straight-line rating pipeline in `f64`.
pub struct Oracle<'a> {
    pub o: &'a Ontology,
    pub refs: Refs,
    pub tau: f64,
    pub s_mean: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Oracle<'_> {
    fn reference(&self, w: &str, positive: bool) -> Option<f64> {
        let keep = |v: f64| if positive { v > 0.0 } else { v < 0.0 };
        let v = match self.refs {
            Refs::Clipped => {
                let s: f64 = self.o.product_tags.keys().map(|z| r(self.o, z, w)).filter(|v| keep(*v)).sum();
                s.clamp(-self.tau, self.tau)
            }
            Refs::ExistingBest => {
                let mut best = 0.0f64;
                for p in self.o.products.values() {
                    let s: f64 = p
                        .tag_ids
                        .iter()
                        .filter(|z| self.o.product_tags.contains_key(*z))
                        .map(|z| r(self.o, z, w))
                        .filter(|v| keep(*v))
                        .sum();
                    best = if positive { best.max(s) } else { best.min(s) };
                }
                best
            }
        };
        keep(v).then_some(v)
    }

    pub fn normalized(&self, p: &str, w: &str) -> f64 {
        let p = &self.o.products[p];
        let mut a: f64 =
            p.tag_ids.iter().filter(|z| self.o.product_tags.contains_key(*z)).map(|z| r(self.o, z, w)).sum();
        if self.refs == Refs::Clipped {
            a = a.clamp(-self.tau, self.tau);
        }
        a = exact_zero(a);
        if a > 0.0 {
            self.reference(w, true).map_or(1.0, |m| (a / m).min(1.0))
        } else if a < 0.0 {
            self.reference(w, false).map_or(-1.0, |m| (a / m.abs()).max(-1.0))
        } else {
            0.0
        }
    }

    pub fn index(&self, p: &str, pi: &str) -> f64 {
        let tags = &self.o.preferences[pi].tag_ids;
        exact_zero(tags.iter().map(|w| self.normalized(p, w)).sum::<f64>() / tags.len() as f64)
    }

    /// (raw, scaled, violated strict preference)
    pub fn rate(&self, p: &str, scores: &[(String, f64)]) -> (f64, f64, Option<String>) {
        for (pi, s) in scores {
            if self.o.preferences[pi].strict && *s == 2.0 * self.s_mean && self.index(p, pi) < 0.0 {
                return (-1.0, self.beta - self.alpha, Some(pi.clone()));
            }
        }
        let num: f64 = scores.iter().map(|(pi, s)| self.index(p, pi) * (s - self.s_mean)).sum();
        let den: f64 = scores.iter().map(|(_, s)| (s - self.s_mean).abs()).sum();
        let raw = if den == 0.0 { 0.0 } else { num / den };
        (raw, self.alpha * raw + self.beta, None)
    }
}

/// Sums of the test scores are rationals; residue this small is cancellation noise.
pub fn exact_zero(v: f64) -> f64 {
    if v.abs() < 1e-13 {
        0.0
    } else {
        v
    }
}
