//! Preference interactions measured by rank correlation, and the distribution
//! of sustainability indices across a catalog.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ontology::{association, Ontology, Preference};
use crate::rating::{RatingEngine, RatingError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("unknown preference `{0}`")]
    UnknownPreference(String),
    #[error(transparent)]
    Rating(#[from] RatingError),
}

/// Ranks starting at 1; tied values share the mean of the ranks they span.
pub fn average_ranks<S: Scalar>(xs: &[S]) -> Vec<S> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![S::zero(); xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let rank = S::of((i + 1 + j) as f64) / S::of(2.0);
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson<S: Scalar>(xs: &[S], ys: &[S]) -> Option<S> {
    let n = S::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<S>() / n;
    let my = ys.iter().copied().sum::<S>() / n;
    let (mut sxy, mut sxx, mut syy) = (S::zero(), S::zero(), S::zero());
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (*x - mx, *y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == S::zero() || syy == S::zero() {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).max(-S::one()).min(S::one()))
}

/// Spearman rank correlation. `None` for fewer than two points or when either
/// series is constant.
pub fn spearman<S: Scalar>(xs: &[S], ys: &[S]) -> Result<Option<S>, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// Which product tags count as shared between two preferences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedTagSelector {
    /// Non-zero association with some preference tag on each side.
    #[default]
    NonZero,
    /// Positive association with some preference tag on each side.
    PositiveOnly,
}

impl SharedTagSelector {
    fn admits<S: Scalar>(self, r: S) -> bool {
        match self {
            SharedTagSelector::NonZero => r != S::zero(),
            SharedTagSelector::PositiveOnly => r > S::zero(),
        }
    }
}

impl fmt::Display for SharedTagSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SharedTagSelector::NonZero => "non_zero",
            SharedTagSelector::PositiveOnly => "positive_only",
        })
    }
}

impl FromStr for SharedTagSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_zero" | "nonzero" => Ok(SharedTagSelector::NonZero),
            "positive_only" | "positive" => Ok(SharedTagSelector::PositiveOnly),
            _ => Err(format!("unknown tag selector `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionLevel {
    Ontology,
    Product,
}

impl fmt::Display for InteractionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteractionLevel::Ontology => "ontology",
            InteractionLevel::Product => "product",
        })
    }
}

impl FromStr for InteractionLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ontology" => Ok(InteractionLevel::Ontology),
            "product" => Ok(InteractionLevel::Product),
            _ => Err(format!("unknown interaction level `{s}`")),
        }
    }
}

/// Per product tag: (admitted by the selector, mean association over Ω_π).
fn tag_profile<S: Scalar>(o: &Ontology, pref: &Preference, selector: SharedTagSelector) -> Vec<(bool, S)> {
    let tags: Vec<_> = o.preference_tags_of(pref).collect();
    let size = S::of(tags.len().max(1) as f64);
    o.product_tags
        .values()
        .map(|z| {
            let mut admitted = false;
            let mut sum = S::zero();
            for w in &tags {
                let r = association::<S>(o, z, w);
                admitted |= selector.admits(r);
                sum += r;
            }
            (admitted, sum / size)
        })
        .collect()
}

fn preference<'a>(o: &'a Ontology, id: &str) -> Result<&'a Preference, AnalysisError> {
    o.preferences.get(id).ok_or_else(|| AnalysisError::UnknownPreference(id.to_owned()))
}

fn shared_correlation<S: Scalar>(a: &[(bool, S)], b: &[(bool, S)]) -> Option<S> {
    let (xs, ys): (Vec<S>, Vec<S>) = a.iter().zip(b).filter(|(x, y)| x.0 && y.0).map(|(x, y)| (x.1, y.1)).unzip();
    spearman(&xs, &ys).ok().flatten()
}

/// Rank correlation of the mean association scores of the product tags the
/// two preferences share. `None` with fewer than two shared tags.
pub fn ontology_level_interaction<S: Scalar>(
    o: &Ontology,
    pi1: &str,
    pi2: &str,
    selector: SharedTagSelector,
) -> Result<Option<S>, AnalysisError> {
    let a = tag_profile::<S>(o, preference(o, pi1)?, selector);
    let b = tag_profile::<S>(o, preference(o, pi2)?, selector);
    Ok(shared_correlation(&a, &b))
}

/// Rank correlation of the two preferences' sustainability indices over `products`.
pub fn product_level_interaction<S: Scalar>(
    engine: &RatingEngine<S>,
    pi1: &str,
    pi2: &str,
    products: &[&str],
) -> Result<Option<S>, AnalysisError> {
    let series = |pi: &str| -> Result<Vec<S>, AnalysisError> {
        products.iter().map(|p| Ok(engine.sustainability_index(p, pi)?.value)).collect()
    };
    let xs = series(pi1)?;
    let ys = series(pi2)?;
    spearman(&xs, &ys)
}

/// Symmetric matrix of pairwise interactions; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct InteractionMatrix<S: Scalar> {
    pub level: InteractionLevel,
    pub preference_ids: Vec<String>,
    pub values: Vec<Vec<Option<S>>>,
}

impl<S: Scalar> InteractionMatrix<S> {
    fn build(level: InteractionLevel, ids: Vec<String>, mut cell: impl FnMut(usize, usize) -> Option<S>) -> Self {
        let n = ids.len();
        let mut values = vec![vec![None; n]; n];
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            for j in i..n {
                let v = cell(i, j);
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Self { level, preference_ids: ids, values }
    }

    pub fn get(&self, pi1: &str, pi2: &str) -> Option<S> {
        let i = self.preference_ids.iter().position(|p| p == pi1)?;
        let j = self.preference_ids.iter().position(|p| p == pi2)?;
        self.values[i][j]
    }
}

pub fn ontology_interaction_matrix<S: Scalar>(o: &Ontology, selector: SharedTagSelector) -> InteractionMatrix<S> {
    let profiles: Vec<_> = o.preferences.values().map(|p| tag_profile::<S>(o, p, selector)).collect();
    InteractionMatrix::build(InteractionLevel::Ontology, o.preferences.keys().cloned().collect(), |i, j| {
        shared_correlation(&profiles[i], &profiles[j])
    })
}

/// Product-level matrix over `products`, or over the whole catalog when `None`.
pub fn product_interaction_matrix<S: Scalar>(
    engine: &RatingEngine<S>,
    products: Option<&[&str]>,
) -> Result<InteractionMatrix<S>, AnalysisError> {
    let all: Vec<&str> = engine.product_ids().iter().map(String::as_str).collect();
    let products = products.unwrap_or(&all);
    let n = engine.preference_ids().len();
    let mut columns = vec![Vec::with_capacity(products.len()); n];
    for p in products {
        let row = engine.index_row(p).ok_or_else(|| RatingError::UnknownProduct((*p).to_owned()))?;
        for (c, v) in row.iter().enumerate() {
            columns[c].push(*v);
        }
    }
    Ok(InteractionMatrix::build(InteractionLevel::Product, engine.preference_ids().to_vec(), |i, j| {
        spearman(&columns[i], &columns[j]).ok().flatten()
    }))
}

/// Counts of sustainability indices in uniform bins over `[-1, 1]`. Bins
/// include their left edge; the last bin also includes 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Histogram<S: Scalar> {
    pub preference_id: String,
    pub edges: Vec<S>,
    pub counts: Vec<usize>,
}

impl<S: Scalar> Histogram<S> {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Bin of `v` among `bins` uniform bins over `[-1, 1]`.
pub fn bin_of<S: Scalar>(v: S, bins: usize) -> usize {
    let pos = ((v + S::one()) / S::of(2.0) * S::of(bins as f64)).floor();
    pos.to_usize().unwrap_or(0).min(bins - 1)
}

pub fn index_density<S: Scalar>(
    engine: &RatingEngine<S>,
    preference_id: &str,
    products: &[&str],
    bins: usize,
) -> Result<Histogram<S>, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::NoBins);
    }
    let mut counts = vec![0; bins];
    for p in products {
        let v = engine.sustainability_index(p, preference_id)?.value;
        counts[bin_of(v, bins)] += 1;
    }
    let edges = (0..=bins).map(|k| -S::one() + S::of(2.0 * k as f64 / bins as f64)).collect();
    Ok(Histogram { preference_id: preference_id.to_owned(), edges, counts })
}
