//! User-independent sustainability indices and personalized product ratings.

mod engine;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use engine::{rank_order, RatingEngine, RatingWarning, Reference, UserProfile};

/// Clamps `a` into `[-tau, tau]`.
pub fn clip<S: Scalar>(a: S, tau: S) -> S {
    if a <= -tau {
        -tau
    } else if a >= tau {
        tau
    } else {
        a
    }
}

/// Magnitude below which an aggregate or index counts as zero. Sums of
/// rational association scores pick up rounding residue when they cancel,
/// and the residue must not flip a sign test.
pub fn zero_tolerance<S: Scalar>() -> S {
    S::epsilon() * S::of(64.0)
}

/// `v`, or exactly zero when within [`zero_tolerance`] of it.
pub fn snap_to_zero<S: Scalar>(v: S) -> S {
    if v.abs() <= zero_tolerance::<S>() {
        S::zero()
    } else {
        v
    }
}

/// How the reference associations that normalize aggregates are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceStrategy {
    /// The best existing product in the catalog.
    ExistingBest,
    /// A theoretical product carrying every associated tag, after reduction.
    TheoreticalReduced,
    /// A theoretical product carrying every associated tag without reduction;
    /// aggregates and references are clipped to `tau`.
    #[default]
    TheoreticalUnreducedClipped,
}

impl ReferenceStrategy {
    pub const ALL: [ReferenceStrategy; 3] = [
        ReferenceStrategy::ExistingBest,
        ReferenceStrategy::TheoreticalReduced,
        ReferenceStrategy::TheoreticalUnreducedClipped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceStrategy::ExistingBest => "existing_best",
            ReferenceStrategy::TheoreticalReduced => "theoretical_reduced",
            ReferenceStrategy::TheoreticalUnreducedClipped => "theoretical_unreduced_clipped",
        }
    }
}

impl fmt::Display for ReferenceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReferenceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown reference strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RatingConfig<S: Scalar> {
    /// Neutral preference score; scores range over `[0, 2 * s_mean]`.
    pub s_mean: S,
    pub alpha: S,
    pub beta: S,
    pub tau: S,
    pub reference_strategy: ReferenceStrategy,
    pub strict_enforcement: bool,
}

impl<S: Scalar> Default for RatingConfig<S> {
    fn default() -> Self {
        Self {
            s_mean: S::of(5.0),
            alpha: S::of(5.0),
            beta: S::of(5.0),
            tau: S::one(),
            reference_strategy: ReferenceStrategy::default(),
            strict_enforcement: true,
        }
    }
}

impl<S: Scalar> RatingConfig<S> {
    pub fn validate(&self) -> Result<(), RatingError> {
        let positive = |name: &str, v: S| {
            if v > S::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(RatingError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("tau", self.tau)?;
        positive("s_mean", self.s_mean)?;
        if !self.beta.is_finite() {
            return Err(RatingError::InvalidConfig("beta must be finite".into()));
        }
        Ok(())
    }

    pub fn max_score(&self) -> S {
        self.s_mean + self.s_mean
    }

    /// `s - s_mean` for a score in `[0, 2 * s_mean]`.
    pub fn offset(&self, preference_id: &str, s: S) -> Result<S, RatingError> {
        if !(s >= S::zero() && s <= self.max_score()) {
            return Err(RatingError::OutOfRangeScore {
                preference_id: preference_id.to_owned(),
                score: s.as_f64(),
                max: self.max_score().as_f64(),
            });
        }
        Ok(s - self.s_mean)
    }

    pub fn scale(&self, raw: S) -> S {
        self.alpha * raw + self.beta
    }
}

/// A user's preference scores. Preferences left out are neutral.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct PreferenceScoreVector<S: Scalar> {
    pub scores: BTreeMap<String, S>,
}

impl<S: Scalar> PreferenceScoreVector<S> {
    pub fn new() -> Self {
        Self { scores: BTreeMap::new() }
    }

    pub fn with(mut self, preference_id: impl Into<String>, score: S) -> Self {
        self.scores.insert(preference_id.into(), score);
        self
    }

    pub fn get(&self, preference_id: &str) -> Option<S> {
        self.scores.get(preference_id).copied()
    }
}

impl<S: Scalar, K: Into<String>> FromIterator<(K, S)> for PreferenceScoreVector<S> {
    fn from_iter<I: IntoIterator<Item = (K, S)>>(iter: I) -> Self {
        Self { scores: iter.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

/// Support (positive) or opposition (negative) of a product for a preference.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct SustainabilityIndex<S: Scalar> {
    pub product_id: String,
    pub preference_id: String,
    pub value: S,
}

/// Sustainability indices of one product over every preference, ordered by preference id.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct ProductRepresentation<S: Scalar> {
    pub product_id: String,
    pub indices: Vec<SustainabilityIndex<S>>,
    /// Non-personalized estimate: the mean of `indices`.
    pub mean: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct ProductRating<S: Scalar> {
    pub product_id: String,
    pub raw: S,
    pub scaled: S,
    /// Strict preference at full support that this product opposes; the
    /// rating is floored to the bottom of the scale.
    pub strict_violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RatingError {
    #[error("invalid rating config: {0}")]
    InvalidConfig(String),
    #[error("unknown product `{0}`")]
    UnknownProduct(String),
    #[error("unknown preference `{0}`")]
    UnknownPreference(String),
    #[error("unknown preference tag `{0}`")]
    UnknownPreferenceTag(String),
    #[error("score {score} for preference `{preference_id}` is outside [0, {max}]")]
    OutOfRangeScore { preference_id: String, score: f64, max: f64 },
    #[error("preference `{0}` has no preference tags")]
    EmptyPreference(String),
}
