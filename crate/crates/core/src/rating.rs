//! Turning model output into ratings.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Location;

/// Minimum total probability on digit tokens for an expected value to be
/// trusted. At or below this the result is flagged as low-mass.
pub const MIN_DIGIT_MASS: f64 = 0.5;

const ANSWER_MARKER: &str = "My answer is ";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatingError {
    #[error("no probability mass on digit tokens")]
    NoDigitMass,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("ratings and locations differ in length ({ratings} vs {locations})")]
    Misaligned { ratings: usize, locations: usize },
}

/// Parses a `D.D` rating.
///
/// Looks first for `My answer is D.D`, then for the first standalone `D.D`
/// token anywhere in the text. A token is standalone when it is not glued to
/// further digits (so `17.25` yields nothing). `None` signals a refusal.
pub fn parse_rating(raw_text: &str) -> Option<f64> {
    let bytes = raw_text.as_bytes();
    let mut from = 0;
    while let Some(pos) = raw_text[from..].find(ANSWER_MARKER) {
        let start = from + pos + ANSWER_MARKER.len();
        if let Some(v) = rating_at(bytes, start, false) {
            return Some(v);
        }
        from = start;
    }
    (0..bytes.len()).find_map(|i| rating_at(bytes, i, true))
}

fn rating_at(bytes: &[u8], i: usize, check_before: bool) -> Option<f64> {
    if i + 3 > bytes.len() {
        return None;
    }
    let (a, dot, b) = (bytes[i], bytes[i + 1], bytes[i + 2]);
    if !(a.is_ascii_digit() && dot == b'.' && b.is_ascii_digit()) {
        return None;
    }
    if check_before && i > 0 && (bytes[i - 1].is_ascii_digit() || bytes[i - 1] == b'.') {
        return None;
    }
    match bytes.get(i + 3) {
        Some(c) if c.is_ascii_digit() => return None,
        Some(b'.') if bytes.get(i + 4).is_some_and(u8::is_ascii_digit) => return None,
        _ => {}
    }
    Some(f64::from(a - b'0') + f64::from(b - b'0') / 10.0)
}

/// Probability mass on each single-digit token at the first-digit position,
/// before renormalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FirstDigitProbs(pub [f64; 10]);

impl FirstDigitProbs {
    /// Accumulates `(token, logprob)` alternatives. Tokens are trimmed;
    /// anything other than a single ASCII digit is ignored.
    pub fn from_logprobs<'a>(alternatives: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut p = [0.0; 10];
        for (token, logprob) in alternatives {
            if let Some(d) = single_digit(token) {
                p[d] += libm::exp(logprob);
            }
        }
        Self(p)
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub(crate) fn single_digit(token: &str) -> Option<usize> {
    let t = token.trim();
    let b = t.as_bytes();
    (b.len() == 1 && b[0].is_ascii_digit()).then(|| usize::from(b[0] - b'0'))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRating {
    /// Renormalized expected first digit, in `[0, 9]`.
    pub value: f64,
    /// Digit mass before renormalization.
    pub digit_mass: f64,
    /// `digit_mass <= MIN_DIGIT_MASS`.
    pub low_mass: bool,
}

/// Expected value of the first rating digit, renormalized over the digit
/// tokens that were observed.
pub fn expected_rating_from_logprobs(probs: &FirstDigitProbs) -> Result<ExpectedRating, RatingError> {
    for &p in &probs.0 {
        if !p.is_finite() || p < 0.0 {
            return Err(RatingError::InvalidProbability(p));
        }
    }
    let mass = probs.mass();
    if mass.is_nan() || mass <= 0.0 {
        return Err(RatingError::NoDigitMass);
    }
    let weighted: f64 = probs.0.iter().enumerate().map(|(d, p)| d as f64 * p).sum();
    let value = (weighted / mass).clamp(0.0, 9.0);
    Ok(ExpectedRating { value, digit_mass: mass, low_mass: mass <= MIN_DIGIT_MASS })
}

/// Ratings of one model on one topic, aligned to a location list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSeries {
    pub topic: String,
    pub model: String,
    pub locations: Vec<Location>,
    /// `None` where the model did not answer.
    pub ratings: Vec<Option<f64>>,
}

impl RatingSeries {
    pub fn new(
        topic: impl Into<String>,
        model: impl Into<String>,
        locations: Vec<Location>,
        ratings: Vec<Option<f64>>,
    ) -> Result<Self, RatingError> {
        if locations.len() != ratings.len() {
            return Err(RatingError::Misaligned { ratings: ratings.len(), locations: locations.len() });
        }
        Ok(Self { topic: topic.into(), model: model.into(), locations, ratings })
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn answered(&self) -> usize {
        self.ratings.iter().filter(|r| r.is_some()).count()
    }

    /// Answered count over total count; 0 for an empty series.
    pub fn answer_rate(&self) -> f64 {
        if self.ratings.is_empty() {
            0.0
        } else {
            self.answered() as f64 / self.ratings.len() as f64
        }
    }

    pub fn answered_values(&self) -> Vec<f64> {
        self.ratings.iter().flatten().copied().collect()
    }
}
