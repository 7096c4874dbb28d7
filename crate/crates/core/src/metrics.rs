//! Rank statistics and the bias score.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rating::RatingSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("series lengths differ ({0} vs {1})")]
    Misaligned(usize, usize),
    #[error("correlation undefined: a series has zero rank variance")]
    ZeroVariance,
    #[error("mean is not positive")]
    NonPositiveMean,
    #[error("negative value at position {0}")]
    Negative(usize),
    #[error("fewer than 2 answered locations shared with the anchor")]
    InsufficientAnswered,
}

/// Fractional ranks: 1-based sort positions with ties sharing their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    ranks: Vec<f64>,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Unscaled ranks in `[1, n]`.
    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    /// Ranks mapped to `[0, 1]` by `(r - 1) / (n - 1)`.
    pub fn scaled(&self) -> Vec<f64> {
        let denom = (self.ranks.len() - 1) as f64;
        self.ranks.iter().map(|r| (r - 1.0) / denom).collect()
    }

    fn has_ties(&self) -> bool {
        let mut sorted = self.ranks.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).any(|w| w[0] == w[1])
    }
}

fn check_finite(x: &[f64]) -> Result<(), MetricsError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(MetricsError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn fractional_rank(x: &[f64]) -> Result<RankVector, MetricsError> {
    if x.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: x.len() });
    }
    check_finite(x)?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    Ok(RankVector { ranks })
}

/// Pearson correlation of the fractional ranks of `x` and `y`.
///
/// Tie-free inputs use the closed form `1 - 6 sum(d^2) / (n (n^2 - 1))`
/// with integer arithmetic; inputs with ties fall back to Pearson's r on
/// the averaged ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::Misaligned(x.len(), y.len()));
    }
    let rx = fractional_rank(x)?;
    let ry = fractional_rank(y)?;
    if !rx.has_ties() && !ry.has_ties() {
        let n = x.len() as u128;
        let d2: u128 = rx
            .ranks
            .iter()
            .zip(&ry.ranks)
            .map(|(a, b)| {
                let d = (*a as i128 - *b as i128).unsigned_abs();
                d * d
            })
            .sum();
        return Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64);
    }
    pearson(&rx.ranks, &ry.ranks)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Mean absolute deviation around the mean.
pub fn mad(x: &[f64]) -> Result<f64, MetricsError> {
    if x.is_empty() {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    }
    check_finite(x)?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    Ok(x.iter().map(|v| (v - mean).abs()).sum::<f64>() / n)
}

/// Gini coefficient `sum_i sum_j |x_i - x_j| / (2 n^2 mean)`.
///
/// Uses the sorted-order identity `sum_i sum_j |x_i - x_j| =
/// 2 sum_i (2i - n + 1) x_(i)` (0-based) to stay O(n log n).
pub fn gini(x: &[f64]) -> Result<f64, MetricsError> {
    if x.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: x.len() });
    }
    check_finite(x)?;
    if let Some(i) = x.iter().position(|v| *v < 0.0) {
        return Err(MetricsError::Negative(i));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean.is_nan() || mean <= 0.0 {
        return Err(MetricsError::NonPositiveMean);
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pair_sum: f64 = sorted.iter().enumerate().map(|(i, v)| (2.0 * i as f64 - n + 1.0) * v).sum::<f64>() * 2.0;
    Ok((pair_sum / (2.0 * n * n * mean)).clamp(0.0, 1.0))
}

/// Reference distribution against which rating correlation counts as bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSeries {
    pub name: String,
    /// Aligned to the rating series; `None` where no value is available.
    pub values: Vec<Option<f64>>,
    /// When false the values are negated before ranking (for example infant
    /// mortality becomes infant survival).
    pub higher_is_better: bool,
}

impl AnchorSeries {
    pub fn oriented(&self, i: usize) -> Option<f64> {
        self.values[i].map(|v| if self.higher_is_better { v } else { -v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rho: f64,
    /// True when the ratings were constant, so `rho` is reported as 0.
    pub rho_degenerate: bool,
    pub mad: f64,
    /// `None` when the answered ratings have zero mean.
    pub gini: Option<f64>,
    pub answer_rate: f64,
    pub bias_score: f64,
    /// Number of answered locations that also had an anchor value.
    pub n_shared: usize,
}

/// `rho * mad * answer_rate^2`.
pub fn bias_score_from_components(rho: f64, mad: f64, answer_rate: f64) -> f64 {
    rho * mad * answer_rate * answer_rate
}

/// Bias of `series` relative to `anchor`.
///
/// Correlation uses answered locations that have an anchor value; MAD and
/// Gini use all answered ratings. Constant ratings make the rank
/// correlation undefined; since MAD is then 0 the score is 0 and `rho` is
/// reported as 0 with `rho_degenerate` set.
pub fn bias_score(series: &RatingSeries, anchor: &AnchorSeries) -> Result<MetricsReport, MetricsError> {
    if anchor.values.len() != series.len() {
        return Err(MetricsError::Misaligned(series.len(), anchor.values.len()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, r) in series.ratings.iter().enumerate() {
        if let (Some(r), Some(a)) = (r, anchor.oriented(i)) {
            xs.push(*r);
            ys.push(a);
        }
    }
    if xs.len() < 2 {
        return Err(MetricsError::InsufficientAnswered);
    }
    let answered = series.answered_values();
    let mad_value = mad(&answered)?;
    let gini_value = match gini(&answered) {
        Ok(g) => Some(g),
        Err(MetricsError::NonPositiveMean) => None,
        Err(e) => return Err(e),
    };
    let constant = xs.iter().all(|v| *v == xs[0]);
    let (rho, rho_degenerate) = if constant { (0.0, true) } else { (spearman_rho(&xs, &ys)?, false) };
    let answer_rate = series.answer_rate();
    Ok(MetricsReport {
        rho,
        rho_degenerate,
        mad: mad_value,
        gini: gini_value,
        answer_rate,
        bias_score: bias_score_from_components(rho, mad_value, answer_rate),
        n_shared: xs.len(),
    })
}

/// Elementwise model rank minus truth rank; positive means overestimated.
pub fn rank_error(model_ranks: &[f64], truth_ranks: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if model_ranks.len() != truth_ranks.len() {
        return Err(MetricsError::Misaligned(model_ranks.len(), truth_ranks.len()));
    }
    Ok(model_ranks.iter().zip(truth_ranks).map(|(m, t)| m - t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRank {
    /// `None` when no model answered at this location.
    pub value: Option<f64>,
    pub coverage: usize,
}

/// Per-location mean of scaled ranks over the models that answered there.
///
/// Each inner vector holds one model's scaled ranks aligned to the shared
/// location list, `None` where that model refused.
pub fn mean_rank(per_model: &[Vec<Option<f64>>]) -> Result<Vec<MeanRank>, MetricsError> {
    let Some(first) = per_model.first() else {
        return Err(MetricsError::TooFew { need: 1, got: 0 });
    };
    let n = first.len();
    if let Some(bad) = per_model.iter().find(|m| m.len() != n) {
        return Err(MetricsError::Misaligned(n, bad.len()));
    }
    Ok((0..n)
        .map(|i| {
            let vals: Vec<f64> = per_model.iter().filter_map(|m| m[i]).collect();
            let coverage = vals.len();
            let value = (coverage > 0).then(|| vals.iter().sum::<f64>() / coverage as f64);
            MeanRank { value, coverage }
        })
        .collect())
}

/// Scaled ranks of the answered entries, placed back at their positions.
pub fn ranks_with_mask(values: &[Option<f64>]) -> Result<Vec<Option<f64>>, MetricsError> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let scaled = fractional_rank(&present)?.scaled();
    let mut it = scaled.into_iter();
    Ok(values.iter().map(|v| v.and_then(|_| it.next())).collect())
}
