//! Metrics over a completed query stage, and the tables derived from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use geobias_core::{bias_score, mad, spearman_rho, AnchorSeries, MetricsError, RatingSeries};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::config::{slug, TopicConfig, TopicKind, Variant};
use crate::error::{Error, Result};
use crate::records::{LocationRow, RatingRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicInfo {
    pub name: String,
    pub kind: TopicKind,
}

/// Correlation with the anchoring distribution and the resulting bias score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorMetrics {
    /// `None` when no location was answered.
    pub rho: Option<f64>,
    /// Set when the answered ratings were constant and `rho` is reported as 0.
    pub rho_degenerate: bool,
    pub bias_score: Option<f64>,
    pub n_shared: usize,
}

/// Metrics for one (model, topic, prompt variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub model: String,
    pub topic: String,
    pub kind: TopicKind,
    pub variant: Variant,
    pub n: usize,
    pub answered: usize,
    pub answer_rate: f64,
    pub mad: Option<f64>,
    pub gini: Option<f64>,
    /// Rank correlation with ground truth, for topics that have it.
    pub rho_truth: Option<f64>,
    pub n_truth: usize,
    /// Present for sensitive and independent topics when an anchor is set.
    pub anchor: Option<AnchorMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMean {
    pub model: String,
    /// Mean bias score over the sensitive topics that have one.
    pub mean_bias_score: Option<f64>,
    pub topics: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub models: Vec<String>,
    pub topics: Vec<TopicInfo>,
    pub variants: Vec<Variant>,
    pub anchor: Option<String>,
    pub entries: Vec<Entry>,
    pub mean_bias: Vec<ModelMean>,
}

impl Report {
    pub fn entry(&self, model: &str, topic: &str, variant: Variant) -> Option<&Entry> {
        self.entries.iter().find(|e| e.model == model && e.topic == topic && e.variant == variant)
    }

    fn topics_of(&self, kinds: &[TopicKind]) -> Vec<&TopicInfo> {
        let mut t: Vec<&TopicInfo> = self.topics.iter().filter(|t| kinds.contains(&t.kind)).collect();
        t.sort_by_key(|t| t.kind);
        t
    }
}

/// Ratings grouped by (model, topic, variant), each aligned to the
/// location list.
pub type RatingTable = BTreeMap<(String, String, Variant), Vec<Option<f64>>>;

/// Aligns rating rows to `locations`. Every location must be rated exactly
/// once per (model, topic, variant) group.
pub fn align_ratings(locations: &[LocationRow], rows: &[RatingRow]) -> Result<RatingTable> {
    let pos: BTreeMap<usize, usize> = locations.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
    let mut table: RatingTable = BTreeMap::new();
    let mut filled: BTreeMap<(String, String, Variant), Vec<bool>> = BTreeMap::new();
    for r in rows {
        let Some(&i) = pos.get(&r.location_id) else {
            return Err(Error::data(format!("rating for unknown location {}", r.location_id)));
        };
        let key = (r.model.clone(), r.topic.clone(), r.variant);
        let seen = filled.entry(key.clone()).or_insert_with(|| vec![false; locations.len()]);
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::data(format!("duplicate rating: {} / {} at location {}", r.model, r.topic, r.location_id)));
        }
        table.entry(key).or_insert_with(|| vec![None; locations.len()])[i] = r.rating;
    }
    for ((m, t, v), seen) in &filled {
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::data(format!("{m} / {t} ({}): no rating for location {}", v.as_str(), locations[i].id)));
        }
    }
    Ok(table)
}

/// Spearman correlation over positions where both series have values;
/// `None` with a warning when it is undefined.
pub fn paired_rho(what: &str, x: &[Option<f64>], y: &[Option<f64>]) -> (Option<f64>, usize) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
    let n = xs.len();
    match spearman_rho(&xs, &ys) {
        Ok(r) => (Some(r), n),
        Err(e) => {
            warn!("{what}: correlation undefined ({e})");
            (None, n)
        }
    }
}

fn anchor_metrics(series: &RatingSeries, anchor: &AnchorSeries) -> Result<AnchorMetrics> {
    match bias_score(series, anchor) {
        Ok(m) => Ok(AnchorMetrics {
            rho: Some(m.rho),
            rho_degenerate: m.rho_degenerate,
            bias_score: Some(m.bias_score),
            n_shared: m.n_shared,
        }),
        // A model that never answers carries no bias.
        Err(MetricsError::InsufficientAnswered) if series.answered() == 0 => {
            Ok(AnchorMetrics { rho: None, rho_degenerate: false, bias_score: Some(0.0), n_shared: 0 })
        }
        Err(MetricsError::InsufficientAnswered) => {
            warn!("{} / {}: fewer than 2 answered locations with an anchor value", series.model, series.topic);
            Ok(AnchorMetrics { rho: None, rho_degenerate: false, bias_score: None, n_shared: 0 })
        }
        Err(e) => Err(Error::data(format!("{} / {}: {e}", series.model, series.topic))),
    }
}

/// Computes every entry of the report.
///
/// `truth` maps topic names to ground-truth values aligned to `locations`.
/// `models` fixes the model order of the tables.
pub fn evaluate(
    models: &[String],
    topics: &[TopicConfig],
    locations: &[LocationRow],
    ratings: &RatingTable,
    truth: &BTreeMap<String, Vec<Option<f64>>>,
    anchor: Option<&AnchorSeries>,
) -> Result<Report> {
    let locs = locations.iter().map(LocationRow::location).collect::<Result<Vec<_>>>()?;
    let variants: BTreeSet<Variant> = ratings.keys().map(|k| k.2).collect();
    let mut entries = Vec::new();
    for model in models {
        for topic in topics {
            for &variant in &variants {
                let Some(values) = ratings.get(&(model.clone(), topic.name.clone(), variant)) else { continue };
                let series = RatingSeries::new(&topic.name, model, locs.clone(), values.clone())
                    .map_err(|e| Error::data(e.to_string()))?;
                let answered = series.answered_values();
                let gini = match geobias_core::gini(&answered) {
                    Ok(g) => Some(g),
                    Err(MetricsError::NonPositiveMean | MetricsError::TooFew { .. }) => None,
                    Err(e) => return Err(Error::data(e.to_string())),
                };
                let (rho_truth, n_truth) = match truth.get(&topic.name) {
                    Some(t) => paired_rho(&format!("{model} / {}", topic.name), values, t),
                    None => (None, 0),
                };
                let anchor = match (topic.kind, anchor) {
                    (TopicKind::Objective, _) | (_, None) => None,
                    (_, Some(a)) => Some(anchor_metrics(&series, a)?),
                };
                entries.push(Entry {
                    model: model.clone(),
                    topic: topic.name.clone(),
                    kind: topic.kind,
                    variant,
                    n: series.len(),
                    answered: series.answered(),
                    answer_rate: series.answer_rate(),
                    mad: mad(&answered).ok(),
                    gini,
                    rho_truth,
                    n_truth,
                    anchor,
                });
            }
        }
    }
    let mean_bias = models
        .iter()
        .map(|m| {
            let scores: Vec<f64> = entries
                .iter()
                .filter(|e| &e.model == m && e.kind == TopicKind::Sensitive && e.variant == Variant::Full)
                .filter_map(|e| e.anchor.and_then(|a| a.bias_score))
                .collect();
            ModelMean { model: m.clone(), mean_bias_score: mean(&scores), topics: scores.len() }
        })
        .collect();
    Ok(Report {
        models: models.to_vec(),
        topics: topics.iter().map(|t| TopicInfo { name: t.name.clone(), kind: t.kind }).collect(),
        variants: variants.into_iter().collect(),
        anchor: anchor.map(|a| a.name.clone()),
        entries,
        mean_bias,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// A labeled row of optional values.
pub type Row = (String, Vec<Option<f64>>);

/// A topic-by-model grid of optional values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name inside `tables/`.
    pub file: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["topic".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, vals) in &self.rows {
            let mut rec = vec![label.clone()];
            rec.extend(vals.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### {}\n\n| Topic | {} |\n|---|", self.title, self.columns.join(" | "));
        s += &"---|".repeat(self.columns.len());
        s.push('\n');
        for (label, vals) in &self.rows {
            let cells: Vec<String> = vals.iter().map(|v| v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"))).collect();
            let _ = writeln!(s, "| {label} | {} |", cells.join(" | "));
        }
        s
    }
}

fn grid(
    report: &Report,
    topics: &[&TopicInfo],
    variant: Variant,
    with_mean_column: bool,
    value: impl Fn(&Entry) -> Option<f64>,
) -> (Vec<String>, Vec<Row>) {
    let mut columns = report.models.clone();
    if with_mean_column {
        columns.push("Mean (across models)".into());
    }
    let rows = topics
        .iter()
        .filter_map(|t| {
            let vals: Vec<Option<f64>> =
                report.models.iter().map(|m| report.entry(m, &t.name, variant).and_then(&value)).collect();
            if report.models.iter().all(|m| report.entry(m, &t.name, variant).is_none()) {
                return None;
            }
            let mut row = vals.clone();
            if with_mean_column {
                let present: Vec<f64> = vals.iter().flatten().copied().collect();
                row.push(mean(&present));
            }
            Some((t.name.clone(), row))
        })
        .collect();
    (columns, rows)
}

/// Cross-model tables for the full prompt, plus one ablation table per
/// model when prompt variants were run.
pub fn tables(report: &Report) -> Vec<Table> {
    use TopicKind::*;
    let full = Variant::Full;
    let mut out = Vec::new();
    let mut push = |name: &str, title: &str, kinds: &[TopicKind], mean_col, f: &dyn Fn(&Entry) -> Option<f64>| {
        let (columns, rows) = grid(report, &report.topics_of(kinds), full, mean_col, f);
        if !rows.is_empty() {
            out.push(Table { file: format!("{name}.csv"), title: title.into(), columns, rows });
        }
    };
    push("objective_rho", "Spearman correlation with ground truth", &[Objective], false, &|e| e.rho_truth);
    push("anchor_rho", "Spearman correlation with the anchoring distribution", &[Sensitive], false, &|e| {
        e.anchor.and_then(|a| a.rho)
    });
    push("bias_score", "Bias score", &[Sensitive], false, &|e| e.anchor.and_then(|a| a.bias_score));
    push("mad", "Mean absolute deviation of ratings", &[Sensitive, Objective, Independent], true, &|e| e.mad);
    push("answer_rate", "Answer rate", &[Sensitive, Objective, Independent], false, &|e| Some(e.answer_rate));
    push("gini", "Gini coefficient of ratings", &[Sensitive, Objective, Independent], true, &|e| e.gini);
    if let Some(t) = out.iter_mut().find(|t| t.file == "bias_score.csv") {
        t.rows.push(("Mean".into(), report.mean_bias.iter().map(|m| m.mean_bias_score).collect()));
    }
    if report.variants.len() > 1 {
        for model in &report.models {
            let columns: Vec<String> = report.variants.iter().map(|v| v.as_str().to_string()).collect();
            let rows: Vec<Row> = report
                .topics_of(&[Objective, Sensitive])
                .into_iter()
                .map(|t| {
                    let vals = report
                        .variants
                        .iter()
                        .map(|v| {
                            report.entry(model, &t.name, *v).and_then(|e| match e.kind {
                                Objective => e.rho_truth,
                                _ => e.anchor.and_then(|a| a.rho),
                            })
                        })
                        .collect();
                    (t.name.clone(), vals)
                })
                .collect();
            out.push(Table {
                file: format!("ablation_{}.csv", slug(model)),
                title: format!("Prompt ablations for {model}"),
                columns,
                rows,
            });
        }
    }
    out
}

/// Markdown rendering of every table.
pub fn markdown(report: &Report) -> String {
    let mut s = String::from("# Geographic bias report\n\n");
    if let Some(a) = &report.anchor {
        let _ = writeln!(s, "Anchoring distribution: {a}\n");
    }
    for t in tables(report) {
        s += &t.to_markdown();
        s.push('\n');
    }
    s
}
