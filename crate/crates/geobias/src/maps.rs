//! Rank, rank-error and mean-rank maps with matching GeoJSON exports.

use std::collections::BTreeMap;

use geobias_core::metrics::ranks_with_mask;
use geobias_core::svg::{plot_points, plot_rank_error, MapStyle};
use geobias_core::{mean_rank, BoundingBox, Location, MetricsError};
use serde_json::{json, Map, Value};

use crate::config::{slug, MapConfig, TopicConfig, TopicKind};
use crate::error::{Error, Result};

/// One rendered map: `<stem>.svg` and `<stem>.geojson`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub stem: String,
    pub svg: String,
    pub geojson: String,
}

/// Point features with a `value` property plus per-point extras.
pub fn export_geojson(locations: &[Location], values: &[f64], properties: &[Map<String, Value>]) -> Result<String> {
    if locations.len() != values.len() || !(properties.is_empty() || properties.len() == values.len()) {
        return Err(Error::data("geojson export: inputs are not aligned"));
    }
    let features: Vec<Value> = locations
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (loc, v))| {
            let mut props = properties.get(i).cloned().unwrap_or_default();
            props.insert("value".into(), json!(v));
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [loc.lon(), loc.lat()] },
                "properties": props,
            })
        })
        .collect();
    Ok(json!({ "type": "FeatureCollection", "features": features }).to_string())
}

fn style(base: &MapStyle, cfg: &MapConfig, title: String) -> MapStyle {
    MapStyle {
        width_px: cfg.width_px,
        point_radius: cfg.point_radius,
        background: cfg.background,
        title: Some(title),
        ..base.clone()
    }
}

struct Layer {
    stem: String,
    title: String,
    error_map: bool,
    points: Vec<(usize, f64, Map<String, Value>)>,
}

fn render(layer: Layer, locations: &[Location], ids: &[usize], cfg: &MapConfig, extent: BoundingBox) -> Result<MapFile> {
    let base = if layer.error_map { MapStyle::rank_errors() } else { MapStyle::ranks() };
    let st = MapStyle { extent, ..style(&base, cfg, layer.title) };
    let locs: Vec<Location> = layer.points.iter().map(|(i, _, _)| locations[*i]).collect();
    let vals: Vec<f64> = layer.points.iter().map(|(_, v, _)| *v).collect();
    let props: Vec<Map<String, Value>> = layer
        .points
        .into_iter()
        .map(|(i, _, mut p)| {
            p.insert("location_id".into(), json!(ids[i]));
            p
        })
        .collect();
    let svg = if layer.error_map { plot_rank_error(&locs, &vals, &st) } else { plot_points(&locs, &vals, &st) }
        .map_err(|e| Error::data(format!("{}: {e}", layer.stem)))?;
    Ok(MapFile { geojson: export_geojson(&locs, &vals, &props)?, svg, stem: layer.stem })
}

fn masked_ranks(values: &[Option<f64>]) -> Result<Option<Vec<Option<f64>>>> {
    match ranks_with_mask(values) {
        Ok(r) => Ok(Some(r)),
        Err(MetricsError::TooFew { .. }) => Ok(None),
        Err(e) => Err(Error::data(e.to_string())),
    }
}

fn restrict(values: &[Option<f64>], mask: &[Option<f64>]) -> Vec<Option<f64>> {
    values.iter().zip(mask).map(|(v, m)| m.and(*v)).collect()
}

fn error_points(model: &[Option<f64>], truth: &[Option<f64>]) -> Vec<(usize, f64, Map<String, Value>)> {
    model
        .iter()
        .zip(truth)
        .enumerate()
        .filter_map(|(i, (m, t))| Some((i, (*m)? - (*t)?, Map::new())))
        .collect()
}

/// Data behind a set of maps, all aligned to `locations`.
#[derive(Debug, Clone, Copy)]
pub struct MapInputs<'a> {
    pub models: &'a [String],
    pub topics: &'a [TopicConfig],
    pub locations: &'a [Location],
    pub ids: &'a [usize],
    /// Full-prompt ratings keyed by (model, topic).
    pub ratings: &'a BTreeMap<(String, String), Vec<Option<f64>>>,
    pub truth: &'a BTreeMap<String, Vec<Option<f64>>>,
}

/// Every map for the full-prompt ratings.
///
/// Per model and topic: a rank map and, for objective topics, a rank-error
/// map. With two or more models, a mean-rank map per topic and a mean
/// rank-error map per objective topic.
pub fn build_maps(input: &MapInputs<'_>, cfg: &MapConfig, extent: BoundingBox) -> Result<Vec<MapFile>> {
    let MapInputs { models, topics, locations, ids, ratings, truth } = *input;
    let mut out = Vec::new();
    for topic in topics {
        let tslug = slug(&topic.name);
        let truth_vals = truth.get(&topic.name).filter(|_| topic.kind == TopicKind::Objective);
        let mut per_model = Vec::new();
        for model in models {
            let Some(values) = ratings.get(&(model.clone(), topic.name.clone())) else { continue };
            let Some(ranks) = masked_ranks(values)? else { continue };
            let points = ranks.iter().enumerate().filter_map(|(i, r)| Some((i, (*r)?, Map::new()))).collect();
            let mslug = slug(model);
            out.push(render(
                Layer { stem: format!("{mslug}_{tslug}_rank"), title: format!("{model}: {}", topic.name), error_map: false, points },
                locations,
                ids,
                cfg,
                extent,
            )?);
            if let Some(t) = truth_vals {
                // Both rankings over the locations where the model answered
                // and ground truth exists.
                let shared: Vec<Option<f64>> = values.iter().zip(t).map(|(v, t)| v.and(*t)).collect();
                if let (Some(m), Some(tr)) = (masked_ranks(&restrict(values, &shared))?, masked_ranks(&restrict(t, &shared))?) {
                    out.push(render(
                        Layer {
                            stem: format!("{mslug}_{tslug}_rank-error"),
                            title: format!("{model}: {} rank error", topic.name),
                            error_map: true,
                            points: error_points(&m, &tr),
                        },
                        locations,
                        ids,
                        cfg,
                        extent,
                    )?);
                }
            }
            per_model.push(ranks);
        }
        if per_model.len() < 2 {
            continue;
        }
        let mean = mean_rank(&per_model).map_err(|e| Error::data(e.to_string()))?;
        let points = mean
            .iter()
            .enumerate()
            .filter_map(|(i, m)| {
                let mut p = Map::new();
                p.insert("coverage".into(), json!(m.coverage));
                Some((i, m.value?, p))
            })
            .collect();
        out.push(render(
            Layer { stem: format!("mean_{tslug}_rank"), title: format!("Mean rank: {}", topic.name), error_map: false, points },
            locations,
            ids,
            cfg,
            extent,
        )?);
        if let Some(t) = truth_vals {
            let mean_vals: Vec<Option<f64>> = mean.iter().map(|m| m.value).collect();
            let shared: Vec<Option<f64>> = mean_vals.iter().zip(t).map(|(v, t)| v.and(*t)).collect();
            if let (Some(m), Some(tr)) =
                (masked_ranks(&restrict(&mean_vals, &shared))?, masked_ranks(&restrict(t, &shared))?)
            {
                out.push(render(
                    Layer {
                        stem: format!("mean_{tslug}_rank-error"),
                        title: format!("Mean rank error: {}", topic.name),
                        error_map: true,
                        points: error_points(&m, &tr),
                    },
                    locations,
                    ids,
                    cfg,
                    extent,
                )?);
            }
        }
    }
    Ok(out)
}
