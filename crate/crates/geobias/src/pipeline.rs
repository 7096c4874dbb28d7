//! The staged pipeline over a run directory.
//!
//! Layout:
//!
//! ```text
//! locations.csv           sample
//! prompts/<topic>.jsonl   gen-prompts
//! responses.jsonl         query (response cache, append-only)
//! ratings.csv             query
//! ground_truth.csv        eval
//! report.json, report.md  eval
//! tables/*.csv            eval
//! maps/*.svg, *.geojson   map
//! manifest.json           input fingerprints of completed stages
//! ```
//!
//! A stage whose recorded fingerprint matches its current inputs is skipped.
//! A stage whose inputs changed is refused, so earlier results are never
//! overwritten; start a new run directory instead.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use geobias_core::hash::{content_hash, ContentHasher};
use geobias_core::{
    farthest_point_sample, fractional_rank, haversine_km, render_prompt, sample_raster, weighted_candidates,
    AnchorSeries, Location, PromptSpec, RasterLayer,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{
    read_bytes, slug, BackendConfig, RatingMode, RunConfig, SignalTransform, StubSignal, Variant,
};
use crate::error::{Error, IoContext, Result};
use crate::eval::{align_ratings, evaluate, markdown, tables, Report};
use crate::gazetteer::load_gazetteer;
use crate::llm::{run_topic, ChatBackend, HttpBackend, HttpEndpoint, ResponseCache, StubBackend};
use crate::maps::{build_maps, MapInputs};
use crate::raster_io::load_raster;
use crate::records::{
    read_csv, read_json, read_jsonl, write_csv, write_json, write_jsonl, LocationRow, PromptRecord, RatingRow,
    SeriesRow, TruthRow,
};

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn locations(&self) -> PathBuf {
        self.root.join("locations.csv")
    }

    pub fn prompts_dir(&self) -> PathBuf {
        self.root.join("prompts")
    }

    pub fn prompts(&self, topic: &str) -> PathBuf {
        self.prompts_dir().join(format!("{}.jsonl", slug(topic)))
    }

    pub fn responses(&self) -> PathBuf {
        self.root.join("responses.jsonl")
    }

    pub fn ratings(&self) -> PathBuf {
        self.root.join("ratings.csv")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("ground_truth.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_md(&self) -> PathBuf {
        self.root.join("report.md")
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.root.join("tables")
    }

    pub fn maps_dir(&self) -> PathBuf {
        self.root.join("maps")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().into_owned()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Fingerprint of everything the stage read.
    pub inputs: String,
    /// Files written, relative to the run directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

fn load_manifest(dir: &RunDir) -> Result<Manifest> {
    let p = dir.manifest();
    if p.exists() {
        read_json(&p)
    } else {
        Ok(Manifest::default())
    }
}

/// Runs `body` unless the manifest already records `stage` with the same
/// input fingerprint and its outputs are present.
fn run_stage(dir: &RunDir, stage: &str, inputs: String, body: impl FnOnce() -> Result<Vec<PathBuf>>) -> Result<StageStatus> {
    fs::create_dir_all(dir.root()).at(dir.root())?;
    if let Some(rec) = load_manifest(dir)?.stages.get(stage) {
        let present = rec.outputs.iter().all(|o| dir.root().join(o).exists());
        if rec.inputs == inputs && present {
            info!("{stage}: up to date");
            return Ok(StageStatus::UpToDate);
        }
        if rec.inputs != inputs {
            return Err(Error::config(format!(
                "{stage} already completed in {} with different inputs; use a new run directory",
                dir.root().display()
            )));
        }
    }
    let outputs = body()?;
    let mut manifest = load_manifest(dir)?;
    manifest
        .stages
        .insert(stage.to_string(), StageRecord { inputs, outputs: outputs.iter().map(|p| dir.rel(p)).collect() });
    write_json(&dir.manifest(), &manifest)?;
    Ok(StageStatus::Ran)
}

fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = ContentHasher::new();
    for p in parts {
        h.field(p);
    }
    h.finish()
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("config serializes")
}

fn file_hash(path: &Path) -> Result<Vec<u8>> {
    Ok(content_hash(&read_bytes(path)?).into_bytes())
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::data(format!("{} is missing; run `{stage}` first", path.display())))
    }
}

/// Summary printed after sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStats {
    pub n: usize,
    pub min_pairwise_km: f64,
    pub mean_nearest_km: f64,
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
}

pub fn coverage_stats(locs: &[Location]) -> CoverageStats {
    let n = locs.len();
    let mut nearest = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = haversine_km(locs[i], locs[j]);
            nearest[i] = nearest[i].min(d);
            nearest[j] = nearest[j].min(d);
        }
    }
    let fold = |f: fn(&Location) -> f64| {
        locs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    CoverageStats {
        n,
        min_pairwise_km: nearest.iter().copied().fold(f64::INFINITY, f64::min),
        mean_nearest_km: nearest.iter().sum::<f64>() / n.max(1) as f64,
        lat_range: fold(Location::lat),
        lon_range: fold(Location::lon),
    }
}

/// Draws the density-weighted pool, thins it by farthest-point sampling and
/// writes `locations.csv`.
pub fn cmd_sample(cfg: &RunConfig, dir: &RunDir) -> Result<StageStatus> {
    let plan = cfg.sample.plan()?;
    let inputs = fingerprint(&[&json_bytes(&plan), &file_hash(&cfg.sample.density)?]);
    run_stage(dir, "sample", inputs, || {
        let density = load_raster(&cfg.sample.density)?;
        let pool = weighted_candidates(&density, &plan).map_err(|e| Error::data(format!("sample: {e}")))?;
        let chosen =
            farthest_point_sample(&pool, plan.n_points).map_err(|e| Error::data(format!("sample: {e}")))?;
        let rows: Vec<LocationRow> = chosen
            .iter()
            .enumerate()
            .map(|(id, &i)| LocationRow {
                id,
                lat: pool[i].location.lat(),
                lon: pool[i].location.lon(),
                density_weight: pool[i].weight,
            })
            .collect();
        write_csv(&dir.locations(), &rows)?;
        let locs: Vec<Location> = chosen.iter().map(|&i| pool[i].location).collect();
        let s = coverage_stats(&locs);
        println!(
            "sampled {} locations from a pool of {}; min pairwise distance {:.1} km; mean nearest-neighbor distance {:.1} km; latitude {:.2}..{:.2}; longitude {:.2}..{:.2}",
            s.n, pool.len(), s.min_pairwise_km, s.mean_nearest_km, s.lat_range.0, s.lat_range.1, s.lon_range.0, s.lon_range.1
        );
        Ok(vec![dir.locations()])
    })
}

fn load_locations(dir: &RunDir) -> Result<Vec<LocationRow>> {
    require(&dir.locations(), "sample")?;
    let rows: Vec<LocationRow> = read_csv(&dir.locations())?;
    if rows.is_empty() {
        return Err(Error::data("locations.csv has no rows"));
    }
    Ok(rows)
}

/// Renders one prompt per (location, topic, variant) into
/// `prompts/<topic>.jsonl`.
pub fn cmd_gen_prompts(cfg: &RunConfig, dir: &RunDir) -> Result<StageStatus> {
    require(&dir.locations(), "sample")?;
    let topics: Vec<&str> = cfg.topics.iter().map(|t| t.name.as_str()).collect();
    let inputs = fingerprint(&[
        &file_hash(&dir.locations())?,
        &file_hash(&cfg.gazetteer.path)?,
        &json_bytes(&cfg.gazetteer),
        &json_bytes(&cfg.prompt),
        &json_bytes(&topics),
    ]);
    run_stage(dir, "gen-prompts", inputs, || {
        let locations = load_locations(dir)?;
        let gaz = load_gazetteer(&cfg.gazetteer)?;
        info!("gazetteer: {} places", gaz.index.len());
        fs::create_dir_all(dir.prompts_dir()).at(&dir.prompts_dir())?;
        let variants = cfg.prompt.variants();
        let mut outputs = Vec::new();
        let mut total = 0;
        for topic in &cfg.topics {
            let mut records = Vec::with_capacity(locations.len() * variants.len());
            for &variant in &variants {
                for row in &locations {
                    let location = row.location()?;
                    let spec =
                        PromptSpec { topic: topic.name.clone(), location, flags: variant.flags(cfg.prompt.k_nearby) };
                    let p = render_prompt(&spec, &gaz.index)
                        .map_err(|e| Error::data(format!("{} at location {}: {e}", topic.name, row.id)))?;
                    records.push(PromptRecord {
                        id: p.id,
                        topic: topic.name.clone(),
                        variant,
                        location_id: row.id,
                        lat: row.lat,
                        lon: row.lon,
                        flags: spec.flags,
                        text: p.text,
                    });
                }
            }
            total += records.len();
            let path = dir.prompts(&topic.name);
            write_jsonl(&path, &records)?;
            outputs.push(path);
        }
        println!("wrote {total} prompts for {} topics and {} variants", cfg.topics.len(), variants.len());
        Ok(outputs)
    })
}

/// Ground truth per topic with a raster, aligned to `locations`.
pub fn ground_truth(cfg: &RunConfig, locations: &[LocationRow]) -> Result<BTreeMap<String, Vec<Option<f64>>>> {
    let locs = locations.iter().map(LocationRow::location).collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for t in &cfg.topics {
        if let Some(p) = &t.raster {
            let layer = load_raster(p)?;
            out.insert(t.name.clone(), sample_at(&layer, &locs));
        }
    }
    Ok(out)
}

fn sample_at(layer: &RasterLayer, locs: &[Location]) -> Vec<Option<f64>> {
    locs.iter().map(|l| sample_raster(layer, *l)).collect()
}

/// The anchoring distribution aligned to `locations`, if configured.
pub fn anchor_series(
    cfg: &RunConfig,
    locations: &[LocationRow],
    truth: &BTreeMap<String, Vec<Option<f64>>>,
) -> Result<Option<AnchorSeries>> {
    let Some(a) = &cfg.anchor else { return Ok(None) };
    let values = if let Some(series) = &a.series {
        let rows: Vec<SeriesRow> = read_csv(series)?;
        let by_id: HashMap<usize, Option<f64>> = rows.iter().map(|r| (r.location_id, r.value)).collect();
        locations.iter().map(|l| by_id.get(&l.id).copied().flatten()).collect()
    } else if let (None, Some(v)) = (&a.raster, truth.get(&a.topic)) {
        v.clone()
    } else {
        let path = cfg.anchor_raster().ok_or_else(|| Error::config("anchor has no raster or series"))?;
        let locs = locations.iter().map(LocationRow::location).collect::<Result<Vec<_>>>()?;
        sample_at(&load_raster(path)?, &locs)
    };
    Ok(Some(AnchorSeries { name: a.topic.clone(), values, higher_is_better: a.higher_is_better }))
}

fn transform(values: &[Option<f64>], t: SignalTransform) -> Vec<Option<f64>> {
    if t == SignalTransform::Identity {
        return values.to_vec();
    }
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let Ok(ranks) = fractional_rank(&present) else { return values.to_vec() };
    let n = present.len() as f64;
    let mapped: Vec<f64> = match t {
        SignalTransform::Rank => ranks.scaled(),
        _ => ranks.ranks().iter().map(|r| inverse_normal_cdf((r - 0.5) / n)).collect(),
    };
    let mut it = mapped.into_iter();
    values.iter().map(|v| v.and_then(|_| it.next())).collect()
}

/// Standard normal quantile.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

/// Signals per topic for a stub model, keyed by location id.
fn stub_signals(
    cfg: &RunConfig,
    model: &str,
    signal: StubSignal,
    topic_signals: &BTreeMap<String, StubSignal>,
    xform: SignalTransform,
    locations: &[LocationRow],
) -> Result<HashMap<String, StubRule>> {
    let mut truth: Option<BTreeMap<String, Vec<Option<f64>>>> = None;
    let mut anchor: Option<Option<AnchorSeries>> = None;
    let mut rules = HashMap::new();
    for t in &cfg.topics {
        let s = topic_signals.get(&t.name).copied().unwrap_or(signal);
        let rule = match s {
            StubSignal::Constant(c) => StubRule::Constant(c),
            StubSignal::Refuse => StubRule::Refuse,
            StubSignal::Latitude => StubRule::Signal(transform(&locations.iter().map(|l| Some(l.lat)).collect::<Vec<_>>(), xform)),
            StubSignal::Truth => {
                let truth = match &truth {
                    Some(t) => t,
                    None => truth.insert(ground_truth(cfg, locations)?),
                };
                let values = match truth.get(&t.name) {
                    Some(v) => v.clone(),
                    None => {
                        let a = match &anchor {
                            Some(a) => a,
                            None => anchor.insert(anchor_series(cfg, locations, truth)?),
                        };
                        let a = a.as_ref().ok_or_else(|| {
                            Error::config(format!("stub {model}: topic {:?} has no raster and no anchor is set", t.name))
                        })?;
                        (0..locations.len()).map(|i| a.oriented(i)).collect()
                    }
                };
                StubRule::Signal(transform(&values, xform))
            }
        };
        rules.insert(t.name.clone(), rule);
    }
    Ok(rules)
}

enum StubRule {
    Constant(f64),
    Refuse,
    /// Aligned to the location list.
    Signal(Vec<Option<f64>>),
}

fn backend(cfg: &RunConfig, model: &crate::config::ModelConfig, locations: &[LocationRow]) -> Result<Box<dyn ChatBackend>> {
    match &model.backend {
        BackendConfig::Http { base_url, path, remote_model, api_key_env, supports_logprobs, timeout_s, payload } => {
            let api_key = match api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    Error::config(format!("model {}: environment variable {var} is not set", model.name))
                })?),
                None => None,
            };
            Ok(Box::new(HttpBackend::new(HttpEndpoint {
                model: model.name.clone(),
                base_url: base_url.clone(),
                path: path.clone(),
                remote_model: remote_model.clone(),
                api_key,
                supports_logprobs: *supports_logprobs,
                timeout: Duration::from_secs(*timeout_s),
                payload: payload.clone(),
            })))
        }
        BackendConfig::Stub { signal, topic_signals, transform, weight, center, noise_sigma, seed, supports_logprobs } => {
            let rules = Arc::new(stub_signals(cfg, &model.name, *signal, topic_signals, *transform, locations)?);
            let pos: Arc<HashMap<usize, usize>> = Arc::new(locations.iter().enumerate().map(|(i, l)| (l.id, i)).collect());
            let params = geobias_core::stub::StubParams { weight: *weight, center: *center, noise_sigma: *noise_sigma, seed: *seed };
            Ok(Box::new(StubBackend::new(model.name.clone(), *supports_logprobs, move |p: &PromptRecord| {
                match rules.get(&p.topic)? {
                    StubRule::Constant(c) => Some(*c),
                    StubRule::Refuse => None,
                    StubRule::Signal(v) => {
                        let s = (*v.get(*pos.get(&p.location_id)?)?)?;
                        Some(geobias_core::stub::stub_rating(&params, s, &p.id))
                    }
                }
            })))
        }
    }
}

fn query_inputs(cfg: &RunConfig, dir: &RunDir) -> Result<String> {
    let mut parts: Vec<Vec<u8>> = vec![json_bytes(&cfg.models), json_bytes(&cfg.topics), json_bytes(&cfg.anchor)];
    for t in &cfg.topics {
        parts.push(file_hash(&dir.prompts(&t.name))?);
        if let Some(r) = &t.raster {
            parts.push(file_hash(r)?);
        }
    }
    if let Some(p) = cfg.anchor.as_ref().and_then(|a| a.raster.as_ref().or(a.series.as_ref())) {
        parts.push(file_hash(p)?);
    }
    Ok(fingerprint(&parts.iter().map(Vec::as_slice).collect::<Vec<_>>()))
}

/// Queries every model on every prompt, caching responses, and writes
/// `ratings.csv`.
pub fn cmd_query(cfg: &RunConfig, dir: &RunDir) -> Result<StageStatus> {
    if cfg.models.is_empty() {
        return Err(Error::config("no models configured"));
    }
    for t in &cfg.topics {
        require(&dir.prompts(&t.name), "gen-prompts")?;
    }
    let inputs = query_inputs(cfg, dir)?;
    run_stage(dir, "query", inputs, || {
        let locations = load_locations(dir)?;
        let cache = ResponseCache::open(&dir.responses())?;
        let mut prompts: Vec<(String, Vec<PromptRecord>)> = Vec::new();
        for t in &cfg.topics {
            prompts.push((t.name.clone(), read_jsonl(&dir.prompts(&t.name))?));
        }
        let mut rows = Vec::new();
        for model in &cfg.models {
            let b = backend(cfg, model, &locations)?;
            for (topic, records) in &prompts {
                let mut by_variant: BTreeMap<Variant, Vec<PromptRecord>> = BTreeMap::new();
                for r in records {
                    by_variant.entry(r.variant).or_default().push(r.clone());
                }
                for (variant, batch) in by_variant {
                    let run = run_topic(b.as_ref(), &batch, model.mode, &model.retry, model.max_in_flight, &cache)?;
                    println!(
                        "{} / {topic} ({}): answer rate {:.3}",
                        model.name,
                        variant.as_str(),
                        run.series.answer_rate()
                    );
                    for (p, r) in batch.iter().zip(run.responses) {
                        rows.push(RatingRow {
                            model: model.name.clone(),
                            topic: topic.clone(),
                            variant,
                            mode: model.mode,
                            location_id: p.location_id,
                            lat: p.lat,
                            lon: p.lon,
                            rating: r.parsed_rating,
                            source: r.source,
                            digit_mass: r.digit_mass,
                            prompt_id: p.id.clone(),
                        });
                    }
                }
            }
        }
        write_csv(&dir.ratings(), &rows)?;
        Ok(vec![dir.ratings(), dir.responses()])
    })
}

fn eval_inputs(cfg: &RunConfig, dir: &RunDir) -> Result<String> {
    let models: Vec<&str> = cfg.models.iter().map(|m| m.name.as_str()).collect();
    let mut parts: Vec<Vec<u8>> = vec![
        file_hash(&dir.ratings())?,
        file_hash(&dir.locations())?,
        json_bytes(&models),
        json_bytes(&cfg.topics),
        json_bytes(&cfg.anchor),
    ];
    for t in &cfg.topics {
        if let Some(r) = &t.raster {
            parts.push(file_hash(r)?);
        }
    }
    if let Some(p) = cfg.anchor.as_ref().and_then(|a| a.raster.as_ref().or(a.series.as_ref())) {
        parts.push(file_hash(p)?);
    }
    Ok(fingerprint(&parts.iter().map(Vec::as_slice).collect::<Vec<_>>()))
}

/// Model order for tables: configured models first, then any others found
/// in the ratings.
fn model_order(cfg: &RunConfig, rows: &[RatingRow]) -> Vec<String> {
    let mut models: Vec<String> = cfg.models.iter().map(|m| m.name.clone()).collect();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    models
}

/// Computes metrics and writes `ground_truth.csv`, `report.json`,
/// `report.md` and `tables/`.
pub fn cmd_eval(cfg: &RunConfig, dir: &RunDir) -> Result<StageStatus> {
    require(&dir.ratings(), "query")?;
    let inputs = eval_inputs(cfg, dir)?;
    run_stage(dir, "eval", inputs, || {
        let locations = load_locations(dir)?;
        let rows: Vec<RatingRow> = read_csv(&dir.ratings())?;
        if rows.is_empty() {
            return Err(Error::data("ratings.csv has no rows"));
        }
        let table = align_ratings(&locations, &rows)?;
        let truth = ground_truth(cfg, &locations)?;
        let anchor = anchor_series(cfg, &locations, &truth)?;
        let truth_rows: Vec<TruthRow> = truth
            .iter()
            .chain(anchor.iter().filter(|a| !truth.contains_key(&a.name)).map(|a| (&a.name, &a.values)))
            .flat_map(|(topic, vals)| {
                locations.iter().zip(vals).map(|(l, v)| TruthRow { location_id: l.id, topic: topic.clone(), value: *v })
            })
            .collect();
        write_csv(&dir.ground_truth(), &truth_rows)?;
        let report = evaluate(&model_order(cfg, &rows), &cfg.topics, &locations, &table, &truth, anchor.as_ref())?;
        write_json(&dir.report(), &report)?;
        let md = markdown(&report);
        fs::write(dir.report_md(), &md).at(&dir.report_md())?;
        let tdir = dir.tables_dir();
        fs::create_dir_all(&tdir).at(&tdir)?;
        let mut outputs = vec![dir.ground_truth(), dir.report(), dir.report_md()];
        for t in tables(&report) {
            let p = tdir.join(&t.file);
            fs::write(&p, t.to_csv()).at(&p)?;
            outputs.push(p);
        }
        print!("{md}");
        Ok(outputs)
    })
}

/// Renders rank, rank-error and mean-rank maps into `maps/`.
pub fn cmd_map(cfg: &RunConfig, dir: &RunDir) -> Result<StageStatus> {
    require(&dir.report(), "eval")?;
    let extent = cfg.map_extent()?;
    let inputs = fingerprint(&[
        &file_hash(&dir.ratings())?,
        &file_hash(&dir.ground_truth())?,
        &json_bytes(&cfg.map),
        &json_bytes(&extent),
        &json_bytes(&cfg.topics),
    ]);
    run_stage(dir, "map", inputs, || {
        let locations = load_locations(dir)?;
        let rows: Vec<RatingRow> = read_csv(&dir.ratings())?;
        let full: Vec<RatingRow> = rows.iter().filter(|r| r.variant == Variant::Full).cloned().collect();
        let ratings: BTreeMap<(String, String), Vec<Option<f64>>> =
            align_ratings(&locations, &full)?.into_iter().map(|((m, t, _), v)| ((m, t), v)).collect();
        let pos: HashMap<usize, usize> = locations.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
        let mut truth: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for r in read_csv::<TruthRow>(&dir.ground_truth())? {
            if let Some(&i) = pos.get(&r.location_id) {
                truth.entry(r.topic).or_insert_with(|| vec![None; locations.len()])[i] = r.value;
            }
        }
        let locs = locations.iter().map(LocationRow::location).collect::<Result<Vec<_>>>()?;
        let ids: Vec<usize> = locations.iter().map(|l| l.id).collect();
        let models = model_order(cfg, &rows);
        let input =
            MapInputs { models: &models, topics: &cfg.topics, locations: &locs, ids: &ids, ratings: &ratings, truth: &truth };
        let maps = build_maps(&input, &cfg.map, extent)?;
        let mdir = dir.maps_dir();
        fs::create_dir_all(&mdir).at(&mdir)?;
        let mut outputs = Vec::new();
        for m in &maps {
            for (ext, body) in [("svg", &m.svg), ("geojson", &m.geojson)] {
                let p = mdir.join(format!("{}.{ext}", m.stem));
                fs::write(&p, body).at(&p)?;
                outputs.push(p);
            }
        }
        println!("wrote {} maps to {}", maps.len(), mdir.display());
        Ok(outputs)
    })
}

/// Prints the tables of a finished evaluation.
pub fn cmd_report(dir: &RunDir) -> Result<String> {
    require(&dir.report(), "eval")?;
    let report: Report = read_json(&dir.report())?;
    Ok(markdown(&report))
}

/// Command-line overrides of configuration values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub region: Option<[f64; 4]>,
    pub mode: Option<RatingMode>,
    pub ablations: Option<Vec<Variant>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.sample.seed = s;
        }
        if let Some(r) = self.region {
            crate::config::bbox(r)?;
            cfg.sample.region = Some(r);
        }
        if let Some(m) = self.mode {
            for model in &mut cfg.models {
                model.mode = m;
            }
        }
        if let Some(a) = &self.ablations {
            cfg.prompt.ablations = a.clone();
        }
        Ok(())
    }
}
