//! Run configuration, read from a single TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. API keys never appear here: HTTP models name the environment
//! variable that holds theirs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use geobias_core::prompt::PromptFlags;
use geobias_core::svg::Background;
use geobias_core::{AddressMode, BoundingBox, SamplePlan};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gazetteer: GazetteerConfig,
    pub sample: SampleConfig,
    #[serde(default)]
    pub topics: Vec<TopicConfig>,
    #[serde(default)]
    pub anchor: Option<AnchorConfig>,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub map: MapConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub name: ColumnRef,
    pub latitude: ColumnRef,
    pub longitude: ColumnRef,
    #[serde(default)]
    pub population: Option<ColumnRef>,
    /// Address components, most local first, country last.
    #[serde(default)]
    pub admin: Vec<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazetteerConfig {
    pub path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Honor double-quoted fields. Defaults to off for tab-separated files,
    /// which commonly contain bare quote characters.
    #[serde(default)]
    pub quoting: Option<bool>,
    pub columns: ColumnMap,
}

fn default_delimiter() -> char {
    '\t'
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub density: PathBuf,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pool_multiplier")]
    pub pool_multiplier: usize,
    #[serde(default = "default_max_pool")]
    pub max_pool: usize,
    /// `[min_lat, min_lon, max_lat, max_lon]`.
    #[serde(default)]
    pub region: Option<[f64; 4]>,
}

fn default_n_points() -> usize {
    2000
}

fn default_pool_multiplier() -> usize {
    10
}

fn default_max_pool() -> usize {
    5_000_000
}

impl SampleConfig {
    pub fn plan(&self) -> Result<SamplePlan> {
        let region = self.region.map(bbox).transpose()?;
        Ok(SamplePlan {
            n_points: self.n_points,
            seed: self.seed,
            pool_multiplier: self.pool_multiplier,
            region,
            max_pool: self.max_pool,
        })
    }
}

pub fn bbox(r: [f64; 4]) -> Result<BoundingBox> {
    BoundingBox::new(r[0], r[1], r[2], r[3]).map_err(|e| Error::config(format!("region: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicKind {
    Sensitive,
    Objective,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicConfig {
    pub name: String,
    pub kind: TopicKind,
    /// Ground-truth raster; required for objective topics.
    #[serde(default)]
    pub raster: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    /// Name of the anchoring distribution. When it matches an objective
    /// topic with a raster and neither `raster` nor `series` is set, that
    /// raster is used.
    pub topic: String,
    #[serde(default = "default_true")]
    pub higher_is_better: bool,
    #[serde(default)]
    pub raster: Option<PathBuf>,
    /// CSV with columns `location_id,value`, aligned to `locations.csv`.
    #[serde(default)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoCoordinates,
    NoNearby,
    NoAddress,
    LastTwoAddress,
}

impl Variant {
    pub const ABLATIONS: [Variant; 4] =
        [Variant::NoCoordinates, Variant::NoNearby, Variant::NoAddress, Variant::LastTwoAddress];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoCoordinates => "no_coordinates",
            Variant::NoNearby => "no_nearby",
            Variant::NoAddress => "no_address",
            Variant::LastTwoAddress => "last_two_address",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        [Variant::Full].into_iter().chain(Variant::ABLATIONS).find(|v| v.as_str() == s)
    }

    pub fn flags(self, k_nearby: usize) -> PromptFlags {
        let mut f = PromptFlags { k_nearby, ..PromptFlags::default() };
        match self {
            Variant::Full => {}
            Variant::NoCoordinates => f.include_coordinates = false,
            Variant::NoNearby => f.include_nearby = false,
            Variant::NoAddress => f.include_address = false,
            Variant::LastTwoAddress => f.address_mode = AddressMode::LastTwo,
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default = "default_k_nearby")]
    pub k_nearby: usize,
    /// Extra prompt variants rendered besides the full prompt.
    #[serde(default)]
    pub ablations: Vec<Variant>,
}

fn default_k_nearby() -> usize {
    10
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { k_nearby: default_k_nearby(), ablations: Vec::new() }
    }
}

impl PromptConfig {
    /// `Full` first, then the configured ablations without duplicates.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = vec![Variant::Full];
        for v in &self.ablations {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingMode {
    #[default]
    Greedy,
    #[serde(alias = "expected_value")]
    Ev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    /// Delay before each retry; the last entry repeats.
    #[serde(default = "default_backoff")]
    pub backoff_ms: Vec<u64>,
}

fn default_attempts() -> u32 {
    4
}

fn default_backoff() -> Vec<u64> {
    vec![500, 2000, 8000]
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: default_attempts(), backoff_ms: default_backoff() }
    }
}

impl RetryPolicy {
    pub fn delay_ms(&self, retry: usize) -> u64 {
        match self.backoff_ms.as_slice() {
            [] => 0,
            d => d[retry.min(d.len() - 1)],
        }
    }
}

/// What drives a stub model's rating at a location.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubSignal {
    /// The topic's ground truth, or the anchor for topics without a raster.
    #[default]
    Truth,
    Latitude,
    /// Always this rating.
    Constant(f64),
    /// Never answers.
    Refuse,
}

/// Transform applied to a stub's truth or latitude signal across the
/// sampled locations before the rating rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalTransform {
    #[default]
    Identity,
    /// Scaled fractional rank in `[0, 1]`.
    Rank,
    /// Standard normal quantile of `(rank - 0.5) / n`.
    NormalScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Http {
        base_url: String,
        #[serde(default = "default_path")]
        path: String,
        /// Model identifier sent to the endpoint; defaults to the model name.
        #[serde(default)]
        remote_model: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        supports_logprobs: bool,
        #[serde(default = "default_timeout")]
        timeout_s: u64,
        /// Extra top-level request fields, merged into every request body.
        #[serde(default)]
        payload: serde_json::Map<String, serde_json::Value>,
    },
    Stub {
        #[serde(default)]
        signal: StubSignal,
        /// Per-topic signal overrides.
        #[serde(default)]
        topic_signals: BTreeMap<String, StubSignal>,
        #[serde(default)]
        transform: SignalTransform,
        #[serde(default = "default_weight")]
        weight: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        noise_sigma: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_true")]
        supports_logprobs: bool,
    },
}

fn default_path() -> String {
    "/v1/chat/completions".into()
}

fn default_timeout() -> u64 {
    120
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub mode: RatingMode,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(flatten)]
    pub backend: BackendConfig,
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default)]
    pub background: Background,
    #[serde(default = "default_radius")]
    pub point_radius: f64,
    #[serde(default = "default_width")]
    pub width_px: f64,
    /// Map extent; defaults to the sampling region, then the whole world.
    #[serde(default)]
    pub extent: Option<[f64; 4]>,
}

fn default_radius() -> f64 {
    2.5
}

fn default_width() -> f64 {
    1000.0
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { background: Background::Light, point_radius: default_radius(), width_px: default_width(), extent: None }
    }
}

impl RunConfig {
    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.gazetteer.path);
        fix(&mut self.sample.density);
        for t in &mut self.topics {
            if let Some(p) = &mut t.raster {
                fix(p);
            }
        }
        if let Some(a) = &mut self.anchor {
            if let Some(p) = &mut a.raster {
                fix(p);
            }
            if let Some(p) = &mut a.series {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} file not found: {}", p.display())))
            }
        };
        must_exist("gazetteer", &self.gazetteer.path)?;
        must_exist("density raster", &self.sample.density)?;
        self.sample.plan()?.pool_size().map_err(|e| Error::config(format!("sample: {e}")))?;
        if let Some(r) = self.map.extent {
            bbox(r)?;
        }
        if self.prompt.k_nearby == 0 {
            return Err(Error::config("prompt.k_nearby must be at least 1"));
        }
        if self.topics.is_empty() {
            return Err(Error::config("no topics configured"));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.topics {
            if t.name.trim().is_empty() {
                return Err(Error::config("topic with empty name"));
            }
            if !seen.insert(slug(&t.name)) {
                return Err(Error::config(format!("duplicate topic: {}", t.name)));
            }
            match (&t.raster, t.kind) {
                (Some(p), _) => must_exist(&format!("raster for {:?}", t.name), p)?,
                (None, TopicKind::Objective) => {
                    return Err(Error::config(format!("objective topic {:?} needs a raster", t.name)))
                }
                (None, _) => {}
            }
        }
        if let Some(a) = &self.anchor {
            match (&a.raster, &a.series) {
                (Some(_), Some(_)) => return Err(Error::config("anchor: set raster or series, not both")),
                (Some(p), None) => must_exist("anchor raster", p)?,
                (None, Some(p)) => must_exist("anchor series", p)?,
                (None, None) => {
                    if self.anchor_raster().is_none() {
                        return Err(Error::config(format!("anchor {:?} has no raster or series", a.topic)));
                    }
                }
            }
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if m.name.trim().is_empty() {
                return Err(Error::config("model with empty name"));
            }
            if !names.insert(slug(&m.name)) {
                return Err(Error::config(format!("duplicate model: {}", m.name)));
            }
            if m.max_in_flight == 0 {
                return Err(Error::config(format!("model {}: max_in_flight must be at least 1", m.name)));
            }
            if m.retry.max_attempts == 0 {
                return Err(Error::config(format!("model {}: retry.max_attempts must be at least 1", m.name)));
            }
        }
        Ok(())
    }

    pub fn topic(&self, name: &str) -> Option<&TopicConfig> {
        self.topics.iter().find(|t| t.name == name)
    }

    /// Raster backing the anchor, if it has one.
    pub fn anchor_raster(&self) -> Option<&Path> {
        let a = self.anchor.as_ref()?;
        if a.series.is_some() {
            return None;
        }
        a.raster.as_deref().or_else(|| self.topic(&a.topic).and_then(|t| t.raster.as_deref()))
    }

    pub fn map_extent(&self) -> Result<BoundingBox> {
        match self.map.extent.or(self.sample.region) {
            Some(r) => bbox(r),
            None => Ok(geobias_core::svg::MapStyle::WORLD),
        }
    }
}

/// Lowercase ASCII alphanumerics with single hyphens, for file names.
pub fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

/// Reads a file's bytes, mapping failures to IO errors at `path`.
pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).at(path)
}
