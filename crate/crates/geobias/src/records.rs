//! Row types of the files in a run directory, with readers and writers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use geobias_core::prompt::PromptFlags;
use geobias_core::Location;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{RatingMode, Variant};
use crate::error::{Error, IoContext, Result};

/// One row of `locations.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationRow {
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
    pub density_weight: f64,
}

impl LocationRow {
    pub fn location(&self) -> Result<Location> {
        Location::new(self.lat, self.lon).map_err(|e| Error::data(format!("location {}: {e}", self.id)))
    }
}

/// One line of `prompts/<topic>.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub topic: String,
    pub variant: Variant,
    pub location_id: usize,
    pub lat: f64,
    pub lon: f64,
    pub flags: PromptFlags,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingSource {
    /// Parsed from the answer text.
    Text,
    /// Expected value of the first-digit distribution.
    Logprobs,
    /// Expected-value mode fell back to the answer text because too little
    /// probability sat on digit tokens.
    TextFallback,
    /// No rating could be extracted.
    None,
}

/// One row of `ratings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub model: String,
    pub topic: String,
    pub variant: Variant,
    pub mode: RatingMode,
    pub location_id: usize,
    pub lat: f64,
    pub lon: f64,
    pub rating: Option<f64>,
    pub source: RatingSource,
    pub digit_mass: Option<f64>,
    pub prompt_id: String,
}

/// One row of `ground_truth.csv`; `value` is empty where the raster has no
/// data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub location_id: usize,
    pub topic: String,
    pub value: Option<f64>,
}

/// One row of a user-supplied anchor series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub location_id: usize,
    pub value: Option<f64>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().at(path)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).at(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        w.write_all(b"\n").at(path)?;
    }
    w.flush().at(path)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path).at(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).at(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_optional_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            RatingRow {
                model: "m".into(),
                topic: "Population Density".into(),
                variant: Variant::NoNearby,
                mode: RatingMode::Ev,
                location_id: 3,
                lat: 0.1 + 0.2,
                lon: -179.99999,
                rating: None,
                source: RatingSource::None,
                digit_mass: Some(0.25),
                prompt_id: "abc".into(),
            },
            RatingRow {
                rating: Some(7.4),
                source: RatingSource::Logprobs,
                digit_mass: None,
                ..RatingRow {
                    model: "m".into(),
                    topic: "t, with comma".into(),
                    variant: Variant::Full,
                    mode: RatingMode::Greedy,
                    location_id: 4,
                    lat: 1.0,
                    lon: 2.0,
                    rating: None,
                    source: RatingSource::None,
                    digit_mass: None,
                    prompt_id: "def".into(),
                }
            },
        ];
        write_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("model,topic,variant,mode,location_id,lat,lon,rating,source,digit_mass,prompt_id\n"));
        assert!(text.contains(",no_nearby,ev,3,0.30000000000000004,-179.99999,,none,0.25,abc\n"));
        assert_eq!(read_csv::<RatingRow>(&path).unwrap(), rows);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let rows = vec![PromptRecord {
            id: "x".into(),
            topic: "T".into(),
            variant: Variant::Full,
            location_id: 0,
            lat: 1.5,
            lon: 2.5,
            flags: PromptFlags::default(),
            text: "line one\n\n\"quoted\"".into(),
        }];
        write_jsonl(&path, &rows).unwrap();
        assert_eq!(read_jsonl::<PromptRecord>(&path).unwrap(), rows);
        let bad = dir.path().join("bad.jsonl");
        fs::write(&bad, "{\"id\":\n").unwrap();
        assert_eq!(read_jsonl::<PromptRecord>(&bad).unwrap_err().exit_code(), 3);
    }
}
