//! Delimited-text gazetteer loading.

use geobias_core::hash::ContentHasher;
use geobias_core::{Location, PlaceIndex, PlaceRecord};
use log::warn;

use crate::config::{read_bytes, ColumnMap, ColumnRef, GazetteerConfig};
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct LoadedGazetteer {
    pub index: PlaceIndex,
    pub rows_read: usize,
    /// Rows dropped for a missing name or unusable coordinates.
    pub rows_skipped: usize,
}

struct Columns {
    name: usize,
    lat: usize,
    lon: usize,
    population: Option<usize>,
    admin: Vec<usize>,
}

fn resolve(map: &ColumnMap, header: Option<&csv::ByteRecord>) -> Result<Columns> {
    let find = |c: &ColumnRef| -> Result<usize> {
        match c {
            ColumnRef::Index(i) => Ok(*i),
            ColumnRef::Name(n) => header
                .ok_or_else(|| Error::config(format!("column {n:?} named but gazetteer has no header")))?
                .iter()
                .position(|h| h == n.as_bytes())
                .ok_or_else(|| Error::config(format!("gazetteer has no column {n:?}"))),
        }
    };
    Ok(Columns {
        name: find(&map.name)?,
        lat: find(&map.latitude)?,
        lon: find(&map.longitude)?,
        population: map.population.as_ref().map(find).transpose()?,
        admin: map.admin.iter().map(find).collect::<Result<_>>()?,
    })
}

fn field(rec: &csv::ByteRecord, i: usize) -> &str {
    rec.get(i).and_then(|b| std::str::from_utf8(b).ok()).map(str::trim).unwrap_or("")
}

/// Parses gazetteer bytes. The index version is a hash of the bytes and the
/// column mapping, so prompt ids change whenever either does.
pub fn parse_gazetteer(bytes: &[u8], cfg: &GazetteerConfig) -> Result<LoadedGazetteer> {
    if !cfg.delimiter.is_ascii() {
        return Err(Error::config("gazetteer delimiter must be a single ASCII character"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .has_headers(cfg.has_header)
        .quoting(cfg.quoting.unwrap_or(cfg.delimiter != '\t'))
        .flexible(true)
        .from_reader(bytes);
    let header = if cfg.has_header {
        Some(reader.byte_headers().map_err(|e| Error::data(format!("gazetteer header: {e}")))?.clone())
    } else {
        None
    };
    let cols = resolve(&cfg.columns, header.as_ref())?;

    let mut places = Vec::new();
    let mut rows_read = 0;
    let mut rows_skipped = 0;
    for rec in reader.byte_records() {
        let rec = rec.map_err(|e| Error::data(format!("gazetteer: {e}")))?;
        rows_read += 1;
        let name = field(&rec, cols.name);
        let loc = field(&rec, cols.lat)
            .parse::<f64>()
            .ok()
            .zip(field(&rec, cols.lon).parse::<f64>().ok())
            .and_then(|(lat, lon)| Location::new(lat, lon).ok());
        let (false, Some(location)) = (name.is_empty(), loc) else {
            rows_skipped += 1;
            continue;
        };
        let population = cols.population.and_then(|i| field(&rec, i).parse::<u64>().ok()).unwrap_or(0);
        let admin_chain =
            cols.admin.iter().map(|&i| field(&rec, i)).filter(|s| !s.is_empty()).map(String::from).collect();
        places.push(PlaceRecord { name: name.to_string(), location, population, admin_chain });
    }
    if rows_skipped > 0 {
        warn!("gazetteer: skipped {rows_skipped} of {rows_read} rows with a missing name or bad coordinates");
    }
    let columns = serde_json::to_string(&cfg.columns).expect("column map serializes");
    let version = ContentHasher::new().field(bytes).str(&columns).finish();
    let index = PlaceIndex::new(places, version).map_err(|e| Error::data(format!("gazetteer: {e}")))?;
    Ok(LoadedGazetteer { index, rows_read, rows_skipped })
}

pub fn load_gazetteer(cfg: &GazetteerConfig) -> Result<LoadedGazetteer> {
    parse_gazetteer(&read_bytes(&cfg.path)?, cfg)
}
