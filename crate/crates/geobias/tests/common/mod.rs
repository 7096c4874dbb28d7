// Synthetic world used by the pipeline tests: smooth global rasters, a grid
// gazetteer and a config template.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use geobias::raster_io::{format_ascii_grid, write_geotiff};
use geobias_core::{GeoTransform, RasterLayer};

pub fn grid(cell_deg: f64, f: impl Fn(f64, f64) -> f64) -> RasterLayer {
    let w = (360.0 / cell_deg).round() as usize;
    let h = (180.0 / cell_deg).round() as usize;
    let mut data = Vec::with_capacity(w * h);
    for row in 0..h {
        let lat = 90.0 - (row as f64 + 0.5) * cell_deg;
        for col in 0..w {
            let lon = -180.0 + (col as f64 + 0.5) * cell_deg;
            data.push(f(lat, lon));
        }
    }
    RasterLayer::new(w, h, data, GeoTransform::north_up(-180.0, 90.0, cell_deg, cell_deg), Some(-9999.0)).unwrap()
}

/// Smooth positive field with oceans of zero density.
pub fn density(lat: f64, lon: f64) -> f64 {
    let v = (lon.to_radians() * 2.0).sin() + (lat.to_radians() * 3.0).cos() + 0.3 * (lat.abs() < 60.0) as u8 as f64;
    if lat.abs() > 75.0 {
        0.0
    } else {
        (v + 0.6).max(0.0) * 100.0 + lon.abs() * 0.01
    }
}

pub fn temperature(lat: f64, lon: f64) -> f64 {
    30.0 - 0.45 * lat.abs() + 2.0 * (lon.to_radians()).sin()
}

pub fn infant_mortality(lat: f64, lon: f64) -> f64 {
    if lat < -80.0 {
        -9999.0
    } else {
        5.0 + 0.8 * (lat + 40.0).abs().sqrt() * 10.0 + (lon.to_radians() * 3.0).cos()
    }
}

pub fn gazetteer_tsv(step_deg: f64) -> String {
    let mut s = String::from("name\tlat\tlon\tpopulation\tregion\tcountry\n");
    let mut lat = -70.0;
    let mut i = 0;
    while lat <= 70.0 {
        let mut lon = -180.0;
        while lon < 180.0 {
            let region = format!("Region {}", ((lat + 90.0) / 20.0) as i32);
            let country = format!("Country {}", ((lon + 180.0) / 45.0) as i32);
            let _ = writeln!(s, "Place {i}\t{lat}\t{lon}\t{}\t{region}\t{country}", i * 10);
            lon += step_deg;
            i += 1;
        }
        lat += step_deg;
    }
    s
}

pub struct World {
    pub dir: tempfile::TempDir,
}

impl World {
    /// Writes the rasters (density as a GeoTIFF, the rest as ASCII grids)
    /// and the gazetteer.
    pub fn new(cell_deg: f64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        write_geotiff(&p.join("density.tif"), &grid(cell_deg, density)).unwrap();
        for (name, f) in [("temperature.asc", temperature as fn(f64, f64) -> f64), ("imr.asc", infant_mortality)] {
            fs::write(p.join(name), format_ascii_grid(&grid(cell_deg, f)).unwrap()).unwrap();
        }
        fs::write(p.join("places.tsv"), gazetteer_tsv(5.0)).unwrap();
        World { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn run_dir(&self, name: &str) -> PathBuf {
        self.path().join(name)
    }

    /// Writes `geobias.toml` with the given sample size and model sections.
    pub fn config(&self, n_points: usize, extra: &str, models: &str) -> PathBuf {
        let text = format!(
            r#"
[gazetteer]
path = "places.tsv"
columns = {{ name = "name", latitude = "lat", longitude = "lon", population = "population", admin = ["region", "country"] }}

[sample]
density = "density.tif"
n_points = {n_points}
seed = 11
pool_multiplier = 10

[[topics]]
name = "Average Morality of Residents"
kind = "sensitive"

[[topics]]
name = "Population Density"
kind = "objective"
raster = "density.tif"

[[topics]]
name = "Average Temperature"
kind = "objective"
raster = "temperature.asc"

[[topics]]
name = "Average Body Temperature of Residents"
kind = "independent"

[anchor]
topic = "Infant Mortality Rate"
higher_is_better = false
raster = "imr.asc"

{extra}

{models}
"#
        );
        let path = self.path().join("geobias.toml");
        fs::write(&path, text).unwrap();
        path
    }
}

pub const MONOTONE_STUB: &str = r#"
[[models]]
name = "stub-monotone"
kind = "stub"
signal = "truth"
transform = "rank"
weight = 6.0
center = 0.5
topic_signals = { "Average Morality of Residents" = { constant = 5.0 }, "Average Body Temperature of Residents" = "latitude" }
"#;
