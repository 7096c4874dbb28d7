//! Location sampling: density-weighted candidate pool, then greedy
//! farthest-point selection for coverage.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_km, Location};
use crate::raster::{pixel_to_location, RasterLayer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("n_points must be at least 2, got {0}")]
    TooFewPoints(usize),
    #[error("pool_multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("candidate pool of {pool} exceeds the configured budget of {budget}")]
    PoolTooLarge { pool: usize, budget: usize },
    #[error("density raster has no positive weight in the sampling region")]
    NoPositiveWeight,
    #[error("requested {requested} points from only {available} candidates")]
    NotEnoughCandidates { requested: usize, available: usize },
    #[error("invalid bounding box")]
    InvalidRegion,
}

/// Latitude/longitude box, inclusive on all sides. Does not wrap the
/// antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, SampleError> {
        let ok = [min_lat, min_lon, max_lat, max_lon].iter().all(|v| v.is_finite())
            && min_lat < max_lat
            && min_lon < max_lon
            && (-90.0..=90.0).contains(&min_lat)
            && (-90.0..=90.0).contains(&max_lat)
            && (-180.0..=180.0).contains(&min_lon)
            && (-180.0..=180.0).contains(&max_lon);
        if ok {
            Ok(Self { min_lat, min_lon, max_lat, max_lon })
        } else {
            Err(SampleError::InvalidRegion)
        }
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat <= self.max_lat && lon >= self.min_lon && lon <= self.max_lon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n_points: usize,
    pub seed: u64,
    #[serde(default = "default_pool_multiplier")]
    pub pool_multiplier: usize,
    #[serde(default)]
    pub region: Option<BoundingBox>,
    /// Upper bound on `n_points * pool_multiplier`.
    #[serde(default = "default_max_pool")]
    pub max_pool: usize,
}

fn default_pool_multiplier() -> usize {
    10
}

fn default_max_pool() -> usize {
    5_000_000
}

impl SamplePlan {
    pub fn new(n_points: usize, seed: u64) -> Self {
        Self { n_points, seed, pool_multiplier: default_pool_multiplier(), region: None, max_pool: default_max_pool() }
    }

    pub fn pool_size(&self) -> Result<usize, SampleError> {
        if self.n_points < 2 {
            return Err(SampleError::TooFewPoints(self.n_points));
        }
        if self.pool_multiplier == 0 {
            return Err(SampleError::ZeroMultiplier);
        }
        let pool = self.n_points.saturating_mul(self.pool_multiplier);
        if pool > self.max_pool {
            return Err(SampleError::PoolTooLarge { pool, budget: self.max_pool });
        }
        Ok(pool)
    }
}

/// A candidate location and the density of the cell it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedLocation {
    pub location: Location,
    pub weight: f64,
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws `pool_multiplier * n_points` candidates. Each draw picks a cell
/// with probability proportional to its density (cells may repeat) and
/// jitters the point uniformly inside that cell.
pub fn weighted_candidates(density: &RasterLayer, plan: &SamplePlan) -> Result<Vec<WeightedLocation>, SampleError> {
    let pool = plan.pool_size()?;
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    let mut cumulative: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for row in 0..density.height() {
        for col in 0..density.width() {
            let Some(w) = density.value(col, row) else { continue };
            if w <= 0.0 {
                continue;
            }
            if let Some(region) = &plan.region {
                let (lon, lat) = density.cell_center(col, row);
                if !region.contains(lat, lon) {
                    continue;
                }
            }
            total += w;
            cells.push((col, row, w));
            cumulative.push(total);
        }
    }
    if cells.is_empty() || total.is_nan() || total <= 0.0 {
        return Err(SampleError::NoPositiveWeight);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::with_capacity(pool);
    while out.len() < pool {
        let target = unit_f64(&mut rng) * total;
        let i = cumulative.partition_point(|&c| c <= target).min(cells.len() - 1);
        let (col, row, w) = cells[i];
        let (u, v) = (unit_f64(&mut rng), unit_f64(&mut rng));
        let Some(mut loc) = pixel_to_location(density, col as f64 + u, row as f64 + v) else {
            continue;
        };
        if let Some(region) = &plan.region {
            let lat = loc.lat().clamp(region.min_lat, region.max_lat);
            let lon = loc.lon().clamp(region.min_lon, region.max_lon);
            loc = Location::new(lat, lon).map_err(|_| SampleError::InvalidRegion)?;
        }
        out.push(WeightedLocation { location: loc, weight: w });
    }
    Ok(out)
}

/// Greedy farthest-point subset of size `n` under great-circle distance.
///
/// Starts from the highest-weight candidate (lowest index on ties), then
/// repeatedly adds the candidate whose distance to the selected set is
/// largest, again breaking ties by lowest index. Returns indices into
/// `candidates` in selection order.
pub fn farthest_point_sample(candidates: &[WeightedLocation], n: usize) -> Result<Vec<usize>, SampleError> {
    if n > candidates.len() {
        return Err(SampleError::NotEnoughCandidates { requested: n, available: candidates.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut start = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.weight > candidates[start].weight {
            start = i;
        }
    }
    let mut selected = Vec::with_capacity(n);
    let mut taken = alloc::vec![false; candidates.len()];
    let mut min_dist = alloc::vec![f64::INFINITY; candidates.len()];
    let mut current = start;
    loop {
        selected.push(current);
        taken[current] = true;
        if selected.len() == n {
            break;
        }
        let anchor = candidates[current].location;
        let mut best: Option<usize> = None;
        for (i, c) in candidates.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = haversine_km(anchor, c.location);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
            match best {
                Some(b) if min_dist[i] <= min_dist[b] => {}
                _ => best = Some(i),
            }
        }
        current = best.expect("n <= candidates guarantees a remaining candidate");
    }
    Ok(selected)
}
