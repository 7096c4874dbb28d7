//! Single-band rasters in geographic coordinates and windowed sampling.

use alloc::vec::Vec;

use thiserror::Error;

use crate::geo::{normalize_lon, Location};

/// Kilometres per degree of latitude on the reference sphere.
pub const KM_PER_DEGREE: f64 = 111.195;

/// Side of the square ground-truth window.
pub const WINDOW_SIDE_KM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("geotransform is not invertible")]
    SingularTransform,
    #[error("raster has {got} cells but {width}x{height} were declared")]
    ShapeMismatch { width: usize, height: usize, got: usize },
    #[error("raster must have at least one cell")]
    EmptyGrid,
}

/// GDAL-order affine transform from pixel `(col, row)` to `(lon, lat)`:
/// `lon = c[0] + col*c[1] + row*c[2]`, `lat = c[3] + col*c[4] + row*c[5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform(pub [f64; 6]);

impl GeoTransform {
    /// North-up grid whose top-left corner is at `(west, north)`.
    pub fn north_up(west: f64, north: f64, cell_w: f64, cell_h: f64) -> Self {
        Self([west, cell_w, 0.0, north, 0.0, -cell_h])
    }

    fn det(&self) -> f64 {
        let c = &self.0;
        c[1] * c[5] - c[2] * c[4]
    }

    pub fn apply(&self, col: f64, row: f64) -> (f64, f64) {
        let c = &self.0;
        (c[0] + col * c[1] + row * c[2], c[3] + col * c[4] + row * c[5])
    }

    /// Continuous pixel coordinates of `(lon, lat)`.
    pub fn invert(&self, lon: f64, lat: f64) -> (f64, f64) {
        let c = &self.0;
        let det = self.det();
        let (dx, dy) = (lon - c[0], lat - c[3]);
        ((dx * c[5] - dy * c[2]) / det, (dy * c[1] - dx * c[4]) / det)
    }
}

/// Row-major grid of cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterLayer {
    width: usize,
    height: usize,
    data: Vec<f64>,
    transform: GeoTransform,
    nodata: Option<f64>,
}

impl RasterLayer {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        transform: GeoTransform,
        nodata: Option<f64>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyGrid);
        }
        if data.len() != width * height {
            return Err(RasterError::ShapeMismatch { width, height, got: data.len() });
        }
        let det = transform.det();
        if det == 0.0 || !det.is_finite() {
            return Err(RasterError::SingularTransform);
        }
        Ok(Self { width, height, data, transform, nodata })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Cell value, or `None` for no-data, non-finite or out-of-bounds cells.
    pub fn value(&self, col: usize, row: usize) -> Option<f64> {
        if col >= self.width || row >= self.height {
            return None;
        }
        let v = self.data[row * self.width + col];
        if !v.is_finite() || self.nodata == Some(v) {
            None
        } else {
            Some(v)
        }
    }

    /// Geographic coordinates of a cell center as `(lon, lat)`.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.transform.apply(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Cell containing `(lon, lat)`, if inside the grid.
    pub fn cell_at(&self, lon: f64, lat: f64) -> Option<(usize, usize)> {
        let (c, r) = self.transform.invert(lon, lat);
        if c < 0.0 || r < 0.0 || !c.is_finite() || !r.is_finite() {
            return None;
        }
        let (c, r) = (libm::floor(c) as usize, libm::floor(r) as usize);
        (c < self.width && r < self.height).then_some((c, r))
    }

    /// Pixel bounding box `(col0, row0, col1, row1)` (inclusive) covering a
    /// lon/lat rectangle, clamped to the grid.
    fn pixel_bounds(&self, west: f64, south: f64, east: f64, north: f64) -> Option<(usize, usize, usize, usize)> {
        let corners = [
            self.transform.invert(west, south),
            self.transform.invert(west, north),
            self.transform.invert(east, south),
            self.transform.invert(east, north),
        ];
        let (mut c0, mut r0, mut c1, mut r1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (c, r) in corners {
            c0 = c0.min(c);
            r0 = r0.min(r);
            c1 = c1.max(c);
            r1 = r1.max(r);
        }
        // Cell centers sit at +0.5; widen by one cell to stay inclusive.
        let c0 = libm::floor(c0 - 1.0).max(0.0);
        let r0 = libm::floor(r0 - 1.0).max(0.0);
        let c1 = libm::ceil(c1 + 1.0).min(self.width as f64 - 1.0);
        let r1 = libm::ceil(r1 + 1.0).min(self.height as f64 - 1.0);
        if c1 < c0 || r1 < r0 || !c0.is_finite() {
            return None;
        }
        Some((c0 as usize, r0 as usize, c1 as usize, r1 as usize))
    }
}

/// Half-extents `(dlat, dlon)` in degrees of the sampling window at `lat`.
pub fn window_half_extents(lat: f64) -> (f64, f64) {
    let half = WINDOW_SIDE_KM / 2.0;
    let dlat = half / KM_PER_DEGREE;
    let coslat = libm::cos(lat.to_radians());
    let dlon = if coslat <= 0.0 { 179.999 } else { (half / (KM_PER_DEGREE * coslat)).min(179.999) };
    (dlat, dlon)
}

/// Mean of valid cells whose centers fall in the 5 km x 5 km window centered
/// at `origin`.
///
/// When the raster is coarser than the window and no cell center falls
/// inside it, the value of the cell containing `origin` is used. Returns
/// `None` when nothing valid is found.
pub fn sample_raster(layer: &RasterLayer, origin: Location) -> Option<f64> {
    let (dlat, dlon) = window_half_extents(origin.lat());
    let (south, north) = (origin.lat() - dlat, origin.lat() + dlat);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut any_center = false;
    for shift in [-360.0, 0.0, 360.0] {
        let (west, east) = (origin.lon() - dlon + shift, origin.lon() + dlon + shift);
        let Some((c0, r0, c1, r1)) = layer.pixel_bounds(west, south, east, north) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (lon, lat) = layer.cell_center(col, row);
                if lat < south || lat > north {
                    continue;
                }
                let d = lon - shift - origin.lon();
                if d < -dlon || d > dlon {
                    continue;
                }
                any_center = true;
                if let Some(v) = layer.value(col, row) {
                    sum += v;
                    count += 1;
                }
            }
        }
    }
    if count > 0 {
        return Some(sum / count as f64);
    }
    if any_center {
        return None;
    }
    containing_cell_value(layer, origin)
}

fn containing_cell_value(layer: &RasterLayer, origin: Location) -> Option<f64> {
    for shift in [0.0, -360.0, 360.0] {
        if let Some((c, r)) = layer.cell_at(origin.lon() + shift, origin.lat()) {
            return layer.value(c, r);
        }
    }
    None
}

/// Converts a pixel position to a (normalized) location.
pub fn pixel_to_location(layer: &RasterLayer, col: f64, row: f64) -> Option<Location> {
    let (lon, lat) = layer.transform.apply(col, row);
    Location::new(lat.clamp(-90.0, 90.0), normalize_lon(lon)).ok()
}
