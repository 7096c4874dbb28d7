//! WGS84 locations on a spherical Earth.

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid latitude {0}; expected finite degrees in [-90, 90]")]
    InvalidLatitude(f64),
    #[error("invalid longitude {0}; expected finite degrees")]
    InvalidLongitude(f64),
    #[error("direction between identical locations is undefined")]
    UndefinedDirection,
}

/// A latitude/longitude pair in degrees.
///
/// Longitude is normalized into `[-180, 180)` on construction, so `180.0`
/// becomes `-180.0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    lat: f64,
    lon: f64,
}

impl Location {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::InvalidLatitude(lat));
        }
        if !lon.is_finite() {
            return Err(GeoError::InvalidLongitude(lon));
        }
        Ok(Self { lat, lon: normalize_lon(lon) })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Unit vector on the sphere (x towards lon 0, z towards the north pole).
    pub fn unit_vector(&self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        let c = libm::cos(lat);
        [c * libm::cos(lon), c * libm::sin(lon), libm::sin(lat)]
    }
}

impl fmt::Display for Location {
    /// Five decimals, matching the rendered prompt coordinates.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.5}, {:.5})", self.lat + 0.0, self.lon + 0.0)
    }
}

/// Wraps any finite longitude into `[-180, 180)`.
pub fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let wrapped = libm::fmod(lon + 180.0, 360.0);
    let wrapped = if wrapped < 0.0 { wrapped + 360.0 } else { wrapped };
    let out = wrapped - 180.0;
    if out >= 180.0 {
        -180.0
    } else {
        out
    }
}

/// Great-circle distance by the haversine formula.
pub fn haversine_km(a: Location, b: Location) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = libm::sin(dlat / 2.0);
    let s_lon = libm::sin(dlon / 2.0);
    let h = s_lat * s_lat + libm::cos(lat1) * libm::cos(lat2) * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(h.min(1.0)))
}

/// Initial great-circle bearing from `a` to `b`, degrees clockwise from north
/// in `[0, 360)`.
pub fn bearing_deg(a: Location, b: Location) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = libm::sin(dlon) * libm::cos(lat2);
    let x = libm::cos(lat1) * libm::sin(lat2) - libm::sin(lat1) * libm::cos(lat2) * libm::cos(dlon);
    let deg = libm::atan2(y, x).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

/// Eight compass directions, rendered in hyphenated form ("South-West").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compass8 {
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

impl Compass8 {
    pub const ALL: [Compass8; 8] = [
        Compass8::North,
        Compass8::NorthEast,
        Compass8::East,
        Compass8::SouthEast,
        Compass8::South,
        Compass8::SouthWest,
        Compass8::West,
        Compass8::NorthWest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Compass8::North => "North",
            Compass8::NorthEast => "North-East",
            Compass8::East => "East",
            Compass8::SouthEast => "South-East",
            Compass8::South => "South",
            Compass8::SouthWest => "South-West",
            Compass8::West => "West",
            Compass8::NorthWest => "North-West",
        }
    }

    /// Sector for a bearing in degrees. Sectors are half-open,
    /// `[center - 22.5, center + 22.5)`, so 22.5 belongs to North-East.
    pub fn from_bearing(bearing: f64) -> Self {
        let shifted = libm::fmod(bearing + 22.5, 360.0);
        let shifted = if shifted < 0.0 { shifted + 360.0 } else { shifted };
        let sector = libm::floor(shifted / 45.0) as usize;
        Self::ALL[sector % 8]
    }
}

impl fmt::Display for Compass8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn bearing_to_compass8(a: Location, b: Location) -> Result<Compass8, GeoError> {
    if a == b {
        return Err(GeoError::UndefinedDirection);
    }
    Ok(Compass8::from_bearing(bearing_deg(a, b)))
}

/// Point reached from `origin` after travelling `distance_km` along the
/// great circle with initial bearing `bearing` (degrees).
pub fn destination(origin: Location, bearing: f64, distance_km: f64) -> Location {
    let delta = distance_km / EARTH_RADIUS_KM;
    let theta = bearing.to_radians();
    let lat1 = origin.lat.to_radians();
    let lon1 = origin.lon.to_radians();
    let lat2 = libm::asin(libm::sin(lat1) * libm::cos(delta) + libm::cos(lat1) * libm::sin(delta) * libm::cos(theta));
    let lon2 = lon1
        + libm::atan2(
            libm::sin(theta) * libm::sin(delta) * libm::cos(lat1),
            libm::cos(delta) - libm::sin(lat1) * libm::sin(lat2),
        );
    Location { lat: lat2.to_degrees().clamp(-90.0, 90.0), lon: normalize_lon(lon2.to_degrees()) }
}
