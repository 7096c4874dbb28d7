//! Place records and a k-nearest-neighbour index over them.
//!
//! Points are stored as unit vectors in a 3-d tree. Chord length is monotone
//! in great-circle distance, so the tree prunes on chords; final ordering is
//! by haversine distance with ties broken by insertion index, which makes
//! results identical to a linear scan.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{bearing_deg, haversine_km, Compass8, Location};

/// Distances below this are treated as coincident.
const COINCIDENT_KM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GazetteerError {
    #[error("place index is empty")]
    Empty,
    #[error("place name must not be empty")]
    EmptyName,
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceRecord {
    pub name: String,
    pub location: Location,
    /// 0 when unknown.
    pub population: u64,
    /// Administrative components from most local to country.
    pub admin_chain: Vec<String>,
}

/// How much of an address is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressMode {
    #[default]
    Full,
    /// Only the final two components, normally state and country.
    LastTwo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Address {
    /// Place name followed by its admin chain.
    pub components: Vec<String>,
    /// Index of the place the address was taken from.
    pub place: usize,
    /// Distance from the query origin to that place.
    pub distance_km: f64,
}

impl Address {
    pub fn components(&self, mode: AddressMode) -> &[String] {
        match mode {
            AddressMode::Full => &self.components,
            AddressMode::LastTwo => {
                let start = self.components.len().saturating_sub(2);
                &self.components[start..]
            }
        }
    }

    pub fn head(&self) -> &str {
        &self.components[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearbyPlace {
    pub place: usize,
    pub name: String,
    pub distance_km: f64,
    pub direction: Compass8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearbyPlaces {
    pub places: Vec<NearbyPlace>,
    /// Set when fewer than `k` distinct places exist.
    pub truncated: bool,
}

/// Immutable spatial index over places. Safe to share between threads.
#[derive(Debug, Clone)]
pub struct PlaceIndex {
    places: Vec<PlaceRecord>,
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    version: String,
}

impl PlaceIndex {
    /// `version` identifies the gazetteer contents (typically a file hash)
    /// and feeds into prompt ids.
    pub fn new(places: Vec<PlaceRecord>, version: impl Into<String>) -> Result<Self, GazetteerError> {
        if places.is_empty() {
            return Err(GazetteerError::Empty);
        }
        if places.iter().any(|p| p.name.is_empty()) {
            return Err(GazetteerError::EmptyName);
        }
        let points: Vec<[f64; 3]> = places.iter().map(|p| p.location.unit_vector()).collect();
        let mut order: Vec<u32> = (0..places.len() as u32).collect();
        build(&points, &mut order, 0);
        Ok(Self { places, points, order, version: version.into() })
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn places(&self) -> &[PlaceRecord] {
        &self.places
    }

    pub fn get(&self, index: usize) -> &PlaceRecord {
        &self.places[index]
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// The `k` places closest to `origin` as `(index, distance_km)`,
    /// ascending by distance then index. Returns fewer when `k > len`.
    pub fn nearest(&self, origin: Location, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let q = origin.unit_vector();
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn(&q, 0, self.order.len(), 0, k, &mut heap);
        let worst = heap.peek().map(|c: &Candidate| c.d2).unwrap_or(0.0);
        // Widen slightly so near-ties on the chord are re-ordered by haversine.
        let bound = worst * (1.0 + 1e-9) + 1e-18;
        let mut within = Vec::new();
        self.range(&q, 0, self.order.len(), 0, bound, &mut within);
        let mut scored: Vec<(usize, f64)> =
            within.into_iter().map(|i| (i, haversine_km(origin, self.places[i].location))).collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    /// Address of the nearest place, however far away it is.
    pub fn reverse_geocode(&self, origin: Location) -> Address {
        let (place, distance_km) = self.nearest(origin, 1)[0];
        let rec = &self.places[place];
        let mut components = Vec::with_capacity(rec.admin_chain.len() + 1);
        components.push(rec.name.clone());
        components.extend(rec.admin_chain.iter().filter(|c| !c.is_empty()).cloned());
        Address { components, place, distance_km }
    }

    /// `k` nearest places with distinct names, ascending by distance.
    ///
    /// A place coincident with `origin` whose name matches the address head
    /// is skipped, since it already appears in the address.
    pub fn nearest_places(&self, origin: Location, k: usize) -> Result<NearbyPlaces, GazetteerError> {
        if k == 0 {
            return Err(GazetteerError::ZeroK);
        }
        let head = self.reverse_geocode(origin);
        let head_name = head.head();
        let mut want = k + 1;
        loop {
            let ranked = self.nearest(origin, want);
            let exhausted = ranked.len() == self.len();
            let picked = select_nearby(&self.places, origin, head_name, &ranked, k);
            if picked.len() == k || exhausted {
                let truncated = picked.len() < k;
                return Ok(NearbyPlaces { places: picked, truncated });
            }
            want = want.saturating_mul(2);
        }
    }

    fn knn(&self, q: &[f64; 3], lo: usize, hi: usize, depth: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let cand = Candidate { d2: chord2(q, p), index: idx };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn(q, near.0, near.1, depth + 1, k, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
            self.knn(q, far.0, far.1, depth + 1, k, heap);
        }
    }

    fn range(&self, q: &[f64; 3], lo: usize, hi: usize, depth: usize, bound: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        if chord2(q, p) <= bound {
            out.push(idx);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        if diff < 0.0 || diff * diff <= bound {
            self.range(q, lo, mid, depth + 1, bound, out);
        }
        if diff >= 0.0 || diff * diff <= bound {
            self.range(q, mid + 1, hi, depth + 1, bound, out);
        }
    }
}

/// Applies the exclusion and distinct-name rules to an already ranked list.
pub(crate) fn select_nearby(
    places: &[PlaceRecord],
    origin: Location,
    head_name: &str,
    ranked: &[(usize, f64)],
    k: usize,
) -> Vec<NearbyPlace> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::with_capacity(k);
    for &(i, d) in ranked {
        if out.len() == k {
            break;
        }
        let rec = &places[i];
        if d < COINCIDENT_KM && rec.name == head_name {
            continue;
        }
        if !seen.insert(rec.name.as_str()) {
            continue;
        }
        // Coincident places have no defined bearing; atan2(0, 0) reports North.
        let direction = Compass8::from_bearing(bearing_deg(origin, rec.location));
        out.push(NearbyPlace { place: i, name: rec.name.clone(), distance_km: d, direction });
    }
    out
}

/// Same ranking and filtering as [`PlaceIndex::nearest_places`] by linear scan.
pub fn nearest_places_scan(index: &PlaceIndex, origin: Location, k: usize) -> NearbyPlaces {
    let mut ranked: Vec<(usize, f64)> =
        index.places.iter().enumerate().map(|(i, p)| (i, haversine_km(origin, p.location))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let head = &index.places[ranked[0].0].name;
    let places = select_nearby(&index.places, origin, head, &ranked, k);
    let truncated = places.len() < k;
    NearbyPlaces { places, truncated }
}

fn chord2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build(points: &[[f64; 3]], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a as usize][axis].total_cmp(&points[b as usize][axis]));
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}
