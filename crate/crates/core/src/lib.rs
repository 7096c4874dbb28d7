//! Allocation-only building blocks for measuring geographic bias in
//! language-model ratings.
//!
//! Everything here is pure computation over in-memory data: locations and
//! great-circle geometry, a k-nearest place index, windowed raster sampling,
//! location sampling, prompt rendering, rating extraction, rank statistics
//! and SVG map rendering. File formats, HTTP and the command line live in the
//! `geobias` crate.

#![no_std]

extern crate alloc;

pub mod colormap;
pub mod gazetteer;
pub mod geo;
pub mod hash;
pub mod metrics;
pub mod prompt;
pub mod raster;
pub mod rating;
pub mod sampler;
pub mod stub;
pub mod svg;

pub use gazetteer::{Address, AddressMode, NearbyPlace, NearbyPlaces, PlaceIndex, PlaceRecord};
pub use geo::{bearing_deg, bearing_to_compass8, haversine_km, Compass8, GeoError, Location, EARTH_RADIUS_KM};
pub use metrics::{
    bias_score, bias_score_from_components, fractional_rank, gini, mad, mean_rank, rank_error, spearman_rho,
    AnchorSeries, MeanRank, MetricsError, MetricsReport, RankVector,
};
pub use prompt::{render_prompt, PromptError, PromptSpec, RenderedPrompt};
pub use raster::{sample_raster, GeoTransform, RasterError, RasterLayer};
pub use rating::{
    expected_rating_from_logprobs, parse_rating, ExpectedRating, FirstDigitProbs, RatingError, RatingSeries,
};
pub use sampler::{farthest_point_sample, weighted_candidates, BoundingBox, SampleError, SamplePlan, WeightedLocation};
