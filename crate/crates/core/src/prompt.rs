//! Byte-exact rating prompts.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gazetteer::{AddressMode, GazetteerError, PlaceIndex};
use crate::geo::Location;
use crate::hash::ContentHasher;

/// Task description placed before the location context.
pub const PREFIX: &str = "You will be given data about a specific location randomly sampled from all human-populated locations on Earth.\n\
You give your rating keeping in mind that it is relative to all other human-populated locations on Earth (from all continents, countries, etc.).\n\
You provide ONLY your answer in the exact format \"My answer is X.X.\" where 'X.X' represents your rating for the given topic.";

/// Suffix appended to the topic on the final line.
pub const SCALE_SUFFIX: &str = " (On a Scale from 0.0 to 9.9):";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("topic must not be empty")]
    EmptyTopic,
    #[error("at least one of coordinates, address or nearby places must be included")]
    NoLocationContext,
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
}

/// Which context blocks a prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptFlags {
    pub include_coordinates: bool,
    pub include_address: bool,
    pub address_mode: AddressMode,
    pub include_nearby: bool,
    pub k_nearby: usize,
}

impl Default for PromptFlags {
    fn default() -> Self {
        Self { include_coordinates: true, include_address: true, address_mode: AddressMode::Full, include_nearby: true, k_nearby: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub topic: String,
    pub location: Location,
    pub flags: PromptFlags,
}

impl PromptSpec {
    pub fn new(topic: impl Into<String>, location: Location) -> Self {
        Self { topic: topic.into(), location, flags: PromptFlags::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    /// Content hash of the spec, rendered text and gazetteer version.
    pub id: String,
    pub text: String,
}

/// Renders the prompt text for `spec` against `index`.
///
/// Blocks are separated by one blank line and appear in a fixed order:
/// prefix, coordinates, address, nearby places, topic line. The text has
/// no trailing newline.
pub fn render_prompt(spec: &PromptSpec, index: &PlaceIndex) -> Result<RenderedPrompt, PromptError> {
    if spec.topic.trim().is_empty() {
        return Err(PromptError::EmptyTopic);
    }
    let f = &spec.flags;
    if !(f.include_coordinates || f.include_address || f.include_nearby) {
        return Err(PromptError::NoLocationContext);
    }
    if f.include_nearby && f.k_nearby == 0 {
        return Err(GazetteerError::ZeroK.into());
    }

    let mut blocks: Vec<String> = Vec::with_capacity(5);
    blocks.push(String::from(PREFIX));
    if f.include_coordinates {
        blocks.push(alloc::format!("Coordinates: {}", spec.location));
    }
    if f.include_address {
        let address = index.reverse_geocode(spec.location);
        blocks.push(alloc::format!("Address: \"{}\"", address.components(f.address_mode).join(", ")));
    }
    if f.include_nearby {
        let nearby = index.nearest_places(spec.location, f.k_nearby)?;
        let mut block = String::from("Nearby Places:\n\"\n");
        for p in &nearby.places {
            let _ = writeln!(block, "{:.1} km {}: {}", p.distance_km, p.direction, p.name);
        }
        block.push('"');
        blocks.push(block);
    }
    blocks.push(alloc::format!("{}{}", spec.topic, SCALE_SUFFIX));
    let text = blocks.join("\n\n");

    let flags = alloc::format!(
        "{}|{}|{:?}|{}|{}",
        f.include_coordinates, f.include_address, f.address_mode, f.include_nearby, f.k_nearby
    );
    let id = ContentHasher::new()
        .str(&spec.topic)
        .str(&alloc::format!("{:?},{:?}", spec.location.lat(), spec.location.lon()))
        .str(&flags)
        .str(index.version())
        .str(&text)
        .finish();
    Ok(RenderedPrompt { id, text })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::PlaceRecord;
    use alloc::string::ToString;
    use alloc::vec;

    fn index() -> PlaceIndex {
        let p = |name: &str, lat: f64, lon: f64| PlaceRecord {
            name: name.to_string(),
            location: Location::new(lat, lon).unwrap(),
            population: 0,
            admin_chain: vec!["Springfield".to_string(), "Oregon".to_string(), "United States".to_string()],
        };
        PlaceIndex::new(vec![p("Main Street", 44.0, -123.0), p("Old Mill", 44.01, -123.0)], "test").unwrap()
    }

    #[test]
    fn refuses_without_context() {
        let mut spec = PromptSpec::new("Population Density", Location::new(44.0, -123.0).unwrap());
        spec.flags.include_coordinates = false;
        spec.flags.include_address = false;
        spec.flags.include_nearby = false;
        assert_eq!(render_prompt(&spec, &index()), Err(PromptError::NoLocationContext));
        let empty = PromptSpec::new(" ", Location::new(44.0, -123.0).unwrap());
        assert_eq!(render_prompt(&empty, &index()), Err(PromptError::EmptyTopic));
    }

    #[test]
    fn shape_and_id() {
        let spec = PromptSpec::new("Average Temperature", Location::new(44.0, -123.0).unwrap());
        let r = render_prompt(&spec, &index()).unwrap();
        assert!(r.text.ends_with("Average Temperature (On a Scale from 0.0 to 9.9):"));
        assert_eq!(r.text.matches("My answer is X.X.").count(), 1);
        assert!(r.text.contains("Nearby Places:\n\"\n1.1 km North: Old Mill\n\""));
        assert_eq!(r.id.len(), 32);
        let mut other = spec.clone();
        other.topic = "Annual Precipitation".to_string();
        assert_ne!(render_prompt(&other, &index()).unwrap().id, r.id);
    }
}
