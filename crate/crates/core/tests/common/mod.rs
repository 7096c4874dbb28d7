// Shared fixture loading for the core integration tests.
#![allow(dead_code)]

use geobias_core::{Location, PlaceIndex, PlaceRecord};

pub const MANHATTAN_TSV: &str = include_str!("../fixtures/manhattan.tsv");
pub const MANHATTAN_PROMPT: &str = include_str!("../fixtures/manhattan_prompt.txt");

pub fn manhattan_index() -> PlaceIndex {
    let places = MANHATTAN_TSV
        .lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            PlaceRecord {
                name: cols[0].to_string(),
                location: Location::new(cols[1].parse().unwrap(), cols[2].parse().unwrap()).unwrap(),
                population: cols[3].parse().unwrap(),
                admin_chain: cols[4..].iter().filter(|c| !c.is_empty()).map(|c| c.to_string()).collect(),
            }
        })
        .collect();
    PlaceIndex::new(places, "manhattan-fixture").unwrap()
}

pub fn origin() -> Location {
    Location::new(40.76208, -73.98042).unwrap()
}
