//! Scatter maps as self-contained SVG.
//!
//! Points are placed with an equirectangular projection over the style's
//! extent and drawn in input order. Output bytes depend only on the inputs.

use alloc::string::String;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colormap::{Diverging, OutOfDomain};
use crate::geo::Location;
use crate::sampler::BoundingBox;

const LEGEND_HEIGHT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("{locations} locations but {values} values")]
    Misaligned { locations: usize, values: usize },
    #[error("point {index}: {source}")]
    OutOfDomain { index: usize, source: OutOfDomain },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    #[default]
    Light,
    Dark,
}

impl Background {
    fn colors(self) -> (&'static str, &'static str, &'static str) {
        // (background, text, frame)
        match self {
            Background::Light => ("#ffffff", "#222222", "#999999"),
            Background::Dark => ("#111111", "#eeeeee", "#666666"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStyle {
    pub colormap: Diverging,
    pub extent: BoundingBox,
    pub width_px: f64,
    pub point_radius: f64,
    pub background: Background,
    pub title: Option<String>,
}

impl MapStyle {
    pub const WORLD: BoundingBox = BoundingBox { min_lat: -90.0, min_lon: -180.0, max_lat: 90.0, max_lon: 180.0 };

    pub fn ranks() -> Self {
        Self::with(Diverging::RANK)
    }

    pub fn rank_errors() -> Self {
        Self::with(Diverging::RANK_ERROR)
    }

    fn with(colormap: Diverging) -> Self {
        Self { colormap, extent: Self::WORLD, width_px: 1000.0, point_radius: 2.5, background: Background::Light, title: None }
    }

    fn height_px(&self) -> f64 {
        let e = &self.extent;
        self.width_px * (e.max_lat - e.min_lat) / (e.max_lon - e.min_lon)
    }

    /// Pixel position of a location.
    pub fn project(&self, loc: Location) -> (f64, f64) {
        let e = &self.extent;
        let x = (loc.lon() - e.min_lon) / (e.max_lon - e.min_lon) * self.width_px;
        let y = (e.max_lat - loc.lat()) / (e.max_lat - e.min_lat) * self.height_px();
        (x, y)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// One circle per location colored by `values`, with a min/mid/max legend.
pub fn plot_points(locations: &[Location], values: &[f64], style: &MapStyle) -> Result<String, PlotError> {
    if locations.is_empty() {
        return Err(PlotError::Empty);
    }
    if locations.len() != values.len() {
        return Err(PlotError::Misaligned { locations: locations.len(), values: values.len() });
    }
    let cmap = &style.colormap;
    let (bg, fg, frame) = style.background.colors();
    let w = style.width_px;
    let h = style.height_px();
    let total_h = h + LEGEND_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{total_h:.0}" viewBox="0 0 {w:.2} {total_h:.2}">"#);
    let _ = writeln!(s, r#"<rect id="background" x="0" y="0" width="{w:.2}" height="{total_h:.2}" fill="{bg}"/>"#);
    let _ = writeln!(s, r#"<rect id="frame" x="0" y="0" width="{w:.2}" height="{h:.2}" fill="none" stroke="{frame}" stroke-width="1"/>"#);
    let _ = writeln!(s, r#"<g id="points" stroke="none">"#);
    for (i, (loc, v)) in locations.iter().zip(values).enumerate() {
        let color = cmap.color(*v).map_err(|source| PlotError::OutOfDomain { index: i, source })?;
        let (x, y) = style.project(*loc);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{}"/>"#, style.point_radius, color.hex());
    }
    let _ = writeln!(s, "</g>");

    let bar_w = (w * 0.4).min(400.0);
    let bar_x = (w - bar_w) / 2.0;
    let bar_y = h + 12.0;
    let _ = writeln!(s, r#"<defs><linearGradient id="legend-gradient" x1="0" x2="1" y1="0" y2="0">"#);
    let _ = writeln!(s, r#"<stop offset="0" stop-color="{}"/>"#, cmap.low.hex());
    let _ = writeln!(s, r#"<stop offset="0.5" stop-color="{}"/>"#, cmap.mid.hex());
    let _ = writeln!(s, r#"<stop offset="1" stop-color="{}"/>"#, cmap.high.hex());
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(s, r#"<rect id="legend" x="{bar_x:.2}" y="{bar_y:.2}" width="{bar_w:.2}" height="12" fill="url(#legend-gradient)" stroke="{frame}"/>"#);
    let label_y = bar_y + 28.0;
    for (x, anchor, v) in [
        (bar_x, "start", cmap.min),
        (bar_x + bar_w / 2.0, "middle", cmap.center),
        (bar_x + bar_w, "end", cmap.max),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{label_y:.2}" fill="{fg}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.1}</text>"#
        );
    }
    if let Some(title) = &style.title {
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.2}" fill="{fg}" font-family="sans-serif" font-size="13" text-anchor="start">{}</text>"#,
            bar_y + 10.0,
            escape(title)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Rank-error map: blue (underestimate) through white to red (overestimate).
pub fn plot_rank_error(locations: &[Location], errors: &[f64], style: &MapStyle) -> Result<String, PlotError> {
    let mut style = style.clone();
    style.colormap = Diverging::RANK_ERROR;
    plot_points(locations, errors, &style)
}
