//! Diverging colormaps.

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const BLUE: Rgb = Rgb(0, 0, 255);

    pub fn hex(self) -> String {
        alloc::format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("value {value} outside colormap domain [{min}, {max}]")]
pub struct OutOfDomain {
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

/// Piecewise-linear map `min -> low`, `center -> mid`, `max -> high`,
/// interpolated per sRGB channel and rounded to the nearest integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diverging {
    pub low: Rgb,
    pub mid: Rgb,
    pub high: Rgb,
    pub min: f64,
    pub center: f64,
    pub max: f64,
}

impl Diverging {
    /// Scaled ranks: red for low, white at 0.5, green for high.
    pub const RANK: Diverging =
        Diverging { low: Rgb(215, 25, 28), mid: Rgb::WHITE, high: Rgb(26, 150, 65), min: 0.0, center: 0.5, max: 1.0 };

    /// Rank errors: blue for underestimates, white at 0, red for overestimates.
    pub const RANK_ERROR: Diverging = Diverging { low: Rgb::BLUE, mid: Rgb::WHITE, high: Rgb::RED, min: -1.0, center: 0.0, max: 1.0 };

    pub fn color(&self, value: f64) -> Result<Rgb, OutOfDomain> {
        if !(value >= self.min && value <= self.max) {
            return Err(OutOfDomain { value, min: self.min, max: self.max });
        }
        Ok(if value <= self.center {
            lerp(self.low, self.mid, (value - self.min) / (self.center - self.min))
        } else {
            lerp(self.mid, self.high, (value - self.center) / (self.max - self.center))
        })
    }
}

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let ch = |x: u8, y: u8| {
        let v = f64::from(x) + (f64::from(y) - f64::from(x)) * t;
        libm::round(v).clamp(0.0, 255.0) as u8
    };
    Rgb(ch(a.0, b.0), ch(a.1, b.1), ch(a.2, b.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let m = Diverging::RANK_ERROR;
        assert_eq!(m.color(1.0).unwrap(), Rgb::RED);
        assert_eq!(m.color(-1.0).unwrap(), Rgb::BLUE);
        assert_eq!(m.color(0.0).unwrap(), Rgb::WHITE);
        assert_eq!(Diverging::RANK.color(0.5).unwrap(), Rgb::WHITE);
        assert_eq!(m.color(0.5).unwrap(), Rgb(255, 128, 128));
        assert!(m.color(1.5).is_err());
        assert!(m.color(f64::NAN).is_err());
        assert_eq!(Rgb(255, 0, 16).hex(), "#ff0010");
    }

    #[test]
    fn monotone_along_each_arm() {
        let m = Diverging::RANK_ERROR;
        let mut prev = m.color(0.0).unwrap();
        for i in 1..=100 {
            let c = m.color(i as f64 / 100.0).unwrap();
            assert!(c.1 <= prev.1 && c.2 <= prev.2 && c.0 == 255);
            prev = c;
        }
    }
}
