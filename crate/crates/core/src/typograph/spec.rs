use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typograph::font::BUILTIN_FONT;

/// An 8-bit RGB color. Parses from a named color or `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const RED: Rgb = Rgb([255, 0, 0]);
    pub const ORANGE: Rgb = Rgb([255, 165, 0]);
    pub const BLUE: Rgb = Rgb([0, 0, 255]);
    pub const GREEN: Rgb = Rgb([0, 128, 0]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    /// The five colors of the typographic sweep, in sweep order.
    pub const SWEEP: [(&'static str, Rgb); 5] = [
        ("red", Rgb::RED),
        ("blue", Rgb::BLUE),
        ("green", Rgb::GREEN),
        ("orange", Rgb::ORANGE),
        ("black", Rgb::BLACK),
    ];

    pub fn name(&self) -> Option<&'static str> {
        Self::SWEEP.iter().find(|(_, c)| c == self).map(|(n, _)| *n)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2]),
        }
    }
}

impl FromStr for Rgb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some((_, c)) = Self::SWEEP.iter().find(|(n, _)| *n == lower) {
            return Ok(*c);
        }
        let hex = lower
            .strip_prefix('#')
            .ok_or_else(|| Error::config(format!("unknown color {s:?}")))?;
        if hex.len() != 6 {
            return Err(Error::config(format!("color {s:?} is not #rrggbb")));
        }
        let mut out = [0u8; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::config(format!("color {s:?} is not #rrggbb")))?;
        }
        Ok(Rgb(out))
    }
}

impl TryFrom<String> for Rgb {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rgb> for String {
    fn from(c: Rgb) -> String {
        c.to_string()
    }
}

/// Vertical placement of the rendered line. Text is always centered horizontally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Top,
    #[default]
    #[serde(alias = "middle")]
    Center,
    Bottom,
}

impl Location {
    pub const ALL: [Location; 3] = [Location::Top, Location::Center, Location::Bottom];
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Location::Top => "top",
            Location::Center => "center",
            Location::Bottom => "bottom",
        })
    }
}

impl FromStr for Location {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "top" => Ok(Location::Top),
            "center" | "centre" | "middle" => Ok(Location::Center),
            "bottom" => Ok(Location::Bottom),
            other => Err(Error::config(format!("unknown location {other:?}"))),
        }
    }
}

/// Typographic factors for one rendering configuration.
///
/// `font_size_ratio` scales the largest size whose line fits inside
/// `max_width_fraction` of the image width. The default is the full size,
/// black, centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub font_size_ratio: f64,
    pub color: Rgb,
    pub location: Location,
    pub max_width_fraction: f64,
    pub margin_fraction: f64,
    /// `builtin:dejavu-sans` or a path to a TrueType/OpenType file.
    pub font_asset: String,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            font_size_ratio: 1.0,
            color: Rgb::BLACK,
            location: Location::Center,
            max_width_fraction: 0.9,
            margin_fraction: 0.05,
            font_asset: BUILTIN_FONT.to_string(),
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.font_size_ratio;
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::config(format!(
                "font_size_ratio must be in (0, 1], got {r}"
            )));
        }
        let w = self.max_width_fraction;
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::config(format!(
                "max_width_fraction must be in (0, 1], got {w}"
            )));
        }
        let m = self.margin_fraction;
        if !(0.0..0.5).contains(&m) {
            return Err(Error::config(format!(
                "margin_fraction must be in [0, 0.5), got {m}"
            )));
        }
        if self.font_asset.trim().is_empty() {
            return Err(Error::config("font_asset is empty"));
        }
        Ok(())
    }
}
