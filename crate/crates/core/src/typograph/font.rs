//! Font loading, line layout and glyph rasterization.
//!
//! Layout happens in unscaled font units and is scaled to pixels with a
//! single multiply per edge, so the measured box grows monotonically with the
//! font size and always contains every pixel the rasterizer touches.

use std::path::Path;
use std::sync::Arc;

use ab_glyph::{point, Font, FontArc, GlyphId, PxScale};

use crate::error::{Error, Result};
use crate::typograph::layout::{TextExtent, TextMeasurer};

pub const BUILTIN_FONT: &str = "builtin:dejavu-sans";

static DEJAVU_SANS: &[u8] = include_bytes!("../../assets/fonts/DejaVuSans.ttf");

/// A loaded font face. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct Typeface {
    font: FontArc,
    asset: Arc<str>,
    units_per_em: f64,
}

impl std::fmt::Debug for Typeface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Typeface").field("asset", &self.asset).finish()
    }
}

/// One line laid out in font units (y up, baseline at 0, pen starting at 0).
#[derive(Debug, Clone)]
struct UnitLine {
    glyphs: Vec<(GlyphId, f64)>,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Typeface {
    pub fn builtin() -> Self {
        let font = FontArc::try_from_slice(DEJAVU_SANS).expect("bundled font parses");
        Self::from_font(font, BUILTIN_FONT)
    }

    /// Loads `builtin:dejavu-sans` or a font file path.
    pub fn load(asset: &str) -> Result<Self> {
        if asset == BUILTIN_FONT {
            return Ok(Self::builtin());
        }
        if let Some(name) = asset.strip_prefix("builtin:") {
            return Err(Error::config(format!("unknown builtin font {name:?}")));
        }
        let path = Path::new(asset);
        let bytes = std::fs::read(path)
            .map_err(|e| Error::config(format!("font asset {}: {e}", path.display())))?;
        let font = FontArc::try_from_vec(bytes)
            .map_err(|e| Error::config(format!("font asset {}: {e}", path.display())))?;
        Ok(Self::from_font(font, asset))
    }

    fn from_font(font: FontArc, asset: &str) -> Self {
        let units_per_em = f64::from(font.units_per_em().unwrap_or(1000.0));
        Self {
            font,
            asset: asset.into(),
            units_per_em,
        }
    }

    pub fn asset(&self) -> &str {
        &self.asset
    }

    fn layout_units(&self, text: &str) -> UnitLine {
        let mut line = UnitLine {
            glyphs: Vec::with_capacity(text.len()),
            left: 0.0,
            right: 0.0,
            top: 0.0,
            bottom: 0.0,
        };
        if text.is_empty() {
            return line;
        }
        line.top = f64::from(self.font.ascent_unscaled());
        line.bottom = f64::from(self.font.descent_unscaled()).min(0.0);
        let mut pen = 0.0f64;
        let mut prev: Option<GlyphId> = None;
        for ch in text.chars() {
            let id = self.font.glyph_id(ch);
            if let Some(p) = prev {
                pen += f64::from(self.font.kern_unscaled(p, id));
            }
            if let Some(outline) = self.font.outline(id) {
                let b = outline.bounds;
                line.left = line.left.min(pen + f64::from(b.min.x));
                line.right = line.right.max(pen + f64::from(b.max.x));
                line.top = line.top.max(f64::from(b.max.y));
                line.bottom = line.bottom.min(f64::from(b.min.y));
            }
            line.glyphs.push((id, pen));
            pen += f64::from(self.font.h_advance_unscaled(id));
            prev = Some(id);
        }
        line.right = line.right.max(pen);
        line
    }

    /// Pixel metrics of a laid out line at `size` px per em.
    fn scaled(&self, line: &UnitLine, size: u32) -> ScaledLine {
        let f = f64::from(size) / self.units_per_em;
        let left = (line.left * f).floor();
        let right = (line.right * f).ceil();
        let top = (line.top * f).ceil();
        let bottom = (line.bottom * f).floor();
        ScaledLine {
            factor: f,
            pen_offset: -left,
            baseline: top,
            extent: TextExtent {
                width: clamp_u32(right - left),
                height: clamp_u32(top - bottom),
            },
        }
    }

    /// Rasterizes `text` with its box's top-left corner at (`x`, `y`),
    /// calling `plot(px, py, coverage)` only for pixels inside `clip`
    /// (`x0, y0, x1, y1`, exclusive upper bounds).
    pub(crate) fn rasterize(
        &self,
        text: &str,
        size: u32,
        x: i64,
        y: i64,
        clip: (i64, i64, i64, i64),
        mut plot: impl FnMut(u32, u32, f32),
    ) -> TextExtent {
        let line = self.layout_units(text);
        let scaled = self.scaled(&line, size);
        if line.glyphs.is_empty() {
            return scaled.extent;
        }
        let height_units = f64::from(self.font.height_unscaled());
        let px = (f64::from(size) * height_units / self.units_per_em) as f32;
        let scale = PxScale::from(px);
        let origin_x = x as f64 + scaled.pen_offset;
        let baseline_y = (y as f64 + scaled.baseline) as f32;
        let (cx0, cy0, cx1, cy1) = clip;
        for &(id, pen) in &line.glyphs {
            let glyph = id.with_scale_and_position(
                scale,
                point((origin_x + pen * scaled.factor) as f32, baseline_y),
            );
            let Some(outlined) = self.font.outline_glyph(glyph) else {
                continue;
            };
            let bounds = outlined.px_bounds();
            let (gx, gy) = (bounds.min.x as i64, bounds.min.y as i64);
            outlined.draw(|dx, dy, coverage| {
                let (px, py) = (gx + i64::from(dx), gy + i64::from(dy));
                if px >= cx0 && px < cx1 && py >= cy0 && py < cy1 {
                    plot(px as u32, py as u32, coverage);
                }
            });
        }
        scaled.extent
    }
}

struct ScaledLine {
    factor: f64,
    pen_offset: f64,
    baseline: f64,
    extent: TextExtent,
}

fn clamp_u32(v: f64) -> u32 {
    v.clamp(0.0, f64::from(u32::MAX)) as u32
}

impl TextMeasurer for Typeface {
    fn measure(&self, text: &str, font_size: u32) -> TextExtent {
        let line = self.layout_units(text);
        self.scaled(&line, font_size).extent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_measures_zero() {
        let face = Typeface::builtin();
        for s in [1, 10, 100, 400] {
            assert_eq!(face.measure("", s), TextExtent::default());
        }
    }

    #[test]
    fn wider_text_is_wider() {
        let face = Typeface::builtin();
        let a = face.measure("NIKE", 40);
        let b = face.measure("NIKE DUNK", 40);
        assert!(b.width > a.width);
        assert!(a.height >= 40);
    }

    #[test]
    fn missing_font_is_config_error() {
        let err = Typeface::load("/nonexistent/font.ttf").unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(Typeface::load("builtin:comic-sans").unwrap_err().is_config());
    }

    #[test]
    fn load_from_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ttf");
        std::fs::write(&path, DEJAVU_SANS).unwrap();
        let face = Typeface::load(path.to_str().unwrap()).unwrap();
        assert_eq!(face.measure("abc", 30), Typeface::builtin().measure("abc", 30));
        std::fs::write(&path, b"not a font").unwrap();
        assert!(Typeface::load(path.to_str().unwrap()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn shipped_font_is_monotone(text in "[ -~]{0,60}", s in 1u32..400) {
            let face = Typeface::builtin();
            let a = face.measure(&text, s);
            let b = face.measure(&text, s + 1);
            prop_assert!(a.width <= b.width);
            prop_assert!(a.height <= b.height);
        }

        #[test]
        fn unicode_text_is_monotone(text in "\\PC{0,30}", s in 1u32..200, step in 1u32..50) {
            let face = Typeface::builtin();
            prop_assert!(face.measure(&text, s).width <= face.measure(&text, s + step).width);
        }
    }
}
