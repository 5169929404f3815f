use image::{Rgb as Pixel, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::typograph::font::Typeface;
use crate::typograph::layout::{compute_anchor, max_font_size_within, TextMeasurer};
use crate::typograph::spec::RenderSpec;

/// Region of the image the text was drawn into, clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl TextBox {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

#[derive(Debug, Clone)]
pub struct RenderedImage {
    pub image: RgbImage,
    pub applied_spec: RenderSpec,
    pub applied_font_size: u32,
    /// `None` when the text was empty.
    pub text_bbox: Option<TextBox>,
}

/// Font size after applying the spec's ratio to the largest fitting size.
pub fn applied_font_size(
    measurer: &impl TextMeasurer,
    width: u32,
    height: u32,
    text: &str,
    spec: &RenderSpec,
) -> Result<u32> {
    let max = max_font_size_within(measurer, width, height, text, spec.max_width_fraction)?;
    Ok(((spec.font_size_ratio * f64::from(max)).floor() as u32).max(1))
}

/// Draws `text` onto a copy of `image` as a single line.
///
/// Pixels outside the returned `text_bbox` are never modified.
pub fn render_text(
    image: &RgbImage,
    text: &str,
    spec: &RenderSpec,
    face: &Typeface,
) -> Result<RenderedImage> {
    spec.validate()?;
    let (width, height) = image.dimensions();
    let size = applied_font_size(face, width, height, text, spec)?;
    let mut out = image.clone();
    if text.is_empty() {
        return Ok(RenderedImage {
            image: out,
            applied_spec: spec.clone(),
            applied_font_size: size,
            text_bbox: None,
        });
    }

    let extent = face.measure(text, size);
    if size == 1 && f64::from(extent.width) > spec.max_width_fraction * f64::from(width) {
        log::warn!(
            "text of {} chars overflows {}px wide image even at 1px",
            text.chars().count(),
            width
        );
    }
    let (x, y) = compute_anchor(
        width,
        height,
        extent.width,
        extent.height,
        spec.location,
        spec.margin_fraction,
    );
    let bbox = TextBox {
        x,
        y,
        w: extent.width.min(width - x),
        h: extent.height.min(height - y),
    };
    let clip = (
        i64::from(bbox.x),
        i64::from(bbox.y),
        i64::from(bbox.x + bbox.w),
        i64::from(bbox.y + bbox.h),
    );
    let color = spec.color.0;
    face.rasterize(text, size, i64::from(x), i64::from(y), clip, |px, py, coverage| {
        let alpha = (coverage.clamp(0.0, 1.0) * 255.0).round() as u16;
        if alpha == 0 {
            return;
        }
        let p = out.get_pixel_mut(px, py);
        *p = blend(*p, color, alpha);
    });

    Ok(RenderedImage {
        image: out,
        applied_spec: spec.clone(),
        applied_font_size: size,
        text_bbox: Some(bbox),
    })
}

fn blend(dst: Pixel<u8>, color: [u8; 3], alpha: u16) -> Pixel<u8> {
    let mix = |d: u8, c: u8| -> u8 {
        ((u16::from(d) * (255 - alpha) + u16::from(c) * alpha + 127) / 255) as u8
    };
    Pixel([
        mix(dst[0], color[0]),
        mix(dst[1], color[1]),
        mix(dst[2], color[2]),
    ])
}
