use crate::error::{Error, Result};
use crate::typograph::spec::Location;

/// Pixel extent of a single rendered line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextExtent {
    pub width: u32,
    pub height: u32,
}

/// Measures the bounding box of one line of text at an integer pixel size.
///
/// Implementations must be monotone in `font_size` for a fixed text and must
/// report zero width for the empty string; the font-size search relies on both.
pub trait TextMeasurer: Send + Sync {
    fn measure(&self, text: &str, font_size: u32) -> TextExtent;
}

impl<T: TextMeasurer + ?Sized> TextMeasurer for &T {
    fn measure(&self, text: &str, font_size: u32) -> TextExtent {
        (**self).measure(text, font_size)
    }
}

/// Default fraction of the image width the line may occupy.
pub const DEFAULT_MAX_WIDTH_FRACTION: f64 = 0.9;

/// Largest font size whose line fits inside 90% of the image width.
pub fn get_max_font_size(
    measurer: &impl TextMeasurer,
    width: u32,
    height: u32,
    text: &str,
) -> Result<u32> {
    max_font_size_within(measurer, width, height, text, DEFAULT_MAX_WIDTH_FRACTION)
}

/// Binary search over `[1, width / 6]` for the largest size whose measured
/// width is at most `max_width_fraction * width`. Returns 1 when nothing fits.
pub fn max_font_size_within(
    measurer: &impl TextMeasurer,
    width: u32,
    height: u32,
    text: &str,
    max_width_fraction: f64,
) -> Result<u32> {
    if width < 6 {
        return Err(Error::InvalidGeometry(format!(
            "image width {width} < 6 leaves an empty font-size range"
        )));
    }
    if height < 1 {
        return Err(Error::InvalidGeometry("image height is zero".into()));
    }
    let w_max = max_width_fraction * f64::from(width);
    let mut lo = 1u32;
    let mut hi = width / 6;
    while lo < hi {
        #[allow(clippy::manual_div_ceil)]
        let mid = (lo + hi + 1) / 2;
        if f64::from(measurer.measure(text, mid).width) <= w_max {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Top-left corner for a `text_w` x `text_h` box: horizontally centered,
/// vertically placed by `location`, clamped so the box stays inside the image
/// whenever it can.
pub fn compute_anchor(
    width: u32,
    height: u32,
    text_w: u32,
    text_h: u32,
    location: Location,
    margin_fraction: f64,
) -> (u32, u32) {
    // Guards products like 0.95 * 100 landing a hair under the integer.
    const EPS: f64 = 1e-9;
    let x = width.saturating_sub(text_w) / 2;
    let (h, th) = (f64::from(height), f64::from(text_h));
    let y = match location {
        Location::Top => (margin_fraction * h + EPS).floor(),
        Location::Center => ((h - th) / 2.0).floor(),
        Location::Bottom => ((1.0 - margin_fraction) * h - th + EPS).floor(),
    };
    let y_max = f64::from(height.saturating_sub(text_h));
    (x, y.clamp(0.0, y_max) as u32)
}
