//! Single-line text rendering onto product images.

mod font;
mod layout;
mod render;
mod spec;

pub use font::{Typeface, BUILTIN_FONT};
pub use layout::{
    compute_anchor, get_max_font_size, max_font_size_within, TextExtent, TextMeasurer,
    DEFAULT_MAX_WIDTH_FRACTION,
};
pub use render::{applied_font_size, render_text, RenderedImage, TextBox};
pub use spec::{Location, RenderSpec, Rgb};
