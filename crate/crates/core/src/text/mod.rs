//! Printed and handwritten text artifacts.

mod handwriting;
mod keywords;
mod printed;
mod strokes;

use serde::{Deserialize, Serialize};

use crate::raster::PixelRect;

pub use handwriting::{
    overlay_handwriting, render_template, synthesize_handwriting, HandwritingStyle, Stencil,
};
pub use keywords::{parse_lexicon, select_keywords, tokenize, KeywordSelection, DEFAULT_LEXICON};
pub use printed::{overlay_printed_text, FontFace, PrintedOverlay, PrintedTemplate, TemplateField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Printed,
    Handwritten,
}

/// One drawn text artifact. Bounds are in pixels with exclusive upper edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactBox {
    pub kind: ArtifactKind,
    pub bbox_px: PixelRect,
    pub text: String,
}
