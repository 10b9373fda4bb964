//! Synthetic training data: labelled, blur-degraded text lines.

mod corpus;
mod dataset;
mod font;
mod label;
mod page;
mod render;

pub use corpus::TextCorpus;
pub use dataset::{dataset_sample, generate_dataset, DatasetManifest, ManifestRecord, MANIFEST_FILE};
pub use font::{BuiltinFace, BuiltinStyle, FontSpec, GlyphBitmap, TtfFace, Typeface};
pub use label::{
    invert_label, quality_label, LabelFnConfig, KNOTS, SCALING_GROUPS, SIGMA_MAX, SIGMA_MIN,
};
pub use page::{compose_page, random_page, text_for_width, PageLayout, PageLine, PageLineSpec, SyntheticPage};
pub(crate) use render::stream_rng;
pub use render::{
    render_text_line, InkLayer, LineRecipe, LineSynthesizer, Script, SynthConfig, TextLineSample,
};
