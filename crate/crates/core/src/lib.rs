//! Super Characters: text plus tabular attributes rendered as 224×224
//! images and classified with a small CNN.
//!
//! Pipeline: [`dataset`] parses and splits the corpus, [`glyph`] and
//! [`layout`] draw images, [`model`] trains and quantizes the CNN,
//! [`matrix`] runs the task × fold protocol and [`eval`] scores it.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod export;
pub mod glyph;
pub mod layout;
pub mod matrix;
pub mod model;
pub mod synthetic;

pub use dataset::{Record, Task};
pub use error::{Error, Result};
pub use exec::Exec;
pub use layout::{LayoutSpec, Scheme, SuperImage};
