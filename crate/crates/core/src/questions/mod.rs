//! Question templates and per-scene question generation.

mod generate;
mod template;

pub use generate::*;
pub use template::*;
