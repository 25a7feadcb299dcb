//! Disorder relevance diagnostics.

pub mod fractional;
pub mod measure;
pub mod overlap;
pub mod probes;

pub use fractional::*;
pub use measure::*;
pub use overlap::*;
pub use probes::*;
