//! Dispersion, passivity and energy-decay analysis for generalized Lorentz
//! media.

pub mod material;
pub mod poly;
pub mod herglotz;
pub mod quad;
pub mod assign;
pub mod fit;
pub mod dispersion;
pub mod modal;
pub mod decay;
pub mod spec_file;
