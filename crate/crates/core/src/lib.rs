//! Hausdorff dimension of self-similar and branch groups acting on rooted
//! trees, computed from congruence quotients.

pub mod dimension;
pub mod directed;
pub mod error;
pub mod layers;
pub mod permgroup;
pub mod tree;
pub mod zmod;

pub use error::{Error, Result};
