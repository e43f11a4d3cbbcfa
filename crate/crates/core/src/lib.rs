pub mod affine;
pub mod circle;
pub mod combinat;
pub mod conjugacy;
pub mod error;
pub mod fit;
pub mod giet;
pub mod matrix;
pub mod oseledets;
pub mod pipeline;
pub mod rauzy;
pub mod real;
pub mod selftest;
pub mod shadow;

pub use combinat::{Permutation, SingularityStructure};
pub use error::{Error, Result};
pub use matrix::IntMatrix;
pub use rauzy::{CocycleWindow, Iet, RauzyPath, Schedule, StepRecord};
