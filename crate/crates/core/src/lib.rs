//! Region-based active contours combining an exponential-family noise prior
//! with a scale- and translation-invariant Legendre-moment shape prior.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod noise;
pub mod shape;
pub mod synth;

pub use error::{Error, Result};
pub use evolution::{
    segment, segment_observed, EnergyBreakdown, EvolutionConfig, EvolutionTrace, NoiseModels,
    Segmentation, Status,
};
pub use grid::{BoundaryPerturbation, ImageGrid, LevelSetField, Pixel, RegionMask};
pub use noise::{NaturalParams, NoiseFamily, SufficientStats};
pub use shape::{GeometricMoments, LegendreBasis, MomentVector, ShapeGradient};
