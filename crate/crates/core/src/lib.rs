//! Bilinear recurrent fractal interpolation surfaces on rectangular grids:
//! construction, exact grid sampling, partition analysis and box-counting
//! dimension, both theoretical and empirical.

pub mod attractor;
pub mod bilinear;
pub mod cli;
pub mod dimension;
pub mod empirical;
pub mod error;
pub mod example;
pub mod grid;
pub mod partition;

pub use bilinear::{BilinearRfis, Field, SampledSurface, ScalingFactors};
pub use error::{DimensionError, EmpiricalError, GridError, PartitionError, RfisError, SpectralError, UniformSumError};
pub use grid::{AddressMaps, Axis, Cell, IndexRect, InterpolationData};
pub use partition::{Partition, TransferMatrix};
