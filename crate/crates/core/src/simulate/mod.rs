//! Monte Carlo sampling of stationary Gaussian processes and fields, and
//! empirical level-set statistics on the sampled grids.

mod count;
mod ensemble;
mod sample1d;
mod sample2d;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub use count::{contour_length, count_crossings, count_crossings_strided, count_roots_2d, crossing_locations, RootCount};
pub use ensemble::{
    run_ensemble, EnsembleConfig, EnsembleTarget, Level, LevelAggregate, ReplicateRecord, ResolutionAggregate, SimulationEnsemble,
};
pub use sample1d::{sample_process_1d, Circulant1D, FrequencyLaw, ProcessSampler1D, SamplerOptions, SamplingMethod, PSD_TOL};
pub use sample2d::{sample_field_2d, FieldSampler2D, LayerSampler};

/// Substream `stream` of the master seed. Streams are independent and can
/// be consumed in any order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples on a uniform grid. Two-dimensional layers are stored row by row,
/// `layer[j * nx + i]` being the value at `(i delta, j delta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub layers: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(shape: Vec<usize>, spacing: f64, layers: Vec<Vec<f64>>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 2 || layers.is_empty() || !(spacing > 0.0) {
            return Err(Error::InvalidParameter("grid field needs 1 or 2 axes, a layer and positive spacing".into()));
        }
        if layers.iter().any(|l| l.len() != len) {
            return Err(Error::InvalidParameter(format!("every layer must hold {len} values")));
        }
        if layers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid field values must be finite".into()));
        }
        Ok(GridField { shape, spacing, layers })
    }

    pub fn nx(&self) -> usize {
        self.shape[0]
    }

    pub fn ny(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn at(&self, layer: usize, i: usize, j: usize) -> f64 {
        self.layers[layer][j * self.nx() + i]
    }

    /// Empirical variance of a layer about its empirical mean.
    pub fn empirical_variance(&self, layer: usize) -> f64 {
        let v = &self.layers[layer];
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
    }
}
