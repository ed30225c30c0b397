//! Reference forward pass of the hierarchical simplicial message-passing
//! (HSMP) encoder and its regression head.
//!
//! Levels are indexed by ascending cutoff (level 0 is the finest, covalent
//! scale). The pass runs from the coarsest level down: at each level, edge
//! blocks update edges from their triangle cofaces, node blocks update
//! vertices from their edge cofaces, and the result gates the next finer
//! level through cross-scale refinement.

mod model;
pub mod scalar;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::SCHEMA_VERSION;
use crate::tensor::ContainerError;

pub use model::{cross_scale_refine, multi_head_block, softmax_aggregate, Csr, ForwardOutput, HsmpModel, Linear, Mlp};
pub use weights::{generate_weights, load_weights, required_tensors, validate_manifest, ModelWeights, TensorSpec, WEIGHT_MAGIC};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("feature schema mismatch: weights expect {weights:?}, features are {features:?}")]
    SchemaMismatch { weights: String, features: String },
    #[error("filtration cutoffs {got:?} do not match the model cutoffs {expected:?}")]
    Cutoffs { expected: Vec<f64>, got: Vec<f64> },
    #[error("simplex {simplex} of level {level} is missing from level {next}")]
    Nestedness { level: usize, next: usize, simplex: String },
    #[error("input mismatch: {0}")]
    Input(String),
    #[error("weight file: {0}")]
    Container(#[from] ContainerError),
}

/// Edge-update then node-update layer counts of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub edge_layers: usize,
    pub node_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub heads: usize,
    /// Ascending filtration cutoffs in Å.
    pub cutoffs: Vec<f64>,
    /// One entry per cutoff, same order.
    pub schedule: Vec<LevelSchedule>,
    pub schema_version: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 768,
            heads: 12,
            cutoffs: vec![2.0, 3.0, 4.0],
            schedule: vec![
                LevelSchedule { edge_layers: 0, node_layers: 6 },
                LevelSchedule { edge_layers: 4, node_layers: 6 },
                LevelSchedule { edge_layers: 4, node_layers: 6 },
            ],
            schema_version: SCHEMA_VERSION.to_string(),
        }
    }
}

impl ModelConfig {
    /// Default schedule and cutoffs with a different width.
    pub fn with_width(hidden_dim: usize, heads: usize) -> Self {
        Self { hidden_dim, heads, ..Self::default() }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn levels(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.heads == 0 || self.hidden_dim == 0 || self.hidden_dim % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "hidden dim {} must be a positive multiple of the head count {}",
                self.hidden_dim, self.heads
            )));
        }
        if self.cutoffs.is_empty() || self.cutoffs.len() != self.schedule.len() {
            return Err(ModelError::Config("one schedule entry per cutoff is required".into()));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) || self.cutoffs.iter().any(|c| !(*c > 0.0)) {
            return Err(ModelError::Config(format!("cutoffs {:?} must be positive and ascending", self.cutoffs)));
        }
        Ok(())
    }

    /// Dimensions refined when passing from level `level + 1` to `level`.
    /// Triangles are refined only where edge layers consume them.
    pub fn refined_dims(&self, level: usize) -> Vec<usize> {
        if self.schedule[level].edge_layers > 0 {
            vec![0, 1, 2]
        } else {
            vec![0, 1]
        }
    }

    /// Compact schedule string, coarse level first, e.g. `4/6,4/6,0/6`.
    pub fn schedule_string(&self) -> String {
        self.schedule
            .iter()
            .rev()
            .map(|s| format!("{}/{}", s.edge_layers, s.node_layers))
            .collect::<Vec<_>>()
            .join(",")
    }
}
