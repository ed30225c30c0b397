use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::features::{EDGE_WIDTH, TRIANGLE_WIDTH, VERTEX_WIDTH};
use crate::tensor::{DType, ManifestEntry, Tensor, TensorContainer};

pub const WEIGHT_MAGIC: &str = "HSMPW1";
const FORMAT_VERSION: &str = "1";

/// Name, shape and fan-in of one required tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

fn push_mlp(out: &mut Vec<TensorSpec>, prefix: &str, input: usize, hidden: usize, output: usize) {
    out.push(TensorSpec { name: format!("{prefix}.w1"), shape: vec![hidden, input], fan_in: input });
    out.push(TensorSpec { name: format!("{prefix}.b1"), shape: vec![hidden], fan_in: input });
    out.push(TensorSpec { name: format!("{prefix}.w2"), shape: vec![output, hidden], fan_in: hidden });
    out.push(TensorSpec { name: format!("{prefix}.b2"), shape: vec![output], fan_in: hidden });
}

fn push_head_mlp(out: &mut Vec<TensorSpec>, prefix: &str, heads: usize, width: usize) {
    out.push(TensorSpec { name: format!("{prefix}.w1"), shape: vec![heads, width, width], fan_in: width });
    out.push(TensorSpec { name: format!("{prefix}.b1"), shape: vec![heads, width], fan_in: width });
    out.push(TensorSpec { name: format!("{prefix}.w2"), shape: vec![heads, width, width], fan_in: width });
    out.push(TensorSpec { name: format!("{prefix}.b2"), shape: vec![heads, width], fan_in: width });
}

/// Every tensor the config requires, sorted by name.
///
/// Matrices are stored `[out, in]`; per-head layer tensors carry a leading
/// head axis.
pub fn required_tensors(config: &ModelConfig) -> Result<Vec<TensorSpec>, ModelError> {
    config.validate()?;
    let d = config.hidden_dim;
    let (k, dh) = (config.heads, config.head_dim());
    let mut out = Vec::new();
    for (dim, width) in [(0, VERTEX_WIDTH), (1, EDGE_WIDTH), (2, TRIANGLE_WIDTH)] {
        out.push(TensorSpec { name: format!("input.d{dim}.weight"), shape: vec![d, width], fan_in: width });
        out.push(TensorSpec { name: format!("input.d{dim}.bias"), shape: vec![d], fan_in: width });
    }
    for (i, sched) in config.schedule.iter().enumerate() {
        for t in 0..sched.edge_layers {
            push_head_mlp(&mut out, &format!("level{i}.edge.layer{t}"), k, dh);
        }
        for t in 0..sched.node_layers {
            push_head_mlp(&mut out, &format!("level{i}.node.layer{t}"), k, dh);
        }
    }
    for i in 0..config.levels() - 1 {
        for dim in config.refined_dims(i) {
            push_mlp(&mut out, &format!("csr.level{i}.d{dim}.inner"), d, d, d);
            push_mlp(&mut out, &format!("csr.level{i}.d{dim}.outer"), 2 * d, d, d);
        }
    }
    push_mlp(&mut out, "head", d, d, 1);
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Checks a manifest's names and shapes against the config: every required
/// tensor present with its exact shape, and nothing else.
pub fn validate_manifest<'a>(
    entries: impl IntoIterator<Item = (&'a str, &'a [usize])>,
    config: &ModelConfig,
) -> Result<(), ModelError> {
    let required: BTreeMap<String, Vec<usize>> =
        required_tensors(config)?.into_iter().map(|s| (s.name, s.shape)).collect();
    let mut seen = BTreeMap::new();
    for (name, shape) in entries {
        match required.get(name) {
            None => return Err(ModelError::UnexpectedTensor(name.to_string())),
            Some(expected) if expected.as_slice() != shape => {
                return Err(ModelError::Shape { name: name.to_string(), expected: expected.clone(), got: shape.to_vec() })
            }
            Some(_) => {
                seen.insert(name.to_string(), ());
            }
        }
    }
    if let Some(missing) = required.keys().find(|n| !seen.contains_key(*n)) {
        return Err(ModelError::MissingTensor(missing.clone()));
    }
    Ok(())
}

/// Validated named tensors plus the config they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
    seed: Option<u64>,
}

impl ModelWeights {
    pub fn new(config: ModelConfig, tensors: BTreeMap<String, Tensor>, seed: Option<u64>) -> Result<Self, ModelError> {
        validate_manifest(tensors.iter().map(|(n, t)| (n.as_str(), t.shape.as_slice())), &config)?;
        if let Some((name, _)) = tensors.iter().find(|(_, t)| t.data.iter().any(|v| !v.is_finite())) {
            return Err(ModelError::Config(format!("tensor {name} has non-finite values")));
        }
        Ok(Self { config, tensors, seed })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, ModelError> {
        self.tensors.get(name).ok_or_else(|| ModelError::MissingTensor(name.to_string()))
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn schema_version(&self) -> &str {
        &self.config.schema_version
    }

    pub fn to_container(&self) -> TensorContainer {
        let mut c = TensorContainer::new();
        c.set_header("format_version", FORMAT_VERSION);
        c.set_header("schema_version", self.config.schema_version.clone());
        c.set_header("config", serde_json::to_string(&self.config).expect("config serializes"));
        if let Some(seed) = self.seed {
            c.set_header("seed", seed.to_string());
        }
        c.tensors = self.tensors.clone();
        c
    }

    pub fn to_bytes(&self, dtype: DType) -> Vec<u8> {
        self.to_container().to_bytes(WEIGHT_MAGIC, dtype)
    }

    pub fn save(&self, path: &Path, dtype: DType) -> std::io::Result<()> {
        fs::write(path, self.to_bytes(dtype))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        // validate the manifest before decoding the blob
        let (manifest, _) = TensorContainer::read_manifest(bytes, WEIGHT_MAGIC)?;
        let header = |key: &str| manifest.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        if header("format_version") != Some(FORMAT_VERSION) {
            return Err(ModelError::Config(format!("unsupported format version {:?}", header("format_version"))));
        }
        let config: ModelConfig = serde_json::from_str(header("config").unwrap_or(""))
            .map_err(|e| ModelError::Config(format!("bad config header: {e}")))?;
        if header("schema_version") != Some(config.schema_version.as_str()) {
            return Err(ModelError::Config("schema_version header disagrees with config".into()));
        }
        validate_manifest(manifest.entries.iter().map(|e: &ManifestEntry| (e.name.as_str(), e.shape.as_slice())), &config)?;
        let seed = header("seed").map(|s| s.parse::<u64>()).transpose().map_err(|e| ModelError::Config(e.to_string()))?;
        let container = TensorContainer::from_bytes(bytes, WEIGHT_MAGIC)?;
        Self::new(config, container.tensors, seed)
    }
}

pub fn load_weights(path: &Path) -> Result<ModelWeights, ModelError> {
    let bytes = fs::read(path).map_err(|e| ModelError::Container(e.into()))?;
    ModelWeights::from_bytes(&bytes)
}

/// Seed-generated weights for tests: each value uniform in ±1/√fan_in, drawn
/// from ChaCha8 in tensor-name order.
pub fn generate_weights(config: &ModelConfig, seed: u64) -> Result<ModelWeights, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for spec in required_tensors(config)? {
        let bound = 1.0 / (spec.fan_in as f64).sqrt();
        let count: usize = spec.shape.iter().product();
        let data = (0..count)
            .map(|_| {
                let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                (2.0 * unit - 1.0) * bound
            })
            .collect();
        tensors.insert(spec.name, Tensor::new(spec.shape, data));
    }
    ModelWeights::new(config.clone(), tensors, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig::with_width(8, 2)
    }

    #[test]
    fn required_names_cover_schedule() {
        let specs = required_tensors(&small()).unwrap();
        let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        assert!(names.contains(&"level2.edge.layer3.w1"));
        assert!(!names.contains(&"level0.edge.layer0.w1"));
        assert!(names.contains(&"level0.node.layer5.b2"));
        assert!(names.contains(&"csr.level1.d2.outer.w1"));
        assert!(!names.contains(&"csr.level0.d2.inner.w1"));
        assert!(!names.contains(&"csr.level2.d0.inner.w1"));
        let outer = specs.iter().find(|s| s.name == "csr.level0.d0.outer.w1").unwrap();
        assert_eq!(outer.shape, vec![8, 16]);
        let head = specs.iter().find(|s| s.name == "head.w2").unwrap();
        assert_eq!(head.shape, vec![1, 8]);
    }

    #[test]
    fn generation_is_deterministic_and_round_trips() {
        let a = generate_weights(&small(), 7).unwrap();
        let b = generate_weights(&small(), 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_weights(&small(), 8).unwrap());
        let back = ModelWeights::from_bytes(&a.to_bytes(DType::F64)).unwrap();
        assert_eq!(back, a);
        let narrow = ModelWeights::from_bytes(&a.to_bytes(DType::F32)).unwrap();
        assert_eq!(narrow.tensors().len(), a.tensors().len());
    }

    #[test]
    fn rejects_missing_and_misshaped() {
        let w = generate_weights(&small(), 1).unwrap();
        let mut tensors = w.tensors().clone();
        tensors.remove("head.b2");
        match ModelWeights::new(small(), tensors, None) {
            Err(ModelError::MissingTensor(n)) => assert_eq!(n, "head.b2"),
            other => panic!("unexpected {other:?}"),
        }
        let mut tensors = w.tensors().clone();
        tensors.insert("input.d0.weight".into(), Tensor::new(vec![4, 75], vec![0.0; 300]));
        assert!(matches!(ModelWeights::new(small(), tensors, None), Err(ModelError::Shape { .. })));
        let mut tensors = w.tensors().clone();
        tensors.insert("extra".into(), Tensor::new(vec![1], vec![0.0]));
        assert!(matches!(ModelWeights::new(small(), tensors, None), Err(ModelError::UnexpectedTensor(_))));
    }
}
