use rayon::prelude::*;

use super::scalar::{sorted_sum, Dual, Real};
use super::{ModelConfig, ModelError, ModelWeights};
use crate::features::SimplexFeatureSet;
use crate::rips::{Filtration, SimplicialComplex};
use crate::tensor::Matrix;

/// `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    w: Matrix<T>,
    b: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(w: Matrix<T>, b: Vec<T>) -> Self {
        assert_eq!(w.rows(), b.len(), "bias length");
        Self { w, b }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.w.cols());
        (0..self.w.rows())
            .map(|o| {
                let mut acc = self.b[o];
                for (w, v) in self.w.row(o).iter().zip(x) {
                    acc = acc + *w * *v;
                }
                acc
            })
            .collect()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }
}

/// Two linear layers with ReLU between.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
}

impl<T: Real> Mlp<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let h: Vec<T> = self.l1.apply(x).into_iter().map(Real::relu).collect();
        self.l2.apply(&h)
    }
}

/// Gate MLPs of one refined dimension.
#[derive(Debug, Clone)]
pub struct Csr<T> {
    pub inner: Mlp<T>,
    pub outer: Mlp<T>,
}

impl<T: Real> Csr<T> {
    /// `x_f + x_c ⊙ outer(x_c ∥ inner(x_c))` for one simplex.
    pub fn apply(&self, fine: &[T], coarse: &[T]) -> Vec<T> {
        let mut cat = coarse.to_vec();
        cat.extend(self.inner.apply(coarse));
        let gate = self.outer.apply(&cat);
        fine.iter().zip(coarse).zip(gate).map(|((&f, &c), g)| f + c * g).collect()
    }
}

/// Channel-wise softmax-weighted sum of messages of width `width`.
/// No messages gives the zero vector.
pub fn softmax_aggregate<T: Real>(messages: &[Vec<T>], width: usize) -> Vec<T> {
    if messages.is_empty() {
        return vec![T::zero(); width];
    }
    let mut weights = Vec::with_capacity(messages.len());
    let mut weighted = Vec::with_capacity(messages.len());
    (0..width)
        .map(|c| {
            let shift = messages.iter().map(|m| m[c].value()).fold(f64::NEG_INFINITY, f64::max);
            let shift = T::from_f64(shift);
            weights.clear();
            weighted.clear();
            for m in messages {
                let w = (m[c] - shift).exp();
                weights.push(w);
                weighted.push(w * m[c]);
            }
            sorted_sum(&mut weighted) / sorted_sum(&mut weights)
        })
        .collect()
}

/// Runs `layers.len()` multi-head layers over the `dim`-simplices of `complex`.
///
/// `layers[t][h]` is the update MLP of head `h` in layer `t`. Each simplex
/// receives one message per (upper-adjacent neighbour, shared coface) pair,
/// `ReLU(h_τ + h_σ')` on its head slice, taken from the coface rows of
/// `cofaces`.
pub fn multi_head_block<T: Real>(
    state: &Matrix<T>,
    cofaces: &Matrix<T>,
    complex: &SimplicialComplex,
    dim: usize,
    layers: &[Vec<Mlp<T>>],
) -> Result<Matrix<T>, ModelError> {
    let width = state.cols();
    if state.rows() != complex.count(dim) {
        return Err(ModelError::Input(format!(
            "{} state rows for {} simplices of dimension {dim}",
            state.rows(),
            complex.count(dim)
        )));
    }
    if layers.is_empty() {
        return Ok(state.clone());
    }
    if complex.max_dim() <= dim {
        return Err(ModelError::Input(format!("complex has no cofaces for dimension {dim}")));
    }
    if cofaces.rows() != complex.count(dim + 1) || cofaces.cols() != width {
        return Err(ModelError::Input(format!("coface state is {}x{}", cofaces.rows(), cofaces.cols())));
    }
    let heads = layers[0].len();
    if heads == 0 || width % heads != 0 || layers.iter().any(|l| l.len() != heads) {
        return Err(ModelError::Config(format!("width {width} is not divisible by {heads} heads")));
    }
    let dh = width / heads;
    let neighbours: Vec<Vec<(usize, usize)>> = (0..state.rows()).map(|id| complex.upper_adjacent_ids(dim, id)).collect();

    let mut current = state.clone();
    for layer in layers {
        let rows: Vec<Vec<T>> = (0..current.rows())
            .into_par_iter()
            .map(|id| {
                let own = current.row(id);
                let mut out = Vec::with_capacity(width);
                for (h, mlp) in layer.iter().enumerate() {
                    let range = h * dh..(h + 1) * dh;
                    let messages: Vec<Vec<T>> = neighbours[id]
                        .iter()
                        .map(|&(n, c)| {
                            let nb = &current.row(n)[range.clone()];
                            let tau = &cofaces.row(c)[range.clone()];
                            tau.iter().zip(nb).map(|(&t, &s)| (t + s).relu()).collect()
                        })
                        .collect();
                    let agg = softmax_aggregate(&messages, dh);
                    let input: Vec<T> = own[range].iter().zip(agg).map(|(&x, a)| x + a).collect();
                    out.extend(mlp.apply(&input));
                }
                out
            })
            .collect();
        current = Matrix::from_rows(width, &rows);
    }
    Ok(current)
}

/// Refines every `dim`-simplex of `fine_complex` from its namesake in
/// `coarse_complex`.
pub fn cross_scale_refine<T: Real>(
    fine: &Matrix<T>,
    fine_complex: &SimplicialComplex,
    fine_level: usize,
    coarse: &Matrix<T>,
    coarse_complex: &SimplicialComplex,
    dim: usize,
    csr: &Csr<T>,
) -> Result<Matrix<T>, ModelError> {
    let rows = fine_complex
        .simplices(dim)
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let cid = coarse_complex.id_of(s).ok_or_else(|| ModelError::Nestedness {
                level: fine_level,
                next: fine_level + 1,
                simplex: s.to_string(),
            })?;
            Ok(csr.apply(fine.row(id), coarse.row(cid)))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Matrix::from_rows(fine.cols(), &rows))
}

#[derive(Debug, Clone)]
struct LevelBlocks<T> {
    edge: Vec<Vec<Mlp<T>>>,
    node: Vec<Vec<Mlp<T>>>,
}

/// Result of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// One row per chemical atom, in complex vertex order.
    pub atom_embeddings: Matrix<T>,
    pub polymer_embedding: Vec<T>,
    pub prediction: T,
}

/// Weights lifted to the scalar type `T`, ready for inference.
#[derive(Debug, Clone)]
pub struct HsmpModel<T> {
    config: ModelConfig,
    input: Vec<Linear<T>>,
    levels: Vec<LevelBlocks<T>>,
    /// `csr[i][d]` refines dimension `d` of level `i` from level `i + 1`.
    csr: Vec<Vec<Option<Csr<T>>>>,
    head: Mlp<T>,
}

impl HsmpModel<f64> {
    pub fn new(weights: &ModelWeights) -> Result<Self, ModelError> {
        Self::lift(weights, |_, _, v| v)
    }
}

impl HsmpModel<Dual> {
    /// Dual-number model whose tangent is `direction` on tensor `name` and
    /// zero elsewhere; the prediction's tangent is the directional derivative.
    pub fn with_tangent(weights: &ModelWeights, name: &str, direction: &[f64]) -> Result<Self, ModelError> {
        let t = weights.tensor(name)?;
        if t.data.len() != direction.len() {
            return Err(ModelError::Input(format!("direction has {} entries for {name}", direction.len())));
        }
        Self::lift(weights, |n, i, v| Dual::new(v, if n == name { direction[i] } else { 0.0 }))
    }
}

impl<T: Real> HsmpModel<T> {
    fn lift(weights: &ModelWeights, f: impl Fn(&str, usize, f64) -> T) -> Result<Self, ModelError> {
        let config = weights.config().clone();
        let (k, dh) = (config.heads, config.head_dim());
        let values = |name: &str| -> Result<Vec<T>, ModelError> {
            Ok(weights.tensor(name)?.data.iter().enumerate().map(|(i, &v)| f(name, i, v)).collect())
        };
        let linear = |w: &str, b: &str| -> Result<Linear<T>, ModelError> {
            let shape = &weights.tensor(w)?.shape;
            Ok(Linear::new(Matrix::from_vec(shape[0], shape[1], values(w)?), values(b)?))
        };
        let mlp = |prefix: &str| -> Result<Mlp<T>, ModelError> {
            Ok(Mlp {
                l1: linear(&format!("{prefix}.w1"), &format!("{prefix}.b1"))?,
                l2: linear(&format!("{prefix}.w2"), &format!("{prefix}.b2"))?,
            })
        };
        let head_mlps = |prefix: &str| -> Result<Vec<Mlp<T>>, ModelError> {
            let (w1, b1) = (values(&format!("{prefix}.w1"))?, values(&format!("{prefix}.b1"))?);
            let (w2, b2) = (values(&format!("{prefix}.w2"))?, values(&format!("{prefix}.b2"))?);
            let (ws, bs) = (dh * dh, dh);
            Ok((0..k)
                .map(|h| Mlp {
                    l1: Linear::new(Matrix::from_vec(dh, dh, w1[h * ws..(h + 1) * ws].to_vec()), b1[h * bs..(h + 1) * bs].to_vec()),
                    l2: Linear::new(Matrix::from_vec(dh, dh, w2[h * ws..(h + 1) * ws].to_vec()), b2[h * bs..(h + 1) * bs].to_vec()),
                })
                .collect())
        };

        let input = (0..3)
            .map(|d| linear(&format!("input.d{d}.weight"), &format!("input.d{d}.bias")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut levels = Vec::with_capacity(config.levels());
        for (i, s) in config.schedule.iter().enumerate() {
            levels.push(LevelBlocks {
                edge: (0..s.edge_layers).map(|t| head_mlps(&format!("level{i}.edge.layer{t}"))).collect::<Result<_, _>>()?,
                node: (0..s.node_layers).map(|t| head_mlps(&format!("level{i}.node.layer{t}"))).collect::<Result<_, _>>()?,
            });
        }
        let mut csr = Vec::new();
        for i in 0..config.levels() - 1 {
            let mut per_dim = vec![None, None, None];
            for d in config.refined_dims(i) {
                per_dim[d] = Some(Csr {
                    inner: mlp(&format!("csr.level{i}.d{d}.inner"))?,
                    outer: mlp(&format!("csr.level{i}.d{d}.outer"))?,
                });
            }
            csr.push(per_dim);
        }
        let head = mlp("head")?;
        Ok(Self { config, input, levels, csr, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn project(&self, dim: usize, features: &Matrix<f64>) -> Matrix<T> {
        let layer = &self.input[dim];
        let rows: Vec<Vec<T>> = (0..features.rows())
            .map(|r| {
                let x: Vec<T> = features.row(r).iter().map(|&v| T::from_f64(v)).collect();
                layer.apply(&x)
            })
            .collect();
        Matrix::from_rows(layer.out_dim(), &rows)
    }

    /// Coarse-to-fine pass over all levels, mean pooling of the finest-level
    /// vertex states, and the regression head.
    pub fn forward(&self, features: &[SimplexFeatureSet], filtration: &Filtration) -> Result<ForwardOutput<T>, ModelError> {
        let cutoffs = filtration.cutoffs();
        if cutoffs != self.config.cutoffs {
            return Err(ModelError::Cutoffs { expected: self.config.cutoffs.clone(), got: cutoffs });
        }
        if features.len() != filtration.len() {
            return Err(ModelError::Input(format!("{} feature levels for {} complexes", features.len(), filtration.len())));
        }
        let mut coarser: Option<Vec<Matrix<T>>> = None;
        for i in (0..filtration.len()).rev() {
            let complex = filtration.level(i);
            let feats = &features[i];
            let mut x: Vec<Matrix<T>> = Vec::with_capacity(3);
            for d in 0..3 {
                let m = feats.by_dim(d);
                let expected = if d <= complex.max_dim() { complex.count(d) } else { 0 };
                if m.rows() != expected {
                    return Err(ModelError::Input(format!(
                        "level {i} has {} feature rows for {expected} simplices of dimension {d}",
                        m.rows()
                    )));
                }
                x.push(self.project(d, m));
            }
            if let Some(prev) = &coarser {
                let coarse_complex = filtration.level(i + 1);
                for (d, gate) in self.csr[i].iter().enumerate() {
                    if let Some(gate) = gate {
                        x[d] = cross_scale_refine(&x[d], complex, i, &prev[d], coarse_complex, d, gate)?;
                    }
                }
            }
            let blocks = &self.levels[i];
            if !blocks.edge.is_empty() {
                x[1] = multi_head_block(&x[1], &x[2], complex, 1, &blocks.edge)?;
            }
            if !blocks.node.is_empty() {
                x[0] = multi_head_block(&x[0], &x[1], complex, 0, &blocks.node)?;
            }
            coarser = Some(x);
        }
        let atoms = coarser.expect("at least one level").swap_remove(0);
        let n = atoms.rows();
        if n == 0 {
            return Err(ModelError::Input("polymer has no atoms".into()));
        }
        let scale = T::from_f64(n as f64);
        let polymer_embedding: Vec<T> = (0..atoms.cols())
            .map(|c| {
                let mut col: Vec<T> = (0..n).map(|r| atoms.row(r)[c]).collect();
                sorted_sum(&mut col) / scale
            })
            .collect();
        let prediction = self.head.apply(&polymer_embedding)[0];
        Ok(ForwardOutput { atom_embeddings: atoms, polymer_embedding, prediction })
    }
}
