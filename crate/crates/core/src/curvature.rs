//! Forman curvature of simplices and the multi-cutoff curvature profiles used
//! as geometric simplex features.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::PeriodicDistanceMatrix;
use crate::rips::{build_vr_complex, RipsError, Simplex, SimplicialComplex, MAX_SUPPORTED_DIM};

pub const DEFAULT_DELTA: f64 = 0.25;
pub const DEFAULT_STEPS: usize = 5;
pub const DEFAULT_TEMPERATURE: f64 = 10.0;

/// Largest f64 below 1; normalized values are clamped to stay strictly inside (−1, 1).
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error(transparent)]
    Rips(#[from] RipsError),
    #[error("weight {weight} for {what} is not positive")]
    NonPositiveWeight { what: String, weight: f64 },
    #[error("{0} is not an edge")]
    NotAnEdge(Simplex),
    #[error("simplex {simplex} is absent from the complex at cutoff {epsilon}")]
    Absent { simplex: Simplex, epsilon: f64 },
    #[error("invalid profile parameters: {0}")]
    Params(String),
}

/// Positive simplex weights: a constant per dimension, optionally overridden
/// for individual simplices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightAssignment {
    pub per_dimension: Vec<f64>,
    #[serde(default)]
    pub overrides: Vec<WeightOverride>,
    #[serde(skip)]
    lookup: HashMap<Simplex, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOverride {
    pub simplex: Vec<usize>,
    pub weight: f64,
}

impl Default for WeightAssignment {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl WeightAssignment {
    pub fn uniform(w: f64) -> Self {
        Self { per_dimension: vec![w; MAX_SUPPORTED_DIM + 1], overrides: Vec::new(), lookup: HashMap::new() }
    }

    pub fn per_dimension(weights: Vec<f64>) -> Result<Self, CurvatureError> {
        let w = Self { per_dimension: weights, overrides: Vec::new(), lookup: HashMap::new() };
        w.validate()?;
        Ok(w)
    }

    pub fn with_override(mut self, simplex: Simplex, weight: f64) -> Result<Self, CurvatureError> {
        self.overrides.push(WeightOverride { simplex: simplex.vertices().to_vec(), weight });
        self.lookup.insert(simplex, weight);
        self.validate()?;
        Ok(self)
    }

    /// Parses a JSON weight file and validates every weight.
    pub fn from_json(text: &str) -> Result<Self, CurvatureError> {
        let mut w: Self = serde_json::from_str(text).map_err(|e| CurvatureError::Params(e.to_string()))?;
        w.lookup = w.overrides.iter().map(|o| (Simplex::new(o.simplex.clone()), o.weight)).collect();
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<(), CurvatureError> {
        for (d, &w) in self.per_dimension.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CurvatureError::NonPositiveWeight { what: format!("dimension {d}"), weight: w });
            }
        }
        for o in &self.overrides {
            if !(o.weight > 0.0 && o.weight.is_finite()) {
                return Err(CurvatureError::NonPositiveWeight {
                    what: format!("simplex {:?}", o.simplex),
                    weight: o.weight,
                });
            }
        }
        Ok(())
    }

    pub fn weight(&self, s: &Simplex) -> f64 {
        self.lookup
            .get(s)
            .copied()
            .unwrap_or_else(|| self.per_dimension.get(s.dim()).copied().unwrap_or(1.0))
    }
}

/// `#Face + #Coface − #Parallel` by simplex id. A vertex has no faces.
pub fn forman_combinatorial_id(complex: &SimplicialComplex, dim: usize, id: usize) -> i64 {
    let faces = complex.face_ids(dim, id).len() as i64;
    let cofaces = complex.coface_ids(dim, id).len() as i64;
    let parallel = complex.parallel_ids(dim, id).len() as i64;
    faces + cofaces - parallel
}

pub fn forman_combinatorial(complex: &SimplicialComplex, sigma: &Simplex) -> Result<i64, CurvatureError> {
    let id = complex.id_of(sigma).ok_or_else(|| RipsError::NotInComplex(sigma.clone()))?;
    Ok(forman_combinatorial_id(complex, sigma.dim(), id))
}

/// Combinatorial curvature of every simplex, indexed `[dim][id]`.
pub fn forman_all(complex: &SimplicialComplex) -> Vec<Vec<i64>> {
    (0..=complex.max_dim())
        .map(|d| (0..complex.count(d)).map(|i| forman_combinatorial_id(complex, d, i)).collect())
        .collect()
}

/// Weighted Forman–Ricci curvature of an edge.
pub fn forman_edge_weighted(
    complex: &SimplicialComplex,
    weights: &WeightAssignment,
    e: &Simplex,
) -> Result<f64, CurvatureError> {
    if e.vertices().len() != 2 {
        return Err(CurvatureError::NotAnEdge(e.clone()));
    }
    weights.validate()?;
    let id = complex.id_of(e).ok_or_else(|| RipsError::NotInComplex(e.clone()))?;
    let w_e = weights.weight(e);

    let coface_term: f64 = complex
        .coface_ids(1, id)
        .iter()
        .map(|&f| w_e / weights.weight(complex.simplex(2, f)))
        .sum();
    let face_term: f64 = e.vertices().iter().map(|&v| weights.weight(&Simplex::new(vec![v])) / w_e).sum();

    let mut penalty = 0.0;
    for p in complex.parallel_ids(1, id) {
        let other = complex.simplex(1, p);
        let w_o = weights.weight(other);
        let root = (w_e * w_o).sqrt();
        let shared_triangles: f64 = complex
            .coface_ids(1, id)
            .iter()
            .filter(|f| complex.coface_ids(1, p).contains(f))
            .map(|&f| root / weights.weight(complex.simplex(2, f)))
            .sum();
        let shared_vertices: f64 = e
            .vertices()
            .iter()
            .filter(|v| other.vertices().contains(v))
            .map(|&v| weights.weight(&Simplex::new(vec![v])) / root)
            .sum();
        penalty += (shared_triangles - shared_vertices).abs();
    }
    Ok(w_e * (coface_term + face_term - penalty))
}

/// Maps a curvature value into (−1, 1) with the temperature-scaled sigmoid
/// `2 / (1 + exp(−x/T)) − 1`, evaluated as the identical `tanh(x / 2T)`.
pub fn normalize_curvature(x: f64, temperature: f64) -> f64 {
    (x / (2.0 * temperature)).tanh().clamp(-BELOW_ONE, BELOW_ONE)
}

/// Cutoffs, curvature dimension and temperature of a curvature sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub delta: f64,
    pub steps: usize,
    pub temperature: f64,
    /// Dimension of the complexes rebuilt for the sweep. One above the highest
    /// featurized dimension, so top simplices see their cofaces.
    pub complex_dim: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, steps: DEFAULT_STEPS, temperature: DEFAULT_TEMPERATURE, complex_dim: 3 }
    }
}

impl ProfileParams {
    pub fn cutoffs(&self, base: f64) -> Vec<f64> {
        (0..self.steps).map(|k| base + k as f64 * self.delta).collect()
    }

    fn validate(&self) -> Result<(), CurvatureError> {
        if self.steps == 0 || !(self.delta > 0.0) || !(self.temperature > 0.0) {
            return Err(CurvatureError::Params(format!("{self:?}")));
        }
        if self.complex_dim > MAX_SUPPORTED_DIM {
            return Err(RipsError::MaxDim(self.complex_dim).into());
        }
        Ok(())
    }
}

/// Raw and normalized curvature of one simplex across a cutoff sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub base_epsilon: f64,
    pub delta: f64,
    pub raw: Vec<f64>,
    pub values: Vec<f64>,
}

fn curvature_at(
    complex: &SimplicialComplex,
    dim: usize,
    id: usize,
    weights: Option<&WeightAssignment>,
) -> Result<f64, CurvatureError> {
    match (dim, weights) {
        (1, Some(w)) => forman_edge_weighted(complex, w, complex.simplex(1, id)),
        _ => Ok(forman_combinatorial_id(complex, dim, id) as f64),
    }
}

/// Profile of a single simplex, rebuilding the complex at every sub-cutoff.
pub fn curvature_profile(
    d: &PeriodicDistanceMatrix,
    sigma: &Simplex,
    base_epsilon: f64,
    params: &ProfileParams,
    weights: Option<&WeightAssignment>,
) -> Result<CurvatureProfile, CurvatureError> {
    params.validate()?;
    let mut raw = Vec::with_capacity(params.steps);
    for eps in params.cutoffs(base_epsilon) {
        let c = build_vr_complex(d, eps, params.complex_dim.max(sigma.dim()))?;
        let id = c
            .id_of(sigma)
            .ok_or_else(|| CurvatureError::Absent { simplex: sigma.clone(), epsilon: eps })?;
        raw.push(curvature_at(&c, sigma.dim(), id, weights)?);
    }
    let values = raw.iter().map(|&x| normalize_curvature(x, params.temperature)).collect();
    Ok(CurvatureProfile { base_epsilon, delta: params.delta, raw, values })
}

/// Profiles of every simplex of `base` up to `max_dim`, indexed `[dim][id]`.
///
/// Each sub-cutoff complex is built once and shared by all simplices; the
/// result equals calling [`curvature_profile`] per simplex.
pub fn level_profiles(
    d: &PeriodicDistanceMatrix,
    base: &SimplicialComplex,
    max_dim: usize,
    params: &ProfileParams,
    weights: Option<&WeightAssignment>,
) -> Result<Vec<Vec<CurvatureProfile>>, CurvatureError> {
    params.validate()?;
    let complex_dim = params.complex_dim.max(max_dim);
    let sweeps: Vec<Vec<Vec<f64>>> = params
        .cutoffs(base.epsilon())
        .into_par_iter()
        .map(|eps| -> Result<Vec<Vec<f64>>, CurvatureError> {
            let c = build_vr_complex(d, eps, complex_dim)?;
            (0..=max_dim)
                .map(|dim| {
                    base.simplices(dim)
                        .iter()
                        .map(|s| {
                            let id = c
                                .id_of(s)
                                .ok_or_else(|| CurvatureError::Absent { simplex: s.clone(), epsilon: eps })?;
                            curvature_at(&c, dim, id, weights)
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((0..=max_dim)
        .map(|dim| {
            (0..base.count(dim))
                .map(|i| {
                    let raw: Vec<f64> = sweeps.iter().map(|s| s[dim][i]).collect();
                    let values = raw.iter().map(|&x| normalize_curvature(x, params.temperature)).collect();
                    CurvatureProfile { base_epsilon: base.epsilon(), delta: params.delta, raw, values }
                })
                .collect()
        })
        .collect())
}
