//! End-to-end glue: unit → distance matrix → filtration → features → prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{level_profiles, ProfileParams, WeightAssignment};
use crate::features::{assemble_features, features_to_container, SimplexFeatureSet, FEATURE_MAGIC, SCHEMA_VERSION};
use crate::features::{EDGE_WIDTH, TRIANGLE_WIDTH, VERTEX_WIDTH};
use crate::hsmp::{HsmpModel, ModelError, ModelWeights};
use crate::metric::{intra_unit_distance_matrix, periodic_distance_matrix, PeriodicDistanceMatrix};
use crate::polymer::{enumerate_cyclic_permutations, validate_frames, Diagnostic, RepeatingUnit, Severity};
use crate::rips::{build_filtration, Filtration, Simplex, SimplicialComplex, DEFAULT_MAX_DIM};
use crate::tensor::{Matrix, TensorContainer};
use crate::Error;

pub const DEFAULT_CUTOFFS: [f64; 3] = [2.0, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizeOptions {
    pub cutoffs: Vec<f64>,
    pub profile: ProfileParams,
    /// `false` uses the intra-unit matrix of frame 0 only.
    pub periodic: bool,
    #[serde(skip)]
    pub edge_weights: Option<WeightAssignment>,
}

impl Default for FeaturizeOptions {
    fn default() -> Self {
        Self { cutoffs: DEFAULT_CUTOFFS.to_vec(), profile: ProfileParams::default(), periodic: true, edge_weights: None }
    }
}

/// Filtration and per-level features of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedUnit {
    pub filtration: Filtration,
    pub levels: Vec<SimplexFeatureSet>,
    pub schema_version: String,
    pub periodic: bool,
}

/// Distance matrix over the unit's chemical atoms.
pub fn distance_matrix(unit: &RepeatingUnit, periodic: bool) -> Result<PeriodicDistanceMatrix, Error> {
    let frames = unit.chemical_frames();
    Ok(if periodic { periodic_distance_matrix(&frames)? } else { intra_unit_distance_matrix(&frames[0])? })
}

/// Rotation and frame checks. Errors abort featurization; warnings are logged.
pub fn check_unit(unit: &RepeatingUnit) -> Result<Vec<Diagnostic>, Error> {
    let specs = enumerate_cyclic_permutations(unit)?;
    let diagnostics = validate_frames(unit, &specs);
    if let Some(d) = diagnostics.iter().find(|d| d.severity == Severity::Error) {
        return Err(Error::Validation(d.message.clone()));
    }
    for d in &diagnostics {
        log::warn!("{}", d.message);
    }
    Ok(diagnostics)
}

pub fn build_unit_filtration(unit: &RepeatingUnit, options: &FeaturizeOptions) -> Result<(PeriodicDistanceMatrix, Filtration), Error> {
    let d = distance_matrix(unit, options.periodic)?;
    let filtration = build_filtration(&d, &options.cutoffs, DEFAULT_MAX_DIM)?;
    Ok((d, filtration))
}

pub fn featurize_unit(unit: &RepeatingUnit, options: &FeaturizeOptions) -> Result<FeaturizedUnit, Error> {
    check_unit(unit)?;
    let (d, filtration) = build_unit_filtration(unit, options)?;
    let profiles = filtration
        .levels()
        .iter()
        .map(|c| level_profiles(&d, c, DEFAULT_MAX_DIM, &options.profile, options.edge_weights.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let levels = assemble_features(unit, &filtration, &profiles)?;
    Ok(FeaturizedUnit { filtration, levels, schema_version: SCHEMA_VERSION.to_string(), periodic: options.periodic })
}

fn header_value<'a>(c: &'a TensorContainer, key: &str) -> Result<&'a str, Error> {
    c.header_value(key).ok_or_else(|| Error::Validation(format!("feature container lacks {key}")))
}

impl FeaturizedUnit {
    pub fn to_container(&self, extra: &[(&str, String)]) -> TensorContainer {
        let mut header = vec![("periodic", self.periodic.to_string())];
        header.extend(extra.iter().cloned());
        features_to_container(&self.filtration, &self.levels, &header)
    }

    pub fn to_bytes(&self, extra: &[(&str, String)]) -> Vec<u8> {
        self.to_container(extra).to_bytes(FEATURE_MAGIC, crate::tensor::DType::F64)
    }

    /// Rebuilds features and complexes from an exported container.
    pub fn from_container(c: &TensorContainer) -> Result<Self, Error> {
        let schema_version = header_value(c, "schema_version")?.to_string();
        let n: usize = header_value(c, "n_vertices")?
            .parse()
            .map_err(|_| Error::Validation("bad n_vertices header".into()))?;
        let cutoffs = header_value(c, "cutoffs")?
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Error::Validation("bad cutoffs header".into()))?;
        let periodic = c.header_value("periodic") != Some("false");
        let matrix = |name: &str, width: usize| -> Result<Matrix<f64>, Error> {
            let m = c.get(name)?.to_matrix().ok_or_else(|| Error::Validation(format!("{name} is not a matrix")))?;
            if m.cols() != width {
                return Err(Error::Version(format!("{name} has width {}, expected {width}", m.cols())));
            }
            Ok(m)
        };
        let simplices = |name: &str, dim: usize| -> Result<Vec<Simplex>, Error> {
            let m = matrix(name, dim + 1)?;
            Ok((0..m.rows()).map(|r| Simplex::new(m.row(r).iter().map(|&v| v as usize).collect())).collect())
        };
        let mut complexes = Vec::with_capacity(cutoffs.len());
        let mut levels = Vec::with_capacity(cutoffs.len());
        for (i, &eps) in cutoffs.iter().enumerate() {
            let higher = vec![simplices(&format!("level{i}.edges"), 1)?, simplices(&format!("level{i}.triangles"), 2)?];
            complexes.push(SimplicialComplex::from_simplices(n, eps, DEFAULT_MAX_DIM, higher)?);
            levels.push(SimplexFeatureSet {
                epsilon: eps,
                vertex: matrix(&format!("level{i}.vertex"), VERTEX_WIDTH)?,
                edge: matrix(&format!("level{i}.edge"), EDGE_WIDTH)?,
                triangle: matrix(&format!("level{i}.triangle"), TRIANGLE_WIDTH)?,
            });
        }
        Ok(Self { filtration: Filtration::from_levels(complexes)?, levels, schema_version, periodic })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        Self::from_container(&TensorContainer::from_bytes(bytes, FEATURE_MAGIC)?)
    }
}

/// Inference session: validated weights plus the lifted model.
#[derive(Debug, Clone)]
pub struct Predictor {
    weights: ModelWeights,
    model: HsmpModel<f64>,
}

impl Predictor {
    pub fn new(weights: ModelWeights) -> Result<Self, Error> {
        let model = HsmpModel::new(&weights)?;
        Ok(Self { weights, model })
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn model(&self) -> &HsmpModel<f64> {
        &self.model
    }

    /// Featurization options matching the model's cutoffs.
    pub fn featurize_options(&self, periodic: bool) -> FeaturizeOptions {
        FeaturizeOptions { cutoffs: self.weights.config().cutoffs.clone(), periodic, ..FeaturizeOptions::default() }
    }

    pub fn predict_features(&self, features: &FeaturizedUnit) -> Result<f64, Error> {
        if features.schema_version != self.weights.schema_version() {
            return Err(ModelError::SchemaMismatch {
                weights: self.weights.schema_version().to_string(),
                features: features.schema_version.clone(),
            }
            .into());
        }
        Ok(self.model.forward(&features.levels, &features.filtration)?.prediction)
    }

    pub fn predict_unit(&self, unit: &RepeatingUnit, periodic: bool) -> Result<f64, Error> {
        let features = featurize_unit(unit, &self.featurize_options(periodic))?;
        self.predict_features(&features)
    }

    /// Order-preserving parallel batch; each entry equals [`Self::predict_unit`].
    pub fn predict_batch(&self, units: &[RepeatingUnit], periodic: bool) -> Vec<Result<f64, Error>> {
        units.par_iter().map(|u| self.predict_unit(u, periodic)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsmp::{generate_weights, ModelConfig};
    use crate::polymer::parse_repeating_unit;

    fn sample() -> RepeatingUnit {
        parse_repeating_unit(include_bytes!("../data/polymers/polyethylene.json")).unwrap()
    }

    #[test]
    fn container_round_trip_preserves_prediction() {
        let unit = sample();
        let features = featurize_unit(&unit, &FeaturizeOptions::default()).unwrap();
        let back = FeaturizedUnit::from_bytes(&features.to_bytes(&[])).unwrap();
        assert_eq!(back, features);
        let p = Predictor::new(generate_weights(&ModelConfig::with_width(8, 2), 4).unwrap()).unwrap();
        assert_eq!(p.predict_features(&back).unwrap().to_bits(), p.predict_unit(&unit, true).unwrap().to_bits());
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let mut features = featurize_unit(&sample(), &FeaturizeOptions::default()).unwrap();
        features.schema_version = "other/0".into();
        let p = Predictor::new(generate_weights(&ModelConfig::with_width(8, 2), 4).unwrap()).unwrap();
        assert!(matches!(p.predict_features(&features), Err(Error::Model(ModelError::SchemaMismatch { .. }))));
    }
}
