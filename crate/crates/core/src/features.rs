//! Initial simplex features: one-hot chemical descriptors concatenated with
//! normalized curvature profiles.
//!
//! Atom layout (70 slots, 0-based):
//!
//! | slots  | group                              |
//! |--------|------------------------------------|
//! | 0..43  | element (see [`ELEMENTS`])         |
//! | 43..49 | degree 0..=5                       |
//! | 49..56 | implicit valence 0..=6             |
//! | 56..61 | formal charge −2..=+2              |
//! | 61..65 | radical electrons 0..=3            |
//! | 65..69 | hybridization SP, SP2, SP3, other  |
//! | 69     | aromatic flag                      |
//!
//! Bond layout (6 slots): type single/double/triple/aromatic, conjugated, in ring.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::curvature::CurvatureProfile;
use crate::polymer::{AtomRecord, BondRecord, BondType, Hybridization, RepeatingUnit};
use crate::rips::Filtration;
use crate::tensor::{Matrix, Tensor, TensorContainer};

/// Version tag written with every feature export and weight file.
pub const SCHEMA_VERSION: &str = "periodic-rips-features/1";

pub const ATOM_WIDTH: usize = 70;
pub const BOND_WIDTH: usize = 6;
pub const CURVATURE_WIDTH: usize = 5;
pub const VERTEX_WIDTH: usize = ATOM_WIDTH + CURVATURE_WIDTH;
pub const EDGE_WIDTH: usize = BOND_WIDTH + CURVATURE_WIDTH;
pub const TRIANGLE_WIDTH: usize = CURVATURE_WIDTH;

/// Element vocabulary, 43 symbols. Unknown elements leave the group empty.
pub const ELEMENTS: [&str; 43] = [
    "H", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I", "B", "Li", "Na", "K", "Mg", "Ca", "Al", "Ga", "Ge",
    "As", "Se", "Sn", "Sb", "Te", "Bi", "Pb", "Zn", "Cu", "Fe", "Co", "Ni", "Mn", "Cr", "Ti", "V", "Zr", "Ag",
    "Au", "Pt", "Pd", "Hg", "Cd",
];

/// Width and offset of each one-hot group of the atom vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub width: usize,
}

pub const ELEMENT_SLOT: Slot = Slot { offset: 0, width: 43 };
pub const DEGREE_SLOT: Slot = Slot { offset: 43, width: 6 };
pub const VALENCE_SLOT: Slot = Slot { offset: 49, width: 7 };
pub const CHARGE_SLOT: Slot = Slot { offset: 56, width: 5 };
pub const RADICAL_SLOT: Slot = Slot { offset: 61, width: 4 };
pub const HYBRIDIZATION_SLOT: Slot = Slot { offset: 65, width: 4 };
pub const AROMATIC_SLOT: Slot = Slot { offset: 69, width: 1 };

pub const ATOM_SLOTS: [Slot; 7] =
    [ELEMENT_SLOT, DEGREE_SLOT, VALENCE_SLOT, CHARGE_SLOT, RADICAL_SLOT, HYBRIDIZATION_SLOT, AROMATIC_SLOT];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("missing curvature profiles for level {level} dimension {dim}")]
    MissingProfile { level: usize, dim: usize },
    #[error("profile count mismatch at level {level} dimension {dim}: {got} profiles for {expected} simplices")]
    ProfileCount { level: usize, dim: usize, got: usize, expected: usize },
    #[error("complex has {complex} vertices but the unit has {unit} chemical atoms")]
    AtomCount { complex: usize, unit: usize },
    #[error("feature container: {0}")]
    Container(String),
}

fn clamp_index(value: i64, lo: i64, hi: i64, what: &str, atom: usize) -> usize {
    if value < lo || value > hi {
        log::warn!("atom {atom}: {what} {value} clamped to [{lo}, {hi}]");
    }
    (value.clamp(lo, hi) - lo) as usize
}

/// One-hot atom descriptor.
pub fn atom_feature_vector(a: &AtomRecord) -> [f64; ATOM_WIDTH] {
    let mut v = [0.0; ATOM_WIDTH];
    match ELEMENTS.iter().position(|&e| e == a.element) {
        Some(i) => v[ELEMENT_SLOT.offset + i] = 1.0,
        None => log::warn!("atom {}: element {:?} outside the vocabulary, element slots left empty", a.index, a.element),
    }
    v[DEGREE_SLOT.offset + clamp_index(a.degree as i64, 0, 5, "degree", a.index)] = 1.0;
    v[VALENCE_SLOT.offset + clamp_index(a.implicit_valence as i64, 0, 6, "implicit valence", a.index)] = 1.0;
    v[CHARGE_SLOT.offset + clamp_index(a.formal_charge as i64, -2, 2, "formal charge", a.index)] = 1.0;
    v[RADICAL_SLOT.offset + clamp_index(a.radical_electrons as i64, 0, 3, "radical electrons", a.index)] = 1.0;
    let hyb = match a.hybridization {
        Hybridization::Sp => 0,
        Hybridization::Sp2 => 1,
        Hybridization::Sp3 => 2,
        Hybridization::Other => 3,
    };
    v[HYBRIDIZATION_SLOT.offset + hyb] = 1.0;
    if a.aromatic {
        v[AROMATIC_SLOT.offset] = 1.0;
    }
    v
}

/// Bond descriptor; `None` (a VR edge without a covalent bond) is all zeros.
pub fn bond_feature_vector(b: Option<&BondRecord>) -> [f64; BOND_WIDTH] {
    let mut v = [0.0; BOND_WIDTH];
    if let Some(b) = b {
        let t = match b.bond_type {
            BondType::Single => 0,
            BondType::Double => 1,
            BondType::Triple => 2,
            BondType::Aromatic => 3,
        };
        v[t] = 1.0;
        v[4] = f64::from(u8::from(b.conjugated));
        v[5] = f64::from(u8::from(b.in_ring));
    }
    v
}

/// Features of one filtration level. Row `i` of each matrix belongs to
/// simplex `i` of that dimension in the level's complex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFeatureSet {
    pub epsilon: f64,
    pub vertex: Matrix<f64>,
    pub edge: Matrix<f64>,
    pub triangle: Matrix<f64>,
}

impl SimplexFeatureSet {
    pub fn by_dim(&self, dim: usize) -> &Matrix<f64> {
        match dim {
            0 => &self.vertex,
            1 => &self.edge,
            2 => &self.triangle,
            _ => panic!("no features above dimension 2"),
        }
    }
}

/// Assembles per-level feature sets.
///
/// `profiles[level][dim][id]` must cover every vertex, edge and triangle of
/// every level. Complex vertices are the unit's chemical atoms in canonical
/// order.
pub fn assemble_features(
    unit: &RepeatingUnit,
    filtration: &Filtration,
    profiles: &[Vec<Vec<CurvatureProfile>>],
) -> Result<Vec<SimplexFeatureSet>, FeatureError> {
    let chem = unit.chemical_atoms();
    let atom_vectors: Vec<[f64; ATOM_WIDTH]> = chem.iter().map(|&a| atom_feature_vector(&unit.atoms()[a])).collect();
    let bonds: HashMap<(usize, usize), &BondRecord> =
        unit.bonds().iter().map(|b| ((b.i.min(b.j), b.i.max(b.j)), b)).collect();

    let mut out = Vec::with_capacity(filtration.len());
    for (level, complex) in filtration.levels().iter().enumerate() {
        if complex.n_vertices() != chem.len() {
            return Err(FeatureError::AtomCount { complex: complex.n_vertices(), unit: chem.len() });
        }
        let level_profiles = profiles.get(level).ok_or(FeatureError::MissingProfile { level, dim: 0 })?;
        let curv = |dim: usize| -> Result<&[CurvatureProfile], FeatureError> {
            let p = level_profiles.get(dim).ok_or(FeatureError::MissingProfile { level, dim })?;
            if p.len() != complex.count(dim) {
                return Err(FeatureError::ProfileCount { level, dim, got: p.len(), expected: complex.count(dim) });
            }
            Ok(p)
        };

        let mut vertex = Vec::with_capacity(chem.len() * VERTEX_WIDTH);
        for (v, prof) in curv(0)?.iter().enumerate() {
            vertex.extend_from_slice(&atom_vectors[v]);
            vertex.extend_from_slice(&prof.values);
        }
        let mut edge = Vec::with_capacity(complex.count(1) * EDGE_WIDTH);
        for (s, prof) in complex.simplices(1).iter().zip(curv(1)?) {
            let (u, v) = (chem[s.vertices()[0]], chem[s.vertices()[1]]);
            edge.extend_from_slice(&bond_feature_vector(bonds.get(&(u.min(v), u.max(v))).copied()));
            edge.extend_from_slice(&prof.values);
        }
        let triangle_profiles: &[CurvatureProfile] = if complex.max_dim() >= 2 { curv(2)? } else { &[] };
        let mut triangle = Vec::with_capacity(triangle_profiles.len() * TRIANGLE_WIDTH);
        for prof in triangle_profiles {
            triangle.extend_from_slice(&prof.values);
        }
        out.push(SimplexFeatureSet {
            epsilon: complex.epsilon(),
            vertex: Matrix::from_vec(chem.len(), VERTEX_WIDTH, vertex),
            edge: Matrix::from_vec(complex.count(1), EDGE_WIDTH, edge),
            triangle: Matrix::from_vec(triangle_profiles.len(), TRIANGLE_WIDTH, triangle),
        });
    }
    Ok(out)
}

/// Magic line of feature containers.
pub const FEATURE_MAGIC: &str = "HSMPF1";

/// Packs per-level features and simplex lists into a named-tensor container.
pub fn features_to_container(
    filtration: &Filtration,
    levels: &[SimplexFeatureSet],
    header: &[(&str, String)],
) -> TensorContainer {
    let mut c = TensorContainer::new();
    c.set_header("schema_version", SCHEMA_VERSION);
    c.set_header("levels", levels.len().to_string());
    c.set_header("n_vertices", filtration.level(0).n_vertices().to_string());
    c.set_header(
        "cutoffs",
        filtration.cutoffs().iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","),
    );
    for (k, v) in header {
        c.set_header(k, v.clone());
    }
    for (i, (complex, feats)) in filtration.levels().iter().zip(levels).enumerate() {
        c.insert(&format!("level{i}.vertex"), Tensor::from_matrix(&feats.vertex));
        c.insert(&format!("level{i}.edge"), Tensor::from_matrix(&feats.edge));
        c.insert(&format!("level{i}.triangle"), Tensor::from_matrix(&feats.triangle));
        for (dim, name) in [(1, "edges"), (2, "triangles")] {
            let list = complex.simplices(dim);
            let data = list.iter().flat_map(|s| s.vertices().iter().map(|&v| v as f64)).collect();
            c.insert(&format!("level{i}.{name}"), Tensor::new(vec![list.len(), dim + 1], data));
        }
    }
    c
}

/// Human-readable dump: one row per simplex with its feature values.
pub fn write_features_csv<W: Write>(
    mut out: W,
    filtration: &Filtration,
    levels: &[SimplexFeatureSet],
) -> io::Result<()> {
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "level,epsilon,dim,vertex_tuple,features")?;
    for (i, (complex, feats)) in filtration.levels().iter().zip(levels).enumerate() {
        for dim in 0..=2usize.min(complex.max_dim()) {
            for (id, s) in complex.simplices(dim).iter().enumerate() {
                let verts: Vec<String> = s.vertices().iter().map(|v| v.to_string()).collect();
                let vals: Vec<String> = feats.by_dim(dim).row(id).iter().map(|x| x.to_string()).collect();
                writeln!(out, "{i},{},{dim},{},{}", complex.epsilon(), verts.join(" "), vals.join(" "))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::tests::atom;

    #[test]
    fn slot_layout_sums() {
        assert_eq!(ATOM_SLOTS.iter().map(|s| s.width).sum::<usize>(), ATOM_WIDTH);
        for w in ATOM_SLOTS.windows(2) {
            assert_eq!(w[0].offset + w[0].width, w[1].offset);
        }
        let mut sorted = ELEMENTS.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 43);
    }

    #[test]
    fn carbon_has_one_hot_per_group() {
        let mut c = atom(0, "C", 4, false);
        c.hybridization = Hybridization::Sp3;
        let v = atom_feature_vector(&c);
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 6);
        assert_eq!(v[ELEMENT_SLOT.offset + 1], 1.0);
        assert_eq!(v[DEGREE_SLOT.offset + 4], 1.0);
        assert_eq!(v[CHARGE_SLOT.offset + 2], 1.0);
        assert_eq!(v[HYBRIDIZATION_SLOT.offset + 2], 1.0);
        for slot in ATOM_SLOTS {
            assert!(v[slot.offset..slot.offset + slot.width].iter().sum::<f64>() <= 1.0);
        }
    }

    #[test]
    fn unknown_element_and_clamping() {
        let mut u = atom(0, "Xe", 9, false);
        u.formal_charge = -5;
        u.implicit_valence = 11;
        u.radical_electrons = 7;
        let v = atom_feature_vector(&u);
        assert!(v[..43].iter().all(|&x| x == 0.0));
        assert_eq!(v[DEGREE_SLOT.offset + 5], 1.0);
        assert_eq!(v[VALENCE_SLOT.offset + 6], 1.0);
        assert_eq!(v[CHARGE_SLOT.offset], 1.0);
        assert_eq!(v[RADICAL_SLOT.offset + 3], 1.0);
    }

    #[test]
    fn aromatic_flag_is_last_slot() {
        let a = atom(0, "C", 3, false);
        let mut b = a.clone();
        b.aromatic = true;
        let (va, vb) = (atom_feature_vector(&a), atom_feature_vector(&b));
        let diff: Vec<usize> = (0..ATOM_WIDTH).filter(|&i| va[i] != vb[i]).collect();
        assert_eq!(diff, vec![69]);
    }

    #[test]
    fn bond_vectors() {
        let single = BondRecord { i: 0, j: 1, bond_type: BondType::Single, conjugated: false, in_ring: false };
        assert_eq!(bond_feature_vector(Some(&single)), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(bond_feature_vector(None), [0.0; 6]);
        let arom = BondRecord { i: 0, j: 1, bond_type: BondType::Aromatic, conjugated: true, in_ring: true };
        assert_eq!(bond_feature_vector(Some(&arom)), [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }
}
