//! Vietoris–Rips complexes, filtrations, and the incidence relations used by
//! curvature and message passing.
//!
//! Simplices of each dimension are stored in lexicographic order of their
//! sorted vertex tuples; every index and iteration order is derived from that
//! order, so two builds from the same matrix are identical.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::metric::PeriodicDistanceMatrix;

/// Largest supported simplex dimension.
pub const MAX_SUPPORTED_DIM: usize = 3;
/// Default dimension: vertices, edges and triangles.
pub const DEFAULT_MAX_DIM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RipsError {
    #[error("max_dim {0} out of range (0..={MAX_SUPPORTED_DIM})")]
    MaxDim(usize),
    #[error("cutoff {0} must be positive and finite")]
    Cutoff(f64),
    #[error("cutoffs must be strictly increasing, got {0:?}")]
    CutoffOrder(Vec<f64>),
    #[error("simplex {0} is not in the complex")]
    NotInComplex(Simplex),
    #[error("invalid simplex list: {0}")]
    InvalidSimplices(String),
}

/// Strictly increasing list of vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    /// Sorts and deduplicates the vertices.
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        Self(vertices)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self::new(self.0.iter().map(|&v| perm[v]).collect())
    }
}

impl From<&[usize]> for Simplex {
    fn from(v: &[usize]) -> Self {
        Self::new(v.to_vec())
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// A simplicial complex on vertices `0..n` with face and coface indices.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    epsilon: f64,
    n_vertices: usize,
    max_dim: usize,
    simplices: Vec<Vec<Simplex>>,
    index: Vec<HashMap<Simplex, usize>>,
    faces: Vec<Vec<Vec<usize>>>,
    cofaces: Vec<Vec<Vec<usize>>>,
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.epsilon.to_bits() == other.epsilon.to_bits()
            && self.n_vertices == other.n_vertices
            && self.max_dim == other.max_dim
            && self.simplices == other.simplices
    }
}

impl SimplicialComplex {
    /// Builds a complex from explicit simplex lists, one list per dimension
    /// starting at edges (all vertices `0..n_vertices` are implied).
    /// Lists are sorted; every face of every simplex must be present.
    pub fn from_simplices(
        n_vertices: usize,
        epsilon: f64,
        max_dim: usize,
        higher: Vec<Vec<Simplex>>,
    ) -> Result<Self, RipsError> {
        if max_dim > MAX_SUPPORTED_DIM {
            return Err(RipsError::MaxDim(max_dim));
        }
        if higher.len() > max_dim {
            return Err(RipsError::InvalidSimplices(format!(
                "{} dimensions supplied above vertices for max_dim {max_dim}",
                higher.len()
            )));
        }
        let mut simplices = vec![(0..n_vertices).map(|v| Simplex(vec![v])).collect::<Vec<_>>()];
        for (i, mut list) in higher.into_iter().enumerate() {
            let dim = i + 1;
            for s in &list {
                if s.0.len() != dim + 1 || s.0.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(RipsError::InvalidSimplices(format!("{s} is not a sorted {dim}-simplex")));
                }
                if s.0.iter().any(|&v| v >= n_vertices) {
                    return Err(RipsError::InvalidSimplices(format!("{s} references a missing vertex")));
                }
            }
            list.sort();
            list.dedup();
            simplices.push(list);
        }
        while simplices.len() <= max_dim {
            simplices.push(Vec::new());
        }
        Self::index(n_vertices, epsilon, max_dim, simplices)
    }

    fn index(
        n_vertices: usize,
        epsilon: f64,
        max_dim: usize,
        simplices: Vec<Vec<Simplex>>,
    ) -> Result<Self, RipsError> {
        let index: Vec<HashMap<Simplex, usize>> = simplices
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        let mut faces: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); simplices[0].len()]];
        let mut cofaces: Vec<Vec<Vec<usize>>> = simplices.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        for d in 1..simplices.len() {
            let mut per = Vec::with_capacity(simplices[d].len());
            for (i, s) in simplices[d].iter().enumerate() {
                let mut f = Vec::with_capacity(d + 1);
                for skip in 0..=d {
                    let face: Vec<usize> =
                        s.0.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &v)| v).collect();
                    let face = Simplex(face);
                    let id = *index[d - 1].get(&face).ok_or_else(|| {
                        RipsError::InvalidSimplices(format!("face {face} of {s} is missing"))
                    })?;
                    f.push(id);
                }
                f.sort_unstable();
                for &id in &f {
                    cofaces[d - 1][id].push(i);
                }
                per.push(f);
            }
            faces.push(per);
        }
        Ok(Self { epsilon, n_vertices, max_dim, simplices, index, faces, cofaces })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Simplices of dimension `dim` in canonical order (empty above `max_dim`).
    pub fn simplices(&self, dim: usize) -> &[Simplex] {
        self.simplices.get(dim).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, dim: usize) -> usize {
        self.simplices(dim).len()
    }

    pub fn simplex(&self, dim: usize, id: usize) -> &Simplex {
        &self.simplices[dim][id]
    }

    pub fn id_of(&self, sigma: &Simplex) -> Option<usize> {
        self.index.get(sigma.dim())?.get(sigma).copied()
    }

    pub fn contains(&self, sigma: &Simplex) -> bool {
        self.id_of(sigma).is_some()
    }

    fn require(&self, sigma: &Simplex) -> Result<usize, RipsError> {
        self.id_of(sigma).ok_or_else(|| RipsError::NotInComplex(sigma.clone()))
    }

    /// Ids of the codimension-1 faces (ascending). Empty for vertices.
    pub fn face_ids(&self, dim: usize, id: usize) -> &[usize] {
        &self.faces[dim][id]
    }

    /// Ids of the codimension-1 cofaces (ascending). Empty at `max_dim`.
    pub fn coface_ids(&self, dim: usize, id: usize) -> &[usize] {
        &self.cofaces[dim][id]
    }

    /// Upper-adjacent neighbours of a simplex as `(neighbour id, shared coface id)`,
    /// one entry per shared coface, ordered by coface then neighbour.
    pub fn upper_adjacent_ids(&self, dim: usize, id: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &c in self.coface_ids(dim, id) {
            for &f in &self.faces[dim + 1][c] {
                if f != id {
                    out.push((f, c));
                }
            }
        }
        out
    }

    /// Equal-dimension simplices sharing a codimension-1 face (ascending ids).
    pub fn lower_adjacent_ids(&self, dim: usize, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if dim == 0 {
            return out;
        }
        for &f in self.face_ids(dim, id) {
            out.extend(self.cofaces[dim - 1][f].iter().copied().filter(|&c| c != id));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Equal-dimension simplices sharing a coface or a face, but not both.
    pub fn parallel_ids(&self, dim: usize, id: usize) -> Vec<usize> {
        let mut upper: Vec<usize> = self.upper_adjacent_ids(dim, id).into_iter().map(|(n, _)| n).collect();
        upper.sort_unstable();
        upper.dedup();
        let lower = self.lower_adjacent_ids(dim, id);
        let mut out: Vec<usize> = upper
            .iter()
            .filter(|x| lower.binary_search(x).is_err())
            .chain(lower.iter().filter(|x| upper.binary_search(x).is_err()))
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    pub fn upper_adjacent(&self, sigma: &Simplex) -> Result<Vec<(Simplex, Simplex)>, RipsError> {
        let id = self.require(sigma)?;
        let d = sigma.dim();
        Ok(self
            .upper_adjacent_ids(d, id)
            .into_iter()
            .map(|(n, c)| (self.simplices[d][n].clone(), self.simplices[d + 1][c].clone()))
            .collect())
    }

    pub fn parallel_simplices(&self, sigma: &Simplex) -> Result<Vec<Simplex>, RipsError> {
        let id = self.require(sigma)?;
        let d = sigma.dim();
        Ok(self.parallel_ids(d, id).into_iter().map(|p| self.simplices[d][p].clone()).collect())
    }

    /// Text export: per dimension a `# dim=k count=c` header, then one simplex
    /// per line as space-separated vertex indices.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for d in 0..=self.max_dim {
            writeln!(out, "# dim={d} count={}", self.count(d))?;
            for s in self.simplices(d) {
                let parts: Vec<String> = s.0.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", parts.join(" "))?;
            }
        }
        Ok(())
    }
}

fn check_cutoff(epsilon: f64) -> Result<(), RipsError> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(RipsError::Cutoff(epsilon))
    }
}

/// All simplices up to `max_dim` whose pairwise distances are `<= epsilon`.
pub fn build_vr_complex(
    d: &PeriodicDistanceMatrix,
    epsilon: f64,
    max_dim: usize,
) -> Result<SimplicialComplex, RipsError> {
    if max_dim > MAX_SUPPORTED_DIM {
        return Err(RipsError::MaxDim(max_dim));
    }
    check_cutoff(epsilon)?;
    let n = d.n();
    // higher neighbours of each vertex, ascending
    let up: Vec<Vec<usize>> = (0..n).map(|a| (a + 1..n).filter(|&b| d.get(a, b) <= epsilon).collect()).collect();
    let mut simplices: Vec<Vec<Simplex>> = vec![(0..n).map(|v| Simplex(vec![v])).collect()];
    for dim in 1..=max_dim {
        let mut next = Vec::new();
        for s in &simplices[dim - 1] {
            let last = *s.0.last().unwrap();
            for &v in &up[last] {
                if s.0[..s.0.len() - 1].iter().all(|&u| d.get(u, v) <= epsilon) {
                    let mut verts = s.0.clone();
                    verts.push(v);
                    next.push(Simplex(verts));
                }
            }
        }
        simplices.push(next);
    }
    SimplicialComplex::index(n, epsilon, max_dim, simplices)
}

/// Nested complexes at strictly increasing cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    levels: Vec<SimplicialComplex>,
}

impl Filtration {
    /// Wraps complexes already ordered by increasing cutoff.
    pub fn from_levels(levels: Vec<SimplicialComplex>) -> Result<Self, RipsError> {
        let cutoffs: Vec<f64> = levels.iter().map(|c| c.epsilon()).collect();
        if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RipsError::CutoffOrder(cutoffs));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[SimplicialComplex] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &SimplicialComplex {
        &self.levels[i]
    }

    pub fn cutoffs(&self) -> Vec<f64> {
        self.levels.iter().map(|c| c.epsilon()).collect()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn build_filtration(
    d: &PeriodicDistanceMatrix,
    cutoffs: &[f64],
    max_dim: usize,
) -> Result<Filtration, RipsError> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RipsError::CutoffOrder(cutoffs.to_vec()));
    }
    let levels = cutoffs.iter().map(|&e| build_vr_complex(d, e, max_dim)).collect::<Result<Vec<_>, _>>()?;
    Ok(Filtration { levels })
}
