//! Repeating-unit documents: parsing, validation, and graph-level enumeration
//! of the cyclic backbone rotations of a linear homopolymer.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;

/// Identifier written in the `format` field of polymer documents.
pub const UNIT_FORMAT: &str = "periodic-rips-unit/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolymerError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("atom index {found} at position {position}: indices must be 0..N-1 in order")]
    AtomIndex { position: usize, found: usize },
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("bond {0}-{1} connects an atom to itself")]
    SelfBond(usize, usize),
    #[error("bond {i}-{j} references an atom outside 0..{n}")]
    BondOutOfRange { i: usize, j: usize, n: usize },
    #[error("anchor count is {0}, expected exactly 2")]
    AnchorCount(usize),
    #[error("anchor atom {0} must have exactly one bond, found {1}")]
    AnchorDegree(usize, usize),
    #[error("no frames supplied")]
    NoFrames,
    #[error("frame size mismatch: frame {frame} has {rows} rows, expected {atoms}")]
    FrameSize { frame: usize, rows: usize, atoms: usize },
    #[error("covalent graph is disconnected")]
    Disconnected,
    #[error("no backbone path between the two anchors")]
    NoAnchorPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hybridization {
    #[serde(rename = "SP", alias = "sp")]
    Sp,
    #[serde(rename = "SP2", alias = "sp2")]
    Sp2,
    #[serde(rename = "SP3", alias = "sp3")]
    Sp3,
    #[serde(rename = "other", alias = "OTHER")]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub index: usize,
    pub element: String,
    pub degree: u32,
    #[serde(default)]
    pub implicit_valence: u32,
    #[serde(default)]
    pub formal_charge: i32,
    #[serde(default)]
    pub radical_electrons: u32,
    pub hybridization: Hybridization,
    #[serde(default)]
    pub aromatic: bool,
    /// Polymerization site (the `*` dummy atom).
    #[serde(default)]
    pub is_anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondRecord {
    pub i: usize,
    pub j: usize,
    pub bond_type: BondType,
    #[serde(default)]
    pub conjugated: bool,
    #[serde(default)]
    pub in_ring: bool,
}

impl BondRecord {
    fn key(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// Cartesian positions (Å) of every atom, indexed by canonical atom index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFrame {
    pub permutation_id: usize,
    pub coords: Vec<[f64; 3]>,
}

impl CoordinateFrame {
    pub fn new(permutation_id: usize, coords: Vec<[f64; 3]>) -> Self {
        Self { permutation_id, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Atom indices with a non-finite coordinate.
    pub fn non_finite_atoms(&self) -> Vec<usize> {
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|v| !v.is_finite()))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Source pSMILES, kept verbatim and never parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psmiles: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitution_key: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnitDocument {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    meta: UnitMeta,
    atoms: Vec<AtomRecord>,
    bonds: Vec<BondRecord>,
    frames: Vec<CoordinateFrame>,
}

/// One repeating unit with its K coordinate frames.
///
/// Atom identity is shared across frames: row `a` of every frame is the same
/// chemical atom. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatingUnit {
    atoms: Vec<AtomRecord>,
    bonds: Vec<BondRecord>,
    frames: Vec<CoordinateFrame>,
    meta: UnitMeta,
}

impl RepeatingUnit {
    /// Validates indices, bonds, anchors and frame sizes.
    ///
    /// Coordinate finiteness is reported by [`validate_frames`] and enforced by
    /// the distance-matrix builders, not here.
    pub fn new(
        atoms: Vec<AtomRecord>,
        bonds: Vec<BondRecord>,
        frames: Vec<CoordinateFrame>,
        meta: UnitMeta,
    ) -> Result<Self, PolymerError> {
        let n = atoms.len();
        if n == 0 {
            return Err(PolymerError::Malformed("no atoms".into()));
        }
        for (pos, a) in atoms.iter().enumerate() {
            if a.index != pos {
                return Err(PolymerError::AtomIndex { position: pos, found: a.index });
            }
        }
        let mut seen = HashSet::new();
        for b in &bonds {
            if b.i >= n || b.j >= n {
                return Err(PolymerError::BondOutOfRange { i: b.i, j: b.j, n });
            }
            if b.i == b.j {
                return Err(PolymerError::SelfBond(b.i, b.j));
            }
            if !seen.insert(b.key()) {
                return Err(PolymerError::DuplicateBond(b.i, b.j));
            }
        }
        let anchors = atoms.iter().filter(|a| a.is_anchor).count();
        if anchors != 2 {
            return Err(PolymerError::AnchorCount(anchors));
        }
        if frames.is_empty() {
            return Err(PolymerError::NoFrames);
        }
        for (k, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(PolymerError::FrameSize { frame: k, rows: f.len(), atoms: n });
            }
        }
        Ok(Self { atoms, bonds, frames, meta })
    }

    pub fn atoms(&self) -> &[AtomRecord] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[BondRecord] {
        &self.bonds
    }

    pub fn frames(&self) -> &[CoordinateFrame] {
        &self.frames
    }

    pub fn meta(&self) -> &UnitMeta {
        &self.meta
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// The two anchor indices in ascending order.
    pub fn anchors(&self) -> (usize, usize) {
        let mut it = self.atoms.iter().filter(|a| a.is_anchor).map(|a| a.index);
        let a = it.next().expect("validated anchor count");
        let b = it.next().expect("validated anchor count");
        (a, b)
    }

    /// Indices of the non-anchor atoms, in canonical order. These are the
    /// vertices of every distance matrix and complex built from the unit.
    pub fn chemical_atoms(&self) -> Vec<usize> {
        self.atoms.iter().filter(|a| !a.is_anchor).map(|a| a.index).collect()
    }

    /// Frames restricted to the chemical atoms, rows in [`Self::chemical_atoms`] order.
    pub fn chemical_frames(&self) -> Vec<CoordinateFrame> {
        let keep = self.chemical_atoms();
        self.frames
            .iter()
            .map(|f| CoordinateFrame {
                permutation_id: f.permutation_id,
                coords: keep.iter().map(|&a| f.coords[a]).collect(),
            })
            .collect()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&BondRecord> {
        let key = (a.min(b), a.max(b));
        self.bonds.iter().find(|bond| bond.key() == key)
    }

    /// Neighbour lists sorted by atom index, each entry `(neighbour, bond index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (bi, b) in self.bonds.iter().enumerate() {
            adj[b.i].push((b.j, bi));
            adj[b.j].push((b.i, bi));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Returns the same unit with atom `a` renamed to `perm[a]` everywhere.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self, PolymerError> {
        let n = self.atoms.len();
        assert_eq!(perm.len(), n, "permutation length must equal atom count");
        let mut atoms = self.atoms.clone();
        for (old, a) in self.atoms.iter().enumerate() {
            let mut rec = a.clone();
            rec.index = perm[old];
            atoms[perm[old]] = rec;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| BondRecord { i: perm[b.i], j: perm[b.j], ..b.clone() })
            .collect();
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let mut coords = vec![[0.0; 3]; n];
                for (old, c) in f.coords.iter().enumerate() {
                    coords[perm[old]] = *c;
                }
                CoordinateFrame { permutation_id: f.permutation_id, coords }
            })
            .collect();
        Self::new(atoms, bonds, frames, self.meta.clone())
    }

    /// Serializes back to the polymer-input document format.
    pub fn to_json(&self) -> String {
        let doc = UnitDocument {
            format: Some(UNIT_FORMAT.to_string()),
            meta: self.meta.clone(),
            atoms: self.atoms.clone(),
            bonds: self.bonds.clone(),
            frames: self.frames.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("unit serializes")
    }
}

/// Parses a UTF-8 polymer-input document (JSON).
pub fn parse_repeating_unit(input: &[u8]) -> Result<RepeatingUnit, PolymerError> {
    let doc: UnitDocument =
        serde_json::from_slice(input).map_err(|e| PolymerError::Malformed(e.to_string()))?;
    if let Some(fmt) = &doc.format {
        if fmt != UNIT_FORMAT {
            return Err(PolymerError::Malformed(format!("unsupported format {fmt:?}")));
        }
    }
    RepeatingUnit::new(doc.atoms, doc.bonds, doc.frames, doc.meta)
}

/// One cyclic rotation of the backbone fragments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermutationSpec {
    /// Fragment indices in the order they appear in the rotated unit.
    pub fragment_order: Vec<usize>,
    /// `atom_map[a]` is the position of canonical atom `a` in the rotated unit.
    pub atom_map: Vec<usize>,
}

impl PermutationSpec {
    /// Inverse of `atom_map`: position -> canonical atom.
    pub fn inverse_map(&self) -> Vec<usize> {
        let mut inv = vec![usize::MAX; self.atom_map.len()];
        for (atom, &pos) in self.atom_map.iter().enumerate() {
            inv[pos] = atom;
        }
        inv
    }

    pub fn is_bijection(&self) -> bool {
        let n = self.atom_map.len();
        let mut seen = vec![false; n];
        for &p in &self.atom_map {
            if p >= n || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }
}

/// Backbone decomposition of a unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Backbone {
    /// Anchor-to-anchor shortest path, anchors included.
    pub path: Vec<usize>,
    /// Internal backbone bonds (between non-anchor atoms) that are not in a ring,
    /// as `(path position, path position + 1)` atom pairs.
    pub breakable: Vec<(usize, usize)>,
    /// Atom sets of each fragment, in backbone order, each sorted.
    pub fragments: Vec<Vec<usize>>,
}

impl Backbone {
    /// Breakable bonds counted on the periodic chain: the internal ones plus
    /// the inter-unit seam. Equals the fragment count.
    pub fn periodic_breakable_count(&self) -> usize {
        self.breakable.len() + 1
    }
}

/// Finds the backbone and fragments of a unit.
pub fn analyze_backbone(unit: &RepeatingUnit) -> Result<Backbone, PolymerError> {
    if !unit.is_connected() {
        return Err(PolymerError::Disconnected);
    }
    let adj = unit.adjacency();
    let (head, tail) = unit.anchors();
    for anchor in [head, tail] {
        if adj[anchor].len() != 1 {
            return Err(PolymerError::AnchorDegree(anchor, adj[anchor].len()));
        }
    }
    let path = shortest_path_lex(&adj, head, tail).ok_or(PolymerError::NoAnchorPath)?;
    // anchors bonded directly or to the same atom leave no chemical backbone
    if path.len() < 3 {
        return Err(PolymerError::NoAnchorPath);
    }
    let inner = &path[1..path.len() - 1];

    let mut breakable = Vec::new();
    let mut fragments_bb: Vec<Vec<usize>> = vec![vec![inner[0]]];
    for w in inner.windows(2) {
        let bond = unit.bond_between(w[0], w[1]).expect("path follows bonds");
        if bond.in_ring {
            fragments_bb.last_mut().unwrap().push(w[1]);
        } else {
            breakable.push((w[0], w[1]));
            fragments_bb.push(vec![w[1]]);
        }
    }

    // Multi-source BFS over side-chain atoms, seeded in backbone order.
    let mut owner: Vec<Option<usize>> = vec![None; unit.atom_count()];
    let mut queue = VecDeque::new();
    for (f, atoms) in fragments_bb.iter().enumerate() {
        for &a in atoms {
            owner[a] = Some(f);
            queue.push_back(a);
        }
    }
    owner[head] = Some(usize::MAX);
    owner[tail] = Some(usize::MAX);
    while let Some(u) = queue.pop_front() {
        let f = owner[u].unwrap();
        for &(v, _) in &adj[u] {
            if owner[v].is_none() {
                owner[v] = Some(f);
                queue.push_back(v);
            }
        }
    }
    let mut fragments = vec![Vec::new(); fragments_bb.len()];
    for (atom, o) in owner.iter().enumerate() {
        match o {
            Some(f) if *f != usize::MAX => fragments[*f].push(atom),
            Some(_) => {}
            None => return Err(PolymerError::Disconnected),
        }
    }
    Ok(Backbone { path, breakable, fragments })
}

/// BFS shortest path with ties broken by the lexicographically smallest atom
/// sequence.
fn shortest_path_lex(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[to] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist[from] == usize::MAX {
        return None;
    }
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        // adjacency lists are sorted, so the first qualifying neighbour is the smallest
        cur = adj[cur].iter().map(|&(v, _)| v).find(|&v| dist[v] + 1 == dist[cur])?;
        path.push(cur);
    }
    Some(path)
}

/// Builds the spec for rotation `r` of `fragments` (fragment `r` first).
fn rotation_spec(unit: &RepeatingUnit, backbone: &Backbone, r: usize) -> PermutationSpec {
    let f = backbone.fragments.len();
    let fragment_order: Vec<usize> = (0..f).map(|i| (r + i) % f).collect();
    let (head, tail) = (backbone.path[0], *backbone.path.last().unwrap());
    let mut atom_map = vec![usize::MAX; unit.atom_count()];
    let mut pos = 0;
    atom_map[head] = pos;
    pos += 1;
    for &frag in &fragment_order {
        for &a in &backbone.fragments[frag] {
            atom_map[a] = pos;
            pos += 1;
        }
    }
    atom_map[tail] = pos;
    PermutationSpec { fragment_order, atom_map }
}

/// Bond list of the rotated unit, in rotated positions.
fn rotated_bonds(
    unit: &RepeatingUnit,
    backbone: &Backbone,
    spec: &PermutationSpec,
) -> Vec<(usize, usize, BondType)> {
    let path = &backbone.path;
    let (head, tail) = (path[0], path[path.len() - 1]);
    let (first, last) = (path[1], path[path.len() - 2]);
    let seam_type = unit.bond_between(head, first).expect("anchor bond").bond_type;
    let r = spec.fragment_order[0];

    let mut edges = Vec::new();
    let mut cut = None;
    if r > 0 {
        cut = Some(backbone.breakable[r - 1]);
    }
    for b in unit.bonds() {
        let key = b.key();
        if b.i == head || b.j == head || b.i == tail || b.j == tail {
            continue;
        }
        if cut.map(|(x, y)| (x.min(y), x.max(y))) == Some(key) {
            continue;
        }
        edges.push((b.i, b.j, b.bond_type));
    }
    let (new_first, new_last, head_type) = match cut {
        None => (first, last, seam_type),
        Some((x, y)) => {
            let t = unit.bond_between(x, y).unwrap().bond_type;
            if first != last {
                edges.push((last, first, seam_type));
            }
            (y, x, t)
        }
    };
    edges.push((head, new_first, head_type));
    edges.push((tail, new_last, head_type));
    edges
        .into_iter()
        .map(|(a, b, t)| {
            let (pa, pb) = (spec.atom_map[a], spec.atom_map[b]);
            (pa.min(pb), pa.max(pb), t)
        })
        .collect()
}

/// Canonical form of the rotated unit's labelled graph, or `None` when the
/// canonicalization budget is exhausted.
fn rotation_certificate(
    unit: &RepeatingUnit,
    backbone: &Backbone,
    spec: &PermutationSpec,
) -> Option<Vec<u64>> {
    let inv = spec.inverse_map();
    let mut element_ids: BTreeMap<&str, u64> = BTreeMap::new();
    for a in unit.atoms() {
        let next = element_ids.len() as u64;
        element_ids.entry(if a.is_anchor { "*" } else { a.element.as_str() }).or_insert(next);
    }
    let labels: Vec<u64> = inv
        .iter()
        .map(|&atom| {
            let a = &unit.atoms()[atom];
            let el = element_ids[if a.is_anchor { "*" } else { a.element.as_str() }];
            (el << 8) | ((a.formal_charge + 8) as u64 & 0xff)
        })
        .collect();
    let edges: Vec<(usize, usize, u64)> = rotated_bonds(unit, backbone, spec)
        .into_iter()
        .map(|(a, b, t)| (a, b, t as u64))
        .collect();
    canon::certificate(&labels, &edges, canon::DEFAULT_BUDGET)
}

/// Enumerates the distinct cyclic rotations of the backbone fragments.
///
/// Rotation `r` starts at fragment `r`; rotations are produced in increasing
/// `r` and a rotation whose canonical graph form equals an earlier one is
/// dropped. When a canonical form cannot be computed within budget the
/// rotation is kept.
pub fn enumerate_cyclic_permutations(
    unit: &RepeatingUnit,
) -> Result<Vec<PermutationSpec>, PolymerError> {
    let backbone = analyze_backbone(unit)?;
    let mut out = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for r in 0..backbone.fragments.len() {
        let spec = rotation_spec(unit, &backbone, r);
        match rotation_certificate(unit, &backbone, &spec) {
            Some(cert) => {
                if seen.insert(cert) {
                    out.push(spec);
                }
            }
            None => {
                log::warn!("canonical form budget exceeded for rotation {r}; keeping it");
                out.push(spec);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Checks the supplied frames against the enumerated rotations. Never mutates.
pub fn validate_frames(unit: &RepeatingUnit, specs: &[PermutationSpec]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let k = unit.frame_count();
    if k != specs.len() {
        if k == 1 {
            out.push(Diagnostic {
                severity: Severity::Warning,
                message: format!(
                    "single-frame mode: 1 frame for {} distinct rotations, periodic matrix equals the intra-unit matrix",
                    specs.len()
                ),
            });
        } else {
            out.push(Diagnostic {
                severity: Severity::Warning,
                message: format!("frame count {k} does not match {} distinct rotations", specs.len()),
            });
        }
    }
    for (fi, frame) in unit.frames().iter().enumerate() {
        if frame.len() != unit.atom_count() {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!("frame {fi} has {} rows, expected {}", frame.len(), unit.atom_count()),
            });
        }
        for atom in frame.non_finite_atoms() {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!("frame {fi}: non-finite coordinate for atom {atom}"),
            });
        }
    }
    out
}
