//! Regenerates the bundled sample polymers under `data/`.
//!
//! Geometry is synthetic: the backbone is a regular helix with one turn per
//! repeating unit (a planar zigzag for two backbone atoms), side chains are
//! laid out in a local frame pointing away from the chain axis, and hydrogens
//! are implicit. Each frame places the unit window starting at a different
//! backbone fragment of the same infinite chain.
//!
//! ```text
//! cargo run -p periodic-rips --example gen_samples -- crates/core/data
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use periodic_rips::polymer::{
    analyze_backbone, enumerate_cyclic_permutations, AtomRecord, BondRecord, BondType, CoordinateFrame,
    Hybridization, RepeatingUnit, UnitMeta,
};

const BOND: f64 = 1.54;
const RADIUS: f64 = 0.45;

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: V3) -> V3 {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    scale(a, 1.0 / n)
}

struct Helix {
    count: usize,
    rise: f64,
}

impl Helix {
    fn new(count: usize) -> Self {
        let chord = 2.0 * RADIUS * (PI / count as f64).sin();
        Self { count, rise: (BOND * BOND - chord * chord).sqrt() }
    }

    fn period(&self) -> f64 {
        self.rise * self.count as f64
    }

    fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.count as f64
    }

    fn position(&self, j: usize) -> V3 {
        let t = self.angle(j);
        [j as f64 * self.rise, RADIUS * t.cos(), RADIUS * t.sin()]
    }

    /// Outward, along-chain and perpendicular unit vectors at backbone atom `j`.
    fn frame(&self, j: usize) -> (V3, V3, V3) {
        let t = self.angle(j);
        let a = [0.0, t.cos(), t.sin()];
        let b = [1.0, 0.0, 0.0];
        let c = [0.0, -t.sin(), t.cos()];
        (a, b, c)
    }
}

fn valence(element: &str) -> f64 {
    match element {
        "C" => 4.0,
        "N" => 3.0,
        "O" => 2.0,
        _ => 1.0,
    }
}

#[derive(Default)]
struct Builder {
    atoms: Vec<(String, Hybridization, bool, bool)>,
    pos: Vec<V3>,
    bonds: Vec<BondRecord>,
}

impl Builder {
    fn atom(&mut self, element: &str, hyb: Hybridization, aromatic: bool, p: V3) -> usize {
        self.atoms.push((element.to_string(), hyb, aromatic, false));
        self.pos.push(p);
        self.atoms.len() - 1
    }

    fn anchor(&mut self) -> usize {
        self.atoms.push(("*".to_string(), Hybridization::Other, false, true));
        self.pos.push([0.0; 3]);
        self.atoms.len() - 1
    }

    fn bond(&mut self, i: usize, j: usize, bond_type: BondType, conjugated: bool, in_ring: bool) {
        self.bonds.push(BondRecord { i, j, bond_type, conjugated, in_ring });
    }

    fn single(&mut self, i: usize, j: usize) {
        self.bond(i, j, BondType::Single, false, false);
    }

    fn records(&self) -> Vec<AtomRecord> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(index, (element, hyb, aromatic, anchor))| {
                let mut degree = 0;
                let mut order = 0.0;
                for b in self.bonds.iter().filter(|b| b.i == index || b.j == index) {
                    degree += 1;
                    order += match b.bond_type {
                        BondType::Single => 1.0,
                        BondType::Double => 2.0,
                        BondType::Triple => 3.0,
                        BondType::Aromatic => 1.5,
                    };
                }
                let implicit = if *anchor { 0.0 } else { (valence(element) - order).round().max(0.0) };
                AtomRecord {
                    index,
                    element: element.clone(),
                    degree,
                    implicit_valence: implicit as u32,
                    formal_charge: 0,
                    radical_electrons: 0,
                    hybridization: *hyb,
                    aromatic: *aromatic,
                    is_anchor: *anchor,
                }
            })
            .collect()
    }
}

/// Benzene ring attached to `attach` through `ipso_dir`, in the plane of
/// `ipso_dir` and `across`. Returns ring atoms ipso, o, m, p, m', o'.
fn phenyl(b: &mut Builder, attach: usize, ipso_dir: V3, across: V3, substituents: &[(usize, &str)]) -> Vec<usize> {
    let ipso = add(b.pos[attach], scale(ipso_dir, 1.50));
    let center = add(ipso, scale(ipso_dir, 1.40));
    let ring: Vec<usize> = (0..6)
        .map(|k| {
            let phi = PI / 3.0 * k as f64;
            let p = add(center, add(scale(ipso_dir, -1.40 * phi.cos()), scale(across, 1.40 * phi.sin())));
            b.atom("C", Hybridization::Sp2, true, p)
        })
        .collect();
    b.single(attach, ring[0]);
    for k in 0..6 {
        b.bond(ring[k], ring[(k + 1) % 6], BondType::Aromatic, true, true);
    }
    for &(k, element) in substituents {
        let out = norm(sub(b.pos[ring[k]], center));
        let length = match element {
            "F" => 1.35,
            "Cl" => 1.74,
            "Br" => 1.90,
            _ => 1.50,
        };
        let s = b.atom(element, if element == "C" { Hybridization::Sp3 } else { Hybridization::Other }, false, add(b.pos[ring[k]], scale(out, length)));
        b.single(ring[k], s);
    }
    ring
}

/// Sets anchor coordinates and emits one frame per distinct rotation.
fn finish(mut b: Builder, helix: &Helix, backbone: &[usize], anchors: (usize, usize), meta: UnitMeta) -> RepeatingUnit {
    let (head, tail) = anchors;
    let period = [helix.period(), 0.0, 0.0];
    let atoms = b.records();
    b.pos[head] = sub(b.pos[*backbone.last().unwrap()], period);
    b.pos[tail] = add(b.pos[backbone[0]], period);
    let probe = RepeatingUnit::new(atoms.clone(), b.bonds.clone(), vec![CoordinateFrame::new(0, b.pos.clone())], meta.clone())
        .expect("valid unit");
    let bb = analyze_backbone(&probe).expect("backbone");
    let specs = enumerate_cyclic_permutations(&probe).expect("rotations");
    let mut frames = Vec::new();
    for (id, spec) in specs.iter().enumerate() {
        let r = spec.fragment_order[0];
        let mut coords = b.pos.clone();
        for (f, atoms) in bb.fragments.iter().enumerate() {
            if f < r {
                for &a in atoms {
                    coords[a] = add(coords[a], period);
                }
            }
        }
        let first = bb.fragments[r].iter().copied().find(|a| bb.path.contains(a)).unwrap();
        let before = if r == 0 {
            sub(b.pos[*backbone.last().unwrap()], period)
        } else {
            let prev = &bb.fragments[r - 1];
            let last = bb.path.iter().rev().copied().find(|a| prev.contains(a)).unwrap();
            b.pos[last]
        };
        coords[head] = before;
        coords[tail] = add(b.pos[first], period);
        frames.push(CoordinateFrame::new(id, coords));
    }
    RepeatingUnit::new(atoms, b.bonds, frames, meta).expect("valid unit")
}

fn meta(name: &str, psmiles: &str, family: Option<&str>, key: Option<&str>) -> UnitMeta {
    UnitMeta {
        name: Some(name.to_string()),
        psmiles: Some(psmiles.to_string()),
        family: family.map(str::to_string),
        substitution_key: key.map(str::to_string),
    }
}

fn polyethylene() -> RepeatingUnit {
    let helix = Helix::new(2);
    let mut b = Builder::default();
    let head = b.anchor();
    let c1 = b.atom("C", Hybridization::Sp3, false, helix.position(0));
    let c2 = b.atom("C", Hybridization::Sp3, false, helix.position(1));
    let tail = b.anchor();
    b.single(head, c1);
    b.single(c1, c2);
    b.single(c2, tail);
    finish(b, &helix, &[c1, c2], (head, tail), meta("polyethylene", "*CC*", None, None))
}

fn poly_ethylene_oxide() -> RepeatingUnit {
    let helix = Helix::new(3);
    let mut b = Builder::default();
    let head = b.anchor();
    let c1 = b.atom("C", Hybridization::Sp3, false, helix.position(0));
    let c2 = b.atom("C", Hybridization::Sp3, false, helix.position(1));
    let o = b.atom("O", Hybridization::Sp3, false, helix.position(2));
    let tail = b.anchor();
    b.single(head, c1);
    b.single(c1, c2);
    b.single(c2, o);
    b.single(o, tail);
    finish(b, &helix, &[c1, c2, o], (head, tail), meta("poly(ethylene oxide)", "*CCO*", None, None))
}

fn polystyrene() -> RepeatingUnit {
    let helix = Helix::new(2);
    let mut b = Builder::default();
    let head = b.anchor();
    let c1 = b.atom("C", Hybridization::Sp3, false, helix.position(0));
    let c2 = b.atom("C", Hybridization::Sp3, false, helix.position(1));
    b.single(head, c1);
    b.single(c1, c2);
    let (a, _, c) = helix.frame(1);
    phenyl(&mut b, c2, a, c, &[]);
    let tail = b.anchor();
    b.single(c2, tail);
    finish(b, &helix, &[c1, c2], (head, tail), meta("polystyrene", "*CC(*)c1ccccc1", None, None))
}

/// Ring position (1 = ortho, 2 = meta, 3 = para) and substituent element.
struct Substitution {
    key: &'static str,
    tag: &'static str,
    ring: &'static str,
    sites: &'static [(usize, &'static str)],
}

const SUBSTITUTIONS: [Substitution; 2] = [
    Substitution { key: "p-F", tag: "pF", ring: "c1ccc(F)cc1", sites: &[(3, "F")] },
    Substitution { key: "m-Cl", tag: "mCl", ring: "c1cccc(Cl)c1", sites: &[(2, "Cl")] },
];

/// 2-arylethyl (meth)acrylate or (meth)acrylamide.
fn vinyl_family(family: &str, methyl: bool, amide: bool, s: &Substitution) -> RepeatingUnit {
    let helix = Helix::new(2);
    let mut b = Builder::default();
    let head = b.anchor();
    let c1 = b.atom("C", Hybridization::Sp3, false, helix.position(0));
    let c2 = b.atom("C", Hybridization::Sp3, false, helix.position(1));
    b.single(head, c1);
    b.single(c1, c2);
    let (a, bx, c) = helix.frame(1);
    let origin = helix.position(1);
    let local = |x: f64, y: f64, z: f64| add(origin, add(scale(a, x), add(scale(bx, y), scale(c, z))));
    if methyl {
        let m = b.atom("C", Hybridization::Sp3, false, local(0.35, 0.0, 1.45));
        b.single(c2, m);
    }
    let cc = b.atom("C", Hybridization::Sp2, false, local(1.50, 0.0, 0.0));
    let od = b.atom("O", Hybridization::Sp2, false, local(2.20, 1.05, 0.0));
    let x = if amide {
        b.atom("N", Hybridization::Sp2, false, local(2.25, -1.15, 0.0))
    } else {
        b.atom("O", Hybridization::Sp3, false, local(2.25, -1.15, 0.0))
    };
    let ca = b.atom("C", Hybridization::Sp3, false, local(3.65, -0.95, 0.0));
    let cb = b.atom("C", Hybridization::Sp3, false, local(4.35, -2.20, 0.0));
    b.single(c2, cc);
    b.bond(cc, od, BondType::Double, true, false);
    b.bond(cc, x, BondType::Single, true, false);
    b.single(x, ca);
    b.single(ca, cb);
    let dir = norm(add(scale(a, 0.8), scale(bx, -0.6)));
    phenyl(&mut b, cb, dir, c, s.sites);
    let tail = b.anchor();
    b.single(c2, tail);

    let alpha = if methyl { "(C)" } else { "" };
    let link = if amide { "N" } else { "O" };
    let psmiles = format!("*CC(*){alpha}C(=O){link}CC{}", s.ring);
    let name = format!("{family}-{}", s.tag);
    finish(b, &helix, &[c1, c2], (head, tail), meta(&name, &psmiles, Some(family), Some(s.key)))
}

fn write(dir: &Path, name: &str, unit: &RepeatingUnit) {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, unit.to_json() + "\n").expect("write sample");
    println!("{}", path.display());
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".to_string()));
    let polymers = root.join("polymers");
    let mini = root.join("mini");
    fs::create_dir_all(&polymers).unwrap();
    fs::create_dir_all(&mini).unwrap();
    write(&polymers, "polyethylene", &polyethylene());
    write(&polymers, "peo", &poly_ethylene_oxide());
    write(&polymers, "polystyrene", &polystyrene());
    for s in &SUBSTITUTIONS {
        for (family, methyl, amide) in
            [("Ar-Et-A", false, false), ("Ar-Et-MA", true, false), ("Ar-Et-AM", false, true), ("Ar-Et-MAM", true, true)]
        {
            let unit = vinyl_family(family, methyl, amide, s);
            write(&mini, &unit.meta().name.clone().unwrap(), &unit);
        }
    }
}
