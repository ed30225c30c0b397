mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use periodic_rips::features::{ATOM_SLOTS, BOND_WIDTH};
use periodic_rips::hsmp::{generate_weights, ModelConfig};
use periodic_rips::metric::periodic_distance_matrix;
use periodic_rips::pipeline::{featurize_unit, FeaturizeOptions, FeaturizedUnit, Predictor};
use periodic_rips::polymer::{analyze_backbone, enumerate_cyclic_permutations, parse_repeating_unit, RepeatingUnit};
use periodic_rips::rips::Simplex;
use periodic_rips::stats::{match_pairs, Family, PredictionRecord};

fn units() -> &'static [RepeatingUnit] {
    static UNITS: OnceLock<Vec<RepeatingUnit>> = OnceLock::new();
    UNITS.get_or_init(|| {
        let mut paths: Vec<PathBuf> = common::bundled_polymers();
        let mut mini: Vec<PathBuf> = std::fs::read_dir(common::mini_dir()).unwrap().map(|e| e.unwrap().path()).collect();
        mini.sort();
        paths.extend(mini);
        paths.iter().map(|p| parse_repeating_unit(&std::fs::read(p).unwrap()).unwrap()).collect()
    })
}

fn predictor() -> &'static Predictor {
    static P: OnceLock<Predictor> = OnceLock::new();
    P.get_or_init(|| Predictor::new(generate_weights(&ModelConfig::with_width(16, 4), 3).unwrap()).unwrap())
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

/// Map from chemical (vertex) index of `unit` to the vertex index of the
/// relabeled unit.
fn vertex_map(unit: &RepeatingUnit, moved: &RepeatingUnit, perm: &[usize]) -> Vec<usize> {
    let new_chem = moved.chemical_atoms();
    unit.chemical_atoms().iter().map(|&a| new_chem.binary_search(&perm[a]).unwrap()).collect()
}

fn featurize(unit: &RepeatingUnit) -> FeaturizedUnit {
    featurize_unit(unit, &FeaturizeOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotations_are_bijections_and_deterministic(u in 0usize..11) {
        let unit = &units()[u];
        let specs = enumerate_cyclic_permutations(unit).unwrap();
        prop_assert!(!specs.is_empty());
        prop_assert_eq!(&specs, &enumerate_cyclic_permutations(unit).unwrap());
        for s in &specs {
            prop_assert!(s.is_bijection());
            let inv = s.inverse_map();
            for (a, &pos) in s.atom_map.iter().enumerate() {
                prop_assert_eq!(inv[pos], a);
            }
        }
    }

    #[test]
    fn rotations_follow_relabeling(u in 0usize..11, seed in any::<u64>()) {
        let unit = &units()[u];
        let perm = permutation(unit.atom_count(), seed);
        let moved = unit.relabeled(&perm).unwrap();
        let fragments = |x: &RepeatingUnit, map: &dyn Fn(usize) -> usize| -> BTreeSet<Vec<usize>> {
            analyze_backbone(x).unwrap().fragments.iter().map(|f| {
                let mut v: Vec<usize> = f.iter().map(|&a| map(a)).collect();
                v.sort_unstable();
                v
            }).collect()
        };
        prop_assert_eq!(fragments(unit, &|a| perm[a]), fragments(&moved, &|a| a));
        let specs = enumerate_cyclic_permutations(unit).unwrap();
        let moved_specs = enumerate_cyclic_permutations(&moved).unwrap();
        prop_assert_eq!(specs.len(), moved_specs.len());
    }

    #[test]
    fn duplicate_frame_leaves_matrix_unchanged(u in 0usize..11, k in 0usize..4) {
        let unit = &units()[u];
        let mut frames = unit.chemical_frames();
        let d = periodic_distance_matrix(&frames).unwrap();
        let extra = frames[k % frames.len()].clone();
        frames.push(extra);
        let again = periodic_distance_matrix(&frames).unwrap();
        prop_assert_eq!(again.values(), d.values());
    }

    #[test]
    fn features_follow_relabeling(u in 0usize..11, seed in any::<u64>()) {
        let unit = &units()[u];
        let perm = permutation(unit.atom_count(), seed);
        let moved = unit.relabeled(&perm).unwrap();
        let (f, g) = (featurize(unit), featurize(&moved));
        let vmap = vertex_map(unit, &moved, &perm);
        for (level, (a, b)) in f.levels.iter().zip(&g.levels).enumerate() {
            let (ca, cb) = (f.filtration.level(level), g.filtration.level(level));
            for dim in 0..=2 {
                prop_assert_eq!(ca.count(dim), cb.count(dim));
                for (id, s) in ca.simplices(dim).iter().enumerate() {
                    let image = Simplex::new(s.vertices().iter().map(|&v| vmap[v]).collect());
                    let j = cb.id_of(&image).unwrap();
                    prop_assert_eq!(a.by_dim(dim).row(id), b.by_dim(dim).row(j));
                }
            }
        }
    }

    #[test]
    fn embeddings_follow_relabeling(u in 0usize..11, seed in any::<u64>()) {
        let unit = &units()[u];
        let perm = permutation(unit.atom_count(), seed);
        let moved = unit.relabeled(&perm).unwrap();
        let model = predictor().model();
        let (f, g) = (featurize(unit), featurize(&moved));
        let a = model.forward(&f.levels, &f.filtration).unwrap();
        let b = model.forward(&g.levels, &g.filtration).unwrap();
        let vmap = vertex_map(unit, &moved, &perm);
        for (v, &w) in vmap.iter().enumerate() {
            prop_assert_eq!(a.atom_embeddings.row(v), b.atom_embeddings.row(w));
        }
        prop_assert_eq!(a.polymer_embedding, b.polymer_embedding);
        prop_assert_eq!(a.prediction.to_bits(), b.prediction.to_bits());
    }

    #[test]
    fn match_pairs_swap_negates_deltas(values in prop::collection::vec(-200.0f64..200.0, 8)) {
        let keys = ["p-F", "m-Cl"];
        let mut records = Vec::new();
        for (i, (fam, key)) in [Family::A, Family::Am].iter().flat_map(|f| keys.iter().map(move |k| (f, k))).enumerate() {
            records.push(PredictionRecord {
                id: format!("u{i}"),
                family: fam.name().to_string(),
                substitution_key: key.to_string(),
                folds: vec![values[2 * i], values[2 * i + 1]],
            });
        }
        let ab = match_pairs(&records, Family::A, Family::Am).unwrap();
        let ba = match_pairs(&records, Family::Am, Family::A).unwrap();
        prop_assert_eq!(ab.pairs.len(), ba.pairs.len());
        for (x, y) in ab.pairs.iter().zip(&ba.pairs) {
            prop_assert_eq!(&x.key, &y.key);
            prop_assert_eq!(x.delta, -y.delta);
        }
    }
}

#[test]
fn chemical_slots_are_one_hot_and_masked_by_bonds() {
    for unit in units() {
        let f = featurize(unit);
        let chem = unit.chemical_atoms();
        for (level, set) in f.levels.iter().enumerate() {
            for v in 0..set.vertex.rows() {
                let row = set.vertex.row(v);
                for slot in ATOM_SLOTS {
                    let ones = row[slot.offset..slot.offset + slot.width].iter().filter(|&&x| x == 1.0).count();
                    assert!(ones <= 1, "slot at {} has {ones} ones", slot.offset);
                    assert!(row[slot.offset..slot.offset + slot.width].iter().all(|&x| x == 0.0 || x == 1.0));
                }
            }
            let complex = f.filtration.level(level);
            for (id, e) in complex.simplices(1).iter().enumerate() {
                let bonded = unit.bond_between(chem[e.vertices()[0]], chem[e.vertices()[1]]).is_some();
                let zero = set.edge.row(id)[..BOND_WIDTH].iter().all(|&x| x == 0.0);
                assert_eq!(bonded, !zero, "edge {e} at level {level}");
            }
        }
    }
}

#[test]
fn forward_is_deterministic() {
    let model = predictor().model();
    for unit in units() {
        let f = featurize(unit);
        let a = model.forward(&f.levels, &f.filtration).unwrap();
        let b = model.forward(&f.levels, &f.filtration).unwrap();
        assert_eq!(a.atom_embeddings, b.atom_embeddings);
        assert_eq!(a.prediction.to_bits(), b.prediction.to_bits());
    }
}
