use std::collections::HashMap;

use super::kabsch::rmsd;
use super::splice::ChimericModel;
use super::{score_map, ScoreReport};
use crate::structure_io::Structure;
use crate::Vec3;

/// Heavy atoms closer than this (Å) clash.
pub const CLASH_DISTANCE: f64 = 2.5;
pub const CLASH_WEIGHT: f64 = 0.5;

/// Heavy-atom pairs closer than [`CLASH_DISTANCE`] in residues at least two
/// apart in the same chain, or in different chains.
pub fn count_clashes(structure: &Structure) -> usize {
    // (chain, residue index, position)
    let atoms: Vec<(usize, usize, Vec3)> = structure
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, chain)| {
            chain.residues.iter().enumerate().flat_map(move |(r, res)| {
                res.atoms
                    .iter()
                    .filter(|a| !a.is_hydrogen())
                    .map(move |a| (c, r, a.position))
            })
        })
        .collect();
    let cell = |p: &Vec3| {
        (
            (p.x / CLASH_DISTANCE).floor() as i64,
            (p.y / CLASH_DISTANCE).floor() as i64,
            (p.z / CLASH_DISTANCE).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, a) in atoms.iter().enumerate() {
        grid.entry(cell(&a.2)).or_default().push(i);
    }
    let d2 = CLASH_DISTANCE * CLASH_DISTANCE;
    let mut count = 0;
    for (i, &(ci, ri, pi)) in atoms.iter().enumerate() {
        let (x, y, z) = cell(&pi);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(x + dx, y + dy, z + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j <= i {
                            continue;
                        }
                        let (cj, rj, pj) = atoms[j];
                        if ci == cj && ri.abs_diff(rj) < 2 {
                            continue;
                        }
                        if (pi - pj).norm_squared() < d2 {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

/// Junction RMSD, baseline-subtracted clash count and their composite.
pub fn surrogate_score(model: &ChimericModel) -> ScoreReport {
    let (a, b): (Vec<Vec3>, Vec<Vec3>) = model.junctions.iter().map(|j| (j.scaffold, j.insert)).unzip();
    let anchor_rmsd = rmsd(&a, &b);
    let clash_count = count_clashes(&model.structure).saturating_sub(model.baseline_clashes);
    let external: std::collections::BTreeMap<String, f64> = model
        .scores
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "anchor_rmsd" | "clash_count" | "composite"))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    ScoreReport {
        anchor_rmsd,
        clash_count,
        composite: anchor_rmsd + CLASH_WEIGHT * clash_count as f64,
        external: (!external.is_empty()).then_some(external),
    }
}

impl ChimericModel {
    /// Computes the surrogate report and stores its values in `scores`.
    pub fn apply_surrogate(&mut self) -> ScoreReport {
        let report = surrogate_score(self);
        self.scores.extend(score_map(&report));
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::layout_structure;
    use crate::grafting::{splice, GraftPair, GraftSpec};
    use crate::structure_io::{Atom, Chain, Residue, StructureSource};

    fn lone(chain: char, name: &str, element: &str, p: Vec3) -> Chain {
        Chain {
            id: chain,
            residues: vec![Residue {
                seq_num: 1,
                insertion_code: None,
                name: "ALA".into(),
                atoms: vec![Atom::new(name, element, p)],
            }],
        }
    }

    #[test]
    fn two_atoms_at_two_angstrom_clash_once() {
        let s = Structure {
            pdb_id: "FAKE".into(),
            chains: vec![
                lone('A', "CA", "C", Vec3::zeros()),
                lone('B', "CA", "C", Vec3::new(2.0, 0.0, 0.0)),
            ],
            source: StructureSource::Derived,
        };
        assert_eq!(count_clashes(&s), 1);
        let mut far = s.clone();
        far.chains[1].residues[0].atoms[0].position.x = 2.5;
        assert_eq!(count_clashes(&far), 0);
        let mut hydrogen = s.clone();
        hydrogen.chains[1].residues[0].atoms[0] = Atom::new("H", "H", Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(count_clashes(&hydrogen), 0);
    }

    #[test]
    fn neighbouring_residues_never_clash() {
        let mut s = Structure {
            pdb_id: "FAKE".into(),
            chains: vec![lone('A', "CA", "C", Vec3::zeros())],
            source: StructureSource::Derived,
        };
        let mut second = s.chains[0].residues[0].clone();
        second.seq_num = 2;
        second.atoms[0].position.x = 1.0;
        s.chains[0].residues.push(second);
        assert_eq!(count_clashes(&s), 0);
        let mut third = s.chains[0].residues[0].clone();
        third.seq_num = 3;
        third.atoms[0].position.y = 1.0;
        s.chains[0].residues.push(third);
        assert_eq!(count_clashes(&s), 1);
    }

    fn identity_model() -> ChimericModel {
        let s = layout_structure("SCAF", 'A', 1, &format!("{}CCCC{}", "H".repeat(12), "H".repeat(12)));
        let spec = GraftSpec::new(
            'A',
            'A',
            vec![GraftPair {
                scaffold_loop_id: "S".into(),
                insert_loop_id: "I".into(),
                scaffold_start: 12,
                scaffold_end: 17,
                insert_start: 12,
                insert_end: 17,
            }],
        );
        splice(&s, &s, &spec).unwrap()
    }

    #[test]
    fn identity_graft_scores_zero() {
        let mut m = identity_model();
        let r = m.apply_surrogate();
        assert!(r.anchor_rmsd < 1e-9);
        assert_eq!(r.clash_count, 0);
        assert!(r.composite < 1e-9);
        assert_eq!(m.scores["composite"], r.composite);
        assert!(r.external.is_none());
    }

    #[test]
    fn rigid_shift_adds_its_length_to_anchor_rmsd() {
        let mut m = identity_model();
        let before = surrogate_score(&m).anchor_rmsd;
        m.translate_grafted(Vec3::new(0.6, 0.0, 0.8));
        let after = surrogate_score(&m).anchor_rmsd;
        assert!((after - before - 1.0).abs() < 1e-9);
    }
}
