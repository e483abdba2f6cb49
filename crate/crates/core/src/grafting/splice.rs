use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::kabsch::kabsch;
use super::score::count_clashes;
use super::{chain_of, GraftError, GraftSpec};
use crate::structure_io::{write_pdb, Chain, Residue, Structure, StructureSource};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Scaffold,
    Grafted,
}

/// A scaffold anchor Cα and the superposed insert anchor Cα matched to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub scaffold: Vec3,
    pub insert: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChimericModel {
    pub id: String,
    pub structure: Structure,
    /// Chain that received the grafts.
    pub chain_id: char,
    /// One entry per residue of the grafted chain.
    pub origin_mask: Vec<Origin>,
    pub spec: GraftSpec,
    pub scores: BTreeMap<String, f64>,
    pub junctions: Vec<Junction>,
    /// Clash count of the unmodified scaffold.
    pub baseline_clashes: usize,
}

impl ChimericModel {
    pub fn chain(&self) -> &Chain {
        self.structure
            .chains
            .iter()
            .find(|c| c.id == self.chain_id)
            .expect("grafted chain present")
    }

    pub fn grafted_count(&self) -> usize {
        self.origin_mask.iter().filter(|o| **o == Origin::Grafted).count()
    }

    /// Rigidly shifts every grafted residue (and its junction partners).
    pub fn translate_grafted(&mut self, shift: Vec3) {
        let chain_id = self.chain_id;
        let chain = self
            .structure
            .chains
            .iter_mut()
            .find(|c| c.id == chain_id)
            .expect("grafted chain present");
        for (res, origin) in chain.residues.iter_mut().zip(&self.origin_mask) {
            if *origin == Origin::Grafted {
                for atom in &mut res.atoms {
                    atom.position += shift;
                }
            }
        }
        for j in &mut self.junctions {
            j.insert += shift;
        }
    }

    /// Legacy PDB text with the origin mask in the B-factor column (0 scaffold, 1 grafted).
    pub fn to_pdb(&self) -> String {
        let mut s = self.structure.clone();
        if let Some(chain) = s.chains.iter_mut().find(|c| c.id == self.chain_id) {
            for (res, origin) in chain.residues.iter_mut().zip(&self.origin_mask) {
                let b = match origin {
                    Origin::Scaffold => 0.0,
                    Origin::Grafted => 1.0,
                };
                for atom in &mut res.atoms {
                    atom.b_factor = b;
                }
            }
        }
        write_pdb(&s)
    }
}

/// Sidecar CSV: `index,seq_num,residue,origin`.
pub fn origin_table(model: &ChimericModel) -> String {
    let mut out = String::from("index,seq_num,residue,origin\n");
    for (i, (res, origin)) in model.chain().residues.iter().zip(&model.origin_mask).enumerate() {
        let o = match origin {
            Origin::Scaffold => "scaffold",
            Origin::Grafted => "grafted",
        };
        let _ = writeln!(out, "{i},{},{},{o}", res.seq_num, res.name);
    }
    out
}

struct Resolved {
    first: usize,
    last: usize,
}

fn resolve(chain: &Chain, start: i32, end: i32, anchor_len: usize) -> Result<Resolved, GraftError> {
    let first = chain.first_index_of_seq(start).ok_or(GraftError::UnknownResidue {
        chain: chain.id,
        seq: start,
    })?;
    let last = chain.last_index_of_seq(end).ok_or(GraftError::UnknownResidue {
        chain: chain.id,
        seq: end,
    })?;
    if first > last {
        return Err(GraftError::DegenerateRange { start, end });
    }
    if first < anchor_len || last + anchor_len >= chain.residues.len() {
        return Err(GraftError::ClippedAnchor {
            chain: chain.id,
            start,
            end,
            anchor_len,
        });
    }
    Ok(Resolved { first, last })
}

fn anchor_cas(chain: &Chain, r: &Resolved, anchor_len: usize) -> Result<Vec<Vec3>, GraftError> {
    (r.first - anchor_len..r.first)
        .chain(r.last + 1..=r.last + anchor_len)
        .map(|i| {
            let res = &chain.residues[i];
            res.ca().ok_or(GraftError::MissingAnchorAtoms {
                chain: chain.id,
                seq: res.seq_num,
            })
        })
        .collect()
}

/// Replaces each scaffold range of `spec` with the superposed insert range.
pub fn splice(scaffold: &Structure, insert: &Structure, spec: &GraftSpec) -> Result<ChimericModel, GraftError> {
    spec.check()?;
    let sc = chain_of(scaffold, spec.scaffold_chain)?;
    let ic = chain_of(insert, spec.insert_chain)?;
    let mut pairs: Vec<_> = spec.pairs.iter().collect();
    pairs.sort_by_key(|p| p.scaffold_start);

    // (scaffold first, scaffold last, transformed insert residues)
    let mut replacements = Vec::with_capacity(pairs.len());
    let mut junctions = Vec::new();
    for p in pairs {
        let rs = resolve(sc, p.scaffold_start, p.scaffold_end, spec.anchor_len)?;
        let ri = resolve(ic, p.insert_start, p.insert_end, spec.anchor_len)?;
        let target = anchor_cas(sc, &rs, spec.anchor_len)?;
        let mobile = anchor_cas(ic, &ri, spec.anchor_len)?;
        let fit = kabsch(&mobile, &target).ok_or(GraftError::MissingAnchorAtoms {
            chain: ic.id,
            seq: p.insert_start,
        })?;
        junctions.extend(target.iter().zip(&mobile).map(|(t, m)| Junction {
            scaffold: *t,
            insert: fit.apply(m),
        }));
        let moved: Vec<Residue> = ic.residues[ri.first..=ri.last]
            .iter()
            .map(|r| {
                let mut r = r.clone();
                for atom in &mut r.atoms {
                    atom.position = fit.apply(&atom.position);
                }
                r
            })
            .collect();
        replacements.push((rs.first, rs.last, moved));
    }

    let mut residues = Vec::with_capacity(spec.chimera_len(sc.residues.len()));
    let mut origin_mask = Vec::with_capacity(residues.capacity());
    let mut next = replacements.iter().peekable();
    let mut i = 0;
    while i < sc.residues.len() {
        if let Some((first, last, moved)) = next.peek() {
            if i == *first {
                residues.extend(moved.iter().cloned());
                origin_mask.extend(std::iter::repeat_n(Origin::Grafted, moved.len()));
                i = last + 1;
                next.next();
                continue;
            }
        }
        residues.push(sc.residues[i].clone());
        origin_mask.push(Origin::Scaffold);
        i += 1;
    }
    let first_seq = sc.residues.first().map_or(1, |r| r.seq_num);
    for (k, r) in residues.iter_mut().enumerate() {
        r.seq_num = first_seq + k as i32;
        r.insertion_code = None;
    }

    let chains = scaffold
        .chains
        .iter()
        .map(|c| {
            if c.id == sc.id {
                Chain {
                    id: c.id,
                    residues: residues.clone(),
                }
            } else {
                c.clone()
            }
        })
        .collect();
    let structure = Structure {
        pdb_id: scaffold.pdb_id.clone(),
        chains,
        source: StructureSource::Derived,
    };
    Ok(ChimericModel {
        id: format!("{}-{}", scaffold.pdb_id, spec.label())
            .replace(':', "_")
            .replace('+', "_"),
        structure,
        chain_id: sc.id,
        origin_mask,
        spec: spec.clone(),
        scores: BTreeMap::new(),
        junctions,
        baseline_clashes: count_clashes(scaffold),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{layout_structure, rotation, transform_structure};
    use crate::grafting::{kabsch::rmsd, GraftPair};
    use crate::structure_io::ca_trace;

    fn pair(s: (i32, i32), i: (i32, i32)) -> GraftPair {
        GraftPair {
            scaffold_loop_id: "S".into(),
            insert_loop_id: "I".into(),
            scaffold_start: s.0,
            scaffold_end: s.1,
            insert_start: i.0,
            insert_end: i.1,
        }
    }

    fn scaffold() -> Structure {
        layout_structure(
            "SCAF",
            'A',
            1,
            &format!("{}CCCC{}CCC{}", "H".repeat(12), "E".repeat(6), "H".repeat(10)),
        )
    }

    #[test]
    fn identity_graft_is_fixed_point() {
        let s = scaffold();
        let spec = GraftSpec::new('A', 'A', vec![pair((12, 18), (12, 18))]);
        let m = splice(&s, &s, &spec).unwrap();
        let a = ca_trace(&s, 'A').unwrap().positions;
        let b = ca_trace(&m.structure, 'A').unwrap().positions;
        assert_eq!(a.len(), b.len());
        assert!(rmsd(&a, &b) < 1e-6);
        assert_eq!(m.grafted_count(), 7);
        assert_eq!(m.origin_mask[11], Origin::Grafted);
        assert_eq!(m.origin_mask[10], Origin::Scaffold);
    }

    #[test]
    fn lengths_add_up_and_numbering_is_sequential() {
        let s = scaffold();
        let mut ins = layout_structure("INSR", 'B', 101, &format!("{}CCCCCCC{}", "E".repeat(8), "H".repeat(9)));
        transform_structure(
            &mut ins,
            &rotation(Vec3::new(1.0, 1.0, 0.0), 40.0),
            Vec3::new(5.0, 0.0, -3.0),
        );
        let spec = GraftSpec::new('A', 'B', vec![pair((13, 16), (107, 117))]);
        let m = splice(&s, &ins, &spec).unwrap();
        let n = s.chains[0].residues.len();
        assert_eq!(m.chain().residues.len(), n - 4 + 11);
        assert_eq!(m.chain().residues.len(), spec.chimera_len(n));
        assert_eq!(m.grafted_count(), 11);
        for (k, r) in m.chain().residues.iter().enumerate() {
            assert_eq!(r.seq_num, 1 + k as i32);
        }
        assert_eq!(m.chain().residues[12].name, ins.chains[0].residues[6].name);
        assert_eq!(m.junctions.len(), 6);
    }

    #[test]
    fn anchors_past_chain_end_rejected() {
        let s = scaffold();
        let spec = GraftSpec::new('A', 'A', vec![pair((2, 5), (12, 18))]);
        assert!(matches!(splice(&s, &s, &spec), Err(GraftError::ClippedAnchor { .. })));
        let spec = GraftSpec::new('A', 'A', vec![pair((12, 90), (12, 18))]);
        assert!(matches!(
            splice(&s, &s, &spec),
            Err(GraftError::UnknownResidue { seq: 90, .. })
        ));
    }

    #[test]
    fn missing_anchor_ca_reported() {
        let mut s = scaffold();
        s.chains[0].residues[9].atoms.retain(|a| a.name != "CA");
        let spec = GraftSpec::new('A', 'A', vec![pair((12, 18), (12, 18))]);
        assert_eq!(
            splice(&s, &scaffold(), &spec),
            Err(GraftError::MissingAnchorAtoms { chain: 'A', seq: 10 })
        );
    }

    #[test]
    fn pdb_output_carries_mask() {
        let s = scaffold();
        let spec = GraftSpec::new('A', 'A', vec![pair((12, 18), (12, 18))]);
        let m = splice(&s, &s, &spec).unwrap();
        let parsed = crate::structure_io::parse_pdb(m.to_pdb().as_bytes()).unwrap();
        let bs: Vec<f64> = parsed.chains[0].residues.iter().map(|r| r.atoms[0].b_factor).collect();
        assert_eq!(bs[10], 0.0);
        assert_eq!(bs[11], 1.0);
        assert_eq!(bs.iter().filter(|b| **b == 1.0).count(), 7);
        let table = origin_table(&m);
        assert_eq!(table.lines().count(), 1 + m.chain().residues.len());
        assert!(table.lines().nth(12).unwrap().ends_with(",grafted"));
    }
}
