//! Protein structure model, legacy PDB reading/writing, archive fetching and
//! Cα trace extraction.

mod fetch;
mod pdb;

pub use fetch::{normalize_pdb_id, Archive, DEFAULT_ARCHIVE_URL};
pub use pdb::{parse_pdb, write_pdb};

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("no parsable ATOM record")]
    NoAtoms,
    #[error("malformed record(s) at line(s) {}", format_lines(.0))]
    MalformedRecord(Vec<(usize, String)>),
    #[error("input is not valid text: {0}")]
    NotText(#[from] std::str::Utf8Error),
    #[error("invalid PDB id {0:?}")]
    InvalidId(String),
    #[error("entry {0} not found in archive")]
    NotFound(String),
    #[error("network failure after {attempts} attempt(s): {message}")]
    NetworkFailure { attempts: u32, message: String },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown chain {0:?}")]
    UnknownChain(char),
}

fn format_lines(lines: &[(usize, String)]) -> String {
    lines
        .iter()
        .map(|(n, why)| format!("{n} ({why})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureSource {
    File,
    RemoteFetch,
    /// Built in memory, e.g. a chimeric model.
    Derived,
}

/// Author residue numbering: sequence number plus optional insertion code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueKey {
    pub seq_num: i32,
    pub insertion_code: Option<char>,
}

impl ResidueKey {
    pub fn new(seq_num: i32) -> Self {
        Self {
            seq_num,
            insertion_code: None,
        }
    }
}

impl Ord for ResidueKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.seq_num
            .cmp(&other.seq_num)
            .then_with(|| self.insertion_code.cmp(&other.insertion_code))
    }
}

impl PartialOrd for ResidueKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ResidueKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.insertion_code {
            Some(c) => write!(f, "{}{}", self.seq_num, c),
            None => write!(f, "{}", self.seq_num),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub name: String,
    pub element: String,
    pub position: Vec3,
    /// Temperature factor in Å².
    pub b_factor: f64,
    pub occupancy: f64,
}

impl Atom {
    pub fn new(name: &str, element: &str, position: Vec3) -> Self {
        Self {
            name: name.to_string(),
            element: element.to_string(),
            position,
            b_factor: 0.0,
            occupancy: 1.0,
        }
    }

    pub fn is_hydrogen(&self) -> bool {
        matches!(self.element.as_str(), "H" | "D")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub seq_num: i32,
    pub insertion_code: Option<char>,
    /// Three-letter amino-acid code.
    pub name: String,
    pub atoms: Vec<Atom>,
}

impl Residue {
    pub fn key(&self) -> ResidueKey {
        ResidueKey {
            seq_num: self.seq_num,
            insertion_code: self.insertion_code,
        }
    }

    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }

    pub fn ca(&self) -> Option<Vec3> {
        self.atom("CA").map(|a| a.position)
    }

    pub fn mean_b_factor(&self) -> f64 {
        if self.atoms.is_empty() {
            return 0.0;
        }
        self.atoms.iter().map(|a| a.b_factor).sum::<f64>() / self.atoms.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: char,
    pub residues: Vec<Residue>,
}

impl Chain {
    /// Index of the residue with the given key.
    pub fn residue_index(&self, key: ResidueKey) -> Option<usize> {
        self.residues.binary_search_by(|r| r.key().cmp(&key)).ok()
    }

    /// First residue index carrying `seq_num`, ignoring insertion codes.
    pub fn first_index_of_seq(&self, seq_num: i32) -> Option<usize> {
        self.residues.iter().position(|r| r.seq_num == seq_num)
    }

    /// Last residue index carrying `seq_num`, ignoring insertion codes.
    pub fn last_index_of_seq(&self, seq_num: i32) -> Option<usize> {
        self.residues.iter().rposition(|r| r.seq_num == seq_num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub pdb_id: String,
    pub chains: Vec<Chain>,
    pub source: StructureSource,
}

impl Structure {
    pub fn chain(&self, id: char) -> Result<&Chain, StructureError> {
        self.chains
            .iter()
            .find(|c| c.id == id)
            .ok_or(StructureError::UnknownChain(id))
    }

    pub fn first_chain_id(&self) -> char {
        self.chains[0].id
    }

    pub fn atom_count(&self) -> usize {
        self.chains
            .iter()
            .flat_map(|c| &c.residues)
            .map(|r| r.atoms.len())
            .sum()
    }
}

/// Cα positions of one chain, in residue order.
#[derive(Debug, Clone, PartialEq)]
pub struct CaTrace {
    pub chain_id: char,
    pub positions: Vec<Vec3>,
    pub residue_keys: Vec<ResidueKey>,
    /// Index of each traced residue within the chain's residue list.
    pub residue_indices: Vec<usize>,
}

impl CaTrace {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Trace position for a chain residue index, if that residue has a Cα.
    pub fn trace_index(&self, residue_index: usize) -> Option<usize> {
        self.residue_indices.binary_search(&residue_index).ok()
    }

    /// Trace indices of all residues in the inclusive chain-index range that carry a Cα.
    pub fn trace_indices_in(&self, first: usize, last: usize) -> Vec<usize> {
        if first > last {
            return Vec::new();
        }
        let lo = self.residue_indices.partition_point(|&r| r < first);
        let hi = self.residue_indices.partition_point(|&r| r <= last);
        (lo..hi).collect()
    }
}

pub fn ca_trace(structure: &Structure, chain_id: char) -> Result<CaTrace, StructureError> {
    let chain = structure.chain(chain_id)?;
    let mut trace = CaTrace {
        chain_id,
        positions: Vec::new(),
        residue_keys: Vec::new(),
        residue_indices: Vec::new(),
    };
    for (i, res) in chain.residues.iter().enumerate() {
        if let Some(ca) = res.ca() {
            trace.positions.push(ca);
            trace.residue_keys.push(res.key());
            trace.residue_indices.push(i);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residue(seq: i32, with_ca: bool) -> Residue {
        let mut atoms = vec![Atom::new("N", "N", Vec3::new(seq as f64, 0.0, 0.0))];
        if with_ca {
            atoms.push(Atom::new("CA", "C", Vec3::new(seq as f64, 1.0, 0.0)));
        }
        Residue {
            seq_num: seq,
            insertion_code: None,
            name: "ALA".into(),
            atoms,
        }
    }

    fn structure(residues: Vec<Residue>) -> Structure {
        Structure {
            pdb_id: "TEST".into(),
            chains: vec![Chain { id: 'A', residues }],
            source: StructureSource::File,
        }
    }

    #[test]
    fn trace_of_three_residues() {
        let s = structure((1..=3).map(|i| residue(i, true)).collect());
        let t = ca_trace(&s, 'A').unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.positions[1], Vec3::new(2.0, 1.0, 0.0));
    }

    #[test]
    fn residue_without_ca_is_skipped() {
        let s = structure(vec![residue(1, true), residue(2, false), residue(3, true)]);
        let t = ca_trace(&s, 'A').unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.residue_keys, vec![ResidueKey::new(1), ResidueKey::new(3)]);
        assert_eq!(t.trace_index(1), None);
        assert_eq!(t.trace_index(2), Some(1));
        assert_eq!(t.trace_indices_in(0, 2), vec![0, 1]);
    }

    #[test]
    fn unknown_chain() {
        let s = structure(vec![residue(1, true)]);
        assert!(matches!(ca_trace(&s, 'Z'), Err(StructureError::UnknownChain('Z'))));
    }

    #[test]
    fn key_ordering_puts_insertions_after_plain_number() {
        let plain = ResidueKey::new(52);
        let ins = ResidueKey {
            seq_num: 52,
            insertion_code: Some('A'),
        };
        assert!(plain < ins);
        assert!(ins < ResidueKey::new(53));
    }
}
