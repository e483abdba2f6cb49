//! Per-residue secondary-structure classes, automatic assignment from
//! backbone hydrogen bonds, and expert overrides.

mod dssp;
mod reference;

pub use dssp::{assign_secondary_structure, hbond_energy, HBOND_THRESHOLD};
pub use reference::{collapsed_agreement, parse_dssp_classic, DsspRecord};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structure_io::ResidueKey;

#[derive(Debug, Error, PartialEq)]
pub enum SsError {
    #[error("chain {0:?} lacks a run of 5 residues with complete N/CA/C/O backbone")]
    MissingBackbone(char),
    #[error("residue range {start}..{end} is not within chain {chain:?}")]
    RangeOutOfChain { chain: char, start: i32, end: i32 },
    #[error("inverted range {start}..{end}")]
    InvertedRange { start: i32, end: i32 },
    #[error("unknown chain {0:?}")]
    UnknownChain(char),
    #[error("malformed DSSP file: {0}")]
    MalformedDssp(String),
    #[error("unknown secondary-structure code {0:?}")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SsClass {
    /// α-helix
    H,
    /// 3₁₀-helix
    G,
    /// β-strand
    E,
    /// coil
    C,
}

impl SsClass {
    /// H and E delimit loops; G counts as loop material.
    pub fn is_periodic(self) -> bool {
        matches!(self, SsClass::H | SsClass::E)
    }

    pub fn code(self) -> char {
        match self {
            SsClass::H => 'H',
            SsClass::G => 'G',
            SsClass::E => 'E',
            SsClass::C => 'C',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'H' => Some(SsClass::H),
            'G' => Some(SsClass::G),
            'E' => Some(SsClass::E),
            'C' | '-' | ' ' => Some(SsClass::C),
            _ => None,
        }
    }
}

impl fmt::Display for SsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl std::str::FromStr for SsClass {
    type Err = SsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => SsClass::from_code(c).ok_or_else(|| SsError::UnknownClass(s.into())),
            _ => Err(SsError::UnknownClass(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Automatic,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsAssignment {
    pub chain_id: char,
    pub residue_keys: Vec<ResidueKey>,
    pub classes: Vec<SsClass>,
    pub provenance: Vec<Provenance>,
}

/// Maximal run of one class over inclusive 0-based residue indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub ss_class: SsClass,
    pub start_index: usize,
    pub end_index: usize,
}

impl Segment {
    pub fn residue_count(&self) -> usize {
        self.end_index + 1 - self.start_index
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start_index..=self.end_index).contains(&index)
    }
}

impl SsAssignment {
    pub fn automatic(chain_id: char, residue_keys: Vec<ResidueKey>, classes: Vec<SsClass>) -> Self {
        assert_eq!(residue_keys.len(), classes.len());
        let provenance = vec![Provenance::Automatic; classes.len()];
        Self {
            chain_id,
            residue_keys,
            classes,
            provenance,
        }
    }

    /// Assignment over residues numbered `first_seq..` from a class string such as `"HHHCCEEE"`.
    pub fn from_codes(chain_id: char, first_seq: i32, codes: &str) -> Result<Self, SsError> {
        let classes = codes
            .chars()
            .map(|c| SsClass::from_code(c).ok_or_else(|| SsError::UnknownClass(c.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let keys = (0..classes.len())
            .map(|i| ResidueKey::new(first_seq + i as i32))
            .collect();
        Ok(Self::automatic(chain_id, keys, classes))
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn codes(&self) -> String {
        self.classes.iter().map(|c| c.code()).collect()
    }

    /// Inclusive index range covering residues numbered `start_seq..=end_seq`.
    pub fn resolve_range(&self, start_seq: i32, end_seq: i32) -> Result<(usize, usize), SsError> {
        if start_seq > end_seq {
            return Err(SsError::InvertedRange {
                start: start_seq,
                end: end_seq,
            });
        }
        let out = || SsError::RangeOutOfChain {
            chain: self.chain_id,
            start: start_seq,
            end: end_seq,
        };
        let first = self
            .residue_keys
            .iter()
            .position(|k| k.seq_num == start_seq)
            .ok_or_else(out)?;
        let last = self
            .residue_keys
            .iter()
            .rposition(|k| k.seq_num == end_seq)
            .ok_or_else(out)?;
        Ok((first, last))
    }

    pub fn seq_num(&self, index: usize) -> i32 {
        self.residue_keys[index].seq_num
    }
}

/// Sets every residue numbered `start_seq..=end_seq` to `new_class`, marking it manual.
pub fn reassign_region(
    assignment: &SsAssignment,
    start_seq: i32,
    end_seq: i32,
    new_class: SsClass,
) -> Result<SsAssignment, SsError> {
    let (first, last) = assignment.resolve_range(start_seq, end_seq)?;
    let mut out = assignment.clone();
    for i in first..=last {
        out.classes[i] = new_class;
        out.provenance[i] = Provenance::Manual;
    }
    Ok(out)
}

pub fn segments_of(assignment: &SsAssignment) -> Vec<Segment> {
    segments_of_classes(&assignment.classes)
}

pub fn segments_of_classes(classes: &[SsClass]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        match out.last_mut() {
            Some(seg) if seg.ss_class == c => seg.end_index = i,
            _ => out.push(Segment {
                ss_class: c,
                start_index: i,
                end_index: i,
            }),
        }
    }
    out
}
