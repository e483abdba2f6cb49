//! Reader for classic DSSP output, used for conformance comparisons.

use super::{SsAssignment, SsClass, SsError};
use crate::structure_io::ResidueKey;

#[derive(Debug, Clone, PartialEq)]
pub struct DsspRecord {
    pub chain: char,
    pub key: ResidueKey,
    pub amino_acid: char,
    /// Raw one-letter DSSP code (`' '` for no assignment).
    pub code: char,
}

/// Parses the residue table of a classic-format DSSP file. Break lines (`!`) are skipped.
pub fn parse_dssp_classic(text: &str) -> Result<Vec<DsspRecord>, SsError> {
    let mut lines = text.lines();
    if !lines.by_ref().any(|l| l.starts_with("  #  RESIDUE")) {
        return Err(SsError::MalformedDssp("residue table header not found".into()));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        if chars.len() < 17 {
            return Err(SsError::MalformedDssp(format!("short residue line {}", k + 1)));
        }
        let amino_acid = chars[13];
        if amino_acid == '!' {
            continue;
        }
        let num: String = chars[5..10].iter().collect();
        let seq_num = num
            .trim()
            .parse::<i32>()
            .map_err(|_| SsError::MalformedDssp(format!("bad residue number {num:?}")))?;
        out.push(DsspRecord {
            chain: chars[11],
            key: ResidueKey {
                seq_num,
                insertion_code: Some(chars[10]).filter(|c| *c != ' '),
            },
            amino_acid,
            code: chars[16],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Collapsed {
    Helix,
    Strand,
    Other,
}

fn collapse_code(c: char) -> Collapsed {
    match c {
        'H' | 'G' => Collapsed::Helix,
        'E' => Collapsed::Strand,
        _ => Collapsed::Other,
    }
}

fn collapse_class(c: SsClass) -> Collapsed {
    collapse_code(c.code())
}

/// Fraction of residues (matched by chain and key) whose classes agree once
/// collapsed to {H∪G, E, other}. Returns `(fraction, residues compared)`.
pub fn collapsed_agreement(assignment: &SsAssignment, reference: &[DsspRecord]) -> (f64, usize) {
    let mut compared = 0usize;
    let mut agree = 0usize;
    for rec in reference.iter().filter(|r| r.chain == assignment.chain_id) {
        if let Some(i) = assignment.residue_keys.iter().position(|k| *k == rec.key) {
            compared += 1;
            if collapse_class(assignment.classes[i]) == collapse_code(rec.code) {
                agree += 1;
            }
        }
    }
    if compared == 0 {
        return (0.0, 0);
    }
    (agree as f64 / compared as f64, compared)
}
