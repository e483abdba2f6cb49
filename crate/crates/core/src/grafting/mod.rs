//! Splicing insert loops into a scaffold, boundary-variant enumeration,
//! surrogate and external scoring, and ranking.

mod adapter;
mod kabsch;
mod score;
mod splice;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structure_io::Structure;

pub use adapter::{external_score, AdapterConfig};
pub use kabsch::{kabsch, rmsd, Superposition};
pub use score::{count_clashes, surrogate_score, CLASH_DISTANCE, CLASH_WEIGHT};
pub use splice::{origin_table, splice, ChimericModel, Junction, Origin};

pub const DEFAULT_ANCHOR_LEN: usize = 3;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_RANK_KEY: &str = "composite";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraftError {
    #[error("degenerate range {start}..{end}")]
    DegenerateRange { start: i32, end: i32 },
    #[error("no residue {seq} in chain {chain}")]
    UnknownResidue { chain: char, seq: i32 },
    #[error("anchor residue {seq} in chain {chain} has no CA atom")]
    MissingAnchorAtoms { chain: char, seq: i32 },
    #[error("anchor of {anchor_len} residues around {start}..{end} extends past the end of chain {chain}")]
    ClippedAnchor {
        chain: char,
        start: i32,
        end: i32,
        anchor_len: usize,
    },
    #[error("scaffold ranges overlap: {0}..{1} and {2}..{3}")]
    OverlappingRanges(i32, i32, i32, i32),
    #[error("graft spec has no pairs")]
    EmptyPairing,
    #[error("adapter could not run: {0}")]
    AdapterLaunchFailure(String),
    #[error("adapter output has no NAME VALUE line: {0:?}")]
    AdapterParseFailure(String),
    #[error("adapter did not finish within {0:?}")]
    AdapterTimeout(Duration),
    #[error("score key {key:?} missing from model {model}")]
    MissingScoreKey { key: String, model: String },
    #[error("no chain {0}")]
    UnknownChain(char),
}

fn chain_of(s: &Structure, id: char) -> Result<&crate::structure_io::Chain, GraftError> {
    s.chains.iter().find(|c| c.id == id).ok_or(GraftError::UnknownChain(id))
}

/// One scaffold range to be replaced by one insert range, in author seq numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraftPair {
    pub scaffold_loop_id: String,
    pub insert_loop_id: String,
    pub scaffold_start: i32,
    pub scaffold_end: i32,
    pub insert_start: i32,
    pub insert_end: i32,
}

impl GraftPair {
    pub fn scaffold_len(&self) -> usize {
        (self.scaffold_end - self.scaffold_start + 1).max(0) as usize
    }

    pub fn insert_len(&self) -> usize {
        (self.insert_end - self.insert_start + 1).max(0) as usize
    }

    fn check(&self) -> Result<(), GraftError> {
        for (start, end) in [
            (self.scaffold_start, self.scaffold_end),
            (self.insert_start, self.insert_end),
        ] {
            if start > end {
                return Err(GraftError::DegenerateRange { start, end });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraftSpec {
    pub scaffold_chain: char,
    pub insert_chain: char,
    pub pairs: Vec<GraftPair>,
    #[serde(default = "default_anchor_len")]
    pub anchor_len: usize,
}

fn default_anchor_len() -> usize {
    DEFAULT_ANCHOR_LEN
}

impl GraftSpec {
    pub fn new(scaffold_chain: char, insert_chain: char, pairs: Vec<GraftPair>) -> Self {
        Self {
            scaffold_chain,
            insert_chain,
            pairs,
            anchor_len: DEFAULT_ANCHOR_LEN,
        }
    }

    /// Stable label built from the ranges, e.g. `A12-20:A12-23`.
    pub fn label(&self) -> String {
        self.pairs
            .iter()
            .map(|p| {
                format!(
                    "{}{}-{}:{}{}-{}",
                    self.scaffold_chain,
                    p.scaffold_start,
                    p.scaffold_end,
                    self.insert_chain,
                    p.insert_start,
                    p.insert_end
                )
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Ranges non-degenerate and pairwise disjoint on the scaffold.
    pub fn check(&self) -> Result<(), GraftError> {
        if self.pairs.is_empty() {
            return Err(GraftError::EmptyPairing);
        }
        for p in &self.pairs {
            p.check()?;
        }
        let mut ranges: Vec<(i32, i32)> = self.pairs.iter().map(|p| (p.scaffold_start, p.scaffold_end)).collect();
        ranges.sort();
        for w in ranges.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(GraftError::OverlappingRanges(w[0].0, w[0].1, w[1].0, w[1].1));
            }
        }
        Ok(())
    }

    /// Expected residue count of the spliced chain.
    pub fn chimera_len(&self, scaffold_len: usize) -> usize {
        let removed: usize = self.pairs.iter().map(GraftPair::scaffold_len).sum();
        let added: usize = self.pairs.iter().map(GraftPair::insert_len).sum();
        scaffold_len - removed + added
    }
}

/// Inclusive seq-number limits each boundary may be moved within.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainBounds {
    pub scaffold: (i32, i32),
    pub insert: (i32, i32),
}

impl ChainBounds {
    pub const UNBOUNDED: Self = Self {
        scaffold: (i32::MIN, i32::MAX),
        insert: (i32::MIN, i32::MAX),
    };

    /// Positions whose anchors still fit inside the chains.
    pub fn for_structures(scaffold: &Structure, insert: &Structure, spec: &GraftSpec) -> Result<Self, GraftError> {
        let limits = |s: &Structure, chain: char| -> Result<(i32, i32), GraftError> {
            let residues = &chain_of(s, chain)?.residues;
            let n = residues.len();
            if n < 2 * spec.anchor_len + 1 {
                return Ok((1, 0));
            }
            Ok((
                residues[spec.anchor_len].seq_num,
                residues[n - 1 - spec.anchor_len].seq_num,
            ))
        };
        Ok(Self {
            scaffold: limits(scaffold, spec.scaffold_chain)?,
            insert: limits(insert, spec.insert_chain)?,
        })
    }
}

fn clip(v: i64, (lo, hi): (i32, i32)) -> i32 {
    v.clamp(lo as i64, hi as i64) as i32
}

/// Boundary variants of `base`: every boundary of every pair shifted
/// independently by an offset in `-window..=window`, clipped to `bounds`.
///
/// Order is deterministic: the last pair varies fastest, and within a pair the
/// offsets of (scaffold start, scaffold end, insert start, insert end) are
/// enumerated lexicographically from `-window`. Variants that collapse a range,
/// overlap on the scaffold, or duplicate an earlier variant are dropped.
pub fn enumerate_variants(base: &GraftSpec, window: usize, bounds: &ChainBounds) -> Result<Vec<GraftSpec>, GraftError> {
    base.check()?;
    for (lo, hi) in [bounds.scaffold, bounds.insert] {
        if lo > hi {
            let p = &base.pairs[0];
            return Err(GraftError::DegenerateRange {
                start: p.scaffold_start,
                end: p.scaffold_end,
            });
        }
    }
    let w = window as i64;
    let offsets: Vec<i64> = (-w..=w).collect();
    let per_pair: Vec<Vec<GraftPair>> = base
        .pairs
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(offsets.len().pow(4));
            for &a in &offsets {
                for &b in &offsets {
                    for &c in &offsets {
                        for &d in &offsets {
                            let v = GraftPair {
                                scaffold_start: clip(p.scaffold_start as i64 + a, bounds.scaffold),
                                scaffold_end: clip(p.scaffold_end as i64 + b, bounds.scaffold),
                                insert_start: clip(p.insert_start as i64 + c, bounds.insert),
                                insert_end: clip(p.insert_end as i64 + d, bounds.insert),
                                ..p.clone()
                            };
                            if v.check().is_ok() {
                                out.push(v);
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    if let Some(i) = per_pair.iter().position(Vec::is_empty) {
        let p = &base.pairs[i];
        return Err(GraftError::DegenerateRange {
            start: p.scaffold_start,
            end: p.scaffold_end,
        });
    }

    let mut seen = BTreeSet::new();
    let mut result = Vec::new();
    let mut idx = vec![0usize; per_pair.len()];
    loop {
        let spec = GraftSpec {
            pairs: idx.iter().zip(&per_pair).map(|(&i, v)| v[i].clone()).collect(),
            ..base.clone()
        };
        if spec.check().is_ok() && seen.insert(spec.pairs.clone()) {
            result.push(spec);
        }
        // Odometer increment, last pair fastest.
        let mut k = per_pair.len();
        loop {
            if k == 0 {
                return if result.is_empty() {
                    Err(GraftError::DegenerateRange {
                        start: base.pairs[0].scaffold_start,
                        end: base.pairs[0].scaffold_end,
                    })
                } else {
                    Ok(result)
                };
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_pair[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Models ordered by ascending `key` (stable for ties).
pub fn rank_models<'a>(models: &'a [ChimericModel], key: &str) -> Result<Vec<&'a ChimericModel>, GraftError> {
    let mut keyed = Vec::with_capacity(models.len());
    for m in models {
        let v = m.scores.get(key).ok_or_else(|| GraftError::MissingScoreKey {
            key: key.to_string(),
            model: m.id.clone(),
        })?;
        keyed.push((*v, m));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, m)| m).collect())
}

/// Surrogate scores as a name → value map, the shape stored on models.
pub(crate) fn score_map(report: &ScoreReport) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("anchor_rmsd".to_string(), report.anchor_rmsd),
        ("clash_count".to_string(), report.clash_count as f64),
        ("composite".to_string(), report.composite),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub anchor_rmsd: f64,
    pub clash_count: usize,
    pub composite: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<BTreeMap<String, f64>>,
}
