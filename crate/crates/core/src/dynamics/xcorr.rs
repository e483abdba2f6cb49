use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::enm::gnm_modes;
use super::DynamicsError;
use crate::loop_model::Loop;
use crate::structure_io::CaTrace;

pub const DEFAULT_CORRELATION_MODES: usize = 20;

/// Loop-level motion correlation between a row loop and a column loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPairCorrelation {
    pub row: String,
    pub column: String,
    /// Mean C over periodic residues of the row × periodic residues of the column.
    pub ss_corr: f64,
    /// Mean C over all residues of the row × all residues of the column.
    pub loop_corr: f64,
    /// Mean C over periodic residues of the row × coil residues of the column.
    pub ss_to_coil: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionCorrelationSet {
    /// Normalised residue cross-correlation, row-major over trace positions.
    pub residue_matrix: Vec<Vec<f64>>,
    /// Loop ids in chain order.
    pub loop_ids: Vec<String>,
    /// Every ordered pair of distinct loops.
    pub pairs: Vec<LoopPairCorrelation>,
    pub modes_used: usize,
}

impl MotionCorrelationSet {
    pub fn pair(&self, row: &str, column: &str) -> Option<&LoopPairCorrelation> {
        self.pairs.iter().find(|p| p.row == row && p.column == column)
    }
}

fn mean_block(c: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for &i in rows {
        for &j in cols {
            s += c[i][j];
        }
    }
    (s / (rows.len() * cols.len()) as f64).clamp(-1.0, 1.0)
}

fn to_trace(trace: &CaTrace, residue_indices: Vec<usize>) -> Vec<usize> {
    residue_indices
        .into_iter()
        .filter_map(|i| trace.trace_index(i))
        .collect()
}

/// GNM cross-correlation over the lowest `modes` nonzero modes, plus
/// signed loop-pair aggregates for every ordered pair of `loops`.
pub fn motion_cross_correlation(
    trace: &CaTrace,
    loops: &[&Loop],
    cutoff: f64,
    modes: usize,
) -> Result<MotionCorrelationSet, DynamicsError> {
    let spectrum = gnm_modes(&trace.positions, cutoff)?;
    let used = modes.min(spectrum.eigenvalues.len());
    let cov = spectrum.pseudo_inverse(Some(used));
    let n = trace.len();
    let diag: Vec<f64> = (0..n).map(|i| cov[(i, i)]).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        c[i][i] = 1.0;
        for j in (i + 1)..n {
            let denom = (diag[i] * diag[j]).sqrt();
            let v = if denom > 0.0 {
                (cov[(i, j)] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            c[i][j] = v;
            c[j][i] = v;
        }
    }

    struct Sets {
        periodic: Vec<usize>,
        coil: Vec<usize>,
        all: Vec<usize>,
    }
    let sets: Vec<Sets> = loops
        .iter()
        .map(|l| Sets {
            periodic: to_trace(trace, l.periodic_indices()),
            coil: to_trace(trace, l.coil_indices()),
            all: to_trace(trace, l.all_indices()),
        })
        .collect();
    let mut pairs = Vec::with_capacity(loops.len() * loops.len().saturating_sub(1));
    for (r, row) in loops.iter().enumerate() {
        for (k, col) in loops.iter().enumerate() {
            if r == k {
                continue;
            }
            pairs.push(LoopPairCorrelation {
                row: row.id.clone(),
                column: col.id.clone(),
                ss_corr: mean_block(&c, &sets[r].periodic, &sets[k].periodic),
                loop_corr: mean_block(&c, &sets[r].all, &sets[k].all),
                ss_to_coil: mean_block(&c, &sets[r].periodic, &sets[k].coil),
            });
        }
    }
    Ok(MotionCorrelationSet {
        residue_matrix: c,
        loop_ids: loops.iter().map(|l| l.id.clone()).collect(),
        pairs,
        modes_used: used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMetric {
    SsCorr,
    LoopCorr,
    SsToCoil,
    Position,
    Id,
}

impl FromStr for CorrelationMetric {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "ss_corr" | "ss" | "maximal_ss_correlation" => Ok(Self::SsCorr),
            "loop_corr" | "loop" | "maximal_loop_correlation" => Ok(Self::LoopCorr),
            "ss_to_coil" | "maximal_ss_to_coil" => Ok(Self::SsToCoil),
            "position" => Ok(Self::Position),
            "id" => Ok(Self::Id),
            _ => Err(DynamicsError::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Ascending,
    #[default]
    Descending,
}

/// Row order for the loop matrix: every non-candidate loop, keyed by the
/// maximum of the chosen metric over the candidate columns. Stable.
pub fn sort_correlation_rows(
    set: &MotionCorrelationSet,
    candidates: &[String],
    metric: CorrelationMetric,
    order: SortOrder,
) -> Vec<String> {
    let rows: Vec<String> = set
        .loop_ids
        .iter()
        .filter(|id| !candidates.contains(id))
        .cloned()
        .collect();
    let key = |row: &str| -> f64 {
        candidates
            .iter()
            .filter_map(|c| set.pair(row, c))
            .map(|p| match metric {
                CorrelationMetric::SsCorr => p.ss_corr,
                CorrelationMetric::LoopCorr => p.loop_corr,
                CorrelationMetric::SsToCoil => p.ss_to_coil,
                CorrelationMetric::Position | CorrelationMetric::Id => 0.0,
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut keyed: Vec<(String, f64)> = rows
        .into_iter()
        .map(|r| {
            let k = key(&r);
            (r, k)
        })
        .collect();
    match metric {
        CorrelationMetric::Position => {}
        CorrelationMetric::Id => keyed.sort_by(|a, b| a.0.cmp(&b.0)),
        _ => keyed.sort_by(|a, b| a.1.total_cmp(&b.1)),
    }
    if order == SortOrder::Descending && metric != CorrelationMetric::Position {
        // Reverse while keeping equal keys in their original relative order.
        keyed = reverse_stable(keyed, metric);
    }
    keyed.into_iter().map(|(r, _)| r).collect()
}

fn reverse_stable(sorted: Vec<(String, f64)>, metric: CorrelationMetric) -> Vec<(String, f64)> {
    let mut groups: Vec<Vec<(String, f64)>> = Vec::new();
    for item in sorted {
        let same = match groups.last().and_then(|g| g.last()) {
            Some(prev) => match metric {
                CorrelationMetric::Id => prev.0 == item.0,
                _ => prev.1 == item.1,
            },
            None => false,
        };
        if same {
            groups.last_mut().unwrap().push(item);
        } else {
            groups.push(vec![item]);
        }
    }
    groups.into_iter().rev().flatten().collect()
}
