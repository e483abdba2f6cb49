//! Residue flexibility (experimental B-factors, GNM, ANM), coarse
//! aggregation onto segments and loops, agreement between methods, and
//! residue/loop motion cross-correlation.

pub mod enm;
mod xcorr;

pub use enm::{DEFAULT_ANM_CUTOFF, DEFAULT_GNM_CUTOFF};
pub use xcorr::{
    motion_cross_correlation, sort_correlation_rows, CorrelationMetric, LoopPairCorrelation, MotionCorrelationSet,
    SortOrder, DEFAULT_CORRELATION_MODES,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::loop_model::Loop;
use crate::secondary_structure::Segment;
use crate::structure_io::{ca_trace, CaTrace, Structure};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("need at least {needed} residues, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("contact graph is disconnected ({0} zero modes)")]
    DisconnectedContactGraph(usize),
    #[error("network is ill-conditioned ({0} near-zero modes, expected 6)")]
    IllConditioned(usize),
    #[error("profile lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("element {0:?} has no residues")]
    EmptyElement(String),
    #[error("unknown chain {0:?}")]
    UnknownChain(char),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("weight vector length {0} does not match profile length {1}")]
    WeightMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlexibilityMethod {
    #[serde(rename = "b")]
    PdbB,
    #[serde(rename = "gnm")]
    Gnm,
    #[serde(rename = "anm")]
    Anm,
}

impl FlexibilityMethod {
    pub const ALL: [FlexibilityMethod; 3] = [Self::PdbB, Self::Gnm, Self::Anm];
}

impl fmt::Display for FlexibilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PdbB => "b",
            Self::Gnm => "gnm",
            Self::Anm => "anm",
        })
    }
}

impl FromStr for FlexibilityMethod {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b" | "pdb_b" | "bfactor" => Ok(Self::PdbB),
            "gnm" => Ok(Self::Gnm),
            "anm" => Ok(Self::Anm),
            _ => Err(DynamicsError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityProfile {
    pub method: FlexibilityMethod,
    /// One value per traced residue.
    pub values: Vec<f64>,
    /// Min–max normalised to [0, 1]; a flat profile maps to 0.5.
    pub normalized: Vec<f64>,
    /// Set when every B-factor was zero (the file carries no flexibility signal).
    #[serde(default)]
    pub missing_b_factors: bool,
}

impl FlexibilityProfile {
    pub fn new(method: FlexibilityMethod, values: Vec<f64>) -> Self {
        let normalized = min_max_normalize(&values);
        Self {
            method,
            values,
            normalized,
            missing_b_factors: false,
        }
    }
}

pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Mean atomic B-factor of every residue that appears in the chain's Cα trace.
pub fn bfactor_profile(structure: &Structure, chain_id: char) -> Result<FlexibilityProfile, DynamicsError> {
    let trace = ca_trace(structure, chain_id).map_err(|_| DynamicsError::UnknownChain(chain_id))?;
    let chain = structure
        .chain(chain_id)
        .map_err(|_| DynamicsError::UnknownChain(chain_id))?;
    let values: Vec<f64> = trace
        .residue_indices
        .iter()
        .map(|&i| chain.residues[i].mean_b_factor())
        .collect();
    let mut profile = FlexibilityProfile::new(FlexibilityMethod::PdbB, values);
    profile.missing_b_factors = profile.values.iter().all(|v| *v == 0.0);
    if profile.missing_b_factors {
        log::warn!("{} chain {}: all B-factors are zero", structure.pdb_id, trace.chain_id);
    }
    Ok(profile)
}

pub fn gnm_fluctuations(trace: &CaTrace, cutoff: f64) -> Result<FlexibilityProfile, DynamicsError> {
    Ok(FlexibilityProfile::new(
        FlexibilityMethod::Gnm,
        enm::gnm_msf(&trace.positions, cutoff)?,
    ))
}

pub fn anm_fluctuations(trace: &CaTrace, cutoff: f64) -> Result<FlexibilityProfile, DynamicsError> {
    Ok(FlexibilityProfile::new(
        FlexibilityMethod::Anm,
        enm::anm_msf(&trace.positions, cutoff)?,
    ))
}

/// A structural element reduced to the trace indices of its residues.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: String,
    pub trace_indices: Vec<usize>,
}

impl Element {
    pub fn from_loop(lp: &Loop, trace: &CaTrace) -> Self {
        let (a, b) = lp.span();
        Self {
            id: lp.id.clone(),
            trace_indices: trace.trace_indices_in(a, b),
        }
    }

    pub fn from_segment(id: impl Into<String>, seg: &Segment, trace: &CaTrace) -> Self {
        Self {
            id: id.into(),
            trace_indices: trace.trace_indices_in(seg.start_index, seg.end_index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// One weight per traced residue, e.g. atom counts.
    PerResidue(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFlexibility {
    pub element_id: String,
    pub method: FlexibilityMethod,
    pub coarse_value: f64,
}

/// Weighted mean of the normalised values of each element's residues.
pub fn aggregate_flexibility(
    profile: &FlexibilityProfile,
    elements: &[Element],
    weighting: &Weighting,
) -> Result<Vec<ElementFlexibility>, DynamicsError> {
    if let Weighting::PerResidue(w) = weighting {
        if w.len() != profile.normalized.len() {
            return Err(DynamicsError::WeightMismatch(w.len(), profile.normalized.len()));
        }
    }
    elements
        .iter()
        .map(|el| {
            let (mut num, mut den) = (0.0, 0.0);
            for &i in &el.trace_indices {
                let w = match weighting {
                    Weighting::Uniform => 1.0,
                    Weighting::PerResidue(ws) => ws[i],
                };
                num += w * profile.normalized[i];
                den += w;
            }
            if el.trace_indices.is_empty() || den <= 0.0 {
                return Err(DynamicsError::EmptyElement(el.id.clone()));
            }
            Ok(ElementFlexibility {
                element_id: el.id.clone(),
                method: profile.method,
                coarse_value: (num / den).clamp(0.0, 1.0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub r: f64,
    pub p: f64,
    pub low_significance: bool,
    /// r is undefined because one profile is flat.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCorrelation {
    pub methods: Vec<FlexibilityMethod>,
    pub entries: Vec<Vec<CorrelationEntry>>,
}

impl MethodCorrelation {
    pub fn get(&self, a: FlexibilityMethod, b: FlexibilityMethod) -> Option<&CorrelationEntry> {
        let i = self.methods.iter().position(|m| *m == a)?;
        let j = self.methods.iter().position(|m| *m == b)?;
        Some(&self.entries[i][j])
    }
}

pub const DEFAULT_SIGNIFICANCE_THRESHOLD: f64 = 0.5;

/// Pearson r and its two-sided p-value (t distribution, n − 2 degrees of freedom).
pub fn pearson(a: &[f64], b: &[f64]) -> Result<(f64, f64, bool), DynamicsError> {
    if a.len() != b.len() {
        return Err(DynamicsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Ok((0.0, 1.0, true));
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Ok((0.0, 1.0, true));
    }
    let r = (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    Ok((r, p_value(r, n), false))
}

fn p_value(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

pub fn method_correlation(profiles: &[FlexibilityProfile], threshold: f64) -> Result<MethodCorrelation, DynamicsError> {
    let k = profiles.len();
    let mut entries = vec![
        vec![
            CorrelationEntry {
                r: 1.0,
                p: 0.0,
                low_significance: false,
                zero_variance: false,
            };
            k
        ];
        k
    ];
    for i in 0..k {
        for j in (i + 1)..k {
            let (r, p, zero_variance) = pearson(&profiles[i].values, &profiles[j].values)?;
            let e = CorrelationEntry {
                r,
                p,
                low_significance: p > threshold,
                zero_variance,
            };
            entries[i][j] = e;
            entries[j][i] = e;
        }
    }
    Ok(MethodCorrelation {
        methods: profiles.iter().map(|p| p.method).collect(),
        entries,
    })
}
