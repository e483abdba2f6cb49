//! Per-stage subcommands. Each returns the text it would print.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use loopgraft_core::dynamics::{
    aggregate_flexibility, anm_fluctuations, bfactor_profile, gnm_fluctuations, method_correlation,
    motion_cross_correlation, sort_correlation_rows, CorrelationMetric, Element, SortOrder, Weighting,
    DEFAULT_ANM_CUTOFF, DEFAULT_CORRELATION_MODES, DEFAULT_GNM_CUTOFF, DEFAULT_SIGNIFICANCE_THRESHOLD,
};
use loopgraft_core::grafting::origin_table;
use loopgraft_core::orchestration::{Config, JobState, ProteinState, SessionManager};
use loopgraft_core::structure_io::{parse_pdb, Archive};
use loopgraft_core::{FlexibilityMethod, FlexibilityProfile, Loop, Phase, TriageState};
use serde::Serialize;

use crate::input::ProteinArg;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Json,
    Csv,
}

pub fn fetch(config: &Config, id: &str, cache_dir: Option<&Path>) -> Result<String, CliError> {
    let dir = cache_dir.map_or_else(|| config.cache_dir.clone(), Path::to_path_buf);
    let archive = Archive::new(config.archive_url.clone(), dir);
    let bytes = archive.fetch_bytes(id)?;
    let s = parse_pdb(&bytes)?;
    let chains: Vec<String> = s
        .chains
        .iter()
        .map(|c| format!("{}:{}", c.id, c.residues.len()))
        .collect();
    Ok(format!(
        "{}\t{} atoms\tchains {}\n",
        archive.cache_path(id)?.display(),
        s.atom_count(),
        chains.join(" ")
    ))
}

#[derive(Serialize)]
struct GeometryRow<'a> {
    loop_id: &'a str,
    first_seq: i32,
    last_seq: i32,
    coil_start: Option<i32>,
    coil_end: Option<i32>,
    ss1: char,
    ss2: char,
    custom: bool,
    d: Option<f64>,
    delta: Option<f64>,
    theta: Option<f64>,
    rho: Option<f64>,
}

fn geometry_rows(p: &ProteinState) -> Vec<GeometryRow<'_>> {
    p.loops
        .loops()
        .map(|l| GeometryRow {
            loop_id: &l.id,
            first_seq: l.first_seq,
            last_seq: l.last_seq,
            coil_start: l.coil_seq.map(|c| c.0),
            coil_end: l.coil_seq.map(|c| c.1),
            ss1: l.ss1.ss_class.code(),
            ss2: l.ss2.ss_class.code(),
            custom: l.custom,
            d: l.descriptors.map(|g| g.d),
            delta: l.descriptors.map(|g| g.delta),
            theta: l.descriptors.map(|g| g.theta),
            rho: l.descriptors.map(|g| g.rho),
        })
        .collect()
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.prec$}"))
}

fn opt_i(v: Option<i32>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn geometry(p: &ProteinState, format: TableFormat) -> Result<String, CliError> {
    let rows = geometry_rows(p);
    let mut out = String::new();
    match format {
        TableFormat::Json => out = serde_json::to_string_pretty(&rows)? + "\n",
        TableFormat::Csv => {
            out.push_str("loop_id,first_seq,last_seq,coil_start,coil_end,ss1,ss2,custom,D,delta,theta,rho\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.loop_id,
                    r.first_seq,
                    r.last_seq,
                    opt_i(r.coil_start),
                    opt_i(r.coil_end),
                    r.ss1,
                    r.ss2,
                    r.custom,
                    opt(r.d, 4),
                    opt(r.delta, 4),
                    opt(r.theta, 4),
                    opt(r.rho, 4)
                );
            }
        }
        TableFormat::Text => {
            let _ = writeln!(
                out,
                "{:<16} {:>6} {:>6} {:>11} {:>3} {:>8} {:>8} {:>8} {:>8}",
                "loop", "first", "last", "coil", "ss", "D", "delta", "theta", "rho"
            );
            for r in &rows {
                let coil = match (r.coil_start, r.coil_end) {
                    (Some(a), Some(b)) => format!("{a}-{b}"),
                    _ => "-".into(),
                };
                let _ = writeln!(
                    out,
                    "{:<16} {:>6} {:>6} {:>11} {:>3} {:>8} {:>8} {:>8} {:>8}",
                    r.loop_id,
                    r.first_seq,
                    r.last_seq,
                    coil,
                    format!("{}{}", r.ss1, r.ss2),
                    opt(r.d, 2),
                    opt(r.delta, 1),
                    opt(r.theta, 1),
                    opt(r.rho, 1)
                );
            }
        }
    }
    Ok(out)
}

pub fn profile(p: &ProteinState, method: FlexibilityMethod) -> Result<FlexibilityProfile, CliError> {
    Ok(match method {
        FlexibilityMethod::PdbB => bfactor_profile(&p.structure, p.chain_id)?,
        FlexibilityMethod::Gnm => gnm_fluctuations(&p.trace, DEFAULT_GNM_CUTOFF)?,
        FlexibilityMethod::Anm => anm_fluctuations(&p.trace, DEFAULT_ANM_CUTOFF)?,
    })
}

pub fn parse_methods(s: &str) -> Result<Vec<FlexibilityMethod>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(FlexibilityMethod::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: FlexibilityMethod = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no flexibility method given".into()));
    }
    Ok(out)
}

pub fn flex(p: &ProteinState, methods: &[FlexibilityMethod], csv: bool) -> Result<String, CliError> {
    let profiles = methods.iter().map(|m| profile(p, *m)).collect::<Result<Vec<_>, _>>()?;
    let chain = p.structure.chain(p.chain_id)?;
    let mut out = String::new();
    let sep = if csv { "," } else { "\t" };
    let mut header = vec!["index".to_string(), "seq_num".into(), "residue".into(), "ss".into()];
    for prof in &profiles {
        header.push(prof.method.to_string());
        header.push(format!("{}_norm", prof.method));
    }
    let _ = writeln!(out, "{}", header.join(sep));
    let codes: Vec<char> = p.assignment.codes().chars().collect();
    for (k, &ri) in p.trace.residue_indices.iter().enumerate() {
        let res = &chain.residues[ri];
        let mut cols = vec![
            k.to_string(),
            res.seq_num.to_string(),
            res.name.clone(),
            codes.get(ri).copied().unwrap_or('C').to_string(),
        ];
        for prof in &profiles {
            cols.push(format!("{:.4}", prof.values[k]));
            cols.push(format!("{:.4}", prof.normalized[k]));
        }
        let _ = writeln!(out, "{}", cols.join(sep));
    }
    if csv {
        return Ok(out);
    }

    let elements: Vec<Element> = p.loops.loops().map(|l| Element::from_loop(l, &p.trace)).collect();
    out.push_str("\nloop");
    for prof in &profiles {
        let _ = write!(out, "\t{}", prof.method);
    }
    out.push('\n');
    let per_method = profiles
        .iter()
        .map(|prof| aggregate_flexibility(prof, &elements, &Weighting::Uniform))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, el) in elements.iter().enumerate() {
        let _ = write!(out, "{}", el.id);
        for agg in &per_method {
            let _ = write!(out, "\t{:.3}", agg[i].coarse_value);
        }
        out.push('\n');
    }
    if profiles.len() > 1 {
        let mc = method_correlation(&profiles, DEFAULT_SIGNIFICANCE_THRESHOLD)?;
        out.push_str("\nmethod correlation (r, p)\n");
        for (i, a) in mc.methods.iter().enumerate() {
            for (j, b) in mc.methods.iter().enumerate().skip(i + 1) {
                let e = mc.entries[i][j];
                let flag = if e.low_significance { " low-significance" } else { "" };
                let _ = writeln!(out, "{a}-{b}\t{:.3}\t{:.3e}{flag}", e.r, e.p);
            }
        }
    }
    Ok(out)
}

/// Resolves a loop by exact id or by a residue number its coil covers.
pub fn resolve_loop<'a>(p: &'a ProteinState, key: &str) -> Result<&'a Loop, CliError> {
    if let Some(l) = p.loop_by_id(key) {
        return Ok(l);
    }
    if let Ok(seq) = key.parse::<i32>() {
        if let Some(l) = p.loops.loops().find(|l| l.covers_seq(&p.assignment, seq, seq)) {
            return Ok(l);
        }
    }
    Err(CliError::Usage(format!(
        "no loop {key:?} in {}:{}",
        p.pdb_id, p.chain_id
    )))
}

pub fn xcorr(
    p: &ProteinState,
    candidates: &[String],
    metric: CorrelationMetric,
    order: SortOrder,
) -> Result<String, CliError> {
    let cols: Vec<String> = candidates
        .iter()
        .map(|c| resolve_loop(p, c).map(|l| l.id.clone()))
        .collect::<Result<_, _>>()?;
    let loops: Vec<&Loop> = p.loops.loops().collect();
    let set = motion_cross_correlation(&p.trace, &loops, DEFAULT_GNM_CUTOFF, DEFAULT_CORRELATION_MODES)?;
    let rows = sort_correlation_rows(&set, &cols, metric, order);
    let mut out = format!(
        "# {} modes, rows sorted by {:?} {:?}\nrow",
        set.modes_used, metric, order
    );
    for c in &cols {
        let _ = write!(out, "\t{c}:ss\t{c}:loop\t{c}:ss_to_coil");
    }
    out.push('\n');
    for r in &rows {
        out.push_str(r);
        for c in &cols {
            match set.pair(r, c) {
                Some(pc) => {
                    let _ = write!(out, "\t{:.3}\t{:.3}\t{:.3}", pc.ss_corr, pc.loop_corr, pc.ss_to_coil);
                }
                None => out.push_str("\t\t\t"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub struct RunOptions {
    pub scaffold: ProteinArg,
    pub insert: ProteinArg,
    /// Scaffold loop to graft onto (id or residue number); chosen automatically when absent.
    pub candidate: Option<String>,
    pub window: Option<usize>,
    pub top: usize,
    pub out_dir: Option<PathBuf>,
    pub timeout: Duration,
}

#[derive(Debug, Serialize)]
pub struct RankedModel {
    pub rank: usize,
    pub id: String,
    pub label: String,
    pub composite: f64,
    pub anchor_rmsd: f64,
    pub clash_count: usize,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub session_id: String,
    pub scaffold_loop: String,
    pub insert_loop: String,
    pub job_id: String,
    pub variants: usize,
    pub models: Vec<RankedModel>,
    pub warnings: Vec<String>,
}

/// Headless pipeline: pick a candidate, take the best geometric pairing, graft and rank.
pub fn run_auto(
    manager: &SessionManager,
    scaffold_id: &str,
    insert_id: &str,
    opts: &RunOptions,
) -> Result<RunReport, CliError> {
    let sid = manager.create_session((scaffold_id, opts.scaffold.chain), (insert_id, opts.insert.chain))?;
    let (scaffold_loop, insert_loop) = manager.with_session(&sid, |s| {
        s.advance_phase(Phase::P2)?;
        let ids: Vec<String> = s.scaffold.loops.loops().map(|l| l.id.clone()).collect();
        let chosen = match &opts.candidate {
            Some(key) => vec![resolve_loop(&s.scaffold, key)
                .map_err(|e| loopgraft_core::orchestration::OrchestrationError::InvalidPairing(e.to_string()))?
                .id
                .clone()],
            None => ids.clone(),
        };
        for id in &chosen {
            s.set_triage(id, TriageState::Candidate)?;
        }
        let suggestions = s.suggestions()?;
        let best = suggestions
            .iter()
            .filter(|p| chosen.contains(&p.scaffold_loop_id))
            .min_by(|a, b| a.score.total_cmp(&b.score))
            .cloned()
            .ok_or_else(|| {
                loopgraft_core::orchestration::OrchestrationError::InvalidPairing("no loop pairing available".into())
            })?;
        for id in ids.iter().filter(|id| **id != best.scaffold_loop_id) {
            s.set_triage(id, TriageState::Preserved)?;
        }
        s.set_pairings(&[(best.scaffold_loop_id.clone(), best.insert_loop_id.clone())])?;
        s.advance_phase(Phase::P6)?;
        Ok((best.scaffold_loop_id, best.insert_loop_id))
    })?;

    let job = manager.submit_graft_job(&sid, None, opts.window)?;
    let job = manager.wait_for_job(&job.id, opts.timeout)?;
    if job.state != JobState::Done {
        return Err(CliError::Job(format!(
            "job {} ended {:?}: {}",
            job.id,
            job.state,
            job.error.clone().unwrap_or_else(|| "timed out".into())
        )));
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut models = Vec::new();
    for (rank, id) in job.ranked_model_ids.iter().enumerate() {
        let stored = manager.model(id)?;
        if rank < opts.top {
            if let Some(dir) = &opts.out_dir {
                std::fs::write(dir.join(format!("{id}.pdb")), stored.model.to_pdb())?;
                std::fs::write(dir.join(format!("{id}.origin.csv")), origin_table(&stored.model))?;
            }
        }
        models.push(RankedModel {
            rank: rank + 1,
            id: id.clone(),
            label: stored.model.spec.label(),
            composite: stored.report.composite,
            anchor_rmsd: stored.report.anchor_rmsd,
            clash_count: stored.report.clash_count,
        });
    }
    let report = RunReport {
        session_id: sid.clone(),
        scaffold_loop,
        insert_loop,
        job_id: job.id.clone(),
        variants: job.total,
        models,
        warnings: job.warnings,
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::write(dir.join("session.json"), manager.save_session(&sid)?)?;
        std::fs::write(dir.join("ranking.json"), serde_json::to_vec_pretty(&report)?)?;
    }
    Ok(report)
}

pub fn format_run(report: &RunReport, top: usize) -> String {
    let mut out = format!(
        "session {}\npairing {} <- {}\n{} variants, {} models\n",
        report.session_id,
        report.scaffold_loop,
        report.insert_loop,
        report.variants,
        report.models.len()
    );
    out.push_str("rank\tmodel\tspec\tcomposite\tanchor_rmsd\tclashes\n");
    for m in report.models.iter().take(top) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.3}\t{:.3}\t{}",
            m.rank, m.id, m.label, m.composite, m.anchor_rmsd, m.clash_count
        );
    }
    out
}
