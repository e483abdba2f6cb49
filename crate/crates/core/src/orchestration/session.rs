use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::StructureProvider;
use super::{OrchestrationError, Phase, Role};
use crate::dynamics::{
    aggregate_flexibility, anm_fluctuations, bfactor_profile, gnm_fluctuations, method_correlation,
    motion_cross_correlation, sort_correlation_rows, CorrelationMetric, Element, ElementFlexibility, FlexibilityMethod,
    FlexibilityProfile, LoopPairCorrelation, MethodCorrelation, MotionCorrelationSet, SortOrder, Weighting,
    DEFAULT_ANM_CUTOFF, DEFAULT_CORRELATION_MODES, DEFAULT_GNM_CUTOFF, DEFAULT_SIGNIFICANCE_THRESHOLD,
};
use crate::grafting::{GraftPair, GraftSpec};
use crate::loop_geometry::{compute_descriptors, suggest_pairs, LoopGeometry, PairSuggestion, PairWeights};
use crate::loop_model::{
    define_custom_loop, extract_loops, set_triage_in_place, Loop, LoopError, LoopList, TriageState,
};
use crate::secondary_structure::{
    assign_secondary_structure, reassign_region, segments_of, Segment, SsAssignment, SsClass,
};
use crate::structure_io::{ca_trace, CaTrace, Structure};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn new_session_id() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    sha256_hex(format!("{nanos}:{n}:{}", std::process::id()).as_bytes())[..16].to_string()
}

/// A manual secondary-structure reassignment over author seq numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsOverride {
    pub start: i32,
    pub end: i32,
    pub class: SsClass,
}

/// One protein of a session with its assignment and loops.
#[derive(Debug, Clone)]
pub struct ProteinState {
    pub role: Role,
    pub pdb_id: String,
    pub chain_id: char,
    pub structure: Arc<Structure>,
    /// Digest of the raw file the structure was parsed from.
    pub sha256: String,
    pub trace: CaTrace,
    pub automatic: SsAssignment,
    pub overrides: Vec<SsOverride>,
    pub assignment: SsAssignment,
    pub custom_loops: Vec<(i32, i32)>,
    pub loops: LoopList,
}

impl ProteinState {
    pub fn load(
        provider: &dyn StructureProvider,
        role: Role,
        pdb_id: &str,
        chain_id: char,
    ) -> Result<Self, OrchestrationError> {
        let (structure, bytes) = provider.load(pdb_id)?;
        structure.chain(chain_id)?;
        let automatic = assign_secondary_structure(&structure, chain_id)?;
        let trace = ca_trace(&structure, chain_id)?;
        let mut p = Self {
            role,
            pdb_id: structure.pdb_id.clone(),
            chain_id,
            structure: Arc::new(structure),
            sha256: sha256_hex(&bytes),
            trace,
            assignment: automatic.clone(),
            automatic,
            overrides: Vec::new(),
            custom_loops: Vec::new(),
            loops: LoopList::default(),
        };
        p.rebuild_loops();
        Ok(p)
    }

    /// Re-extracts loops from the current assignment, keeping triage by id.
    /// Custom loops that no longer fit are dropped.
    fn rebuild_loops(&mut self) {
        let old = self.loops.states();
        let mut loops = match extract_loops(&self.assignment, &self.pdb_id) {
            Ok(l) => l,
            Err(LoopError::TooFewSegments(_)) => Vec::new(),
            Err(e) => {
                warn!("{}: loop extraction failed: {e}", self.pdb_id);
                Vec::new()
            }
        };
        let assignment = &self.assignment;
        let pdb_id = &self.pdb_id;
        self.custom_loops
            .retain(|&(s, e)| match define_custom_loop(assignment, pdb_id, s, e) {
                Ok(lp) => {
                    loops.push(lp);
                    true
                }
                Err(err) => {
                    warn!("{pdb_id}: dropping custom loop {s}-{e}: {err}");
                    false
                }
            });
        for lp in &mut loops {
            lp.descriptors = compute_descriptors(lp, &self.trace).ok();
        }
        let mut list = LoopList::new(loops);
        for (id, state) in old {
            let _ = set_triage_in_place(&mut list, &id, state);
        }
        self.loops = list;
    }

    fn apply_override(&mut self, o: SsOverride) -> Result<(), OrchestrationError> {
        self.assignment = reassign_region(&self.assignment, o.start, o.end, o.class)?;
        self.overrides.push(o);
        self.rebuild_loops();
        Ok(())
    }

    fn reset_overrides(&mut self) {
        self.overrides.clear();
        self.assignment = self.automatic.clone();
        self.rebuild_loops();
    }

    fn add_custom_loop(&mut self, start: i32, end: i32) -> Result<String, OrchestrationError> {
        let lp = define_custom_loop(&self.assignment, &self.pdb_id, start, end)?;
        let id = lp.id.clone();
        if !self.custom_loops.contains(&(start, end)) {
            self.custom_loops.push((start, end));
        }
        self.rebuild_loops();
        Ok(id)
    }

    pub fn segments(&self) -> Vec<Segment> {
        segments_of(&self.assignment)
    }

    pub fn loop_by_id(&self, id: &str) -> Option<&Loop> {
        self.loops.get(id).map(|(l, _)| l)
    }

    /// Author seq numbers of a loop's graft range.
    pub fn graft_seq_range(&self, lp: &Loop) -> (i32, i32) {
        let (a, b) = lp.graft_range();
        (self.assignment.seq_num(a), self.assignment.seq_num(b))
    }
}

/// A user-confirmed scaffold/insert loop pairing with the ranges it was confirmed on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmedPairing {
    pub scaffold_loop_id: String,
    pub insert_loop_id: String,
    pub scaffold_range: (i32, i32),
    pub insert_range: (i32, i32),
}

/// Decisions and derived results tracked for staleness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    ScaffoldSs,
    InsertSs,
    ScaffoldLoops,
    InsertLoops,
    Triage,
    Geometry,
    Flexibility,
    Correlation,
    Suggestions,
    Pairings,
    Models,
}

impl Artifact {
    pub const ALL: [Artifact; 11] = [
        Artifact::ScaffoldSs,
        Artifact::InsertSs,
        Artifact::ScaffoldLoops,
        Artifact::InsertLoops,
        Artifact::Triage,
        Artifact::Geometry,
        Artifact::Flexibility,
        Artifact::Correlation,
        Artifact::Suggestions,
        Artifact::Pairings,
        Artifact::Models,
    ];

    /// Direct dependents.
    pub fn dependents(self) -> &'static [Artifact] {
        use Artifact::*;
        match self {
            ScaffoldSs => &[ScaffoldLoops],
            InsertSs => &[InsertLoops],
            ScaffoldLoops => &[Geometry, Flexibility, Correlation, Suggestions, Pairings],
            InsertLoops => &[Geometry, Suggestions, Pairings],
            Triage => &[Correlation, Suggestions, Pairings],
            Geometry => &[Suggestions],
            Flexibility => &[],
            Correlation => &[],
            Suggestions => &[],
            Pairings => &[Models],
            Models => &[],
        }
    }

    /// Every artifact reachable from `self` (excluding itself).
    pub fn downstream(self) -> BTreeSet<Artifact> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(a) = stack.pop() {
            for &d in a.dependents() {
                if out.insert(d) {
                    stack.push(d);
                }
            }
        }
        out
    }

    pub fn phase(self) -> Phase {
        use Artifact::*;
        match self {
            ScaffoldSs | InsertSs => Phase::P1,
            ScaffoldLoops | InsertLoops | Triage | Geometry => Phase::P2,
            Flexibility => Phase::P3,
            Correlation => Phase::P4,
            Suggestions | Pairings => Phase::P5,
            Models => Phase::P6,
        }
    }

    /// Recomputed synchronously on every edit, so never observed stale.
    fn is_eager(self) -> bool {
        matches!(
            self,
            Artifact::ScaffoldLoops | Artifact::InsertLoops | Artifact::Geometry
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlexibilityView {
    pub methods: Vec<FlexibilityMethod>,
    pub scaffold: Vec<FlexibilityProfile>,
    pub insert: Vec<FlexibilityProfile>,
    /// Scaffold loop aggregates per method.
    pub loops: Vec<ElementFlexibility>,
    /// Scaffold periodic-segment aggregates per method.
    pub segments: Vec<ElementFlexibility>,
    /// Present when more than one method was requested.
    pub method_correlation: Option<MethodCorrelation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationView {
    /// Candidate loops.
    pub columns: Vec<String>,
    /// Non-candidate loops in the requested order.
    pub rows: Vec<String>,
    /// `cells[r][c]` for `rows[r]` × `columns[c]`.
    pub cells: Vec<Vec<LoopPairCorrelation>>,
    pub metric: CorrelationMetric,
    pub order: SortOrder,
    pub modes_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopDescriptors {
    pub loop_id: String,
    pub descriptors: Option<LoopGeometry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryView {
    pub scaffold: Vec<LoopDescriptors>,
    pub insert: Vec<LoopDescriptors>,
    pub suggestions: Vec<PairSuggestion>,
}

/// Content-addressed store of expensive derived results.
#[derive(Debug, Default, Clone)]
struct DerivedCache {
    profiles: HashMap<String, Arc<FlexibilityProfile>>,
    correlations: HashMap<String, Arc<MotionCorrelationSet>>,
    hits: u64,
    misses: u64,
}

fn hash_key(parts: &impl Serialize) -> String {
    sha256_hex(&serde_json::to_vec(parts).expect("serializable cache key"))
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub scaffold: ProteinState,
    pub insert: ProteinState,
    pub phase: Phase,
    pub completion: BTreeMap<Phase, bool>,
    pub pairings: Vec<ConfirmedPairing>,
    /// Base specs of submitted graft jobs, in submission order.
    pub graft_specs: Vec<GraftSpec>,
    pub job_ids: Vec<String>,
    pub model_ids: Vec<String>,
    computed: BTreeSet<Artifact>,
    stale: BTreeSet<Artifact>,
    cache: DerivedCache,
}

impl Session {
    pub fn create(
        provider: &dyn StructureProvider,
        scaffold: (&str, char),
        insert: (&str, char),
    ) -> Result<Self, OrchestrationError> {
        let scaffold = ProteinState::load(provider, Role::Scaffold, scaffold.0, scaffold.1)?;
        let insert = ProteinState::load(provider, Role::Insert, insert.0, insert.1)?;
        Ok(Self::from_states(new_session_id(), scaffold, insert))
    }

    pub(crate) fn from_states(id: String, scaffold: ProteinState, insert: ProteinState) -> Self {
        Self {
            id,
            scaffold,
            insert,
            phase: Phase::P1,
            completion: Phase::ALL.iter().map(|p| (*p, false)).collect(),
            pairings: Vec::new(),
            graft_specs: Vec::new(),
            job_ids: Vec::new(),
            model_ids: Vec::new(),
            computed: BTreeSet::new(),
            stale: BTreeSet::new(),
            cache: DerivedCache::default(),
        }
    }

    pub fn protein(&self, role: Role) -> &ProteinState {
        match role {
            Role::Scaffold => &self.scaffold,
            Role::Insert => &self.insert,
        }
    }

    fn protein_mut(&mut self, role: Role) -> &mut ProteinState {
        match role {
            Role::Scaffold => &mut self.scaffold,
            Role::Insert => &mut self.insert,
        }
    }

    // ----- gates -----

    pub fn candidate_count(&self) -> usize {
        self.scaffold.loops.candidates().len()
    }

    /// Why `phase` cannot currently be entered, if it cannot.
    pub fn gate_failure(&self, phase: Phase) -> Option<String> {
        if phase >= Phase::P5 && self.candidate_count() == 0 {
            return Some(format!("{phase} requires at least one candidate loop"));
        }
        if phase >= Phase::P6 && self.pairings.is_empty() {
            return Some(format!("{phase} requires at least one confirmed pairing"));
        }
        None
    }

    /// Furthest phase the current state allows.
    pub fn max_reachable_phase(&self) -> Phase {
        Phase::ALL
            .iter()
            .copied()
            .take_while(|p| self.gate_failure(*p).is_none())
            .last()
            .unwrap_or(Phase::P1)
    }

    pub fn advance_phase(&mut self, to: Phase) -> Result<(), OrchestrationError> {
        if to > self.phase {
            if let Some(why) = self.gate_failure(to) {
                return Err(OrchestrationError::GateUnsatisfied(why));
            }
            for p in Phase::ALL.iter().filter(|p| **p >= self.phase && **p < to) {
                self.completion.insert(*p, true);
            }
        }
        self.phase = to;
        Ok(())
    }

    /// Steps back until the current phase's gate holds.
    fn enforce_gates(&mut self) {
        while self.gate_failure(self.phase).is_some() {
            self.phase = Phase::ALL[self.phase.index() - 1];
        }
    }

    // ----- staleness -----

    pub fn is_stale(&self, a: Artifact) -> bool {
        self.stale.contains(&a)
    }

    pub fn stale_artifacts(&self) -> &BTreeSet<Artifact> {
        &self.stale
    }

    fn mark_fresh(&mut self, a: Artifact) {
        self.computed.insert(a);
        self.stale.remove(&a);
    }

    /// Records an edit of `source`: downstream results become stale and the
    /// phases owning them revert to incomplete.
    fn invalidate(&mut self, source: Artifact) {
        for a in source.downstream() {
            self.completion.insert(a.phase(), false);
            if a.is_eager() {
                continue;
            }
            if self.computed.contains(&a) || (a == Artifact::Pairings && !self.pairings.is_empty()) {
                self.stale.insert(a);
            }
        }
        self.prune_pairings();
        self.enforce_gates();
    }

    /// Drops pairings whose loops vanished or whose scaffold loop is no longer a candidate.
    fn prune_pairings(&mut self) {
        let before = self.pairings.len();
        let scaffold = &self.scaffold;
        let insert = &self.insert;
        self.pairings.retain(|p| {
            scaffold.loops.state(&p.scaffold_loop_id) == Some(TriageState::Candidate)
                && insert.loops.get(&p.insert_loop_id).is_some()
        });
        if self.pairings.len() != before && self.computed.contains(&Artifact::Models) {
            self.stale.insert(Artifact::Models);
        }
    }

    // ----- edits -----

    pub fn override_ss(&mut self, role: Role, o: SsOverride) -> Result<(), OrchestrationError> {
        self.protein_mut(role).apply_override(o)?;
        self.invalidate(match role {
            Role::Scaffold => Artifact::ScaffoldSs,
            Role::Insert => Artifact::InsertSs,
        });
        Ok(())
    }

    pub fn reset_ss(&mut self, role: Role) {
        self.protein_mut(role).reset_overrides();
        self.invalidate(match role {
            Role::Scaffold => Artifact::ScaffoldSs,
            Role::Insert => Artifact::InsertSs,
        });
    }

    pub fn add_custom_loop(&mut self, role: Role, start: i32, end: i32) -> Result<String, OrchestrationError> {
        let id = self.protein_mut(role).add_custom_loop(start, end)?;
        self.invalidate(match role {
            Role::Scaffold => Artifact::ScaffoldLoops,
            Role::Insert => Artifact::InsertLoops,
        });
        Ok(id)
    }

    pub fn set_triage(&mut self, loop_id: &str, state: TriageState) -> Result<(), OrchestrationError> {
        set_triage_in_place(&mut self.scaffold.loops, loop_id, state)?;
        self.invalidate(Artifact::Triage);
        Ok(())
    }

    /// Replaces the confirmed pairings. Scaffold loops must be candidates and
    /// each loop may appear at most once.
    pub fn set_pairings(&mut self, pairs: &[(String, String)]) -> Result<(), OrchestrationError> {
        let mut out = Vec::with_capacity(pairs.len());
        let mut seen_s = BTreeSet::new();
        let mut seen_i = BTreeSet::new();
        for (s, i) in pairs {
            let sl = self
                .scaffold
                .loop_by_id(s)
                .ok_or_else(|| OrchestrationError::InvalidPairing(format!("no scaffold loop {s}")))?;
            if self.scaffold.loops.state(s) != Some(TriageState::Candidate) {
                return Err(OrchestrationError::InvalidPairing(format!("{s} is not a candidate")));
            }
            let il = self
                .insert
                .loop_by_id(i)
                .ok_or_else(|| OrchestrationError::InvalidPairing(format!("no insert loop {i}")))?;
            if !seen_s.insert(s.clone()) || !seen_i.insert(i.clone()) {
                return Err(OrchestrationError::InvalidPairing(format!("{s}/{i} paired twice")));
            }
            out.push(ConfirmedPairing {
                scaffold_loop_id: s.clone(),
                insert_loop_id: i.clone(),
                scaffold_range: self.scaffold.graft_seq_range(sl),
                insert_range: self.insert.graft_seq_range(il),
            });
        }
        let spec = Self::spec_for(self.scaffold.chain_id, self.insert.chain_id, &out);
        if !out.is_empty() {
            spec.check()?;
        }
        self.pairings = out;
        self.invalidate(Artifact::Pairings);
        self.mark_fresh(Artifact::Pairings);
        Ok(())
    }

    /// Confirms the greedy default pairing of the current suggestions.
    pub fn accept_default_pairings(&mut self) -> Result<(), OrchestrationError> {
        let pairs: Vec<(String, String)> = self
            .suggestions()?
            .into_iter()
            .filter(|s| s.default_pair)
            .map(|s| (s.scaffold_loop_id, s.insert_loop_id))
            .collect();
        self.set_pairings(&pairs)
    }

    fn spec_for(scaffold_chain: char, insert_chain: char, pairings: &[ConfirmedPairing]) -> GraftSpec {
        GraftSpec::new(
            scaffold_chain,
            insert_chain,
            pairings
                .iter()
                .map(|p| GraftPair {
                    scaffold_loop_id: p.scaffold_loop_id.clone(),
                    insert_loop_id: p.insert_loop_id.clone(),
                    scaffold_start: p.scaffold_range.0,
                    scaffold_end: p.scaffold_range.1,
                    insert_start: p.insert_range.0,
                    insert_end: p.insert_range.1,
                })
                .collect(),
        )
    }

    /// Base graft spec built from the confirmed pairings.
    pub fn graft_spec(&self) -> Result<GraftSpec, OrchestrationError> {
        if self.pairings.is_empty() {
            return Err(OrchestrationError::GateUnsatisfied(
                "grafting requires at least one confirmed pairing".into(),
            ));
        }
        Ok(Self::spec_for(
            self.scaffold.chain_id,
            self.insert.chain_id,
            &self.pairings,
        ))
    }

    /// Recomputes both assignments from the automatic one plus the recorded overrides.
    pub(crate) fn replay_overrides(&mut self) -> Result<(), OrchestrationError> {
        for p in [&mut self.scaffold, &mut self.insert] {
            let overrides = std::mem::take(&mut p.overrides);
            p.assignment = p.automatic.clone();
            for o in overrides {
                p.assignment = reassign_region(&p.assignment, o.start, o.end, o.class)?;
                p.overrides.push(o);
            }
            p.rebuild_loops();
        }
        Ok(())
    }

    /// Records a submitted graft job.
    pub(crate) fn record_job(&mut self, job_id: &str, spec: GraftSpec) {
        self.job_ids.push(job_id.to_string());
        self.graft_specs.push(spec);
    }

    /// Records models produced from the current pairings.
    pub(crate) fn record_models(&mut self, ids: impl IntoIterator<Item = String>) {
        self.model_ids.extend(ids);
        self.mark_fresh(Artifact::Models);
    }

    pub fn cache_stats(&self) -> (u64, u64) {
        (self.cache.hits, self.cache.misses)
    }

    // ----- derived views -----

    fn profile(
        &mut self,
        role: Role,
        method: FlexibilityMethod,
    ) -> Result<Arc<FlexibilityProfile>, OrchestrationError> {
        let p = match role {
            Role::Scaffold => &self.scaffold,
            Role::Insert => &self.insert,
        };
        let key = hash_key(&("profile", &p.sha256, p.chain_id, method));
        if let Some(hit) = self.cache.profiles.get(&key) {
            self.cache.hits += 1;
            return Ok(hit.clone());
        }
        self.cache.misses += 1;
        let profile = match method {
            FlexibilityMethod::PdbB => bfactor_profile(&p.structure, p.chain_id)?,
            FlexibilityMethod::Gnm => gnm_fluctuations(&p.trace, DEFAULT_GNM_CUTOFF)?,
            FlexibilityMethod::Anm => anm_fluctuations(&p.trace, DEFAULT_ANM_CUTOFF)?,
        };
        let profile = Arc::new(profile);
        self.cache.profiles.insert(key, profile.clone());
        Ok(profile)
    }

    pub fn flexibility(&mut self, methods: &[FlexibilityMethod]) -> Result<FlexibilityView, OrchestrationError> {
        let mut scaffold = Vec::new();
        let mut insert = Vec::new();
        let mut loops = Vec::new();
        let mut segments = Vec::new();
        let loop_elements: Vec<Element> = self
            .scaffold
            .loops
            .loops()
            .map(|l| Element::from_loop(l, &self.scaffold.trace))
            .collect();
        let segment_elements: Vec<Element> = self
            .scaffold
            .segments()
            .iter()
            .filter(|s| s.ss_class.is_periodic())
            .map(|s| {
                let id = format!(
                    "{}{}",
                    s.ss_class.code(),
                    self.scaffold.assignment.seq_num(s.start_index)
                );
                Element::from_segment(id, s, &self.scaffold.trace)
            })
            .collect();
        for &m in methods {
            let sp = self.profile(Role::Scaffold, m)?;
            let ip = self.profile(Role::Insert, m)?;
            loops.extend(aggregate_flexibility(&sp, &loop_elements, &Weighting::Uniform)?);
            segments.extend(aggregate_flexibility(&sp, &segment_elements, &Weighting::Uniform)?);
            scaffold.push((*sp).clone());
            insert.push((*ip).clone());
        }
        let method_correlation = (scaffold.len() > 1)
            .then(|| method_correlation(&scaffold, DEFAULT_SIGNIFICANCE_THRESHOLD))
            .transpose()?;
        self.mark_fresh(Artifact::Flexibility);
        Ok(FlexibilityView {
            methods: methods.to_vec(),
            scaffold,
            insert,
            loops,
            segments,
            method_correlation,
        })
    }

    /// Scaffold motion correlation over all scaffold loops (cached by content).
    pub fn correlation_set(&mut self) -> Result<Arc<MotionCorrelationSet>, OrchestrationError> {
        type Span = (String, Segment, Option<(usize, usize)>, Segment);
        let spans: Vec<Span> = self
            .scaffold
            .loops
            .loops()
            .map(|l| (l.id.clone(), l.ss1, l.coil, l.ss2))
            .collect();
        let key = hash_key(&("xcorr", &self.scaffold.sha256, self.scaffold.chain_id, &spans));
        if let Some(hit) = self.cache.correlations.get(&key) {
            self.cache.hits += 1;
            return Ok(hit.clone());
        }
        self.cache.misses += 1;
        let loops: Vec<&Loop> = self.scaffold.loops.loops().collect();
        let set = Arc::new(motion_cross_correlation(
            &self.scaffold.trace,
            &loops,
            DEFAULT_GNM_CUTOFF,
            DEFAULT_CORRELATION_MODES,
        )?);
        self.cache.correlations.insert(key, set.clone());
        Ok(set)
    }

    pub fn correlation(
        &mut self,
        metric: CorrelationMetric,
        order: SortOrder,
    ) -> Result<CorrelationView, OrchestrationError> {
        let set = self.correlation_set()?;
        let columns: Vec<String> = self.scaffold.loops.candidates().iter().map(|l| l.id.clone()).collect();
        let rows = sort_correlation_rows(&set, &columns, metric, order);
        let cells = rows
            .iter()
            .map(|r| columns.iter().filter_map(|c| set.pair(r, c).cloned()).collect())
            .collect();
        self.mark_fresh(Artifact::Correlation);
        Ok(CorrelationView {
            columns,
            rows,
            cells,
            metric,
            order,
            modes_used: set.modes_used,
        })
    }

    /// Candidate × insert-loop suggestions; insert loops without descriptors are skipped.
    pub fn suggestions(&mut self) -> Result<Vec<PairSuggestion>, OrchestrationError> {
        let candidates: Vec<&Loop> = self.scaffold.loops.candidates();
        let inserts: Vec<&Loop> = self.insert.loops.loops().filter(|l| l.descriptors.is_some()).collect();
        let candidates: Vec<&Loop> = candidates.into_iter().filter(|l| l.descriptors.is_some()).collect();
        let out = if candidates.is_empty() {
            Vec::new()
        } else {
            suggest_pairs(&candidates, &inserts, &PairWeights::default())?
        };
        self.mark_fresh(Artifact::Suggestions);
        Ok(out)
    }

    pub fn geometry(&mut self) -> Result<GeometryView, OrchestrationError> {
        let describe = |p: &ProteinState| -> Vec<LoopDescriptors> {
            p.loops
                .loops()
                .map(|l| LoopDescriptors {
                    loop_id: l.id.clone(),
                    descriptors: l.descriptors,
                })
                .collect()
        };
        let scaffold = describe(&self.scaffold);
        let insert = describe(&self.insert);
        let suggestions = if self.insert.loops.is_empty() {
            Vec::new()
        } else {
            self.suggestions()?
        };
        Ok(GeometryView {
            scaffold,
            insert,
            suggestions,
        })
    }

    /// JSON summary for clients.
    pub fn summary(&self) -> serde_json::Value {
        let protein = |p: &ProteinState| {
            serde_json::json!({
                "role": p.role,
                "pdb_id": p.pdb_id,
                "chain": p.chain_id.to_string(),
                "residues": p.assignment.len(),
                "first_seq": p.assignment.residue_keys.first().map(|k| k.seq_num),
                "ss": p.assignment.codes(),
                "overrides": p.overrides,
                "custom_loops": p.custom_loops,
                "loop_count": p.loops.len(),
            })
        };
        serde_json::json!({
            "id": self.id,
            "scaffold": protein(&self.scaffold),
            "insert": protein(&self.insert),
            "phase": self.phase,
            "max_reachable_phase": self.max_reachable_phase(),
            "completion": self.completion.iter().map(|(p, c)| (p.to_string(), *c)).collect::<BTreeMap<_, _>>(),
            "stale": self.stale,
            "candidates": self.candidate_count(),
            "pairings": self.pairings,
            "jobs": self.job_ids,
            "models": self.model_ids,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::builder::layout_structure;
    use crate::orchestration::MemoryProvider;
    use crate::structure_io::write_pdb;

    /// Scaffold and insert with a few helix/strand loops each.
    pub(crate) fn provider() -> MemoryProvider {
        let p = MemoryProvider::new();
        let scaffold = layout_structure(
            "1SCF",
            'A',
            1,
            "CHHHHHHHHHHCCCCCEEEEEECCCCHHHHHHHHHHHCCCCCEEEEEEECCCHHHHHHHHHHC",
        );
        let insert = layout_structure("2INS", 'A', 1, "CHHHHHHHHHHHCCCCCCCEEEEEECCCCHHHHHHHHHHCCCCEEEEEEEC");
        p.insert("1scf", write_pdb(&scaffold)).unwrap();
        p.insert("2ins", write_pdb(&insert)).unwrap();
        p
    }

    pub(crate) fn session() -> Session {
        Session::create(&provider(), ("1scf", 'A'), ("2ins", 'A')).unwrap()
    }

    #[test]
    fn created_session_starts_in_first_phase() {
        let s = session();
        assert_eq!(s.phase, Phase::P1);
        assert!(s.scaffold.loops.len() >= 2, "{}", s.scaffold.assignment.codes());
        assert!(!s.insert.loops.is_empty());
        assert!(s.scaffold.loops.iter().all(|(_, st)| *st == TriageState::Preserved));
        assert_eq!(s.id.len(), 16);
    }

    #[test]
    fn unknown_structure_is_not_found() {
        let err = Session::create(&provider(), ("9zzz", 'A'), ("2ins", 'A')).unwrap_err();
        assert!(matches!(
            err,
            OrchestrationError::Structure(crate::structure_io::StructureError::NotFound(_))
        ));
    }

    #[test]
    fn self_grafting_session_is_valid() {
        let s = Session::create(&provider(), ("1scf", 'A'), ("1scf", 'A')).unwrap();
        assert_eq!(s.scaffold.loops.len(), s.insert.loops.len());
    }

    #[test]
    fn gates() {
        let mut s = session();
        s.advance_phase(Phase::P2).unwrap();
        assert!(s.completion[&Phase::P1]);
        s.advance_phase(Phase::P4).unwrap();
        assert!(matches!(
            s.advance_phase(Phase::P5),
            Err(OrchestrationError::GateUnsatisfied(_))
        ));
        let first = s.scaffold.loops.loops().next().unwrap().id.clone();
        s.set_triage(&first, TriageState::Candidate).unwrap();
        s.advance_phase(Phase::P5).unwrap();
        assert!(matches!(
            s.advance_phase(Phase::P6),
            Err(OrchestrationError::GateUnsatisfied(_))
        ));
        s.accept_default_pairings().unwrap();
        assert_eq!(s.pairings.len(), 1);
        s.advance_phase(Phase::P6).unwrap();
        assert_eq!(s.max_reachable_phase(), Phase::P6);
        s.advance_phase(Phase::P1).unwrap();
        assert_eq!(s.phase, Phase::P1);
    }

    #[test]
    fn demoting_the_paired_loop_steps_back() {
        let mut s = session();
        let first = s.scaffold.loops.loops().next().unwrap().id.clone();
        s.set_triage(&first, TriageState::Candidate).unwrap();
        s.accept_default_pairings().unwrap();
        s.advance_phase(Phase::P6).unwrap();
        s.set_triage(&first, TriageState::Unsuitable).unwrap();
        assert!(s.pairings.is_empty());
        assert_eq!(s.phase, Phase::P4);
    }

    #[test]
    fn ss_edit_marks_flexibility_stale() {
        let mut s = session();
        s.advance_phase(Phase::P3).unwrap();
        s.flexibility(&[FlexibilityMethod::Gnm]).unwrap();
        assert!(!s.is_stale(Artifact::Flexibility));
        s.advance_phase(Phase::P1).unwrap();
        s.override_ss(
            Role::Scaffold,
            SsOverride {
                start: 13,
                end: 14,
                class: SsClass::E,
            },
        )
        .unwrap();
        assert!(s.is_stale(Artifact::Flexibility));
        assert!(!s.completion[&Phase::P3]);
        s.flexibility(&[FlexibilityMethod::Gnm]).unwrap();
        assert!(!s.is_stale(Artifact::Flexibility));
    }

    #[test]
    fn triage_survives_reextraction() {
        let mut s = session();
        let ids: Vec<String> = s.scaffold.loops.loops().map(|l| l.id.clone()).collect();
        s.set_triage(&ids[1], TriageState::Unsuitable).unwrap();
        // Changing residues far from the loop start keeps its id.
        s.override_ss(
            Role::Scaffold,
            SsOverride {
                start: 60,
                end: 60,
                class: SsClass::C,
            },
        )
        .unwrap();
        assert_eq!(s.scaffold.loops.state(&ids[1]), Some(TriageState::Unsuitable));
    }

    #[test]
    fn repeated_queries_hit_the_cache() {
        let mut s = session();
        s.flexibility(&FlexibilityMethod::ALL).unwrap();
        let (_, misses) = s.cache_stats();
        s.flexibility(&FlexibilityMethod::ALL).unwrap();
        let (hits, misses2) = s.cache_stats();
        assert_eq!(misses, misses2);
        assert!(hits >= 6);
        s.correlation(CorrelationMetric::SsToCoil, SortOrder::Descending)
            .unwrap();
        s.correlation(CorrelationMetric::LoopCorr, SortOrder::Ascending)
            .unwrap();
        assert_eq!(s.cache_stats().1, misses + 1);
    }

    #[test]
    fn correlation_view_shape() {
        let mut s = session();
        let first = s.scaffold.loops.loops().next().unwrap().id.clone();
        s.set_triage(&first, TriageState::Candidate).unwrap();
        let v = s
            .correlation(CorrelationMetric::SsToCoil, SortOrder::Descending)
            .unwrap();
        assert_eq!(v.columns, vec![first]);
        assert_eq!(v.rows.len(), s.scaffold.loops.len() - 1);
        assert!(v.cells.iter().all(|r| r.len() == 1));
    }

    #[test]
    fn custom_loop_and_pairing_validation() {
        let mut s = session();
        let id = s.add_custom_loop(Role::Scaffold, 12, 16).unwrap();
        assert!(id.contains("_custom_12_16"));
        assert!(s.scaffold.loop_by_id(&id).unwrap().custom);
        let ins = s.insert.loops.loops().next().unwrap().id.clone();
        assert!(matches!(
            s.set_pairings(&[(id.clone(), ins.clone())]),
            Err(OrchestrationError::InvalidPairing(_))
        ));
        s.set_triage(&id, TriageState::Candidate).unwrap();
        s.set_pairings(&[(id.clone(), ins.clone())]).unwrap();
        let lp = s.scaffold.loop_by_id(&id).unwrap().clone();
        let range = s.scaffold.graft_seq_range(&lp);
        assert_eq!(s.pairings[0].scaffold_range, range);
        assert!(range.0 >= 12 && range.1 <= 16);
    }

    #[test]
    fn staleness_audit_covers_dependency_graph() {
        for a in Artifact::ALL {
            for d in a.downstream() {
                assert!(d.phase() >= a.phase(), "{a:?} -> {d:?}");
                assert!(!d.downstream().contains(&a), "cycle at {a:?}");
            }
        }
        assert!(Artifact::ScaffoldSs.downstream().contains(&Artifact::Models));
        assert!(Artifact::InsertSs.downstream().contains(&Artifact::Pairings));
        assert!(!Artifact::InsertSs.downstream().contains(&Artifact::Flexibility));
    }
}
