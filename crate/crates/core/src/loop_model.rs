//! Loops (periodic segment, coil span, periodic segment) and the triage
//! state of Scaffold loops.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loop_geometry::LoopGeometry;
use crate::secondary_structure::{segments_of, Segment, SsAssignment, SsError};

#[derive(Debug, Error, PartialEq)]
pub enum LoopError {
    #[error("need at least 2 periodic segments, found {0}")]
    TooFewSegments(usize),
    #[error(transparent)]
    Range(#[from] SsError),
    #[error("range {start}..{end} contains no aperiodic residue")]
    NoAperiodicContent { start: i32, end: i32 },
    #[error("range {start}..{end} has no periodic segment on both sides")]
    NoFlankingStructure { start: i32, end: i32 },
    #[error("unknown loop {0:?}")]
    UnknownLoop(String),
}

/// Periodic segment, aperiodic span, periodic segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    pub id: String,
    /// 1-based extraction order, kept for display.
    pub ordinal: usize,
    pub ss1: Segment,
    /// Inclusive residue-index span of the coil; `None` when ss1 and ss2 abut.
    pub coil: Option<(usize, usize)>,
    pub ss2: Segment,
    pub custom: bool,
    pub descriptors: Option<LoopGeometry>,
    /// Author sequence numbers of ss1 start, coil start, coil end and ss2 end.
    pub first_seq: i32,
    pub last_seq: i32,
    pub coil_seq: Option<(i32, i32)>,
}

impl Loop {
    /// Chain residue indices covered by the whole loop.
    pub fn span(&self) -> (usize, usize) {
        (self.ss1.start_index, self.ss2.end_index)
    }

    /// Residue indices of both flanking segments.
    pub fn periodic_indices(&self) -> Vec<usize> {
        (self.ss1.start_index..=self.ss1.end_index)
            .chain(self.ss2.start_index..=self.ss2.end_index)
            .collect()
    }

    /// Residue indices of the coil; for an empty coil, the two junction residues.
    pub fn coil_indices(&self) -> Vec<usize> {
        match self.coil {
            Some((a, b)) => (a..=b).collect(),
            None => vec![self.ss1.end_index, self.ss2.start_index],
        }
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (self.ss1.start_index..=self.ss2.end_index).collect()
    }

    /// Residue index range that would be replaced when this loop is grafted:
    /// the coil, or the junction pair for an empty coil.
    pub fn graft_range(&self) -> (usize, usize) {
        self.coil.unwrap_or((self.ss1.end_index, self.ss2.start_index))
    }

    /// Whether the coil (or junction) overlaps residue numbers `start..=end`.
    pub fn covers_seq(&self, assignment: &SsAssignment, start: i32, end: i32) -> bool {
        let (a, b) = self.graft_range();
        assignment.seq_num(a) <= end && assignment.seq_num(b) >= start
    }
}

fn loop_id(pdb_id: &str, chain_id: char, seq: i32) -> String {
    format!("{}_{}_{}", pdb_id.to_ascii_uppercase(), chain_id, seq)
}

fn make_loop(
    assignment: &SsAssignment,
    pdb_id: &str,
    ordinal: usize,
    ss1: Segment,
    coil: Option<(usize, usize)>,
    ss2: Segment,
    custom: bool,
) -> Loop {
    let first_seq = assignment.seq_num(ss1.start_index);
    Loop {
        id: loop_id(pdb_id, assignment.chain_id, first_seq),
        ordinal,
        ss1,
        coil,
        ss2,
        custom,
        descriptors: None,
        first_seq,
        last_seq: assignment.seq_num(ss2.end_index),
        coil_seq: coil.map(|(a, b)| (assignment.seq_num(a), assignment.seq_num(b))),
    }
}

/// A gap in author numbering of more than one between consecutive residues.
fn has_break(assignment: &SsAssignment, from: usize, to: usize) -> bool {
    (from..to).any(|i| assignment.seq_num(i + 1) - assignment.seq_num(i) > 1)
}

/// One loop per consecutive pair of periodic segments not separated by a chain break.
pub fn extract_loops(assignment: &SsAssignment, pdb_id: &str) -> Result<Vec<Loop>, LoopError> {
    let periodic: Vec<Segment> = segments_of(assignment)
        .into_iter()
        .filter(|s| s.ss_class.is_periodic())
        .collect();
    if periodic.len() < 2 {
        return Err(LoopError::TooFewSegments(periodic.len()));
    }
    let mut loops = Vec::with_capacity(periodic.len() - 1);
    for pair in periodic.windows(2) {
        let (ss1, ss2) = (pair[0], pair[1]);
        if has_break(assignment, ss1.end_index, ss2.start_index) {
            continue;
        }
        let coil = (ss2.start_index > ss1.end_index + 1).then(|| (ss1.end_index + 1, ss2.start_index - 1));
        loops.push(make_loop(assignment, pdb_id, loops.len() + 1, ss1, coil, ss2, false));
    }
    Ok(loops)
}

/// User-defined loop over residues `start_seq..=end_seq`. The flanking
/// segments are the periodic segments overlapping the range ends, or the
/// nearest ones outside it.
pub fn define_custom_loop(
    assignment: &SsAssignment,
    pdb_id: &str,
    start_seq: i32,
    end_seq: i32,
) -> Result<Loop, LoopError> {
    let (first, last) = assignment.resolve_range(start_seq, end_seq)?;
    if !assignment.classes[first..=last].iter().any(|c| !c.is_periodic()) {
        return Err(LoopError::NoAperiodicContent {
            start: start_seq,
            end: end_seq,
        });
    }
    let periodic: Vec<Segment> = segments_of(assignment)
        .into_iter()
        .filter(|s| s.ss_class.is_periodic())
        .collect();
    let no_flank = || LoopError::NoFlankingStructure {
        start: start_seq,
        end: end_seq,
    };
    let ss1 = periodic
        .iter()
        .rev()
        .find(|s| s.start_index <= first && s.end_index < last)
        .copied()
        .ok_or_else(no_flank)?;
    let ss2 = periodic
        .iter()
        .find(|s| s.end_index >= last && s.start_index > ss1.end_index)
        .copied()
        .ok_or_else(no_flank)?;
    let coil_start = first.max(ss1.end_index + 1);
    let coil_end = last.min(ss2.start_index - 1);
    let coil = (coil_start <= coil_end).then_some((coil_start, coil_end));
    let mut lp = make_loop(assignment, pdb_id, 0, ss1, coil, ss2, true);
    lp.id = format!("{}_custom_{}_{}", lp.id, start_seq, end_seq);
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriageState {
    Candidate,
    Preserved,
    Unsuitable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopSortKey {
    #[default]
    Position,
    Id,
}

/// Scaffold loops with their triage state, in display order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopList {
    entries: Vec<(Loop, TriageState)>,
    pub sort_key: LoopSortKey,
}

impl LoopList {
    pub fn new(loops: Vec<Loop>) -> Self {
        let mut list = Self::default();
        for l in loops {
            list.insert(l);
        }
        list
    }

    /// Adds a loop in the preserved state; an existing id is replaced but keeps its state.
    pub fn insert(&mut self, lp: Loop) {
        match self.entries.iter_mut().find(|(l, _)| l.id == lp.id) {
            Some(entry) => entry.0 = lp,
            None => self.entries.push((lp, TriageState::Preserved)),
        }
        self.sort(self.sort_key);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&(Loop, TriageState)> {
        self.entries.iter().find(|(l, _)| l.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Loop> {
        self.entries.iter_mut().find(|(l, _)| l.id == id).map(|(l, _)| l)
    }

    pub fn state(&self, id: &str) -> Option<TriageState> {
        self.get(id).map(|(_, s)| *s)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Loop, TriageState)> {
        self.entries.iter()
    }

    pub fn loops(&self) -> impl Iterator<Item = &Loop> {
        self.entries.iter().map(|(l, _)| l)
    }

    pub fn loops_mut(&mut self) -> impl Iterator<Item = &mut Loop> {
        self.entries.iter_mut().map(|(l, _)| l)
    }

    pub fn with_state(&self, state: TriageState) -> Vec<&Loop> {
        self.entries
            .iter()
            .filter(|(_, s)| *s == state)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn candidates(&self) -> Vec<&Loop> {
        self.with_state(TriageState::Candidate)
    }

    pub fn preserved(&self) -> Vec<&Loop> {
        self.with_state(TriageState::Preserved)
    }

    pub fn states(&self) -> BTreeMap<String, TriageState> {
        self.entries.iter().map(|(l, s)| (l.id.clone(), *s)).collect()
    }

    pub fn sort(&mut self, key: LoopSortKey) {
        self.sort_key = key;
        match key {
            LoopSortKey::Position => self.entries.sort_by_key(|e| (e.0.ss1.start_index, e.0.custom)),
            LoopSortKey::Id => self.entries.sort_by(|a, b| a.0.id.cmp(&b.0.id)),
        }
    }

    /// Reorders entries to follow `ids`; ids not listed keep their relative order at the end.
    pub fn sort_by_ids(&mut self, ids: &[String]) {
        let rank = |id: &str| ids.iter().position(|x| x == id).unwrap_or(usize::MAX);
        self.entries.sort_by_key(|(l, _)| rank(&l.id));
    }

    pub fn retain(&mut self, f: impl Fn(&Loop) -> bool) {
        self.entries.retain(|(l, _)| f(l));
    }
}

pub fn set_triage(list: &LoopList, loop_id: &str, state: TriageState) -> Result<LoopList, LoopError> {
    let mut out = list.clone();
    set_triage_in_place(&mut out, loop_id, state)?;
    Ok(out)
}

pub fn set_triage_in_place(list: &mut LoopList, loop_id: &str, state: TriageState) -> Result<(), LoopError> {
    let entry = list
        .entries
        .iter_mut()
        .find(|(l, _)| l.id == loop_id)
        .ok_or_else(|| LoopError::UnknownLoop(loop_id.to_string()))?;
    entry.1 = state;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secondary_structure::{reassign_region, SsClass};
    use proptest::prelude::*;

    fn asg(codes: &str) -> SsAssignment {
        SsAssignment::from_codes('A', 1, codes).unwrap()
    }

    #[test]
    fn single_loop() {
        let loops = extract_loops(&asg("HHHHCCEEE"), "1abc").unwrap();
        assert_eq!(loops.len(), 1);
        let l = &loops[0];
        assert_eq!(l.ss1.ss_class, SsClass::H);
        assert_eq!(l.coil, Some((4, 5)));
        assert_eq!(l.ss2.ss_class, SsClass::E);
        assert_eq!(l.id, "1ABC_A_1");
        assert!(!l.custom);
    }

    #[test]
    fn g_and_c_are_coil_material() {
        let loops = extract_loops(&asg("EEEEGGGCCHHHH"), "1abc").unwrap();
        assert_eq!(loops[0].coil, Some((4, 8)));
    }

    #[test]
    fn abutting_segments_give_empty_coil() {
        let loops = extract_loops(&asg("HHHHEEEE"), "1abc").unwrap();
        assert_eq!(loops[0].coil, None);
        assert_eq!(loops[0].coil_indices(), vec![3, 4]);
    }

    #[test]
    fn too_few_segments() {
        assert_eq!(
            extract_loops(&asg("CCHHHHCC"), "1abc"),
            Err(LoopError::TooFewSegments(1))
        );
    }

    #[test]
    fn chain_break_terminates_pairing() {
        let mut a = asg("HHHHCCEEEECCHHHH");
        for k in a.residue_keys.iter_mut().skip(11) {
            k.seq_num += 10;
        }
        let loops = extract_loops(&a, "1abc").unwrap();
        assert_eq!(loops.len(), 1);
    }

    #[test]
    fn loop_id_numbered_by_first_residue() {
        let a = SsAssignment::from_codes('A', 2, "CCCCEEEEEEECCCCCCCHHHHH").unwrap();
        let loops = extract_loops(&a, "1isp").unwrap();
        assert_eq!(loops[0].id, "1ISP_A_6");
        assert_eq!(loops[0].coil_seq, Some((13, 19)));
    }

    #[test]
    fn custom_loop_matching_extracted_span() {
        let a = asg("HHHHCCCEEEECCHHHH");
        let extracted = extract_loops(&a, "1abc").unwrap();
        let custom = define_custom_loop(&a, "1abc", 5, 7).unwrap();
        assert!(custom.custom);
        assert_eq!(custom.ss1, extracted[0].ss1);
        assert_eq!(custom.coil, extracted[0].coil);
        assert_eq!(custom.ss2, extracted[0].ss2);
    }

    #[test]
    fn custom_loop_bridging_two_coils() {
        let a = asg("HHHHCCCEEEECCHHHH");
        let custom = define_custom_loop(&a, "1abc", 5, 13).unwrap();
        assert_eq!(custom.ss1.start_index, 0);
        assert_eq!(custom.ss2.start_index, 13);
        assert_eq!(custom.coil, Some((4, 12)));
    }

    #[test]
    fn custom_loop_inside_helix() {
        let a = asg("HHHHHHHCCEEEE");
        assert_eq!(
            define_custom_loop(&a, "1abc", 2, 5),
            Err(LoopError::NoAperiodicContent { start: 2, end: 5 })
        );
        assert!(matches!(
            define_custom_loop(&a, "1abc", 2, 50),
            Err(LoopError::Range(SsError::RangeOutOfChain { .. }))
        ));
    }

    #[test]
    fn triage_views() {
        let a = asg("HHHHCCEEEECCHHHHCCEEEE");
        let list = LoopList::new(extract_loops(&a, "1abc").unwrap());
        assert_eq!(list.preserved().len(), 3);
        let id = list.loops().next().unwrap().id.clone();
        let l2 = set_triage(&list, &id, TriageState::Candidate).unwrap();
        assert_eq!(l2.candidates()[0].id, id);
        assert_eq!(l2.preserved().len(), 2);
        let l3 = set_triage(&l2, &id, TriageState::Preserved).unwrap();
        assert!(l3.candidates().is_empty());
        let l4 = set_triage(&l3, &id, TriageState::Unsuitable).unwrap();
        assert!(l4.candidates().iter().chain(l4.preserved().iter()).all(|l| l.id != id));
        assert_eq!(l4.len(), 3);
        assert_eq!(
            set_triage(&l4, "nope", TriageState::Candidate),
            Err(LoopError::UnknownLoop("nope".into()))
        );
    }

    #[test]
    fn extended_strand_example() {
        let a = SsAssignment::from_codes('A', 2, "CCCCEEEECCCCCCCCCCHHHHH").unwrap();
        let b = reassign_region(&a, 10, 12, SsClass::E).unwrap();
        let loops = extract_loops(&b, "1isp").unwrap();
        assert_eq!(loops[0].coil_seq, Some((13, 19)));
    }

    fn arb_codes() -> impl Strategy<Value = String> {
        prop::collection::vec(prop_oneof![Just('H'), Just('G'), Just('E'), Just('C')], 2..80)
            .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn consecutive_loops_share_a_segment(codes in arb_codes()) {
            let a = asg(&codes);
            let n_periodic = segments_of(&a).iter().filter(|s| s.ss_class.is_periodic()).count();
            match extract_loops(&a, "1abc") {
                Ok(loops) => {
                    prop_assert_eq!(loops.len(), n_periodic - 1);
                    for w in loops.windows(2) {
                        prop_assert_eq!(w[0].ss2, w[1].ss1);
                    }
                    for l in &loops {
                        prop_assert!(l.ss1.ss_class.is_periodic() && l.ss2.ss_class.is_periodic());
                        if let Some((s, e)) = l.coil {
                            prop_assert!(a.classes[s..=e].iter().all(|c| !c.is_periodic()));
                        }
                    }
                }
                Err(e) => prop_assert_eq!(e, LoopError::TooFewSegments(n_periodic)),
            }
        }

        #[test]
        fn triage_never_changes_geometry(codes in arb_codes(), picks in prop::collection::vec((0usize..40, 0usize..3), 0..20)) {
            let a = asg(&codes);
            if let Ok(loops) = extract_loops(&a, "1abc") {
                let mut list = LoopList::new(loops.clone());
                let states = [TriageState::Candidate, TriageState::Preserved, TriageState::Unsuitable];
                for (k, s) in picks {
                    let id = loops[k % loops.len()].id.clone();
                    list = set_triage(&list, &id, states[s]).unwrap();
                    prop_assert_eq!(list.state(&id), Some(states[s]));
                }
                let after: Vec<Loop> = list.loops().cloned().collect();
                prop_assert_eq!(after, loops);
            }
        }
    }
}
