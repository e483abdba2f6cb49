//! Simplified Kabsch–Sander assignment emitting only H, G, E and C.

use super::{SsAssignment, SsClass, SsError};
use crate::structure_io::{Chain, Structure};
use crate::Vec3;

/// Electrostatic hydrogen-bond energy cut-off in kcal/mol.
pub const HBOND_THRESHOLD: f64 = -0.5;

const COUPLING: f64 = 0.084 * 332.0;
const MIN_ENERGY: f64 = -9.9;
const MIN_DISTANCE: f64 = 0.5;
/// Residue pairs with Cα further apart than this cannot H-bond.
const CA_CUTOFF: f64 = 9.0;
/// A peptide bond longer than this marks a chain break.
const MAX_PEPTIDE_BOND: f64 = 2.5;
const MIN_HELIX_RUN: usize = 4;
const MIN_STRAND_RUN: usize = 3;
const MIN_CONSECUTIVE_BACKBONE: usize = 5;

#[derive(Debug, Clone, Copy)]
struct Backbone {
    n: Vec3,
    ca: Vec3,
    c: Vec3,
    o: Vec3,
    /// Amide hydrogen; absent for the first residue, prolines and after breaks.
    h: Option<Vec3>,
}

/// Energy of the bond between acceptor C=O and donor N–H.
pub fn hbond_energy(c: Vec3, o: Vec3, n: Vec3, h: Vec3) -> f64 {
    let r_on = (o - n).norm();
    let r_ch = (c - h).norm();
    let r_oh = (o - h).norm();
    let r_cn = (c - n).norm();
    if r_on < MIN_DISTANCE || r_ch < MIN_DISTANCE || r_oh < MIN_DISTANCE || r_cn < MIN_DISTANCE {
        return MIN_ENERGY;
    }
    let e = COUPLING * (1.0 / r_on + 1.0 / r_ch - 1.0 / r_oh - 1.0 / r_cn);
    e.max(MIN_ENERGY)
}

fn backbone_of(chain: &Chain) -> Vec<Option<Backbone>> {
    let mut out: Vec<Option<Backbone>> = chain
        .residues
        .iter()
        .map(|r| {
            Some(Backbone {
                n: r.atom("N")?.position,
                ca: r.atom("CA")?.position,
                c: r.atom("C")?.position,
                o: r.atom("O")?.position,
                h: None,
            })
        })
        .collect();
    for i in 1..out.len() {
        let (Some(prev), Some(cur)) = (out[i - 1], out[i]) else {
            continue;
        };
        if chain.residues[i].name == "PRO" || (cur.n - prev.c).norm() > MAX_PEPTIDE_BOND {
            continue;
        }
        let co = (prev.c - prev.o).normalize();
        out[i].as_mut().unwrap().h = Some(cur.n + co);
    }
    out
}

/// Whether residues i and i+1 are covalently linked with complete backbones.
fn linked(bb: &[Option<Backbone>], i: usize) -> bool {
    match (bb.get(i).copied().flatten(), bb.get(i + 1).copied().flatten()) {
        (Some(a), Some(b)) => (b.n - a.c).norm() <= MAX_PEPTIDE_BOND,
        _ => false,
    }
}

struct HBondMap {
    n: usize,
    // energy[acceptor * n + donor]
    energy: Vec<f64>,
}

impl HBondMap {
    fn compute(bb: &[Option<Backbone>]) -> Self {
        let n = bb.len();
        let mut energy = vec![0.0; n * n];
        for acc in 0..n {
            let Some(a) = bb[acc] else { continue };
            for don in 0..n {
                if don == acc || don == acc + 1 {
                    continue;
                }
                let Some(d) = bb[don] else { continue };
                let Some(h) = d.h else { continue };
                if (a.ca - d.ca).norm() >= CA_CUTOFF {
                    continue;
                }
                energy[acc * n + don] = hbond_energy(a.c, a.o, d.n, h);
            }
        }
        Self { n, energy }
    }

    /// C=O of `acc` bonded to N–H of `don`.
    fn bonded(&self, acc: isize, don: isize) -> bool {
        if acc < 0 || don < 0 || acc as usize >= self.n || don as usize >= self.n {
            return false;
        }
        self.energy[acc as usize * self.n + don as usize] < HBOND_THRESHOLD
    }
}

fn span_linked(bb: &[Option<Backbone>], from: usize, to: usize) -> bool {
    (from..to).all(|k| linked(bb, k))
}

fn turns(bb: &[Option<Backbone>], hb: &HBondMap, step: usize) -> Vec<bool> {
    let n = bb.len();
    (0..n)
        .map(|i| i + step < n && span_linked(bb, i, i + step) && hb.bonded(i as isize, (i + step) as isize))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bridge {
    Parallel,
    Antiparallel,
}

fn bridge(bb: &[Option<Backbone>], hb: &HBondMap, i: usize, j: usize) -> Option<Bridge> {
    let n = bb.len();
    if i < 1 || j < 1 || i + 1 >= n || j + 1 >= n {
        return None;
    }
    if !(span_linked(bb, i - 1, i + 1) && span_linked(bb, j - 1, j + 1)) {
        return None;
    }
    let (i, j) = (i as isize, j as isize);
    let b = |a, d| hb.bonded(a, d);
    if (b(i - 1, j) && b(j, i + 1)) || (b(j - 1, i) && b(i, j + 1)) {
        Some(Bridge::Parallel)
    } else if (b(i, j) && b(j, i)) || (b(i - 1, j + 1) && b(j - 1, i + 1)) {
        Some(Bridge::Antiparallel)
    } else {
        None
    }
}

fn demote_short_runs(classes: &mut [SsClass], class: SsClass, min_len: usize) {
    let mut i = 0;
    while i < classes.len() {
        if classes[i] != class {
            i += 1;
            continue;
        }
        let start = i;
        while i < classes.len() && classes[i] == class {
            i += 1;
        }
        if i - start < min_len {
            classes[start..i].fill(SsClass::C);
        }
    }
}

fn has_backbone_run(bb: &[Option<Backbone>]) -> bool {
    let mut run = 0usize;
    for i in 0..bb.len() {
        if bb[i].is_none() {
            run = 0;
            continue;
        }
        run = if i > 0 && linked(bb, i - 1) { run + 1 } else { 1 };
        if run >= MIN_CONSECUTIVE_BACKBONE {
            return true;
        }
    }
    false
}

pub fn classify_chain(chain: &Chain) -> Result<Vec<SsClass>, SsError> {
    let n = chain.residues.len();
    if n < MIN_CONSECUTIVE_BACKBONE {
        return Ok(vec![SsClass::C; n]);
    }
    let bb = backbone_of(chain);
    if !has_backbone_run(&bb) {
        return Err(SsError::MissingBackbone(chain.id));
    }
    let hb = HBondMap::compute(&bb);
    let mut classes = vec![SsClass::C; n];

    // α-helix: two consecutive 4-turns at i-1 and i cover residues i..i+3.
    let turn4 = turns(&bb, &hb, 4);
    for i in 1..n {
        if turn4[i - 1] && turn4[i] {
            classes[i..(i + 4).min(n)].fill(SsClass::H);
        }
    }

    // β-ladders: a bridge with a same-type neighbour bridge one step along both strands.
    let mut partners: Vec<Vec<(usize, Bridge)>> = vec![Vec::new(); n];
    for i in 1..n.saturating_sub(1) {
        for j in (i + 3)..n.saturating_sub(1) {
            if let Some(kind) = bridge(&bb, &hb, i, j) {
                partners[i].push((j, kind));
                partners[j].push((i, kind));
            }
        }
    }
    let has = |i: usize, j: usize, kind: Bridge| partners[i].iter().any(|&(p, k)| p == j && k == kind);
    for i in 0..n {
        if classes[i] == SsClass::H {
            continue;
        }
        let in_ladder = partners[i].iter().any(|&(j, kind)| {
            let step = |di: isize| {
                let ni = i as isize + di;
                let nj = match kind {
                    Bridge::Parallel => j as isize + di,
                    Bridge::Antiparallel => j as isize - di,
                };
                ni >= 0 && nj >= 0 && (ni as usize) < n && (nj as usize) < n && has(ni as usize, nj as usize, kind)
            };
            step(1) || step(-1)
        });
        if in_ladder {
            classes[i] = SsClass::E;
        }
    }

    // 3₁₀-helix where nothing stronger was assigned.
    let turn3 = turns(&bb, &hb, 3);
    for i in 1..n {
        if turn3[i - 1] && turn3[i] {
            let end = (i + 3).min(n);
            if classes[i..end].iter().all(|c| *c == SsClass::C || *c == SsClass::G) {
                classes[i..end].fill(SsClass::G);
            }
        }
    }

    demote_short_runs(&mut classes, SsClass::H, MIN_HELIX_RUN);
    demote_short_runs(&mut classes, SsClass::E, MIN_STRAND_RUN);
    Ok(classes)
}

/// Automatic per-residue classes for one chain; every residue is marked automatic.
pub fn assign_secondary_structure(structure: &Structure, chain_id: char) -> Result<SsAssignment, SsError> {
    let chain = structure.chain(chain_id).map_err(|_| SsError::UnknownChain(chain_id))?;
    let classes = classify_chain(chain)?;
    let keys = chain.residues.iter().map(|r| r.key()).collect();
    Ok(SsAssignment::automatic(chain_id, keys, classes))
}
