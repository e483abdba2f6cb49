//! Loop descriptors (D, δ, θ, ρ), descriptor differences and automatic
//! Scaffold/Insert pairing.
//!
//! Flanking-segment axes are the principal component of the segment's Cα
//! cloud, oriented N→C. With `m1`, `m2` the two axes and `u` the unit vector
//! from the first coil endpoint to the second:
//!
//! * `D` is the distance between the coil endpoints,
//! * `δ` (hoist) is the angle between `m1` and `u`,
//! * `θ` (packing) is the angle between `m1` and `m2`,
//! * `ρ` (meridian) is the signed rotation, about `m1`, from the projection of
//!   `u` to the projection of `m2` onto the plane normal to `m1`, in [0, 360).

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loop_model::Loop;
use crate::secondary_structure::Segment;
use crate::structure_io::CaTrace;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("segment {start}..{end} has fewer than 2 distinct Cα positions")]
    DegenerateSegment { start: usize, end: usize },
    #[error("residue index {0} has no Cα")]
    MissingCa(usize),
    #[error("insert loop set is empty")]
    EmptyInsertSet,
    #[error("loop {0} has no descriptors")]
    MissingDescriptors(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    /// Å
    pub d: f64,
    /// degrees, [0, 180]
    pub delta: f64,
    /// degrees, [0, 180]
    pub theta: f64,
    /// degrees, [0, 360)
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryDelta {
    pub d_d: f64,
    pub d_delta: f64,
    pub d_theta: f64,
    /// Circular difference, [0, 180].
    pub d_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSuggestion {
    pub scaffold_loop_id: String,
    pub insert_loop_id: String,
    pub score: f64,
    pub components: GeometryDelta,
    /// 1-based rank among this scaffold loop's suggestions.
    pub rank: usize,
    /// Chosen by the greedy one-to-one assignment.
    pub default_pair: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWeights {
    /// Å per unit cost
    pub sigma_d: f64,
    /// degrees per unit cost
    pub sigma_angle: f64,
}

impl Default for PairWeights {
    fn default() -> Self {
        Self {
            sigma_d: 2.0,
            sigma_angle: 60.0,
        }
    }
}

fn positions_for(segment: &Segment, trace: &CaTrace) -> Vec<Vec3> {
    trace
        .trace_indices_in(segment.start_index, segment.end_index)
        .into_iter()
        .map(|k| trace.positions[k])
        .collect()
}

/// Principal axis of a point set oriented along `last - first`, plus the centroid.
pub fn principal_axis(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    if points.len() < 2 {
        return None;
    }
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    if lambda <= 1e-12 {
        return None;
    }
    let mut axis: Vec3 = eig.eigenvectors.column(k).into_owned().normalize();
    let along = points[points.len() - 1] - points[0];
    if axis.dot(&along) < 0.0 {
        axis = -axis;
    }
    Some((axis, centroid))
}

/// Unit N→C axis and centroid of a segment's Cα positions.
pub fn fit_segment_axis(segment: &Segment, trace: &CaTrace) -> Result<(Vec3, Vec3), GeometryError> {
    principal_axis(&positions_for(segment, trace)).ok_or(GeometryError::DegenerateSegment {
        start: segment.start_index,
        end: segment.end_index,
    })
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn ca_at(trace: &CaTrace, residue_index: usize) -> Result<Vec3, GeometryError> {
    trace
        .trace_index(residue_index)
        .map(|k| trace.positions[k])
        .ok_or(GeometryError::MissingCa(residue_index))
}

/// Descriptors from the two axes and coil endpoints. Coincident endpoints
/// fall back to the centroid-to-centroid direction for `u`.
pub fn descriptors_from_frame(m1: Vec3, c1: Vec3, m2: Vec3, c2: Vec3, p_start: Vec3, p_end: Vec3) -> LoopGeometry {
    let link = p_end - p_start;
    let d = link.norm();
    let u = if d > 1e-9 {
        link / d
    } else {
        let cc = c2 - c1;
        if cc.norm() > 1e-9 {
            cc.normalize()
        } else {
            m1
        }
    };
    let theta = angle_deg(&m1, &m2);
    let delta = angle_deg(&m1, &u);
    let pu = u - m1 * u.dot(&m1);
    let pm = m2 - m1 * m2.dot(&m1);
    let rho = if pu.norm() < 1e-9 || pm.norm() < 1e-9 {
        0.0
    } else {
        let r = m1.dot(&pu.cross(&pm)).atan2(pu.dot(&pm)).to_degrees();
        let r = r.rem_euclid(360.0);
        if r >= 360.0 {
            0.0
        } else {
            r
        }
    };
    LoopGeometry { d, delta, theta, rho }
}

pub fn compute_descriptors(lp: &Loop, trace: &CaTrace) -> Result<LoopGeometry, GeometryError> {
    let (m1, c1) = fit_segment_axis(&lp.ss1, trace)?;
    let (m2, c2) = fit_segment_axis(&lp.ss2, trace)?;
    let (a, b) = lp.graft_range();
    let p_start = ca_at(trace, a)?;
    let p_end = ca_at(trace, b)?;
    Ok(descriptors_from_frame(m1, c1, m2, c2, p_start, p_end))
}

pub fn circular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

pub fn descriptor_delta(a: &LoopGeometry, b: &LoopGeometry) -> GeometryDelta {
    GeometryDelta {
        d_d: (a.d - b.d).abs(),
        d_delta: (a.delta - b.delta).abs(),
        d_theta: (a.theta - b.theta).abs(),
        d_rho: circular_difference(a.rho, b.rho),
    }
}

pub fn pair_score(d: &GeometryDelta, weights: &PairWeights) -> f64 {
    d.d_d / weights.sigma_d + (d.d_delta + d.d_theta + d.d_rho) / weights.sigma_angle
}

/// Ranks every Insert loop for each candidate and marks a greedy one-to-one default pairing.
pub fn suggest_pairs(
    candidates: &[&Loop],
    insert_loops: &[&Loop],
    weights: &PairWeights,
) -> Result<Vec<PairSuggestion>, GeometryError> {
    if insert_loops.is_empty() {
        return Err(GeometryError::EmptyInsertSet);
    }
    let geom = |l: &Loop| {
        l.descriptors
            .ok_or_else(|| GeometryError::MissingDescriptors(l.id.clone()))
    };
    let mut out = Vec::new();
    for cand in candidates {
        let cg = geom(cand)?;
        let mut rows = Vec::with_capacity(insert_loops.len());
        for ins in insert_loops {
            let components = descriptor_delta(&cg, &geom(ins)?);
            rows.push(PairSuggestion {
                scaffold_loop_id: cand.id.clone(),
                insert_loop_id: ins.id.clone(),
                score: pair_score(&components, weights),
                components,
                rank: 0,
                default_pair: false,
            });
        }
        rows.sort_by(|a, b| a.score.total_cmp(&b.score));
        for (k, r) in rows.iter_mut().enumerate() {
            r.rank = k + 1;
        }
        out.extend(rows);
    }

    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[a].score.total_cmp(&out[b].score));
    let mut used_scaffold = std::collections::HashSet::new();
    let mut used_insert = std::collections::HashSet::new();
    for k in order {
        let s = &out[k];
        if used_scaffold.contains(&s.scaffold_loop_id) || used_insert.contains(&s.insert_loop_id) {
            continue;
        }
        used_scaffold.insert(s.scaffold_loop_id.clone());
        used_insert.insert(s.insert_loop_id.clone());
        out[k].default_pair = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{ideal_helix, rotation};
    use crate::secondary_structure::SsClass;
    use crate::structure_io::ResidueKey;
    use proptest::prelude::*;

    fn trace_of(points: Vec<Vec3>) -> CaTrace {
        let n = points.len();
        CaTrace {
            chain_id: 'A',
            positions: points,
            residue_keys: (0..n).map(|i| ResidueKey::new(i as i32 + 1)).collect(),
            residue_indices: (0..n).collect(),
        }
    }

    fn seg(c: SsClass, s: usize, e: usize) -> Segment {
        Segment {
            ss_class: c,
            start_index: s,
            end_index: e,
        }
    }

    fn geometry(d: f64, delta: f64, theta: f64, rho: f64) -> LoopGeometry {
        LoopGeometry { d, delta, theta, rho }
    }

    fn test_loop(id: &str, g: LoopGeometry) -> Loop {
        Loop {
            id: id.into(),
            ordinal: 1,
            ss1: seg(SsClass::H, 0, 3),
            coil: Some((4, 5)),
            ss2: seg(SsClass::E, 6, 9),
            custom: false,
            descriptors: Some(g),
            first_seq: 1,
            last_seq: 10,
            coil_seq: Some((5, 6)),
        }
    }

    #[test]
    fn collinear_axis_and_orientation() {
        let pts: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let t = trace_of(pts.clone());
        let (axis, centroid) = fit_segment_axis(&seg(SsClass::H, 0, 3), &t).unwrap();
        assert!((axis - Vec3::x()).norm() < 1e-12);
        assert!((centroid - Vec3::new(1.5, 0.0, 0.0)).norm() < 1e-12);

        let rev = trace_of(pts.into_iter().rev().collect());
        let (axis, _) = fit_segment_axis(&seg(SsClass::H, 0, 3), &rev).unwrap();
        assert!((axis + Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn degenerate_segments() {
        let t = trace_of(vec![Vec3::zeros(); 3]);
        assert!(matches!(
            fit_segment_axis(&seg(SsClass::H, 0, 2), &t),
            Err(GeometryError::DegenerateSegment { .. })
        ));
        assert!(fit_segment_axis(&seg(SsClass::H, 0, 0), &t).is_err());
    }

    /// Local helix axis from consecutive Cα bisectors, independent of the covariance fit.
    fn bisector_axis(ca: &[Vec3]) -> Vec3 {
        let bis: Vec<Vec3> = (1..ca.len() - 1)
            .map(|i| (ca[i - 1] - ca[i]) + (ca[i + 1] - ca[i]))
            .collect();
        let mut sum = Vec3::zeros();
        for w in bis.windows(2) {
            let mut a = w[0].cross(&w[1]).normalize();
            if a.dot(&(ca[ca.len() - 1] - ca[0])) < 0.0 {
                a = -a;
            }
            sum += a;
        }
        sum.normalize()
    }

    #[test]
    fn helix_axis_matches_screw_axis() {
        let chain = ideal_helix('A', 1, 15);
        let ca: Vec<Vec3> = chain.residues.iter().map(|r| r.ca().unwrap()).collect();
        let oracle = bisector_axis(&ca);
        let t = trace_of(ca);
        let (axis, _) = fit_segment_axis(&seg(SsClass::H, 0, 14), &t).unwrap();
        let err = axis.angle(&oracle).to_degrees();
        assert!(err < 5.0, "axis off by {err}°");
    }

    #[test]
    fn parallel_and_antiparallel_axes() {
        let m1 = Vec3::x();
        let g = descriptors_from_frame(m1, Vec3::zeros(), m1, Vec3::y(), Vec3::zeros(), Vec3::y());
        assert!(g.theta.abs() < 1e-9);
        let g = descriptors_from_frame(m1, Vec3::zeros(), -m1, Vec3::y(), Vec3::zeros(), Vec3::y());
        assert!((g.theta - 180.0).abs() < 1e-9);
        assert!((g.delta - 90.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_endpoints_give_zero_distance() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let g = descriptors_from_frame(Vec3::x(), Vec3::zeros(), Vec3::y(), Vec3::z(), p, p);
        assert_eq!(g.d, 0.0);
        assert!(g.delta.is_finite() && g.rho.is_finite());
    }

    #[test]
    fn rho_sign_convention() {
        // u along +y, m2 rotated +90° about m1 = x from +y, i.e. along +z.
        let g = descriptors_from_frame(
            Vec3::x(),
            Vec3::zeros(),
            Vec3::z(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::y(),
        );
        assert!((g.rho - 90.0).abs() < 1e-9);
        let g = descriptors_from_frame(
            Vec3::x(),
            Vec3::zeros(),
            -Vec3::z(),
            Vec3::zeros(),
            Vec3::zeros(),
            Vec3::y(),
        );
        assert!((g.rho - 270.0).abs() < 1e-9);
    }

    #[test]
    fn delta_examples() {
        let z = descriptor_delta(&geometry(5.0, 30.0, 60.0, 90.0), &geometry(5.0, 30.0, 60.0, 90.0));
        assert_eq!(
            z,
            GeometryDelta {
                d_d: 0.0,
                d_delta: 0.0,
                d_theta: 0.0,
                d_rho: 0.0
            }
        );
        let w = descriptor_delta(&geometry(0.0, 0.0, 0.0, 350.0), &geometry(0.0, 0.0, 0.0, 10.0));
        assert!((w.d_rho - 20.0).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let w = PairWeights::default();
        let zero = GeometryDelta {
            d_d: 0.0,
            d_delta: 0.0,
            d_theta: 0.0,
            d_rho: 0.0,
        };
        assert_eq!(pair_score(&zero, &w), 0.0);
        let d = GeometryDelta {
            d_d: 1.6,
            d_delta: 19.0,
            d_theta: 15.0,
            d_rho: 26.0,
        };
        let d2 = GeometryDelta {
            d_d: 3.2,
            d_delta: 38.0,
            d_theta: 30.0,
            d_rho: 52.0,
        };
        assert!((pair_score(&d2, &w) - 2.0 * pair_score(&d, &w)).abs() < 1e-12);
        // 1 Å costs the same as 30°.
        let one_a = GeometryDelta { d_d: 1.0, ..zero };
        let thirty = GeometryDelta { d_theta: 30.0, ..zero };
        assert!((pair_score(&one_a, &w) - pair_score(&thirty, &w)).abs() < 1e-12);
    }

    #[test]
    fn single_pair_is_default() {
        let c = test_loop("S_A_1", geometry(5.0, 20.0, 30.0, 40.0));
        let i = test_loop("I_A_1", geometry(6.0, 25.0, 35.0, 45.0));
        let s = suggest_pairs(&[&c], &[&i], &PairWeights::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].default_pair);
        assert_eq!(s[0].rank, 1);
    }

    #[test]
    fn exact_clone_ranks_first() {
        let g = geometry(5.0, 20.0, 30.0, 40.0);
        let c = test_loop("S_A_1", g);
        let far = test_loop("I_A_1", geometry(9.0, 70.0, 30.0, 200.0));
        let clone = test_loop("I_A_9", g);
        let s = suggest_pairs(&[&c], &[&far, &clone], &PairWeights::default()).unwrap();
        assert_eq!(s[0].insert_loop_id, "I_A_9");
        assert_eq!(s[0].score, 0.0);
    }

    #[test]
    fn greedy_resolves_contention() {
        let c1 = test_loop("S_A_1", geometry(5.0, 20.0, 30.0, 40.0));
        let c2 = test_loop("S_A_2", geometry(5.5, 20.0, 30.0, 40.0));
        let best = test_loop("I_A_1", geometry(5.1, 20.0, 30.0, 40.0));
        let next = test_loop("I_A_2", geometry(7.0, 20.0, 30.0, 40.0));
        let s = suggest_pairs(&[&c1, &c2], &[&best, &next], &PairWeights::default()).unwrap();
        let default_for = |sid: &str| {
            s.iter()
                .find(|p| p.scaffold_loop_id == sid && p.default_pair)
                .map(|p| p.insert_loop_id.clone())
        };
        assert_eq!(default_for("S_A_1").as_deref(), Some("I_A_1"));
        assert_eq!(default_for("S_A_2").as_deref(), Some("I_A_2"));
        assert_eq!(s.len(), 4);
        assert_eq!(
            suggest_pairs(&[&c1], &[], &PairWeights::default()),
            Err(GeometryError::EmptyInsertSet)
        );
    }

    fn arb_geometry() -> impl Strategy<Value = LoopGeometry> {
        (0.0..30.0f64, 0.0..180.0f64, 0.0..180.0f64, 0.0..360.0f64).prop_map(|(d, a, b, c)| geometry(d, a, b, c))
    }

    proptest! {
        #[test]
        fn delta_is_symmetric(a in arb_geometry(), b in arb_geometry()) {
            prop_assert_eq!(descriptor_delta(&a, &b), descriptor_delta(&b, &a));
        }

        #[test]
        fn rho_difference_wraps(r1 in 0.0..360.0f64, r2 in 0.0..360.0f64, k in -3i32..3) {
            let d = circular_difference(r1, r2);
            prop_assert!((0.0..=180.0).contains(&d));
            prop_assert!(circular_difference(r1, r1 + 360.0 * k as f64) < 1e-9);
        }

        #[test]
        fn score_zero_iff_equal(a in arb_geometry(), b in arb_geometry()) {
            let w = PairWeights::default();
            prop_assert_eq!(pair_score(&descriptor_delta(&a, &a), &w), 0.0);
            let s = pair_score(&descriptor_delta(&a, &b), &w);
            let same = a.d == b.d && a.delta == b.delta && a.theta == b.theta && circular_difference(a.rho, b.rho) == 0.0;
            prop_assert_eq!(s == 0.0, same);
        }

        #[test]
        fn descriptors_invariant_under_rigid_motion(
            ax in prop::array::uniform3(-1.0..1.0f64),
            angle in 0.0..360.0f64,
            shift in prop::array::uniform3(-50.0..50.0f64),
            psi in -60.0..160.0f64,
        ) {
            prop_assume!(Vec3::from(ax).norm() > 0.1);
            use crate::builder::{build_chain, ResidueGeometry};
            let mut geoms = vec![ResidueGeometry::new("ALA", -57.0, -47.0); 8];
            geoms.extend([ResidueGeometry::new("GLY", -80.0, psi), ResidueGeometry::new("SER", 70.0, 20.0), ResidueGeometry::new("SER", -90.0, 150.0)]);
            geoms.extend(vec![ResidueGeometry::new("VAL", -120.0, 130.0); 6]);
            let chain = build_chain('A', 1, &geoms);
            let ca: Vec<Vec3> = chain.residues.iter().map(|r| r.ca().unwrap()).collect();
            let lp = Loop {
                ss1: seg(SsClass::H, 0, 7),
                coil: Some((8, 10)),
                ss2: seg(SsClass::E, 11, 16),
                ..test_loop("L", geometry(0.0, 0.0, 0.0, 0.0))
            };
            let g0 = compute_descriptors(&lp, &trace_of(ca.clone())).unwrap();
            let rot = rotation(Vec3::from(ax), angle);
            let moved: Vec<Vec3> = ca.iter().map(|p| rot * p + Vec3::from(shift)).collect();
            let g1 = compute_descriptors(&lp, &trace_of(moved)).unwrap();
            prop_assert!((g0.d - g1.d).abs() < 1e-6);
            prop_assert!((g0.delta - g1.delta).abs() < 1e-6);
            prop_assert!((g0.theta - g1.theta).abs() < 1e-6);
            prop_assert!(circular_difference(g0.rho, g1.rho) < 1e-6);
        }
    }
}
