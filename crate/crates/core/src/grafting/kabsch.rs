use nalgebra::{Matrix3, SVD};

use crate::Vec3;

/// Rigid transform `x ↦ rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superposition {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    /// RMSD between the transformed mobile set and the target.
    pub rmsd: f64,
}

impl Superposition {
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }
}

pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Least-squares proper rotation and translation taking `mobile` onto `target`.
///
/// Returns `None` for empty or mismatched inputs.
pub fn kabsch(mobile: &[Vec3], target: &[Vec3]) -> Option<Superposition> {
    if mobile.is_empty() || mobile.len() != target.len() {
        return None;
    }
    let pc = centroid(mobile);
    let qc = centroid(target);
    let mut h = Matrix3::zeros();
    for (p, q) in mobile.iter().zip(target) {
        h += (p - pc) * (q - qc).transpose();
    }
    let svd = SVD::new(h, true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    let translation = qc - rotation * pc;
    let moved: Vec<Vec3> = mobile.iter().map(|p| rotation * p + translation).collect();
    Some(Superposition {
        rotation,
        translation,
        rmsd: rmsd(&moved, target),
    })
}
