//! Gaussian and anisotropic elastic network models on Cα traces.

use nalgebra::{DMatrix, SymmetricEigen};

use super::DynamicsError;
use crate::Vec3;

/// Relative eigenvalue threshold below which a mode counts as zero.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_GNM_CUTOFF: f64 = 10.0;
pub const DEFAULT_ANM_CUTOFF: f64 = 15.0;

/// Nonzero normal modes in ascending eigenvalue order.
#[derive(Debug, Clone)]
pub struct Modes {
    pub eigenvalues: Vec<f64>,
    /// One column per retained mode.
    pub eigenvectors: DMatrix<f64>,
    pub zero_modes: usize,
}

impl Modes {
    fn from_matrix(m: DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let eig = SymmetricEigen::new(m);
        let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let threshold = ZERO_MODE_TOLERANCE * lambda_max;
        let keep: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&k| eig.eigenvalues[k].abs() >= threshold && lambda_max > 0.0)
            .collect();
        let mut vectors = DMatrix::zeros(dim, keep.len());
        for (col, &k) in keep.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(k));
        }
        Self {
            eigenvalues: keep.iter().map(|&k| eig.eigenvalues[k]).collect(),
            eigenvectors: vectors,
            zero_modes: dim - keep.len(),
        }
    }

    /// Pseudo-inverse restricted to the lowest `count` retained modes (all when `None`).
    pub fn pseudo_inverse(&self, count: Option<usize>) -> DMatrix<f64> {
        let m = count.unwrap_or(self.eigenvalues.len()).min(self.eigenvalues.len());
        let dim = self.eigenvectors.nrows();
        let v = self.eigenvectors.columns(0, m);
        let mut scaled = v.clone_owned();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col /= self.eigenvalues[k];
        }
        let mut out = DMatrix::zeros(dim, dim);
        out.gemm(1.0, &scaled, &v.transpose(), 0.0);
        out
    }

    /// Diagonal of the full pseudo-inverse without forming the matrix.
    pub fn pseudo_inverse_diagonal(&self) -> Vec<f64> {
        let dim = self.eigenvectors.nrows();
        (0..dim)
            .map(|i| {
                self.eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(k, l)| self.eigenvectors[(i, k)].powi(2) / l)
                    .sum()
            })
            .collect()
    }
}

/// Kirchhoff (connectivity) matrix: -1 for pairs within `cutoff`, degree on the diagonal.
pub fn kirchhoff(positions: &[Vec3], cutoff: f64) -> DMatrix<f64> {
    let n = positions.len();
    let mut g = DMatrix::zeros(n, n);
    let c2 = cutoff * cutoff;
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[i] - positions[j]).norm_squared() <= c2 {
                g[(i, j)] = -1.0;
                g[(j, i)] = -1.0;
                g[(i, i)] += 1.0;
                g[(j, j)] += 1.0;
            }
        }
    }
    g
}

/// ANM Hessian with unit spring constant for pairs within `cutoff`.
pub fn anm_hessian(positions: &[Vec3], cutoff: f64) -> DMatrix<f64> {
    let n = positions.len();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    let c2 = cutoff * cutoff;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = positions[j] - positions[i];
            let d2 = r.norm_squared();
            if d2 > c2 || d2 == 0.0 {
                continue;
            }
            let block = -(r * r.transpose()) / d2;
            for a in 0..3 {
                for b in 0..3 {
                    let v = block[(a, b)];
                    h[(3 * i + a, 3 * j + b)] = v;
                    h[(3 * j + a, 3 * i + b)] = v;
                    h[(3 * i + a, 3 * i + b)] -= v;
                    h[(3 * j + a, 3 * j + b)] -= v;
                }
            }
        }
    }
    h
}

pub fn gnm_modes(positions: &[Vec3], cutoff: f64) -> Result<Modes, DynamicsError> {
    if positions.len() < 2 {
        return Err(DynamicsError::TooShort {
            needed: 2,
            got: positions.len(),
        });
    }
    let modes = Modes::from_matrix(kirchhoff(positions, cutoff));
    if modes.zero_modes > 1 {
        return Err(DynamicsError::DisconnectedContactGraph(modes.zero_modes));
    }
    Ok(modes)
}

pub fn anm_modes(positions: &[Vec3], cutoff: f64) -> Result<Modes, DynamicsError> {
    if positions.len() < 4 {
        return Err(DynamicsError::TooShort {
            needed: 4,
            got: positions.len(),
        });
    }
    let modes = Modes::from_matrix(anm_hessian(positions, cutoff));
    if modes.zero_modes > 6 {
        return Err(DynamicsError::IllConditioned(modes.zero_modes));
    }
    Ok(modes)
}

/// Per-residue mean-square fluctuation: the GNM pseudo-inverse diagonal.
pub fn gnm_msf(positions: &[Vec3], cutoff: f64) -> Result<Vec<f64>, DynamicsError> {
    Ok(gnm_modes(positions, cutoff)?.pseudo_inverse_diagonal())
}

/// Per-residue mean-square fluctuation: trace of each 3×3 diagonal block of the ANM pseudo-inverse.
pub fn anm_msf(positions: &[Vec3], cutoff: f64) -> Result<Vec<f64>, DynamicsError> {
    let diag = anm_modes(positions, cutoff)?.pseudo_inverse_diagonal();
    Ok(diag.chunks(3).map(|c| c.iter().sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kirchhoff_rows_sum_to_zero() {
        let pts: Vec<Vec3> = (0..7).map(|i| Vec3::new(i as f64 * 3.8, (i % 2) as f64, 0.0)).collect();
        let g = kirchhoff(&pts, 10.0);
        for row in g.row_iter() {
            assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let pts = vec![
            Vec3::zeros(),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(50.0, 0.0, 0.0),
            Vec3::new(53.0, 0.0, 0.0),
        ];
        assert_eq!(
            gnm_msf(&pts, 10.0).unwrap_err(),
            DynamicsError::DisconnectedContactGraph(2)
        );
    }

    #[test]
    fn straight_chain_is_ill_conditioned_for_anm() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64 * 3.8, 0.0, 0.0)).collect();
        assert!(matches!(anm_msf(&pts, 15.0), Err(DynamicsError::IllConditioned(_))));
    }

    #[test]
    fn anm_hessian_rows_sum_to_zero() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(3.8, 0.0, 0.0),
            Vec3::new(5.0, 3.5, 0.0),
            Vec3::new(4.0, 5.0, 3.0),
        ];
        let h = anm_hessian(&pts, 15.0);
        // Translations are null vectors.
        for axis in 0..3 {
            let mut t = nalgebra::DVector::zeros(12);
            for i in 0..4 {
                t[3 * i + axis] = 1.0;
            }
            assert!((&h * t).norm() < 1e-12);
        }
    }

    #[test]
    fn truncated_pseudo_inverse_uses_lowest_modes() {
        let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(i as f64 * 6.0, 0.0, 0.0)).collect();
        let modes = gnm_modes(&pts, 10.0).unwrap();
        assert_eq!(modes.zero_modes, 1);
        let full = modes.pseudo_inverse(None);
        let diag = modes.pseudo_inverse_diagonal();
        for i in 0..6 {
            assert!((full[(i, i)] - diag[i]).abs() < 1e-12);
        }
        let one = modes.pseudo_inverse(Some(1));
        let v = modes.eigenvectors.column(0);
        assert!((one[(0, 5)] - v[0] * v[5] / modes.eigenvalues[0]).abs() < 1e-12);
    }
}
