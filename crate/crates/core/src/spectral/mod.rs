//! Symmetric eigendecomposition and spectral analysis of graph Laplacians.

mod analysis;
mod lanczos;
mod objective;

pub use analysis::{
    algebraic_connectivity, apply_spectral_filter, connected_components_spectral, diameter_bounds,
    diffusion_distance, first_order_eigen_change, graph_spectrum, spectral_distance,
    DiameterBounds, SpectralFilter,
};
pub use lanczos::{eig_selective, eig_selective_with, LanczosConfig, SelectiveReport};
pub use objective::{
    spectrum_norm_grad, spectrum_norm_sq, GradientReport, NoiseSpec, SpectrumObjective,
    DEGENERATE_GAP,
};

use nalgebra::SymmetricEigen;

use crate::{Error, Matrix, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// `vectors` is `n × p` with orthonormal columns; column `k` pairs with
/// `values[k]`. Each column has its first nonzero component positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_k ‖L u_k − λ_k u_k‖₂`.
    pub fn max_residual(&self, l: &Matrix) -> f64 {
        (0..self.len())
            .map(|k| {
                let u = self.vectors.column(k);
                (l * u - u * self.values[k]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max |UᵀU − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let p = g.nrows();
        (g - Matrix::identity(p, p)).amax()
    }

    /// `U diag(values) Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(v);
        }
        scaled * self.vectors.transpose()
    }

    /// Smallest gap between consecutive eigenvalues (infinite for `p < 2`).
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Keep the `k` lowest and `k` highest eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralSelection {
    k: usize,
}

impl SpectralSelection {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("selection K must be >= 1".into()));
        }
        Ok(Self { k })
    }

    /// A selection that always degenerates to the full spectrum.
    pub fn full() -> Self {
        Self { k: usize::MAX / 2 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_full_for(&self, n: usize) -> bool {
        self.k.saturating_mul(2) >= n
    }

    /// Indices into an ascending spectrum of length `n`.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        if self.is_full_for(n) {
            (0..n).collect()
        } else {
            (0..self.k).chain(n - self.k..n).collect()
        }
    }
}

/// Absolute asymmetry tolerated by the eigensolvers.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn check_symmetric(l: &Matrix) -> Result<()> {
    if !l.is_square() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix",
            l.nrows(),
            l.ncols()
        )));
    }
    let n = l.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((l[(i, j)] - l[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * l.amax().max(1.0) || worst.is_nan() {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

fn symmetrized(l: &Matrix) -> Matrix {
    (l + l.transpose()) * 0.5
}

/// Flips each column so its first component with magnitude above `1e-12` is positive.
pub(crate) fn canonicalize_signs(vectors: &mut Matrix) {
    for mut col in vectors.column_iter_mut() {
        if let Some(&first) = col.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Full symmetric eigendecomposition (Householder tridiagonalisation + implicit QR).
pub fn eig_full(l: &Matrix) -> Result<EigenSystem> {
    check_symmetric(l)?;
    let n = l.nrows();
    if n == 0 {
        return Ok(EigenSystem {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(symmetrized(l));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    canonicalize_signs(&mut vectors);
    Ok(EigenSystem { values, vectors })
}

/// Ascending eigenvalues only.
pub fn eigenvalues(l: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(l)?;
    let mut v: Vec<f64> = symmetrized(l)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Restricts a full eigensystem to the selected indices.
pub fn select(es: &EigenSystem, sel: SpectralSelection) -> EigenSystem {
    let idx = sel.indices(es.len());
    EigenSystem {
        values: idx.iter().map(|&k| es.values[k]).collect(),
        vectors: es.vectors.select_columns(&idx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_laplacian, Graph, DEGREE_FLOOR};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn single_edge_spectrum() {
        let l = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let es = eig_full(&l).unwrap();
        assert_abs_diff_eq!(es.values[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(es.values[1], 2.0, epsilon = 1e-14);
        // first nonzero component positive
        assert!(es.vectors[(0, 1)] > 0.0);
    }

    #[test]
    fn complete_graph_spectrum() {
        let l = normalized_laplacian(&Graph::complete(3), DEGREE_FLOOR);
        let es = eig_full(&l).unwrap();
        for (got, want) in es.values.iter().zip([0.0, 1.5, 1.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = crate::rng::seeded(11);
        let mut m = Matrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        m = &m + m.transpose();
        let es = eig_full(&m).unwrap();
        assert!((es.reconstruct() - &m).norm() < 1e-8);
        assert!(es.orthonormality_error() < 1e-10);
        assert!(es.max_residual(&m) < 1e-8 * m.norm().max(1.0));
        assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(eig_full(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn selection_indices() {
        let s = SpectralSelection::new(2).unwrap();
        assert_eq!(s.indices(10), vec![0, 1, 8, 9]);
        assert_eq!(s.indices(4), vec![0, 1, 2, 3]);
        assert!(SpectralSelection::new(0).is_err());
    }
}
