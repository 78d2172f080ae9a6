//! Spectrum-norm objective `Σ_k λ_k²` of `Lap(A + C∘Δ + noise)` and its gradient in `Δ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{eig_full, eig_selective_with, EigenSystem, LanczosConfig, SpectralSelection};
use crate::graph::{normalized_laplacian_of, row_sums, ComplementDirection, Graph, DEGREE_FLOOR};
use crate::rng::seeded;
use crate::{Error, Matrix, Result};

/// Eigenvalue gaps below this make per-eigenvector derivatives unreliable.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Symmetric jitter `ε (N + Nᵀ)/2`, `N_ij ~ U(0,1)`, drawn once per run.
///
/// The diagonal is left at zero so the perturbed graph stays loop-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub magnitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(magnitude: f64, seed: u64) -> Result<Self> {
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise magnitude must be >= 0, got {magnitude}"
            )));
        }
        Ok(Self { magnitude, seed })
    }

    pub fn none() -> Self {
        Self {
            magnitude: 0.0,
            seed: 0,
        }
    }

    pub fn matrix(&self, n: usize) -> Matrix {
        if self.magnitude == 0.0 {
            return Matrix::zeros(n, n);
        }
        let mut rng = seeded(self.seed);
        let raw = Matrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let mut m = (&raw + raw.transpose()) * (0.5 * self.magnitude);
        m.fill_diagonal(0.0);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    /// Smallest gap between consecutive retained eigenvalues.
    pub min_gap: f64,
    /// `min_gap < DEGENERATE_GAP`.
    pub degenerate: bool,
}

/// The perturbed spectrum as a function of `Δ`, with the noise matrix frozen.
#[derive(Debug, Clone)]
pub struct SpectrumObjective {
    base: Matrix,
    direction: Matrix,
    selection: SpectralSelection,
    degree_floor: f64,
    lanczos: LanczosConfig,
}

impl SpectrumObjective {
    pub fn new(
        g: &Graph,
        c: &ComplementDirection,
        selection: SpectralSelection,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        let n = g.n();
        if c.matrix().nrows() != n {
            return Err(Error::Dimension(
                "direction matrix does not match graph".into(),
            ));
        }
        Ok(Self {
            base: g.adjacency() + noise.matrix(n),
            direction: c.matrix().clone(),
            selection,
            degree_floor: DEGREE_FLOOR,
            lanczos: LanczosConfig::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.base.nrows()
    }

    pub fn selection(&self) -> SpectralSelection {
        self.selection
    }

    /// `A + noise + C∘Δ`.
    pub fn perturbed(&self, delta: &Matrix) -> Result<Matrix> {
        if delta.shape() != self.base.shape() {
            return Err(Error::Dimension(format!(
                "delta is {:?}, graph is {:?}",
                delta.shape(),
                self.base.shape()
            )));
        }
        Ok(&self.base + self.direction.component_mul(delta))
    }

    /// Retained eigenpairs of the perturbed normalized Laplacian.
    pub fn eigensystem(&self, delta: &Matrix) -> Result<EigenSystem> {
        let l = normalized_laplacian_of(&self.perturbed(delta)?, self.degree_floor);
        if self.selection.is_full_for(self.n()) {
            eig_full(&l)
        } else {
            let (es, report) = eig_selective_with(&l, self.selection, &self.lanczos)?;
            if report.fell_back {
                log::warn!(
                    "selective eigensolver fell back to dense: {:?}",
                    report.reason
                );
            }
            Ok(es)
        }
    }

    /// `Σ_k λ_k²` over the selection.
    pub fn value(&self, delta: &Matrix) -> Result<f64> {
        Ok(self.eigensystem(delta)?.values.iter().map(|l| l * l).sum())
    }

    pub fn value_and_grad(&self, delta: &Matrix) -> Result<(f64, Matrix, GradientReport)> {
        let es = self.eigensystem(delta)?;
        let value = es.values.iter().map(|l| l * l).sum();
        let weights: Vec<f64> = es.values.iter().map(|l| 2.0 * l).collect();
        let grad = self.weighted_grad(delta, &es, &weights)?;
        let min_gap = es.min_gap();
        let report = GradientReport {
            min_gap,
            degenerate: min_gap < DEGENERATE_GAP,
        };
        if report.degenerate {
            log::warn!("near-degenerate eigenvalues (gap {min_gap:e}); gradient may be unreliable");
        }
        Ok((value, grad, report))
    }

    /// `∂/∂Δ_ij Σ_k w_k λ_k` for the eigenpairs in `es`, with `Δ_ij` and `Δ_ji`
    /// moving together. The diagonal is zero.
    ///
    /// Per eigenpair, with `s = d̂^{-1/2}`:
    /// `∂λ/∂w_ij = −2 u_i u_j s_i s_j + (1 − λ)(u_i² s_i² + u_j² s_j²)`,
    /// where the degree terms vanish for nodes whose degree sits on the floor.
    pub fn weighted_grad(
        &self,
        delta: &Matrix,
        es: &EigenSystem,
        weights: &[f64],
    ) -> Result<Matrix> {
        if weights.len() != es.len() {
            return Err(Error::Dimension("one weight per eigenpair required".into()));
        }
        let a = self.perturbed(delta)?;
        let n = a.nrows();
        let deg = row_sums(&a);
        let s: Vec<f64> = deg
            .iter()
            .map(|&d| d.max(self.degree_floor).sqrt().recip())
            .collect();
        let active: Vec<f64> = deg
            .iter()
            .map(|&d| if d > self.degree_floor { 1.0 } else { 0.0 })
            .collect();

        let mut scaled = es.vectors.clone();
        for (k, &w) in weights.iter().enumerate() {
            scaled.column_mut(k).scale_mut(w);
        }
        let p = &scaled * es.vectors.transpose();
        let q: Vec<f64> = (0..n)
            .map(|i| {
                (0..es.len())
                    .map(|k| weights[k] * (1.0 - es.values[k]) * es.vectors[(i, k)].powi(2))
                    .sum()
            })
            .collect();

        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let dl = -2.0 * p[(i, j)] * s[i] * s[j]
                    + active[i] * q[i] * s[i] * s[i]
                    + active[j] * q[j] * s[j] * s[j];
                let v = self.direction[(i, j)] * dl;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

/// `L_GS(Δ) = Σ_k λ_k²` of `Lap(A + C∘Δ + noise)` over the selection.
pub fn spectrum_norm_sq(
    g: &Graph,
    c: &ComplementDirection,
    delta: &Matrix,
    sel: SpectralSelection,
    noise: &NoiseSpec,
) -> Result<f64> {
    SpectrumObjective::new(g, c, sel, noise)?.value(delta)
}

/// Gradient of [`spectrum_norm_sq`] in `Δ` plus a degeneracy report.
pub fn spectrum_norm_grad(
    g: &Graph,
    c: &ComplementDirection,
    delta: &Matrix,
    sel: SpectralSelection,
    noise: &NoiseSpec,
) -> Result<(Matrix, GradientReport)> {
    let (_, grad, report) = SpectrumObjective::new(g, c, sel, noise)?.value_and_grad(delta)?;
    Ok((grad, report))
}
