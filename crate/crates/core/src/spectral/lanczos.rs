//! Selective eigendecomposition by Lanczos iteration.
//!
//! Extremal eigenpairs are found one side at a time: the largest of `L`
//! directly and the smallest as the largest of `2I − L`. Each pass runs
//! Lanczos with full reorthogonalisation against both the current Krylov
//! basis and every locked Ritz vector; converged Ritz pairs are locked and
//! the next pass restarts in the deflated space. Once enough pairs are
//! locked, extra passes check that the deflated operator has nothing larger
//! left, which recovers repeated eigenvalues a single Krylov space cannot see.

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;

use super::{canonicalize_signs, check_symmetric, eig_full, EigenSystem, SpectralSelection};
use crate::rng::seeded;
use crate::{Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Ritz residual tolerance, relative to `max(1, ‖L‖_F)`.
    pub tol: f64,
    /// Iteration cap as a multiple of `n`.
    pub max_iter_factor: usize,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter_factor: 10,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectiveReport {
    /// `2K >= n`, so the dense solver was used directly.
    pub degenerate_selection: bool,
    /// Lanczos did not converge (or failed its residual check) and the dense solver was used.
    pub fell_back: bool,
    pub iterations: usize,
    pub reason: Option<String>,
}

pub fn eig_selective(l: &Matrix, sel: SpectralSelection) -> Result<(EigenSystem, SelectiveReport)> {
    eig_selective_with(l, sel, &LanczosConfig::default())
}

pub fn eig_selective_with(
    l: &Matrix,
    sel: SpectralSelection,
    cfg: &LanczosConfig,
) -> Result<(EigenSystem, SelectiveReport)> {
    check_symmetric(l)?;
    let n = l.nrows();
    let mut report = SelectiveReport::default();
    if sel.is_full_for(n) {
        report.degenerate_selection = true;
        return Ok((eig_full(l)?, report));
    }
    let k = sel.k();
    let scale = l.norm().max(1.0);
    let mut budget = cfg.max_iter_factor * n;
    let start_budget = budget;

    let shifted = Matrix::identity(n, n) * 2.0 - l;
    let low = top_pairs(&shifted, k, cfg, cfg.seed, &mut budget);
    let high = top_pairs(l, k, cfg, cfg.seed.wrapping_add(1), &mut budget);
    report.iterations = start_budget - budget;

    let (Some(low), Some(high)) = (low, high) else {
        log::warn!("Lanczos exhausted {start_budget} iterations; using the dense solver");
        report.fell_back = true;
        report.reason = Some("iteration limit reached".into());
        return Ok((super::select(&eig_full(l)?, sel), report));
    };

    let mut pairs: Vec<(f64, DVector<f64>)> = low
        .into_iter()
        .chain(high)
        .map(|(_, v)| {
            let lv = l * &v;
            (v.dot(&lv), v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vectors = Matrix::zeros(n, pairs.len());
    for (c, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(c, v);
    }
    canonicalize_signs(&mut vectors);
    let es = EigenSystem { values, vectors };

    let residual = es.max_residual(l);
    if residual > 1e-8 * scale || es.orthonormality_error() > 1e-10 {
        log::warn!("Lanczos residual {residual:e} too large; using the dense solver");
        report.fell_back = true;
        report.reason = Some(format!("residual check failed ({residual:e})"));
        return Ok((super::select(&eig_full(l)?, sel), report));
    }
    Ok((es, report))
}

/// Largest `count` eigenpairs of the symmetric `op`, descending, or `None`
/// once `budget` matrix-vector products are spent.
fn top_pairs(
    op: &Matrix,
    count: usize,
    cfg: &LanczosConfig,
    seed: u64,
    budget: &mut usize,
) -> Option<Vec<(f64, DVector<f64>)>> {
    let n = op.nrows();
    let tol = cfg.tol * op.norm().max(1.0);
    let mut rng = seeded(seed);
    let mut locked: Vec<(f64, DVector<f64>)> = Vec::new();

    loop {
        let verifying = locked.len() >= count;
        let free = n - locked.len();
        if free == 0 {
            break;
        }
        let need = if verifying { 1 } else { count - locked.len() };
        let found = lanczos_pass(op, &locked, need, tol, &mut rng, budget)?;
        if verifying {
            let floor = locked.last().map_or(f64::NEG_INFINITY, |p| p.0);
            match found.into_iter().next() {
                Some(p) if p.0 > floor + tol => {
                    locked.push(p);
                    locked.sort_by(|a, b| b.0.total_cmp(&a.0));
                    locked.truncate(count);
                }
                _ => break,
            }
        } else {
            if found.is_empty() {
                return None;
            }
            locked.extend(found);
            locked.sort_by(|a, b| b.0.total_cmp(&a.0));
        }
    }
    locked.truncate(count);
    Some(locked)
}

fn orthogonalize(w: &mut DVector<f64>, locked: &[(f64, DVector<f64>)], basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for (_, x) in locked {
            let c = x.dot(w);
            w.axpy(-c, x, 1.0);
        }
        for b in basis {
            let c = b.dot(w);
            w.axpy(-c, b, 1.0);
        }
    }
}

/// One restarted Lanczos run in the complement of `locked`. Returns up to
/// `need` converged top Ritz pairs.
fn lanczos_pass(
    op: &Matrix,
    locked: &[(f64, DVector<f64>)],
    need: usize,
    tol: f64,
    rng: &mut impl Rng,
    budget: &mut usize,
) -> Option<Vec<(f64, DVector<f64>)>> {
    let n = op.nrows();
    let free = n - locked.len();
    let breakdown = 1e-12 * op.norm().max(1.0);

    let mut start = DVector::zeros(n);
    for _ in 0..8 {
        start = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        orthogonalize(&mut start, locked, &[]);
        if start.norm() > 1e-8 {
            break;
        }
    }
    let norm = start.norm();
    if norm <= 1e-8 {
        return Some(Vec::new());
    }
    let mut basis = vec![start / norm];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for j in 0..free {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        let mut w = op * &basis[j];
        let alpha = basis[j].dot(&w);
        w.axpy(-alpha, &basis[j], 1.0);
        if j > 0 {
            w.axpy(-betas[j - 1], &basis[j - 1], 1.0);
        }
        orthogonalize(&mut w, locked, &basis);
        alphas.push(alpha);
        let beta = w.norm();
        let m = j + 1;
        let exhausted = beta <= breakdown || m == free;

        if exhausted || (m >= need && m % 4 == 0) {
            let mut t = Matrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let converged = if exhausted {
                m
            } else {
                order
                    .iter()
                    .take_while(|&&i| beta * eig.eigenvectors[(m - 1, i)].abs() <= tol)
                    .count()
            };
            if converged >= need || exhausted {
                let take = converged.min(need);
                let q = Matrix::from_columns(&basis);
                let out = order[..take]
                    .iter()
                    .map(|&i| {
                        let mut y = &q * eig.eigenvectors.column(i);
                        y /= y.norm();
                        (eig.eigenvalues[i], y)
                    })
                    .collect();
                return Some(out);
            }
        }
        basis.push(w / beta);
        betas.push(beta);
    }
    Some(Vec::new())
}
