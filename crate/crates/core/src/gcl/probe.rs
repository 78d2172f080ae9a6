//! Linear probes on frozen representations.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Matrix, Result};

/// Regularisation weights tried on the validation split.
pub const L2_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

const MAX_ITERS: usize = 5000;
const GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Test accuracy (logistic) or test RMSE (ridge).
    pub test_metric: f64,
    pub val_metric: f64,
    pub l2_weight: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
}

/// Shuffled 60/20/20 train/validation/test index split.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let n_train = (0.6 * n as f64).round() as usize;
    let n_val = (0.2 * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidParameter(format!(
            "{n} samples are too few for a 60/20/20 split"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok((idx, val, test))
}

fn rows(h: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), h.ncols(), |i, j| h[(idx[i], j)])
}

/// Standardises columns with the training rows' mean and std and appends a bias column.
fn design(h: &Matrix, train: &[usize]) -> Matrix {
    let t = train.len() as f64;
    let d = h.ncols();
    let mut out = Matrix::from_element(h.nrows(), d + 1, 1.0);
    for c in 0..d {
        let mean = train.iter().map(|&i| h[(i, c)]).sum::<f64>() / t;
        let var = train
            .iter()
            .map(|&i| (h[(i, c)] - mean).powi(2))
            .sum::<f64>()
            / t;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..h.nrows() {
            out[(i, c)] = (h[(i, c)] - mean) / sd;
        }
    }
    out
}

/// `(1/n)[Σ CE + λ/2 ‖W‖²]` (bias row unpenalised) and its gradient.
fn logistic_objective(x: &Matrix, y: &[usize], w: &Matrix, lambda: f64) -> (f64, Matrix) {
    let n = x.nrows() as f64;
    let logits = x * w;
    let mut resid = Matrix::zeros(logits.nrows(), logits.ncols());
    let mut loss = 0.0;
    for i in 0..logits.nrows() {
        let row = logits.row(i);
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[y[i]];
        for k in 0..logits.ncols() {
            resid[(i, k)] = (row[k] - lse).exp() - if k == y[i] { 1.0 } else { 0.0 };
        }
    }
    let mut grad = x.transpose() * resid;
    let bias = w.nrows() - 1;
    let mut reg = 0.0;
    for r in 0..bias {
        for k in 0..w.ncols() {
            reg += w[(r, k)].powi(2);
            grad[(r, k)] += lambda * w[(r, k)];
        }
    }
    ((loss + 0.5 * lambda * reg) / n, grad / n)
}

/// Nesterov-accelerated gradient descent with gradient-based restarts.
fn fit_logistic(x: &Matrix, y: &[usize], classes: usize, lambda: f64) -> Matrix {
    let n = x.nrows() as f64;
    let gram = x.transpose() * x;
    let top = gram.symmetric_eigenvalues().max().max(0.0);
    let step = 1.0 / (0.5 * top / n + lambda / n + 1e-12);
    let mut w = Matrix::zeros(x.ncols(), classes);
    let mut prev = w.clone();
    let mut t = 1.0f64;
    for _ in 0..MAX_ITERS {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let v = &w + (&w - &prev) * ((t - 1.0) / t_next);
        let (_, g) = logistic_objective(x, y, &v, lambda);
        let next = &v - &g * step;
        if (&next - &w).dot(&g) > 0.0 {
            t = 1.0;
        } else {
            t = t_next;
        }
        prev = std::mem::replace(&mut w, next);
        let (_, gw) = logistic_objective(x, y, &w, lambda);
        if gw.norm() < GRAD_TOL {
            break;
        }
    }
    w
}

fn accuracy(x: &Matrix, y: &[usize], w: &Matrix) -> f64 {
    let logits = x * w;
    let hits = (0..x.nrows())
        .filter(|&i| logits.row(i).transpose().argmax().0 == y[i])
        .count();
    hits as f64 / x.nrows() as f64
}

/// Multinomial logistic probe; `l2_grid` is searched on the validation split.
pub fn linear_probe(
    h: &Matrix,
    labels: &[usize],
    l2_grid: &[f64],
    split_seed: u64,
) -> Result<ProbeReport> {
    if labels.len() != h.nrows() {
        return Err(Error::Dimension(
            "one label per representation row is required".into(),
        ));
    }
    if l2_grid.is_empty() || l2_grid.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidParameter(
            "l2 grid must be nonempty and nonnegative".into(),
        ));
    }
    let (train, val, test) = split_indices(h.nrows(), split_seed)?;
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let mut seen = y_train.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(Error::InvalidParameter(
            "training split contains a single class".into(),
        ));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let x = design(h, &train);
    let (x_train, x_val, x_test) = (rows(&x, &train), rows(&x, &val), rows(&x, &test));
    let y_val: Vec<usize> = val.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();

    let mut best: Option<(f64, f64, Matrix)> = None;
    for &lambda in l2_grid {
        let w = fit_logistic(&x_train, &y_train, classes, lambda);
        let acc = accuracy(&x_val, &y_val, &w);
        if best.as_ref().is_none_or(|(a, _, _)| acc > *a) {
            best = Some((acc, lambda, w));
        }
    }
    let (val_metric, l2_weight, w) = best.expect("nonempty grid");
    Ok(ProbeReport {
        test_metric: accuracy(&x_test, &y_test, &w),
        val_metric,
        l2_weight,
        train_size: train.len(),
        val_size: val.len(),
        test_size: test.len(),
    })
}

/// Ridge fit on centred data with an unpenalised intercept.
fn fit_ridge(x: &Matrix, y: &DVector<f64>, lambda: f64) -> Result<(DVector<f64>, f64)> {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_fn(x.ncols(), |c, _| x.column(c).sum() / n);
    let y_mean = y.sum() / n;
    let xc = Matrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - x_mean[j]);
    let yc = y.add_scalar(-y_mean);
    let mut a = xc.transpose() * &xc;
    for k in 0..a.nrows() {
        a[(k, k)] += lambda;
    }
    let rhs = xc.transpose() * yc;
    let beta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            a.pseudo_inverse(1e-12)
                .map_err(|e| Error::Numerical(e.to_string()))?
                * rhs
        }
    };
    let intercept = y_mean - x_mean.dot(&beta);
    Ok((beta, intercept))
}

fn rmse(x: &Matrix, y: &DVector<f64>, beta: &DVector<f64>, b: f64) -> f64 {
    let pred = x * beta;
    let mse = (0..x.nrows())
        .map(|i| (pred[i] + b - y[i]).powi(2))
        .sum::<f64>()
        / x.nrows() as f64;
    mse.sqrt()
}

/// Ridge regression probe; reports test RMSE for the weight with the lowest validation RMSE.
pub fn ridge_probe(
    h: &Matrix,
    targets: &[f64],
    l2_grid: &[f64],
    split_seed: u64,
) -> Result<ProbeReport> {
    if targets.len() != h.nrows() {
        return Err(Error::Dimension(
            "one target per representation row is required".into(),
        ));
    }
    if l2_grid.is_empty() || l2_grid.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidParameter(
            "l2 grid must be nonempty and nonnegative".into(),
        ));
    }
    let (train, val, test) = split_indices(h.nrows(), split_seed)?;
    let pick = |idx: &[usize]| {
        (
            rows(h, idx),
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| targets[i])),
        )
    };
    let (x_train, y_train) = pick(&train);
    let (x_val, y_val) = pick(&val);
    let (x_test, y_test) = pick(&test);

    let mut best: Option<(f64, f64, DVector<f64>, f64)> = None;
    for &lambda in l2_grid {
        let (beta, b) = fit_ridge(&x_train, &y_train, lambda)?;
        let e = rmse(&x_val, &y_val, &beta, b);
        if best.as_ref().is_none_or(|(v, ..)| e < *v) {
            best = Some((e, lambda, beta, b));
        }
    }
    let (val_metric, l2_weight, beta, b) = best.expect("nonempty grid");
    Ok(ProbeReport {
        test_metric: rmse(&x_test, &y_test, &beta, b),
        val_metric,
        l2_weight,
        train_size: train.len(),
        val_size: val.len(),
        test_size: test.len(),
    })
}
