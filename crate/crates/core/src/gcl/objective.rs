//! Cross-level InfoNCE between node representations and graph summaries.
//!
//! For one graph with views `a, b`, node reps `H^a, H^b` and summaries
//! `z^a, z^b`, the loss is `−(1/n) Σ_i [I(H^a_i, z^b) + I(H^b_i, z^a)]` with
//! `I(h, z) = cos(h, z) − log Σ_j exp(cos(h̃_j, z))`. Batch losses average
//! over graphs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::{
    encode, encode_backward, readout, readout_backward, EncoderState, ForwardCache, Propagation,
    ReadoutState,
};
use crate::graph::Graph;
use crate::{Error, Matrix, Result};

/// Where the negatives `h̃_j` in `I(H^a_i, z^b)` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// All node reps of view `a`, the positive's own view.
    ///
    /// The negative set then contains every positive, so each direction is
    /// bounded below by `log n` with equality whenever all cosines agree.
    SameView,
    /// All node reps of view `b`, the summary's view.
    OppositeView,
    /// Node reps of view `a` recomputed on row-shuffled features. Default for training.
    Corrupted,
}

/// Whether negatives are drawn from the positive's graph or from every graph in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeScope {
    Graph,
    Batch,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine of a zero vector treated as 0");
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// `cos(a, b)` with its gradients in `a` and `b`.
fn cosine_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return (0.0, vec![0.0; a.len()], vec![0.0; b.len()]);
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    let da = a
        .iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - c * x / (na * na))
        .collect();
    let db = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / (na * nb) - c * y / (nb * nb))
        .collect();
    (c, da, db)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `cos(h, z) − log Σ_j exp(cos(negatives_j, z))`; `negatives` holds one rep per row.
pub fn infonce_mi(h: &[f64], z: &[f64], negatives: &Matrix) -> f64 {
    let pos = cosine(h, z);
    let neg: Vec<f64> = negatives
        .row_iter()
        .map(|r| cosine(r.transpose().as_slice(), z))
        .collect();
    pos - log_sum_exp(&neg)
}

fn row(m: &Matrix, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// `−(1/n) Σ_i cos(pos_i, z) + LSE_j cos(neg_j, z)` and its gradients.
///
/// Since the negative set does not depend on `i`, the per-node log-sum-exp
/// terms collapse into one.
fn directional_term(
    pos: &Matrix,
    z: &DVector<f64>,
    negs: &[&Matrix],
    grads: Option<(&mut Matrix, &mut DVector<f64>, &mut [Matrix])>,
) -> f64 {
    let n = pos.nrows() as f64;
    let zs = z.as_slice();
    let mut loss = 0.0;
    let mut pos_parts = Vec::with_capacity(pos.nrows());
    for i in 0..pos.nrows() {
        let (c, da, db) = cosine_grad(&row(pos, i), zs);
        loss -= c / n;
        pos_parts.push((da, db));
    }
    let mut neg_parts = Vec::new();
    let mut cos_neg = Vec::new();
    for (k, m) in negs.iter().enumerate() {
        for j in 0..m.nrows() {
            let (c, da, db) = cosine_grad(&row(m, j), zs);
            cos_neg.push(c);
            neg_parts.push((k, j, da, db));
        }
    }
    let lse = log_sum_exp(&cos_neg);
    loss += lse;

    if let Some((d_pos, d_z, d_negs)) = grads {
        for (i, (da, db)) in pos_parts.iter().enumerate() {
            for c in 0..da.len() {
                d_pos[(i, c)] -= da[c] / n;
                d_z[c] -= db[c] / n;
            }
        }
        for ((k, j, da, db), c) in neg_parts.iter().zip(&cos_neg) {
            let w = (c - lse).exp();
            for col in 0..da.len() {
                d_negs[*k][(*j, col)] += w * da[col];
                d_z[col] += w * db[col];
            }
        }
    }
    loss
}

/// Node and graph representations of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    pub node_reps: Matrix,
    pub graph_rep: DVector<f64>,
}

/// Loss of one graph's pair of views from precomputed representations.
///
/// `corrupted` supplies per-view negatives for [`NegativeMode::Corrupted`].
pub fn contrastive_loss(
    a: &Representations,
    b: &Representations,
    mode: NegativeMode,
    corrupted: Option<(&Matrix, &Matrix)>,
) -> Result<f64> {
    let (neg_a, neg_b) = match mode {
        NegativeMode::SameView => (&a.node_reps, &b.node_reps),
        NegativeMode::OppositeView => (&b.node_reps, &a.node_reps),
        NegativeMode::Corrupted => corrupted.ok_or_else(|| {
            Error::InvalidParameter("corrupted negatives require corrupted reps".into())
        })?,
    };
    Ok(directional_term(&a.node_reps, &b.graph_rep, &[neg_a], None)
        + directional_term(&b.node_reps, &a.graph_rep, &[neg_b], None))
}

/// One graph's two augmented views with their (masked) features.
#[derive(Debug, Clone)]
pub struct ViewPair {
    pub prop: [Propagation; 2],
    pub features: [Matrix; 2],
    /// Row permutations of the features, used for corrupted negatives.
    pub shuffles: Option<[Vec<usize>; 2]>,
}

impl ViewPair {
    pub fn new(
        views: (&Graph, &Graph),
        features: (&Matrix, &Matrix),
        enc: &EncoderState,
    ) -> Result<Self> {
        if views.0.n() != views.1.n() {
            return Err(Error::Dimension("views differ in node count".into()));
        }
        Ok(Self {
            prop: [
                Propagation::new(views.0, enc.conv, enc.gin_epsilon),
                Propagation::new(views.1, enc.conv, enc.gin_epsilon),
            ],
            features: [features.0.clone(), features.1.clone()],
            shuffles: None,
        })
    }
}

fn permute_rows(x: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(perm[i], j)])
}

/// Parameter gradients with the same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Matrix>,
    pub proj: Matrix,
}

impl Gradients {
    fn zeros(enc: &EncoderState, r: &ReadoutState) -> Self {
        Self {
            layers: enc
                .layer_weights
                .iter()
                .map(|w| Matrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            proj: Matrix::zeros(r.proj.nrows(), r.proj.ncols()),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.layers.iter().map(|m| m.norm_squared()).sum::<f64>() + self.proj.norm_squared())
            .sqrt()
    }
}

struct Forwarded {
    reps: Vec<Matrix>,
    caches: Vec<ForwardCache>,
    inputs: Vec<(usize, usize)>,
    summaries: Vec<DVector<f64>>,
}

// Slot layout per graph: 0, 1 = views; 2, 3 = corrupted views.
fn forward_pair(
    pair: &ViewPair,
    enc: &EncoderState,
    r: &ReadoutState,
    corrupted: bool,
) -> Result<Forwarded> {
    let mut out = Forwarded {
        reps: Vec::new(),
        caches: Vec::new(),
        inputs: Vec::new(),
        summaries: Vec::new(),
    };
    for v in 0..2 {
        let (h, cache) = encode(&pair.prop[v], &pair.features[v], enc)?;
        out.summaries.push(readout(&h, r)?);
        out.reps.push(h);
        out.caches.push(cache);
        out.inputs.push((v, v));
    }
    if corrupted {
        let shuffles = pair.shuffles.as_ref().ok_or_else(|| {
            Error::InvalidParameter("corrupted negatives need feature shuffles".into())
        })?;
        for v in 0..2 {
            let x = permute_rows(&pair.features[v], &shuffles[v]);
            let (h, cache) = encode(&pair.prop[v], &x, enc)?;
            out.reps.push(h);
            out.caches.push(cache);
            out.inputs.push((v, v + 2));
        }
    }
    Ok(out)
}

/// Mean loss over `batch` and, when `with_grad`, its parameter gradients.
pub fn batch_loss(
    batch: &[ViewPair],
    enc: &EncoderState,
    r: &ReadoutState,
    mode: NegativeMode,
    scope: NegativeScope,
    with_grad: bool,
) -> Result<(f64, Option<Gradients>)> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let corrupted = mode == NegativeMode::Corrupted;
    let fwd: Vec<Forwarded> = batch
        .iter()
        .map(|p| forward_pair(p, enc, r, corrupted))
        .collect::<Result<_>>()?;

    // negative slot for the term whose positive comes from view `v`
    let neg_slot = |v: usize| match mode {
        NegativeMode::SameView => v,
        NegativeMode::OppositeView => 1 - v,
        NegativeMode::Corrupted => v + 2,
    };
    let mut d_reps: Vec<Vec<Matrix>> = fwd
        .iter()
        .map(|f| {
            f.reps
                .iter()
                .map(|h| Matrix::zeros(h.nrows(), h.ncols()))
                .collect()
        })
        .collect();
    let mut d_z: Vec<Vec<DVector<f64>>> = fwd
        .iter()
        .map(|f| {
            f.summaries
                .iter()
                .map(|z| DVector::zeros(z.len()))
                .collect()
        })
        .collect();

    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for gi in 0..fwd.len() {
        for v in 0..2 {
            let slot = neg_slot(v);
            let sources: Vec<(usize, usize)> = match scope {
                NegativeScope::Graph => vec![(gi, slot)],
                NegativeScope::Batch => (0..fwd.len()).map(|g| (g, slot)).collect(),
            };
            let negs: Vec<&Matrix> = sources.iter().map(|&(g, s)| &fwd[g].reps[s]).collect();
            let z = &fwd[gi].summaries[1 - v];
            if with_grad {
                let mut d_pos = Matrix::zeros(fwd[gi].reps[v].nrows(), fwd[gi].reps[v].ncols());
                let mut dz = DVector::zeros(z.len());
                let mut d_negs: Vec<Matrix> = negs
                    .iter()
                    .map(|m| Matrix::zeros(m.nrows(), m.ncols()))
                    .collect();
                total += directional_term(
                    &fwd[gi].reps[v],
                    z,
                    &negs,
                    Some((&mut d_pos, &mut dz, &mut d_negs)),
                );
                d_reps[gi][v] += d_pos * scale;
                d_z[gi][1 - v] += dz * scale;
                for (&(g, s), d) in sources.iter().zip(d_negs) {
                    d_reps[g][s] += d * scale;
                }
            } else {
                total += directional_term(&fwd[gi].reps[v], z, &negs, None);
            }
        }
    }
    let loss = total * scale;
    if !with_grad {
        return Ok((loss, None));
    }

    let mut grads = Gradients::zeros(enc, r);
    for (gi, f) in fwd.iter().enumerate() {
        for v in 0..2 {
            let (d_proj, d_h) = readout_backward(&f.reps[v], r, &d_z[gi][v]);
            grads.proj += d_proj;
            d_reps[gi][v] += d_h;
        }
        for (s, &(view, _)) in f.inputs.iter().enumerate() {
            let dw = encode_backward(&batch[gi].prop[view], &f.caches[s], enc, &d_reps[gi][s]);
            for (g, d) in grads.layers.iter_mut().zip(dw) {
                *g += d;
            }
        }
    }
    Ok((loss, Some(grads)))
}

/// Loss for one graph's pair of views under same-view or opposite-view negatives.
pub fn gcl_loss(
    views: (&Graph, &Graph),
    x_views: (&Matrix, &Matrix),
    enc: &EncoderState,
    r: &ReadoutState,
    mode: NegativeMode,
) -> Result<f64> {
    if mode == NegativeMode::Corrupted {
        return Err(Error::InvalidParameter(
            "corrupted negatives need a ViewPair with shuffles".into(),
        ));
    }
    let pair = ViewPair::new(views, x_views, enc)?;
    Ok(batch_loss(&[pair], enc, r, mode, NegativeScope::Graph, false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn infonce_closed_forms() {
        let h = [0.3, -0.2, 0.9];
        let one = Matrix::from_row_slice(1, 3, &h);
        assert_abs_diff_eq!(infonce_mi(&h, &[1.0, 1.0, 0.5], &one), 0.0, epsilon = 1e-15);

        let n = 7;
        let same = Matrix::from_fn(n, 3, |_, j| h[j]);
        assert_abs_diff_eq!(infonce_mi(&h, &h, &same), -(n as f64).ln(), epsilon = 1e-12);

        let z = [1.0, 0.0];
        let mut negs = Matrix::from_element(n, 2, 0.0);
        negs[(0, 0)] = 2.0;
        for j in 1..n {
            negs[(j, 0)] = -1.5;
        }
        let want = 1.0 - (1f64.exp() + (n as f64 - 1.0) * (-1f64).exp()).ln();
        assert_abs_diff_eq!(infonce_mi(&[2.0, 0.0], &z, &negs), want, epsilon = 1e-12);
    }

    #[test]
    fn uniform_reps_give_two_log_n() {
        let n = 5;
        let h = Matrix::from_fn(n, 3, |_, j| [0.5, 1.0, -2.0][j]);
        let reps = Representations {
            node_reps: h.clone(),
            graph_rep: DVector::from_row_slice(&[0.5, 1.0, -2.0]),
        };
        for mode in [NegativeMode::SameView, NegativeMode::OppositeView] {
            let l = contrastive_loss(&reps, &reps, mode, None).unwrap();
            assert_abs_diff_eq!(l, 2.0 * (n as f64).ln(), epsilon = 1e-12);
        }
        assert!(contrastive_loss(&reps, &reps, NegativeMode::Corrupted, None).is_err());
    }

    #[test]
    fn zero_vector_cosine_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }
}
