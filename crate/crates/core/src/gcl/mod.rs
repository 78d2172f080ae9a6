//! Desk-scale graph contrastive learning.
//!
//! Two augmented views of each graph are encoded by a shared GCN or GIN,
//! pooled into graph summaries, and trained with a cross-level InfoNCE loss
//! (node reps of one view against the summary of the other). Gradients are
//! hand-written and checked against finite differences in the oracle.
//! Frozen representations are scored with logistic or ridge probes.

mod model;
mod objective;
mod probe;
mod train;

pub use model::{
    encode, encode_backward, forward, gcn_forward, gin_forward, readout, ConvKind, EncoderState,
    ForwardCache, Pool, Propagation, ReadoutState,
};
pub use objective::{
    batch_loss, contrastive_loss, cosine, gcl_loss, infonce_mi, Gradients, NegativeMode,
    NegativeScope, Representations, ViewPair,
};
pub use probe::{linear_probe, ridge_probe, split_indices, ProbeReport, L2_GRID};
pub use train::{train, Checkpoint, Optimizer, TrainConfig, TrainOutcome};

use rand::seq::SliceRandom;

use crate::graph::{degrees, Graph};
use crate::rng::seeded;
use crate::{Error, Matrix, Result};

/// Number of one-hot degree bins; degrees at or above `DEGREE_BINS − 1` share the last bin.
pub const DEGREE_BINS: usize = 32;

/// One-hot degree features, `n × 32`.
pub fn one_hot_degree(g: &Graph) -> Matrix {
    let d = degrees(g);
    let mut x = Matrix::zeros(g.n(), DEGREE_BINS);
    for (i, &di) in d.0.iter().enumerate() {
        let bin = (di.round().max(0.0) as usize).min(DEGREE_BINS - 1);
        x[(i, bin)] = 1.0;
    }
    x
}

/// Zeroes `round(σ_f·d)` feature columns chosen uniformly at random.
pub fn feature_mask(x: &Matrix, sigma_f: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&sigma_f) {
        return Err(Error::InvalidParameter(format!(
            "mask ratio must lie in [0, 1), got {sigma_f}"
        )));
    }
    let d = x.ncols();
    let k = (sigma_f * d as f64).round() as usize;
    let mut cols: Vec<usize> = (0..d).collect();
    cols.shuffle(&mut seeded(seed));
    let mut out = x.clone();
    for &c in &cols[..k] {
        out.column_mut(c).fill(0.0);
    }
    Ok(out)
}

/// Columns zeroed by [`feature_mask`] for this seed, sorted.
pub fn masked_columns(d: usize, sigma_f: f64, seed: u64) -> Vec<usize> {
    let k = (sigma_f * d as f64).round() as usize;
    let mut cols: Vec<usize> = (0..d).collect();
    cols.shuffle(&mut seeded(seed));
    let mut out = cols[..k.min(d)].to_vec();
    out.sort_unstable();
    out
}
