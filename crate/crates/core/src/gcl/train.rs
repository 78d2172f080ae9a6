//! Two-branch contrastive training loop.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::feature_mask;
use super::model::{ConvKind, EncoderState, Pool, ReadoutState};
use super::objective::{batch_loss, Gradients, NegativeMode, NegativeScope, ViewPair};
use crate::augment::{sample_view_with, ProbabilityMatrix};
use crate::graph::{complement_direction, Graph};
use crate::io::{fmt_f64, row_major, write_table};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Self::Gd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::InvalidParameter(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub feature_mask_ratio: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub conv: ConvKind,
    pub gin_epsilon: f64,
    pub pool: Pool,
    pub optimizer: Optimizer,
    pub negatives: NegativeMode,
    pub scope: NegativeScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.01,
            feature_mask_ratio: 0.2,
            seed: 0,
            batch_size: 1,
            hidden_dim: 16,
            layers: 2,
            conv: ConvKind::Gcn,
            gin_epsilon: 0.0,
            pool: Pool::Mean,
            optimizer: Optimizer::Gd,
            negatives: NegativeMode::Corrupted,
            scope: NegativeScope::Graph,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.feature_mask_ratio) {
            return bad("feature mask ratio must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.hidden_dim == 0 || self.layers == 0 {
            return bad("batch size, hidden dim and layer count must be positive");
        }
        Ok(())
    }

    fn dims(&self, in_dim: usize) -> Vec<usize> {
        std::iter::once(in_dim)
            .chain(std::iter::repeat_n(self.hidden_dim, self.layers))
            .collect()
    }

    /// Freshly initialised parameters for `in_dim` input features.
    pub fn init_params(&self, in_dim: usize) -> Result<(EncoderState, ReadoutState)> {
        let enc = EncoderState::new(
            self.conv,
            &self.dims(in_dim),
            self.gin_epsilon,
            derive_seed(self.seed, u64::MAX),
        )?;
        let r = ReadoutState::new(
            self.pool,
            self.hidden_dim,
            derive_seed(self.seed, u64::MAX - 1),
        );
        Ok((enc, r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamState {
    #[serde(with = "row_major::vec")]
    m: Vec<Matrix>,
    #[serde(with = "row_major::vec")]
    v: Vec<Matrix>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(params: &[&Matrix]) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.nrows(), p.ncols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// Trained parameters plus everything needed to resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub encoder: EncoderState,
    pub readout: ReadoutState,
    /// Epochs completed.
    pub epoch: usize,
    /// Mean batch loss per completed epoch, evaluated before that epoch's updates.
    pub losses: Vec<f64>,
    adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.encoder.validate()?;
        Ok(c)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `epoch, loss` with 1-based epochs.
    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_table(
            path,
            &["epoch", "loss"],
            self.losses
                .iter()
                .enumerate()
                .map(|(e, l)| vec![(e + 1).to_string(), fmt_f64(*l)]),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
}

impl TrainOutcome {
    pub fn encoder(&self) -> &EncoderState {
        &self.checkpoint.encoder
    }

    pub fn readout(&self) -> &ReadoutState {
        &self.checkpoint.readout
    }

    pub fn losses(&self) -> &[f64] {
        &self.checkpoint.losses
    }
}

fn apply_update(
    enc: &mut EncoderState,
    r: &mut ReadoutState,
    grads: &Gradients,
    lr: f64,
    adam: &mut Option<AdamState>,
) {
    let mut params: Vec<&mut Matrix> = enc.layer_weights.iter_mut().collect();
    params.push(&mut r.proj);
    let gs: Vec<&Matrix> = grads
        .layers
        .iter()
        .chain(std::iter::once(&grads.proj))
        .collect();
    match adam {
        None => {
            for (p, g) in params.into_iter().zip(gs) {
                *p -= g * lr;
            }
        }
        Some(state) => {
            state.t += 1;
            let c1 = 1.0 - BETA1.powi(state.t as i32);
            let c2 = 1.0 - BETA2.powi(state.t as i32);
            for (k, (p, g)) in params.into_iter().zip(gs).enumerate() {
                let m = &mut state.m[k];
                let v = &mut state.v[k];
                for idx in 0..g.len() {
                    m[idx] = BETA1 * m[idx] + (1.0 - BETA1) * g[idx];
                    v[idx] = BETA2 * v[idx] + (1.0 - BETA2) * g[idx] * g[idx];
                    p[idx] -= lr * (m[idx] / c1) / ((v[idx] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Trains a shared encoder and readout on two-branch views of every graph.
///
/// `branches[g]` holds graph `g`'s flip-probability matrices for the two
/// branches. Each epoch samples one view per branch per graph, masks features
/// independently per branch, and takes one parameter step per batch. All
/// randomness for epoch `e` derives from `(seed, e)`, so resuming from a
/// checkpoint reproduces an uninterrupted run exactly.
pub fn train(
    gs: &[Graph],
    features: &[Matrix],
    branches: &[(ProbabilityMatrix, ProbabilityMatrix)],
    cfg: &TrainConfig,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if gs.is_empty() || gs.len() != features.len() || gs.len() != branches.len() {
        return Err(Error::Dimension(
            "graphs, features and schemes must align and be nonempty".into(),
        ));
    }
    for ((g, x), (d1, d2)) in gs.iter().zip(features).zip(branches) {
        if x.nrows() != g.n() || d1.n() != g.n() || d2.n() != g.n() {
            return Err(Error::Dimension(
                "feature or scheme size differs from graph size".into(),
            ));
        }
        if x.ncols() != features[0].ncols() {
            return Err(Error::Dimension(
                "all graphs need the same feature width".into(),
            ));
        }
    }
    let directions = gs
        .iter()
        .map(complement_direction)
        .collect::<Result<Vec<_>>>()?;

    let mut ck = match resume {
        Some(ck) => {
            if ck.config.conv != cfg.conv || ck.encoder.in_dim() != features[0].ncols() {
                return Err(Error::InvalidParameter(
                    "checkpoint does not match the training setup".into(),
                ));
            }
            ck
        }
        None => {
            let (encoder, readout) = cfg.init_params(features[0].ncols())?;
            let adam = (cfg.optimizer == Optimizer::Adam).then(|| {
                let mut ps: Vec<&Matrix> = encoder.layer_weights.iter().collect();
                ps.push(&readout.proj);
                AdamState::new(&ps)
            });
            Checkpoint {
                config: cfg.clone(),
                encoder,
                readout,
                epoch: 0,
                losses: Vec::new(),
                adam,
            }
        }
    };
    ck.config = cfg.clone();

    let corrupted = cfg.negatives == NegativeMode::Corrupted;
    while ck.epoch < cfg.epochs {
        let es = derive_seed(cfg.seed, ck.epoch as u64);
        let sub = |k: u64| derive_seed(es, k);
        let mut order: Vec<usize> = (0..gs.len()).collect();
        order.shuffle(&mut seeded(sub(0)));

        let mut pairs = Vec::with_capacity(gs.len());
        for gi in 0..gs.len() {
            let base = 1 + 8 * gi as u64;
            let (d1, d2) = &branches[gi];
            let v1 = sample_view_with(&gs[gi], &directions[gi], d1, sub(base))?;
            let v2 = sample_view_with(&gs[gi], &directions[gi], d2, sub(base + 1))?;
            let x1 = feature_mask(&features[gi], cfg.feature_mask_ratio, sub(base + 2))?;
            let x2 = feature_mask(&features[gi], cfg.feature_mask_ratio, sub(base + 3))?;
            let mut pair = ViewPair::new((&v1, &v2), (&x1, &x2), &ck.encoder)?;
            if corrupted {
                let n = gs[gi].n();
                let shuffle = |s| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut seeded(s));
                    p
                };
                pair.shuffles = Some([shuffle(sub(base + 4)), shuffle(sub(base + 5))]);
            }
            pairs.push(pair);
        }

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<ViewPair> = chunk.iter().map(|&g| pairs[g].clone()).collect();
            let (loss, grads) = batch_loss(
                &batch,
                &ck.encoder,
                &ck.readout,
                cfg.negatives,
                cfg.scope,
                true,
            )?;
            let grads = grads.expect("gradients requested");
            if !loss.is_finite() || !grads.norm().is_finite() {
                return Err(Error::Numerical(format!(
                    "training diverged at epoch {} (loss {loss}, gradient norm {}); try a smaller learning rate",
                    ck.epoch + 1,
                    grads.norm()
                )));
            }
            apply_update(
                &mut ck.encoder,
                &mut ck.readout,
                &grads,
                cfg.lr,
                &mut ck.adam,
            );
            epoch_loss += loss;
            batches += 1;
        }
        ck.losses.push(epoch_loss / batches as f64);
        ck.epoch += 1;
        log::debug!("epoch {} loss {:.6}", ck.epoch, ck.losses.last().unwrap());
    }
    Ok(TrainOutcome { checkpoint: ck })
}
