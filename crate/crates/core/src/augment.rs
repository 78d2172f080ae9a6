//! Projected gradient optimisation of Bernoulli flip-probability matrices.
//!
//! A scheme perturbs `A` through `A + C∘Δ`, where `Δ` lives in
//! `S = {Δ ∈ [0,1]^{n×n} : ‖Δ‖₁ ≤ ε}` (both triangles counted). Three
//! objectives are supported:
//!
//! - **single**: ascend `‖λ(Δ₁) − λ(0)‖²`;
//! - **double**: ascend `‖λ(Δ₁) − λ(Δ₂)‖²`, alternating one step per branch;
//! - **opposite**: ascend `Σλ(Δ₁)²` and descend `Σλ(Δ₂)²` independently.
//!
//! Eigenvalues are paired by sorted index throughout.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{
    apply_perturbation, complement_direction, ComplementDirection, Graph, PerturbationSample,
};
use crate::io::{fmt_f64, write_table};
use crate::rng::{derive_seed, seeded};
use crate::spectral::{EigenSystem, SpectralSelection, SpectrumObjective};
use crate::{Error, Matrix, Result};

pub use crate::spectral::NoiseSpec;

/// Budget slack tolerated by [`ProbabilityMatrix::new`].
pub const BUDGET_TOL: f64 = 1e-8;

/// Symmetric flip probabilities with zero diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Matrix);

impl ProbabilityMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    /// Validates the invariants; `epsilon` additionally checks the budget.
    pub fn new(m: Matrix, epsilon: Option<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("probability matrix must be square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let v = m[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != m[(j, i)] {
                    return Err(Error::Domain(format!(
                        "invalid probability at ({i},{j}): {v}"
                    )));
                }
            }
        }
        let pm = Self(m);
        if let Some(eps) = epsilon {
            if pm.l1() > eps + BUDGET_TOL {
                return Err(Error::Domain(format!("budget {} exceeds {eps}", pm.l1())));
            }
        }
        Ok(pm)
    }

    /// Builds from upper-triangle `(i, j, p)` entries, mirroring each.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Matrix::zeros(n, n);
        for &(i, j, p) in triplets {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { id: i.max(j), n });
            }
            m[(i, j)] = p;
            m[(j, i)] = p;
        }
        Self::new(m, None)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Entrywise L1 norm over both triangles.
    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Upper-triangle entries above `1e-12`, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = self.0[(i, j)];
                if p > 1e-12 {
                    out.push((i, j, p));
                }
            }
        }
        out
    }
}

/// Euclidean projection onto `[0,1]^{n×n} ∩ {‖s‖₁ ≤ ε}` among symmetric,
/// zero-diagonal matrices.
///
/// Each slot is represented by the mean of its two triangle entries. When
/// the clipped matrix overshoots the budget, the shift `μ` in
/// `2 Σ_{i<j} clip(a_ij − μ, 0, 1) = ε` is found by bisection and the
/// feasible end of the bracket is returned.
pub fn project_to_s(raw: &Matrix, epsilon: f64) -> Result<ProbabilityMatrix> {
    if !raw.is_square() {
        return Err(Error::Dimension("raw matrix must be square".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "budget must be >= 0, got {epsilon}"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "non-finite entry in projection input".into(),
        ));
    }
    let n = raw.nrows();
    let mut slots = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            slots.push(0.5 * (raw[(i, j)] + raw[(j, i)]));
        }
    }
    let mass =
        |mu: f64| -> f64 { 2.0 * slots.iter().map(|a| (a - mu).clamp(0.0, 1.0)).sum::<f64>() };

    let mu = if mass(0.0) <= epsilon {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = slots.iter().copied().fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let m = mass(mid);
            if m > epsilon {
                lo = mid;
            } else {
                hi = mid;
            }
            if (m - epsilon).abs() <= 1e-10 && m <= epsilon {
                break;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                break;
            }
        }
        hi
    };

    let mut out = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let v = (slots[k] - mu).clamp(0.0, 1.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
            k += 1;
        }
    }
    Ok(ProbabilityMatrix(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ascent,
    Descent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Self::Ascent => 1.0,
            Self::Descent => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::Ascent => Self::Descent,
            Self::Descent => Self::Ascent,
        }
    }
}

/// `P_S[Δ ± η·grad]`.
pub fn pgd_step(
    delta: &ProbabilityMatrix,
    grad: &Matrix,
    lr: f64,
    direction: Direction,
    epsilon: f64,
) -> Result<ProbabilityMatrix> {
    if grad.shape() != delta.0.shape() {
        return Err(Error::Dimension("gradient and delta shapes differ".into()));
    }
    project_to_s(&(&delta.0 + grad * (direction.sign() * lr)), epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeMode {
    Single,
    Double,
    Opposite,
}

impl fmt::Display for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Double => "double",
            Self::Opposite => "opposite",
        })
    }
}

impl FromStr for SchemeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "double" => Ok(Self::Double),
            "opposite" => Ok(Self::Opposite),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme mode '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Entries `U(0, min(0.01, ε/n²))`, then projected.
    ZeroPlusJitter,
    /// Every slot at `min(1, ε / (n(n−1)))`.
    UniformBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub mode: SchemeMode,
    pub epsilon: f64,
    pub steps: usize,
    pub lr: f64,
    pub selection: SpectralSelection,
    pub noise_eps: f64,
    pub noise_seed: u64,
    pub init: InitKind,
    pub init_seed: u64,
    /// Keep `Δ` at zero on non-edge slots.
    pub removal_only: bool,
    /// Divide each gradient by its Frobenius norm before stepping.
    pub normalize_grad: bool,
    /// Exchange ascent and descent between the two opposite-mode branches.
    pub swap_directions: bool,
}

impl SchemeConfig {
    pub fn new(mode: SchemeMode, epsilon: f64) -> Self {
        Self {
            mode,
            epsilon,
            steps: 50,
            lr: 1.0,
            selection: SpectralSelection::full(),
            noise_eps: 1e-6,
            noise_seed: 0,
            init: InitKind::ZeroPlusJitter,
            init_seed: 1,
            removal_only: false,
            normalize_grad: true,
            swap_directions: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        if !(self.noise_eps >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise magnitude must be >= 0".into(),
            ));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(
                "schemes need at least 2 nodes".into(),
            ));
        }
        if self.epsilon > (n * (n - 1)) as f64 {
            log::info!(
                "budget {} exceeds n(n-1) = {}; constraint is vacuous",
                self.epsilon,
                n * (n - 1)
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// Value of the mode's own objective after this step.
    pub objective: f64,
    pub lgs1: f64,
    pub lgs2: Option<f64>,
    pub ratio1: f64,
    pub ratio2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationScheme {
    pub mode: SchemeMode,
    pub epsilon: f64,
    pub noise_seed: u64,
    pub init_seed: u64,
    pub delta1: ProbabilityMatrix,
    pub delta2: Option<ProbabilityMatrix>,
    /// `L_GS(0)` under the run's noise.
    pub lgs0: f64,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Evaluations whose retained spectrum had a gap below the degeneracy threshold.
    pub degenerate_evaluations: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemeSeeds {
    noise: u64,
    init: u64,
}

#[derive(Serialize, Deserialize)]
struct SchemeFile {
    n: usize,
    epsilon: f64,
    mode: SchemeMode,
    seeds: SchemeSeeds,
    lgs0: f64,
    delta1: Vec<(usize, usize, f64)>,
    delta2: Option<Vec<(usize, usize, f64)>>,
    trajectory: Vec<TrajectoryRecord>,
    #[serde(default)]
    degenerate_evaluations: usize,
}

impl AugmentationScheme {
    pub fn n(&self) -> usize {
        self.delta1.n()
    }

    /// Probability matrix for branch 1 or 2; branch 2 falls back to branch 1
    /// for single-mode schemes.
    pub fn branch(&self, branch: usize) -> Result<&ProbabilityMatrix> {
        match branch {
            1 => Ok(&self.delta1),
            2 => Ok(self.delta2.as_ref().unwrap_or(&self.delta1)),
            _ => Err(Error::InvalidParameter(format!(
                "branch must be 1 or 2, got {branch}"
            ))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SchemeFile {
            n: self.n(),
            epsilon: self.epsilon,
            mode: self.mode,
            seeds: SchemeSeeds {
                noise: self.noise_seed,
                init: self.init_seed,
            },
            lgs0: self.lgs0,
            delta1: self.delta1.triplets(),
            delta2: self.delta2.as_ref().map(|d| d.triplets()),
            trajectory: self.trajectory.clone(),
            degenerate_evaluations: self.degenerate_evaluations,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: SchemeFile = serde_json::from_str(s)?;
        let delta1 = ProbabilityMatrix::from_triplets(f.n, &f.delta1)?;
        let delta2 = f
            .delta2
            .map(|t| ProbabilityMatrix::from_triplets(f.n, &t))
            .transpose()?;
        Ok(Self {
            mode: f.mode,
            epsilon: f.epsilon,
            noise_seed: f.seeds.noise,
            init_seed: f.seeds.init,
            delta1,
            delta2,
            lgs0: f.lgs0,
            trajectory: f.trajectory,
            degenerate_evaluations: f.degenerate_evaluations,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `step, objective, lgs1, lgs2, ratio1, ratio2`; branch-2 columns are empty when absent.
    pub fn write_trajectory_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        write_table(
            path,
            &["step", "objective", "lgs1", "lgs2", "ratio1", "ratio2"],
            self.trajectory.iter().map(|r| {
                vec![
                    r.step.to_string(),
                    fmt_f64(r.objective),
                    fmt_f64(r.lgs1),
                    opt(r.lgs2),
                    fmt_f64(r.ratio1),
                    opt(r.ratio2),
                ]
            }),
        )
    }
}

fn initial_delta(
    n: usize,
    cfg: &SchemeConfig,
    seed: u64,
    mask: &Option<Matrix>,
) -> Result<ProbabilityMatrix> {
    let mut raw = match cfg.init {
        InitKind::ZeroPlusJitter => {
            let hi = 0.01f64.min(cfg.epsilon / (n * n) as f64);
            let mut rng = seeded(seed);
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let v = hi * rng.random::<f64>();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        }
        InitKind::UniformBudget => {
            let v = 1.0f64.min(cfg.epsilon / (n * (n - 1)) as f64);
            let mut m = Matrix::from_element(n, n, v);
            m.fill_diagonal(0.0);
            m
        }
    };
    if let Some(mask) = mask {
        raw.component_mul_assign(mask);
    }
    project_to_s(&raw, cfg.epsilon)
}

struct Stepper<'a> {
    cfg: &'a SchemeConfig,
    mask: Option<Matrix>,
}

impl Stepper<'_> {
    fn step(
        &self,
        delta: &ProbabilityMatrix,
        grad: &Matrix,
        dir: Direction,
    ) -> Result<ProbabilityMatrix> {
        let mut g = grad.clone();
        if let Some(mask) = &self.mask {
            g.component_mul_assign(mask);
        }
        if self.cfg.normalize_grad {
            let norm = g.norm();
            if norm > 0.0 {
                g /= norm;
            }
        }
        let mut raw = &delta.0 + g * (dir.sign() * self.cfg.lr);
        if let Some(mask) = &self.mask {
            raw.component_mul_assign(mask);
        }
        project_to_s(&raw, self.cfg.epsilon)
    }
}

fn squared_norm(es: &EigenSystem) -> f64 {
    es.values.iter().map(|l| l * l).sum()
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Runs the configured scheme. Deterministic given `cfg`.
pub fn optimize_scheme(g: &Graph, cfg: &SchemeConfig) -> Result<AugmentationScheme> {
    let n = g.n();
    cfg.validate(n)?;
    let c = complement_direction(g)?;
    let noise = NoiseSpec::new(cfg.noise_eps, cfg.noise_seed)?;
    let obj = SpectrumObjective::new(g, &c, cfg.selection, &noise)?;
    if cfg.selection.is_full_for(n) && cfg.selection != SpectralSelection::full() {
        log::info!(
            "K = {} covers n = {n}; using the full decomposition",
            cfg.selection.k()
        );
    }
    let mask = cfg.removal_only.then(|| removal_mask(g));
    let stepper = Stepper {
        cfg,
        mask: mask.clone(),
    };

    let zero = Matrix::zeros(n, n);
    let base = obj.eigensystem(&zero)?;
    let lgs0 = squared_norm(&base);
    let mut degenerate = 0usize;
    let mut check = |es: &EigenSystem| {
        if es.min_gap() < crate::spectral::DEGENERATE_GAP {
            degenerate += 1;
            log::warn!(
                "near-degenerate spectrum (gap {:e}); gradient may be unreliable",
                es.min_gap()
            );
        }
    };

    let mut trajectory = Vec::with_capacity(cfg.steps);
    let (delta1, delta2) = match cfg.mode {
        SchemeMode::Single => {
            let mut d = initial_delta(n, cfg, cfg.init_seed, &mask)?;
            let mut es = obj.eigensystem(d.matrix())?;
            for step in 1..=cfg.steps {
                check(&es);
                let w: Vec<f64> = es
                    .values
                    .iter()
                    .zip(&base.values)
                    .map(|(l, l0)| 2.0 * (l - l0))
                    .collect();
                let grad = obj.weighted_grad(d.matrix(), &es, &w)?;
                d = stepper.step(&d, &grad, Direction::Ascent)?;
                es = obj.eigensystem(d.matrix())?;
                let lgs1 = squared_norm(&es);
                trajectory.push(TrajectoryRecord {
                    step,
                    objective: diff_sq(&es.values, &base.values),
                    lgs1,
                    lgs2: None,
                    ratio1: lgs1 / lgs0,
                    ratio2: None,
                });
            }
            (d, None)
        }
        SchemeMode::Double => {
            let mut d1 = initial_delta(n, cfg, cfg.init_seed, &mask)?;
            let mut d2 = initial_delta(n, cfg, derive_seed(cfg.init_seed, 2), &mask)?;
            let mut es1 = obj.eigensystem(d1.matrix())?;
            let mut es2 = obj.eigensystem(d2.matrix())?;
            for step in 1..=cfg.steps {
                check(&es1);
                let w1: Vec<f64> = es1
                    .values
                    .iter()
                    .zip(&es2.values)
                    .map(|(a, b)| 2.0 * (a - b))
                    .collect();
                let g1 = obj.weighted_grad(d1.matrix(), &es1, &w1)?;
                d1 = stepper.step(&d1, &g1, Direction::Ascent)?;
                es1 = obj.eigensystem(d1.matrix())?;

                check(&es2);
                let w2: Vec<f64> = es1
                    .values
                    .iter()
                    .zip(&es2.values)
                    .map(|(a, b)| -2.0 * (a - b))
                    .collect();
                let g2 = obj.weighted_grad(d2.matrix(), &es2, &w2)?;
                d2 = stepper.step(&d2, &g2, Direction::Ascent)?;
                es2 = obj.eigensystem(d2.matrix())?;

                let (lgs1, lgs2) = (squared_norm(&es1), squared_norm(&es2));
                trajectory.push(TrajectoryRecord {
                    step,
                    objective: diff_sq(&es1.values, &es2.values),
                    lgs1,
                    lgs2: Some(lgs2),
                    ratio1: lgs1 / lgs0,
                    ratio2: Some(lgs2 / lgs0),
                });
            }
            (d1, Some(d2))
        }
        SchemeMode::Opposite => {
            let (dir1, dir2) = if cfg.swap_directions {
                (Direction::Descent, Direction::Ascent)
            } else {
                (Direction::Ascent, Direction::Descent)
            };
            let init = initial_delta(n, cfg, cfg.init_seed, &mask)?;
            let (mut d1, mut d2) = (init.clone(), init);
            let (_, g0, r0) = obj.value_and_grad(d1.matrix())?;
            degenerate += 2 * usize::from(r0.degenerate);
            let (mut grad1, mut grad2) = (g0.clone(), g0);
            for step in 1..=cfg.steps {
                d1 = stepper.step(&d1, &grad1, dir1)?;
                d2 = stepper.step(&d2, &grad2, dir2)?;
                let (v1, ga, ra) = obj.value_and_grad(d1.matrix())?;
                let (v2, gb, rb) = obj.value_and_grad(d2.matrix())?;
                degenerate += usize::from(ra.degenerate) + usize::from(rb.degenerate);
                (grad1, grad2) = (ga, gb);
                trajectory.push(TrajectoryRecord {
                    step,
                    objective: v1 - v2,
                    lgs1: v1,
                    lgs2: Some(v2),
                    ratio1: v1 / lgs0,
                    ratio2: Some(v2 / lgs0),
                });
            }
            (d1, Some(d2))
        }
    };

    Ok(AugmentationScheme {
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        noise_seed: cfg.noise_seed,
        init_seed: cfg.init_seed,
        delta1,
        delta2,
        lgs0,
        trajectory,
        degenerate_evaluations: degenerate,
    })
}

/// 1 on existing edges, 0 elsewhere.
fn removal_mask(g: &Graph) -> Matrix {
    g.adjacency().map(|v| if v != 0.0 { 1.0 } else { 0.0 })
}

/// Draws `E_ij ~ B(Δ_ij)` once per upper-triangle slot (row-major) and
/// returns `A + C∘E`.
pub fn sample_view(g: &Graph, delta: &ProbabilityMatrix, seed: u64) -> Result<Graph> {
    let c = complement_direction(g)?;
    sample_view_with(g, &c, delta, seed)
}

pub fn sample_view_with(
    g: &Graph,
    c: &ComplementDirection,
    delta: &ProbabilityMatrix,
    seed: u64,
) -> Result<Graph> {
    apply_perturbation(g, c, &sample_flips(delta, seed))
}

/// The flip indicator used by [`sample_view`].
pub fn sample_flips(delta: &ProbabilityMatrix, seed: u64) -> PerturbationSample {
    let n = delta.n();
    let mut rng = seeded(seed);
    let mut slots = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = delta.0[(i, j)];
            // always draw so the stream layout does not depend on Δ
            let u: f64 = rng.random();
            if u < p {
                slots.push((i, j));
            }
        }
    }
    PerturbationSample::from_slots(n, &slots).expect("slots are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySummary {
    pub mean_inter_remove: f64,
    pub mean_intra_remove: f64,
    pub mean_inter_add: f64,
    pub mean_intra_add: f64,
    pub inter_edges: usize,
    pub intra_edges: usize,
    pub inter_non_edges: usize,
    pub intra_non_edges: usize,
}

/// Mean of `Δ` over edge/non-edge × inter/intra-cluster slots. Empty classes give `NaN`.
pub fn inter_intra_probability_summary(
    g: &Graph,
    delta: &ProbabilityMatrix,
    labels: &[usize],
) -> Result<ProbabilitySummary> {
    let n = g.n();
    if labels.len() != n || delta.n() != n {
        return Err(Error::Dimension(
            "labels and delta must match the graph".into(),
        ));
    }
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    for i in 0..n {
        for j in i + 1..n {
            let inter = labels[i] != labels[j];
            let class = match (g.has_edge(i, j), inter) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            sums[class] += delta.0[(i, j)];
            counts[class] += 1;
        }
    }
    let mean = |k: usize| {
        if counts[k] == 0 {
            f64::NAN
        } else {
            sums[k] / counts[k] as f64
        }
    };
    Ok(ProbabilitySummary {
        mean_inter_remove: mean(0),
        mean_intra_remove: mean(1),
        mean_inter_add: mean(2),
        mean_intra_add: mean(3),
        inter_edges: counts[0],
        intra_edges: counts[1],
        inter_non_edges: counts[2],
        intra_non_edges: counts[3],
    })
}
