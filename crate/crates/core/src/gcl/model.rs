//! GCN/GIN encoders and the pooled linear readout, with manual backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{row_sums, Graph, DEGREE_FLOOR};
use crate::io::row_major;
use crate::rng::seeded;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvKind {
    /// `D̃^{-1/2}(A + I)D̃^{-1/2}` propagation.
    Gcn,
    /// `(1 + ε)I + D^{-1/2} A D^{-1/2}` propagation.
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Mean,
    Sum,
}

/// Sums in ascending `total_cmp` order, so the result does not depend on
/// the order the terms were produced in.
pub(crate) fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Sparse symmetric propagation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Propagation {
    pub fn new(g: &Graph, conv: ConvKind, gin_epsilon: f64) -> Self {
        Self::from_adjacency(g.adjacency(), conv, gin_epsilon)
    }

    pub fn from_adjacency(a: &Matrix, conv: ConvKind, gin_epsilon: f64) -> Self {
        let n = a.nrows();
        let rows = match conv {
            ConvKind::Gcn => {
                let d: Vec<f64> = row_sums(a)
                    .iter()
                    .map(|d| (d + 1.0).sqrt().recip())
                    .collect();
                (0..n)
                    .map(|i| {
                        (0..n)
                            .filter_map(|j| {
                                let w = a[(i, j)] + if i == j { 1.0 } else { 0.0 };
                                (w != 0.0).then(|| (j, d[i] * w * d[j]))
                            })
                            .collect()
                    })
                    .collect()
            }
            ConvKind::Gin => {
                let s: Vec<f64> = row_sums(a)
                    .iter()
                    .map(|&d| {
                        if d > DEGREE_FLOOR {
                            d.sqrt().recip()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (0..n)
                    .map(|i| {
                        (0..n)
                            .filter_map(|j| {
                                let w = if i == j {
                                    1.0 + gin_epsilon
                                } else {
                                    s[i] * a[(i, j)] * s[j]
                                };
                                (w != 0.0).then_some((j, w))
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// `P·H`, each entry summed in canonical order.
    pub fn apply(&self, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.nrows(), h.ncols());
        let mut terms = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for k in 0..h.ncols() {
                terms.clear();
                terms.extend(row.iter().map(|&(j, w)| w * h[(j, k)]));
                out[(i, k)] = canonical_sum(&mut terms);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    #[serde(with = "row_major::vec")]
    pub layer_weights: Vec<Matrix>,
    pub conv: ConvKind,
    pub gin_epsilon: f64,
}

fn uniform_init(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (rows as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

impl EncoderState {
    /// Layer `l` maps `dims[l] → dims[l + 1]`; weights `U(−1/√d_in, 1/√d_in)`.
    pub fn new(conv: ConvKind, dims: &[usize], gin_epsilon: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "invalid layer dimensions {dims:?}"
            )));
        }
        let mut rng = seeded(seed);
        let layer_weights = dims
            .windows(2)
            .map(|w| uniform_init(w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            layer_weights,
            conv,
            gin_epsilon,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layer_weights[0].nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.layer_weights.last().map_or(0, |w| w.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_weights.is_empty() {
            return Err(Error::InvalidParameter("encoder has no layers".into()));
        }
        for pair in self.layer_weights.windows(2) {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::Dimension(
                    "encoder layer dimensions do not chain".into(),
                ));
            }
        }
        if self
            .layer_weights
            .iter()
            .any(|w| w.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numerical("non-finite encoder weight".into()));
        }
        Ok(())
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `P·H_{l−1}` per layer.
    propagated: Vec<Matrix>,
    /// Pre-activations per layer.
    pre: Vec<Matrix>,
}

/// `H_l = ReLU(P H_{l−1} Φ_l)`, last layer linear.
pub fn encode(p: &Propagation, x: &Matrix, enc: &EncoderState) -> Result<(Matrix, ForwardCache)> {
    if x.nrows() != p.n() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} nodes",
            x.nrows(),
            p.n()
        )));
    }
    if x.ncols() != enc.in_dim() {
        return Err(Error::Dimension(format!(
            "features have {} columns, encoder expects {}",
            x.ncols(),
            enc.in_dim()
        )));
    }
    let layers = enc.layer_weights.len();
    let mut cache = ForwardCache {
        propagated: Vec::with_capacity(layers),
        pre: Vec::with_capacity(layers),
    };
    let mut h = x.clone();
    for (l, w) in enc.layer_weights.iter().enumerate() {
        let ph = p.apply(&h);
        let z = &ph * w;
        h = if l + 1 < layers {
            z.map(|v| v.max(0.0))
        } else {
            z.clone()
        };
        cache.propagated.push(ph);
        cache.pre.push(z);
    }
    Ok((h, cache))
}

/// Weight gradients given `∂loss/∂H_L`.
pub fn encode_backward(
    p: &Propagation,
    cache: &ForwardCache,
    enc: &EncoderState,
    d_out: &Matrix,
) -> Vec<Matrix> {
    let layers = enc.layer_weights.len();
    let mut grads = vec![Matrix::zeros(0, 0); layers];
    let mut dz = d_out.clone();
    for l in (0..layers).rev() {
        grads[l] = cache.propagated[l].transpose() * &dz;
        if l == 0 {
            break;
        }
        let dh = p.apply(&(&dz * enc.layer_weights[l].transpose()));
        dz = dh.zip_map(&cache.pre[l - 1], |g, z| if z > 0.0 { g } else { 0.0 });
    }
    grads
}

/// Forward pass for a graph with the given features.
pub fn gcn_forward(g: &Graph, x: &Matrix, enc: &EncoderState) -> Result<Matrix> {
    if enc.conv != ConvKind::Gcn {
        return Err(Error::InvalidParameter("encoder is not a GCN".into()));
    }
    Ok(encode(&Propagation::new(g, ConvKind::Gcn, 0.0), x, enc)?.0)
}

pub fn gin_forward(g: &Graph, x: &Matrix, enc: &EncoderState) -> Result<Matrix> {
    if enc.conv != ConvKind::Gin {
        return Err(Error::InvalidParameter("encoder is not a GIN".into()));
    }
    Ok(encode(&Propagation::new(g, ConvKind::Gin, enc.gin_epsilon), x, enc)?.0)
}

/// Dispatches on the encoder's convolution kind.
pub fn forward(g: &Graph, x: &Matrix, enc: &EncoderState) -> Result<Matrix> {
    Ok(encode(&Propagation::new(g, enc.conv, enc.gin_epsilon), x, enc)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutState {
    pub pool: Pool,
    #[serde(with = "row_major")]
    pub proj: Matrix,
}

impl ReadoutState {
    pub fn new(pool: Pool, dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self {
            pool,
            proj: uniform_init(dim, dim, &mut rng),
        }
    }

    pub fn identity(pool: Pool, dim: usize) -> Self {
        Self {
            pool,
            proj: Matrix::identity(dim, dim),
        }
    }
}

fn pool_rows(h: &Matrix, pool: Pool) -> nalgebra::DVector<f64> {
    let n = h.nrows();
    let mut terms = Vec::with_capacity(n);
    nalgebra::DVector::from_fn(h.ncols(), |k, _| {
        terms.clear();
        terms.extend(h.column(k).iter().copied());
        let s = canonical_sum(&mut terms);
        match pool {
            Pool::Sum => s,
            Pool::Mean => s / n as f64,
        }
    })
}

/// `z = proj · pool(H)`.
pub fn readout(h: &Matrix, r: &ReadoutState) -> Result<nalgebra::DVector<f64>> {
    if h.nrows() == 0 {
        return Err(Error::InvalidParameter("readout of an empty graph".into()));
    }
    if h.ncols() != r.proj.ncols() {
        return Err(Error::Dimension(
            "readout width does not match representations".into(),
        ));
    }
    Ok(&r.proj * pool_rows(h, r.pool))
}

/// Returns `(∂/∂proj, ∂/∂H)` given `∂loss/∂z`.
pub(crate) fn readout_backward(
    h: &Matrix,
    r: &ReadoutState,
    dz: &nalgebra::DVector<f64>,
) -> (Matrix, Matrix) {
    let pooled = pool_rows(h, r.pool);
    let d_proj = dz * pooled.transpose();
    let mut d_pooled = r.proj.transpose() * dz;
    if r.pool == Pool::Mean {
        d_pooled /= h.nrows() as f64;
    }
    let d_h = Matrix::from_fn(h.nrows(), h.ncols(), |_, k| d_pooled[k]);
    (d_proj, d_h)
}
