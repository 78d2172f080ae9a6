//! Reference perturbation schemes: uniform edge dropout and the
//! cluster-aware variant that removes inter-cluster edges more often.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::augment::{sample_view_with, ProbabilityMatrix};
use crate::graph::{complement_direction, normalized_laplacian, Graph, DEGREE_FLOOR};
use crate::rng::seeded;
use crate::spectral::{eig_full, eigenvalues};
use crate::{Error, Matrix, Result};

/// `Δ_ij = σ` on edges, 0 elsewhere.
pub fn uniform_scheme(g: &Graph, sigma: f64) -> Result<ProbabilityMatrix> {
    check_ratio(sigma)?;
    ProbabilityMatrix::new(edge_mask(g) * sigma, None)
}

fn check_ratio(sigma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidParameter(format!(
            "ratio must lie in [0, 1], got {sigma}"
        )));
    }
    Ok(())
}

fn edge_mask(g: &Graph) -> Matrix {
    g.adjacency().map(|v| if v != 0.0 { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    /// Relabels clusters by first appearance; every id in `0..k` must occur.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let relabeled: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        let k = map.len();
        if k == 0 {
            return Err(Error::InvalidParameter("empty cluster assignment".into()));
        }
        Ok(Self {
            labels: relabeled,
            k,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Number of clusters from the largest gap among the first ten eigenvalues (at least 2).
pub fn eigengap_cluster_count(g: &Graph) -> Result<usize> {
    let values = eigenvalues(&normalized_laplacian(g, DEGREE_FLOOR))?;
    let top = values.len().min(10);
    let mut best = (2usize, f64::NEG_INFINITY);
    for i in 1..top {
        let gap = values[i] - values[i - 1];
        if i >= 2 && gap > best.1 {
            best = (i, gap);
        }
    }
    Ok(best.0.min(g.n()))
}

const KMEANS_RESTARTS: usize = 20;
const KMEANS_ITERS: usize = 300;

/// Row-normalized embedding on the `k` lowest normalized-Laplacian
/// eigenvectors, clustered by k-means++ (20 restarts, 300 iterations each).
pub fn spectral_clustering(g: &Graph, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} invalid for {n} nodes"
        )));
    }
    if k == 1 {
        return ClusterAssignment::new(vec![0; n]);
    }
    let es = eig_full(&normalized_laplacian(g, DEGREE_FLOOR))?;
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..k).map(|c| es.vectors[(i, c)]).collect())
        .collect();
    for p in &mut points {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            p.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let mut rng = seeded(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, labels) = kmeans(&points, k, &mut rng);
        if best.as_ref().is_none_or(|b| inertia < b.0 - 1e-12) {
            best = Some((inertia, labels));
        }
    }
    let labels = best.expect("at least one restart").1;
    let assignment = ClusterAssignment::new(labels)?;
    if assignment.k() < k {
        log::warn!(
            "k-means produced {} non-empty clusters of {k} requested",
            assignment.k()
        );
    }
    Ok(assignment)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> (f64, Vec<usize>) {
    let n = points.len();
    let dim = points[0].len();
    // k-means++ seeding
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        };
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centers.last().unwrap()));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centers[labels[a]])
                            .total_cmp(&dist2(&points[b], &centers[labels[b]]))
                    })
                    .unwrap();
                centers[c] = points[far].clone();
                labels[far] = c;
                changed = true;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centers[l]))
        .sum();
    (inertia, labels)
}

/// Adjusted Rand index between two labelings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension("labelings differ in length".into()));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusteredRates {
    pub sigma_inter: f64,
    pub sigma_intra: f64,
    pub clamped: bool,
}

/// `σ_inter = min(1.2σ, σm/m_inter, 1)`, `σ_intra = (σm − σ_inter m_inter)/m_intra`.
pub fn clustered_rates(m: usize, m_inter: usize, sigma: f64) -> Result<ClusteredRates> {
    check_ratio(sigma)?;
    if m_inter > m {
        return Err(Error::InvalidParameter(
            "more inter-cluster edges than edges".into(),
        ));
    }
    let m_intra = m - m_inter;
    let target = sigma * m as f64;
    if m_inter == 0 {
        return Ok(ClusteredRates {
            sigma_inter: 0.0,
            sigma_intra: sigma,
            clamped: false,
        });
    }
    if m_intra == 0 {
        let s = (target / m_inter as f64).min(1.0);
        return Ok(ClusteredRates {
            sigma_inter: s,
            sigma_intra: 0.0,
            clamped: s < target / m_inter as f64,
        });
    }
    let sigma_inter = (1.2 * sigma).min(target / m_inter as f64).min(1.0);
    let raw = (target - sigma_inter * m_inter as f64) / m_intra as f64;
    let sigma_intra = raw.clamp(0.0, 1.0);
    let clamped = sigma_intra != raw;
    if clamped {
        log::warn!("intra-cluster rate {raw} clamped to {sigma_intra}");
    }
    Ok(ClusteredRates {
        sigma_inter,
        sigma_intra,
        clamped,
    })
}

/// Edge-removal probabilities `σ_inter` on inter-cluster edges and `σ_intra` on intra-cluster edges.
pub fn clustered_scheme(
    g: &Graph,
    sigma: f64,
    clusters: &ClusterAssignment,
) -> Result<ProbabilityMatrix> {
    let n = g.n();
    if clusters.labels.len() != n {
        return Err(Error::Dimension(
            "cluster labels must cover every node".into(),
        ));
    }
    let edges = g.edges();
    let labels = &clusters.labels;
    let m_inter = edges
        .iter()
        .filter(|&&(i, j)| labels[i] != labels[j])
        .count();
    let rates = clustered_rates(edges.len(), m_inter, sigma)?;
    let mut d = Matrix::zeros(n, n);
    for &(i, j) in &edges {
        let p = if labels[i] != labels[j] {
            rates.sigma_inter
        } else {
            rates.sigma_intra
        };
        d[(i, j)] = p;
        d[(j, i)] = p;
    }
    ProbabilityMatrix::new(d, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeDistance {
    pub scheme: String,
    pub sigma: f64,
    pub mean_distance: f64,
    pub std: f64,
    pub samples: usize,
}

/// Mean and sample standard deviation of the spectral distance between `g`
/// and views drawn from each scheme. Sample `i` uses seed `seed + i` for
/// every scheme.
pub fn compare_spectral_change(
    g: &Graph,
    schemes: &[(String, ProbabilityMatrix)],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<SchemeDistance>> {
    if samples < 30 {
        return Err(Error::InvalidParameter(format!(
            "need at least 30 samples, got {samples}"
        )));
    }
    let c = complement_direction(g)?;
    let base = eigenvalues(&normalized_laplacian(g, DEGREE_FLOOR))?;
    schemes
        .iter()
        .map(|(name, delta)| {
            let dists: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let view = sample_view_with(g, &c, delta, seed.wrapping_add(i as u64))?;
                    let spec = eigenvalues(&normalized_laplacian(&view, DEGREE_FLOOR))?;
                    Ok(base
                        .iter()
                        .zip(&spec)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt())
                })
                .collect::<Result<_>>()?;
            let mean = dists.iter().sum::<f64>() / samples as f64;
            let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            Ok(SchemeDistance {
                scheme: name.clone(),
                sigma,
                mean_distance: mean,
                std: var.sqrt(),
                samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::sample_view;
    use crate::graph::generate_sbm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_fixtures() {
        let g = Graph::complete(3);
        assert_eq!(
            uniform_scheme(&g, 0.0).unwrap(),
            ProbabilityMatrix::zeros(3)
        );
        let full = uniform_scheme(&g, 1.0).unwrap();
        assert_eq!(sample_view(&g, &full, 4).unwrap().edge_count(), 0);
        let half = uniform_scheme(&g, 0.5).unwrap();
        assert_abs_diff_eq!(half.l1() / 2.0, 1.5, epsilon = 1e-12);
        assert!(uniform_scheme(&g, 1.5).is_err());
    }

    #[test]
    fn rates_from_formula() {
        let r = clustered_rates(100, 40, 0.3).unwrap();
        assert_abs_diff_eq!(r.sigma_inter, 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma_intra, 0.26, epsilon = 1e-12);
        assert!(!r.clamped);
        let capped = clustered_rates(100, 10, 0.9).unwrap();
        assert!(capped.sigma_inter <= 1.0);
    }

    #[test]
    fn single_cluster_matches_uniform() {
        let g = generate_sbm(20, 2, 0.5, 0.1, 2).unwrap();
        let one = ClusterAssignment::new(vec![0; 20]).unwrap();
        assert_eq!(
            clustered_scheme(&g, 0.3, &one).unwrap(),
            uniform_scheme(&g, 0.3).unwrap()
        );
    }

    #[test]
    fn clustered_budget_identity() {
        let g = generate_sbm(30, 2, 0.5, 0.1, 3).unwrap();
        let labels = ClusterAssignment::new(g.node_labels().unwrap().to_vec()).unwrap();
        for sigma in [0.1, 0.4, 0.7] {
            let d = clustered_scheme(&g, sigma, &labels).unwrap();
            assert_abs_diff_eq!(d.l1() / 2.0, sigma * g.edge_count() as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn clustering_disjoint_cliques() {
        let mut edges = Vec::new();
        for b in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((b + i, b + j));
                }
            }
        }
        let g = Graph::from_edges(10, &edges).unwrap();
        let c = spectral_clustering(&g, 2, 1).unwrap();
        assert_eq!(c.labels(), &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn clustering_planted_partition() {
        let g = generate_sbm(60, 3, 0.5, 0.01, 11).unwrap();
        let c = spectral_clustering(&g, 3, 0).unwrap();
        let ari = adjusted_rand_index(c.labels(), g.node_labels().unwrap()).unwrap();
        assert!(ari >= 0.9, "ari {ari}");
        assert_eq!(spectral_clustering(&g, 3, 0).unwrap(), c);
        assert_eq!(eigengap_cluster_count(&g).unwrap(), 3);
    }

    #[test]
    fn ari_basics() {
        assert_abs_diff_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(),
            1.0
        );
        let v = adjusted_rand_index(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn zero_scheme_has_zero_distance() {
        let g = generate_sbm(16, 2, 0.6, 0.1, 1).unwrap();
        let rows = compare_spectral_change(
            &g,
            &[
                ("zero".into(), ProbabilityMatrix::zeros(16)),
                ("uniform".into(), uniform_scheme(&g, 0.3).unwrap()),
            ],
            0.3,
            30,
            5,
        )
        .unwrap();
        assert_eq!(rows[0].mean_distance, 0.0);
        assert!(rows[1].mean_distance > 0.0 && rows[1].std >= 0.0);
        assert!(compare_spectral_change(&g, &[], 0.3, 10, 5).is_err());
    }
}
