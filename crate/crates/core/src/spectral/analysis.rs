//! Structural properties read off the normalized-Laplacian spectrum.

use std::fmt;
use std::str::FromStr;

use super::{eig_full, eigenvalues, EigenSystem};
use crate::graph::{normalized_laplacian, unnormalized_laplacian, Graph, DEGREE_FLOOR};
use crate::{Error, Result};

/// Full eigensystem of `Lap(A)` under the default degree floor.
pub fn graph_spectrum(g: &Graph) -> Result<EigenSystem> {
    eig_full(&normalized_laplacian(g, DEGREE_FLOOR))
}

fn spectrum_values(g: &Graph) -> Result<Vec<f64>> {
    eigenvalues(&normalized_laplacian(g, DEGREE_FLOOR))
}

/// L2 distance between the ascending spectra of two graphs on the same node set.
pub fn spectral_distance(g1: &Graph, g2: &Graph) -> Result<f64> {
    if g1.n() != g2.n() {
        return Err(Error::Dimension(format!(
            "graphs have {} and {} nodes",
            g1.n(),
            g2.n()
        )));
    }
    let a = spectrum_values(g1)?;
    let b = spectrum_values(g2)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Second-smallest normalized-Laplacian eigenvalue.
pub fn algebraic_connectivity(g: &Graph) -> Result<f64> {
    if g.n() < 2 {
        return Err(Error::InvalidParameter(
            "algebraic connectivity needs at least 2 nodes".into(),
        ));
    }
    Ok(spectrum_values(g)?[1])
}

/// Number of eigenvalues below `tol`.
///
/// Isolated nodes have eigenvalue 1 under the degree floor, so they are
/// counted through the zero-degree rows instead.
pub fn connected_components_spectral(g: &Graph, tol: f64) -> Result<usize> {
    let isolated = crate::graph::degrees(g)
        .0
        .iter()
        .filter(|&&d| d <= DEGREE_FLOOR)
        .count();
    let zeros = spectrum_values(g)?.iter().filter(|&&l| l < tol).count();
    Ok(zeros + isolated)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterBounds {
    /// Largest of the eigenvalue lower bounds.
    pub lower: f64,
    /// `r − 1` for `r` distinct eigenvalues.
    pub upper: f64,
    pub distinct_eigenvalues: usize,
    /// `1 / (2m · λ₁)` with `λ₁` the smallest nonzero normalized eigenvalue.
    pub lower_volume: f64,
    /// `4 / (n · μ₂)` with `μ₂` the Fiedler value of `D − A`.
    pub lower_fiedler: f64,
    /// `⌈ln(2m / δ) / ln((λ_max + λ₁)/(λ_max − λ₁))⌉`; absent when `λ_max = λ₁`.
    pub upper_expansion: Option<f64>,
    /// Exact diameter by breadth-first search.
    pub exact: usize,
}

/// Spectral diameter bounds for a connected graph, plus the exact BFS value.
pub fn diameter_bounds(g: &Graph) -> Result<DiameterBounds> {
    let exact = g.diameter()?;
    let n = g.n();
    let tol = 1e-8;
    let values = spectrum_values(g)?;
    let mut distinct = 0usize;
    let mut last = f64::NEG_INFINITY;
    for &v in &values {
        if v - last > tol {
            distinct += 1;
            last = v;
        }
    }
    let upper = distinct.saturating_sub(1) as f64;

    let m: f64 = g.adjacency().sum() / 2.0;
    let lambda1 = values.iter().copied().find(|&v| v > tol);
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let lower_volume = lambda1.map_or(0.0, |l| 1.0 / (2.0 * m * l));
    let mu = eigenvalues(&unnormalized_laplacian(g))?;
    let lower_fiedler = if n >= 2 && mu[1] > tol {
        4.0 / (n as f64 * mu[1])
    } else {
        0.0
    };
    let min_degree = crate::graph::degrees(g)
        .0
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let upper_expansion = match lambda1 {
        Some(l1) if lambda_max - l1 > tol && min_degree > 0.0 => {
            let ratio = ((lambda_max + l1) / (lambda_max - l1)).ln();
            Some(((2.0 * m / min_degree).ln() / ratio).ceil())
        }
        _ => None,
    };
    Ok(DiameterBounds {
        lower: lower_volume.max(lower_fiedler),
        upper,
        distinct_eigenvalues: distinct,
        lower_volume,
        lower_fiedler,
        upper_expansion,
        exact,
    })
}

/// `Σ_l e^{−2tλ_l} (u_l[i] − u_l[j])²`.
pub fn diffusion_distance(g: &Graph, i: usize, j: usize, t: f64) -> Result<f64> {
    let n = g.n();
    for id in [i, j] {
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion time must be > 0, got {t}"
        )));
    }
    let es = graph_spectrum(g)?;
    Ok((0..n)
        .map(|l| {
            let phi = (-t * es.values[l]).exp();
            phi * phi * (es.vectors[(i, l)] - es.vectors[(j, l)]).powi(2)
        })
        .sum())
}

/// Named scalar responses on `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFilter {
    Identity,
    /// `g(λ) = λ`, i.e. multiplication by `L`.
    Laplacian,
    /// `e^{−tλ}`.
    Heat(f64),
    /// `2 − λ`.
    Gcn,
    /// `2 + ε − λ`.
    Gin(f64),
}

impl SpectralFilter {
    pub fn response(&self, lambda: f64) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::Laplacian => lambda,
            Self::Heat(t) => (-t * lambda).exp(),
            Self::Gcn => 2.0 - lambda,
            Self::Gin(eps) => 2.0 + eps - lambda,
        }
    }
}

impl fmt::Display for SpectralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Laplacian => write!(f, "laplacian"),
            Self::Heat(t) => write!(f, "heat({t})"),
            Self::Gcn => write!(f, "gcn"),
            Self::Gin(e) => write!(f, "gin({e})"),
        }
    }
}

/// Accepts `identity`, `laplacian`, `gcn`, `heat(t)` and `gin(eps)`;
/// `heat` and `gin` without an argument default to `t = 1` and `ε = 0`.
impl FromStr for SpectralFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| {
                    Error::InvalidParameter(format!("unbalanced filter spec '{s}'"))
                })?;
                let v: f64 = inner.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad filter parameter in '{s}'"))
                })?;
                (name.trim().to_string(), Some(v))
            }
            None => (s.clone(), None),
        };
        match (name.as_str(), arg) {
            ("identity", None) => Ok(Self::Identity),
            ("laplacian", None) => Ok(Self::Laplacian),
            ("gcn", None) => Ok(Self::Gcn),
            ("heat", t) => Ok(Self::Heat(t.unwrap_or(1.0))),
            ("gin", e) => Ok(Self::Gin(e.unwrap_or(0.0))),
            _ => Err(Error::InvalidParameter(format!("unknown filter '{s}'"))),
        }
    }
}

/// `U g(Λ) Uᵀ x`.
pub fn apply_spectral_filter(
    g: &Graph,
    signal: &[f64],
    filter: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let n = g.n();
    if signal.len() != n {
        return Err(Error::Dimension(format!(
            "signal has {} entries for {n} nodes",
            signal.len()
        )));
    }
    let es = graph_spectrum(g)?;
    let x = nalgebra::DVector::from_column_slice(signal);
    let coeff = es.vectors.transpose() * x;
    let scaled = nalgebra::DVector::from_fn(n, |k, _| filter(es.values[k]) * coeff[k]);
    Ok((&es.vectors * scaled).iter().copied().collect())
}

/// First-order change of `λ_k` when slot `(i, j)` is flipped with weight `w`:
/// `w·Δw·(2 u_i u_j − λ_k (u_i² + u_j²))`, `Δw = 1 − 2A_ij`.
///
/// `w = 1` is a full flip. `es` must come from `g`'s normalized Laplacian.
pub fn first_order_eigen_change(
    es: &EigenSystem,
    g: &Graph,
    i: usize,
    j: usize,
    k: usize,
    w: f64,
) -> Result<f64> {
    let n = g.n();
    if k >= es.len() {
        return Err(Error::InvalidParameter(format!(
            "eigen index {k} out of range for {} pairs",
            es.len()
        )));
    }
    for id in [i, j] {
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
    }
    if i == j {
        return Err(Error::InvalidParameter("flip slot needs i != j".into()));
    }
    let dw = 1.0 - 2.0 * g.adjacency()[(i, j)];
    let (ui, uj) = (es.vectors[(i, k)], es.vectors[(j, k)]);
    let lambda = es.values[k];
    Ok(w * dw * (2.0 * ui * uj - lambda * (ui * ui + uj * uj)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_sbm;
    use crate::Matrix;
    use approx::assert_abs_diff_eq;

    fn outer_filter_matrix(es: &EigenSystem, filter: impl Fn(f64) -> f64) -> Matrix {
        let mut scaled = es.vectors.clone();
        for (k, &v) in es.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(filter(v));
        }
        scaled * es.vectors.transpose()
    }

    #[test]
    fn distance_k3_p3() {
        let d = spectral_distance(&Graph::complete(3), &Graph::path(3)).unwrap();
        assert_abs_diff_eq!(d, 0.5f64.sqrt(), epsilon = 1e-12);
        let back = spectral_distance(&Graph::path(3), &Graph::complete(3)).unwrap();
        assert_eq!(d, back);
        assert_eq!(
            spectral_distance(&Graph::path(4), &Graph::path(4)).unwrap(),
            0.0
        );
        assert!(spectral_distance(&Graph::path(4), &Graph::path(3)).is_err());
    }

    #[test]
    fn connectivity_values() {
        let two = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_abs_diff_eq!(algebraic_connectivity(&two).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            algebraic_connectivity(&Graph::complete(3)).unwrap(),
            1.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            algebraic_connectivity(&Graph::path(3)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(algebraic_connectivity(&Graph::empty(1)).is_err());
    }

    #[test]
    fn component_counts() {
        assert_eq!(
            connected_components_spectral(&Graph::complete(3), 1e-8).unwrap(),
            1
        );
        let two = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(connected_components_spectral(&two, 1e-8).unwrap(), 2);
        assert_eq!(
            connected_components_spectral(&Graph::empty(4), 1e-8).unwrap(),
            4
        );
    }

    #[test]
    fn diameter_fixtures() {
        let k3 = diameter_bounds(&Graph::complete(3)).unwrap();
        assert_eq!((k3.distinct_eigenvalues, k3.upper, k3.exact), (2, 1.0, 1));
        let p3 = diameter_bounds(&Graph::path(3)).unwrap();
        assert_eq!((p3.distinct_eigenvalues, p3.upper, p3.exact), (3, 2.0, 2));
        let star = diameter_bounds(&Graph::star(4)).unwrap();
        assert_eq!(star.exact, 2);
        assert!(star.exact as f64 <= star.upper);
        let two = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(diameter_bounds(&two), Err(Error::Disconnected)));
    }

    #[test]
    fn diameter_bounds_hold_on_random_graphs() {
        let mut checked = 0;
        for seed in 0..40 {
            let g = generate_sbm(24, 2, 0.4, 0.08, seed).unwrap();
            let Ok(b) = diameter_bounds(&g) else { continue };
            let d = b.exact as f64;
            assert!(b.lower <= d + 1e-12, "{b:?}");
            assert!(d <= b.upper, "{b:?}");
            if let Some(u) = b.upper_expansion {
                assert!(d <= u, "{b:?}");
            }
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn diffusion_single_edge() {
        let g = Graph::path(2);
        let d = diffusion_distance(&g, 0, 1, 1.0).unwrap();
        assert_abs_diff_eq!(d, 2.0 * (-4.0f64).exp(), epsilon = 1e-14);
        assert_eq!(diffusion_distance(&g, 1, 1, 1.0).unwrap(), 0.0);
        let h = generate_sbm(10, 2, 0.6, 0.2, 2).unwrap();
        assert_abs_diff_eq!(
            diffusion_distance(&h, 2, 7, 0.5).unwrap(),
            diffusion_distance(&h, 7, 2, 0.5).unwrap(),
            epsilon = 1e-15
        );
        assert!(diffusion_distance(&g, 0, 2, 1.0).is_err());
        assert!(diffusion_distance(&g, 0, 1, 0.0).is_err());
    }

    #[test]
    fn diffusion_matches_heat_kernel_rows() {
        let g = generate_sbm(12, 3, 0.7, 0.1, 5).unwrap();
        let es = graph_spectrum(&g).unwrap();
        let heat = outer_filter_matrix(&es, |l| (-0.7 * l).exp());
        let want = (heat.row(3) - heat.row(8)).norm_squared();
        assert_abs_diff_eq!(
            diffusion_distance(&g, 3, 8, 0.7).unwrap(),
            want,
            epsilon = 1e-12
        );
    }

    #[test]
    fn filters() {
        let g = generate_sbm(9, 3, 0.8, 0.2, 1).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let same = apply_spectral_filter(&g, &x, |l| SpectralFilter::Identity.response(l)).unwrap();
        for (a, b) in same.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let lx = apply_spectral_filter(&g, &x, |l| l).unwrap();
        let direct =
            normalized_laplacian(&g, DEGREE_FLOOR) * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in lx.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let k3 = Graph::complete(3);
        let e0 = [1.0, 0.0, 0.0];
        let got = apply_spectral_filter(&k3, &e0, |l| SpectralFilter::Gcn.response(l)).unwrap();
        // I + D^{-1/2} A D^{-1/2} on K3: diagonal 1, off-diagonal 1/2
        for (a, b) in got.iter().zip([1.0, 0.5, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn filter_names_round_trip() {
        for f in [
            SpectralFilter::Identity,
            SpectralFilter::Laplacian,
            SpectralFilter::Gcn,
            SpectralFilter::Heat(0.5),
            SpectralFilter::Gin(0.25),
        ] {
            assert_eq!(f.to_string().parse::<SpectralFilter>().unwrap(), f);
        }
        assert_eq!(
            "heat".parse::<SpectralFilter>().unwrap(),
            SpectralFilter::Heat(1.0)
        );
        assert!("sinc".parse::<SpectralFilter>().is_err());
        assert!("heat(x)".parse::<SpectralFilter>().is_err());
    }

    #[test]
    fn first_order_flip_back_negates() {
        let g = generate_sbm(16, 2, 0.7, 0.1, 4).unwrap();
        let es = graph_spectrum(&g).unwrap();
        let (i, j) = g.edges()[0];
        let fwd = first_order_eigen_change(&es, &g, i, j, 1, 1.0).unwrap();
        let mut flipped = g.adjacency().clone();
        flipped[(i, j)] = 0.0;
        flipped[(j, i)] = 0.0;
        let h = g.with_adjacency(flipped).unwrap();
        // same eigenpairs, opposite flip direction
        let back = first_order_eigen_change(&es, &h, i, j, 1, 1.0).unwrap();
        assert_eq!(back, -fwd);
        assert!(first_order_eigen_change(&es, &g, i, i, 1, 1.0).is_err());
        assert!(first_order_eigen_change(&es, &g, i, j, 16, 1.0).is_err());
    }

    #[test]
    fn magnitude_identity() {
        let g = generate_sbm(14, 2, 0.6, 0.2, 8).unwrap();
        let es = graph_spectrum(&g).unwrap();
        for k in 0..14 {
            let (ui, uj) = (es.vectors[(2, k)], es.vectors[(9, k)]);
            let alt = ((ui - uj).powi(2) + (es.values[k] - 1.0) * (ui * ui + uj * uj)).abs();
            let pred = first_order_eigen_change(&es, &g, 2, 9, k, 1.0)
                .unwrap()
                .abs();
            assert_abs_diff_eq!(pred, alt, epsilon = 1e-12);
        }
    }
}
