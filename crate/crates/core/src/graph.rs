//! Dense undirected graphs, Laplacians, edge flips and synthetic generators.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::rng::seeded;
use crate::{Error, Matrix, Result};

/// Default floor applied to degrees before taking `D^{-1/2}`.
pub const DEGREE_FLOOR: f64 = 1e-8;

/// Undirected graph on `n` nodes with a dense symmetric adjacency matrix.
///
/// Entries are binary for observed graphs and fractional in `[0, 1]` for
/// expected (relaxed) views. The diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    features: Option<Matrix>,
    node_labels: Option<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds a graph after checking exact symmetry, a zero diagonal and entries in `[0, 1]`.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::Dimension(format!(
                "adjacency is {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        let n = adjacency.nrows();
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("self-loop weight at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Domain(format!(
                        "adjacency entry ({i},{j}) = {a} outside [0,1]"
                    )));
                }
                if a.to_bits() != adjacency[(j, i)].to_bits() {
                    return Err(Error::NotSymmetric((a - adjacency[(j, i)]).abs()));
                }
            }
        }
        Ok(Self {
            adjacency,
            features: None,
            node_labels: None,
            positions: None,
        })
    }

    /// Binary graph from an undirected edge list. Self-loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Matrix::zeros(n, n);
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u != v {
                a[(u, v)] = 1.0;
                a[(v, u)] = 1.0;
            }
        }
        Self::from_adjacency(a)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: Matrix::zeros(n, n),
            features: None,
            node_labels: None,
            positions: None,
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Matrix::from_element(n, n, 1.0);
        a.fill_diagonal(0.0);
        Self::from_adjacency(a).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path graph is valid")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("cycle graph is valid")
    }

    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Self::from_edges(leaves + 1, &edges).expect("star graph is valid")
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.nrows() != self.n() {
            return Err(Error::Dimension(format!(
                "features have {} rows for {} nodes",
                features.nrows(),
                self.n()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} positions for {} nodes",
                positions.len(),
                self.n()
            )));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Number of nonzero upper-triangle entries.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0.0)
            .count()
    }

    /// Upper-triangle edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0.0)
            .collect()
    }

    pub fn is_binary(&self) -> bool {
        self.adjacency.iter().all(|&a| a == 0.0 || a == 1.0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    /// Copy of the topology with `adjacency` swapped in; node data is kept.
    pub fn with_adjacency(&self, adjacency: Matrix) -> Result<Self> {
        let mut g = Self::from_adjacency(adjacency)?;
        if g.n() != self.n() {
            return Err(Error::Dimension("node count changed".into()));
        }
        g.features = self.features.clone();
        g.node_labels = self.node_labels.clone();
        g.positions = self.positions.clone();
        Ok(g)
    }

    /// Number of connected components (union-find over nonzero entries).
    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = n;
        for (i, j) in self.edges() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                count -= 1;
            }
        }
        count
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let n = self.n();
        let mut dist = vec![None; n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for v in 0..n {
                if self.adjacency[(u, v)] != 0.0 && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Exact hop diameter, or [`Error::Disconnected`].
    pub fn diameter(&self) -> Result<usize> {
        let mut best = 0;
        for s in 0..self.n() {
            for d in self.bfs_distances(s) {
                best = best.max(d.ok_or(Error::Disconnected)?);
            }
        }
        Ok(best)
    }
}

/// Node degrees `d_i = Σ_j A_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn degrees(g: &Graph) -> DegreeVector {
    DegreeVector(row_sums(g.adjacency()))
}

pub(crate) fn row_sums(a: &Matrix) -> Vec<f64> {
    (0..a.nrows()).map(|i| a.row(i).iter().sum()).collect()
}

/// Legal flip directions `C = (11ᵀ - I - A) - A`: `+1` adds an edge, `-1` removes one.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementDirection(Matrix);

impl ComplementDirection {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

pub fn complement_direction(g: &Graph) -> Result<ComplementDirection> {
    if !g.is_binary() {
        return Err(Error::Domain(
            "complement direction needs a binary adjacency".into(),
        ));
    }
    let n = g.n();
    let c = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 - 2.0 * g.adjacency()[(i, j)]
        }
    });
    Ok(ComplementDirection(c))
}

/// Symmetric binary flip indicator `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSample(Matrix);

impl PerturbationSample {
    pub fn new(e: Matrix) -> Result<Self> {
        let n = e.nrows();
        if !e.is_square() {
            return Err(Error::Dimension("flip matrix must be square".into()));
        }
        for i in 0..n {
            if e[(i, i)] != 0.0 {
                return Err(Error::Domain("flip matrix has a nonzero diagonal".into()));
            }
            for j in 0..n {
                let v = e[(i, j)];
                if (v != 0.0 && v != 1.0) || v != e[(j, i)] {
                    return Err(Error::Domain(format!("invalid flip entry at ({i},{j})")));
                }
            }
        }
        Ok(Self(e))
    }

    /// Flip exactly the listed upper-triangle slots.
    pub fn from_slots(n: usize, slots: &[(usize, usize)]) -> Result<Self> {
        let mut e = Matrix::zeros(n, n);
        for &(i, j) in slots {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { id: i.max(j), n });
            }
            if i != j {
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
            }
        }
        Ok(Self(e))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn flip_count(&self) -> usize {
        let n = self.0.nrows();
        (0..n)
            .map(|i| (i + 1..n).filter(|&j| self.0[(i, j)] != 0.0).count())
            .sum()
    }
}

/// `t(A) = A + C∘E`.
pub fn apply_perturbation(
    g: &Graph,
    c: &ComplementDirection,
    e: &PerturbationSample,
) -> Result<Graph> {
    let n = g.n();
    if c.0.nrows() != n || e.0.nrows() != n {
        return Err(Error::Dimension(format!(
            "graph has {n} nodes, direction {} and flips {}",
            c.0.nrows(),
            e.0.nrows()
        )));
    }
    let t = g.adjacency() + c.0.component_mul(&e.0);
    if t.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Numerical(
            "perturbed adjacency left {0,1}; direction matrix does not match graph".into(),
        ));
    }
    g.with_adjacency(t)
}

/// Expected augmented graph `A + C∘Δ` (fractional).
pub fn expected_view(g: &Graph, c: &ComplementDirection, delta: &Matrix) -> Result<Graph> {
    let n = g.n();
    if c.0.nrows() != n || delta.nrows() != n || delta.ncols() != n {
        return Err(Error::Dimension("expected view shapes disagree".into()));
    }
    let mut t = g.adjacency() + c.0.component_mul(delta);
    // Clamp rounding excursions such as 1 - 0.7 + ... drifting past the box.
    t.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    symmetrize_upper(&mut t);
    g.with_adjacency(t)
}

/// Mirrors the upper triangle onto the lower one and zeroes the diagonal.
pub(crate) fn symmetrize_upper(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = 0.0;
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// `L = I - D̂^{-1/2} A D̂^{-1/2}` with `d̂_i = max(d_i, floor)`.
pub fn normalized_laplacian(g: &Graph, degree_floor: f64) -> Matrix {
    normalized_laplacian_of(g.adjacency(), degree_floor)
}

/// Normalized Laplacian of an arbitrary symmetric weight matrix.
pub fn normalized_laplacian_of(a: &Matrix, degree_floor: f64) -> Matrix {
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = row_sums(a)
        .into_iter()
        .map(|d| d.max(degree_floor).sqrt().recip())
        .collect();
    let mut l = Matrix::from_fn(n, n, |i, j| {
        let off = -inv_sqrt[i] * a[(i, j)] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    });
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (l[(i, j)] + l[(j, i)]);
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    l
}

/// `L_u = D - A`.
pub fn unnormalized_laplacian(g: &Graph) -> Matrix {
    let d = row_sums(g.adjacency());
    let mut l = -g.adjacency().clone();
    for (i, di) in d.into_iter().enumerate() {
        l[(i, i)] += di;
    }
    l
}

/// Balanced stochastic block model; node `i` belongs to block `i * k / n`.
pub fn generate_sbm(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Graph> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let mut rng = seeded(seed);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            let u: f64 = rng.random();
            if u < p {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Graph::from_adjacency(a)?.with_labels(labels)
}

/// Random geometric graph on the unit square: edge iff distance `<= radius`.
pub fn generate_random_geometric(n: usize, radius: f64, seed: u64) -> Graph {
    let mut rng = seeded(seed);
    let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if (dx * dx + dy * dy).sqrt() <= radius {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Graph::from_adjacency(a)
        .and_then(|g| g.with_positions(positions))
        .expect("generated geometric graph is valid")
}

/// Result of parsing an edge-list file.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Reads whitespace-separated `src dst [weight]` lines with 0-based ids.
///
/// Blank lines and lines starting with `#` are skipped. Entries with weight 0
/// are ignored; any positive weight becomes a binary edge. When `n` is `None`
/// the node count is one past the largest id seen.
pub fn load_graph(path: impl AsRef<Path>, n: Option<usize>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut edges = Vec::new();
    let mut self_loops = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(
                lineno,
                format!("expected `src dst [weight]`, got {} fields", fields.len()),
            ));
        }
        let id = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad node id `{s}`: {e}")))
        };
        let (u, v) = (id(fields[0])?, id(fields[1])?);
        if let Some(w) = fields.get(2) {
            let w: f64 = w
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad weight `{w}`: {e}")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(parse_err(
                    lineno,
                    format!("weight {w} must be finite and >= 0"),
                ));
            }
            if w == 0.0 {
                continue;
            }
        }
        if let Some(n) = n {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        edges.push((u.min(v), u.max(v)));
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|&(_, v)| v + 1).max().unwrap_or(0));
    let total = edges.len();
    edges.sort_unstable();
    edges.dedup();
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loop(s)", path.display());
    }
    Ok(LoadedGraph {
        graph: Graph::from_edges(n, &edges)?,
        self_loops_dropped: self_loops,
        duplicates_dropped: total - edges.len(),
    })
}

/// Writes `i j` lines (upper triangle, row-major), preceded by a `# nodes` header.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# nodes {}", g.n())?;
    for (i, j) in g.edges() {
        let a = g.adjacency()[(i, j)];
        if a == 1.0 {
            writeln!(w, "{i} {j}")?;
        } else {
            writeln!(w, "{i} {j} {}", crate::io::fmt_f64(a))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the `# nodes N` header written by [`write_edge_list`], if present.
pub fn declared_node_count(path: impl AsRef<Path>) -> Result<Option<usize>> {
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("# nodes") {
            return Ok(rest.trim().parse().ok());
        }
        if !t.is_empty() && !t.starts_with('#') {
            break;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_path_graph() {
        let f = write_tmp("0 1\n1 2");
        let loaded = load_graph(f.path(), Some(3)).unwrap();
        assert_eq!(loaded.graph, Graph::path(3));
        assert_eq!(loaded.graph.edge_count(), 2);
    }

    #[test]
    fn load_dedups_reversed_edges() {
        let f = write_tmp("0 1\n1 0\n");
        let loaded = load_graph(f.path(), Some(2)).unwrap();
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.duplicates_dropped, 1);
    }

    #[test]
    fn load_drops_self_loops() {
        let f = write_tmp("0 0\n0 1\n");
        let loaded = load_graph(f.path(), Some(2)).unwrap();
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.self_loops_dropped, 1);
    }

    #[test]
    fn load_reports_line_numbers() {
        let f = write_tmp("0 1\n# comment\n1 x\n");
        match load_graph(f.path(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_range_error() {
        let f = write_tmp("0 5\n");
        assert!(matches!(
            load_graph(f.path(), Some(3)),
            Err(Error::NodeOutOfRange { id: 5, n: 3 })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = generate_sbm(12, 2, 0.7, 0.1, 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_edge_list(&g, f.path()).unwrap();
        let n = declared_node_count(f.path()).unwrap();
        assert_eq!(n, Some(12));
        let back = load_graph(f.path(), n).unwrap().graph;
        assert_eq!(back.adjacency(), g.adjacency());
    }

    #[test]
    fn complement_direction_cases() {
        let edge = Graph::path(2);
        let c = complement_direction(&edge).unwrap();
        assert_eq!((c.get(0, 1), c.get(1, 0)), (-1.0, -1.0));

        let c = complement_direction(&Graph::empty(2)).unwrap();
        assert_eq!((c.get(0, 1), c.get(1, 0)), (1.0, 1.0));

        let c = complement_direction(&Graph::complete(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.get(i, j), if i == j { 0.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn complement_direction_rejects_fractional() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 1)] = 0.5;
        a[(1, 0)] = 0.5;
        let g = Graph::from_adjacency(a).unwrap();
        assert!(matches!(complement_direction(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&Graph::complete(3)).0, vec![2.0, 2.0, 2.0]);
        assert_eq!(degrees(&Graph::path(3)).0, vec![1.0, 2.0, 1.0]);
        assert_eq!(degrees(&Graph::empty(2)).0, vec![0.0, 0.0]);
    }

    #[test]
    fn laplacian_examples() {
        let l = normalized_laplacian(&Graph::path(2), DEGREE_FLOOR);
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let l = normalized_laplacian(&Graph::complete(3), DEGREE_FLOOR);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert_abs_diff_eq!(l[(i, j)], want, epsilon = 1e-15);
            }
        }

        let l = normalized_laplacian(&Graph::empty(1), DEGREE_FLOOR);
        assert_eq!(l[(0, 0)], 1.0);

        let lu = unnormalized_laplacian(&Graph::path(2));
        assert_eq!(lu, Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let lu = unnormalized_laplacian(&Graph::complete(3));
        assert_eq!(lu[(0, 0)], 2.0);
        assert_eq!(lu[(0, 1)], -1.0);
    }

    #[test]
    fn unnormalized_rows_sum_to_zero() {
        let g = generate_sbm(20, 2, 0.5, 0.1, 9).unwrap();
        let lu = unnormalized_laplacian(&g);
        for i in 0..20 {
            assert_abs_diff_eq!(lu.row(i).sum(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalized_trace_is_n() {
        let mut a = generate_sbm(15, 3, 0.6, 0.05, 2)
            .unwrap()
            .adjacency()
            .clone();
        // isolate node 0
        for j in 0..15 {
            a[(0, j)] = 0.0;
            a[(j, 0)] = 0.0;
        }
        let l = normalized_laplacian_of(&a, DEGREE_FLOOR);
        assert_abs_diff_eq!(l.trace(), 15.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbation_adds_and_removes() {
        let g = Graph::path(3);
        let c = complement_direction(&g).unwrap();
        let e = PerturbationSample::from_slots(3, &[(0, 1), (0, 2)]).unwrap();
        let t = apply_perturbation(&g, &c, &e).unwrap();
        assert!(!t.has_edge(0, 1));
        assert!(t.has_edge(0, 2));
        assert!(t.has_edge(1, 2));

        let zero = PerturbationSample::from_slots(3, &[]).unwrap();
        assert_eq!(apply_perturbation(&g, &c, &zero).unwrap(), g);
    }

    #[test]
    fn expected_view_examples() {
        let g = Graph::path(3);
        let c = complement_direction(&g).unwrap();
        assert_eq!(expected_view(&g, &c, &Matrix::zeros(3, 3)).unwrap(), g);

        let mut delta = Matrix::zeros(3, 3);
        delta[(0, 1)] = 0.3;
        delta[(1, 0)] = 0.3;
        delta[(0, 2)] = 0.3;
        delta[(2, 0)] = 0.3;
        let v = expected_view(&g, &c, &delta).unwrap();
        assert_abs_diff_eq!(v.adjacency()[(0, 1)], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(v.adjacency()[(0, 2)], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn sbm_extreme_probabilities() {
        let g = generate_sbm(4, 2, 1.0, 0.0, 0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (2, 3)]);
        assert_eq!(g.node_labels().unwrap(), &[0, 0, 1, 1]);
    }

    #[test]
    fn sbm_within_cluster_edge_count() {
        // 3 * C(20,2) = 570 intra slots at p = 0.5: mean 285, sd sqrt(142.5).
        let g = generate_sbm(60, 3, 0.5, 0.02, 7).unwrap();
        let labels = g.node_labels().unwrap();
        let intra = g
            .edges()
            .into_iter()
            .filter(|&(i, j)| labels[i] == labels[j])
            .count() as f64;
        let sd = (570.0f64 * 0.25).sqrt();
        assert!((intra - 285.0).abs() <= 4.0 * sd, "intra = {intra}");
    }

    #[test]
    fn sbm_deterministic_and_validated() {
        assert_eq!(
            generate_sbm(30, 3, 0.4, 0.1, 5).unwrap(),
            generate_sbm(30, 3, 0.4, 0.1, 5).unwrap()
        );
        assert!(generate_sbm(3, 4, 0.5, 0.1, 0).is_err());
        assert!(generate_sbm(6, 2, 0.1, 0.5, 0).is_err());
    }

    #[test]
    fn geometric_extremes() {
        let g = generate_random_geometric(12, std::f64::consts::SQRT_2, 3);
        assert_eq!(g.edge_count(), 66);
        let g = generate_random_geometric(12, 1e-9, 3);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn geometric_matches_pairwise_recheck() {
        let g = generate_random_geometric(30, 0.3, 1);
        let p = g.positions().unwrap();
        let mut count = 0;
        for i in 0..30 {
            for j in i + 1..30 {
                let d = ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt();
                if d <= 0.3 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.edge_count(), count);
        assert_eq!(g, generate_random_geometric(30, 0.3, 1));
    }

    #[test]
    fn components_and_diameter() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.component_count(), 2);
        assert!(matches!(g.diameter(), Err(Error::Disconnected)));
        assert_eq!(Graph::path(5).diameter().unwrap(), 4);
        assert_eq!(Graph::star(4).diameter().unwrap(), 2);
    }

    #[test]
    fn from_adjacency_rejects_bad_input() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(matches!(
            Graph::from_adjacency(a.clone()),
            Err(Error::NotSymmetric(_))
        ));
        a[(1, 0)] = 1.0;
        a[(0, 0)] = 1.0;
        assert!(Graph::from_adjacency(a).is_err());
    }
}
