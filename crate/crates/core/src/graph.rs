//! Sparse undirected graphs and the operators derived from them.
//!
//! [`Graph`] is a CSR adjacency with sorted neighbor lists. From it we build
//! the symmetric normalized adjacency `D^-1/2 A D^-1/2` and the triangle
//! hypergraph ([`TriangleSet`]) that carries the order-3 adjacency tensor,
//! the hyperdegrees and the co-degree matrix.
//!
//! Tensor convention: a triangle `{i, j, k}` with weight `tau` puts `tau` on
//! all six ordered permutations of the triple. Hence the hyperdegree of a
//! node is twice the weight of its incident triangles, and the co-degree of
//! an edge is the weight of the triangles through it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::ScoreMatrix;

/// One line of an edge list. A missing weight means 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub weight: Option<f64>,
}

impl EdgeRecord {
    pub fn new(u: usize, v: usize) -> Self {
        Self { u, v, weight: None }
    }

    pub fn weighted(u: usize, v: usize, weight: f64) -> Self {
        Self {
            u,
            v,
            weight: Some(weight),
        }
    }
}

impl From<(usize, usize)> for EdgeRecord {
    fn from((u, v): (usize, usize)) -> Self {
        Self::new(u, v)
    }
}

impl From<(usize, usize, f64)> for EdgeRecord {
    fn from((u, v, w): (usize, usize, f64)) -> Self {
        Self::weighted(u, v, w)
    }
}

/// Undirected weighted graph in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    self_loops_dropped: usize,
}

impl Graph {
    /// Builds a graph from an edge list.
    ///
    /// With `num_nodes = None` the node count is one past the largest id.
    /// Duplicate edges (in either orientation) are merged by summing their
    /// weights; self-loops are dropped and counted.
    pub fn from_edges<E>(edges: &[E], num_nodes: Option<usize>) -> Result<Self>
    where
        E: Copy + Into<EdgeRecord>,
    {
        if edges.is_empty() {
            return Err(Error::EmptyEdgeList);
        }
        let records: Vec<EdgeRecord> = edges.iter().map(|&e| e.into()).collect();
        let max_id = records.iter().map(|e| e.u.max(e.v)).max().unwrap_or(0);
        let n = match num_nodes {
            Some(n) => {
                if max_id >= n {
                    return Err(Error::NodeOutOfRange { id: max_id, n });
                }
                n
            }
            None => max_id + 1,
        };

        let mut directed = Vec::with_capacity(records.len() * 2);
        let mut self_loops_dropped = 0;
        for e in &records {
            let w = e.weight.unwrap_or(1.0);
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    u: e.u,
                    v: e.v,
                    weight: w,
                });
            }
            if e.u == e.v {
                self_loops_dropped += 1;
                continue;
            }
            directed.push((e.u, e.v, w));
            directed.push((e.v, e.u, w));
        }
        if self_loops_dropped > 0 {
            log::warn!("dropped {self_loops_dropped} self-loop(s)");
        }
        // Stable sort keeps the summation order of duplicates equal to input order.
        directed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut offsets = vec![0usize; n + 1];
        let mut neighbors = Vec::with_capacity(directed.len());
        let mut weights: Vec<f64> = Vec::with_capacity(directed.len());
        let mut last: Option<(usize, usize)> = None;
        for &(u, v, w) in &directed {
            if last == Some((u, v)) {
                *weights.last_mut().expect("duplicate follows an entry") += w;
                continue;
            }
            last = Some((u, v));
            neighbors.push(v);
            weights.push(w);
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let degrees = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            offsets,
            neighbors,
            weights,
            degrees,
            self_loops_dropped,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of stored adjacency entries (each undirected edge counted twice).
    pub fn num_directed_entries(&self) -> usize {
        self.neighbors.len()
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    /// Weighted degree vector `d_i = sum_j A_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Number of distinct neighbors of `i`.
    pub fn unweighted_degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Sorted neighbor ids of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Edge weights aligned with [`Graph::neighbors`].
    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.slot(u, v).map(|s| self.weights[s])
    }

    /// Whether every edge has weight exactly 1.
    pub fn is_unit_weight(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    fn slot(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|p| self.offsets[u] + p)
    }

    /// Iterates undirected edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.neighbor_weights(u))
                .filter(move |(&v, _)| u < v)
                .map(move |(&v, &w)| (u, v, w))
        })
    }
}

/// `S = D^-1/2 A D^-1/2`, sharing the sparsity pattern of its graph.
///
/// Isolated nodes have zero rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(graph: &Graph) -> Self {
        let d = graph.degrees();
        let mut values = Vec::with_capacity(graph.num_directed_entries());
        for i in 0..graph.num_nodes() {
            for (&j, &w) in graph.neighbors(i).iter().zip(graph.neighbor_weights(i)) {
                // both endpoints of an edge have positive degree
                values.push(w / (d[i] * d[j]).sqrt());
            }
        }
        Self {
            offsets: graph.offsets.clone(),
            indices: graph.neighbors.clone(),
            values,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// Dense copy, for small graphs and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_nodes();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// `S * F`. Rows are computed independently, so the result does not
    /// depend on the thread count.
    pub fn apply(&self, f: &ScoreMatrix) -> ScoreMatrix {
        let c = f.cols();
        let mut out = ScoreMatrix::zeros(f.rows(), c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(c)
            .enumerate()
            .for_each(|(i, acc)| {
                for (j, s) in self.row(i) {
                    for (a, &x) in acc.iter_mut().zip(f.row(j)) {
                        *a += s * x;
                    }
                }
            });
        out
    }
}

/// How a triangle's weight derives from its three edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriangleWeight {
    /// Every triangle has weight 1.
    Unit,
    /// Geometric mean of the three edge weights (1 on unit-weight graphs).
    #[default]
    GeometricMean,
    /// Smallest of the three edge weights.
    Minimum,
}

impl TriangleWeight {
    fn weigh(self, a: f64, b: f64, c: f64) -> f64 {
        match self {
            TriangleWeight::Unit => 1.0,
            TriangleWeight::GeometricMean => (a * b * c).cbrt(),
            TriangleWeight::Minimum => a.min(b).min(c),
        }
    }
}

/// The triangles of a graph viewed as a 3-uniform hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSet {
    num_nodes: usize,
    triangles: Vec<[usize; 3]>,
    weights: Vec<f64>,
    hyperdegrees: Vec<f64>,
    // Co-degree matrix B over the graph's sparsity pattern.
    codegree_offsets: Vec<usize>,
    codegree_indices: Vec<usize>,
    codegree_values: Vec<f64>,
    // Triangle ids incident to each node, ascending.
    incidence_offsets: Vec<usize>,
    incidence: Vec<usize>,
}

impl TriangleSet {
    /// Enumerates all triangles with the degree-ordered forward algorithm.
    pub fn enumerate(graph: &Graph, rule: TriangleWeight) -> Self {
        let n = graph.num_nodes();
        // Rank nodes by (degree, id); orient every edge from lower to higher rank.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (graph.unweighted_degree(v), v));
        let mut rank = vec![0usize; n];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        let forward: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|u| {
                graph
                    .neighbors(u)
                    .iter()
                    .copied()
                    .filter(|&v| rank[v] > rank[u])
                    .collect()
            })
            .collect();

        let mut triangles: Vec<[usize; 3]> = (0..n)
            .into_par_iter()
            .flat_map_iter(|u| {
                let out_u = &forward[u];
                let mut found = Vec::new();
                for &v in out_u {
                    intersect_sorted(out_u, &forward[v], |w| {
                        let mut t = [u, v, w];
                        t.sort_unstable();
                        found.push(t);
                    });
                }
                found
            })
            .collect();
        triangles.par_sort_unstable();

        let weights = triangles
            .iter()
            .map(|&[i, j, k]| {
                let w = |a, b| graph.edge_weight(a, b).expect("triangle edge exists");
                rule.weigh(w(i, j), w(i, k), w(j, k))
            })
            .collect();
        Self::assemble(graph, triangles, weights)
    }

    /// Builds a set from an explicit triangle list. Triples are sorted and
    /// the list put in canonical order, so the result does not depend on the
    /// input order.
    pub fn from_triangles(graph: &Graph, triangles: &[([usize; 3], f64)]) -> Result<Self> {
        let mut list: Vec<([usize; 3], f64)> = triangles
            .iter()
            .map(|&(mut t, w)| {
                t.sort_unstable();
                (t, w)
            })
            .collect();
        for &(t, w) in &list {
            let [i, j, k] = t;
            if !(w > 0.0) {
                return Err(Error::param("triangle weight", format!("{w} is not positive")));
            }
            if i == j || j == k {
                return Err(Error::param("triangle", format!("{t:?} repeats a node")));
            }
            for (a, b) in [(i, j), (i, k), (j, k)] {
                if b >= graph.num_nodes() {
                    return Err(Error::NodeOutOfRange {
                        id: b,
                        n: graph.num_nodes(),
                    });
                }
                if graph.edge_weight(a, b).is_none() {
                    return Err(Error::param("triangle", format!("{t:?} is not a 3-clique")));
                }
            }
        }
        list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (tris, weights) = list.into_iter().unzip();
        Ok(Self::assemble(graph, tris, weights))
    }

    fn assemble(graph: &Graph, triangles: Vec<[usize; 3]>, weights: Vec<f64>) -> Self {
        let n = graph.num_nodes();
        let mut hyperdegrees = vec![0.0; n];
        let codegree_offsets = graph.offsets.clone();
        let codegree_indices = graph.neighbors.clone();
        let mut codegree_values = vec![0.0; codegree_indices.len()];
        let mut counts = vec![0usize; n + 1];

        for (&[i, j, k], &tau) in triangles.iter().zip(&weights) {
            for v in [i, j, k] {
                hyperdegrees[v] += 2.0 * tau;
                counts[v + 1] += 1;
            }
            for (a, b) in [(i, j), (i, k), (j, k)] {
                let sa = graph.slot(a, b).expect("triangle edge exists");
                let sb = graph.slot(b, a).expect("triangle edge exists");
                codegree_values[sa] += tau;
                codegree_values[sb] += tau;
            }
        }

        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let incidence_offsets = counts;
        let mut cursor = incidence_offsets.clone();
        let mut incidence = vec![0usize; incidence_offsets[n]];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                incidence[cursor[v]] = t;
                cursor[v] += 1;
            }
        }

        Self {
            num_nodes: n,
            triangles,
            weights,
            hyperdegrees,
            codegree_offsets,
            codegree_indices,
            codegree_values,
            incidence_offsets,
            incidence,
        }
    }

    /// A set with no triangles over `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            num_nodes: n,
            triangles: Vec::new(),
            weights: Vec::new(),
            hyperdegrees: vec![0.0; n],
            codegree_offsets: vec![0; n + 1],
            codegree_indices: Vec::new(),
            codegree_values: Vec::new(),
            incidence_offsets: vec![0; n + 1],
            incidence: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Sorted triples `i < j < k`, in lexicographic order.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `delta_i = sum_jk A_ijk`.
    pub fn hyperdegrees(&self) -> &[f64] {
        &self.hyperdegrees
    }

    /// Ids of the triangles containing `v`, ascending.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[self.incidence_offsets[v]..self.incidence_offsets[v + 1]]
    }

    /// Number of triangles containing `v`.
    pub fn triangle_count(&self, v: usize) -> usize {
        self.incidence_offsets[v + 1] - self.incidence_offsets[v]
    }

    /// `(j, B_ij)` for the nonzero co-degrees in row `i`.
    pub fn codegree_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.codegree_offsets[i]..self.codegree_offsets[i + 1];
        self.codegree_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.codegree_values[r].iter().copied())
            .filter(|&(_, b)| b != 0.0)
    }

    pub fn codegree(&self, i: usize, j: usize) -> f64 {
        let r = self.codegree_offsets[i]..self.codegree_offsets[i + 1];
        match self.codegree_indices[r.clone()].binary_search(&j) {
            Ok(p) => self.codegree_values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// The two other vertices and the weight of triangle `t` seen from `v`.
    #[inline]
    pub(crate) fn others(&self, t: usize, v: usize) -> (usize, usize, f64) {
        let [a, b, c] = self.triangles[t];
        let tau = self.weights[t];
        if v == a {
            (b, c, tau)
        } else if v == b {
            (a, c, tau)
        } else {
            (a, b, tau)
        }
    }
}

/// Local clustering coefficient `2 T_i / (k_i (k_i - 1))` from unweighted
/// triangle counts and degrees; zero when `k_i < 2`.
pub fn clustering_coefficients(graph: &Graph, triangles: &TriangleSet) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|i| {
            let k = graph.unweighted_degree(i);
            if k < 2 {
                0.0
            } else {
                2.0 * triangles.triangle_count(i) as f64 / (k * (k - 1)) as f64
            }
        })
        .collect()
}

/// Zero-degree convention: `1/sqrt(0)` is taken as 0.
#[inline]
pub(crate) fn inv_sqrt(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d.sqrt()
    } else {
        0.0
    }
}

fn intersect_sorted(a: &[usize], b: &[usize], mut emit: impl FnMut(usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                emit(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}
