//! 0-dimensional Vietoris-Rips persistence of finite point clouds.
//!
//! For a cloud of `n` points the 0-dimensional barcode consists of the
//! `n - 1` merge radii of its connected components, which coincide with the
//! edge lengths of a Euclidean minimum spanning tree. The barcode is computed
//! with Kruskal's algorithm over the dense distance graph; edges are processed
//! in ascending `(length, i, j)` order so that results are reproducible even
//! when distances tie. The death-time multiset is tie-independent, but the
//! edge attribution (which index pair a death-time is charged to) is not.

use crate::error::{Error, Result};

/// A finite set of points in d-dimensional Euclidean space.
///
/// Invariants enforced at construction: at least one point, all points share
/// the same dimension `d >= 1`, and every coordinate is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid_input("point cloud must contain at least one point"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid_input("points must have dimension >= 1"));
        }
        for (idx, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid_input(format!(
                    "point {idx} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "point {idx} has a non-finite coordinate"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Builds a cloud from a flat row-major buffer of `n * dim` coordinates.
    pub fn from_flat(data: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid_input("points must have dimension >= 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid_input(format!(
                "flat buffer of length {} is not a nonzero multiple of dim {dim}",
                data.len()
            )));
        }
        Self::new(data.chunks(dim).map(|c| c.to_vec()).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction requires n >= 1.
        false
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Full symmetric matrix of pairwise Euclidean distances, zero diagonal.
pub fn pairwise_distances(cloud: &PointCloud) -> Vec<Vec<f64>> {
    let n = cloud.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(cloud.point(i), cloud.point(j));
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// One merge event: components containing points `i` and `j` join at radius
/// `length` (the Euclidean distance between the endpoints). Canonically
/// `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// The 0-dimensional persistence barcode: `n - 1` death-times attributed to
/// minimum-spanning-tree edges, sorted ascending by length (ties by `(i, j)`).
/// Births at radius 0 are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Barcode {
    deaths: Vec<MstEdge>,
}

impl Barcode {
    pub fn deaths(&self) -> &[MstEdge] {
        &self.deaths
    }

    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    /// Death-time lengths in ascending order.
    pub fn lengths(&self) -> Vec<f64> {
        self.deaths.iter().map(|e| e.length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.deaths.iter().map(|e| e.length).sum()
    }

    /// Largest death-time, or `None` for a single-point cloud.
    pub fn max_length(&self) -> Option<f64> {
        self.deaths.last().map(|e| e.length)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Returns false if the two nodes were already in one component.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] += 1;
        }
        true
    }
}

/// Computes the 0-dimensional barcode of `cloud`.
///
/// Kruskal over all `n(n-1)/2` edges sorted by `(length, i, j)`; the accepted
/// edges form a minimum spanning tree and are returned in acceptance order,
/// i.e. ascending by death-time.
pub fn barcode(cloud: &PointCloud) -> Barcode {
    let n = cloud.len();
    if n == 1 {
        return Barcode { deaths: Vec::new() };
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(MstEdge {
                i,
                j,
                length: euclidean(cloud.point(i), cloud.point(j)),
            });
        }
    }
    edges.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .expect("finite coordinates yield finite distances")
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut uf = UnionFind::new(n);
    let mut deaths = Vec::with_capacity(n - 1);
    for e in edges {
        if uf.union(e.i, e.j) {
            deaths.push(e);
            if deaths.len() == n - 1 {
                break;
            }
        }
    }
    Barcode { deaths }
}

/// True iff every death-time of `cloud` is strictly less than `beta`.
///
/// Coincident points produce death-time 0 and count as connected: the
/// predicate is `length < beta` with no lower bound, since only distinct
/// points can have positive deaths.
pub fn is_beta_connected(cloud: &PointCloud, beta: f64) -> Result<bool> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid_input(format!("beta must be positive, got {beta}")));
    }
    Ok(barcode(cloud).deaths().iter().all(|e| e.length < beta))
}

/// Gradients of a weighted sum of death-times with respect to the point
/// coordinates.
#[derive(Debug, Clone)]
pub struct BarcodeGradient {
    /// One gradient vector per point, same order and dimension as the cloud.
    pub gradients: Vec<Vec<f64>>,
    /// Number of zero-length edges that received a nonzero upstream value.
    /// Their gradient is undefined; the subgradient 0 is used instead.
    pub degenerate_edges: usize,
}

impl BarcodeGradient {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_edges > 0
    }
}

/// Backpropagates `upstream` scalars (one per death-time) through the barcode.
///
/// A death-time attributed to edge `(i, j)` with unit direction
/// `u = (z_j - z_i) / |z_j - z_i|` contributes `-s * u` to the gradient at
/// `z_i` and `+s * u` at `z_j`, where `s` is the matching upstream scalar.
/// Contributions accumulate over edges; points on no selected edge stay zero.
pub fn barcode_backward(
    cloud: &PointCloud,
    barcode: &Barcode,
    upstream: &[f64],
) -> Result<BarcodeGradient> {
    if upstream.len() != barcode.len() {
        return Err(Error::invalid_input(format!(
            "upstream has {} values but the barcode has {} death-times",
            upstream.len(),
            barcode.len()
        )));
    }
    let n = cloud.len();
    let dim = cloud.dim();
    let mut gradients = vec![vec![0.0; dim]; n];
    let mut degenerate_edges = 0;
    for (edge, &s) in barcode.deaths().iter().zip(upstream) {
        if edge.i >= n || edge.j >= n {
            return Err(Error::invalid_input(format!(
                "barcode edge ({}, {}) out of range for a cloud of {n} points",
                edge.i, edge.j
            )));
        }
        if edge.length == 0.0 {
            if s != 0.0 {
                degenerate_edges += 1;
            }
            continue;
        }
        let zi = cloud.point(edge.i);
        let zj = cloud.point(edge.j);
        for k in 0..dim {
            let u = (zj[k] - zi[k]) / edge.length;
            gradients[edge.i][k] -= s * u;
            gradients[edge.j][k] += s * u;
        }
    }
    Ok(BarcodeGradient {
        gradients,
        degenerate_edges,
    })
}
