//! Graph connectivity and infinitesimal rigidity of planar frameworks.
//!
//! A framework is an undirected graph plus one planar position per vertex.
//! It is infinitesimally rigid when its rigidity matrix (the Jacobian of the
//! squared edge lengths) has rank `2N - 3`. The *rigidity eigenvalue* is the
//! fourth-smallest eigenvalue of `RᵀR`: the first one above the
//! three-dimensional kernel spanned by rigid-body motions. It is strictly
//! positive exactly when the framework is rigid, which makes it usable as a
//! runtime health indicator.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::linalg::{numerical_rank, singular_values, symmetric_eigen, Matrix};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigidityError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("invalid framework: {0}")]
    InvalidFramework(String),
}

/// Unordered vertex pair, stored with `i < j`.
pub type Edge = (usize, usize);

pub fn normalize_edge(i: usize, j: usize) -> Edge {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Validates and normalises the edge list. `(i, j)` and `(j, i)` denote the
    /// same edge; listing both is a duplicate.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, RigidityError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (i, j) in edges {
            if i == j {
                return Err(RigidityError::SelfLoop(i));
            }
            if i >= n_vertices || j >= n_vertices {
                return Err(RigidityError::VertexOutOfRange(i, j, n_vertices));
            }
            let e = normalize_edge(i, j);
            if !seen.insert(e) {
                return Err(RigidityError::DuplicateEdge(i, j));
            }
            out.push(e);
        }
        Ok(Self { n_vertices, edges: out })
    }

    pub fn empty(n_vertices: usize) -> Self {
        Self { n_vertices, edges: Vec::new() }
    }

    pub fn complete(n_vertices: usize) -> Self {
        let edges = (0..n_vertices).flat_map(|i| (i + 1..n_vertices).map(move |j| (i, j))).collect();
        Self { n_vertices, edges }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let e = normalize_edge(i, j);
        self.edges.contains(&e)
    }

    /// Adds an edge; returns `Ok(false)` when it already exists.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool, RigidityError> {
        if i == j {
            return Err(RigidityError::SelfLoop(i));
        }
        if i >= self.n_vertices || j >= self.n_vertices {
            return Err(RigidityError::VertexOutOfRange(i, j, self.n_vertices));
        }
        if self.has_edge(i, j) {
            return Ok(false);
        }
        self.edges.push(normalize_edge(i, j));
        Ok(true)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == v || j == v).count()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(i, j)| {
            if i == v {
                Some(j)
            } else if j == v {
                Some(i)
            } else {
                None
            }
        })
    }
}

/// A graph with one planar position per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Framework<T> {
    pub graph: Graph,
    pub positions: Vec<Vec2<T>>,
}

impl<T: Real> Framework<T> {
    pub fn new(graph: Graph, positions: Vec<Vec2<T>>) -> Result<Self, RigidityError> {
        let fw = Self { graph, positions };
        fw.validate()?;
        Ok(fw)
    }

    pub fn validate(&self) -> Result<(), RigidityError> {
        if self.positions.len() != self.graph.n_vertices() {
            return Err(RigidityError::InvalidFramework(format!(
                "{} positions for {} vertices",
                self.positions.len(),
                self.graph.n_vertices()
            )));
        }
        if let Some(i) = self.positions.iter().position(|p| !p.is_finite()) {
            return Err(RigidityError::InvalidFramework(format!("non-finite position for vertex {i}")));
        }
        Ok(())
    }

    /// Stacked coordinate vector `[x0, y0, x1, y1, ...]`.
    pub fn stacked(&self) -> Vec<T> {
        self.positions.iter().flat_map(|p| [p.x, p.y]).collect()
    }
}

/// Graph Laplacian `L = D - A`.
pub fn laplacian<T: Real>(graph: &Graph) -> Matrix<T> {
    let n = graph.n_vertices();
    let mut l = Matrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        l[(i, i)] += T::one();
        l[(j, j)] += T::one();
        l[(i, j)] -= T::one();
        l[(j, i)] -= T::one();
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connectivity<T> {
    pub connected: bool,
    /// Algebraic connectivity (second-smallest Laplacian eigenvalue). Zero for
    /// a single vertex.
    pub lambda2: T,
}

/// Connectivity via the algebraic connectivity of the Laplacian.
pub fn is_connected<T: Real>(graph: &Graph, tol: T) -> Result<Connectivity<T>, RigidityError> {
    let n = graph.n_vertices();
    if n == 0 {
        return Err(RigidityError::EmptyGraph);
    }
    if n == 1 {
        return Ok(Connectivity { connected: true, lambda2: T::zero() });
    }
    let eig = symmetric_eigen(&laplacian::<T>(graph));
    let lambda2 = eig.values[1].max(T::zero());
    Ok(Connectivity { connected: lambda2 > tol, lambda2 })
}

/// Rigidity matrix: `|E| x 2N` Jacobian of the squared edge lengths.
pub fn rigidity_matrix<T: Real>(fw: &Framework<T>) -> Matrix<T> {
    let n = fw.graph.n_vertices();
    let mut r = Matrix::zeros(fw.graph.n_edges(), 2 * n);
    for (row, &(i, j)) in fw.graph.edges().iter().enumerate() {
        let d = fw.positions[i] - fw.positions[j];
        let two = T::lit(2.0);
        r[(row, 2 * i)] = two * d.x;
        r[(row, 2 * i + 1)] = two * d.y;
        r[(row, 2 * j)] = -two * d.x;
        r[(row, 2 * j + 1)] = -two * d.y;
    }
    r
}

/// Thresholds used by [`rigidity_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityTolerances<T> {
    /// Singular value `s` counts toward the rank iff `s > rank_rel * s_max`.
    pub rank_rel: T,
    /// Positivity threshold for the rigidity eigenvalue.
    pub eigenvalue: T,
    /// Positivity threshold for the Laplacian's second eigenvalue.
    pub connectivity: T,
}

impl<T: Real> Default for RigidityTolerances<T> {
    fn default() -> Self {
        Self { rank_rel: T::lit(1e-9), eigenvalue: T::lit(1e-6), connectivity: T::lit(1e-9) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport<T> {
    pub laplacian_lambda2: T,
    pub rigidity_rank: usize,
    pub rigidity_eigenvalue: T,
    pub is_connected: bool,
    pub is_rigid: bool,
    /// Fewer than three vertices: reported as non-rigid.
    pub degenerate: bool,
}

impl<T: Real> RigidityReport<T> {
    /// Whether the rigidity eigenvalue clears `tol`.
    pub fn eigenvalue_positive(&self, tol: T) -> bool {
        self.rigidity_eigenvalue > tol
    }
}

/// Full connectivity and infinitesimal-rigidity report for a framework.
pub fn rigidity_report<T: Real>(
    fw: &Framework<T>,
    tol: &RigidityTolerances<T>,
) -> Result<RigidityReport<T>, RigidityError> {
    fw.validate()?;
    let n = fw.graph.n_vertices();
    let conn = is_connected(&fw.graph, tol.connectivity)?;
    let r = rigidity_matrix(fw);
    let rank = if r.rows() == 0 { 0 } else { numerical_rank(&r, tol.rank_rel) };
    if n < 3 {
        return Ok(RigidityReport {
            laplacian_lambda2: conn.lambda2,
            rigidity_rank: rank,
            rigidity_eigenvalue: T::zero(),
            is_connected: conn.connected,
            is_rigid: false,
            degenerate: true,
        });
    }
    let eig = symmetric_eigen(&r.gram());
    let lambda4 = eig.values[3].max(T::zero());
    Ok(RigidityReport {
        laplacian_lambda2: conn.lambda2,
        rigidity_rank: rank,
        rigidity_eigenvalue: lambda4,
        is_connected: conn.connected,
        is_rigid: rank == 2 * n - 3,
        degenerate: false,
    })
}

/// Singular values of the rigidity matrix, descending.
pub fn rigidity_singular_values<T: Real>(fw: &Framework<T>) -> Vec<T> {
    singular_values(&rigidity_matrix(fw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fw(edges: &[Edge], pts: &[(f64, f64)]) -> Framework<f64> {
        let g = Graph::new(pts.len(), edges.iter().copied()).unwrap();
        Framework::new(g, pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
    }

    fn k3() -> Vec<Edge> {
        vec![(0, 1), (0, 2), (1, 2)]
    }

    #[test]
    fn graph_validation() {
        assert_eq!(Graph::new(2, [(1, 1)]), Err(RigidityError::SelfLoop(1)));
        assert_eq!(Graph::new(2, [(0, 1), (1, 0)]), Err(RigidityError::DuplicateEdge(1, 0)));
        assert!(matches!(Graph::new(2, [(0, 2)]), Err(RigidityError::VertexOutOfRange(..))));
        let mut g = Graph::new(3, [(2, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
        assert!(g.has_edge(2, 0));
        assert_eq!(g.add_edge(0, 2), Ok(false));
        assert_eq!(g.add_edge(1, 0), Ok(true));
        assert_eq!(g.degree(0), 2);
        assert_eq!(Graph::complete(5).n_edges(), 10);
    }

    #[test]
    fn laplacian_examples() {
        let l: Matrix<f64> = laplacian(&Graph::complete(2));
        assert_eq!(l, Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]));
        let l: Matrix<f64> = laplacian(&Graph::new(4, [(0, 1), (2, 3)]).unwrap());
        let k2 = [[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i / 2 == j / 2 { k2[i % 2][j % 2] } else { 0.0 };
                assert_eq!(l[(i, j)], expect);
            }
        }
        let l: Matrix<f64> = laplacian(&Graph::complete(3));
        assert_eq!(
            l,
            Matrix::from_rows(&[vec![2.0, -1.0, -1.0], vec![-1.0, 2.0, -1.0], vec![-1.0, -1.0, 2.0]])
        );
    }

    #[test]
    fn connectivity_examples() {
        let c = is_connected::<f64>(&Graph::complete(2), 1e-9).unwrap();
        assert!(c.connected && (c.lambda2 - 2.0).abs() < 1e-12);
        let c = is_connected::<f64>(&Graph::new(4, [(0, 1), (2, 3)]).unwrap(), 1e-9).unwrap();
        assert!(!c.connected && c.lambda2.abs() < 1e-12);
        // P3 Laplacian [[1,-1,0],[-1,2,-1],[0,-1,1]] has spectrum {0, 1, 3}.
        let c = is_connected::<f64>(&Graph::new(3, [(0, 1), (1, 2)]).unwrap(), 1e-9).unwrap();
        assert!(c.connected && (c.lambda2 - 1.0).abs() < 1e-12);
        assert_eq!(is_connected::<f64>(&Graph::empty(0), 1e-9), Err(RigidityError::EmptyGraph));
    }

    #[test]
    fn rigidity_matrix_rows() {
        let f = fw(&k3(), &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let r = rigidity_matrix(&f);
        assert_eq!(r.shape(), (3, 6));
        assert_eq!(r.row(0), &[-2.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let shifted = fw(&k3(), &[(5.0, -3.0), (6.0, -3.0), (5.0, -2.0)]);
        assert_eq!(rigidity_matrix(&shifted), r);
    }

    #[test]
    fn canonical_rigidity_cases() {
        let tol = RigidityTolerances::default();
        let tri = rigidity_report(&fw(&k3(), &[(0.0, 0.0), (1.0, 0.0), (0.5, 1.0)]), &tol).unwrap();
        assert!(tri.is_rigid && tri.rigidity_rank == 3 && tri.rigidity_eigenvalue > 1e-6);
        let line = rigidity_report(&fw(&k3(), &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), &tol).unwrap();
        assert!(!line.is_rigid && line.rigidity_rank <= 2 && line.rigidity_eigenvalue < 1e-6);
        let square = fw(&[(0, 1), (1, 2), (2, 3), (3, 0)], &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let sq = rigidity_report(&square, &tol).unwrap();
        assert!(!sq.is_rigid && sq.rigidity_rank == 4 && sq.is_connected);
    }

    #[test]
    fn small_frameworks_are_degenerate() {
        let r = rigidity_report(&fw(&[(0, 1)], &[(0.0, 0.0), (1.0, 0.0)]), &RigidityTolerances::default()).unwrap();
        assert!(r.degenerate && !r.is_rigid && r.is_connected && r.rigidity_rank == 1);
    }

    #[test]
    fn rejects_non_finite_positions() {
        let g = Graph::complete(3);
        let bad = Framework { graph: g, positions: vec![Vec2::new(0.0, f64::NAN), Vec2::zero(), Vec2::zero()] };
        assert!(matches!(
            rigidity_report(&bad, &RigidityTolerances::default()),
            Err(RigidityError::InvalidFramework(_))
        ));
    }

    #[test]
    fn single_precision_triangle() {
        let g = Graph::complete(3);
        let f = Framework::new(g, vec![Vec2::new(0.0f32, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 1.0)]).unwrap();
        let tol = RigidityTolerances { rank_rel: 1e-4, eigenvalue: 1e-3, connectivity: 1e-4 };
        assert!(rigidity_report(&f, &tol).unwrap().is_rigid);
    }
}
