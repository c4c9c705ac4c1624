//! Formation graphs, incidence matrices and rigidity.
//!
//! Edges are ordered pairs `(tail, head)` with zero-based agent indices. The
//! incidence matrix carries `+1` at the tail and `-1` at the head of every
//! column, so the relative position of edge `k` is `z_k = p_tail - p_head`.
//! The tail of an edge is also its estimating agent.

use std::fmt;

use crate::error::{invalid, Result};
use crate::numlin::{self, Mat};

/// Relative rank threshold for rigidity tests.
pub const RIGIDITY_RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

impl Edge {
    pub fn new(tail: usize, head: usize) -> Self {
        Self { tail, head }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormationGraph {
    n: usize,
    edges: Vec<Edge>,
    incidence: Mat,
    tail_split: Mat,
    head_split: Mat,
}

impl FormationGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n < 2 {
            return invalid(format!("a formation needs at least two agents, got {n}"));
        }
        if edges.is_empty() {
            return invalid("a formation needs at least one edge");
        }
        for (k, e) in edges.iter().enumerate() {
            if e.tail >= n || e.head >= n {
                return invalid(format!("edge {k} ({}, {}) references a missing agent", e.tail, e.head));
            }
            if e.tail == e.head {
                return invalid(format!("edge {k} is a self-loop on agent {}", e.tail));
            }
            for (j, other) in edges[..k].iter().enumerate() {
                let same = (other.tail == e.tail && other.head == e.head)
                    || (other.tail == e.head && other.head == e.tail);
                if same {
                    return invalid(format!("edges {j} and {k} join the same pair of agents"));
                }
            }
        }
        let ne = edges.len();
        let mut incidence = Mat::zeros(n, ne);
        let mut tail_split = Mat::zeros(n, ne);
        let mut head_split = Mat::zeros(n, ne);
        for (k, e) in edges.iter().enumerate() {
            incidence[(e.tail, k)] = 1.0;
            incidence[(e.head, k)] = -1.0;
            tail_split[(e.tail, k)] = 1.0;
            head_split[(e.head, k)] = -1.0;
        }
        Ok(Self { n, edges, incidence, tail_split, head_split })
    }

    /// Reads edges off an incidence matrix (one `+1` tail and one `-1` head
    /// per column).
    pub fn from_incidence(b: &Mat) -> Result<Self> {
        let mut edges = Vec::with_capacity(b.cols());
        for k in 0..b.cols() {
            let mut tail = None;
            let mut head = None;
            for i in 0..b.rows() {
                match b[(i, k)] {
                    x if x == 1.0 && tail.is_none() => tail = Some(i),
                    x if x == -1.0 && head.is_none() => head = Some(i),
                    x if x == 0.0 => {}
                    x => return invalid(format!("incidence column {k} has unexpected entry {x} in row {i}")),
                }
            }
            match (tail, head) {
                (Some(t), Some(h)) => edges.push(Edge::new(t, h)),
                _ => return invalid(format!("incidence column {k} needs exactly one +1 and one -1")),
            }
        }
        Self::new(b.rows(), edges)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `B`, size `n × |E|`.
    pub fn incidence(&self) -> &Mat {
        &self.incidence
    }

    /// `S₁`: the `+1` (tail) entries of `B`.
    pub fn tail_split(&self) -> &Mat {
        &self.tail_split
    }

    /// `S₂ = B − S₁`: the `-1` (head) entries of `B`.
    pub fn head_split(&self) -> &Mat {
        &self.head_split
    }

    /// Edges incident to `agent`, with `+1` when the agent is the tail.
    pub fn incident_edges(&self, agent: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges.iter().enumerate().filter_map(move |(k, e)| {
            if e.tail == agent {
                Some((k, 1.0))
            } else if e.head == agent {
                Some((k, -1.0))
            } else {
                None
            }
        })
    }

    /// Whether the directed graph of estimating agents (tail → head) has a
    /// directed cycle.
    pub fn has_directed_cycle(&self) -> bool {
        // Kahn's algorithm
        let mut indeg = vec![0usize; self.n];
        for e in &self.edges {
            indeg[e.head] += 1;
        }
        let mut stack: Vec<usize> = (0..self.n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for e in self.edges.iter().filter(|e| e.tail == i) {
                indeg[e.head] -= 1;
                if indeg[e.head] == 0 {
                    stack.push(e.head);
                }
            }
        }
        seen < self.n
    }
}

/// Desired shape: ambient dimension, desired relative positions `z*` and
/// the distances `d_k = ‖z*_k‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    dim: usize,
    zstar: Vec<f64>,
    distances: Vec<f64>,
}

impl ShapeSpec {
    pub fn from_relative(graph: &FormationGraph, dim: usize, zstar: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if zstar.len() != graph.edge_count() * dim {
            return invalid(format!(
                "z* has {} entries, expected {} edges x {dim}",
                zstar.len(),
                graph.edge_count()
            ));
        }
        if zstar.iter().any(|x| !x.is_finite()) {
            return invalid("z* has non-finite entries");
        }
        let distances: Vec<f64> = zstar.chunks(dim).map(numlin::norm).collect();
        if let Some(k) = distances.iter().position(|&d| d <= 0.0) {
            return invalid(format!("edge {k} has zero desired length"));
        }
        Ok(Self { dim, zstar, distances })
    }

    /// Shape generated by placing the agents at `positions` (stacked).
    pub fn from_positions(graph: &FormationGraph, dim: usize, positions: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let z = relative_positions(graph, positions, dim)?;
        Self::from_relative(graph, dim, z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn zstar(&self) -> &[f64] {
        &self.zstar
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn squared_distances(&self) -> Vec<f64> {
        self.distances.iter().map(|d| d * d).collect()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        invalid(format!("ambient dimension must be 2 or 3, got {dim}"))
    }
}

/// Graph together with its desired shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub graph: FormationGraph,
    pub shape: ShapeSpec,
}

impl Formation {
    pub fn new(graph: FormationGraph, shape: ShapeSpec) -> Result<Self> {
        if shape.zstar.len() != graph.edge_count() * shape.dim {
            return invalid("shape does not match the graph's edge count");
        }
        Ok(Self { graph, shape })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn agent_count(&self) -> usize {
        self.graph.agent_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }
}

/// `z = B̄ᵀp`, i.e. `z_k = p_tail − p_head`.
pub fn relative_positions(graph: &FormationGraph, p: &[f64], dim: usize) -> Result<Vec<f64>> {
    if p.len() != graph.agent_count() * dim {
        return invalid(format!(
            "positions have {} entries, expected {} agents x {dim}",
            p.len(),
            graph.agent_count()
        ));
    }
    let mut z = Vec::with_capacity(graph.edge_count() * dim);
    for e in graph.edges() {
        for d in 0..dim {
            z.push(p[e.tail * dim + d] - p[e.head * dim + d]);
        }
    }
    Ok(z)
}

fn check_z(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<()> {
    if z.len() != graph.edge_count() * dim {
        return invalid(format!(
            "relative positions have {} entries, expected {} edges x {dim}",
            z.len(),
            graph.edge_count()
        ));
    }
    Ok(())
}

/// `D_z`: block-diagonal arrangement of the edge vectors, size `|E|m × |E|`.
pub fn block_diag(z: &[f64], dim: usize) -> Mat {
    let ne = z.len() / dim;
    let mut out = Mat::zeros(ne * dim, ne);
    for k in 0..ne {
        for d in 0..dim {
            out[(k * dim + d, k)] = z[k * dim + d];
        }
    }
    out
}

/// Rigidity matrix `R(z) = D_zᵀB̄ᵀ`, size `|E| × nm`.
pub fn rigidity_matrix(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<Mat> {
    check_z(graph, z, dim)?;
    let mut r = Mat::zeros(graph.edge_count(), graph.agent_count() * dim);
    for (k, e) in graph.edges().iter().enumerate() {
        for d in 0..dim {
            r[(k, e.tail * dim + d)] = z[k * dim + d];
            r[(k, e.head * dim + d)] = -z[k * dim + d];
        }
    }
    Ok(r)
}

/// Outcome of the infinitesimal/minimal rigidity test.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityReport {
    pub dim: usize,
    pub agents: usize,
    pub edges: usize,
    pub rank: usize,
    /// `2n − 3` in the plane, `3n − 6` in space.
    pub required: usize,
}

impl RigidityReport {
    pub fn infinitesimally_rigid(&self) -> bool {
        self.rank == self.required
    }

    pub fn minimally_rigid(&self) -> bool {
        self.edges == self.required
    }

    pub fn is_inf_min_rigid(&self) -> bool {
        self.infinitesimally_rigid() && self.minimally_rigid()
    }
}

impl fmt::Display for RigidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf_min_rigid() {
            return write!(
                f,
                "infinitesimally and minimally rigid (rank {} = {}, |E|={})",
                self.rank, self.required, self.edges
            );
        }
        let mut reasons = Vec::new();
        if !self.minimally_rigid() {
            reasons.push(format!("not minimally rigid (|E|={}, need {})", self.edges, self.required));
        }
        if !self.infinitesimally_rigid() {
            reasons.push(format!(
                "not infinitesimally rigid (rank {}, need {})",
                self.rank, self.required
            ));
        }
        write!(f, "{}", reasons.join("; "))
    }
}

pub fn required_rank(agents: usize, dim: usize) -> usize {
    match dim {
        2 => (2 * agents).saturating_sub(3),
        _ => {
            // a framework of n ≤ 3 agents in space spans at most a plane
            if agents < 3 {
                agents.saturating_sub(1)
            } else {
                (3 * agents).saturating_sub(6).max(3)
            }
        }
    }
}

pub fn rigidity_report(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<RigidityReport> {
    let r = rigidity_matrix(graph, z, dim)?;
    let rank = if r.max_abs() == 0.0 { 0 } else { numlin::rank(&r, RIGIDITY_RANK_TOL)? };
    Ok(RigidityReport {
        dim,
        agents: graph.agent_count(),
        edges: graph.edge_count(),
        rank,
        required: required_rank(graph.agent_count(), dim),
    })
}

pub fn is_inf_min_rigid(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<(bool, RigidityReport)> {
    let report = rigidity_report(graph, z, dim)?;
    Ok((report.is_inf_min_rigid(), report))
}

/// `e_k = ‖z_k‖² − d_k²`.
pub fn distance_errors(z: &[f64], distances: &[f64], dim: usize) -> Result<Vec<f64>> {
    if z.len() != distances.len() * dim {
        return invalid(format!(
            "{} relative-position entries do not match {} distances in R^{dim}",
            z.len(),
            distances.len()
        ));
    }
    Ok(z.chunks(dim)
        .zip(distances)
        .map(|(zk, d)| numlin::dot(zk, zk) - d * d)
        .collect())
}

/// `Q = D_zᵀB̄ᵀB̄D_z = R(z)R(z)ᵀ`, size `|E| × |E|`.
pub fn q_matrix(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<Mat> {
    let r = rigidity_matrix(graph, z, dim)?;
    r.matmul(&r.transpose())
}
