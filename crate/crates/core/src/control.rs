//! Control laws and estimator dynamics as pure right-hand sides.
//!
//! Every law is written twice where two algebraic forms exist: an edge-loop
//! form used by the simulator and a matrix form built from the incidence
//! matrices. Tests keep the two in agreement.

use crate::error::{invalid, Result};
use crate::graph::{self, Formation, FormationGraph};
use crate::motion::MotionParams;
use crate::numlin::{self, Mat};

/// Positions, velocities and (for estimator controllers) the estimate `μ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub mu_hat: Option<Vec<f64>>,
}

impl SwarmState {
    pub fn new(p: Vec<f64>, v: Vec<f64>) -> Self {
        Self { p, v, mu_hat: None }
    }

    pub fn with_estimate(mut self, mu_hat: Vec<f64>) -> Self {
        self.mu_hat = Some(mu_hat);
        self
    }

    /// Flattened `[p, v, μ̂]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.p.len() * 2 + self.mu_hat.as_ref().map_or(0, Vec::len));
        x.extend_from_slice(&self.p);
        x.extend_from_slice(&self.v);
        if let Some(m) = &self.mu_hat {
            x.extend_from_slice(m);
        }
        x
    }

    pub fn from_vec(formation: &Formation, with_estimate: bool, x: &[f64]) -> Result<Self> {
        let nm = formation.agent_count() * formation.dim();
        let ne = formation.edge_count();
        let expected = 2 * nm + if with_estimate { ne } else { 0 };
        if x.len() != expected {
            return invalid(format!("state vector has {} entries, expected {expected}", x.len()));
        }
        Ok(Self {
            p: x[..nm].to_vec(),
            v: x[nm..2 * nm].to_vec(),
            mu_hat: with_estimate.then(|| x[2 * nm..].to_vec()),
        })
    }

    pub fn validate(&self, formation: &Formation) -> Result<()> {
        let nm = formation.agent_count() * formation.dim();
        if self.p.len() != nm || self.v.len() != nm {
            return invalid(format!(
                "state has {} positions and {} velocities, expected {nm}",
                self.p.len(),
                self.v.len()
            ));
        }
        if let Some(m) = &self.mu_hat {
            if m.len() != formation.edge_count() {
                return invalid(format!("estimate has {} entries, expected {}", m.len(), formation.edge_count()));
            }
        }
        if self.to_vec().iter().any(|x| !x.is_finite()) {
            return invalid("state has non-finite entries");
        }
        Ok(())
    }

    /// Per-agent speeds `s_i = ‖v_i‖`.
    pub fn speeds(&self, dim: usize) -> Vec<f64> {
        self.v.chunks(dim).map(numlin::norm).collect()
    }
}

/// Constant disagreement on the squared distance of each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch(pub Vec<f64>);

impl Mismatch {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerConfig {
    Gradient,
    HamiltonianFamily { lambda: f64 },
    Mismatched { mu: Mismatch },
    Estimator1 { mu: Mismatch },
    Estimator2 { mu: Mismatch, kappa: f64 },
    Motion { params: MotionParams, c2: f64 },
}

impl ControllerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gradient => "gradient",
            Self::HamiltonianFamily { .. } => "hamiltonian",
            Self::Mismatched { .. } => "mismatched",
            Self::Estimator1 { .. } => "estimator1",
            Self::Estimator2 { .. } => "estimator2",
            Self::Motion { .. } => "motion",
        }
    }

    pub fn has_estimator(&self) -> bool {
        matches!(self, Self::Estimator1 { .. } | Self::Estimator2 { .. })
    }

    pub fn mismatch(&self) -> Option<&Mismatch> {
        match self {
            Self::Mismatched { mu } | Self::Estimator1 { mu } | Self::Estimator2 { mu, .. } => Some(mu),
            _ => None,
        }
    }

    pub fn validate(&self, formation: &Formation) -> Result<()> {
        let ne = formation.edge_count();
        let n = formation.agent_count();
        let check_mu = |mu: &Mismatch| -> Result<()> {
            if mu.0.len() != ne {
                return invalid(format!("mismatch has {} entries, expected {ne}", mu.0.len()));
            }
            if mu.0.iter().any(|x| !x.is_finite()) {
                return invalid("mismatch has non-finite entries");
            }
            Ok(())
        };
        match self {
            Self::Gradient => Ok(()),
            Self::HamiltonianFamily { lambda } => check_lambda(*lambda),
            Self::Mismatched { mu } | Self::Estimator1 { mu } => check_mu(mu),
            Self::Estimator2 { mu, kappa } => {
                check_mu(mu)?;
                if !(*kappa > 0.0) {
                    return invalid(format!("estimator gain kappa must be positive, got {kappa}"));
                }
                Ok(())
            }
            Self::Motion { params, c2 } => {
                if !(params.c1 > 0.0) || !(*c2 > 0.0) {
                    return invalid(format!("motion gains must be positive, got c1={} c2={c2}", params.c1));
                }
                for (name, a) in [("A_v", &params.a_v), ("A", &params.a)] {
                    if a.rows() != n || a.cols() != ne {
                        return invalid(format!("{name} is {}x{}, expected {n}x{ne}", a.rows(), a.cols()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Time derivative of the flattened state `[p, v, μ̂]`.
    pub fn derivative(&self, formation: &Formation, x: &[f64]) -> Result<Vec<f64>> {
        let nm = formation.agent_count() * formation.dim();
        let (p, rest) = x.split_at(nm);
        let (v, mu_hat) = rest.split_at(nm);
        let mut out = Vec::with_capacity(x.len());
        match self {
            Self::HamiltonianFamily { lambda } => {
                let (pd, vd) = hamiltonian_family_rhs(formation, p, v, *lambda)?;
                out.extend(pd);
                out.extend(vd);
                return Ok(out);
            }
            Self::Gradient => {
                out.extend_from_slice(v);
                out.extend(gradient_control(formation, p, v)?);
            }
            Self::Mismatched { mu } => {
                out.extend_from_slice(v);
                out.extend(mismatched_control(formation, p, v, &mu.0)?);
            }
            Self::Estimator1 { mu } => {
                let (u, rate) = estimator1_rhs(formation, p, v, mu_hat, &mu.0)?;
                out.extend_from_slice(v);
                out.extend(u);
                out.extend(rate);
            }
            Self::Estimator2 { mu, kappa } => {
                let (u, rate) = estimator2_rhs(formation, p, v, mu_hat, &mu.0, *kappa)?;
                out.extend_from_slice(v);
                out.extend(u);
                out.extend(rate);
            }
            Self::Motion { params, c2 } => {
                out.extend_from_slice(v);
                out.extend(motion_control(formation, p, v, &params.a, params.c1, *c2)?);
            }
        }
        Ok(out)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        invalid(format!("lambda must lie in [0, 1], got {lambda}"))
    }
}

/// `z` and `e` for the given positions.
pub fn edge_state(formation: &Formation, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = formation.dim();
    let z = graph::relative_positions(&formation.graph, p, dim)?;
    let e = graph::distance_errors(&z, formation.shape.distances(), dim)?;
    Ok((z, e))
}

/// Adds `B̄ D_z w` to `out`: `+z_k w_k` on the tail, `−z_k w_k` on the head.
fn add_incidence_weighted(graph: &FormationGraph, z: &[f64], w: &[f64], dim: usize, out: &mut [f64]) {
    for (k, e) in graph.edges().iter().enumerate() {
        for d in 0..dim {
            let f = z[k * dim + d] * w[k];
            out[e.tail * dim + d] += f;
            out[e.head * dim + d] -= f;
        }
    }
}

/// Adds `S̄₁ D_z w` to `out`: `+z_k w_k` on the tail only.
fn add_tail_weighted(graph: &FormationGraph, z: &[f64], w: &[f64], dim: usize, out: &mut [f64]) {
    for (k, e) in graph.edges().iter().enumerate() {
        for d in 0..dim {
            out[e.tail * dim + d] += z[k * dim + d] * w[k];
        }
    }
}

fn check_pv(formation: &Formation, p: &[f64], v: &[f64]) -> Result<()> {
    let nm = formation.agent_count() * formation.dim();
    if p.len() != nm || v.len() != nm {
        return invalid(format!("expected {nm} position and velocity entries, got {} and {}", p.len(), v.len()));
    }
    Ok(())
}

fn check_edge_vec(formation: &Formation, what: &str, x: &[f64]) -> Result<()> {
    if x.len() != formation.edge_count() {
        return invalid(format!("{what} has {} entries, expected {}", x.len(), formation.edge_count()));
    }
    Ok(())
}

/// `∇_p φ = B̄ D_z e`.
pub fn shape_gradient(formation: &Formation, p: &[f64]) -> Result<Vec<f64>> {
    let (z, e) = edge_state(formation, p)?;
    let mut g = vec![0.0; p.len()];
    add_incidence_weighted(&formation.graph, &z, &e, formation.dim(), &mut g);
    Ok(g)
}

/// `V_k = ¼(‖z_k‖² − d_k²)²`.
pub fn edge_potential(zk: &[f64], dk: f64) -> f64 {
    let e = numlin::dot(zk, zk) - dk * dk;
    0.25 * e * e
}

/// Gradient of `V_k` with respect to the tail position, `z_k(‖z_k‖² − d_k²)`.
pub fn edge_potential_gradient(zk: &[f64], dk: f64) -> Vec<f64> {
    let e = numlin::dot(zk, zk) - dk * dk;
    zk.iter().map(|x| x * e).collect()
}

/// `φ(p, v) = Σ ½‖v_i‖² + Σ V_k`.
pub fn potential(formation: &Formation, p: &[f64], v: &[f64]) -> Result<f64> {
    check_pv(formation, p, v)?;
    let (_, e) = edge_state(formation, p)?;
    let kinetic = 0.5 * numlin::dot(v, v);
    Ok(kinetic + e.iter().map(|ek| 0.25 * ek * ek).sum::<f64>())
}

/// `u = −v − B̄ D_z e`.
pub fn gradient_control(formation: &Formation, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_pv(formation, p, v)?;
    let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
    let (z, e) = edge_state(formation, p)?;
    let neg: Vec<f64> = e.iter().map(|x| -x).collect();
    add_incidence_weighted(&formation.graph, &z, &neg, formation.dim(), &mut u);
    Ok(u)
}

/// One member of the family interpolating the gradient flow of `φ` and the
/// dissipative Hamiltonian closed loop; `λ = 0` gives `ṗ = v`, `v̇ = −v − ∇_pφ`.
pub fn hamiltonian_family_rhs(
    formation: &Formation,
    p: &[f64],
    v: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lambda(lambda)?;
    check_pv(formation, p, v)?;
    let gp = shape_gradient(formation, p)?;
    let pdot = gp.iter().zip(v).map(|(g, vi)| -lambda * g + (1.0 - lambda) * vi).collect();
    let vdot = gp.iter().zip(v).map(|(g, vi)| -(1.0 - lambda) * g - vi).collect();
    Ok((pdot, vdot))
}

/// `u = −v − B̄ D_z e − S̄₁ D_z μ`: each tail agent aims for `d_k² − μ_k`.
pub fn mismatched_control(formation: &Formation, p: &[f64], v: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_edge_vec(formation, "mismatch", mu)?;
    let mut u = gradient_control(formation, p, v)?;
    let z = graph::relative_positions(&formation.graph, p, formation.dim())?;
    let neg: Vec<f64> = mu.iter().map(|x| -x).collect();
    add_tail_weighted(&formation.graph, &z, &neg, formation.dim(), &mut u);
    Ok(u)
}

/// Perturbation matrix `A₁(μ)`: `μ_k` at (tail(k), k), zero elsewhere.
pub fn build_a1(graph: &FormationGraph, mu: &[f64]) -> Result<Mat> {
    if mu.len() != graph.edge_count() {
        return invalid(format!("mismatch has {} entries, expected {}", mu.len(), graph.edge_count()));
    }
    let mut a = Mat::zeros(graph.agent_count(), graph.edge_count());
    for (k, e) in graph.edges().iter().enumerate() {
        a[(e.tail, k)] = mu[k];
    }
    Ok(a)
}

/// Matrix form `u = −v − B̄ D_z e − Ā₁(μ) z` of [`mismatched_control`].
pub fn mismatched_control_matrix_form(
    formation: &Formation,
    p: &[f64],
    v: &[f64],
    mu: &[f64],
) -> Result<Vec<f64>> {
    check_pv(formation, p, v)?;
    let dim = formation.dim();
    let g = &formation.graph;
    let (z, e) = edge_state(formation, p)?;
    let bbar = g.incidence().kron_identity(dim);
    let shape = bbar.matmul(&graph::block_diag(&z, dim))?.mul_vec(&e)?;
    let pert = build_a1(g, mu)?.kron_identity(dim).mul_vec(&z)?;
    Ok((0..v.len()).map(|i| -v[i] - shape[i] - pert[i]).collect())
}

/// Estimator with `μ̂̇ = −D_zᵀ S̄₁ᵀ v`: each tail agent integrates
/// `−z_kᵀ v_tail(k)`. Returns `(u, μ̂̇)`.
pub fn estimator1_rhs(
    formation: &Formation,
    p: &[f64],
    v: &[f64],
    mu_hat: &[f64],
    mu: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_edge_vec(formation, "estimate", mu_hat)?;
    let xi: Vec<f64> = mu.iter().zip(mu_hat).map(|(a, b)| a - b).collect();
    let u = mismatched_control(formation, p, v, &xi)?;
    let dim = formation.dim();
    let z = graph::relative_positions(&formation.graph, p, dim)?;
    let rate = formation
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| -numlin::dot(&z[k * dim..(k + 1) * dim], &v[e.tail * dim..(e.tail + 1) * dim]))
        .collect();
    Ok((u, rate))
}

/// Estimator with `μ̂̇_k = κ(e_k + μ_k − μ̂_k)`. The tail agent only sees the
/// biased error `e_k + μ_k`, which is what enters the rate.
pub fn estimator2_rhs(
    formation: &Formation,
    p: &[f64],
    v: &[f64],
    mu_hat: &[f64],
    mu: &[f64],
    kappa: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_edge_vec(formation, "estimate", mu_hat)?;
    check_edge_vec(formation, "mismatch", mu)?;
    let xi: Vec<f64> = mu.iter().zip(mu_hat).map(|(a, b)| a - b).collect();
    let u = mismatched_control(formation, p, v, &xi)?;
    let (_, e) = edge_state(formation, p)?;
    let rate = e
        .iter()
        .zip(mu)
        .zip(mu_hat)
        .map(|((ek, mk), mh)| {
            let biased = ek + mk;
            kappa * (biased - mh)
        })
        .collect();
    Ok((u, rate))
}

/// `Ā z` for a general `n × |E|` matrix `A`.
pub fn motion_term(a: &Mat, z: &[f64], dim: usize) -> Vec<f64> {
    let n = a.rows();
    let mut out = vec![0.0; n * dim];
    for i in 0..n {
        for k in 0..a.cols() {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for d in 0..dim {
                    out[i * dim + d] += aik * z[k * dim + d];
                }
            }
        }
    }
    out
}

/// `u = −c₁ v − c₂ B̄ D_z e + Ā z`.
pub fn motion_control(formation: &Formation, p: &[f64], v: &[f64], a: &Mat, c1: f64, c2: f64) -> Result<Vec<f64>> {
    check_pv(formation, p, v)?;
    let dim = formation.dim();
    let (z, e) = edge_state(formation, p)?;
    let mut u: Vec<f64> = v.iter().map(|x| -c1 * x).collect();
    let w: Vec<f64> = e.iter().map(|x| -c2 * x).collect();
    add_incidence_weighted(&formation.graph, &z, &w, dim, &mut u);
    for (ui, m) in u.iter_mut().zip(motion_term(a, &z, dim)) {
        *ui += m;
    }
    Ok(u)
}

/// Velocity-error form `u = −c₁ e_v − c₂ B̄ D_z e + Ā_a z` with
/// `e_v = v − Ā_v z`.
pub fn motion_control_error_form(
    formation: &Formation,
    p: &[f64],
    v: &[f64],
    params: &MotionParams,
    c2: f64,
) -> Result<Vec<f64>> {
    check_pv(formation, p, v)?;
    let dim = formation.dim();
    let (z, e) = edge_state(formation, p)?;
    let bbar = formation.graph.incidence().kron_identity(dim);
    let shape = bbar.matmul(&graph::block_diag(&z, dim))?.mul_vec(&e)?;
    let ev = velocity_error(formation, p, v, &params.a_v)?;
    let acc = params.a_a.kron_identity(dim).mul_vec(&z)?;
    Ok((0..v.len()).map(|i| -params.c1 * ev[i] - c2 * shape[i] + acc[i]).collect())
}

/// `e_v = v − Ā_v z`.
pub fn velocity_error(formation: &Formation, p: &[f64], v: &[f64], a_v: &Mat) -> Result<Vec<f64>> {
    check_pv(formation, p, v)?;
    let z = graph::relative_positions(&formation.graph, p, formation.dim())?;
    let vd = motion_term(a_v, &z, formation.dim());
    Ok(v.iter().zip(vd).map(|(a, b)| a - b).collect())
}

/// Estimator-2 closed loop in the coordinates `(v, e, h, z)` with
/// `h = e + μ − μ̂`, treating all four as independent.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCoordinates {
    pub v: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
}

impl ErrorCoordinates {
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.v[..], &self.e, &self.h, &self.z].concat()
    }

    pub fn from_vec(graph: &FormationGraph, dim: usize, x: &[f64]) -> Result<Self> {
        let nm = graph.agent_count() * dim;
        let ne = graph.edge_count();
        if x.len() != nm + 2 * ne + ne * dim {
            return invalid(format!("error state has {} entries, expected {}", x.len(), nm + 2 * ne + ne * dim));
        }
        Ok(Self {
            v: x[..nm].to_vec(),
            e: x[nm..nm + ne].to_vec(),
            h: x[nm + ne..nm + 2 * ne].to_vec(),
            z: x[nm + 2 * ne..].to_vec(),
        })
    }
}

/// `v̇ = −v − S̄₂D_z e − S̄₁D_z h`, `ė = 2D_zᵀB̄ᵀv`, `ḣ = ė − κh`, `ż = B̄ᵀv`.
pub fn estimator2_error_rhs(graph: &FormationGraph, dim: usize, kappa: f64, x: &ErrorCoordinates) -> Result<ErrorCoordinates> {
    let nm = graph.agent_count() * dim;
    let ne = graph.edge_count();
    if x.v.len() != nm || x.e.len() != ne || x.h.len() != ne || x.z.len() != ne * dim {
        return invalid("error coordinates do not match the graph");
    }
    let mut vdot: Vec<f64> = x.v.iter().map(|a| -a).collect();
    let zdot = graph::relative_positions(graph, &x.v, dim)?;
    let mut edot = vec![0.0; ne];
    for (k, edge) in graph.edges().iter().enumerate() {
        let zk = &x.z[k * dim..(k + 1) * dim];
        edot[k] = 2.0 * numlin::dot(zk, &zdot[k * dim..(k + 1) * dim]);
        for d in 0..dim {
            vdot[edge.head * dim + d] += zk[d] * x.e[k];
            vdot[edge.tail * dim + d] -= zk[d] * x.h[k];
        }
    }
    let hdot = edot.iter().zip(&x.h).map(|(a, h)| a - kappa * h).collect();
    Ok(ErrorCoordinates { v: vdot, e: edot, h: hdot, z: zdot })
}

/// Jacobian of [`estimator2_error_rhs`] at `(0, 0, 0, z*)`. With
/// `include_z = false` only the `(v, e, h)` block is returned.
pub fn estimator2_jacobian(graph: &FormationGraph, zstar: &[f64], dim: usize, kappa: f64, include_z: bool) -> Result<Mat> {
    let nm = graph.agent_count() * dim;
    let ne = graph.edge_count();
    if zstar.len() != ne * dim {
        return invalid(format!("shape has {} entries, expected {}", zstar.len(), ne * dim));
    }
    let d = graph::block_diag(zstar, dim);
    let bt = graph.incidence().kron_identity(dim).transpose();
    let coupling = d.transpose().matmul(&bt)?.scale(2.0);
    let size = nm + 2 * ne + if include_z { ne * dim } else { 0 };
    let mut j = Mat::zeros(size, size);
    j.set_block(0, 0, &Mat::identity(nm).scale(-1.0));
    j.set_block(0, nm, &graph.head_split().kron_identity(dim).matmul(&d)?.scale(-1.0));
    j.set_block(0, nm + ne, &graph.tail_split().kron_identity(dim).matmul(&d)?.scale(-1.0));
    j.set_block(nm, 0, &coupling);
    j.set_block(nm + ne, 0, &coupling);
    j.set_block(nm + ne, nm + ne, &Mat::identity(ne).scale(-kappa));
    if include_z {
        j.set_block(nm + 2 * ne, 0, &bt);
    }
    Ok(j)
}
