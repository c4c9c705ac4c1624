//! Motion-parameter design: velocity matrices, the transfer map `T(ᵇz*)`,
//! the translational and rotational parameter subspaces, and the Hurwitz
//! test on the linearized estimator dynamics.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::graph::{self, FormationGraph};
use crate::numlin::{self, Mat, Subspace};

/// Relative tolerance for the kernels and projections in this module.
pub const SUBSPACE_TOL: f64 = 1e-9;

/// Margin below zero the spectral abscissa must clear to count as Hurwitz.
pub const HURWITZ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionParams {
    pub mu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub a_v: Mat,
    pub a_a: Mat,
    pub a: Mat,
    pub c1: f64,
}

/// `A_v(μ, μ̃)`: `μ_k` in the tail row of column `k`, `μ̃_k` in the head row.
pub fn velocity_matrix(graph: &FormationGraph, mu: &[f64], mu_tilde: &[f64]) -> Result<Mat> {
    let ne = graph.edge_count();
    if mu.len() != ne || mu_tilde.len() != ne {
        return invalid(format!(
            "motion parameters have {} and {} entries, expected {ne}",
            mu.len(),
            mu_tilde.len()
        ));
    }
    if mu.iter().chain(mu_tilde).any(|x| !x.is_finite()) {
        return invalid("motion parameters have non-finite entries");
    }
    let mut a = Mat::zeros(graph.agent_count(), ne);
    for (k, e) in graph.edges().iter().enumerate() {
        a[(e.tail, k)] = mu[k];
        a[(e.head, k)] = mu_tilde[k];
    }
    Ok(a)
}

/// Builds `A_v`, `A_a = A_v Bᵀ A_v` and `A = c₁A_v + A_a`. The acceleration
/// matrix is evaluated on the `dim`-blocked forms and read back blockwise.
pub fn assemble_motion(graph: &FormationGraph, mu: &[f64], mu_tilde: &[f64], c1: f64, dim: usize) -> Result<MotionParams> {
    if !(c1 > 0.0) {
        return invalid(format!("c1 must be positive, got {c1}"));
    }
    let a_v = velocity_matrix(graph, mu, mu_tilde)?;
    let avb = a_v.kron_identity(dim);
    let bt = graph.incidence().kron_identity(dim).transpose();
    let blocked = avb.matmul(&bt)?.matmul(&avb)?;
    let a_a = Mat::from_fn(graph.agent_count(), graph.edge_count(), |i, k| blocked[(i * dim, k * dim)]);
    let a = a_v.scale(c1).add(&a_a)?;
    Ok(MotionParams { mu: mu.to_vec(), mu_tilde: mu_tilde.to_vec(), a_v, a_a, a, c1 })
}

/// `T(ᵇz*)`, the `n·m × 2|E|` map from `(μ; μ̃)` to agent velocities at the
/// desired shape, so that `Ā_v ᵇz* = T (μ; μ̃)`. Column `k` carries `ᵇz*_k`
/// in the tail block; column `|E|+k` carries `ᵇz*_k` in the head block.
pub fn transfer_matrix(graph: &FormationGraph, bzstar: &[f64], dim: usize) -> Result<Mat> {
    let ne = graph.edge_count();
    if bzstar.len() != ne * dim {
        return invalid(format!("shape has {} entries, expected {}", bzstar.len(), ne * dim));
    }
    let mut t = Mat::zeros(graph.agent_count() * dim, 2 * ne);
    for (k, e) in graph.edges().iter().enumerate() {
        for d in 0..dim {
            t[(e.tail * dim + d, k)] = bzstar[k * dim + d];
            t[(e.head * dim + d, ne + k)] = bzstar[k * dim + d];
        }
    }
    Ok(t)
}

/// The kernels and projected subspaces for one desired shape.
#[derive(Debug, Clone)]
pub struct MotionSubspaces {
    pub transfer: Mat,
    /// Parameters that produce no motion at all.
    pub kernel_t: Subspace,
    /// `Û`: parameters producing a common translation.
    pub translational: Subspace,
    /// `Ŵ`: distance-preserving parameters orthogonal to `Û`.
    pub rotational: Subspace,
}

impl MotionSubspaces {
    pub fn new(graph: &FormationGraph, bzstar: &[f64], dim: usize, tol: f64) -> Result<Self> {
        let (ok, report) = graph::is_inf_min_rigid(graph, bzstar, dim)?;
        if !ok {
            return Err(Error::Precondition(format!("motion design needs a rigid shape: {report}")));
        }
        let t = transfer_matrix(graph, bzstar, dim)?;
        let bt = graph.incidence().kron_identity(dim).transpose();
        let btt = bt.matmul(&t)?;
        let kernel_t = numlin::null_space(&t, tol)?;
        let translations = numlin::null_space(&btt, tol)?;
        let translational = translations.projected_onto(&kernel_t.complement()?, tol)?;
        let rigid = numlin::null_space(&graph::block_diag(bzstar, dim).transpose().matmul(&btt)?, tol)?;
        let rotational = rigid.projected_onto(&translational.complement()?, tol)?;
        Ok(Self { transfer: t, kernel_t, translational, rotational })
    }

    /// Distance from `(μ; μ̃)` to `Û`.
    pub fn translational_residual(&self, mu: &[f64], mu_tilde: &[f64]) -> Result<f64> {
        self.translational.residual(&stack(mu, mu_tilde))
    }

    /// Distance from `(μ; μ̃)` to `Ŵ + Ker T`.
    pub fn rotational_residual(&self, mu: &[f64], mu_tilde: &[f64]) -> Result<f64> {
        self.rotational
            .sum(&self.kernel_t, SUBSPACE_TOL)?
            .residual(&stack(mu, mu_tilde))
    }

    /// Velocities `T (μ; μ̃)` induced at the desired shape.
    pub fn velocities(&self, mu: &[f64], mu_tilde: &[f64]) -> Result<Vec<f64>> {
        self.transfer.mul_vec(&stack(mu, mu_tilde))
    }
}

fn stack(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = a.to_vec();
    x.extend_from_slice(b);
    x
}

pub fn translational_basis(graph: &FormationGraph, bzstar: &[f64], dim: usize, tol: f64) -> Result<Subspace> {
    Ok(MotionSubspaces::new(graph, bzstar, dim, tol)?.translational)
}

pub fn rotational_basis(graph: &FormationGraph, bzstar: &[f64], dim: usize, tol: f64) -> Result<Subspace> {
    Ok(MotionSubspaces::new(graph, bzstar, dim, tol)?.rotational)
}

/// Positions realizing `z` with the centroid at the origin.
pub fn body_positions(graph: &FormationGraph, z: &[f64], dim: usize) -> Result<Vec<f64>> {
    let bt = graph.incidence().kron_identity(dim).transpose();
    let mut p = numlin::least_squares(&bt, z)?;
    let n = graph.agent_count();
    for d in 0..dim {
        let c = (0..n).map(|i| p[i * dim + d]).sum::<f64>() / n as f64;
        for i in 0..n {
            p[i * dim + d] -= c;
        }
    }
    Ok(p)
}

/// Rigid-body velocity `v_c + ω × r` at offset `r` (scalar `ω` in 2D).
pub fn rigid_velocity(v_c: &[f64], omega: &[f64], r: &[f64]) -> Vec<f64> {
    match r.len() {
        2 => vec![v_c[0] - omega[0] * r[1], v_c[1] + omega[0] * r[0]],
        _ => vec![
            v_c[0] + omega[1] * r[2] - omega[2] * r[1],
            v_c[1] + omega[2] * r[0] - omega[0] * r[2],
            v_c[2] + omega[0] * r[1] - omega[1] * r[0],
        ],
    }
}

#[derive(Debug, Clone)]
pub struct MotionFit {
    pub mu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    /// `‖T(μ; μ̃) − target field‖`.
    pub residual: f64,
}

/// Least-squares coefficients on `Û ∪ Ŵ` reproducing the body velocity
/// field `v_i = v_c + ω × ᵇp_i` at the desired shape.
pub fn fit_motion_parameters(
    graph: &FormationGraph,
    bzstar: &[f64],
    dim: usize,
    v_c: &[f64],
    omega: &[f64],
) -> Result<MotionFit> {
    let omega_len = if dim == 2 { 1 } else { 3 };
    if v_c.len() != dim || omega.len() != omega_len {
        return invalid(format!(
            "target needs v_c of length {dim} and omega of length {omega_len}, got {} and {}",
            v_c.len(),
            omega.len()
        ));
    }
    let subspaces = MotionSubspaces::new(graph, bzstar, dim, SUBSPACE_TOL)?;
    let bp = body_positions(graph, bzstar, dim)?;
    let target: Vec<f64> = bp.chunks(dim).flat_map(|r| rigid_velocity(v_c, omega, r)).collect();
    let mut basis = subspaces.translational.basis().to_vec();
    basis.extend(subspaces.rotational.basis().iter().cloned());
    let ne = graph.edge_count();
    if basis.is_empty() {
        return Ok(MotionFit { mu: vec![0.0; ne], mu_tilde: vec![0.0; ne], residual: numlin::norm(&target) });
    }
    let m = Mat::from_columns(2 * ne, &basis)?;
    let tm = subspaces.transfer.matmul(&m)?;
    let coef = numlin::least_squares(&tm, &target)?;
    let params = m.mul_vec(&coef)?;
    let achieved = subspaces.transfer.mul_vec(&params)?;
    let r: Vec<f64> = achieved.iter().zip(&target).map(|(a, b)| a - b).collect();
    Ok(MotionFit { mu: params[..ne].to_vec(), mu_tilde: params[ne..].to_vec(), residual: numlin::norm(&r) })
}

/// `(μ, μ̃) = k (s_v (μ_v, μ̃_v) + s_ω (μ_ω, μ̃_ω))` with global downscale `k`.
pub fn compose_parameters(
    translational: (&[f64], &[f64]),
    rotational: (&[f64], &[f64]),
    s_v: f64,
    s_omega: f64,
    downscale: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = translational.0.len();
    if [translational.1.len(), rotational.0.len(), rotational.1.len()].iter().any(|&l| l != n) {
        return invalid("motion parameter vectors differ in length");
    }
    if !(downscale > 0.0) {
        return invalid(format!("downscale must be positive, got {downscale}"));
    }
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| downscale * (s_v * x + s_omega * y)).collect()
    };
    Ok((mix(translational.0, rotational.0), mix(translational.1, rotational.1)))
}

/// `F = [−Ī, −S̄₂D_{z*}; 2D_{z*}ᵀB̄ᵀ, 0]`.
pub fn assumption1_matrix(graph: &FormationGraph, zstar: &[f64], dim: usize) -> Result<Mat> {
    let nm = graph.agent_count() * dim;
    let ne = graph.edge_count();
    if zstar.len() != ne * dim {
        return invalid(format!("shape has {} entries, expected {}", zstar.len(), ne * dim));
    }
    let d = graph::block_diag(zstar, dim);
    let s2d = graph.head_split().kron_identity(dim).matmul(&d)?.scale(-1.0);
    let coupling = d.transpose().matmul(&graph.incidence().kron_identity(dim).transpose())?.scale(2.0);
    let mut f = Mat::zeros(nm + ne, nm + ne);
    f.set_block(0, 0, &Mat::identity(nm).scale(-1.0));
    f.set_block(0, nm, &s2d);
    f.set_block(nm, 0, &coupling);
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct HurwitzReport {
    pub hurwitz: bool,
    pub max_real: f64,
    pub spectrum: Vec<Complex64>,
}

pub fn check_assumption1(graph: &FormationGraph, zstar: &[f64], dim: usize) -> Result<HurwitzReport> {
    let f = assumption1_matrix(graph, zstar, dim)?;
    let spectrum = numlin::eigenvalues(&f)?;
    let max_real = numlin::spectral_abscissa(&spectrum);
    Ok(HurwitzReport { hurwitz: max_real < -HURWITZ_TOL, max_real, spectrum })
}
