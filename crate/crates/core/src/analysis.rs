//! Post-processing of recorded trajectories: rigid-body velocity fits,
//! Lyapunov functions and constancy of the steady motion.

use std::str::FromStr;

use crate::control::{self, SwarmState};
use crate::error::{invalid, Error, Result};
use crate::graph::{self, Formation};
use crate::numlin::{self, Mat};
use crate::sim::Trajectory;

/// Denominator floor for relative variations.
pub const VARIATION_FLOOR: f64 = 1e-9;

/// Rigid-body velocity fit `v_i ≈ v_c + ω × (p_i − p_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyMotion {
    pub v_c: Vec<f64>,
    /// One entry in 2D, three in 3D.
    pub omega: Vec<f64>,
    /// `‖v − fitted field‖`.
    pub residual: f64,
}

pub fn centroid(p: &[f64], dim: usize) -> Vec<f64> {
    let n = p.len() / dim;
    (0..dim).map(|d| (0..n).map(|i| p[i * dim + d]).sum::<f64>() / n as f64).collect()
}

pub fn fit_body_motion(p: &[f64], v: &[f64], dim: usize) -> Result<BodyMotion> {
    if dim != 2 && dim != 3 {
        return invalid(format!("ambient dimension must be 2 or 3, got {dim}"));
    }
    if p.len() != v.len() || p.len() % dim != 0 {
        return invalid("positions and velocities must have matching stacked length");
    }
    let n = p.len() / dim;
    let c = centroid(p, dim);
    let r: Vec<f64> = p.iter().enumerate().map(|(i, x)| x - c[i % dim]).collect();
    let spread = Mat::from_row_major(n, dim, r.clone())?;
    if n < dim + 1 || numlin::rank(&spread, 1e-9)? < dim {
        return Err(Error::Precondition(format!(
            "rigid-body fit needs {} agents in general position",
            dim + 1
        )));
    }
    let cols = if dim == 2 { 3 } else { 6 };
    let mut m = Mat::zeros(n * dim, cols);
    for i in 0..n {
        let ri = &r[i * dim..(i + 1) * dim];
        for d in 0..dim {
            m[(i * dim + d, d)] = 1.0;
        }
        if dim == 2 {
            m[(i * 2, 2)] = -ri[1];
            m[(i * 2 + 1, 2)] = ri[0];
        } else {
            // ω × r = −[r]ₓ ω
            let (x, y, z) = (ri[0], ri[1], ri[2]);
            m[(i * 3, 4)] = z;
            m[(i * 3, 5)] = -y;
            m[(i * 3 + 1, 3)] = -z;
            m[(i * 3 + 1, 5)] = x;
            m[(i * 3 + 2, 3)] = y;
            m[(i * 3 + 2, 4)] = -x;
        }
    }
    let sol = numlin::least_squares(&m, v)?;
    let fitted = m.mul_vec(&sol)?;
    let res: Vec<f64> = fitted.iter().zip(v).map(|(a, b)| a - b).collect();
    Ok(BodyMotion { v_c: sol[..dim].to_vec(), omega: sol[dim..].to_vec(), residual: numlin::norm(&res) })
}

/// Angle in degrees between two nonzero vectors, ignoring orientation.
pub fn axis_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let c = (numlin::dot(a, b) / (numlin::norm(a) * numlin::norm(b))).abs().min(1.0);
    c.acos().to_degrees()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LyapunovVariant {
    /// `φ = ½‖v‖² + ¼‖e‖²`.
    Energy,
    /// `½‖e‖² + ‖s‖²`.
    ErrorSpeed,
    /// `½‖μ − μ̂‖² + ½‖v‖² + ¼‖e‖²`.
    Estimator1 { mu: Vec<f64> },
    /// `((εc₁ + c₂)/4)‖e‖² + ½‖e_v‖² + ε e_vᵀ B̄ D_z e`.
    Motion { eps: f64, c1: f64, c2: f64, a_v: Mat },
}

/// Variant names accepted by [`LyapunovVariant::from_name`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovKind {
    Energy,
    ErrorSpeed,
    Estimator1,
    Motion,
}

impl FromStr for LyapunovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Self::Energy),
            "error_speed" => Ok(Self::ErrorSpeed),
            "estimator1" => Ok(Self::Estimator1),
            "motion" => Ok(Self::Motion),
            other => invalid(format!("unknown Lyapunov variant '{other}'")),
        }
    }
}

/// Parameters a variant may need.
#[derive(Debug, Clone, Default)]
pub struct LyapunovParams {
    pub mu: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub a_v: Option<Mat>,
}

impl LyapunovVariant {
    pub fn from_name(name: &str, params: &LyapunovParams) -> Result<Self> {
        let missing = |what: &str| Error::InvalidInput(format!("Lyapunov variant '{name}' needs {what}"));
        Ok(match name.parse::<LyapunovKind>()? {
            LyapunovKind::Energy => Self::Energy,
            LyapunovKind::ErrorSpeed => Self::ErrorSpeed,
            LyapunovKind::Estimator1 => Self::Estimator1 { mu: params.mu.clone().ok_or_else(|| missing("mu"))? },
            LyapunovKind::Motion => Self::Motion {
                eps: params.eps.ok_or_else(|| missing("eps"))?,
                c1: params.c1.ok_or_else(|| missing("c1"))?,
                c2: params.c2.ok_or_else(|| missing("c2"))?,
                a_v: params.a_v.clone().ok_or_else(|| missing("A_v"))?,
            },
        })
    }
}

pub fn lyapunov_value(formation: &Formation, variant: &LyapunovVariant, state: &SwarmState) -> Result<f64> {
    state.validate(formation)?;
    let (z, e) = control::edge_state(formation, &state.p)?;
    let ee = numlin::dot(&e, &e);
    let vv = numlin::dot(&state.v, &state.v);
    match variant {
        LyapunovVariant::Energy => Ok(0.5 * vv + 0.25 * ee),
        LyapunovVariant::ErrorSpeed => Ok(0.5 * ee + vv),
        LyapunovVariant::Estimator1 { mu } => {
            let mu_hat = state
                .mu_hat
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("estimator Lyapunov function needs an estimate".into()))?;
            if mu.len() != mu_hat.len() {
                return invalid("mismatch and estimate differ in length");
            }
            let xi: f64 = mu.iter().zip(mu_hat).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(0.5 * xi + 0.5 * vv + 0.25 * ee)
        }
        LyapunovVariant::Motion { eps, c1, c2, a_v } => {
            let dim = formation.dim();
            let ev = control::velocity_error(formation, &state.p, &state.v, a_v)?;
            let bde = formation
                .graph
                .incidence()
                .kron_identity(dim)
                .matmul(&graph::block_diag(&z, dim))?
                .mul_vec(&e)?;
            Ok((eps * c1 + c2) / 4.0 * ee + 0.5 * numlin::dot(&ev, &ev) + eps * numlin::dot(&ev, &bde))
        }
    }
}

/// Evaluates a Lyapunov function at every recorded sample.
pub fn lyapunov_series(formation: &Formation, variant: &LyapunovVariant, traj: &Trajectory) -> Result<Vec<f64>> {
    (0..traj.len())
        .map(|i| {
            let mut s = SwarmState::new(traj.p[i].clone(), traj.v[i].clone());
            s.mu_hat = traj.mu_hat.as_ref().map(|m| m[i].clone());
            lyapunov_value(formation, variant, &s)
        })
        .collect()
}

/// Largest increase between consecutive values; non-positive means the
/// series never rises.
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Upper bound on the final `‖e‖²` under the first estimator:
/// `2‖μ − μ̂(0)‖² + 2‖v(0)‖² + ‖e(0)‖²`.
pub fn estimator1_distortion_bound(mu: &[f64], mu_hat0: &[f64], v0: &[f64], e0: &[f64]) -> f64 {
    let xi: f64 = mu.iter().zip(mu_hat0).map(|(a, b)| (a - b) * (a - b)).sum();
    2.0 * xi + 2.0 * numlin::dot(v0, v0) + numlin::dot(e0, e0)
}

/// `ρ = ‖ξ(0)‖² + ‖v(0)‖² + ½‖e(0)‖²`, twice the initial value of the
/// estimator Lyapunov function.
pub fn estimator1_rho(mu: &[f64], mu_hat0: &[f64], v0: &[f64], e0: &[f64]) -> f64 {
    0.5 * estimator1_distortion_bound(mu, mu_hat0, v0, e0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationEntry {
    pub name: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `max_t |x(t) − x̄| / max(|x̄|, floor)`; for vectors the norms.
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstancyReport {
    pub t_from: f64,
    pub samples: usize,
    pub entries: Vec<VariationEntry>,
}

impl ConstancyReport {
    pub fn get(&self, name: &str) -> Option<&VariationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Entries whose name starts with `prefix`.
    pub fn group<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a VariationEntry> + 'a {
        self.entries.iter().filter(move |e| e.name.starts_with(prefix))
    }

    pub fn max_variation(&self, prefix: &str) -> f64 {
        self.group(prefix).map(|e| e.variation).fold(0.0, f64::max)
    }
}

fn scalar_entry(name: String, xs: &[f64]) -> VariationEntry {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let (min, max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let dev = xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    VariationEntry { name, mean, min, max, variation: dev / mean.abs().max(VARIATION_FLOOR) }
}

fn vector_entry(name: String, xs: &[Vec<f64>]) -> VariationEntry {
    let dim = xs[0].len();
    let mean: Vec<f64> = (0..dim).map(|d| xs.iter().map(|x| x[d]).sum::<f64>() / xs.len() as f64).collect();
    let norms: Vec<f64> = xs.iter().map(|x| numlin::norm(x)).collect();
    let dev = xs
        .iter()
        .map(|x| numlin::norm(&x.iter().zip(&mean).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let (min, max) = norms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    VariationEntry { name, mean: numlin::norm(&mean), min, max, variation: dev / numlin::norm(&mean).max(VARIATION_FLOOR) }
}

/// Rotation `R` minimising `Σ‖R qᵢ − xᵢ‖` over centred point sets.
pub fn kabsch(q: &[f64], x: &[f64], dim: usize) -> Result<Mat> {
    let n = q.len() / dim;
    let cq = centroid(q, dim);
    let cx = centroid(x, dim);
    let h = Mat::from_fn(dim, dim, |a, b| {
        (0..n).map(|i| (q[i * dim + a] - cq[a]) * (x[i * dim + b] - cx[b])).sum()
    });
    let d = numlin::svd(&h)?;
    let vut = d.v.matmul(&d.u.transpose())?;
    let mut fix = Mat::identity(dim);
    if det(&vut) < 0.0 {
        fix[(dim - 1, dim - 1)] = -1.0;
    }
    d.v.matmul(&fix)?.matmul(&d.u.transpose())
}

fn det(m: &Mat) -> f64 {
    match m.rows() {
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => f64::NAN,
    }
}

/// Relative variation after `t_from` of each speed, each `|e_k|`, each
/// acceleration norm (central differences of the recorded velocities) and
/// of the fitted `(v_c, ω)` expressed in a frame that follows the swarm.
pub fn constancy_report(traj: &Trajectory, t_from: f64) -> Result<ConstancyReport> {
    if traj.len() < 3 {
        return invalid("constancy report needs at least three samples");
    }
    let last = traj.len() - 1;
    // interior samples only, so central differences exist
    let start = traj.index_at(t_from).max(1);
    if start >= last {
        return invalid(format!("t_from = {t_from} leaves no interior samples"));
    }
    let idx: Vec<usize> = (start..last).collect();
    let dim = traj.dim;
    let mut entries = Vec::new();
    for i in 0..traj.agents {
        let xs: Vec<f64> = idx.iter().map(|&j| traj.speeds[j][i]).collect();
        entries.push(scalar_entry(format!("s[{}]", i + 1), &xs));
    }
    for k in 0..traj.edges {
        let xs: Vec<f64> = idx.iter().map(|&j| traj.e[j][k].abs()).collect();
        entries.push(scalar_entry(format!("|e[{}]|", k + 1), &xs));
    }
    for i in 0..traj.agents {
        let xs: Vec<f64> = idx
            .iter()
            .map(|&j| {
                let dt = traj.times[j + 1] - traj.times[j - 1];
                let a: Vec<f64> = (0..dim)
                    .map(|d| (traj.v[j + 1][i * dim + d] - traj.v[j - 1][i * dim + d]) / dt)
                    .collect();
                numlin::norm(&a)
            })
            .collect();
        entries.push(scalar_entry(format!("|a[{}]|", i + 1), &xs));
    }
    if traj.agents > dim {
        let reference = &traj.p[start];
        let mut vcs = Vec::with_capacity(idx.len());
        let mut omegas = Vec::with_capacity(idx.len());
        for &j in &idx {
            let fit = fit_body_motion(&traj.p[j], &traj.v[j], dim)?;
            let rt = kabsch(reference, &traj.p[j], dim)?.transpose();
            vcs.push(rt.mul_vec(&fit.v_c)?);
            omegas.push(if dim == 3 { rt.mul_vec(&fit.omega)? } else { fit.omega.clone() });
        }
        let axes = ["x", "y", "z"];
        for d in 0..dim {
            let xs: Vec<f64> = vcs.iter().map(|x| x[d]).collect();
            entries.push(scalar_entry(format!("v_c_body.{}", axes[d]), &xs));
        }
        for d in 0..omegas[0].len() {
            let xs: Vec<f64> = omegas.iter().map(|x| x[d]).collect();
            let name = if dim == 2 { "omega_body".to_string() } else { format!("omega_body.{}", axes[d]) };
            entries.push(scalar_entry(name, &xs));
        }
        entries.push(vector_entry("v_c_body".into(), &vcs));
        if dim == 3 {
            entries.push(vector_entry("omega_body".into(), &omegas));
        }
    }
    Ok(ConstancyReport { t_from: traj.times[start], samples: idx.len(), entries })
}
