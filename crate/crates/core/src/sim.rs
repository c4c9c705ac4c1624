//! Fixed-step RK4 integration of the closed loop and steady-state detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitCircle, UnitSphere};

use crate::control::{self, ControllerConfig};
use crate::error::{invalid, Error, Result};
use crate::graph::{self, Formation};
use crate::motion;
use crate::numlin;

pub const DEFAULT_STEP: f64 = 1e-3;

/// Any agent farther than this from the origin aborts the run.
pub const DIVERGENCE_RADIUS: f64 = 1e6;

/// Scalars below this are compared in absolute terms by
/// [`detect_steady_state`].
pub const STEADY_FLOOR: f64 = 1e-9;

/// One classical Runge–Kutta step of `ẋ = f(x)` from time `t`.
pub fn rk4_step<F>(mut f: F, x: &[f64], h: f64, t: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return invalid(format!("step must be positive, got {h}"));
    }
    let mut eval = |y: &[f64], at: f64| -> Result<Vec<f64>> {
        let d = f(y)?;
        if d.len() != y.len() {
            return invalid(format!("derivative has {} entries, state has {}", d.len(), y.len()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { t: at, reason: "non-finite derivative".into() });
        }
        Ok(d)
    };
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    let k1 = eval(x, t)?;
    let k2 = eval(&axpy(h / 2.0, &k1), t + h / 2.0)?;
    let k3 = eval(&axpy(h / 2.0, &k2), t + h / 2.0)?;
    let k4 = eval(&axpy(h, &k3), t + h)?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Explicit {
        p: Vec<f64>,
        v: Vec<f64>,
    },
    /// Positions uniform in the axis-aligned cube `[origin, origin + size]`,
    /// velocities with uniform direction and speed uniform in `[0, speed_cap)`.
    RandomBox {
        origin: Vec<f64>,
        size: f64,
        speed_cap: f64,
    },
    /// Desired shape (centred at the origin) with each coordinate perturbed
    /// uniformly by at most `jitter`, random velocities as above.
    AroundShape {
        jitter: f64,
        speed_cap: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub formation: Formation,
    pub controller: ControllerConfig,
    pub initial: InitialCondition,
    /// Initial estimate; zero when absent.
    pub mu_hat0: Option<Vec<f64>>,
    pub h: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(formation: Formation, controller: ControllerConfig, initial: InitialCondition) -> Self {
        Self {
            formation,
            controller,
            initial,
            mu_hat0: None,
            h: DEFAULT_STEP,
            t_end: 10.0,
            record_every: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return invalid(format!("step must be positive, got {}", self.h));
        }
        if !(self.t_end >= self.h) || !self.t_end.is_finite() {
            return invalid(format!("t_end must be at least one step, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        self.controller.validate(&self.formation)?;
        let nm = self.formation.agent_count() * self.formation.dim();
        match &self.initial {
            InitialCondition::Explicit { p, v } => {
                if p.len() != nm || v.len() != nm {
                    return invalid(format!("initial p and v need {nm} entries each"));
                }
            }
            InitialCondition::RandomBox { origin, size, speed_cap } => {
                if origin.len() != self.formation.dim() {
                    return invalid("box origin must match the ambient dimension");
                }
                if !(*size >= 0.0) || !(*speed_cap >= 0.0) {
                    return invalid("box size and speed cap must be non-negative");
                }
            }
            InitialCondition::AroundShape { jitter, speed_cap } => {
                if !(*jitter >= 0.0) || !(*speed_cap >= 0.0) {
                    return invalid("jitter and speed cap must be non-negative");
                }
            }
        }
        if let Some(m) = &self.mu_hat0 {
            if m.len() != self.formation.edge_count() {
                return invalid(format!("initial estimate needs {} entries", self.formation.edge_count()));
            }
        }
        Ok(())
    }

    /// Initial `[p, v, μ̂]`, deterministic in the seed.
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let dim = self.formation.dim();
        let n = self.formation.agent_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (p, v) = match &self.initial {
            InitialCondition::Explicit { p, v } => (p.clone(), v.clone()),
            InitialCondition::RandomBox { origin, size, speed_cap } => {
                let p = (0..n * dim).map(|i| origin[i % dim] + size * rng.random::<f64>()).collect();
                (p, random_velocities(&mut rng, n, dim, *speed_cap))
            }
            InitialCondition::AroundShape { jitter, speed_cap } => {
                let base = motion::body_positions(&self.formation.graph, self.formation.shape.zstar(), dim)?;
                let p = base.iter().map(|x| x + jitter * (2.0 * rng.random::<f64>() - 1.0)).collect();
                (p, random_velocities(&mut rng, n, dim, *speed_cap))
            }
        };
        let mut x = p;
        x.extend(v);
        if self.controller.has_estimator() {
            x.extend(self.mu_hat0.clone().unwrap_or_else(|| vec![0.0; self.formation.edge_count()]));
        }
        Ok(x)
    }
}

fn random_velocities(rng: &mut ChaCha8Rng, n: usize, dim: usize, cap: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let speed = cap * rng.random::<f64>();
        if dim == 2 {
            let d: [f64; 2] = UnitCircle.sample(rng);
            v.extend(d.iter().map(|x| speed * x));
        } else {
            let d: [f64; 3] = UnitSphere.sample(rng);
            v.extend(d.iter().map(|x| speed * x));
        }
    }
    v
}

/// Recorded samples. Per-sample vectors are stacked per agent or per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub agents: usize,
    pub edges: usize,
    pub times: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub mu_hat: Option<Vec<Vec<f64>>>,
    pub speeds: Vec<Vec<f64>>,
}

impl Trajectory {
    fn empty(formation: &Formation, with_estimate: bool) -> Self {
        Self {
            dim: formation.dim(),
            agents: formation.agent_count(),
            edges: formation.edge_count(),
            times: Vec::new(),
            p: Vec::new(),
            v: Vec::new(),
            e: Vec::new(),
            mu_hat: with_estimate.then(Vec::new),
            speeds: Vec::new(),
        }
    }

    fn push(&mut self, formation: &Formation, t: f64, x: &[f64]) -> Result<()> {
        let nm = self.agents * self.dim;
        let p = &x[..nm];
        let v = &x[nm..2 * nm];
        let (_, e) = control::edge_state(formation, p)?;
        self.times.push(t);
        self.p.push(p.to_vec());
        self.v.push(v.to_vec());
        self.e.push(e);
        self.speeds.push(v.chunks(self.dim).map(numlin::norm).collect());
        if let Some(m) = &mut self.mu_hat {
            m.push(x[2 * nm..].to_vec());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Flattened `[p, v, μ̂]` of sample `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        let mut x = self.p[i].clone();
        x.extend_from_slice(&self.v[i]);
        if let Some(m) = &self.mu_hat {
            x.extend_from_slice(&m[i]);
        }
        x
    }
}

/// Integrates the closed loop, recording every `record_every` steps and at
/// the final time.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let x0 = cfg.initial_state()?;
    simulate_from(cfg, x0)
}

/// As [`simulate`] but from an explicit flattened initial state.
pub fn simulate_from(cfg: &SimConfig, x0: Vec<f64>) -> Result<Trajectory> {
    cfg.validate()?;
    let f = &cfg.formation;
    let with_estimate = cfg.controller.has_estimator();
    let nm = f.agent_count() * f.dim();
    let expected = 2 * nm + if with_estimate { f.edge_count() } else { 0 };
    if x0.len() != expected {
        return invalid(format!("initial state has {} entries, expected {expected}", x0.len()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return invalid("initial state has non-finite entries");
    }
    let steps = (cfg.t_end / cfg.h).round() as usize;
    let mut traj = Trajectory::empty(f, with_estimate);
    let mut x = x0;
    traj.push(f, 0.0, &x)?;
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * cfg.h;
        x = rk4_step(|y| cfg.controller.derivative(f, y), &x, cfg.h, t0)?;
        let t = step as f64 * cfg.h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { t, reason: "non-finite state".into() });
        }
        for (i, pi) in x[..nm].chunks(f.dim()).enumerate() {
            let r = numlin::norm(pi);
            if r > DIVERGENCE_RADIUS {
                return Err(Error::Divergence { t, agent: i + 1, norm: r });
            }
        }
        if step % cfg.record_every == 0 || step == steps {
            traj.push(f, t, &x)?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub reached: bool,
    /// Earliest time from which the trailing window is steady.
    pub t_ss: Option<f64>,
}

/// A window `[t − window, t]` is steady when every monitored scalar (each
/// speed, each `|e_k|`, each `μ̂_k`) spans at most `tol · max(|mean|, 1)`
/// over it; the scale floor makes small signals compare absolutely.
/// `reached` reports whether the final window is steady; `t_ss` is the
/// earliest right end of a steady window after which every later window is
/// steady too.
pub fn detect_steady_state(traj: &Trajectory, window: f64, tol: f64) -> SteadyState {
    let none = SteadyState { reached: false, t_ss: None };
    if traj.is_empty() || !(window > 0.0) || window >= traj.duration() + 1e-12 {
        return none;
    }
    let series = monitored_series(traj);
    let steady_at = |end: usize| -> bool {
        let start = traj.index_at(traj.times[end] - window - 1e-12);
        series.iter().all(|s| {
            let w = &s[start..=end];
            let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            hi - lo <= tol * mean.abs().max(1.0) || hi - lo <= STEADY_FLOOR
        })
    };
    let first = traj.index_at(traj.times[0] + window - 1e-12);
    let last = traj.len() - 1;
    if !steady_at(last) {
        return none;
    }
    let mut earliest = last;
    while earliest > first && steady_at(earliest - 1) {
        earliest -= 1;
    }
    SteadyState { reached: true, t_ss: Some(traj.times[earliest]) }
}

fn monitored_series(traj: &Trajectory) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..traj.agents {
        out.push(traj.speeds.iter().map(|s| s[i]).collect());
    }
    for k in 0..traj.edges {
        out.push(traj.e.iter().map(|e| e[k].abs()).collect());
    }
    if let Some(m) = &traj.mu_hat {
        for k in 0..traj.edges {
            out.push(m.iter().map(|x| x[k]).collect());
        }
    }
    out
}

/// Distances `‖z_k‖` of sample `i`.
pub fn distances_at(traj: &Trajectory, formation: &Formation, i: usize) -> Result<Vec<f64>> {
    let z = graph::relative_positions(&formation.graph, &traj.p[i], traj.dim)?;
    Ok(z.chunks(traj.dim).map(numlin::norm).collect())
}
