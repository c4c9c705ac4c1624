use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rsl_core::analysis::LyapunovVariant;
use rsl_core::control::ControllerConfig;
use rsl_core::motion::{self, MotionSubspaces, SUBSPACE_TOL};
use rsl_core::output;
use rsl_core::scenario::{MotionSource, Scenario};
use rsl_core::sim::{self, Trajectory};
use rsl_core::{analysis, graph, Error};

use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;

pub const SEED_ENV: &str = "RSL_SEED";

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } | Error::Integration { .. } => EXIT_DIVERGED,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
}

pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary: String,
    pub trajectory: Trajectory,
}

/// Seed from the command line, else `RSL_SEED`, else the file.
fn resolve_seed(flag: Option<u64>, file: u64) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(file),
    }
}

pub fn load(path: &Path, opts: &RunOptions) -> Result<Scenario, Failure> {
    let mut sc = Scenario::load(path)?;
    sc.config.seed = resolve_seed(opts.seed, sc.config.seed)?;
    if let Some(h) = opts.h {
        sc.config.h = h;
    }
    if let Some(t) = opts.t_end {
        sc.config.t_end = t;
    }
    sc.config.validate()?;
    Ok(sc)
}

fn out_dir_for(scenario: &Scenario, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name))
}

pub fn run(path: &Path, opts: &RunOptions) -> Result<RunOutcome, Failure> {
    let sc = load(path, opts)?;
    let traj = sim::simulate(&sc.config)?;
    let dir = out_dir_for(&sc, opts);
    fs::create_dir_all(&dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    output::save_trajectory_csv(&traj, &dir.join(&sc.output.trajectory))?;
    write_plot_data(&sc, &traj, &dir)?;
    let summary = report::summary(&sc, &traj);
    fs::write(dir.join(&sc.output.summary), &summary).map_err(Error::from)?;
    Ok(RunOutcome { out_dir: dir, summary, trajectory: traj })
}

fn series(traj: &Trajectory, per_sample: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    (0..traj.len())
        .map(|j| {
            let mut row = vec![traj.times[j]];
            row.extend(per_sample(j));
            row
        })
        .collect()
}

fn write_plot_data(sc: &Scenario, traj: &Trajectory, dir: &Path) -> rsl_core::Result<()> {
    let f = &sc.config.formation;
    let agent_names = |p: &str| -> Vec<String> {
        std::iter::once("t".to_string())
            .chain((1..=traj.agents).map(|i| format!("{p}{i}")))
            .collect()
    };
    let edge_names = |p: &str| -> Vec<String> {
        std::iter::once("t".to_string())
            .chain((1..=traj.edges).map(|k| format!("{p}{k}")))
            .collect()
    };
    output::write_columns(&dir.join("speeds.dat"), &agent_names("s"), &series(traj, |j| traj.speeds[j].clone()))?;
    output::write_columns(&dir.join("errors.dat"), &edge_names("e"), &series(traj, |j| traj.e[j].clone()))?;
    let dist = (0..traj.len())
        .map(|j| sim::distances_at(traj, f, j))
        .collect::<rsl_core::Result<Vec<_>>>()?;
    output::write_columns(&dir.join("distances.dat"), &edge_names("d"), &series(traj, |j| dist[j].clone()))?;
    let axes = ["x", "y", "z"];
    let pos_names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=traj.agents).flat_map(|i| axes[..traj.dim].iter().map(move |a| format!("p{i}.{a}"))))
        .collect();
    output::write_columns(&dir.join("positions.dat"), &pos_names, &series(traj, |j| traj.p[j].clone()))?;
    if let Some(m) = &traj.mu_hat {
        output::write_columns(&dir.join("mu_hat.dat"), &edge_names("mu_hat"), &series(traj, |j| m[j].clone()))?;
    }
    let variant = match &sc.config.controller {
        ControllerConfig::Estimator1 { mu } => Some(LyapunovVariant::Estimator1 { mu: mu.0.clone() }),
        ControllerConfig::Gradient | ControllerConfig::HamiltonianFamily { .. } => Some(LyapunovVariant::Energy),
        _ => None,
    };
    if let Some(v) = variant {
        let vals = analysis::lyapunov_series(f, &v, traj)?;
        output::write_columns(&dir.join("lyapunov.dat"), &["t".into(), "V".into()], &series(traj, |j| vec![vals[j]]))?;
    }
    Ok(())
}

/// Static validation report; no simulation.
pub fn check(path: &Path) -> Result<String, Failure> {
    let sc = Scenario::load(path)?;
    let f = &sc.config.formation;
    let dim = f.dim();
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", sc.name);
    let _ = writeln!(s, "formation: {} agents, {} edges, dim {}", f.agent_count(), f.edge_count(), dim);
    let (rigid, rep) = graph::is_inf_min_rigid(&f.graph, f.shape.zstar(), dim)?;
    let _ = writeln!(s, "rigidity: {rep}");
    let _ = writeln!(
        s,
        "estimating topology: {}",
        if f.graph.has_directed_cycle() { "contains a directed cycle" } else { "acyclic" }
    );
    let _ = writeln!(s, "controller: {}", sc.config.controller.name());
    if let ControllerConfig::Estimator2 { .. } = sc.config.controller {
        let h = motion::check_assumption1(&f.graph, f.shape.zstar(), dim)?;
        let _ = writeln!(
            s,
            "Assumption 1: {} (max real eigenvalue {:.6e})",
            if h.hurwitz { "satisfied" } else { "violated" },
            h.max_real
        );
    }
    if let (ControllerConfig::Motion { params, .. }, Some(source)) = (&sc.config.controller, &sc.motion_source) {
        if !rigid {
            let _ = writeln!(s, "motion parameters: not checked, shape is not rigid");
            return Ok(s);
        }
        let subs = MotionSubspaces::new(&f.graph, f.shape.zstar(), dim, SUBSPACE_TOL)?;
        let _ = writeln!(
            s,
            "motion subspaces: dim U = {}, dim W = {}, dim Ker T = {}",
            subs.translational.dim(),
            subs.rotational.dim(),
            subs.kernel_t.dim()
        );
        match source {
            MotionSource::Composed { mu_v, mu_tilde_v, mu_omega, mu_tilde_omega } => {
                let _ = writeln!(s, "translational residual: {:.3e}", subs.translational_residual(mu_v, mu_tilde_v)?);
                let _ = writeln!(s, "rotational residual: {:.3e}", subs.rotational_residual(mu_omega, mu_tilde_omega)?);
            }
            MotionSource::Explicit => {
                let all = subs.translational.sum(&subs.rotational, SUBSPACE_TOL)?.sum(&subs.kernel_t, SUBSPACE_TOL)?;
                let mut x = params.mu.clone();
                x.extend_from_slice(&params.mu_tilde);
                let _ = writeln!(s, "rigid-motion residual: {:.3e}", all.residual(&x)?);
            }
            MotionSource::Target { residual, .. } => {
                let _ = writeln!(s, "target fit residual: {residual:.3e}");
            }
        }
    }
    Ok(s)
}

pub struct BatchEntry {
    pub path: PathBuf,
    pub result: Result<RunOutcome, Failure>,
}

/// Runs every `*.toml` in `dir`, each into `out/<scenario name>`.
pub fn batch(dir: &Path, jobs: usize, out: &Path, opts: &RunOptions) -> Result<Vec<BatchEntry>, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::config(e.to_string()))?;
    let entries = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let o = RunOptions { out: Some(out.join(stem)), ..opts.clone() };
                BatchEntry { path: p.clone(), result: run(p, &o) }
            })
            .collect()
    });
    Ok(entries)
}
