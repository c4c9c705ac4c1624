//! TOML scenario files.
//!
//! ```toml
//! name = "fig4_tetra_est1"
//!
//! [formation]
//! preset = "tetrahedron"      # or: dim, agents, edges, positions | zstar
//! side = 70.0
//!
//! [initial]
//! mode = "random_box"         # random_box | around_shape | explicit
//! origin = [0.0, 0.0, 0.0]
//! size = 100.0
//! speed_cap = 2.0
//!
//! [controller]
//! kind = "estimator1"
//! mu = [12.14, -41.12, -16.64, -5.91, 0.45, 18.41]
//!
//! [sim]
//! h = 1e-3
//! t_end = 60.0
//! record_every = 100
//! seed = 1
//! ```
//!
//! Agent indices in `edges` are 1-based `[tail, head]` pairs. Errors carry
//! the line of the offending key.

use std::path::Path;

use serde::Deserialize;

use crate::control::{ControllerConfig, Mismatch};
use crate::error::{Error, Result};
use crate::graph::{Edge, Formation, FormationGraph, ShapeSpec};
use crate::motion;
use crate::presets;
use crate::sim::{InitialCondition, SimConfig, DEFAULT_STEP};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    description: Option<String>,
    formation: RawFormation,
    #[serde(default)]
    initial: RawInitial,
    controller: RawController,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFormation {
    preset: Option<String>,
    side: Option<f64>,
    dim: Option<usize>,
    agents: Option<usize>,
    edges: Option<Vec<[usize; 2]>>,
    positions: Option<Vec<Vec<f64>>>,
    zstar: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    mode: Option<String>,
    origin: Option<Vec<f64>>,
    size: Option<f64>,
    speed_cap: Option<f64>,
    jitter: Option<f64>,
    p: Option<Vec<Vec<f64>>>,
    v: Option<Vec<Vec<f64>>>,
    mu_hat: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawController {
    kind: String,
    lambda: Option<f64>,
    mu: Option<Vec<f64>>,
    kappa: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    mu_tilde: Option<Vec<f64>>,
    s_v: Option<f64>,
    s_omega: Option<f64>,
    mu_v: Option<Vec<f64>>,
    mu_tilde_v: Option<Vec<f64>>,
    mu_omega: Option<Vec<f64>>,
    mu_tilde_omega: Option<Vec<f64>>,
    target_v_c: Option<Vec<f64>>,
    target_omega: Option<Vec<f64>>,
    downscale: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSim {
    h: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    trajectory: Option<String>,
    summary: Option<String>,
    steady_fraction: Option<f64>,
    steady_tol: Option<f64>,
}

/// How a motion controller's parameters were specified, kept for `check`.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionSource {
    Explicit,
    Composed {
        mu_v: Vec<f64>,
        mu_tilde_v: Vec<f64>,
        mu_omega: Vec<f64>,
        mu_tilde_omega: Vec<f64>,
    },
    Target {
        v_c: Vec<f64>,
        omega: Vec<f64>,
        residual: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub trajectory: String,
    pub summary: String,
    /// Fraction of the run, counted from the end, treated as steady window.
    pub steady_fraction: f64,
    pub steady_tol: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub config: SimConfig,
    pub output: OutputSpec,
    pub motion_source: Option<MotionSource>,
}

/// 1-based line of `key` inside `[section]` (top level when `section` is
/// empty).
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, msg: impl AsRef<str>) -> Error {
        let at = line_of(self.text, section, key)
            .or_else(|| line_of(self.text, section, ""))
            .map(|l| format!("line {l}: "))
            .unwrap_or_default();
        let path = if key.is_empty() { section.to_string() } else { format!("{section}.{key}") };
        Error::Config(format!("{at}{path}: {}", msg.as_ref()))
    }

    fn need<T: Clone>(&self, v: &Option<T>, section: &str, key: &str) -> Result<T> {
        v.clone().ok_or_else(|| self.err(section, "", format!("missing key '{key}'")))
    }

    fn wrap<T>(&self, r: Result<T>, section: &str, key: &str) -> Result<T> {
        r.map_err(|e| match e {
            Error::Config(_) => e,
            other => self.err(section, key, other.to_string()),
        })
    }
}

fn flatten(rows: &[Vec<f64>], dim: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(format!("each {what} entry needs {dim} coordinates, found {}", r.len()));
    }
    Ok(rows.concat())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::parse(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!("line {}: ", text[..s.start.min(text.len())].matches('\n').count() + 1))
                .unwrap_or_default();
            Error::Config(format!("{at}{}", e.message()))
        })?;
        let cx = Ctx { text };
        let formation = build_formation(&cx, &raw.formation)?;
        let (controller, motion_source) = build_controller(&cx, &raw.controller, &formation)?;
        let dim = formation.dim();
        let n = formation.agent_count();
        let ri = &raw.initial;
        let mode = ri.mode.clone().unwrap_or_else(|| "random_box".into());
        let initial = match mode.as_str() {
            "random_box" => InitialCondition::RandomBox {
                origin: ri.origin.clone().unwrap_or_else(|| vec![0.0; dim]),
                size: ri.size.unwrap_or(1.0),
                speed_cap: ri.speed_cap.unwrap_or(0.0),
            },
            "around_shape" => InitialCondition::AroundShape {
                jitter: ri.jitter.unwrap_or(0.0),
                speed_cap: ri.speed_cap.unwrap_or(0.0),
            },
            "explicit" => {
                let p = cx.need(&ri.p, "initial", "p")?;
                let p = flatten(&p, dim, "p").map_err(|m| cx.err("initial", "p", m))?;
                let v = match &ri.v {
                    Some(v) => flatten(v, dim, "v").map_err(|m| cx.err("initial", "v", m))?,
                    None => vec![0.0; n * dim],
                };
                if p.len() != n * dim {
                    return Err(cx.err("initial", "p", format!("expected {n} agents")));
                }
                if v.len() != n * dim {
                    return Err(cx.err("initial", "v", format!("expected {n} agents")));
                }
                InitialCondition::Explicit { p, v }
            }
            other => return Err(cx.err("initial", "mode", format!("unknown mode '{other}'"))),
        };
        if let InitialCondition::RandomBox { origin, .. } = &initial {
            if origin.len() != dim {
                return Err(cx.err("initial", "origin", format!("needs {dim} coordinates")));
            }
        }
        let mut config = SimConfig::new(formation, controller, initial);
        config.mu_hat0 = ri.mu_hat.clone();
        config.h = raw.sim.h.unwrap_or(DEFAULT_STEP);
        config.t_end = raw.sim.t_end.unwrap_or(10.0);
        config.record_every = raw.sim.record_every.unwrap_or(100);
        config.seed = raw.sim.seed.unwrap_or(0);
        if let Err(e) = config.validate() {
            let key = match e.to_string() {
                m if m.contains("step") => "h",
                m if m.contains("t_end") => "t_end",
                m if m.contains("record_every") => "record_every",
                _ => "",
            };
            let section = if key.is_empty() { "initial" } else { "sim" };
            return Err(cx.err(section, key, e.to_string()));
        }
        let ro = &raw.output;
        let output = OutputSpec {
            dir: ro.dir.clone(),
            trajectory: ro.trajectory.clone().unwrap_or_else(|| "trajectory.csv".into()),
            summary: ro.summary.clone().unwrap_or_else(|| "summary.txt".into()),
            steady_fraction: ro.steady_fraction.unwrap_or(0.2),
            steady_tol: ro.steady_tol.unwrap_or(1e-3),
        };
        if !(output.steady_fraction > 0.0 && output.steady_fraction < 1.0) {
            return Err(cx.err("output", "steady_fraction", "must lie in (0, 1)"));
        }
        if !(output.steady_tol > 0.0) {
            return Err(cx.err("output", "steady_tol", "must be positive"));
        }
        Ok(Self {
            name: raw.name.unwrap_or_default(),
            description: raw.description,
            config,
            output,
            motion_source,
        })
    }
}

fn build_formation(cx: &Ctx, rf: &RawFormation) -> Result<Formation> {
    if let Some(preset) = &rf.preset {
        let side = rf.side.unwrap_or(1.0);
        if !(side > 0.0) {
            return Err(cx.err("formation", "side", "must be positive"));
        }
        let f = match preset.as_str() {
            "tetrahedron" => presets::tetrahedron(side),
            "hexagon" => presets::hexagon(side),
            "hexagon_reversed" => presets::hexagon_reversed(side),
            "triangle_acyclic" => presets::triangle(presets::triangle_acyclic_graph(), side),
            "triangle_cyclic" => presets::triangle(presets::triangle_cyclic_graph(), side),
            "star" => presets::star(side),
            "square" => presets::square(side, false),
            "square_diagonal" => presets::square(side, true),
            other => return Err(cx.err("formation", "preset", format!("unknown preset '{other}'"))),
        };
        return cx.wrap(f, "formation", "preset");
    }
    let dim = cx.need(&rf.dim, "formation", "dim")?;
    let n = cx.need(&rf.agents, "formation", "agents")?;
    let edges = cx.need(&rf.edges, "formation", "edges")?;
    let mut list = Vec::with_capacity(edges.len());
    for [t, h] in edges {
        if t == 0 || h == 0 {
            return Err(cx.err("formation", "edges", "agent indices are 1-based"));
        }
        list.push(Edge::new(t - 1, h - 1));
    }
    let graph = cx.wrap(FormationGraph::new(n, list), "formation", "edges")?;
    let shape = match (&rf.positions, &rf.zstar) {
        (Some(p), None) => {
            let p = flatten(p, dim, "positions").map_err(|m| cx.err("formation", "positions", m))?;
            cx.wrap(ShapeSpec::from_positions(&graph, dim, &p), "formation", "positions")?
        }
        (None, Some(z)) => {
            let z = flatten(z, dim, "zstar").map_err(|m| cx.err("formation", "zstar", m))?;
            cx.wrap(ShapeSpec::from_relative(&graph, dim, z), "formation", "zstar")?
        }
        _ => return Err(cx.err("formation", "", "give exactly one of 'positions' or 'zstar'")),
    };
    cx.wrap(Formation::new(graph, shape), "formation", "")
}

fn build_controller(
    cx: &Ctx,
    rc: &RawController,
    formation: &Formation,
) -> Result<(ControllerConfig, Option<MotionSource>)> {
    let s = "controller";
    let mu = || cx.need(&rc.mu, s, "mu").map(Mismatch);
    let config = match rc.kind.as_str() {
        "gradient" => ControllerConfig::Gradient,
        "hamiltonian" => ControllerConfig::HamiltonianFamily { lambda: cx.need(&rc.lambda, s, "lambda")? },
        "mismatched" => ControllerConfig::Mismatched { mu: mu()? },
        "estimator1" => ControllerConfig::Estimator1 { mu: mu()? },
        "estimator2" => ControllerConfig::Estimator2 { mu: mu()?, kappa: rc.kappa.unwrap_or(1.0) },
        "motion" => {
            let (config, source) = build_motion(cx, rc, formation)?;
            return Ok((config, Some(source)));
        }
        other => return Err(cx.err(s, "kind", format!("unknown controller '{other}'"))),
    };
    if let Err(e) = config.validate(formation) {
        let key = match &config {
            ControllerConfig::HamiltonianFamily { .. } => "lambda",
            ControllerConfig::Estimator2 { .. } if e.to_string().contains("kappa") => "kappa",
            _ => "mu",
        };
        return Err(cx.err(s, key, e.to_string()));
    }
    Ok((config, None))
}

fn build_motion(cx: &Ctx, rc: &RawController, formation: &Formation) -> Result<(ControllerConfig, MotionSource)> {
    let s = "controller";
    let c1 = rc.c1.unwrap_or(1.0);
    let c2 = rc.c2.unwrap_or(1.0);
    let downscale = rc.downscale.unwrap_or(1.0);
    if !(downscale > 0.0) {
        return Err(cx.err(s, "downscale", "must be positive"));
    }
    let g = &formation.graph;
    let dim = formation.dim();
    let (mu, mu_tilde, source) = if let Some(target_v) = &rc.target_v_c {
        let omega = cx.need(&rc.target_omega, s, "target_omega")?;
        let fit = cx.wrap(
            motion::fit_motion_parameters(g, formation.shape.zstar(), dim, target_v, &omega),
            s,
            "target_v_c",
        )?;
        let scale = |x: &[f64]| x.iter().map(|a| a * downscale).collect::<Vec<_>>();
        let src = MotionSource::Target { v_c: target_v.clone(), omega, residual: fit.residual };
        (scale(&fit.mu), scale(&fit.mu_tilde), src)
    } else if rc.mu_v.is_some() || rc.mu_omega.is_some() {
        let ne = g.edge_count();
        let zero = vec![0.0; ne];
        let get = |v: &Option<Vec<f64>>| v.clone().unwrap_or_else(|| zero.clone());
        let (mv, mtv, mw, mtw) = (get(&rc.mu_v), get(&rc.mu_tilde_v), get(&rc.mu_omega), get(&rc.mu_tilde_omega));
        for (key, v) in [("mu_v", &mv), ("mu_tilde_v", &mtv), ("mu_omega", &mw), ("mu_tilde_omega", &mtw)] {
            if v.len() != ne {
                return Err(cx.err(s, key, format!("has {} entries, expected {ne}", v.len())));
            }
        }
        let (mu, mt) = cx.wrap(
            motion::compose_parameters(
                (&mv, &mtv),
                (&mw, &mtw),
                rc.s_v.unwrap_or(1.0),
                rc.s_omega.unwrap_or(1.0),
                downscale,
            ),
            s,
            "mu_v",
        )?;
        let src = MotionSource::Composed { mu_v: mv, mu_tilde_v: mtv, mu_omega: mw, mu_tilde_omega: mtw };
        (mu, mt, src)
    } else {
        let mu = cx.need(&rc.mu, s, "mu")?;
        let mt = cx.need(&rc.mu_tilde, s, "mu_tilde")?;
        let scale = |x: &[f64]| x.iter().map(|a| a * downscale).collect::<Vec<_>>();
        (scale(&mu), scale(&mt), MotionSource::Explicit)
    };
    let params = cx.wrap(motion::assemble_motion(g, &mu, &mu_tilde, c1, dim), s, "mu")?;
    let config = ControllerConfig::Motion { params, c2 };
    if let Err(e) = config.validate(formation) {
        return Err(cx.err(s, "c2", e.to_string()));
    }
    Ok((config, source))
}
