use std::fmt::Write as _;

use rsl_core::analysis::{self, LyapunovVariant};
use rsl_core::control::ControllerConfig;
use rsl_core::graph;
use rsl_core::scenario::Scenario;
use rsl_core::sim::{self, Trajectory};

/// Thresholds used for the yes/no lines of the summary.
pub const SPEED_ZERO: f64 = 1e-3;
pub const ERROR_ZERO: f64 = 1e-2;
pub const ESTIMATE_MATCH: f64 = 1e-2;

fn fmt_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "no"
    }
}

fn lyapunov_for(controller: &ControllerConfig) -> Option<(&'static str, LyapunovVariant)> {
    match controller {
        ControllerConfig::Gradient | ControllerConfig::HamiltonianFamily { .. } => {
            Some(("energy phi", LyapunovVariant::Energy))
        }
        ControllerConfig::Estimator1 { mu } => {
            Some(("estimator V", LyapunovVariant::Estimator1 { mu: mu.0.clone() }))
        }
        _ => None,
    }
}

/// Human-readable run summary.
pub fn summary(scenario: &Scenario, traj: &Trajectory) -> String {
    let cfg = &scenario.config;
    let f = &cfg.formation;
    let mut s = String::new();
    let last = traj.len() - 1;
    let _ = writeln!(s, "scenario: {}", scenario.name);
    let _ = writeln!(
        s,
        "controller: {}  agents: {}  edges: {}  dim: {}",
        cfg.controller.name(),
        f.agent_count(),
        f.edge_count(),
        f.dim()
    );
    let _ = writeln!(
        s,
        "integration: h = {:e}  t_end = {}  seed = {}  samples = {}",
        cfg.h,
        cfg.t_end,
        cfg.seed,
        traj.len()
    );
    if let Ok(r) = graph::rigidity_report(&f.graph, f.shape.zstar(), f.dim()) {
        let _ = writeln!(s, "desired shape: {r}");
    }

    let window = scenario.output.steady_fraction * traj.duration();
    let ss = sim::detect_steady_state(traj, window, scenario.output.steady_tol);
    match ss.t_ss {
        Some(t) => {
            let _ = writeln!(
                s,
                "steady state: reached at t = {t:.3} (window {window:.3} s, tol {:e})",
                scenario.output.steady_tol
            );
        }
        None => {
            let _ = writeln!(s, "steady state: not reached (window {window:.3} s, tol {:e})", scenario.output.steady_tol);
        }
    }

    let speeds = &traj.speeds[last];
    let e = &traj.e[last];
    let _ = writeln!(s, "final speeds: {}", fmt_vec(speeds));
    let _ = writeln!(s, "final errors e: {}", fmt_vec(e));
    if let Ok(d) = sim::distances_at(traj, f, last) {
        let _ = writeln!(s, "final distances: {}", fmt_vec(&d));
    }
    let _ = writeln!(s, "speeds -> 0: {} (max {:.3e})", verdict(max_abs(speeds) < SPEED_ZERO), max_abs(speeds));
    let _ = writeln!(s, "errors -> 0: {} (max {:.3e})", verdict(max_abs(e) < ERROR_ZERO), max_abs(e));

    if let (Some(mu), Some(est)) = (cfg.controller.mismatch(), &traj.mu_hat) {
        let gap: Vec<f64> = est[last].iter().zip(mu.as_slice()).map(|(a, b)| a - b).collect();
        let _ = writeln!(s, "final mu_hat: {}", fmt_vec(&est[last]));
        let _ = writeln!(s, "actual mu: {}", fmt_vec(mu.as_slice()));
        let _ = writeln!(s, "mu_hat -> mu: {} (max gap {:.3e})", verdict(max_abs(&gap) < ESTIMATE_MATCH), max_abs(&gap));
    }

    match lyapunov_for(&cfg.controller) {
        Some((name, variant)) => match analysis::lyapunov_series(f, &variant, traj) {
            Ok(vals) => {
                let rise = analysis::max_increase(&vals);
                let scale = vals.first().copied().unwrap_or(0.0).abs().max(1.0);
                let _ = writeln!(
                    s,
                    "lyapunov ({name}): {:.6e} -> {:.6e}  non-increasing: {} (largest rise {:.3e})",
                    vals[0],
                    vals[last],
                    verdict(rise <= 1e-9 * scale),
                    rise.max(0.0)
                );
            }
            Err(err) => {
                let _ = writeln!(s, "lyapunov ({name}): unavailable ({err})");
            }
        },
        None => {
            let _ = writeln!(s, "lyapunov: no monotone function for this controller");
        }
    }

    match analysis::fit_body_motion(&traj.p[last], &traj.v[last], traj.dim) {
        Ok(fit) => {
            let _ = writeln!(
                s,
                "body motion (final sample): v_c = {}  omega = {}  residual = {:.3e}",
                fmt_vec(&fit.v_c),
                fmt_vec(&fit.omega),
                fit.residual
            );
            let nv = rsl_core::numlin::norm(&fit.v_c);
            let nw = rsl_core::numlin::norm(&fit.omega);
            if traj.dim == 3 && nv > 1e-9 && nw > 1e-9 {
                let _ = writeln!(s, "angle(v_c, omega) = {:.4} deg", analysis::axis_angle_deg(&fit.v_c, &fit.omega));
            }
        }
        Err(err) => {
            let _ = writeln!(s, "body motion: unavailable ({err})");
        }
    }
    s
}
