//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails, except the known deviations listed in `KNOWN`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsl_core::analysis::{self, LyapunovVariant};
use rsl_core::control::{self, ControllerConfig, Mismatch, SwarmState};
use rsl_core::graph::{self, Formation};
use rsl_core::motion::{self, MotionSubspaces, SUBSPACE_TOL};
use rsl_core::numlin::{self, Mat, Subspace};
use rsl_core::presets;
use rsl_core::sim::{self, InitialCondition, SimConfig, Trajectory};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Lines expected to fail for structural reasons. The hexagon with its
/// original orientation makes agent 5 the head of three edges in the plane,
/// so the linearisation `F` is singular; the reversed orientation is
/// reported on its own line.
const KNOWN: [&str; 1] = ["3 hexagon + estimator 2 (original orientation)"];

#[derive(Default)]
struct Report {
    failures: usize,
    known: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if !ok {
            if KNOWN.contains(&id) {
                self.known += 1;
            } else {
                self.failures += 1;
            }
        }
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn sq(xs: &[f64]) -> f64 {
    numlin::dot(xs, xs)
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fig4_config(seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(
        presets::tetrahedron(70.0).unwrap(),
        ControllerConfig::Estimator1 { mu: Mismatch(presets::TETRAHEDRON_MISMATCH.to_vec()) },
        InitialCondition::RandomBox { origin: vec![0.0; 3], size: 100.0, speed_cap: 2.0 },
    );
    cfg.h = 1e-3;
    cfg.t_end = 60.0;
    cfg.seed = seed;
    cfg
}

fn criteria_1_and_2(r: &mut Report) {
    let mu = presets::TETRAHEDRON_MISMATCH;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut slowest = Duration::ZERO;
    let mut all_steady = true;
    let mut bound_ok = true;
    let mut bound_margin = f64::INFINITY;
    for seed in SEEDS {
        let cfg = fig4_config(seed);
        let t0 = Instant::now();
        let traj = sim::simulate(&cfg).unwrap();
        slowest = slowest.max(t0.elapsed());
        let last = traj.len() - 1;
        all_steady &= sim::detect_steady_state(&traj, 0.2 * traj.duration(), 1e-3).reached;
        let est = &traj.mu_hat.as_ref().unwrap()[last];
        worst.0 = worst.0.max(max_abs(&traj.speeds[last]));
        worst.1 = worst.1.max(max_abs(&traj.e[last]));
        worst.2 = worst.2.max(gap(est, &mu));

        let mu_hat0 = &traj.mu_hat.as_ref().unwrap()[0];
        let bound = analysis::estimator1_distortion_bound(&mu, mu_hat0, &traj.v[0], &traj.e[0]);
        let fin = sq(&traj.e[last]);
        bound_ok &= fin <= bound + 1e-9;
        bound_margin = bound_margin.min(bound - fin);
    }
    let ok = worst.0 < 1e-3 && worst.1 < 1e-2 && worst.2 < 1e-2 && all_steady && slowest.as_secs_f64() < 30.0;
    r.line(
        "1 tetrahedron + estimator 1",
        ok,
        format!(
            "{} seeds, max speed {:.2e} (<1e-3), max |e| {:.2e} (<1e-2), max |mu_hat-mu| {:.2e} (<1e-2), steady {}, slowest run {:.2} s (<30)",
            SEEDS.len(),
            worst.0,
            worst.1,
            worst.2,
            all_steady,
            slowest.as_secs_f64()
        ),
    );
    r.line(
        "2 distortion bound",
        bound_ok,
        format!("final ||e||^2 <= 2||mu-mu_hat(0)||^2 + 2||v(0)||^2 + ||e(0)||^2 on all seeds, smallest margin {bound_margin:.3e}"),
    );
}

fn hexagon_run(f: Formation, seed: u64) -> Trajectory {
    let mut cfg = SimConfig::new(
        f,
        ControllerConfig::Estimator2 { mu: Mismatch(presets::HEXAGON_MISMATCH.to_vec()), kappa: 1.0 },
        InitialCondition::AroundShape { jitter: 5.0, speed_cap: 1.0 },
    );
    cfg.t_end = 120.0;
    cfg.seed = seed;
    sim::simulate(&cfg).unwrap()
}

fn criterion_3(r: &mut Report) {
    let mu = presets::HEXAGON_MISMATCH;
    for (label, f) in [
        ("3 hexagon + estimator 2 (original orientation)", presets::hexagon(50.0).unwrap()),
        ("3' hexagon + estimator 2 (all edges reversed)", presets::hexagon_reversed(50.0).unwrap()),
    ] {
        let hw = motion::check_assumption1(&f.graph, f.shape.zstar(), 2).unwrap();
        let mut e_max = 0.0f64;
        let mut mu_gap = 0.0f64;
        for seed in [1, 2, 3] {
            let traj = hexagon_run(f.clone(), seed);
            let last = traj.len() - 1;
            e_max = e_max.max(max_abs(&traj.e[last]));
            mu_gap = mu_gap.max(gap(&traj.mu_hat.as_ref().unwrap()[last], &mu));
        }
        let ok = hw.hurwitz && e_max < 1e-3 && mu_gap < 1e-3;
        r.line(
            label,
            ok,
            format!(
                "F Hurwitz {} (max Re {:.3e}), 3 seeds: max |e| {:.2e} (<1e-3), max |mu_hat-mu| {:.2e} (<1e-3)",
                hw.hurwitz, hw.max_real, e_max, mu_gap
            ),
        );
    }
}

fn criterion_4(r: &mut Report) {
    let f = presets::tetrahedron(25.0).unwrap();
    let (mu, mt) = motion::compose_parameters(
        (&presets::TETRA_MU_V, &presets::TETRA_MU_TILDE_V),
        (&presets::TETRA_MU_OMEGA, &presets::TETRA_MU_TILDE_OMEGA),
        0.15,
        0.25,
        1.0,
    )
    .unwrap();
    let params = motion::assemble_motion(&f.graph, &mu, &mt, 1.0, 3).unwrap();
    let mut cfg = SimConfig::new(
        f.clone(),
        ControllerConfig::Motion { params, c2: 1.0 },
        InitialCondition::RandomBox { origin: vec![0.0; 3], size: 50.0, speed_cap: 2.0 },
    );
    cfg.t_end = 60.0;
    cfg.seed = 1;
    let traj = sim::simulate(&cfg).unwrap();
    let last = traj.len() - 1;
    let s = &traj.speeds[last];
    let rel = |x: f64, want: f64| (x - want).abs() / want;
    let base = s[..3].iter().map(|x| rel(*x, 11.113)).fold(0.0, f64::max);
    let apex = rel(s[3], 9.184);
    let d = sim::distances_at(&traj, &f, last).unwrap();
    let dist = d.iter().map(|x| rel(*x, 25.0)).fold(0.0, f64::max);
    let fit = analysis::fit_body_motion(&traj.p[last], &traj.v[last], 3).unwrap();
    let angle = analysis::axis_angle_deg(&fit.v_c, &fit.omega);
    let ok = base < 0.01 && apex < 0.01 && dist < 1e-3 && angle < 1.0;
    r.line(
        "4 tetrahedron motion",
        ok,
        format!(
            "speeds [{:.4}, {:.4}, {:.4}, {:.4}] vs 11.113/9.184 (max rel dev {:.2e}, <1e-2), distances max rel dev {:.2e} (<1e-3), angle(v_c, omega) {:.2e} deg (<1)",
            s[0],
            s[1],
            s[2],
            s[3],
            base.max(apex),
            dist,
            angle
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let mut cfg = SimConfig::new(
        presets::tetrahedron(70.0).unwrap(),
        ControllerConfig::Mismatched { mu: Mismatch(presets::TETRAHEDRON_MISMATCH.to_vec()) },
        InitialCondition::AroundShape { jitter: 5.0, speed_cap: 1.0 },
    );
    cfg.t_end = 60.0;
    cfg.seed = 1;
    let traj = sim::simulate(&cfg).unwrap();
    let rep = analysis::constancy_report(&traj, 0.8 * cfg.t_end).unwrap();
    let distortion = rep.group("|e[").map(|e| e.mean).fold(0.0, f64::max);
    let motion = rep.group("s[").map(|e| e.mean).fold(0.0, f64::max);
    let speed_var = rep.max_variation("s[");
    let acc_var = rep.max_variation("|a[");
    let body_var = rep.get("v_c_body").unwrap().variation.max(rep.get("omega_body").unwrap().variation);
    r.line(
        "5a mismatch distorts the shape",
        distortion > 0.1,
        format!("largest steady |e_k| {distortion:.3} (>0.1)"),
    );
    r.line("5b mismatch moves the swarm", motion > 0.01, format!("largest mean speed {motion:.3} (>0.01)"));
    r.line(
        "5c constant speeds and accelerations",
        speed_var < 5e-3 && acc_var < 5e-3,
        format!("relative variation: speeds {speed_var:.2e}, |a_i| {acc_var:.2e} (<5e-3)"),
    );
    r.line(
        "5d constant body-frame motion",
        body_var < 1e-2,
        format!("relative variation of (v_c, omega) in the body frame {body_var:.2e} (<1e-2)"),
    );
}

fn criterion_6(r: &mut Report) {
    let f = presets::star(5.0).unwrap();
    let mu = vec![0.3, -0.5, 0.2, 0.4, -0.3, 0.25, -0.2];
    let mut cfg = SimConfig::new(
        f,
        ControllerConfig::Estimator1 { mu: Mismatch(mu.clone()) },
        InitialCondition::AroundShape { jitter: 0.5, speed_cap: 0.2 },
    );
    cfg.t_end = 80.0;
    cfg.record_every = 1;
    cfg.seed = 1;
    let traj = sim::simulate(&cfg).unwrap();
    let last = traj.len() - 1;
    let others = traj.e[last].iter().enumerate().filter(|(k, _)| *k != 1).map(|(_, x)| x.abs()).fold(0.0, f64::max);
    let sup_e2 = traj.e.iter().map(|e| e[1].abs()).fold(0.0, f64::max);
    let rho = analysis::estimator1_rho(&mu, &traj.mu_hat.as_ref().unwrap()[0], &traj.v[0], &traj.e[0]);
    let tight = (2.0 * rho).sqrt();
    let loose = 2.0 * rho.sqrt();
    let ok = others < 1e-3 && sup_e2 <= tight && sup_e2 <= loose;
    r.line(
        "6 star topology",
        ok,
        format!(
            "max final |e_k|, k != 2: {others:.2e} (<1e-3); sup |e_2| {sup_e2:.3} <= sqrt(2 rho) {tight:.3} and <= 2 sqrt(rho) {loose:.3}"
        ),
    );
}

fn random_mat(rng: &mut ChaCha8Rng) -> Mat {
    let rows = rng.random_range(1..8);
    let cols = rng.random_range(1..8);
    let r = rng.random_range(0..=rows.min(cols));
    let a = Mat::from_fn(rows, r, |_, _| rng.random_range(-2.0..2.0));
    let b = Mat::from_fn(r, cols, |_, _| rng.random_range(-2.0..2.0));
    if r == 0 {
        Mat::zeros(rows, cols)
    } else {
        a.matmul(&b).unwrap()
    }
}

fn prop_rank_nullity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    for _ in 0..200 {
        let m = random_mat(&mut rng);
        let rank = numlin::rank(&m, 1e-9).unwrap();
        let k = numlin::null_space(&m, 1e-9).unwrap().dim();
        let reference = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
        let sv = reference.singular_values();
        let want = if sv.max() == 0.0 { 0 } else { sv.iter().filter(|s| **s > 1e-9 * sv.max()).count() };
        if rank + k != m.cols() || rank != want {
            bad += 1;
        }
    }
    (bad == 0, format!("200 random matrices, {bad} mismatches"))
}

fn prop_potential_gradient() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = rng.random_range(0.5..5.0);
        let g = control::edge_potential_gradient(&z, d);
        let scale = max_abs(&g).max(1.0);
        for i in 0..3 {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[i] += 1e-5;
            zm[i] -= 1e-5;
            let fd = (control::edge_potential(&zp, d) - control::edge_potential(&zm, d)) / 2e-5;
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    (worst < 1e-6, format!("max relative error {worst:.2e} (<1e-6)"))
}

fn prop_energy_monotone() -> (bool, String) {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10 {
        let mut cfg = SimConfig::new(
            presets::tetrahedron(10.0).unwrap(),
            ControllerConfig::Gradient,
            InitialCondition::RandomBox { origin: vec![0.0; 3], size: 15.0, speed_cap: 2.0 },
        );
        cfg.seed = seed;
        cfg.t_end = 5.0;
        cfg.record_every = 1;
        let traj = sim::simulate(&cfg).unwrap();
        let phi = analysis::lyapunov_series(&cfg.formation, &LyapunovVariant::Energy, &traj).unwrap();
        worst = worst.max(analysis::max_increase(&phi) / phi[0].max(1.0));
    }
    (worst <= 1e-9, format!("10 runs, largest relative rise {worst:.2e}"))
}

fn prop_estimator1_rate() -> (bool, String) {
    let f = presets::tetrahedron(7.0).unwrap();
    let mu: Vec<f64> = presets::TETRAHEDRON_MISMATCH.iter().map(|x| x / 100.0).collect();
    let ctrl = ControllerConfig::Estimator1 { mu: Mismatch(mu.clone()) };
    let mut cfg = SimConfig::new(
        f.clone(),
        ctrl.clone(),
        InitialCondition::RandomBox { origin: vec![0.0; 3], size: 10.0, speed_cap: 2.0 },
    );
    cfg.seed = 11;
    let nm = 12;
    let v_of = |x: &[f64]| {
        let s = SwarmState::from_vec(&f, true, x).unwrap();
        analysis::lyapunov_value(&f, &LyapunovVariant::Estimator1 { mu: mu.clone() }, &s).unwrap()
    };
    let speed2 = |x: &[f64]| sq(&x[nm..2 * nm]);
    let h = 1e-3;
    let step = |x: &[f64], dt: f64| sim::rk4_step(|y| ctrl.derivative(&f, y), x, dt, 0.0).unwrap();
    let mut x = cfg.initial_state().unwrap();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let mid = step(&x, h / 2.0);
        let next = step(&mid, h / 2.0);
        let dv = v_of(&next) - v_of(&x);
        let integral = h / 6.0 * (speed2(&x) + 4.0 * speed2(&mid) + speed2(&next));
        worst = worst.max((dv + integral).abs() / (h.powi(4) * v_of(&x).max(1.0)));
        x = next;
    }
    (worst <= 10.0, format!("max |dV + int ||v||^2| / (h^4 V) = {worst:.2e} (<=10)"))
}

fn random_state(f: &Formation, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let scale = f.shape.distances()[0];
    let base = motion::body_positions(&f.graph, f.shape.zstar(), f.dim()).unwrap();
    let p = base.iter().map(|x| x + 0.3 * scale * rng.random_range(-1.0..1.0)).collect();
    let v = base.iter().map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    let mu = (0..f.edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    (p, v, mu)
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    gap(a, b) / max_abs(a).max(max_abs(b)).max(1.0)
}

fn prop_dual_forms() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shapes = [
        presets::tetrahedron(70.0).unwrap(),
        presets::hexagon(50.0).unwrap(),
        presets::star(5.0).unwrap(),
        presets::triangle(presets::triangle_cyclic_graph(), 2.0).unwrap(),
    ];
    let (mut w18, mut w41) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let f = &shapes[i % shapes.len()];
        let (p, v, mu) = random_state(f, &mut rng);
        let a = control::mismatched_control(f, &p, &v, &mu).unwrap();
        let b = control::mismatched_control_matrix_form(f, &p, &v, &mu).unwrap();
        w18 = w18.max(rel_gap(&a, &b));
        let mt: Vec<f64> = mu.iter().map(|x| 0.5 - x).collect();
        let c1 = rng.random_range(0.2..3.0);
        let c2 = rng.random_range(0.2..3.0);
        let params = motion::assemble_motion(&f.graph, &mu, &mt, c1, f.dim()).unwrap();
        let a = control::motion_control(f, &p, &v, &params.a, c1, c2).unwrap();
        let b = control::motion_control_error_form(f, &p, &v, &params, c2).unwrap();
        w41 = w41.max(rel_gap(&a, &b));
    }
    (w18 < 1e-12 && w41 < 1e-12, format!("100 states: mismatch forms {w18:.1e}, motion forms {w41:.1e} (<1e-12)"))
}

fn prop_motion_subspaces() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut tr, mut rot) = (0.0f64, 0.0f64);
    for f in [presets::tetrahedron(25.0).unwrap(), presets::hexagon(50.0).unwrap()] {
        let dim = f.dim();
        let z = f.shape.zstar();
        let s = MotionSubspaces::new(&f.graph, z, dim, SUBSPACE_TOL).unwrap();
        let pick = |sub: &Subspace, rng: &mut ChaCha8Rng| {
            let mut x = vec![0.0; sub.ambient_dim()];
            for b in sub.basis() {
                let c = rng.random_range(-3.0..3.0);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
            }
            x
        };
        for _ in 0..50 {
            let u = s.transfer.mul_vec(&pick(&s.translational, &mut rng)).unwrap();
            for a in u.chunks(dim) {
                tr = tr.max(gap(a, &u[..dim]));
            }
            let w = s.transfer.mul_vec(&pick(&s.rotational, &mut rng)).unwrap();
            let zd = graph::relative_positions(&f.graph, &w, dim).unwrap();
            for k in 0..f.edge_count() {
                rot = rot.max(numlin::dot(&z[k * dim..(k + 1) * dim], &zd[k * dim..(k + 1) * dim]).abs());
            }
        }
    }
    (tr < 1e-10 && rot < 1e-10, format!("translation spread {tr:.1e}, edge-length rate {rot:.1e} (<1e-10)"))
}

fn prop_inertia() -> (bool, String) {
    let f = presets::triangle(presets::triangle_acyclic_graph(), 1.0).unwrap();
    let p0 = presets::equilateral_triangle_positions(1.0);
    let mut counts = Vec::new();
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut x0 = p0.clone();
        x0.extend([0.0; 6]);
        let rhs = |x: &[f64]| {
            let (a, b) = control::hamiltonian_family_rhs(&f, &x[..6], &x[6..], lambda).unwrap();
            [a, b].concat()
        };
        let mut j = Mat::zeros(12, 12);
        for c in 0..12 {
            let (mut xp, mut xm) = (x0.clone(), x0.clone());
            xp[c] += 1e-6;
            xm[c] -= 1e-6;
            let (fp, fm) = (rhs(&xp), rhs(&xm));
            for row in 0..12 {
                j[(row, c)] = (fp[row] - fm[row]) / 2e-6;
            }
        }
        let eig = numlin::eigenvalues(&j).unwrap();
        let pos = eig.iter().filter(|z| z.re > 1e-6).count();
        let neg = eig.iter().filter(|z| z.re < -1e-6).count();
        counts.push((pos, neg, 12 - pos - neg));
    }
    let same = counts.iter().all(|c| *c == counts[0]);
    (same, format!("(+, -, 0) counts for lambda in 0..1: {counts:?}"))
}

fn prop_rk4_order() -> (bool, String) {
    let f = presets::triangle(presets::triangle_acyclic_graph(), 1.0).unwrap();
    let run = |h: f64| {
        let mut cfg = SimConfig::new(
            f.clone(),
            ControllerConfig::Gradient,
            InitialCondition::Explicit {
                p: vec![0.1, -0.2, 1.2, 0.1, 0.4, 0.7],
                v: vec![0.0, 0.3, -0.2, 0.0, 0.1, -0.1],
            },
        );
        cfg.h = h;
        cfg.t_end = 2.0;
        cfg.record_every = usize::MAX;
        let t = sim::simulate(&cfg).unwrap();
        t.state(t.len() - 1)
    };
    let reference = run(0.1 / 64.0);
    let err = |h: f64| gap(&run(h), &reference);
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    let o1 = (e1 / e2).log2();
    let o2 = (e2 / e3).log2();
    let ok = (3.7..4.3).contains(&o1) && (3.7..4.3).contains(&o2);
    (ok, format!("observed orders {o1:.3}, {o2:.3} (4 +/- 0.3)"))
}

fn criterion_7(r: &mut Report) {
    let props: [(&str, fn() -> (bool, String)); 8] = [
        ("7a rank-nullity", prop_rank_nullity),
        ("7b potential gradient", prop_potential_gradient),
        ("7c energy monotone", prop_energy_monotone),
        ("7d estimator-1 Lyapunov rate", prop_estimator1_rate),
        ("7e dual formulas", prop_dual_forms),
        ("7f translation / rotation subspaces", prop_motion_subspaces),
        ("7g inertia across the family", prop_inertia),
        ("7h RK4 order", prop_rk4_order),
    ];
    for (id, f) in props {
        let (ok, detail) = f();
        r.line(id, ok, detail);
    }
}

fn main() {
    let mut r = Report::default();
    criteria_1_and_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    println!(
        "acceptance: {} unexpected failure(s), {} known deviation(s)",
        r.failures, r.known
    );
    if r.failures > 0 {
        std::process::exit(1);
    }
}
