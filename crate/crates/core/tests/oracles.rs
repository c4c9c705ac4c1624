//! Values frozen from independent computations (exact rational rank
//! computations and a dense eigen-solver), checked against this crate.

use num_complex::Complex64;
use rsl_core::graph::{self, FormationGraph};
use rsl_core::motion::{self, MotionSubspaces, SUBSPACE_TOL};
use rsl_core::numlin::{self, Mat};
use rsl_core::presets;

const RANK_TOL: f64 = 1e-9;

fn tetra() -> rsl_core::graph::Formation {
    presets::tetrahedron(25.0).unwrap()
}

fn bbar_t(g: &FormationGraph, dim: usize) -> Mat {
    g.incidence().kron_identity(dim).transpose()
}

#[test]
fn tetrahedron_transfer_ranks() {
    // exact ranks: T 12x12 rank 12, B̄ᵀT 18x12 rank 9, DᵀB̄ᵀT 6x12 rank 6
    let f = tetra();
    let z = f.shape.zstar();
    let t = motion::transfer_matrix(&f.graph, z, 3).unwrap();
    assert_eq!((t.rows(), t.cols()), (12, 12));
    assert_eq!(numlin::rank(&t, RANK_TOL).unwrap(), 12);
    let btt = bbar_t(&f.graph, 3).matmul(&t).unwrap();
    assert_eq!((btt.rows(), btt.cols()), (18, 12));
    assert_eq!(numlin::rank(&btt, RANK_TOL).unwrap(), 9);
    assert_eq!(numlin::null_space(&btt, RANK_TOL).unwrap().dim(), 3);
    let dbtt = graph::block_diag(z, 3).transpose().matmul(&btt).unwrap();
    assert_eq!((dbtt.rows(), dbtt.cols()), (6, 12));
    assert_eq!(numlin::rank(&dbtt, RANK_TOL).unwrap(), 6);
    assert_eq!(numlin::null_space(&dbtt, RANK_TOL).unwrap().dim(), 6);
}

#[test]
fn tetrahedron_motion_subspace_dimensions() {
    let f = tetra();
    let s = MotionSubspaces::new(&f.graph, f.shape.zstar(), 3, SUBSPACE_TOL).unwrap();
    assert_eq!(s.kernel_t.dim(), 0);
    assert_eq!(s.translational.dim(), 3);
    assert_eq!(s.rotational.dim(), 3);
}

#[test]
fn tetrahedron_rigidity_rank() {
    let f = tetra();
    let r = graph::rigidity_matrix(&f.graph, f.shape.zstar(), 3).unwrap();
    assert_eq!((r.rows(), r.cols()), (6, 12));
    assert_eq!(numlin::rank(&r, RANK_TOL).unwrap(), 6);
}

fn abscissa(g: FormationGraph, f: &rsl_core::graph::Formation) -> (f64, Vec<Complex64>) {
    let rep = motion::check_assumption1(&g, f.shape.zstar(), f.dim()).unwrap();
    (rep.max_real, rep.spectrum)
}

#[test]
fn unit_triangle_assumption1_spectra() {
    // dense eigen-solver values for the 9x9 F of the unit equilateral triangle
    let f = presets::triangle(presets::triangle_acyclic_graph(), 1.0).unwrap();
    let (max_re, spec) = abscissa(presets::triangle_acyclic_graph(), &f);
    assert!((max_re - -0.5).abs() < 1e-9, "{max_re}");
    assert_eq!(spec.len(), 9);
    let mut ims: Vec<f64> = spec.iter().map(|z| z.im).filter(|x| *x > 1e-9).collect();
    ims.sort_by(f64::total_cmp);
    for (got, want) in ims.iter().zip([0.8660254037844395, 1.3228756555322956, 1.6583123951777015]) {
        assert!((got - want).abs() < 1e-9, "{ims:?}");
    }

    let f = presets::triangle(presets::triangle_cyclic_graph(), 1.0).unwrap();
    let (max_re, spec) = abscissa(presets::triangle_cyclic_graph(), &f);
    assert!((max_re - -0.13210692275162692).abs() < 1e-9, "{max_re}");
    let re_min = spec.iter().filter(|z| z.im.abs() > 1e-9).map(|z| z.re).fold(f64::INFINITY, f64::min);
    assert!((re_min - -0.867893077248374).abs() < 1e-9);
}

#[test]
fn hexagon_assumption1_oracle() {
    // literal orientation: F (21x21) has rank 20, so a zero eigenvalue
    let f = presets::hexagon(50.0).unwrap();
    let fm = motion::assumption1_matrix(&f.graph, f.shape.zstar(), 2).unwrap();
    assert_eq!((fm.rows(), fm.cols()), (21, 21));
    assert_eq!(numlin::rank(&fm, RANK_TOL).unwrap(), 20);
    let rep = motion::check_assumption1(&f.graph, f.shape.zstar(), 2).unwrap();
    assert!(!rep.hurwitz);
    assert!(rep.max_real.abs() < 1e-9);

    let f = presets::hexagon_reversed(50.0).unwrap();
    let rep = motion::check_assumption1(&f.graph, f.shape.zstar(), 2).unwrap();
    assert!(rep.hurwitz);
    assert!((rep.max_real - -0.5).abs() < 1e-9, "{}", rep.max_real);
}

#[test]
fn estimator2_jacobian_size() {
    let f = presets::hexagon(50.0).unwrap();
    let j = rsl_core::control::estimator2_jacobian(&f.graph, f.shape.zstar(), 2, 1.0, false).unwrap();
    assert_eq!((j.rows(), j.cols()), (30, 30));
}

#[test]
fn tabulated_spin_parameters_are_not_a_rigid_motion() {
    let f = tetra();
    let s = MotionSubspaces::new(&f.graph, f.shape.zstar(), 3, SUBSPACE_TOL).unwrap();
    let tab = presets::TETRA_MU_OMEGA_TABULATED;
    assert!(s.rotational_residual(&tab, &tab).unwrap() > 0.1);
    let r = s.rotational_residual(&presets::TETRA_MU_OMEGA, &presets::TETRA_MU_TILDE_OMEGA).unwrap();
    assert!(r < 1e-9, "{r}");
    let r = s.translational_residual(&presets::TETRA_MU_V, &presets::TETRA_MU_TILDE_V).unwrap();
    assert!(r < 1e-9, "{r}");
}
