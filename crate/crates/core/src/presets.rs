//! Formations and parameter sets used by the bundled scenarios.

use crate::error::Result;
use crate::graph::{Edge, Formation, FormationGraph, ShapeSpec};
use crate::motion::{self, MotionParams};

/// Mismatches for the six tetrahedron edges.
pub const TETRAHEDRON_MISMATCH: [f64; 6] = [12.14, -41.12, -16.64, -5.91, 0.45, 18.41];

/// Mismatches for the nine hexagon edges.
pub const HEXAGON_MISMATCH: [f64; 9] = [-0.043, 0.709, 0.008, -0.119, -0.555, -0.0574, 0.733, 0.185, -0.105];

/// Unit translational parameters `(μ_v, μ̃_v)` for the tetrahedron.
pub const TETRA_MU_V: [f64; 6] = [1.0, 1.0, 1.0, -3.0, -3.0, -3.0];
pub const TETRA_MU_TILDE_V: [f64; 6] = [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0];

/// Spin parameters as usually tabulated, `(1,1,1,0,0,0)` on both ends.
/// With the base edges oriented 2→1, 2→3, 3→1 this vector is not a rigid
/// rotation; see [`TETRA_MU_OMEGA`].
pub const TETRA_MU_OMEGA_TABULATED: [f64; 6] = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];

/// Spin parameters with the first base edge flipped to follow the cycle
/// 1→2→3→1, which makes the base spin rigidly about its centroid.
pub const TETRA_MU_OMEGA: [f64; 6] = [-1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
pub const TETRA_MU_TILDE_OMEGA: [f64; 6] = [-1.0, 1.0, 1.0, 0.0, 0.0, 0.0];

fn edges(list: &[(usize, usize)]) -> Vec<Edge> {
    list.iter().map(|&(t, h)| Edge::new(t - 1, h - 1)).collect()
}

/// Tetrahedron with edges 2→1, 2→3, 3→1, 1→4, 3→4, 2→4 (1-based).
pub fn tetrahedron_graph() -> FormationGraph {
    FormationGraph::new(4, edges(&[(2, 1), (2, 3), (3, 1), (1, 4), (3, 4), (2, 4)])).expect("valid tetrahedron")
}

/// Regular tetrahedron: base 1, 2, 3 counter-clockwise in the plane `z = 0`
/// centred at the origin, agent 4 on top.
pub fn regular_tetrahedron_positions(side: f64) -> Vec<f64> {
    let r = side / 3f64.sqrt();
    let h = side * (2.0f64 / 3.0).sqrt();
    vec![
        -side / 2.0,
        -r / 2.0,
        0.0,
        side / 2.0,
        -r / 2.0,
        0.0,
        0.0,
        r,
        0.0,
        0.0,
        0.0,
        h,
    ]
}

pub fn tetrahedron(side: f64) -> Result<Formation> {
    let g = tetrahedron_graph();
    let s = ShapeSpec::from_positions(&g, 3, &regular_tetrahedron_positions(side))?;
    Formation::new(g, s)
}

/// Hexagon with edges 1→2, 2→3, 1→3, 3→4, 3→5, 2→5, 4→5, 4→6, 5→6.
pub fn hexagon_graph() -> FormationGraph {
    FormationGraph::new(
        6,
        edges(&[(1, 2), (2, 3), (1, 3), (3, 4), (3, 5), (2, 5), (4, 5), (4, 6), (5, 6)]),
    )
    .expect("valid hexagon")
}

/// Regular hexagon: agents 1 and 6 on the x axis, 2 and 5 below, 3 and 4
/// above.
pub fn regular_hexagon_positions(side: f64) -> Vec<f64> {
    let a = side / 2.0;
    let b = side * 3f64.sqrt() / 2.0;
    vec![-side, 0.0, -a, -b, -a, b, a, b, a, -b, side, 0.0]
}

pub fn hexagon(side: f64) -> Result<Formation> {
    let g = hexagon_graph();
    let s = ShapeSpec::from_positions(&g, 2, &regular_hexagon_positions(side))?;
    Formation::new(g, s)
}

/// [`hexagon_graph`] with every edge reversed, so agents 2 to 6 are the
/// heads and agent 1 estimates nothing.
pub fn hexagon_reversed_graph() -> FormationGraph {
    FormationGraph::new(
        6,
        edges(&[(2, 1), (3, 2), (3, 1), (4, 3), (5, 3), (5, 2), (5, 4), (6, 4), (6, 5)]),
    )
    .expect("valid hexagon")
}

pub fn hexagon_reversed(side: f64) -> Result<Formation> {
    let g = hexagon_reversed_graph();
    let s = ShapeSpec::from_positions(&g, 2, &regular_hexagon_positions(side))?;
    Formation::new(g, s)
}

/// Triangle with edges 2→1, 2→3, 3→1: agents 2 and 3 estimate, no cycle.
pub fn triangle_acyclic_graph() -> FormationGraph {
    FormationGraph::new(3, edges(&[(2, 1), (2, 3), (3, 1)])).expect("valid triangle")
}

/// Triangle with edges 1→2, 2→3, 3→1: every agent estimates one edge.
pub fn triangle_cyclic_graph() -> FormationGraph {
    FormationGraph::new(3, edges(&[(1, 2), (2, 3), (3, 1)])).expect("valid triangle")
}

pub fn equilateral_triangle_positions(side: f64) -> Vec<f64> {
    vec![0.0, 0.0, side, 0.0, side / 2.0, side * 3f64.sqrt() / 2.0]
}

pub fn triangle(graph: FormationGraph, side: f64) -> Result<Formation> {
    let s = ShapeSpec::from_positions(&graph, 2, &equilateral_triangle_positions(side))?;
    Formation::new(graph, s)
}

/// Acyclic triangle extended by agents 4 and 5, each linked to agents 2
/// and 3 with 2 and 3 as tails. Edge 2 (2→3) is the shared one.
pub fn star_graph() -> FormationGraph {
    FormationGraph::new(5, edges(&[(2, 1), (2, 3), (3, 1), (2, 4), (3, 4), (2, 5), (3, 5)])).expect("valid star")
}

/// Desired positions for [`star_graph`], scaled by `scale`.
pub fn star_positions(scale: f64) -> Vec<f64> {
    [-8.0, 0.0, 0.0, -5.0, 0.0, 5.0, 8.0, 0.0, 11.0, 7.0].iter().map(|x| x * scale).collect()
}

pub fn star(scale: f64) -> Result<Formation> {
    let g = star_graph();
    let s = ShapeSpec::from_positions(&g, 2, &star_positions(scale))?;
    Formation::new(g, s)
}

/// Square ring 1→2→3→4→1, optionally with the diagonal 1→3.
pub fn square(side: f64, with_diagonal: bool) -> Result<Formation> {
    let mut list = vec![(1, 2), (2, 3), (3, 4), (4, 1)];
    if with_diagonal {
        list.push((1, 3));
    }
    let g = FormationGraph::new(4, edges(&list))?;
    let p = [0.0, 0.0, side, 0.0, side, side, 0.0, side];
    let s = ShapeSpec::from_positions(&g, 2, &p)?;
    Formation::new(g, s)
}

/// Translation along the tetrahedron's axis plus base spin, scaled by
/// `s_v` and `s_omega`.
pub fn tetrahedron_motion(s_v: f64, s_omega: f64, c1: f64) -> Result<MotionParams> {
    let (mu, mu_tilde) = motion::compose_parameters(
        (&TETRA_MU_V, &TETRA_MU_TILDE_V),
        (&TETRA_MU_OMEGA, &TETRA_MU_TILDE_OMEGA),
        s_v,
        s_omega,
        1.0,
    )?;
    motion::assemble_motion(&tetrahedron_graph(), &mu, &mu_tilde, c1, 3)
}
