//! Benchmark fixtures shared by the criterion benches.

use std::sync::Arc;

use shell_lab::{ChartKind, Surface};

/// Unit sphere cap at the given resolution with quadratic scalar fields.
pub fn cap(rings: usize) -> Arc<Surface> {
    Surface::build(ChartKind::unit_sphere_cap(), rings, 2).expect("sphere cap builds")
}

/// `sym∇` of the position vector, i.e. the metric, at every quadrature point.
pub fn metric_data(surface: &Surface) -> Vec<[f64; 3]> {
    (0..surface.n_qp())
        .map(|qp| {
            let g = surface.qp_geometry(qp).g;
            [g[(0, 0)], g[(0, 1)], g[(1, 1)]]
        })
        .collect()
}
