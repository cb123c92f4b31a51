mod common;

use std::sync::Arc;

use shell_lab::symgrad::{
    compatibility_fields, curl_of_field, normal_components, reconstruct_gradient, solve_sym_grad,
    Displacement, FramedField,
};
use shell_lab::{ChartKind, Surface, SymTensorField2, Vec3};

fn clamp(p: [f64; 2]) -> [f64; 2] {
    let r = p[0].hypot(p[1]);
    if r > 1.0 {
        [p[0] / r, p[1] / r]
    } else {
        p
    }
}

fn w12_error(s: &Surface, w: &FramedField, case: usize) -> f64 {
    let pts = s.space().qp_points();
    let (l2, h1) = s.w12_norm_sq(|qp| {
        let (v, dv) = w.value_and_gradient(qp);
        let (ve, dve) = common::value_and_gradient(s.chart(), case, pts[qp]);
        (v - ve, [dv[0] - dve[0], dv[1] - dve[1]])
    });
    (l2 + h1).sqrt()
}

fn exact_data(s: &Surface, case: usize) -> Vec<[f64; 3]> {
    s.space().qp_points().iter().map(|&p| common::sym_grad_at(s.chart(), case, p)).collect()
}

fn data_field(s: &Arc<Surface>, case: usize) -> SymTensorField2 {
    let space = s.displacement_space().clone();
    let coeffs = space.interpolate(|p| common::sym_grad_at(s.chart(), case, clamp(p)));
    SymTensorField2::new(space, coeffs).unwrap()
}

/// `‖reconstructed ∇w − ∇w‖_{L²}`.
fn cross_error(s: &Arc<Surface>, w: &FramedField, b: &SymTensorField2) -> f64 {
    let omega = curl_of_field(s, w).unwrap();
    let compat = compatibility_fields(s, b, &omega).unwrap();
    let grads = reconstruct_gradient(s, b, &compat);
    let (_, h1) = s.w12_norm_sq(|qp| {
        let (_, dv) = w.value_and_gradient(qp);
        (Vec3::zeros(), [grads[qp][0] - dv[0], grads[qp][1] - dv[1]])
    });
    h1.sqrt()
}

#[test]
fn manufactured_solutions_converge() {
    let rings = [8usize, 16, 32];
    for case in 0..3 {
        let mut errors = Vec::new();
        let mut constants = Vec::new();
        for &r in &rings {
            let s = Surface::build(ChartKind::unit_sphere_cap(), r, 2).unwrap();
            let (w, report) = solve_sym_grad(&s, &exact_data(&s, case)).unwrap();
            assert_eq!(report.kernel_dim, 0);
            let err = w12_error(&s, &w, case);
            let cross = cross_error(&s, &w, &data_field(&s, case));
            assert!(cross <= 3.0 * err, "case {case} rings {r}: {cross} vs {err}");
            errors.push(err);
            constants.push(report.korn_constant);
        }
        let slope = common::slope(&rings, &errors);
        assert!(slope >= 1.7, "case {case}: slope {slope}, errors {errors:?}");
        let (lo, hi) = constants.iter().fold((f64::MAX, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
        assert!(hi / lo < 1.5, "{constants:?}");
    }
}

#[test]
fn paraboloid_manufactured_solution() {
    let mut errors = Vec::new();
    for r in [8usize, 16] {
        let s = Surface::build(ChartKind::paraboloid(), r, 2).unwrap();
        let (w, report) = solve_sym_grad(&s, &exact_data(&s, 1)).unwrap();
        assert!(report.relative_residual < 1e-2);
        errors.push(w12_error(&s, &w, 1));
    }
    assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
}

fn compatibility_error(rings: usize) -> f64 {
    let s = Surface::build(ChartKind::unit_sphere_cap(), rings, 2).unwrap();
    let b = data_field(&s, 0);
    let w = FramedField::interpolate(s.clone(), |p| common::framed_at(0, p));
    let omega = curl_of_field(&s, &w).unwrap();
    let compat = compatibility_fields(&s, &b, &omega).unwrap();
    let mut worst = 0.0f64;
    for (qp, &p) in s.space().qp_points().iter().enumerate() {
        let geo = s.qp_geometry(qp);
        let jets = common::sym_grad_jets(s.chart(), 0, p);
        let bv = jets.map(|j| j.value());
        let db = [0, 1].map(|i| jets.map(|j| j.d(i)));
        let (c, _) = normal_components(geo, bv, db, [0.0, 0.0]);
        worst = worst.max((c[0] - compat.c[qp][0]).abs().max((c[1] - compat.c[qp][1]).abs()));
    }
    worst
}

#[test]
fn compatibility_fields_converge_to_exact_derivatives() {
    let coarse = compatibility_error(8);
    let fine = compatibility_error(16);
    assert!(fine < 1e-2 && fine < coarse / 3.0, "{coarse} {fine}");
}
