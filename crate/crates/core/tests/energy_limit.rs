use shell_lab::energy::*;
use shell_lab::isospace::generate_mode;
use shell_lab::*;

fn cap(rings: usize) -> std::sync::Arc<Surface> {
    Surface::build(ChartKind::unit_sphere_cap(), rings, 2).unwrap()
}

#[test]
fn recovery_normal_follows_the_first_order_expansion() {
    let s = cap(16);
    let m = MaterialModel::default();
    let v = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&eps| {
            let r = match_isometry(&s, &v, eps, 1e-12, 60).unwrap();
            let rec = build_recovery(&m, &v, &r).unwrap();
            (0..s.n_qp())
                .map(|qp| {
                    let n = s.qp_geometry(qp).normal;
                    (rec.normal(qp) - n - v.skew_at(qp).0 * n * eps).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for p in errs.windows(2) {
        let slope = (p[0] / p[1]).log2();
        assert!(slope >= 1.8, "{errs:?}");
    }
}

#[test]
fn bending_energy_self_converges() {
    let m = MaterialModel::default();
    let values: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&r| bending_energy(&m, &generate_mode(&cap(r), BoundaryMode::Cos(2)).unwrap()))
        .collect();
    let (d1, d2) = ((values[0] - values[1]).abs(), (values[1] - values[2]).abs());
    assert!(d2 < d1 && (d1 / d2).log2() >= 1.0, "{values:?}");
    assert!(d2 < 1e-3 * values[2]);
}

#[test]
fn zero_field_recovery_is_the_identity() {
    let s = cap(8);
    let m = MaterialModel::default();
    let id = identity_recovery(&s, &m).unwrap();
    let vh = scaled_displacement(&id, 0.1);
    for qp in 0..s.n_qp() {
        let (v, g) = vh.value_and_gradient(qp);
        assert!(v.norm() < 1e-12 && g[0].norm() < 1e-12 && g[1].norm() < 1e-12);
    }
}
