mod common;

use shell_lab::isospace::{boundary_trace, fourier_modes, generate_iso, generate_mode, InfIsometry};
use shell_lab::symgrad::curl_of_field;
use shell_lab::{ChartKind, Surface, Vec3};

#[test]
fn rigid_round_trip_converges() {
    let b = Vec3::new(0.4, -0.3, 0.8);
    let rings = [8usize, 16, 32];
    let mut errors = Vec::new();
    for &r in &rings {
        let s = Surface::build(ChartKind::unit_sphere_cap(), r, 2).unwrap();
        let rigid = InfIsometry::rigid(s.clone(), b);
        let omega = curl_of_field(&s, &rigid).unwrap();
        let iso = generate_iso(&s, &boundary_trace(&s, &omega)).unwrap();
        errors.push(iso.w12_distance_modulo_constants(&rigid));
    }
    let slope = common::slope(&rings, &errors);
    eprintln!("rigid round trip {errors:?} slope {slope}");
    assert!(slope >= 1.5, "{errors:?}");
}

#[test]
fn generated_modes_change_the_metric_at_second_order() {
    let s = Surface::build(ChartKind::unit_sphere_cap(), 32, 2).unwrap();
    let eps = [1e-1, 1e-2, 1e-3];
    for mode in fourier_modes(3) {
        let iso = generate_mode(&s, mode).unwrap();
        let changes: Vec<f64> = eps.iter().map(|&e| iso.metric_change(e)).collect();
        let slope = (changes[0] / changes[2]).ln() / (eps[0] / eps[2]).ln();
        eprintln!("{mode}: {changes:?} slope {slope} sym {}", iso.sym_residual());
        assert!(slope >= 1.9, "{mode}: {changes:?}");
    }
}

#[test]
fn sym_residual_self_converges() {
    let rings = [8usize, 16, 32];
    let res: Vec<f64> = rings
        .iter()
        .map(|&r| {
            let s = Surface::build(ChartKind::unit_sphere_cap(), r, 2).unwrap();
            generate_mode(&s, shell_lab::BoundaryMode::Cos(2)).unwrap().sym_residual()
        })
        .collect();
    let slope = common::slope(&rings, &res);
    eprintln!("sym residual {res:?} slope {slope}");
    assert!(slope >= 1.5, "{res:?}");
}
