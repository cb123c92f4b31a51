//! Analytic reference data built from chart jets.
#![allow(dead_code)]

use shell_lab::geometry::SurfaceChart;
use shell_lab::jet::{derivative3, dot3, Jet, Jet3};
use shell_lab::Vec3;

/// Smooth framed displacements `(w¹, w², w₃)` with tangential parts
/// vanishing to second order on the unit circle.
pub fn manufactured(case: usize, x: Jet, y: Jet) -> [Jet; 3] {
    let bubble = (Jet::constant(1.0) - x * x - y * y).powi(2);
    match case {
        0 => [bubble * (x + y * y), bubble * (x * y), x.cos() + y],
        1 => [bubble * y.sin(), bubble * (x * x - 0.5), x * x - y * y * 0.5 + x * y],
        _ => [bubble * (x * 0.3).exp(), bubble * (y - x * y), (x * y).exp()],
    }
}

pub fn framed_at(case: usize, p: [f64; 2]) -> [f64; 3] {
    let (x, y) = Jet::variables(p[0], p[1]);
    manufactured(case, x, y).map(|j| j.value())
}

/// Ambient jet of `w^k e_k + w₃ n`.
pub fn ambient_jet(chart: &SurfaceChart, case: usize, p: [f64; 2]) -> Jet3 {
    let f = chart.frame_jets(p);
    let (x, y) = Jet::variables(p[0], p[1]);
    let w = manufactured(case, x, y);
    std::array::from_fn(|a| w[0] * f.e[0][a] + w[1] * f.e[1][a] + w[2] * f.n[a])
}

pub fn to_vec(j: &Jet3) -> Vec3 {
    Vec3::new(j[0].value(), j[1].value(), j[2].value())
}

/// Exact value and parameter gradient of the ambient field.
pub fn value_and_gradient(chart: &SurfaceChart, case: usize, p: [f64; 2]) -> (Vec3, [Vec3; 2]) {
    let w = ambient_jet(chart, case, p);
    (to_vec(&w), [to_vec(&derivative3(&w, 0)), to_vec(&derivative3(&w, 1))])
}

/// `sym∇w` in chart components as jets `(B11, B12, B22)`.
pub fn sym_grad_jets(chart: &SurfaceChart, case: usize, p: [f64; 2]) -> [Jet; 3] {
    let f = chart.frame_jets(p);
    let w = ambient_jet(chart, case, p);
    let dw = [derivative3(&w, 0), derivative3(&w, 1)];
    let b = |i: usize, j: usize| (dot3(&dw[i], &f.e[j]) + dot3(&dw[j], &f.e[i])).scale(0.5);
    [b(0, 0), b(0, 1), b(1, 1)]
}

pub fn sym_grad_at(chart: &SurfaceChart, case: usize, p: [f64; 2]) -> [f64; 3] {
    sym_grad_jets(chart, case, p).map(|j| j.value())
}

/// Least-squares slope of `log e` against `log(1/R)`.
pub fn slope(rings: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = rings.iter().map(|r| (*r as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -num / den
}
