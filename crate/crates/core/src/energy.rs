//! Elastic energy density, the bending functional of infinitesimal isometries,
//! the three-dimensional shell energy of recovery deformations, and the sweep
//! comparing the two as the thickness goes to zero.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::QUAD_POINTS;
use crate::geometry::Vec3;
use crate::isospace::InfIsometry;
use crate::matching::{match_isometry, MatchResult, Perturbation};
use crate::surface::Surface;
use crate::symgrad::{Displacement, QuadTensor};

/// `W(F) = (μ/4)‖FᵀF − I‖² + (λ/8) tr(FᵀF − I)²` with Lamé constants `μ > 0`, `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaterialModel {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self { mu: 1.0, lambda: 1.0 }
    }
}

impl MaterialModel {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Lamé constants need mu > 0 and lambda >= 0, got mu = {mu}, lambda = {lambda}"
            )));
        }
        Ok(Self { mu, lambda })
    }

    pub fn density(&self, f: &Matrix3<f64>) -> f64 {
        let e = f.transpose() * f - Matrix3::identity();
        0.25 * self.mu * e.norm_squared() + 0.125 * self.lambda * e.trace().powi(2)
    }

    /// `Q₃(F) = D²W(I)(F, F) = 2μ‖sym F‖² + λ(tr F)²`.
    pub fn q3(&self, f: &Matrix3<f64>) -> f64 {
        let s = (f + f.transpose()) * 0.5;
        2.0 * self.mu * s.norm_squared() + self.lambda * f.trace().powi(2)
    }

    /// Coefficient of `(tr F)²` in `Q₂`.
    fn relaxed_lambda(&self) -> f64 {
        2.0 * self.mu * self.lambda / (2.0 * self.mu + self.lambda)
    }

    /// `min_c Q₃(F + c⊗n + n⊗c)` over the normal completions of a tangential
    /// `F` in an orthonormal frame with `n` the third axis, and the minimizer.
    /// Only the normal component of `c` is nonzero.
    pub fn q2_min(&self, f: &Matrix2<f64>) -> (f64, Vec3) {
        let s = (f + f.transpose()) * 0.5;
        let tr = s.trace();
        let value = 2.0 * self.mu * s.norm_squared() + self.relaxed_lambda() * tr * tr;
        let c3 = -self.lambda * tr / (2.0 * (self.lambda + 2.0 * self.mu));
        (value, Vec3::new(0.0, 0.0, c3))
    }

    /// Symmetric bilinear form of `Q₂`.
    pub fn q2_bilinear(&self, a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
        let sa = (a + a.transpose()) * 0.5;
        let sb = (b + b.transpose()) * 0.5;
        2.0 * self.mu * sa.component_mul(&sb).sum() + self.relaxed_lambda() * sa.trace() * sb.trace()
    }
}

/// Thickness scaling `e^h = h^β` with `2 < β < 4` and matching parameter `ε(h) = h^{β/2−1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaConfig {
    pub beta: f64,
    pub h_list: Vec<f64>,
    /// Gauss–Legendre points across the thickness.
    pub thickness_points: usize,
}

impl GammaConfig {
    pub fn new(beta: f64, h_list: Vec<f64>, thickness_points: usize) -> Result<Self> {
        if !(beta > 2.0 && beta < 4.0) {
            return Err(Error::InvalidParameter("beta must lie in (2,4)".into()));
        }
        if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter("h list must hold positive values".into()));
        }
        if h_list.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidParameter("h list must be strictly decreasing".into()));
        }
        if thickness_points == 0 {
            return Err(Error::InvalidParameter("thickness quadrature needs a point".into()));
        }
        Ok(Self {
            beta,
            h_list,
            thickness_points,
        })
    }

    pub fn eps(&self, h: f64) -> f64 {
        h.powf(0.5 * self.beta - 1.0)
    }

    pub fn energy_scale(&self, h: f64) -> f64 {
        h.powf(self.beta)
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove eigensolver round-off.
    for k in 0..n / 2 {
        let (x, w) = (0.5 * (pairs[n - 1 - k].0 - pairs[k].0), 0.5 * (pairs[k].1 + pairs[n - 1 - k].1));
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// `K_ij = sym(e_j · (∂_iA) n)`, the first order change of the second
/// fundamental form, which equals `sym(∇(An) − AΠ)_tan`, in chart components.
pub fn bending_form(v: &InfIsometry) -> QuadTensor {
    let s = v.surface();
    (0..s.n_qp())
        .map(|qp| {
            let geo = s.qp_geometry(qp);
            let (_, da) = v.skew_at(qp);
            let m = Matrix2::from_fn(|i, j| geo.tangents[j].dot(&(da[i] * geo.normal)));
            [m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]]
        })
        .collect()
}

/// Chart components to the orthonormal frame: `K̂ = Lᵀ K L`.
fn orthonormal(s: &Surface, qp: usize, k: &[f64; 3]) -> Matrix2<f64> {
    let l = s.qp_geometry(qp).orthonormalizer();
    l.transpose() * Matrix2::new(k[0], k[1], k[1], k[2]) * l
}

/// `I(V) = (1/24) ∫_S Q₂(K) dA`.
pub fn bending_energy(material: &MaterialModel, v: &InfIsometry) -> f64 {
    let k = bending_form(v);
    let s = v.surface();
    (0..s.n_qp())
        .map(|qp| s.weight(qp) * material.q2_min(&orthonormal(s, qp, &k[qp])).0)
        .sum::<f64>()
        / 24.0
}

/// The symmetric bilinear form whose diagonal is [`bending_energy`].
pub fn bending_bilinear(material: &MaterialModel, v1: &InfIsometry, v2: &InfIsometry) -> f64 {
    bending_matrix(material, &[v1, v2])[(0, 1)]
}

/// `[I(V_k, V_l)]` for a family of isometries on one surface.
pub fn bending_matrix(material: &MaterialModel, fields: &[&InfIsometry]) -> DMatrix<f64> {
    let n = fields.len();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let s = fields[0].surface();
    let forms: Vec<Vec<Matrix2<f64>>> = fields
        .iter()
        .map(|f| {
            bending_form(f)
                .iter()
                .enumerate()
                .map(|(qp, k)| orthonormal(s, qp, k))
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |a, b| {
        (0..s.n_qp())
            .map(|qp| s.weight(qp) * material.q2_bilinear(&forms[a][qp], &forms[b][qp]))
            .sum::<f64>()
            / 24.0
    })
}

/// A deformation of the shell `{r(x) + t n(x)}` given by its partial
/// derivatives `(∂₁y, ∂₂y, ∂_t y)` as matrix columns.
pub trait ShellMap: Sync {
    fn columns(&self, qp: usize, t: f64) -> Matrix3<f64>;
}

/// `y = Q x + c` applied after another shell map.
pub struct Rotated<'a, M: ShellMap> {
    pub inner: &'a M,
    pub rotation: Matrix3<f64>,
}

impl<M: ShellMap> ShellMap for Rotated<'_, M> {
    fn columns(&self, qp: usize, t: f64) -> Matrix3<f64> {
        self.rotation * self.inner.columns(qp, t)
    }
}

/// `u^h(x + tn) = u_ε(x) + t n_ε(x) + (t²/2) ε d(x)` built from an exact
/// isometry `u_ε = r + εV + ε²w` and the warp `d = 2c(K) ` along `n_ε`.
#[derive(Debug, Clone)]
pub struct RecoveryDeformation {
    surface: Arc<Surface>,
    pub eps: f64,
    values: Vec<Vec3>,
    du: Vec<[Vec3; 2]>,
    normal: Vec<Vec3>,
    dnormal: Vec<[Vec3; 2]>,
    warp: Vec<Vec3>,
    dwarp: Vec<[Vec3; 2]>,
}

impl RecoveryDeformation {
    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    /// `n_ε` at a quadrature point.
    pub fn normal(&self, qp: usize) -> Vec3 {
        self.normal[qp]
    }

    /// `∂_i u_ε` at a quadrature point.
    pub fn tangents(&self, qp: usize) -> [Vec3; 2] {
        self.du[qp]
    }

    /// `d` at a quadrature point.
    pub fn warp(&self, qp: usize) -> Vec3 {
        self.warp[qp]
    }
}

impl ShellMap for RecoveryDeformation {
    fn columns(&self, qp: usize, t: f64) -> Matrix3<f64> {
        let half = 0.5 * t * t * self.eps;
        let c0 = self.du[qp][0] + self.dnormal[qp][0] * t + self.dwarp[qp][0] * half;
        let c1 = self.du[qp][1] + self.dnormal[qp][1] * t + self.dwarp[qp][1] * half;
        let c2 = self.normal[qp] + self.warp[qp] * (t * self.eps);
        Matrix3::from_columns(&[c0, c1, c2])
    }
}

/// Values at quadrature points to `(value, gradient)` of the `L²` projection.
fn smooth_vector(surface: &Surface, values: &[Vec3]) -> Result<Vec<(Vec3, [Vec3; 2])>> {
    let raw: Vec<[f64; 3]> = values.iter().map(|v| [v.x, v.y, v.z]).collect();
    let coeffs = surface.project_vector(&raw)?;
    Ok((0..surface.n_qp())
        .map(|qp| {
            let (v, g) = surface.space().eval(&coeffs, qp);
            (Vec3::from(v), [Vec3::from(g[0]), Vec3::from(g[1])])
        })
        .collect())
}

/// Recovery deformation for `V` from a matching run with parameter `ε`.
///
/// The gradient of `n_ε` is that of `n` plus the gradient of the projected
/// difference `n_ε − n`, so the identity deformation is reproduced exactly.
pub fn build_recovery(
    material: &MaterialModel,
    v: &InfIsometry,
    matched: &MatchResult,
) -> Result<RecoveryDeformation> {
    let s = v.surface().clone();
    let eps = matched.h;
    let u = matched.deformation(v);
    let nq = s.n_qp();
    let mut values = Vec::with_capacity(nq);
    let mut du = Vec::with_capacity(nq);
    let mut normal = Vec::with_capacity(nq);
    let mut shift = Vec::with_capacity(nq);
    for qp in 0..nq {
        let geo = s.qp_geometry(qp);
        let (val, g) = u.value_and_gradient(qp);
        let orient = geo.normal.dot(&geo.tangents[0].cross(&geo.tangents[1])).signum();
        let n = g[0].cross(&g[1]).normalize() * orient;
        values.push(val);
        du.push(g);
        normal.push(n);
        shift.push(n - geo.normal);
    }
    let shift = smooth_vector(&s, &shift)?;
    let dnormal: Vec<[Vec3; 2]> = (0..nq)
        .map(|qp| {
            let geo = s.qp_geometry(qp);
            [
                geo.normal_derivative(0) + shift[qp].1[0],
                geo.normal_derivative(1) + shift[qp].1[1],
            ]
        })
        .collect();
    let k = bending_form(v);
    let c3: Vec<Vec3> = (0..nq)
        .map(|qp| Vec3::new(material.q2_min(&orthonormal(&s, qp, &k[qp])).1.z, 0.0, 0.0))
        .collect();
    let c3 = smooth_vector(&s, &c3)?;
    let mut warp = Vec::with_capacity(nq);
    let mut dwarp = Vec::with_capacity(nq);
    for qp in 0..nq {
        let (c, dc) = (c3[qp].0.x, [c3[qp].1[0].x, c3[qp].1[1].x]);
        let n = normal[qp];
        warp.push(n * (2.0 * c));
        dwarp.push([
            n * (2.0 * dc[0]) + dnormal[qp][0] * (2.0 * c),
            n * (2.0 * dc[1]) + dnormal[qp][1] * (2.0 * c),
        ]);
    }
    Ok(RecoveryDeformation {
        surface: s,
        eps,
        values,
        du,
        normal,
        dnormal,
        warp,
        dwarp,
    })
}

/// `E^h(y) = (1/h) ∫_{S^h} W(∇y)`, integrated over `t ∈ (−h/2, h/2)` with
/// Gauss–Legendre points and the exact volume factor.
pub fn shell_energy<M: ShellMap>(
    surface: &Surface,
    material: &MaterialModel,
    map: &M,
    h: f64,
    thickness_points: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(thickness_points);
    let space = surface.space();
    let partial: Vec<f64> = (0..space.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut sum = 0.0;
            for q in 0..QUAD_POINTS {
                let qp = e * QUAD_POINTS + q;
                let geo = surface.qp_geometry(qp);
                let dn = [geo.normal_derivative(0), geo.normal_derivative(1)];
                for (xi, wt) in nodes.iter().zip(&weights) {
                    let t = 0.5 * h * xi;
                    let reference = Matrix3::from_columns(&[
                        geo.tangents[0] + dn[0] * t,
                        geo.tangents[1] + dn[1] * t,
                        geo.normal,
                    ]);
                    let inv = reference.try_inverse().expect("shell chart is regular");
                    let f = map.columns(qp, t) * inv;
                    sum += space.qp_weight(qp) * 0.5 * wt * reference.determinant().abs() * material.density(&f);
                }
            }
            sum
        })
        .collect();
    // The thickness average (1/h)∫dt absorbs the h/2 Jacobian of the mapped nodes.
    partial.iter().sum()
}

/// `V^h = (h/√e^h) ⨏ (y(x + tn) − x) dt = V + εw + h² d / 24` for a recovery
/// deformation, as a displacement on the surface.
pub struct ScaledDisplacement<'a> {
    recovery: &'a RecoveryDeformation,
    h: f64,
}

impl Displacement for ScaledDisplacement<'_> {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]) {
        let r = self.recovery;
        let geo = r.surface.qp_geometry(qp);
        let avg = self.h * self.h / 24.0;
        let scale = 1.0 / r.eps;
        let v = (r.values[qp] - geo.position + r.warp[qp] * (r.eps * avg)) * scale;
        let g = [0, 1].map(|i| (r.du[qp][i] - geo.tangents[i] + r.dwarp[qp][i] * (r.eps * avg)) * scale);
        (v, g)
    }
}

/// The scaled average displacement of a recovery deformation of thickness `h`.
pub fn scaled_displacement(recovery: &RecoveryDeformation, h: f64) -> ScaledDisplacement<'_> {
    ScaledDisplacement { recovery, h }
}

/// `(1/ε)‖sym∇V^h − (ε/2)(A²)_tan‖_{L²}`, which tends to zero along recovery
/// sequences.
pub fn finite_strain_defect(v: &InfIsometry, vh: &ScaledDisplacement<'_>) -> f64 {
    let s = v.surface();
    let eps = vh.recovery.eps;
    let mut total = 0.0;
    for qp in 0..s.n_qp() {
        let geo = s.qp_geometry(qp);
        let (a, _) = v.skew_at(qp);
        let a2 = a * a;
        let (_, g) = vh.value_and_gradient(qp);
        let m = Matrix2::from_fn(|i, j| {
            0.5 * (g[i].dot(&geo.tangents[j]) + g[j].dot(&geo.tangents[i]))
                - 0.5 * eps * geo.tangents[i].dot(&(a2 * geo.tangents[j]))
        });
        let l = geo.orthonormalizer();
        total += s.weight(qp) * (l.transpose() * m * l).norm_squared();
    }
    total.sqrt() / eps
}

/// One row of [`gamma_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub h: f64,
    pub eps: f64,
    /// `E^h(u^h) / e^h`.
    pub scaled_energy: f64,
    pub i_v: f64,
    /// `scaled_energy / I(V)`, absent when `I(V)` vanishes.
    pub ratio: Option<f64>,
    /// `‖V^h − V‖_{W^{1,2}}`.
    pub displacement_error: f64,
    pub finite_strain_defect: f64,
    pub iterations: usize,
    pub defect: f64,
}

/// Matching tolerances used inside the sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepTolerances {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepTolerances {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Evaluates `E^h(u^h)/e^h` against `I(V)` for every `h` of the configuration.
pub fn gamma_sweep(
    material: &MaterialModel,
    v: &InfIsometry,
    cfg: &GammaConfig,
    tolerances: SweepTolerances,
) -> Result<Vec<GammaRow>> {
    let s = v.surface().clone();
    let i_v = bending_energy(material, v);
    let scale = i_v.abs().max(1.0);
    // Build the shared solver before fanning out.
    s.matching_solver()?;
    cfg.h_list
        .par_iter()
        .map(|&h| {
            let eps = cfg.eps(h);
            let matched = match_isometry(&s, v, eps, tolerances.tol, tolerances.max_iter)?;
            let rec = build_recovery(material, v, &matched)?;
            let scaled_energy = shell_energy(&s, material, &rec, h, cfg.thickness_points) / cfg.energy_scale(h);
            let vh = scaled_displacement(&rec, h);
            let displacement_error = v.w12_distance_modulo_constants(&vh);
            Ok(GammaRow {
                h,
                eps,
                scaled_energy,
                i_v,
                ratio: (i_v.abs() > 1e-12 * scale).then(|| scaled_energy / i_v),
                displacement_error,
                finite_strain_defect: finite_strain_defect(v, &vh),
                iterations: matched.iterations,
                defect: matched.defect,
            })
        })
        .collect()
}

/// The identity shell map `r + t n`.
pub fn identity_recovery(surface: &Arc<Surface>, material: &MaterialModel) -> Result<RecoveryDeformation> {
    let zero = InfIsometry::zero(surface.clone());
    let matched = match_isometry(surface, &zero, 1.0, 1.0, 1)?;
    build_recovery(material, &zero, &matched)
}

/// `r + εV` without matching, for comparisons.
pub fn unmatched<'a>(surface: &'a Surface, v: &'a InfIsometry, eps: f64) -> Perturbation<'a> {
    Perturbation::identity(surface).with(eps, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;
    use crate::isospace::{generate_mode, BoundaryMode};
    use proptest::prelude::*;

    fn mat3(v: &[f64]) -> Matrix3<f64> {
        Matrix3::from_row_slice(v)
    }

    #[test]
    fn q3_examples() {
        let m = MaterialModel::default();
        assert_eq!(m.q3(&Matrix3::identity()), 15.0);
        let skew = mat3(&[0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0]);
        assert_eq!(m.q3(&skew), 0.0);
    }

    #[test]
    fn q2_examples() {
        let m = MaterialModel::default();
        let (v, c) = m.q2_min(&Matrix2::identity());
        assert!((v - 20.0 / 3.0).abs() < 1e-14);
        assert!((c.z + 1.0 / 3.0).abs() < 1e-15 && c.x == 0.0 && c.y == 0.0);
        let traceless = Matrix2::new(1.0, 0.5, 0.5, -1.0);
        let (v, c) = m.q2_min(&traceless);
        assert_eq!(c, Vec3::zeros());
        assert!((v - 2.0 * traceless.norm_squared()).abs() < 1e-14);
        assert_eq!(m.q2_min(&Matrix2::new(0.0, 1.0, -1.0, 0.0)).0, 0.0);
    }

    #[test]
    fn material_is_validated() {
        assert!(MaterialModel::new(0.0, 1.0).is_err());
        assert!(MaterialModel::new(1.0, -1.0).is_err());
        assert!(MaterialModel::new(2.0, 0.0).is_ok());
    }

    #[test]
    fn gamma_config_is_validated() {
        assert!(GammaConfig::new(4.0, vec![0.1], 3).is_err());
        assert!(GammaConfig::new(3.0, vec![0.1, 0.2], 3).is_err());
        let c = GammaConfig::new(3.0, vec![0.2, 0.1, 0.05], 3).unwrap();
        assert!((c.eps(0.04) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15 && x[1] == 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(5);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn rigid_fields_have_zero_bending() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 4, 2).unwrap();
        let v = InfIsometry::rigid(s, Vec3::new(0.2, 0.5, -1.0));
        assert!(bending_energy(&MaterialModel::default(), &v).abs() < 1e-14);
    }

    #[test]
    fn bending_is_quadratic_and_bilinear_consistent() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 8, 2).unwrap();
        let m = MaterialModel::new(1.3, 0.7).unwrap();
        let v1 = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
        let v2 = generate_mode(&s, BoundaryMode::Sin(3)).unwrap();
        let i1 = bending_energy(&m, &v1);
        assert!(i1 > 0.0);
        assert!((bending_energy(&m, &v1.scaled(2.5)) - 6.25 * i1).abs() < 1e-12 * i1);
        let sum = InfIsometry::combine(&[1.0, 1.0], &[&v1, &v2]).unwrap();
        let b = bending_bilinear(&m, &v1, &v2);
        let polar = bending_energy(&m, &sum) - i1 - bending_energy(&m, &v2);
        assert!((polar - 2.0 * b).abs() < 1e-12 * i1);
    }

    #[test]
    fn q2_value_matches_completed_q3() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 6, 2).unwrap();
        let m = MaterialModel::new(0.8, 1.9).unwrap();
        let v = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
        let k = bending_form(&v);
        let (mut via_q2, mut via_q3) = (0.0, 0.0);
        for qp in 0..s.n_qp() {
            let kt = orthonormal(&s, qp, &k[qp]);
            let (val, c) = m.q2_min(&kt);
            let mut f = Matrix3::zeros();
            f.fixed_view_mut::<2, 2>(0, 0).copy_from(&kt);
            let n = Vec3::z();
            f += c * n.transpose() + n * c.transpose();
            via_q2 += s.weight(qp) * val / 24.0;
            via_q3 += s.weight(qp) * m.q3(&f) / 24.0;
        }
        assert!((via_q2 - via_q3).abs() <= 1e-12 * via_q2);
    }

    #[test]
    fn identity_and_rotated_identity_store_no_energy() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 4, 2).unwrap();
        let m = MaterialModel::default();
        let id = identity_recovery(&s, &m).unwrap();
        assert!(shell_energy(&s, &m, &id, 0.1, 3) < 1e-28);
        let q = *nalgebra::Rotation3::from_scaled_axis(Vec3::new(0.4, 1.2, -0.3)).matrix();
        let rotated = Rotated { inner: &id, rotation: q };
        assert!(shell_energy(&s, &m, &rotated, 0.1, 3) < 1e-28);
    }

    #[test]
    fn recovery_normal_is_unit_and_orthogonal() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 6, 2).unwrap();
        let m = MaterialModel::default();
        let v = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
        let matched = match_isometry(&s, &v, 0.1, 1e-10, 60).unwrap();
        let rec = build_recovery(&m, &v, &matched).unwrap();
        for qp in 0..s.n_qp() {
            let n = rec.normal(qp);
            assert!((n.norm() - 1.0).abs() < 1e-14);
            let t = rec.tangents(qp);
            assert!(n.dot(&t[0]).abs() < 1e-12 && n.dot(&t[1]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn density_is_frame_indifferent(
            f in proptest::collection::vec(-1.0f64..1.0, 9),
            axis in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let m = MaterialModel::new(1.1, 0.6).unwrap();
            let f = Matrix3::identity() + mat3(&f) * 0.5;
            let q = nalgebra::Rotation3::from_scaled_axis(Vec3::new(axis[0], axis[1], axis[2]));
            let w = m.density(&f);
            prop_assert!((m.density(&(q.matrix() * f)) - w).abs() <= 1e-12 * w.max(1e-12));
            prop_assert!(m.density(q.matrix()) < 1e-28);
        }

        #[test]
        fn q3_is_the_hessian_of_the_density(f in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let m = MaterialModel::new(0.9, 1.7).unwrap();
            let f = mat3(&f);
            let t = 1e-4;
            let w = |s: f64| m.density(&(Matrix3::identity() + f * s));
            let fd = (w(t) - 2.0 * w(0.0) + w(-t)) / (t * t);
            prop_assert!((fd - m.q3(&f)).abs() <= 1e-5 * m.q3(&f).max(1.0));
        }

        #[test]
        fn q2_matches_linear_solve_over_completions(f in proptest::collection::vec(-2.0f64..2.0, 4),
                                                    mu in 0.1f64..3.0, lambda in 0.0f64..3.0) {
            let m = MaterialModel::new(mu, lambda).unwrap();
            let ft = Matrix2::new(f[0], f[1], f[2], f[3]);
            // Q₃ of the completion is quadratic in c: minimize via its normal equations.
            let embed = |c: &Vec3| {
                let mut g = Matrix3::zeros();
                g.fixed_view_mut::<2, 2>(0, 0).copy_from(&ft);
                let n = Vec3::z();
                g + c * n.transpose() + n * c.transpose()
            };
            let q = |c: &Vec3| m.q3(&embed(c));
            let q0 = q(&Vec3::zeros());
            let e = [Vec3::x(), Vec3::y(), Vec3::z()];
            let grad = nalgebra::Vector3::from_fn(|i, _| 0.5 * (q(&e[i]) - q(&-e[i])));
            let hess = Matrix3::from_fn(|i, j| 0.5 * (q(&(e[i] + e[j])) - q(&e[i]) - q(&e[j]) + q0));
            let c = -(hess.try_inverse().unwrap() * grad) * 0.5;
            let (v, c2) = m.q2_min(&ft);
            prop_assert!((q(&c) - v).abs() <= 1e-10 * v.max(1.0));
            prop_assert!((c - c2).norm() <= 1e-10);
        }
    }
}
