//! Infinitesimal isometries generated from boundary traces of `ω`.
//!
//! For `sym∇V = 0` the rotation scalar `ω = (∂₁V·e₂ − ∂₂V·e₁)/√|g|` solves
//! `ℒω = 0`, and `∇V` is recovered from `ω` pointwise:
//! `∂₁V = ½√|g| ω Σ g^{2i} e_i + u₁ n`, `∂₂V = −½√|g| ω Σ g^{1i} e_i + u₂ n` with
//! `u₁ = −½√|g| Σ h^{2i}∂_iω`, `u₂ = ½√|g| Σ h^{1i}∂_iω`. Integrating those
//! gradients gives `V`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::{ScalarField, SkewField3, VectorField3};
use crate::geometry::{GeometryFields, Vec3};
use crate::surface::Surface;
use crate::symgrad::{normal_components, sym_grad, tensor_l2_norm, Displacement};

/// Largest relative misfit of the potential recovery accepted by [`generate_iso`].
pub const INTEGRABILITY_TOL: f64 = 0.05;

/// Relative `‖A∂_i r − ∂_iV‖` above which a skew field is flagged.
pub const SKEW_CONSISTENCY_TOL: f64 = 0.05;

/// A boundary Fourier mode `1`, `cos kθ` or `sin kθ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundaryMode {
    Constant,
    Cos(u32),
    Sin(u32),
}

impl BoundaryMode {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            BoundaryMode::Constant => 1.0,
            BoundaryMode::Cos(k) => (k as f64 * theta).cos(),
            BoundaryMode::Sin(k) => (k as f64 * theta).sin(),
        }
    }

    /// Angular frequency.
    pub fn frequency(&self) -> u32 {
        match *self {
            BoundaryMode::Constant => 0,
            BoundaryMode::Cos(k) | BoundaryMode::Sin(k) => k,
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::Constant => write!(f, "const"),
            BoundaryMode::Cos(k) => write!(f, "cos{k}"),
            BoundaryMode::Sin(k) => write!(f, "sin{k}"),
        }
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    /// Accepts `const`, `cosK` and `sinK`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown boundary mode '{s}'"));
        let s = s.trim();
        if s == "const" || s == "1" {
            return Ok(BoundaryMode::Constant);
        }
        let (kind, k) = s.split_at(s.len().min(3));
        let k: u32 = k.parse().map_err(|_| bad())?;
        match (kind, k) {
            (_, 0) => Ok(BoundaryMode::Constant),
            ("cos", k) => Ok(BoundaryMode::Cos(k)),
            ("sin", k) => Ok(BoundaryMode::Sin(k)),
            _ => Err(bad()),
        }
    }
}

/// The modes `1, cos θ, sin θ, …, cos Kθ, sin Kθ`.
pub fn fourier_modes(k_max: u32) -> Vec<BoundaryMode> {
    let mut modes = vec![BoundaryMode::Constant];
    for k in 1..=k_max {
        modes.push(BoundaryMode::Cos(k));
        modes.push(BoundaryMode::Sin(k));
    }
    modes
}

/// Values of a mode at the boundary dofs of the surface space.
pub fn mode_trace(surface: &Surface, mode: BoundaryMode) -> Vec<f64> {
    let space = surface.space();
    space
        .boundary_dofs()
        .iter()
        .map(|&d| {
            let p = space.dof_coords()[d];
            mode.eval(p[1].atan2(p[0]))
        })
        .collect()
}

/// Boundary values of a scalar field, transferred to the surface space first.
pub fn boundary_trace(surface: &Surface, field: &ScalarField) -> Vec<f64> {
    let wrapped: Vec<[f64; 1]> = field.coeffs.iter().map(|&v| [v]).collect();
    let values = field.space.transfer(&wrapped, surface.space());
    surface.space().boundary_dofs().iter().map(|&d| values[d][0]).collect()
}

/// An infinitesimal isometry `V = b × r + V_h` with an exact rigid part and a
/// finite element part, together with its skew field `A`.
#[derive(Debug, Clone)]
pub struct InfIsometry {
    surface: Arc<Surface>,
    /// Axial vector `b` of the rigid part.
    pub rotation: Vec3,
    /// Finite element part of `V`.
    pub v: VectorField3,
    /// Skew field of the finite element part.
    pub a: SkewField3,
    /// Generating solution of `ℒω = 0` (for the rigid part, `2b·n`).
    pub omega: ScalarField,
    /// Boundary trace of `ω` the field was generated from.
    pub trace: Vec<f64>,
    /// Relative residual of the potential recovery (0 for exact parts).
    pub integrability_residual: f64,
}

/// `[b]×` as a skew matrix.
pub fn cross_matrix(b: &Vec3) -> Matrix3<f64> {
    b.cross_matrix()
}

impl InfIsometry {
    pub fn zero(surface: Arc<Surface>) -> Self {
        Self::rigid(surface, Vec3::zeros())
    }

    /// The rigid infinitesimal rotation `V = b × r`, represented exactly.
    pub fn rigid(surface: Arc<Surface>, b: Vec3) -> Self {
        let space = surface.space().clone();
        let omega: Vec<f64> = (0..space.ndofs())
            .map(|d| 2.0 * b.dot(&surface.dof_geometry(d).normal))
            .collect();
        let omega = ScalarField::new(space.clone(), omega).expect("sized to the space");
        let trace = boundary_trace(&surface, &omega);
        Self {
            v: VectorField3::zeros(space.clone()),
            a: SkewField3::zeros(space),
            rotation: b,
            omega,
            trace,
            integrability_residual: 0.0,
            surface,
        }
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    /// `Σ c_k V_k`.
    pub fn combine(coefficients: &[f64], fields: &[&InfIsometry]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty combination".into()))?;
        if coefficients.len() != fields.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} fields",
                coefficients.len(),
                fields.len()
            )));
        }
        let mut out = Self::zero(first.surface.clone());
        out.trace = vec![0.0; first.trace.len()];
        for (&c, f) in coefficients.iter().zip(fields) {
            out.rotation += f.rotation * c;
            axpy(&mut out.v.coeffs, c, &f.v.coeffs);
            axpy(&mut out.a.coeffs, c, &f.a.coeffs);
            out.omega.coeffs.iter_mut().zip(&f.omega.coeffs).for_each(|(o, x)| *o += c * x);
            out.trace.iter_mut().zip(&f.trace).for_each(|(o, x)| *o += c * x);
            out.integrability_residual = out.integrability_residual.max(f.integrability_residual);
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::combine(&[s], &[self]).expect("one field")
    }

    /// `A` and `(∂₁A, ∂₂A)` at a quadrature point.
    pub fn skew_at(&self, qp: usize) -> (Matrix3<f64>, [Matrix3<f64>; 2]) {
        let (a, da) = self.a.space.eval(&self.a.coeffs, qp);
        (
            cross_matrix(&self.rotation) + SkewField3::matrix(a),
            [SkewField3::matrix(da[0]), SkewField3::matrix(da[1])],
        )
    }

    /// `‖sym∇V‖_{L²(S)}`, which vanishes for an exact infinitesimal isometry.
    pub fn sym_residual(&self) -> f64 {
        tensor_l2_norm(&self.surface, &sym_grad(&self.surface, self))
    }

    /// `‖V‖_{W^{1,2}(S)}`.
    pub fn w12_norm(&self) -> f64 {
        let (l2, h1) = self.surface.w12_norm_sq(|qp| self.value_and_gradient(qp));
        (l2 + h1).sqrt()
    }

    /// `‖V − W‖_{W^{1,2}(S)}` after removing the difference of the means.
    pub fn w12_distance_modulo_constants(&self, other: &impl Displacement) -> f64 {
        let s = &self.surface;
        let mut mean = Vec3::zeros();
        for qp in 0..s.n_qp() {
            mean += (self.value_and_gradient(qp).0 - other.value_and_gradient(qp).0) * s.weight(qp);
        }
        mean /= s.area();
        let (l2, h1) = s.w12_norm_sq(|qp| {
            let (a, da) = self.value_and_gradient(qp);
            let (b, db) = other.value_and_gradient(qp);
            (a - b - mean, [da[0] - db[0], da[1] - db[1]])
        });
        (l2 + h1).sqrt()
    }

    /// `‖(∇(r + εV))ᵀ∇(r + εV) − g‖_{L²(S)}`, the metric change of `id + εV`.
    pub fn metric_change(&self, eps: f64) -> f64 {
        let s = &self.surface;
        let mut total = 0.0;
        for qp in 0..s.n_qp() {
            let geo = s.qp_geometry(qp);
            let (_, dv) = self.value_and_gradient(qp);
            let du = [geo.tangents[0] + dv[0] * eps, geo.tangents[1] + dv[1] * eps];
            total += s.weight(qp) * gram_defect(geo, &du).powi(2);
        }
        total.sqrt()
    }
}

fn axpy(y: &mut [[f64; 3]], c: f64, x: &[[f64; 3]]) {
    for (a, b) in y.iter_mut().zip(x) {
        for k in 0..3 {
            a[k] += c * b[k];
        }
    }
}

/// Frobenius norm of `[∂_i u·∂_j u] − g` in an orthonormal tangent frame.
pub fn gram_defect(geo: &GeometryFields, du: &[Vec3; 2]) -> f64 {
    let m = nalgebra::Matrix2::from_fn(|i, j| du[i].dot(&du[j])) - geo.g;
    let l = geo.orthonormalizer();
    (l.transpose() * m * l).norm()
}

impl Displacement for InfIsometry {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]) {
        let geo = self.surface.qp_geometry(qp);
        let (v, dv) = self.v.eval(qp);
        let b = &self.rotation;
        (
            b.cross(&geo.position) + Vec3::from(v),
            [
                b.cross(&geo.tangents[0]) + Vec3::from(dv[0]),
                b.cross(&geo.tangents[1]) + Vec3::from(dv[1]),
            ],
        )
    }
}

/// `(∂₁V, ∂₂V)` of the infinitesimal isometry generated by `ω`.
pub fn isometry_gradient(geo: &GeometryFields, omega: f64, domega: [f64; 2]) -> [Vec3; 2] {
    let (_, u) = normal_components(geo, [0.0; 3], [[0.0; 3]; 2], domega);
    let rot = 0.5 * geo.sqrt_det_g * omega;
    let gi = &geo.g_inv;
    let e = &geo.tangents;
    [
        (e[0] * gi[(1, 0)] + e[1] * gi[(1, 1)]) * rot + geo.normal * u[0],
        -(e[0] * gi[(0, 0)] + e[1] * gi[(0, 1)]) * rot + geo.normal * u[1],
    ]
}

/// Skew matrix `A` with `A n·e_i = −∂_iV·n`, `An·n = 0`, and tangential
/// action fixed by the normal rotation `½(∂₁V·e₂ − ∂₂V·e₁)`.
pub fn skew_from_gradient(geo: &GeometryFields, dv: &[Vec3; 2]) -> Matrix3<f64> {
    let n = &geo.normal;
    let u = nalgebra::Vector2::new(dv[0].dot(n), dv[1].dot(n));
    let beta = geo.g_inv * u;
    let t = [geo.tangents[0].cross(n), geo.tangents[1].cross(n)];
    let area = n.dot(&geo.tangents[0].cross(&geo.tangents[1]));
    let alpha = 0.5 * (dv[0].dot(&geo.tangents[1]) - dv[1].dot(&geo.tangents[0])) / area;
    cross_matrix(&(t[0] * beta[0] + t[1] * beta[1] + n * alpha))
}

/// The skew field of `V`, projected onto the surface space, and the relative
/// consistency residual `‖A∂_i r − ∂_iV‖ / ‖∇V‖`. A residual above
/// [`SKEW_CONSISTENCY_TOL`] means `V` is not an infinitesimal isometry.
pub fn skew_field(surface: &Surface, v: &impl Displacement) -> Result<(SkewField3, f64)> {
    let mut values = Vec::with_capacity(surface.n_qp());
    let (mut num, mut den) = (0.0, 0.0);
    for qp in 0..surface.n_qp() {
        let geo = surface.qp_geometry(qp);
        let (_, dv) = v.value_and_gradient(qp);
        let a = skew_from_gradient(geo, &dv);
        let w = surface.weight(qp);
        for i in 0..2 {
            num += w * (a * geo.tangents[i] - dv[i]).norm_squared();
            den += w * dv[i].norm_squared();
        }
        values.push(SkewField3::components(&a));
    }
    let coeffs = surface.project_vector(&values)?;
    let consistency = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok((SkewField3::new(surface.space().clone(), coeffs)?, consistency))
}

/// Solves `ℒω = 0` with `ω = φ` on the boundary and integrates the resulting
/// gradient field into a zero-mean `V`.
pub fn generate_iso(surface: &Arc<Surface>, trace: &[f64]) -> Result<InfIsometry> {
    let op = surface.curl_operator()?;
    let omega = op.solve_dirichlet(trace, None)?;
    let space = surface.space();
    let nq = surface.n_qp();
    let mut targets: [Vec<_>; 3] = std::array::from_fn(|_| Vec::with_capacity(nq));
    for qp in 0..nq {
        let (om, dom) = omega.eval(qp);
        let g = isometry_gradient(surface.qp_geometry(qp), om, dom);
        for (c, t) in targets.iter_mut().enumerate() {
            t.push([g[0][c], g[1][c]]);
        }
    }
    let (potentials, residuals) = space.recover_potential(&targets)?;
    // Combine the per-component relative residuals into one relative to the full gradient.
    let sizes: Vec<f64> = targets
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(qp, g)| space.qp_weight(qp) * (g[0] * g[0] + g[1] * g[1]))
                .sum()
        })
        .collect();
    let norm: f64 = sizes.iter().sum();
    let misfit: f64 = sizes.iter().zip(&residuals).map(|(s, r)| s * r * r).sum();
    let residual = if norm > 0.0 { (misfit / norm).sqrt() } else { 0.0 };
    if residual > INTEGRABILITY_TOL {
        return Err(Error::NotIntegrable(residual));
    }
    let mut coeffs: Vec<[f64; 3]> = (0..space.ndofs())
        .map(|d| [potentials[0][d], potentials[1][d], potentials[2][d]])
        .collect();
    // Zero mean with respect to the surface measure.
    let mut mean = [0.0; 3];
    for qp in 0..nq {
        let (v, _) = space.eval(&coeffs, qp);
        for k in 0..3 {
            mean[k] += surface.weight(qp) * v[k] / surface.area();
        }
    }
    coeffs.iter_mut().for_each(|c| (0..3).for_each(|k| c[k] -= mean[k]));
    let v = VectorField3::new(space.clone(), coeffs)?;
    let (a, _) = skew_field(surface, &v)?;
    Ok(InfIsometry {
        surface: surface.clone(),
        rotation: Vec3::zeros(),
        v,
        a,
        omega,
        trace: trace.to_vec(),
        integrability_residual: residual,
    })
}

/// [`generate_iso`] for a boundary Fourier mode.
pub fn generate_mode(surface: &Arc<Surface>, mode: BoundaryMode) -> Result<InfIsometry> {
    generate_iso(surface, &mode_trace(surface, mode))
}

/// Generated modes with their `L²` Gram matrix.
#[derive(Debug, Clone)]
pub struct IsoBasis {
    pub modes: Vec<String>,
    pub fields: Vec<InfIsometry>,
    /// `‖sym∇V_k‖_{L²}` per field.
    pub sym_residuals: Vec<f64>,
    /// `∫ V_k·V_l dA`.
    pub gram: DMatrix<f64>,
    /// Ratio of the extreme eigenvalues of the Gram matrix.
    pub condition: f64,
}

impl IsoBasis {
    fn new(modes: Vec<String>, fields: Vec<InfIsometry>) -> Result<Self> {
        let surface = fields
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty basis".into()))?
            .surface
            .clone();
        let values: Vec<Vec<Vec3>> = fields
            .iter()
            .map(|f| (0..surface.n_qp()).map(|qp| f.value_and_gradient(qp).0).collect())
            .collect();
        let n = fields.len();
        let gram = DMatrix::from_fn(n, n, |k, l| {
            (0..surface.n_qp())
                .map(|qp| surface.weight(qp) * values[k][qp].dot(&values[l][qp]))
                .sum()
        });
        let eig = gram.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let sym_residuals = fields.iter().map(InfIsometry::sym_residual).collect();
        Ok(Self {
            modes,
            fields,
            sym_residuals,
            gram,
            condition,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Coefficients of the `L²(S)` projection of `target` onto the span, and the
    /// relative residual of that projection.
    pub fn project(&self, target: &impl Displacement) -> (Vec<f64>, f64) {
        let s = self.fields[0].surface.clone();
        let tv: Vec<Vec3> = (0..s.n_qp()).map(|qp| target.value_and_gradient(qp).0).collect();
        let rhs = nalgebra::DVector::from_fn(self.len(), |k, _| {
            (0..s.n_qp())
                .map(|qp| s.weight(qp) * self.fields[k].value_and_gradient(qp).0.dot(&tv[qp]))
                .sum()
        });
        let coef = self
            .gram
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-12 * self.gram.norm())
            .expect("both factors were computed");
        let (mut num, mut den) = (0.0, 0.0);
        for qp in 0..s.n_qp() {
            let mut v = tv[qp];
            for (k, f) in self.fields.iter().enumerate() {
                v -= f.value_and_gradient(qp).0 * coef[k];
            }
            num += s.weight(qp) * v.norm_squared();
            den += s.weight(qp) * tv[qp].norm_squared();
        }
        let rel = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
        (coef.iter().copied().collect(), rel)
    }
}

/// One generated isometry per boundary mode.
pub fn iso_basis(surface: &Arc<Surface>, modes: &[BoundaryMode]) -> Result<IsoBasis> {
    let fields = modes
        .par_iter()
        .map(|&m| generate_mode(surface, m))
        .collect::<Result<Vec<_>>>()?;
    IsoBasis::new(modes.iter().map(|m| m.to_string()).collect(), fields)
}

/// The three exact rigid rotations followed by the generated modes
/// `cos kθ, sin kθ` for `k = 2..=K`. Frequencies 0 and 1 are the traces of
/// rotations on rotationally symmetric charts, so they are replaced by exact
/// rigid fields.
pub fn rigid_augmented_basis(surface: &Arc<Surface>, k_max: u32) -> Result<IsoBasis> {
    let mut names: Vec<String> = ["rot_x", "rot_y", "rot_z"].iter().map(|s| s.to_string()).collect();
    let mut fields: Vec<InfIsometry> = (0..3)
        .map(|k| {
            let mut b = Vec3::zeros();
            b[k] = 1.0;
            InfIsometry::rigid(surface.clone(), b)
        })
        .collect();
    let modes: Vec<BoundaryMode> = fourier_modes(k_max).into_iter().filter(|m| m.frequency() >= 2).collect();
    let generated = modes
        .par_iter()
        .map(|&m| generate_mode(surface, m))
        .collect::<Result<Vec<_>>>()?;
    names.extend(modes.iter().map(|m| m.to_string()));
    fields.extend(generated);
    IsoBasis::new(names, fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;

    fn cap(rings: usize) -> Arc<Surface> {
        Surface::build(ChartKind::unit_sphere_cap(), rings, 2).unwrap()
    }

    #[test]
    fn mode_parsing_round_trips() {
        for m in fourier_modes(3) {
            assert_eq!(m.to_string().parse::<BoundaryMode>().unwrap(), m);
        }
        assert!("tan2".parse::<BoundaryMode>().is_err());
        assert_eq!("cos0".parse::<BoundaryMode>().unwrap(), BoundaryMode::Constant);
    }

    #[test]
    fn zero_trace_gives_zero_field() {
        let s = cap(4);
        let iso = generate_iso(&s, &vec![0.0; s.space().boundary_dofs().len()]).unwrap();
        assert!(iso.v.coeffs.iter().flatten().all(|v| *v == 0.0));
        assert!(iso.a.coeffs.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn skew_of_rigid_rotation_is_constant() {
        let s = cap(8);
        let b = Vec3::new(0.3, -0.2, 0.7);
        let rigid = InfIsometry::rigid(s.clone(), b);
        let v = VectorField3::new(
            s.space().clone(),
            (0..s.space().ndofs())
                .map(|d| {
                    let x = b.cross(&s.dof_geometry(d).position);
                    [x.x, x.y, x.z]
                })
                .collect(),
        )
        .unwrap();
        let (a, consistency) = skew_field(&s, &v).unwrap();
        assert!(consistency < 1e-3, "{consistency}");
        let expect = SkewField3::components(&cross_matrix(&b));
        let worst = a
            .coeffs
            .iter()
            .flat_map(|c| (0..3).map(move |k| (c[k] - expect[k]).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
        // The analytic representation is exact.
        let (am, dam) = rigid.skew_at(0);
        assert_eq!(am, cross_matrix(&b));
        assert_eq!(dam[0], Matrix3::zeros());
        assert!(rigid.sym_residual() < 1e-14);
    }

    #[test]
    fn skew_from_gradient_reproduces_isometric_gradients() {
        let s = cap(2);
        let geo = s.qp_geometry(3);
        let dv = isometry_gradient(geo, 0.7, [0.2, -1.1]);
        let a = skew_from_gradient(geo, &dv);
        assert!((a + a.transpose()).norm() < 1e-15);
        for i in 0..2 {
            assert!((a * geo.tangents[i] - dv[i]).norm() < 1e-12);
        }
        assert!((a * geo.normal).dot(&geo.normal).abs() < 1e-15);
    }

    #[test]
    fn generation_is_linear() {
        let s = cap(6);
        let t1 = mode_trace(&s, BoundaryMode::Cos(2));
        let t2 = mode_trace(&s, BoundaryMode::Sin(3));
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| 2.5 * a + b).collect();
        let v1 = generate_iso(&s, &t1).unwrap();
        let v2 = generate_iso(&s, &t2).unwrap();
        let v = generate_iso(&s, &mix).unwrap();
        let combo = InfIsometry::combine(&[2.5, 1.0], &[&v1, &v2]).unwrap();
        let diff = v
            .v
            .coeffs
            .iter()
            .zip(&combo.v.coeffs)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn basis_sizes_and_gram() {
        let s = cap(6);
        let basis = iso_basis(&s, &fourier_modes(0)).unwrap();
        assert_eq!(basis.len(), 1);
        let basis = iso_basis(&s, &fourier_modes(3)).unwrap();
        assert_eq!(basis.len(), 7);
        assert!(basis.condition.is_finite() && basis.condition > 1.0);
        let aug = rigid_augmented_basis(&s, 3).unwrap();
        assert_eq!(aug.len(), 7);
        assert_eq!(aug.modes[0], "rot_x");
    }

    #[test]
    fn generated_skew_field_is_skew_and_consistent() {
        let s = cap(12);
        let iso = generate_mode(&s, BoundaryMode::Cos(2)).unwrap();
        let (_, consistency) = skew_field(&s, &iso).unwrap();
        assert!(consistency < SKEW_CONSISTENCY_TOL, "{consistency}");
        for qp in (0..s.n_qp()).step_by(97) {
            let (a, _) = iso.skew_at(qp);
            assert_eq!(a, -a.transpose());
            let n = s.qp_geometry(qp).normal;
            assert!((a * n).dot(&n).abs() < 1e-14);
        }
    }
}
