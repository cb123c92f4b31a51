//! The linearized isometry equation `sym∇w = B` on the surface.
//!
//! Displacements are stored in the surface frame, `w = w^k e_k + w₃ n`, so
//! that `sym∇w = sym∇w_tan + (w·n)Π` holds by construction. The solution
//! operator is the least-squares minimizer of `‖sym∇w − B‖²_{L²(S)}` with the
//! tangential components clamped on the boundary, a gauge under which the
//! problem is coercive on elliptic surfaces.

use std::sync::Arc;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::{ScalarField, SymTensorField2, QUAD_POINTS};
use crate::geometry::{GeometryFields, Vec3};
use crate::sparse::{eigenpairs_near, CsrMatrix, Factorization};
use crate::surface::Surface;

/// Tangential symmetric tensor values at quadrature points, chart components `(T11, T12, T22)`.
pub type QuadTensor = Vec<[f64; 3]>;

/// Default threshold, relative to the spectral scale, for zero eigenvalues.
pub const KERNEL_TOL: f64 = 1e-8;

/// Anything with an ambient value and parameter gradient at quadrature points.
pub trait Displacement {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]);
}

impl Displacement for crate::fe::VectorField3 {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]) {
        let (v, g) = self.eval(qp);
        (Vec3::from(v), [Vec3::from(g[0]), Vec3::from(g[1])])
    }
}

/// `M_ij = ∂_i w · e_j` from the ambient gradient.
pub fn frame_gradient(geo: &GeometryFields, dw: &[Vec3; 2]) -> Matrix2<f64> {
    Matrix2::from_fn(|i, j| dw[i].dot(&geo.tangents[j]))
}

/// `T̂ = Lᵀ T L` packed as `(T̂11, T̂22, √2 T̂12)` so the Euclidean norm is the Frobenius norm.
fn orthonormal_vector(l: &Matrix2<f64>, t: &Matrix2<f64>) -> [f64; 3] {
    let m = l.transpose() * t * l;
    [m[(0, 0)], m[(1, 1)], std::f64::consts::SQRT_2 * 0.5 * (m[(0, 1)] + m[(1, 0)])]
}

/// Symmetric part of a frame gradient as `(T11, T12, T22)`.
pub fn sym_components(m: &Matrix2<f64>) -> [f64; 3] {
    [m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]]
}

/// A displacement in the surface frame, `w = w¹e₁ + w²e₂ + w₃n`, with nodal
/// components `(w¹, w², w₃)` in [`Surface::displacement_space`].
#[derive(Debug, Clone)]
pub struct FramedField {
    pub surface: Arc<Surface>,
    pub coeffs: Vec<[f64; 3]>,
}

impl FramedField {
    pub fn zeros(surface: Arc<Surface>) -> Self {
        let n = surface.displacement_space().ndofs();
        Self {
            surface,
            coeffs: vec![[0.0; 3]; n],
        }
    }

    /// Nodal interpolant of `(w¹, w², w₃)` given as a function of the parameter point.
    pub fn interpolate(surface: Arc<Surface>, f: impl Fn([f64; 2]) -> [f64; 3]) -> Self {
        let coeffs = surface.displacement_space().interpolate(f);
        Self { surface, coeffs }
    }

    /// Tangential part only.
    pub fn tangential_part(&self) -> FramedField {
        FramedField {
            surface: self.surface.clone(),
            coeffs: self.coeffs.iter().map(|c| [c[0], c[1], 0.0]).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> FramedField {
        FramedField {
            surface: self.surface.clone(),
            coeffs: self.coeffs.iter().map(|c| c.map(|v| v * s)).collect(),
        }
    }

    pub fn sub(&self, other: &FramedField) -> FramedField {
        FramedField {
            surface: self.surface.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
                .collect(),
        }
    }

    /// Largest nodal coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Ambient values at the dofs of [`Surface::space`].
    pub fn to_ambient(&self) -> Vec<[f64; 3]> {
        let framed = self
            .surface
            .displacement_space()
            .transfer(&self.coeffs, self.surface.space());
        framed
            .iter()
            .enumerate()
            .map(|(d, c)| {
                let geo = self.surface.dof_geometry(d);
                let v = geo.tangents[0] * c[0] + geo.tangents[1] * c[1] + geo.normal * c[2];
                [v.x, v.y, v.z]
            })
            .collect()
    }

    /// `w·n` in the displacement space.
    pub fn normal_component(&self) -> ScalarField {
        ScalarField {
            space: self.surface.displacement_space().clone(),
            coeffs: self.coeffs.iter().map(|c| c[2]).collect(),
        }
    }

    /// `(‖w_tan‖_{W^{1,2}}, ‖w·n‖_{L²})`.
    pub fn membrane_norms(&self) -> (f64, f64) {
        let tan = self.tangential_part();
        let (l2, h1) = self.surface.w12_norm_sq(|qp| tan.value_and_gradient(qp));
        let n = self.normal_component();
        let wn: f64 = (0..self.surface.n_qp())
            .map(|qp| self.surface.weight(qp) * n.eval(qp).0.powi(2))
            .sum();
        ((l2 + h1).sqrt(), wn.sqrt())
    }

    /// `‖w‖_{W^{1,2}(S)}` of the ambient field.
    pub fn w12_norm(&self) -> f64 {
        let (l2, h1) = self.surface.w12_norm_sq(|qp| self.value_and_gradient(qp));
        (l2 + h1).sqrt()
    }
}

impl Displacement for FramedField {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]) {
        let geo = self.surface.qp_geometry(qp);
        let (w, dw) = self.surface.displacement_space().eval(&self.coeffs, qp);
        let value = geo.tangents[0] * w[0] + geo.tangents[1] * w[1] + geo.normal * w[2];
        let mut grad = [Vec3::zeros(); 2];
        for (i, gi) in grad.iter_mut().enumerate() {
            *gi = geo.tangents[0] * dw[i][0]
                + geo.tangents[1] * dw[i][1]
                + geo.hessian[i][0] * w[0]
                + geo.hessian[i][1] * w[1]
                + geo.normal * dw[i][2]
                + geo.normal_derivative(i) * w[2];
        }
        (value, grad)
    }
}

/// Quadrature data for the strain map at one point.
struct StrainPoint {
    l: Matrix2<f64>,
    g: Matrix2<f64>,
    h: Matrix2<f64>,
    /// `gam[i][k][j] = ∂_ik r · e_j`.
    gam: [[[f64; 2]; 2]; 2],
    weight: f64,
}

impl StrainPoint {
    fn new(surface: &Surface, qp: usize) -> Self {
        let geo = surface.qp_geometry(qp);
        let mut gam = [[[0.0; 2]; 2]; 2];
        for (i, gi) in gam.iter_mut().enumerate() {
            for (k, gik) in gi.iter_mut().enumerate() {
                for (j, v) in gik.iter_mut().enumerate() {
                    *v = geo.hessian[i][k].dot(&geo.tangents[j]);
                }
            }
        }
        Self {
            l: geo.orthonormalizer(),
            g: geo.g,
            h: geo.h,
            gam,
            weight: surface.weight(qp),
        }
    }

    /// `∂_i w · e_j` for the tangential field `φ e_c`.
    fn tangential_gradient(&self, phi: f64, grad: [f64; 2], c: usize) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| grad[i] * self.g[(c, j)] + phi * self.gam[i][c][j])
    }

    /// Orthonormal strain vector of the tangential field `φ e_c`.
    fn tangential_row(&self, phi: f64, grad: [f64; 2], c: usize) -> [f64; 3] {
        let m = self.tangential_gradient(phi, grad, c);
        orthonormal_vector(&self.l, &((m + m.transpose()) * 0.5))
    }

    /// Orthonormal strain vector of the normal field `φ n`.
    fn normal_row(&self, phi: f64) -> [f64; 3] {
        orthonormal_vector(&self.l, &(self.h * phi))
    }
}

/// Solution report of [`solve_sym_grad`].
#[derive(Debug, Clone, Serialize)]
pub struct SymGradReport {
    /// `‖sym∇w − B‖_{L²(S)}`.
    pub residual: f64,
    /// Residual relative to `‖B‖_{L²(S)}` (0 when `B = 0`).
    pub relative_residual: f64,
    /// Number of numerically zero eigenvalues of the gauged normal matrix.
    pub kernel_dim: usize,
    /// `(‖w_tan‖_{W^{1,2}} + ‖w·n‖_{L²}) / ‖B‖_{L²}`.
    pub korn_constant: f64,
}

/// Factorized least-squares normal equations for one surface.
#[derive(Debug)]
pub struct SymGradSolver {
    surface: Arc<Surface>,
    /// Unknown index of `(dof, component)`; tangential components on the
    /// boundary are fixed to zero.
    map: Vec<Option<usize>>,
    nfree: usize,
    factor: Factorization,
    smallest_eigenvalue: f64,
    /// Largest diagonal ratio, the scale for zero eigenvalues.
    spectral_scale: f64,
}

/// How the kernel of `w ↦ sym∇w` is removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gauge {
    /// Tangential components vanish on the boundary.
    Clamped,
    /// All components free; adds `τ‖w‖²_{W^{1,2}}` to the least-squares
    /// functional, approximating the minimal-norm solution.
    MinimalNorm { tau: f64 },
    /// Like `MinimalNorm`, but the gradient of the normal component is
    /// penalized by `normal_tau (1 − |x|²)`. The weight vanishes on the
    /// boundary, so the penalty imposes no Neumann condition there and
    /// creates no boundary layer in `w·n`.
    EdgeDegenerate { tau: f64, normal_tau: f64 },
}

fn edge_weight(p: [f64; 2]) -> f64 {
    1.0 - p[0] * p[0] - p[1] * p[1]
}

impl SymGradSolver {
    pub fn new(surface: &Arc<Surface>) -> Result<Self> {
        Self::with_gauge(surface, Gauge::Clamped)
    }

    pub fn with_gauge(surface: &Arc<Surface>, gauge: Gauge) -> Result<Self> {
        let (tau, normal_tau) = match gauge {
            Gauge::Clamped => (0.0, None),
            Gauge::MinimalNorm { tau } => (tau, None),
            Gauge::EdgeDegenerate { tau, normal_tau } => (tau, Some(normal_tau)),
        };
        let space = surface.displacement_space();
        let nloc = space.nloc();
        let mut map = vec![None; 3 * space.ndofs()];
        let mut next = 0;
        for dof in 0..space.ndofs() {
            for c in 0..3 {
                if c == 2 || tau > 0.0 || !space.is_boundary(dof) {
                    map[3 * dof + c] = Some(next);
                    next += 1;
                }
            }
        }
        let ln = 3 * nloc;
        let mut triplets = Vec::with_capacity(space.n_elements() * ln * ln);
        let mut mass = Vec::with_capacity(space.n_elements() * ln);
        let mut local = vec![0.0; ln * ln];
        let mut rows = vec![[0.0; 3]; ln];
        for e in 0..space.n_elements() {
            let dofs = space.element_dofs(e);
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..QUAD_POINTS {
                let qp = e * QUAD_POINTS + q;
                let sp = StrainPoint::new(surface, qp);
                let phi = space.basis_at(q);
                let grads = space.grads_at(qp);
                for a in 0..nloc {
                    rows[3 * a] = sp.tangential_row(phi[a], grads[a], 0);
                    rows[3 * a + 1] = sp.tangential_row(phi[a], grads[a], 1);
                    rows[3 * a + 2] = sp.normal_row(phi[a]);
                    for c in 0..3 {
                        let scale = if c == 2 { 1.0 } else { sp.g[(c, c)] };
                        if let Some(gi) = map[3 * dofs[a] + c] {
                            mass.push((gi, gi, sp.weight * phi[a] * phi[a] * scale));
                        }
                    }
                }
                for i in 0..ln {
                    for j in 0..ln {
                        let mut d: f64 = (0..3).map(|k| rows[i][k] * rows[j][k]).sum();
                        if tau > 0.0 && i % 3 == j % 3 {
                            let (a, b) = (i / 3, j / 3);
                            let gg = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                            d += tau * phi[a] * phi[b];
                            d += match normal_tau {
                                Some(nt) if i % 3 == 2 => nt * edge_weight(space.qp_point(qp)) * gg,
                                _ => tau * gg,
                            };
                        }
                        local[i * ln + j] += sp.weight * d;
                    }
                }
            }
            for i in 0..ln {
                let Some(gi) = map[3 * dofs[i / 3] + i % 3] else { continue };
                for j in 0..ln {
                    let Some(gj) = map[3 * dofs[j / 3] + j % 3] else { continue };
                    triplets.push((gi, gj, local[i * ln + j]));
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(next, next, triplets);
        let factor = Factorization::cholesky(&matrix).map_err(|e| {
            Error::Solve(format!("least-squares normal matrix is not definite: {e}"))
        })?;
        // Lumped mass, used only to scale the smallest-eigenvalue estimate.
        let lumped = CsrMatrix::from_triplets(next, next, mass);
        let (smallest_eigenvalue, spectral_scale) = Self::kernel_estimate(&matrix, &lumped, &factor);
        Ok(Self {
            surface: surface.clone(),
            map,
            nfree: next,
            factor,
            smallest_eigenvalue,
            spectral_scale,
        })
    }

    /// Inverse iteration for the smallest eigenvalue relative to the mass.
    fn kernel_estimate(a: &CsrMatrix, m: &CsrMatrix, factor: &Factorization) -> (f64, f64) {
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lambda = f64::INFINITY;
        for _ in 0..40 {
            let y = factor.solve(&m.matvec(&x));
            let norm = m.bilinear(&y, &y).sqrt();
            x = y.iter().map(|v| v / norm).collect();
            let next = a.bilinear(&x, &x);
            let done = (next - lambda).abs() <= 1e-6 * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        let scale = a
            .diagonal()
            .iter()
            .zip(m.diagonal())
            .map(|(p, q)| p / q)
            .fold(0.0, f64::max);
        (lambda, scale)
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    /// Whether the gauged normal matrix has a numerically zero eigenvalue,
    /// at the default threshold [`KERNEL_TOL`].
    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim_with(KERNEL_TOL)
    }

    /// Kernel detection with the threshold `tol` relative to the spectral scale.
    pub fn kernel_dim_with(&self, tol: f64) -> usize {
        usize::from(self.smallest_eigenvalue < tol * self.spectral_scale)
    }

    /// Number of unknowns after the boundary gauge.
    pub fn n_unknowns(&self) -> usize {
        self.nfree
    }

    /// Smallest eigenvalue of the normal matrix relative to a lumped mass.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.smallest_eigenvalue
    }

    /// Least-squares solutions for several right-hand sides.
    pub fn solve_many(&self, data: &[&[[f64; 3]]]) -> Result<Vec<FramedField>> {
        let surface = &self.surface;
        if data.iter().any(|b| b.len() != surface.n_qp()) {
            return Err(Error::InvalidParameter(
                "right-hand side must have one tensor per quadrature point".into(),
            ));
        }
        let space = surface.displacement_space();
        let mut rhs = vec![vec![0.0; self.nfree]; data.len()];
        for qp in 0..surface.n_qp() {
            let sp = StrainPoint::new(surface, qp);
            let phi = space.basis_at(qp % QUAD_POINTS);
            let grads = space.grads_at(qp);
            let targets: Vec<[f64; 3]> = data
                .iter()
                .map(|b| orthonormal_vector(&sp.l, &SymTensorField2::matrix(b[qp])))
                .collect();
            for (a, &dof) in space.element_dofs(qp / QUAD_POINTS).iter().enumerate() {
                for c in 0..3 {
                    let Some(gi) = self.map[3 * dof + c] else { continue };
                    let row = if c == 2 {
                        sp.normal_row(phi[a])
                    } else {
                        sp.tangential_row(phi[a], grads[a], c)
                    };
                    for (r, t) in rhs.iter_mut().zip(&targets) {
                        r[gi] += sp.weight * (row[0] * t[0] + row[1] * t[1] + row[2] * t[2]);
                    }
                }
            }
        }
        let sols = self.factor.solve_many(&rhs);
        Ok(sols
            .into_iter()
            .map(|x| {
                let mut coeffs = vec![[0.0; 3]; space.ndofs()];
                for (k, m) in self.map.iter().enumerate() {
                    if let Some(i) = m {
                        coeffs[k / 3][k % 3] = x[*i];
                    }
                }
                FramedField {
                    surface: surface.clone(),
                    coeffs,
                }
            })
            .collect())
    }
}

impl Surface {
    /// The cached least-squares solver for `sym∇w = B`.
    pub fn symgrad_solver(self: &Arc<Self>) -> Result<Arc<SymGradSolver>> {
        self.symgrad
            .get_or_init(|| SymGradSolver::new(self).map(Arc::new))
            .clone()
    }
}

/// `sym∇w` at quadrature points in chart components.
pub fn sym_grad<D: Displacement>(surface: &Surface, w: &D) -> QuadTensor {
    (0..surface.n_qp())
        .map(|qp| {
            let (_, dw) = w.value_and_gradient(qp);
            sym_components(&frame_gradient(surface.qp_geometry(qp), &dw))
        })
        .collect()
}

/// `‖T‖_{L²(S)}` with the pointwise norm taken in an orthonormal frame.
pub fn tensor_l2_norm(surface: &Surface, t: &[[f64; 3]]) -> f64 {
    t.iter()
        .enumerate()
        .map(|(qp, v)| {
            let l = surface.qp_geometry(qp).orthonormalizer();
            let o = orthonormal_vector(&l, &SymTensorField2::matrix(*v));
            surface.weight(qp) * (o[0] * o[0] + o[1] * o[1] + o[2] * o[2])
        })
        .sum::<f64>()
        .sqrt()
}

fn tensor_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> QuadTensor {
    a.iter()
        .zip(b)
        .map(|(x, y)| [x[0] - y[0], x[1] - y[1], x[2] - y[2]])
        .collect()
}

/// Solves `sym∇w = B` in the least-squares sense. `B` is given at quadrature
/// points in chart components `[B_ij] = [e_i · B e_j]`.
pub fn solve_sym_grad(surface: &Arc<Surface>, b: &[[f64; 3]]) -> Result<(FramedField, SymGradReport)> {
    let solver = surface.symgrad_solver()?;
    let w = solver.solve_many(&[b])?.pop().expect("one solution");
    let report = report_for(&solver, &w, b);
    Ok((w, report))
}

fn report_for(solver: &SymGradSolver, w: &FramedField, b: &[[f64; 3]]) -> SymGradReport {
    let surface = solver.surface();
    let residual = tensor_l2_norm(surface, &tensor_diff(&sym_grad(surface, w), b));
    let bnorm = tensor_l2_norm(surface, b);
    let (tan, nor) = w.membrane_norms();
    SymGradReport {
        residual,
        relative_residual: if bnorm > 0.0 { residual / bnorm } else { 0.0 },
        kernel_dim: solver.kernel_dim(),
        korn_constant: if bnorm > 0.0 { (tan + nor) / bnorm } else { 0.0 },
    }
}

/// `ω = (∂₁w·e₂ − ∂₂w·e₁)/√|g|`, evaluated at quadrature points and
/// projected onto the displacement space.
pub fn curl_of_field<D: Displacement>(surface: &Surface, w: &D) -> Result<ScalarField> {
    let vals = curl_values(surface, w);
    ScalarField::new(surface.displacement_space().clone(), surface.project_displacement(&vals)?)
}

/// Pointwise `ω` at quadrature points.
pub fn curl_values<D: Displacement>(surface: &Surface, w: &D) -> Vec<f64> {
    (0..surface.n_qp())
        .map(|qp| {
            let geo = surface.qp_geometry(qp);
            let (_, dw) = w.value_and_gradient(qp);
            (dw[0].dot(&geo.tangents[1]) - dw[1].dot(&geo.tangents[0])) / geo.sqrt_det_g
        })
        .collect()
}

/// The scalar fields entering the gradient reconstruction, at quadrature points.
#[derive(Debug, Clone)]
pub struct CompatibilityData {
    pub omega: ScalarField,
    /// `(c₁, c₂)`.
    pub c: Vec<[f64; 2]>,
    /// `(u₁, u₂) = (∂₁w·n, ∂₂w·n)`.
    pub u: Vec<[f64; 2]>,
}

/// Normal components of `∇w` from `B` and `ω`.
///
/// `c_i = (∂₁B_{2i} − ∂₂B_{1i} + Σ_k Γ^k_{2i} B_{1k} − Γ^k_{1i} B_{2k}) / √|g|`,
/// `u₁ = −½√|g| Σ_i h^{2i}(∂_iω − 2c_i)`, `u₂ = ½√|g| Σ_i h^{1i}(∂_iω − 2c_i)`.
pub fn compatibility_fields(
    surface: &Surface,
    b: &SymTensorField2,
    omega: &ScalarField,
) -> Result<CompatibilityData> {
    if b.space.order() < 2 {
        return Err(Error::OrderTooLow);
    }
    let mut c = Vec::with_capacity(surface.n_qp());
    let mut u = Vec::with_capacity(surface.n_qp());
    for qp in 0..surface.n_qp() {
        let (bv, db) = b.space.eval(&b.coeffs, qp);
        let (_, dw) = omega.eval(qp);
        let (ci, ui) = normal_components(surface.qp_geometry(qp), bv, db, dw);
        c.push(ci);
        u.push(ui);
    }
    Ok(CompatibilityData {
        omega: omega.clone(),
        c,
        u,
    })
}

/// Pointwise `(c, u)` from `B`, its parameter derivatives and `∇ω`.
pub fn normal_components(
    geo: &GeometryFields,
    b: [f64; 3],
    db: [[f64; 3]; 2],
    domega: [f64; 2],
) -> ([f64; 2], [f64; 2]) {
    let bm = SymTensorField2::matrix(b);
    let dbm = [SymTensorField2::matrix(db[0]), SymTensorField2::matrix(db[1])];
    let gam = &geo.christoffel;
    let mut c = [0.0; 2];
    for (i, cv) in c.iter_mut().enumerate() {
        let mut s = dbm[0][(1, i)] - dbm[1][(0, i)];
        for k in 0..2 {
            s += gam[k][1][i] * bm[(0, k)] - gam[k][0][i] * bm[(1, k)];
        }
        *cv = s / geo.sqrt_det_g;
    }
    let r = [domega[0] - 2.0 * c[0], domega[1] - 2.0 * c[1]];
    let hi = &geo.h_inv;
    let half = 0.5 * geo.sqrt_det_g;
    let u = [
        -half * (hi[(1, 0)] * r[0] + hi[(1, 1)] * r[1]),
        half * (hi[(0, 0)] * r[0] + hi[(0, 1)] * r[1]),
    ];
    (c, u)
}

/// `(∂₁w, ∂₂w)` at quadrature points from `B`, `ω` and the normal components.
pub fn reconstruct_gradient(
    surface: &Surface,
    b: &SymTensorField2,
    compat: &CompatibilityData,
) -> Vec<[Vec3; 2]> {
    (0..surface.n_qp())
        .map(|qp| {
            let geo = surface.qp_geometry(qp);
            let (bv, _) = b.space.eval(&b.coeffs, qp);
            let bm = SymTensorField2::matrix(bv);
            let (om, _) = compat.omega.eval(qp);
            let rot = 0.5 * geo.sqrt_det_g * om;
            let gi = &geo.g_inv;
            let e = &geo.tangents;
            let mut out = [Vec3::zeros(); 2];
            for (m, o) in out.iter_mut().enumerate() {
                for i in 0..2 {
                    let mut coef = 0.0;
                    for j in 0..2 {
                        coef += gi[(i, j)] * bm[(m, j)];
                    }
                    // ε_{m l} g^{l i}: +g^{2i} for m = 1, −g^{1i} for m = 2.
                    coef += if m == 0 { rot * gi[(1, i)] } else { -rot * gi[(0, i)] };
                    *o += e[i] * coef;
                }
                *o += geo.normal * compat.u[qp][m];
            }
            out
        })
        .collect()
}

/// Statistics of the Korn ratio `‖∇v‖ / (‖v‖ + ‖P((∇v)_tan)‖)` over random
/// smooth tangential fields.
#[derive(Debug, Clone, Serialize)]
pub struct KornStats {
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Ten equal-width bins over `[min, max]`: `(lower edge, count)`.
    pub histogram: Vec<(f64, usize)>,
    /// Number of eigenvalues of `v ↦ ‖P((∇v)_tan)‖²` below the threshold.
    pub z_dim: usize,
    /// The smallest eigenvalues of that form relative to the `L²` mass.
    pub z_spectrum: Vec<f64>,
}

/// `P(F) = F − (F:Π / Π:Π) Π` in an orthonormal frame, as a matrix.
fn project_off_shape(geo: &GeometryFields, m: &Matrix2<f64>) -> Matrix2<f64> {
    let l = geo.orthonormalizer();
    let f = l.transpose() * m * l;
    let p = l.transpose() * geo.h * l;
    f - p * (f.dot(&p) / p.dot(&p))
}

fn korn_ratio(surface: &Surface, v: &FramedField) -> f64 {
    let (l2, h1) = surface.w12_norm_sq(|qp| v.value_and_gradient(qp));
    let proj: f64 = (0..surface.n_qp())
        .map(|qp| {
            let geo = surface.qp_geometry(qp);
            let (_, dv) = v.value_and_gradient(qp);
            surface.weight(qp) * project_off_shape(geo, &frame_gradient(geo, &dv)).norm_squared()
        })
        .sum();
    h1.sqrt() / (l2.sqrt() + proj.sqrt())
}

/// Korn-ratio statistics and the dimension of the discrete space of
/// tangential fields with `(∇v)_tan ∈ span{Π}`.
pub fn korn_diagnostic(surface: &Arc<Surface>, samples: usize, seed: u64, z_tol: f64) -> Result<KornStats> {
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps: Vec<(i32, i32)> = (0..=3).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let coef: Vec<[f64; 2]> = exps
            .iter()
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let v = FramedField::interpolate(surface.clone(), |p| {
            let mut out = [0.0; 3];
            for ((a, b), c) in exps.iter().zip(&coef) {
                let m = p[0].powi(*a) * p[1].powi(*b);
                out[0] += c[0] * m;
                out[1] += c[1] * m;
            }
            out
        });
        ratios.push(korn_ratio(surface, &v));
    }
    let max_ratio = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let width = ((max_ratio - min_ratio) / 10.0).max(f64::MIN_POSITIVE);
    let mut histogram: Vec<(f64, usize)> = (0..10).map(|k| (min_ratio + k as f64 * width, 0)).collect();
    for r in &ratios {
        let k = (((r - min_ratio) / width) as usize).min(9);
        histogram[k].1 += 1;
    }
    let (z_spectrum, z_dim) = z_space(surface, z_tol)?;
    Ok(KornStats {
        samples,
        max_ratio,
        mean_ratio: ratios.iter().sum::<f64>() / samples as f64,
        histogram,
        z_dim,
        z_spectrum,
    })
}

/// Smallest eigenvalues of `∫|P((∇v)_tan)|² dA` over tangential fields relative
/// to `∫|v|² dA`, and how many fall below `tol` times the spectral scale.
fn z_space(surface: &Arc<Surface>, tol: f64) -> Result<(Vec<f64>, usize)> {
    let space = surface.displacement_space();
    let nloc = space.nloc();
    let n = 2 * space.ndofs();
    let ln = 2 * nloc;
    let mut a_t = Vec::new();
    let mut m_t = Vec::new();
    for e in 0..space.n_elements() {
        let dofs = space.element_dofs(e);
        for q in 0..QUAD_POINTS {
            let qp = e * QUAD_POINTS + q;
            let geo = surface.qp_geometry(qp);
            let sp = StrainPoint::new(surface, qp);
            let phi = space.basis_at(q);
            let grads = space.grads_at(qp);
            let rows: Vec<Matrix2<f64>> = (0..ln)
                .map(|i| {
                    let (a, c) = (i / 2, i % 2);
                    project_off_shape(geo, &sp.tangential_gradient(phi[a], grads[a], c))
                })
                .collect();
            for i in 0..ln {
                for j in 0..ln {
                    let gi = 2 * dofs[i / 2] + i % 2;
                    let gj = 2 * dofs[j / 2] + j % 2;
                    a_t.push((gi, gj, sp.weight * rows[i].dot(&rows[j])));
                    m_t.push((gi, gj, sp.weight * phi[i / 2] * phi[j / 2] * sp.g[(i % 2, j % 2)]));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, a_t);
    let m = CsrMatrix::from_triplets(n, n, m_t);
    let scale = a
        .diagonal()
        .iter()
        .zip(m.diagonal())
        .map(|(p, q)| p / q)
        .fold(0.0, f64::max);
    let pairs = eigenpairs_near(&a, &m, -1e-6 * scale, 6, 3)?;
    let dim = pairs.values.iter().filter(|v| v.abs() < tol * scale).count();
    Ok((pairs.values, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;

    fn sphere(rings: usize) -> Arc<Surface> {
        Surface::build(ChartKind::unit_sphere_cap(), rings, 2).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let s = sphere(4);
        let (w, rep) = solve_sym_grad(&s, &vec![[0.0; 3]; s.n_qp()]).unwrap();
        assert_eq!(w.max_abs(), 0.0);
        assert_eq!(rep.residual, 0.0);
        assert_eq!(rep.kernel_dim, 0);
    }

    #[test]
    fn shape_tensor_gives_normal_field() {
        let s = sphere(6);
        let b: QuadTensor = (0..s.n_qp())
            .map(|qp| sym_components(&s.qp_geometry(qp).h))
            .collect();
        let (w, rep) = solve_sym_grad(&s, &b).unwrap();
        assert!(rep.relative_residual < 1e-10, "{rep:?}");
        for c in &w.coeffs {
            assert!(c[0].abs() < 1e-10 && c[1].abs() < 1e-10 && (c[2] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_is_linear_in_data() {
        let s = sphere(4);
        let b1: QuadTensor = s.space().qp_points().iter().map(|p| [p[0], p[1] * p[0], 1.0 - p[1]]).collect();
        let b2: QuadTensor = s.space().qp_points().iter().map(|p| [p[1].sin(), 0.3, p[0] * p[0]]).collect();
        let sum: QuadTensor = b1.iter().zip(&b2).map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]).collect();
        let solver = s.symgrad_solver().unwrap();
        let sols = solver.solve_many(&[&b1, &b2, &sum]).unwrap();
        let diff = sols[2].sub(&sols[0]).sub(&sols[1]);
        assert!(diff.max_abs() <= 1e-10 * (1.0 + sols[2].max_abs()));
    }

    #[test]
    fn curl_examples() {
        let s = sphere(6);
        let c = crate::fe::VectorField3::new(s.space().clone(), vec![[1.0, -2.0, 0.5]; s.space().ndofs()]).unwrap();
        assert!(curl_values(&s, &c).iter().all(|v| v.abs() < 1e-12));
        // w = n on the unit sphere: ∂_i n = e_i, so both terms cancel.
        let n = FramedField::interpolate(s.clone(), |_| [0.0, 0.0, 1.0]);
        assert!(curl_values(&s, &n).iter().all(|v| v.abs() < 1e-12));

        let flat = Surface::build(ChartKind::Flat, 4, 2).unwrap();
        let rot = crate::fe::VectorField3::new(
            flat.space().clone(),
            flat.space().interpolate(|p| [-p[1], p[0], 0.0]),
        )
        .unwrap();
        let om = curl_of_field(&flat, &rot).unwrap();
        assert!(om.coeffs.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn compatibility_of_zero_data() {
        let s = sphere(4);
        let b = SymTensorField2::zeros(s.space().clone());
        let omega = ScalarField::new(s.space().clone(), vec![3.0; s.space().ndofs()]).unwrap();
        let cd = compatibility_fields(&s, &b, &omega).unwrap();
        assert!(cd.c.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(cd.u.iter().flatten().all(|v| v.abs() < 1e-10));
        let g = reconstruct_gradient(&s, &b, &CompatibilityData {
            omega: ScalarField::zeros(s.space().clone()),
            ..cd
        });
        assert!(g.iter().all(|p| p[0].norm() < 1e-12 && p[1].norm() < 1e-12));

        let p1 = Surface::build(ChartKind::unit_sphere_cap(), 2, 1).unwrap();
        let b1 = SymTensorField2::zeros(p1.space().clone());
        let o1 = ScalarField::zeros(p1.space().clone());
        assert!(matches!(compatibility_fields(&p1, &b1, &o1), Err(Error::OrderTooLow)));
    }

    #[test]
    fn flat_frame_reduces_to_plain_curl() {
        let s = Surface::build(ChartKind::Flat, 4, 2).unwrap();
        let bf = |p: [f64; 2]| [p[0] * p[1], p[0] * p[0] - p[1], p[1] * p[1]];
        let b = SymTensorField2::new(s.space().clone(), s.space().interpolate(bf)).unwrap();
        let cd = compatibility_fields(&s, &b, &ScalarField::zeros(s.space().clone())).unwrap();
        for (qp, c) in cd.c.iter().enumerate() {
            let [x, _] = s.space().qp_point(qp);
            // c_1 = ∂₁B₂₁ − ∂₂B₁₁ = 2x − x, c_2 = ∂₁B₂₂ − ∂₂B₁₂ = 1.
            assert!((c[0] - x).abs() < 1e-10);
            assert!((c[1] - 1.0).abs() < 1e-10);
        }
    }

    /// Ambient `w = w^k e_k + w₃ n` as a jet, for smooth framed components.
    fn framed_jet(chart: &crate::geometry::SurfaceChart, p: [f64; 2]) -> crate::jet::Jet3 {
        use crate::jet::Jet;
        let f = chart.frame_jets(p);
        let (x, y) = Jet::variables(p[0], p[1]);
        let w1 = x * y + y.sin();
        let w2 = (x * 0.7).exp() - x * x;
        let w3 = (x * y).cos() + y * 0.3;
        std::array::from_fn(|a| w1 * f.e[0][a] + w2 * f.e[1][a] + w3 * f.n[a])
    }

    #[test]
    fn normal_components_match_exact_gradient() {
        use crate::jet::{derivative3, dot3};
        for kind in [ChartKind::unit_sphere_cap(), ChartKind::paraboloid()] {
            let chart = crate::geometry::SurfaceChart::new(kind).unwrap();
            for p in [[0.0, 0.0], [0.3, -0.5], [-0.6, 0.2]] {
                let geo = crate::geometry::geometry_at(&chart, p).unwrap();
                let fr = chart.frame_jets(p);
                let w = framed_jet(&chart, p);
                let dw = [derivative3(&w, 0), derivative3(&w, 1)];
                let bij = |i: usize, j: usize| (dot3(&dw[i], &fr.e[j]) + dot3(&dw[j], &fr.e[i])).scale(0.5);
                let bt = [bij(0, 0), bij(0, 1), bij(1, 1)];
                let sqrt_g = chart.metric_jets(p).sqrt_g;
                let omega = (dot3(&dw[0], &fr.e[1]) - dot3(&dw[1], &fr.e[0])) / sqrt_g;
                let b = bt.map(|t| t.value());
                let db = [0, 1].map(|i| [bt[0].d(i), bt[1].d(i), bt[2].d(i)]);
                let (_, u) = normal_components(&geo, b, db, [omega.d(0), omega.d(1)]);
                for i in 0..2 {
                    let exact = dot3(&dw[i], &fr.n).value();
                    assert!((u[i] - exact).abs() < 1e-11, "{p:?} {i}: {} vs {exact}", u[i]);
                }
            }
        }
    }

    #[test]
    fn korn_statistics() {
        let s = sphere(6);
        let stats = korn_diagnostic(&s, 12, 9, 1e-6).unwrap();
        assert!(stats.max_ratio.is_finite() && stats.max_ratio > 0.0);
        assert_eq!(stats.histogram.iter().map(|h| h.1).sum::<usize>(), 12);
        // Tangential parts of constant vectors have (∇v)_tan ∝ Π on the unit sphere.
        for c in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let v = FramedField::interpolate(s.clone(), |p| {
                let geo = crate::geometry::geometry_at(s.chart(), p).unwrap();
                let t = [c.dot(&geo.tangents[0]), c.dot(&geo.tangents[1])];
                [
                    geo.g_inv[(0, 0)] * t[0] + geo.g_inv[(0, 1)] * t[1],
                    geo.g_inv[(1, 0)] * t[0] + geo.g_inv[(1, 1)] * t[1],
                    0.0,
                ]
            });
            let proj: f64 = (0..s.n_qp())
                .map(|qp| {
                    let geo = s.qp_geometry(qp);
                    let (_, dv) = v.value_and_gradient(qp);
                    s.weight(qp) * project_off_shape(geo, &frame_gradient(geo, &dv)).norm_squared()
                })
                .sum();
            assert!(proj.sqrt() < 1e-3, "{}", proj.sqrt());
        }
        // Scaling a field leaves the ratio unchanged.
        let v = FramedField::interpolate(s.clone(), |p| [p[0] * p[1], 1.0 - p[0], 0.0]);
        let r1 = korn_ratio(&s, &v);
        let r2 = korn_ratio(&s, &v.scaled(2.0));
        assert!((r1 - r2).abs() < 1e-13 * r1);
    }
}
