//! The second-order operator `ℒω = −∂_i(√|g| h^{ij} ∂_j ω) − 2√|g| H ω`.

use std::sync::{Arc, OnceLock};

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fe::{assemble_bilinear, ScalarField};
use crate::geometry::check_ellipticity;
use crate::sparse::{eigenpairs_near, CsrMatrix, Factorization};
use crate::surface::Surface;

/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-8;

/// Which boundary treatment the kernel search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Homogeneous Dirichlet conditions on the boundary dofs.
    Dirichlet,
    /// All dofs free (natural boundary conditions).
    Full,
}

/// Assembled weak form of `ℒ` with its `√|g|`-weighted mass matrix.
#[derive(Debug)]
pub struct CurlOperator {
    surface: Arc<Surface>,
    matrix: CsrMatrix,
    mass: CsrMatrix,
    shift: f64,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    factor: OnceLock<std::result::Result<Arc<Factorization>, Error>>,
}

/// Assembles `ℒ` with coefficients evaluated exactly at the quadrature points.
pub fn assemble_curl_operator(surface: &Arc<Surface>) -> Result<CurlOperator> {
    if surface.chart().is_flat() {
        let witness = surface.space().qp_point(0);
        check_ellipticity(surface.chart(), &[witness])?;
    }
    let nq = surface.n_qp();
    let mut a = Vec::with_capacity(nq);
    let mut c = Vec::with_capacity(nq);
    for qp in 0..nq {
        let geo = surface.qp_geometry(qp);
        a.push(geo.h_inv * geo.sqrt_det_g);
        c.push(-2.0 * geo.sqrt_det_g * geo.mean_curvature);
    }
    CurlOperator::with_coefficients(surface, &a, &c)
}

impl Surface {
    /// The cached operator `ℒ` of this surface.
    pub fn curl_operator(self: &Arc<Self>) -> Result<Arc<CurlOperator>> {
        self.curl
            .get_or_init(|| assemble_curl_operator(self).map(Arc::new))
            .clone()
    }
}

impl CurlOperator {
    /// Operator `∫ (a ∇ω)·∇v + c ω v dx` for arbitrary coefficients.
    pub fn with_coefficients(surface: &Arc<Surface>, a: &[Matrix2<f64>], c: &[f64]) -> Result<Self> {
        let space = surface.space();
        let matrix = assemble_bilinear(space, a, c)?;
        let rho: Vec<f64> = (0..surface.n_qp())
            .map(|qp| surface.qp_geometry(qp).sqrt_det_g)
            .collect();
        let mass = space.mass_matrix(&rho);
        let shift = 2.0 * (0..surface.n_qp())
            .map(|qp| {
                let g = surface.qp_geometry(qp);
                g.sqrt_det_g * g.mean_curvature
            })
            .fold(0.0, f64::max)
            + 1.0;
        Ok(Self {
            surface: surface.clone(),
            matrix,
            mass,
            shift,
            interior: space.interior_dofs(),
            boundary: space.boundary_dofs().to_vec(),
            factor: OnceLock::new(),
        })
    }

    /// The Laplacian `−Δ` in parameter coordinates (`h^{ij}` replaced by the identity, `H` by 0).
    pub fn laplacian(surface: &Arc<Surface>) -> Result<Self> {
        let nq = surface.n_qp();
        Self::with_coefficients(surface, &vec![Matrix2::identity(); nq], &vec![0.0; nq])
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `λ₀ = 2 max(√|g| H) + 1`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The coercive operator `ℒ + λ₀ √|g|`.
    pub fn shifted(&self) -> CurlOperator {
        CurlOperator {
            surface: self.surface.clone(),
            matrix: self.matrix.add_scaled(&self.mass, self.shift),
            mass: self.mass.clone(),
            shift: self.shift,
            interior: self.interior.clone(),
            boundary: self.boundary.clone(),
            factor: OnceLock::new(),
        }
    }

    fn interior_factor(&self) -> Result<Arc<Factorization>> {
        self.factor
            .get_or_init(|| {
                Factorization::new(&self.matrix.submatrix(&self.interior, &self.interior)).map(Arc::new)
            })
            .clone()
    }

    /// Solves `ℒω = f` in the interior with `ω = trace` on the boundary dofs
    /// (in the order of [`crate::fe::FeSpace::boundary_dofs`]).
    pub fn solve_dirichlet(&self, trace: &[f64], rhs: Option<&ScalarField>) -> Result<ScalarField> {
        let space = self.surface.space();
        if trace.len() != self.boundary.len() {
            return Err(Error::InvalidParameter(format!(
                "boundary trace has {} values, expected {}",
                trace.len(),
                self.boundary.len()
            )));
        }
        let n = space.ndofs();
        let mut full = vec![0.0; n];
        for (&b, &v) in self.boundary.iter().zip(trace) {
            full[b] = v;
        }
        let mut load = vec![0.0; n];
        if let Some(f) = rhs {
            let vals: Vec<f64> = (0..space.n_qp()).map(|qp| f.eval(qp).0).collect();
            load = space.load_vector(&vals);
        }
        let lifted = self.matrix.matvec(&full);
        let b: Vec<f64> = self.interior.iter().map(|&i| load[i] - lifted[i]).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm > 0.0 {
            let fact = self.interior_factor().map_err(|e| Error::Resonant(e.to_string()))?;
            let x = fact.solve(&b);
            let a_ii = self.matrix.submatrix(&self.interior, &self.interior);
            let ax = a_ii.matvec(&x);
            let res = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / bnorm;
            if !(res < 1e-10) {
                return Err(Error::Resonant(format!(
                    "interior block is singular (relative residual {res:.3e})"
                )));
            }
            for (&i, v) in self.interior.iter().zip(x) {
                full[i] = v;
            }
        }
        ScalarField::new(space.clone(), full)
    }

    /// The eigenvalues of `ℒ` relative to the `√|g|` mass closest to zero.
    pub fn spectrum_near_zero(&self, mode: KernelMode, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let dofs: Vec<usize> = match mode {
            KernelMode::Dirichlet => self.interior.clone(),
            KernelMode::Full => (0..self.surface.space().ndofs()).collect(),
        };
        let a = self.matrix.submatrix(&dofs, &dofs);
        let m = self.mass.submatrix(&dofs, &dofs);
        // Shift slightly off zero so an exact kernel does not make the factorization singular.
        let scale = self.spectral_scale(&a, &m);
        let pairs = eigenpairs_near(&a, &m, -1e-6 * scale, count, 11)?;
        let n = self.surface.space().ndofs();
        let vectors = pairs
            .vectors
            .into_iter()
            .map(|v| {
                let mut full = vec![0.0; n];
                for (&d, x) in dofs.iter().zip(v) {
                    full[d] = x;
                }
                full
            })
            .collect();
        Ok((pairs.values, vectors))
    }

    fn spectral_scale(&self, a: &CsrMatrix, m: &CsrMatrix) -> f64 {
        a.diagonal()
            .iter()
            .zip(m.diagonal())
            .map(|(x, y)| (x / y).abs())
            .fold(0.0, f64::max)
    }

    /// `L²(S)`-orthonormal basis of the numerical kernel: eigenvectors with
    /// `|μ| < kernel_tol` times the largest diagonal eigenvalue estimate.
    pub fn kernel_basis(&self, mode: KernelMode, kernel_tol: f64) -> Result<Vec<ScalarField>> {
        let dofs: Vec<usize> = match mode {
            KernelMode::Dirichlet => self.interior.clone(),
            KernelMode::Full => (0..self.surface.space().ndofs()).collect(),
        };
        let scale = self.spectral_scale(
            &self.matrix.submatrix(&dofs, &dofs),
            &self.mass.submatrix(&dofs, &dofs),
        );
        let (values, vectors) = self.spectrum_near_zero(mode, 4)?;
        values
            .iter()
            .zip(vectors)
            .filter(|(v, _)| v.abs() < kernel_tol * scale)
            .map(|(_, vec)| ScalarField::new(self.surface.space().clone(), vec))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;

    #[test]
    fn flat_chart_is_rejected_but_laplacian_mode_works() {
        let flat = Surface::build(ChartKind::Flat, 4, 2).unwrap();
        assert!(matches!(assemble_curl_operator(&flat), Err(Error::NotElliptic { .. })));
        let lap = CurlOperator::laplacian(&flat).unwrap();
        let stiff = flat
            .space()
            .assemble_form(Some(&vec![Matrix2::identity(); flat.n_qp()]), None);
        assert_eq!(lap.matrix(), &stiff);
    }

    #[test]
    fn sphere_cap_operator_properties() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 6, 2).unwrap();
        let op = assemble_curl_operator(&s).unwrap();
        assert!(op.matrix().max_asymmetry() < 1e-14);
        let shifted = op.shifted();
        assert!(Factorization::cholesky(shifted.matrix()).is_ok());
        assert!(shifted.kernel_basis(KernelMode::Full, DEFAULT_KERNEL_TOL).unwrap().is_empty());
        assert!(op.kernel_basis(KernelMode::Dirichlet, DEFAULT_KERNEL_TOL).unwrap().is_empty());
    }

    #[test]
    fn zero_data_gives_zero() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 4, 2).unwrap();
        let op = assemble_curl_operator(&s).unwrap();
        let w = op.solve_dirichlet(&vec![0.0; s.space().boundary_dofs().len()], None).unwrap();
        assert!(w.coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn harmonic_polynomials_in_laplacian_mode() {
        let mut errs = Vec::new();
        for rings in [4usize, 8, 16] {
            let s = Surface::build(ChartKind::Flat, rings, 2).unwrap();
            let op = CurlOperator::laplacian(&s).unwrap();
            let exact = |p: [f64; 2]| p[0].powi(3) - 3.0 * p[0] * p[1] * p[1];
            let trace: Vec<f64> = s
                .space()
                .boundary_dofs()
                .iter()
                .map(|&d| exact(s.space().dof_coords()[d]))
                .collect();
            let w = op.solve_dirichlet(&trace, None).unwrap();
            let err: f64 = (0..s.n_qp())
                .map(|qp| s.weight(qp) * (w.eval(qp).0 - exact(s.space().qp_point(qp))).powi(2))
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        for pair in errs.windows(2) {
            assert!((pair[0] / pair[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn dirichlet_solve_is_linear() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 6, 2).unwrap();
        let op = assemble_curl_operator(&s).unwrap();
        let nb = s.space().boundary_dofs().len();
        let t1: Vec<f64> = (0..nb).map(|i| (i as f64 * 0.3).sin()).collect();
        let t2: Vec<f64> = (0..nb).map(|i| (i as f64 * 0.7).cos()).collect();
        let combo: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| 2.5 * a + b).collect();
        let w1 = op.solve_dirichlet(&t1, None).unwrap();
        let w2 = op.solve_dirichlet(&t2, None).unwrap();
        let w = op.solve_dirichlet(&combo, None).unwrap();
        for i in 0..w.coeffs.len() {
            assert!((w.coeffs[i] - 2.5 * w1.coeffs[i] - w2.coeffs[i]).abs() < 1e-12);
        }
    }
}
