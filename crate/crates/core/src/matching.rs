//! Matching an infinitesimal isometry `V` to an exact isometry
//! `u_h = r + hV + h²w_h`.
//!
//! `u_h` is isometric exactly when
//! `sym∇w = −(1/h) sym∇V − ½(∇V + h∇w)ᵀ(∇V + h∇w)`, so `w_h` is the fixed point of
//! `𝒢_h(w) = 𝒯(that right-hand side)` with `𝒯` a least-squares solver of
//! `sym∇w = B`. The `sym∇V` term vanishes for exact infinitesimal isometries and
//! here absorbs the discretization error of `V`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::isospace::{gram_defect, InfIsometry};
use crate::surface::Surface;
use crate::symgrad::{frame_gradient, sym_components, Displacement, FramedField, Gauge, SymGradSolver};

/// Gauge of the inner `sym∇w = B` solves. Clamping the tangential components
/// creates a boundary layer in `w·n` whose gradient grows with the mesh
/// resolution and destroys the contraction. A uniform `W^{1,2}` penalty
/// contracts but leaves a layer of width `√τ` in `w·n`, which the shell energy
/// sees through the curvature of the matched surface. Weighting the normal
/// gradient penalty by the distance to the edge avoids both.
pub const MATCHING_GAUGE: Gauge = Gauge::EdgeDegenerate { tau: 1e-4, normal_tau: 1e-3 };

impl Surface {
    /// The cached solver used by [`match_isometry`].
    pub fn matching_solver(self: &Arc<Self>) -> Result<Arc<SymGradSolver>> {
        self.symgrad_matching
            .get_or_init(|| SymGradSolver::with_gauge(self, MATCHING_GAUGE).map(Arc::new))
            .clone()
    }
}

/// The deformation `r + Σ_k c_k D_k` of the reference surface.
pub struct Perturbation<'a> {
    surface: &'a Surface,
    terms: Vec<(f64, &'a dyn Displacement)>,
}

impl<'a> Perturbation<'a> {
    pub fn identity(surface: &'a Surface) -> Self {
        Self {
            surface,
            terms: Vec::new(),
        }
    }

    pub fn with(mut self, c: f64, d: &'a dyn Displacement) -> Self {
        self.terms.push((c, d));
        self
    }
}

impl Displacement for Perturbation<'_> {
    fn value_and_gradient(&self, qp: usize) -> (Vec3, [Vec3; 2]) {
        let geo = self.surface.qp_geometry(qp);
        let mut v = geo.position;
        let mut g = geo.tangents;
        for (c, d) in &self.terms {
            let (dv, dg) = d.value_and_gradient(qp);
            v += dv * *c;
            g[0] += dg[0] * *c;
            g[1] += dg[1] * *c;
        }
        (v, g)
    }
}

/// `max_qp ‖[∂_i u·∂_j u] − g‖_F`, measured in an orthonormal tangent frame.
pub fn isometry_defect(surface: &Surface, u: &impl Displacement) -> f64 {
    (0..surface.n_qp())
        .map(|qp| gram_defect(surface.qp_geometry(qp), &u.value_and_gradient(qp).1))
        .fold(0.0, f64::max)
}

/// Outcome of [`match_isometry`].
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub h: f64,
    pub w: FramedField,
    /// Number of fixed point updates performed.
    pub iterations: usize,
    /// `‖w^{k+1} − w^k‖_{W^{1,2}}` per update.
    pub history: Vec<f64>,
    /// `δ(r + hV + h²w_h)`.
    pub defect: f64,
    /// `δ(r + hV)`.
    pub defect_unmatched: f64,
}

/// Serializable summary of a [`MatchResult`].
#[derive(Debug, Clone, Serialize)]
pub struct MatchSummary {
    pub h: f64,
    pub iterations: usize,
    pub rho: Option<f64>,
    pub defect_matched: f64,
    pub defect_unmatched: f64,
    pub w_norm: f64,
    pub w_hessian_norm: f64,
    pub history: Vec<f64>,
}

impl MatchResult {
    /// The deformation `r + hV + h²w_h`.
    pub fn deformation<'a>(&'a self, v: &'a InfIsometry) -> Perturbation<'a> {
        let s: &Surface = &self.w.surface;
        Perturbation::identity(s)
            .with(self.h, v)
            .with(self.h * self.h, &self.w)
    }

    pub fn summary(&self) -> MatchSummary {
        MatchSummary {
            h: self.h,
            iterations: self.iterations,
            rho: contraction_rate(self).ok(),
            defect_matched: self.defect,
            defect_unmatched: self.defect_unmatched,
            w_norm: self.w.w12_norm(),
            w_hessian_norm: hessian_norm(&self.w),
            history: self.history.clone(),
        }
    }
}

/// `(Σ_e |e| |D²w|²)^{1/2}` over the framed components, a broken second
/// derivative norm used to monitor equiboundedness.
pub fn hessian_norm(w: &FramedField) -> f64 {
    let space = w.surface.displacement_space();
    let mut total = 0.0;
    for e in 0..space.n_elements() {
        let h = space.element_hessian(&w.coeffs, e);
        let sq: f64 = h.iter().flatten().flatten().map(|v| v * v).sum();
        total += space.element_area(e) * sq;
    }
    total.sqrt()
}

/// Right-hand side of the matching equation at every quadrature point.
struct MatchingRhs {
    dv: Vec<[Vec3; 2]>,
    sym_v: Vec<[f64; 3]>,
}

impl MatchingRhs {
    fn new(surface: &Surface, v: &InfIsometry) -> Self {
        let dv: Vec<[Vec3; 2]> = (0..surface.n_qp()).map(|qp| v.value_and_gradient(qp).1).collect();
        let sym_v = dv
            .iter()
            .enumerate()
            .map(|(qp, g)| sym_components(&frame_gradient(surface.qp_geometry(qp), g)))
            .collect();
        Self { dv, sym_v }
    }

    fn eval(&self, w: &FramedField, h: f64) -> Vec<[f64; 3]> {
        (0..self.dv.len())
            .map(|qp| {
                let (_, dw) = w.value_and_gradient(qp);
                let g = [self.dv[qp][0] + dw[0] * h, self.dv[qp][1] + dw[1] * h];
                let s = &self.sym_v[qp];
                [
                    -s[0] / h - 0.5 * g[0].dot(&g[0]),
                    -s[1] / h - 0.5 * g[0].dot(&g[1]),
                    -s[2] / h - 0.5 * g[1].dot(&g[1]),
                ]
            })
            .collect()
    }
}

/// Updates beyond this multiple of the first one count as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Banach iteration for `w_h`, started from `w⁰ = 𝒢_h(0)` and stopped when
/// the `W^{1,2}` update falls below `tol`.
pub fn match_isometry(
    surface: &Arc<Surface>,
    v: &InfIsometry,
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MatchResult> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let solver = surface.matching_solver()?;
    let rhs = MatchingRhs::new(surface, v);
    let apply = |w: &FramedField| -> Result<FramedField> {
        Ok(solver.solve_many(&[&rhs.eval(w, h)])?.pop().expect("one solution"))
    };
    let mut w = apply(&FramedField::zeros(surface.clone()))?;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let next = apply(&w)?;
        let update = next.sub(&w).w12_norm();
        history.push(update);
        w = next;
        if update < tol {
            converged = true;
            break;
        }
        if !update.is_finite() || update > DIVERGENCE_FACTOR * (history[0] + tol) {
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: history.len(),
            history,
        });
    }
    let matched = Perturbation::identity(surface).with(h, v).with(h * h, &w);
    let defect = isometry_defect(surface, &matched);
    let defect_unmatched = isometry_defect(surface, &Perturbation::identity(surface).with(h, v));
    Ok(MatchResult {
        h,
        iterations: history.len(),
        history,
        w,
        defect,
        defect_unmatched,
    })
}

/// Geometric mean of the successive update ratios of a contraction history.
pub fn contraction_rate_of(history: &[f64]) -> Result<f64> {
    if history.len() < 3 {
        return Err(Error::TooFewIterations(history.len()));
    }
    // The final updates can sit at round-off and carry no rate information.
    let floor = 1e-13 * history[0];
    let used: Vec<f64> = history.iter().copied().take_while(|u| *u > floor).collect();
    if used.len() < 2 {
        return Err(Error::TooFewIterations(used.len()));
    }
    let logs: f64 = used.windows(2).map(|p| (p[1] / p[0]).ln()).sum();
    Ok((logs / (used.len() - 1) as f64).exp())
}

/// [`contraction_rate_of`] the history of a matching run.
pub fn contraction_rate(result: &MatchResult) -> Result<f64> {
    contraction_rate_of(&result.history)
}
