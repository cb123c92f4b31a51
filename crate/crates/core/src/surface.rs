//! A chart paired with a finite element space and cached geometry.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fe::FeSpace;
use crate::geometry::{geometry_at, ChartKind, GeometryFields, SurfaceChart, Vec3};
use crate::mesh::triangulate_disk;
use crate::sparse::Factorization;

pub(crate) type Cached<T> = OnceLock<std::result::Result<Arc<T>, Error>>;

/// Discretized surface: geometry is evaluated exactly at every quadrature
/// point and every dof once, then shared by all solvers.
#[derive(Debug)]
pub struct Surface {
    chart: SurfaceChart,
    space: Arc<FeSpace>,
    displacement_space: OnceLock<Arc<FeSpace>>,
    qp_geom: Vec<GeometryFields>,
    dof_geom: Vec<GeometryFields>,
    area: f64,
    mass_factor: Cached<Factorization>,
    displacement_mass_factor: Cached<Factorization>,
    pub(crate) symgrad: Cached<crate::symgrad::SymGradSolver>,
    pub(crate) symgrad_matching: Cached<crate::symgrad::SymGradSolver>,
    pub(crate) curl: Cached<crate::elliptic::CurlOperator>,
}

impl Surface {
    pub fn new(chart: SurfaceChart, space: Arc<FeSpace>) -> Result<Arc<Self>> {
        let qp_geom = space
            .qp_points()
            .iter()
            .map(|&p| geometry_at(&chart, p))
            .collect::<Result<Vec<_>>>()?;
        let dof_geom = space
            .dof_coords()
            .iter()
            .map(|&p| geometry_at(&chart, clamp_to_disk(p)))
            .collect::<Result<Vec<_>>>()?;
        let area = qp_geom
            .iter()
            .enumerate()
            .map(|(qp, g)| space.qp_weight(qp) * g.sqrt_det_g)
            .sum();
        Ok(Arc::new(Self {
            chart,
            space,
            displacement_space: OnceLock::new(),
            qp_geom,
            dof_geom,
            area,
            mass_factor: OnceLock::new(),
            displacement_mass_factor: OnceLock::new(),
            symgrad: OnceLock::new(),
            symgrad_matching: OnceLock::new(),
            curl: OnceLock::new(),
        }))
    }

    /// Chart, ring triangulation and Lagrange space in one step.
    pub fn build(kind: ChartKind, rings: usize, order: usize) -> Result<Arc<Self>> {
        let chart = SurfaceChart::new(kind)?;
        let mesh = Arc::new(triangulate_disk(rings)?);
        let space = Arc::new(FeSpace::new(mesh, order)?);
        Self::new(chart, space)
    }

    pub fn chart(&self) -> &SurfaceChart {
        &self.chart
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Cubic space on the same mesh and quadrature, used for the framed
    /// displacements of the `sym∇w = B` solver.
    pub fn displacement_space(&self) -> &Arc<FeSpace> {
        self.displacement_space.get_or_init(|| {
            Arc::new(FeSpace::new(self.space.mesh().clone(), 3).expect("order 3 is supported"))
        })
    }

    pub fn qp_geometry(&self, qp: usize) -> &GeometryFields {
        &self.qp_geom[qp]
    }

    pub fn dof_geometry(&self, dof: usize) -> &GeometryFields {
        &self.dof_geom[dof]
    }

    pub fn n_qp(&self) -> usize {
        self.qp_geom.len()
    }

    /// Surface area of the discretized chart image.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Surface quadrature weight `√|g| w dx` at `qp`.
    pub fn weight(&self, qp: usize) -> f64 {
        self.space.qp_weight(qp) * self.qp_geom[qp].sqrt_det_g
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(qp, v)| self.weight(qp) * v).sum()
    }

    /// `L²(S)` projections of quadrature-point data onto the space.
    pub fn project_many(&self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.project_with(&self.space, &self.mass_factor, values)
    }

    /// `L²(S)` projection of quadrature-point data onto the displacement space.
    pub fn project_displacement(&self, values: &[f64]) -> Result<Vec<f64>> {
        let space = self.displacement_space().clone();
        let out = self.project_with(&space, &self.displacement_mass_factor, &[values.to_vec()])?;
        Ok(out.into_iter().next().expect("one projection"))
    }

    fn project_with(
        &self,
        space: &FeSpace,
        cache: &Cached<Factorization>,
        values: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        let fact = cache
            .get_or_init(|| {
                let rho: Vec<f64> = self.qp_geom.iter().map(|g| g.sqrt_det_g).collect();
                Factorization::cholesky(&space.mass_matrix(&rho)).map(Arc::new)
            })
            .clone()?;
        let rhs: Vec<Vec<f64>> = values
            .iter()
            .map(|v| {
                let weighted: Vec<f64> = v
                    .iter()
                    .zip(&self.qp_geom)
                    .map(|(x, g)| x * g.sqrt_det_g)
                    .collect();
                space.load_vector(&weighted)
            })
            .collect();
        Ok(fact.solve_many(&rhs))
    }

    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        Ok(self.project_many(&[values.to_vec()])?.pop().expect("one projection"))
    }

    /// Projection of ℝ³-valued quadrature data.
    pub fn project_vector(&self, values: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
        let comps: Vec<Vec<f64>> = (0..3).map(|c| values.iter().map(|v| v[c]).collect()).collect();
        let p = self.project_many(&comps)?;
        Ok((0..self.space.ndofs()).map(|i| [p[0][i], p[1][i], p[2][i]]).collect())
    }

    /// `∫_S |v|² + |∇v|² dA` for an ambient field given by value and
    /// parameter gradient at every quadrature point.
    pub fn w12_norm_sq(&self, field: impl Fn(usize) -> (Vec3, [Vec3; 2])) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for qp in 0..self.n_qp() {
            let (v, dv) = field(qp);
            let geo = &self.qp_geom[qp];
            let w = self.weight(qp);
            l2 += w * v.norm_squared();
            let mut grad = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    grad += geo.g_inv[(i, j)] * dv[i].dot(&dv[j]);
                }
            }
            h1 += w * grad;
        }
        (l2, h1)
    }
}

/// Dof coordinates on the boundary circle can exceed the unit radius by round-off.
fn clamp_to_disk(p: [f64; 2]) -> [f64; 2] {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if r > 1.0 {
        [p[0] / r, p[1] / r]
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_cap_area() {
        // Stereographic extent 0.5 gives the cap of polar angle 2 atan(0.5),
        // with cos θ = 0.6 and area 2π(1 − cos θ) = 0.8π.
        let s = Surface::build(ChartKind::unit_sphere_cap(), 16, 2).unwrap();
        assert!((s.area() - 0.8 * std::f64::consts::PI).abs() < 2e-3, "{}", s.area());
    }

    #[test]
    fn projection_reproduces_space_members() {
        let s = Surface::build(ChartKind::unit_sphere_cap(), 4, 2).unwrap();
        let u = s.space().interpolate(|p| 1.0 + p[0] - 2.0 * p[0] * p[1]);
        let vals: Vec<f64> = (0..s.n_qp()).map(|qp| s.space().eval_scalar(&u, qp).0).collect();
        let p = s.project(&vals).unwrap();
        assert!(u.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
