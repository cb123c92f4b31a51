//! Limit problem for shells under dead loads: the rotation maximizing the
//! action of the force, and the minimization of
//! `J(V, Q) = I(V) − ∫_S f·QV dA` over a finite span of isometries.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3};
use serde::Serialize;

use crate::energy::{bending_matrix, MaterialModel};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::isospace::{InfIsometry, IsoBasis};
use crate::surface::Surface;
use crate::symgrad::Displacement;

/// Points sampled on a degenerate set of optimal rotations.
pub const ORBIT_SAMPLES: usize = 32;

/// Relative gap below which singular values count as colliding.
const DEGENERACY_TOL: f64 = 1e-8;

/// A force density at the quadrature points with zero mean on the surface.
#[derive(Debug, Clone)]
pub struct ForceSpec {
    surface: Arc<Surface>,
    values: Vec<Vec3>,
}

/// Built-in force densities, before mean removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ForceProfile {
    /// `(0, 0, x₃ + x₁² − x₂²)`: a vertical load with a quadrupole part.
    Axial,
    /// `(x₃ + x₁x₂, 0, 0)`: a horizontal load with a quadrupole part.
    Shear,
}

impl std::str::FromStr for ForceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axial" => Ok(Self::Axial),
            "shear" => Ok(Self::Shear),
            _ => Err(Error::InvalidParameter(format!("unknown force profile '{s}'"))),
        }
    }
}

impl ForceSpec {
    /// Samples `f` at the quadrature points and subtracts its area-weighted mean.
    pub fn from_fn(surface: &Arc<Surface>, f: impl Fn(Vec3) -> Vec3) -> Self {
        let values = (0..surface.n_qp()).map(|qp| f(surface.qp_geometry(qp).position)).collect();
        Self::from_values(surface, values)
    }

    pub fn from_values(surface: &Arc<Surface>, mut values: Vec<Vec3>) -> Self {
        assert_eq!(values.len(), surface.n_qp(), "one force value per quadrature point");
        let mut mean = Vec3::zeros();
        for (qp, v) in values.iter().enumerate() {
            mean += v * surface.weight(qp);
        }
        mean /= surface.area();
        for v in &mut values {
            *v -= mean;
        }
        Self {
            surface: surface.clone(),
            values,
        }
    }

    pub fn profile(surface: &Arc<Surface>, profile: ForceProfile) -> Self {
        match profile {
            ForceProfile::Axial => Self::from_fn(surface, |x| Vec3::new(0.0, 0.0, x.z + x.x * x.x - x.y * x.y)),
            ForceProfile::Shear => Self::from_fn(surface, |x| Vec3::new(x.z + x.x * x.y, 0.0, 0.0)),
        }
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            surface: self.surface.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn mean(&self) -> Vec3 {
        let mut m = Vec3::zeros();
        for (qp, v) in self.values.iter().enumerate() {
            m += v * self.surface.weight(qp);
        }
        m / self.surface.area()
    }

    /// `M = ∫_S x fᵀ dA`, so that `∫_S f·Qx dA = tr(QM)`.
    pub fn moment(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (qp, f) in self.values.iter().enumerate() {
            m += self.surface.qp_geometry(qp).position * f.transpose() * self.surface.weight(qp);
        }
        m
    }

    /// `∫_S f·Q V dA`.
    pub fn work(&self, q: &Matrix3<f64>, v: &impl Displacement) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(qp, f)| self.surface.weight(qp) * f.dot(&(q * v.value_and_gradient(qp).0)))
            .sum()
    }
}

/// Maximizer of `Q ↦ ∫ f·Qx dA` over `SO(3)`.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalRotation {
    #[serde(serialize_with = "rows")]
    pub rotation: Matrix3<f64>,
    pub value: f64,
    /// The maximizer is not unique.
    pub degenerate: bool,
    /// Singular values of the moment matrix, descending.
    pub singular_values: [f64; 3],
    /// Maximizers sampled along the degenerate set, `rotation` first.
    #[serde(skip)]
    pub orbit: Vec<Matrix3<f64>>,
}

fn rows<S: serde::Serializer>(m: &Matrix3<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let r: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
    r.serialize(s)
}

/// Procrustes solution: with `M = UΣVᵀ`, `Q = V diag(1, 1, s) Uᵀ` and
/// `s = det(VUᵀ)`. The maximizers form the family `V diag(1, R_θ diag(1, s)) Uᵀ`
/// when `σ₂ + sσ₃` vanishes.
pub fn optimal_rotation(force: &ForceSpec) -> OptimalRotation {
    rotation_for_moment(&force.moment())
}

pub fn rotation_for_moment(m: &Matrix3<f64>) -> OptimalRotation {
    let svd = m.svd(true, true);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let u_raw = svd.u.expect("requested");
    let vt_raw = svd.v_t.expect("requested");
    let u = Matrix3::from_columns(&idx.map(|k| u_raw.column(k).into_owned()));
    let v = Matrix3::from_columns(&idx.map(|k| vt_raw.row(k).transpose()));
    let sigma = idx.map(|k| svd.singular_values[k]);
    let s = (v * u.transpose()).determinant().signum();
    let build = |c: f64, sn: f64| {
        let p = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -sn * s, 0.0, sn, c * s);
        v * p * u.transpose()
    };
    let rotation = build(1.0, 0.0);
    let value = (rotation * m).trace();
    let degenerate = sigma[1] + s * sigma[2] <= DEGENERACY_TOL * sigma[0] || sigma[0] == 0.0;
    let orbit = if degenerate {
        (0..ORBIT_SAMPLES)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / ORBIT_SAMPLES as f64;
                build(t.cos(), t.sin())
            })
            .collect()
    } else {
        vec![rotation]
    };
    OptimalRotation {
        rotation,
        value,
        degenerate,
        singular_values: sigma,
        orbit,
    }
}

/// Minimizer of the limit functional over the span of a basis.
#[derive(Debug, Clone, Serialize)]
pub struct LimitSolution {
    pub modes: Vec<String>,
    #[serde(serialize_with = "rows")]
    pub rotation: Matrix3<f64>,
    /// `max_Q ∫ f·Qx dA`.
    pub action: f64,
    pub degenerate: bool,
    pub coefficients: Vec<f64>,
    /// `J(V*, Q*)`.
    pub j: f64,
    /// `‖𝕀c − ℓ‖ / ‖ℓ‖`, or the absolute residual when `ℓ` vanishes.
    pub residual: f64,
    /// Basis entries with vanishing bending energy, whose coefficients are fixed at zero.
    pub pinned: Vec<usize>,
    /// Load on the pinned entries relative to `‖ℓ‖`; zero at a stationary rotation.
    pub pinned_load: f64,
}

/// Stiffness `𝕀_kl = 2 I(V_k, V_l)` and loads of the quadratic problem
/// `min ½cᵀ𝕀c − ℓᵀc`.
#[derive(Debug, Clone)]
pub struct LimitProblem {
    pub stiffness: DMatrix<f64>,
    basis: Arc<IsoBasis>,
}

impl LimitProblem {
    pub fn new(material: &MaterialModel, basis: Arc<IsoBasis>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParameter("empty isometry basis".into()));
        }
        let fields: Vec<&InfIsometry> = basis.fields.iter().collect();
        let stiffness = bending_matrix(material, &fields) * 2.0;
        Ok(Self { stiffness, basis })
    }

    pub fn basis(&self) -> &IsoBasis {
        &self.basis
    }

    /// `ℓ_k = ∫ f·QV_k dA`.
    pub fn load(&self, force: &ForceSpec, q: &Matrix3<f64>) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.fields.iter().map(|v| force.work(q, v)))
    }

    pub fn objective(&self, c: &DVector<f64>, load: &DVector<f64>) -> f64 {
        0.5 * c.dot(&(&self.stiffness * c)) - load.dot(c)
    }

    /// Entries with zero bending energy, found from the diagonal.
    pub fn kernel_entries(&self) -> Vec<usize> {
        let scale = self.stiffness.diagonal().amax();
        (0..self.basis.len())
            .filter(|&k| self.stiffness[(k, k)] <= 1e-12 * scale)
            .collect()
    }

    /// Solves the normal equations with kernel entries pinned to zero.
    pub fn solve(&self, load: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
        let pinned = self.kernel_entries();
        let free: Vec<usize> = (0..self.basis.len()).filter(|k| !pinned.contains(k)).collect();
        let mut c = DVector::zeros(self.basis.len());
        if !free.is_empty() {
            let a = DMatrix::from_fn(free.len(), free.len(), |i, j| self.stiffness[(free[i], free[j])]);
            let b = DVector::from_fn(free.len(), |i, _| load[free[i]]);
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Solve("bending stiffness is not positive definite on the free modes".into()))?;
            let x = chol.solve(&b);
            for (i, &k) in free.iter().enumerate() {
                c[k] = x[i];
            }
        }
        Ok((c, pinned))
    }

    /// The isometry `Σ c_k V_k`.
    pub fn assemble(&self, coefficients: &[f64]) -> Result<InfIsometry> {
        let fields: Vec<&InfIsometry> = self.basis.fields.iter().collect();
        InfIsometry::combine(coefficients, &fields)
    }

    /// Minimizes `J` for the optimal rotation of `force`; on a degenerate set
    /// of optimal rotations the best of the sampled ones is kept.
    pub fn minimize(&self, force: &ForceSpec) -> Result<LimitSolution> {
        let opt = optimal_rotation(force);
        let mut best: Option<(f64, Matrix3<f64>, DVector<f64>, DVector<f64>, Vec<usize>)> = None;
        for q in &opt.orbit {
            let load = self.load(force, q);
            let (c, pinned) = self.solve(&load)?;
            let j = self.objective(&c, &load);
            // Improvements below round-off of the energy scale count as ties,
            // which keep the earlier sample.
            if best.as_ref().is_none_or(|b| j < b.0 - 1e-10 * (b.0.abs() + opt.value.abs())) {
                best = Some((j, *q, c, load, pinned));
            }
        }
        let (j, rotation, c, load, pinned) = best.expect("orbit is never empty");
        let lnorm = load.norm();
        let resid = (&self.stiffness * &c - &load).norm();
        let pinned_load = pinned.iter().map(|&k| load[k].powi(2)).sum::<f64>().sqrt();
        // Loads at round-off of the force scale are treated as zero.
        let floor = 1e-12 * opt.value.abs();
        let rel = |x: f64| if lnorm > floor { x / lnorm } else { x };
        Ok(LimitSolution {
            modes: self.basis.modes.clone(),
            rotation,
            action: opt.value,
            degenerate: opt.degenerate,
            coefficients: c.iter().copied().collect(),
            j,
            residual: rel(resid),
            pinned,
            pinned_load: rel(pinned_load),
        })
    }
}

/// [`LimitProblem::minimize`] over the rigid-augmented basis of frequency `k_max`.
pub fn minimize_limit_energy(
    surface: &Arc<Surface>,
    material: &MaterialModel,
    force: &ForceSpec,
    k_max: u32,
) -> Result<LimitSolution> {
    let basis = Arc::new(crate::isospace::rigid_augmented_basis(surface, k_max)?);
    LimitProblem::new(material, basis)?.minimize(force)
}

/// Rotation by `angle` about `axis`, a convenience for callers building forces.
pub fn axis_rotation(axis: Vec3, angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;

    fn cap() -> Arc<Surface> {
        Surface::build(ChartKind::unit_sphere_cap(), 6, 2).unwrap()
    }

    #[test]
    fn forces_are_mean_free() {
        let s = cap();
        let f = ForceSpec::from_fn(&s, |x| Vec3::new(1.0 + x.x, 2.0, x.z * x.z));
        assert!(f.mean().norm() < 1e-14);
    }

    #[test]
    fn identity_force_gives_identity_rotation() {
        let s = cap();
        let f = ForceSpec::from_fn(&s, |x| x);
        let opt = optimal_rotation(&f);
        assert!((opt.rotation - Matrix3::identity()).norm() < 1e-12);
        let expected: f64 = (0..s.n_qp())
            .map(|qp| {
                let x = s.qp_geometry(qp).position;
                s.weight(qp) * f.values()[qp].dot(&x)
            })
            .sum();
        assert!((opt.value - expected).abs() < 1e-12 * expected);
        assert!(!opt.degenerate);
    }

    #[test]
    fn rotated_force_recovers_the_rotation() {
        let s = cap();
        let r = axis_rotation(Vec3::new(1.0, -2.0, 0.5), 2.2);
        let f = ForceSpec::from_fn(&s, |x| r * x);
        let opt = optimal_rotation(&f);
        assert!((opt.rotation - r).norm() < 1e-10);
        assert!((opt.rotation.determinant() - 1.0).abs() < 1e-12);
        let scaled = optimal_rotation(&f.scaled(3.0));
        assert!((scaled.rotation - opt.rotation).norm() < 1e-12);
        assert!((scaled.value - 3.0 * opt.value).abs() < 1e-12 * opt.value);
    }

    #[test]
    fn reflection_moment_gets_a_proper_rotation() {
        let m = Matrix3::from_diagonal(&Vec3::new(3.0, 2.0, -1.0));
        let opt = rotation_for_moment(&m);
        assert!((opt.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!((opt.value - 4.0).abs() < 1e-12);
        assert!(!opt.degenerate);
        let m = Matrix3::from_diagonal(&Vec3::new(3.0, 1.0, -1.0));
        let opt = rotation_for_moment(&m);
        assert!(opt.degenerate);
        for q in &opt.orbit {
            assert!(((q * m).trace() - 3.0).abs() < 1e-12);
            assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn axial_force_is_degenerate() {
        let s = cap();
        let opt = optimal_rotation(&ForceSpec::profile(&s, ForceProfile::Axial));
        assert!(opt.degenerate);
        assert_eq!(opt.orbit.len(), ORBIT_SAMPLES);
        for q in &opt.orbit {
            assert!(((q * ForceSpec::profile(&s, ForceProfile::Axial).moment()).trace() - opt.value).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_force_gives_zero_solution() {
        let s = cap();
        let f = ForceSpec::from_fn(&s, |_| Vec3::zeros());
        let sol = minimize_limit_energy(&s, &MaterialModel::default(), &f, 3).unwrap();
        assert_eq!(sol.j, 0.0);
        assert!(sol.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn limit_problem_is_minimal_and_quadratic() {
        let s = cap();
        let m = MaterialModel::default();
        let basis = Arc::new(crate::isospace::rigid_augmented_basis(&s, 3).unwrap());
        let p = LimitProblem::new(&m, basis).unwrap();
        assert_eq!(p.kernel_entries(), vec![0, 1, 2]);
        let f = ForceSpec::from_fn(&s, |x| Vec3::new(x.y * x.z, x.x * x.x, 0.3 * x.z + x.x));
        let sol = p.minimize(&f).unwrap();
        assert!(sol.residual < 1e-10, "{}", sol.residual);
        assert!(sol.pinned_load < 1e-10);
        assert!(sol.j < 0.0);
        let load = p.load(&f, &sol.rotation);
        for k in 0..p.basis().len() {
            let mut e = DVector::zeros(p.basis().len());
            e[k] = 1.0;
            assert!(sol.j <= p.objective(&e, &load));
        }
        let doubled = p.minimize(&f.scaled(2.0)).unwrap();
        assert!((doubled.j - 4.0 * sol.j).abs() < 1e-10 * sol.j.abs());
    }

    proptest::proptest! {
        #[test]
        fn procrustes_beats_random_rotations(
            m in proptest::collection::vec(-1.0f64..1.0, 9),
            axes in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let m = Matrix3::from_row_slice(&m);
            let opt = rotation_for_moment(&m);
            let q = opt.rotation;
            proptest::prop_assert!((q.determinant() - 1.0).abs() < 1e-12);
            proptest::prop_assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-12);
            proptest::prop_assert!(((q * m).trace() - opt.value).abs() < 1e-12);
            for a in axes.chunks(3) {
                let r = Rotation3::from_scaled_axis(Vec3::new(a[0], a[1], a[2]));
                proptest::prop_assert!((r.matrix() * m).trace() <= opt.value + 1e-12);
            }
        }
    }
}
