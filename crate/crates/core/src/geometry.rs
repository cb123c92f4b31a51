//! Analytic charts over the closed unit disk and their differential geometry.
//!
//! Conventions: `e_i = ∂_i r`, the unit normal `n` is oriented once per chart
//! (at the origin) so that the second fundamental form
//! `h_ij = ∂_i n · e_j = -n · ∂_ij r` is positive definite, and the Gauss
//! formula reads `∂_ij r = Γ^k_ij e_k - h_ij n`.

use nalgebra::{Matrix2, Vector3};

use crate::error::{Error, Result};
use crate::jet::{cross3, derivative3, dot3, Jet, Jet3};

pub type Vec3 = Vector3<f64>;
pub type Mat2 = Matrix2<f64>;

const IMMERSION_TOL: f64 = 1e-12;

/// The family of built-in parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartKind {
    /// `r = (x, y, 0)`. Diagnostic only: not elliptic.
    Flat,
    /// `r = (x, y, φ)` with
    /// `φ = ½(a x² + 2b xy + c y²) + q (x² + y²)² / 4` and `hessian = [a, b, c]`.
    Graph { hessian: [f64; 3], quartic: f64 },
    /// Sphere of the given radius, stereographically parameterized so that the
    /// unit circle maps to the parallel at polar angle `2 atan(extent)`.
    SphereCap { radius: f64, extent: f64 },
    /// `r = (A e x, B e y, C sqrt(1 - e²|p|²))` for `axes = [A, B, C]`, `e = extent < 1`.
    EllipsoidCap { axes: [f64; 3], extent: f64 },
}

impl ChartKind {
    /// The unit sphere cap whose metric and second fundamental form are the
    /// identity at the origin.
    pub fn unit_sphere_cap() -> Self {
        ChartKind::SphereCap {
            radius: 1.0,
            extent: 0.5,
        }
    }

    pub fn paraboloid() -> Self {
        ChartKind::Graph {
            hessian: [1.0, 0.0, 1.0],
            quartic: 0.0,
        }
    }
}

/// An oriented chart `r: Ω̄ → ℝ³` over the closed unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceChart {
    kind: ChartKind,
    orientation: f64,
}

/// Ambient frame along a chart, as jets: position, tangents and unit normal.
#[derive(Debug, Clone, Copy)]
pub struct FrameJets {
    pub r: Jet3,
    pub e: [Jet3; 2],
    pub n: Jet3,
}

/// Metric quantities as jets, for building analytic reference data.
#[derive(Debug, Clone, Copy)]
pub struct MetricJets {
    pub g: [[Jet; 2]; 2],
    pub h: [[Jet; 2]; 2],
    pub sqrt_g: Jet,
}

/// Exact derivatives of the position up to third order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDerivatives {
    pub r: Vec3,
    pub dr: [Vec3; 2],
    pub ddr: [[Vec3; 2]; 2],
    pub dddr: [[[Vec3; 2]; 2]; 2],
}

/// Geometry of the surface at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryFields {
    pub point: [f64; 2],
    pub position: Vec3,
    pub g: Mat2,
    pub g_inv: Mat2,
    pub sqrt_det_g: f64,
    pub h: Mat2,
    /// Inverse of `h`; zero where `h` is singular (flat chart).
    pub h_inv: Mat2,
    /// `christoffel[k][i][j] = Γ^k_ij`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    pub mean_curvature: f64,
    pub gauss_curvature: f64,
    pub normal: Vec3,
    pub tangents: [Vec3; 2],
    /// `∂_ij r`.
    pub hessian: [[Vec3; 2]; 2],
}

impl GeometryFields {
    /// Principal curvatures `(κ_min, κ_max)`, the eigenvalues of `g⁻¹h`.
    pub fn principal_curvatures(&self) -> (f64, f64) {
        // Symmetric form in an orthonormal frame keeps umbilic points accurate.
        let l = self.orthonormalizer();
        let s = l.transpose() * self.h * l;
        let mid = 0.5 * (s[(0, 0)] + s[(1, 1)]);
        let half = 0.5 * (s[(0, 0)] - s[(1, 1)]);
        let disc = half.hypot(0.5 * (s[(0, 1)] + s[(1, 0)]));
        (mid - disc, mid + disc)
    }

    /// `∂_i n = Σ_jk h_ij g^{jk} e_k`.
    pub fn normal_derivative(&self, i: usize) -> Vec3 {
        let s = self.h * self.g_inv;
        self.tangents[0] * s[(i, 0)] + self.tangents[1] * s[(i, 1)]
    }

    /// A matrix `L` with `Lᵀ g L = Id`, mapping orthonormal-frame components
    /// to chart components. Tensors transform as `T̂ = Lᵀ T L`.
    pub fn orthonormalizer(&self) -> Mat2 {
        let chol = self
            .g
            .cholesky()
            .expect("metric tensor is positive definite");
        chol.l()
            .try_inverse()
            .expect("Cholesky factor is invertible")
            .transpose()
    }
}

impl SurfaceChart {
    /// Validates the parameters and fixes the normal orientation at `p = 0`.
    pub fn new(kind: ChartKind) -> Result<Self> {
        match &kind {
            ChartKind::Flat => {}
            ChartKind::Graph { hessian, quartic } => {
                if !hessian.iter().chain(std::iter::once(quartic)).all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameter("graph coefficients must be finite".into()));
                }
            }
            ChartKind::SphereCap { radius, extent } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidParameter("sphere radius must be positive".into()));
                }
                if !(*extent > 0.0 && extent.is_finite()) {
                    return Err(Error::InvalidParameter("sphere cap extent must be positive".into()));
                }
            }
            ChartKind::EllipsoidCap { axes, extent } => {
                if !axes.iter().all(|a| *a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter("ellipsoid axes must be positive".into()));
                }
                if !(*extent > 0.0 && *extent < 1.0) {
                    return Err(Error::InvalidParameter("ellipsoid cap extent must lie in (0,1)".into()));
                }
            }
        }
        let mut chart = SurfaceChart {
            kind,
            orientation: 1.0,
        };
        if chart.kind != ChartKind::Flat {
            let geo = chart.evaluate([0.0, 0.0])?;
            if geo.h.trace() < 0.0 {
                chart.orientation = -1.0;
            }
        }
        Ok(chart)
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn is_flat(&self) -> bool {
        self.kind == ChartKind::Flat
    }

    /// `+1` if `n = e₁×e₂/|e₁×e₂|`, `-1` otherwise.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// The position as a jet around `p`.
    pub fn position_jet(&self, p: [f64; 2]) -> Jet3 {
        let (x, y) = Jet::variables(p[0], p[1]);
        match &self.kind {
            ChartKind::Flat => [x, y, Jet::constant(0.0)],
            ChartKind::Graph { hessian, quartic } => {
                let s = x * x + y * y;
                let phi = 0.5 * (hessian[0] * x * x + 2.0 * hessian[1] * x * y + hessian[2] * y * y)
                    + 0.25 * quartic * s * s;
                [x, y, phi]
            }
            ChartKind::SphereCap { radius, extent } => {
                let a = *extent;
                let s = (x * x + y * y) * (a * a);
                let inv = (s + 1.0).recip() * *radius;
                [
                    inv * x * (2.0 * a),
                    inv * y * (2.0 * a),
                    inv * (Jet::constant(1.0) - s),
                ]
            }
            ChartKind::EllipsoidCap { axes, extent } => {
                let e = *extent;
                let s = (x * x + y * y) * (e * e);
                [
                    x * (axes[0] * e),
                    y * (axes[1] * e),
                    (Jet::constant(1.0) - s).sqrt() * axes[2],
                ]
            }
        }
    }

    /// Position, tangents and oriented unit normal as jets around `p`.
    pub fn frame_jets(&self, p: [f64; 2]) -> FrameJets {
        let r = self.position_jet(p);
        let e = [derivative3(&r, 0), derivative3(&r, 1)];
        let c = cross3(&e[0], &e[1]);
        let scale = dot3(&c, &c).sqrt().recip() * self.orientation;
        let n = [c[0] * scale, c[1] * scale, c[2] * scale];
        FrameJets { r, e, n }
    }

    /// Metric, second fundamental form and area element as jets around `p`.
    pub fn metric_jets(&self, p: [f64; 2]) -> MetricJets {
        let f = self.frame_jets(p);
        let g = [
            [dot3(&f.e[0], &f.e[0]), dot3(&f.e[0], &f.e[1])],
            [dot3(&f.e[1], &f.e[0]), dot3(&f.e[1], &f.e[1])],
        ];
        let mut h = [[Jet::constant(0.0); 2]; 2];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = -dot3(&f.n, &derivative3(&f.e[i], j));
            }
        }
        let sqrt_g = (g[0][0] * g[1][1] - g[0][1] * g[1][0]).sqrt();
        MetricJets { g, h, sqrt_g }
    }

    /// Exact derivatives of `r` at `p`.
    pub fn derivatives(&self, p: [f64; 2]) -> ChartDerivatives {
        let r = self.position_jet(p);
        let v = |f: &dyn Fn(&Jet) -> f64| Vec3::new(f(&r[0]), f(&r[1]), f(&r[2]));
        let mut out = ChartDerivatives {
            r: v(&|j| j.value()),
            dr: [Vec3::zeros(); 2],
            ddr: [[Vec3::zeros(); 2]; 2],
            dddr: [[[Vec3::zeros(); 2]; 2]; 2],
        };
        for i in 0..2 {
            out.dr[i] = v(&|j| j.d(i));
            for k in 0..2 {
                out.ddr[i][k] = v(&|j| j.dd(i, k));
                for l in 0..2 {
                    out.dddr[i][k][l] = v(&|j| j.ddd(i, k, l));
                }
            }
        }
        out
    }

    /// Geometry without the ellipticity check.
    pub(crate) fn evaluate(&self, p: [f64; 2]) -> Result<GeometryFields> {
        let d = self.derivatives(p);
        let e = d.dr;
        let g = Mat2::new(e[0].dot(&e[0]), e[0].dot(&e[1]), e[1].dot(&e[0]), e[1].dot(&e[1]));
        let det = g.determinant();
        let scale = g.trace().max(1.0);
        if !(det > IMMERSION_TOL * scale * scale) {
            return Err(Error::NotImmersion { x: p[0], y: p[1] });
        }
        let sqrt_det_g = det.sqrt();
        let g_inv = Mat2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
        let normal = e[0].cross(&e[1]) * (self.orientation / sqrt_det_g);
        let mut h = Mat2::zeros();
        let mut christoffel = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[(i, j)] = -normal.dot(&d.ddr[i][j]);
                let proj = [d.ddr[i][j].dot(&e[0]), d.ddr[i][j].dot(&e[1])];
                for (k, gk) in christoffel.iter_mut().enumerate() {
                    gk[i][j] = g_inv[(k, 0)] * proj[0] + g_inv[(k, 1)] * proj[1];
                }
            }
        }
        let h_inv = h.try_inverse().unwrap_or_else(Mat2::zeros);
        let mean_curvature = 0.5 * (g_inv * h).trace();
        let gauss_curvature = h.determinant() / det;
        Ok(GeometryFields {
            point: p,
            position: d.r,
            g,
            g_inv,
            sqrt_det_g,
            h,
            h_inv,
            christoffel,
            mean_curvature,
            gauss_curvature,
            normal,
            tangents: e,
            hessian: d.ddr,
        })
    }
}

/// All geometric quantities at `p`.
///
/// The flat diagnostic chart is exempt from the ellipticity check.
pub fn geometry_at(chart: &SurfaceChart, p: [f64; 2]) -> Result<GeometryFields> {
    let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if norm > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "point ({}, {}) lies outside the unit disk",
            p[0], p[1]
        )));
    }
    let geo = chart.evaluate(p)?;
    if !chart.is_flat() {
        let (kmin, _) = geo.principal_curvatures();
        if !(kmin > 0.0) {
            return Err(Error::NotElliptic {
                x: p[0],
                y: p[1],
                value: kmin,
            });
        }
    }
    Ok(geo)
}

/// Extreme principal curvatures over `samples`.
///
/// Fails with the witness point if the smallest one is not positive.
pub fn check_ellipticity(chart: &SurfaceChart, samples: &[[f64; 2]]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty sample set".into()));
    }
    let mut cmin = f64::INFINITY;
    let mut cmax = f64::NEG_INFINITY;
    let mut witness = samples[0];
    for &p in samples {
        let (lo, hi) = chart.evaluate(p)?.principal_curvatures();
        if lo < cmin {
            cmin = lo;
            witness = p;
        }
        cmax = cmax.max(hi);
    }
    if cmin <= 1e-12 * cmax.abs().max(1.0) {
        return Err(Error::NotElliptic {
            x: witness[0],
            y: witness[1],
            value: cmin,
        });
    }
    Ok((cmin, cmax))
}

/// Polar sample grid on the closed unit disk: the center plus `radial`
/// circles of `angular` points each, the last circle being the boundary.
pub fn disk_samples(radial: usize, angular: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0, 0.0]];
    for i in 1..=radial {
        let rho = i as f64 / radial as f64;
        for j in 0..angular {
            let t = std::f64::consts::TAU * j as f64 / angular as f64;
            out.push([rho * t.cos(), rho * t.sin()]);
        }
    }
    out
}
