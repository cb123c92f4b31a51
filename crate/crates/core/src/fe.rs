//! Lagrange finite elements of order 1 to 3 on the disk mesh.
//!
//! Local dofs are the three vertices followed by the edge dofs in the edge
//! order (1-2, 2-3, 3-1): one midpoint per edge for order 2, and for order 3
//! the point near the first vertex then the point near the second, and
//! finally (order 3) the centroid. Global dofs number mesh vertices first,
//! then edges, then element interiors. Quadrature uses the 12-point degree-6
//! Dunavant rule, exact for products of cubic basis functions; the global
//! quadrature index of point `q` in element `e` is `12 e + q`.

use std::sync::{Arc, OnceLock};

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, Factorization};

pub const QUAD_POINTS: usize = 12;

const QA: f64 = 0.249286745170910;
const QB: f64 = 0.063089014491502;
const QC: [f64; 3] = [0.053145049844817, 0.310352451033784, 0.636502499121399];
const WA: f64 = 0.116786275726379;
const WB: f64 = 0.050844906370207;
const WC: f64 = 0.082851075618374;

const QUAD: [([f64; 3], f64); QUAD_POINTS] = [
    ([QA, QA, 1.0 - 2.0 * QA], WA),
    ([QA, 1.0 - 2.0 * QA, QA], WA),
    ([1.0 - 2.0 * QA, QA, QA], WA),
    ([QB, QB, 1.0 - 2.0 * QB], WB),
    ([QB, 1.0 - 2.0 * QB, QB], WB),
    ([1.0 - 2.0 * QB, QB, QB], WB),
    ([QC[0], QC[1], QC[2]], WC),
    ([QC[0], QC[2], QC[1]], WC),
    ([QC[1], QC[0], QC[2]], WC),
    ([QC[1], QC[2], QC[0]], WC),
    ([QC[2], QC[0], QC[1]], WC),
    ([QC[2], QC[1], QC[0]], WC),
];

const T1: f64 = 1.0 / 3.0;
const T2: f64 = 2.0 / 3.0;

/// Barycentric coordinates of the local dofs.
fn node_bary(order: usize) -> Vec<[f64; 3]> {
    let mut out = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match order {
        2 => out.extend([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        3 => out.extend([
            [T2, T1, 0.0],
            [T1, T2, 0.0],
            [0.0, T2, T1],
            [0.0, T1, T2],
            [T1, 0.0, T2],
            [T2, 0.0, T1],
            [T1, T1, T1],
        ]),
        _ => {}
    }
    out
}

const EDGE_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// A nodal Lagrange space over a mesh.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    order: usize,
    nloc: usize,
    dof_coords: Vec<[f64; 2]>,
    elem_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
    area: Vec<f64>,
    grad_lambda: Vec<[[f64; 2]; 3]>,
    basis: Vec<f64>,
    basis_grad: Vec<[f64; 2]>,
    qp_coords: Vec<[f64; 2]>,
    qp_weights: Vec<f64>,
    laplace_factor: OnceLock<std::result::Result<Arc<Factorization>, Error>>,
}

fn basis_values(order: usize, l: [f64; 3]) -> Vec<f64> {
    match order {
        1 => l.to_vec(),
        2 => {
            let mut out: Vec<f64> = l.iter().map(|&li| li * (2.0 * li - 1.0)).collect();
            out.extend(EDGE_PAIRS.iter().map(|&(a, b)| 4.0 * l[a] * l[b]));
            out
        }
        _ => {
            let mut out: Vec<f64> = l
                .iter()
                .map(|&li| 0.5 * li * (3.0 * li - 1.0) * (3.0 * li - 2.0))
                .collect();
            for &(a, b) in &EDGE_PAIRS {
                out.push(4.5 * l[a] * l[b] * (3.0 * l[a] - 1.0));
                out.push(4.5 * l[a] * l[b] * (3.0 * l[b] - 1.0));
            }
            out.push(27.0 * l[0] * l[1] * l[2]);
            out
        }
    }
}

/// Barycentric partial derivatives `(∂f/∂λ_k)` of every local basis function.
fn bary_gradients(order: usize, l: [f64; 3]) -> Vec<[f64; 3]> {
    let unit = |k: usize, s: f64| {
        let mut v = [0.0; 3];
        v[k] = s;
        v
    };
    match order {
        1 => (0..3).map(|k| unit(k, 1.0)).collect(),
        2 => {
            let mut out: Vec<[f64; 3]> = (0..3).map(|k| unit(k, 4.0 * l[k] - 1.0)).collect();
            for &(a, b) in &EDGE_PAIRS {
                let mut v = [0.0; 3];
                v[a] = 4.0 * l[b];
                v[b] = 4.0 * l[a];
                out.push(v);
            }
            out
        }
        _ => {
            let mut out: Vec<[f64; 3]> = (0..3)
                .map(|k| unit(k, 0.5 * (27.0 * l[k] * l[k] - 18.0 * l[k] + 2.0)))
                .collect();
            for &(a, b) in &EDGE_PAIRS {
                for (i, j) in [(a, b), (b, a)] {
                    let mut v = [0.0; 3];
                    v[i] = 4.5 * (6.0 * l[i] * l[j] - l[j]);
                    v[j] = 4.5 * (3.0 * l[i] * l[i] - l[i]);
                    out.push(v);
                }
            }
            out.push([27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]]);
            out
        }
    }
}

/// Barycentric second derivatives `(∂²f/∂λ_a∂λ_b)` of every local basis function.
fn bary_hessians(order: usize, l: [f64; 3]) -> Vec<[[f64; 3]; 3]> {
    let mut out = Vec::new();
    match order {
        1 => out.resize(3, [[0.0; 3]; 3]),
        2 => {
            for k in 0..3 {
                let mut m = [[0.0; 3]; 3];
                m[k][k] = 4.0;
                out.push(m);
            }
            for &(a, b) in &EDGE_PAIRS {
                let mut m = [[0.0; 3]; 3];
                m[a][b] = 4.0;
                m[b][a] = 4.0;
                out.push(m);
            }
        }
        _ => {
            for k in 0..3 {
                let mut m = [[0.0; 3]; 3];
                m[k][k] = 27.0 * l[k] - 9.0;
                out.push(m);
            }
            for &(a, b) in &EDGE_PAIRS {
                for (i, j) in [(a, b), (b, a)] {
                    let mut m = [[0.0; 3]; 3];
                    m[i][i] = 27.0 * l[j];
                    m[i][j] = 4.5 * (6.0 * l[i] - 1.0);
                    m[j][i] = m[i][j];
                    out.push(m);
                }
            }
            let mut m = [[0.0; 3]; 3];
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (0, 2, 1)] {
                m[a][b] = 27.0 * l[c];
                m[b][a] = 27.0 * l[c];
            }
            out.push(m);
        }
    }
    out
}

fn basis_gradients(order: usize, l: [f64; 3], gl: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
    bary_gradients(order, l)
        .into_iter()
        .map(|d| {
            [
                d[0] * gl[0][0] + d[1] * gl[1][0] + d[2] * gl[2][0],
                d[0] * gl[0][1] + d[1] * gl[1][1] + d[2] * gl[2][1],
            ]
        })
        .collect()
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "finite element order must be 1, 2 or 3, got {order}"
            )));
        }
        let nv = mesh.nodes.len();
        let ne = mesh.edges.len();
        let nloc = (order + 1) * (order + 2) / 2;
        let mut dof_coords = mesh.nodes.clone();
        let mut is_boundary = mesh.boundary.clone();
        if order == 2 {
            for (e, b) in mesh.edges.iter().zip(&mesh.boundary_edge) {
                let (p, q) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
                dof_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                is_boundary.push(*b);
            }
        }
        if order == 3 {
            for (e, b) in mesh.edges.iter().zip(&mesh.boundary_edge) {
                let (p, q) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
                for (s, t) in [(T2, T1), (T1, T2)] {
                    dof_coords.push([s * p[0] + t * q[0], s * p[1] + t * q[1]]);
                    is_boundary.push(*b);
                }
            }
            for tri in &mesh.triangles {
                let c = tri.iter().fold([0.0, 0.0], |acc, &i| {
                    [acc[0] + mesh.nodes[i][0] / 3.0, acc[1] + mesh.nodes[i][1] / 3.0]
                });
                dof_coords.push(c);
                is_boundary.push(false);
            }
        }
        let nt = mesh.triangles.len();
        let mut elem_dofs = Vec::with_capacity(nt * nloc);
        let mut area = Vec::with_capacity(nt);
        let mut grad_lambda = Vec::with_capacity(nt);
        let mut basis_grad = Vec::with_capacity(nt * QUAD_POINTS * nloc);
        let mut qp_coords = Vec::with_capacity(nt * QUAD_POINTS);
        let mut qp_weights = Vec::with_capacity(nt * QUAD_POINTS);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            elem_dofs.extend_from_slice(tri);
            if order == 2 {
                elem_dofs.extend(mesh.triangle_edges[t].iter().map(|&e| nv + e));
            }
            if order == 3 {
                for (k, &e) in mesh.triangle_edges[t].iter().enumerate() {
                    let forward = mesh.edges[e][0] == tri[EDGE_PAIRS[k].0];
                    let (first, second) = if forward { (0, 1) } else { (1, 0) };
                    elem_dofs.push(nv + 2 * e + first);
                    elem_dofs.push(nv + 2 * e + second);
                }
                elem_dofs.push(nv + 2 * ne + t);
            }
            let [p0, p1, p2] = tri.map(|i| mesh.nodes[i]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
            let gl = [
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ];
            area.push(0.5 * det);
            grad_lambda.push(gl);
            for (l, w) in QUAD {
                basis_grad.extend(basis_gradients(order, l, &gl));
                qp_coords.push([
                    l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                    l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
                ]);
                qp_weights.push(0.5 * det * w);
            }
        }
        let basis = QUAD.iter().flat_map(|(l, _)| basis_values(order, *l)).collect();
        let boundary_dofs = (0..dof_coords.len()).filter(|&i| is_boundary[i]).collect();
        Ok(Self {
            mesh,
            order,
            nloc,
            dof_coords,
            elem_dofs,
            boundary_dofs,
            is_boundary,
            area,
            grad_lambda,
            basis,
            basis_grad,
            qp_coords,
            qp_weights,
            laplace_factor: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ndofs(&self) -> usize {
        self.dof_coords.len()
    }

    /// Dofs per element.
    pub fn nloc(&self) -> usize {
        self.nloc
    }

    pub fn n_elements(&self) -> usize {
        self.area.len()
    }

    pub fn n_qp(&self) -> usize {
        self.qp_weights.len()
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.ndofs()).filter(|&i| !self.is_boundary[i]).collect()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.elem_dofs[e * self.nloc..(e + 1) * self.nloc]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.area[e]
    }

    /// Basis values at local quadrature point `q` (same for all elements).
    pub fn basis_at(&self, q: usize) -> &[f64] {
        &self.basis[q * self.nloc..(q + 1) * self.nloc]
    }

    /// Physical basis gradients at global quadrature point `qp`.
    pub fn grads_at(&self, qp: usize) -> &[[f64; 2]] {
        &self.basis_grad[qp * self.nloc..(qp + 1) * self.nloc]
    }

    pub fn qp_point(&self, qp: usize) -> [f64; 2] {
        self.qp_coords[qp]
    }

    /// Quadrature weight including the element area (parameter measure `dx`).
    pub fn qp_weight(&self, qp: usize) -> f64 {
        self.qp_weights[qp]
    }

    pub fn qp_points(&self) -> &[[f64; 2]] {
        &self.qp_coords
    }

    /// Value and parameter gradient at `qp` of a field with `N` components per dof.
    pub fn eval<const N: usize>(&self, data: &[[f64; N]], qp: usize) -> ([f64; N], [[f64; N]; 2]) {
        let e = qp / QUAD_POINTS;
        let phi = self.basis_at(qp % QUAD_POINTS);
        let grads = self.grads_at(qp);
        let mut val = [0.0; N];
        let mut grad = [[0.0; N]; 2];
        for (a, &dof) in self.element_dofs(e).iter().enumerate() {
            let d = &data[dof];
            for c in 0..N {
                val[c] += phi[a] * d[c];
                grad[0][c] += grads[a][0] * d[c];
                grad[1][c] += grads[a][1] * d[c];
            }
        }
        (val, grad)
    }

    /// Value and gradient of a scalar coefficient vector at `qp`.
    pub fn eval_scalar(&self, coeffs: &[f64], qp: usize) -> (f64, [f64; 2]) {
        let e = qp / QUAD_POINTS;
        let phi = self.basis_at(qp % QUAD_POINTS);
        let grads = self.grads_at(qp);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for (a, &dof) in self.element_dofs(e).iter().enumerate() {
            val += phi[a] * coeffs[dof];
            grad[0] += grads[a][0] * coeffs[dof];
            grad[1] += grads[a][1] * coeffs[dof];
        }
        (val, grad)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<T>(&self, f: impl Fn([f64; 2]) -> T) -> Vec<T> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Values of a field of this space at the dofs of another space on the same mesh.
    pub fn transfer<const N: usize>(&self, data: &[[f64; N]], target: &FeSpace) -> Vec<[f64; N]> {
        let mut out = vec![[0.0; N]; target.ndofs()];
        let nodes = node_bary(target.order);
        for e in 0..self.n_elements() {
            let dofs = self.element_dofs(e);
            for (&td, l) in target.element_dofs(e).iter().zip(&nodes) {
                let phi = basis_values(self.order, *l);
                let mut v = [0.0; N];
                for (p, &d) in phi.iter().zip(dofs) {
                    for c in 0..N {
                        v[c] += p * data[d][c];
                    }
                }
                out[td] = v;
            }
        }
        out
    }

    /// Gradients of all local basis functions of element `e` at barycentric point `l`.
    fn grads_at_bary(&self, e: usize, l: [f64; 3]) -> Vec<[f64; 2]> {
        basis_gradients(self.order, l, &self.grad_lambda[e])
    }

    /// Second derivatives of a field on element `e` at the centroid
    /// (constant on the element for order 2).
    pub fn element_hessian<const N: usize>(&self, data: &[[f64; N]], e: usize) -> [[[f64; N]; 2]; 2] {
        self.element_hessian_at(data, e, [T1, T1, T1])
    }

    /// Second derivatives of a field on element `e` at barycentric point `l`.
    pub fn element_hessian_at<const N: usize>(
        &self,
        data: &[[f64; N]],
        e: usize,
        l: [f64; 3],
    ) -> [[[f64; N]; 2]; 2] {
        let mut out = [[[0.0; N]; 2]; 2];
        let gl = &self.grad_lambda[e];
        for (hb, &dof) in bary_hessians(self.order, l).iter().zip(self.element_dofs(e)) {
            for i in 0..2 {
                for j in 0..2 {
                    let mut m = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            m += hb[a][b] * gl[a][i] * gl[b][j];
                        }
                    }
                    for c in 0..N {
                        out[i][j][c] += m * data[dof][c];
                    }
                }
            }
        }
        out
    }

    /// Area-weighted patch average at every dof of the element gradients.
    pub fn recovered_gradient<const N: usize>(&self, data: &[[f64; N]]) -> Vec<[[f64; N]; 2]> {
        let mut acc = vec![[[0.0; N]; 2]; self.ndofs()];
        let mut weight = vec![0.0; self.ndofs()];
        let nodes = node_bary(self.order);
        for e in 0..self.n_elements() {
            let dofs = self.element_dofs(e);
            for (a, &dof) in dofs.iter().enumerate() {
                let grads = self.grads_at_bary(e, nodes[a]);
                let w = self.area[e];
                for (b, &db) in dofs.iter().enumerate() {
                    for i in 0..2 {
                        for c in 0..N {
                            acc[dof][i][c] += w * grads[b][i] * data[db][c];
                        }
                    }
                }
                weight[dof] += w;
            }
        }
        for (a, w) in acc.iter_mut().zip(&weight) {
            for row in a.iter_mut() {
                for v in row.iter_mut() {
                    *v /= w;
                }
            }
        }
        acc
    }

    /// Area-weighted patch average at every dof of the element Hessians.
    pub fn recovered_hessian<const N: usize>(&self, data: &[[f64; N]]) -> Vec<[[[f64; N]; 2]; 2]> {
        let mut acc = vec![[[[0.0; N]; 2]; 2]; self.ndofs()];
        let mut weight = vec![0.0; self.ndofs()];
        let nodes = node_bary(self.order);
        for e in 0..self.n_elements() {
            let w = self.area[e];
            for (&dof, &l) in self.element_dofs(e).iter().zip(&nodes) {
                let hess = self.element_hessian_at(data, e, l);
                for i in 0..2 {
                    for j in 0..2 {
                        for c in 0..N {
                            acc[dof][i][j][c] += w * hess[i][j][c];
                        }
                    }
                }
                weight[dof] += w;
            }
        }
        for (a, w) in acc.iter_mut().zip(&weight) {
            for v in a.iter_mut().flatten().flatten() {
                *v /= w;
            }
        }
        acc
    }

    /// `∫ f φ_a dx` for values of `f` at quadrature points.
    pub fn load_vector(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs()];
        for (qp, &fv) in f.iter().enumerate() {
            let w = self.qp_weights[qp] * fv;
            let phi = self.basis_at(qp % QUAD_POINTS);
            for (a, &dof) in self.element_dofs(qp / QUAD_POINTS).iter().enumerate() {
                out[dof] += w * phi[a];
            }
        }
        out
    }

    /// `∫ G · ∇φ_a dx` for a vector field `G` at quadrature points.
    pub fn gradient_load_vector(&self, g: &[[f64; 2]]) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs()];
        for (qp, gv) in g.iter().enumerate() {
            let w = self.qp_weights[qp];
            let grads = self.grads_at(qp);
            for (a, &dof) in self.element_dofs(qp / QUAD_POINTS).iter().enumerate() {
                out[dof] += w * (gv[0] * grads[a][0] + gv[1] * grads[a][1]);
            }
        }
        out
    }

    /// `∫ (a ∇u)·∇v + c u v dx` without coefficient checks.
    pub fn assemble_form(&self, a: Option<&[Matrix2<f64>]>, c: Option<&[f64]>) -> CsrMatrix {
        let n = self.nloc;
        let mut triplets = Vec::with_capacity(self.n_elements() * n * n);
        let mut local = vec![0.0; n * n];
        for e in 0..self.n_elements() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..QUAD_POINTS {
                let qp = e * QUAD_POINTS + q;
                let w = self.qp_weights[qp];
                let phi = self.basis_at(q);
                let grads = self.grads_at(qp);
                if let Some(a) = a {
                    let m = &a[qp];
                    for i in 0..n {
                        let ag = [
                            m[(0, 0)] * grads[i][0] + m[(0, 1)] * grads[i][1],
                            m[(1, 0)] * grads[i][0] + m[(1, 1)] * grads[i][1],
                        ];
                        for j in 0..n {
                            local[i * n + j] += w * (ag[0] * grads[j][0] + ag[1] * grads[j][1]);
                        }
                    }
                }
                if let Some(c) = c {
                    let cw = w * c[qp];
                    for i in 0..n {
                        for j in 0..n {
                            local[i * n + j] += cw * phi[i] * phi[j];
                        }
                    }
                }
            }
            let dofs = self.element_dofs(e);
            for i in 0..n {
                for j in 0..n {
                    triplets.push((dofs[i], dofs[j], local[i * n + j]));
                }
            }
        }
        CsrMatrix::from_triplets(self.ndofs(), self.ndofs(), triplets)
    }

    /// Mass matrix `∫ ρ u v dx`.
    pub fn mass_matrix(&self, density: &[f64]) -> CsrMatrix {
        self.assemble_form(None, Some(density))
    }

    /// Least-squares potential: minimizes `‖∇u − G_k‖²` in `L²(dx)` for each
    /// target `G_k`, normalized to zero mean. Returns the potentials and the
    /// relative residuals `‖∇u − G‖ / ‖G‖`.
    pub fn recover_potential(&self, targets: &[Vec<[f64; 2]>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let fact = self
            .laplace_factor
            .get_or_init(|| {
                let k = self.assemble_form(Some(&vec![Matrix2::identity(); self.n_qp()]), None);
                let free: Vec<usize> = (1..self.ndofs()).collect();
                Factorization::cholesky(&k.submatrix(&free, &free)).map(Arc::new)
            })
            .clone()?;
        let rhs: Vec<Vec<f64>> = targets
            .iter()
            .map(|g| self.gradient_load_vector(g)[1..].to_vec())
            .collect();
        let sols = fact.solve_many(&rhs);
        let total: f64 = self.qp_weights.iter().sum();
        let mut potentials = Vec::with_capacity(targets.len());
        let mut residuals = Vec::with_capacity(targets.len());
        for (g, s) in targets.iter().zip(sols) {
            let mut u = Vec::with_capacity(self.ndofs());
            u.push(0.0);
            u.extend(s);
            let mean: f64 = (0..self.n_qp())
                .map(|qp| self.qp_weights[qp] * self.eval_scalar(&u, qp).0)
                .sum::<f64>()
                / total;
            u.iter_mut().for_each(|v| *v -= mean);
            let (mut num, mut den) = (0.0, 0.0);
            for (qp, gv) in g.iter().enumerate() {
                let (_, du) = self.eval_scalar(&u, qp);
                let w = self.qp_weights[qp];
                num += w * ((du[0] - gv[0]).powi(2) + (du[1] - gv[1]).powi(2));
                den += w * (gv[0] * gv[0] + gv[1] * gv[1]);
            }
            residuals.push(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() });
            potentials.push(u);
        }
        Ok((potentials, residuals))
    }
}

/// `∫ (a ∇u)·∇v + c u v dx` with `a` checked to be positive definite at every
/// quadrature point.
pub fn assemble_bilinear(space: &FeSpace, a: &[Matrix2<f64>], c: &[f64]) -> Result<CsrMatrix> {
    for (qp, m) in a.iter().enumerate() {
        let sym = (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12 * m.norm();
        if !(sym && m[(0, 0)] > 0.0 && m.determinant() > 0.0) {
            return Err(Error::CoefficientNotSpd {
                element: qp / QUAD_POINTS,
                point: qp % QUAD_POINTS,
            });
        }
    }
    Ok(space.assemble_form(Some(a), Some(c)))
}

/// Least-squares potential of a single target gradient field.
pub fn recover_potential(space: &FeSpace, target: &[[f64; 2]]) -> Result<(Vec<f64>, f64)> {
    let (mut u, r) = space.recover_potential(&[target.to_vec()])?;
    Ok((u.pop().expect("one potential"), r[0]))
}

macro_rules! field_type {
    ($(#[$doc:meta])* $name:ident, $coef:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone)]
        pub struct $name {
            pub space: Arc<FeSpace>,
            pub coeffs: Vec<$coef>,
        }

        impl $name {
            pub fn new(space: Arc<FeSpace>, coeffs: Vec<$coef>) -> Result<Self> {
                if coeffs.len() != space.ndofs() {
                    return Err(Error::InvalidParameter(format!(
                        "coefficient length {} does not match {} dofs",
                        coeffs.len(),
                        space.ndofs()
                    )));
                }
                Ok(Self { space, coeffs })
            }

            pub fn zeros(space: Arc<FeSpace>) -> Self {
                let coeffs = vec![Default::default(); space.ndofs()];
                Self { space, coeffs }
            }
        }
    };
}

field_type!(
    /// Scalar nodal field.
    ScalarField,
    f64
);
field_type!(
    /// ℝ³-valued nodal field in ambient components.
    VectorField3,
    [f64; 3]
);
field_type!(
    /// Symmetric tangential tensor in chart components `(T11, T12, T22)`.
    SymTensorField2,
    [f64; 3]
);
field_type!(
    /// Skew 3×3 matrix field stored as `(A12, A13, A23)`.
    SkewField3,
    [f64; 3]
);

impl ScalarField {
    pub fn eval(&self, qp: usize) -> (f64, [f64; 2]) {
        self.space.eval_scalar(&self.coeffs, qp)
    }
}

impl VectorField3 {
    pub fn eval(&self, qp: usize) -> ([f64; 3], [[f64; 3]; 2]) {
        self.space.eval(&self.coeffs, qp)
    }
}

impl SymTensorField2 {
    pub fn matrix(c: [f64; 3]) -> Matrix2<f64> {
        Matrix2::new(c[0], c[1], c[1], c[2])
    }
}

impl SkewField3 {
    pub fn matrix(c: [f64; 3]) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::new(0.0, c[0], c[1], -c[0], 0.0, c[2], -c[1], -c[2], 0.0)
    }

    /// Components of the skew part of `m`.
    pub fn components(m: &nalgebra::Matrix3<f64>) -> [f64; 3] {
        [
            0.5 * (m[(0, 1)] - m[(1, 0)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 2)] - m[(2, 1)]),
        ]
    }
}
