//! Compressed sparse rows, sparse factorizations and a small eigen solver.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

static FAER_INIT: Once = Once::new();

/// Factorizations run sequentially so results do not depend on thread count.
fn init_backend() {
    FAER_INIT.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Real matrix in compressed sparse row format with sorted, unique columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in a fixed order, so equal input lists give
    /// bit-identical matrices.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(entries.len() / 4);
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len() / 4);
        let mut last = None;
        for (r, c, v) in entries {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        out
    }

    /// The block with the given rows and columns, renumbered in list order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            let (rc, rv) = self.row(r);
            for (&c, &v) in rc.iter().zip(rv) {
                if col_map[c] != usize::MAX {
                    t.push((k, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Solve(format!("matrix conversion failed: {e:?}")))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            out[(r, c)] = v;
        }
        out
    }
}

/// A sparse direct factorization.
pub enum Factorization {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factorization::Cholesky(_) => f.write_str("Factorization::Cholesky"),
            Factorization::Lu(_) => f.write_str("Factorization::Lu"),
        }
    }
}

impl Factorization {
    /// Cholesky if the matrix is positive definite, LU otherwise.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::cholesky(a).or_else(|_| Self::lu(a))
    }

    pub fn cholesky(a: &CsrMatrix) -> Result<Self> {
        init_backend();
        let m = a.to_faer()?;
        m.sp_cholesky(Side::Lower)
            .map(Factorization::Cholesky)
            .map_err(|e| Error::Solve(format!("Cholesky factorization failed: {e:?}")))
    }

    pub fn lu(a: &CsrMatrix) -> Result<Self> {
        init_backend();
        let m = a.to_faer()?;
        m.sp_lu()
            .map(Factorization::Lu)
            .map_err(|e| Error::Solve(format!("LU factorization failed: {e:?}")))
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self, Factorization::Cholesky(_))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_many(&[b.to_vec()]).pop().expect("one column")
    }

    pub fn solve_many(&self, columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if columns.is_empty() {
            return Vec::new();
        }
        let n = columns[0].len();
        let rhs = Mat::<f64>::from_fn(n, columns.len(), |i, j| columns[j][i]);
        let x = match self {
            Factorization::Cholesky(f) => f.solve(&rhs),
            Factorization::Lu(f) => f.solve(&rhs),
        };
        (0..columns.len())
            .map(|j| (0..n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

/// Solves `A x = λ B x` for symmetric `A` and symmetric positive definite `B`.
/// Eigenvalues ascend; eigenvectors are `B`-orthonormal columns.
pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solve("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Solve("singular Gram factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| linv.transpose() * eig.eigenvectors.column(i))
            .collect::<Vec<DVector<f64>>>(),
    );
    Ok((vals, vecs))
}

/// Eigenpairs of `A x = λ M x` closest to `shift`, by shift-invert subspace
/// iteration with Rayleigh–Ritz projection. `A` symmetric, `M` SPD.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn eigenpairs_near(
    a: &CsrMatrix,
    m: &CsrMatrix,
    shift: f64,
    count: usize,
    seed: u64,
) -> Result<EigenPairs> {
    let n = a.nrows();
    let count = count.min(n);
    let block = (count + 6).min(n).max(count);
    let op = a.add_scaled(m, -shift);
    let fact = Factorization::new(&op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut prev: Vec<f64> = vec![f64::INFINITY; count];
    for _ in 0..300 {
        let mx: Vec<Vec<f64>> = x.iter().map(|v| m.matvec(v)).collect();
        let y = fact.solve_many(&mx);
        let ay: Vec<Vec<f64>> = y.iter().map(|v| a.matvec(v)).collect();
        let my: Vec<Vec<f64>> = y.iter().map(|v| m.matvec(v)).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let mut ar = DMatrix::zeros(block, block);
        let mut mr = DMatrix::zeros(block, block);
        for i in 0..block {
            for j in 0..block {
                ar[(i, j)] = dot(&y[i], &ay[j]);
                mr[(i, j)] = dot(&y[i], &my[j]);
            }
        }
        let ar = (&ar + ar.transpose()) * 0.5;
        let mr = (&mr + mr.transpose()) * 0.5;
        let (vals, vecs) = generalized_eigen(&ar, &mr)?;
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| (vals[i] - shift).abs().total_cmp(&(vals[j] - shift).abs()));
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (k, yk) in y.iter().enumerate() {
                    let coef = vecs[(k, c)];
                    for (vi, yi) in v.iter_mut().zip(yk) {
                        *vi += coef * yi;
                    }
                }
                v
            })
            .collect();
        let current: Vec<f64> = order.iter().take(count).map(|&i| vals[i]).collect();
        let scale = current.iter().fold(shift.abs(), |s, v| s.max(v.abs())).max(1e-300);
        let converged = current
            .iter()
            .zip(&prev)
            .all(|(c, p)| (c - p).abs() <= 1e-12 * scale);
        prev = current;
        if converged {
            break;
        }
    }
    Ok(EigenPairs {
        values: prev,
        vectors: x.into_iter().take(count).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cholesky_and_lu_solve() {
        let a = laplacian_1d(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        for f in [Factorization::cholesky(&a).unwrap(), Factorization::lu(&a).unwrap()] {
            let y = f.solve(&b);
            assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-10));
        }
        let neg = a.add_scaled(&CsrMatrix::identity(50), -3.0);
        assert!(Factorization::cholesky(&neg).is_err());
        assert!(!Factorization::new(&neg).unwrap().is_cholesky());
    }

    #[test]
    fn smallest_eigenvalues_of_path_laplacian() {
        let n = 80;
        let a = laplacian_1d(n);
        let m = CsrMatrix::identity(n);
        let pairs = eigenpairs_near(&a, &m, 0.0, 3, 7).unwrap();
        for (k, v) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        }
    }

    #[test]
    fn submatrix_selects_block() {
        let a = laplacian_1d(5);
        let s = a.submatrix(&[1, 2], &[2, 3]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 2.0, -1.0]));
    }
}
