//! Dense vector and matrix kernel.
//!
//! Everything here is sized for desk-scale problems (orders up to a few
//! hundred), so storage is dense and the symmetric eigensolver is cyclic
//! Jacobi. Symmetric matrices are stored as a packed upper triangle in
//! row-major order: `(0,0), (0,1), .., (0,n-1), (1,1), ..`. The same order
//! is used by [`svec`].

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence threshold for Jacobi sweeps, relative to `‖A‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;
/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// A finite real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(1 - t) * a + t * b`, evaluated as written.
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + j - i
}

/// Number of packed entries of a symmetric matrix of order `n`.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Order `n` with `n(n+1)/2 == len`, if it exists.
pub fn order_from_packed_len(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (packed_len(n) == len).then_some(n)
}

/// Symmetric matrix, one triangle stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            packed: vec![0.0; packed_len(order)],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_diag(&vec![1.0; order])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_packed(order: usize, packed: Vec<f64>) -> Result<Self> {
        check_len(packed_len(order), packed.len())?;
        if packed.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        Ok(Self { order, packed })
    }

    /// Builds from a full row-major array, rejecting asymmetric input.
    pub fn from_row_major(order: usize, data: &[f64]) -> Result<Self> {
        check_len(order * order, data.len())?;
        let scale = 1.0 + norm_inf(data);
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                let (a, b) = (data[i * order + j], data[j * order + i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("symmetric matrix"));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Validation(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                m.set(i, j, a);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for r in rows {
            check_len(n, r.len())?;
            flat.extend_from_slice(r);
        }
        Self::from_row_major(n, &flat)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(self.order, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.order, i, j);
        self.packed[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.order, i, j);
        self.packed[k] += v;
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        debug_assert_eq!(self.order, other.order);
        axpy(alpha, &other.packed, &mut self.packed);
    }

    /// Adds `alpha * (u vᵀ + v uᵀ) / 2`.
    pub fn add_sym_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        let n = self.order;
        for i in 0..n {
            for j in i..n {
                let w = 0.5 * (u[i] * v[j] + v[i] * u[j]);
                if w != 0.0 {
                    self.add(i, j, alpha * w);
                }
            }
        }
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        let n = self.order;
        let mut s = 0.0;
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.packed)
    }

    pub fn is_zero(&self) -> bool {
        self.packed.iter().all(|v| *v == 0.0)
    }
}

/// General dense matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                axpy(*yi, self.row(i), &mut out);
            }
        }
        out
    }

    /// `AᵀA`
    pub fn gram(&self) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                if row[i] == 0.0 {
                    continue;
                }
                for j in i..self.cols {
                    g.add(i, j, row[i] * row[j]);
                }
            }
        }
        g
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row-major `n × n`; column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
}

impl EigDecomposition {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        let n = self.order();
        (0..n).map(|i| self.eigenvectors[i * n + j]).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Q f(Λ) Qᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.order();
        let q = &self.eigenvectors;
        let mut out = SymMatrix::zeros(n);
        for (k, lam) in self.eigenvalues.iter().enumerate() {
            let w = f(*lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let qi = q[i * n + k] * w;
                if qi == 0.0 {
                    continue;
                }
                for j in i..n {
                    out.add(i, j, qi * q[j * n + k]);
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

fn off_diag_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * m[i * n + j] * m[i * n + j];
        }
    }
    s.sqrt()
}

/// Symmetric eigen-decomposition by cyclic Jacobi sweeps.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomposition> {
    let n = a.order();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    jacobi(a.to_row_major(), v, n, a.frobenius())
}

/// Same as [`sym_eig`], but starts from an orthonormal `basis` (row-major,
/// columns are basis vectors). When the basis nearly diagonalizes `a`,
/// only one or two sweeps are needed.
pub fn sym_eig_with_basis(a: &SymMatrix, basis: &[f64]) -> Result<EigDecomposition> {
    let n = a.order();
    check_len(n * n, basis.len())?;
    let full = a.to_row_major();
    // B = Qᵀ A Q
    let mut aq = vec![0.0; n * n];
    for i in 0..n {
        let arow = &full[i * n..(i + 1) * n];
        let out = &mut aq[i * n..(i + 1) * n];
        for (k, aik) in arow.iter().enumerate() {
            if *aik != 0.0 {
                axpy(*aik, &basis[k * n..(k + 1) * n], out);
            }
        }
    }
    let mut b = vec![0.0; n * n];
    for k in 0..n {
        let qrow = &basis[k * n..(k + 1) * n];
        let aqrow = &aq[k * n..(k + 1) * n];
        for i in 0..n {
            let qki = qrow[i];
            if qki == 0.0 {
                continue;
            }
            let out = &mut b[i * n..(i + 1) * n];
            axpy(qki, aqrow, out);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (b[i * n + j] + b[j * n + i]);
            b[i * n + j] = s;
            b[j * n + i] = s;
        }
    }
    jacobi(b, basis.to_vec(), n, a.frobenius())
}

fn jacobi(mut m: Vec<f64>, mut v: Vec<f64>, n: usize, scale: f64) -> Result<EigDecomposition> {
    let tol = JACOBI_TOL * scale;
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diag_norm(&m, n) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    let nrp = c * arp - s * arq;
                    let nrq = s * arp + c * arq;
                    m[r * n + p] = nrp;
                    m[p * n + r] = nrp;
                    m[r * n + q] = nrq;
                    m[q * n + r] = nrq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        let residual = off_diag_norm(&m, n);
        if residual > tol {
            return Err(Error::EigNoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| m[a * n + a].total_cmp(&m[b * n + b]));
    let eigenvalues = idx.iter().map(|&k| m[k * n + k]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (newj, &oldj) in idx.iter().enumerate() {
        for i in 0..n {
            eigenvectors[i * n + newj] = v[i * n + oldj];
        }
    }
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Projection onto the PSD cone: negative eigenvalues clipped to zero.
pub fn psd_project(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(psd_part(&sym_eig(a)?))
}

/// `QΛ₊Qᵀ` from an existing decomposition.
pub fn psd_part(eig: &EigDecomposition) -> SymMatrix {
    eig.reconstruct_with(|l| l.max(0.0))
}

/// Symmetric vectorization with off-diagonals scaled by √2, so that
/// `⟨svec(A), svec(B)⟩ = trace(AB)`.
pub fn svec(a: &SymMatrix) -> DenseVector {
    let n = a.order();
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        out.push(a.get(i, i));
        for j in (i + 1)..n {
            out.push(std::f64::consts::SQRT_2 * a.get(i, j));
        }
    }
    DenseVector(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let n = order_from_packed_len(v.len()).ok_or_else(|| {
        Error::Validation(format!("length {} is not a triangular number", v.len()))
    })?;
    let mut packed = Vec::with_capacity(v.len());
    let mut k = 0;
    for i in 0..n {
        packed.push(v[k]);
        k += 1;
        for _ in (i + 1)..n {
            packed.push(v[k] / std::f64::consts::SQRT_2);
            k += 1;
        }
    }
    SymMatrix::from_packed(n, packed)
}

/// Cholesky factor `A = LLᵀ`, kept for repeated solves.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Lower triangle packed by rows: row `i` holds `L[i][0..=i]`.
    l: Vec<f64>,
}

/// Dot product with four partial sums.
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        Self::factor_row_major(a.order(), a.to_row_major())
    }

    /// Factors a full row-major symmetric array (only the lower triangle is
    /// read).
    pub fn factor_row_major(n: usize, a: Vec<f64>) -> Result<Self> {
        check_len(n * n, a.len())?;
        let row = |i: usize| i * (i + 1) / 2;
        let mut l = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (row(i), row(j));
                let s = a[i * n + j] - dot_unrolled(&l[ri..ri + j], &l[rj..rj + j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: j, pivot: s });
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.l;
        for i in 0..self.n {
            let r = i * (i + 1) / 2;
            let s = x[i] - dot_unrolled(&l[r..r + i], &x[..i]);
            x[i] = s / l[r + i];
        }
        for i in (0..self.n).rev() {
            let r = i * (i + 1) / 2;
            let xi = x[i] / l[r + i];
            x[i] = xi;
            for (xj, lij) in x[..i].iter_mut().zip(&l[r..r + i]) {
                *xj -= lij * xi;
            }
        }
    }
}

/// Solves `Ax = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<DenseVector> {
    check_len(a.order(), b.len())?;
    let chol = Cholesky::factor(a)?;
    DenseVector::new(chol.solve(b))
}
