//! Conic solver for `min cᵀx s.t. Ax = b, x ∈ K`, where
//! `K = R₊^{n₁} × S₊^p` and the PSD block is stored as `svec` (upper
//! triangle, row-major, off-diagonals scaled by √2).
//!
//! The method is ADMM on the splitting `x ∈ {Ax = b}`, `z ∈ K`, `x = z`,
//! after Ruiz equilibration. The affine projection reuses one Cholesky
//! factor of `AAᵀ` for every penalty value, so the penalty adapts freely.
//!
//! Instance JSON:
//!
//! ```json
//! {
//!   "objective": [c_1, ...],
//!   "constraints": { "rows": m, "cols": n, "data": [row-major A] },
//!   "rhs": [b_1, ...],
//!   "cone": { "nonneg": n1, "psd_order": p }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, norm2, packed_len, psd_part, smat, svec, sym_eig, sym_eig_with_basis, Cholesky, Matrix,
};

/// Largest PSD block accepted.
pub const MAX_PSD_ORDER: usize = 128;

const GAP_RULE_EVERY: usize = 500;
const GAP_RULE_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub psd_order: usize,
}

impl ConeLayout {
    pub fn dim(&self) -> usize {
        self.nonneg + packed_len(self.psd_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpInstance {
    pub objective: Vec<f64>,
    pub constraints: SparseMatrix,
    pub rhs: Vec<f64>,
    pub cone: ConeLayout,
}

impl SdpInstance {
    pub fn new(
        objective: Vec<f64>,
        constraints: impl Into<SparseMatrix>,
        rhs: Vec<f64>,
        cone: ConeLayout,
    ) -> Result<Self> {
        let inst = Self {
            objective,
            constraints: constraints.into(),
            rhs,
            cone,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cone.dim();
        if self.cone.psd_order > MAX_PSD_ORDER {
            return Err(Error::Validation(format!(
                "PSD block of order {} exceeds the limit {MAX_PSD_ORDER}",
                self.cone.psd_order
            )));
        }
        let a = &self.constraints;
        if self.objective.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.objective.len(),
            });
        }
        if a.cols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.cols(),
            });
        }
        if self.rhs.len() != a.rows() {
            return Err(Error::Dimension {
                expected: a.rows(),
                got: self.rhs.len(),
            });
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !a.values().all(f64::is_finite) || !finite(&self.rhs) {
            return Err(Error::NonFinite("SDP instance"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Validation(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    /// Target for the relative primal, dual and gap residuals.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Initial penalty (scaled problem).
    pub rho: f64,
    pub adaptive_rho: bool,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    pub ruiz_iters: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iter: 200_000,
            relaxation: 1.5,
            rho: 1.0,
            adaptive_rho: true,
            check_every: 25,
            ruiz_iters: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Solved,
    MaxIter,
    InfeasibleSuspected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    /// Primal point, exactly in `K`.
    pub primal: Vec<f64>,
    /// Equality multipliers `y`.
    pub dual: Vec<f64>,
    /// Dual slack `s ∈ K` with `Aᵀy + s ≈ c`.
    pub dual_slack: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// Starting point for [`solve_conic_warm`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub primal: Vec<f64>,
    pub dual_slack: Vec<f64>,
}

impl From<&SdpSolution> for WarmStart {
    fn from(s: &SdpSolution) -> Self {
        Self {
            primal: s.primal.clone(),
            dual_slack: s.dual_slack.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(‖Ax − b‖, dist(x, K)) / (1 + ‖b‖)`
    pub primal: f64,
    /// `dist(c − Aᵀy, K) / (1 + ‖c‖)`
    pub dual: f64,
    /// `|cᵀx − bᵀy| / (1 + |cᵀx| + |bᵀy|)`
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Euclidean projection onto `K`, in place. `basis` carries eigenvectors
/// between calls to speed up the eigensolver.
fn project_cone(cone: &ConeLayout, v: &mut [f64], basis: &mut Option<Vec<f64>>) -> Result<()> {
    for x in &mut v[..cone.nonneg] {
        *x = x.max(0.0);
    }
    if cone.psd_order == 0 {
        return Ok(());
    }
    let block = &mut v[cone.nonneg..];
    let m = smat(block)?;
    let eig = match basis.as_deref() {
        Some(q) => sym_eig_with_basis(&m, q)?,
        None => sym_eig(&m)?,
    };
    let p = svec(&psd_part(&eig));
    block.copy_from_slice(&p);
    *basis = Some(eig.eigenvectors);
    Ok(())
}

fn cone_distance(cone: &ConeLayout, v: &[f64]) -> Result<f64> {
    let mut p = v.to_vec();
    project_cone(cone, &mut p, &mut None)?;
    Ok(norm2(
        &v.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ))
}

fn residuals_from_products(
    inst: &SdpInstance,
    x: &[f64],
    y: &[f64],
    ax: &[f64],
    aty: &[f64],
) -> Result<Residuals> {
    let c = &inst.objective;
    let b = &inst.rhs;
    let r: Vec<f64> = ax.iter().zip(b).map(|(u, v)| u - v).collect();
    let primal = norm2(&r).max(cone_distance(&inst.cone, x)?) / (1.0 + norm2(b));
    let w: Vec<f64> = c.iter().zip(aty).map(|(u, v)| u - v).collect();
    let dual = cone_distance(&inst.cone, &w)? / (1.0 + norm2(c));
    let (pc, db) = (dot(c, x), dot(b, y));
    let gap = (pc - db).abs() / (1.0 + pc.abs() + db.abs());
    Ok(Residuals { primal, dual, gap })
}

/// Relative residuals of a candidate primal-dual pair.
pub fn residuals(inst: &SdpInstance, x: &[f64], y: &[f64]) -> Result<Residuals> {
    inst.validate()?;
    if x.len() != inst.cone.dim() {
        return Err(Error::Dimension {
            expected: inst.cone.dim(),
            got: x.len(),
        });
    }
    if y.len() != inst.rhs.len() {
        return Err(Error::Dimension {
            expected: inst.rhs.len(),
            got: y.len(),
        });
    }
    let ax = inst.constraints.matvec(x);
    let aty = inst.constraints.matvec_t(y);
    residuals_from_products(inst, x, y, &ax, &aty)
}

/// Column-compressed sparse matrix. Serializes as a dense [`Matrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseRepr", into = "DenseRepr")]
pub struct SparseMatrix {
    rows: usize,
    /// per column: (row, value), rows ascending
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols: vec![Vec::new(); cols],
        }
    }

    pub fn from_dense(a: &Matrix) -> Self {
        let mut cols = vec![Vec::new(); a.cols()];
        for i in 0..a.rows() {
            for (j, &v) in a.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        Self {
            rows: a.rows(),
            cols,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Adds `v` to entry `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows, "row {i} out of range");
        let col = &mut self.cols[j];
        match col.binary_search_by_key(&i, |&(r, _)| r) {
            Ok(p) => col[p].1 += v,
            Err(p) => col.insert(p, (i, v)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let col = &self.cols[j];
        col.binary_search_by_key(&i, |&(r, _)| r)
            .map(|p| col[p].1)
            .unwrap_or(0.0)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cols.iter().flat_map(|c| c.iter().map(|&(_, v)| v))
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (col, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &(i, v) in col {
                    out[i] += v * xj;
                }
            }
        }
    }

    pub fn matvec_t_into(&self, y: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(&self.cols) {
            *o = col.iter().map(|&(i, v)| v * y[i]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols.len()];
        self.matvec_t_into(y, &mut out);
        out
    }

    /// Row-major dense `AAᵀ`.
    fn gram_outer(&self) -> Vec<f64> {
        let m = self.rows;
        let mut g = vec![0.0; m * m];
        for col in &self.cols {
            for &(i, vi) in col {
                for &(k, vk) in col {
                    if k <= i {
                        g[i * m + k] += vi * vk;
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..i {
                g[k * m + i] = g[i * m + k];
            }
        }
        g
    }
}

impl From<&Matrix> for SparseMatrix {
    fn from(a: &Matrix) -> Self {
        Self::from_dense(a)
    }
}

impl From<Matrix> for SparseMatrix {
    fn from(a: Matrix) -> Self {
        Self::from_dense(&a)
    }
}

impl From<SparseMatrix> for Matrix {
    fn from(a: SparseMatrix) -> Self {
        a.to_dense()
    }
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<DenseRepr> for SparseMatrix {
    type Error = Error;

    fn try_from(d: DenseRepr) -> Result<Self> {
        if d.data.len() != d.rows * d.cols {
            return Err(Error::Dimension {
                expected: d.rows * d.cols,
                got: d.data.len(),
            });
        }
        let mut cols = vec![Vec::new(); d.cols];
        for i in 0..d.rows {
            for (j, &v) in d.data[i * d.cols..(i + 1) * d.cols].iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        Ok(Self { rows: d.rows, cols })
    }
}

impl From<SparseMatrix> for DenseRepr {
    fn from(a: SparseMatrix) -> Self {
        let m = a.to_dense();
        DenseRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
    }
}

/// Ruiz scaling: `Ã = D A E`, `c̃ = σ E c`, `b̃ = D b`. The PSD block shares
/// one column factor so the cone is preserved.
struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    sigma: f64,
}

fn equilibrate(a: &SparseMatrix, cone: &ConeLayout, c: &[f64], iters: usize) -> Scaling {
    let (m, n) = (a.rows, a.cols.len());
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let inv_sqrt = |v: f64| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 };
    for _ in 0..iters {
        let mut rn = vec![0.0f64; m];
        let mut cn = vec![0.0f64; n];
        for (j, col) in a.cols.iter().enumerate() {
            for &(i, v) in col {
                let s = (d[i] * v * e[j]).abs();
                rn[i] = rn[i].max(s);
                cn[j] = cn[j].max(s);
            }
        }
        for i in 0..m {
            d[i] *= inv_sqrt(rn[i]);
        }
        for j in 0..cone.nonneg {
            e[j] *= inv_sqrt(cn[j]);
        }
        if n > cone.nonneg {
            let block = cn[cone.nonneg..].iter().copied().fold(0.0, f64::max);
            let f = inv_sqrt(block);
            e[cone.nonneg..].iter_mut().for_each(|v| *v *= f);
        }
    }
    let ec = c
        .iter()
        .zip(&e)
        .map(|(ci, ei)| (ci * ei).abs())
        .fold(0.0, f64::max);
    let sigma = if ec > 0.0 { 1.0 / ec.max(1e-6) } else { 1.0 };
    Scaling { d, e, sigma }
}

pub fn solve_conic(inst: &SdpInstance, settings: &SdpSettings) -> Result<SdpSolution> {
    solve_conic_warm(inst, settings, None)
}

pub fn solve_conic_warm(
    inst: &SdpInstance,
    settings: &SdpSettings,
    warm: Option<&WarmStart>,
) -> Result<SdpSolution> {
    inst.validate()?;
    if !(settings.relaxation > 0.0 && settings.relaxation < 2.0) {
        return Err(Error::Validation("relaxation must lie in (0, 2)".into()));
    }
    if !(settings.tolerance > 0.0) || !(settings.rho > 0.0) || settings.check_every == 0 {
        return Err(Error::Validation(
            "tolerance, rho and check interval must be positive".into(),
        ));
    }
    let cone = inst.cone;
    let n = cone.dim();
    let m = inst.rhs.len();
    let orig = &inst.constraints;
    let sc = equilibrate(orig, &cone, &inst.objective, settings.ruiz_iters);

    // scaled data
    let mut a = orig.clone();
    for (j, col) in a.cols.iter_mut().enumerate() {
        for (i, v) in col.iter_mut() {
            *v *= sc.d[*i] * sc.e[j];
        }
    }
    let c: Vec<f64> = (0..n)
        .map(|j| sc.sigma * sc.e[j] * inst.objective[j])
        .collect();
    let b: Vec<f64> = (0..m).map(|i| sc.d[i] * inst.rhs[i]).collect();
    let chol = if m > 0 {
        Some(
            Cholesky::factor_row_major(m, a.gram_outer()).map_err(|_| Error::Solver {
                reason: "equality constraints are rank deficient".into(),
                primal: f64::NAN,
                dual: f64::NAN,
                gap: f64::NAN,
            })?,
        )
    } else {
        None
    };

    let mut rho = settings.rho;
    let alpha = settings.relaxation;
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    if let Some(w) = warm {
        if w.primal.len() != n || w.dual_slack.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: w.primal.len(),
            });
        }
        for j in 0..n {
            z[j] = w.primal[j] / sc.e[j];
            u[j] = -sc.sigma * sc.e[j] * w.dual_slack[j] / rho;
        }
        project_cone(&cone, &mut z, &mut None)?;
    }

    let mut basis: Option<Vec<f64>> = None;
    let mut v = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; m];
    let mut atnu = vec![0.0; n];
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut last: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Residuals)> = None;
    let mut iter = 0;
    let mut last_gap_bump = 0;

    // ỹ = (ÃÃᵀ)⁻¹ Ã(c̃ − s̃) with s̃ = −ρu; returns (x, y, s) in original units
    let recover = |z: &[f64], u: &[f64], rho: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s_t: Vec<f64> = u.iter().map(|ui| -rho * ui).collect();
        let mut y_t = vec![0.0; m];
        if let Some(ch) = &chol {
            let w: Vec<f64> = c.iter().zip(&s_t).map(|(ci, si)| ci - si).collect();
            a.matvec_into(&w, &mut y_t);
            ch.solve_in_place(&mut y_t);
        }
        let xo: Vec<f64> = (0..n).map(|j| sc.e[j] * z[j]).collect();
        let yo: Vec<f64> = (0..m).map(|i| sc.d[i] * y_t[i] / sc.sigma).collect();
        let so: Vec<f64> = (0..n).map(|j| s_t[j] / (sc.e[j] * sc.sigma)).collect();
        (xo, yo, so)
    };

    while iter < settings.max_iter {
        iter += 1;
        for j in 0..n {
            v[j] = z[j] - u[j] - c[j] / rho;
        }
        if let Some(ch) = &chol {
            a.matvec_into(&v, &mut r);
            r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri -= bi);
            ch.solve_in_place(&mut r);
            a.matvec_t_into(&r, &mut atnu);
            for j in 0..n {
                x[j] = v[j] - atnu[j];
            }
        } else {
            x.copy_from_slice(&v);
        }
        // z ← Π_K(x̂ + u), u ← x̂ + u − z; v holds x̂ + u
        for j in 0..n {
            v[j] = alpha * x[j] + (1.0 - alpha) * z[j] + u[j];
        }
        z.copy_from_slice(&v);
        project_cone(&cone, &mut z, &mut basis)?;
        for j in 0..n {
            u[j] = v[j] - z[j];
        }
        if z.iter().any(|t| !t.is_finite()) || u.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical {
                step: iter,
                reason: "ADMM iterates became non-finite".into(),
            });
        }

        if iter % settings.check_every == 0 || iter == settings.max_iter {
            let (xo, yo, so) = recover(&z, &u, rho);
            let mut ax = vec![0.0; m];
            orig.matvec_into(&xo, &mut ax);
            let mut aty = vec![0.0; n];
            orig.matvec_t_into(&yo, &mut aty);
            let res = residuals_from_products(inst, &xo, &yo, &ax, &aty)?;
            let growth = res.max().max(norm2(&so) / (1.0 + norm2(&inst.objective)));
            last = Some((xo, yo, so, res));
            if res.max() <= settings.tolerance {
                status = SdpStatus::Solved;
                break;
            }
            if iter >= 2000 {
                if let Some(&(_, old)) = history.iter().rev().find(|(k, _)| iter - k >= 1000) {
                    if growth > 10.0 * old && growth > 1e3 * settings.tolerance {
                        status = SdpStatus::InfeasibleSuspected;
                        break;
                    }
                }
            }
            history.push((iter, growth));
            if settings.adaptive_rho && res.dual > 0.0 && res.primal > 0.0 {
                let mut f = (res.primal / res.dual).sqrt().clamp(0.1, 10.0);
                // stalled gap with small feasibility residuals: raise the penalty
                let gap_stalled = iter - last_gap_bump >= GAP_RULE_EVERY
                    && res.gap > 10.0 * res.primal.max(res.dual);
                if gap_stalled {
                    f = GAP_RULE_FACTOR;
                    last_gap_bump = iter;
                }
                if gap_stalled || !(0.2..=5.0).contains(&f) {
                    let new_rho = (rho * f).clamp(1e-6, 1e6);
                    let scale = rho / new_rho;
                    u.iter_mut().for_each(|t| *t *= scale);
                    rho = new_rho;
                }
            }
        }
    }
    let (primal, dual, dual_slack, residuals) = last.expect("at least one residual check");
    Ok(SdpSolution {
        objective: dot(&inst.objective, &primal),
        primal,
        dual,
        dual_slack,
        residuals,
        iterations: iter,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{EigDecomposition, SymMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R2: f64 = std::f64::consts::SQRT_2;

    fn solve(inst: &SdpInstance) -> SdpSolution {
        solve_conic(inst, &SdpSettings::default()).unwrap()
    }

    #[test]
    fn orthant_only() {
        let inst = SdpInstance::new(
            vec![1.0],
            Matrix::zeros(0, 1),
            vec![],
            ConeLayout {
                nonneg: 1,
                psd_order: 0,
            },
        )
        .unwrap();
        let s = solve(&inst);
        assert_eq!(s.status, SdpStatus::Solved);
        assert!(s.objective.abs() <= 1e-6);
    }

    #[test]
    fn two_by_two_example() {
        // min X11 s.t. X12 = 1, X22 = 1
        let a = Matrix::from_rows(&[vec![0.0, 1.0 / R2, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let inst = SdpInstance::new(
            vec![1.0, 0.0, 0.0],
            a,
            vec![1.0, 1.0],
            ConeLayout {
                nonneg: 0,
                psd_order: 2,
            },
        )
        .unwrap();
        let s = solve(&inst);
        assert_eq!(s.status, SdpStatus::Solved);
        assert!((s.objective - 1.0).abs() <= 1e-6, "{}", s.objective);
    }

    #[test]
    fn trace_with_diagonal_floor() {
        // min tr X s.t. X_ii − t_i = i, t ≥ 0
        let mut a = Matrix::zeros(3, 3 + 6);
        let diag = [0, 3, 5];
        for i in 0..3 {
            a.set(i, i, -1.0);
            a.set(i, 3 + diag[i], 1.0);
        }
        let mut c = vec![0.0; 9];
        for d in diag {
            c[3 + d] = 1.0;
        }
        let inst = SdpInstance::new(
            c,
            a,
            vec![1.0, 2.0, 3.0],
            ConeLayout {
                nonneg: 3,
                psd_order: 3,
            },
        )
        .unwrap();
        let s = solve(&inst);
        assert_eq!(s.status, SdpStatus::Solved);
        assert!((s.objective - 6.0).abs() <= 1e-5, "{}", s.objective);
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> EigDecomposition {
        let mut m = SymMatrix::zeros(p);
        for i in 0..p {
            for j in i..p {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        sym_eig(&m).unwrap()
    }

    /// Instance with known optimum built from complementary `x*`, `s*`.
    pub(crate) fn constructed(seed: u64) -> (SdpInstance, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n1, p, m) = (3, 4, 6);
        let q = random_orthogonal(&mut rng, p);
        let rank = 2;
        let lx: Vec<f64> = (0..p)
            .map(|i| {
                if i < rank {
                    rng.gen_range(0.5..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        let ls: Vec<f64> = (0..p)
            .map(|i| {
                if i < rank {
                    0.0
                } else {
                    rng.gen_range(0.5..2.0)
                }
            })
            .collect();
        let xm = EigDecomposition {
            eigenvalues: lx,
            eigenvectors: q.eigenvectors.clone(),
        }
        .reconstruct();
        let sm = EigDecomposition {
            eigenvalues: ls,
            eigenvectors: q.eigenvectors,
        }
        .reconstruct();
        let mut xs = vec![rng.gen_range(0.5..1.5), 0.0, rng.gen_range(0.5..1.5)];
        let mut ss = vec![0.0, rng.gen_range(0.5..1.5), 0.0];
        xs.extend(svec(&xm).iter());
        ss.extend(svec(&sm).iter());
        let n = n1 + packed_len(p);
        let a = Matrix::new(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&xs);
        let c: Vec<f64> = a.matvec_t(&y).iter().zip(&ss).map(|(u, v)| u + v).collect();
        let opt = dot(&c, &xs);
        (
            SdpInstance::new(
                c,
                a,
                b,
                ConeLayout {
                    nonneg: n1,
                    psd_order: p,
                },
            )
            .unwrap(),
            opt,
        )
    }

    #[test]
    fn constructed_optima() {
        for seed in 0..10 {
            let (inst, opt) = constructed(seed);
            let s = solve(&inst);
            assert_eq!(s.status, SdpStatus::Solved, "seed {seed}");
            assert!(
                (s.objective - opt).abs() <= 1e-5 * (1.0 + opt.abs()),
                "seed {seed}: {} vs {opt}",
                s.objective
            );
            // the reported residuals agree with an independent evaluation
            let r = residuals(&inst, &s.primal, &s.dual).unwrap();
            assert!(r.max() <= 1e-7);
            // primal and dual slack are in the cone
            assert!(cone_distance(&inst.cone, &s.primal).unwrap() <= 1e-9);
            assert!(cone_distance(&inst.cone, &s.dual_slack).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn warm_start_converges_faster() {
        let (inst, _) = constructed(3);
        let cold = solve(&inst);
        let warm = solve_conic_warm(
            &inst,
            &SdpSettings::default(),
            Some(&WarmStart::from(&cold)),
        )
        .unwrap();
        assert_eq!(warm.status, SdpStatus::Solved);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn infeasible_is_flagged() {
        // x ≥ 0 and x = −1
        let inst = SdpInstance::new(
            vec![1.0],
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![-1.0],
            ConeLayout {
                nonneg: 1,
                psd_order: 0,
            },
        )
        .unwrap();
        let s = solve_conic(
            &inst,
            &SdpSettings {
                max_iter: 20_000,
                ..SdpSettings::default()
            },
        )
        .unwrap();
        assert_ne!(s.status, SdpStatus::Solved);
    }

    #[test]
    fn validation_errors() {
        let too_big = ConeLayout {
            nonneg: 0,
            psd_order: 129,
        };
        let n = too_big.dim();
        assert!(matches!(
            SdpInstance::new(vec![0.0; n], Matrix::zeros(0, n), vec![], too_big),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            SdpInstance::new(
                vec![0.0; 2],
                Matrix::zeros(0, 3),
                vec![],
                ConeLayout {
                    nonneg: 3,
                    psd_order: 0
                }
            ),
            Err(Error::Dimension { .. })
        ));
        let dup = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let inst = SdpInstance::new(
            vec![0.0, 0.0],
            dup,
            vec![1.0, 2.0],
            ConeLayout {
                nonneg: 2,
                psd_order: 0,
            },
        )
        .unwrap();
        assert!(matches!(
            solve_conic(&inst, &SdpSettings::default()),
            Err(Error::Solver { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let (inst, _) = constructed(1);
        let back = SdpInstance::from_json_str(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        assert!(SdpInstance::from_json_str("{\"objective\": [1]}").is_err());
    }
}
