//! Smooth convex test objectives with exact gradients, certified Lipschitz
//! constants, reference optima, and JSON ingestion.
//!
//! Problem files look like
//!
//! ```json
//! {
//!   "kind": "quadratic",
//!   "dimension": 2,
//!   "data": { "Q": [1, 0, 0, 4], "q": [-1, 0] },
//!   "set": { "tag": "box", "lower": [0, 0], "upper": [1, 1] },
//!   "geometry": "euclidean",
//!   "x0": [0.5, 0.5]
//! }
//! ```
//!
//! Matrices are flat row-major arrays. `least_squares` and `log_sum_exp`
//! take `{"A": [...], "b": [...]}` (plus `"temperature"` for the latter);
//! the row count is `len(b)`. Sets are `whole_space`, `box` (`lower`,
//! `upper`), `ball` (`center`, `radius`) and `simplex`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agd::{make_schedule, AgdStepper, ScheduleName};
use crate::error::{Error, Result};
use crate::geometry::{project, Dgf, FeasibleSet, Geometry, NormKind, FEAS_TOL};
use crate::linalg::{dot, norm2, norm_inf, solve_spd, sym_eig, DenseVector, Matrix, SymMatrix};

/// Iteration budget for long-run reference optima.
pub const LONG_RUN_ITERS: usize = 100_000;
/// Long runs stop early once the certified enclosure of `f*` is this tight.
pub const LONG_RUN_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    /// `½ xᵀQx + qᵀx`
    Quadratic { q_mat: SymMatrix, q: DenseVector },
    /// `½ ‖Ax − b‖₂²`
    LeastSquares { a: Matrix, b: DenseVector },
    /// `t · ln Σᵢ exp((aᵢᵀx − bᵢ)/t)`
    LogSumExp {
        a: Matrix,
        b: DenseVector,
        temperature: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    dim: usize,
}

impl Objective {
    pub fn quadratic(q_mat: SymMatrix, q: Vec<f64>) -> Result<Self> {
        let dim = q_mat.order();
        if q.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: q.len(),
            });
        }
        let eig = sym_eig(&q_mat)?;
        if eig.min_eigenvalue() < -1e-10 * (1.0 + q_mat.frobenius()) {
            return Err(Error::Validation(format!(
                "quadratic is not convex (min eigenvalue {:e})",
                eig.min_eigenvalue()
            )));
        }
        Ok(Self {
            kind: ObjectiveKind::Quadratic {
                q_mat,
                q: DenseVector::new(q)?,
            },
            dim,
        })
    }

    pub fn least_squares(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension {
                expected: a.rows(),
                got: b.len(),
            });
        }
        let dim = a.cols();
        Ok(Self {
            kind: ObjectiveKind::LeastSquares {
                a,
                b: DenseVector::new(b)?,
            },
            dim,
        })
    }

    pub fn log_sum_exp(a: Matrix, b: Vec<f64>, temperature: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension {
                expected: a.rows(),
                got: b.len(),
            });
        }
        if a.rows() == 0 {
            return Err(Error::Validation(
                "log-sum-exp needs at least one row".into(),
            ));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::Validation("temperature must be positive".into()));
        }
        let dim = a.cols();
        Ok(Self {
            kind: ObjectiveKind::LogSumExp {
                a,
                b: DenseVector::new(b)?,
                temperature,
            },
            dim,
        })
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind_tag(&self) -> &'static str {
        match self.kind {
            ObjectiveKind::Quadratic { .. } => "quadratic",
            ObjectiveKind::LeastSquares { .. } => "least_squares",
            ObjectiveKind::LogSumExp { .. } => "log_sum_exp",
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Softmax weights and the shifted log-partition for log-sum-exp.
    fn lse_parts(a: &Matrix, b: &[f64], t: f64, x: &[f64]) -> (Vec<f64>, f64) {
        let z: Vec<f64> = a
            .matvec(x)
            .iter()
            .zip(b)
            .map(|(v, bi)| (v - bi) / t)
            .collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        (p, t * (m + s.ln()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.kind {
            ObjectiveKind::Quadratic { q_mat, q } => 0.5 * q_mat.quad_form(x) + dot(q, x),
            ObjectiveKind::LeastSquares { a, b } => {
                let r: Vec<f64> = a
                    .matvec(x)
                    .iter()
                    .zip(b.iter())
                    .map(|(u, v)| u - v)
                    .collect();
                0.5 * dot(&r, &r)
            }
            ObjectiveKind::LogSumExp { a, b, temperature } => {
                Self::lse_parts(a, b, *temperature, x).1
            }
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<DenseVector> {
        self.check(x)?;
        let g = match &self.kind {
            ObjectiveKind::Quadratic { q_mat, q } => {
                let mut g = q_mat.matvec(x);
                g.iter_mut().zip(q.iter()).for_each(|(gi, qi)| *gi += qi);
                g
            }
            ObjectiveKind::LeastSquares { a, b } => {
                let r: Vec<f64> = a
                    .matvec(x)
                    .iter()
                    .zip(b.iter())
                    .map(|(u, v)| u - v)
                    .collect();
                a.matvec_t(&r)
            }
            ObjectiveKind::LogSumExp { a, b, temperature } => {
                let (p, _) = Self::lse_parts(a, b, *temperature, x);
                a.matvec_t(&p)
            }
        };
        DenseVector::new(g).map_err(|_| Error::Numerical {
            step: 0,
            reason: "non-finite gradient".into(),
        })
    }

    /// `(H, c)` with `f(x) = ½xᵀHx + cᵀx + const` for quadratic-type objectives.
    fn quadratic_model(&self) -> Option<(SymMatrix, Vec<f64>)> {
        match &self.kind {
            ObjectiveKind::Quadratic { q_mat, q } => Some((q_mat.clone(), q.to_vec())),
            ObjectiveKind::LeastSquares { a, b } => {
                Some((a.gram(), a.matvec_t(b).iter().map(|v| -v).collect()))
            }
            ObjectiveKind::LogSumExp { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCert {
    pub norm: NormKind,
    pub value: f64,
}

/// Certified upper bound on the gradient Lipschitz constant in `norm`
/// (measured against its dual norm). Curvature-free objectives report 1,
/// since any positive value bounds a zero constant.
pub fn lipschitz(obj: &Objective, norm: NormKind) -> Result<LipschitzCert> {
    let value = match (&obj.kind, norm) {
        (ObjectiveKind::Quadratic { q_mat, .. }, NormKind::Euclidean) => {
            sym_eig(q_mat)?.max_eigenvalue()
        }
        (ObjectiveKind::Quadratic { q_mat, .. }, NormKind::Ell1) => q_mat.max_abs(),
        (ObjectiveKind::LeastSquares { a, .. }, NormKind::Euclidean) => {
            sym_eig(&a.gram())?.max_eigenvalue()
        }
        (ObjectiveKind::LeastSquares { a, .. }, NormKind::Ell1) => a.gram().max_abs(),
        (ObjectiveKind::LogSumExp { a, temperature, .. }, NormKind::Euclidean) => {
            (0..a.rows())
                .map(|i| dot(a.row(i), a.row(i)))
                .fold(0.0, f64::max)
                / temperature
        }
        (ObjectiveKind::LogSumExp { a, temperature, .. }, NormKind::Ell1) => {
            let m = (0..a.rows())
                .map(|i| norm_inf(a.row(i)))
                .fold(0.0, f64::max);
            m * m / temperature
        }
    };
    let value = if value > 0.0 { value } else { 1.0 };
    Ok(LipschitzCert { norm, value })
}

/// Largest per-coordinate relative error between central differences and
/// the analytic gradient, relative to `max(1, |∂ᵢf|)`.
pub fn finite_diff_check(obj: &Objective, x: &[f64], h: f64) -> Result<f64> {
    let g = obj.grad(x)?;
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = obj.eval(&xp)?;
        xp[i] = x[i] - h;
        let fm = obj.eval(&xp)?;
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumMethod {
    ClosedForm,
    LongRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum {
    pub point: DenseVector,
    /// `f(point)`, an upper bound on `f*`.
    pub value: f64,
    pub method: OptimumMethod,
    /// `value − f*` is at most this (zero for closed forms).
    pub enclosure: f64,
}

/// Minimizer of `½xᵀHx + cᵀx` over the whole space via the pseudo-inverse.
fn unconstrained_quadratic_min(h: &SymMatrix, c: &[f64]) -> Result<Vec<f64>> {
    let eig = sym_eig(h)?;
    let n = h.order();
    let cut = 1e-12 * (1.0 + eig.max_eigenvalue().abs());
    let mut x = vec![0.0; n];
    for j in 0..n {
        let lam = eig.eigenvalues[j];
        if lam <= cut {
            continue;
        }
        let v = eig.vector(j);
        let coef = -dot(&v, c) / lam;
        x.iter_mut().zip(&v).for_each(|(xi, vi)| *xi += coef * vi);
    }
    let mut r = h.matvec(&x);
    r.iter_mut().zip(c).for_each(|(ri, ci)| *ri += ci);
    if norm2(&r) > 1e-9 * (1.0 + norm2(c)) {
        return Err(Error::Unbounded(format!(
            "linear term has a component outside the range of the Hessian (residual {:e})",
            norm2(&r)
        )));
    }
    Ok(x)
}

/// Reference optimum of `obj` over the geometry's feasible set.
///
/// Closed forms are used for whole-space quadratics, for constrained
/// quadratics whose unconstrained minimizer lies strictly inside the set,
/// and for diagonal quadratics on boxes. Everything else runs AGD with the
/// `s2` schedule, tracking a Frank-Wolfe lower bound on `f*` so the result
/// comes with a certified enclosure (bounded sets only).
pub fn reference_optimum(obj: &Objective, geom: &Geometry) -> Result<ReferenceOptimum> {
    if obj.dim() != geom.dim() {
        return Err(Error::Dimension {
            expected: geom.dim(),
            got: obj.dim(),
        });
    }
    if let Some((h, c)) = obj.quadratic_model() {
        let closed = |p: Vec<f64>| -> Result<ReferenceOptimum> {
            let value = obj.eval(&p)?;
            Ok(ReferenceOptimum {
                point: DenseVector::new(p)?,
                value,
                method: OptimumMethod::ClosedForm,
                enclosure: 0.0,
            })
        };
        match &geom.set {
            FeasibleSet::WholeSpace { .. } => return closed(unconstrained_quadratic_min(&h, &c)?),
            FeasibleSet::Box { lower, upper } if is_diagonal(&h) => {
                let mut p = vec![0.0; h.order()];
                let mut ok = true;
                for i in 0..p.len() {
                    let hii = h.get(i, i);
                    p[i] = if hii > 0.0 {
                        (-c[i] / hii).clamp(lower[i], upper[i])
                    } else if c[i] > 0.0 {
                        lower[i]
                    } else if c[i] < 0.0 {
                        upper[i]
                    } else {
                        ok = ok && lower[i].is_finite();
                        lower[i]
                    };
                }
                if ok {
                    return closed(p);
                }
            }
            FeasibleSet::Simplex { .. } => {
                if let Some(p) = simplex_hull_min(&h, &c) {
                    return closed(p);
                }
            }
            _ => {
                if let Ok(p) = unconstrained_quadratic_min(&h, &c) {
                    if strictly_inside(&geom.set, &p) {
                        return closed(p);
                    }
                }
            }
        }
    }
    long_run_optimum(obj, geom)
}

/// Minimizer of `½xᵀHx + cᵀx` on `{1ᵀx = 1}` when `H ≻ 0` and the
/// minimizer is strictly positive.
fn simplex_hull_min(h: &SymMatrix, c: &[f64]) -> Option<Vec<f64>> {
    let n = h.order();
    let ones = vec![1.0; n];
    let hc = solve_spd(h, c).ok()?;
    let h1 = solve_spd(h, &ones).ok()?;
    let mu = (-hc.iter().sum::<f64>() - 1.0) / h1.iter().sum::<f64>();
    let p: Vec<f64> = (0..n).map(|i| -hc[i] - mu * h1[i]).collect();
    p.iter().all(|v| *v > 1e-9).then_some(p)
}

fn is_diagonal(h: &SymMatrix) -> bool {
    let n = h.order();
    (0..n).all(|i| ((i + 1)..n).all(|j| h.get(i, j) == 0.0))
}

fn strictly_inside(set: &FeasibleSet, p: &[f64]) -> bool {
    let margin = 1e-9;
    match set {
        FeasibleSet::WholeSpace { .. } => true,
        FeasibleSet::Box { lower, upper } => p
            .iter()
            .zip(lower.iter().zip(upper.iter()))
            .all(|(v, (l, u))| *v > l + margin && *v < u - margin),
        FeasibleSet::Ball { center, radius } => {
            let d: Vec<f64> = p.iter().zip(center.iter()).map(|(a, b)| a - b).collect();
            norm2(&d) < radius - margin
        }
        FeasibleSet::Simplex { .. } => false,
    }
}

fn long_run_optimum(obj: &Objective, geom: &Geometry) -> Result<ReferenceOptimum> {
    let lip = lipschitz(obj, geom.norm)?.value;
    let x0 = match geom.dgf {
        Dgf::NegativeEntropy => vec![1.0 / geom.dim() as f64; geom.dim()],
        Dgf::HalfSquaredEuclidean => project(&geom.set, &vec![0.0; geom.dim()])?.into_vec(),
    };
    let sched = make_schedule(ScheduleName::S2, lip, LONG_RUN_ITERS)?;
    let mut stepper = AgdStepper::new(obj, geom, &sched, &x0)?;

    let mut best_point = x0.clone();
    let mut best_upper = obj.eval(&x0)?;
    let mut best_lower = f64::NEG_INFINITY;
    let consider = |p: &[f64],
                    best_point: &mut Vec<f64>,
                    best_upper: &mut f64,
                    best_lower: &mut f64|
     -> Result<()> {
        let fp = obj.eval(p)?;
        if fp < *best_upper {
            *best_upper = fp;
            *best_point = p.to_vec();
        }
        let g = obj.grad(p)?;
        if let Some(m) = geom.set.linear_min(&g) {
            *best_lower = best_lower.max(fp + m - dot(&g, p));
        }
        Ok(())
    };
    for k in 1..=LONG_RUN_ITERS {
        let step = stepper.step()?;
        if k % 50 == 0 || k == LONG_RUN_ITERS {
            consider(
                &step.x_bar,
                &mut best_point,
                &mut best_upper,
                &mut best_lower,
            )?;
            consider(&step.x, &mut best_point, &mut best_upper, &mut best_lower)?;
            if best_upper - best_lower <= LONG_RUN_GAP {
                break;
            }
        }
    }
    let enclosure = if best_lower.is_finite() {
        (best_upper - best_lower).max(0.0)
    } else {
        // whole-space problems without a closed form: no certificate, report
        // the stationarity residual instead
        norm2(&obj.grad(&best_point)?)
    };
    debug_assert!(geom.set.contains(&best_point, FEAS_TOL));
    Ok(ReferenceOptimum {
        point: DenseVector::new(best_point)?,
        value: best_upper,
        method: OptimumMethod::LongRun,
        enclosure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryTag {
    Euclidean,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Quadratic {
        #[serde(rename = "Q")]
        q_mat: Vec<f64>,
        q: Vec<f64>,
    },
    LeastSquares {
        #[serde(rename = "A")]
        a: Vec<f64>,
        b: Vec<f64>,
    },
    LogSumExp {
        #[serde(rename = "A")]
        a: Vec<f64>,
        b: Vec<f64>,
        temperature: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum SetSpec {
    WholeSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex,
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub objective: ObjectiveSpec,
    pub dimension: usize,
    pub set: SetSpec,
    #[serde(default = "default_geometry")]
    pub geometry: GeometryTag,
    pub x0: Vec<f64>,
}

fn default_geometry() -> GeometryTag {
    GeometryTag::Euclidean
}

/// A validated problem instance ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub objective: Objective,
    pub geometry: Geometry,
    pub x0: DenseVector,
}

fn rows_of(flat: &[f64], b_len: usize, dim: usize) -> Result<Matrix> {
    if flat.len() != b_len * dim {
        return Err(Error::Dimension {
            expected: b_len * dim,
            got: flat.len(),
        });
    }
    Matrix::new(b_len, dim, flat.to_vec())
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        let objective = match &self.objective {
            ObjectiveSpec::Quadratic { q_mat, q } => {
                Objective::quadratic(SymMatrix::from_row_major(n, q_mat)?, q.clone())?
            }
            ObjectiveSpec::LeastSquares { a, b } => {
                Objective::least_squares(rows_of(a, b.len(), n)?, b.clone())?
            }
            ObjectiveSpec::LogSumExp { a, b, temperature } => {
                Objective::log_sum_exp(rows_of(a, b.len(), n)?, b.clone(), *temperature)?
            }
        };
        let set = match &self.set {
            SetSpec::WholeSpace => FeasibleSet::whole_space(n),
            SetSpec::Box { lower, upper } => FeasibleSet::new_box(lower.clone(), upper.clone())?,
            SetSpec::Ball { center, radius } => FeasibleSet::ball(center.clone(), *radius)?,
            SetSpec::Simplex => FeasibleSet::simplex(n)?,
        };
        if set.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: set.dim(),
            });
        }
        let geometry = match self.geometry {
            GeometryTag::Euclidean => Geometry::euclidean(set),
            GeometryTag::Entropy => Geometry::new(NormKind::Ell1, Dgf::NegativeEntropy, set)?,
        };
        let x0 = DenseVector::new(self.x0.clone())?;
        if x0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: x0.len(),
            });
        }
        if !geometry.set.contains(&x0, FEAS_TOL) {
            return Err(Error::Validation("x0 is not feasible".into()));
        }
        if geometry.dgf == Dgf::NegativeEntropy && x0.iter().any(|v| *v <= 0.0) {
            return Err(Error::Validation(
                "entropy geometry needs a strictly positive x0".into(),
            ));
        }
        Ok(Problem {
            objective,
            geometry,
            x0,
        })
    }
}

impl Problem {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(s)?;
        spec.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Validation(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quad(q: &[Vec<f64>], lin: &[f64]) -> Objective {
        Objective::quadratic(SymMatrix::from_rows(q).unwrap(), lin.to_vec()).unwrap()
    }

    fn random_objectives(rng: &mut ChaCha8Rng) -> Vec<Objective> {
        let n = 4;
        let m = Matrix::new(6, n, (0..6 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        vec![
            Objective::quadratic(m.gram(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap(),
            Objective::least_squares(m.clone(), b.clone()).unwrap(),
            Objective::log_sum_exp(m, b, 0.7).unwrap(),
        ]
    }

    #[test]
    fn eval_and_grad_examples() {
        let f = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]);
        assert_eq!(f.eval(&[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(f.grad(&[3.0, 4.0]).unwrap().as_slice(), &[3.0, 4.0]);

        let ls = Objective::least_squares(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(ls.eval(&[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(ls.grad(&[0.0, 0.0]).unwrap().as_slice(), &[-1.0, 0.0]);

        let lse = Objective::log_sum_exp(
            Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![0.0, 0.0],
            1.0,
        )
        .unwrap();
        assert!((lse.eval(&[0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(lse.grad(&[0.0]).unwrap().as_slice(), &[0.0]);

        assert!(matches!(f.eval(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn nonconvex_quadratic_rejected() {
        let q = SymMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            Objective::quadratic(q, vec![0.0, 0.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn lipschitz_examples() {
        let f = quad(&[vec![1.0, 0.0], vec![0.0, 4.0]], &[0.0, 0.0]);
        assert_eq!(lipschitz(&f, NormKind::Euclidean).unwrap().value, 4.0);
        assert_eq!(lipschitz(&f, NormKind::Ell1).unwrap().value, 4.0);
        let ls = Objective::least_squares(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(lipschitz(&ls, NormKind::Euclidean).unwrap().value, 4.0);
    }

    #[test]
    fn finite_difference_examples() {
        let f = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]);
        assert!(finite_diff_check(&f, &[1.0, 1.0], 1e-5).unwrap() <= 1e-8);
        let zero = quad(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[0.0, 0.0]);
        assert!(finite_diff_check(&zero, &[0.3, -2.0], 1e-5).unwrap() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lse = &random_objectives(&mut rng)[2];
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(finite_diff_check(lse, &x, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences_at_seeded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for obj in random_objectives(&mut rng) {
            for _ in 0..20 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let err = finite_diff_check(&obj, &x, 1e-5).unwrap();
                assert!(err <= 1e-6, "{}: {err}", obj.kind_tag());
            }
        }
    }

    #[test]
    fn smoothness_sandwich_and_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for obj in random_objectives(&mut rng) {
            for norm in [NormKind::Euclidean, NormKind::Ell1] {
                let l = lipschitz(&obj, norm).unwrap().value;
                for _ in 0..200 {
                    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let (fx, fy) = (obj.eval(&x).unwrap(), obj.eval(&y).unwrap());
                    let (gx, gy) = (obj.grad(&x).unwrap(), obj.grad(&y).unwrap());
                    let bregman = fy - fx - dot(&gx, &sub(&y, &x));
                    let d = norm.norm(&sub(&y, &x));
                    let dg = norm.dual_norm(&sub(&gy, &gx));
                    assert!(bregman >= -1e-9, "convexity");
                    assert!(
                        0.5 * l * d * d - bregman >= -1e-9,
                        "upper, {}",
                        obj.kind_tag()
                    );
                    assert!(
                        bregman - dg * dg / (2.0 * l) >= -1e-9,
                        "lower, {}",
                        obj.kind_tag()
                    );
                }
            }
        }
    }

    #[test]
    fn reference_optimum_examples() {
        let f = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[-1.0, 0.0]);
        let r = reference_optimum(&f, &Geometry::euclidean(FeasibleSet::whole_space(2))).unwrap();
        assert_eq!(r.point.as_slice(), &[1.0, 0.0]);
        assert_eq!(r.value, -0.5);
        assert_eq!(r.method, OptimumMethod::ClosedForm);

        let g = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]);
        let r = reference_optimum(
            &g,
            &Geometry::euclidean(FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap()),
        )
        .unwrap();
        assert_eq!(r.point.as_slice(), &[0.0, 0.0]);
        assert_eq!(r.value, 0.0);

        let h = quad(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[-4.0, 0.0]);
        let r = reference_optimum(&h, &Geometry::euclidean(FeasibleSet::unit_box(2))).unwrap();
        assert_eq!(r.point.as_slice(), &[1.0, 0.0]);
        assert_eq!(r.value, -3.5);
    }

    #[test]
    fn long_run_matches_kkt_constructed_optimum() {
        // Q ≻ 0, optimum at x* = (1, 0.3) on the unit box: coordinate 0 at
        // its upper bound with negative gradient, coordinate 1 interior.
        let q_rows = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let qm = SymMatrix::from_rows(&q_rows).unwrap();
        let xs = [1.0, 0.3];
        let qx = qm.matvec(&xs);
        let lin = vec![-qx[0] - 0.7, -qx[1]];
        let f = Objective::quadratic(qm, lin).unwrap();
        let geom = Geometry::euclidean(FeasibleSet::unit_box(2));
        let r = reference_optimum(&f, &geom).unwrap();
        assert_eq!(r.method, OptimumMethod::LongRun);
        let want = f.eval(&xs).unwrap();
        assert!(r.value >= want - 1e-15);
        assert!(r.value - want <= 1e-10, "{} vs {want}", r.value);
        assert!(r.enclosure <= 1e-10);
        assert!(norm2(&sub(&r.point, &xs)) < 1e-5);
    }

    #[test]
    fn unbounded_quadratic_detected() {
        let f = quad(&[vec![1.0, 0.0], vec![0.0, 0.0]], &[0.0, 1.0]);
        let r = reference_optimum(&f, &Geometry::euclidean(FeasibleSet::whole_space(2)));
        assert!(matches!(r, Err(Error::Unbounded(_))));
    }

    #[test]
    fn problem_json_round_trip() {
        let text = r#"{
            "kind": "quadratic", "dimension": 2,
            "data": {"Q": [1, 0, 0, 4], "q": [-1, 0]},
            "set": {"tag": "box", "lower": [0, 0], "upper": [1, 1]},
            "geometry": "euclidean", "x0": [0.5, 0.5]
        }"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.objective.eval(&[1.0, 0.0]).unwrap(), -0.5);
        let again: ProblemSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);

        let lse = r#"{"kind": "log_sum_exp", "dimension": 1,
            "data": {"A": [1, -1], "b": [0, 0], "temperature": 1},
            "set": {"tag": "whole_space"}, "x0": [0]}"#;
        assert!(Problem::from_json_str(lse).is_ok());

        let entropy = r#"{"kind": "quadratic", "dimension": 2,
            "data": {"Q": [1, 0, 0, 1], "q": [0, 0]},
            "set": {"tag": "simplex"}, "geometry": "entropy", "x0": [0.5, 0.5]}"#;
        let p = Problem::from_json_str(entropy).unwrap();
        assert_eq!(p.geometry.norm, NormKind::Ell1);
    }

    #[test]
    fn problem_json_rejects_bad_input() {
        let nan = r#"{"kind": "quadratic", "dimension": 1, "data": {"Q": [NaN], "q": [0]},
            "set": {"tag": "whole_space"}, "x0": [0]}"#;
        assert!(matches!(Problem::from_json_str(nan), Err(Error::Parse(_))));
        let infeasible = r#"{"kind": "quadratic", "dimension": 1, "data": {"Q": [1], "q": [0]},
            "set": {"tag": "box", "lower": [0], "upper": [1]}, "x0": [2]}"#;
        assert!(matches!(
            Problem::from_json_str(infeasible),
            Err(Error::Validation(_))
        ));
        let entropy_box = r#"{"kind": "quadratic", "dimension": 1, "data": {"Q": [1], "q": [0]},
            "set": {"tag": "box", "lower": [0], "upper": [1]}, "geometry": "entropy", "x0": [0.5]}"#;
        assert!(matches!(
            Problem::from_json_str(entropy_box),
            Err(Error::Validation(_))
        ));
        let ragged = r#"{"kind": "least_squares", "dimension": 2, "data": {"A": [1, 2, 3], "b": [0, 0]},
            "set": {"tag": "whole_space"}, "x0": [0, 0]}"#;
        assert!(matches!(
            Problem::from_json_str(ragged),
            Err(Error::Dimension { .. })
        ));
    }
}
