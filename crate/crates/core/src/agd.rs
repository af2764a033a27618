//! Accelerated gradient descent with Bregman prox steps, step-size
//! schedules, and evaluation of the convergence bounds for both the output
//! sequence `x̄_k` and the gradient-evaluation sequence `x̲_k`.
//!
//! Per-iteration vectors are indexed by `k` through accessor methods; the
//! backing `Vec`s start at `k = 0` or `k = 1` as documented on each field.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bregman_divergence, bregman_prox, set_diameter, Dgf, FeasibleSet, Geometry, FEAS_TOL,
};
use crate::linalg::{dot, sub, DenseVector};
use crate::problems::{Objective, ReferenceOptimum};

/// Relative tolerance used when classifying the ratio `γ_kη_k/Γ_k`.
pub const MONOTONE_RTOL: f64 = 1e-12;
/// Bound slack tolerance: a bound holds when `slack ≥ −BOUND_RTOL·(1+|f(x0)|)`.
pub const BOUND_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    S1,
    S2,
    S3,
    Custom,
}

impl ScheduleName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleName::S1 => "s1",
            ScheduleName::S2 => "s2",
            ScheduleName::S3 => "s3",
            ScheduleName::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(ScheduleName::S1),
            "s2" => Ok(ScheduleName::S2),
            "s3" => Ok(ScheduleName::S3),
            "custom" => Ok(ScheduleName::Custom),
            other => Err(Error::Validation(format!("unknown schedule '{other}'"))),
        }
    }
}

impl fmt::Display for ScheduleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Behaviour of `γ_kη_k/Γ_k` over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Nonincreasing,
    Nondecreasing,
    /// Constant up to rounding.
    Both,
    Neither,
}

impl Monotonicity {
    pub fn nonincreasing(self) -> bool {
        matches!(self, Monotonicity::Nonincreasing | Monotonicity::Both)
    }

    pub fn nondecreasing(self) -> bool {
        matches!(self, Monotonicity::Nondecreasing | Monotonicity::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub name: ScheduleName,
    pub lipschitz: f64,
    /// `γ_1..γ_N` at indices `0..N`.
    gamma: Vec<f64>,
    eta: Vec<f64>,
    big_gamma: Vec<f64>,
    pub monotonicity: Monotonicity,
}

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Validation(format!(
            "Lipschitz constant must be positive, got {l}"
        )));
    }
    Ok(())
}

/// Builds one of the standard schedules for `k = 1..=horizon`.
pub fn make_schedule(name: ScheduleName, lipschitz: f64, horizon: usize) -> Result<Schedule> {
    check_lipschitz(lipschitz)?;
    if horizon == 0 {
        return Err(Error::Validation(
            "schedule horizon must be at least 1".into(),
        ));
    }
    let l = lipschitz;
    let mut gamma = Vec::with_capacity(horizon);
    let mut eta = Vec::with_capacity(horizon);
    match name {
        ScheduleName::S1 => {
            for k in 1..=horizon {
                let kf = k as f64;
                gamma.push(2.0 / (kf + 1.0));
                eta.push(2.0 * l / kf);
            }
        }
        ScheduleName::S2 => {
            gamma.push(1.0);
            for _ in 2..=horizon {
                // positive root of γ² = a(1 − γ), a = γ_{k−1}², in a form
                // without cancellation
                let prev: f64 = *gamma.last().unwrap();
                let a = prev * prev;
                gamma.push(2.0 * a / (a + (a * a + 4.0 * a).sqrt()));
            }
            eta.extend(gamma.iter().map(|g| l * g));
        }
        ScheduleName::S3 => {
            for k in 1..=horizon {
                let kf = k as f64;
                gamma.push(3.0 / (kf + 2.0));
                eta.push(3.0 * l / kf);
            }
        }
        ScheduleName::Custom => {
            return Err(Error::Validation(
                "custom schedules are built with Schedule::custom".into(),
            ))
        }
    }
    Ok(Schedule::assemble(name, l, gamma, eta))
}

impl Schedule {
    /// Validates a user-supplied schedule: `γ_1 = 1`, `γ_k ∈ (0,1)` for
    /// `k ≥ 2`, and `η_k ≥ Lγ_k`.
    pub fn custom(lipschitz: f64, gamma: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        check_lipschitz(lipschitz)?;
        if gamma.is_empty() || gamma.len() != eta.len() {
            return Err(Error::Validation(
                "gamma and eta must be nonempty and of equal length".into(),
            ));
        }
        if gamma[0] != 1.0 {
            return Err(Error::Validation(format!(
                "gamma_1 must be 1, got {}",
                gamma[0]
            )));
        }
        for (i, (&g, &e)) in gamma.iter().zip(&eta).enumerate() {
            let k = i + 1;
            if k >= 2 && !(g > 0.0 && g < 1.0) {
                return Err(Error::Validation(format!(
                    "gamma_{k} = {g} is not in (0, 1)"
                )));
            }
            if !e.is_finite() || e < lipschitz * g * (1.0 - 1e-14) {
                return Err(Error::Validation(format!(
                    "eta_{k} = {e} is below L*gamma_{k} = {}",
                    lipschitz * g
                )));
            }
        }
        Ok(Self::assemble(ScheduleName::Custom, lipschitz, gamma, eta))
    }

    fn assemble(name: ScheduleName, lipschitz: f64, gamma: Vec<f64>, eta: Vec<f64>) -> Self {
        let mut big_gamma = Vec::with_capacity(gamma.len());
        let mut acc = 1.0;
        for (i, g) in gamma.iter().enumerate() {
            if i > 0 {
                acc *= 1.0 - g;
            }
            big_gamma.push(acc);
        }
        let ratio: Vec<f64> = (0..gamma.len())
            .map(|i| gamma[i] * eta[i] / big_gamma[i])
            .collect();
        let monotonicity = classify(&ratio);
        Self {
            name,
            lipschitz,
            gamma,
            eta,
            big_gamma,
            monotonicity,
        }
    }

    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    /// `γ_k`, `k ≥ 1`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma[k - 1]
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.eta[k - 1]
    }

    /// `Γ_k`, with `Γ_1 = 1` and `Γ_k = Γ_{k−1}(1 − γ_k)`.
    pub fn big_gamma(&self, k: usize) -> f64 {
        self.big_gamma[k - 1]
    }

    /// `γ_kη_k/Γ_k`
    pub fn ratio(&self, k: usize) -> f64 {
        self.gamma(k) * self.eta(k) / self.big_gamma(k)
    }

    /// The same schedule cut to its first `n` steps.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.horizon() {
            return Err(Error::Validation(format!(
                "cannot truncate a horizon-{} schedule to {n}",
                self.horizon()
            )));
        }
        Ok(Self::assemble(
            self.name,
            self.lipschitz,
            self.gamma[..n].to_vec(),
            self.eta[..n].to_vec(),
        ))
    }
}

fn classify(r: &[f64]) -> Monotonicity {
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = MONOTONE_RTOL * scale.max(f64::MIN_POSITIVE);
    let (mut up, mut down) = (false, false);
    for w in r.windows(2) {
        let d = w[1] - w[0];
        up |= d > tol;
        down |= d < -tol;
    }
    match (up, down) {
        (false, false) => Monotonicity::Both,
        (true, false) => Monotonicity::Nondecreasing,
        (false, true) => Monotonicity::Nonincreasing,
        (true, true) => Monotonicity::Neither,
    }
}

/// Iterates of one AGD run of length `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `x_0..x_N`
    pub x: Vec<DenseVector>,
    /// `x̄_0..x̄_N` (`x̄_0 = x_0`)
    pub x_bar: Vec<DenseVector>,
    /// `x̲_1..x̲_N`
    pub x_under: Vec<DenseVector>,
    /// `g_k = ∇f(x̲_k)`, `k = 1..N`
    pub grads: Vec<DenseVector>,
    /// `f(x̄_0)..f(x̄_N)`
    pub f_bar: Vec<f64>,
    /// `f(x̲_1)..f(x̲_N)`
    pub f_under: Vec<f64>,
    /// prox optimality residual of each step, `k = 1..N`
    pub vi_residual: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x_under.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_under.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k]
    }

    pub fn x_bar_at(&self, k: usize) -> &[f64] {
        &self.x_bar[k]
    }

    pub fn x_under_at(&self, k: usize) -> &[f64] {
        &self.x_under[k - 1]
    }

    pub fn grad_at(&self, k: usize) -> &[f64] {
        &self.grads[k - 1]
    }

    pub fn f_bar_at(&self, k: usize) -> f64 {
        self.f_bar[k]
    }

    pub fn f_under_at(&self, k: usize) -> f64 {
        self.f_under[k - 1]
    }
}

/// One completed AGD step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub k: usize,
    pub x_under: Vec<f64>,
    pub grad: Vec<f64>,
    pub x: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub vi_residual: f64,
}

/// Streaming AGD: yields one step at a time without storing history.
pub struct AgdStepper<'a> {
    obj: &'a Objective,
    geom: &'a Geometry,
    sched: &'a Schedule,
    k: usize,
    x: Vec<f64>,
    x_bar: Vec<f64>,
}

/// `a + t(b − a)`, returning `b` exactly when `t = 1` and `a` when the
/// endpoints coincide.
fn blend(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    if t == 1.0 {
        return b.to_vec();
    }
    a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
}

fn check_finite(v: &[f64], step: usize, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical {
            step,
            reason: format!("non-finite {what}"),
        })
    }
}

impl<'a> AgdStepper<'a> {
    pub fn new(
        obj: &'a Objective,
        geom: &'a Geometry,
        sched: &'a Schedule,
        x0: &[f64],
    ) -> Result<Self> {
        if obj.dim() != geom.dim() {
            return Err(Error::Dimension {
                expected: geom.dim(),
                got: obj.dim(),
            });
        }
        if x0.len() != geom.dim() {
            return Err(Error::Dimension {
                expected: geom.dim(),
                got: x0.len(),
            });
        }
        check_finite(x0, 0, "x0")?;
        if !geom.set.contains(x0, FEAS_TOL) {
            return Err(Error::Validation("x0 is not feasible".into()));
        }
        if geom.dgf == Dgf::NegativeEntropy && x0.iter().any(|v| *v <= 0.0) {
            return Err(Error::Validation(
                "entropy geometry needs a strictly positive x0".into(),
            ));
        }
        Ok(Self {
            obj,
            geom,
            sched,
            k: 0,
            x: x0.to_vec(),
            x_bar: x0.to_vec(),
        })
    }

    pub fn step(&mut self) -> Result<Step> {
        let k = self.k + 1;
        if k > self.sched.horizon() {
            return Err(Error::Validation(format!(
                "schedule horizon {} exhausted",
                self.sched.horizon()
            )));
        }
        let (gamma, eta) = (self.sched.gamma(k), self.sched.eta(k));
        let x_under = blend(&self.x_bar, &self.x, gamma);
        let grad = self.obj.grad(&x_under).map_err(|e| match e {
            Error::Numerical { reason, .. } => Error::Numerical { step: k, reason },
            other => other,
        })?;
        let prox = bregman_prox(self.geom, &grad, &self.x, eta)?;
        let x = prox.point.into_vec();
        check_finite(&x, k, "iterate")?;
        let x_bar = blend(&self.x_bar, &x, gamma);
        self.k = k;
        self.x.clone_from(&x);
        self.x_bar.clone_from(&x_bar);
        Ok(Step {
            k,
            x_under,
            grad: grad.into_vec(),
            x,
            x_bar,
            vi_residual: prox.vi_residual,
        })
    }
}

/// Runs `n` AGD steps from `x0`.
pub fn run_agd(
    obj: &Objective,
    geom: &Geometry,
    sched: &Schedule,
    x0: &[f64],
    n: usize,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::Validation(
            "iteration count must be at least 1".into(),
        ));
    }
    if n > sched.horizon() {
        return Err(Error::Validation(format!(
            "N = {n} exceeds schedule horizon {}",
            sched.horizon()
        )));
    }
    let mut stepper = AgdStepper::new(obj, geom, sched, x0)?;
    let x0v = DenseVector::new(x0.to_vec())?;
    let f0 = obj.eval(x0)?;
    let mut t = Trajectory {
        x: vec![x0v.clone()],
        x_bar: vec![x0v],
        x_under: Vec::with_capacity(n),
        grads: Vec::with_capacity(n),
        f_bar: vec![f0],
        f_under: Vec::with_capacity(n),
        vi_residual: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let s = stepper.step()?;
        let fu = obj.eval(&s.x_under)?;
        let fb = obj.eval(&s.x_bar)?;
        if !fu.is_finite() || !fb.is_finite() {
            return Err(Error::Numerical {
                step: s.k,
                reason: "non-finite objective value".into(),
            });
        }
        t.f_under.push(fu);
        t.f_bar.push(fb);
        t.x_under.push(DenseVector::new(s.x_under)?);
        t.grads.push(DenseVector::new(s.grad)?);
        t.x.push(DenseVector::new(s.x)?);
        t.x_bar.push(DenseVector::new(s.x_bar)?);
        t.vi_residual.push(s.vi_residual);
    }
    Ok(t)
}

/// Comparison point for bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub point: DenseVector,
    pub value: f64,
    /// Whether `point` stands in for a minimizer. Bounds stated only at the
    /// minimizer are skipped otherwise.
    pub is_optimum: bool,
    /// Upper bound on `value − f*` when `is_optimum`.
    pub enclosure: f64,
}

impl ReferencePoint {
    pub fn any(obj: &Objective, point: &[f64]) -> Result<Self> {
        Ok(Self {
            value: obj.eval(point)?,
            point: DenseVector::new(point.to_vec())?,
            is_optimum: false,
            enclosure: 0.0,
        })
    }
}

impl From<ReferenceOptimum> for ReferencePoint {
    fn from(r: ReferenceOptimum) -> Self {
        Self {
            point: r.point,
            value: r.value,
            is_optimum: true,
            enclosure: r.enclosure,
        }
    }
}

/// Which sequence a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Iterate {
    XBar,
    XUnder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// `Γ_k Σ_i (γ_iη_i/Γ_i)(V(x_{i−1},x) − V(x_i,x))`
    XbarTelescoped,
    XbarS1,
    XbarS2,
    XbarS3,
    XunderUnconstrainedS1,
    XunderEuclidNonincreasing,
    XunderEuclidNonincreasingOpt,
    XunderEuclidNondecreasing,
    XunderEuclidS1,
    XunderEuclidS2,
    XunderEuclidS3,
    XunderBregmanNonincreasing,
    XunderBregmanNonincreasingOpt,
    XunderBregmanNondecreasing,
    XunderBregmanS1,
    XunderBregmanS2,
    XunderBregmanS3,
}

impl BoundId {
    pub const ALL: [BoundId; 17] = [
        BoundId::XbarTelescoped,
        BoundId::XbarS1,
        BoundId::XbarS2,
        BoundId::XbarS3,
        BoundId::XunderUnconstrainedS1,
        BoundId::XunderEuclidNonincreasing,
        BoundId::XunderEuclidNonincreasingOpt,
        BoundId::XunderEuclidNondecreasing,
        BoundId::XunderEuclidS1,
        BoundId::XunderEuclidS2,
        BoundId::XunderEuclidS3,
        BoundId::XunderBregmanNonincreasing,
        BoundId::XunderBregmanNonincreasingOpt,
        BoundId::XunderBregmanNondecreasing,
        BoundId::XunderBregmanS1,
        BoundId::XunderBregmanS2,
        BoundId::XunderBregmanS3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::XbarTelescoped => "xbar_telescoped",
            BoundId::XbarS1 => "xbar_s1",
            BoundId::XbarS2 => "xbar_s2",
            BoundId::XbarS3 => "xbar_s3",
            BoundId::XunderUnconstrainedS1 => "xunder_unconstrained_s1",
            BoundId::XunderEuclidNonincreasing => "xunder_euclid_nonincreasing",
            BoundId::XunderEuclidNonincreasingOpt => "xunder_euclid_nonincreasing_opt",
            BoundId::XunderEuclidNondecreasing => "xunder_euclid_nondecreasing",
            BoundId::XunderEuclidS1 => "xunder_euclid_s1",
            BoundId::XunderEuclidS2 => "xunder_euclid_s2",
            BoundId::XunderEuclidS3 => "xunder_euclid_s3",
            BoundId::XunderBregmanNonincreasing => "xunder_bregman_nonincreasing",
            BoundId::XunderBregmanNonincreasingOpt => "xunder_bregman_nonincreasing_opt",
            BoundId::XunderBregmanNondecreasing => "xunder_bregman_nondecreasing",
            BoundId::XunderBregmanS1 => "xunder_bregman_s1",
            BoundId::XunderBregmanS2 => "xunder_bregman_s2",
            BoundId::XunderBregmanS3 => "xunder_bregman_s3",
        }
    }

    pub fn iterate(self) -> Iterate {
        match self {
            BoundId::XbarTelescoped | BoundId::XbarS1 | BoundId::XbarS2 | BoundId::XbarS3 => {
                Iterate::XBar
            }
            _ => Iterate::XUnder,
        }
    }

    /// Whether the bound is only stated at a minimizer.
    pub fn needs_optimum(self) -> bool {
        matches!(
            self,
            BoundId::XunderUnconstrainedS1
                | BoundId::XunderEuclidNonincreasingOpt
                | BoundId::XunderEuclidS1
                | BoundId::XunderEuclidS2
                | BoundId::XunderBregmanNonincreasingOpt
                | BoundId::XunderBregmanS1
                | BoundId::XunderBregmanS2
        )
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bound evaluated along a trajectory, `k = 1..N` at index `k − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub id: BoundId,
    /// `None` where the bound does not apply at that `k`.
    pub values: Vec<Option<f64>>,
    /// `f(·_k) − f_ref`
    pub gaps: Vec<f64>,
    /// `value − gap`
    pub slacks: Vec<Option<f64>>,
    /// Extra tolerance from the reference optimum's enclosure.
    pub enclosure: f64,
    /// Set when the bound is inapplicable for the whole run.
    pub not_applicable: Option<String>,
}

impl BoundReport {
    fn inapplicable(id: BoundId, n: usize, reason: impl Into<String>) -> Self {
        Self {
            id,
            values: vec![None; n],
            gaps: vec![f64::NAN; n],
            slacks: vec![None; n],
            enclosure: 0.0,
            not_applicable: Some(reason.into()),
        }
    }

    pub fn is_applicable(&self) -> bool {
        self.not_applicable.is_none() && self.values.iter().any(Option::is_some)
    }

    pub fn min_slack(&self) -> Option<f64> {
        self.slacks.iter().flatten().copied().reduce(f64::min)
    }

    /// Whether every evaluated slack clears `−(rtol·scale + enclosure)`.
    pub fn holds(&self, rtol: f64, scale: f64) -> bool {
        let floor = -(rtol * scale + self.enclosure);
        self.slacks.iter().flatten().all(|s| *s >= floor)
    }
}

fn finish(
    id: BoundId,
    values: Vec<Option<f64>>,
    gaps: Vec<f64>,
    r: &ReferencePoint,
) -> BoundReport {
    let slacks = values
        .iter()
        .zip(&gaps)
        .map(|(v, g)| v.map(|b| b - g))
        .collect();
    let enclosure = if id.needs_optimum() { r.enclosure } else { 0.0 };
    BoundReport {
        id,
        values,
        gaps,
        slacks,
        enclosure,
        not_applicable: None,
    }
}

fn check_run(
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    r: &ReferencePoint,
) -> Result<usize> {
    let n = traj.len();
    if n == 0 || n > sched.horizon() {
        return Err(Error::Validation(
            "trajectory length does not fit the schedule".into(),
        ));
    }
    if r.point.len() != geom.dim() {
        return Err(Error::Dimension {
            expected: geom.dim(),
            got: r.point.len(),
        });
    }
    Ok(n)
}

/// `sqrt(sup V(x, y))` over the set; `None` when infinite.
pub fn sqrt_max_divergence(geom: &Geometry) -> Option<f64> {
    set_diameter(geom).map(|d| d / std::f64::consts::SQRT_2)
}

/// Bounds on `f(x̄_k) − f(x)` for `k = 1..N`: the telescoped form, plus the
/// closed-form constant matching the schedule.
pub fn bound_xu(
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    r: &ReferencePoint,
) -> Result<Vec<BoundReport>> {
    let n = check_run(sched, traj, geom, r)?;
    let x = &r.point;
    let gaps: Vec<f64> = (1..=n).map(|k| traj.f_bar_at(k) - r.value).collect();
    let v: Vec<f64> = (0..=n)
        .map(|i| bregman_divergence(geom, traj.x_at(i), x))
        .collect::<Result<_>>()?;
    let l = sched.lipschitz;

    let mut tele = Vec::with_capacity(n);
    let mut sum = 0.0;
    for k in 1..=n {
        sum += sched.ratio(k) * (v[k - 1] - v[k]);
        tele.push(Some(sched.big_gamma(k) * sum));
    }
    let mut out = vec![finish(BoundId::XbarTelescoped, tele, gaps.clone(), r)];

    let kf = |k: usize| k as f64;
    let closed = |id: BoundId, f: &dyn Fn(f64) -> f64| -> BoundReport {
        finish(
            id,
            (1..=n).map(|k| Some(f(kf(k)))).collect(),
            gaps.clone(),
            r,
        )
    };
    out.push(match sched.name {
        ScheduleName::S1 => closed(BoundId::XbarS1, &|k| 4.0 * l / (k * (k + 1.0)) * v[0]),
        _ => BoundReport::inapplicable(BoundId::XbarS1, n, "schedule is not s1"),
    });
    out.push(match sched.name {
        ScheduleName::S2 => closed(BoundId::XbarS2, &|k| {
            4.0 * l / ((k + 1.0) * (k + 1.0)) * v[0]
        }),
        _ => BoundReport::inapplicable(BoundId::XbarS2, n, "schedule is not s2"),
    });
    out.push(match (sched.name, sqrt_max_divergence(geom)) {
        (ScheduleName::S3, Some(d)) => {
            closed(BoundId::XbarS3, &|k| 9.0 * l * d * d / (k * (k + 2.0)))
        }
        (ScheduleName::S3, None) => BoundReport::inapplicable(
            BoundId::XbarS3,
            n,
            "needs a finite supremum of the Bregman divergence",
        ),
        _ => BoundReport::inapplicable(BoundId::XbarS3, n, "schedule is not s3"),
    });
    Ok(out)
}

/// `f(x̲_k) − f(x*) ≤ 2L/(k(k+1))‖x* − x0‖²` for unconstrained Euclidean
/// problems under `s1`.
pub fn bound_xl_unconstrained(
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    r: &ReferencePoint,
) -> Result<BoundReport> {
    let n = check_run(sched, traj, geom, r)?;
    let id = BoundId::XunderUnconstrainedS1;
    if !matches!(geom.set, FeasibleSet::WholeSpace { .. }) || !geom.is_euclidean() {
        return Ok(BoundReport::inapplicable(
            id,
            n,
            "needs an unconstrained Euclidean problem",
        ));
    }
    if sched.name != ScheduleName::S1 {
        return Ok(BoundReport::inapplicable(id, n, "schedule is not s1"));
    }
    if !r.is_optimum {
        return Ok(BoundReport::inapplicable(
            id,
            n,
            "reference point is not a minimizer",
        ));
    }
    let d0 = sub(traj.x_at(0), &r.point);
    let r0 = dot(&d0, &d0);
    let l = sched.lipschitz;
    let values = (1..=n)
        .map(|k| Some(2.0 * l / (k as f64 * (k as f64 + 1.0)) * r0))
        .collect();
    let gaps = (1..=n).map(|k| traj.f_under_at(k) - r.value).collect();
    Ok(finish(id, values, gaps, r))
}

/// `max{0, γ_N²/Γ_N² − γ_{N−1}²/Γ_{N−1}²}`
fn ratio_jump(s: &Schedule, n: usize) -> f64 {
    let a = s.gamma(n) / s.big_gamma(n);
    let b = s.gamma(n - 1) / s.big_gamma(n - 1);
    (a * a - b * b).max(0.0)
}

/// `max{1, Γ_{N−1}²γ_N²/(γ_{N−1}²Γ_N²)}`
fn ratio_max(s: &Schedule, n: usize) -> f64 {
    let q = s.big_gamma(n - 1) * s.gamma(n) / (s.gamma(n - 1) * s.big_gamma(n));
    (q * q).max(1.0)
}

/// Bounds on `f(x̲_k) − f(x)`: the Euclidean family (k ≥ 2, Euclidean
/// geometry only) and the Bregman family (k ≥ 3, any geometry), each with
/// the general forms and the schedule-specific constants.
pub fn bound_xl(
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    r: &ReferencePoint,
) -> Result<Vec<BoundReport>> {
    let n = check_run(sched, traj, geom, r)?;
    let x = &r.point;
    let gaps: Vec<f64> = (1..=n).map(|k| traj.f_under_at(k) - r.value).collect();
    let l = sched.lipschitz;
    let mono = sched.monotonicity;
    let v: Vec<f64> = (0..=n)
        .map(|i| bregman_divergence(geom, traj.x_at(i), x))
        .collect::<Result<_>>()?;
    let sq = |i: usize| {
        let d = sub(traj.x_at(i), x);
        dot(&d, &d)
    };
    let diam = set_diameter(geom);
    let dv = sqrt_max_divergence(geom);
    let s = sched;
    let mut out = Vec::new();

    // Each closure gets N and returns the bound value at that horizon.
    let per_k = |id: BoundId, min_k: usize, f: &dyn Fn(usize) -> f64| -> BoundReport {
        let values = (1..=n).map(|k| (k >= min_k).then(|| f(k))).collect();
        finish(id, values, gaps.clone(), r)
    };
    let guard = |id: BoundId, cond: Option<&str>, f: &dyn Fn() -> BoundReport| -> BoundReport {
        if let Some(reason) = cond {
            return BoundReport::inapplicable(id, n, reason);
        }
        if id.needs_optimum() && !r.is_optimum {
            return BoundReport::inapplicable(id, n, "reference point is not a minimizer");
        }
        f()
    };
    let not_euclid = (!geom.is_euclidean()).then_some("needs the Euclidean geometry");
    let first = |a: Option<&'static str>, b: Option<&'static str>| a.or(b);
    let need_noninc = (!mono.nonincreasing()).then_some("step ratio is not nonincreasing");
    let need_nondec = (!mono.nondecreasing()).then_some("step ratio is not nondecreasing");
    let need_diam = diam.is_none().then_some("needs a bounded set");
    let need_dv = dv
        .is_none()
        .then_some("needs a finite supremum of the Bregman divergence");
    let need = |name: ScheduleName, msg: &'static str| (s.name != name).then_some(msg);
    let sq0 = sq(0);
    let nf = |k: usize| k as f64;

    // Euclidean family
    out.push(guard(
        BoundId::XunderEuclidNonincreasing,
        first(not_euclid, need_noninc),
        &|| {
            per_k(BoundId::XunderEuclidNonincreasing, 2, &|k| {
                s.big_gamma(k) * s.eta(1) / 2.0 * sq0
                    + ratio_jump(s, k) * s.big_gamma(k) * s.big_gamma(k - 1) * s.eta(k - 1)
                        / (2.0 * s.gamma(k - 1))
                        * sq(k - 1)
            })
        },
    ));
    out.push(guard(
        BoundId::XunderEuclidNonincreasingOpt,
        first(not_euclid, need_noninc),
        &|| {
            per_k(BoundId::XunderEuclidNonincreasingOpt, 2, &|k| {
                ratio_max(s, k) * s.big_gamma(k) * s.eta(1) / 2.0 * sq0
            })
        },
    ));
    out.push(guard(
        BoundId::XunderEuclidNondecreasing,
        first(not_euclid, first(need_nondec, need_diam)),
        &|| {
            let d = diam.unwrap_or(f64::NAN);
            per_k(BoundId::XunderEuclidNondecreasing, 2, &|k| {
                ratio_max(s, k) * s.big_gamma(k) * s.gamma(k - 1) * s.eta(k - 1)
                    / (2.0 * s.big_gamma(k - 1))
                    * d
                    * d
            })
        },
    ));
    out.push(guard(
        BoundId::XunderEuclidS1,
        first(not_euclid, need(ScheduleName::S1, "schedule is not s1")),
        &|| {
            per_k(BoundId::XunderEuclidS1, 2, &|k| {
                let k = nf(k);
                2.0 * k * l / ((k - 1.0) * (k - 1.0) * (k + 1.0)) * sq0
            })
        },
    ));
    out.push(guard(
        BoundId::XunderEuclidS2,
        first(not_euclid, need(ScheduleName::S2, "schedule is not s2")),
        &|| {
            per_k(BoundId::XunderEuclidS2, 2, &|k| {
                2.0 * l / (nf(k) * nf(k)) * sq0
            })
        },
    ));
    out.push(guard(
        BoundId::XunderEuclidS3,
        first(
            not_euclid,
            first(need(ScheduleName::S3, "schedule is not s3"), need_diam),
        ),
        &|| {
            let d = diam.unwrap_or(f64::NAN);
            per_k(BoundId::XunderEuclidS3, 2, &|k| {
                let k = nf(k);
                9.0 * l * (k + 1.0) / (2.0 * (k - 1.0) * (k - 1.0) * (k + 2.0)) * d * d
            })
        },
    ));

    // Bregman family
    out.push(guard(
        BoundId::XunderBregmanNonincreasing,
        need_noninc,
        &|| {
            per_k(BoundId::XunderBregmanNonincreasing, 3, &|k| {
                s.big_gamma(k) * s.eta(1) * v[0]
                    + s.big_gamma(k) * s.big_gamma(k - 1) * s.eta(k - 1) / s.gamma(k - 1)
                        * ratio_jump(s, k)
                        * v[k - 1]
                    + s.gamma(k) * s.eta(k - 1) * v[k - 2]
            })
        },
    ));
    out.push(guard(
        BoundId::XunderBregmanNonincreasingOpt,
        need_noninc,
        &|| {
            per_k(BoundId::XunderBregmanNonincreasingOpt, 3, &|k| {
                let extra = s.big_gamma(k - 2) * s.gamma(k) * s.eta(k - 1)
                    / (s.big_gamma(k) * s.gamma(k - 2) * s.eta(k - 2));
                (ratio_max(s, k) + extra) * s.big_gamma(k) * s.eta(1) * v[0]
            })
        },
    ));
    out.push(guard(
        BoundId::XunderBregmanNondecreasing,
        first(need_nondec, need_dv),
        &|| {
            let d = dv.unwrap_or(f64::NAN);
            per_k(BoundId::XunderBregmanNondecreasing, 3, &|k| {
                let a = s.big_gamma(k) * s.gamma(k - 1) / (s.big_gamma(k - 1) * s.gamma(k));
                s.gamma(k) * s.eta(k - 1) * (a.max(1.0 / a) + 1.0) * d * d
            })
        },
    ));
    out.push(guard(
        BoundId::XunderBregmanS1,
        need(ScheduleName::S1, "schedule is not s1"),
        &|| {
            per_k(BoundId::XunderBregmanS1, 3, &|k| {
                let k = nf(k);
                4.0 * (2.0 * k - 1.0) * l / ((k - 1.0) * (k - 1.0) * (k + 1.0)) * v[0]
            })
        },
    ));
    out.push(guard(
        BoundId::XunderBregmanS2,
        need(ScheduleName::S2, "schedule is not s2"),
        &|| {
            per_k(BoundId::XunderBregmanS2, 3, &|k| {
                let k = nf(k);
                4.0 * (2.0 * k + 1.0) * l / (k * k * (k + 1.0)) * v[0]
            })
        },
    ));
    out.push(guard(
        BoundId::XunderBregmanS3,
        first(need(ScheduleName::S3, "schedule is not s3"), need_dv),
        &|| {
            let d = dv.unwrap_or(f64::NAN);
            per_k(BoundId::XunderBregmanS3, 3, &|k| {
                let k = nf(k);
                18.0 * k * l / ((k - 1.0) * (k - 1.0) * (k + 2.0)) * d * d
            })
        },
    ));
    Ok(out)
}

/// Every bound in [`BoundId::ALL`] order.
pub fn all_bounds(
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    r: &ReferencePoint,
) -> Result<Vec<BoundReport>> {
    let mut out = bound_xu(sched, traj, geom, r)?;
    out.push(bound_xl_unconstrained(sched, traj, geom, r)?);
    out.extend(bound_xl(sched, traj, geom, r)?);
    out.sort_by_key(|b| b.id);
    Ok(out)
}

/// The six summands of the error term `Δ(x)` in
/// `f(x̲_N) − f(x) ≤ Γ_N[η_1/2‖x0 − x‖² + Δ(x)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBreakdown {
    /// `γ_N/Γ_N⟨g_N, x_{N−1} − x_N⟩`
    pub last_step: f64,
    /// `−η_1/2‖x − x0‖²`
    pub distance: f64,
    /// `Σ_{k≥2} γ_{k−1}/Γ_{k−1}⟨g_k − g_{k−1}, x_{k−1} − x_{k−2}⟩`
    pub cross: f64,
    /// `−Σ_{k≥2} 1/(2LΓ_{k−1})‖g_{k−1} − g_k‖²_*`
    pub grad_change: f64,
    /// `−Σ_k γ_k/(2LΓ_k)‖g − g_k‖²_*`
    pub grad_to_ref: f64,
    /// `Σ_k γ_k/Γ_k⟨g_k, x_k − x⟩`
    pub linear: f64,
    pub total: f64,
    /// `f(x̲_N) − f(x)`
    pub lhs: f64,
    /// `Γ_N[η_1/2‖x0 − x‖² + Δ]`
    pub rhs: f64,
}

impl DeltaBreakdown {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn compute_delta(
    obj: &Objective,
    sched: &Schedule,
    traj: &Trajectory,
    geom: &Geometry,
    x: &[f64],
) -> Result<DeltaBreakdown> {
    let n = traj.len();
    if n == 0 || n > sched.horizon() {
        return Err(Error::Validation(
            "trajectory length does not fit the schedule".into(),
        ));
    }
    if x.len() != geom.dim() {
        return Err(Error::Dimension {
            expected: geom.dim(),
            got: x.len(),
        });
    }
    let norm = geom.norm;
    let l = sched.lipschitz;
    let g = obj.grad(x)?;
    let w = |k: usize| sched.gamma(k) / sched.big_gamma(k);
    let dist0 = norm.norm(&sub(traj.x_at(0), x));

    let last_step = w(n) * dot(traj.grad_at(n), &sub(traj.x_at(n - 1), traj.x_at(n)));
    let distance = -sched.eta(1) / 2.0 * dist0 * dist0;
    let (mut cross, mut grad_change) = (0.0, 0.0);
    for k in 2..=n {
        let dg = sub(traj.grad_at(k), traj.grad_at(k - 1));
        // the k = 2 term pairs with x_1 − x_0
        cross += w(k - 1) * dot(&dg, &sub(traj.x_at(k - 1), traj.x_at(k - 2)));
        let dn = norm.dual_norm(&dg);
        grad_change -= dn * dn / (2.0 * l * sched.big_gamma(k - 1));
    }
    let (mut grad_to_ref, mut linear) = (0.0, 0.0);
    for k in 1..=n {
        let dn = norm.dual_norm(&sub(&g, traj.grad_at(k)));
        grad_to_ref -= w(k) * dn * dn / (2.0 * l);
        linear += w(k) * dot(traj.grad_at(k), &sub(traj.x_at(k), x));
    }
    let total = last_step + distance + cross + grad_change + grad_to_ref + linear;
    let lhs = traj.f_under_at(n) - obj.eval(x)?;
    let rhs = sched.big_gamma(n) * (sched.eta(1) / 2.0 * dist0 * dist0 + total);
    Ok(DeltaBreakdown {
        last_step,
        distance,
        cross,
        grad_change,
        grad_to_ref,
        linear,
        total,
        lhs,
        rhs,
    })
}

/// Formats with 17 significant digits; `nan` for missing values.
pub fn fmt_num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        Some(x) if x.is_nan() => "nan".into(),
        Some(x) if x > 0.0 => "inf".into(),
        Some(_) => "-inf".into(),
        None => "nan".into(),
    }
}

/// Writes one row per `k = 1..N`: objective values, gaps, each applicable
/// bound and its slack, and the prox residual.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    traj: &Trajectory,
    reports: &[BoundReport],
    reference: &ReferencePoint,
) -> std::io::Result<()> {
    let shown: Vec<&BoundReport> = reports.iter().filter(|r| r.is_applicable()).collect();
    let mut header = vec![
        "k".to_string(),
        "f_xbar".into(),
        "f_xunder".into(),
        "gap_xbar".into(),
        "gap_xunder".into(),
    ];
    header.extend(shown.iter().map(|r| format!("bound_{}", r.id)));
    header.extend(shown.iter().map(|r| format!("slack_{}", r.id)));
    header.push("vi_residual".into());
    writeln!(w, "{}", header.join(","))?;
    for k in 1..=traj.len() {
        let mut row = vec![
            k.to_string(),
            fmt_num(Some(traj.f_bar_at(k))),
            fmt_num(Some(traj.f_under_at(k))),
            fmt_num(Some(traj.f_bar_at(k) - reference.value)),
            fmt_num(Some(traj.f_under_at(k) - reference.value)),
        ];
        row.extend(shown.iter().map(|r| fmt_num(r.values[k - 1])));
        row.extend(shown.iter().map(|r| fmt_num(r.slacks[k - 1])));
        row.push(fmt_num(Some(traj.vi_residual[k - 1])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NormKind;
    use crate::linalg::SymMatrix;
    use crate::problems::reference_optimum;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn half_square_1d() -> (Objective, Geometry) {
        let f = Objective::quadratic(SymMatrix::from_diag(&[1.0]), vec![0.0]).unwrap();
        (f, Geometry::euclidean(FeasibleSet::whole_space(1)))
    }

    #[test]
    fn schedule_examples() {
        let s1 = make_schedule(ScheduleName::S1, 1.0, 3).unwrap();
        assert_eq!((s1.gamma(1), s1.eta(1), s1.big_gamma(1)), (1.0, 2.0, 1.0));
        assert!((s1.gamma(2) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(s1.eta(2), 1.0);
        assert!((s1.big_gamma(2) - 1.0 / 3.0).abs() < 1e-16);

        let s2 = make_schedule(ScheduleName::S2, 1.0, 2).unwrap();
        assert!((s2.gamma(2) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);

        let s3 = make_schedule(ScheduleName::S3, 2.0, 1).unwrap();
        assert_eq!((s3.gamma(1), s3.eta(1)), (1.0, 6.0));

        assert_eq!(s1.monotonicity, Monotonicity::Both);
        assert_eq!(
            make_schedule(ScheduleName::S2, 10.0, 200)
                .unwrap()
                .monotonicity,
            Monotonicity::Both
        );
        assert_eq!(
            make_schedule(ScheduleName::S3, 1.0, 50)
                .unwrap()
                .monotonicity,
            Monotonicity::Nondecreasing
        );
    }

    #[test]
    fn schedule_closed_forms() {
        for l in [1.0, 10.0] {
            let s1 = make_schedule(ScheduleName::S1, l, 200).unwrap();
            let s2 = make_schedule(ScheduleName::S2, l, 200).unwrap();
            let s3 = make_schedule(ScheduleName::S3, l, 200).unwrap();
            for k in 1..=200 {
                let kf = k as f64;
                assert!(rel(s1.big_gamma(k), 2.0 / (kf * (kf + 1.0))) < 1e-12);
                assert!(rel(s1.ratio(k), 2.0 * l) < 1e-12);
                assert!(rel(s2.big_gamma(k), s2.gamma(k).powi(2)) < 1e-12);
                assert!(rel(s2.ratio(k), l) < 1e-12);
                assert!(rel(s3.big_gamma(k), 6.0 / (kf * (kf + 1.0) * (kf + 2.0))) < 1e-12);
                assert!(rel(s3.ratio(k), 1.5 * l * (kf + 1.0)) < 1e-12);
                if k >= 2 {
                    let g = s2.gamma(k);
                    let p = s2.gamma(k - 1);
                    assert!(rel(g * g, p * p * (1.0 - g)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn custom_schedule_validation() {
        assert!(Schedule::custom(1.0, vec![1.0, 0.5], vec![1.0, 0.5]).is_ok());
        assert!(matches!(
            Schedule::custom(1.0, vec![0.9], vec![1.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Schedule::custom(1.0, vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Schedule::custom(1.0, vec![1.0, 0.5], vec![1.0, 0.4]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            make_schedule(ScheduleName::S1, 0.0, 3),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            make_schedule(ScheduleName::S1, f64::NAN, 3),
            Err(Error::Validation(_))
        ));
        let c = Schedule::custom(1.0, vec![1.0, 0.5, 0.4], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.monotonicity, Monotonicity::Nondecreasing);
    }

    #[test]
    fn hand_computed_one_dimensional_run() {
        let (f, geom) = half_square_1d();
        let s = make_schedule(ScheduleName::S1, 1.0, 2).unwrap();
        let t = run_agd(&f, &geom, &s, &[1.0], 2).unwrap();
        assert_eq!(t.x_at(1), &[0.5]);
        assert!((t.x_bar_at(2)[0] - 1.0 / 6.0).abs() <= 1e-15);
        assert!((t.f_bar_at(2) - 1.0 / 72.0).abs() <= 1e-15);
        assert_eq!(t.x_under_at(2), t.x_at(1));
        assert_eq!(t.x_bar_at(1), t.x_at(1));
        assert!((t.f_under_at(2) - 0.125).abs() <= 1e-15);
        assert_eq!(t.x_at(2), &[0.0]);
    }

    #[test]
    fn run_agd_rejects_bad_input() {
        let (f, geom) = half_square_1d();
        let s = make_schedule(ScheduleName::S1, 1.0, 3).unwrap();
        assert!(matches!(
            run_agd(&f, &geom, &s, &[1.0], 0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            run_agd(&f, &geom, &s, &[1.0], 4),
            Err(Error::Validation(_))
        ));
        assert!(run_agd(&f, &geom, &s, &[f64::NAN], 2).is_err());
        let boxed = Geometry::euclidean(FeasibleSet::unit_box(1));
        assert!(matches!(
            run_agd(&f, &boxed, &s, &[2.0], 2),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn corollary_constant_examples() {
        // s1 Euclidean x̲ constant at N = 2, L = 1
        let n = 2.0f64;
        assert!((2.0 * n / ((n - 1.0) * (n - 1.0) * (n + 1.0)) - 4.0 / 3.0).abs() < 1e-15);
        // s1 Bregman at N = 3
        let n = 3.0f64;
        assert!((4.0 * (2.0 * n - 1.0) / ((n - 1.0) * (n - 1.0) * (n + 1.0)) - 1.25).abs() < 1e-15);
        // s3 x̄ with D = √2 at k = 3
        let d2 = 2.0f64;
        assert!((9.0 * d2 / (3.0 * 5.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn general_bounds_reduce_to_corollary_constants() {
        let geom = Geometry::euclidean(FeasibleSet::unit_box(2));
        let f = Objective::quadratic(SymMatrix::from_diag(&[1.0, 0.5]), vec![-0.3, 0.2]).unwrap();
        let x0 = [1.0, 1.0];
        for name in [ScheduleName::S1, ScheduleName::S2, ScheduleName::S3] {
            let s = make_schedule(name, 1.0, 40).unwrap();
            let t = run_agd(&f, &geom, &s, &x0, 40).unwrap();
            let r: ReferencePoint = reference_optimum(&f, &geom).unwrap().into();
            let reps = all_bounds(&s, &t, &geom, &r).unwrap();
            let get = |id: BoundId| reps.iter().find(|b| b.id == id).unwrap();
            let pairs = match name {
                ScheduleName::S1 => vec![
                    (
                        BoundId::XunderEuclidNonincreasingOpt,
                        BoundId::XunderEuclidS1,
                    ),
                    (
                        BoundId::XunderBregmanNonincreasingOpt,
                        BoundId::XunderBregmanS1,
                    ),
                ],
                ScheduleName::S2 => vec![
                    (
                        BoundId::XunderEuclidNonincreasingOpt,
                        BoundId::XunderEuclidS2,
                    ),
                    (
                        BoundId::XunderBregmanNonincreasingOpt,
                        BoundId::XunderBregmanS2,
                    ),
                ],
                _ => vec![
                    (BoundId::XunderEuclidNondecreasing, BoundId::XunderEuclidS3),
                    (
                        BoundId::XunderBregmanNondecreasing,
                        BoundId::XunderBregmanS3,
                    ),
                ],
            };
            for (general, special) in pairs {
                for (a, b) in get(general).values.iter().zip(&get(special).values) {
                    if let (Some(a), Some(b)) = (a, b) {
                        // closed forms are exact for s1/s3 and upper bounds for s2
                        assert!(*a <= b * (1.0 + 1e-12), "{general} {a} > {special} {b}");
                        if name != ScheduleName::S2 {
                            assert!(rel(*a, *b) < 1e-12, "{general} {a} vs {special} {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn telescoped_sum_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = Geometry::entropy_simplex(4).unwrap();
        let f = Objective::quadratic(
            SymMatrix::from_diag(&[1.0, 2.0, 0.5, 1.5]),
            vec![0.1, -0.2, 0.3, 0.0],
        )
        .unwrap();
        let s = make_schedule(ScheduleName::S3, 2.0, 30).unwrap();
        let t = run_agd(&f, &geom, &s, &[0.25; 4], 30).unwrap();
        for _ in 0..5 {
            let mut x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
            let z: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= z);
            let r = ReferencePoint::any(&f, &x).unwrap();
            let tele = &bound_xu(&s, &t, &geom, &r).unwrap()[0];
            let mut b = 0.0;
            for k in 1..=30 {
                let vp = bregman_divergence(&geom, t.x_at(k - 1), &x).unwrap();
                let vk = bregman_divergence(&geom, t.x_at(k), &x).unwrap();
                b = (1.0 - s.gamma(k)) * b + s.gamma(k) * s.eta(k) * (vp - vk);
                assert!((tele.values[k - 1].unwrap() - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn delta_inequality_holds_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cases = [
            (
                Geometry::euclidean(FeasibleSet::unit_box(3)),
                vec![0.9, 0.1, 0.5],
            ),
            (Geometry::entropy_simplex(3).unwrap(), vec![0.2, 0.3, 0.5]),
        ];
        let f = Objective::quadratic(
            SymMatrix::from_rows(&[
                vec![2.0, 0.3, 0.0],
                vec![0.3, 1.0, 0.1],
                vec![0.0, 0.1, 0.5],
            ])
            .unwrap(),
            vec![-1.0, 0.5, 0.2],
        )
        .unwrap();
        for (geom, x0) in cases {
            let l = crate::problems::lipschitz(&f, geom.norm).unwrap().value;
            for name in [ScheduleName::S1, ScheduleName::S2, ScheduleName::S3] {
                let s = make_schedule(name, l, 12).unwrap();
                for n in 1..=12 {
                    let t = run_agd(&f, &geom, &s, &x0, n).unwrap();
                    for _ in 0..4 {
                        let x = geom
                            .set
                            .linear_argmin(&[
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                            ])
                            .unwrap();
                        let x: Vec<f64> =
                            x.iter().zip(&x0).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
                        let d = compute_delta(&f, &s, &t, &geom, &x).unwrap();
                        assert!(
                            d.slack() >= -1e-8 * (1.0 + d.lhs.abs()),
                            "{name} N={n} slack {}",
                            d.slack()
                        );
                        let expect = d.last_step
                            + d.distance
                            + d.cross
                            + d.grad_change
                            + d.grad_to_ref
                            + d.linear;
                        assert_eq!(d.total, expect);
                    }
                }
            }
        }
        assert_eq!(NormKind::Ell1.dual_norm(&[1.0, -2.0]), 2.0);
    }

    #[test]
    fn trajectory_csv_layout() {
        let (f, geom) = half_square_1d();
        let s = make_schedule(ScheduleName::S1, 1.0, 3).unwrap();
        let t = run_agd(&f, &geom, &s, &[1.0], 3).unwrap();
        let r: ReferencePoint = reference_optimum(&f, &geom).unwrap().into();
        let reps = all_bounds(&s, &t, &geom, &r).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t, &reps, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("k,f_xbar,f_xunder,gap_xbar,gap_xunder,bound_xbar_telescoped"));
        assert!(lines[0].ends_with(",vi_residual"));
        assert!(lines[0].contains("slack_xunder_unconstrained_s1"));
        let cols = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        // Euclidean x̲ bounds start at k = 2
        assert!(lines[1].contains("nan"));
        assert_eq!(fmt_num(Some(0.1)), "1.0000000000000001e-1");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_iterates_feasible_and_ratio_matches_class(
            seed in 0u64..1000,
            which in 0usize..3,
            horizon in 2usize..40,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let name = [ScheduleName::S1, ScheduleName::S2, ScheduleName::S3][which];
            let l = rng.gen_range(0.5..5.0);
            let s = make_schedule(name, l, horizon).unwrap();
            for k in 2..=horizon {
                prop_assert!(s.gamma(k) > 0.0 && s.gamma(k) < 1.0);
                prop_assert!(s.eta(k) >= l * s.gamma(k) * (1.0 - 1e-15));
                let d = s.ratio(k) - s.ratio(k - 1);
                let tol = 1e-12 * s.ratio(k).abs();
                if s.monotonicity.nonincreasing() { prop_assert!(d <= tol); }
                if s.monotonicity.nondecreasing() { prop_assert!(d >= -tol); }
            }
            let geom = Geometry::euclidean(FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap());
            let f = Objective::quadratic(SymMatrix::from_diag(&[l, l / 2.0]), vec![rng.gen_range(-3.0..3.0), 1.0]).unwrap();
            let t = run_agd(&f, &geom, &s, &[0.6, 0.0], horizon).unwrap();
            for k in 1..=horizon {
                prop_assert!(geom.set.contains(t.x_at(k), 1e-12));
                prop_assert!(geom.set.contains(t.x_bar_at(k), 1e-12));
                prop_assert!(geom.set.contains(t.x_under_at(k), 1e-12));
            }
        }
    }
}
