//! Dual performance-estimation SDP for the gradient-evaluation iterate
//! `x̲_N` of AGD on `L`-smooth convex problems over a closed convex set.
//!
//! Every quantity lives in a Gram basis made of `x_k − x*` (`k = 0..N`) and
//! the gradients at the distinct points of
//! `𝒱 = {x̄_0..x̄_N, x̲_1..x̲_N, x_0..x_N, x*}`. Each admissible inequality
//! contributes a quadratic form (symmetric matrix in that basis) plus a
//! vector of function-value coefficients. A certificate is a nonnegative
//! weighting whose function-value part equals `f(x̲_N) − f(x*)` and whose
//! matrix part, together with `d·‖x0 − x*‖²`, is PSD; it proves
//! `f(x̲_N) − f(x*) ≤ d·R²` whenever `‖x0 − x*‖ ≤ R`.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agd::{make_schedule, Schedule, ScheduleName};
use crate::error::{Error, Result};
use crate::linalg::{packed_len, svec, sym_eig, SymMatrix};
use crate::sdp::{solve_conic, ConeLayout, SdpInstance, SdpSettings, SdpStatus, SparseMatrix};

/// Coefficient vectors closer than this (max-abs) denote the same point.
pub const MERGE_TOL: f64 = 1e-12;
/// Certificate acceptance: linear residual and negative-eigenvalue bound.
pub const VERIFY_TOL: f64 = 1e-7;
/// Solver tolerance used for PEP solves; tighter than [`VERIFY_TOL`] so the
/// recovered weights pass verification with margin.
pub const PEP_SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointTag {
    X(usize),
    XBar(usize),
    XUnder(usize),
    XStar,
}

impl fmt::Display for PointTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointTag::X(k) => write!(f, "x_{k}"),
            PointTag::XBar(k) => write!(f, "xbar_{k}"),
            PointTag::XUnder(k) => write!(f, "xunder_{k}"),
            PointTag::XStar => f.write_str("xstar"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PepPoint {
    pub tag: PointTag,
    /// Affine coefficients over `(x_0, …, x_N, x*)`.
    pub coeffs: Vec<f64>,
}

/// The points of `𝒱` with duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub n_iter: usize,
    /// Every label, ordered `x_0..x_N, x̄_0..x̄_N, x̲_1..x̲_N, x*`.
    pub all: Vec<PepPoint>,
    /// Index into `all` of each distinct point's representative.
    pub unique: Vec<usize>,
    /// For each entry of `all`, its distinct-point index.
    pub class_of: Vec<usize>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.unique.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unique.is_empty()
    }

    /// Distinct-point index of a label.
    pub fn index(&self, tag: PointTag) -> Option<usize> {
        self.all
            .iter()
            .position(|p| p.tag == tag)
            .map(|i| self.class_of[i])
    }

    pub fn representative(&self, u: usize) -> &PepPoint {
        &self.all[self.unique[u]]
    }

    /// Order of the Gram basis: `N + 1` position directions plus one
    /// gradient per distinct point.
    pub fn basis_size(&self) -> usize {
        self.n_iter + 1 + self.len()
    }

    /// Position of distinct point `u` relative to `x*`, in the basis.
    fn xvec(&self, u: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.basis_size()];
        v[..=self.n_iter].copy_from_slice(&self.representative(u).coeffs[..=self.n_iter]);
        v
    }

    fn gvec(&self, u: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.basis_size()];
        v[self.n_iter + 1 + u] = 1.0;
        v
    }
}

fn unit(len: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[i] = 1.0;
    v
}

fn combine(a: &[f64], b: &[f64], gamma: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - gamma) * x + gamma * y)
        .collect()
}

/// Builds `𝒱` for `n` steps of `sched`, reproducing the AGD recursions in
/// coefficient space, and merges coincident points.
pub fn build_points(sched: &Schedule, n: usize) -> Result<PointSet> {
    build_points_with(sched, n, true)
}

/// As [`build_points`]; with `merge = false` every label stays a separate
/// point.
pub fn build_points_with(sched: &Schedule, n: usize, merge: bool) -> Result<PointSet> {
    if n == 0 || n > sched.horizon() {
        return Err(Error::Validation(format!(
            "N = {n} does not fit schedule horizon {}",
            sched.horizon()
        )));
    }
    let len = n + 2;
    let xs: Vec<Vec<f64>> = (0..=n).map(|k| unit(len, k)).collect();
    let mut bars = vec![xs[0].clone()];
    let mut unders = Vec::with_capacity(n);
    for k in 1..=n {
        let g = sched.gamma(k);
        unders.push(combine(&bars[k - 1], &xs[k - 1], g));
        bars.push(combine(&bars[k - 1], &xs[k], g));
    }
    let mut all = Vec::with_capacity(3 * n + 3);
    all.extend(xs.into_iter().enumerate().map(|(k, c)| PepPoint {
        tag: PointTag::X(k),
        coeffs: c,
    }));
    all.extend(bars.into_iter().enumerate().map(|(k, c)| PepPoint {
        tag: PointTag::XBar(k),
        coeffs: c,
    }));
    all.extend(unders.into_iter().enumerate().map(|(i, c)| PepPoint {
        tag: PointTag::XUnder(i + 1),
        coeffs: c,
    }));
    all.push(PepPoint {
        tag: PointTag::XStar,
        coeffs: unit(len, n + 1),
    });

    let mut unique: Vec<usize> = Vec::new();
    let mut class_of = Vec::with_capacity(all.len());
    for (i, p) in all.iter().enumerate() {
        let hit = unique.iter().position(|&r| {
            merge
                && all[r]
                    .coeffs
                    .iter()
                    .zip(&p.coeffs)
                    .all(|(a, b)| (a - b).abs() <= MERGE_TOL)
        });
        match hit {
            Some(u) => class_of.push(u),
            None => {
                class_of.push(unique.len());
                unique.push(i);
            }
        }
    }
    Ok(PointSet {
        n_iter: n,
        all,
        unique,
        class_of,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntryKind {
    /// `1/(2L)‖g_v − g_w‖² + ⟨g_w, v − w⟩ − f_v + f_w ≤ 0`
    Lower { v: PointTag, w: PointTag },
    /// `−⟨g_w, v − w⟩ − L/2‖v − w‖² + f_v − f_w ≤ 0`
    Upper { v: PointTag, w: PointTag },
    /// `⟨g(x̲_k) + η_k(x_k − x_{k−1}), x_k − w⟩ ≤ 0`
    Prox { k: usize, w: PointTag },
    /// `‖x0 − x*‖² ≤ R²`
    Radius,
}

impl EntryKind {
    pub fn label(&self) -> String {
        match self {
            EntryKind::Lower { v, w } => format!("lower({v},{w})"),
            EntryKind::Upper { v, w } => format!("upper({v},{w})"),
            EntryKind::Prox { k, w } => format!("prox({k},{w})"),
            EntryKind::Radius => "radius".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueEntry {
    pub kind: EntryKind,
    /// Quadratic form in the Gram basis.
    pub form: SymMatrix,
    /// Function-value coefficients over the distinct points.
    pub f_coef: Vec<f64>,
}

/// One problem of the family: schedule, horizon, constants, points and
/// inequality catalogue.
#[derive(Debug, Clone, PartialEq)]
pub struct PepInstance {
    pub schedule: Schedule,
    pub n_iter: usize,
    pub lipschitz: f64,
    pub radius: f64,
    pub points: PointSet,
    pub catalogue: Vec<CatalogueEntry>,
    pub merged: bool,
}

/// All lower/upper interpolation inequalities over ordered pairs of
/// distinct points, every prox inequality against `{x_0..x_N, x*}`, and
/// the radius constraint last.
pub fn build_catalogue(
    points: &PointSet,
    sched: &Schedule,
    lipschitz: f64,
) -> Result<Vec<CatalogueEntry>> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::Validation(
            "Lipschitz constant must be positive".into(),
        ));
    }
    let n = points.n_iter;
    let dim = points.basis_size();
    let u = points.len();
    let tag = |i: usize| points.representative(i).tag;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let mut out = Vec::with_capacity(2 * u * (u - 1) + n * (n + 2) + 1);

    for upper in [false, true] {
        for v in 0..u {
            for w in 0..u {
                if v == w {
                    continue;
                }
                let dx = diff(&points.xvec(v), &points.xvec(w));
                let gw = points.gvec(w);
                let mut form = SymMatrix::zeros(dim);
                let mut f_coef = vec![0.0; u];
                let kind = if upper {
                    form.add_sym_outer(-1.0, &gw, &dx);
                    form.add_sym_outer(-lipschitz / 2.0, &dx, &dx);
                    f_coef[v] = 1.0;
                    f_coef[w] = -1.0;
                    EntryKind::Upper {
                        v: tag(v),
                        w: tag(w),
                    }
                } else {
                    let dg = diff(&points.gvec(v), &gw);
                    form.add_sym_outer(1.0 / (2.0 * lipschitz), &dg, &dg);
                    form.add_sym_outer(1.0, &gw, &dx);
                    f_coef[v] = -1.0;
                    f_coef[w] = 1.0;
                    EntryKind::Lower {
                        v: tag(v),
                        w: tag(w),
                    }
                };
                out.push(CatalogueEntry { kind, form, f_coef });
            }
        }
    }

    let witnesses: Vec<PointTag> = (0..=n).map(PointTag::X).chain([PointTag::XStar]).collect();
    for k in 1..=n {
        let xu = points.index(PointTag::XUnder(k)).expect("x̲_k present");
        let xk = points.index(PointTag::X(k)).expect("x_k present");
        let xkm = points.index(PointTag::X(k - 1)).expect("x_{k−1} present");
        let eta = sched.eta(k);
        let mut left = points.gvec(xu);
        let step = diff(&points.xvec(xk), &points.xvec(xkm));
        left.iter_mut().zip(&step).for_each(|(l, s)| *l += eta * s);
        for &w in &witnesses {
            let wi = points.index(w).expect("witness present");
            let right = diff(&points.xvec(xk), &points.xvec(wi));
            let mut form = SymMatrix::zeros(dim);
            form.add_sym_outer(1.0, &left, &right);
            out.push(CatalogueEntry {
                kind: EntryKind::Prox { k, w },
                form,
                f_coef: vec![0.0; u],
            });
        }
    }

    let mut form = SymMatrix::zeros(dim);
    form.set(0, 0, 1.0);
    out.push(CatalogueEntry {
        kind: EntryKind::Radius,
        form,
        f_coef: vec![0.0; u],
    });
    Ok(out)
}

impl PepInstance {
    pub fn new(schedule: &Schedule, n_iter: usize, lipschitz: f64, radius: f64) -> Result<Self> {
        Self::with_merge(schedule, n_iter, lipschitz, radius, true)
    }

    pub fn with_merge(
        schedule: &Schedule,
        n_iter: usize,
        lipschitz: f64,
        radius: f64,
        merge: bool,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Validation("radius must be positive".into()));
        }
        let points = build_points_with(schedule, n_iter, merge)?;
        let catalogue = build_catalogue(&points, schedule, lipschitz)?;
        Ok(Self {
            schedule: schedule.truncated(n_iter)?,
            n_iter,
            lipschitz,
            radius,
            points,
            catalogue,
            merged: merge,
        })
    }

    /// The standard setting: `s1` with `L = 1`, `R = 1`.
    pub fn standard(n_iter: usize) -> Result<Self> {
        Self::new(
            &make_schedule(ScheduleName::S1, 1.0, n_iter.max(1))?,
            n_iter,
            1.0,
            1.0,
        )
    }

    pub fn radius_index(&self) -> usize {
        self.catalogue.len() - 1
    }

    /// Required function-value combination: `+1` at `x̲_N`, `−1` at `x*`.
    pub fn target(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.points.len()];
        t[self.points.index(PointTag::XUnder(self.n_iter)).unwrap()] += 1.0;
        t[self.points.index(PointTag::XStar).unwrap()] -= 1.0;
        t
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.catalogue.iter().position(|e| e.kind.label() == label)
    }

    pub fn label_map(&self) -> HashMap<String, usize> {
        self.catalogue
            .iter()
            .enumerate()
            .map(|(i, e)| (e.kind.label(), i))
            .collect()
    }

    /// `(#lower, #upper, #prox)` including the identically zero prox forms.
    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |f: fn(&EntryKind) -> bool| self.catalogue.iter().filter(|e| f(&e.kind)).count();
        (
            c(|k| matches!(k, EntryKind::Lower { .. })),
            c(|k| matches!(k, EntryKind::Upper { .. })),
            c(|k| matches!(k, EntryKind::Prox { .. })),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PepMode {
    /// All weights free.
    General,
    /// Interpolation weights fixed to the unconstrained-proof pattern, only
    /// the prox weights against `x*` free.
    Fixed,
    /// Prox weights fixed as well; only `d` free.
    Conjecture,
}

impl PepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PepMode::General => "general",
            PepMode::Fixed => "fixed",
            PepMode::Conjecture => "conjecture",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(PepMode::General),
            "fixed" => Ok(PepMode::Fixed),
            "conjecture" => Ok(PepMode::Conjecture),
            other => Err(Error::Validation(format!("unknown PEP mode '{other}'"))),
        }
    }
}

impl fmt::Display for PepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the fixed interpolation weights are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedConvention {
    /// Gradient at `x̲_k` in both families: `k(k−1)/(N(N+1))` on
    /// `(x̲_{k−1}, x̲_k)` and `2k/(N(N+1))` on `(x*, x̲_k)`. Balances the
    /// function values exactly.
    #[default]
    ProofAligned,
    /// `k(k−1)/(N(N+1))` on `(x̲_k, x̲_{k+1})` and `2(k−1)/(N(N+1))` on
    /// `(x̲_k, x*)`, read literally. Leaves `f(x*)` with a positive
    /// coefficient, so no certificate exists.
    AsPrinted,
}

/// Fixed interpolation weights `(catalogue index, weight)`.
pub fn fixed_lower_weights(inst: &PepInstance, conv: FixedConvention) -> Result<Vec<(usize, f64)>> {
    let n = inst.n_iter;
    let nn = (n * (n + 1)) as f64;
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut add = |v: PointTag, w: PointTag, weight: f64| -> Result<()> {
        if weight == 0.0 {
            return Ok(());
        }
        let (pv, pw) = (inst.points.index(v).unwrap(), inst.points.index(w).unwrap());
        let label = EntryKind::Lower {
            v: inst.points.representative(pv).tag,
            w: inst.points.representative(pw).tag,
        }
        .label();
        let idx = inst
            .label_index(&label)
            .ok_or_else(|| Error::Validation(format!("no catalogue entry {label}")))?;
        match out.iter_mut().find(|(i, _)| *i == idx) {
            Some(e) => e.1 += weight,
            None => out.push((idx, weight)),
        }
        Ok(())
    };
    for k in 1..=n {
        let kf = k as f64;
        match conv {
            FixedConvention::ProofAligned => {
                if k >= 2 {
                    add(
                        PointTag::XUnder(k - 1),
                        PointTag::XUnder(k),
                        kf * (kf - 1.0) / nn,
                    )?;
                }
                add(PointTag::XStar, PointTag::XUnder(k), 2.0 * kf / nn)?;
            }
            FixedConvention::AsPrinted => {
                if k < n {
                    add(
                        PointTag::XUnder(k),
                        PointTag::XUnder(k + 1),
                        kf * (kf - 1.0) / nn,
                    )?;
                }
                add(PointTag::XUnder(k), PointTag::XStar, 2.0 * (kf - 1.0) / nn)?;
            }
        }
    }
    Ok(out)
}

/// Conjectured prox weights `c_k`, `k = 1..N`: `2k/(N(N+1))` for
/// `k ≤ N − 2`, `(4N − 2)/(N(N+1))` at `k = N − 1`, zero at `k = N`.
pub fn conjectured_prox_weights(n: usize) -> Vec<f64> {
    let nn = (n * (n + 1)) as f64;
    (1..=n)
        .map(|k| {
            if k == n {
                0.0
            } else if k + 1 == n {
                (4.0 * n as f64 - 2.0) / nn
            } else {
                2.0 * k as f64 / nn
            }
        })
        .collect()
}

fn prox_star_index(inst: &PepInstance, k: usize) -> usize {
    inst.label_index(
        &EntryKind::Prox {
            k,
            w: PointTag::XStar,
        }
        .label(),
    )
    .expect("prox entry")
}

/// Conic program for one mode, with the map back to catalogue weights.
#[derive(Debug, Clone)]
pub struct AssembledSdp {
    pub sdp: SdpInstance,
    /// Catalogue index of each free orthant variable (the last one is `d`).
    pub free: Vec<usize>,
    /// Weights held fixed, by catalogue index.
    pub fixed: Vec<(usize, f64)>,
    /// Gram-basis directions kept in the PSD block.
    pub active: Vec<usize>,
}

pub fn assemble_sdp(
    inst: &PepInstance,
    mode: PepMode,
    conv: FixedConvention,
) -> Result<AssembledSdp> {
    let radius = inst.radius_index();
    let target = inst.target();
    let (free_entries, fixed): (Vec<usize>, Vec<(usize, f64)>) = match mode {
        PepMode::General => (
            (0..radius)
                .filter(|&i| !inst.catalogue[i].form.is_zero())
                .collect(),
            Vec::new(),
        ),
        PepMode::Fixed | PepMode::Conjecture => {
            if inst.schedule.name != ScheduleName::S1 {
                return Err(Error::UnsupportedMode(format!(
                    "{mode} mode is defined for the s1 schedule only"
                )));
            }
            if inst.n_iter < 2 {
                return Err(Error::UnsupportedMode(format!("{mode} mode needs N ≥ 2")));
            }
            let mut fixed = fixed_lower_weights(inst, conv)?;
            let mut fsum = vec![0.0; target.len()];
            for &(i, w) in &fixed {
                fsum.iter_mut()
                    .zip(&inst.catalogue[i].f_coef)
                    .for_each(|(s, c)| *s += w * c);
            }
            let resid = fsum
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if resid > 1e-12 {
                return Err(Error::Validation(format!(
                    "fixed interpolation weights violate function-value matching (residual {resid:.3e})"
                )));
            }
            let prox: Vec<usize> = (1..=inst.n_iter)
                .map(|k| prox_star_index(inst, k))
                .collect();
            if mode == PepMode::Fixed {
                (prox, fixed)
            } else {
                fixed.extend(prox.into_iter().zip(conjectured_prox_weights(inst.n_iter)));
                (Vec::new(), fixed)
            }
        }
    };
    let mut free = free_entries;
    free.push(radius);

    let full = inst.points.basis_size();
    let involved: Vec<usize> = free
        .iter()
        .copied()
        .chain(fixed.iter().map(|&(i, _)| i))
        .collect();
    let mut touched = vec![false; full];
    for &i in &involved {
        let form = &inst.catalogue[i].form;
        for (r, t) in touched.iter_mut().enumerate() {
            if !*t && (0..full).any(|c| form.get(r, c) != 0.0) {
                *t = true;
            }
        }
    }
    let active: Vec<usize> = (0..full).filter(|&r| touched[r]).collect();
    let face = Face::new(&active, inst.n_iter + 1);

    let mut constant = SymMatrix::zeros(full);
    for &(i, w) in &fixed {
        constant.add_scaled(w, &inst.catalogue[i].form);
    }
    let (c_svec, c_kernel) = face.reduce(&constant);
    let nf = free.len();
    let reduced: Vec<(Vec<f64>, Vec<f64>)> = free
        .iter()
        .map(|&i| face.reduce(&inst.catalogue[i].form))
        .collect();

    // rows touching only the orthant block: function-value matching (the x*
    // row is implied, coefficients of every entry sum to zero) and the
    // kernel conditions S·u = 0
    let star = inst.points.index(PointTag::XStar).unwrap();
    let mut orth_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    if mode == PepMode::General {
        for u in (0..inst.points.len()).filter(|&u| u != star) {
            let row = free.iter().map(|&i| inst.catalogue[i].f_coef[u]).collect();
            orth_rows.push((row, target[u]));
        }
    }
    for j in 0..c_kernel.len() {
        orth_rows.push((reduced.iter().map(|(_, k)| k[j]).collect(), -c_kernel[j]));
    }
    let orth_rows = independent_rows(orth_rows)?;

    let order = face.order();
    let p = packed_len(order);
    let m0 = orth_rows.len();
    let (m, n) = (m0 + p, nf + p);
    let mut a = SparseMatrix::zeros(m, n);
    let mut rhs = vec![0.0; m];
    for (r, (row, b)) in orth_rows.iter().enumerate() {
        rhs[r] = *b;
        for (col, &v) in row.iter().enumerate() {
            if v != 0.0 {
                a.add(r, col, v);
            }
        }
    }
    for t in 0..p {
        rhs[m0 + t] = -c_svec[t];
        a.add(m0 + t, nf + t, -1.0);
    }
    for (col, (sv, _)) in reduced.iter().enumerate() {
        for (t, &v) in sv.iter().enumerate() {
            if v != 0.0 {
                a.add(m0 + t, col, v);
            }
        }
    }
    let mut obj = vec![0.0; n];
    obj[nf - 1] = 1.0;
    let sdp = SdpInstance::new(
        obj,
        a,
        rhs,
        ConeLayout {
            nonneg: nf,
            psd_order: order,
        },
    )?;
    Ok(AssembledSdp {
        sdp,
        free,
        fixed,
        active,
    })
}

/// Face of the PSD cone every certificate matrix lies on. Only directions
/// touched by some form are kept, and since each form's gradient block is a
/// graph Laplacian the all-ones gradient direction `u` satisfies `uᵀSu = 0`,
/// hence `Su = 0`. With `T = [e_1, …, e_{q−1}, u]`, `TᵀST` is `S` minus its
/// last gradient row and column, bordered by zeros, so `S ⪰ 0` iff that
/// principal block is PSD and the position rows of `Su` vanish.
struct Face {
    active: Vec<usize>,
    /// Number of kept position directions (they come first).
    n_x: usize,
    reduce_grad: bool,
}

impl Face {
    fn new(active: &[usize], n_pos: usize) -> Self {
        let n_x = active.iter().filter(|&&r| r < n_pos).count();
        Self {
            active: active.to_vec(),
            n_x,
            reduce_grad: active.len() > n_x,
        }
    }

    fn order(&self) -> usize {
        self.active.len() - usize::from(self.reduce_grad)
    }

    /// `svec` of the kept principal block and the position rows of `M u`.
    fn reduce(&self, form: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
        let k = self.order();
        let mut out = SymMatrix::zeros(k);
        for (a, &r) in self.active[..k].iter().enumerate() {
            for (b, &c) in self.active[a..k].iter().enumerate() {
                out.set(a, a + b, form.get(r, c));
            }
        }
        let kernel = if self.reduce_grad {
            let grads = &self.active[self.n_x..];
            self.active[..self.n_x]
                .iter()
                .map(|&r| grads.iter().map(|&g| form.get(r, g)).sum())
                .collect()
        } else {
            Vec::new()
        };
        (svec(&out).into_vec(), kernel)
    }
}

/// Drops rows linearly dependent on earlier ones, failing when a dropped
/// row's right-hand side is inconsistent with them.
fn independent_rows(rows: Vec<(Vec<f64>, f64)>) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    for (row, b) in rows {
        let scale = row.iter().map(|t| t * t).sum::<f64>().sqrt();
        if scale == 0.0 {
            if b.abs() > 1e-10 {
                return Err(Error::Validation(format!(
                    "no certificate exists: constraint 0 = {b:.3e}"
                )));
            }
            continue;
        }
        let (mut r, mut rb) = (row.clone(), b);
        for _ in 0..2 {
            for (q, qb) in &basis {
                let c: f64 = q.iter().zip(&r).map(|(x, y)| x * y).sum();
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                rb -= c * qb;
            }
        }
        let nr = r.iter().map(|t| t * t).sum::<f64>().sqrt();
        if nr <= 1e-10 * scale {
            if rb.abs() > 1e-8 * (1.0 + b.abs()) {
                return Err(Error::Validation(format!(
                    "no certificate exists: inconsistent constraints ({rb:.3e})"
                )));
            }
            continue;
        }
        r.iter_mut().for_each(|t| *t /= nr);
        basis.push((r, rb / nr));
        kept.push((row, b));
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Largest deviation of the weighted function-value coefficients from
    /// the target.
    pub linear_residual: f64,
    /// Smallest eigenvalue of the weighted matrix.
    pub min_eig: f64,
    /// Most negative weight (zero when all are nonnegative).
    pub min_weight: f64,
    pub verified: bool,
}

/// Checks a weighting against the catalogue, rebuilding both the
/// function-value combination and the matrix from the entries.
/// `weights` covers every catalogue entry except the radius, whose weight
/// is `d`.
pub fn verify_certificate(inst: &PepInstance, weights: &[f64], d: f64) -> Result<Verification> {
    let radius = inst.radius_index();
    if weights.len() != radius {
        return Err(Error::Dimension {
            expected: radius,
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) || !d.is_finite() {
        return Err(Error::NonFinite("certificate weights"));
    }
    let target = inst.target();
    let mut fsum = vec![0.0; target.len()];
    let mut m = SymMatrix::zeros(inst.points.basis_size());
    for (e, &w) in inst.catalogue.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (s, c) in fsum.iter_mut().zip(&e.f_coef) {
            *s += w * c;
        }
        m.add_scaled(w, &e.form);
    }
    m.add_scaled(d, &inst.catalogue[radius].form);
    let linear_residual = fsum
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let min_eig = sym_eig(&m)?.min_eigenvalue();
    let min_weight = weights.iter().copied().chain([d]).fold(0.0, f64::min);
    let verified =
        linear_residual <= VERIFY_TOL && min_eig >= -VERIFY_TOL && min_weight >= -VERIFY_TOL;
    Ok(Verification {
        linear_residual,
        min_eig,
        min_weight,
        verified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub linear_residual: f64,
    pub min_eig: f64,
    pub verified: bool,
    pub solve_seconds: f64,
}

/// Self-contained dual certificate; [`PepCertificate::rebuild`] recreates
/// the instance so it can be re-verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PepCertificate {
    pub n_iter: usize,
    pub schedule: Schedule,
    pub lipschitz: f64,
    pub radius: f64,
    pub mode: PepMode,
    pub fixed_convention: FixedConvention,
    #[serde(default = "merged_default")]
    pub merged_points: bool,
    pub d: f64,
    /// Nonzero weights by catalogue label; the radius weight is `d`.
    pub weights: Vec<WeightEntry>,
    pub diagnostics: Diagnostics,
}

fn merged_default() -> bool {
    true
}

impl PepCertificate {
    pub fn rebuild(&self) -> Result<PepInstance> {
        PepInstance::with_merge(
            &self.schedule,
            self.n_iter,
            self.lipschitz,
            self.radius,
            self.merged_points,
        )
    }

    /// Dense weight vector in catalogue order (radius excluded).
    pub fn weight_vector(&self, inst: &PepInstance) -> Result<Vec<f64>> {
        let mut w = vec![0.0; inst.radius_index()];
        let map = inst.label_map();
        for e in &self.weights {
            let i = map
                .get(&e.label)
                .copied()
                .filter(|&i| i != inst.radius_index())
                .ok_or_else(|| {
                    Error::Validation(format!("unknown catalogue label '{}'", e.label))
                })?;
            w[i] += e.weight;
        }
        Ok(w)
    }

    pub fn verify(&self) -> Result<Verification> {
        let inst = self.rebuild()?;
        verify_certificate(&inst, &self.weight_vector(&inst)?, self.d)
    }

    /// `d·R²`, the certified bound on `f(x̲_N) − f(x*)`.
    pub fn bound(&self) -> f64 {
        self.d * self.radius * self.radius
    }

    /// Prox weight against `x*` at step `k`.
    pub fn prox_star_weight(&self, k: usize) -> f64 {
        let label = EntryKind::Prox {
            k,
            w: PointTag::XStar,
        }
        .label();
        self.weights
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.weight)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepOptions {
    pub sdp: SdpSettings,
    pub convention: FixedConvention,
}

impl Default for PepOptions {
    fn default() -> Self {
        Self {
            sdp: SdpSettings {
                tolerance: PEP_SOLVER_TOL,
                ..SdpSettings::default()
            },
            convention: FixedConvention::default(),
        }
    }
}

/// Solves one mode and verifies the result. Solver failures surface as
/// [`Error::Solver`]; a solved but unverified certificate is returned with
/// `verified = false`.
pub fn solve_pep(inst: &PepInstance, mode: PepMode, opts: &PepOptions) -> Result<PepCertificate> {
    let asm = assemble_sdp(inst, mode, opts.convention)?;
    let start = Instant::now();
    let sol = solve_conic(&asm.sdp, &opts.sdp)?;
    let seconds = start.elapsed().as_secs_f64();
    if sol.status != SdpStatus::Solved {
        return Err(Error::Solver {
            reason: format!(
                "PEP solve for N = {} in {mode} mode ended with status {:?}",
                inst.n_iter, sol.status
            ),
            primal: sol.residuals.primal,
            dual: sol.residuals.dual,
            gap: sol.residuals.gap,
        });
    }
    let mut weights = vec![0.0; inst.radius_index()];
    for &(i, w) in &asm.fixed {
        weights[i] += w;
    }
    let nf = asm.free.len();
    for (col, &i) in asm.free[..nf - 1].iter().enumerate() {
        weights[i] += sol.primal[col];
    }
    let d = sol.primal[nf - 1];
    let ver = verify_certificate(inst, &weights, d)?;
    let entries = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, &w)| WeightEntry {
            label: inst.catalogue[i].kind.label(),
            weight: w,
        })
        .collect();
    Ok(PepCertificate {
        n_iter: inst.n_iter,
        schedule: inst.schedule.clone(),
        lipschitz: inst.lipschitz,
        radius: inst.radius,
        mode,
        fixed_convention: opts.convention,
        merged_points: inst.merged,
        d,
        weights: entries,
        diagnostics: Diagnostics {
            status: sol.status,
            iterations: sol.iterations,
            primal_residual: sol.residuals.primal,
            dual_residual: sol.residuals.dual,
            gap: sol.residuals.gap,
            linear_residual: ver.linear_residual,
            min_eig: ver.min_eig,
            verified: ver.verified,
            solve_seconds: seconds,
        },
    })
}

/// Conjecture-mode `d` from the Schur complement: with the prox and
/// interpolation weights fixed, `M0 + d·e₀e₀ᵀ ⪰ 0` holds iff the trailing
/// block `B` is PSD, `b ∈ range(B)` and `d ≥ bᵀB⁺b − m₀₀`. Returns `None`
/// when no `d` works.
pub fn conjecture_d_closed_form(inst: &PepInstance) -> Result<Option<f64>> {
    let asm = assemble_sdp(inst, PepMode::Conjecture, FixedConvention::ProofAligned)?;
    let order = inst.points.basis_size();
    let mut m0 = SymMatrix::zeros(order);
    for &(i, w) in &asm.fixed {
        m0.add_scaled(w, &inst.catalogue[i].form);
    }
    let k = order - 1;
    let mut bmat = SymMatrix::zeros(k);
    for i in 0..k {
        for j in i..k {
            bmat.set(i, j, m0.get(i + 1, j + 1));
        }
    }
    let bvec: Vec<f64> = (0..k).map(|i| m0.get(0, i + 1)).collect();
    let eig = sym_eig(&bmat)?;
    let scale = 1.0 + eig.max_eigenvalue().abs();
    if eig.min_eigenvalue() < -1e-9 * scale {
        return Ok(None);
    }
    let mut quad = 0.0;
    for j in 0..k {
        let v = eig.vector(j);
        let proj: f64 = v.iter().zip(&bvec).map(|(a, b)| a * b).sum();
        if eig.eigenvalues[j] > 1e-9 * scale {
            quad += proj * proj / eig.eigenvalues[j];
        } else if proj.abs() > 1e-7 {
            return Ok(None);
        }
    }
    Ok(Some((quad - m0.get(0, 0)).max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_iter: usize,
    pub mode: PepMode,
    pub d: f64,
    pub d_scaled_by_n_sq: f64,
    pub linear_residual: f64,
    pub min_eig: f64,
    pub solve_seconds: f64,
    pub verified: bool,
    pub status: Option<SdpStatus>,
    /// Set when the solve failed.
    pub error: Option<String>,
}

/// Solves every `(N, mode)` pair for the standard setting, in parallel on
/// `threads` workers (0 = rayon default). Output is sorted by `(N, mode)`
/// and independent of scheduling.
pub fn sweep(
    n_min: usize,
    n_max: usize,
    modes: &[PepMode],
    opts: &PepOptions,
    threads: usize,
) -> Result<Vec<(SweepRow, Option<PepCertificate>)>> {
    if n_min == 0 || n_min > n_max {
        return Err(Error::Validation(format!(
            "invalid N range {n_min}..={n_max}"
        )));
    }
    let jobs: Vec<(usize, PepMode)> = (n_min..=n_max)
        .flat_map(|n| modes.iter().map(move |&m| (n, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let mut rows: Vec<(SweepRow, Option<PepCertificate>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, mode)| {
                let res = PepInstance::standard(n).and_then(|inst| solve_pep(&inst, mode, opts));
                match res {
                    Ok(cert) => (
                        SweepRow {
                            n_iter: n,
                            mode,
                            d: cert.d,
                            d_scaled_by_n_sq: cert.d * (n * n) as f64,
                            linear_residual: cert.diagnostics.linear_residual,
                            min_eig: cert.diagnostics.min_eig,
                            solve_seconds: cert.diagnostics.solve_seconds,
                            verified: cert.diagnostics.verified,
                            status: Some(cert.diagnostics.status),
                            error: None,
                        },
                        Some(cert),
                    ),
                    Err(e) => (
                        SweepRow {
                            n_iter: n,
                            mode,
                            d: f64::NAN,
                            d_scaled_by_n_sq: f64::NAN,
                            linear_residual: f64::NAN,
                            min_eig: f64::NAN,
                            solve_seconds: 0.0,
                            verified: false,
                            status: None,
                            error: Some(e.to_string()),
                        },
                        None,
                    ),
                }
            })
            .collect()
    });
    rows.sort_by_key(|(r, _)| (r.n_iter, r.mode));
    Ok(rows)
}

/// CSV with columns `N,mode,d,d_scaled_by_N_sq,linear_residual,min_eig,
/// solve_seconds,verified`. With `deterministic`, timings are written as 0.
pub fn write_sweep_csv<W: std::io::Write>(
    mut w: W,
    rows: &[SweepRow],
    deterministic: bool,
) -> std::io::Result<()> {
    use crate::agd::fmt_num;
    writeln!(
        w,
        "N,mode,d,d_scaled_by_N_sq,linear_residual,min_eig,solve_seconds,verified"
    )?;
    for r in rows {
        let secs = if deterministic { 0.0 } else { r.solve_seconds };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.n_iter,
            r.mode,
            fmt_num(Some(r.d)),
            fmt_num(Some(r.d_scaled_by_n_sq)),
            fmt_num(Some(r.linear_residual)),
            fmt_num(Some(r.min_eig)),
            fmt_num(Some(secs)),
            r.verified
        )?;
    }
    Ok(())
}

/// `c_{k,x*}·N(N+1)` from fixed-mode solves, one row per `(N, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n_iter: usize,
    pub k: usize,
    pub scaled_weight: f64,
    pub conjectured: f64,
}

pub fn table1(
    n_min: usize,
    n_max: usize,
    opts: &PepOptions,
    threads: usize,
) -> Result<Vec<Table1Row>> {
    let rows = sweep(n_min, n_max, &[PepMode::Fixed], opts, threads)?;
    let mut out = Vec::new();
    for (row, cert) in rows {
        let cert = match cert {
            Some(c) => c,
            None => {
                return Err(Error::Solver {
                    reason: row.error.unwrap_or_default(),
                    primal: f64::NAN,
                    dual: f64::NAN,
                    gap: f64::NAN,
                })
            }
        };
        let n = row.n_iter;
        let nn = (n * (n + 1)) as f64;
        let conj = conjectured_prox_weights(n);
        for k in 1..=n {
            out.push(Table1Row {
                n_iter: n,
                k,
                scaled_weight: cert.prox_star_weight(k) * nn,
                conjectured: conj[k - 1] * nn,
            });
        }
    }
    Ok(out)
}
