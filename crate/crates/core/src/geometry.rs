//! Norms, distance-generating functions, Bregman divergences, feasible sets
//! and the prox-mapping subproblem
//! `argmin_{x ∈ X} ⟨g, x⟩ + η·V(anchor, x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1, norm2, norm_inf, DenseVector};

/// Membership tolerance for feasibility checks.
pub const FEAS_TOL: f64 = 1e-12;
/// Entropy prox coordinates are kept at or above this value.
pub const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    Euclidean,
    Ell1,
}

impl NormKind {
    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => norm2(x),
            NormKind::Ell1 => norm1(x),
        }
    }

    /// ℓ2 is self-dual; the dual of ℓ1 is ℓ∞.
    pub fn dual_norm(self, x: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => norm2(x),
            NormKind::Ell1 => norm_inf(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace {
        dim: usize,
    },
    Box {
        lower: DenseVector,
        upper: DenseVector,
    },
    Ball {
        center: DenseVector,
        radius: f64,
    },
    Simplex {
        dim: usize,
    },
}

impl FeasibleSet {
    pub fn whole_space(dim: usize) -> Self {
        FeasibleSet::WholeSpace { dim }
    }

    /// Random point of the set. Whole-space draws come from `[-3, 3]^n`;
    /// simplex draws stay away from the boundary.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        match self {
            FeasibleSet::WholeSpace { .. } => (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            FeasibleSet::Box { lower, upper } => {
                (0..n).map(|i| rng.gen_range(lower[i]..=upper[i])).collect()
            }
            FeasibleSet::Ball { center, radius } => loop {
                let v: Vec<f64> = (0..n)
                    .map(|i| center[i] + radius * rng.gen_range(-1.0..1.0))
                    .collect();
                if self.contains(&v, 0.0) {
                    break v;
                }
            },
            FeasibleSet::Simplex { .. } => {
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            }
        }
    }

    /// `count` points drawn from a ChaCha8 stream seeded with `seed`.
    pub fn sample_seeded(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation(
                "simplex dimension must be positive".into(),
            ));
        }
        Ok(FeasibleSet::Simplex { dim })
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Validation("box requires lower <= upper".into()));
        }
        Ok(FeasibleSet::Box {
            lower: DenseVector::new(lower)?,
            upper: DenseVector::new(upper)?,
        })
    }

    pub fn unit_box(dim: usize) -> Self {
        Self::new_box(vec![0.0; dim], vec![1.0; dim]).expect("valid box")
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Validation("ball radius must be positive".into()));
        }
        Ok(FeasibleSet::Ball {
            center: DenseVector::new(center)?,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::WholeSpace { dim } | FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, FeasibleSet::WholeSpace { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FeasibleSet::WholeSpace { .. } => "whole_space",
            FeasibleSet::Box { .. } => "box",
            FeasibleSet::Ball { .. } => "ball",
            FeasibleSet::Simplex { .. } => "simplex",
        }
    }

    /// Membership within `tol`, scaled by the magnitude of the data.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            FeasibleSet::WholeSpace { .. } => true,
            FeasibleSet::Box { lower, upper } => {
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .all(|(v, (l, u))| {
                        *v >= l - tol * (1.0 + l.abs()) && *v <= u + tol * (1.0 + u.abs())
                    })
            }
            FeasibleSet::Ball { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center.iter()).map(|(a, b)| a - b).collect();
                norm2(&d) <= radius * (1.0 + tol) + tol
            }
            FeasibleSet::Simplex { .. } => {
                x.iter().all(|v| *v >= -tol)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= tol * x.len().max(1) as f64
            }
        }
    }

    /// `min_{w ∈ X} ⟨h, w⟩`; `None` when unbounded below.
    pub fn linear_min(&self, h: &[f64]) -> Option<f64> {
        match self {
            FeasibleSet::WholeSpace { .. } => h.iter().all(|v| *v == 0.0).then_some(0.0),
            FeasibleSet::Box { lower, upper } => Some(
                h.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(hi, (l, u))| (hi * l).min(hi * u))
                    .sum(),
            ),
            FeasibleSet::Ball { center, radius } => Some(dot(h, center) - radius * norm2(h)),
            FeasibleSet::Simplex { .. } => h.iter().copied().reduce(f64::min),
        }
    }

    /// A vertex (or boundary point for balls) attaining [`Self::linear_min`].
    pub fn linear_argmin(&self, h: &[f64]) -> Option<Vec<f64>> {
        match self {
            FeasibleSet::WholeSpace { .. } => None,
            FeasibleSet::Box { lower, upper } => Some(
                h.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(hi, (l, u))| if *hi >= 0.0 { *l } else { *u })
                    .collect(),
            ),
            FeasibleSet::Ball { center, radius } => {
                let nh = norm2(h);
                Some(if nh == 0.0 {
                    center.to_vec()
                } else {
                    center
                        .iter()
                        .zip(h)
                        .map(|(c, hi)| c - radius * hi / nh)
                        .collect()
                })
            }
            FeasibleSet::Simplex { dim } => {
                let mut best = 0;
                for i in 1..*dim {
                    if h[i] < h[best] {
                        best = i;
                    }
                }
                let mut v = vec![0.0; *dim];
                v[best] = 1.0;
                Some(v)
            }
        }
    }
}

/// Distance-generating function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dgf {
    /// `½‖x‖₂²`
    HalfSquaredEuclidean,
    /// `Σ xᵢ ln xᵢ`, 1-strongly convex w.r.t. ℓ1 on the simplex.
    NegativeEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub norm: NormKind,
    pub dgf: Dgf,
    pub set: FeasibleSet,
}

impl Geometry {
    pub fn new(norm: NormKind, dgf: Dgf, set: FeasibleSet) -> Result<Self> {
        match (norm, dgf, &set) {
            (NormKind::Euclidean, Dgf::HalfSquaredEuclidean, _) => {}
            (NormKind::Ell1, Dgf::NegativeEntropy, FeasibleSet::Simplex { .. }) => {}
            _ => {
                return Err(Error::Validation(format!(
                    "incompatible geometry: {norm:?} norm, {dgf:?} on {}",
                    set.tag()
                )))
            }
        }
        Ok(Self { norm, dgf, set })
    }

    pub fn euclidean(set: FeasibleSet) -> Self {
        Self {
            norm: NormKind::Euclidean,
            dgf: Dgf::HalfSquaredEuclidean,
            set,
        }
    }

    pub fn entropy_simplex(dim: usize) -> Result<Self> {
        Self::new(
            NormKind::Ell1,
            Dgf::NegativeEntropy,
            FeasibleSet::simplex(dim)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn is_euclidean(&self) -> bool {
        self.dgf == Dgf::HalfSquaredEuclidean
    }

    /// `∇ν(x)` up to an additive constant (which cancels in every use).
    fn dgf_grad(&self, x: &[f64]) -> Vec<f64> {
        match self.dgf {
            Dgf::HalfSquaredEuclidean => x.to_vec(),
            Dgf::NegativeEntropy => x.iter().map(|v| v.ln()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: DenseVector,
    /// Largest violation of the prox optimality condition over `X`.
    pub vi_residual: f64,
}

fn check_dim(geom: &Geometry, x: &[f64]) -> Result<()> {
    if x.len() != geom.dim() {
        return Err(Error::Dimension {
            expected: geom.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `V(x, z) = ν(z) − ν(x) − ⟨∇ν(x), z − x⟩`
pub fn bregman_divergence(geom: &Geometry, x: &[f64], z: &[f64]) -> Result<f64> {
    check_dim(geom, x)?;
    check_dim(geom, z)?;
    match geom.dgf {
        Dgf::HalfSquaredEuclidean => {
            Ok(0.5 * x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        Dgf::NegativeEntropy => {
            let mut v = 0.0;
            for (xi, zi) in x.iter().zip(z) {
                if !(*xi > 0.0) {
                    return Err(Error::Domain(format!(
                        "entropy divergence needs positive anchor coordinates, got {xi}"
                    )));
                }
                if *zi < 0.0 {
                    return Err(Error::Domain(format!(
                        "entropy divergence needs nonnegative coordinates, got {zi}"
                    )));
                }
                let zlog = if *zi == 0.0 { 0.0 } else { zi * (zi / xi).ln() };
                v += zlog - zi + xi;
            }
            Ok(v.max(0.0))
        }
    }
}

/// Euclidean projection onto `set`.
pub fn project(set: &FeasibleSet, x: &[f64]) -> Result<DenseVector> {
    if x.len() != set.dim() {
        return Err(Error::Dimension {
            expected: set.dim(),
            got: x.len(),
        });
    }
    let out = match set {
        FeasibleSet::WholeSpace { .. } => x.to_vec(),
        FeasibleSet::Box { lower, upper } => x
            .iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect(),
        FeasibleSet::Ball { center, radius } => {
            let d: Vec<f64> = x.iter().zip(center.iter()).map(|(a, b)| a - b).collect();
            let nd = norm2(&d);
            if nd <= *radius {
                x.to_vec()
            } else {
                let s = radius / nd;
                center.iter().zip(&d).map(|(c, di)| c + s * di).collect()
            }
        }
        FeasibleSet::Simplex { .. } => project_simplex(x),
    };
    DenseVector::new(out)
}

/// Sort-and-threshold projection onto the unit simplex.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        // coordinates sitting exactly on the threshold are kept
        if uj - t >= 0.0 {
            tau = t;
        }
    }
    x.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Solves `argmin_{x ∈ X} ⟨g, x⟩ + η·V(anchor, x)`.
pub fn bregman_prox(geom: &Geometry, g: &[f64], anchor: &[f64], eta: f64) -> Result<ProxResult> {
    check_dim(geom, g)?;
    check_dim(geom, anchor)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Precondition(format!(
            "prox step eta must be positive, got {eta}"
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prox gradient"));
    }
    if !geom.set.contains(anchor, FEAS_TOL) {
        return Err(Error::Precondition("prox anchor is not feasible".into()));
    }
    let point = match geom.dgf {
        Dgf::HalfSquaredEuclidean => {
            let shifted: Vec<f64> = anchor.iter().zip(g).map(|(a, gi)| a - gi / eta).collect();
            project(&geom.set, &shifted)?.into_vec()
        }
        Dgf::NegativeEntropy => {
            if anchor.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::Domain(
                    "entropy prox anchor must be strictly positive".into(),
                ));
            }
            let logits: Vec<f64> = anchor
                .iter()
                .zip(g)
                .map(|(a, gi)| a.ln() - gi / eta)
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut p: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v = (*v / z).max(ENTROPY_FLOOR);
            }
            p
        }
    };
    let vi_residual = prox_vi_residual(geom, g, anchor, eta, &point)?;
    Ok(ProxResult {
        point: DenseVector::new(point)?,
        vi_residual,
    })
}

/// `max_{w ∈ X} ⟨g, p − w⟩ − η(V(a,w) − V(p,w) − V(a,p))`, clipped at zero.
///
/// By the three-point identity the bracket equals `⟨∇ν(p) − ∇ν(a), w − p⟩`,
/// so the violation is linear in `w` and is maximized exactly over `X`.
/// On the whole space a nonzero linear term is unbounded; its norm is
/// reported instead.
pub fn prox_vi_residual(
    geom: &Geometry,
    g: &[f64],
    anchor: &[f64],
    eta: f64,
    point: &[f64],
) -> Result<f64> {
    let gp = geom.dgf_grad(point);
    let ga = geom.dgf_grad(anchor);
    let h: Vec<f64> = (0..g.len()).map(|i| g[i] + eta * (gp[i] - ga[i])).collect();
    let r = match geom.set.linear_min(&h) {
        Some(m) => dot(&h, point) - m,
        None => norm2(&h),
    };
    Ok(r.max(0.0))
}

/// Euclidean diameter of the feasible set; `None` when unbounded.
///
/// Entropy geometries report `None`: the quantities built on the diameter
/// there (the supremum of the divergence) are infinite.
pub fn set_diameter(geom: &Geometry) -> Option<f64> {
    if geom.dgf == Dgf::NegativeEntropy {
        return None;
    }
    match &geom.set {
        FeasibleSet::WholeSpace { .. } => None,
        FeasibleSet::Box { lower, upper } => Some(norm2(
            &lower
                .iter()
                .zip(upper.iter())
                .map(|(l, u)| u - l)
                .collect::<Vec<_>>(),
        )),
        FeasibleSet::Ball { radius, .. } => Some(2.0 * radius),
        FeasibleSet::Simplex { dim } => Some(if *dim > 1 {
            std::f64::consts::SQRT_2
        } else {
            0.0
        }),
    }
}
