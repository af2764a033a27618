//! Accelerated gradient descent over Euclidean and Bregman geometries, with
//! evaluators for the function-value bounds of both the approximate-solution
//! sequence and the gradient-evaluation sequence, and a dual
//! performance-estimation SDP that certifies worst-case rates numerically.

pub mod agd;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod pep;
pub mod problems;
pub mod sdp;

pub use agd::{
    all_bounds, bound_xl, bound_xl_unconstrained, bound_xu, compute_delta, make_schedule, run_agd,
    BoundId, BoundReport, DeltaBreakdown, Monotonicity, ReferencePoint, Schedule, ScheduleName,
    Trajectory,
};
pub use error::{Error, Result};
pub use geometry::{
    bregman_divergence, bregman_prox, project, Dgf, FeasibleSet, Geometry, NormKind, ProxResult,
};
pub use linalg::{sym_eig, DenseVector, EigDecomposition, Matrix, SymMatrix};
pub use pep::{
    solve_pep, sweep, table1, verify_certificate, FixedConvention, PepCertificate, PepInstance,
    PepMode, PepOptions, SweepRow, Table1Row, Verification,
};
pub use problems::{
    finite_diff_check, lipschitz, reference_optimum, Objective, Problem, ReferenceOptimum,
};
pub use sdp::{
    solve_conic, ConeLayout, SdpInstance, SdpSettings, SdpSolution, SdpStatus, SparseMatrix,
};
