//! Fixtures shared by the benchmarks.

use agdcert::{FeasibleSet, Geometry, Objective, SymMatrix};

/// Symmetric `n × n` matrix with a deterministic, well-spread spectrum.
pub fn test_matrix(n: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5;
            m.set(
                i,
                j,
                if i == j {
                    v + 2.0
                } else {
                    v / (1.0 + (j - i) as f64)
                },
            );
        }
    }
    m
}

/// Diagonally dominant quadratic on the unit box in `n` dimensions.
pub fn box_qp(n: usize) -> (Objective, Geometry, Vec<f64>) {
    let q = test_matrix(n);
    let c: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { -3.0 } else { 0.5 })
        .collect();
    let obj = Objective::quadratic(q, c).expect("valid quadratic");
    (
        obj,
        Geometry::euclidean(FeasibleSet::unit_box(n)),
        vec![0.5; n],
    )
}
