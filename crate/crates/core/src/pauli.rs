//! Spin-1/2 matrices.

use faer::{c64, Mat};

use crate::operator::{tensor, LocalOperator};
use crate::region::Region;

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn sigma_x() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

pub fn sigma_y() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c(0.0, -1.0),
        (1, 0) => c(0.0, 1.0),
        _ => c(0.0, 0.0),
    })
}

pub fn sigma_z() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(1.0, 0.0),
        (1, 1) => c(-1.0, 0.0),
        _ => c(0.0, 0.0),
    })
}

/// A single-site Hermitian 2×2 operator placed at `at`.
///
/// # Panics
/// If `at` is not a single site or `m` is not Hermitian.
pub fn on(at: Region, m: Mat<c64>) -> LocalOperator {
    assert_eq!(at.volume(), 1, "Pauli operators act on one site");
    LocalOperator::hermitian(at, 2, m).expect("Pauli matrices are Hermitian")
}

pub fn x(at: Region) -> LocalOperator {
    on(at, sigma_x())
}

pub fn y(at: Region) -> LocalOperator {
    on(at, sigma_y())
}

pub fn z(at: Region) -> LocalOperator {
    on(at, sigma_z())
}

/// `σ^a ⊗ σ^b` on two distinct sites.
pub fn pair(a: Mat<c64>, at_a: Region, b: Mat<c64>, at_b: Region) -> LocalOperator {
    tensor(&on(at_a, a), &on(at_b, b)).expect("distinct single sites")
}
