//! Seeded random states and observables for the property suites.

use faer::{c64, Mat};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::operator::{LocalOperator, DEFAULT_MAX_DENSE_DIM};
use crate::region::Region;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Complex Ginibre matrix with standard normal entries.
pub fn random_matrix(r: &mut Rng, d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |_, _| c64::new(normal(r), normal(r)))
}

fn dim_of(region: &Region, n: usize) -> usize {
    crate::operator::dense_dim(region, n, DEFAULT_MAX_DENSE_DIM).expect("random operator too large")
}

/// GUE-like Hermitian matrix `(G + G*)/2`.
pub fn random_hermitian(r: &mut Rng, support: Region, n: usize) -> LocalOperator {
    let d = dim_of(&support, n);
    let g = random_matrix(r, d);
    let h = Mat::from_fn(d, d, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
    LocalOperator::hermitian(support, n, h).expect("symmetrized matrix")
}

/// Full-rank density matrix `GG*/Tr(GG*)` from a Ginibre matrix.
pub fn random_density(r: &mut Rng, support: Region, n: usize) -> LocalOperator {
    let d = dim_of(&support, n);
    random_density_of_rank(r, support, n, d)
}

/// Density matrix of rank at most `rank` (`G` is `d × rank`).
pub fn random_density_of_rank(r: &mut Rng, support: Region, n: usize, rank: usize) -> LocalOperator {
    let d = dim_of(&support, n);
    let g = Mat::from_fn(d, rank, |_, _| c64::new(normal(r), normal(r)));
    let p = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| p[(i, i)].re).sum();
    let p = Mat::from_fn(d, d, |i, j| p[(i, j)] / tr);
    LocalOperator::hermitian(support, n, p).expect("Gram matrix")
}

/// Random single-qubit density matrix with Bloch vector drawn uniformly in
/// the ball of radius `max_radius`.
pub fn random_bloch(r: &mut Rng, max_radius: f64) -> [f64; 3] {
    loop {
        let v = [
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        ];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 <= 1.0 {
            return v.map(|x| x * max_radius);
        }
    }
}

pub fn random_usize(r: &mut Rng, lo: usize, hi_inclusive: usize) -> usize {
    r.random_range(lo..=hi_inclusive)
}
