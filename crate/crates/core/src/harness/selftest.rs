//! Seeded property suite over random states and model marginals.

use serde::Serialize;

use super::config::ExperimentConfig;
use super::Gate;
use crate::entropy::{relative_entropy, von_neumann_entropy};
use crate::error::Result;
use crate::lattice::Preset;
use crate::operator::{
    embed, matrix_function, partial_trace, trace_distance, LocalOperator, MatrixFn, DEFAULT_SUPPORT_CUTOFF,
};
use crate::random::{self, random_density, random_density_of_rank, random_hermitian, random_matrix, random_usize, Rng};
use crate::region::{Region, Site};
use crate::states::{DensityMatrix, StateFamily};

/// Worst observed value of one property over its cases.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    /// Largest violation; non-positive when every case holds strictly.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &str, cases: usize, worst_violation: f64, tolerance: f64) -> Self {
        SuiteResult {
            name: name.into(),
            cases,
            worst_violation,
            tolerance,
            passed: worst_violation <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn gates(&self) -> Vec<Gate> {
        self.suites.iter().map(|s| Gate::at_most(s.name.clone(), s.worst_violation, s.tolerance)).collect()
    }

    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

fn chain(k: usize) -> Region {
    Region::interval(0, k as i64 - 1)
}

fn state(op: LocalOperator) -> Result<DensityMatrix> {
    DensityMatrix::new(op)
}

/// Full-rank or rank-deficient random state on `k` qubits.
fn mixed_rank_state(r: &mut Rng, region: Region) -> Result<DensityMatrix> {
    let d = 1usize << region.volume();
    let rank = if random_usize(r, 0, 3) == 0 { random_usize(r, 1, d) } else { d };
    state(random_density_of_rank(r, region, 2, rank))
}

pub fn run_selftest(cfg: &ExperimentConfig) -> Result<SelftestReport> {
    let spec = &cfg.selftest;
    let tol = &cfg.tolerances;
    let mut r = random::rng(cfg.seed);
    let suites = vec![
        klein(&mut r, spec.klein_pairs, tol.klein_equality, tol.slack)?,
        strong_subadditivity(&mut r, spec.ssa_states, tol.entropy_inequality)?,
        restriction(&mut r, spec.restriction_pairs, tol.entropy_inequality)?,
        adjointness(&mut r, spec.adjointness_pairs, tol.round_trip)?,
        round_trip(&mut r, spec.round_trips, tol.round_trip)?,
    ];
    Ok(SelftestReport { seed: cfg.seed, suites })
}

/// `S(ρ|σ) ≥ 2 T(ρ,σ)²` with equality at zero exactly when the states
/// coincide. Every fourth pair uses `σ = ρ`.
fn klein(r: &mut Rng, pairs: usize, equality: f64, slack: f64) -> Result<SuiteResult> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..pairs {
        let region = chain(random_usize(r, 1, 3));
        let rho = mixed_rank_state(r, region.clone())?;
        let sigma = if i % 4 == 0 { rho.clone() } else { state(random_density(r, region, 2))? };
        let s = relative_entropy(&rho, &sigma, DEFAULT_SUPPORT_CUTOFF)?;
        let t = trace_distance(rho.op(), sigma.op())?;
        let violation = if t < equality {
            s.abs() - equality
        } else {
            // Positive and above the Pinsker bound.
            (2.0 * t * t - s - slack).max(if s > 0.0 { f64::NEG_INFINITY } else { 1.0 })
        };
        worst = worst.max(violation);
    }
    Ok(SuiteResult::new("klein", pairs, worst, 0.0))
}

/// `S(ABC) + S(B) ≤ S(AB) + S(BC)` on random states of up to five qubits
/// and on Gibbs marginals of every preset.
fn strong_subadditivity(r: &mut Rng, states: usize, tol: f64) -> Result<SuiteResult> {
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    let check = |rho: &DensityMatrix, a: usize, b: usize| -> Result<f64> {
        let n = rho.support().volume() as i64;
        let (a, b) = (a as i64, b as i64);
        let ab = Region::interval(0, a + b - 1);
        let bc = Region::interval(a, n - 1);
        let mid = Region::interval(a, a + b - 1);
        let s = |keep: &Region| -> Result<f64> { von_neumann_entropy(&rho.reduce(keep)?) };
        Ok(von_neumann_entropy(rho)? + s(&mid)? - s(&ab)? - s(&bc)?)
    };
    for _ in 0..states {
        let a = random_usize(r, 1, 2);
        let b = random_usize(r, 1, 2);
        let c = random_usize(r, 1, 5 - a - b);
        let rho = mixed_rank_state(r, chain(a + b + c))?;
        worst = worst.max(check(&rho, a, b)?);
        cases += 1;
    }
    let presets = [
        Preset::ClassicalIsing { j: 1.0, h: 0.3 },
        Preset::TransverseIsing { j: 1.0, g: 1.0 },
        Preset::Xy { j: 1.0, gamma: 0.5, g: 0.2 },
        Preset::Heisenberg { j: 1.0, h: 0.1 },
        Preset::Field { g: 0.7 },
    ];
    for preset in presets {
        let pot = preset.potential(1)?;
        let families = [
            StateFamily::InternalGibbs { potential: pot.clone(), beta: 0.8 },
            StateFamily::buffered(pot, 0.8, 2),
        ];
        for family in families {
            let rho = family.marginal(&chain(6))?;
            worst = worst.max(check(&rho, 2, 2)?);
            cases += 1;
        }
    }
    Ok(SuiteResult::new("strong-subadditivity", cases, worst, tol))
}

/// `S(ρ_K|σ_K) ≤ S(ρ|σ)` for random subsets `K` of three qubits.
fn restriction(r: &mut Rng, pairs: usize, tol: f64) -> Result<SuiteResult> {
    let mut worst = f64::NEG_INFINITY;
    let region = chain(3);
    let subsets = [vec![0], vec![1], vec![0, 1], vec![0, 2], vec![1, 2]];
    for _ in 0..pairs {
        let rho = mixed_rank_state(r, region.clone())?;
        let sigma = state(random_density(r, region.clone(), 2))?;
        let keep = &subsets[random_usize(r, 0, subsets.len() - 1)];
        let keep = Region::from_sites(1, keep.iter().map(|&x| Site::new(vec![x])))?;
        let outer = relative_entropy(&rho, &sigma, DEFAULT_SUPPORT_CUTOFF)?;
        let inner = relative_entropy(&rho.reduce(&keep)?, &sigma.reduce(&keep)?, DEFAULT_SUPPORT_CUTOFF)?;
        worst = worst.max(inner - outer);
    }
    Ok(SuiteResult::new("restriction-monotonicity", pairs, worst, tol))
}

/// `Tr(Tr_{Λ∖K}(X) Y) = Tr(X (Y ⊗ I))` for non-Hermitian `X`, `Y`.
fn adjointness(r: &mut Rng, pairs: usize, tol: f64) -> Result<SuiteResult> {
    let mut worst = f64::NEG_INFINITY;
    let region = chain(3);
    for _ in 0..pairs {
        let x = LocalOperator::new(region.clone(), 2, random_matrix(r, 8))?;
        let keep = if random_usize(r, 0, 1) == 0 {
            Region::interval(1, 2)
        } else {
            Region::from_sites(1, [Site::new(vec![0]), Site::new(vec![2])])?
        };
        let y = LocalOperator::new(keep.clone(), 2, random_matrix(r, 4))?;
        let left = partial_trace(&x, &keep)?.trace_product(&y)?;
        let right = x.trace_product(&embed(&y, &region)?)?;
        worst = worst.max((left - right).norm() / left.norm().max(1.0));
    }
    Ok(SuiteResult::new("partial-trace-embed-adjointness", pairs, worst, tol))
}

/// `exp(log ρ) = ρ` for full-rank states and `log(exp h) = h` for Hermitian
/// `h`.
fn round_trip(r: &mut Rng, cases: usize, tol: f64) -> Result<SuiteResult> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let region = chain(random_usize(r, 1, 3));
        let rho = random_density(r, region.clone(), 2);
        let log = matrix_function(&rho, MatrixFn::LogOnSupport, 0.0)?.op;
        let back = matrix_function(&log, MatrixFn::Exp, 0.0)?.op;
        worst = worst.max(back.max_abs_diff(&rho)?);
        let h = random_hermitian(r, region, 2);
        let e = matrix_function(&h, MatrixFn::Exp, 0.0)?.op;
        let again = matrix_function(&e, MatrixFn::LogOnSupport, 0.0)?.op;
        worst = worst.max(again.max_abs_diff(&h)?);
    }
    Ok(SuiteResult::new("exp-log-round-trip", cases, worst, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ModelSpec;

    #[test]
    fn small_suite_passes_and_is_reproducible() {
        let mut cfg = ExperimentConfig::for_model(ModelSpec::new(Preset::Field { g: 1.0 }, 1.0, 1).unwrap());
        cfg.selftest.klein_pairs = 20;
        cfg.selftest.ssa_states = 10;
        cfg.selftest.restriction_pairs = 10;
        cfg.selftest.adjointness_pairs = 10;
        cfg.selftest.round_trips = 10;
        let a = run_selftest(&cfg).unwrap();
        assert!(a.passed(), "{:?}", a.suites);
        let b = run_selftest(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
