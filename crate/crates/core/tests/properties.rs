use proptest::prelude::*;

use qgibbs::entropy::{relative_entropy, von_neumann_entropy};
use qgibbs::lattice::{internal_energy, surface_energy, Preset};
use qgibbs::operator::{
    embed, matrix_function, operator_norm, partial_trace, tensor, trace_distance, LocalOperator, MatrixFn,
    DEFAULT_SUPPORT_CUTOFF,
};
use qgibbs::perturbation::{involution_residual, pb_gt_check};
use qgibbs::random::{self, random_density, random_density_of_rank, random_hermitian, random_matrix};
use qgibbs::states::{bloch_state, buffered_drift, DensityMatrix, StateFamily};
use qgibbs::thermo::finite_volume_identity;
use qgibbs::{Region, Site};

fn chain(k: usize) -> Region {
    Region::interval(0, k as i64 - 1)
}

fn sites(xs: &[i64]) -> Region {
    Region::from_sites(1, xs.iter().map(|&x| Site::new(vec![x]))).unwrap()
}

/// Non-empty proper or full subset of `0..k` chosen by a bit mask.
fn subset(k: usize, mask: u32) -> Region {
    let picked: Vec<i64> = (0..k as i64).filter(|i| mask & (1 << i) != 0).collect();
    if picked.is_empty() {
        sites(&[0])
    } else {
        sites(&picked)
    }
}

fn preset(i: usize) -> Preset {
    match i % 5 {
        0 => Preset::ClassicalIsing { j: 1.0, h: 0.3 },
        1 => Preset::TransverseIsing { j: 1.0, g: 1.0 },
        2 => Preset::Xy { j: 1.0, gamma: 0.5, g: 0.2 },
        3 => Preset::Heisenberg { j: 1.0, h: 0.1 },
        _ => Preset::Field { g: 0.7 },
    }
}

fn min_eigenvalue(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues().unwrap()[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_keeps_trace_and_positivity(seed in any::<u64>(), k in 1usize..=4, mask in 1u32..16) {
        let mut r = random::rng(seed);
        let rank = 1 + (seed % (1 << k)) as usize;
        let rho = random_density_of_rank(&mut r, chain(k), 2, rank);
        let keep = subset(k, mask);
        let red = DensityMatrix::new(partial_trace(&rho, &keep).unwrap()).unwrap();
        prop_assert!((red.op().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(min_eigenvalue(&red) > -1e-12);
    }

    #[test]
    fn partial_trace_composes(seed in any::<u64>(), mask in 1u32..16, inner in 1u32..16) {
        let mut r = random::rng(seed);
        let x = LocalOperator::new(chain(4), 2, random_matrix(&mut r, 16)).unwrap();
        let mid = subset(4, mask);
        let small = subset(4, mask & inner);
        prop_assume!(small.is_subset_of(&mid));
        let two_step = partial_trace(&partial_trace(&x, &mid).unwrap(), &small).unwrap();
        let direct = partial_trace(&x, &small).unwrap();
        prop_assert!(two_step.max_abs_diff(&direct).unwrap() < 1e-10);
    }

    #[test]
    fn embed_is_adjoint_to_partial_trace(seed in any::<u64>(), mask in 1u32..8) {
        let mut r = random::rng(seed);
        let x = LocalOperator::new(chain(3), 2, random_matrix(&mut r, 8)).unwrap();
        let keep = subset(3, mask);
        let b = LocalOperator::new(keep.clone(), 2, random_matrix(&mut r, keep.hilbert_dim(2) as usize)).unwrap();
        let left = partial_trace(&x, &keep).unwrap().trace_product(&b).unwrap();
        let right = x.trace_product(&embed(&b, &chain(3)).unwrap()).unwrap();
        prop_assert!((left - right).norm() < 1e-10 * left.norm().max(1.0));
    }

    #[test]
    fn exp_is_multiplicative_on_commuting_pairs(seed in any::<u64>(), k in 1usize..=3, c in -1.0f64..1.0) {
        let mut r = random::rng(seed);
        let a = random_hermitian(&mut r, chain(k), 2).scaled(0.5);
        // A polynomial in A commutes with A.
        let b = a.compose(&a).unwrap();
        let b = LocalOperator::hermitian(b.support().clone(), 2, b.matrix().to_owned()).unwrap().scaled(c);
        let exp = |op: &LocalOperator| matrix_function(op, MatrixFn::Exp, 0.0).unwrap().op;
        let joint = exp(&a.add(&b).unwrap());
        let split = exp(&a).compose(&exp(&b)).unwrap();
        prop_assert!(joint.max_abs_diff(&split).unwrap() < 1e-9 * operator_norm(&joint).max(1.0));
    }

    #[test]
    fn klein_and_pinsker(seed in any::<u64>(), k in 1usize..=3) {
        let mut r = random::rng(seed);
        let rho = DensityMatrix::new(random_density(&mut r, chain(k), 2)).unwrap();
        let sigma = DensityMatrix::new(random_density(&mut r, chain(k), 2)).unwrap();
        let s = relative_entropy(&rho, &sigma, DEFAULT_SUPPORT_CUTOFF).unwrap();
        let t = trace_distance(rho.op(), sigma.op()).unwrap();
        prop_assert!(s >= 2.0 * t * t - 1e-10);
        prop_assert!(relative_entropy(&rho, &rho, DEFAULT_SUPPORT_CUTOFF).unwrap().abs() < 1e-9);
    }

    #[test]
    fn entropy_is_additive_on_products(seed in any::<u64>(), a in 1usize..=2, b in 1usize..=2) {
        let mut r = random::rng(seed);
        let left = random_density(&mut r, chain(a), 2);
        let right_region = Region::interval(a as i64, (a + b) as i64 - 1);
        let right = random_density(&mut r, right_region, 2);
        let joint = DensityMatrix::new(tensor(&left, &right).unwrap()).unwrap();
        let sum = von_neumann_entropy(&DensityMatrix::new(left).unwrap()).unwrap()
            + von_neumann_entropy(&DensityMatrix::new(right).unwrap()).unwrap();
        prop_assert!((von_neumann_entropy(&joint).unwrap() - sum).abs() < 1e-10);
    }

    #[test]
    fn strong_subadditivity(seed in any::<u64>(), a in 1usize..=2, b in 1usize..=2, c in 1usize..=2) {
        let mut r = random::rng(seed);
        let n = a + b + c;
        let rank = 1 + (seed % (1 << n)) as usize;
        let rho = DensityMatrix::new(random_density_of_rank(&mut r, chain(n), 2, rank)).unwrap();
        let (a, b, n) = (a as i64, b as i64, n as i64);
        let s = |x: &Region| von_neumann_entropy(&rho.reduce(x).unwrap()).unwrap();
        let lhs = s(&Region::interval(0, a + b - 1)) + s(&Region::interval(a, n - 1));
        let rhs = von_neumann_entropy(&rho).unwrap() + s(&Region::interval(a, a + b - 1));
        prop_assert!(lhs >= rhs - 1e-9);
    }

    #[test]
    fn restriction_lowers_relative_entropy_of_marginals(which in 0usize..5, bloch in prop::array::uniform3(-0.5f64..0.5), beta in 0.1f64..2.0) {
        let pot = preset(which).potential(1).unwrap();
        let omega = StateFamily::Product { site_state: bloch_state(Site::new(vec![0]), bloch).unwrap() };
        let psi = StateFamily::buffered(pot, beta, 1);
        let big = chain(4);
        let (w, p) = (omega.marginal(&big).unwrap(), psi.marginal(&big).unwrap());
        let outer = relative_entropy(&w, &p, DEFAULT_SUPPORT_CUTOFF).unwrap();
        for keep in [chain(3), chain(2), sites(&[0, 2])] {
            let inner = relative_entropy(&w.reduce(&keep).unwrap(), &p.reduce(&keep).unwrap(), DEFAULT_SUPPORT_CUTOFF).unwrap();
            prop_assert!(inner <= outer + 1e-9);
        }
    }

    #[test]
    fn perturbation_involution_and_bounds(seed in any::<u64>(), k in 1usize..=3, scale in 0.1f64..1.0) {
        let mut r = random::rng(seed);
        let rho = DensityMatrix::new(random_density(&mut r, chain(k), 2)).unwrap();
        let h = random_hermitian(&mut r, chain(k), 2).scaled(scale);
        prop_assert!(involution_residual(&rho, &h).unwrap() < 1e-9);
        prop_assert!(pb_gt_check(&rho, &h).unwrap().min_slack() >= -1e-10);
    }

    #[test]
    fn pb_gt_bounds_for_large_perturbations(seed in any::<u64>(), k in 1usize..=4, scale in 1.0f64..4.0) {
        let mut r = random::rng(seed);
        let rho = DensityMatrix::new(random_density(&mut r, chain(k), 2)).unwrap();
        let h = random_hermitian(&mut r, chain(k), 2).scaled(scale);
        let c = pb_gt_check(&rho, &h).unwrap();
        prop_assert!(c.pb_slack >= -1e-10 * c.weight && c.gt_slack >= -1e-10 * c.weight, "{c:?}");
    }

    #[test]
    fn finite_volume_identity_for_random_states(seed in any::<u64>(), which in 0usize..5, k in 1usize..=4, beta in 0.0f64..2.0) {
        let mut r = random::rng(seed);
        let pot = preset(which).potential(1).unwrap();
        let rank = 1 + (seed % (1 << k)) as usize;
        let omega = DensityMatrix::new(random_density_of_rank(&mut r, chain(k), 2, rank)).unwrap();
        let id = finite_volume_identity(&pot, beta, &omega).unwrap();
        prop_assert!(id.residual <= 1e-9);
        prop_assert!(id.relative_entropy >= -1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn marginals_are_density_matrices(which in 0usize..5, beta in 0.0f64..3.0, n in 1usize..=4, buffer in 0usize..=3) {
        let pot = preset(which).potential(1).unwrap();
        let families = [
            StateFamily::InternalGibbs { potential: pot.clone(), beta },
            StateFamily::buffered(pot, beta, buffer),
        ];
        for family in &families {
            let rho = family.marginal(&chain(n)).unwrap();
            let again = DensityMatrix::new(rho.op().clone()).unwrap();
            prop_assert!((again.op().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(min_eigenvalue(&again) > 0.0);
        }
    }

    #[test]
    fn buffer_drift_is_non_increasing(which in 0usize..5, beta in 0.2f64..1.0) {
        let pot = preset(which).potential(1).unwrap();
        let family = StateFamily::buffered(pot, beta, 1);
        let region = chain(2);
        let drifts: Vec<f64> = (1..=3).map(|b| buffered_drift(&family, &region, b, b + 1).unwrap()).collect();
        prop_assert!(drifts.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{drifts:?}");
    }

    #[test]
    fn surface_to_volume_ratio_decreases(which in 0usize..4) {
        let pot = preset(which).potential(1).unwrap();
        let ratios: Vec<f64> = (3..=8)
            .map(|n| {
                let region = chain(n);
                let ambient = region.collar(1);
                operator_norm(&surface_energy(&pot, &region, &ambient).unwrap()) / n as f64
            })
            .collect();
        prop_assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn internal_energy_adds_over_separated_regions(which in 0usize..5, gap in 2i64..4) {
        let pot = preset(which).potential(1).unwrap();
        let left = Region::interval(0, 1);
        let right = Region::interval(1 + gap, 2 + gap);
        let union = left.union(&right);
        let joint = internal_energy(&pot, &union).unwrap();
        let sum = embed(&internal_energy(&pot, &left).unwrap(), &union).unwrap()
            .add(&embed(&internal_energy(&pot, &right).unwrap(), &union).unwrap()).unwrap();
        prop_assert!(joint.max_abs_diff(&sum).unwrap() < 1e-12);
    }
}
