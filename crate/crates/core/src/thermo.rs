//! Pressure, energy density, information rate and the free-energy
//! functional along box sequences, plus a mean-field lower bound on the
//! pressure.

use serde::{Deserialize, Serialize};

use crate::entropy::{relative_entropy, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::lattice::{internal_energy, Potential};
use crate::operator::{eigvalsh, DEFAULT_SUPPORT_CUTOFF};
use crate::region::{Region, Site};
use crate::series::ExtrapolationSeries;
use crate::states::{bloch_state, DensityMatrix, StateFamily};

/// `log Tr e^{−βU_Λ}`.
pub fn log_partition(pot: &Potential, beta: f64, region: &Region) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::validation(format!("beta must be finite and >= 0, got {beta}")));
    }
    let u = internal_energy(pot, region)?;
    let e = eigvalsh(u.matrix())?;
    Ok(log_sum_exp(e.iter().map(|&x| -beta * x)))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Points `(|Λ|, log Tr e^{−βU_Λ} / |Λ|)`.
pub fn pressure(pot: &Potential, beta: f64, boxes: &[Region]) -> Result<ExtrapolationSeries> {
    ExtrapolationSeries::from_boxes("pressure", boxes, |r| {
        Ok(log_partition(pot, beta, r)? / r.volume() as f64)
    })
}

/// `ω(U_Λ)`, evaluated term by term on the smallest marginal available.
pub fn energy_expectation(pot: &Potential, state: &StateFamily, region: &Region) -> Result<f64> {
    let terms = pot.translates_within(region);
    match state {
        StateFamily::Product { .. } | StateFamily::Tracial { .. } => {
            let mut total = 0.0;
            for t in &terms {
                total += state.marginal(t.support())?.expectation(t)?;
            }
            Ok(total)
        }
        _ => {
            let rho = state.marginal(region)?;
            energy_in(pot, &rho)
        }
    }
}

/// `Tr ρ U_Λ` with `Λ = supp ρ`.
pub fn energy_in(pot: &Potential, rho: &DensityMatrix) -> Result<f64> {
    let mut total = 0.0;
    for t in pot.translates_within(rho.support()) {
        total += rho.expectation(&t)?;
    }
    Ok(total)
}

/// Points `(|Λ|, ω(U_Λ)/|Λ|)`.
pub fn energy_density(pot: &Potential, state: &StateFamily, boxes: &[Region]) -> Result<ExtrapolationSeries> {
    ExtrapolationSeries::from_boxes("energy-density", boxes, |r| {
        Ok(energy_expectation(pot, state, r)? / r.volume() as f64)
    })
}

/// The four terms of `S(ω|ρ) = −S(ω) + βω(U) + log Z` on one region and the
/// residual of the identity.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteVolumeIdentity {
    pub volume: usize,
    pub relative_entropy: f64,
    pub entropy: f64,
    pub energy: f64,
    pub log_partition: f64,
    pub residual: f64,
}

/// Evaluates both sides of the finite-volume relative-entropy identity for
/// the marginal `omega` on its support.
pub fn finite_volume_identity(pot: &Potential, beta: f64, omega: &DensityMatrix) -> Result<FiniteVolumeIdentity> {
    let region = omega.support();
    let gibbs = DensityMatrix::gibbs(&internal_energy(pot, region)?, beta)?;
    let rel = relative_entropy(omega, &gibbs.state, DEFAULT_SUPPORT_CUTOFF)?;
    let entropy = von_neumann_entropy(omega)?;
    let energy = energy_in(pot, omega)?;
    let residual = (rel + entropy - beta * energy - gibbs.log_partition).abs();
    Ok(FiniteVolumeIdentity {
        volume: region.volume(),
        relative_entropy: rel,
        entropy,
        energy,
        log_partition: gibbs.log_partition,
        residual,
    })
}

/// Points `(|Λ|, S(ω_Λ | ρ^IG_Λ)/|Λ|)` against the internal Gibbs states.
pub fn information_rate(
    pot: &Potential,
    beta: f64,
    state: &StateFamily,
    boxes: &[Region],
) -> Result<ExtrapolationSeries> {
    ExtrapolationSeries::from_boxes("information-rate", boxes, |r| {
        let omega = state.marginal(r)?;
        let gibbs = DensityMatrix::gibbs(&internal_energy(pot, r)?, beta)?;
        Ok(relative_entropy(&omega, &gibbs.state, DEFAULT_SUPPORT_CUTOFF)? / r.volume() as f64)
    })
}

/// Points `(|Λ|, [S(ω_Λ) − βω(U_Λ)]/|Λ|)`.
pub fn free_energy_functional(
    pot: &Potential,
    beta: f64,
    state: &StateFamily,
    boxes: &[Region],
) -> Result<ExtrapolationSeries> {
    ExtrapolationSeries::from_boxes("free-energy-functional", boxes, |r| {
        let entropy = match state {
            StateFamily::Product { site_state } => {
                r.volume() as f64 * von_neumann_entropy(&DensityMatrix::new(site_state.clone())?)?
            }
            _ => von_neumann_entropy(&state.marginal(r)?)?,
        };
        Ok((entropy - beta * energy_expectation(pot, state, r)?) / r.volume() as f64)
    })
}

/// A grid of qubit states in Bloch-ball coordinates `(r, θ, φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochGrid {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for BlochGrid {
    fn default() -> Self {
        BlochGrid { radial: 5, polar: 7, azimuthal: 8 }
    }
}

impl BlochGrid {
    pub fn points(&self) -> Vec<[f64; 3]> {
        let lin = |k: usize, n: usize, hi: f64| if n <= 1 { 0.0 } else { hi * k as f64 / (n - 1) as f64 };
        let mut out = Vec::new();
        for i in 0..self.radial {
            let r = if self.radial == 1 { 1.0 } else { lin(i, self.radial, 1.0) };
            for j in 0..self.polar {
                let theta = lin(j, self.polar, std::f64::consts::PI);
                for k in 0..self.azimuthal {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / self.azimuthal as f64;
                    out.push([r, theta, phi]);
                    if r == 0.0 {
                        break;
                    }
                }
                if r == 0.0 {
                    break;
                }
            }
        }
        out
    }
}

fn bloch_vector(p: [f64; 3]) -> [f64; 3] {
    let [r, t, f] = p;
    [r * t.sin() * f.cos(), r * t.sin() * f.sin(), r * t.cos()]
}

/// Best product state found by [`mean_field_scan`].
#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldResult {
    /// `(r, θ, φ)` of the maximizing single-site state.
    pub parameters: [f64; 3],
    pub bloch_vector: [f64; 3],
    pub value: f64,
    pub series: ExtrapolationSeries,
    pub evaluations: usize,
}

/// Tolerance on the parameters at which coordinate descent stops.
pub const MEAN_FIELD_PARAM_TOL: f64 = 1e-6;

/// Maximizes the free-energy functional limit over translation-invariant
/// product states of a qubit lattice: grid search, then coordinate descent.
pub fn mean_field_scan(pot: &Potential, beta: f64, grid: &BlochGrid, boxes: &[Region]) -> Result<MeanFieldResult> {
    if pot.site_dim() != 2 {
        return Err(Error::validation("mean-field scan is implemented for qubit lattices only"));
    }
    let candidates = grid.points();
    if candidates.is_empty() {
        return Err(Error::validation("mean-field grid is empty"));
    }
    if boxes.is_empty() {
        return Err(Error::validation("mean-field scan needs at least one box"));
    }
    let origin = Site::new(vec![0; pot.dim()]);
    let mut evaluations = 0usize;
    let mut evaluate = |p: [f64; 3]| -> Result<(f64, ExtrapolationSeries)> {
        evaluations += 1;
        let site_state = bloch_state(origin.clone(), bloch_vector(p))?;
        let series = free_energy_functional(pot, beta, &StateFamily::Product { site_state }, boxes)?;
        Ok((series.limit_estimate(), series))
    };

    let mut best: Option<([f64; 3], f64, ExtrapolationSeries)> = None;
    for p in candidates {
        let (v, s) = evaluate(p)?;
        if best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((p, v, s));
        }
    }
    let (mut p, mut value, mut series) = best.expect("non-empty grid");

    let mut steps = [0.1, 0.2, 0.2];
    while steps.iter().any(|&s| s > MEAN_FIELD_PARAM_TOL) {
        let mut improved = false;
        for c in 0..3 {
            if steps[c] <= MEAN_FIELD_PARAM_TOL {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut q = p;
                q[c] += sign * steps[c];
                if c == 0 {
                    q[0] = q[0].clamp(0.0, 1.0);
                }
                if q == p {
                    continue;
                }
                let (v, s) = evaluate(q)?;
                if v > value {
                    p = q;
                    value = v;
                    series = s;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    Ok(MeanFieldResult { parameters: p, bloch_vector: bloch_vector(p), value, series, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Preset;
    use crate::operator::LocalOperator;

    fn ising() -> Potential {
        Preset::ClassicalIsing { j: 1.0, h: 0.0 }.potential(1).unwrap()
    }

    fn chains(sides: &[usize]) -> Vec<Region> {
        Region::box_sequence(1, sides).unwrap()
    }

    #[test]
    fn pressure_at_zero_beta() {
        let s = pressure(&Preset::TransverseIsing { j: 1.0, g: 1.0 }.potential(1).unwrap(), 0.0, &chains(&[2, 3, 4])).unwrap();
        assert!(s.points().iter().all(|p| (p.1 - 2f64.ln()).abs() < 1e-14));
        assert!((s.limit_estimate() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn classical_ising_pressure_closed_form() {
        // Free-boundary chain: Z_N = 2^N cosh(β)^(N−1).
        let s = pressure(&ising(), 1.0, &chains(&[4, 6, 8, 10, 12])).unwrap();
        for (n, v) in s.points() {
            let exact = 2f64.ln() + (n as f64 - 1.0) / n as f64 * 1f64.cosh().ln();
            assert!((v - exact).abs() < 1e-12, "N={n}");
        }
        let limit = (2.0 * 1f64.cosh()).ln();
        assert!((limit - 1.1269280110429725).abs() < 1e-15);
        assert!((s.limit_estimate() - limit).abs() < 1e-10);
    }

    #[test]
    fn energy_density_examples() {
        let boxes = chains(&[3, 4, 5, 6]);
        let tfi = Preset::TransverseIsing { j: 1.0, g: 0.5 }.potential(1).unwrap();
        let tr = energy_density(&tfi, &StateFamily::Tracial { site_dim: 2 }, &boxes).unwrap();
        assert!(tr.points().iter().all(|p| p.1.abs() < 1e-15));
        let up = LocalOperator::diagonal(Region::interval(0, 0), 2, &[1.0, 0.0]).unwrap();
        let e = energy_density(&ising(), &StateFamily::Product { site_state: up }, &boxes).unwrap();
        for (n, v) in e.points() {
            assert!((v + (n as f64 - 1.0) / n as f64).abs() < 1e-14);
        }
        assert!((e.limit_estimate() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_energy_is_beta_derivative() {
        let pot = Preset::TransverseIsing { j: 1.0, g: 0.7 }.potential(1).unwrap();
        let r = Region::interval(0, 5);
        let beta = 0.9;
        let h = 1e-4;
        let fd = -(log_partition(&pot, beta + h, &r).unwrap() - log_partition(&pot, beta - h, &r).unwrap()) / (2.0 * h);
        let fam = StateFamily::InternalGibbs { potential: pot.clone(), beta };
        let e = energy_expectation(&pot, &fam, &r).unwrap();
        assert!((e - fd).abs() < 1e-5);
    }

    #[test]
    fn information_rate_examples() {
        let boxes = chains(&[4, 6, 8, 10, 12]);
        let own = information_rate(&ising(), 1.0, &StateFamily::InternalGibbs { potential: ising(), beta: 1.0 }, &boxes).unwrap();
        assert!(own.points().iter().all(|p| p.1.abs() < 1e-9));
        let tr = information_rate(&ising(), 1.0, &StateFamily::Tracial { site_dim: 2 }, &boxes).unwrap();
        // S(I/d | ρ) = −log d + log Z for a traceless energy: log cosh(1)·(N−1)/N.
        for (n, v) in tr.points() {
            assert!((v - (n as f64 - 1.0) / n as f64 * 1f64.cosh().ln()).abs() < 1e-12);
        }
        assert!((tr.limit_estimate() - 0.4337808304830271).abs() < 1e-10);
    }

    #[test]
    fn identity_holds_for_random_states() {
        let pot = Preset::Heisenberg { j: 1.0, h: 0.3 }.potential(1).unwrap();
        let mut r = crate::random::rng(21);
        for _ in 0..10 {
            let omega = DensityMatrix::new(crate::random::random_density(&mut r, Region::interval(0, 3), 2)).unwrap();
            let id = finite_volume_identity(&pot, 0.7, &omega).unwrap();
            assert!(id.residual < 1e-10);
            assert!(id.relative_entropy >= -1e-10);
        }
    }

    #[test]
    fn free_energy_bounded_by_pressure() {
        let pot = Preset::TransverseIsing { j: 1.0, g: 1.0 }.potential(1).unwrap();
        let boxes = chains(&[3, 4, 5, 6]);
        let p = pressure(&pot, 0.8, &boxes).unwrap();
        let s = bloch_state(Site::new(vec![0]), [0.3, 0.0, 0.4]).unwrap();
        let f = free_energy_functional(&pot, 0.8, &StateFamily::Product { site_state: s }, &boxes).unwrap();
        for (a, b) in f.points().iter().zip(p.points()) {
            assert!(a.1 <= b.1 + 1e-12);
        }
        let g = free_energy_functional(&pot, 0.8, &StateFamily::InternalGibbs { potential: pot.clone(), beta: 0.8 }, &boxes).unwrap();
        for (a, b) in g.points().iter().zip(p.points()) {
            assert!((a.1 - b.1).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_field_at_infinite_temperature() {
        let res = mean_field_scan(&ising(), 0.0, &BlochGrid::default(), &chains(&[4, 6, 8])).unwrap();
        assert!((res.value - 2f64.ln()).abs() < 1e-9);
        assert_eq!(res.parameters[0], 0.0);
    }

    #[test]
    fn mean_field_classical_low_temperature() {
        // Scalar oracle: the magnetization solves m = tanh(2βm) and the
        // value is H((1+m)/2) + βm².
        let beta = 3.0;
        let mut m: f64 = 1.0;
        for _ in 0..200 {
            m = (2.0 * beta * m).tanh();
        }
        let q = (1.0 + m) / 2.0;
        let best = -(q * q.ln() + (1.0 - q) * (1.0 - q).ln()) + beta * m * m;
        let res = mean_field_scan(&ising(), beta, &BlochGrid::default(), &chains(&[4, 6, 8])).unwrap();
        eprintln!("{:?} {} {}", res.bloch_vector, res.value, best);
        assert!(res.bloch_vector[2].abs() > 0.99);
        assert!(res.value <= best + 1e-12);
        assert!(best - res.value < 1e-7);
    }

    #[test]
    fn empty_grid_rejected() {
        let g = BlochGrid { radial: 0, polar: 3, azimuthal: 3 };
        assert!(mean_field_scan(&ising(), 1.0, &g, &chains(&[4])).is_err());
    }
}
