//! Perturbations `e^{log ρ + h}` of faithful states and the inequalities and
//! identities they satisfy.

use serde::Serialize;

use crate::entropy::relative_entropy;
use crate::error::{Error, Result};
use crate::lattice::{boundary_energy, internal_energy, surface_energy, Potential};
use crate::operator::{
    eigh, embed, hermitian_defect, operator_norm, tensor, trace_distance, weighted_outer, LocalOperator, MatrixFn,
    DEFAULT_SUPPORT_CUTOFF,
};
use crate::region::Region;
use crate::states::DensityMatrix;

/// The perturbed functional `A ↦ Tr e^{log ρ + h} A` and its normalization.
#[derive(Clone, Debug)]
pub struct Perturbation {
    /// `e^{log ρ + h}`.
    pub unnormalized: LocalOperator,
    /// `Tr e^{log ρ + h}`.
    pub weight: f64,
    pub normalized: DensityMatrix,
    /// `log ρ + h`.
    pub exponent: LocalOperator,
}

fn require_faithful(rho: &DensityMatrix) -> Result<()> {
    if rho.support_rank(DEFAULT_SUPPORT_CUTOFF)? < rho.dim() {
        return Err(Error::domain("perturbation needs a full-rank state"));
    }
    Ok(())
}

fn require_hermitian_on(h: &LocalOperator, region: &Region) -> Result<()> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian { asymmetry: hermitian_defect(h.matrix()) });
    }
    if h.support() != region {
        return Err(Error::validation(format!(
            "perturbation on {} does not match the state's region {}",
            h.support(),
            region
        )));
    }
    Ok(())
}

pub fn perturb(rho: &DensityMatrix, h: &LocalOperator) -> Result<Perturbation> {
    require_faithful(rho)?;
    require_hermitian_on(h, rho.support())?;
    let exponent = rho.log()?.add(h)?;
    let (k, v) = eigh(exponent.matrix())?;
    let top = k.last().copied().unwrap_or(0.0);
    let shifted_sum: f64 = k.iter().map(|x| (x - top).exp()).sum();
    let log_weight = top + shifted_sum.ln();
    let unnormalized = LocalOperator::hermitian_unchecked(
        rho.support().clone(),
        rho.site_dim(),
        weighted_outer(v.as_ref(), &k.iter().map(|x| x.exp()).collect::<Vec<_>>()),
    );
    let lv: Vec<f64> = k.iter().map(|x| x - log_weight).collect();
    let p: Vec<f64> = lv.iter().map(|x| x.exp()).collect();
    let normalized = DensityMatrix::from_spectrum(rho.support().clone(), rho.site_dim(), p, v, Some(lv));
    Ok(Perturbation { unnormalized, weight: log_weight.exp(), normalized, exponent })
}

/// `‖e^{log(e^{log ρ + h}) − h} − ρ‖_max`: perturbing by `h` and then `−h`
/// at the unnormalized level returns `ρ`.
pub fn involution_residual(rho: &DensityMatrix, h: &LocalOperator) -> Result<f64> {
    let first = perturb(rho, h)?;
    let log_first = crate::operator::matrix_function(&first.unnormalized, MatrixFn::LogOnSupport, 0.0)?.op;
    let back = crate::operator::matrix_function(&log_first.sub(h)?, MatrixFn::Exp, 0.0)?.op;
    back.max_abs_diff(rho.op())
}

/// Both sides of `e^{Tr ρh} ≤ Tr e^{log ρ + h} ≤ Tr ρe^h` and of the norm
/// bounds `e^{−‖h‖} ≤ Tr e^{log ρ + h} ≤ e^{‖h‖}`.
#[derive(Clone, Debug, Serialize)]
pub struct PbGtCheck {
    pub weight: f64,
    pub lower: f64,
    pub upper: f64,
    /// `weight − e^{Tr ρh}`.
    pub pb_slack: f64,
    /// `Tr ρe^h − weight`.
    pub gt_slack: f64,
    pub h_norm: f64,
    /// `weight − e^{−‖h‖}`.
    pub norm_lower_slack: f64,
    /// `e^{‖h‖} − weight`.
    pub norm_upper_slack: f64,
}

impl PbGtCheck {
    pub fn min_slack(&self) -> f64 {
        self.pb_slack.min(self.gt_slack).min(self.norm_lower_slack).min(self.norm_upper_slack)
    }
}

pub fn pb_gt_check(rho: &DensityMatrix, h: &LocalOperator) -> Result<PbGtCheck> {
    let pert = perturb(rho, h)?;
    let mean = rho.op().trace_product(h)?.re;
    let exp_h = crate::operator::matrix_function(h, MatrixFn::Exp, 0.0)?.op;
    let upper = rho.op().trace_product(&exp_h)?.re;
    let lower = mean.exp();
    let h_norm = operator_norm(h);
    Ok(PbGtCheck {
        weight: pert.weight,
        lower,
        upper,
        pb_slack: pert.weight - lower,
        gt_slack: upper - pert.weight,
        h_norm,
        norm_lower_slack: pert.weight - (-h_norm).exp(),
        norm_upper_slack: h_norm.exp() - pert.weight,
    })
}

/// How far the Gibbs state of `ambient`, perturbed by `β W_inner`, is from
/// the product of internal Gibbs states of `inner` and `ambient ∖ inner`.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsProductCheck {
    /// Trace distance of the perturbed marginal on `inner` from `ρ^IG_inner`.
    pub marginal_gap: f64,
    /// Trace distance of the perturbed state from `ρ^IG_inner ⊗ ρ^IG_rest`.
    pub factorization_gap: f64,
    pub weight: f64,
}

pub fn gibbs_product_check(pot: &Potential, beta: f64, inner: &Region, ambient: &Region) -> Result<GibbsProductCheck> {
    let reach = pot.range().max(0) as usize;
    if !inner.collar(reach).is_subset_of(ambient) {
        return Err(Error::geometry(format!(
            "ambient {ambient} does not contain the range-{reach} collar of {inner}"
        )));
    }
    let psi = DensityMatrix::gibbs(&internal_energy(pot, ambient)?, beta)?.state;
    let w = embed(&surface_energy(pot, inner, ambient)?, ambient)?;
    let pert = perturb(&psi, &w.scaled(beta))?;
    let inner_gibbs = DensityMatrix::gibbs(&internal_energy(pot, inner)?, beta)?.state;
    let marginal = pert.normalized.reduce(inner)?;
    let marginal_gap = trace_distance(marginal.op(), inner_gibbs.op())?;
    let rest = ambient.difference(inner);
    let product = if rest.is_empty() {
        inner_gibbs.op().clone()
    } else {
        let rest_gibbs = DensityMatrix::gibbs(&internal_energy(pot, &rest)?, beta)?.state;
        tensor(inner_gibbs.op(), rest_gibbs.op())?
    };
    let factorization_gap = trace_distance(pert.normalized.op(), &product)?;
    Ok(GibbsProductCheck { marginal_gap, factorization_gap, weight: pert.weight })
}

/// Logarithms of `ρ^IG_Λ` and of a faithful `ψ_Λ` on the same region, with
/// the norm of their difference compared to `β‖W_Λ‖`.
#[derive(Clone, Debug)]
pub struct LogDensityGap {
    pub internal_gibbs: DensityMatrix,
    pub psi: DensityMatrix,
    /// `log ψ_Λ − log ρ^IG_Λ`.
    pub difference: LocalOperator,
    pub summary: LogGapSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogGapSummary {
    pub volume: usize,
    pub gap_norm: f64,
    pub per_site: f64,
    pub surface_norm: f64,
    /// `gap_norm / (β‖W_Λ‖)`; 0 when both vanish.
    pub ratio: f64,
}

/// `S(ω|ρ^IG) − S(ω|ψ)` against `Tr ω(log ψ − log ρ^IG)`.
#[derive(Clone, Debug, Serialize)]
pub struct DifferenceIdentity {
    pub volume: usize,
    pub relative_to_internal: f64,
    pub relative_to_psi: f64,
    pub difference: f64,
    pub expectation: f64,
    pub residual: f64,
}

pub fn log_density_gap(pot: &Potential, beta: f64, region: &Region, psi: &DensityMatrix) -> Result<LogDensityGap> {
    if psi.support() != region {
        return Err(Error::validation(format!("ψ lives on {}, expected {region}", psi.support())));
    }
    if psi.support_rank(DEFAULT_SUPPORT_CUTOFF)? < psi.dim() {
        return Err(Error::domain("ψ marginal is rank deficient"));
    }
    let internal_gibbs = DensityMatrix::gibbs(&internal_energy(pot, region)?, beta)?.state;
    let difference = psi.log()?.sub(internal_gibbs.log()?)?;
    let gap_norm = operator_norm(&difference);
    let surface_norm = operator_norm(&boundary_energy(pot, region)?);
    let scale = beta * surface_norm;
    let ratio = if scale > 0.0 {
        gap_norm / scale
    } else if gap_norm <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    let summary = LogGapSummary {
        volume: region.volume(),
        gap_norm,
        per_site: gap_norm / region.volume() as f64,
        surface_norm,
        ratio,
    };
    Ok(LogDensityGap { internal_gibbs, psi: psi.clone(), difference, summary })
}

impl LogDensityGap {
    pub fn identity(&self, omega: &DensityMatrix) -> Result<DifferenceIdentity> {
        let relative_to_internal = relative_entropy(omega, &self.internal_gibbs, DEFAULT_SUPPORT_CUTOFF)?;
        let relative_to_psi = relative_entropy(omega, &self.psi, DEFAULT_SUPPORT_CUTOFF)?;
        let difference = relative_to_internal - relative_to_psi;
        let expectation = omega.op().trace_product(&self.difference)?.re;
        Ok(DifferenceIdentity {
            volume: omega.support().volume(),
            relative_to_internal,
            relative_to_psi,
            difference,
            expectation,
            residual: (difference - expectation).abs(),
        })
    }
}
