//! Von Neumann entropy, Umegaki relative entropy and entropy densities.

use crate::error::{Error, Result};
use crate::region::Region;
use crate::series::ExtrapolationSeries;
use crate::states::{DensityMatrix, StateFamily};

/// Support containment is accepted when `‖(I − P₂)P₁‖` is at most this.
pub const CONTAINMENT_TOL: f64 = 1e-8;

/// `−Σ λ log λ` over the positive part of the spectrum.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(-log_weights(rho)?.iter().map(|(p, l)| p * l).sum::<f64>())
}

/// Pairs `(λ, log λ)` over the positive spectrum, using exact logarithms
/// when the state carries them.
fn log_weights(rho: &DensityMatrix) -> Result<Vec<(f64, f64)>> {
    let vals = rho.eigenvalues()?;
    Ok(match rho.exact_log_eigenvalues() {
        Some(lv) => vals.iter().zip(lv).filter(|(p, _)| **p > 0.0).map(|(&p, &l)| (p, l)).collect(),
        None => vals.iter().filter(|&&x| x > 0.0).map(|&x| (x, x.ln())).collect(),
    })
}

/// `Σ λ (log λ + S)²`: the variance of `−log ρ` in the state `ρ`.
pub fn log_density_variance(rho: &DensityMatrix) -> Result<f64> {
    let w = log_weights(rho)?;
    let mean: f64 = -w.iter().map(|(p, l)| p * l).sum::<f64>();
    Ok(w.iter().map(|(p, l)| p * (l + mean) * (l + mean)).sum())
}

/// `Tr ρ₁ (log ρ₁ − log ρ₂)`, or `+∞` when the support of `ρ₁` is not
/// contained in that of `ρ₂`.
pub fn relative_entropy(rho1: &DensityMatrix, rho2: &DensityMatrix, support_cutoff: f64) -> Result<f64> {
    if rho1.support() != rho2.support() || rho1.site_dim() != rho2.site_dim() {
        return Err(Error::validation(format!(
            "relative entropy needs states on the same region, got {} and {}",
            rho1.support(),
            rho2.support()
        )));
    }
    if !(support_cutoff >= 0.0) {
        return Err(Error::validation("support cutoff must be non-negative"));
    }
    if !support_contained(rho1, rho2, support_cutoff)? {
        return Ok(f64::INFINITY);
    }
    let neg_entropy = -von_neumann_entropy(rho1)?;
    let cross = rho1.op().trace_product(&rho2.log_with_cutoff(support_cutoff)?)?.re;
    Ok(neg_entropy - cross)
}

fn support_contained(rho1: &DensityMatrix, rho2: &DensityMatrix, cutoff: f64) -> Result<bool> {
    if rho2.is_faithful() {
        return Ok(true);
    }
    let s1 = rho1.spectrum(cutoff)?;
    let s2 = rho2.spectrum(cutoff)?;
    if s2.support_rank == s2.eigenvalues.len() {
        return Ok(true);
    }
    if s1.support_rank == 0 {
        return Ok(true);
    }
    // ‖(I − P₂)P₁‖ = ‖K₂* V₁‖ for orthonormal bases V₁ of supp ρ₁, K₂ of ker ρ₂.
    let overlap = s2.kernel_basis().adjoint() * s1.support_basis();
    let norm = overlap
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?
        .first()
        .copied()
        .unwrap_or(0.0);
    Ok(norm <= CONTAINMENT_TOL)
}

/// `S(ω_Λ)/|Λ|` along a box sequence.
pub fn entropy_density(state: &StateFamily, boxes: &[Region]) -> Result<ExtrapolationSeries> {
    ExtrapolationSeries::from_boxes("entropy-density", boxes, |region| {
        Ok(von_neumann_entropy(&state.marginal(region)?)? / region.volume() as f64)
    })
}
