//! Translation-covariant finite-range potentials on `Z^ν` and the energies
//! they define on finite regions.
//!
//! A [`Potential`] stores one representative interaction per translation
//! class, anchored so that its first site is the origin. The interaction on
//! any translate `X + x` is the same matrix on the shifted support, so
//! covariance holds by construction. Inverse temperature is never stored
//! here; callers pass `β` where it is used.

use std::collections::BTreeMap;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{self, dense_dim, LocalOperator, DEFAULT_MAX_DENSE_DIM};
use crate::pauli;
use crate::region::{Region, Site};

#[derive(Clone, Debug)]
pub struct Potential {
    site_dim: usize,
    dim: usize,
    terms: Vec<LocalOperator>,
    max_dense_dim: usize,
}

impl Potential {
    /// Builds a potential from representative interactions. Each term is
    /// re-anchored at the origin; terms that are translates of one another
    /// are summed into a single representative.
    pub fn new(site_dim: usize, dim: usize, terms: Vec<LocalOperator>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("lattice dimension must be at least 1"));
        }
        let mut classes: BTreeMap<Vec<Site>, LocalOperator> = BTreeMap::new();
        for t in terms {
            if t.site_dim() != site_dim {
                return Err(Error::validation("interaction site dimension mismatch"));
            }
            if t.support().dim() != dim {
                return Err(Error::validation("interaction lives in the wrong lattice dimension"));
            }
            if !t.is_hermitian() {
                return Err(Error::validation(format!(
                    "interaction on {} is not flagged Hermitian",
                    t.support()
                )));
            }
            if t.support().is_empty() {
                return Err(Error::validation("interaction with empty support"));
            }
            let anchor = t.support().sites()[0].clone();
            let shift: Vec<i64> = anchor.coords().iter().map(|c| -c).collect();
            let rep = t.translate(&shift);
            let key = rep.support().sites().to_vec();
            match classes.remove(&key) {
                Some(prev) => {
                    classes.insert(key, prev.add(&rep)?);
                }
                None => {
                    classes.insert(key, rep);
                }
            }
        }
        Ok(Potential {
            site_dim,
            dim,
            terms: classes.into_values().collect(),
            max_dense_dim: DEFAULT_MAX_DENSE_DIM,
        })
    }

    pub fn zero(site_dim: usize, dim: usize) -> Self {
        Potential { site_dim, dim, terms: Vec::new(), max_dense_dim: DEFAULT_MAX_DENSE_DIM }
    }

    pub fn with_max_dense_dim(mut self, cap: usize) -> Self {
        self.max_dense_dim = cap;
        self
    }

    pub fn max_dense_dim(&self) -> usize {
        self.max_dense_dim
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Representatives, each with its first site at the origin.
    pub fn terms(&self) -> &[LocalOperator] {
        &self.terms
    }

    /// Largest ℓ∞ diameter of a representative support.
    pub fn range(&self) -> i64 {
        self.terms.iter().map(|t| t.support().diameter()).max().unwrap_or(0)
    }

    /// Every translate `Φ(X + x)` whose support meets `region`, each once.
    pub fn translates_meeting(&self, region: &Region) -> Vec<LocalOperator> {
        let mut out = Vec::new();
        for t in &self.terms {
            let mut shifts: Vec<Vec<i64>> = Vec::new();
            for y in region.sites() {
                for s in t.support().sites() {
                    shifts.push(y.offset_from(s));
                }
            }
            shifts.sort();
            shifts.dedup();
            out.extend(shifts.iter().map(|x| t.translate(x)));
        }
        out
    }

    /// Every translate fully contained in `region`.
    pub fn translates_within(&self, region: &Region) -> Vec<LocalOperator> {
        let mut out = Vec::new();
        for t in &self.terms {
            let anchor = &t.support().sites()[0];
            for y in region.sites() {
                let shifted = t.translate(&y.offset_from(anchor));
                if shifted.support().is_subset_of(region) {
                    out.push(shifted);
                }
            }
        }
        out
    }

    /// True for a 1D potential whose interactions touch at most two
    /// neighbouring sites.
    pub fn is_nearest_neighbor_chain(&self) -> bool {
        self.dim == 1 && self.range() <= 1
    }

    fn check_region(&self, region: &Region) -> Result<()> {
        if region.dim() != self.dim && !region.is_empty() {
            return Err(Error::validation(format!(
                "region {} has dimension {} but the potential lives in dimension {}",
                region,
                region.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}


/// `U_Λ = Σ_{X ⊆ Λ} Φ(X)`, as a dense Hermitian operator on `Λ`.
pub fn internal_energy(pot: &Potential, region: &Region) -> Result<LocalOperator> {
    pot.check_region(region)?;
    let d = dense_dim(region, pot.site_dim, pot.max_dense_dim)?;
    let mut acc = Mat::<c64>::zeros(d, d);
    for t in pot.translates_within(region) {
        operator::add_embedded(&mut acc, region, &t, 1.0)?;
    }
    Ok(LocalOperator::hermitian_unchecked(region.clone(), pot.site_dim, acc))
}

/// `U_Λ` on a box with periodic wrap-around in every direction. Translates
/// whose wrapped image would hit a site twice are dropped.
pub fn internal_energy_periodic(pot: &Potential, region: &Region) -> Result<LocalOperator> {
    pot.check_region(region)?;
    let (lo, hi) = match region.bounds() {
        Some(b) => b,
        None => return internal_energy(pot, region),
    };
    let sides: Vec<i64> = lo.iter().zip(&hi).map(|(a, b)| b - a + 1).collect();
    let expected: usize = sides.iter().map(|&s| s as usize).product();
    if expected != region.volume() {
        return Err(Error::geometry(format!("periodic energy needs a full box, got {region}")));
    }
    let d = dense_dim(region, pot.site_dim, pot.max_dense_dim)?;
    let mut acc = Mat::<c64>::zeros(d, d);
    for t in &pot.terms {
        let anchor = t.support().sites()[0].clone();
        for y in region.sites() {
            let shifted = t.translate(&y.offset_from(&anchor));
            let wrapped: Vec<Site> = shifted
                .support()
                .sites()
                .iter()
                .map(|s| {
                    Site::new(
                        s.coords()
                            .iter()
                            .enumerate()
                            .map(|(k, &c)| lo[k] + (c - lo[k]).rem_euclid(sides[k]))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            let mut uniq = wrapped.clone();
            uniq.sort();
            uniq.dedup();
            if uniq.len() != wrapped.len() {
                continue;
            }
            let placed = operator::relabel(t, &wrapped)?;
            operator::add_embedded(&mut acc, region, &placed, 1.0)?;
        }
    }
    Ok(LocalOperator::hermitian_unchecked(region.clone(), pot.site_dim, acc))
}

/// Translates that meet both `region` and its complement.
pub fn crossing_terms(pot: &Potential, region: &Region) -> Vec<LocalOperator> {
    pot.translates_meeting(region)
        .into_iter()
        .filter(|t| !t.support().is_subset_of(region))
        .collect()
}

/// `W_Λ`: the sum of interactions crossing the boundary of `region`.
///
/// Every crossing interaction must lie inside `ambient`, otherwise a
/// geometry error is returned. The result is supported on the union of the
/// crossing supports (empty support and value 0 when nothing crosses).
pub fn surface_energy(pot: &Potential, region: &Region, ambient: &Region) -> Result<LocalOperator> {
    pot.check_region(region)?;
    if !region.is_subset_of(ambient) {
        return Err(Error::Containment { inner: region.to_string(), outer: ambient.to_string() });
    }
    let crossing = crossing_terms(pot, region);
    if let Some(out) = crossing.iter().find(|t| !t.support().is_subset_of(ambient)) {
        return Err(Error::geometry(format!(
            "interaction on {} crosses the boundary of {} but leaves the ambient region {}",
            out.support(),
            region,
            ambient
        )));
    }
    let support = crossing
        .iter()
        .fold(Region::empty(pot.dim), |acc, t| acc.union(t.support()));
    let d = dense_dim(&support, pot.site_dim, pot.max_dense_dim)?;
    let mut acc = Mat::<c64>::zeros(d, d);
    for t in &crossing {
        operator::add_embedded(&mut acc, &support, t, 1.0)?;
    }
    Ok(LocalOperator::hermitian_unchecked(support, pot.site_dim, acc))
}

/// `W_Λ` against the whole lattice, using the range collar as ambient.
pub fn boundary_energy(pot: &Potential, region: &Region) -> Result<LocalOperator> {
    let ambient = region.collar(pot.range().max(0) as usize);
    surface_energy(pot, region, &ambient)
}

/// `Σ_{X ∋ 0} ‖Φ(X)‖ / |X|`.
pub fn big_banach_norm(pot: &Potential) -> f64 {
    let origin = Region::from_sites(pot.dim, [Site::new(vec![0; pot.dim])]).expect("origin");
    pot.translates_meeting(&origin)
        .iter()
        .map(|t| operator::operator_norm(t) / t.support().volume() as f64)
        .sum()
}

/// Spin-1/2 model families. Bonds couple nearest neighbours along every
/// lattice axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// `−J σ^z σ^z` on bonds, `−h σ^z` on sites.
    ClassicalIsing {
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    /// `−J σ^z σ^z` on bonds, `−g σ^x` on sites.
    TransverseIsing {
        #[serde(rename = "J")]
        j: f64,
        g: f64,
    },
    /// `−J[(1+γ)/2 σ^x σ^x + (1−γ)/2 σ^y σ^y]` on bonds, `−g σ^z` on sites.
    Xy {
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        g: f64,
    },
    /// `J (σ^x σ^x + σ^y σ^y + σ^z σ^z)` on bonds, `−h σ^z` on sites.
    Heisenberg {
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    /// Non-interacting `−g σ^x` on every site (range 0).
    Field { g: f64 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::ClassicalIsing { .. } => "classical-ising",
            Preset::TransverseIsing { .. } => "transverse-ising",
            Preset::Xy { .. } => "xy",
            Preset::Heisenberg { .. } => "heisenberg",
            Preset::Field { .. } => "field",
        }
    }

    pub fn potential(&self, dim: usize) -> Result<Potential> {
        if dim == 0 {
            return Err(Error::validation("lattice dimension must be at least 1"));
        }
        let origin = Site::new(vec![0; dim]);
        let at = |s: &Site| Region::from_sites(dim, [s.clone()]).expect("site");
        let (sx, sy, sz) = (pauli::sigma_x(), pauli::sigma_y(), pauli::sigma_z());
        let mut terms = Vec::new();
        let site_term = |coef: f64, m: &Mat<c64>, terms: &mut Vec<LocalOperator>| {
            if coef != 0.0 {
                terms.push(pauli::on(at(&origin), m.clone()).scaled(coef));
            }
        };
        let mut bond_parts: Vec<(f64, Mat<c64>)> = Vec::new();
        match *self {
            Preset::ClassicalIsing { j, h } => {
                bond_parts.push((-j, sz.clone()));
                site_term(-h, &sz, &mut terms);
            }
            Preset::TransverseIsing { j, g } => {
                bond_parts.push((-j, sz.clone()));
                site_term(-g, &sx, &mut terms);
            }
            Preset::Xy { j, gamma, g } => {
                bond_parts.push((-j * (1.0 + gamma) / 2.0, sx.clone()));
                bond_parts.push((-j * (1.0 - gamma) / 2.0, sy.clone()));
                site_term(-g, &sz, &mut terms);
            }
            Preset::Heisenberg { j, h } => {
                bond_parts.push((j, sx.clone()));
                bond_parts.push((j, sy.clone()));
                bond_parts.push((j, sz.clone()));
                site_term(-h, &sz, &mut terms);
            }
            Preset::Field { g } => site_term(-g, &sx, &mut terms),
        }
        bond_parts.retain(|(c, _)| *c != 0.0);
        for axis in 0..dim {
            let mut e = vec![0i64; dim];
            e[axis] = 1;
            let neighbor = Site::new(e);
            let mut bond: Option<LocalOperator> = None;
            for (c, m) in &bond_parts {
                let part = pauli::pair(m.clone(), at(&origin), m.clone(), at(&neighbor)).scaled(*c);
                bond = Some(match bond {
                    Some(b) => b.add(&part)?,
                    None => part,
                });
            }
            terms.extend(bond);
        }
        Potential::new(2, dim, terms)
    }
}

/// A named model at a given inverse temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub preset: Preset,
    pub beta: f64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
}

fn default_dimension() -> usize {
    1
}

impl ModelSpec {
    pub fn new(preset: Preset, beta: f64, dimension: usize) -> Result<Self> {
        let spec = ModelSpec { preset, beta, dimension };
        spec.validate()?;
        Ok(spec)
    }

    /// `β` must be finite and non-negative; `β = 0` is the infinite
    /// temperature limit used by several checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::validation(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.dimension == 0 || self.dimension > 2 {
            return Err(Error::validation("lattice dimension must be 1 or 2"));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        self.preset.potential(self.dimension)
    }
}
