//! Density matrices and the state families used by the thermodynamic checks.

use std::sync::OnceLock;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{internal_energy, internal_energy_periodic, Potential};
use crate::mpo::{GibbsMpo, MpoOptions};
use crate::operator::{
    eigh, embed, hermitian_defect, partial_trace, trace_distance, weighted_outer, with_support,
    LocalOperator, SpectralDecomposition, DEFAULT_SUPPORT_CUTOFF,
};
use crate::region::{Region, Site};

/// Tolerance for `|Tr ρ − 1|` and for negative eigenvalues of a state.
pub const STATE_TOL: f64 = 1e-12;

/// A validated density matrix on a finite region.
///
/// The eigendecomposition is computed once and cached. States built from a
/// known spectrum (Gibbs states, products, the tracial state) carry their
/// exact logarithm, which stays accurate even when eigenvalues fall below
/// any numerical support cutoff. Such states, and states obtained from them
/// by partial trace, are flagged faithful: their support is the whole space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: LocalOperator,
    faithful: bool,
    eigen: OnceLock<(Vec<f64>, Mat<c64>)>,
    exact_log_values: Option<Vec<f64>>,
    log: OnceLock<LocalOperator>,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(op: LocalOperator) -> Result<Self> {
        Self::validated(op, false)
    }

    /// Like [`DensityMatrix::new`] for a state known to have full support,
    /// such as a marginal of a Gibbs state computed numerically. The flag
    /// disables the support cutoff; a non-positive eigenvalue is then
    /// reported when the logarithm is requested.
    pub fn faithful(op: LocalOperator) -> Result<Self> {
        Self::validated(op, true)
    }

    fn validated(op: LocalOperator, faithful: bool) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian { asymmetry: hermitian_defect(op.matrix()) });
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::validation(format!("state trace is {:.15}, not 1", tr.re)));
        }
        let rho = DensityMatrix::unchecked(op, faithful);
        let lo = rho.eigenvalues()?.first().copied().unwrap_or(0.0);
        if lo < -STATE_TOL {
            return Err(Error::validation(format!("state has negative eigenvalue {lo:.3e}")));
        }
        Ok(rho)
    }

    pub(crate) fn unchecked(op: LocalOperator, faithful: bool) -> Self {
        DensityMatrix { op, faithful, eigen: OnceLock::new(), exact_log_values: None, log: OnceLock::new() }
    }

    /// Builds `V diag(p) V*` from a known spectrum; `log_values` are the
    /// exact logarithms of `p` when available. `p` must be ascending.
    pub(crate) fn from_spectrum(
        support: Region,
        site_dim: usize,
        p: Vec<f64>,
        vectors: Mat<c64>,
        log_values: Option<Vec<f64>>,
    ) -> Self {
        let op = LocalOperator::hermitian_unchecked(support, site_dim, weighted_outer(vectors.as_ref(), &p));
        DensityMatrix::with_spectrum(op, p, vectors, log_values)
    }

    /// Attaches a known spectrum to `op`; the logarithm is formed lazily
    /// from `log_values`.
    pub(crate) fn with_spectrum(op: LocalOperator, p: Vec<f64>, vectors: Mat<c64>, log_values: Option<Vec<f64>>) -> Self {
        let faithful = log_values.is_some();
        let mut rho = DensityMatrix::unchecked(op, faithful);
        rho.exact_log_values = log_values;
        let _ = rho.eigen.set((p, vectors));
        rho
    }

    /// `I / d^|Λ|`.
    pub fn maximally_mixed(region: &Region, site_dim: usize) -> Result<Self> {
        let id = LocalOperator::identity(region.clone(), site_dim)?;
        let d = id.dim();
        let op = id.scaled(1.0 / d as f64);
        let p = vec![1.0 / d as f64; d];
        let lv = vec![-(d as f64).ln(); d];
        Ok(DensityMatrix::with_spectrum(op, p, Mat::<c64>::identity(d, d), Some(lv)))
    }

    /// `ρ₀^{⊗Λ}` for a one-site state `site_state`.
    pub fn product(site_state: &LocalOperator, region: &Region) -> Result<Self> {
        if site_state.support().volume() != 1 {
            return Err(Error::validation("product states need a one-site factor"));
        }
        let n = site_state.site_dim();
        crate::operator::dense_dim(region, n, crate::operator::DEFAULT_MAX_DENSE_DIM)?;
        let single = DensityMatrix::new(site_state.clone())?;
        let (lam, vecs) = single.eigen()?.clone();
        let faithful = lam[0] > DEFAULT_SUPPORT_CUTOFF;
        let m = site_state.matrix();
        let mut values = vec![1.0f64];
        let mut logs = vec![0.0f64];
        let mut v = Mat::<c64>::identity(1, 1);
        let mut rho = Mat::<c64>::identity(1, 1);
        for _ in 0..region.volume() {
            let d = v.nrows();
            values = values.iter().flat_map(|a| lam.iter().map(move |b| a * b)).collect();
            logs = logs
                .iter()
                .flat_map(|a| lam.iter().map(move |b| a + if *b > 0.0 { b.ln() } else { f64::NEG_INFINITY }))
                .collect();
            v = Mat::from_fn(d * n, d * n, |i, j| v[(i / n, j / n)] * vecs[(i % n, j % n)]);
            rho = Mat::from_fn(d * n, d * n, |i, j| rho[(i / n, j / n)] * m[(i % n, j % n)]);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let p: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let lv: Vec<f64> = order.iter().map(|&k| logs[k]).collect();
        let vectors = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, order[j])]);
        let op = LocalOperator::hermitian_unchecked(region.clone(), n, rho);
        Ok(DensityMatrix::with_spectrum(op, p, vectors, if faithful { Some(lv) } else { None }))
    }

    /// `e^{−βH} / Tr e^{−βH}` together with `log Tr e^{−βH}`.
    pub fn gibbs(energy: &LocalOperator, beta: f64) -> Result<GibbsState> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::validation(format!("beta must be finite and >= 0, got {beta}")));
        }
        if !energy.is_hermitian() {
            return Err(Error::NotHermitian { asymmetry: hermitian_defect(energy.matrix()) });
        }
        let (e, v) = eigh(energy.matrix())?;
        let e0 = e[0];
        let shifted: Vec<f64> = e.iter().map(|&x| -beta * (x - e0)).collect();
        let s: f64 = shifted.iter().map(|x| x.exp()).sum();
        let log_partition = -beta * e0 + s.ln();
        // Ascending energies give descending weights; reverse for the state.
        let d = e.len();
        let lv: Vec<f64> = (0..d).rev().map(|k| shifted[k] - s.ln()).collect();
        let p: Vec<f64> = lv.iter().map(|x| x.exp()).collect();
        let vectors = Mat::from_fn(d, d, |i, j| v[(i, d - 1 - j)]);
        let state = DensityMatrix::from_spectrum(energy.support().clone(), energy.site_dim(), p, vectors, Some(lv));
        Ok(GibbsState { state, log_partition })
    }

    pub fn op(&self) -> &LocalOperator {
        &self.op
    }

    pub fn support(&self) -> &Region {
        self.op.support()
    }

    pub fn site_dim(&self) -> usize {
        self.op.site_dim()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    pub(crate) fn eigen(&self) -> Result<&(Vec<f64>, Mat<c64>)> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = eigh(self.op.matrix())?;
        Ok(self.eigen.get_or_init(|| e))
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<&[f64]> {
        Ok(&self.eigen()?.0)
    }

    /// Absolute threshold separating the support from the kernel.
    pub fn support_threshold(&self, support_cutoff: f64) -> Result<f64> {
        if self.faithful {
            return Ok(0.0);
        }
        let top = self.eigenvalues()?.last().copied().unwrap_or(0.0);
        Ok(support_cutoff * top.abs().max(1.0))
    }

    pub fn support_rank(&self, support_cutoff: f64) -> Result<usize> {
        if self.faithful {
            return Ok(self.dim());
        }
        let t = self.support_threshold(support_cutoff)?;
        Ok(self.eigenvalues()?.iter().filter(|&&x| x > t).count())
    }

    pub fn spectrum(&self, support_cutoff: f64) -> Result<SpectralDecomposition> {
        let (vals, vecs) = self.eigen()?.clone();
        let mut spec = with_support(vals, vecs, support_cutoff);
        if self.faithful {
            spec.support_rank = spec.eigenvalues.len();
            spec.threshold = 0.0;
        }
        Ok(spec)
    }

    /// Logarithm on the support (0 on the kernel) at the default cutoff.
    pub fn log(&self) -> Result<&LocalOperator> {
        if let Some(l) = self.log.get() {
            return Ok(l);
        }
        let l = self.log_with_cutoff(DEFAULT_SUPPORT_CUTOFF)?;
        Ok(self.log.get_or_init(|| l))
    }

    pub(crate) fn log_with_cutoff(&self, support_cutoff: f64) -> Result<LocalOperator> {
        if let Some(l) = self.log.get() {
            if self.faithful {
                return Ok(l.clone());
            }
        }
        let (vals, vecs) = self.eigen()?;
        if let Some(lv) = &self.exact_log_values {
            let l = LocalOperator::hermitian_unchecked(
                self.support().clone(),
                self.site_dim(),
                weighted_outer(vecs.as_ref(), lv),
            );
            return Ok(self.log.get_or_init(|| l).clone());
        }
        let t = self.support_threshold(support_cutoff)?;
        if self.faithful {
            if let Some(&lo) = vals.first() {
                if !(lo > 0.0) {
                    return Err(Error::domain(format!(
                        "faithful state has non-positive eigenvalue {lo:.3e}; numerical support is lost"
                    )));
                }
            }
        }
        let lv: Vec<f64> = vals.iter().map(|&x| if x > t { x.ln() } else { 0.0 }).collect();
        Ok(LocalOperator::hermitian_unchecked(
            self.support().clone(),
            self.site_dim(),
            weighted_outer(vecs.as_ref(), &lv),
        ))
    }

    /// Exact logarithms of the eigenvalues when the spectrum was known at
    /// construction, aligned with [`DensityMatrix::eigenvalues`].
    pub fn exact_log_eigenvalues(&self) -> Option<&[f64]> {
        self.exact_log_values.as_deref()
    }

    /// Marginal on `keep ⊆ supp ρ`. Faithfulness is inherited.
    pub fn reduce(&self, keep: &Region) -> Result<DensityMatrix> {
        if keep == self.support() {
            return Ok(self.clone());
        }
        let op = partial_trace(&self.op, keep)?;
        Ok(DensityMatrix::unchecked(op, self.faithful))
    }

    /// `Tr ρA` for an observable supported inside `supp ρ`.
    pub fn expectation(&self, obs: &LocalOperator) -> Result<f64> {
        if !obs.support().is_subset_of(self.support()) {
            return Err(Error::Containment { inner: obs.support().to_string(), outer: self.support().to_string() });
        }
        // Reducing first is cheaper than embedding the observable.
        let v = if obs.support().volume() * 2 < self.support().volume() {
            self.reduce(obs.support())?.op.trace_product(obs)?
        } else {
            self.op.trace_product(&embed(obs, self.support())?)?
        };
        Ok(v.re)
    }
}

/// A Gibbs state and its log-partition function.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub state: DensityMatrix,
    pub log_partition: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// How buffered Gibbs marginals are computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferedRoute {
    /// Enlarged boxes up to this Hilbert dimension are diagonalized densely;
    /// longer 1D chains go through the MPO route.
    pub dense_limit: usize,
    pub mpo: MpoOptions,
}

impl Default for BufferedRoute {
    fn default() -> Self {
        BufferedRoute { dense_limit: 1 << 10, mpo: MpoOptions::default() }
    }
}

/// Families of states indexed by finite regions.
#[derive(Clone, Debug)]
pub enum StateFamily {
    /// `ρ₀^{⊗Λ}`.
    Product { site_state: LocalOperator },
    /// `e^{−βU_Λ} / Z_Λ`.
    InternalGibbs { potential: Potential, beta: f64 },
    /// Marginal on `Λ` of the internal Gibbs state of `Λ` enlarged by
    /// `buffer` sites in every direction.
    BufferedGibbs {
        potential: Potential,
        beta: f64,
        buffer: usize,
        boundary: Boundary,
        route: BufferedRoute,
    },
    /// `I / d^|Λ|`.
    Tracial { site_dim: usize },
}

impl StateFamily {
    pub fn buffered(potential: Potential, beta: f64, buffer: usize) -> Self {
        StateFamily::BufferedGibbs {
            potential,
            beta,
            buffer,
            boundary: Boundary::Open,
            route: BufferedRoute::default(),
        }
    }

    pub fn site_dim(&self) -> usize {
        match self {
            StateFamily::Product { site_state } => site_state.site_dim(),
            StateFamily::InternalGibbs { potential, .. } | StateFamily::BufferedGibbs { potential, .. } => {
                potential.site_dim()
            }
            StateFamily::Tracial { site_dim } => *site_dim,
        }
    }

    /// The state's restriction to `region`.
    pub fn marginal(&self, region: &Region) -> Result<DensityMatrix> {
        match self {
            StateFamily::Product { site_state } => DensityMatrix::product(site_state, region),
            StateFamily::Tracial { site_dim } => DensityMatrix::maximally_mixed(region, *site_dim),
            StateFamily::InternalGibbs { potential, beta } => {
                Ok(DensityMatrix::gibbs(&internal_energy(potential, region)?, *beta)?.state)
            }
            StateFamily::BufferedGibbs { potential, beta, buffer, boundary, route } => {
                buffered_marginal(potential, *beta, region, *buffer, *boundary, route)
            }
        }
    }
}

fn buffered_marginal(
    pot: &Potential,
    beta: f64,
    region: &Region,
    buffer: usize,
    boundary: Boundary,
    route: &BufferedRoute,
) -> Result<DensityMatrix> {
    if region.is_empty() {
        return DensityMatrix::maximally_mixed(region, pot.site_dim());
    }
    let enlarged = region.collar(buffer);
    match boundary {
        Boundary::Periodic => {
            let (lo, hi) = enlarged.bounds().expect("non-empty");
            let torus = Region::cuboid(&lo, &hi)?;
            let u = internal_energy_periodic(pot, &torus)?;
            DensityMatrix::gibbs(&u, beta)?.state.reduce(region)
        }
        Boundary::Open => {
            let dim = enlarged.hilbert_dim(pot.site_dim());
            let mpo_ok = pot.is_nearest_neighbor_chain() && enlarged.is_interval() && enlarged.volume() >= 2;
            if dim <= route.dense_limit as u128 || !mpo_ok {
                let u = internal_energy(pot, &enlarged)?;
                return DensityMatrix::gibbs(&u, beta)?.state.reduce(region);
            }
            crate::operator::dense_dim(region, pot.site_dim(), pot.max_dense_dim())?;
            let g = GibbsMpo::evolve(pot, beta, &enlarged, &route.mpo)?;
            DensityMatrix::faithful(g.marginal(region)?)
        }
    }
}

/// Trace distance between buffered marginals on `region` with buffers `b1`
/// and `b2`.
pub fn buffered_drift(family: &StateFamily, region: &Region, b1: usize, b2: usize) -> Result<f64> {
    let StateFamily::BufferedGibbs { potential, beta, boundary, route, .. } = family else {
        return Err(Error::validation("buffer drift is defined for buffered Gibbs families only"));
    };
    let a = buffered_marginal(potential, *beta, region, b1, *boundary, route)?;
    let b = buffered_marginal(potential, *beta, region, b2, *boundary, route)?;
    trace_distance(a.op(), b.op())
}

/// A one-site state with Bloch vector `r` (|r| ≤ 1), at `site`.
pub fn bloch_state(site: Site, r: [f64; 3]) -> Result<LocalOperator> {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if norm > 1.0 + STATE_TOL {
        return Err(Error::validation(format!("Bloch vector has length {norm} > 1")));
    }
    let dim = site.dim();
    let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c64::new((1.0 + r[2]) / 2.0, 0.0),
        (1, 1) => c64::new((1.0 - r[2]) / 2.0, 0.0),
        (0, 1) => c64::new(r[0] / 2.0, -r[1] / 2.0),
        _ => c64::new(r[0] / 2.0, r[1] / 2.0),
    });
    LocalOperator::hermitian(Region::from_sites(dim, [site])?, 2, m)
}
