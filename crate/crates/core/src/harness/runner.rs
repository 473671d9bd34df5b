//! One function per command. Each evaluates its boxes, builds the gated
//! checks, and returns a [`RunOutcome`].

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, Tolerances};
use super::{max_growth, strictly_decreasing, Command, Gate, RunOutcome};
use crate::entropy::{entropy_density, log_density_variance, relative_entropy, von_neumann_entropy};
use crate::error::Result;
use crate::operator::{trace_distance, LocalOperator, DEFAULT_SUPPORT_CUTOFF};
use crate::perturbation::{gibbs_product_check, involution_residual, log_density_gap, pb_gt_check};
use crate::random::{self, random_density, random_hermitian, random_usize};
use crate::region::Region;
use crate::series::{finite_or_tag, ExtrapolationSeries};
use crate::states::{DensityMatrix, StateFamily};
use crate::thermo::{finite_volume_identity, information_rate, mean_field_scan, pressure, FiniteVolumeIdentity};

/// Runs one command on a validated configuration.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    match command {
        Command::Pressure => run_pressure(cfg),
        Command::EntropyDensity => run_entropy_density(cfg),
        Command::InfoRate => run_info_rate(cfg),
        Command::RelEntDensity => run_rel_ent_density(cfg),
        Command::MeanField => run_mean_field(cfg),
        Command::VerifyGibbsProduct => run_gibbs_product(cfg),
        Command::PbGt => run_pb_gt(cfg),
        Command::LogGap => {
            let report = verify_theorem1(cfg)?;
            let gates = report.log_gap_gates(&cfg.tolerances);
            let series = vec![report.gap_per_site_series()?];
            Ok(RunOutcome::new(command, gates, to_json(&report), series))
        }
        Command::VerifyTheorem1 => {
            let report = verify_theorem1(cfg)?;
            let gates = report.theorem_gates(&cfg.tolerances);
            let series = vec![report.info_rate.clone(), report.rel_ent_density.clone(), report.abs_difference.clone()];
            Ok(RunOutcome::new(command, gates, to_json(&report), series))
        }
        Command::Mcmillan => run_mcmillan(cfg),
        Command::Selftest => {
            let report = super::selftest::run_selftest(cfg)?;
            Ok(RunOutcome::new(command, report.gates(), to_json(&report), Vec::new()))
        }
    }
}

fn to_json<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("report serializes")
}

fn summary(s: &ExtrapolationSeries) -> serde_json::Value {
    json!({
        "label": s.label(),
        "limit_estimate": s.limit_estimate(),
        "slope": s.slope(),
        "fit_residual": s.fit_residual(),
    })
}

fn run_pressure(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let pot = cfg.potential()?;
    let s = pressure(&pot, cfg.model.beta, &cfg.box_sequence()?)?;
    let gates = vec![Gate::holds("points-finite", s.values().iter().all(|v| v.is_finite()))];
    Ok(RunOutcome::new(Command::Pressure, gates, json!({ "pressure": summary(&s) }), vec![s]))
}

fn run_entropy_density(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let omega = cfg.omega_family()?;
    let s = entropy_density(&omega, &cfg.box_sequence()?)?;
    let ln_n = (omega.site_dim() as f64).ln();
    let tol = cfg.tolerances.entropy_inequality;
    let gates = vec![
        Gate::at_least("entropy-nonnegative", s.values().into_iter().fold(f64::INFINITY, f64::min), -tol),
        Gate::at_most("entropy-below-log-n", s.values().into_iter().fold(f64::NEG_INFINITY, f64::max), ln_n + tol),
    ];
    Ok(RunOutcome::new(Command::EntropyDensity, gates, json!({ "entropy_density": summary(&s) }), vec![s]))
}

fn run_info_rate(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let pot = cfg.potential()?;
    let beta = cfg.model.beta;
    let boxes = cfg.box_sequence()?;
    let omega = cfg.omega_family()?;
    let rows: Vec<FiniteVolumeIdentity> = boxes
        .par_iter()
        .map(|r| finite_volume_identity(&pot, beta, &omega.marginal(r)?))
        .collect::<Result<_>>()?;
    let per_site = |f: &dyn Fn(&FiniteVolumeIdentity) -> f64| -> Vec<(usize, f64)> {
        rows.iter().map(|row| (row.volume, f(row) / row.volume as f64)).collect()
    };
    let rate = ExtrapolationSeries::new("information-rate", per_site(&|r| r.relative_entropy))?;
    let functional =
        ExtrapolationSeries::new("free-energy-functional", per_site(&|r| r.entropy - beta * r.energy))?;
    let own = information_rate(&pot, beta, &StateFamily::InternalGibbs { potential: pot.clone(), beta }, &boxes)?;
    let tol = &cfg.tolerances;
    let worst_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let worst_excess = rows
        .iter()
        .map(|r| r.entropy - beta * r.energy - r.log_partition)
        .fold(f64::NEG_INFINITY, f64::max);
    let gates = vec![
        Gate::at_most("relative-entropy-identity", worst_residual, tol.identity),
        Gate::at_least("rate-nonnegative", rate.values().into_iter().fold(f64::INFINITY, f64::min), -tol.slack),
        Gate::at_most("variational-inequality", worst_excess, tol.entropy_inequality),
        Gate::at_most(
            "internal-gibbs-own-rate",
            own.values().into_iter().map(f64::abs).fold(0.0, f64::max),
            tol.identity,
        ),
    ];
    let results = json!({
        "information_rate": summary(&rate),
        "free_energy_functional": summary(&functional),
        "rows": rows.iter().map(identity_row).collect::<Vec<_>>(),
    });
    Ok(RunOutcome::new(Command::InfoRate, gates, results, vec![rate, functional, own]))
}

fn identity_row(r: &FiniteVolumeIdentity) -> serde_json::Value {
    #[derive(Serialize)]
    struct Row {
        volume: usize,
        #[serde(serialize_with = "finite_or_tag")]
        relative_entropy: f64,
        entropy: f64,
        energy: f64,
        log_partition: f64,
        residual: f64,
    }
    to_json(&Row {
        volume: r.volume,
        relative_entropy: r.relative_entropy,
        entropy: r.entropy,
        energy: r.energy,
        log_partition: r.log_partition,
        residual: r.residual,
    })
}

fn run_rel_ent_density(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let boxes = cfg.box_sequence()?;
    let omega = cfg.omega_family()?;
    let psi = cfg.psi_family(cfg.buffer.width)?;
    let other = cfg.psi_family(cfg.buffer.drift_width)?;
    let cells: Vec<(f64, f64)> = boxes
        .par_iter()
        .map(|r| {
            let p = psi.marginal(r)?;
            let rel = relative_entropy(&omega.marginal(r)?, &p, DEFAULT_SUPPORT_CUTOFF)?;
            let drift = trace_distance(p.op(), other.marginal(r)?.op())?;
            Ok((rel / r.volume() as f64, drift))
        })
        .collect::<Result<_>>()?;
    let s = ExtrapolationSeries::new(
        "relative-entropy-density",
        boxes.iter().zip(&cells).map(|(r, c)| (r.volume(), c.0)).collect(),
    )?;
    let max_drift = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let gates = vec![
        Gate::at_least("density-nonnegative", s.values().into_iter().fold(f64::INFINITY, f64::min), -cfg.tolerances.slack),
        Gate::drift(max_drift, cfg.tolerances.drift_gate),
    ];
    let results = json!({
        "relative_entropy_density": summary(&s),
        "drift": boxes.iter().zip(&cells).map(|(r, c)| json!({"volume": r.volume(), "trace_distance": c.1})).collect::<Vec<_>>(),
    });
    Ok(RunOutcome::new(Command::RelEntDensity, gates, results, vec![s]))
}

fn run_mean_field(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let pot = cfg.potential()?;
    let boxes = cfg.box_sequence()?;
    let beta = cfg.model.beta;
    let mf = mean_field_scan(&pot, beta, &cfg.mean_field, &boxes)?;
    let p = pressure(&pot, beta, &boxes)?;
    let gates = vec![Gate::at_most(
        "mean-field-below-pressure",
        mf.value - p.limit_estimate(),
        cfg.tolerances.mean_field,
    )];
    let results = json!({
        "parameters": mf.parameters,
        "bloch_vector": mf.bloch_vector,
        "value": mf.value,
        "evaluations": mf.evaluations,
        "pressure": summary(&p),
    });
    Ok(RunOutcome::new(Command::MeanField, gates, results, vec![mf.series, p]))
}

fn run_gibbs_product(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let pot = cfg.potential()?;
    let spec = &cfg.gibbs_product;
    let inner = Region::centered_box(cfg.model.dimension, spec.inner_sites)?;
    let ambient = Region::centered_box(cfg.model.dimension, spec.ambient_sites)?;
    crate::operator::dense_dim(&ambient, pot.site_dim(), cfg.limits.max_dense_dim)?;
    let mut rows = Vec::new();
    let (mut marginal, mut factorization) = (0.0f64, 0.0f64);
    for &beta in &spec.betas {
        let c = gibbs_product_check(&pot, beta, &inner, &ambient)?;
        marginal = marginal.max(c.marginal_gap);
        factorization = factorization.max(c.factorization_gap);
        rows.push(json!({ "beta": beta, "check": c }));
    }
    let tol = cfg.tolerances.gibbs_product;
    let gates = vec![
        Gate::at_most("marginal-gap", marginal, tol),
        Gate::at_most("factorization-gap", factorization, tol),
    ];
    let results = json!({ "inner": inner.to_string(), "ambient": ambient.to_string(), "checks": rows });
    Ok(RunOutcome::new(Command::VerifyGibbsProduct, gates, results, Vec::new()))
}

/// Worst slacks over seeded random pairs and over commuting and scalar cases.
#[derive(Clone, Debug, Serialize)]
pub struct PbGtSummary {
    pub seed: u64,
    pub pairs: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub worst_slack: f64,
    pub worst_involution: f64,
    /// Largest `|gt_slack|` over commuting pairs.
    pub commuting_gt_equality: f64,
    pub commuting_pb_slack: f64,
    /// Largest `|pb_slack|, |gt_slack|` with `h = c·I`.
    pub scalar_equality: f64,
}

pub fn pb_gt_summary(cfg: &ExperimentConfig) -> Result<PbGtSummary> {
    let spec = &cfg.pb_gt;
    let mut r = random::rng(cfg.seed);
    let mut out = PbGtSummary {
        seed: cfg.seed,
        pairs: spec.pairs,
        min_dim: usize::MAX,
        max_dim: 0,
        worst_slack: f64::INFINITY,
        worst_involution: 0.0,
        commuting_gt_equality: 0.0,
        commuting_pb_slack: f64::INFINITY,
        scalar_equality: 0.0,
    };
    for _ in 0..spec.pairs {
        let k = random_usize(&mut r, spec.min_sites, spec.max_sites);
        let region = Region::interval(0, k as i64 - 1);
        let rho = DensityMatrix::new(random_density(&mut r, region.clone(), 2))?;
        let h = random_hermitian(&mut r, region, 2);
        out.min_dim = out.min_dim.min(rho.dim());
        out.max_dim = out.max_dim.max(rho.dim());
        out.worst_slack = out.worst_slack.min(pb_gt_check(&rho, &h)?.min_slack());
        out.worst_involution = out.worst_involution.max(involution_residual(&rho, &h)?);
    }
    for _ in 0..spec.pairs.div_ceil(5) {
        let k = random_usize(&mut r, spec.min_sites, spec.max_sites);
        let region = Region::interval(0, k as i64 - 1);
        let p = diagonal_of(&random_density(&mut r, region.clone(), 2));
        let a = diagonal_of(&random_hermitian(&mut r, region.clone(), 2));
        let rho = DensityMatrix::new(LocalOperator::diagonal(region.clone(), 2, &p)?)?;
        let h = LocalOperator::diagonal(region.clone(), 2, &a)?;
        let c = pb_gt_check(&rho, &h)?;
        out.commuting_gt_equality = out.commuting_gt_equality.max(c.gt_slack.abs());
        out.commuting_pb_slack = out.commuting_pb_slack.min(c.pb_slack);
        let dense = DensityMatrix::new(random_density(&mut r, region.clone(), 2))?;
        let scalar = LocalOperator::identity(region, 2)?.scaled(a[0]);
        let s = pb_gt_check(&dense, &scalar)?;
        out.scalar_equality = out.scalar_equality.max(s.pb_slack.abs()).max(s.gt_slack.abs());
    }
    Ok(out)
}

fn diagonal_of(op: &LocalOperator) -> Vec<f64> {
    (0..op.dim()).map(|i| op.matrix()[(i, i)].re).collect()
}

fn run_pb_gt(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let s = pb_gt_summary(cfg)?;
    let tol = &cfg.tolerances;
    let gates = vec![
        Gate::at_least("random-slacks", s.worst_slack, -tol.slack),
        Gate::at_most("involution", s.worst_involution, tol.round_trip),
        Gate::at_most("commuting-gt-equality", s.commuting_gt_equality, tol.slack),
        Gate::at_least("commuting-pb-slack", s.commuting_pb_slack, -tol.slack),
        Gate::at_most("scalar-equality", s.scalar_equality, tol.slack),
    ];
    Ok(RunOutcome::new(Command::PbGt, gates, to_json(&s), Vec::new()))
}

/// One box of the buffered comparison run. Relative entropies and differences are per
/// site; residuals are absolute.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremRow {
    pub volume: usize,
    #[serde(serialize_with = "finite_or_tag")]
    pub rel_internal: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub rel_psi: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub difference: f64,
    pub expectation: f64,
    /// `|S(ω|ρ^IG) − S(ω|ψ) − ω(log ψ − log ρ^IG)|`.
    pub difference_residual: f64,
    /// `|S(ω|ρ^IG) + S(ω) − βω(U) − log Z|`.
    pub identity_residual: f64,
    /// Trace distance between ψ marginals at the two buffer widths.
    pub drift: f64,
    pub gap_norm: f64,
    pub gap_per_site: f64,
    pub surface_norm: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub buffer: usize,
    pub drift_buffer: usize,
    pub rows: Vec<TheoremRow>,
    pub info_rate: ExtrapolationSeries,
    pub rel_ent_density: ExtrapolationSeries,
    pub abs_difference: ExtrapolationSeries,
    pub final_gap: f64,
    pub difference_decreasing: bool,
    pub max_drift: f64,
    pub max_difference_residual: f64,
    pub max_identity_residual: f64,
    pub gap_per_site_decreasing: bool,
    pub max_ratio: f64,
    pub max_ratio_growth: f64,
}

impl TheoremReport {
    pub fn theorem_gates(&self, tol: &Tolerances) -> Vec<Gate> {
        vec![
            Gate::at_most("difference-identity", self.max_difference_residual, tol.identity),
            Gate::at_most("relative-entropy-identity", self.max_identity_residual, tol.identity),
            Gate::holds("difference-decreasing", self.difference_decreasing),
            Gate::at_most("final-gap", self.final_gap, tol.final_gap),
            Gate::drift(self.max_drift, tol.drift_gate),
        ]
    }

    pub fn log_gap_gates(&self, tol: &Tolerances) -> Vec<Gate> {
        vec![
            Gate::holds("gap-per-site-decreasing", self.gap_per_site_decreasing),
            Gate::at_most("ratio-growth", self.max_ratio_growth, tol.ratio_growth),
            Gate::at_most("difference-identity", self.max_difference_residual, tol.identity),
            Gate::drift(self.max_drift, tol.drift_gate),
        ]
    }

    pub fn gap_per_site_series(&self) -> Result<ExtrapolationSeries> {
        ExtrapolationSeries::new("log-density-gap", self.rows.iter().map(|r| (r.volume, r.gap_per_site)).collect())
    }
}

/// Compares `S(ω_Λ|ρ^IG_Λ)` with `S(ω_Λ|ψ_Λ)` along the configured boxes.
pub fn verify_theorem1(cfg: &ExperimentConfig) -> Result<TheoremReport> {
    cfg.validate()?;
    let pot = cfg.potential()?;
    let beta = cfg.model.beta;
    let boxes = cfg.box_sequence()?;
    let omega = cfg.omega_family()?;
    let psi = cfg.psi_family(cfg.buffer.width)?;
    let other = cfg.psi_family(cfg.buffer.drift_width)?;
    let rows: Vec<TheoremRow> = boxes
        .par_iter()
        .map(|region| {
            let n = region.volume() as f64;
            let w = omega.marginal(region)?;
            let p = psi.marginal(region)?;
            let drift = trace_distance(p.op(), other.marginal(region)?.op())?;
            let gap = log_density_gap(&pot, beta, region, &p)?;
            let diff = gap.identity(&w)?;
            let ident = finite_volume_identity(&pot, beta, &w)?;
            Ok(TheoremRow {
                volume: region.volume(),
                rel_internal: diff.relative_to_internal / n,
                rel_psi: diff.relative_to_psi / n,
                difference: diff.difference / n,
                expectation: diff.expectation / n,
                difference_residual: diff.residual,
                identity_residual: ident.residual,
                drift,
                gap_norm: gap.summary.gap_norm,
                gap_per_site: gap.summary.per_site,
                surface_norm: gap.summary.surface_norm,
                ratio: gap.summary.ratio,
            })
        })
        .collect::<Result<_>>()?;
    let series = |label: &str, f: fn(&TheoremRow) -> f64| {
        ExtrapolationSeries::new(label, rows.iter().map(|r| (r.volume, f(r))).collect())
    };
    let info_rate = series("information-rate", |r| r.rel_internal)?;
    let rel_ent_density = series("relative-entropy-density", |r| r.rel_psi)?;
    let abs_difference = series("abs-difference", |r| r.difference.abs())?;
    let abs: Vec<f64> = abs_difference.values();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap_per_site).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let vanishes = |xs: &[f64]| xs.iter().all(|x| *x <= cfg.tolerances.identity);
    Ok(TheoremReport {
        buffer: cfg.buffer.width,
        drift_buffer: cfg.buffer.drift_width,
        final_gap: *abs.last().expect("at least one box"),
        // A difference that vanishes identically (one-site potentials, ω = ψ)
        // has nothing left to decrease.
        difference_decreasing: strictly_decreasing(&abs) || vanishes(&abs),
        max_drift: rows.iter().map(|r| r.drift).fold(0.0, f64::max),
        max_difference_residual: rows.iter().map(|r| r.difference_residual).fold(0.0, f64::max),
        max_identity_residual: rows.iter().map(|r| r.identity_residual).fold(0.0, f64::max),
        gap_per_site_decreasing: strictly_decreasing(&gaps) || vanishes(&gaps),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        max_ratio_growth: max_growth(&ratios),
        rows,
        info_rate,
        rel_ent_density,
        abs_difference,
    })
}

/// Mean and variance of `−log D_Λ / |Λ|` in the state itself.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McMillanRow {
    pub volume: usize,
    /// `S(φ_Λ)/|Λ|`.
    pub mean: f64,
    /// `Var_φ(−log D_Λ)/|Λ|²`.
    pub variance: f64,
}

pub fn mcmillan_rows(family: &StateFamily, boxes: &[Region]) -> Result<Vec<McMillanRow>> {
    boxes
        .par_iter()
        .map(|r| {
            let rho = family.marginal(r)?;
            let n = r.volume() as f64;
            Ok(McMillanRow {
                volume: r.volume(),
                mean: von_neumann_entropy(&rho)? / n,
                variance: log_density_variance(&rho)? / (n * n),
            })
        })
        .collect()
}

fn run_mcmillan(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let boxes = cfg.box_sequence()?;
    let rows = mcmillan_rows(&cfg.psi_family(cfg.buffer.width)?, &boxes)?;
    let mean = ExtrapolationSeries::new("mcmillan-mean", rows.iter().map(|r| (r.volume, r.mean)).collect())?;
    let variance = ExtrapolationSeries::new("mcmillan-variance", rows.iter().map(|r| (r.volume, r.variance)).collect())?;
    let variances: Vec<f64> = variance.values();
    let gates = vec![
        Gate::holds("variance-decreasing", strictly_decreasing(&variances)),
        Gate::at_most(
            "mean-near-entropy-density",
            (mean.last() - mean.limit_estimate()).abs(),
            cfg.tolerances.mcmillan_mean,
        ),
    ];
    let results = json!({ "rows": rows, "entropy_density": summary(&mean) });
    Ok(RunOutcome::new(Command::Mcmillan, gates, results, vec![mean, variance]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::OmegaSpec;
    use crate::harness::Status;
    use crate::lattice::{ModelSpec, Preset};

    fn config(preset: Preset, beta: f64, sides: &[usize]) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_model(ModelSpec::new(preset, beta, 1).unwrap());
        cfg.boxes.sides = sides.to_vec();
        cfg
    }

    #[test]
    fn one_site_potential_has_no_gap() {
        let mut cfg = config(Preset::Field { g: 0.7 }, 1.3, &[2, 3, 4, 5]);
        cfg.omega = OmegaSpec::Bloch { vector: [0.1, 0.2, 0.3] };
        let rep = verify_theorem1(&cfg).unwrap();
        for row in &rep.rows {
            assert!(row.difference.abs() < 1e-12);
            assert!(row.gap_norm < 1e-10);
            assert!(row.drift < 1e-12);
        }
        assert!(rep.difference_decreasing);
        assert!(rep.gap_per_site_decreasing);
    }

    #[test]
    fn omega_equal_to_psi() {
        let mut cfg = config(Preset::TransverseIsing { j: 1.0, g: 1.0 }, 0.8, &[2, 3, 4]);
        cfg.omega = OmegaSpec::BufferedGibbs;
        let rep = verify_theorem1(&cfg).unwrap();
        for row in &rep.rows {
            assert!(row.rel_psi.abs() < 1e-10);
            assert!(row.difference_residual < 1e-9);
        }
    }

    #[test]
    fn small_commands_pass() {
        let cfg = config(Preset::ClassicalIsing { j: 1.0, h: 0.0 }, 1.0, &[4, 6, 8, 10]);
        for cmd in [Command::Pressure, Command::EntropyDensity, Command::InfoRate, Command::Mcmillan] {
            let out = run(cmd, &cfg).unwrap();
            assert_eq!(out.status, Status::Pass, "{cmd}: {:?}", out.gates);
        }
    }

    #[test]
    fn pb_gt_with_few_pairs() {
        let mut cfg = config(Preset::TransverseIsing { j: 1.0, g: 1.0 }, 0.8, &[4]);
        cfg.pb_gt.pairs = 10;
        let out = run(Command::PbGt, &cfg).unwrap();
        assert_eq!(out.status, Status::Pass, "{:?}", out.gates);
        let again = run(Command::PbGt, &cfg).unwrap();
        assert_eq!(out.results, again.results);
    }

    #[test]
    fn tracial_mcmillan_has_zero_variance() {
        let boxes = Region::box_sequence(1, &[2, 3, 4]).unwrap();
        for row in mcmillan_rows(&StateFamily::Tracial { site_dim: 2 }, &boxes).unwrap() {
            assert!((row.mean - 2f64.ln()).abs() < 1e-14);
            assert!(row.variance < 1e-20);
        }
    }
}
