//! Experiment configuration: a TOML file, dotted-key overrides, and schema
//! validation with field paths in every error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ModelSpec, Potential, Preset};
use crate::mpo::MpoOptions;
use crate::operator::DEFAULT_MAX_DENSE_DIM;
use crate::random;
use crate::region::{Region, Site};
use crate::states::{bloch_state, Boundary, BufferedRoute, StateFamily};
use crate::thermo::BlochGrid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Seed for every randomized step of a run.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub boxes: BoxSpec,
    #[serde(default)]
    pub buffer: BufferSpec,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub mean_field: BlochGrid,
    #[serde(default)]
    pub gibbs_product: GibbsProductSpec,
    #[serde(default)]
    pub pb_gt: PbGtSpec,
    #[serde(default)]
    pub selftest: SelftestSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_seed() -> u64 {
    20240611
}

/// Centered boxes with the given side lengths in every direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSpec {
    pub sides: Vec<usize>,
}

impl Default for BoxSpec {
    fn default() -> Self {
        BoxSpec { sides: vec![4, 6, 8, 10, 12] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferSpec {
    pub width: usize,
    /// Buffer compared against `width` by the drift gate.
    pub drift_width: usize,
    pub boundary: Boundary,
    pub dense_limit: usize,
    pub mpo: MpoOptions,
}

impl Default for BufferSpec {
    fn default() -> Self {
        let route = BufferedRoute::default();
        BufferSpec { width: 3, drift_width: 2, boundary: Boundary::Open, dense_limit: route.dense_limit, mpo: route.mpo }
    }
}

/// The comparison state `ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaSpec {
    /// Product of a diagonal one-site state.
    Product { diagonal: Vec<f64> },
    /// Product of the qubit state with this Bloch vector.
    Bloch { vector: [f64; 3] },
    /// Product of a qubit state drawn from the run seed.
    RandomProduct,
    Tracial,
    /// Internal Gibbs states of the same model at another inverse temperature.
    InternalGibbs { beta: f64 },
    /// The buffered Gibbs family itself.
    BufferedGibbs,
}

impl Default for OmegaSpec {
    fn default() -> Self {
        OmegaSpec::Product { diagonal: vec![0.3, 0.7] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Residual of exact finite-volume identities.
    pub identity: f64,
    /// Largest accepted trace distance between buffer widths.
    pub drift_gate: f64,
    /// Largest accepted per-site relative-entropy difference at the last box.
    pub final_gap: f64,
    pub gibbs_product: f64,
    /// Floor for inequality slacks (PB/GT, Klein, information rate).
    pub slack: f64,
    /// Growth of the log-gap ratio below this counts as flat.
    pub ratio_growth: f64,
    pub mean_field: f64,
    /// Slack for strong subadditivity and monotonicity under restriction.
    pub entropy_inequality: f64,
    /// Threshold separating zero from nonzero in the Klein equality case.
    pub klein_equality: f64,
    pub round_trip: f64,
    /// `|mean_N − s|` accepted by the concentration check.
    pub mcmillan_mean: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            drift_gate: 0.02,
            final_gap: 0.05,
            gibbs_product: 1e-9,
            slack: 1e-10,
            ratio_growth: 1e-7,
            mean_field: 1e-6,
            entropy_inequality: 1e-9,
            klein_equality: 1e-9,
            round_trip: 1e-9,
            mcmillan_mean: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_dense_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_dense_dim: DEFAULT_MAX_DENSE_DIM }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsProductSpec {
    pub inner_sites: usize,
    pub ambient_sites: usize,
    pub betas: Vec<f64>,
}

impl Default for GibbsProductSpec {
    fn default() -> Self {
        GibbsProductSpec { inner_sites: 3, ambient_sites: 7, betas: vec![0.2, 0.8, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbGtSpec {
    pub pairs: usize,
    /// Qubit counts of the random pairs; 2 to 4 qubits give dimensions 4 to 16.
    pub min_sites: usize,
    pub max_sites: usize,
}

impl Default for PbGtSpec {
    fn default() -> Self {
        PbGtSpec { pairs: 100, min_sites: 2, max_sites: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSpec {
    pub klein_pairs: usize,
    pub ssa_states: usize,
    pub restriction_pairs: usize,
    pub adjointness_pairs: usize,
    pub round_trips: usize,
}

impl Default for SelftestSpec {
    fn default() -> Self {
        SelftestSpec { klein_pairs: 200, ssa_states: 100, restriction_pairs: 50, adjointness_pairs: 50, round_trips: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("qgibbs-out") }
    }
}

impl ExperimentConfig {
    /// Defaults around a model.
    pub fn for_model(model: ModelSpec) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            model,
            boxes: BoxSpec::default(),
            buffer: BufferSpec::default(),
            omega: OmegaSpec::default(),
            tolerances: Tolerances::default(),
            limits: Limits::default(),
            mean_field: BlochGrid::default(),
            gibbs_product: GibbsProductSpec::default(),
            pb_gt: PbGtSpec::default(),
            selftest: SelftestSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Parses TOML text, applies `key=value` overrides, and validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::validation(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let value = toml::Value::Table(table);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value)
            .map_err(|e| {
                let inner = e.inner().to_string();
                let first = inner.lines().next().unwrap_or_default().to_string();
                Error::validation(format!("config field `{}`: {first}", e.path()))
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "config field `schema_version`: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.model.validate()?;
        if self.boxes.sides.is_empty() || self.boxes.sides.contains(&0) {
            return Err(Error::validation("config field `boxes.sides`: needs positive side lengths"));
        }
        if self.boxes.sides.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("config field `boxes.sides`: sides must strictly increase"));
        }
        if self.limits.max_dense_dim == 0 {
            return Err(Error::validation("config field `limits.max_dense_dim`: must be positive"));
        }
        match &self.omega {
            OmegaSpec::Product { diagonal } => {
                let sum: f64 = diagonal.iter().sum();
                if diagonal.len() != 2 || diagonal.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::validation(
                        "config field `omega.diagonal`: needs two non-negative entries summing to 1",
                    ));
                }
            }
            OmegaSpec::Bloch { vector } => {
                if vector.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
                    return Err(Error::validation("config field `omega.vector`: Bloch vector longer than 1"));
                }
            }
            OmegaSpec::InternalGibbs { beta } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::validation("config field `omega.beta`: must be finite and >= 0"));
                }
            }
            _ => {}
        }
        if self.buffer.drift_width == self.buffer.width {
            return Err(Error::validation("config field `buffer.drift_width`: must differ from `buffer.width`"));
        }
        if self.pb_gt.min_sites == 0 || self.pb_gt.min_sites > self.pb_gt.max_sites {
            return Err(Error::validation("config field `pb_gt`: need 1 <= min_sites <= max_sites"));
        }
        if self.gibbs_product.inner_sites == 0 || self.gibbs_product.inner_sites >= self.gibbs_product.ambient_sites {
            return Err(Error::validation("config field `gibbs_product`: need 0 < inner_sites < ambient_sites"));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        Ok(self.model.potential()?.with_max_dense_dim(self.limits.max_dense_dim))
    }

    /// Centered boxes; a resource error names the first box over the cap.
    pub fn box_sequence(&self) -> Result<Vec<Region>> {
        let boxes = Region::box_sequence(self.model.dimension, &self.boxes.sides)?;
        for b in &boxes {
            crate::operator::dense_dim(b, 2, self.limits.max_dense_dim)?;
        }
        Ok(boxes)
    }

    pub fn route(&self) -> BufferedRoute {
        BufferedRoute { dense_limit: self.buffer.dense_limit, mpo: self.buffer.mpo.clone() }
    }

    /// The buffered Gibbs family with the given buffer width.
    pub fn psi_family(&self, width: usize) -> Result<StateFamily> {
        Ok(StateFamily::BufferedGibbs {
            potential: self.potential()?,
            beta: self.model.beta,
            buffer: width,
            boundary: self.buffer.boundary,
            route: self.route(),
        })
    }

    pub fn omega_family(&self) -> Result<StateFamily> {
        let origin = Site::new(vec![0; self.model.dimension]);
        let at = Region::from_sites(self.model.dimension, [origin.clone()])?;
        Ok(match &self.omega {
            OmegaSpec::Product { diagonal } => StateFamily::Product {
                site_state: crate::operator::LocalOperator::diagonal(at, 2, diagonal)?,
            },
            OmegaSpec::Bloch { vector } => StateFamily::Product { site_state: bloch_state(origin, *vector)? },
            OmegaSpec::RandomProduct => {
                let mut r = random::rng(self.seed);
                StateFamily::Product { site_state: bloch_state(origin, random::random_bloch(&mut r, 0.95))? }
            }
            OmegaSpec::Tracial => StateFamily::Tracial { site_dim: 2 },
            OmegaSpec::InternalGibbs { beta } => StateFamily::InternalGibbs { potential: self.potential()?, beta: *beta },
            OmegaSpec::BufferedGibbs => self.psi_family(self.buffer.width)?,
        })
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as TOML and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::validation(format!("override `{assignment}` has an empty key")));
    }
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::validation(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Example configuration: transverse Ising chain at β = 0.8 with the default boxes.
pub fn example_toml() -> String {
    let model = ModelSpec::new(Preset::TransverseIsing { j: 1.0, g: 1.0 }, 0.8, 1).expect("valid model");
    ExperimentConfig::for_model(model).to_toml()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
preset = "transverse-ising"
J = 1.0
g = 1.0
beta = 0.8
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.boxes.sides, vec![4, 6, 8, 10, 12]);
        assert_eq!(cfg.buffer.width, 3);
        assert_eq!(cfg.model.dimension, 1);
        assert_eq!(cfg.omega, OmegaSpec::Product { diagonal: vec![0.3, 0.7] });
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert!(ExperimentConfig::from_toml(&example_toml()).is_ok());
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::from_toml_with_overrides(
            MINIMAL,
            &["model.beta=0.5".into(), "boxes.sides=[2,3]".into(), "omega.kind=tracial".into()],
        )
        .unwrap();
        assert_eq!(cfg.model.beta, 0.5);
        assert_eq!(cfg.boxes.sides, vec![2, 3]);
        assert_eq!(cfg.omega, OmegaSpec::Tracial);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = format!("{MINIMAL}\n[tolerances]\nidentity = \"small\"\n");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("tolerances.identity"), "{err}");
        let unknown = format!("{MINIMAL}\n[buffer]\nwidht = 2\n");
        let err = ExperimentConfig::from_toml(&unknown).unwrap_err().to_string();
        assert!(err.contains("buffer"), "{err}");
        let err = ExperimentConfig::from_toml_with_overrides(MINIMAL, &["model.beta=-1".into()]).unwrap_err();
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn oversized_box_names_the_box() {
        let cfg = ExperimentConfig::from_toml_with_overrides(MINIMAL, &["boxes.sides=[4,13]".into()]).unwrap();
        let err = cfg.box_sequence().unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
        assert!(err.to_string().contains("[-6,6]"), "{err}");
    }
}
