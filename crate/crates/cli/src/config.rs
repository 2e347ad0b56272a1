//! Scenario files.
//!
//! A scenario is one JSON object. Commands read the parts they need and
//! report a config error when a required part is missing.

use std::fs;
use std::path::{Path, PathBuf};

use incentive_net::dcrs::DcrsParams;
use incentive_net::engine::Behavior;
use incentive_net::growth::{refresh_params, GrowthConfig};
use incentive_net::{Topology, TopologyKind, UtilityModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring {
        n: usize,
    },
    Star {
        n: usize,
    },
    Random {
        n: usize,
        p: f64,
    },
    ScaleFree {
        n: usize,
        exponent: f64,
        #[serde(default = "two")]
        links_per_node: usize,
    },
    Regular {
        n: usize,
        degree: usize,
    },
    /// One `i j` pair per line; relative paths resolve against the config file.
    EdgeList {
        path: PathBuf,
    },
}

fn two() -> usize {
    2
}

impl TopologySpec {
    pub fn build(&self, seed: u64, base: &Path) -> CliResult<Topology> {
        let (kind, n) = match *self {
            TopologySpec::Ring { n } => (TopologyKind::Ring, n),
            TopologySpec::Star { n } => (TopologyKind::Star, n),
            TopologySpec::Random { n, p } => (TopologyKind::Random { p }, n),
            TopologySpec::ScaleFree {
                n,
                exponent,
                links_per_node,
            } => (
                TopologyKind::ScaleFree {
                    exponent,
                    links_per_node,
                },
                n,
            ),
            TopologySpec::Regular { n, degree } => (TopologyKind::Regular { degree }, n),
            TopologySpec::EdgeList { ref path } => {
                let path = base.join(path);
                let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                return Ok(Topology::parse_edge_list(&text)?);
            }
        };
        Ok(Topology::generate(&kind, n, seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilitySpec {
    Uniform { r2: f64 },
    PerAgent { r2_per_agent: Vec<f64> },
}

impl Default for UtilitySpec {
    fn default() -> Self {
        UtilitySpec::Uniform { r2: 4.0 }
    }
}

impl UtilitySpec {
    pub fn model(&self) -> UtilityModel<f64> {
        match self {
            UtilitySpec::Uniform { r2 } => UtilityModel::estimation(*r2),
            UtilitySpec::PerAgent { r2_per_agent } => UtilityModel::estimation_per_agent(r2_per_agent.clone()),
        }
    }

    fn validate(&self) -> CliResult<()> {
        let values: &[f64] = match self {
            UtilitySpec::Uniform { r2 } => std::slice::from_ref(r2),
            UtilitySpec::PerAgent { r2_per_agent } => r2_per_agent,
        };
        match values.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            Some(r) => Err(CliError::Config(format!("r2 must be positive, got {r}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Certain promotion, smallest demotion probability that keeps compliance optimal.
    #[default]
    Minimal,
    /// Certain promotion and certain demotion.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BehaviorSpec {
    All(Behavior),
    PerAgent(Vec<Behavior>),
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        BehaviorSpec::All(Behavior::Compliant)
    }
}

impl BehaviorSpec {
    pub fn expand(&self, n: usize) -> Vec<Behavior> {
        match self {
            BehaviorSpec::All(b) => vec![b.clone(); n],
            BehaviorSpec::PerAgent(list) => list.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarSweep {
    /// Agent counts, center included.
    pub sizes: Vec<usize>,
    #[serde(default = "star_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "eight")]
    pub r2: f64,
}

fn star_deltas() -> Vec<f64> {
    vec![1.0, 0.9, 0.8, 0.7]
}

fn eight() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleFreeTable {
    pub n: usize,
    pub exponents: Vec<f64>,
    pub epsilons: Vec<f64>,
    #[serde(default = "two")]
    pub links_per_node: usize,
    /// Independent graphs per exponent; the table reports their mean.
    #[serde(default = "one")]
    pub replicates: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TftSweep {
    pub degree: usize,
    pub deltas: Vec<f64>,
    #[serde(default = "tft_resolution")]
    pub resolution: f64,
}

fn tft_resolution() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSweep {
    #[serde(flatten)]
    pub network: GrowthConfig,
    pub rho_grid: Vec<f64>,
    /// Number of seeds, counted up from the scenario seed.
    pub seeds: u64,
    /// Defaults to the refresh preset rather than the plain design defaults.
    #[serde(default)]
    pub dcrs: Option<DcrsParams<f64>>,
}

impl GrowthSweep {
    pub fn params(&self) -> DcrsParams<f64> {
        self.dcrs.clone().unwrap_or_else(refresh_params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub dcrs: DcrsParams<f64>,
    #[serde(default)]
    pub protocol: ProtocolKind,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    /// Record per-period rows in `simulate` output.
    #[serde(default)]
    pub record_trace: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub star_sweep: Option<StarSweep>,
    #[serde(default)]
    pub scalefree_table: Option<ScaleFreeTable>,
    #[serde(default)]
    pub tft_sweep: Option<TftSweep>,
    #[serde(default)]
    pub growth_sweep: Option<GrowthSweep>,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_horizon() -> u64 {
    10_000
}

fn check_delta(name: &str, delta: f64) -> CliResult<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1], got {delta}")))
    }
}

fn check_epsilon(epsilon: f64) -> CliResult<()> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(CliError::Config(format!("epsilon must lie in [0, 1), got {epsilon}")))
    }
}

fn require_nonempty<T>(name: &str, list: &[T]) -> CliResult<()> {
    if list.is_empty() {
        Err(CliError::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        if let Some(delta) = self.delta {
            check_delta("delta", delta)?;
        }
        check_epsilon(self.epsilon)?;
        self.utility.validate()?;
        if !(self.dcrs.step > 0.0 && self.dcrs.tolerance > 0.0) {
            return Err(CliError::Config("dcrs step and tolerance must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(CliError::Config("horizon must be positive".into()));
        }
        if let Some(TopologySpec::EdgeList { path }) = &self.topology {
            let full = self.base_dir.join(path);
            if !full.is_file() {
                return Err(CliError::Config(format!("edge list {} does not exist", full.display())));
            }
        }
        if let Some(s) = &self.star_sweep {
            require_nonempty("star_sweep.sizes", &s.sizes)?;
            require_nonempty("star_sweep.deltas", &s.deltas)?;
            for &d in &s.deltas {
                check_delta("star_sweep.deltas", d)?;
            }
            if let Some(&n) = s.sizes.iter().find(|&&n| n < 2) {
                return Err(CliError::Config(format!("star size must be at least 2, got {n}")));
            }
        }
        if let Some(s) = &self.scalefree_table {
            require_nonempty("scalefree_table.exponents", &s.exponents)?;
            require_nonempty("scalefree_table.epsilons", &s.epsilons)?;
            for &e in &s.epsilons {
                check_epsilon(e)?;
            }
            if s.replicates == 0 {
                return Err(CliError::Config("scalefree_table.replicates must be positive".into()));
            }
        }
        if let Some(s) = &self.tft_sweep {
            require_nonempty("tft_sweep.deltas", &s.deltas)?;
            for &d in &s.deltas {
                check_delta("tft_sweep.deltas", d)?;
            }
        }
        if let Some(s) = &self.growth_sweep {
            require_nonempty("growth_sweep.rho_grid", &s.rho_grid)?;
            if let Some(r) = s.rho_grid.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
                return Err(CliError::Config(format!("refresh rates must lie in (0, 1], got {r}")));
            }
            if s.seeds == 0 {
                return Err(CliError::Config("growth_sweep.seeds must be positive".into()));
            }
            s.network.validate()?;
        }
        Ok(())
    }

    pub fn delta(&self) -> CliResult<f64> {
        self.delta.ok_or_else(|| CliError::Config("missing field `delta`".into()))
    }

    pub fn topology(&self) -> CliResult<Topology> {
        self.topology
            .as_ref()
            .ok_or_else(|| CliError::Config("missing field `topology`".into()))?
            .build(self.seed, &self.base_dir)
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing section `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ScenarioConfig::parse(r#"{"topology": {"kind": "ring", "n": 4}, "delta": 1.0}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.utility, UtilitySpec::Uniform { r2: 4.0 });
        assert_eq!(c.dcrs, DcrsParams::default());
        assert_eq!(c.protocol, ProtocolKind::Minimal);
        assert_eq!(c.horizon, 10_000);
        assert_eq!(c.topology().unwrap(), Topology::ring(4));
    }

    #[test]
    fn partial_dcrs_block_keeps_other_defaults() {
        let c = ScenarioConfig::parse(r#"{"dcrs": {"step": 0.05}}"#).unwrap();
        assert_eq!(c.dcrs.step, 0.05);
        assert_eq!(c.dcrs.max_iter, 100_000);
    }

    #[test]
    fn behaviors_accept_one_or_many() {
        let c = ScenarioConfig::parse(r#"{"behavior": {"kind": "always_zero"}}"#).unwrap();
        assert_eq!(c.behavior.expand(2), vec![Behavior::AlwaysZero; 2]);
        let c = ScenarioConfig::parse(
            r#"{"behavior": [{"kind": "compliant"}, {"kind": "scripted", "periods": [3]}]}"#,
        )
        .unwrap();
        assert_eq!(
            c.behavior.expand(2),
            vec![Behavior::Compliant, Behavior::Scripted { periods: vec![3] }]
        );
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            r#"{"delta": 0.0}"#,
            r#"{"delta": 1.5}"#,
            r#"{"epsilon": 1.0}"#,
            r#"{"utility": {"r2": -1.0}}"#,
            r#"{"star_sweep": {"sizes": []}}"#,
            r#"{"growth_sweep": {"initial_agents": 5, "initial_link_prob": 0.2, "join_prob": 0.1,
                "link_prob": 0.2, "horizon": 10, "rho_grid": [0.0], "seeds": 1}}"#,
            r#"{"topology": {"kind": "edge_list", "path": "no/such/file"}}"#,
        ] {
            let c = ScenarioConfig::parse(text).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ScenarioConfig::parse(r#"{"dleta": 1.0}"#).is_err());
    }

    #[test]
    fn missing_sections_are_reported() {
        let c = ScenarioConfig::parse("{}").unwrap();
        assert!(c.delta().is_err());
        assert!(c.topology().is_err());
        assert!(c.section(&c.star_sweep, "star_sweep").is_err());
    }
}
