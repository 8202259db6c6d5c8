//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "n": 2,
//!   "p": 4.0,
//!   "epsilon": 0.1,
//!   "scaling": "standard",
//!   "domain": { "shape": "ball", "center": [0.0, 0.0], "radius": 1.0 },
//!   "T": 0.5,
//!   "payoff": { "kind": "from_reference", "id": "quadratic_time" },
//!   "grid": { "ratio": 8.0 },
//!   "seed": 42
//! }
//! ```
//!
//! Sections for the individual studies (`simulate`, `convergence`,
//! `compare`, `amvf`, `barrier`) are optional and only read by the
//! subcommand that needs them. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::dpp::{DirectionMode, GridConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::{FixedDirection, RandomDirection, Strategy};
use crate::model::{GameParams, PayoffField, Shape, SpaceTimeDomain, Table, TimeScaling};
use crate::reference::ReferenceSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    Constant { value: f64 },
    Linear { gradient: Vec<f64>, offset: f64 },
    FromReference { id: String, center: Option<Vec<f64>> },
    Tabulated { table: Table },
}

impl PayoffConfig {
    pub fn build(&self, params: &GameParams) -> Result<PayoffField> {
        Ok(match self {
            PayoffConfig::Constant { value } => PayoffField::Constant(*value),
            PayoffConfig::Linear { gradient, offset } => {
                if gradient.len() != params.n {
                    return Err(Error::Dimension { expected: params.n, found: gradient.len() });
                }
                PayoffField::Linear { gradient: gradient.clone(), offset: *offset }
            }
            PayoffConfig::FromReference { id, center } => {
                PayoffField::Reference(ReferenceSolution::from_id(id, params, center.clone())?)
            }
            PayoffConfig::Tabulated { table } => {
                table.validate()?;
                if table.shape.len() != params.n + 1 {
                    return Err(Error::Dimension { expected: params.n + 1, found: table.shape.len() });
                }
                PayoffField::Tabulated(table.clone())
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `eps / h`; at least 4.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub ball_units: Option<usize>,
    #[serde(default)]
    pub directions: DirectionMode,
    #[serde(default)]
    pub execution: Execution,
}

fn default_ratio() -> f64 {
    8.0
}

impl Default for GridSection {
    fn default() -> Self {
        Self { ratio: default_ratio(), ball_units: None, directions: DirectionMode::default(), execution: Execution::default() }
    }
}

impl GridSection {
    pub fn build(&self, params: &GameParams) -> GridConfig {
        GridConfig {
            h: params.epsilon / self.ratio,
            ball_units: self.ball_units,
            directions: self.directions.clone(),
            execution: self.execution,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    #[default]
    Greedy,
    Random,
    Fixed { direction: Vec<f64> },
}

impl StrategyConfig {
    /// Parses the command-line form: `greedy`, `random` or `fixed:1,0`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "greedy" => Ok(StrategyConfig::Greedy),
            "random" => Ok(StrategyConfig::Random),
            other => match other.strip_prefix("fixed:") {
                Some(list) => Ok(StrategyConfig::Fixed { direction: parse_list(list)? }),
                None => Err(Error::Config(format!("unknown strategy '{other}' (greedy, random or fixed:x,y,..)"))),
            },
        }
    }

    /// Builds a non-greedy strategy; greedy needs a solved grid and is
    /// constructed by the caller.
    pub fn build_simple(&self, n: usize) -> Result<Option<Box<dyn Strategy>>> {
        Ok(match self {
            StrategyConfig::Greedy => None,
            StrategyConfig::Random => Some(Box::new(RandomDirection { dim: n })),
            StrategyConfig::Fixed { direction } => {
                if direction.len() != n {
                    return Err(Error::Dimension { expected: n, found: direction.len() });
                }
                Some(Box::new(FixedDirection::new(direction.clone())?))
            }
        })
    }
}

/// Comma-separated list of numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("'{s}' is not a number"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub strategy: StrategyConfig,
    /// Starting point followed by the starting time.
    pub start: Option<Vec<f64>>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { samples: default_samples(), strategy: StrategyConfig::default(), start: None }
    }
}

fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub reference: String,
    pub center: Option<Vec<f64>>,
    pub epsilons: Vec<f64>,
    /// Each probe is a point followed by a time.
    pub probes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub probes: Vec<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Non-greedy strategy checked one-sidedly against the grid value.
    pub alternative: Option<StrategyConfig>,
    /// Solver error budget added to the greedy bound; `5 h^2` when absent.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmvfSection {
    /// Reference id, or `square` for `|x|^2`.
    pub function: String,
    pub epsilons: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub z: Vec<f64>,
    pub delta: f64,
    pub outer_radius: f64,
    /// Drift probes; defaults to `|x - z| = 1.5 delta` and `(delta + R)/2`.
    pub probes: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_barrier_samples")]
    pub samples: usize,
    #[serde(default = "default_identity_probes")]
    pub identity_probes: usize,
}

fn default_barrier_samples() -> usize {
    100_000
}

fn default_identity_probes() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub p: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub scaling: TimeScaling,
    pub domain: Shape,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub payoff: Option<PayoffConfig>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub seed: u64,
    pub simulate: Option<SimulateSection>,
    pub convergence: Option<ConvergenceSection>,
    pub compare: Option<CompareSection>,
    pub amvf: Option<AmvfSection>,
    pub barrier: Option<BarrierSection>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn game_params(&self) -> Result<GameParams> {
        GameParams::new(self.n, self.p, self.epsilon, self.scaling)
    }

    pub fn space_time(&self) -> Result<SpaceTimeDomain> {
        SpaceTimeDomain::new(self.domain.clone(), self.horizon)
    }

    pub fn payoff_field(&self, params: &GameParams) -> Result<PayoffField> {
        self.payoff
            .as_ref()
            .ok_or_else(|| Error::Config("config has no payoff".into()))?
            .build(params)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section.as_ref().ok_or_else(|| Error::Config(format!("config has no '{name}' section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "n": 2, "p": 4.0, "epsilon": 0.1,
        "domain": { "shape": "ball", "center": [0.0, 0.0], "radius": 1.0 },
        "T": 0.5,
        "payoff": { "kind": "from_reference", "id": "quadratic_time" },
        "seed": 42
    }"#;

    #[test]
    fn parses_the_documented_example() {
        let cfg = Config::from_json(BASE).unwrap();
        let params = cfg.game_params().unwrap();
        assert_eq!(params.time_scaling, TimeScaling::Standard);
        assert_eq!(cfg.grid.ratio, 8.0);
        assert!(matches!(cfg.payoff_field(&params).unwrap(), PayoffField::Reference(ReferenceSolution::QuadraticTime { .. })));
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_parameters() {
        let bad = BASE.replace("\"seed\"", "\"sede\"");
        assert!(matches!(Config::from_json(&bad), Err(Error::Config(_))));
        let p2 = BASE.replace("\"p\": 4.0", "\"p\": 2.0");
        let unit = BASE.replace("\"epsilon\": 0.1", "\"epsilon\": 0.1, \"scaling\": \"remark24\"");
        assert_eq!(Config::from_json(&unit).unwrap().game_params().unwrap().time_scaling, TimeScaling::UnitCoefficient);
        assert!(matches!(Config::from_json(&p2).unwrap().game_params(), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = Config::from_json(BASE).unwrap();
        let b = Config::from_json(&BASE.replace('\n', " ")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 43;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn strategy_flags() {
        assert_eq!(StrategyConfig::parse("greedy").unwrap(), StrategyConfig::Greedy);
        assert_eq!(StrategyConfig::parse("fixed:0,1").unwrap(), StrategyConfig::Fixed { direction: vec![0.0, 1.0] });
        assert!(StrategyConfig::parse("fixed:a").is_err());
        assert!(StrategyConfig::parse("tug").is_err());
    }
}
