use anyhow::{bail, Context, Result};
use serde::Deserialize;
use smoothmech::catalog::{Claim, MechanismSpec};
use smoothmech::composition::InfoPolicy;
use smoothmech::corpus::Generator;
use smoothmech::equilibrium::{Extremum, PlayerType, Refinement};
use smoothmech::valuations::Valuation;
use std::path::Path;

/// One experiment. Which fields are needed depends on the subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mechanism: Option<MechanismSpec>,
    #[serde(default)]
    pub composition: Option<CompositionSpec>,
    #[serde(default)]
    pub valuations: Option<ValuationSource>,
    /// per-player budgets; null is an unconstrained player
    #[serde(default)]
    pub budgets: Option<Vec<Option<f64>>>,
    /// overrides the mechanism's stated parameters
    #[serde(default)]
    pub targets: Option<Claim>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Bayesian types per player
    #[serde(default)]
    pub types: Option<Vec<Vec<PlayerType>>>,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionMode {
    Simultaneous,
    Sequential,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSpec {
    pub mode: CompositionMode,
    pub components: Vec<MechanismSpec>,
    /// sequential only; every policy is run when absent
    #[serde(default)]
    pub policy: Option<InfoPolicy>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValuationSource {
    Explicit {
        profiles: Vec<Vec<Valuation>>,
    },
    Generator {
        generator: Generator,
        seed: u64,
        count: usize,
        /// binary coordinates (mechanisms for unit demand, pieces for concave chains)
        #[serde(default = "one")]
        items: usize,
    },
    /// profiles drawn for the mechanism's own valuation domain
    Catalog {
        seed: u64,
        count: usize,
    },
    /// mixed small tables for the class audits
    Hierarchy {
        seed: u64,
        count: usize,
        budget: f64,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub sense: Extremum,
    pub refinement: Refinement,
    pub coarse: bool,
    pub rounds: usize,
    pub max_iters: usize,
    pub damping: f64,
    /// seed for learning and best-response runs
    pub seed: u64,
    pub regret_tolerance: f64,
    pub epsilon_tolerance: f64,
    /// allowed shortfall of the fitted λ
    pub fit_slack: f64,
    /// compose: also bound the min-CE welfare of every profile
    pub check_ce: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sense: Extremum::Min,
            refinement: Refinement::None,
            coarse: false,
            rounds: 200_000,
            max_iters: 2000,
            damping: 0.5,
            seed: 0,
            regret_tolerance: 0.02,
            epsilon_tolerance: 0.02,
            fit_slack: 0.1,
            check_ce: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub json: Option<String>,
    #[serde(default)]
    pub csv: Option<String>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    match serde_path_to_error::deserialize(de) {
        Ok(c) => Ok(c),
        Err(e) => {
            let at = e.path().to_string();
            bail!("schema violation at `{at}`: {}", e.into_inner())
        }
    }
}

impl ExperimentConfig {
    /// Budgets with nulls mapped to infinity.
    pub fn budget_profile(&self) -> Option<Vec<f64>> {
        self.budgets.as_ref().map(|b| b.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }

    /// The command-line seed replaces every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        match &mut self.valuations {
            Some(ValuationSource::Generator { seed: s, .. })
            | Some(ValuationSource::Catalog { seed: s, .. })
            | Some(ValuationSource::Hierarchy { seed: s, .. }) => *s = seed,
            _ => {}
        }
    }
}
