//! Serializable mechanism specifications, their grid games, and the
//! smoothness parameters claimed for each.

use crate::error::{Error, Result};
use crate::mechanisms::*;
use crate::model::{uniform_grid, Action, GridMechanism, Mechanism};
use crate::smoothness::E_INV;
use crate::valuations::Valuation;
use crate::corpus;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `points` evenly spaced bids on [0, max].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn bids(&self) -> Vec<f64> {
        uniform_grid(self.max, self.points)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { max: 1.0, points: 11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    FirstPrice { n: usize, #[serde(default)] grid: GridSpec },
    AllPay { n: usize, #[serde(default)] grid: GridSpec },
    SecondPrice { n: usize, #[serde(default)] grid: GridSpec },
    Hybrid { n: usize, gamma: f64, #[serde(default)] grid: GridSpec },
    Greedy {
        n: usize,
        items: usize,
        ranking: Ranking,
        payment: PaymentStyle,
        beta: f64,
        /// declarable item masks per player
        sets: Vec<Vec<usize>>,
        /// the c of the c-approximate allocation rule
        approx: f64,
        #[serde(default)]
        grid: GridSpec,
    },
    PositionImpression { n: usize, slots: usize, payment: PaymentStyle, #[serde(default)] grid: GridSpec },
    PerClick { ctr: Vec<Vec<f64>>, payment: PaymentStyle, deviation: PerClickDeviation, #[serde(default)] grid: GridSpec },
    PublicProject { n: usize, projects: usize, #[serde(default)] grid: GridSpec },
    Bandwidth { n: usize, capacity: f64, #[serde(default)] grid: GridSpec },
    MultiUnit { n: usize, units: usize, payment: PaymentStyle, #[serde(default)] grid: GridSpec },
    UniformPrice { n: usize, units: usize, #[serde(default)] grid: GridSpec },
}

/// Smoothness parameters stated for a mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Claim {
    Smooth { lambda: f64, mu: f64 },
    Weak { lambda: f64, mu1: f64, mu2: f64 },
}

impl Claim {
    pub fn bound(&self) -> f64 {
        match *self {
            Claim::Smooth { lambda, mu } => crate::smoothness::poa_bound(lambda, mu),
            Claim::Weak { lambda, mu1, mu2 } => crate::smoothness::weak_poa_bound(lambda, mu1, mu2),
        }
    }
}

pub fn hybrid_claim(gamma: f64) -> Claim {
    let g1 = (1.0 - gamma) * (1.0 - gamma);
    Claim::Weak { lambda: gamma * (1.0 - E_INV) + g1, mu1: 1.0, mu2: g1 }
}

impl MechanismSpec {
    pub fn n(&self) -> usize {
        match self {
            MechanismSpec::PerClick { ctr, .. } => ctr.len(),
            MechanismSpec::FirstPrice { n, .. }
            | MechanismSpec::AllPay { n, .. }
            | MechanismSpec::SecondPrice { n, .. }
            | MechanismSpec::Hybrid { n, .. }
            | MechanismSpec::Greedy { n, .. }
            | MechanismSpec::PositionImpression { n, .. }
            | MechanismSpec::PublicProject { n, .. }
            | MechanismSpec::Bandwidth { n, .. }
            | MechanismSpec::MultiUnit { n, .. }
            | MechanismSpec::UniformPrice { n, .. } => *n,
        }
    }

    pub fn mechanism(&self) -> Result<Arc<dyn Mechanism>> {
        let single = |n: usize, format| -> Result<Arc<dyn Mechanism>> {
            let m = SingleItem::new(n, format);
            m.validate()?;
            Ok(Arc::new(m))
        };
        Ok(match self.clone() {
            MechanismSpec::FirstPrice { n, .. } => single(n, SingleItemFormat::FirstPrice)?,
            MechanismSpec::AllPay { n, .. } => single(n, SingleItemFormat::AllPay)?,
            MechanismSpec::SecondPrice { n, .. } => single(n, SingleItemFormat::SecondPrice)?,
            MechanismSpec::Hybrid { n, gamma, .. } => single(n, SingleItemFormat::Hybrid { gamma })?,
            MechanismSpec::Greedy { n, items, ranking, payment, beta, .. } => {
                if beta <= 0.0 {
                    return Err(Error::Validation("greedy β must be positive".into()));
                }
                Arc::new(GreedyCombinatorial { n, items, ranking, payment, beta })
            }
            MechanismSpec::PositionImpression { n, slots, payment, .. } => Arc::new(PositionAuction { n, slots, payment }),
            MechanismSpec::PerClick { ctr, payment, deviation, .. } => {
                let m = PerClickAuction { ctr, payment, deviation };
                m.validate()?;
                Arc::new(m)
            }
            MechanismSpec::PublicProject { n, projects, .. } => Arc::new(PublicProject { n, projects }),
            MechanismSpec::Bandwidth { n, capacity, .. } => Arc::new(Bandwidth { n, capacity }),
            MechanismSpec::MultiUnit { n, units, payment, .. } => Arc::new(MultiUnit { n, units, payment }),
            MechanismSpec::UniformPrice { n, units, .. } => Arc::new(UniformPrice { n, units }),
        })
    }

    pub fn grids(&self) -> Result<Vec<Vec<Action>>> {
        let n = self.n();
        Ok(match self {
            MechanismSpec::Greedy { sets, grid, .. } => {
                if sets.len() != n {
                    return Err(Error::Validation("one list of declarable sets per player".into()));
                }
                sets.iter().map(|s| declaration_grid(s, &grid.bids())).collect()
            }
            MechanismSpec::PublicProject { projects, grid, .. } => vec![project_grid(&grid.bids(), *projects); n],
            MechanismSpec::MultiUnit { units, grid, .. } => vec![marginal_grid(&grid.bids(), *units); n],
            MechanismSpec::UniformPrice { units, grid, .. } => vec![quantity_grid(&grid.bids(), *units); n],
            MechanismSpec::FirstPrice { grid, .. }
            | MechanismSpec::AllPay { grid, .. }
            | MechanismSpec::SecondPrice { grid, .. }
            | MechanismSpec::Hybrid { grid, .. }
            | MechanismSpec::PositionImpression { grid, .. }
            | MechanismSpec::PerClick { grid, .. }
            | MechanismSpec::Bandwidth { grid, .. } => vec![scalar_grid(&grid.bids()); n],
        })
    }

    pub fn build(&self) -> Result<GridMechanism> {
        GridMechanism::new(self.mechanism()?, self.grids()?)
    }

    /// The parameters stated for this mechanism.
    pub fn claim(&self) -> Claim {
        let fp = 1.0 - E_INV;
        match *self {
            MechanismSpec::FirstPrice { .. } => Claim::Smooth { lambda: fp, mu: 1.0 },
            MechanismSpec::AllPay { .. } => Claim::Smooth { lambda: 0.5, mu: 1.0 },
            MechanismSpec::SecondPrice { .. } => Claim::Weak { lambda: 1.0, mu1: 0.0, mu2: 1.0 },
            MechanismSpec::Hybrid { gamma, .. } => hybrid_claim(gamma),
            MechanismSpec::Greedy { payment: PaymentStyle::PayYourBid, beta, approx, .. } => {
                Claim::Smooth { lambda: beta * (1.0 - (-1.0 / beta).exp()), mu: beta * approx }
            }
            MechanismSpec::Greedy { payment: PaymentStyle::Threshold, approx, .. } => {
                Claim::Weak { lambda: 1.0, mu1: 0.0, mu2: approx }
            }
            MechanismSpec::PositionImpression { payment: PaymentStyle::PayYourBid, .. } => {
                Claim::Smooth { lambda: 0.5, mu: 1.0 }
            }
            MechanismSpec::PositionImpression { payment: PaymentStyle::Threshold, .. } => {
                Claim::Weak { lambda: 0.5, mu1: 0.0, mu2: 1.0 }
            }
            MechanismSpec::PerClick { payment: PaymentStyle::PayYourBid, deviation: PerClickDeviation::Uniform, .. } => {
                Claim::Smooth { lambda: 0.5, mu: 1.0 }
            }
            MechanismSpec::PerClick { payment: PaymentStyle::PayYourBid, deviation: PerClickDeviation::Reciprocal, .. } => {
                Claim::Smooth { lambda: fp, mu: 1.0 }
            }
            MechanismSpec::PerClick { payment: PaymentStyle::Threshold, deviation: PerClickDeviation::Reciprocal, .. } => {
                Claim::Weak { lambda: fp, mu1: 0.0, mu2: 1.0 }
            }
            MechanismSpec::PerClick { payment: PaymentStyle::Threshold, deviation: PerClickDeviation::Uniform, .. } => {
                Claim::Weak { lambda: 0.5, mu1: 0.0, mu2: 1.0 }
            }
            MechanismSpec::PublicProject { n, .. } => {
                Claim::Smooth { lambda: (1.0 - (-(n as f64)).exp()) / n as f64, mu: 1.0 }
            }
            MechanismSpec::Bandwidth { .. } => Claim::Smooth { lambda: 2.0 - 3f64.sqrt(), mu: 1.0 },
            MechanismSpec::MultiUnit { payment: PaymentStyle::PayYourBid, .. } => Claim::Smooth { lambda: 0.5 * fp, mu: 1.0 },
            MechanismSpec::MultiUnit { payment: PaymentStyle::Threshold, .. } => {
                Claim::Weak { lambda: 0.5 * fp, mu1: 0.0, mu2: 1.0 }
            }
            MechanismSpec::UniformPrice { .. } => Claim::Weak { lambda: 0.5 * fp, mu1: 0.0, mu2: 1.0 },
        }
    }
}

/// Random valuation profiles in the domain the mechanism's claim covers:
/// single-minded bidders for greedy auctions, position values decreasing in
/// the slot, concave unit and bandwidth valuations.
pub fn random_profiles(spec: &MechanismSpec, seed: u64, count: usize) -> Vec<Vec<Valuation>> {
    let mut r = corpus::rng(seed);
    let n = spec.n();
    let decreasing = |r: &mut rand_chacha::ChaCha8Rng, k: usize| {
        let mut v: Vec<f64> = (0..k).map(|_| corpus::draw(r, 0.0, 1.0)).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    };
    (0..count)
        .map(|_| {
            (0..n)
                .map(|i| match spec {
                    MechanismSpec::FirstPrice { .. }
                    | MechanismSpec::AllPay { .. }
                    | MechanismSpec::SecondPrice { .. }
                    | MechanismSpec::Hybrid { .. } => Valuation::item(corpus::draw(&mut r, 0.0, 1.0)),
                    MechanismSpec::Greedy { items, sets, .. } => {
                        let s = sets[i][r.gen_range(0..sets[i].len())];
                        single_minded(*items, s, corpus::draw(&mut r, 0.05, 1.0))
                    }
                    MechanismSpec::PositionImpression { slots, .. } => {
                        let mut values = decreasing(&mut r, *slots);
                        values.push(0.0);
                        Valuation::Labels { values }
                    }
                    MechanismSpec::PerClick { ctr, deviation, .. } => {
                        let per_click = match deviation {
                            PerClickDeviation::Uniform => decreasing(&mut r, ctr[i].len()),
                            PerClickDeviation::Reciprocal => vec![corpus::draw(&mut r, 0.0, 1.0); ctr[i].len()],
                        };
                        per_click_valuation(&ctr[i], &per_click)
                    }
                    MechanismSpec::PublicProject { projects, .. } => {
                        Valuation::Labels { values: (0..*projects).map(|_| corpus::draw(&mut r, 0.0, 1.0)).collect() }
                    }
                    MechanismSpec::Bandwidth { capacity, .. } => corpus::concave_chain(&mut r, *capacity, 3),
                    MechanismSpec::MultiUnit { units, .. } | MechanismSpec::UniformPrice { units, .. } => {
                        let m = decreasing(&mut r, *units);
                        let mut values = vec![0.0];
                        for x in m {
                            values.push(values.last().unwrap() + x);
                        }
                        Valuation::Labels { values }
                    }
                })
                .collect()
        })
        .collect()
}
