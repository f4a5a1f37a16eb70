//! Outcomes, mechanisms as action-grid games, welfare.

use crate::error::{Error, Result};
use crate::smoothness::{generic_pieces, Deviation, Piece, Probe};
use crate::valuations::Valuation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub type Action = Vec<f64>;
/// Allocation label of one player; composed mechanisms concatenate
/// component labels.
pub type Alloc = Vec<f64>;

pub const TOL: f64 = 1e-9;
/// Default cap on the number of joint profiles in a game table.
pub const TABLE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub alloc: Vec<Alloc>,
    pub payments: Vec<f64>,
}

impl Outcome {
    pub fn empty(n: usize, bottom: Alloc) -> Self {
        Outcome { alloc: vec![bottom; n], payments: vec![0.0; n] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    /// per player, the ordered allocation labels
    pub labels: Vec<Vec<Alloc>>,
    /// feasible outcomes as label indices, one per player
    pub feasible: Vec<Vec<usize>>,
    pub bottom: Option<Vec<usize>>,
}

impl OutcomeSpace {
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        for f in &self.feasible {
            if f.len() != n || f.iter().zip(&self.labels).any(|(&k, l)| k >= l.len()) {
                return Err(Error::Validation(format!("feasible outcome {f:?} malformed")));
            }
        }
        if let Some(b) = &self.bottom {
            if !self.feasible.contains(b) {
                return Err(Error::Validation("all-bottom outcome must be feasible".into()));
            }
        }
        Ok(())
    }

    pub fn allocation(&self, idx: &[usize]) -> Vec<Alloc> {
        idx.iter().zip(&self.labels).map(|(&k, l)| l[k].clone()).collect()
    }
}

pub fn utility(v: &Valuation, outcome: &Outcome, i: usize) -> Result<f64> {
    let x = outcome.alloc.get(i).ok_or_else(|| Error::Domain(format!("no player {i}")))?;
    Ok(v.try_value(x)? - outcome.payments[i])
}

pub fn social_welfare(profile: &[Valuation], outcome: &Outcome) -> f64 {
    profile.iter().zip(&outcome.alloc).map(|(v, x)| v.value(x)).sum()
}

/// Exhaustive maximum over the feasible set, first maximizer kept.
pub fn optimal_welfare(profile: &[Valuation], space: &OutcomeSpace) -> Result<(f64, Vec<Alloc>)> {
    if space.feasible.is_empty() {
        return Err(Error::Domain("empty feasible set".into()));
    }
    let values: Vec<Vec<f64>> = profile
        .iter()
        .zip(&space.labels)
        .map(|(v, ls)| ls.iter().map(|x| v.value(x)).collect())
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, f) in space.feasible.iter().enumerate() {
        let w: f64 = f.iter().enumerate().map(|(i, &l)| values[i][l]).sum();
        if w > best + TOL {
            best = w;
            arg = k;
        }
    }
    Ok((best, space.allocation(&space.feasible[arg])))
}

/// A mechanism over continuous actions. Tie orders put `favored` first,
/// then the remaining players by index.
pub trait Mechanism: Send + Sync + fmt::Debug {
    fn kind(&self) -> String;
    fn n_players(&self) -> usize;
    fn action_len(&self, i: usize) -> usize;
    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome;

    fn outcome(&self, actions: &[Action]) -> Outcome {
        self.outcome_with(actions, None)
    }

    fn withdraw(&self, i: usize) -> Action {
        vec![0.0; self.action_len(i)]
    }

    fn outcome_space(&self) -> Result<OutcomeSpace>;

    fn optimal_welfare(&self, profile: &[Valuation]) -> Result<(f64, Vec<Alloc>)> {
        optimal_welfare(profile, &self.outcome_space()?)
    }

    /// Supremum of P_i over all opponent actions.
    fn max_payment(&self, i: usize, a_i: &Action) -> f64;

    /// Points where the deviator's outcome may change as the probe scalar moves.
    fn breakpoints(&self, _i: usize, _v_i: &Valuation, _probe: &Probe, _actions: &[Action]) -> Vec<f64> {
        Vec::new()
    }

    /// Payoff curves along a probe are smooth rather than piecewise linear.
    fn smooth_payoffs(&self) -> bool {
        false
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, a_i: &Action) -> Result<Deviation>;

    fn deviation_pieces(&self, i: usize, v_i: &Valuation, dev: &Deviation, actions: &[Action]) -> Result<Vec<Piece>> {
        generic_pieces(self, i, v_i, dev, actions)
    }

    /// The deviation returned by `paper_deviation` varies with a_i.
    fn deviation_uses_action(&self) -> bool {
        false
    }

    /// Largest payment any action in the deviation's support can incur.
    fn deviation_max_payment(&self, i: usize, dev: &Deviation) -> Result<(Action, f64)> {
        crate::smoothness::support_max_payment(self, i, dev)
    }

    /// Declared allocation and value of a direct-revelation action.
    fn declaration(&self, _i: usize, _a: &Action) -> Option<(Alloc, f64)> {
        None
    }

    fn is_sequential(&self) -> bool {
        false
    }
}

pub fn tie_order(n: usize, favored: Option<usize>) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    if let Some(f) = favored {
        order.push(f);
    }
    order.extend((0..n).filter(|&k| Some(k) != favored));
    order
}

/// Rank of each player in the tie order (lower wins ties).
pub fn tie_rank(n: usize, favored: Option<usize>) -> Vec<usize> {
    let mut rank = vec![0; n];
    for (r, k) in tie_order(n, favored).into_iter().enumerate() {
        rank[k] = r;
    }
    rank
}

pub fn uniform_grid(cap: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.0];
    }
    (0..points).map(|k| cap * k as f64 / (points - 1) as f64).collect()
}

#[derive(Clone)]
pub struct GridMechanism {
    pub mech: Arc<dyn Mechanism>,
    pub grids: Vec<Vec<Action>>,
    pub withdraw: Vec<usize>,
}

impl fmt::Debug for GridMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridMechanism")
            .field("mech", &self.mech.kind())
            .field("sizes", &self.sizes())
            .finish()
    }
}

impl GridMechanism {
    pub fn new(mech: Arc<dyn Mechanism>, grids: Vec<Vec<Action>>) -> Result<Self> {
        if grids.len() != mech.n_players() {
            return Err(Error::Validation("one grid per player required".into()));
        }
        let mut withdraw = Vec::new();
        for (i, g) in grids.iter().enumerate() {
            let w = mech.withdraw(i);
            let k = g
                .iter()
                .position(|a| a == &w)
                .ok_or_else(|| Error::Validation(format!("grid of player {i} lacks the withdraw action {w:?}")))?;
            if g.iter().any(|a| a.len() != mech.action_len(i)) {
                return Err(Error::Validation(format!("grid of player {i} has wrong action length")));
            }
            withdraw.push(k);
        }
        Ok(GridMechanism { mech, grids, withdraw })
    }

    /// Same scalar bid grid for every player.
    pub fn scalar(mech: Arc<dyn Mechanism>, bids: &[f64]) -> Result<Self> {
        let n = mech.n_players();
        let grid: Vec<Action> = bids.iter().map(|b| vec![*b]).collect();
        Self::new(mech, vec![grid; n])
    }

    pub fn n(&self) -> usize {
        self.grids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.grids.iter().map(|g| g.len()).collect()
    }

    pub fn n_profiles(&self) -> u128 {
        self.grids.iter().map(|g| g.len() as u128).product()
    }

    /// Lexicographic profile index, player 0 most significant.
    pub fn profile(&self, mut idx: usize) -> Vec<usize> {
        let n = self.n();
        let mut p = vec![0; n];
        for i in (0..n).rev() {
            let s = self.grids[i].len();
            p[i] = idx % s;
            idx /= s;
        }
        p
    }

    pub fn index(&self, p: &[usize]) -> usize {
        p.iter().zip(&self.grids).fold(0, |acc, (&k, g)| acc * g.len() + k)
    }

    pub fn actions(&self, p: &[usize]) -> Vec<Action> {
        p.iter().enumerate().map(|(i, &k)| self.grids[i][k].clone()).collect()
    }

    pub fn outcome_at(&self, p: &[usize]) -> Outcome {
        self.mech.outcome(&self.actions(p))
    }

    pub fn check_cap(&self, cap: usize) -> Result<usize> {
        let count = self.n_profiles();
        if count > cap as u128 {
            return Err(Error::Size {
                what: format!("joint profile grid {:?}", self.sizes()),
                count,
                cap: cap as u128,
            });
        }
        Ok(count as usize)
    }

    /// Outcome space of allocations reachable on the grid.
    pub fn reachable_space(&self) -> Result<OutcomeSpace> {
        let count = self.check_cap(TABLE_CAP)?;
        let n = self.n();
        let mut labels: Vec<Vec<Alloc>> = vec![Vec::new(); n];
        let mut index: Vec<HashMap<Vec<u64>, usize>> = vec![HashMap::new(); n];
        let mut feasible = Vec::new();
        let mut seen = HashMap::new();
        for p in 0..count {
            let o = self.outcome_at(&self.profile(p));
            let f: Vec<usize> = o
                .alloc
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let key = alloc_key(x);
                    *index[i].entry(key).or_insert_with(|| {
                        labels[i].push(x.clone());
                        labels[i].len() - 1
                    })
                })
                .collect();
            if seen.insert(f.clone(), ()).is_none() {
                feasible.push(f);
            }
        }
        Ok(OutcomeSpace { labels, feasible, bottom: None })
    }
}

pub fn alloc_key(x: &Alloc) -> Vec<u64> {
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Dense normal form of the induced full-information game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTable {
    pub sizes: Vec<usize>,
    /// values[p * n + i] = v_i(X_i(a_p))
    pub values: Vec<f64>,
    /// payments[p * n + i] = P_i(a_p)
    pub payments: Vec<f64>,
    /// willingness-to-pay B_i(a_i, X_i(a_p)), filled on request
    pub wtp: Option<Vec<f64>>,
}

impl GameTable {
    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_profiles(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn utility(&self, p: usize, i: usize) -> f64 {
        let n = self.n();
        self.values[p * n + i] - self.payments[p * n + i]
    }

    pub fn welfare(&self, p: usize) -> f64 {
        let n = self.n();
        self.values[p * n..(p + 1) * n].iter().sum()
    }

    pub fn revenue(&self, p: usize) -> f64 {
        let n = self.n();
        self.payments[p * n..(p + 1) * n].iter().sum()
    }

    /// Stride of player i's coordinate in the flat profile index.
    pub fn stride(&self, i: usize) -> usize {
        self.sizes[i + 1..].iter().product()
    }

    pub fn coord(&self, p: usize, i: usize) -> usize {
        (p / self.stride(i)) % self.sizes[i]
    }

    /// Profile index with player i's action replaced.
    pub fn swap(&self, p: usize, i: usize, a: usize) -> usize {
        let s = self.stride(i);
        let cur = (p / s) % self.sizes[i];
        p - cur * s + a * s
    }
}

pub fn to_normal_form(gm: &GridMechanism, profile: &[Valuation]) -> Result<GameTable> {
    to_normal_form_capped(gm, profile, TABLE_CAP)
}

pub fn to_normal_form_capped(gm: &GridMechanism, profile: &[Valuation], cap: usize) -> Result<GameTable> {
    let count = gm.check_cap(cap)?;
    let n = gm.n();
    if profile.len() != n {
        return Err(Error::Validation("profile length differs from player count".into()));
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..count)
        .into_par_iter()
        .map(|p| {
            let o = gm.outcome_at(&gm.profile(p));
            let vals = profile.iter().zip(&o.alloc).map(|(v, x)| v.value(x)).collect();
            (vals, o.payments)
        })
        .collect();
    let mut values = Vec::with_capacity(count * n);
    let mut payments = Vec::with_capacity(count * n);
    for (v, p) in rows {
        values.extend(v);
        payments.extend(p);
    }
    Ok(GameTable { sizes: gm.sizes(), values, payments, wtp: None })
}
