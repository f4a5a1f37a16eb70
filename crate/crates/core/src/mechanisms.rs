//! The mechanism catalog, grid builders, threshold bids and willingness-to-pay.

use crate::error::{Error, Result};
use crate::model::{
    alloc_key, tie_rank, uniform_grid, Action, Alloc, GridMechanism, Mechanism, Outcome, OutcomeSpace, TOL,
};
use crate::smoothness::{Density, Deviation, Probe};
use crate::valuations::Valuation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingleItemFormat {
    FirstPrice,
    AllPay,
    SecondPrice,
    Hybrid { gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentStyle {
    PayYourBid,
    Threshold,
}

/// Index of the winning player among positive scores, ties by `rank`.
fn best_of(scores: impl Iterator<Item = (usize, f64)>, rank: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores {
        if s <= 0.0 {
            continue;
        }
        best = match best {
            None => Some((k, s)),
            Some((bk, bs)) if s > bs || (s == bs && rank[k] < rank[bk]) => Some((k, s)),
            keep => keep,
        };
    }
    best.map(|(k, _)| k)
}

/// Player labels 0..count for every player, with explicit feasible tuples.
fn label_space(n: usize, count: usize, feasible: Vec<Vec<usize>>, bottom: Option<Vec<usize>>) -> OutcomeSpace {
    let labels = vec![(0..count).map(|k| vec![k as f64]).collect(); n];
    OutcomeSpace { labels, feasible, bottom }
}

fn others_scalars(actions: &[Action], i: usize, coord: usize) -> Vec<f64> {
    actions.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, a)| a[coord]).collect()
}

fn label_of(x: &Alloc) -> usize {
    x[0] as usize
}

// ---------------------------------------------------------------------------
// single item

#[derive(Clone, Debug)]
pub struct SingleItem {
    pub n: usize,
    pub format: SingleItemFormat,
}

impl SingleItem {
    pub fn new(n: usize, format: SingleItemFormat) -> Self {
        SingleItem { n, format }
    }

    pub fn validate(&self) -> Result<()> {
        if let SingleItemFormat::Hybrid { gamma } = self.format {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::Validation(format!("hybrid gamma {gamma} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Outcome of a single-item auction on raw bids.
pub fn single_item(format: SingleItemFormat, bids: &[f64]) -> Outcome {
    let actions: Vec<Action> = bids.iter().map(|b| vec![*b]).collect();
    SingleItem::new(bids.len(), format).outcome(&actions)
}

impl Mechanism for SingleItem {
    fn kind(&self) -> String {
        match self.format {
            SingleItemFormat::FirstPrice => "first_price".into(),
            SingleItemFormat::AllPay => "all_pay".into(),
            SingleItemFormat::SecondPrice => "second_price".into(),
            SingleItemFormat::Hybrid { gamma } => format!("hybrid({gamma})"),
        }
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        1
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let rank = tie_rank(self.n, favored);
        let bids: Vec<f64> = actions.iter().map(|a| a[0]).collect();
        let mut out = Outcome::empty(self.n, vec![0.0]);
        let winner = best_of(bids.iter().cloned().enumerate(), &rank);
        if let SingleItemFormat::AllPay = self.format {
            out.payments = bids.clone();
        }
        if let Some(w) = winner {
            out.alloc[w] = vec![1.0];
            let second = bids.iter().enumerate().filter(|(k, _)| *k != w).map(|(_, b)| *b).fold(0.0, f64::max);
            match self.format {
                SingleItemFormat::FirstPrice => out.payments[w] = bids[w],
                SingleItemFormat::AllPay => {}
                SingleItemFormat::SecondPrice => out.payments[w] = second,
                SingleItemFormat::Hybrid { gamma } => out.payments[w] = gamma * bids[w] + (1.0 - gamma) * second,
            }
        }
        out
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        let mut feasible = vec![vec![0; self.n]];
        for w in 0..self.n {
            let mut f = vec![0; self.n];
            f[w] = 1;
            feasible.push(f);
        }
        Ok(label_space(self.n, 2, feasible, Some(vec![0; self.n])))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        a_i[0]
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        others_scalars(actions, i, 0)
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let h = x.iter().position(|xi| xi[0] == 1.0);
        let v = h.map_or(0.0, |h| profile[h].value(&[1.0]));
        if h != Some(i) || v <= 0.0 {
            return Ok(Deviation::scalar(Density::Point { at: 0.0 }));
        }
        let density = match self.format {
            SingleItemFormat::FirstPrice => Density::reciprocal(v, 1.0),
            SingleItemFormat::AllPay => Density::uniform(0.0, v),
            SingleItemFormat::SecondPrice => Density::Point { at: v },
            SingleItemFormat::Hybrid { gamma } => {
                if gamma >= 1.0 {
                    Density::reciprocal(v, 1.0)
                } else if gamma <= 0.0 {
                    Density::Point { at: v }
                } else {
                    Density::Mixture {
                        parts: vec![(gamma, Density::reciprocal(v, 1.0)), (1.0 - gamma, Density::Point { at: v })],
                    }
                }
            }
        };
        Ok(Deviation::scalar(density))
    }

    fn declaration(&self, _i: usize, a: &Action) -> Option<(Alloc, f64)> {
        (a[0] > 0.0).then(|| (vec![1.0], a[0]))
    }
}

// ---------------------------------------------------------------------------
// greedy combinatorial

/// r(θ, S) = θ / |S|^p
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ranking {
    Value,
    PerItem,
    SqrtItems,
    Power { p: f64 },
}

impl Ranking {
    pub fn exponent(&self) -> f64 {
        match *self {
            Ranking::Value => 0.0,
            Ranking::PerItem => 1.0,
            Ranking::SqrtItems => 0.5,
            Ranking::Power { p } => p,
        }
    }

    pub fn score(&self, theta: f64, size: u32) -> f64 {
        let p = self.exponent();
        if p == 0.0 {
            theta
        } else {
            theta / (size as f64).powf(p)
        }
    }
}

/// Greedy direct auction over single-minded declarations `[mask, θ]`.
#[derive(Clone, Debug)]
pub struct GreedyCombinatorial {
    pub n: usize,
    pub items: usize,
    pub ranking: Ranking,
    pub payment: PaymentStyle,
    /// β of the reciprocal deviation family
    pub beta: f64,
}

impl GreedyCombinatorial {
    fn decl(&self, a: &Action) -> (usize, f64) {
        let mask = a[0] as usize;
        if mask == 0 || mask >= 1 << self.items || a[1] <= 0.0 {
            (0, 0.0)
        } else {
            (mask, a[1])
        }
    }

    /// Won masks per player.
    fn allocate(&self, actions: &[Action], rank: &[usize]) -> Vec<usize> {
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        for (k, a) in actions.iter().enumerate() {
            let (mask, theta) = self.decl(a);
            if mask != 0 {
                cands.push((k, mask, self.ranking.score(theta, mask.count_ones())));
            }
        }
        cands.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap().then(rank[x.0].cmp(&rank[y.0])));
        let mut taken = 0usize;
        let mut won = vec![0usize; self.n];
        for (k, mask, _) in cands {
            if mask & taken == 0 {
                taken |= mask;
                won[k] = mask;
            }
        }
        won
    }

    /// Infimum declaration that still wins the declared set for player k.
    fn threshold(&self, k: usize, actions: &[Action], rank: &[usize]) -> f64 {
        let (mask, _) = self.decl(&actions[k]);
        let size = mask.count_ones() as f64;
        let p = self.ranking.exponent();
        let mut cands = vec![0.0];
        for (j, a) in actions.iter().enumerate() {
            let (mj, tj) = self.decl(a);
            if j != k && mj != 0 {
                cands.push(tj * (size / mj.count_ones() as f64).powf(p));
            }
        }
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cands.dedup();
        let mut acts = actions.to_vec();
        let wins = |t: f64, acts: &mut Vec<Action>| {
            acts[k] = vec![mask as f64, t];
            self.allocate(acts, rank)[k] == mask
        };
        for w in 0..cands.len() {
            let probe = if w + 1 < cands.len() { 0.5 * (cands[w] + cands[w + 1]) } else { cands[w] + 1.0 };
            if wins(probe, &mut acts) {
                return cands[w];
            }
        }
        actions[k][1]
    }
}

impl Mechanism for GreedyCombinatorial {
    fn kind(&self) -> String {
        format!("greedy_combinatorial({:?},{:?})", self.ranking, self.payment)
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        2
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let rank = tie_rank(self.n, favored);
        let won = self.allocate(actions, &rank);
        let mut out = Outcome::empty(self.n, vec![0.0]);
        for k in 0..self.n {
            if won[k] != 0 {
                out.alloc[k] = vec![won[k] as f64];
                out.payments[k] = match self.payment {
                    PaymentStyle::PayYourBid => actions[k][1],
                    PaymentStyle::Threshold => self.threshold(k, actions, &rank),
                };
            }
        }
        out
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        let (n, m) = (self.n, self.items);
        let mut feasible = Vec::new();
        let total = (n + 1).pow(m as u32);
        for code in 0..total {
            let mut f = vec![0usize; n];
            let mut c = code;
            for item in 0..m {
                let owner = c % (n + 1);
                c /= n + 1;
                if owner < n {
                    f[owner] |= 1 << item;
                }
            }
            feasible.push(f);
        }
        Ok(label_space(n, 1 << m, feasible, Some(vec![0; n])))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        self.decl(a_i).1
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, probe: &Probe, actions: &[Action]) -> Vec<f64> {
        let mask = probe.template[0] as usize;
        let size = mask.count_ones().max(1) as f64;
        let p = self.ranking.exponent();
        let mut out = Vec::new();
        for (j, a) in actions.iter().enumerate() {
            let (mj, tj) = self.decl(a);
            if j != i && mj != 0 {
                out.push(tj * (size / mj.count_ones() as f64).powf(p));
            }
        }
        out
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let mask = label_of(&x[i]);
        let v = profile[i].value(&x[i]);
        if mask == 0 || v <= 0.0 {
            return Ok(Deviation::point(vec![0.0, 0.0]));
        }
        Ok(match self.payment {
            PaymentStyle::PayYourBid => Deviation::Scalar {
                density: Density::reciprocal(v, self.beta),
                probe: Probe { template: vec![mask as f64, 0.0], coords: vec![1] },
            },
            PaymentStyle::Threshold => Deviation::point(vec![mask as f64, v]),
        })
    }

    fn declaration(&self, _i: usize, a: &Action) -> Option<(Alloc, f64)> {
        let (mask, theta) = self.decl(a);
        (mask != 0).then(|| (vec![mask as f64], theta))
    }
}

/// Outcome of the greedy auction on explicit single-minded bids.
pub fn greedy_combinatorial(
    items: usize,
    bids: &[(usize, f64)],
    ranking: Ranking,
    payment: PaymentStyle,
) -> Outcome {
    let mech = GreedyCombinatorial { n: bids.len(), items, ranking, payment, beta: 1.0 };
    let actions: Vec<Action> = bids.iter().map(|(m, t)| vec![*m as f64, *t]).collect();
    mech.outcome(&actions)
}

/// Single-minded valuation over won-item masks.
pub fn single_minded(items: usize, set: usize, value: f64) -> Valuation {
    Valuation::Labels {
        values: (0..1usize << items).map(|m| if m & set == set && set != 0 { value } else { 0.0 }).collect(),
    }
}

// ---------------------------------------------------------------------------
// positions

fn partial_injections(n: usize, slots: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, n: usize, slots: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == n {
            out.push(cur.clone());
            return;
        }
        cur.push(slots);
        rec(k + 1, n, slots, used, cur, out);
        cur.pop();
        for s in 0..slots {
            if !used[s] {
                used[s] = true;
                cur.push(s);
                rec(k + 1, n, slots, used, cur, out);
                cur.pop();
                used[s] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, slots, &mut vec![false; slots], &mut Vec::new(), &mut out);
    out
}

/// Pay-per-impression position auction; slot labels 0.., bottom = `slots`.
#[derive(Clone, Debug)]
pub struct PositionAuction {
    pub n: usize,
    pub slots: usize,
    pub payment: PaymentStyle,
}

impl Mechanism for PositionAuction {
    fn kind(&self) -> String {
        format!("position_per_impression({:?})", self.payment)
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        1
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let rank = tie_rank(self.n, favored);
        let mut order: Vec<usize> = (0..self.n).filter(|&k| actions[k][0] > 0.0).collect();
        order.sort_by(|&a, &b| actions[b][0].partial_cmp(&actions[a][0]).unwrap().then(rank[a].cmp(&rank[b])));
        let mut out = Outcome::empty(self.n, vec![self.slots as f64]);
        for (pos, &k) in order.iter().enumerate().take(self.slots) {
            out.alloc[k] = vec![pos as f64];
            out.payments[k] = match self.payment {
                PaymentStyle::PayYourBid => actions[k][0],
                PaymentStyle::Threshold => order.get(pos + 1).map_or(0.0, |&nx| actions[nx][0]),
            };
        }
        out
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        Ok(label_space(self.n, self.slots + 1, partial_injections(self.n, self.slots), Some(vec![self.slots; self.n])))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        a_i[0]
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        others_scalars(actions, i, 0)
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let v = profile[i].value(&x[i]);
        if label_of(&x[i]) >= self.slots || v <= 0.0 {
            return Ok(Deviation::scalar(Density::Point { at: 0.0 }));
        }
        Ok(Deviation::scalar(Density::uniform(0.0, v)))
    }
}

pub fn position_per_impression(bids: &[f64], payment: PaymentStyle) -> Outcome {
    let actions: Vec<Action> = bids.iter().map(|b| vec![*b]).collect();
    PositionAuction { n: bids.len(), slots: bids.len(), payment }.outcome(&actions)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerClickDeviation {
    /// U[0, ṽ_{ij*}], monotone per-click values
    Uniform,
    /// reciprocal on [0, (1 − 1/e) ṽ_i], position-independent values
    Reciprocal,
}

/// Greedy pay-per-click position auction with click-through rates ctr[i][j].
#[derive(Clone, Debug)]
pub struct PerClickAuction {
    pub ctr: Vec<Vec<f64>>,
    pub payment: PaymentStyle,
    pub deviation: PerClickDeviation,
}

impl PerClickAuction {
    pub fn slots(&self) -> usize {
        self.ctr.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.slots();
        for row in &self.ctr {
            if row.len() != s || row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::Validation("ctr rows must share a length and lie in [0,1]".into()));
            }
            if row.windows(2).any(|w| w[1] > w[0] + 1e-12) {
                return Err(Error::Validation("ctr must be non-increasing in position".into()));
            }
        }
        Ok(())
    }

    /// Separable factors (α_j, γ_i) when ctr[i][j] = α_j γ_i within 1e−12.
    pub fn separable(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let alpha = self.ctr.iter().find(|r| r[0] > 0.0)?.clone();
        let gamma: Vec<f64> = self.ctr.iter().map(|r| r[0] / alpha[0]).collect();
        let ok = self
            .ctr
            .iter()
            .zip(&gamma)
            .all(|(r, g)| r.iter().zip(&alpha).all(|(a, al)| (a - al * g).abs() <= 1e-12));
        ok.then(|| (alpha.iter().map(|a| a / alpha[0]).collect(), gamma.iter().map(|g| g * alpha[0]).collect()))
    }

    /// Slot per player (`slots` if none).
    fn assign(&self, bids: &[f64], rank: &[usize]) -> Vec<usize> {
        let n = bids.len();
        let s = self.slots();
        let mut slot = vec![s; n];
        for j in 0..s {
            let pick = best_of((0..n).filter(|&k| slot[k] == s).map(|k| (k, self.ctr[k][j] * bids[k])), rank);
            match pick {
                Some(k) => slot[k] = j,
                None => break,
            }
        }
        slot
    }

    fn retaining_bid(&self, k: usize, bids: &[f64], rank: &[usize], j: usize) -> f64 {
        let n = bids.len();
        let mut cands = vec![0.0];
        for l in 0..n {
            if l == k {
                continue;
            }
            for s in 0..self.slots() {
                for t in 0..self.slots() {
                    if self.ctr[k][t] > 0.0 {
                        cands.push(self.ctr[l][s] * bids[l] / self.ctr[k][t]);
                    }
                }
            }
        }
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cands.dedup();
        let mut b = bids.to_vec();
        for w in 0..cands.len() {
            let probe = if w + 1 < cands.len() { 0.5 * (cands[w] + cands[w + 1]) } else { cands[w] + 1.0 };
            b[k] = probe;
            if self.assign(&b, rank)[k] <= j {
                return cands[w];
            }
        }
        bids[k]
    }
}

impl Mechanism for PerClickAuction {
    fn kind(&self) -> String {
        format!("position_per_click({:?})", self.payment)
    }

    fn n_players(&self) -> usize {
        self.ctr.len()
    }

    fn action_len(&self, _i: usize) -> usize {
        1
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let n = self.n_players();
        let rank = tie_rank(n, favored);
        let bids: Vec<f64> = actions.iter().map(|a| a[0]).collect();
        let slot = self.assign(&bids, &rank);
        let s = self.slots();
        let mut out = Outcome::empty(n, vec![s as f64]);
        for k in 0..n {
            if slot[k] < s {
                let j = slot[k];
                out.alloc[k] = vec![j as f64];
                out.payments[k] = match self.payment {
                    PaymentStyle::PayYourBid => self.ctr[k][j] * bids[k],
                    PaymentStyle::Threshold => self.ctr[k][j] * self.retaining_bid(k, &bids, &rank, j),
                };
            }
        }
        out
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        let (n, s) = (self.n_players(), self.slots());
        Ok(label_space(n, s + 1, partial_injections(n, s), Some(vec![s; n])))
    }

    fn max_payment(&self, i: usize, a_i: &Action) -> f64 {
        self.ctr[i].iter().cloned().fold(0.0, f64::max) * a_i[0]
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        let mut out = Vec::new();
        for (l, a) in actions.iter().enumerate() {
            if l == i {
                continue;
            }
            for s in 0..self.slots() {
                for t in 0..self.slots() {
                    if self.ctr[i][t] > 0.0 {
                        out.push(self.ctr[l][s] * a[0] / self.ctr[i][t]);
                    }
                }
            }
        }
        out
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let j = label_of(&x[i]);
        let v = profile[i].value(&x[i]);
        if j >= self.slots() || v <= 0.0 || self.ctr[i][j] <= 0.0 {
            return Ok(Deviation::scalar(Density::Point { at: 0.0 }));
        }
        let per_click = v / self.ctr[i][j];
        Ok(Deviation::scalar(match self.deviation {
            PerClickDeviation::Uniform => Density::uniform(0.0, per_click),
            PerClickDeviation::Reciprocal => Density::reciprocal(per_click, 1.0),
        }))
    }
}

pub fn position_per_click(ctr: &[Vec<f64>], bids: &[f64], payment: PaymentStyle) -> Outcome {
    let mech = PerClickAuction { ctr: ctr.to_vec(), payment, deviation: PerClickDeviation::Uniform };
    let actions: Vec<Action> = bids.iter().map(|b| vec![*b]).collect();
    mech.outcome(&actions)
}

/// Position valuation v_ij = ctr[i][j] · per-click value, bottom slot worth 0.
pub fn per_click_valuation(ctr_row: &[f64], per_click: &[f64]) -> Valuation {
    let mut values: Vec<f64> = ctr_row.iter().zip(per_click).map(|(a, v)| a * v).collect();
    values.push(0.0);
    Valuation::Labels { values }
}

// ---------------------------------------------------------------------------
// public project

#[derive(Clone, Debug)]
pub struct PublicProject {
    pub n: usize,
    pub projects: usize,
}

impl Mechanism for PublicProject {
    fn kind(&self) -> String {
        "public_project".into()
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        self.projects
    }

    fn outcome_with(&self, actions: &[Action], _favored: Option<usize>) -> Outcome {
        let totals: Vec<f64> = (0..self.projects).map(|j| actions.iter().map(|a| a[j]).sum()).collect();
        let mut chosen = 0;
        for j in 1..self.projects {
            if totals[j] > totals[chosen] {
                chosen = j;
            }
        }
        Outcome {
            alloc: vec![vec![chosen as f64]; self.n],
            payments: actions.iter().map(|a| a[chosen]).collect(),
        }
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        let feasible = (0..self.projects).map(|j| vec![j; self.n]).collect();
        Ok(label_space(self.n, self.projects, feasible, None))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        a_i.iter().cloned().fold(0.0, f64::max)
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, probe: &Probe, actions: &[Action]) -> Vec<f64> {
        let star = probe.coords[0];
        let rest = |j: usize| -> f64 {
            actions.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, a)| a[j]).sum::<f64>()
        };
        let base = rest(star);
        (0..self.projects).filter(|&j| j != star).map(|j| rest(j) + probe.template[j] - base).collect()
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let star = label_of(&x[i]);
        let v = profile[i].value(&x[i]);
        let probe = Probe { template: vec![0.0; self.projects], coords: vec![star] };
        if v <= 0.0 {
            return Ok(Deviation::point(vec![0.0; self.projects]));
        }
        let n = self.n as f64;
        let density = Density::Reciprocal { pole: v, scale: 1.0 / n, hi: (1.0 - (-n).exp()) * v };
        Ok(Deviation::Scalar { density, probe })
    }
}

pub fn public_project(bids: &[Vec<f64>], n_projects: usize) -> Outcome {
    PublicProject { n: bids.len(), projects: n_projects }.outcome(bids)
}

// ---------------------------------------------------------------------------
// proportional bandwidth

/// Internal constant of the bandwidth deviation: μ' = (3 + √3)/2.
pub fn bandwidth_mu() -> f64 {
    (3.0 + 3f64.sqrt()) / 2.0
}

/// Bid scale of the bandwidth deviation: 1/(μ'(μ' − 1)).
pub fn bandwidth_scale() -> f64 {
    let m = bandwidth_mu();
    1.0 / (m * (m - 1.0))
}

#[derive(Clone, Debug)]
pub struct Bandwidth {
    pub n: usize,
    pub capacity: f64,
}

impl Mechanism for Bandwidth {
    fn kind(&self) -> String {
        "proportional_bandwidth".into()
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        1
    }

    fn outcome_with(&self, actions: &[Action], _favored: Option<usize>) -> Outcome {
        let total: f64 = actions.iter().map(|a| a[0]).sum();
        Outcome {
            alloc: actions
                .iter()
                .map(|a| vec![if total > 0.0 { a[0] * self.capacity / total } else { 0.0 }])
                .collect(),
            payments: actions.iter().map(|a| a[0]).collect(),
        }
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        Err(Error::Domain("bandwidth shares are continuous; use the grid's reachable space".into()))
    }

    /// Water-filling over the concave pieces.
    fn optimal_welfare(&self, profile: &[Valuation]) -> Result<(f64, Vec<Alloc>)> {
        let mut segs = Vec::new();
        for (i, v) in profile.iter().enumerate() {
            let Valuation::Concave { xs, ys } = v else {
                return Err(Error::Domain("bandwidth optimum needs concave piecewise-linear valuations".into()));
            };
            for k in 1..xs.len() {
                let len = xs[k] - xs[k - 1];
                segs.push(((ys[k] - ys[k - 1]) / len, len, i));
            }
        }
        segs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)));
        let mut left = self.capacity;
        let mut share = vec![0.0; self.n];
        for (slope, len, i) in segs {
            if left <= 0.0 || slope <= 0.0 {
                break;
            }
            let take = len.min(left);
            share[i] += take;
            left -= take;
        }
        let alloc: Vec<Alloc> = share.into_iter().map(|s| vec![s]).collect();
        let w = profile.iter().zip(&alloc).map(|(v, x)| v.value(x)).sum();
        Ok((w, alloc))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        a_i[0]
    }

    fn smooth_payoffs(&self) -> bool {
        true
    }

    fn breakpoints(&self, i: usize, v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        let s: f64 = others_scalars(actions, i, 0).iter().sum();
        let Valuation::Concave { xs, .. } = v else {
            return Vec::new();
        };
        xs.iter()
            .filter(|&&x| x > 0.0 && x < self.capacity && s > 0.0)
            .map(|&x| x * s / (self.capacity - x))
            .collect()
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let v = profile[i].value(&x[i]);
        Ok(Deviation::scalar(Density::uniform(0.0, bandwidth_scale() * v)))
    }
}

pub fn proportional_bandwidth(capacity: f64, bids: &[f64]) -> Outcome {
    let actions: Vec<Action> = bids.iter().map(|b| vec![*b]).collect();
    Bandwidth { n: bids.len(), capacity }.outcome(&actions)
}

// ---------------------------------------------------------------------------
// multi-unit

fn unit_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    loop {
        if cur.iter().sum::<usize>() <= k {
            out.push(cur.clone());
        }
        let mut p = n;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            if cur[p] < k {
                cur[p] += 1;
                break;
            }
            cur[p] = 0;
        }
    }
}

/// Greedy multi-unit auction over non-increasing marginal bid vectors.
#[derive(Clone, Debug)]
pub struct MultiUnit {
    pub n: usize,
    pub units: usize,
    pub payment: PaymentStyle,
}

impl MultiUnit {
    pub fn validate_bids(&self, bids: &[Action]) -> Result<()> {
        for (i, b) in bids.iter().enumerate() {
            if b.len() != self.units || b.windows(2).any(|w| w[1] > w[0] + TOL) || b.iter().any(|x| *x < 0.0) {
                return Err(Error::Validation(format!("marginal bids of player {i} must be {} non-increasing values", self.units)));
            }
        }
        Ok(())
    }
}

impl Mechanism for MultiUnit {
    fn kind(&self) -> String {
        format!("multi_unit_greedy({:?})", self.payment)
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        self.units
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let rank = tie_rank(self.n, favored);
        let mut got = vec![0usize; self.n];
        for _ in 0..self.units {
            let pick = best_of(
                (0..self.n).filter(|&k| got[k] < self.units).map(|k| (k, actions[k][got[k]])),
                &rank,
            );
            match pick {
                Some(k) => got[k] += 1,
                None => break,
            }
        }
        let price = (0..self.n)
            .filter(|&k| got[k] < self.units)
            .map(|k| actions[k][got[k]])
            .fold(0.0, f64::max);
        Outcome {
            alloc: got.iter().map(|&g| vec![g as f64]).collect(),
            payments: (0..self.n)
                .map(|k| match self.payment {
                    PaymentStyle::PayYourBid => actions[k][..got[k]].iter().sum(),
                    PaymentStyle::Threshold => got[k] as f64 * price,
                })
                .collect(),
        }
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        Ok(label_space(self.n, self.units + 1, unit_tuples(self.n, self.units), Some(vec![0; self.n])))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        match self.payment {
            PaymentStyle::PayYourBid => a_i.iter().sum(),
            PaymentStyle::Threshold => a_i.iter().enumerate().map(|(q, b)| (q + 1) as f64 * b).fold(0.0, f64::max),
        }
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        actions.iter().enumerate().filter(|(k, _)| *k != i).flat_map(|(_, a)| a.iter().cloned()).collect()
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let k = label_of(&x[i]);
        let v = profile[i].value(&x[i]);
        if k == 0 || v <= 0.0 {
            return Ok(Deviation::point(vec![0.0; self.units]));
        }
        Ok(Deviation::Scalar {
            density: Density::reciprocal(v / k as f64, 1.0),
            probe: Probe { template: vec![0.0; self.units], coords: (0..k).collect() },
        })
    }
}

pub fn multi_unit_greedy(units: usize, marginals: &[Vec<f64>], payment: PaymentStyle) -> Result<Outcome> {
    let mech = MultiUnit { n: marginals.len(), units, payment };
    mech.validate_bids(marginals)?;
    Ok(mech.outcome(marginals))
}

/// Uniform-price auction over declarations `[q, b]`.
#[derive(Clone, Debug)]
pub struct UniformPrice {
    pub n: usize,
    pub units: usize,
}

impl Mechanism for UniformPrice {
    fn kind(&self) -> String {
        "uniform_price".into()
    }

    fn n_players(&self) -> usize {
        self.n
    }

    fn action_len(&self, _i: usize) -> usize {
        2
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let rank = tie_rank(self.n, favored);
        let demand = |k: usize| (actions[k][0].max(0.0) as usize).min(self.units);
        let mut order: Vec<usize> = (0..self.n).filter(|&k| demand(k) > 0 && actions[k][1] > 0.0).collect();
        order.sort_by(|&a, &b| actions[b][1].partial_cmp(&actions[a][1]).unwrap().then(rank[a].cmp(&rank[b])));
        let mut left = self.units;
        let mut got = vec![0usize; self.n];
        let mut last: Option<usize> = None;
        for &k in &order {
            let take = demand(k).min(left);
            got[k] = take;
            left -= take;
            if take > 0 {
                last = Some(k);
            }
        }
        let price = match last {
            Some(l) if got[l] < demand(l) => actions[l][1],
            _ => order.iter().filter(|&&k| got[k] == 0).map(|&k| actions[k][1]).fold(0.0, f64::max),
        };
        Outcome {
            alloc: got.iter().map(|&g| vec![g as f64]).collect(),
            payments: got.iter().map(|&g| g as f64 * price).collect(),
        }
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        Ok(label_space(self.n, self.units + 1, unit_tuples(self.n, self.units), Some(vec![0; self.n])))
    }

    fn max_payment(&self, _i: usize, a_i: &Action) -> f64 {
        a_i[0] * a_i[1]
    }

    fn breakpoints(&self, i: usize, _v: &Valuation, _p: &Probe, actions: &[Action]) -> Vec<f64> {
        others_scalars(actions, i, 1)
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, _a_i: &Action) -> Result<Deviation> {
        let (_, x) = self.optimal_welfare(profile)?;
        let k = label_of(&x[i]);
        let v = profile[i].value(&x[i]);
        if k == 0 || v <= 0.0 {
            return Ok(Deviation::point(vec![0.0, 0.0]));
        }
        Ok(Deviation::Scalar {
            density: Density::reciprocal(v / k as f64, 1.0),
            probe: Probe { template: vec![k as f64, 0.0], coords: vec![1] },
        })
    }
}

pub fn uniform_price(units: usize, bids: &[(usize, f64)]) -> Outcome {
    let actions: Vec<Action> = bids.iter().map(|(q, b)| vec![*q as f64, *b]).collect();
    UniformPrice { n: bids.len(), units }.outcome(&actions)
}

// ---------------------------------------------------------------------------
// grids

pub fn scalar_grid(bids: &[f64]) -> Vec<Action> {
    bids.iter().map(|b| vec![*b]).collect()
}

/// All bid vectors over `bids` for each project.
pub fn project_grid(bids: &[f64], projects: usize) -> Vec<Action> {
    let g = bids.len();
    (0..g.pow(projects as u32))
        .map(|mut c| {
            let mut a = vec![0.0; projects];
            for slot in a.iter_mut().rev() {
                *slot = bids[c % g];
                c /= g;
            }
            a
        })
        .collect()
}

/// Non-increasing marginal vectors over `bids` (sorted ascending).
pub fn marginal_grid(bids: &[f64], units: usize) -> Vec<Action> {
    let mut out = Vec::new();
    fn rec(bids: &[f64], units: usize, hi: usize, cur: &mut Vec<f64>, out: &mut Vec<Action>) {
        if cur.len() == units {
            out.push(cur.clone());
            return;
        }
        for k in 0..=hi {
            cur.push(bids[k]);
            rec(bids, units, k, cur, out);
            cur.pop();
        }
    }
    rec(bids, units, bids.len() - 1, &mut Vec::new(), &mut out);
    out
}

/// Declarations (q, b) with q ≥ 1 and b > 0, plus the withdraw action.
pub fn quantity_grid(bids: &[f64], units: usize) -> Vec<Action> {
    let mut out = vec![vec![0.0, 0.0]];
    for q in 1..=units {
        for &b in bids.iter().filter(|b| **b > 0.0) {
            out.push(vec![q as f64, b]);
        }
    }
    out
}

/// Single-minded declarations over `sets`, plus the withdraw action.
pub fn declaration_grid(sets: &[usize], values: &[f64]) -> Vec<Action> {
    let mut out = vec![vec![0.0, 0.0]];
    for &s in sets {
        for &v in values.iter().filter(|v| **v > 0.0) {
            out.push(vec![s as f64, v]);
        }
    }
    out
}

pub fn default_bid_grid(profile: &[Valuation], points: usize) -> Vec<f64> {
    let cap = profile.iter().map(|v| v.max_value()).fold(0.0, f64::max);
    uniform_grid(cap, points)
}

// ---------------------------------------------------------------------------
// threshold bids and willingness-to-pay

/// Smallest grid declaration θ such that every grid declaration θ' ≥ θ for
/// `x_i` wins it against `others` (+∞ if none does).
pub fn threshold_bid(gm: &GridMechanism, i: usize, x_i: &Alloc, others: &[Action]) -> f64 {
    let mut decls: Vec<(f64, Action)> = gm.grids[i]
        .iter()
        .filter_map(|a| gm.mech.declaration(i, a).filter(|(x, _)| x == x_i).map(|(_, t)| (t, a.clone())))
        .collect();
    decls.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acts = others.to_vec();
    let mut tau = f64::INFINITY;
    for (t, a) in decls.iter().rev() {
        acts[i] = a.clone();
        if &gm.mech.outcome(&acts).alloc[i] == x_i {
            tau = *t;
        } else {
            break;
        }
    }
    tau
}

/// B_i(a_i, x_i): maximum payment over opponents' grid profiles that give
/// player i allocation x_i, including the limits of ties broken toward i.
pub fn willingness_to_pay(gm: &GridMechanism, i: usize, a_i: usize, x_i: &Alloc) -> f64 {
    let sizes = gm.sizes();
    let count: usize = sizes.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, s)| *s).product();
    let mut best = f64::NEG_INFINITY;
    for c in 0..count {
        let mut p = vec![0; gm.n()];
        let mut rest = c;
        for k in (0..gm.n()).rev() {
            if k == i {
                p[k] = a_i;
            } else {
                p[k] = rest % sizes[k];
                rest /= sizes[k];
            }
        }
        let acts = gm.actions(&p);
        for fav in [None, Some(i)] {
            let o = gm.mech.outcome_with(&acts, fav);
            if &o.alloc[i] == x_i {
                best = best.max(o.payments[i]);
            }
        }
    }
    best
}

/// B_i(a_i, X_i(a)) for every profile, laid out like a game table.
pub fn wtp_table(gm: &GridMechanism) -> Result<Vec<f64>> {
    let count = gm.check_cap(crate::model::TABLE_CAP)?;
    let n = gm.n();
    let rows: Vec<Vec<(Vec<u64>, f64, Vec<u64>, f64)>> = (0..count)
        .into_par_iter()
        .map(|p| {
            let acts = gm.actions(&gm.profile(p));
            let o = gm.mech.outcome(&acts);
            (0..n)
                .map(|i| {
                    let f = gm.mech.outcome_with(&acts, Some(i));
                    (alloc_key(&o.alloc[i]), o.payments[i], alloc_key(&f.alloc[i]), f.payments[i])
                })
                .collect()
        })
        .collect();
    let mut best: Vec<HashMap<(usize, Vec<u64>), f64>> = vec![HashMap::new(); n];
    for (p, row) in rows.iter().enumerate() {
        let prof = gm.profile(p);
        for (i, (k0, p0, k1, p1)) in row.iter().enumerate() {
            for (k, pay) in [(k0, p0), (k1, p1)] {
                let e = best[i].entry((prof[i], k.clone())).or_insert(f64::NEG_INFINITY);
                *e = e.max(*pay);
            }
        }
    }
    let mut out = vec![0.0; count * n];
    for (p, row) in rows.iter().enumerate() {
        let prof = gm.profile(p);
        for (i, (k0, _, _, _)) in row.iter().enumerate() {
            out[p * n + i] = best[i][&(prof[i], k0.clone())];
        }
    }
    Ok(out)
}
