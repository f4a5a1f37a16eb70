//! Simultaneous and sequential composition of grid mechanisms.

use crate::error::{Error, Result};
use crate::model::{alloc_key, Action, Alloc, GridMechanism, Mechanism, Outcome, OutcomeSpace};
use crate::smoothness::{generic_pieces, support_max_payment, Deviation, Piece};
use crate::valuations::{cap_xos, Space, Valuation};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Default cap on plans per player and on joint composed grids.
pub const PLAN_CAP: u128 = 100_000;

fn product_space(spaces: &[OutcomeSpace]) -> Result<OutcomeSpace> {
    let n = spaces[0].labels.len();
    let mut labels: Vec<Vec<Alloc>> = vec![vec![Vec::new()]; n];
    let mut feasible: Vec<Vec<usize>> = vec![vec![0; n]];
    for sp in spaces {
        if sp.labels.len() != n {
            return Err(Error::Validation("components disagree on the player count".into()));
        }
        for i in 0..n {
            labels[i] = labels[i]
                .iter()
                .flat_map(|pre| {
                    sp.labels[i].iter().map(move |x| {
                        let mut y = pre.clone();
                        y.extend(x.iter().cloned());
                        y
                    })
                })
                .collect();
        }
        let sizes: Vec<usize> = sp.labels.iter().map(|l| l.len()).collect();
        feasible = feasible
            .iter()
            .flat_map(|pre| {
                let sizes = &sizes;
                sp.feasible.iter().map(move |f| (0..n).map(|i| pre[i] * sizes[i] + f[i]).collect::<Vec<_>>())
            })
            .collect();
    }
    let bottom = spaces
        .iter()
        .map(|s| s.bottom.clone())
        .collect::<Option<Vec<_>>>()
        .map(|bs| {
            (0..n)
                .map(|i| bs.iter().zip(spaces).fold(0, |acc, (b, sp)| acc * sp.labels[i].len() + b[i]))
                .collect()
        });
    Ok(OutcomeSpace { labels, feasible, bottom })
}

fn zero_valuation(labels: usize) -> Valuation {
    Valuation::Labels { values: vec![0.0; labels] }
}

fn label_counts(spaces: &[OutcomeSpace], i: usize) -> Vec<usize> {
    spaces.iter().map(|s| s.labels[i].len()).collect()
}

/// Per-component valuations of the additive representative of v at x.
pub fn representative(v: &Valuation, x: &Alloc, counts: &[usize]) -> Result<Vec<Valuation>> {
    let labels = |x: &Alloc| -> Vec<usize> { x.iter().map(|l| *l as usize).collect() };
    let from_rep = |rep: &crate::valuations::XosRepresentation| -> Result<Vec<Valuation>> {
        let k = rep.argmax(&labels(x)).ok_or_else(|| Error::Domain("empty XOS representation".into()))?;
        Ok(rep.components[k].values.iter().map(|vals| Valuation::Labels { values: vals.clone() }).collect())
    };
    match v {
        Valuation::Xos { rep } => from_rep(rep),
        Valuation::Capped { inner, budget } => match inner.as_ref() {
            Valuation::Xos { rep } => {
                let sizes: Vec<usize> = rep.components[0].values.iter().map(|c| c.len()).collect();
                from_rep(&cap_xos(rep, &Space::numbered(&sizes), *budget)?)
            }
            _ => Err(Error::Domain("capped valuations compose only over an XOS inner valuation".into())),
        },
        Valuation::UnitDemand { parts } => {
            let mut best = 0;
            for j in 1..parts.len() {
                if parts[j].value(&x[j..j + 1]) > parts[best].value(&x[best..best + 1]) {
                    best = j;
                }
            }
            Ok((0..parts.len()).map(|j| if j == best { parts[j].clone() } else { zero_valuation(counts[j]) }).collect())
        }
        _ if counts.len() == 1 => Ok(vec![v.clone()]),
        _ => Err(Error::Domain("composition needs XOS or unit-demand valuations".into())),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Simultaneous {
    pub components: Vec<Arc<dyn Mechanism>>,
}

impl Simultaneous {
    pub fn new(components: Vec<Arc<dyn Mechanism>>) -> Result<Self> {
        let n = components.first().ok_or_else(|| Error::Validation("no components".into()))?.n_players();
        if components.iter().any(|c| c.n_players() != n) {
            return Err(Error::Validation("components disagree on the player count".into()));
        }
        Ok(Simultaneous { components })
    }

    fn split<'a>(&self, i: usize, a: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(self.components.len());
        let mut at = 0;
        for c in &self.components {
            let l = c.action_len(i);
            out.push(&a[at..at + l]);
            at += l;
        }
        out
    }

    fn component_actions(&self, actions: &[Action]) -> Vec<Vec<Action>> {
        let parts: Vec<Vec<&[f64]>> = actions.iter().enumerate().map(|(i, a)| self.split(i, a)).collect();
        (0..self.components.len()).map(|j| parts.iter().map(|p| p[j].to_vec()).collect()).collect()
    }

    fn spaces(&self) -> Result<Vec<OutcomeSpace>> {
        self.components.iter().map(|c| c.outcome_space()).collect()
    }
}

impl Mechanism for Simultaneous {
    fn kind(&self) -> String {
        format!("simultaneous[{}]", self.components.iter().map(|c| c.kind()).collect::<Vec<_>>().join(","))
    }

    fn n_players(&self) -> usize {
        self.components[0].n_players()
    }

    fn action_len(&self, i: usize) -> usize {
        self.components.iter().map(|c| c.action_len(i)).sum()
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let n = self.n_players();
        let mut out = Outcome { alloc: vec![Vec::new(); n], payments: vec![0.0; n] };
        for (c, acts) in self.components.iter().zip(self.component_actions(actions)) {
            let o = c.outcome_with(&acts, favored);
            for i in 0..n {
                out.alloc[i].extend(o.alloc[i].iter().cloned());
                out.payments[i] += o.payments[i];
            }
        }
        out
    }

    fn withdraw(&self, i: usize) -> Action {
        self.components.iter().flat_map(|c| c.withdraw(i)).collect()
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        product_space(&self.spaces()?)
    }

    fn max_payment(&self, i: usize, a_i: &Action) -> f64 {
        self.components.iter().zip(self.split(i, a_i)).map(|(c, a)| c.max_payment(i, &a.to_vec())).sum()
    }

    fn paper_deviation(&self, profile: &[Valuation], i: usize, a_i: &Action) -> Result<Deviation> {
        let spaces = self.spaces()?;
        let (_, x) = self.optimal_welfare(profile)?;
        let reps: Vec<Vec<Valuation>> = (0..profile.len())
            .map(|k| representative(&profile[k], &x[k], &label_counts(&spaces, k)))
            .collect::<Result<_>>()?;
        let a_parts = self.split(i, a_i);
        let mut parts = Vec::new();
        for (j, c) in self.components.iter().enumerate() {
            let pj: Vec<Valuation> = reps.iter().map(|r| r[j].clone()).collect();
            parts.push(c.paper_deviation(&pj, i, &a_parts[j].to_vec())?);
        }
        Ok(Deviation::Product { parts, values: reps[i].clone() })
    }

    fn deviation_uses_action(&self) -> bool {
        self.components.iter().any(|c| c.deviation_uses_action())
    }

    fn deviation_pieces(&self, i: usize, v_i: &Valuation, dev: &Deviation, actions: &[Action]) -> Result<Vec<Piece>> {
        let Deviation::Product { parts, values } = dev else {
            return generic_pieces(self, i, v_i, dev, actions);
        };
        let comp_actions = self.component_actions(actions);
        let mut acc = vec![Piece { prob: 1.0, alloc: Vec::new(), pay: 0.0 }];
        for (j, c) in self.components.iter().enumerate() {
            let pj = c.deviation_pieces(i, &values[j], &parts[j], &comp_actions[j])?;
            let mut next = Vec::with_capacity(acc.len() * pj.len());
            for a in &acc {
                for p in &pj {
                    let mut alloc = a.alloc.clone();
                    alloc.extend(p.alloc.iter().cloned());
                    next.push(Piece { prob: a.prob * p.prob, alloc, pay: a.pay * p.prob + a.prob * p.pay });
                }
            }
            acc = merge_pieces(next);
        }
        Ok(acc)
    }

    fn deviation_max_payment(&self, i: usize, dev: &Deviation) -> Result<(Action, f64)> {
        let Deviation::Product { parts, .. } = dev else {
            return support_max_payment(self, i, dev);
        };
        let mut action = Vec::new();
        let mut total = 0.0;
        for (c, d) in self.components.iter().zip(parts) {
            let (a, p) = c.deviation_max_payment(i, d)?;
            action.extend(a);
            total += p;
        }
        Ok((action, total))
    }

    fn is_sequential(&self) -> bool {
        self.components.iter().any(|c| c.is_sequential())
    }
}

/// Pool pieces with identical allocations.
fn merge_pieces(pieces: Vec<Piece>) -> Vec<Piece> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out: Vec<Piece> = Vec::new();
    for p in pieces {
        match index.get(&alloc_key(&p.alloc)) {
            Some(&k) => {
                out[k].prob += p.prob;
                out[k].pay += p.pay;
            }
            None => {
                index.insert(alloc_key(&p.alloc), out.len());
                out.push(p);
            }
        }
    }
    out
}

/// Product-action grid game of the components.
pub fn compose_simultaneous(components: &[GridMechanism]) -> Result<GridMechanism> {
    compose_simultaneous_capped(components, PLAN_CAP)
}

pub fn compose_simultaneous_capped(components: &[GridMechanism], cap: u128) -> Result<GridMechanism> {
    let mech = Simultaneous::new(components.iter().map(|g| g.mech.clone()).collect())?;
    let n = mech.n_players();
    let mut grids = Vec::with_capacity(n);
    for i in 0..n {
        let count: u128 = components.iter().map(|g| g.grids[i].len() as u128).product();
        if count > cap {
            return Err(Error::Size { what: format!("joint action grid of player {i}"), count, cap });
        }
        let mut grid: Vec<Action> = vec![Vec::new()];
        for g in components {
            grid = grid
                .iter()
                .flat_map(|pre| {
                    g.grids[i].iter().map(move |a| {
                        let mut b = pre.clone();
                        b.extend(a.iter().cloned());
                        b
                    })
                })
                .collect();
        }
        grids.push(grid);
    }
    GridMechanism::new(Arc::new(mech), grids)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoPolicy {
    /// every player's action in each finished round
    #[default]
    FullBids,
    /// own allocation and own payment
    OwnOutcomeOnly,
    None,
}

type ObsKey = Vec<u64>;

/// Contingency plan: the action for this round and the sub-plan per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanNode {
    pub action: usize,
    pub next: Vec<(ObsKey, PlanNode)>,
}

impl PlanNode {
    fn child(&self, key: &ObsKey) -> &PlanNode {
        self.next.iter().find(|(k, _)| k == key).map_or(&self.next[0].1, |(_, p)| p)
    }

    fn round_actions(&self, depth: usize, out: &mut Vec<Vec<usize>>) {
        if out.len() <= depth {
            out.push(Vec::new());
        }
        out[depth].push(self.action);
        for (_, c) in &self.next {
            c.round_actions(depth + 1, out);
        }
    }
}

#[derive(Debug)]
pub struct Sequential {
    pub rounds: Vec<GridMechanism>,
    pub policy: InfoPolicy,
    /// plans[i][k]
    pub plans: Vec<Vec<PlanNode>>,
}

impl Sequential {
    fn obs_key(&self, i: usize, acts: &[usize], o: &Outcome) -> ObsKey {
        match self.policy {
            InfoPolicy::FullBids => acts.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, a)| *a as u64).collect(),
            InfoPolicy::OwnOutcomeOnly => {
                let mut k = alloc_key(&o.alloc[i]);
                k.push((o.payments[i] + 0.0).to_bits());
                k
            }
            InfoPolicy::None => Vec::new(),
        }
    }

    /// Observations player i can receive in round r after playing action a.
    fn observations(rounds: &[GridMechanism], policy: InfoPolicy, r: usize, i: usize, a: usize) -> Vec<ObsKey> {
        let gm = &rounds[r];
        let n = gm.n();
        if policy == InfoPolicy::None {
            return vec![Vec::new()];
        }
        let sizes = gm.sizes();
        let count: usize = sizes.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, s)| *s).product();
        let probe = Sequential { rounds: Vec::new(), policy, plans: Vec::new() };
        let mut keys: Vec<ObsKey> = Vec::new();
        for c in 0..count {
            let mut p = vec![0; n];
            let mut rest = c;
            for k in (0..n).rev() {
                if k == i {
                    p[k] = a;
                } else {
                    p[k] = rest % sizes[k];
                    rest /= sizes[k];
                }
            }
            let acts = gm.actions(&p);
            let favors = std::iter::once(None).chain((0..n).map(Some));
            for fav in favors {
                let key = probe.obs_key(i, &p, &gm.mech.outcome_with(&acts, fav));
                if !keys.contains(&key) {
                    keys.push(key);
                }
                if policy == InfoPolicy::FullBids {
                    break;
                }
            }
        }
        keys.sort();
        keys
    }

    /// Action order with the withdraw action first, so plan 0 withdraws everywhere.
    fn action_order(gm: &GridMechanism, i: usize) -> Vec<usize> {
        let w = gm.withdraw[i];
        std::iter::once(w).chain((0..gm.grids[i].len()).filter(|&a| a != w)).collect()
    }

    fn count_from(rounds: &[GridMechanism], policy: InfoPolicy, i: usize, r: usize) -> u128 {
        if r == rounds.len() {
            return 1;
        }
        let sub = Self::count_from(rounds, policy, i, r + 1);
        let mut total: u128 = 0;
        for a in 0..rounds[r].grids[i].len() {
            let obs = if r + 1 == rounds.len() { 0 } else { Self::observations(rounds, policy, r, i, a).len() as u32 };
            total = total.saturating_add(sub.saturating_pow(obs));
        }
        total
    }

    fn enumerate(rounds: &[GridMechanism], policy: InfoPolicy, i: usize, r: usize) -> Vec<PlanNode> {
        let last = r + 1 == rounds.len();
        let sub = if last { Vec::new() } else { Self::enumerate(rounds, policy, i, r + 1) };
        let mut out = Vec::new();
        for a in Self::action_order(&rounds[r], i) {
            if last {
                out.push(PlanNode { action: a, next: Vec::new() });
                continue;
            }
            let obs = Self::observations(rounds, policy, r, i, a);
            let mut digits = vec![0usize; obs.len()];
            loop {
                let next = obs.iter().cloned().zip(digits.iter().map(|&d| sub[d].clone())).collect();
                out.push(PlanNode { action: a, next });
                let mut k = obs.len();
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    digits[k] += 1;
                    if digits[k] < sub.len() {
                        break;
                    }
                    digits[k] = 0;
                }
                if digits.iter().all(|&d| d == 0) {
                    break;
                }
            }
        }
        out
    }

    /// Round-by-round outcomes when every player follows a plan.
    fn play<'a>(&self, plans: &[&'a PlanNode], favored: Option<usize>, upto: usize) -> (Vec<Outcome>, Vec<&'a PlanNode>) {
        let n = plans.len();
        let mut nodes: Vec<&'a PlanNode> = plans.to_vec();
        let mut outs = Vec::new();
        for r in 0..upto {
            let gm = &self.rounds[r];
            let idx: Vec<usize> = nodes.iter().map(|p| p.action).collect();
            let o = gm.mech.outcome_with(&gm.actions(&idx), favored);
            if r + 1 < self.rounds.len() {
                for k in 0..n {
                    nodes[k] = nodes[k].child(&self.obs_key(k, &idx, &o));
                }
            }
            outs.push(o);
        }
        (outs, nodes)
    }

    fn plan_refs(&self, actions: &[Action]) -> Vec<&PlanNode> {
        actions.iter().enumerate().map(|(i, a)| &self.plans[i][a[0] as usize]).collect()
    }

    fn spaces(&self) -> Result<Vec<OutcomeSpace>> {
        self.rounds.iter().map(|g| g.mech.outcome_space()).collect()
    }

    fn bottoms(&self, i: usize) -> Vec<Alloc> {
        self.rounds
            .iter()
            .map(|g| {
                let w: Vec<Action> = (0..g.n()).map(|k| g.mech.withdraw(k)).collect();
                g.mech.outcome(&w).alloc[i].clone()
            })
            .collect()
    }
}

impl Mechanism for Sequential {
    fn kind(&self) -> String {
        format!(
            "sequential[{}]({:?})",
            self.rounds.iter().map(|g| g.mech.kind()).collect::<Vec<_>>().join(","),
            self.policy
        )
    }

    fn n_players(&self) -> usize {
        self.plans.len()
    }

    fn action_len(&self, _i: usize) -> usize {
        1
    }

    fn outcome_with(&self, actions: &[Action], favored: Option<usize>) -> Outcome {
        let n = self.n_players();
        let (outs, _) = self.play(&self.plan_refs(actions), favored, self.rounds.len());
        let mut out = Outcome { alloc: vec![Vec::new(); n], payments: vec![0.0; n] };
        for o in outs {
            for i in 0..n {
                out.alloc[i].extend(o.alloc[i].iter().cloned());
                out.payments[i] += o.payments[i];
            }
        }
        out
    }

    fn outcome_space(&self) -> Result<OutcomeSpace> {
        product_space(&self.spaces()?)
    }

    fn max_payment(&self, i: usize, a_i: &Action) -> f64 {
        let mut per_round = Vec::new();
        self.plans[i][a_i[0] as usize].round_actions(0, &mut per_round);
        per_round
            .iter()
            .zip(&self.rounds)
            .map(|(acts, g)| acts.iter().map(|&a| g.mech.max_payment(i, &g.grids[i][a])).fold(0.0, f64::max))
            .sum()
    }

    /// Follow the plan until the round of the player's optimal item, deviate
    /// there, withdraw afterwards.
    fn paper_deviation(&self, profile: &[Valuation], i: usize, a_i: &Action) -> Result<Deviation> {
        let spaces = self.spaces()?;
        let (_, x) = self.optimal_welfare(profile)?;
        let n = profile.len();
        let mut star = vec![None; n];
        let mut parts_of = Vec::with_capacity(n);
        for k in 0..n {
            let parts = match &profile[k] {
                Valuation::UnitDemand { parts } if parts.len() == self.rounds.len() => parts.clone(),
                v if self.rounds.len() == 1 => vec![v.clone()],
                _ => return Err(Error::Domain("sequential deviations need unit-demand valuations across rounds".into())),
            };
            let mut best = 0.0;
            for (j, p) in parts.iter().enumerate() {
                let val = p.value(&x[k][j..j + 1]);
                if val > best {
                    best = val;
                    star[k] = Some(j);
                }
            }
            parts_of.push(parts);
        }
        let Some(round) = star[i] else {
            return Ok(Deviation::point(vec![0.0]));
        };
        let comp_profile = (0..n)
            .map(|k| {
                if star[k] == Some(round) {
                    parts_of[k][round].clone()
                } else {
                    zero_valuation(spaces[round].labels[k].len())
                }
            })
            .collect();
        Ok(Deviation::Sequential { plan: a_i[0] as usize, round, profile: comp_profile })
    }

    fn deviation_uses_action(&self) -> bool {
        true
    }

    fn deviation_pieces(&self, i: usize, v_i: &Valuation, dev: &Deviation, actions: &[Action]) -> Result<Vec<Piece>> {
        let Deviation::Sequential { plan, round, profile } = dev else {
            return generic_pieces(self, i, v_i, dev, actions);
        };
        let mut refs = self.plan_refs(actions);
        refs[i] = &self.plans[i][*plan];
        let (outs, nodes) = self.play(&refs, None, *round);
        let mut prefix: Alloc = Vec::new();
        let mut paid = 0.0;
        for o in &outs {
            prefix.extend(o.alloc[i].iter().cloned());
            paid += o.payments[i];
        }
        let gm = &self.rounds[*round];
        let idx: Vec<usize> = nodes.iter().map(|p| p.action).collect();
        let acts = gm.actions(&idx);
        let comp_dev = gm.mech.paper_deviation(profile, i, &acts[i])?;
        let suffix: Vec<f64> = self.bottoms(i)[*round + 1..].iter().flatten().cloned().collect();
        let pieces = gm.mech.deviation_pieces(i, &profile[i], &comp_dev, &acts)?;
        Ok(pieces
            .into_iter()
            .map(|p| {
                let mut alloc = prefix.clone();
                alloc.extend(p.alloc);
                alloc.extend(suffix.iter().cloned());
                Piece { prob: p.prob, alloc, pay: p.pay + p.prob * paid }
            })
            .collect())
    }

    fn deviation_max_payment(&self, i: usize, dev: &Deviation) -> Result<(Action, f64)> {
        let Deviation::Sequential { plan, round, profile } = dev else {
            return support_max_payment(self, i, dev);
        };
        let mut per_round = Vec::new();
        self.plans[i][*plan].round_actions(0, &mut per_round);
        let mut total = 0.0;
        for r in 0..*round {
            let g = &self.rounds[r];
            total += per_round[r].iter().map(|&a| g.mech.max_payment(i, &g.grids[i][a])).fold(0.0, f64::max);
        }
        let g = &self.rounds[*round];
        let mut worst: f64 = 0.0;
        for &a in &per_round[*round] {
            let d = g.mech.paper_deviation(profile, i, &g.grids[i][a])?;
            worst = worst.max(g.mech.deviation_max_payment(i, &d)?.1);
        }
        Ok((vec![*plan as f64], total + worst))
    }

    fn is_sequential(&self) -> bool {
        true
    }
}

/// Number of contingency plans of player i.
pub fn plan_count(rounds: &[GridMechanism], policy: InfoPolicy, i: usize) -> u128 {
    Sequential::count_from(rounds, policy, i, 0)
}

/// Normal form over enumerated contingency plans.
pub fn compose_sequential(rounds: &[GridMechanism], policy: InfoPolicy) -> Result<GridMechanism> {
    compose_sequential_capped(rounds, policy, PLAN_CAP)
}

pub fn compose_sequential_capped(rounds: &[GridMechanism], policy: InfoPolicy, cap: u128) -> Result<GridMechanism> {
    let n = rounds.first().ok_or_else(|| Error::Validation("no rounds".into()))?.n();
    if rounds.iter().any(|g| g.n() != n) {
        return Err(Error::Validation("rounds disagree on the player count".into()));
    }
    let mut plans = Vec::with_capacity(n);
    for i in 0..n {
        let count = plan_count(rounds, policy, i);
        if count > cap {
            return Err(Error::Size { what: format!("contingency plans of player {i}"), count, cap });
        }
        plans.push(Sequential::enumerate(rounds, policy, i, 0));
    }
    let grids = plans.iter().map(|p| (0..p.len()).map(|k| vec![k as f64]).collect()).collect();
    let mech = Sequential { rounds: rounds.to_vec(), policy, plans };
    GridMechanism::new(Arc::new(mech), grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{willingness_to_pay, wtp_table, SingleItem, SingleItemFormat};
    use crate::model::uniform_grid;

    fn fp(points: usize) -> GridMechanism {
        GridMechanism::scalar(Arc::new(SingleItem::new(2, SingleItemFormat::FirstPrice)), &uniform_grid(1.0, points)).unwrap()
    }

    #[test]
    fn simultaneous_grid_and_payments() {
        let c = compose_simultaneous(&[fp(4), fp(4)]).unwrap();
        assert_eq!(c.sizes(), vec![16, 16]);
        let o = c.mech.outcome(&[vec![0.8, 0.2], vec![0.5, 0.6]]);
        assert_eq!(o.alloc, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((o.payments[0] - 0.8).abs() < 1e-12 && (o.payments[1] - 0.6).abs() < 1e-12);
        let one = compose_simultaneous(&[fp(4)]).unwrap();
        for p in 0..16 {
            assert_eq!(one.outcome_at(&one.profile(p)), fp(4).outcome_at(&fp(4).profile(p)));
        }
    }

    #[test]
    fn willingness_to_pay_is_additive() {
        let parts = [fp(3), fp(3)];
        let c = compose_simultaneous(&parts).unwrap();
        let table = wtp_table(&c).unwrap();
        for p in 0..c.n_profiles() as usize {
            let prof = c.profile(p);
            let o = c.outcome_at(&prof);
            for i in 0..2 {
                let (a0, a1) = (prof[i] / 3, prof[i] % 3);
                let sum = willingness_to_pay(&parts[0], i, a0, &o.alloc[i][..1].to_vec())
                    + willingness_to_pay(&parts[1], i, a1, &o.alloc[i][1..].to_vec());
                assert!((table[p * 2 + i] - sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plan_counts() {
        let g2 = fp(2);
        assert_eq!(plan_count(&[g2.clone(), g2.clone()], InfoPolicy::None, 0), 4);
        // two opponent actions observable after each own action: 2 · 2^2
        assert_eq!(plan_count(&[g2.clone(), g2.clone()], InfoPolicy::FullBids, 0), 8);
        assert_eq!(plan_count(&[g2.clone()], InfoPolicy::FullBids, 0), 2);
        assert_eq!(plan_count(&[fp(3), fp(2)], InfoPolicy::FullBids, 0), 24);
        let err = compose_sequential_capped(&[fp(3), fp(3)], InfoPolicy::FullBids, 10).unwrap_err();
        assert!(matches!(err, Error::Size { count: 81, .. }));
    }

    #[test]
    fn sequential_replays_rounds() {
        let s = compose_sequential(&[fp(2), fp(2)], InfoPolicy::FullBids).unwrap();
        // plan 0 withdraws everywhere
        let o = s.mech.outcome(&[vec![0.0], vec![0.0]]);
        assert_eq!(o.payments, vec![0.0, 0.0]);
        let one = compose_sequential(&[fp(3)], InfoPolicy::OwnOutcomeOnly).unwrap();
        assert_eq!(one.sizes(), vec![3, 3]);
        assert!(s.mech.is_sequential());
    }
}
