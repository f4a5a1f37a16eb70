//! Correlated equilibria by linear programming, swap-regret learning,
//! Bayesian best-response dynamics and price-of-anarchy checks.

use crate::error::{Error, Result};
use crate::mechanisms::wtp_table;
use crate::model::{to_normal_form, Action, GameTable, GridMechanism, TABLE_CAP, TOL};
use crate::smoothness::{deviation_expected_utility, DeviationSource};
use crate::valuations::Valuation;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothmech_lp::{LinearProgram, Relation, Sense, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    CorrelatedExact,
    CoarseCorrelatedExact,
    LearnedEmpirical,
    BayesStrategy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    #[default]
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    #[default]
    None,
    NoOverbidding,
}

mod sparse {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(probs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<usize, f64> = probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (k, *p)).collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let map = BTreeMap::<usize, f64>::deserialize(d)?;
        let len = map.keys().next_back().map_or(0, |k| k + 1);
        let mut v = vec![0.0; len];
        for (k, p) in map {
            v[k] = p;
        }
        Ok(v)
    }
}

/// A distribution over joint grid profiles with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumDistribution {
    pub kind: EquilibriumKind,
    pub sizes: Vec<usize>,
    /// profile index -> probability (sparse on disk)
    #[serde(with = "sparse")]
    pub probs: Vec<f64>,
    /// largest violated incentive constraint; swap regret for learned play,
    /// ε for Bayesian strategies
    pub incentive_residual: f64,
    pub welfare: f64,
    pub revenue: f64,
    /// per-player swap regret of `probs`
    pub swap_regret: Vec<f64>,
    /// behavioral strategies [player][type][action] for Bayesian runs
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<Vec<Vec<f64>>>>,
}

impl EquilibriumDistribution {
    pub fn total_probability(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Per-player swap regret Σ_{a_i} max_{a_i'} Σ_{a_-i} p(a)[u_i(a_i', a_-i) − u_i(a)].
pub fn swap_regret(table: &GameTable, probs: &[f64]) -> Vec<f64> {
    (0..table.n()).map(|i| swap_gains(table, probs, i).iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).sum()).collect()
}

/// gains[a_i][a_i'] = Σ_{a_-i} p(a)[u_i(a_i', a_-i) − u_i(a)]
fn swap_gains(table: &GameTable, probs: &[f64], i: usize) -> Vec<Vec<f64>> {
    let g = table.sizes[i];
    let mut gains = vec![vec![0.0; g]; g];
    for (p, &w) in probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let a = table.coord(p, i);
        let u = table.utility(p, i);
        for (b, gain) in gains[a].iter_mut().enumerate() {
            *gain += w * (table.utility(table.swap(p, i, b), i) - u);
        }
    }
    gains
}

fn expectations(table: &GameTable, probs: &[f64]) -> (f64, f64) {
    probs
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .fold((0.0, 0.0), |(w, r), (p, q)| (w + q * table.welfare(p), r + q * table.revenue(p)))
}

/// Normal form plus the willingness-to-pay table the no-overbidding rows need.
pub fn table_with_wtp(gm: &GridMechanism, profile: &[Valuation]) -> Result<GameTable> {
    let mut t = to_normal_form(gm, profile)?;
    t.wtp = Some(wtp_table(gm)?);
    Ok(t)
}

/// Cells that are unusable for their owner: payment above budget.
fn invalid_cells(table: &GameTable, budgets: Option<&[f64]>) -> Vec<bool> {
    let n = table.n();
    match budgets {
        None => vec![false; table.payments.len()],
        Some(b) => table.payments.iter().enumerate().map(|(k, pay)| *pay > b[k % n] + TOL).collect(),
    }
}

pub(crate) struct CeRequest<'a> {
    pub sense: Extremum,
    pub refinement: Refinement,
    pub coarse: bool,
    pub budgets: Option<&'a [f64]>,
}

/// Extremal expected welfare over the (coarse) correlated equilibrium polytope.
pub fn ce_extreme_welfare(table: &GameTable, sense: Extremum, refinement: Refinement) -> Result<EquilibriumDistribution> {
    ce_solve(table, &CeRequest { sense, refinement, coarse: false, budgets: None })
}

pub fn cce_extreme_welfare(table: &GameTable, sense: Extremum, refinement: Refinement) -> Result<EquilibriumDistribution> {
    ce_solve(table, &CeRequest { sense, refinement, coarse: true, budgets: None })
}

pub(crate) fn ce_solve(table: &GameTable, req: &CeRequest) -> Result<EquilibriumDistribution> {
    let n = table.n();
    let count = table.n_profiles();
    if count as u128 > smoothmech_lp::DEFAULT_CAP as u128 {
        return Err(Error::Size { what: "CE LP profiles".into(), count: count as u128, cap: smoothmech_lp::DEFAULT_CAP as u128 });
    }
    let invalid = invalid_cells(table, req.budgets);
    let sense = match req.sense {
        Extremum::Min => Sense::Minimize,
        Extremum::Max => Sense::Maximize,
    };
    let mut lp = LinearProgram::new(count, sense);
    for p in 0..count {
        lp.objective[p] = table.welfare(p);
        if (0..n).any(|i| invalid[p * n + i]) {
            lp.set_bounds(p, 0.0, 0.0);
        }
    }
    lp.add_row((0..count).map(|p| (p, 1.0)).collect(), Relation::Eq, 1.0);

    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let g = table.sizes[i];
            let pairs: Vec<(Option<usize>, usize)> = if req.coarse {
                (0..g).map(|b| (None, b)).collect()
            } else {
                (0..g).flat_map(|a| (0..g).filter(move |&b| b != a).map(move |b| (Some(a), b))).collect()
            };
            let invalid = &invalid;
            pairs.into_iter().filter_map(move |(a, b)| {
                let mut row = Vec::new();
                for p in 0..count {
                    if a.is_some_and(|a| table.coord(p, i) != a) || (0..n).any(|k| invalid[p * n + k]) {
                        continue;
                    }
                    let q = table.swap(p, i, b);
                    if invalid[q * n + i] {
                        // deviations that can break the budget are not available
                        return None;
                    }
                    let c = table.utility(p, i) - table.utility(q, i);
                    if c != 0.0 {
                        row.push((p, c));
                    }
                }
                Some(row)
            })
        })
        .collect();
    for row in rows {
        lp.add_row(row, Relation::Ge, 0.0);
    }
    if req.refinement == Refinement::NoOverbidding {
        let wtp = table
            .wtp
            .as_ref()
            .ok_or_else(|| Error::Precondition("no-overbidding needs the willingness-to-pay table".into()))?;
        for i in 0..n {
            let row = (0..count).map(|p| (p, wtp[p * n + i] - table.values[p * n + i])).filter(|(_, c)| *c != 0.0).collect();
            lp.add_row(row, Relation::Le, 0.0);
        }
    }
    let probs = match lp.solve()? {
        Solution::Optimal { point, .. } => normalize(point),
        Solution::Infeasible if req.refinement != Refinement::None || req.budgets.is_some() => {
            return Err(Error::RefinementEmpty("no equilibrium satisfies the refinement".into()))
        }
        Solution::Infeasible => return Err(Error::Numeric("CE polytope reported empty".into())),
        Solution::Unbounded => return Err(Error::Numeric("CE LP reported unbounded".into())),
    };
    let regrets = swap_regret(table, &probs);
    let residual = (0..n)
        .map(|i| {
            let gains = swap_gains(table, &probs, i);
            if req.coarse {
                (0..table.sizes[i]).map(|b| gains.iter().map(|r| r[b]).sum::<f64>()).fold(0.0, f64::max)
            } else {
                gains.iter().flatten().cloned().fold(0.0, f64::max)
            }
        })
        .fold(0.0, f64::max);
    let (welfare, revenue) = expectations(table, &probs);
    Ok(EquilibriumDistribution {
        kind: if req.coarse { EquilibriumKind::CoarseCorrelatedExact } else { EquilibriumKind::CorrelatedExact },
        sizes: table.sizes.clone(),
        probs,
        incentive_residual: residual,
        welfare,
        revenue,
        swap_regret: regrets,
        strategies: None,
    })
}

fn normalize(point: Vec<f64>) -> Vec<f64> {
    let clean: Vec<f64> = point.into_iter().map(|x| if x > 1e-12 { x } else { 0.0 }).collect();
    let s: f64 = clean.iter().sum();
    clean.into_iter().map(|x| x / s).collect()
}

// ---------------------------------------------------------------------------

fn softmax(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logw.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Stationary distribution p = pQ of a row-stochastic matrix.
fn stationary(q: &[Vec<f64>], start: &[f64]) -> Vec<f64> {
    let g = q.len();
    let mut p = start.to_vec();
    for _ in 0..10_000 {
        let mut next = vec![0.0; g];
        for (j, row) in q.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                next[k] += p[j] * x;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if diff < 1e-12 {
            break;
        }
    }
    p
}

fn sample(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, x) in p.iter().enumerate() {
        acc += x;
        if r < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Each player runs one multiplicative-weights expert per action and plays
/// the fixed point of the experts' recommendations. The returned
/// distribution is the time average of the played product distributions.
pub fn swap_regret_learn(table: &GameTable, rounds: usize, seed: u64) -> Result<EquilibriumDistribution> {
    if rounds == 0 {
        return Err(Error::Precondition("at least one round".into()));
    }
    let n = table.n();
    let count = table.n_profiles();
    let mut rng = crate::corpus::rng(seed);
    let mut logw: Vec<Vec<Vec<f64>>> = table.sizes.iter().map(|&g| vec![vec![0.0; g]; g]).collect();
    let mut play: Vec<Vec<f64>> = table.sizes.iter().map(|&g| vec![1.0 / g as f64; g]).collect();
    let mut avg = vec![0.0; count];
    let mut joint = vec![0.0; count];
    for _ in 0..rounds {
        for i in 0..n {
            let q: Vec<Vec<f64>> = logw[i].iter().map(|w| softmax(w)).collect();
            play[i] = stationary(&q, &play[i]);
        }
        for (p, x) in joint.iter_mut().enumerate() {
            *x = (0..n).map(|i| play[i][table.coord(p, i)]).product();
        }
        avg.iter_mut().zip(&joint).for_each(|(a, j)| *a += j);
        let realized: Vec<usize> = (0..n).map(|i| sample(&mut rng, &play[i])).collect();
        let here = realized.iter().zip(&table.sizes).fold(0, |acc, (a, s)| acc * s + a);
        for i in 0..n {
            let g = table.sizes[i];
            let eta = ((g as f64).ln().max(1e-12) / rounds as f64).sqrt();
            let gains: Vec<f64> = (0..g).map(|b| table.utility(table.swap(here, i, b), i)).collect();
            for (j, w) in logw[i].iter_mut().enumerate() {
                let scale = eta * play[i][j];
                w.iter_mut().zip(&gains).for_each(|(x, u)| *x += scale * u);
            }
        }
    }
    let probs: Vec<f64> = avg.into_iter().map(|x| x / rounds as f64).collect();
    let regrets = swap_regret(table, &probs);
    let (welfare, revenue) = expectations(table, &probs);
    Ok(EquilibriumDistribution {
        kind: EquilibriumKind::LearnedEmpirical,
        sizes: table.sizes.clone(),
        incentive_residual: regrets.iter().cloned().fold(0.0, f64::max),
        probs,
        welfare,
        revenue,
        swap_regret: regrets,
        strategies: None,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerType {
    pub prob: f64,
    pub valuation: Valuation,
}

/// Independent finite type distributions over a shared grid mechanism.
#[derive(Clone, Debug)]
pub struct BayesianGame {
    pub gm: GridMechanism,
    pub types: Vec<Vec<PlayerType>>,
}

impl BayesianGame {
    pub fn new(gm: GridMechanism, types: Vec<Vec<PlayerType>>) -> Result<Self> {
        if types.len() != gm.n() {
            return Err(Error::Validation("one type list per player".into()));
        }
        for (i, ts) in types.iter().enumerate() {
            let s: f64 = ts.iter().map(|t| t.prob).sum();
            if ts.is_empty() || ts.iter().any(|t| t.prob < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("prior of player {i} is not a distribution")));
            }
        }
        Ok(BayesianGame { gm, types })
    }

    fn type_profiles(&self) -> usize {
        self.types.iter().map(|t| t.len()).product()
    }

    fn type_profile(&self, mut k: usize) -> Vec<usize> {
        let mut t = vec![0; self.types.len()];
        for i in (0..t.len()).rev() {
            t[i] = k % self.types[i].len();
            k /= self.types[i].len();
        }
        t
    }

    fn weight(&self, tp: &[usize]) -> f64 {
        tp.iter().enumerate().map(|(i, &t)| self.types[i][t].prob).product()
    }

    fn valuations(&self, tp: &[usize]) -> Vec<Valuation> {
        tp.iter().enumerate().map(|(i, &t)| self.types[i][t].valuation.clone()).collect()
    }

    /// E[OPT(v)] over the type prior.
    pub fn expected_opt(&self) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.type_profiles() {
            let tp = self.type_profile(k);
            total += self.weight(&tp) * self.gm.mech.optimal_welfare(&self.valuations(&tp))?.0;
        }
        Ok(total)
    }

    fn tables(&self) -> Result<Vec<GameTable>> {
        let cells = self.type_profiles() as u128 * self.gm.n_profiles();
        if cells > TABLE_CAP as u128 {
            return Err(Error::Size { what: "type × action tables".into(), count: cells, cap: TABLE_CAP as u128 });
        }
        (0..self.type_profiles()).map(|k| to_normal_form(&self.gm, &self.valuations(&self.type_profile(k)))).collect()
    }
}

/// Behavioral strategies [player][type][action].
pub type Strategies = Vec<Vec<Vec<f64>>>;

/// u[i][t][a]: interim expected utility of action a for player i of type t.
fn interim_utilities(bg: &BayesianGame, tables: &[GameTable], s: &Strategies) -> Vec<Vec<Vec<f64>>> {
    let n = bg.types.len();
    let sizes = bg.gm.sizes();
    let mut u: Vec<Vec<Vec<f64>>> = (0..n).map(|i| vec![vec![0.0; sizes[i]]; bg.types[i].len()]).collect();
    for (k, table) in tables.iter().enumerate() {
        let tp = bg.type_profile(k);
        for i in 0..n {
            let w: f64 = (0..n).filter(|&j| j != i).map(|j| bg.types[j][tp[j]].prob).product();
            if w == 0.0 {
                continue;
            }
            for p in 0..table.n_profiles() {
                let opp: f64 = (0..n).filter(|&j| j != i).map(|j| s[j][tp[j]][table.coord(p, j)]).product();
                if opp != 0.0 {
                    u[i][tp[i]][table.coord(p, i)] += w * opp * table.utility(p, i);
                }
            }
        }
    }
    u
}

fn epsilon(bg: &BayesianGame, u: &[Vec<Vec<f64>>], s: &Strategies) -> f64 {
    let mut eps: f64 = 0.0;
    for i in 0..u.len() {
        for t in 0..bg.types[i].len() {
            let best = u[i][t].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cur: f64 = u[i][t].iter().zip(&s[i][t]).map(|(a, b)| a * b).sum();
            eps = eps.max(best - cur);
        }
    }
    eps
}

/// Damped simultaneous best-response iteration over behavioral strategies.
/// Returns the iterate with the smallest ε seen; ε is always reported.
pub fn bayes_best_response(bg: &BayesianGame, max_iters: usize, damping: f64, seed: u64) -> Result<EquilibriumDistribution> {
    if !(0.0..=1.0).contains(&damping) {
        return Err(Error::Validation("damping must lie in [0, 1]".into()));
    }
    let tables = bg.tables()?;
    let sizes = bg.gm.sizes();
    let mut rng = crate::corpus::rng(seed);
    let mut s: Strategies = (0..sizes.len())
        .map(|i| {
            (0..bg.types[i].len())
                .map(|_| {
                    let raw: Vec<f64> = (0..sizes[i]).map(|_| rng.gen_range(0.5..1.5)).collect();
                    let tot: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / tot).collect()
                })
                .collect()
        })
        .collect();
    let mut best = (f64::INFINITY, s.clone());
    for _ in 0..=max_iters {
        let u = interim_utilities(bg, &tables, &s);
        let eps = epsilon(bg, &u, &s);
        if eps < best.0 {
            best = (eps, s.clone());
        }
        if eps <= 1e-12 {
            break;
        }
        for i in 0..s.len() {
            for t in 0..s[i].len() {
                let row = &u[i][t];
                let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let br = row.iter().position(|x| *x >= top - 1e-12).unwrap_or(0);
                for (a, x) in s[i][t].iter_mut().enumerate() {
                    *x = (1.0 - damping) * *x + if a == br { damping } else { 0.0 };
                }
            }
        }
    }
    let (eps, s) = best;
    let count = bg.gm.n_profiles() as usize;
    let mut probs = vec![0.0; count];
    let (mut welfare, mut revenue) = (0.0, 0.0);
    for (k, table) in tables.iter().enumerate() {
        let tp = bg.type_profile(k);
        let w = bg.weight(&tp);
        for p in 0..count {
            let q = w * (0..sizes.len()).map(|j| s[j][tp[j]][table.coord(p, j)]).product::<f64>();
            probs[p] += q;
            welfare += q * table.welfare(p);
            revenue += q * table.revenue(p);
        }
    }
    Ok(EquilibriumDistribution {
        kind: EquilibriumKind::BayesStrategy,
        sizes,
        probs,
        incentive_residual: eps,
        welfare,
        revenue,
        swap_regret: Vec::new(),
        strategies: Some(s),
    })
}

/// Interim expected utility of player i with type t under strategies s.
pub fn interim_utility(bg: &BayesianGame, s: &Strategies, i: usize, t: usize) -> Result<f64> {
    let u = interim_utilities(bg, &bg.tables()?, s);
    Ok(u[i][t].iter().zip(&s[i][t]).map(|(a, b)| a * b).sum())
}

/// Expected utility of the "pretend" deviation for player i of type t: draw
/// w from the prior, play the smoothness deviation for the valuation profile
/// (v_i, w_-i) against i's own action s_i(w_i), while the opponents keep
/// playing s_-i at their true types.
pub fn bluffing_utility(bg: &BayesianGame, s: &Strategies, i: usize, t: usize, source: &DeviationSource) -> Result<f64> {
    let n = bg.types.len();
    let mech = bg.gm.mech.as_ref();
    let v_i = &bg.types[i][t].valuation;
    let opp_profiles = bg.gm.n_profiles() as usize;
    let mut total = 0.0;
    for kw in 0..bg.type_profiles() {
        let w = bg.type_profile(kw);
        let pw = bg.weight(&w);
        if pw == 0.0 {
            continue;
        }
        let mut pretend = bg.valuations(&w);
        pretend[i] = v_i.clone();
        for (a_i, &q_i) in s[i][w[i]].iter().enumerate() {
            if q_i == 0.0 {
                continue;
            }
            let own: Action = bg.gm.grids[i][a_i].clone();
            let dev = match source {
                DeviationSource::Paper => mech.paper_deviation(&pretend, i, &own)?,
                DeviationSource::Custom(f) => f(&pretend, i, &own)?,
            };
            // opponents' true types and their mixed actions
            for kv in 0..bg.type_profiles() {
                let v = bg.type_profile(kv);
                if v[i] != 0 {
                    continue;
                }
                let pv: f64 = (0..n).filter(|&j| j != i).map(|j| bg.types[j][v[j]].prob).product();
                if pv == 0.0 {
                    continue;
                }
                for p in 0..opp_profiles {
                    let prof = bg.gm.profile(p);
                    if prof[i] != 0 {
                        continue;
                    }
                    let q: f64 = (0..n).filter(|&j| j != i).map(|j| s[j][v[j]][prof[j]]).product();
                    if q == 0.0 {
                        continue;
                    }
                    let acts = bg.gm.actions(&prof);
                    total += pw * q_i * pv * q * deviation_expected_utility(mech, i, v_i, &dev, &acts)?;
                }
            }
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoaReport {
    pub ratio: f64,
    pub bound: f64,
    pub slack: f64,
    pub passes: bool,
}

pub fn verify_poa(dist: &EquilibriumDistribution, opt: f64, bound: f64) -> PoaReport {
    let n = dist.sizes.len() as f64;
    if opt <= 0.0 {
        return PoaReport { ratio: 1.0, bound, slack: 0.0, passes: true };
    }
    let ratio = dist.welfare / opt;
    let slack = dist.incentive_residual * n / opt + 1e-7;
    PoaReport { ratio, bound, slack, passes: ratio >= bound - slack }
}

/// First player whose expected willingness-to-pay exceeds their expected value.
pub fn check_no_overbidding(dist: &EquilibriumDistribution, gm: &GridMechanism, profile: &[Valuation]) -> Result<Option<usize>> {
    let table = table_with_wtp(gm, profile)?;
    let wtp = table.wtp.as_ref().expect("filled above");
    let n = table.n();
    for i in 0..n {
        let excess: f64 = dist.probs.iter().enumerate().map(|(p, q)| q * (wtp[p * n + i] - table.values[p * n + i])).sum();
        if excess > TOL {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{SingleItem, SingleItemFormat};
    use crate::model::uniform_grid;
    use std::sync::Arc;

    fn game(format: SingleItemFormat, points: usize) -> GridMechanism {
        GridMechanism::scalar(Arc::new(SingleItem::new(2, format)), &uniform_grid(1.0, points)).unwrap()
    }

    fn profile() -> Vec<Valuation> {
        vec![Valuation::item(1.0), Valuation::item(0.6)]
    }

    #[test]
    fn max_ce_welfare_reaches_but_never_exceeds_opt() {
        let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 6), &profile()).unwrap();
        let d = ce_extreme_welfare(&t, Extremum::Max, Refinement::None).unwrap();
        assert!(d.welfare <= 1.0 + 1e-9);
        assert!((d.total_probability() - 1.0).abs() < 1e-9);
        assert!(d.incentive_residual < 1e-9);
    }

    #[test]
    fn coarse_polytope_contains_the_correlated_one() {
        let t = to_normal_form(&game(SingleItemFormat::AllPay, 6), &profile()).unwrap();
        let ce = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        let cce = cce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        assert!(cce.welfare <= ce.welfare + 1e-9);
    }

    #[test]
    fn empty_refinement_is_reported() {
        // the only positive bid overbids both values, and it beats withdrawing
        let gm = GridMechanism::scalar(Arc::new(SingleItem::new(2, SingleItemFormat::SecondPrice)), &[0.0, 2.0]).unwrap();
        let t = table_with_wtp(&gm, &[Valuation::item(1.0), Valuation::item(0.6)]).unwrap();
        assert!(matches!(
            ce_extreme_welfare(&t, Extremum::Min, Refinement::NoOverbidding),
            Err(Error::RefinementEmpty(_))
        ));
        assert!(ce_extreme_welfare(&t, Extremum::Min, Refinement::None).is_ok());
    }

    #[test]
    fn single_round_of_learning_is_uniform() {
        let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 3), &profile()).unwrap();
        let d = swap_regret_learn(&t, 1, 3).unwrap();
        assert!(d.probs.iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-12));
        let constant = GameTable { sizes: vec![2, 2], values: vec![0.5; 8], payments: vec![0.0; 8], wtp: None };
        let d = swap_regret_learn(&constant, 5, 3).unwrap();
        assert!(d.swap_regret.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn learning_is_reproducible() {
        let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 4), &profile()).unwrap();
        assert_eq!(swap_regret_learn(&t, 500, 9).unwrap(), swap_regret_learn(&t, 500, 9).unwrap());
    }

    #[test]
    fn overbidding_checks() {
        let gm = game(SingleItemFormat::SecondPrice, 3);
        let at = |p: usize| {
            let mut probs = vec![0.0; 9];
            probs[p] = 1.0;
            EquilibriumDistribution {
                kind: EquilibriumKind::CorrelatedExact,
                sizes: vec![3, 3],
                probs,
                incentive_residual: 0.0,
                welfare: 0.0,
                revenue: 0.0,
                swap_regret: vec![],
                strategies: None,
            }
        };
        let v = vec![Valuation::item(0.5), Valuation::item(0.2)];
        // truthful-ish: bids (0.5, 0)
        assert_eq!(check_no_overbidding(&at(3), &gm, &v).unwrap(), None);
        // player 0 bids 1.0 = 2v and wins
        assert_eq!(check_no_overbidding(&at(6), &gm, &v).unwrap(), Some(0));
        assert_eq!(check_no_overbidding(&at(0), &gm, &v).unwrap(), None);
    }

    #[test]
    fn verify_poa_fails_above_efficiency() {
        let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 6), &profile()).unwrap();
        let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        if d.welfare < 1.0 - 1e-6 {
            assert!(!verify_poa(&d, 1.0, 1.0).passes);
        }
        assert!(verify_poa(&d, 1.0, 1.0 - crate::smoothness::E_INV).passes);
    }

    #[test]
    fn one_type_per_player_is_full_information() {
        let gm = game(SingleItemFormat::FirstPrice, 6);
        let types = profile().into_iter().map(|v| vec![PlayerType { prob: 1.0, valuation: v }]).collect();
        let bg = BayesianGame::new(gm, types).unwrap();
        let d = bayes_best_response(&bg, 200, 0.5, 1).unwrap();
        assert!((bg.expected_opt().unwrap() - 1.0).abs() < 1e-12);
        assert!(d.welfare >= (1.0 - crate::smoothness::E_INV) - 2.0 * d.incentive_residual);
    }
}
