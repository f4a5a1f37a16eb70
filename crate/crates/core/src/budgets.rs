//! Budget-constrained players: effective welfare, budgeted utilities and the
//! effective-welfare bound for conservatively smooth mechanisms.

use crate::equilibrium::{ce_solve, CeRequest, EquilibriumDistribution, Extremum, Refinement};
use crate::error::{Error, Result};
use crate::model::{to_normal_form, Alloc, GridMechanism, Outcome, OutcomeSpace, TOL};
use crate::smoothness::{check_conservative, poa_bound, ConservativeWitness};
use crate::valuations::{cap_valuation, cap_xos, is_capping_of, verify_xos, Space, TabulatedValuation, Valuation};
use serde::{Deserialize, Serialize};

/// Per-player budgets, `f64::INFINITY` for unconstrained players.
pub type BudgetProfile = Vec<f64>;

pub fn validate_budgets(budgets: &[f64], n: usize) -> Result<()> {
    if budgets.len() != n {
        return Err(Error::Validation(format!("{} budgets for {n} players", budgets.len())));
    }
    if budgets.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::Validation("budgets must be nonnegative".into()));
    }
    Ok(())
}

/// min(v, B) for each player.
pub fn capped_profile(profile: &[Valuation], budgets: &[f64]) -> Vec<Valuation> {
    profile
        .iter()
        .zip(budgets)
        .map(|(v, &b)| if b.is_finite() { Valuation::Capped { inner: Box::new(v.clone()), budget: b } } else { v.clone() })
        .collect()
}

/// Σ_i min(v_i(x_i), B_i)
pub fn effective_welfare(profile: &[Valuation], budgets: &[f64], allocation: &[Alloc]) -> f64 {
    profile.iter().zip(budgets).zip(allocation).map(|((v, b), x)| v.value(x).min(*b)).sum()
}

pub fn optimal_effective_welfare(profile: &[Valuation], budgets: &[f64], space: &OutcomeSpace) -> Result<(f64, Vec<Alloc>)> {
    validate_budgets(budgets, profile.len())?;
    crate::model::optimal_welfare(&capped_profile(profile, budgets), space)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetedUtility {
    Valid(f64),
    /// payment above budget; worse than any valid outcome
    Invalid,
}

impl BudgetedUtility {
    pub fn valid(&self) -> Option<f64> {
        match *self {
            BudgetedUtility::Valid(u) => Some(u),
            BudgetedUtility::Invalid => None,
        }
    }
}

pub fn budgeted_utility(v_i: &Valuation, outcome: &Outcome, i: usize, budget: f64) -> BudgetedUtility {
    let p = outcome.payments[i];
    if p > budget + TOL {
        BudgetedUtility::Invalid
    } else {
        BudgetedUtility::Valid(v_i.value(&outcome.alloc[i]) - p)
    }
}

/// Extremal social welfare over correlated equilibria of the budgeted game.
/// Profiles where someone pays above budget get probability zero, and a
/// deviation is only available if it never breaks the deviator's budget.
pub fn budget_ce(gm: &GridMechanism, profile: &[Valuation], budgets: &[f64], sense: Extremum) -> Result<EquilibriumDistribution> {
    validate_budgets(budgets, gm.n())?;
    if gm.mech.is_sequential() {
        return Err(Error::Refused("budgets are not supported for sequential compositions".into()));
    }
    let table = to_normal_form(gm, profile)?;
    ce_solve(&table, &CeRequest { sense, refinement: Refinement::None, coarse: false, budgets: Some(budgets) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveBoundReport {
    pub mechanism: String,
    pub lambda: f64,
    pub mu: f64,
    pub bound: f64,
    pub optimal_effective_welfare: f64,
    /// minimum social welfare over budget-constrained correlated equilibria
    pub min_ce_welfare: Option<f64>,
    pub ratio: Option<f64>,
    pub passes: bool,
    /// set when the conservativeness audit fails and certification is refused
    pub refused: Option<ConservativeWitness>,
}

/// Capped valuations must stay in the class the mechanism is smooth for.
fn check_capping_closure(v: &Valuation, budget: f64) -> Result<()> {
    match v {
        Valuation::Xos { rep } => {
            let sizes: Vec<usize> = rep.components[0].values.iter().map(|c| c.len()).collect();
            let space = Space::numbered(&sizes);
            let capped = cap_xos(rep, &space, budget)?;
            let table = cap_valuation(&TabulatedValuation::from_fn(space, |x| rep.eval(x))?, budget)?;
            verify_xos(&capped, &table).map_err(|w| Error::Precondition(format!("capped XOS check failed: {w:?}")))?;
            if !is_capping_of(&capped, rep) {
                return Err(Error::Precondition("capped components are not cappings of the originals".into()));
            }
            Ok(())
        }
        Valuation::Capped { .. } => Err(Error::Validation("pass uncapped valuations with a budget profile".into())),
        other => Valuation::Capped { inner: Box::new(other.clone()), budget }.validate(),
    }
}

pub fn certify_effective_bound(
    gm: &GridMechanism,
    profile: &[Valuation],
    budgets: &[f64],
    lambda: f64,
    mu: f64,
) -> Result<EffectiveBoundReport> {
    let n = gm.n();
    validate_budgets(budgets, n)?;
    if gm.mech.is_sequential() {
        return Err(Error::Refused(
            "sequential compositions are excluded: waiting for later rounds can exhaust a budget".into(),
        ));
    }
    for (v, &b) in profile.iter().zip(budgets) {
        if b.is_finite() {
            check_capping_closure(v, b)?;
        }
    }
    let capped = capped_profile(profile, budgets);
    let space = gm.mech.outcome_space()?;
    let (ew_opt, _) = crate::model::optimal_welfare(&capped, &space)?;
    let bound = poa_bound(lambda, mu);
    let mut report = EffectiveBoundReport {
        mechanism: gm.mech.kind(),
        lambda,
        mu,
        bound,
        optimal_effective_welfare: ew_opt,
        min_ce_welfare: None,
        ratio: None,
        passes: false,
        refused: None,
    };

    for i in 0..n {
        let actions: Vec<usize> = if gm.mech.deviation_uses_action() { (0..gm.grids[i].len()).collect() } else { vec![gm.withdraw[i]] };
        for a in actions {
            let dev = gm.mech.paper_deviation(&capped, i, &gm.grids[i][a])?;
            if let Some(w) = check_conservative(gm.mech.as_ref(), i, &dev, &capped[i])? {
                report.refused = Some(w);
                return Ok(report);
            }
        }
    }

    let ce = budget_ce(gm, profile, budgets, Extremum::Min)?;
    report.min_ce_welfare = Some(ce.welfare);
    if ew_opt <= 0.0 {
        report.ratio = Some(1.0);
        report.passes = true;
    } else {
        report.ratio = Some(ce.welfare / ew_opt);
        report.passes = ce.welfare >= bound * ew_opt - 1e-6;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{SingleItem, SingleItemFormat};
    use crate::model::uniform_grid;
    use crate::smoothness::E_INV;
    use std::sync::Arc;

    fn fp(points: usize) -> GridMechanism {
        GridMechanism::scalar(Arc::new(SingleItem::new(2, SingleItemFormat::FirstPrice)), &uniform_grid(1.0, points)).unwrap()
    }

    #[test]
    fn effective_optimum_prefers_the_unconstrained_bidder() {
        let profile = vec![Valuation::item(10.0), Valuation::item(1.0)];
        let space = fp(3).mech.outcome_space().unwrap();
        let (ew, x) = optimal_effective_welfare(&profile, &[0.5, f64::INFINITY], &space).unwrap();
        assert_eq!(ew, 1.0);
        assert_eq!(x[1], vec![1.0]);
        let (w, _) = optimal_effective_welfare(&profile, &[f64::INFINITY; 2], &space).unwrap();
        assert_eq!(w, 10.0);
        let (z, _) = optimal_effective_welfare(&profile, &[0.0, 0.0], &space).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn budget_sentinel() {
        let o = Outcome { alloc: vec![vec![1.0]], payments: vec![0.4] };
        let v = Valuation::item(1.0);
        assert_eq!(budgeted_utility(&v, &o, 0, 0.5), BudgetedUtility::Valid(0.6));
        let o = Outcome { alloc: vec![vec![1.0]], payments: vec![0.6] };
        assert_eq!(budgeted_utility(&v, &o, 0, 0.5), BudgetedUtility::Invalid);
        assert!(budgeted_utility(&v, &o, 0, f64::INFINITY).valid().is_some());
    }

    #[test]
    fn first_price_with_a_budget() {
        let profile = vec![Valuation::item(1.0), Valuation::item(0.6)];
        let r = certify_effective_bound(&fp(11), &profile, &[0.4, f64::INFINITY], 1.0 - E_INV, 1.0).unwrap();
        assert!((r.optimal_effective_welfare - 0.6).abs() < 1e-12);
        assert!(r.passes, "{r:?}");
        let free = certify_effective_bound(&fp(11), &profile, &[f64::INFINITY; 2], 1.0 - E_INV, 1.0).unwrap();
        let table = to_normal_form(&fp(11), &profile).unwrap();
        let plain = crate::equilibrium::ce_extreme_welfare(&table, Extremum::Min, Refinement::None).unwrap();
        assert!((free.min_ce_welfare.unwrap() - plain.welfare).abs() < 1e-9);
        assert_eq!(free.passes, plain.welfare >= (1.0 - E_INV) - 1e-6);
    }

    #[test]
    fn sequential_is_refused() {
        let seq = crate::composition::compose_sequential(&[fp(2), fp(2)], crate::composition::InfoPolicy::None).unwrap();
        let ud = Valuation::UnitDemand { parts: vec![Valuation::item(1.0), Valuation::item(0.5)] };
        let err = certify_effective_bound(&seq, &[ud.clone(), ud], &[0.5, 0.5], 0.3, 2.0).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }
}
