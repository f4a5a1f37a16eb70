use proptest::prelude::*;
use smoothmech::budgets::{budget_ce, certify_effective_bound, effective_welfare};
use smoothmech::catalog::{random_profiles, Claim, GridSpec, MechanismSpec};
use smoothmech::composition::compose_simultaneous;
use smoothmech::corpus::{self, Generator};
use smoothmech::equilibrium::{ce_extreme_welfare, swap_regret, table_with_wtp, Extremum, Refinement};
use smoothmech::mechanisms::{wtp_table, PaymentStyle};
use smoothmech::model::{social_welfare, to_normal_form, utility};
use smoothmech::smoothness::{certify, certify_weak, fit_lambda, poa_bound, weak_poa_bound, DeviationSource};
use smoothmech::valuations::{audit_hierarchy, Valuation};

fn grid(max: f64, points: usize) -> GridSpec {
    GridSpec { max, points }
}

fn single(kind: usize, n: usize, points: usize) -> MechanismSpec {
    let grid = grid(1.0, points);
    match kind {
        0 => MechanismSpec::FirstPrice { n, grid },
        1 => MechanismSpec::AllPay { n, grid },
        2 => MechanismSpec::SecondPrice { n, grid },
        _ => MechanismSpec::Hybrid { n, gamma: 0.5, grid },
    }
}

/// values on the 0.1 grid, at least one positive
fn grid_values(n: usize) -> impl Strategy<Value = Vec<Valuation>> {
    prop::collection::vec(0usize..=10, n)
        .prop_filter("someone values the item", |v| v.iter().any(|&x| x > 0))
        .prop_map(|v| v.into_iter().map(|x| Valuation::item(x as f64 / 10.0)).collect())
}

/// values of at least two grid steps, so the grid resolves the deviation bids
fn resolved_values(n: usize) -> impl Strategy<Value = Vec<Valuation>> {
    prop::collection::vec(2usize..=10, n).prop_map(|v| v.into_iter().map(|x| Valuation::item(x as f64 / 10.0)).collect())
}

fn catalog_specs() -> Vec<MechanismSpec> {
    vec![
        single(0, 2, 6),
        single(1, 3, 4),
        single(2, 2, 6),
        single(3, 2, 6),
        MechanismSpec::PositionImpression { n: 3, slots: 2, payment: PaymentStyle::PayYourBid, grid: grid(1.0, 4) },
        MechanismSpec::PositionImpression { n: 3, slots: 2, payment: PaymentStyle::Threshold, grid: grid(1.0, 4) },
        MechanismSpec::PublicProject { n: 2, projects: 2, grid: grid(1.0, 4) },
        MechanismSpec::Bandwidth { n: 2, capacity: 1.0, grid: grid(1.0, 6) },
        MechanismSpec::MultiUnit { n: 2, units: 2, payment: PaymentStyle::PayYourBid, grid: grid(1.0, 4) },
        MechanismSpec::UniformPrice { n: 2, units: 2, grid: grid(1.0, 4) },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn outcomes_are_quasi_linear_and_below_the_optimum(k in 0usize..10, seed in 0u64..1000) {
        let spec = &catalog_specs()[k];
        let gm = spec.build().unwrap();
        let profile = random_profiles(spec, seed, 1).remove(0);
        let (opt, _) = gm.mech.optimal_welfare(&profile).unwrap();
        for p in 0..gm.n_profiles() as usize {
            let idx = gm.profile(p);
            let o = gm.outcome_at(&idx);
            let sw = social_welfare(&profile, &o);
            let u: f64 = (0..gm.n()).map(|i| utility(&profile[i], &o, i).unwrap()).sum();
            let pay: f64 = o.payments.iter().sum();
            prop_assert!((sw - u - pay).abs() < 1e-9);
            prop_assert!(sw <= opt + 1e-9);
            prop_assert!(o.payments.iter().all(|&q| q >= -1e-12));
            for i in 0..gm.n() {
                if idx[i] == gm.withdraw[i] {
                    prop_assert!(o.payments[i].abs() < 1e-12);
                }
            }
        }
        prop_assert_eq!(to_normal_form(&gm, &profile).unwrap().values, to_normal_form(&gm, &profile).unwrap().values);
    }

    #[test]
    fn willingness_to_pay_covers_payments(k in 0usize..10) {
        let gm = catalog_specs()[k].build().unwrap();
        let wtp = wtp_table(&gm).unwrap();
        let n = gm.n();
        for p in 0..gm.n_profiles() as usize {
            let o = gm.outcome_at(&gm.profile(p));
            for i in 0..n {
                prop_assert!(wtp[p * n + i] >= o.payments[i] - 1e-9);
            }
        }
    }

    #[test]
    fn hierarchy_audits_hold(seed in 0u64..10_000, budget in 0.05f64..2.0) {
        for v in corpus::hierarchy_corpus(seed, 5).unwrap() {
            let a = audit_hierarchy(&v, budget).unwrap();
            prop_assert!(a.passes(), "{:?}", a);
        }
    }

    #[test]
    fn ce_solutions_are_distributions_with_no_incentive_gap(kind in 0usize..3, profile in grid_values(2)) {
        let gm = single(kind, 2, 6).build().unwrap();
        let t = to_normal_form(&gm, &profile).unwrap();
        let (opt, _) = gm.mech.optimal_welfare(&profile).unwrap();
        let lo = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        let hi = ce_extreme_welfare(&t, Extremum::Max, Refinement::None).unwrap();
        for d in [&lo, &hi] {
            prop_assert!((d.total_probability() - 1.0).abs() < 1e-7);
            prop_assert!(d.probs.iter().all(|&q| q >= -1e-9));
            prop_assert!(d.incentive_residual <= 1e-7);
            prop_assert!(swap_regret(&t, &d.probs).iter().all(|&r| r <= 1e-6));
        }
        prop_assert!(lo.welfare <= hi.welfare + 1e-7);
        prop_assert!(hi.welfare <= opt + 1e-7);
    }

    /// certificate at (λ, μ) ⇒ min-CE welfare ≥ λ/max(1, μ)·OPT
    #[test]
    fn smoothness_bounds_correlated_equilibria(kind in 0usize..2, profile in resolved_values(2)) {
        let spec = single(kind, 2, 11);
        let gm = spec.build().unwrap();
        let Claim::Smooth { lambda, mu } = spec.claim() else { unreachable!() };
        let cert = certify(&gm, std::slice::from_ref(&profile), lambda, mu, &DeviationSource::Paper).unwrap();
        prop_assert!(cert.passes);
        let (opt, _) = gm.mech.optimal_welfare(&profile).unwrap();
        let d = ce_extreme_welfare(&to_normal_form(&gm, &profile).unwrap(), Extremum::Min, Refinement::None).unwrap();
        prop_assert!(d.welfare >= poa_bound(lambda, mu) * opt - 1e-6, "{} vs {}", d.welfare, opt);
    }

    /// the grid game's own smoothness (mixed grid deviations) bounds its equilibria everywhere
    #[test]
    fn grid_smoothness_bounds_correlated_equilibria(kind in 0usize..2, profile in grid_values(2)) {
        let gm = single(kind, 2, 11).build().unwrap();
        let fit = fit_lambda(&gm, &profile, 1.0).unwrap();
        let (opt, _) = gm.mech.optimal_welfare(&profile).unwrap();
        let d = ce_extreme_welfare(&to_normal_form(&gm, &profile).unwrap(), Extremum::Min, Refinement::None).unwrap();
        prop_assert!(d.welfare >= fit * opt - 1e-6);
    }

    #[test]
    fn weak_smoothness_bounds_refined_equilibria(profile in grid_values(2)) {
        let gm = single(2, 2, 11).build().unwrap();
        let cert = certify_weak(&gm, std::slice::from_ref(&profile), 1.0, 0.0, 1.0, &DeviationSource::Paper).unwrap();
        prop_assert!(cert.passes);
        let (opt, _) = gm.mech.optimal_welfare(&profile).unwrap();
        let d = ce_extreme_welfare(&table_with_wtp(&gm, &profile).unwrap(), Extremum::Min, Refinement::NoOverbidding).unwrap();
        prop_assert!(d.welfare >= weak_poa_bound(1.0, 0.0, 1.0) * opt - 1e-6);
    }

    #[test]
    fn fitted_lambda_reaches_the_certified_one(kind in 0usize..2, profile in resolved_values(2)) {
        let spec = single(kind, 2, 11);
        let gm = spec.build().unwrap();
        let Claim::Smooth { lambda, mu } = spec.claim() else { unreachable!() };
        let cert = certify(&gm, std::slice::from_ref(&profile), lambda, mu, &DeviationSource::Paper).unwrap();
        let fit = fit_lambda(&gm, &profile, mu).unwrap();
        prop_assert!(!cert.passes || fit >= lambda - 1e-6, "fitted {} certified {}", fit, lambda);
    }

    #[test]
    fn unlimited_budgets_change_nothing(kind in 0usize..2, profile in grid_values(2)) {
        let gm = single(kind, 2, 6).build().unwrap();
        let t = to_normal_form(&gm, &profile).unwrap();
        let free = budget_ce(&gm, &profile, &[f64::INFINITY; 2], Extremum::Min).unwrap();
        let plain = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        prop_assert!((free.welfare - plain.welfare).abs() < 1e-7);
    }

    #[test]
    fn effective_welfare_is_below_welfare(seed in 0u64..1000, b0 in 0.0f64..1.5, b1 in 0.0f64..1.5) {
        let gm = compose_simultaneous(&[single(0, 2, 3).build().unwrap(), single(0, 2, 3).build().unwrap()]).unwrap();
        let profile = corpus::generate(Generator::XosRandom, seed, 1, 2, 2).unwrap().remove(0);
        for p in 0..gm.n_profiles() as usize {
            let o = gm.outcome_at(&gm.profile(p));
            prop_assert!(effective_welfare(&profile, &[b0, b1], &o.alloc) <= social_welfare(&profile, &o) + 1e-12);
        }
    }

    /// conservative audit passes ⇒ budget-CE social welfare ≥ bound · EW*
    #[test]
    fn budget_bound_holds_where_conservative(profile in resolved_values(2), b in 2usize..=10) {
        let gm = single(0, 2, 11).build().unwrap();
        let Claim::Smooth { lambda, mu } = single(0, 2, 11).claim() else { unreachable!() };
        let r = certify_effective_bound(&gm, &profile, &[b as f64 / 10.0, f64::INFINITY], lambda, mu).unwrap();
        prop_assert!(r.refused.is_some() || r.passes, "{:?}", r);
    }
}

#[test]
fn hybrid_endpoints_match_first_and_second_price() {
    let fp = single(0, 2, 6).build().unwrap();
    let sp = single(2, 2, 6).build().unwrap();
    for (gamma, other) in [(1.0, &fp), (0.0, &sp)] {
        let h = MechanismSpec::Hybrid { n: 2, gamma, grid: grid(1.0, 6) }.build().unwrap();
        for p in 0..h.n_profiles() as usize {
            let idx = h.profile(p);
            let (a, b) = (h.outcome_at(&idx), other.outcome_at(&idx));
            assert_eq!(a.alloc, b.alloc);
            for (x, y) in a.payments.iter().zip(&b.payments) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn position_threshold_payments_are_below_bids() {
    let spec = |payment| MechanismSpec::PositionImpression { n: 3, slots: 2, payment, grid: grid(1.0, 5) };
    let pyb = spec(PaymentStyle::PayYourBid).build().unwrap();
    let thr = spec(PaymentStyle::Threshold).build().unwrap();
    for p in 0..pyb.n_profiles() as usize {
        let idx = pyb.profile(p);
        let (a, b) = (pyb.outcome_at(&idx), thr.outcome_at(&idx));
        for (x, y) in b.payments.iter().zip(&a.payments) {
            assert!(*x <= y + 1e-12);
        }
    }
}

/// A value of one grid step: the certificate's deviation bids fall between
/// grid points, and the grid game has a zero-welfare equilibrium.
#[test]
fn values_at_the_grid_step_escape_the_certificate() {
    let spec = single(0, 2, 11);
    let gm = spec.build().unwrap();
    let profile = vec![Valuation::item(0.1), Valuation::item(0.1)];
    let cert = certify(&gm, std::slice::from_ref(&profile), 1.0 - (-1f64).exp(), 1.0, &DeviationSource::Paper).unwrap();
    assert!(cert.passes);
    let d = ce_extreme_welfare(&to_normal_form(&gm, &profile).unwrap(), Extremum::Min, Refinement::None).unwrap();
    assert!(d.welfare.abs() < 1e-9);
    assert!(fit_lambda(&gm, &profile, 1.0).unwrap().abs() < 1e-9);
    // all-pay against a zero-value opponent: the best grid bid pays one step
    let ap = single(1, 2, 11).build().unwrap();
    let fit = fit_lambda(&ap, &[Valuation::item(0.0), Valuation::item(1.0)], 1.0).unwrap();
    assert!((fit - 0.45).abs() < 1e-9);
}
