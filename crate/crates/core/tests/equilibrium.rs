use smoothmech::composition::{compose_sequential, compose_simultaneous, InfoPolicy};
use smoothmech::corpus::{self, Generator};
use smoothmech::equilibrium::*;
use smoothmech::mechanisms::{SingleItem, SingleItemFormat};
use smoothmech::model::{to_normal_form, uniform_grid, GridMechanism};
use smoothmech::smoothness::{DeviationSource, E_INV};
use smoothmech::valuations::Valuation;
use std::sync::Arc;

const FP_BOUND: f64 = 1.0 - E_INV;

fn game(format: SingleItemFormat, points: usize) -> GridMechanism {
    GridMechanism::scalar(Arc::new(SingleItem::new(2, format)), &uniform_grid(1.0, points)).unwrap()
}

fn profile() -> Vec<Valuation> {
    vec![Valuation::item(1.0), Valuation::item(0.6)]
}

#[test]
fn single_item_ce_bounds() {
    let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 11), &profile()).unwrap();
    let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
    println!("first price min CE {}", d.welfare);
    assert!(d.welfare >= FP_BOUND - 1e-6);
    assert!(verify_poa(&d, 1.0, FP_BOUND).passes);

    let t = to_normal_form(&game(SingleItemFormat::AllPay, 11), &profile()).unwrap();
    let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
    println!("all-pay min CE {}", d.welfare);
    assert!(d.welfare >= 0.5 - 1e-6);

    let t = table_with_wtp(&game(SingleItemFormat::SecondPrice, 11), &profile()).unwrap();
    let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::NoOverbidding).unwrap();
    println!("second price no-overbidding min CE {}", d.welfare);
    assert!(d.welfare >= 0.5 - 1e-6);
    let loose = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
    assert!(loose.welfare <= d.welfare + 1e-9);
}

#[test]
fn learning_approaches_the_ce_bound() {
    let t = to_normal_form(&game(SingleItemFormat::FirstPrice, 6), &profile()).unwrap();
    let d = swap_regret_learn(&t, 200_000, 7).unwrap();
    let lp = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
    println!("learned welfare {} regrets {:?} lp {}", d.welfare, d.swap_regret, lp.welfare);
    assert!(d.swap_regret.iter().all(|r| *r <= 0.02));
    assert!(d.welfare >= lp.welfare - d.swap_regret.iter().sum::<f64>() - 1e-6);
    assert!(d.welfare >= FP_BOUND - 0.05);
}

fn two_type_game() -> BayesianGame {
    let types = (0..2)
        .map(|_| {
            vec![
                PlayerType { prob: 0.5, valuation: Valuation::item(0.5) },
                PlayerType { prob: 0.5, valuation: Valuation::item(1.0) },
            ]
        })
        .collect();
    BayesianGame::new(game(SingleItemFormat::FirstPrice, 6), types).unwrap()
}

#[test]
fn bayes_nash_welfare_and_bluffing() {
    let bg = two_type_game();
    assert!((bg.expected_opt().unwrap() - 0.875).abs() < 1e-12);
    let d = bayes_best_response(&bg, 2000, 0.5, 1).unwrap();
    let eps = d.incentive_residual;
    println!("bayes eps {eps} welfare {}", d.welfare);
    assert!(eps <= 0.02);
    assert!(d.welfare >= FP_BOUND * 0.875 - 2.0 * eps);
    let s = d.strategies.unwrap();
    for i in 0..2 {
        for t in 0..2 {
            let eq = interim_utility(&bg, &s, i, t).unwrap();
            let bluff = bluffing_utility(&bg, &s, i, t, &DeviationSource::Paper).unwrap();
            println!("player {i} type {t}: eq {eq} bluff {bluff}");
            assert!(bluff <= eq + eps + 1e-9);
        }
    }
}

#[test]
fn composed_ce_bounds() {
    let sim = compose_simultaneous(&[game(SingleItemFormat::FirstPrice, 4), game(SingleItemFormat::FirstPrice, 4)]).unwrap();
    for prof in corpus::generate(Generator::XosRandom, 5, 3, 2, 2).unwrap() {
        let t = to_normal_form(&sim, &prof).unwrap();
        let opt = sim.mech.optimal_welfare(&prof).unwrap().0;
        let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
        println!("sim min CE {} opt {opt}", d.welfare);
        assert!(d.welfare >= FP_BOUND * opt - 1e-6);
    }
    // bid grids capped at the lowest value keep the deviation bids on the grid
    let low = |k: usize| GridMechanism::scalar(Arc::new(SingleItem::new(2, SingleItemFormat::FirstPrice)), &uniform_grid(0.5, k)).unwrap();
    let mut r = corpus::rng(9);
    let profiles: Vec<Vec<Valuation>> = (0..4)
        .map(|_| {
            (0..2)
                .map(|_| Valuation::UnitDemand { parts: (0..2).map(|_| Valuation::item(corpus::draw(&mut r, 0.5, 1.0))).collect() })
                .collect()
        })
        .collect();
    for policy in [InfoPolicy::FullBids, InfoPolicy::OwnOutcomeOnly, InfoPolicy::None] {
        let seq = compose_sequential(&[low(3), low(2)], policy).unwrap();
        for prof in &profiles {
            let t = to_normal_form(&seq, prof).unwrap();
            let opt = seq.mech.optimal_welfare(prof).unwrap().0;
            let d = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).unwrap();
            println!("{policy:?} seq min CE {} opt {opt}", d.welfare);
            assert!(d.welfare >= 0.5 * FP_BOUND * opt - 1e-6);
        }
    }
}

#[test]
fn every_value_pair_on_the_grid_solves() {
    for format in [SingleItemFormat::FirstPrice, SingleItemFormat::AllPay] {
        let gm = game(format, 11);
        for a in 0..=10 {
            for b in 0..=10 {
                let p = [Valuation::item(a as f64 / 10.0), Valuation::item(b as f64 / 10.0)];
                let t = to_normal_form(&gm, &p).unwrap();
                for sense in [Extremum::Min, Extremum::Max] {
                    let d = ce_extreme_welfare(&t, sense, Refinement::None).unwrap_or_else(|e| panic!("{format:?} ({a}, {b}) {sense:?}: {e}"));
                    assert!(d.incentive_residual <= 1e-7);
                }
            }
        }
    }
}
