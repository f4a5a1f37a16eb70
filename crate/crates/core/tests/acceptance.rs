//! Acceptance run: one line per criterion, non-zero exit if any fails.

use smoothmech::budgets::certify_effective_bound;
use smoothmech::catalog::{hybrid_claim, random_profiles, Claim, GridSpec, MechanismSpec};
use smoothmech::composition::{compose_sequential, compose_simultaneous, InfoPolicy};
use smoothmech::corpus::{self, Generator};
use smoothmech::equilibrium::{
    bayes_best_response, bluffing_utility, ce_extreme_welfare, interim_utility, swap_regret_learn, table_with_wtp, BayesianGame,
    Extremum, PlayerType, Refinement,
};
use smoothmech::mechanisms::{PaymentStyle, PerClickDeviation, Ranking};
use smoothmech::model::{to_normal_form, GridMechanism};
use smoothmech::smoothness::{certify, certify_weak, fit_lambda, weak_poa_bound, DeviationSource, SmoothnessCertificate};
use smoothmech::valuations::{audit_hierarchy, Valuation};
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

const FP: f64 = 0.63212;
const LP_TOL: f64 = 1e-6;

fn grid(max: f64, points: usize) -> GridSpec {
    GridSpec { max, points }
}

fn fp(points: usize) -> MechanismSpec {
    MechanismSpec::FirstPrice { n: 2, grid: grid(1.0, points) }
}

fn certify_claim(gm: &GridMechanism, profiles: &[Vec<Valuation>], claim: Claim) -> Result<SmoothnessCertificate, String> {
    let src = DeviationSource::Paper;
    match claim {
        Claim::Smooth { lambda, mu } => certify(gm, profiles, lambda, mu, &src),
        Claim::Weak { lambda, mu1, mu2 } => certify_weak(gm, profiles, lambda, mu1, mu2, &src),
    }
    .map_err(|e| e.to_string())
}

fn catalog_cert(spec: &MechanismSpec, seed: u64) -> Result<SmoothnessCertificate, String> {
    let gm = spec.build().map_err(|e| e.to_string())?;
    certify_claim(&gm, &random_profiles(spec, seed, 20), spec.claim())
}

fn min_ce(gm: &GridMechanism, profile: &[Valuation], refinement: Refinement) -> Result<(f64, f64), String> {
    let table = match refinement {
        Refinement::NoOverbidding => table_with_wtp(gm, profile),
        Refinement::None => to_normal_form(gm, profile),
    }
    .map_err(|e| e.to_string())?;
    let d = ce_extreme_welfare(&table, Extremum::Min, refinement).map_err(|e| e.to_string())?;
    let opt = gm.mech.optimal_welfare(profile).map_err(|e| e.to_string())?.0;
    Ok((d.welfare, opt))
}

fn item_pairs() -> Vec<Vec<Valuation>> {
    let vals = [0.2, 0.5, 0.8, 1.0];
    vals.iter().flat_map(|&a| vals.iter().map(move |&b| vec![Valuation::item(a), Valuation::item(b)])).collect()
}

fn single_item_certificates() -> Outcome {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let mut specs = vec![fp(11), MechanismSpec::AllPay { n: 2, grid: grid(1.0, 11) }, MechanismSpec::SecondPrice { n: 2, grid: grid(1.0, 11) }];
    for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
        specs.push(MechanismSpec::Hybrid { n: 2, gamma, grid: grid(1.0, 11) });
    }
    for (k, spec) in specs.iter().enumerate() {
        let c = catalog_cert(spec, 100 + k as u64)?;
        ok &= c.margin >= -1e-7 && c.valuation_profiles >= 20;
        worst = worst.min(c.margin);
    }
    Ok((ok, format!("{} certificates, 20 profiles each, worst margin {worst:.3e}", specs.len())))
}

fn lp_bounds() -> Outcome {
    let mut ok = true;
    let mut ratios = [f64::INFINITY; 3];
    let cases = [
        (fp(11), FP, Refinement::None),
        (MechanismSpec::AllPay { n: 2, grid: grid(1.0, 11) }, 0.5, Refinement::None),
        (MechanismSpec::SecondPrice { n: 2, grid: grid(1.0, 11) }, 0.5, Refinement::NoOverbidding),
    ];
    for (k, (spec, bound, refinement)) in cases.iter().enumerate() {
        let gm = spec.build().map_err(|e| e.to_string())?;
        for p in item_pairs() {
            let (w, opt) = min_ce(&gm, &p, *refinement)?;
            ok &= w >= bound * opt - LP_TOL;
            ratios[k] = ratios[k].min(w / opt);
        }
    }
    Ok((
        ok,
        format!(
            "worst min-CE/OPT: first price {:.4} (PoA {:.3}), all-pay {:.4} (PoA {:.3}), second price no-overbidding {:.4} (PoA {:.3})",
            ratios[0],
            1.0 / ratios[0],
            ratios[1],
            1.0 / ratios[1],
            ratios[2],
            1.0 / ratios[2]
        ),
    ))
}

fn composition() -> Outcome {
    let build = |s: &MechanismSpec| s.build().map_err(|e| e.to_string());
    let lambda = 1.0 - (-1f64).exp();
    // simultaneous, XOS bidders
    let sim_cert = compose_simultaneous(&[build(&fp(5))?, build(&fp(4))?]).map_err(|e| e.to_string())?;
    let xos = corpus::generate(Generator::XosRandom, 5, 20, 2, 2).map_err(|e| e.to_string())?;
    let c = certify(&sim_cert, &xos, lambda, 1.0, &DeviationSource::Paper).map_err(|e| e.to_string())?;
    let mut ok = c.passes && c.conservative;
    let sim = compose_simultaneous(&[build(&fp(4))?, build(&fp(4))?]).map_err(|e| e.to_string())?;
    let mut sim_ratio = f64::INFINITY;
    for p in &xos[..4] {
        let (w, opt) = min_ce(&sim, p, Refinement::None)?;
        ok &= w >= FP * opt - LP_TOL;
        sim_ratio = sim_ratio.min(w / opt);
    }
    // sequential, unit-demand bidders
    let ud = corpus::generate(Generator::UnitDemand, 9, 20, 2, 2).map_err(|e| e.to_string())?;
    let low = |k: usize| build(&MechanismSpec::FirstPrice { n: 2, grid: grid(0.5, k) });
    let mut r = corpus::rng(9);
    let grid_profiles: Vec<Vec<Valuation>> = (0..4)
        .map(|_| {
            (0..2)
                .map(|_| Valuation::UnitDemand { parts: (0..2).map(|_| Valuation::item(corpus::draw(&mut r, 0.5, 1.0))).collect() })
                .collect()
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut seq_ratio = f64::INFINITY;
    for policy in [InfoPolicy::FullBids, InfoPolicy::OwnOutcomeOnly, InfoPolicy::None] {
        let certified = compose_sequential(&[build(&fp(3))?, build(&fp(2))?], policy).map_err(|e| e.to_string())?;
        let c = certify(&certified, &ud, lambda, 2.0, &DeviationSource::Paper).map_err(|e| e.to_string())?;
        let mut v = vec![c.passes];
        let seq = compose_sequential(&[low(3)?, low(2)?], policy).map_err(|e| e.to_string())?;
        for p in &grid_profiles {
            let (w, opt) = min_ce(&seq, p, Refinement::None)?;
            v.push(w >= 0.5 * FP * opt - LP_TOL);
            seq_ratio = seq_ratio.min(w / opt);
        }
        verdicts.push(v);
    }
    let agree = verdicts.windows(2).all(|w| w[0] == w[1]);
    ok &= agree && verdicts.iter().flatten().all(|&b| b);
    Ok((
        ok,
        format!("simultaneous worst min-CE/OPT {sim_ratio:.4}; sequential worst {seq_ratio:.4} (bound 0.316); policy verdicts agree: {agree}"),
    ))
}

fn hierarchy() -> Outcome {
    let tables = corpus::hierarchy_corpus(4, 120).map_err(|e| e.to_string())?;
    let mut ok = tables.len() >= 100;
    let mut t = [0usize; 5];
    for v in &tables {
        let a = audit_hierarchy(v, 0.7).map_err(|e| e.to_string())?;
        ok &= a.passes();
        t[0] += usize::from(a.beta_agree);
        t[1] += usize::from(a.submodular_exact == Some(true));
        t[2] += usize::from(a.subadditive_within_harmonic == Some(true));
        t[3] += usize::from(a.diminishing_agree == Some(true));
        t[4] += usize::from(a.cap_exact == Some(true));
    }
    ok &= t[1] > 0 && t[2] > 0 && t[3] > 0 && t[4] > 0;
    Ok((
        ok,
        format!(
            "{} tables: β agree {}, submodular β=1 {}, subadditive β ≤ H_m {}, diminishing ⇔ lattice {}, cap exact {}",
            tables.len(),
            t[0],
            t[1],
            t[2],
            t[3],
            t[4]
        ),
    ))
}

fn catalog() -> Outcome {
    use MechanismSpec as M;
    let greedy = |payment, beta, sets: Vec<usize>, approx| M::Greedy {
        n: 2,
        items: 2,
        ranking: Ranking::Value,
        payment,
        beta,
        sets: vec![sets; 2],
        approx,
        grid: grid(1.0, 6),
    };
    let ctr = vec![vec![0.9, 0.5], vec![0.7, 0.6]];
    // (spec, conservative claimed)
    let specs = vec![
        (greedy(PaymentStyle::PayYourBid, 1.0, vec![1, 2], 1.0), true),
        (greedy(PaymentStyle::PayYourBid, 1.0, vec![1, 2, 3], 2.0), true),
        (greedy(PaymentStyle::PayYourBid, 0.5, vec![1, 2, 3], 2.0), true),
        (greedy(PaymentStyle::Threshold, 1.0, vec![1, 2, 3], 2.0), false),
        (M::PositionImpression { n: 3, slots: 2, payment: PaymentStyle::PayYourBid, grid: grid(1.0, 6) }, true),
        (M::PositionImpression { n: 3, slots: 2, payment: PaymentStyle::Threshold, grid: grid(1.0, 6) }, false),
        (M::PerClick { ctr: ctr.clone(), payment: PaymentStyle::PayYourBid, deviation: PerClickDeviation::Uniform, grid: grid(1.0, 11) }, false),
        (M::PerClick { ctr, payment: PaymentStyle::PayYourBid, deviation: PerClickDeviation::Reciprocal, grid: grid(1.0, 11) }, false),
        (
            M::PerClick {
                ctr: vec![vec![1.0, 0.6], vec![1.0, 0.6]],
                payment: PaymentStyle::Threshold,
                deviation: PerClickDeviation::Reciprocal,
                grid: grid(1.0, 11),
            },
            false,
        ),
        (M::PublicProject { n: 2, projects: 2, grid: grid(1.0, 6) }, false),
        (M::PublicProject { n: 3, projects: 2, grid: grid(1.0, 4) }, false),
        (M::Bandwidth { n: 2, capacity: 1.0, grid: grid(1.0, 11) }, true),
        (M::MultiUnit { n: 2, units: 2, payment: PaymentStyle::PayYourBid, grid: grid(1.0, 6) }, true),
        (M::UniformPrice { n: 2, units: 2, grid: grid(1.0, 6) }, true),
    ];
    let mut ok = true;
    let mut failed = Vec::new();
    let mut worst = f64::INFINITY;
    for (spec, conservative) in &specs {
        let c = catalog_cert(spec, 17)?;
        let pass = c.passes && (!conservative || c.conservative);
        if !pass {
            failed.push(c.mechanism.clone());
        }
        ok &= pass;
        worst = worst.min(c.margin);
    }
    let bw = match (M::Bandwidth { n: 2, capacity: 1.0, grid: grid(1.0, 11) }).claim() {
        Claim::Smooth { lambda, .. } => lambda,
        Claim::Weak { lambda, .. } => lambda,
    };
    ok &= (bw - 0.267949).abs() <= 1e-6;
    Ok((ok, format!("{} mechanisms, worst margin {worst:.3e}, bandwidth λ {bw:.6}, failures {failed:?}", specs.len())))
}

fn bayes() -> Outcome {
    let gm = fp(6).build().map_err(|e| e.to_string())?;
    let types = vec![
        vec![PlayerType { prob: 0.5, valuation: Valuation::item(0.5) }, PlayerType { prob: 0.5, valuation: Valuation::item(1.0) }];
        2
    ];
    let bg = BayesianGame::new(gm, types).map_err(|e| e.to_string())?;
    let d = bayes_best_response(&bg, 2000, 0.5, 3).map_err(|e| e.to_string())?;
    let s = d.strategies.clone().ok_or("no strategies")?;
    let eps = d.incentive_residual;
    let eopt = bg.expected_opt().map_err(|e| e.to_string())?;
    let mut ok = eps <= 0.02 && d.welfare >= FP * 0.875 - 2.0 * eps && (eopt - 0.875).abs() < 1e-12;
    let mut max_gain = f64::NEG_INFINITY;
    for i in 0..2 {
        for t in 0..2 {
            let eq = interim_utility(&bg, &s, i, t).map_err(|e| e.to_string())?;
            let bl = bluffing_utility(&bg, &s, i, t, &DeviationSource::Paper).map_err(|e| e.to_string())?;
            max_gain = max_gain.max(bl - eq);
        }
    }
    ok &= max_gain <= eps + 1e-9;
    Ok((ok, format!("ε {eps:.2e}, welfare {:.4} vs {:.4}, max bluffing gain {max_gain:.3e}", d.welfare, FP * 0.875)))
}

fn learning() -> Outcome {
    let gm = fp(6).build().map_err(|e| e.to_string())?;
    let t = to_normal_form(&gm, &[Valuation::item(1.0), Valuation::item(0.6)]).map_err(|e| e.to_string())?;
    let d = swap_regret_learn(&t, 200_000, 7).map_err(|e| e.to_string())?;
    let lp = ce_extreme_welfare(&t, Extremum::Min, Refinement::None).map_err(|e| e.to_string())?;
    let total: f64 = d.swap_regret.iter().sum();
    let ok = d.swap_regret.iter().all(|r| *r <= 0.02) && d.welfare >= lp.welfare - total - 1e-6;
    Ok((ok, format!("swap regrets {:?}, welfare {:.4}, min-CE LP {:.4}", d.swap_regret.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(), d.welfare, lp.welfare)))
}

fn budgets() -> Outcome {
    let lambda = 1.0 - (-1f64).exp();
    let gm = fp(11).build().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for p in item_pairs() {
        let r = certify_effective_bound(&gm, &p, &[0.4, f64::INFINITY], lambda, 1.0).map_err(|e| e.to_string())?;
        let w = r.min_ce_welfare.ok_or("audit refused first price")?;
        ok &= w >= FP * r.optimal_effective_welfare - LP_TOL;
        worst = worst.min(w / r.optimal_effective_welfare);
    }
    let fp4 = fp(4).build().map_err(|e| e.to_string())?;
    let sim = compose_simultaneous(&[fp4.clone(), fp4.clone()]).map_err(|e| e.to_string())?;
    for p in corpus::generate(Generator::XosRandom, 21, 5, 2, 2).map_err(|e| e.to_string())? {
        let r = certify_effective_bound(&sim, &p, &[0.8, f64::INFINITY], lambda, 1.0).map_err(|e| e.to_string())?;
        let w = r.min_ce_welfare.ok_or("audit refused the composition")?;
        ok &= w >= FP * r.optimal_effective_welfare - LP_TOL;
        worst = worst.min(w / r.optimal_effective_welfare);
    }
    let seq = compose_sequential(&[fp4.clone(), fp4], InfoPolicy::None).map_err(|e| e.to_string())?;
    let ud = Valuation::UnitDemand { parts: vec![Valuation::item(1.0), Valuation::item(0.5)] };
    let refused = matches!(
        certify_effective_bound(&seq, &[ud.clone(), ud], &[0.5, 0.5], lambda, 2.0),
        Err(smoothmech::Error::Refused(_))
    );
    ok &= refused;
    Ok((ok, format!("worst min-CE welfare / EW* {worst:.4}, sequential refused: {refused}")))
}

fn hybrid_sweep() -> Outcome {
    let expected = [(0.0, 0.5, 1e-9), (0.5, 0.45286, 1e-4), (1.0, FP, 1e-6)];
    let mut ok = true;
    let mut bounds = Vec::new();
    for (k, (gamma, want, tol)) in expected.iter().enumerate() {
        let Claim::Weak { lambda, mu1, mu2 } = hybrid_claim(*gamma) else { return Err("hybrid claim is not weak".into()) };
        let b = weak_poa_bound(lambda, mu1, mu2);
        let c = catalog_cert(&MechanismSpec::Hybrid { n: 2, gamma: *gamma, grid: grid(1.0, 11) }, 200 + k as u64)?;
        ok &= (b - want).abs() <= *tol && c.passes;
        bounds.push(format!("γ={gamma}: {b:.5}"));
    }
    Ok((ok, bounds.join(", ")))
}

fn fitted_lambda() -> Outcome {
    let mut ok = true;
    let mut fits = Vec::new();
    for (name, spec, lambda) in [("first price", fp(11), 1.0 - (-1f64).exp()), ("all-pay", MechanismSpec::AllPay { n: 2, grid: grid(1.0, 11) }, 0.5)] {
        let gm = spec.build().map_err(|e| e.to_string())?;
        let mut lo = f64::INFINITY;
        for p in item_pairs() {
            lo = lo.min(fit_lambda(&gm, &p, 1.0).map_err(|e| e.to_string())?);
        }
        ok &= lo >= lambda - 0.1;
        fits.push(format!("{name} min fitted λ {lo:.4} (target {lambda:.4})"));
    }
    Ok((ok, fits.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("single-item certificates", single_item_certificates),
        ("exact LP efficiency bounds", lp_bounds),
        ("composition", composition),
        ("valuation hierarchy", hierarchy),
        ("applications catalog", catalog),
        ("Bayesian extension", bayes),
        ("swap-regret learning", learning),
        ("budgets", budgets),
        ("hybrid sweep", hybrid_sweep),
        ("fitted λ", fitted_lambda),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!("{} {:>2} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, k + 1, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
