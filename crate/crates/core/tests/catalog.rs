use smoothmech::catalog::{random_profiles, Claim, GridSpec, MechanismSpec};
use smoothmech::mechanisms::{PaymentStyle, PerClickDeviation, Ranking};
use smoothmech::smoothness::{certify, certify_weak, DeviationSource, SmoothnessCertificate};

fn run(spec: &MechanismSpec, seed: u64, count: usize) -> SmoothnessCertificate {
    let gm = spec.build().unwrap();
    let profiles = random_profiles(spec, seed, count);
    let src = DeviationSource::Paper;
    let cert = match spec.claim() {
        Claim::Smooth { lambda, mu } => certify(&gm, &profiles, lambda, mu, &src),
        Claim::Weak { lambda, mu1, mu2 } => certify_weak(&gm, &profiles, lambda, mu1, mu2, &src),
    }
    .unwrap();
    println!("{} margin {:.3e} conservative {} worst {:?}", cert.mechanism, cert.margin, cert.conservative, cert.worst_profile);
    cert
}

fn grid(max: f64, points: usize) -> GridSpec {
    GridSpec { max, points }
}

fn passes(spec: MechanismSpec, count: usize) {
    let cert = run(&spec, 17, count);
    assert!(cert.passes, "{spec:?}: margin {}", cert.margin);
}

#[test]
fn greedy_singletons() {
    for payment in [PaymentStyle::PayYourBid, PaymentStyle::Threshold] {
        passes(
            MechanismSpec::Greedy {
                n: 2,
                items: 2,
                ranking: Ranking::Value,
                payment,
                beta: 1.0,
                sets: vec![vec![1, 2]; 2],
                approx: 1.0,
                grid: grid(1.0, 6),
            },
            20,
        );
    }
}

#[test]
fn greedy_bundles() {
    for (beta, payment) in [(1.0, PaymentStyle::PayYourBid), (0.5, PaymentStyle::PayYourBid), (1.0, PaymentStyle::Threshold)] {
        passes(
            MechanismSpec::Greedy {
                n: 2,
                items: 2,
                ranking: Ranking::Value,
                payment,
                beta,
                sets: vec![vec![1, 2, 3]; 2],
                approx: 2.0,
                grid: grid(1.0, 6),
            },
            20,
        );
    }
}

#[test]
fn positions() {
    for payment in [PaymentStyle::PayYourBid, PaymentStyle::Threshold] {
        passes(MechanismSpec::PositionImpression { n: 2, slots: 2, payment, grid: grid(1.0, 11) }, 20);
        passes(MechanismSpec::PositionImpression { n: 3, slots: 2, payment, grid: grid(1.0, 6) }, 20);
    }
}

#[test]
fn per_click() {
    let ctr = vec![vec![0.9, 0.5], vec![0.7, 0.6]];
    passes(
        MechanismSpec::PerClick {
            ctr: ctr.clone(),
            payment: PaymentStyle::PayYourBid,
            deviation: PerClickDeviation::Uniform,
            grid: grid(1.0, 11),
        },
        20,
    );
    passes(
        MechanismSpec::PerClick { ctr, payment: PaymentStyle::PayYourBid, deviation: PerClickDeviation::Reciprocal, grid: grid(1.0, 11) },
        20,
    );
    let sep = vec![vec![1.0, 0.6], vec![1.0, 0.6]];
    passes(
        MechanismSpec::PerClick { ctr: sep, payment: PaymentStyle::Threshold, deviation: PerClickDeviation::Reciprocal, grid: grid(1.0, 11) },
        20,
    );
}

#[test]
fn public_project() {
    passes(MechanismSpec::PublicProject { n: 2, projects: 2, grid: grid(1.0, 6) }, 20);
    passes(MechanismSpec::PublicProject { n: 3, projects: 2, grid: grid(1.0, 4) }, 20);
}

#[test]
fn bandwidth() {
    passes(MechanismSpec::Bandwidth { n: 2, capacity: 1.0, grid: grid(1.0, 11) }, 20);
}

#[test]
fn multi_unit() {
    passes(MechanismSpec::MultiUnit { n: 2, units: 2, payment: PaymentStyle::PayYourBid, grid: grid(1.0, 6) }, 20);
    passes(MechanismSpec::UniformPrice { n: 2, units: 2, grid: grid(1.0, 6) }, 20);
}
