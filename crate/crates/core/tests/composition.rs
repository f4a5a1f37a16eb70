use smoothmech::composition::{compose_sequential, compose_simultaneous, InfoPolicy};
use smoothmech::corpus::{self, Generator};
use smoothmech::mechanisms::{SingleItem, SingleItemFormat};
use smoothmech::model::{uniform_grid, GridMechanism};
use smoothmech::smoothness::{certify, DeviationSource, E_INV};
use std::sync::Arc;

fn fp(points: usize) -> GridMechanism {
    GridMechanism::scalar(Arc::new(SingleItem::new(2, SingleItemFormat::FirstPrice)), &uniform_grid(1.0, points)).unwrap()
}

#[test]
fn simultaneous_first_price_with_xos_bidders() {
    let gm = compose_simultaneous(&[fp(5), fp(4)]).unwrap();
    let profiles = corpus::generate(Generator::XosRandom, 5, 20, 2, 2).unwrap();
    let cert = certify(&gm, &profiles, 1.0 - E_INV, 1.0, &DeviationSource::Paper).unwrap();
    println!("margin {:.3e} conservative {}", cert.margin, cert.conservative);
    assert!(cert.passes, "margin {}", cert.margin);
    assert!(cert.conservative);
}

#[test]
fn sequential_first_price_with_unit_demand_bidders() {
    let profiles = corpus::generate(Generator::UnitDemand, 9, 20, 2, 2).unwrap();
    let mut verdicts = Vec::new();
    for policy in [InfoPolicy::FullBids, InfoPolicy::OwnOutcomeOnly, InfoPolicy::None] {
        let gm = compose_sequential(&[fp(3), fp(2)], policy).unwrap();
        let cert = certify(&gm, &profiles, 1.0 - E_INV, 2.0, &DeviationSource::Paper).unwrap();
        println!("{policy:?}: plans {:?} margin {:.3e}", gm.sizes(), cert.margin);
        verdicts.push(cert.passes);
    }
    assert_eq!(verdicts, vec![true; 3]);
}
