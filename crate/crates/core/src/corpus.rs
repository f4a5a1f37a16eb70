//! Seeded random valuation generators.

use crate::error::Result;
use crate::valuations::{AdditiveComponent, Space, TabulatedValuation, Valuation, XosRepresentation};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw rounded to three decimals, so reports stay readable.
pub fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo..=hi) * 1000.0).round() / 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Additive,
    SubmodularRandom,
    XosRandom,
    UnitDemand,
    ConcaveChain,
}

/// Monotone values per label, bottom label (0) worth zero.
fn monotone_labels(rng: &mut ChaCha8Rng, size: usize, hi: f64) -> Vec<f64> {
    let mut vals = vec![0.0];
    let mut acc = 0.0;
    for _ in 1..size {
        acc += draw(rng, 0.0, hi);
        vals.push(acc);
    }
    vals
}

pub fn additive_component(rng: &mut ChaCha8Rng, sizes: &[usize], hi: f64) -> AdditiveComponent {
    AdditiveComponent { values: sizes.iter().map(|&s| monotone_labels(rng, s, hi)).collect() }
}

pub fn additive(rng: &mut ChaCha8Rng, space: &Space) -> Result<TabulatedValuation> {
    let c = additive_component(rng, &space.sizes(), 1.0);
    TabulatedValuation::from_fn(space.clone(), |x| c.eval(x))
}

/// Concave transform of an additive function: monotone and submodular on chains.
pub fn submodular_random(rng: &mut ChaCha8Rng, space: &Space) -> Result<TabulatedValuation> {
    let c = additive_component(rng, &space.sizes(), 1.0);
    let scale = draw(rng, 0.5, 2.0);
    TabulatedValuation::from_fn(space.clone(), |x| round9(scale * (1.0 - (-c.eval(x)).exp())))
}

pub fn xos_rep(rng: &mut ChaCha8Rng, sizes: &[usize], components: usize) -> XosRepresentation {
    XosRepresentation { components: (0..components).map(|_| additive_component(rng, sizes, 1.0)).collect(), beta: 1.0 }
}

pub fn xos_random(rng: &mut ChaCha8Rng, space: &Space, components: usize) -> Result<TabulatedValuation> {
    let rep = xos_rep(rng, &space.sizes(), components);
    TabulatedValuation::from_fn(space.clone(), |x| rep.eval(x))
}

/// Monotone subadditive set function over binary coordinates that need not be
/// XOS: an XOS part plus a subadditive step function of the number of items.
pub fn subadditive_random(rng: &mut ChaCha8Rng, m: usize) -> Result<TabulatedValuation> {
    let space = Space::numbered(&vec![2; m]);
    let rep = xos_rep(rng, &space.sizes(), 2);
    // c·⌈k/d⌉ is subadditive in k and not concave for d ≥ 2
    let c = draw(rng, 0.2, 1.0);
    let d = rng.gen_range(1..=3usize);
    let sub = |x: &[usize]| c * x.iter().filter(|&&l| l > 0).count().div_ceil(d) as f64;
    TabulatedValuation::from_fn(space, |x| round9(rep.eval(x) + sub(x)))
}

/// Unit-demand bidder over `mechanisms` single-item components.
pub fn unit_demand(rng: &mut ChaCha8Rng, mechanisms: usize) -> Valuation {
    Valuation::UnitDemand { parts: (0..mechanisms).map(|_| Valuation::item(draw(rng, 0.0, 1.0))).collect() }
}

/// Concave increasing piecewise-linear valuation on [0, capacity].
pub fn concave_chain(rng: &mut ChaCha8Rng, capacity: f64, pieces: usize) -> Valuation {
    let mut slopes: Vec<f64> = (0..pieces).map(|_| draw(rng, 0.05, 2.0)).collect();
    slopes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut xs = vec![0.0];
    let mut ys = vec![0.0];
    for (k, s) in slopes.iter().enumerate() {
        let x = capacity * (k + 1) as f64 / pieces as f64;
        let y = ys[k] + s * (x - xs[k]);
        xs.push(x);
        ys.push(round9(y));
    }
    Valuation::Concave { xs, ys }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// `count` single-item profiles with values in [0, 1].
pub fn item_profiles(seed: u64, count: usize, n: usize) -> Vec<Vec<Valuation>> {
    let mut r = rng(seed);
    (0..count).map(|_| (0..n).map(|_| Valuation::item(draw(&mut r, 0.0, 1.0))).collect()).collect()
}

/// Label valuations that are non-decreasing in the label (units won).
pub fn unit_profiles(seed: u64, count: usize, n: usize, units: usize, concave: bool) -> Vec<Vec<Valuation>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let mut m: Vec<f64> = (0..units).map(|_| draw(&mut r, 0.0, 1.0)).collect();
                    if concave {
                        m.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    }
                    let mut values = vec![0.0];
                    for x in m {
                        values.push(round9(values.last().unwrap() + x));
                    }
                    Valuation::Labels { values }
                })
                .collect()
        })
        .collect()
}

/// Profiles for one generator; `items` is the number of binary coordinates
/// (or mechanisms for unit-demand, pieces for concave chains).
pub fn generate(gen: Generator, seed: u64, count: usize, n: usize, items: usize) -> Result<Vec<Vec<Valuation>>> {
    let mut r = rng(seed);
    let space = Space::numbered(&vec![2; items]);
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    Ok(match gen {
                        Generator::Additive => Valuation::Tabulated { valuation: additive(&mut r, &space)? },
                        Generator::SubmodularRandom => {
                            Valuation::Tabulated { valuation: submodular_random(&mut r, &space)? }
                        }
                        Generator::XosRandom => Valuation::Xos { rep: xos_rep(&mut r, &space.sizes(), 2) },
                        Generator::UnitDemand => unit_demand(&mut r, items),
                        Generator::ConcaveChain => concave_chain(&mut r, 1.0, items.max(1)),
                    })
                })
                .collect()
        })
        .collect()
}

/// Monotone table with independent random increments; generally outside XOS.
pub fn monotone_random(rng: &mut ChaCha8Rng, space: &Space) -> Result<TabulatedValuation> {
    let raw: Vec<f64> = (0..space.len()).map(|_| draw(rng, 0.0, 1.0)).collect();
    // v(x) = max of raw over the down-set of x on the product of chains
    TabulatedValuation::from_fn(space.clone(), |x| {
        space
            .vectors()
            .iter()
            .filter(|y| y.iter().zip(x).all(|(a, b)| a <= b))
            .map(|y| if y.iter().all(|&l| l == 0) { 0.0 } else { raw[space.index(y)] })
            .fold(0.0, f64::max)
    })
}

/// Mixed corpus of small tabulated valuations (m ≤ 3 coordinates with at
/// most 3 labels): additive, submodular, XOS, subadditive and general
/// monotone tables in rotation.
pub fn hierarchy_corpus(seed: u64, count: usize) -> Result<Vec<TabulatedValuation>> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let m = r.gen_range(1..=3usize);
            let sizes: Vec<usize> = (0..m).map(|_| r.gen_range(2..=3usize)).collect();
            let space = Space::numbered(&sizes);
            let binary = Space::numbered(&vec![2; m]);
            match k % 5 {
                0 => additive(&mut r, &space),
                1 => submodular_random(&mut r, &binary),
                2 => xos_random(&mut r, &space, 2),
                3 => subadditive_random(&mut r, m),
                _ => monotone_random(&mut r, &space),
            }
        })
        .collect()
}
