//! Deviation distributions, their exact expected utilities, and smoothness
//! certification over grid games.

use crate::error::{Error, Result};
use crate::model::{alloc_key, to_normal_form, Action, Alloc, GridMechanism, Mechanism, TOL};
use crate::valuations::Valuation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothmech_lp::{LinearProgram, Relation, Sense, Solution};
use std::collections::HashMap;
use std::sync::OnceLock;

pub const E_INV: f64 = 0.367_879_441_171_442_33;
/// 1 − 1/e
pub const ONE_MINUS_INV_E: f64 = 1.0 - E_INV;

/// A scalar written into some coordinates of an otherwise fixed action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub template: Action,
    pub coords: Vec<usize>,
}

impl Probe {
    pub fn scalar() -> Self {
        Probe { template: vec![0.0], coords: vec![0] }
    }

    pub fn at(&self, t: f64) -> Action {
        let mut a = self.template.clone();
        for &c in &self.coords {
            a[c] = t;
        }
        a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Density {
    Point { at: f64 },
    Uniform { lo: f64, hi: f64 },
    /// scale / (pole − t) on [0, hi]
    Reciprocal { pole: f64, scale: f64, hi: f64 },
    Mixture { parts: Vec<(f64, Density)> },
}

/// Continuous piece of a density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Uniform { lo: f64, hi: f64 },
    Reciprocal { pole: f64, scale: f64, lo: f64, hi: f64 },
}

impl Segment {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Segment::Uniform { lo, hi } | Segment::Reciprocal { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return 0.0;
        }
        match *self {
            Segment::Uniform { lo, hi } => 1.0 / (hi - lo),
            Segment::Reciprocal { pole, scale, .. } => scale / (pole - t),
        }
    }

    /// ∫_a^b f
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match *self {
            Segment::Uniform { lo, hi } => (b - a) / (hi - lo),
            Segment::Reciprocal { pole, scale, .. } => scale * ((pole - a) / (pole - b)).ln(),
        }
    }

    /// ∫_a^b t f(t) dt
    pub fn moment(&self, a: f64, b: f64) -> f64 {
        match *self {
            Segment::Uniform { lo, hi } => (b * b - a * a) / (2.0 * (hi - lo)),
            Segment::Reciprocal { pole, scale, .. } => scale * ((a - b) + pole * ((pole - a) / (pole - b)).ln()),
        }
    }
}

impl Density {
    /// β/(v − t) on [0, v(1 − e^{−1/β})].
    pub fn reciprocal(v: f64, beta: f64) -> Density {
        if v <= 0.0 {
            return Density::Point { at: 0.0 };
        }
        Density::Reciprocal { pole: v, scale: beta, hi: v * (1.0 - (-1.0 / beta).exp()) }
    }

    pub fn uniform(lo: f64, hi: f64) -> Density {
        if hi <= lo {
            Density::Point { at: lo }
        } else {
            Density::Uniform { lo, hi }
        }
    }

    /// Point masses as (weight, location).
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Density::Point { at } => vec![(1.0, *at)],
            Density::Uniform { lo, hi } if hi <= lo => vec![(1.0, *lo)],
            Density::Reciprocal { hi, .. } if *hi <= 0.0 => vec![(1.0, 0.0)],
            Density::Mixture { parts } => parts
                .iter()
                .flat_map(|(w, d)| d.atoms().into_iter().map(move |(a, t)| (w * a, t)))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn segments(&self) -> Vec<(f64, Segment)> {
        match self {
            Density::Uniform { lo, hi } if hi > lo => vec![(1.0, Segment::Uniform { lo: *lo, hi: *hi })],
            Density::Reciprocal { pole, scale, hi } if *hi > 0.0 => {
                vec![(1.0, Segment::Reciprocal { pole: *pole, scale: *scale, lo: 0.0, hi: *hi })]
            }
            Density::Mixture { parts } => parts
                .iter()
                .flat_map(|(w, d)| d.segments().into_iter().map(move |(a, s)| (w * a, s)))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms().iter().map(|(w, _)| w).sum();
        let segs: f64 = self
            .segments()
            .iter()
            .map(|(w, s)| {
                let (lo, hi) = s.support();
                w * s.mass(lo, hi)
            })
            .sum();
        atoms + segs
    }

    pub fn support_max(&self) -> f64 {
        let a = self.atoms().iter().map(|(_, t)| *t).fold(f64::NEG_INFINITY, f64::max);
        let s = self.segments().iter().map(|(_, s)| s.support().1).fold(f64::NEG_INFINITY, f64::max);
        a.max(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Density::Mixture { parts } = self {
            let w: f64 = parts.iter().map(|(w, _)| w).sum();
            if (w - 1.0).abs() > 1e-9 || parts.iter().any(|(w, _)| *w < 0.0) {
                return Err(Error::Validation(format!("mixture weights sum to {w}")));
            }
        }
        if let Density::Reciprocal { pole, hi, .. } = self {
            if *hi >= *pole {
                return Err(Error::Validation("reciprocal support reaches its pole".into()));
            }
        }
        let m = self.total_mass();
        if (m - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("density integrates to {m}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    /// closed-form density over a scalar written into the probe coordinates
    Scalar { density: Density, probe: Probe },
    /// explicit distribution over actions
    Discrete { support: Vec<(f64, Action)> },
    Mixture { parts: Vec<(f64, Deviation)> },
    /// independent deviations per simultaneous component, with the deviator's
    /// representative component valuations
    Product { parts: Vec<Deviation>, values: Vec<Valuation> },
    /// follow `plan` before `round`, deviate in `round` against `profile`, withdraw after
    Sequential { plan: usize, round: usize, profile: Vec<Valuation> },
}

impl Deviation {
    pub fn point(a: Action) -> Self {
        Deviation::Discrete { support: vec![(1.0, a)] }
    }

    pub fn scalar(density: Density) -> Self {
        Deviation::Scalar { density, probe: Probe::scalar() }
    }

    pub fn family(&self) -> String {
        match self {
            Deviation::Scalar { density, .. } => density_family(density),
            Deviation::Discrete { .. } => "discrete".into(),
            Deviation::Mixture { .. } => "mixture".into(),
            Deviation::Product { parts, .. } => {
                format!("product[{}]", parts.iter().map(|p| p.family()).collect::<Vec<_>>().join(","))
            }
            Deviation::Sequential { round, .. } => format!("sequential(round {round})"),
        }
    }
}

fn density_family(d: &Density) -> String {
    match d {
        Density::Point { .. } => "point".into(),
        Density::Uniform { .. } => "uniform".into(),
        Density::Reciprocal { .. } => "reciprocal".into(),
        Density::Mixture { parts } => {
            format!("mixture[{}]", parts.iter().map(|(_, p)| density_family(p)).collect::<Vec<_>>().join(","))
        }
    }
}

/// Probability mass `prob` of the deviation yields allocation `alloc`;
/// `pay` is the expected payment contribution of that mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub prob: f64,
    pub alloc: Alloc,
    pub pay: f64,
}

pub fn pieces_utility(v_i: &Valuation, pieces: &[Piece]) -> f64 {
    pieces.iter().map(|p| if p.prob > 0.0 { p.prob * v_i.value(&p.alloc) } else { 0.0 } - p.pay).sum()
}

/// Expected utility of a deviation against fixed opponent actions.
pub fn deviation_expected_utility<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    v_i: &Valuation,
    dev: &Deviation,
    actions: &[Action],
) -> Result<f64> {
    let pieces = mech.deviation_pieces(i, v_i, dev, actions)?;
    Ok(pieces_utility(v_i, &pieces))
}

pub fn generic_pieces<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    v_i: &Valuation,
    dev: &Deviation,
    actions: &[Action],
) -> Result<Vec<Piece>> {
    match dev {
        Deviation::Scalar { density, probe } => scalar_pieces(mech, i, v_i, density, probe, actions),
        Deviation::Discrete { support } => {
            let mut acts = actions.to_vec();
            Ok(support
                .iter()
                .map(|(w, a)| {
                    acts[i] = a.clone();
                    let o = mech.outcome(&acts);
                    Piece { prob: *w, alloc: o.alloc[i].clone(), pay: w * o.payments[i] }
                })
                .collect())
        }
        Deviation::Mixture { parts } => {
            let mut out = Vec::new();
            for (w, d) in parts {
                for p in mech.deviation_pieces(i, v_i, d, actions)? {
                    out.push(Piece { prob: w * p.prob, alloc: p.alloc, pay: w * p.pay });
                }
            }
            Ok(out)
        }
        other => Err(Error::Domain(format!("{} deviation needs a composed mechanism", other.family()))),
    }
}

struct ScalarEval<'a, M: Mechanism + ?Sized> {
    mech: &'a M,
    i: usize,
    v_i: &'a Valuation,
    probe: &'a Probe,
    actions: Vec<Action>,
}

impl<'a, M: Mechanism + ?Sized> ScalarEval<'a, M> {
    fn at(&self, t: f64) -> (Alloc, f64) {
        let mut acts = self.actions.clone();
        acts[self.i] = self.probe.at(t);
        let o = self.mech.outcome(&acts);
        (o.alloc[self.i].clone(), o.payments[self.i])
    }

    fn linear(&self, w: f64, seg: &Segment, a: f64, b: f64, depth: u32, out: &mut Vec<Piece>) {
        let h = b - a;
        let (t1, t2, t3) = (a + 0.25 * h, a + 0.5 * h, a + 0.75 * h);
        let (x1, p1) = self.at(t1);
        let (x2, p2) = self.at(t2);
        let (x3, p3) = self.at(t3);
        let same = x1 == x2 && x2 == x3;
        let collinear = (p2 - 0.5 * (p1 + p3)).abs() <= 1e-12 * (1.0 + p1.abs() + p3.abs());
        if same && collinear {
            let mass = w * seg.mass(a, b);
            let m1 = w * seg.moment(a, b);
            let slope = (p3 - p1) / (t3 - t1);
            let c0 = p1 - slope * t1;
            out.push(Piece { prob: mass, alloc: x2, pay: c0 * mass + slope * m1 });
        } else if depth < 60 && h > 1e-13 * (1.0 + b.abs()) {
            self.linear(w, seg, a, t2, depth + 1, out);
            self.linear(w, seg, t2, b, depth + 1, out);
        } else {
            let mass = w * seg.mass(a, b);
            out.push(Piece { prob: mass, alloc: x2, pay: p2 * mass });
        }
    }

    fn gauss(&self, w: f64, seg: &Segment, a: f64, b: f64) -> (Vec<Piece>, [f64; 2]) {
        let (nodes, weights) = gauss_legendre_15();
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut pieces = Vec::with_capacity(nodes.len());
        let mut acc = [0.0; 2];
        for (x, wt) in nodes.iter().zip(weights) {
            let t = mid + half * x;
            let f = w * seg.pdf(t) * wt * half;
            let (alloc, pay) = self.at(t);
            let val = self.v_i.value(&alloc);
            acc[0] += f * val;
            acc[1] += f * pay;
            pieces.push(Piece { prob: f, alloc, pay: f * pay });
        }
        (pieces, acc)
    }

    fn adaptive(&self, w: f64, seg: &Segment, a: f64, b: f64, depth: u32, out: &mut Vec<Piece>) -> Result<()> {
        let (whole, iw) = self.gauss(w, seg, a, b);
        let m = 0.5 * (a + b);
        let (left, il) = self.gauss(w, seg, a, m);
        let (right, ir) = self.gauss(w, seg, m, b);
        let err = (0..2).map(|k| (iw[k] - il[k] - ir[k]).abs()).fold(0.0, f64::max);
        if err <= 1e-12 {
            let _ = whole;
            out.extend(left);
            out.extend(right);
            return Ok(());
        }
        if depth >= 40 {
            return Err(Error::Numeric(format!("quadrature did not converge on [{a}, {b}] (error {err:.2e})")));
        }
        self.adaptive(w, seg, a, m, depth + 1, out)?;
        self.adaptive(w, seg, m, b, depth + 1, out)
    }
}

fn scalar_pieces<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    v_i: &Valuation,
    density: &Density,
    probe: &Probe,
    actions: &[Action],
) -> Result<Vec<Piece>> {
    let ev = ScalarEval { mech, i, v_i, probe, actions: actions.to_vec() };
    let mut out = Vec::new();
    for (w, t) in density.atoms() {
        let (alloc, pay) = ev.at(t);
        out.push(Piece { prob: w, alloc, pay: w * pay });
    }
    let segments = density.segments();
    if segments.is_empty() {
        return Ok(out);
    }
    let raw = mech.breakpoints(i, v_i, probe, actions);
    for (w, seg) in segments {
        let (lo, hi) = seg.support();
        let mut cuts: Vec<f64> = raw.iter().cloned().filter(|b| *b > lo && *b < hi && b.is_finite()).collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        for win in cuts.windows(2) {
            let (a, b) = (win[0], win[1]);
            if b - a <= 0.0 {
                continue;
            }
            if mech.smooth_payoffs() {
                ev.adaptive(w, &seg, a, b, 0, &mut out)?;
            } else {
                ev.linear(w, &seg, a, b, 0, &mut out);
            }
        }
    }
    Ok(out)
}

fn gauss_legendre_15() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(15))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Largest max-payment over the support of a scalar, discrete or mixed deviation.
pub fn support_max_payment<M: Mechanism + ?Sized>(mech: &M, i: usize, dev: &Deviation) -> Result<(Action, f64)> {
    let mut best: (Action, f64) = (mech.withdraw(i), 0.0);
    let mut consider = |a: Action| {
        let p = mech.max_payment(i, &a);
        if p > best.1 {
            best = (a, p);
        }
    };
    match dev {
        Deviation::Scalar { density, probe } => {
            for (_, t) in density.atoms() {
                consider(probe.at(t));
            }
            for (_, s) in density.segments() {
                let (lo, hi) = s.support();
                consider(probe.at(lo));
                consider(probe.at(hi));
            }
        }
        Deviation::Discrete { support } => {
            for (w, a) in support {
                if *w > 0.0 {
                    consider(a.clone());
                }
            }
        }
        Deviation::Mixture { parts } => {
            for (w, d) in parts {
                if *w > 0.0 {
                    let (a, p) = mech.deviation_max_payment(i, d)?;
                    if p > best.1 {
                        best = (a, p);
                    }
                }
            }
        }
        other => return Err(Error::Domain(format!("{} deviation needs a composed mechanism", other.family()))),
    }
    Ok(best)
}

pub const CERT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservativeWitness {
    pub player: usize,
    pub action: Action,
    pub max_payment: f64,
    pub max_value: f64,
}

/// Max-payment audit of one deviation: `None` passes.
pub fn check_conservative<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    dev: &Deviation,
    v_i: &Valuation,
) -> Result<Option<ConservativeWitness>> {
    let (action, max_payment) = mech.deviation_max_payment(i, dev)?;
    let max_value = v_i.max_value();
    Ok((max_payment > max_value + TOL).then(|| ConservativeWitness { player: i, action, max_payment, max_value }))
}

pub type DeviationFn = dyn Fn(&[Valuation], usize, &Action) -> Result<Deviation> + Send + Sync;

#[derive(Clone, Default)]
pub enum DeviationSource {
    #[default]
    Paper,
    Custom(std::sync::Arc<DeviationFn>),
}

impl DeviationSource {
    fn get(&self, mech: &dyn Mechanism, profile: &[Valuation], i: usize, a_i: &Action) -> Result<Deviation> {
        match self {
            DeviationSource::Paper => mech.paper_deviation(profile, i, a_i),
            DeviationSource::Custom(f) => f(profile, i, a_i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// index into the certified valuation profiles
    pub valuation: usize,
    /// grid action indices
    pub actions: Vec<usize>,
    pub bids: Vec<Action>,
    pub opt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub mechanism: String,
    pub lambda: f64,
    pub mu: f64,
    /// present for weak certificates, where `mu` plays the role of μ1
    pub mu2: Option<f64>,
    pub margin: f64,
    pub tolerance: f64,
    pub passes: bool,
    pub worst_profile: Option<WorstCase>,
    pub deviation_family: String,
    pub grid_note: String,
    pub conservative: bool,
    pub conservative_witness: Option<ConservativeWitness>,
    pub valuation_profiles: usize,
    pub action_profiles: usize,
}

impl SmoothnessCertificate {
    pub fn poa_bound(&self) -> f64 {
        match self.mu2 {
            Some(mu2) => weak_poa_bound(self.lambda, self.mu, mu2),
            None => poa_bound(self.lambda, self.mu),
        }
    }
}

pub fn poa_bound(lambda: f64, mu: f64) -> f64 {
    lambda / mu.max(1.0)
}

pub fn weak_poa_bound(lambda: f64, mu1: f64, mu2: f64) -> f64 {
    lambda / (mu2 + mu1.max(1.0))
}

pub fn grid_note(gm: &GridMechanism) -> String {
    let spans: Vec<String> = gm
        .grids
        .iter()
        .map(|g| {
            let lo = g.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
            let hi = g.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            format!("{} actions in [{lo}, {hi}]", g.len())
        })
        .collect();
    format!("grid-restricted game: {}", spans.join("; "))
}

/// Σ_i E[u_i(a*_i, a_{−i})] − λ·OPT + μ·ΣP (+ μ2·ΣB) minimized over all grid profiles.
pub fn certify(
    gm: &GridMechanism,
    profiles: &[Vec<Valuation>],
    lambda: f64,
    mu: f64,
    source: &DeviationSource,
) -> Result<SmoothnessCertificate> {
    certify_impl(gm, profiles, lambda, mu, None, source, CERT_TOL)
}

pub fn certify_weak(
    gm: &GridMechanism,
    profiles: &[Vec<Valuation>],
    lambda: f64,
    mu1: f64,
    mu2: f64,
    source: &DeviationSource,
) -> Result<SmoothnessCertificate> {
    certify_impl(gm, profiles, lambda, mu1, Some(mu2), source, CERT_TOL)
}

fn certify_impl(
    gm: &GridMechanism,
    profiles: &[Vec<Valuation>],
    lambda: f64,
    mu: f64,
    mu2: Option<f64>,
    source: &DeviationSource,
    tolerance: f64,
) -> Result<SmoothnessCertificate> {
    let count = gm.check_cap(crate::model::TABLE_CAP)?;
    let n = gm.n();
    let mech: &dyn Mechanism = &*gm.mech;
    let sizes = gm.sizes();
    let strides: Vec<usize> = (0..n).map(|i| sizes[i + 1..].iter().product()).collect();
    let wtp = match mu2 {
        Some(_) => Some(crate::mechanisms::wtp_table(gm)?),
        None => None,
    };
    let base: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|p| {
            let pay: f64 = gm.outcome_at(&gm.profile(p)).payments.iter().sum();
            let b: f64 = wtp.as_ref().map_or(0.0, |w| w[p * n..(p + 1) * n].iter().sum());
            (pay, b)
        })
        .collect();
    let per_action = mech.deviation_uses_action();
    let mut margin = f64::INFINITY;
    let mut worst = None;
    let mut families: Vec<String> = Vec::new();
    let mut witness = None;
    for (vi, profile) in profiles.iter().enumerate() {
        if profile.len() != n {
            return Err(Error::Validation(format!("valuation profile {vi} has {} players", profile.len())));
        }
        let (opt, _) = mech.optimal_welfare(profile)?;
        let mut devs: Vec<Vec<Deviation>> = Vec::with_capacity(n);
        for i in 0..n {
            let acts: Vec<&Action> = if per_action { gm.grids[i].iter().collect() } else { vec![&gm.grids[i][gm.withdraw[i]]] };
            let mut di = Vec::with_capacity(acts.len());
            for a in acts {
                let d = source.get(mech, profile, i, a)?;
                let fam = d.family();
                if !families.contains(&fam) {
                    families.push(fam);
                }
                if witness.is_none() {
                    witness = check_conservative(mech, i, &d, &profile[i])?;
                }
                di.push(d);
            }
            devs.push(di);
        }
        // utility of player i's deviation depends on a_{−i} (and a_i when per_action)
        let mut dev_util: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let u: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|p| {
                    let prof = gm.profile(p);
                    if !per_action && prof[i] != 0 {
                        return Ok(f64::NAN);
                    }
                    let d = &devs[i][if per_action { prof[i] } else { 0 }];
                    deviation_expected_utility(mech, i, &profile[i], d, &gm.actions(&prof))
                })
                .collect::<Result<_>>()?;
            dev_util.push(u);
        }
        for p in 0..count {
            let mut lhs = 0.0;
            for i in 0..n {
                let q = if per_action { p } else { p - ((p / strides[i]) % sizes[i]) * strides[i] };
                lhs += dev_util[i][q];
            }
            let (pay, b) = base[p];
            let m = lhs - lambda * opt + mu * pay + mu2.map_or(0.0, |m2| m2 * b);
            if m < margin {
                margin = m;
                let prof = gm.profile(p);
                worst = Some(WorstCase { valuation: vi, bids: gm.actions(&prof), actions: prof, opt });
            }
        }
    }
    Ok(SmoothnessCertificate {
        mechanism: mech.kind(),
        lambda,
        mu,
        mu2,
        margin,
        tolerance,
        passes: margin >= -tolerance,
        worst_profile: worst,
        deviation_family: families.join("|"),
        grid_note: grid_note(gm),
        conservative: witness.is_none(),
        conservative_witness: witness,
        valuation_profiles: profiles.len(),
        action_profiles: count,
    })
}

/// Largest λ for which mixed grid deviations q_{i,a_i} (independent of a_{−i})
/// satisfy the smoothness inequality at every grid profile.
pub fn fit_lambda(gm: &GridMechanism, profile: &[Valuation], mu: f64) -> Result<f64> {
    let table = to_normal_form(gm, profile)?;
    let (opt, _) = gm.mech.optimal_welfare(profile)?;
    if opt <= 0.0 {
        return Err(Error::Precondition("OPT is zero; every λ is certified".into()));
    }
    let n = table.n();
    let sizes = table.sizes.clone();
    let mut offset = vec![1usize; n];
    for i in 1..n {
        offset[i] = offset[i - 1] + sizes[i - 1] * sizes[i - 1];
    }
    let vars = offset[n - 1] + sizes[n - 1] * sizes[n - 1];
    let var = |i: usize, ai: usize, b: usize| offset[i] + ai * sizes[i] + b;
    let mut lp = LinearProgram::new(vars, Sense::Maximize);
    lp.objective[0] = 1.0;
    lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        for ai in 0..sizes[i] {
            lp.add_row((0..sizes[i]).map(|b| (var(i, ai, b), 1.0)).collect(), Relation::Eq, 1.0);
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..table.n_profiles())
        .into_par_iter()
        .map(|p| {
            let mut row = vec![(0, -opt)];
            for i in 0..n {
                let ai = table.coord(p, i);
                for b in 0..sizes[i] {
                    row.push((var(i, ai, b), table.utility(table.swap(p, i, b), i)));
                }
            }
            row
        })
        .collect();
    for (p, row) in rows.into_iter().enumerate() {
        lp.add_row(row, Relation::Ge, -mu * table.revenue(p));
    }
    match lp.solve()? {
        Solution::Optimal { value, .. } => Ok(value),
        Solution::Infeasible => Err(Error::Numeric("λ-fit LP reported infeasible".into())),
        Solution::Unbounded => Err(Error::Numeric("λ-fit LP reported unbounded".into())),
    }
}

/// Expected value and payment of a deviation, kept apart.
pub fn deviation_value_and_payment<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    v_i: &Valuation,
    dev: &Deviation,
    actions: &[Action],
) -> Result<(f64, f64)> {
    let pieces = mech.deviation_pieces(i, v_i, dev, actions)?;
    let value = pieces.iter().map(|p| if p.prob > 0.0 { p.prob * v_i.value(&p.alloc) } else { 0.0 }).sum();
    Ok((value, pieces.iter().map(|p| p.pay).sum()))
}

/// Distinct allocations a deviation can produce, keyed for comparisons.
pub fn deviation_allocations<M: Mechanism + ?Sized>(
    mech: &M,
    i: usize,
    v_i: &Valuation,
    dev: &Deviation,
    actions: &[Action],
) -> Result<Vec<Alloc>> {
    let mut seen: HashMap<Vec<u64>, Alloc> = HashMap::new();
    for p in mech.deviation_pieces(i, v_i, dev, actions)? {
        if p.prob > 0.0 {
            seen.entry(alloc_key(&p.alloc)).or_insert(p.alloc);
        }
    }
    let mut out: Vec<Alloc> = seen.into_values().collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}
