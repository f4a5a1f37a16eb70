//! Valuations over product outcome spaces and the complement-free hierarchy.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use smoothmech_lp::{LinearProgram, Relation, Sense, Solution};

/// Default cap on |×_j 𝒳_j| for tabulated operations.
pub const DOMAIN_CAP: usize = 4096;

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coordinate {
    pub labels: Vec<String>,
    #[serde(default)]
    pub bottom: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Space {
    pub coords: Vec<Coordinate>,
}

impl Space {
    pub fn sizes(&self) -> Vec<usize> {
        self.coords.iter().map(|c| c.labels.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.coords.iter().map(|c| c.labels.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.coords.len()
    }

    pub fn bottoms(&self) -> Option<Vec<usize>> {
        self.coords.iter().map(|c| c.bottom).collect()
    }

    /// Row-major index, first coordinate most significant.
    pub fn index(&self, x: &[usize]) -> usize {
        let mut idx = 0;
        for (c, &xj) in self.coords.iter().zip(x) {
            idx = idx * c.labels.len() + xj;
        }
        idx
    }

    pub fn vector(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.m()];
        for j in (0..self.m()).rev() {
            let s = self.coords[j].labels.len();
            x[j] = idx % s;
            idx /= s;
        }
        x
    }

    pub fn vectors(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|i| self.vector(i)).collect()
    }

    /// Numeric labels 0..s per coordinate, label 0 as bottom.
    pub fn numbered(sizes: &[usize]) -> Space {
        Space {
            coords: sizes
                .iter()
                .map(|&s| Coordinate { labels: (0..s).map(|k| k.to_string()).collect(), bottom: Some(0) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedValuation {
    pub space: Space,
    pub table: Vec<f64>,
}

impl TabulatedValuation {
    pub fn new(space: Space, table: Vec<f64>) -> Result<Self> {
        let v = TabulatedValuation { space, table };
        v.validate()?;
        Ok(v)
    }

    pub fn from_fn(space: Space, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let table = space.vectors().iter().map(|x| f(x)).collect();
        Self::new(space, table)
    }

    /// A set function on `m` items: coordinate labels {⊥, in}.
    pub fn set_function(m: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        let space = Space {
            coords: (0..m)
                .map(|_| Coordinate { labels: vec!["out".into(), "in".into()], bottom: Some(0) })
                .collect(),
        };
        Self::from_fn(space, |x| {
            let mask = x.iter().enumerate().fold(0usize, |acc, (j, &b)| acc | (b << j));
            f(mask)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.space.len() != self.table.len() {
            return Err(Error::Validation(format!(
                "table has {} entries, space has {}",
                self.table.len(),
                self.space.len()
            )));
        }
        for c in &self.space.coords {
            if c.labels.is_empty() {
                return Err(Error::Validation("empty coordinate".into()));
            }
            if let Some(b) = c.bottom {
                if b >= c.labels.len() {
                    return Err(Error::Validation(format!("bottom {b} out of range")));
                }
            }
        }
        if let Some(k) = self.table.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(format!("value at index {k} is negative or not finite")));
        }
        if let Some(b) = self.space.bottoms() {
            let v0 = self.table[self.space.index(&b)];
            if v0.abs() > TOL {
                return Err(Error::Validation(format!("v(bottom) = {v0}, expected 0")));
            }
        }
        Ok(())
    }

    pub fn at(&self, x: &[usize]) -> f64 {
        self.table[self.space.index(x)]
    }

    /// x_S: x on S, bottom elsewhere.
    pub fn restrict(&self, x: &[usize], mask: usize, bottoms: &[usize]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| if mask >> j & 1 == 1 { xj } else { bottoms[j] })
            .collect()
    }

    fn at_set(&self, x: &[usize], mask: usize, bottoms: &[usize]) -> f64 {
        self.at(&self.restrict(x, mask, bottoms))
    }

    fn check_domain(&self) -> Result<()> {
        let n = self.space.len();
        if n > DOMAIN_CAP {
            return Err(Error::Size { what: "valuation domain".into(), count: n as u128, cap: DOMAIN_CAP as u128 });
        }
        Ok(())
    }

    fn require_bottoms(&self) -> Result<Vec<usize>> {
        self.space
            .bottoms()
            .ok_or_else(|| Error::Precondition("every coordinate needs a bottom label".into()))
    }

    pub fn max_value(&self) -> f64 {
        self.table.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveComponent {
    /// values[j][label]
    pub values: Vec<Vec<f64>>,
}

impl AdditiveComponent {
    pub fn zero(sizes: &[usize]) -> Self {
        AdditiveComponent { values: sizes.iter().map(|&s| vec![0.0; s]).collect() }
    }

    pub fn eval(&self, x: &[usize]) -> f64 {
        self.values.iter().zip(x).map(|(vj, &xj)| vj[xj]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XosRepresentation {
    pub components: Vec<AdditiveComponent>,
    pub beta: f64,
}

impl XosRepresentation {
    pub fn eval(&self, x: &[usize]) -> f64 {
        self.components.iter().map(|c| c.eval(x)).fold(0.0, f64::max)
    }

    /// Index of the first component attaining the max at x.
    pub fn argmax(&self, x: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in self.components.iter().enumerate() {
            let v = c.eval(x);
            if best.map_or(true, |(_, b)| v > b + TOL) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    }

    pub fn m(&self) -> usize {
        self.components.first().map_or(0, |c| c.values.len())
    }
}

/// Per-coordinate partial order, optionally with lattice operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordOrder {
    pub size: usize,
    /// pairs (a, b) meaning a ⪰ b; reflexive pairs are implied
    pub pairs: Vec<(usize, usize)>,
    #[serde(default)]
    pub meet: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub join: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub distributive: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialOrderSpec {
    pub coords: Vec<CoordOrder>,
}

impl CoordOrder {
    pub fn chain(size: usize) -> Self {
        let mut pairs = Vec::new();
        for a in 0..size {
            for b in 0..a {
                pairs.push((a, b));
            }
        }
        let table = |f: fn(usize, usize) -> usize| -> Vec<Vec<usize>> {
            (0..size).map(|a| (0..size).map(|b| f(a, b)).collect()).collect()
        };
        CoordOrder {
            size,
            pairs,
            meet: Some(table(usize::min)),
            join: Some(table(usize::max)),
            distributive: Some(true),
        }
    }

    pub fn geq_matrix(&self) -> Vec<Vec<bool>> {
        let mut g = vec![vec![false; self.size]; self.size];
        for (a, row) in g.iter_mut().enumerate() {
            row[a] = true;
        }
        for &(a, b) in &self.pairs {
            g[a][b] = true;
        }
        g
    }

    fn validate(&self) -> Result<()> {
        if self.pairs.iter().any(|&(a, b)| a >= self.size || b >= self.size) {
            return Err(Error::Validation("order pair out of range".into()));
        }
        let g = self.geq_matrix();
        let s = self.size;
        for a in 0..s {
            for b in 0..s {
                if a != b && g[a][b] && g[b][a] {
                    return Err(Error::Validation(format!("order not antisymmetric at ({a},{b})")));
                }
                for c in 0..s {
                    if g[a][b] && g[b][c] && !g[a][c] {
                        return Err(Error::Validation(format!("order not transitive at ({a},{b},{c})")));
                    }
                }
            }
        }
        if let (Some(meet), Some(join)) = (&self.meet, &self.join) {
            for a in 0..s {
                for b in 0..s {
                    let (mt, jn) = (meet[a][b], join[a][b]);
                    if !(g[a][mt] && g[b][mt]) || !(g[jn][a] && g[jn][b]) {
                        return Err(Error::Validation(format!("meet/join not bounds at ({a},{b})")));
                    }
                    for c in 0..s {
                        if g[a][c] && g[b][c] && !g[mt][c] {
                            return Err(Error::Validation(format!("meet({a},{b}) not greatest")));
                        }
                        if g[c][a] && g[c][b] && !g[c][jn] {
                            return Err(Error::Validation(format!("join({a},{b}) not least")));
                        }
                    }
                }
            }
            if self.distributive == Some(true) && !self.is_distributive() {
                return Err(Error::Validation("lattice claimed distributive but is not".into()));
            }
        }
        Ok(())
    }

    pub fn is_distributive(&self) -> bool {
        let (Some(meet), Some(join)) = (&self.meet, &self.join) else {
            return false;
        };
        let s = self.size;
        (0..s).all(|a| {
            (0..s).all(|b| (0..s).all(|c| meet[a][join[b][c]] == join[meet[a][b]][meet[a][c]]))
        })
    }

    /// Least element, if any.
    pub fn bottom(&self) -> Option<usize> {
        let g = self.geq_matrix();
        (0..self.size).find(|&b| (0..self.size).all(|a| g[a][b]))
    }
}

impl PartialOrderSpec {
    pub fn chains(sizes: &[usize]) -> Self {
        PartialOrderSpec { coords: sizes.iter().map(|&s| CoordOrder::chain(s)).collect() }
    }

    pub fn validate_for(&self, space: &Space) -> Result<()> {
        if self.coords.len() != space.m() {
            return Err(Error::Validation("order and space have different coordinate counts".into()));
        }
        for (o, c) in self.coords.iter().zip(&space.coords) {
            if o.size != c.labels.len() {
                return Err(Error::Validation("order size differs from coordinate size".into()));
            }
            o.validate()?;
        }
        Ok(())
    }

    fn is_lattice(&self) -> bool {
        self.coords.iter().all(|c| c.meet.is_some() && c.join.is_some())
    }
}

/// Structured valuations used by mechanisms. Allocation labels are `f64`
/// vectors; integer-valued coordinates index tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Valuation {
    /// value per integer label of the single allocation coordinate
    Labels { values: Vec<f64> },
    /// concave piecewise-linear in a continuous share, through (xs, ys), xs[0] = 0
    Concave { xs: Vec<f64>, ys: Vec<f64> },
    /// table over integer label vectors
    Tabulated { valuation: TabulatedValuation },
    /// max over additive components of integer label vectors
    Xos { rep: XosRepresentation },
    /// max over parts, part j reading allocation coordinate j
    UnitDemand { parts: Vec<Valuation> },
    /// min(inner, budget)
    Capped { inner: Box<Valuation>, budget: f64 },
}

fn labels_of(x: &[f64]) -> Option<Vec<usize>> {
    x.iter()
        .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Some(v as usize) } else { None })
        .collect()
}

impl Valuation {
    /// Single item: value `v` for label 1 (win), 0 for label 0.
    pub fn item(v: f64) -> Self {
        Valuation::Labels { values: vec![0.0, v] }
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        let bad = || Error::Domain(format!("allocation {x:?} not in the valuation's domain"));
        match self {
            Valuation::Labels { values } => {
                let l = labels_of(x).filter(|l| l.len() == 1).ok_or_else(bad)?;
                values.get(l[0]).copied().ok_or_else(bad)
            }
            Valuation::Concave { xs, ys } => {
                if x.len() != 1 || !(x[0] >= 0.0) {
                    return Err(bad());
                }
                Ok(piecewise(xs, ys, x[0]))
            }
            Valuation::Tabulated { valuation } => {
                let l = labels_of(x).ok_or_else(bad)?;
                let sizes = valuation.space.sizes();
                if l.len() != sizes.len() || l.iter().zip(&sizes).any(|(a, s)| a >= s) {
                    return Err(bad());
                }
                Ok(valuation.at(&l))
            }
            Valuation::Xos { rep } => {
                let l = labels_of(x).ok_or_else(bad)?;
                if l.len() != rep.m() {
                    return Err(bad());
                }
                if rep.components.iter().any(|c| c.values.iter().zip(&l).any(|(vj, &a)| a >= vj.len())) {
                    return Err(bad());
                }
                Ok(rep.eval(&l))
            }
            Valuation::UnitDemand { parts } => {
                if x.len() != parts.len() {
                    return Err(bad());
                }
                let mut best: f64 = 0.0;
                for (p, &xj) in parts.iter().zip(x) {
                    best = best.max(p.try_value(&[xj])?);
                }
                Ok(best)
            }
            Valuation::Capped { inner, budget } => Ok(inner.try_value(x)?.min(*budget)),
        }
    }

    /// Value at an allocation assumed to be in the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Valuation::Labels { values } => values.get(x[0] as usize).copied().unwrap_or(f64::NAN),
            Valuation::Concave { xs, ys } => piecewise(xs, ys, x[0]),
            Valuation::Tabulated { valuation } => {
                let l: Vec<usize> = x.iter().map(|v| *v as usize).collect();
                valuation.at(&l)
            }
            Valuation::Xos { rep } => {
                let l: Vec<usize> = x.iter().map(|v| *v as usize).collect();
                rep.eval(&l)
            }
            Valuation::UnitDemand { parts } => {
                parts.iter().zip(x).map(|(p, xj)| p.value(std::slice::from_ref(xj))).fold(0.0, f64::max)
            }
            Valuation::Capped { inner, budget } => inner.value(x).min(*budget),
        }
    }

    /// max_x v(x) over the valuation's own domain.
    pub fn max_value(&self) -> f64 {
        match self {
            Valuation::Labels { values } => values.iter().cloned().fold(0.0, f64::max),
            Valuation::Concave { ys, .. } => ys.iter().cloned().fold(0.0, f64::max),
            Valuation::Tabulated { valuation } => valuation.max_value(),
            Valuation::Xos { rep } => rep
                .components
                .iter()
                .map(|c| c.values.iter().map(|vj| vj.iter().cloned().fold(0.0, f64::max)).sum::<f64>())
                .fold(0.0, f64::max),
            Valuation::UnitDemand { parts } => parts.iter().map(|p| p.max_value()).fold(0.0, f64::max),
            Valuation::Capped { inner, budget } => inner.max_value().min(*budget),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Valuation::Labels { values } => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Validation("label values must be finite and nonnegative".into()));
                }
            }
            Valuation::Concave { xs, ys } => {
                if xs.len() != ys.len() || xs.is_empty() || xs[0] != 0.0 || ys[0] != 0.0 {
                    return Err(Error::Validation("concave valuation needs matching points starting at (0,0)".into()));
                }
                let mut last_slope = f64::INFINITY;
                for k in 1..xs.len() {
                    let dx = xs[k] - xs[k - 1];
                    if !(dx > 0.0) {
                        return Err(Error::Validation("concave breakpoints must increase".into()));
                    }
                    let s = (ys[k] - ys[k - 1]) / dx;
                    if s < -TOL || s > last_slope + TOL {
                        return Err(Error::Validation("valuation is not concave nondecreasing".into()));
                    }
                    last_slope = s;
                }
            }
            Valuation::Tabulated { valuation } => valuation.validate()?,
            Valuation::Xos { rep } => {
                if rep.components.iter().flat_map(|c| c.values.iter().flatten()).any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Validation("XOS component values must be finite and nonnegative".into()));
                }
            }
            Valuation::UnitDemand { parts } => {
                for p in parts {
                    p.validate()?;
                }
            }
            Valuation::Capped { inner, budget } => {
                if !(*budget >= 0.0) {
                    return Err(Error::Validation("budget must be nonnegative".into()));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }
}

fn piecewise(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&p| p <= x);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

// ---------------------------------------------------------------------------
// fractional subadditivity and XOS extraction

/// Primal cover LP value V(x*).
fn cover_value(v: &TabulatedValuation, xs: &[usize], covers: &dyn Fn(usize, usize, usize) -> bool) -> Result<f64> {
    let space = &v.space;
    let n = space.len();
    let mut lp = LinearProgram::new(n, Sense::Minimize);
    lp.objective = v.table.clone();
    for j in 0..space.m() {
        let row: Vec<(usize, f64)> = (0..n).filter(|&k| covers(j, space.vector(k)[j], xs[j])).map(|k| (k, 1.0)).collect();
        lp.add_row(row, Relation::Ge, 1.0);
    }
    match lp.solve()? {
        Solution::Optimal { value, .. } => Ok(value),
        other => Err(Error::Numeric(format!("cover LP not optimal: {other:?}"))),
    }
}

/// Dual LP optimum t for outcome x*.
fn dual_prices(v: &TabulatedValuation, xs: &[usize], covers: &dyn Fn(usize, usize, usize) -> bool) -> Result<Vec<f64>> {
    let space = &v.space;
    let m = space.m();
    let mut lp = LinearProgram::new(m, Sense::Maximize);
    lp.objective = vec![1.0; m];
    for (k, x) in space.vectors().iter().enumerate() {
        let row: Vec<(usize, f64)> = (0..m).filter(|&j| covers(j, x[j], xs[j])).map(|j| (j, 1.0)).collect();
        if !row.is_empty() {
            lp.add_row(row, Relation::Le, v.table[k]);
        }
    }
    match lp.solve()? {
        Solution::Optimal { point, .. } => Ok(point.into_iter().map(|t| t.max(0.0)).collect()),
        other => Err(Error::Numeric(format!("dual LP not optimal: {other:?}"))),
    }
}

fn beta_of(v: &TabulatedValuation, values: impl Fn(&[usize]) -> f64) -> f64 {
    let mut beta: f64 = 1.0;
    for x in v.space.vectors() {
        let vx = v.at(&x);
        if vx <= TOL {
            continue;
        }
        let r = values(&x);
        beta = if r <= TOL { f64::INFINITY } else { beta.max(vx / r) };
    }
    beta
}

fn equal_cover(_: usize, a: usize, b: usize) -> bool {
    a == b
}

/// Smallest β for which v is β-fractionally subadditive.
pub fn check_fractionally_subadditive(v: &TabulatedValuation) -> Result<f64> {
    v.check_domain()?;
    let mut beta: f64 = 1.0;
    for x in v.space.vectors() {
        let vx = v.at(&x);
        if vx <= TOL {
            continue;
        }
        let cover = cover_value(v, &x, &equal_cover)?;
        beta = if cover <= TOL { f64::INFINITY } else { beta.max(vx / cover) };
    }
    Ok(beta)
}

fn single_minded_components(
    v: &TabulatedValuation,
    covers: &dyn Fn(usize, usize, usize) -> bool,
) -> Result<Vec<AdditiveComponent>> {
    let sizes = v.space.sizes();
    let mut comps = Vec::with_capacity(v.space.len());
    for x in v.space.vectors() {
        let t = dual_prices(v, &x, covers)?;
        let mut c = AdditiveComponent::zero(&sizes);
        for j in 0..sizes.len() {
            for (l, val) in c.values[j].iter_mut().enumerate() {
                if covers(j, l, x[j]) {
                    *val = t[j];
                }
            }
        }
        comps.push(c);
    }
    Ok(comps)
}

/// XOS representation from the dual of the cover LP, one component per outcome.
pub fn xos_from_fractional(v: &TabulatedValuation) -> Result<XosRepresentation> {
    v.check_domain()?;
    let components = single_minded_components(v, &equal_cover)?;
    let mut rep = XosRepresentation { components, beta: 1.0 };
    rep.beta = beta_of(v, |x| rep.eval(x));
    verify_xos(&rep, v).map_err(|w| Error::Numeric(format!("extracted representation fails: {w:?}")))?;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SandwichSide {
    /// some component exceeds v
    Lower,
    /// v exceeds β times the best component
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XosWitness {
    pub x: Vec<usize>,
    pub side: SandwichSide,
    pub gap: f64,
}

/// Exhaustive β-XOS sandwich check.
pub fn verify_xos(rep: &XosRepresentation, v: &TabulatedValuation) -> std::result::Result<(), XosWitness> {
    let tol = 1e-7;
    for x in v.space.vectors() {
        let vx = v.at(&x);
        let r = rep.eval(&x);
        if r > vx + tol {
            return Err(XosWitness { x, side: SandwichSide::Lower, gap: r - vx });
        }
        if vx > rep.beta * r + tol * (1.0 + vx) {
            return Err(XosWitness { x, side: SandwichSide::Upper, gap: vx - rep.beta * r });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// set classes

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetWitness {
    pub x: Vec<usize>,
    pub s: usize,
    pub t: usize,
    pub j: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetClasses {
    pub set_monotone: Option<SetWitness>,
    pub set_subadditive: Option<SetWitness>,
    pub set_submodular: Option<SetWitness>,
}

impl SetClasses {
    pub fn monotone(&self) -> bool {
        self.set_monotone.is_none()
    }
    pub fn subadditive(&self) -> bool {
        self.set_subadditive.is_none()
    }
    pub fn submodular(&self) -> bool {
        self.set_submodular.is_none()
    }
}

/// Exhaustive set-monotone / set-subadditive / set-submodular checks; a
/// flag holds when its witness slot is empty.
pub fn check_set_classes(v: &TabulatedValuation) -> Result<SetClasses> {
    v.check_domain()?;
    let bot = v.require_bottoms()?;
    let m = v.space.m();
    let full = (1usize << m) - 1;
    let mut out = SetClasses { set_monotone: None, set_subadditive: None, set_submodular: None };
    for x in v.space.vectors() {
        let val: Vec<f64> = (0..=full).map(|s| v.at_set(&x, s, &bot)).collect();
        for s in 0..=full {
            for t in 0..=full {
                if out.set_monotone.is_none() && s & t == s && val[s] > val[t] + TOL {
                    out.set_monotone = Some(SetWitness { x: x.clone(), s, t, j: None });
                }
                if out.set_subadditive.is_none() && val[s] + val[t] < val[s | t] - TOL {
                    out.set_subadditive = Some(SetWitness { x: x.clone(), s, t, j: None });
                }
                if out.set_submodular.is_none() && s & t == s {
                    for j in 0..m {
                        let b = 1 << j;
                        if t & b == 0 && val[s | b] - val[s] < val[t | b] - val[t] - TOL {
                            out.set_submodular = Some(SetWitness { x: x.clone(), s, t, j: Some(j) });
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact XOS from marginal telescoping; requires set-monotone and set-submodular.
pub fn xos_from_submodular(v: &TabulatedValuation) -> Result<XosRepresentation> {
    let classes = check_set_classes(v)?;
    if let Some(w) = classes.set_monotone.as_ref().or(classes.set_submodular.as_ref()) {
        return Err(Error::Precondition(format!(
            "not set-monotone and set-submodular: x={:?} S={:#b} T={:#b} j={:?}",
            w.x, w.s, w.t, w.j
        )));
    }
    let bot = v.require_bottoms()?;
    let sizes = v.space.sizes();
    let mut components = Vec::new();
    for x in v.space.vectors() {
        let mut c = AdditiveComponent::zero(&sizes);
        for j in 0..sizes.len() {
            let prev = (1usize << j) - 1;
            let marginal = v.at_set(&x, prev | 1 << j, &bot) - v.at_set(&x, prev, &bot);
            c.values[j][x[j]] = marginal.max(0.0);
        }
        components.push(c);
    }
    let rep = XosRepresentation { components, beta: 1.0 };
    verify_xos(&rep, v).map_err(|w| Error::Numeric(format!("marginal representation fails: {w:?}")))?;
    Ok(rep)
}

pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

/// Greedy-cover construction: β ≤ H_m representation of a set-monotone,
/// set-subadditive valuation. Coordinates where x sits at bottom get no
/// value in x's component.
pub fn xos_from_subadditive(v: &TabulatedValuation) -> Result<XosRepresentation> {
    let classes = check_set_classes(v)?;
    if let Some(w) = classes.set_monotone.as_ref().or(classes.set_subadditive.as_ref()) {
        return Err(Error::Precondition(format!(
            "not set-monotone and set-subadditive: x={:?} S={:#b} T={:#b}",
            w.x, w.s, w.t
        )));
    }
    let bot = v.require_bottoms()?;
    let sizes = v.space.sizes();
    let m = sizes.len();
    let hm = harmonic(m);
    let mut components = Vec::new();
    for x in v.space.vectors() {
        let support = (0..m).filter(|&j| x[j] != bot[j]).fold(0usize, |acc, j| acc | 1 << j);
        let mut c = AdditiveComponent::zero(&sizes);
        let mut covered = 0usize;
        while covered != support {
            // candidates A ⊆ support with A ⊄ C: (ratio, |A|, sorted indices)
            let mut best: Option<(f64, u32, usize)> = None;
            for a in 1..=support {
                if a & support != a || a & !covered == 0 {
                    continue;
                }
                let fresh = (a & !covered).count_ones();
                let ratio = v.at_set(&x, a, &bot) / fresh as f64;
                let better = match best {
                    None => true,
                    Some((r, size, prev)) => {
                        ratio < r - TOL
                            || (ratio <= r + TOL
                                && (a.count_ones() < size
                                    || (a.count_ones() == size && lex_less(a, prev))))
                    }
                };
                if better {
                    best = Some((ratio, a.count_ones(), a));
                }
            }
            let (ratio, _, a) = best.expect("support not yet covered");
            for j in 0..m {
                if a >> j & 1 == 1 && covered >> j & 1 == 0 {
                    c.values[j][x[j]] = ratio / hm;
                }
            }
            covered |= a;
        }
        components.push(c);
    }
    let mut rep = XosRepresentation { components, beta: 1.0 };
    rep.beta = beta_of(v, |x| rep.eval(x));
    verify_xos(&rep, v).map_err(|w| Error::Numeric(format!("greedy-cover representation fails: {w:?}")))?;
    Ok(rep)
}

/// Lexicographic comparison of two index sets as sorted lists.
fn lex_less(a: usize, b: usize) -> bool {
    let la: Vec<u32> = (0..usize::BITS).filter(|j| a >> j & 1 == 1).collect();
    let lb: Vec<u32> = (0..usize::BITS).filter(|j| b >> j & 1 == 1).collect();
    la < lb
}

// ---------------------------------------------------------------------------
// ordered spaces

/// Witness that v(lo) > v(hi) although hi ⪰ lo.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneWitness {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

fn dominates(order: &[Vec<Vec<bool>>], a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).enumerate().all(|(j, (&aj, &bj))| order[j][aj][bj])
}

pub fn check_monotone(v: &TabulatedValuation, order: &PartialOrderSpec) -> Result<Option<MonotoneWitness>> {
    v.check_domain()?;
    order.validate_for(&v.space)?;
    let g: Vec<_> = order.coords.iter().map(|c| c.geq_matrix()).collect();
    let xs = v.space.vectors();
    for hi in &xs {
        for lo in &xs {
            if dominates(&g, hi, lo) && v.at(lo) > v.at(hi) + TOL {
                return Ok(Some(MonotoneWitness { lo: lo.clone(), hi: hi.clone() }));
            }
        }
    }
    Ok(None)
}

/// β-XOS representation whose components are upward-closed step functions.
pub fn xos_monotone(v: &TabulatedValuation, order: &PartialOrderSpec) -> Result<XosRepresentation> {
    if let Some(w) = check_monotone(v, order)? {
        return Err(Error::Precondition(format!("not monotone: v({:?}) > v({:?})", w.lo, w.hi)));
    }
    let g: Vec<_> = order.coords.iter().map(|c| c.geq_matrix()).collect();
    let covers = |j: usize, a: usize, b: usize| g[j][a][b];
    let components = single_minded_components(v, &covers)?;
    let mut rep = XosRepresentation { components, beta: 1.0 };
    rep.beta = beta_of(v, |x| rep.eval(x));
    verify_xos(&rep, v).map_err(|w| Error::Numeric(format!("monotone representation fails: {w:?}")))?;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiminishingReport {
    /// (t, y, z) with z ⪰ y and v(t∨y) − v(y) < v(t∨z) − v(z)
    pub diminishing_violation: Option<(Vec<usize>, Vec<usize>, Vec<usize>)>,
    /// (x, x̃) with v(x∨x̃) + v(x∧x̃) > v(x) + v(x̃)
    pub submodular_violation: Option<(Vec<usize>, Vec<usize>)>,
    pub monotone: bool,
    pub distributive: bool,
}

impl DiminishingReport {
    pub fn holds(&self) -> bool {
        self.diminishing_violation.is_none()
    }
    pub fn lattice_submodular(&self) -> bool {
        self.submodular_violation.is_none()
    }
    /// On distributive lattices with monotone v the two verdicts must agree.
    pub fn equivalence_applies(&self) -> bool {
        self.monotone && self.distributive
    }
    pub fn verdicts_agree(&self) -> bool {
        self.holds() == self.lattice_submodular()
    }
}

struct ProductLattice {
    geq: Vec<Vec<Vec<bool>>>,
    meet: Vec<Vec<Vec<usize>>>,
    join: Vec<Vec<Vec<usize>>>,
}

impl ProductLattice {
    fn new(order: &PartialOrderSpec, space: &Space) -> Result<Self> {
        order.validate_for(space)?;
        if !order.is_lattice() {
            return Err(Error::Precondition("meet and join tables are required".into()));
        }
        Ok(ProductLattice {
            geq: order.coords.iter().map(|c| c.geq_matrix()).collect(),
            meet: order.coords.iter().map(|c| c.meet.clone().unwrap()).collect(),
            join: order.coords.iter().map(|c| c.join.clone().unwrap()).collect(),
        })
    }
    fn meet(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        (0..a.len()).map(|j| self.meet[j][a[j]][b[j]]).collect()
    }
    fn join(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        (0..a.len()).map(|j| self.join[j][a[j]][b[j]]).collect()
    }
}

pub fn check_diminishing(v: &TabulatedValuation, lattice: &PartialOrderSpec) -> Result<DiminishingReport> {
    v.check_domain()?;
    let lat = ProductLattice::new(lattice, &v.space)?;
    let xs = v.space.vectors();
    let tol = 1e-9;
    let mut dim = None;
    'outer: for y in &xs {
        for z in &xs {
            if !dominates(&lat.geq, z, y) {
                continue;
            }
            for t in &xs {
                let lhs = v.at(&lat.join(t, y)) - v.at(y);
                let rhs = v.at(&lat.join(t, z)) - v.at(z);
                if lhs < rhs - tol {
                    dim = Some((t.clone(), y.clone(), z.clone()));
                    break 'outer;
                }
            }
        }
    }
    let mut sub = None;
    'outer2: for a in &xs {
        for b in &xs {
            if v.at(&lat.join(a, b)) + v.at(&lat.meet(a, b)) > v.at(a) + v.at(b) + tol {
                sub = Some((a.clone(), b.clone()));
                break 'outer2;
            }
        }
    }
    Ok(DiminishingReport {
        diminishing_violation: dim,
        submodular_violation: sub,
        monotone: check_monotone(v, lattice)?.is_none(),
        distributive: lattice.coords.iter().all(|c| c.is_distributive()),
    })
}

/// Exact XOS with capped-marginal components on a distributive product lattice.
pub fn xos_lattice_capped_marginals(v: &TabulatedValuation, lattice: &PartialOrderSpec) -> Result<XosRepresentation> {
    let report = check_diminishing(v, lattice)?;
    if !report.distributive {
        return Err(Error::Precondition("lattice is not distributive".into()));
    }
    if !report.monotone {
        return Err(Error::Precondition("valuation is not monotone".into()));
    }
    if let Some((t, y, z)) = &report.diminishing_violation {
        return Err(Error::Precondition(format!("diminishing returns fail at t={t:?} y={y:?} z={z:?}")));
    }
    let lat = ProductLattice::new(lattice, &v.space)?;
    let bot: Vec<usize> = lattice
        .coords
        .iter()
        .map(|c| c.bottom().ok_or_else(|| Error::Precondition("lattice without least element".into())))
        .collect::<Result<_>>()?;
    let sizes = v.space.sizes();
    let m = sizes.len();
    let mut components = Vec::new();
    for x in v.space.vectors() {
        let mut c = AdditiveComponent::zero(&sizes);
        for j in 0..m {
            let mut base: Vec<usize> = (0..m).map(|k| if k < j { x[k] } else { bot[k] }).collect();
            let v_prev = v.at(&base);
            for l in 0..sizes[j] {
                base[j] = lat.meet[j][l][x[j]];
                c.values[j][l] = (v.at(&base) - v_prev).max(0.0);
            }
        }
        components.push(c);
    }
    let rep = XosRepresentation { components, beta: 1.0 };
    verify_xos(&rep, v).map_err(|w| Error::Numeric(format!("capped-marginal representation fails: {w:?}")))?;
    for (k, comp) in rep.components.iter().enumerate() {
        for j in 0..m {
            if let Some(w) = coordinate_dmr_violation(&comp.values[j], &lattice.coords[j]) {
                return Err(Error::Numeric(format!("component {k} coordinate {j} lacks diminishing returns at {w:?}")));
            }
        }
    }
    Ok(rep)
}

/// Diminishing marginal returns of a single-coordinate function on its lattice.
pub fn coordinate_dmr_violation(f: &[f64], order: &CoordOrder) -> Option<(usize, usize, usize)> {
    let g = order.geq_matrix();
    let join = order.join.as_ref()?;
    let s = order.size;
    for y in 0..s {
        for z in 0..s {
            if !g[z][y] {
                continue;
            }
            for t in 0..s {
                if f[join[t][y]] - f[y] < f[join[t][z]] - f[z] - 1e-9 {
                    return Some((t, y, z));
                }
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// budgets

pub fn cap_valuation(v: &TabulatedValuation, budget: f64) -> Result<TabulatedValuation> {
    if !(budget >= 0.0) {
        return Err(Error::Validation("budget must be nonnegative".into()));
    }
    Ok(TabulatedValuation { space: v.space.clone(), table: v.table.iter().map(|x| x.min(budget)).collect() })
}

/// Capped representation built from the exact representation, one component per outcome.
pub fn cap_xos(rep: &XosRepresentation, space: &Space, budget: f64) -> Result<XosRepresentation> {
    if rep.beta > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!("cap_xos needs an exact representation, got beta {}", rep.beta)));
    }
    if !(budget >= 0.0) {
        return Err(Error::Validation("budget must be nonnegative".into()));
    }
    let mut components = Vec::with_capacity(space.len());
    for x in space.vectors() {
        let Some(l) = rep.argmax(&x) else {
            return Err(Error::Precondition("empty representation".into()));
        };
        let base = &rep.components[l];
        let mut prefix = 0.0;
        let mut c = base.clone();
        for j in 0..x.len() {
            let own = base.values[j][x[j]];
            let cap = own.min(budget - prefix).max(0.0);
            for val in c.values[j].iter_mut() {
                *val = val.min(cap);
            }
            prefix += own;
        }
        components.push(c);
    }
    Ok(XosRepresentation { components, beta: 1.0 })
}

/// Whether every component of `capped` is a coordinate-wise capping of some
/// component of `rep`.
pub fn is_capping_of(capped: &XosRepresentation, rep: &XosRepresentation) -> bool {
    capped.components.iter().all(|c| {
        rep.components.iter().any(|o| {
            c.values.iter().zip(&o.values).all(|(cv, ov)| {
                let cap = cv.iter().cloned().fold(0.0, f64::max);
                cv.iter().zip(ov).all(|(a, b)| (a - b.min(cap)).abs() < 1e-9)
            })
        })
    })
}

// ---------------------------------------------------------------------------
// hierarchy audit

/// Verdicts of the valuation-class checks on one tabulated valuation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HierarchyAudit {
    pub fractional_beta: f64,
    /// β of the representation extracted from the cover LP dual
    pub xos_beta: f64,
    pub beta_agree: bool,
    /// set classes, for binary spaces only
    pub set_classes: Option<(bool, bool, bool)>,
    /// monotone and submodular: the marginal construction is exact
    pub submodular_exact: Option<bool>,
    /// monotone and subadditive: verified β of the greedy cover, and β ≤ H_m
    pub subadditive_beta: Option<f64>,
    pub subadditive_within_harmonic: Option<bool>,
    /// monotone on the product of chains: diminishing returns ⇔ lattice submodular
    pub diminishing_agree: Option<bool>,
    /// exact XOS instances: cap_xos matches min(v, B)
    pub cap_exact: Option<bool>,
}

impl HierarchyAudit {
    pub fn passes(&self) -> bool {
        self.beta_agree
            && self.submodular_exact != Some(false)
            && self.subadditive_within_harmonic != Some(false)
            && self.diminishing_agree != Some(false)
            && self.cap_exact != Some(false)
    }
}

pub fn audit_hierarchy(v: &TabulatedValuation, budget: f64) -> Result<HierarchyAudit> {
    let fractional_beta = check_fractionally_subadditive(v)?;
    let rep = xos_from_fractional(v)?;
    let mut audit = HierarchyAudit {
        fractional_beta,
        xos_beta: rep.beta,
        beta_agree: (rep.beta - fractional_beta).abs() <= 1e-6,
        set_classes: None,
        submodular_exact: None,
        subadditive_beta: None,
        subadditive_within_harmonic: None,
        diminishing_agree: None,
        cap_exact: None,
    };
    let sizes = v.space.sizes();
    if sizes.iter().all(|&s| s == 2) {
        let c = check_set_classes(v)?;
        audit.set_classes = Some((c.monotone(), c.subadditive(), c.submodular()));
        if c.monotone() && c.submodular() {
            let r = xos_from_submodular(v)?;
            audit.submodular_exact = Some(r.beta <= 1.0 + 1e-9 && verify_xos(&r, v).is_ok());
        }
        if c.monotone() && c.subadditive() {
            let r = xos_from_subadditive(v)?;
            audit.subadditive_beta = Some(r.beta);
            audit.subadditive_within_harmonic = Some(r.beta <= harmonic(sizes.len()) + 1e-9 && verify_xos(&r, v).is_ok());
        }
    }
    let chains = PartialOrderSpec::chains(&sizes);
    let d = check_diminishing(v, &chains)?;
    if d.equivalence_applies() {
        audit.diminishing_agree = Some(d.verdicts_agree());
    }
    if rep.beta <= 1.0 + 1e-9 {
        let capped = cap_xos(&rep, &v.space, budget)?;
        let truth = cap_valuation(v, budget)?;
        let exact = v.space.vectors().iter().all(|x| (capped.eval(x) - truth.at(x)).abs() <= 1e-9);
        audit.cap_exact = Some(exact && is_capping_of(&capped, &rep));
    }
    Ok(audit)
}
