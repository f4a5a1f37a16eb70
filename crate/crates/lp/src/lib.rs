//! Dense two-phase simplex.
//!
//! Problems are stated with arbitrary variable bounds and `<=`, `>=`, `=`
//! rows; internally everything is shifted to nonnegative variables over a
//! dense tableau. Pivoting uses the largest-coefficient rule and switches
//! to Bland's rule while a long run of degenerate pivots lasts, so the
//! solver always terminates. The leaving row comes from a Harris ratio
//! test, which keeps pivots away from tiny elements.

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl Solution {
    pub fn value(&self) -> Option<f64> {
        match self {
            Solution::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("LP too large: {vars} variables x {rows} rows exceeds cap {cap}")]
    TooLarge { vars: usize, rows: usize, cap: usize },
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("numeric breakdown: {0}")]
    Numeric(String),
}

/// Default dimension cap, applied to both variables and rows.
pub const DEFAULT_CAP: usize = 20_000;

const EPS_COST: f64 = 1e-9;
const EPS_PIVOT: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

impl LinearProgram {
    pub fn new(n: usize, sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn add_dense_row(&mut self, coeffs: &[f64], relation: Relation, rhs: f64) {
        let sparse = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        self.add_row(sparse, relation, rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn solve(&self) -> Result<Solution, LpError> {
        self.solve_with_cap(DEFAULT_CAP)
    }

    pub fn solve_with_cap(&self, cap: usize) -> Result<Solution, LpError> {
        let n = self.n_vars();
        if n > cap || self.rows.len() > cap {
            return Err(LpError::TooLarge { vars: n, rows: self.rows.len(), cap });
        }
        self.validate()?;
        let std = Standard::build(self);
        let sol = std.run()?;
        match sol {
            Solution::Optimal { point, .. } => {
                let x = std.recover(&point);
                self.check_residual(&x)?;
                let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                Ok(Solution::Optimal { value, point: x })
            }
            other => Ok(other),
        }
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors differ from objective length".into()));
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::Malformed(format!("objective coefficient {j} not finite")));
            }
            if self.lower[j] > self.upper[j] || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("empty bounds on variable {j}")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {r} rhs not finite")));
            }
            for &(j, c) in &row.coeffs {
                if j >= n || !c.is_finite() {
                    return Err(LpError::Malformed(format!("row {r} has bad entry ({j}, {c})")));
                }
            }
        }
        Ok(())
    }

    /// Largest scaled violation of rows and bounds at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let scale = 1.0 + row.rhs.abs();
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    fn check_residual(&self, x: &[f64]) -> Result<(), LpError> {
        let r = self.max_residual(x);
        if r > RESIDUAL_TOL {
            return Err(LpError::Numeric(format!("constraint residual {r:.3e} after solve")));
        }
        Ok(())
    }
}

/// How an original variable maps onto nonnegative columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Flip { col: usize, offset: f64 },
    /// x = y+ - y-
    Free { pos: usize, neg: usize },
}

struct Standard {
    maps: Vec<VarMap>,
    n_struct: usize,
    /// rows over structural columns, all relations normalized to rhs >= 0
    a: Vec<Vec<(usize, f64)>>,
    rel: Vec<Relation>,
    b: Vec<f64>,
    /// maximize c . y
    c: Vec<f64>,
}

impl Standard {
    fn build(lp: &LinearProgram) -> Self {
        let sign = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
        let mut maps = Vec::with_capacity(lp.n_vars());
        let mut n_struct = 0;
        let mut c = Vec::new();
        let mut extra_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..lp.n_vars() {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            let obj = sign * lp.objective[j];
            if lo.is_finite() {
                maps.push(VarMap::Shift { col: n_struct, offset: lo });
                c.push(obj);
                if hi.is_finite() {
                    extra_rows.push((n_struct, hi - lo));
                }
                n_struct += 1;
            } else if hi.is_finite() {
                maps.push(VarMap::Flip { col: n_struct, offset: hi });
                c.push(-obj);
                n_struct += 1;
            } else {
                maps.push(VarMap::Free { pos: n_struct, neg: n_struct + 1 });
                c.push(obj);
                c.push(-obj);
                n_struct += 2;
            }
        }
        let mut a = Vec::new();
        let mut rel = Vec::new();
        let mut b = Vec::new();
        for row in &lp.rows {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            let mut rhs = row.rhs;
            for &(j, v) in &row.coeffs {
                match maps[j] {
                    VarMap::Shift { col, offset } => {
                        rhs -= v * offset;
                        coeffs.push((col, v));
                    }
                    VarMap::Flip { col, offset } => {
                        rhs -= v * offset;
                        coeffs.push((col, -v));
                    }
                    VarMap::Free { pos, neg } => {
                        coeffs.push((pos, v));
                        coeffs.push((neg, -v));
                    }
                }
            }
            let mut r = row.relation;
            // negate rows with negative rhs, and `>= 0` rows so they get a slack basis
            if rhs < 0.0 || (rhs == 0.0 && r == Relation::Ge) {
                rhs = -rhs;
                for e in coeffs.iter_mut() {
                    e.1 = -e.1;
                }
                r = match r {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            a.push(coeffs);
            rel.push(r);
            b.push(rhs);
        }
        for (col, ub) in extra_rows {
            a.push(vec![(col, 1.0)]);
            rel.push(Relation::Le);
            b.push(ub);
        }
        Standard { maps, n_struct, a, rel, b, c }
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Flip { col, offset } => offset - y[col],
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }

    fn run(&self) -> Result<Solution, LpError> {
        let m = self.a.len();
        let ns = self.n_struct;
        let n_slack = self.rel.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = self.rel.iter().filter(|r| **r != Relation::Le).count();
        let n_cols = ns + n_slack + n_art;
        let art_start = ns + n_slack;
        let mut t = Tableau::new(m, n_cols);
        let mut s = ns;
        let mut art = art_start;
        for r in 0..m {
            for &(j, v) in &self.a[r] {
                t.add(r, j, v);
            }
            t.set(r, n_cols, self.b[r]);
            match self.rel[r] {
                Relation::Le => {
                    t.set(r, s, 1.0);
                    t.basis[r] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t.set(r, s, -1.0);
                    s += 1;
                    t.set(r, art, 1.0);
                    t.basis[r] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t.set(r, art, 1.0);
                    t.basis[r] = art;
                    art += 1;
                }
            }
        }

        if n_art > 0 {
            let mut cost = vec![0.0; n_cols];
            for c in cost.iter_mut().skip(art_start) {
                *c = -1.0;
            }
            t.price(&cost);
            match t.iterate(n_cols)? {
                Phase::Optimal => {}
                Phase::Unbounded => return Err(LpError::Numeric("phase one reported unbounded".into())),
            }
            let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if -t.obj[n_cols] > 1e-9 * scale {
                return Ok(Solution::Infeasible);
            }
            // drive remaining artificials out of the basis where possible
            for r in 0..m {
                if t.basis[r] >= art_start {
                    let best = (0..art_start).max_by(|&a, &b| t.get(r, a).abs().total_cmp(&t.get(r, b).abs()));
                    if let Some(j) = best.filter(|&j| t.get(r, j).abs() > 1e-7) {
                        t.set(r, n_cols, 0.0);
                        t.pivot(r, j);
                    }
                }
            }
        }

        let mut cost = vec![0.0; n_cols];
        cost[..ns].copy_from_slice(&self.c);
        t.price(&cost);
        match t.iterate(art_start)? {
            Phase::Unbounded => Ok(Solution::Unbounded),
            Phase::Optimal => {
                let mut y = vec![0.0; ns];
                for r in 0..m {
                    let j = t.basis[r];
                    if j < ns {
                        y[j] = t.get(r, n_cols).max(0.0);
                    }
                }
                let value = self.c.iter().zip(&y).map(|(c, v)| c * v).sum();
                Ok(Solution::Optimal { value, point: y })
            }
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    /// reduced costs d_j = c_B B^-1 A_j - c_j, last entry the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(m: usize, n_cols: usize) -> Self {
        let width = n_cols + 1;
        Tableau { m, width, data: vec![0.0; m * width], obj: vec![0.0; width], basis: vec![0; m] }
    }

    #[inline]
    fn get(&self, r: usize, j: usize) -> f64 {
        self.data[r * self.width + j]
    }

    #[inline]
    fn set(&mut self, r: usize, j: usize, v: f64) {
        self.data[r * self.width + j] = v;
    }

    #[inline]
    fn add(&mut self, r: usize, j: usize, v: f64) {
        self.data[r * self.width + j] += v;
    }

    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        for (j, c) in cost.iter().enumerate() {
            self.obj[j] = -c;
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.data[r * w..(r + 1) * w];
                for (o, a) in self.obj.iter_mut().zip(row) {
                    *o += cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.get(pr, pc);
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[pc] = 1.0;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.m {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    if *pv != 0.0 {
                        *v -= f * pv;
                    }
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Maximize over columns `0..allowed`.
    fn iterate(&mut self, allowed: usize) -> Result<Phase, LpError> {
        let rhs = self.width - 1;
        let mut bland = false;
        let mut degenerate_run = 0usize;
        let max_iters = 50 * (self.m + self.width) + 10_000;
        for _ in 0..max_iters {
            let entering = if bland {
                (0..allowed).find(|&j| self.obj[j] < -EPS_COST)
            } else {
                let mut best = None;
                let mut best_v = -EPS_COST;
                for j in 0..allowed {
                    if self.obj[j] < best_v {
                        best_v = self.obj[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(pc) = entering else {
                return Ok(Phase::Optimal);
            };
            // Harris ratio test: allow FEAS_TOL of primal slack so that a
            // large pivot can be taken among rows with near-minimal ratio
            let mut theta = f64::INFINITY;
            for r in 0..self.m {
                let a = self.get(r, pc);
                if a > EPS_PIVOT {
                    theta = theta.min((self.get(r, rhs).max(0.0) + FEAS_TOL) / a);
                }
            }
            let near = |r: usize| {
                let a = self.get(r, pc);
                a > EPS_PIVOT && self.get(r, rhs).max(0.0) / a <= theta
            };
            let amax = (0..self.m).filter(|&r| near(r)).map(|r| self.get(r, pc)).fold(0.0, f64::max);
            // the largest pivot, or the smallest basic index while Bland's rule is active
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.get(r, pc);
                if !near(r) || a < 1e-3 * amax {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((lr, _)) => if bland { self.basis[r] < self.basis[lr] } else { a > self.get(lr, pc) },
                };
                if better {
                    leave = Some((r, self.get(r, rhs).max(0.0) / a));
                }
            }
            let Some((pr, ratio)) = leave else {
                return Ok(Phase::Unbounded);
            };
            let before = self.obj[rhs];
            self.pivot(pr, pc);
            let gain = self.obj[rhs] - before;
            if ratio <= 1e-12 || gain <= 1e-11 * (1.0 + before.abs()) {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                // a strict improvement rules out returning to an earlier basis
                degenerate_run = 0;
                bland = false;
            }
            if !self.obj[rhs].is_finite() {
                return Err(LpError::Numeric("objective became non-finite".into()));
            }
        }
        Err(LpError::Numeric("iteration limit reached".into()))
    }
}
