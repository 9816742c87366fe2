//! Dense two-phase primal simplex for `min cᵀx, Ax = b, x ≥ 0`.
//!
//! The tableau is generic over its scalar. Exact rational tableaus pivot by
//! Bland's rule. Double-precision tableaus price by largest reduced cost
//! (falling back to Bland's rule while the objective stalls), pick the
//! leaving row by a Harris ratio test, and are periodically rebuilt from the
//! original rows to stop rounding errors from accumulating. Small programs
//! whose floating-point solution fails verification are re-solved over
//! exact rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Programs with at most this many variables get the exact fallback.
pub const EXACT_FALLBACK_MAX_VARS: usize = 64;

/// Residual accepted when verifying a floating-point solution.
const VERIFY_TOL: f64 = 1e-9;

/// An equality-form linear program with sparse rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), num_vars);
        Self {
            num_vars,
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Adds `Σ coef·x_var = rhs`; repeated variables are summed.
    pub fn add_row(&mut self, mut row: Vec<(usize, f64)>, rhs: f64) {
        row.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (v, c) in row {
            match merged.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
    }

    /// `max_i |(Ax - b)_i|` and `min_j x_j`.
    pub fn residual(&self, x: &[f64]) -> (f64, f64) {
        let res = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (row.iter().map(|&(v, c)| c * x[v]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        (res, min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
    /// Solved over exact rationals.
    pub exact: bool,
}

/// Solves in double precision, falling back to exact arithmetic for small
/// programs whose solution fails verification.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let float = Tableau::<f64>::solve_program(lp);
    match float {
        Ok(sol) => {
            let (res, min) = lp.residual(&sol.x);
            if res <= VERIFY_TOL && min >= -VERIFY_TOL {
                return Ok(sol);
            }
            if lp.num_vars <= EXACT_FALLBACK_MAX_VARS {
                return solve_exact(lp);
            }
            Err(Error::Solver(format!(
                "simplex solution failed verification (residual {res:e}, min {min:e})"
            )))
        }
        Err(err) if lp.num_vars <= EXACT_FALLBACK_MAX_VARS => solve_exact(lp).map_err(|_| err),
        Err(err) => Err(err),
    }
}

/// Solves in double precision without verification or fallback.
pub fn solve_float(lp: &LinearProgram) -> Result<LpSolution> {
    Tableau::<f64>::solve_program(lp)
}

/// Solves over exact rationals (inputs converted from their binary values).
pub fn solve_exact(lp: &LinearProgram) -> Result<LpSolution> {
    let mut sol = Tableau::<BigRational>::solve_program(lp)?;
    sol.exact = true;
    Ok(sol)
}

pub(crate) trait Scalar: Clone + Debug {
    /// Floating-point tableaus use Dantzig pricing, the Harris ratio test
    /// and periodic reinversion; exact ones use Bland's rule throughout.
    const FLOAT: bool;
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn abs(&self) -> Self;
    fn less(&self, o: &Self) -> bool;
    /// Strictly positive beyond the pivot tolerance.
    fn is_pivot_positive(&self) -> bool;
    /// Strictly negative beyond the reduced-cost tolerance.
    fn is_improving(&self) -> bool;
    /// `a` and `b` are equal for tie-breaking purposes.
    fn ties(&self, o: &Self) -> bool;
    /// Nonzero beyond the pivot tolerance.
    fn is_pivot_nonzero(&self) -> bool;
    fn infeasibility_exceeds(&self, total_rhs: f64) -> bool;
    /// Rounds values indistinguishable from zero to zero.
    fn chop(&mut self);
}

/// Primal slack of the Harris ratio test.
const HARRIS_SLACK: f64 = 1e-11;
/// Pivots between two reinversions of a floating-point tableau.
const REINVERT_EVERY: usize = 100;
/// Degenerate pivots before Dantzig pricing gives way to Bland's rule.
const STALL_LIMIT: usize = 50;

impl Scalar for f64 {
    const FLOAT: bool = true;
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn is_pivot_positive(&self) -> bool {
        *self > 1e-9
    }
    fn is_improving(&self) -> bool {
        *self < -1e-10
    }
    fn ties(&self, o: &Self) -> bool {
        f64::abs(self - o) <= 1e-12 * (1.0 + f64::abs(*self).max(f64::abs(*o)))
    }
    fn is_pivot_nonzero(&self) -> bool {
        f64::abs(*self) > 1e-9
    }
    fn infeasibility_exceeds(&self, total_rhs: f64) -> bool {
        *self > 1e-9 * (1.0 + total_rhs)
    }
    fn chop(&mut self) {
        if f64::abs(*self) < 1e-14 {
            *self = 0.0;
        }
    }
}

impl Scalar for BigRational {
    const FLOAT: bool = false;
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn is_pivot_positive(&self) -> bool {
        self.is_positive()
    }
    fn is_improving(&self) -> bool {
        self.is_negative()
    }
    fn ties(&self, o: &Self) -> bool {
        self == o
    }
    fn is_pivot_nonzero(&self) -> bool {
        !Zero::is_zero(self)
    }
    fn infeasibility_exceeds(&self, total_rhs: f64) -> bool {
        // The data are rounded binary fractions; exact feasibility is not
        // expected.
        Scalar::to_f64(self) > 1e-12 * (1.0 + total_rhs)
    }
    fn chop(&mut self) {}
}

struct Tableau<S> {
    /// Constraint rows; the last entry of each row is the right-hand side.
    rows: Vec<Vec<S>>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<S>,
    basis: Vec<usize>,
    /// Columns in the current phase (right-hand side excluded).
    width: usize,
    /// Scaled original rows with artificial columns, for reinversion.
    orig: Vec<Vec<S>>,
    /// Original rows still present (redundant ones are dropped).
    active: Vec<usize>,
    /// Costs of the current phase, one per column.
    cost: Vec<S>,
    pivots: usize,
    max_pivots: usize,
}

impl<S: Scalar> Tableau<S> {
    fn solve_program(lp: &LinearProgram) -> Result<LpSolution> {
        let n = lp.num_vars;
        let m = lp.rows.len();
        // Scale rows and objective so tolerances are relative.
        let cscale = lp
            .objective
            .iter()
            .fold(0.0f64, |a, c| a.max(f64::abs(*c)))
            .max(f64::MIN_POSITIVE);
        let width = n + m;
        let mut rows = Vec::with_capacity(m);
        let mut total_rhs = 0.0;
        for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let rscale = row.iter().fold(0.0f64, |a, (_, c)| a.max(f64::abs(*c)));
            let rscale = if rscale > 0.0 { rscale } else { 1.0 };
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut dense = vec![S::zero(); width + 1];
            for &(v, c) in row {
                dense[v] = S::from_f64(sign * c / rscale);
            }
            dense[n + i] = S::from_f64(1.0);
            dense[width] = S::from_f64(sign * b / rscale);
            total_rhs += (b / rscale).abs();
            rows.push(dense);
        }
        let cost = (0..width)
            .map(|j| S::from_f64(if j < n { 0.0 } else { 1.0 }))
            .collect();
        let mut tab = Tableau {
            orig: rows.clone(),
            rows,
            obj: Vec::new(),
            basis: (n..n + m).collect(),
            width,
            active: (0..m).collect(),
            cost,
            pivots: 0,
            max_pivots: 200 * (n + m) + 10_000,
        };
        tab.price();

        // Phase 1.
        tab.run(n)?;
        let infeasibility = tab.obj[width].abs();
        if infeasibility.infeasibility_exceeds(total_rhs) {
            return Err(Error::Solver(format!(
                "linear program infeasible (phase-1 residual {:e})",
                infeasibility.to_f64()
            )));
        }
        // Absorb a residue within tolerance into the right-hand side.
        for (row, &bv) in tab.rows.iter_mut().zip(&tab.basis) {
            if bv >= n {
                row[width] = S::zero();
            }
        }
        tab.drive_out_artificials(n);

        // Phase 2: drop artificial columns.
        for row in &mut tab.rows {
            let rhs = row[width].clone();
            row.truncate(n);
            row.push(rhs);
        }
        tab.width = n;
        tab.cost = lp
            .objective
            .iter()
            .map(|c| S::from_f64(c / cscale))
            .collect();
        tab.price();
        tab.run(n)?;

        let mut x = vec![0.0; n];
        for (row, &bv) in tab.rows.iter().zip(&tab.basis) {
            x[bv] = row[n].to_f64().max(0.0);
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            value,
            pivots: tab.pivots,
            exact: false,
        })
    }

    /// Recomputes the reduced costs from the phase costs.
    fn price(&mut self) {
        let w = self.width;
        let mut obj: Vec<S> = self.cost.iter().cloned().chain([S::zero()]).collect();
        for (row, &bv) in self.rows.iter().zip(&self.basis) {
            let cb = &self.cost[bv];
            if cb.is_zero() {
                continue;
            }
            for j in 0..=w {
                if !row[j].is_zero() {
                    obj[j] = obj[j].sub(&cb.mul(&row[j]));
                }
            }
        }
        for v in &mut obj {
            v.chop();
        }
        self.obj = obj;
    }

    /// Rebuilds the tableau of the current basis from the original rows by
    /// Gauss-Jordan elimination with partial pivoting. Keeps the old
    /// tableau if the basis looks singular or infeasible.
    fn reinvert(&mut self) -> bool {
        let w = self.width;
        let mut rows: Vec<Vec<S>> = self
            .active
            .iter()
            .map(|&k| {
                let o = &self.orig[k];
                let mut r = o[..w].to_vec();
                r.push(o[o.len() - 1].clone());
                r
            })
            .collect();
        let mut owner = vec![usize::MAX; rows.len()];
        for (slot, &c) in self.basis.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (r, row) in rows.iter().enumerate() {
                if owner[r] != usize::MAX {
                    continue;
                }
                let a = row[c].to_f64().abs();
                if best.map_or(true, |(_, b)| a > b) {
                    best = Some((r, a));
                }
            }
            let Some((r, a)) = best else { return false };
            if a < 1e-12 {
                return false;
            }
            owner[r] = slot;
            let p = rows[r][c].clone();
            let support: Vec<usize> = (0..=w).filter(|&j| !rows[r][j].is_zero()).collect();
            for &j in &support {
                rows[r][j] = rows[r][j].div(&p);
            }
            let pivot_row = std::mem::take(&mut rows[r]);
            for (i, row) in rows.iter_mut().enumerate() {
                if i == r || row[c].is_zero() {
                    continue;
                }
                let f = row[c].clone();
                for &j in &support {
                    row[j] = row[j].sub(&f.mul(&pivot_row[j]));
                    row[j].chop();
                }
                row[c] = S::zero();
            }
            rows[r] = pivot_row;
        }
        let mut ordered: Vec<Vec<S>> = vec![Vec::new(); rows.len()];
        for (r, row) in rows.into_iter().enumerate() {
            let b = row[w].to_f64();
            if b < -1e-9 {
                return false;
            }
            ordered[owner[r]] = row;
        }
        for row in &mut ordered {
            if row[w].to_f64() < 0.0 {
                row[w] = S::zero();
            }
        }
        self.rows = ordered;
        self.price();
        true
    }

    /// Runs the simplex over columns `< limit` until optimal.
    fn run(&mut self, limit: usize) -> Result<()> {
        let rhs = self.width;
        let mut since_reinvert = 0;
        let mut stall = 0;
        loop {
            let enter = if S::FLOAT && stall < STALL_LIMIT {
                // Dantzig: most negative reduced cost.
                let mut best: Option<(usize, f64)> = None;
                for j in 0..limit {
                    if self.obj[j].is_improving() {
                        let d = self.obj[j].to_f64();
                        if best.map_or(true, |(_, b)| d < b) {
                            best = Some((j, d));
                        }
                    }
                }
                best.map(|(j, _)| j)
            } else {
                (0..limit).find(|&j| self.obj[j].is_improving())
            };
            let Some(enter) = enter else {
                if S::FLOAT && since_reinvert > 0 && self.reinvert() {
                    since_reinvert = 0;
                    continue;
                }
                return Ok(());
            };
            let leave = if S::FLOAT {
                self.harris_row(enter)
            } else {
                self.bland_row(enter)
            };
            let Some(row) = leave else {
                return Err(Error::Solver("linear program is unbounded".into()));
            };
            let before = self.obj[rhs].to_f64();
            self.pivot(row, enter);
            since_reinvert += 1;
            if S::FLOAT {
                for r in &mut self.rows {
                    let b = r[rhs].to_f64();
                    if b < 0.0 && b > -HARRIS_SLACK {
                        r[rhs] = S::zero();
                    }
                }
                if self.obj[rhs].to_f64() == before {
                    stall += 1;
                } else {
                    stall = 0;
                }
                if since_reinvert >= REINVERT_EVERY && self.reinvert() {
                    since_reinvert = 0;
                }
            }
            if self.pivots > self.max_pivots {
                return Err(Error::Solver(format!(
                    "simplex exceeded {} pivots",
                    self.max_pivots
                )));
            }
        }
    }

    /// Minimum-ratio row, ties to the lowest basic index.
    fn bland_row(&self, enter: usize) -> Option<usize> {
        let rhs = self.width;
        let mut leave: Option<(usize, S)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[enter].is_pivot_positive() {
                continue;
            }
            let ratio = row[rhs].div(&row[enter]);
            let better = match &leave {
                None => true,
                Some((k, best)) => {
                    if ratio.ties(best) {
                        self.basis[i] < self.basis[*k]
                    } else {
                        ratio.less(best)
                    }
                }
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        leave.map(|(i, _)| i)
    }

    /// Two-pass Harris test: among rows whose ratio is within the relaxed
    /// bound, the largest pivot element wins.
    fn harris_row(&self, enter: usize) -> Option<usize> {
        let rhs = self.width;
        let mut bound = f64::INFINITY;
        for row in &self.rows {
            if row[enter].is_pivot_positive() {
                let a = row[enter].to_f64();
                bound = bound.min((row[rhs].to_f64().max(0.0) + HARRIS_SLACK) / a);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[enter].is_pivot_positive() {
                continue;
            }
            let a = row[enter].to_f64();
            if row[rhs].to_f64().max(0.0) / a > bound {
                continue;
            }
            let better = match best {
                None => true,
                Some((k, b)) => a > b || (a == b && self.basis[i] < self.basis[k]),
            };
            if better {
                best = Some((i, a));
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let p = self.rows[r][c].clone();
        let support: Vec<usize> = (0..=self.width)
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        {
            let row = &mut self.rows[r];
            for &j in &support {
                row[j] = row[j].div(&p);
            }
            row[c] = S::from_f64(1.0);
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &support {
                row[j] = row[j].sub(&f.mul(&pivot_row[j]));
                row[j].chop();
            }
            row[c] = S::zero();
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &support {
                self.obj[j] = self.obj[j].sub(&f.mul(&pivot_row[j]));
                self.obj[j].chop();
            }
            self.obj[c] = S::zero();
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }

    /// Pivots basic artificials out at zero level; rows where that is
    /// impossible are linearly dependent and get removed.
    fn drive_out_artificials(&mut self, n: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < n {
                i += 1;
                continue;
            }
            let best = (0..n)
                .filter(|&j| self.rows[i][j].is_pivot_nonzero())
                .fold(None::<(usize, S)>, |acc, j| {
                    let a = self.rows[i][j].abs();
                    match acc {
                        Some((_, ref b)) if !b.less(&a) => acc,
                        _ => Some((j, a)),
                    }
                });
            match best {
                Some((j, _)) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    let k = self.basis[i] - n;
                    self.active.retain(|&a| a != k);
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }
}
