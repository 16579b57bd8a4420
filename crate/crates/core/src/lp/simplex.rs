//! Two-phase dense tableau simplex.
//!
//! The LP is brought to standard form `min c'ᵀz, A'z = b', z ≥ 0, b' ≥ 0`:
//! finite lower bounds are shifted out, upper-only variables reflected, free
//! variables split, and finite upper bounds of shifted variables become
//! explicit rows. Pricing is Dantzig's rule with a switch to Bland's rule
//! after `2·(rows + cols)` consecutive degenerate pivots. Once optimal, the
//! basis is refactored from the original data so primal values and
//! multipliers carry no accumulated tableau error.

use crate::linalg::{self, Matrix};
use crate::scalar::Real;

use super::{LinearProgram, LpError, LpSolution, LpStatus, RowKind, Sense};

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DRIVE_TOL: f64 = 1e-8;
const REINVERT_EVERY: usize = 32;

#[derive(Debug, Clone, Copy)]
enum VarMap<T> {
    /// `x = lower + z[col]`
    Shift { col: usize, lower: T },
    /// `x = upper − z[col]`
    Reflect { col: usize, upper: T },
    /// `x = z[pos] − z[neg]`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct StandardForm<T> {
    maps: Vec<VarMap<T>>,
    /// Dense standard-form matrix including slack and artificial columns.
    a: Vec<Vec<T>>,
    b: Vec<T>,
    /// Phase II costs over all columns.
    cost: Vec<T>,
    kinds: Vec<ColKind>,
    /// Initial basic column per row.
    basis: Vec<usize>,
    /// `±1`: whether the row was negated to make its rhs nonnegative.
    row_sign: Vec<T>,
    /// Number of rows stemming from the user's LP (bound rows follow).
    user_rows: usize,
}

fn standard_form<T: Real>(lp: &LinearProgram<T>) -> StandardForm<T> {
    let n = lp.num_vars();
    let sigma = match lp.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };

    let mut maps = Vec::with_capacity(n);
    let mut nz = 0usize;
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            maps.push(VarMap::Shift { col: nz, lower: l });
            if u.is_finite() {
                bound_rows.push((nz, u - l));
            }
            nz += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Reflect { col: nz, upper: u });
            nz += 1;
        } else {
            maps.push(VarMap::Split { pos: nz, neg: nz + 1 });
            nz += 2;
        }
    }

    // Rows over z: coefficients, kind, rhs.
    let mut rows: Vec<(Vec<T>, RowKind, T)> = Vec::with_capacity(lp.num_rows() + bound_rows.len());
    for row in &lp.rows {
        let mut coeffs = vec![T::zero(); nz];
        let mut rhs = row.rhs;
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    coeffs[col] += a;
                    rhs -= a * lower;
                }
                VarMap::Reflect { col, upper } => {
                    coeffs[col] -= a;
                    rhs -= a * upper;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, row.kind, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut coeffs = vec![T::zero(); nz];
        coeffs[col] = T::one();
        rows.push((coeffs, RowKind::Le, width));
    }

    let m = rows.len();
    let mut row_sign = vec![T::one(); m];
    for (i, (coeffs, kind, rhs)) in rows.iter_mut().enumerate() {
        if *rhs < T::zero() {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *kind = match *kind {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            };
            row_sign[i] = -T::one();
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != RowKind::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != RowKind::Le).count();
    let ncols = nz + n_slack + n_art;

    let mut kinds = vec![ColKind::Structural; nz];
    kinds.extend(std::iter::repeat(ColKind::Slack).take(n_slack));
    kinds.extend(std::iter::repeat(ColKind::Artificial).take(n_art));

    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_slack = nz;
    let mut next_art = nz + n_slack;
    for (coeffs, kind, rhs) in rows {
        let mut full = coeffs;
        full.resize(ncols, T::zero());
        match kind {
            RowKind::Le => {
                full[next_slack] = T::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            RowKind::Ge => {
                full[next_slack] = -T::one();
                next_slack += 1;
                full[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
            RowKind::Eq => {
                full[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        a.push(full);
        b.push(rhs);
    }

    let mut cost = vec![T::zero(); ncols];
    for (j, map) in maps.iter().enumerate() {
        let c = sigma * lp.cost[j];
        match *map {
            VarMap::Shift { col, .. } => cost[col] += c,
            VarMap::Reflect { col, .. } => cost[col] -= c,
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    StandardForm {
        maps,
        a,
        b,
        cost,
        kinds,
        basis,
        row_sign,
        user_rows: lp.num_rows(),
    }
}

struct Tableau<T> {
    m: usize,
    /// Standard-form row behind each tableau row.
    origin: Vec<usize>,
    ncols: usize,
    /// `m × (ncols + 1)`, last column is the rhs.
    t: Vec<T>,
    basis: Vec<usize>,
    /// Reduced costs of the current phase.
    d: Vec<T>,
    iterations: usize,
    limit: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl<T: Real> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * (self.ncols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> T {
        self.t[i * (self.ncols + 1) + self.ncols]
    }

    fn price(&mut self, cost: &[T]) {
        let w = self.ncols + 1;
        self.d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * w..i * w + self.ncols];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.ncols + 1;
        let p = self.at(r, q);
        for k in 0..w {
            self.t[r * w + k] /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [T]| {
            let f = row[q];
            if f != T::zero() {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[q] = T::zero();
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = self.d[q];
        if f != T::zero() {
            for (dj, &pv) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= f * pv;
            }
            self.d[q] = T::zero();
        }
        self.basis[r] = q;
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    /// Returns false (leaving the tableau untouched) if the basis matrix is
    /// numerically singular.
    fn reinvert(&mut self, sf: &StandardForm<T>) -> bool {
        let w = self.ncols + 1;
        let mut t = Vec::with_capacity(self.m * w);
        for &o in &self.origin {
            t.extend_from_slice(&sf.a[o]);
            t.push(sf.b[o]);
        }
        let mut assigned = vec![false; self.m];
        let mut new_basis = vec![0; self.m];
        for &col in &self.basis {
            let mut best: Option<(usize, T)> = None;
            for i in (0..self.m).filter(|&i| !assigned[i]) {
                let a = t[i * w + col].abs();
                if best.is_none_or(|(_, b)| a > b) {
                    best = Some((i, a));
                }
            }
            let Some((r, a)) = best else { return false };
            if a <= T::tol(PIVOT_TOL) {
                return false;
            }
            let p = t[r * w + col];
            for k in 0..w {
                t[r * w + k] /= p;
            }
            let prow: Vec<T> = t[r * w..(r + 1) * w].to_vec();
            for i in (0..self.m).filter(|&i| i != r) {
                let f = t[i * w + col];
                if f != T::zero() {
                    for k in 0..w {
                        t[i * w + k] -= f * prow[k];
                    }
                    t[i * w + col] = T::zero();
                }
            }
            assigned[r] = true;
            new_basis[r] = col;
        }
        self.t = t;
        self.basis = new_basis;
        true
    }

    /// Drops tableau rows that are zero outside the artificial columns,
    /// together with one original row per dependency.
    ///
    /// Row `i` of such a tableau row's `B⁻¹` part (read from the initial
    /// basis columns) is a vanishing combination of original rows; the
    /// original rows to discard are chosen by elimination over those
    /// combinations so the kept rows stay independent.
    fn remove_redundant(&mut self, sf: &StandardForm<T>, drop: &[bool]) {
        let w = self.ncols + 1;
        let m0 = sf.a.len();
        let mut combos: Vec<(Vec<T>, usize)> = Vec::new();
        let mut dropped_origin = vec![false; m0];
        for i in (0..self.m).filter(|&i| drop[i]) {
            let mut lam: Vec<T> = (0..m0).map(|r| self.at(i, sf.basis[r])).collect();
            for (prev, k) in &combos {
                let k = *k;
                let f = lam[k] / prev[k];
                for (l, &p) in lam.iter_mut().zip(prev.iter()) {
                    *l -= f * p;
                }
            }
            let k = (0..m0)
                .filter(|&r| !dropped_origin[r])
                .max_by(|&a, &b| lam[a].abs().partial_cmp(&lam[b].abs()).unwrap())
                .expect("a dependency involves some row");
            dropped_origin[k] = true;
            combos.push((lam, k));
        }
        let keep: Vec<usize> = (0..self.m).filter(|&i| !drop[i]).collect();
        let mut t = Vec::with_capacity(keep.len() * w);
        for &i in &keep {
            t.extend_from_slice(&self.t[i * w..(i + 1) * w]);
        }
        self.t = t;
        self.basis = keep.iter().map(|&i| self.basis[i]).collect();
        self.origin = (0..m0).filter(|&r| !dropped_origin[r]).collect();
        self.m = keep.len();
    }

    /// Runs a phase, then reinverts and re-prices; repeats while the fresh
    /// reduced costs still show an improving column.
    fn run_verified(
        &mut self,
        sf: &StandardForm<T>,
        cost: &[T],
        allowed: &[bool],
    ) -> Result<PhaseOutcome, LpError> {
        for _ in 0..4 {
            if let PhaseOutcome::Unbounded = self.run(sf, cost, allowed)? {
                return Ok(PhaseOutcome::Unbounded);
            }
            if !self.reinvert(sf) {
                return Ok(PhaseOutcome::Optimal);
            }
            self.price(cost);
            let dual_tol = T::tol(DUAL_TOL) * (T::one() + crate::scalar::max_abs(cost));
            let improving = (0..self.ncols)
                .any(|j| allowed[j] && !self.basis.contains(&j) && self.d[j] < -dual_tol);
            if !improving {
                return Ok(PhaseOutcome::Optimal);
            }
        }
        Ok(PhaseOutcome::Optimal)
    }

    fn run(
        &mut self,
        sf: &StandardForm<T>,
        cost: &[T],
        allowed: &[bool],
    ) -> Result<PhaseOutcome, LpError> {
        let piv_tol = T::tol(PIVOT_TOL);
        let dual_tol = T::tol(DUAL_TOL) * (T::one() + crate::scalar::max_abs(cost));
        let degenerate_limit = 2 * (self.m + self.ncols);
        let mut degenerate_run = 0usize;
        let mut fresh = false;
        let mut in_basis = vec![false; self.ncols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        loop {
            let bland = degenerate_run > degenerate_limit;
            let mut entering = None;
            let mut best = -dual_tol;
            for j in 0..self.ncols {
                if !allowed[j] || in_basis[j] {
                    continue;
                }
                let dj = self.d[j];
                if dj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(q) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let col_max = (0..self.m).fold(T::one(), |m, i| m.max(self.at(i, q).abs()));
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a <= piv_tol * col_max {
                    continue;
                }
                let ratio = self.rhs(i).max(T::zero()) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs()
                            <= T::tol(1e-12) * (T::one() + best_ratio.abs());
                        let better_tie = if bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            a > self.at(r, q)
                        };
                        if (tie && better_tie) || (!tie && ratio < best_ratio) {
                            Some((i, ratio))
                        } else {
                            Some((r, best_ratio))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                // Confirm the ray on a freshly inverted tableau first.
                if !fresh && self.reinvert(sf) {
                    self.price(cost);
                    fresh = true;
                    continue;
                }
                return Ok(PhaseOutcome::Unbounded);
            };
            fresh = false;

            if ratio <= T::tol(1e-12) {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            in_basis[self.basis[r]] = false;
            in_basis[q] = true;
            self.pivot(r, q);
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            if self.iterations % REINVERT_EVERY == 0 && self.reinvert(sf) {
                self.price(cost);
            }
            in_basis.iter_mut().for_each(|b| *b = false);
            for &b in &self.basis {
                in_basis[b] = true;
            }
        }
    }
}

pub(super) fn solve<T: Real>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    let sf = standard_form(lp);
    let m = sf.a.len();
    let ncols = sf.kinds.len();
    let w = ncols + 1;

    let mut t = Vec::with_capacity(m * w);
    for (row, &rhs) in sf.a.iter().zip(&sf.b) {
        t.extend_from_slice(row);
        t.push(rhs);
    }
    let mut tab = Tableau {
        m,
        origin: (0..m).collect(),
        ncols,
        t,
        basis: sf.basis.clone(),
        d: Vec::new(),
        iterations: 0,
        limit: 50 * (m + ncols) + 1000,
    };

    // Phase I: minimize the sum of artificials.
    let has_artificials = sf.kinds.contains(&ColKind::Artificial);
    if has_artificials {
        let phase1_cost: Vec<T> = sf
            .kinds
            .iter()
            .map(|k| if *k == ColKind::Artificial { T::one() } else { T::zero() })
            .collect();
        tab.price(&phase1_cost);
        let all = vec![true; ncols];
        tab.run_verified(&sf, &phase1_cost, &all)?;
        let infeasibility: T = (0..tab.m)
            .filter(|&i| sf.kinds[tab.basis[i]] == ColKind::Artificial)
            .map(|i| tab.rhs(i).max(T::zero()))
            .sum();
        let b_norm = crate::scalar::max_abs(&sf.b);
        if infeasibility > T::tol(FEAS_TOL) * (T::one() + b_norm) {
            return Ok(failed(LpStatus::Infeasible, tab.iterations));
        }
        // Drive remaining artificials out of the basis; a row where that is
        // impossible is a linear combination of the others and is dropped.
        let mut redundant = vec![false; tab.m];
        for i in 0..tab.m {
            if sf.kinds[tab.basis[i]] != ColKind::Artificial {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..ncols {
                if sf.kinds[j] == ColKind::Artificial || tab.basis.contains(&j) {
                    continue;
                }
                let a = tab.at(i, j).abs();
                if a > T::tol(DRIVE_TOL) && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => tab.pivot(i, j),
                None => redundant[i] = true,
            }
        }
        if redundant.contains(&true) {
            tab.remove_redundant(&sf, &redundant);
        }
    }

    // Phase II.
    let allowed: Vec<bool> = sf.kinds.iter().map(|k| *k != ColKind::Artificial).collect();
    tab.reinvert(&sf);
    tab.price(&sf.cost);
    if let PhaseOutcome::Unbounded = tab.run_verified(&sf, &sf.cost, &allowed)? {
        return Ok(failed(LpStatus::Unbounded, tab.iterations));
    }

    let (z_basic, y_std) = refactor(&sf, &tab).unwrap_or_else(|| from_tableau(&sf, &tab));

    let mut z = vec![T::zero(); ncols];
    for (i, &col) in tab.basis.iter().enumerate() {
        z[col] = z_basic[i];
    }
    let feas = T::tol(FEAS_TOL);
    for v in z.iter_mut() {
        if *v < T::zero() && *v > -feas {
            *v = T::zero();
        }
    }

    let n = lp.num_vars();
    let mut x = vec![T::zero(); n];
    for (j, map) in sf.maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift { col, lower } => lower + z[col],
            VarMap::Reflect { col, upper } => upper - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        };
        x[j] = x[j].max(lp.lower[j]).min(lp.upper[j]);
    }

    let sigma = match lp.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };
    let duals: Vec<T> = (0..sf.user_rows)
        .map(|i| sigma * sf.row_sign[i] * y_std[i])
        .collect();
    let mut reduced_costs = lp.cost.clone();
    for (row, &y) in lp.rows.iter().zip(&duals) {
        for (r, &a) in reduced_costs.iter_mut().zip(&row.coeffs) {
            *r -= y * a;
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_at(&x),
        x,
        duals,
        reduced_costs,
        iterations: tab.iterations,
    })
}

fn failed<T: Real>(status: LpStatus, iterations: usize) -> LpSolution<T> {
    LpSolution {
        status,
        x: Vec::new(),
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        objective: T::nan(),
        iterations,
    }
}

/// Recomputes `x_B = B⁻¹b` and `y = B⁻ᵀc_B` from the original data.
fn refactor<T: Real>(sf: &StandardForm<T>, tab: &Tableau<T>) -> Option<(Vec<T>, Vec<T>)> {
    let m = tab.m;
    if m == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let mut bmat = Matrix::zeros(m, m);
    for (k, &col) in tab.basis.iter().enumerate() {
        for (i, &o) in tab.origin.iter().enumerate() {
            bmat[(i, k)] = sf.a[o][col];
        }
    }
    let tol = T::tol(1e-11);
    let b: Vec<T> = tab.origin.iter().map(|&o| sf.b[o]).collect();
    let xb = linalg::solve(&bmat, &b, tol)?;
    let cb: Vec<T> = tab.basis.iter().map(|&c| sf.cost[c]).collect();
    let y_kept = linalg::solve(&bmat.transpose(), &cb, tol)?;
    let mut y = vec![T::zero(); sf.a.len()];
    for (k, &o) in tab.origin.iter().enumerate() {
        y[o] = y_kept[k];
    }
    Some((xb, y))
}

/// Fallback extraction straight from the final tableau.
fn from_tableau<T: Real>(sf: &StandardForm<T>, tab: &Tableau<T>) -> (Vec<T>, Vec<T>) {
    let xb = (0..tab.m).map(|i| tab.rhs(i)).collect();
    // The initial basis is an identity, so the multiplier of original row
    // `r` is minus the reduced cost of its initial basic column.
    let y = (0..sf.a.len())
        .map(|r| {
            if tab.origin.contains(&r) {
                let col = sf.basis[r];
                sf.cost[col] - tab.d[col]
            } else {
                T::zero()
            }
        })
        .collect();
    (xb, y)
}
