//! A self-contained ℓ1-norm linear-program engine.
//!
//! Minimizes the sum of absolute values of a *selected subset* of variables
//! subject to linear equalities and elementwise interval inequalities:
//!
//! ```text
//! min  Σ_{j in W} |v_j|
//! s.t. Aeq v = beq
//!      lo <= Aineq v <= hi      (entries of lo/hi may be ±∞)
//! ```
//!
//! Penalized coordinates are split as `v = v⁺ - v⁻` with `v⁺, v⁻ >= 0`
//! (free coordinates are split likewise with zero cost), interval rows gain
//! slack variables, and the resulting standard-form LP is handed to the
//! homogeneous self-dual Mehrotra predictor-corrector solver in
//! [`solver`](self). Results are certified against the *original* program:
//! `Optimal` is only reported when the equality residual, the bound
//! violation and the duality-gap bound of the returned point meet the
//! requested tolerances.

mod oracle;
mod solver;
mod sparse;

pub use oracle::{brute_force_oracle, OracleOutcome};

use std::io::Write;

use nalgebra::DVector;

use crate::error::Error;
use crate::Result;

use solver::{solve_hsd, Certificate, HsdStatus, StandardForm};
use sparse::CscMatrix;

/// A sparse row of a constraint matrix: `(column, coefficient)` pairs.
type Row = Vec<(usize, f64)>;

/// The canonical ℓ1 program; see the module docs for the exact form.
#[derive(Debug, Clone)]
pub struct L1Program {
    nvar: usize,
    penalized: Vec<bool>,
    eq_rows: Vec<Row>,
    beq: Vec<f64>,
    ineq_rows: Vec<Row>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Solver tolerances and iteration budget.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Accepted ∞-norm of `Aeq v - beq` and of interval overshoot.
    pub tol_feas: f64,
    /// Accepted duality gap, relative to `1 + |objective|`.
    pub tol_gap: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Residuals and gap certified against the requested tolerances.
    Optimal,
    /// Homogeneous embedding produced an infeasibility certificate.
    Infeasible,
    /// Iteration budget exhausted; `v` holds the best iterate found.
    IterLimit,
}

/// A point returned by [`solve`], always carrying its measured residuals.
#[derive(Debug, Clone)]
pub struct L1Solution {
    pub v: DVector<f64>,
    /// `Σ_{j in W} |v_j|` of the returned `v`.
    pub objective: f64,
    /// ∞-norm of `Aeq v - beq`.
    pub eq_residual: f64,
    /// Largest interval-bound overshoot (0 when all bounds hold).
    pub ineq_violation: f64,
    /// Certified duality-gap bound at the returned point.
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Per-iteration (primal objective, dual lower estimate); the dual
    /// estimate never exceeds the primal value.
    pub trace: Vec<(f64, f64)>,
}

/// Residuals of a candidate point against a program.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub objective: f64,
    pub eq_residual: f64,
    pub ineq_violation: f64,
}

impl L1Program {
    pub fn new(nvar: usize) -> Self {
        Self {
            nvar,
            penalized: vec![false; nvar],
            eq_rows: Vec::new(),
            beq: Vec::new(),
            ineq_rows: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        }
    }

    pub fn nvar(&self) -> usize {
        self.nvar
    }

    /// Add `v_j` to the penalized set (idempotent).
    pub fn penalize(&mut self, var: usize) {
        assert!(var < self.nvar, "variable {var} out of range");
        self.penalized[var] = true;
    }

    /// Indices selected by the ℓ1 objective, in increasing order.
    pub fn penalized_indices(&self) -> Vec<usize> {
        (0..self.nvar).filter(|&j| self.penalized[j]).collect()
    }

    pub fn add_equality(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.eq_rows.push(coeffs.to_vec());
        self.beq.push(rhs);
    }

    /// Add `lo <= Σ coeffs·v <= hi`; use `±INFINITY` for one-sided rows.
    pub fn add_range(&mut self, coeffs: &[(usize, f64)], lo: f64, hi: f64) {
        self.ineq_rows.push(coeffs.to_vec());
        self.lo.push(lo);
        self.hi.push(hi);
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nvar == 0 {
            return Err(Error::InvalidArgument("program has no variables".into()));
        }
        for row in self.eq_rows.iter().chain(self.ineq_rows.iter()) {
            for &(j, v) in row {
                if j >= self.nvar {
                    return Err(Error::Dimension(format!(
                        "coefficient index {} out of range (nvar = {})",
                        j, self.nvar
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("constraint coefficients"));
                }
            }
        }
        for rhs in &self.beq {
            if !rhs.is_finite() {
                return Err(Error::NonFinite("equality right-hand side"));
            }
        }
        for (i, (&l, &h)) in self.lo.iter().zip(self.hi.iter()).enumerate() {
            if l.is_nan() || h.is_nan() {
                return Err(Error::NonFinite("interval bounds"));
            }
            if l > h {
                return Err(Error::InvalidArgument(format!(
                    "interval row {}: lo = {} exceeds hi = {}",
                    i, l, h
                )));
            }
        }
        Ok(())
    }

    /// Objective and constraint residuals of an arbitrary point.
    pub fn evaluate(&self, v: &DVector<f64>) -> Evaluation {
        let objective = (0..self.nvar)
            .filter(|&j| self.penalized[j])
            .map(|j| v[j].abs())
            .sum();
        let mut eq_residual = 0.0_f64;
        for (row, rhs) in self.eq_rows.iter().zip(self.beq.iter()) {
            let dot: f64 = row.iter().map(|&(j, c)| c * v[j]).sum();
            eq_residual = eq_residual.max((dot - rhs).abs());
        }
        let mut ineq_violation = 0.0_f64;
        for (i, row) in self.ineq_rows.iter().enumerate() {
            let dot: f64 = row.iter().map(|&(j, c)| c * v[j]).sum();
            if self.lo[i].is_finite() {
                ineq_violation = ineq_violation.max(self.lo[i] - dot);
            }
            if self.hi[i].is_finite() {
                ineq_violation = ineq_violation.max(dot - self.hi[i]);
            }
        }
        Evaluation {
            objective,
            eq_residual,
            ineq_violation,
        }
    }

    /// Plain-text dump of the canonical program, for cross-checking against
    /// external solvers.
    pub fn dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "l1-program nvar={} eq={} ineq={}",
            self.nvar,
            self.eq_rows.len(),
            self.ineq_rows.len()
        )?;
        write!(w, "penalized:")?;
        for j in self.penalized_indices() {
            write!(w, " {}", j)?;
        }
        writeln!(w)?;
        for (row, rhs) in self.eq_rows.iter().zip(self.beq.iter()) {
            write!(w, "eq {:.17e} :", rhs)?;
            for &(j, c) in row {
                write!(w, " {}:{:.17e}", j, c)?;
            }
            writeln!(w)?;
        }
        for (i, row) in self.ineq_rows.iter().enumerate() {
            write!(w, "range {:.17e} {:.17e} :", self.lo[i], self.hi[i])?;
            for &(j, c) in row {
                write!(w, " {}:{:.17e}", j, c)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn solve(&self, options: &SolveOptions) -> Result<L1Solution> {
        solve(self, options)
    }
}

/// Standard-form image of an [`L1Program`] plus the recovery map.
struct Canonical {
    lp: StandardForm,
    nvar: usize,
}

impl Canonical {
    fn extract(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nvar, |j, _| x[j] - x[self.nvar + j])
    }
}

fn canonicalize(prog: &L1Program) -> Canonical {
    let nvar = prog.nvar;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut c: Vec<f64> = vec![0.0; 2 * nvar];
    for j in 0..nvar {
        if prog.penalized[j] {
            c[j] = 1.0;
            c[nvar + j] = 1.0;
        }
    }

    let push_split_row = |triplets: &mut Vec<(usize, usize, f64)>, row: usize, coeffs: &Row| {
        for &(j, v) in coeffs {
            triplets.push((row, j, v));
            triplets.push((row, nvar + j, -v));
        }
    };

    let mut next_row = 0usize;
    for (coeffs, rhs) in prog.eq_rows.iter().zip(prog.beq.iter()) {
        push_split_row(&mut triplets, next_row, coeffs);
        b.push(*rhs);
        next_row += 1;
    }

    let mut next_col = 2 * nvar;
    for (i, coeffs) in prog.ineq_rows.iter().enumerate() {
        let (lo, hi) = (prog.lo[i], prog.hi[i]);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {}
            (true, true) if lo == hi => {
                push_split_row(&mut triplets, next_row, coeffs);
                b.push(lo);
                next_row += 1;
            }
            (true, true) => {
                // a·v - s = lo,  s + s' = hi - lo,  s, s' >= 0
                push_split_row(&mut triplets, next_row, coeffs);
                triplets.push((next_row, next_col, -1.0));
                b.push(lo);
                next_row += 1;
                triplets.push((next_row, next_col, 1.0));
                triplets.push((next_row, next_col + 1, 1.0));
                b.push(hi - lo);
                next_row += 1;
                next_col += 2;
            }
            (true, false) => {
                // a·v - s = lo
                push_split_row(&mut triplets, next_row, coeffs);
                triplets.push((next_row, next_col, -1.0));
                b.push(lo);
                next_row += 1;
                next_col += 1;
            }
            (false, true) => {
                // a·v + s = hi
                push_split_row(&mut triplets, next_row, coeffs);
                triplets.push((next_row, next_col, 1.0));
                b.push(hi);
                next_row += 1;
                next_col += 1;
            }
        }
    }

    c.resize(next_col, 0.0);
    Canonical {
        lp: StandardForm {
            a: CscMatrix::from_triplets(next_row, next_col, triplets),
            b: DVector::from_vec(b),
            c: DVector::from_vec(c),
        },
        nvar,
    }
}

/// Solve an [`L1Program`]. The returned solution always carries measured
/// residuals; `status` is [`SolveStatus::Optimal`] only when they meet the
/// tolerances in `options`.
pub fn solve(prog: &L1Program, options: &SolveOptions) -> Result<L1Solution> {
    prog.validate()?;
    if options.tol_feas <= 0.0 || options.tol_gap <= 0.0 {
        return Err(Error::InvalidArgument(
            "tolerances must be strictly positive".into(),
        ));
    }

    let canon = canonicalize(prog);

    // No constraint rows at all: zero minimizes the l1 objective outright.
    if canon.lp.a.nrows() == 0 {
        let v = DVector::zeros(prog.nvar);
        return Ok(L1Solution {
            objective: 0.0,
            eq_residual: 0.0,
            ineq_violation: 0.0,
            gap: 0.0,
            status: SolveStatus::Optimal,
            iterations: 0,
            trace: Vec::new(),
            v,
        });
    }

    // Mirrors the solver's best-iterate tracking so the reported gap always
    // belongs to the point that is actually returned.
    let mut best_merit = f64::INFINITY;
    let mut reported_gap = f64::INFINITY;
    let outcome = solve_hsd(
        &canon.lp,
        options.max_iter,
        |x_scaled, gap_bound, dual_inf| {
            let v = canon.extract(x_scaled);
            let ev = prog.evaluate(&v);
            // The gap bound is only trustworthy once the dual iterate is
            // feasible to tolerance (penalized costs are 1, so 2.0 scales
            // the dual residual like 1 + ‖c‖).
            let gap_ok = gap_bound.abs() <= options.tol_gap * (1.0 + ev.objective.abs());
            let dual_ok = dual_inf <= options.tol_feas * 2.0;
            let accept = ev.eq_residual <= options.tol_feas
                && ev.ineq_violation <= options.tol_feas
                && gap_ok
                && dual_ok;
            let merit = ev
                .eq_residual
                .max(ev.ineq_violation)
                .max(dual_inf)
                .max(gap_bound.abs() / (1.0 + ev.objective.abs()));
            if accept {
                reported_gap = gap_bound;
            } else if merit < best_merit {
                best_merit = merit;
                reported_gap = gap_bound;
            }
            Certificate { accept, merit }
        },
    );

    let v = canon.extract(&outcome.x);
    let ev = prog.evaluate(&v);
    let status = match outcome.status {
        HsdStatus::Optimal => SolveStatus::Optimal,
        HsdStatus::Infeasible => SolveStatus::Infeasible,
        HsdStatus::IterLimit => SolveStatus::IterLimit,
    };
    Ok(L1Solution {
        objective: ev.objective,
        eq_residual: ev.eq_residual,
        ineq_violation: ev.ineq_violation,
        gap: reported_gap,
        status,
        iterations: outcome.iterations,
        trace: outcome.trace,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn pinned_variable() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_equality(&[(0, 1.0)], 3.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.v[0], 3.0, epsilon = 1e-7);
        assert_relative_eq!(sol.objective, 3.0, epsilon = 1e-7);
        assert!(sol.eq_residual <= 1e-8);
    }

    #[test]
    fn unit_sum_split() {
        let mut p = L1Program::new(2);
        p.penalize(0);
        p.penalize(1);
        p.add_equality(&[(0, 1.0), (1, 1.0)], 1.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // Any split is optimal; the value is unique.
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-7);
    }

    /// The scalar regulation program: a = 2, b = 1, N = 2, variables
    /// [x0, x1, u0, u1] with u penalized. Hand enumeration: the objective
    /// |u0| + 2|2 + u0| is minimized at u0 = -2 with value 2.
    fn scalar_regulation() -> L1Program {
        let mut p = L1Program::new(4);
        p.penalize(2);
        p.penalize(3);
        p.add_equality(&[(0, 1.0)], 1.0); // x0 = 1
        p.add_equality(&[(0, 2.0), (2, 1.0), (1, -1.0)], 0.0); // 2 x0 + u0 = x1
        p.add_equality(&[(1, 2.0), (3, 1.0)], 0.0); // 2 x1 + u1 = 0
        p
    }

    #[test]
    fn scalar_regulation_program() {
        let sol = solve(&scalar_regulation(), &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-7);
        assert_relative_eq!(sol.v[0], 1.0, epsilon = 1e-6); // X = [1, 0]
        assert_relative_eq!(sol.v[1], 0.0, epsilon = 1e-6);
        assert_relative_eq!(sol.v[2], -2.0, epsilon = 1e-6); // U = [-2, 0]
        assert_relative_eq!(sol.v[3], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn interval_interior_zero() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_range(&[(0, 1.0)], -1.0, 1.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective <= 1e-8);
    }

    #[test]
    fn interval_boundary_optimum() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_range(&[(0, 1.0)], 2.0, 3.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn one_sided_bounds() {
        let mut p = L1Program::new(2);
        p.penalize(0);
        p.penalize(1);
        p.add_range(&[(0, 1.0)], 1.5, f64::INFINITY); // v0 >= 1.5
        p.add_range(&[(1, 1.0)], f64::NEG_INFINITY, -0.5); // v1 <= -0.5
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn free_variable_absorbs_everything() {
        // v0 free and unpenalized, v1 penalized: min |v1| s.t. v0 + v1 = 5.
        let mut p = L1Program::new(2);
        p.penalize(1);
        p.add_equality(&[(0, 1.0), (1, 1.0)], 5.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective <= 1e-7);
        assert_relative_eq!(sol.v[0], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_equality(&[(0, 1.0)], 1.0);
        p.add_equality(&[(0, 1.0)], 2.0);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn crossed_interval_is_rejected() {
        let mut p = L1Program::new(1);
        p.add_range(&[(0, 1.0)], 2.0, 1.0);
        assert!(matches!(
            solve(&p, &opts()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn iteration_limit_reports_best_iterate() {
        let mut o = opts();
        o.max_iter = 1;
        let sol = solve(&scalar_regulation(), &o).unwrap();
        assert_eq!(sol.status, SolveStatus::IterLimit);
        assert!(sol.eq_residual.is_finite());
        assert!(sol.v.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn unconstrained_program_is_zero() {
        let mut p = L1Program::new(3);
        p.penalize(0);
        p.penalize(2);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn weak_duality_along_the_trace() {
        for prog in [scalar_regulation(), {
            let mut p = L1Program::new(2);
            p.penalize(0);
            p.penalize(1);
            p.add_equality(&[(0, 1.0), (1, 2.0)], 3.0);
            p.add_range(&[(0, 1.0), (1, -1.0)], -1.0, 1.0);
            p
        }] {
            let sol = solve(&prog, &opts()).unwrap();
            for (primal, dual) in &sol.trace {
                assert!(
                    dual <= &(primal + 1e-9),
                    "dual estimate {dual} exceeded primal {primal}"
                );
            }
        }
    }

    #[test]
    fn objective_invariant_under_row_permutation_and_redundancy() {
        let base = scalar_regulation();
        let sol = solve(&base, &opts()).unwrap();

        let mut permuted = L1Program::new(4);
        permuted.penalize(2);
        permuted.penalize(3);
        permuted.add_equality(&[(1, 2.0), (3, 1.0)], 0.0);
        permuted.add_equality(&[(0, 1.0)], 1.0);
        permuted.add_equality(&[(0, 2.0), (2, 1.0), (1, -1.0)], 0.0);
        let sol_p = solve(&permuted, &opts()).unwrap();
        assert_relative_eq!(sol.objective, sol_p.objective, max_relative = 1e-6);

        let mut redundant = base.clone();
        redundant.add_equality(&[(0, 1.0)], 1.0); // duplicate of an existing row
        let sol_r = solve(&redundant, &opts()).unwrap();
        assert_relative_eq!(sol.objective, sol_r.objective, max_relative = 1e-6);
    }

    #[test]
    fn objective_is_positively_homogeneous_in_rhs() {
        // Scaling beq by alpha > 0 scales the optimal value by alpha for
        // equality-constrained programs.
        let base = scalar_regulation();
        let obj1 = solve(&base, &opts()).unwrap().objective;
        for alpha in [0.5, 2.0, 10.0] {
            let mut scaled = base.clone();
            for rhs in &mut scaled.beq {
                *rhs *= alpha;
            }
            let obj = solve(&scaled, &opts()).unwrap().objective;
            assert_relative_eq!(obj, alpha * obj1, max_relative = 1e-6);
        }
    }

    #[test]
    fn random_programs_match_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..20 {
            let (prog, radius) = random_bounded_program(&mut rng);
            let sol = solve(&prog, &opts()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
            let grid = 41;
            let oracle = brute_force_oracle(&prog, grid, radius).unwrap();
            let oracle_obj = oracle.objective.expect("oracle found no feasible sample");
            // The oracle samples feasible points only, so it upper-bounds
            // the optimum; the other direction is within the grid slack.
            assert!(
                sol.objective <= oracle_obj + 1e-6,
                "case {case}: solver {} above oracle {}",
                sol.objective,
                oracle_obj
            );
            assert!(
                sol.objective >= oracle_obj - oracle.grid_slack() - 1e-6,
                "case {case}: solver {} below oracle {} - slack {}",
                sol.objective,
                oracle_obj,
                oracle.grid_slack()
            );
        }
    }

    /// Random program with a bounded feasible set: box bounds on every
    /// variable around a feasible anchor, plus a few random equalities.
    pub(crate) fn random_bounded_program(rng: &mut ChaCha8Rng) -> (L1Program, f64) {
        let nvar = rng.random_range(2..=4usize);
        let neq = rng.random_range(0..nvar);
        let mut p = L1Program::new(nvar);
        let anchor: Vec<f64> = (0..nvar).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..neq {
            let coeffs: Vec<(usize, f64)> = (0..nvar)
                .map(|j| (j, rng.random_range(0.3..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
                .collect();
            let rhs: f64 = coeffs.iter().map(|&(j, c)| c * anchor[j]).sum();
            p.add_equality(&coeffs, rhs);
        }
        let mut max_bound = 0.0_f64;
        for j in 0..nvar {
            let slack = rng.random_range(0.5..2.0);
            let bound = anchor[j].abs() + slack;
            p.add_range(&[(j, 1.0)], -bound, bound);
            max_bound = max_bound.max(bound);
        }
        let mut any = false;
        for j in 0..nvar {
            if rng.random_bool(0.7) {
                p.penalize(j);
                any = true;
            }
        }
        if !any {
            p.penalize(0);
        }
        // Reduced coordinates use an orthonormal basis, so the feasible box
        // maps inside a ball of radius sqrt(nvar) * max_bound.
        let radius = (nvar as f64).sqrt() * max_bound + 0.5;
        (p, radius)
    }
}
