//! Grid-search test oracle for small ℓ1 programs.
//!
//! Equalities are eliminated exactly through an orthonormal null-space
//! basis, the remaining (at most four) degrees of freedom are gridded over
//! a box, and the smallest objective among feasible samples is reported.
//! The search never touches the interior-point path, which keeps it an
//! independent check of [`solve`](super::solve).

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

use super::L1Program;

/// Result of a grid search: `objective` is `None` when no feasible point
/// was sampled (inconsistent equalities or an empty grid intersection).
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub objective: Option<f64>,
    pub feasible_samples: usize,
    pub total_samples: usize,
    /// Grid spacing in the reduced coordinates.
    pub spacing: f64,
    /// Lipschitz bound of the objective along the reduced coordinates.
    pub lipschitz: f64,
    reduced_dim: usize,
}

impl OracleOutcome {
    /// Bound on how far the sampled minimum can exceed the true minimum,
    /// assuming the minimizer lies inside the searched box: objective
    /// variation across half a grid cell.
    pub fn grid_slack(&self) -> f64 {
        if self.reduced_dim == 0 {
            return 0.0;
        }
        self.lipschitz * 0.5 * self.spacing * (self.reduced_dim as f64).sqrt()
    }
}

/// Exhaustive grid search over the equality-feasible affine subspace.
///
/// `grid` is the number of sample points per reduced coordinate and
/// `radius` the half-width of the searched box in the (orthonormal)
/// reduced coordinates. Refuses programs with more than four remaining
/// degrees of freedom.
pub fn brute_force_oracle(prog: &L1Program, grid: usize, radius: f64) -> Result<OracleOutcome> {
    prog.validate()?;
    if grid < 1 {
        return Err(Error::InvalidArgument("grid must be >= 1".into()));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidArgument("radius must be > 0".into()));
    }
    let nvar = prog.nvar();

    // Dense equality system.
    let ne = prog.num_equalities();
    let mut aeq = DMatrix::zeros(ne, nvar);
    let mut beq = DVector::zeros(ne);
    for (i, (row, rhs)) in prog.eq_rows.iter().zip(prog.beq.iter()).enumerate() {
        for &(j, c) in row {
            aeq[(i, j)] += c;
        }
        beq[i] = *rhs;
    }

    // Particular solution (minimum norm) and orthonormal null-space basis.
    let (v0, basis) = if ne == 0 {
        (DVector::zeros(nvar), DMatrix::identity(nvar, nvar))
    } else {
        let svd = aeq.clone().svd(true, true);
        let sigma_max = svd
            .singular_values
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b));
        let tol = ne.max(nvar) as f64 * f64::EPSILON * sigma_max.max(1.0);
        let v0 = svd
            .solve(&beq, tol)
            .map_err(|e| Error::Numerical(e.to_string()))?;

        // The null space of Aeq equals the eigenspace of Aeq^T Aeq for
        // (numerically) zero eigenvalues; the symmetric eigendecomposition
        // yields a full orthonormal basis, unlike the thin SVD. Sampled
        // points are re-checked against the equalities below, so a
        // borderline rank call only wastes samples instead of lying.
        let gram = aeq.transpose() * &aeq;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let lam_max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        let lam_tol = nvar.max(ne) as f64 * f64::EPSILON * lam_max;
        let null_cols: Vec<usize> = (0..nvar)
            .filter(|&j| eig.eigenvalues[j].abs() <= lam_tol)
            .collect();
        let mut basis = DMatrix::zeros(nvar, null_cols.len());
        for (k, &j) in null_cols.iter().enumerate() {
            basis.set_column(k, &eig.eigenvectors.column(j));
        }

        // Inconsistent equalities: no feasible point exists at all.
        let reach = (&aeq * &v0 - &beq).amax();
        if reach > 1e-7 * (1.0 + beq.amax()) {
            return Ok(OracleOutcome {
                objective: None,
                feasible_samples: 0,
                total_samples: 0,
                spacing: 0.0,
                lipschitz: 0.0,
                reduced_dim: basis.ncols(),
            });
        }
        (v0, basis)
    };

    let dim = basis.ncols();
    if dim > 4 {
        return Err(Error::InvalidArgument(format!(
            "oracle refuses {} degrees of freedom (max 4)",
            dim
        )));
    }

    let penalized = prog.penalized_indices();
    let lipschitz: f64 = penalized
        .iter()
        .map(|&i| basis.row(i).norm())
        .sum();

    // Feasibility slack for grid points sitting on constraint boundaries.
    let feas_tol = 1e-9 * (1.0 + beq.amax().max(radius));
    let eq_tol = 1e-7 * (1.0 + beq.amax());
    let is_feasible = |ev: &super::Evaluation| -> bool {
        ev.ineq_violation <= feas_tol && ev.eq_residual <= eq_tol
    };

    if dim == 0 {
        let ev = prog.evaluate(&v0);
        let feasible = is_feasible(&ev);
        return Ok(OracleOutcome {
            objective: feasible.then_some(ev.objective),
            feasible_samples: usize::from(feasible),
            total_samples: 1,
            spacing: 0.0,
            lipschitz,
            reduced_dim: 0,
        });
    }

    let spacing = if grid > 1 {
        2.0 * radius / (grid as f64 - 1.0)
    } else {
        2.0 * radius
    };
    let coord = |k: usize| -> f64 {
        if grid == 1 {
            0.0
        } else {
            -radius + spacing * k as f64
        }
    };

    let mut best: Option<f64> = None;
    let mut feasible_samples = 0usize;
    let mut total_samples = 0usize;
    let mut index = vec![0usize; dim];
    loop {
        let alpha = DVector::from_fn(dim, |i, _| coord(index[i]));
        let v = &v0 + &basis * &alpha;
        total_samples += 1;
        let ev = prog.evaluate(&v);
        if is_feasible(&ev) {
            feasible_samples += 1;
            best = Some(best.map_or(ev.objective, |b: f64| b.min(ev.objective)));
        }

        // advance the multi-index
        let mut carry = 0;
        loop {
            index[carry] += 1;
            if index[carry] < grid {
                break;
            }
            index[carry] = 0;
            carry += 1;
            if carry == dim {
                return Ok(OracleOutcome {
                    objective: best,
                    feasible_samples,
                    total_samples,
                    spacing,
                    lipschitz,
                    reduced_dim: dim,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interior_zero_box() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_range(&[(0, 1.0)], -1.0, 1.0);
        let out = brute_force_oracle(&p, 41, 2.0).unwrap();
        assert_relative_eq!(out.objective.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_regulation_value() {
        // Same program as in the solver tests; true optimum is 2.
        let mut p = L1Program::new(4);
        p.penalize(2);
        p.penalize(3);
        p.add_equality(&[(0, 1.0)], 1.0);
        p.add_equality(&[(0, 2.0), (2, 1.0), (1, -1.0)], 0.0);
        p.add_equality(&[(1, 2.0), (3, 1.0)], 0.0);
        let out = brute_force_oracle(&p, 81, 6.0).unwrap();
        let obj = out.objective.unwrap();
        assert!(obj >= 2.0 - 1e-9, "oracle can only overestimate, got {obj}");
        assert!(obj <= 2.0 + out.grid_slack() + 1e-9);
    }

    #[test]
    fn empty_feasible_set_reports_none() {
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_equality(&[(0, 1.0)], 1.0);
        p.add_equality(&[(0, 1.0)], 2.0);
        let out = brute_force_oracle(&p, 11, 1.0).unwrap();
        assert!(out.objective.is_none());

        // Consistent equalities but disjoint box.
        let mut p = L1Program::new(1);
        p.penalize(0);
        p.add_equality(&[(0, 1.0)], 0.0);
        p.add_range(&[(0, 1.0)], 1.0, 2.0);
        let out = brute_force_oracle(&p, 11, 1.0).unwrap();
        assert!(out.objective.is_none());
    }

    #[test]
    fn refuses_high_dimension() {
        let mut p = L1Program::new(5);
        p.penalize(0);
        assert!(brute_force_oracle(&p, 3, 1.0).is_err());
    }
}
