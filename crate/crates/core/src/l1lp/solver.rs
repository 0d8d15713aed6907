//! Homogeneous self-dual Mehrotra predictor-corrector interior-point method
//! for linear programs in standard form
//!
//! ```text
//! min c'x   s.t.  A x = b,  x >= 0,
//! ```
//!
//! following the homogeneous algorithm of Andersen & Andersen. The embedding
//! carries the extra scalars `tau` and `kappa`; `tau -> 0` with small scaled
//! residuals certifies that no optimal solution exists (primal or dual
//! infeasibility), otherwise `x / tau` converges to an optimal point.
//!
//! Each iteration factorizes the dense normal matrix `A D A^T`
//! (`D = diag(x ./ z)`) once and reuses the factorization for the predictor
//! and corrector solves. The caller supplies a certification callback that
//! measures the candidate `x / tau` against the tolerances of the *original*
//! problem; the loop stops as soon as the callback accepts, which keeps the
//! reported residuals honest rather than trusting scaled indicators.

use nalgebra::{Cholesky, DVector, Dyn};

use super::sparse::CscMatrix;

pub(crate) struct StandardForm {
    pub a: CscMatrix,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum HsdStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

pub(crate) struct HsdOutcome {
    /// `x / tau` of the accepted (or best) iterate.
    pub x: DVector<f64>,
    pub status: HsdStatus,
    pub iterations: usize,
    /// Per-iteration (primal objective, dual lower estimate) pairs.
    pub trace: Vec<(f64, f64)>,
}

/// Verdict of the caller's certification of a candidate point.
pub(crate) struct Certificate {
    pub accept: bool,
    /// Scalar "badness" used to remember the best iterate for `IterLimit`.
    pub merit: f64,
}

const ALPHA0: f64 = 0.99995;
const BETA_CENTERING: f64 = 0.1;
/// Scaled-indicator tolerance for the infeasibility certificate.
const DETECT_TOL: f64 = 1e-10;

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(f) => Some(f.solve(rhs)),
            Factor::Lu(f) => f.solve(rhs),
        }
    }
}

/// Factor `M`, adding an escalating ridge if the Cholesky decomposition
/// fails, with a final LU fallback.
fn factorize(a: &CscMatrix, dinv: &DVector<f64>) -> Option<Factor> {
    let m = a.normal_matrix(dinv);
    let max_diag = (0..m.nrows())
        .map(|i| m[(i, i)].abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(Factor::Chol(c));
    }
    let mut ridge = 1e-12 * max_diag;
    while ridge <= 1e-4 * max_diag {
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(reg) {
            return Some(Factor::Chol(c));
        }
        ridge *= 100.0;
    }
    let lu = m.lu();
    lu.solve(&DVector::zeros(a.nrows())).map(|_| Factor::Lu(lu))
}

/// Solve the 2x2 block system
/// `[-(D^-1) A^T; A 0] [u; v] = [r1; r2]` via the normal equations:
/// `(A D A^T) v = r2 + A D r1`, `u = D (A^T v - r1)`.
fn sym_solve(
    factor: &Factor,
    a: &CscMatrix,
    dinv: &DVector<f64>,
    r1: &DVector<f64>,
    r2: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let r = r2 + a.mul_vec(&dinv.component_mul(r1));
    let v = factor.solve(&r)?;
    let u = dinv.component_mul(&(a.tr_mul_vec(&v) - r1));
    Some((u, v))
}

struct Delta {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

impl Delta {
    fn is_finite(&self) -> bool {
        self.dx.iter().all(|v| v.is_finite())
            && self.dy.iter().all(|v| v.is_finite())
            && self.dz.iter().all(|v| v.is_finite())
            && self.dtau.is_finite()
            && self.dkappa.is_finite()
    }
}

struct Point {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl Point {
    fn start(nrows: usize, ncols: usize) -> Self {
        Self {
            x: DVector::from_element(ncols, 1.0),
            y: DVector::zeros(nrows),
            z: DVector::from_element(ncols, 1.0),
            tau: 1.0,
            kappa: 1.0,
        }
    }

    /// Largest step through the positivity constraints, scaled by `alpha0`.
    fn step_size(&self, d: &Delta, alpha0: f64) -> f64 {
        let mut alpha: f64 = 1.0;
        for (xi, di) in self.x.iter().zip(d.dx.iter()) {
            if *di < 0.0 {
                alpha = alpha.min(-xi / di);
            }
        }
        for (zi, di) in self.z.iter().zip(d.dz.iter()) {
            if *di < 0.0 {
                alpha = alpha.min(-zi / di);
            }
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha * alpha0
    }

    fn advance(&mut self, d: &Delta, alpha: f64, clamp: bool) {
        self.x.axpy(alpha, &d.dx, 1.0);
        self.y.axpy(alpha, &d.dy, 1.0);
        self.z.axpy(alpha, &d.dz, 1.0);
        self.tau += alpha * d.dtau;
        self.kappa += alpha * d.dkappa;
        if clamp {
            // initial-point refinement takes a full step and pulls every
            // barrier variable back to at least one
            self.x.apply(|v| *v = v.max(1.0));
            self.z.apply(|v| *v = v.max(1.0));
            self.tau = self.tau.max(1.0);
            self.kappa = self.kappa.max(1.0);
        }
    }
}

struct Residuals {
    r_p: DVector<f64>,
    r_d: DVector<f64>,
    r_g: f64,
    mu: f64,
}

impl Residuals {
    fn compute(lp: &StandardForm, pt: &Point) -> Self {
        let r_p = &lp.b * pt.tau - lp.a.mul_vec(&pt.x);
        let r_d = &lp.c * pt.tau - lp.a.tr_mul_vec(&pt.y) - &pt.z;
        let r_g = pt.kappa + lp.c.dot(&pt.x) - lp.b.dot(&pt.y);
        let mu = (pt.x.dot(&pt.z) + pt.tau * pt.kappa) / (pt.x.len() as f64 + 1.0);
        Self { r_p, r_d, r_g, mu }
    }
}

/// One Newton solve for given right-hand sides, sharing the factorization
/// and the `(p, q)` pair across the predictor and corrector stages.
#[allow(clippy::too_many_arguments)]
fn newton_direction(
    lp: &StandardForm,
    pt: &Point,
    factor: &Factor,
    dinv: &DVector<f64>,
    p: &DVector<f64>,
    q: &DVector<f64>,
    rhat_p: &DVector<f64>,
    rhat_d: &DVector<f64>,
    rhat_g: f64,
    rhat_xs: &DVector<f64>,
    rhat_tk: f64,
) -> Option<Delta> {
    let r1 = rhat_d - rhat_xs.component_div(&pt.x);
    let (u, v) = sym_solve(factor, &lp.a, dinv, &r1, rhat_p)?;
    let denom = pt.kappa / pt.tau + (-lp.c.dot(p) + lp.b.dot(q));
    let dtau = (rhat_g + rhat_tk / pt.tau - (-lp.c.dot(&u) + lp.b.dot(&v))) / denom;
    let dx = &u + p * dtau;
    let dy = &v + q * dtau;
    let dz = (rhat_xs - pt.z.component_mul(&dx)).component_div(&pt.x);
    let dkappa = (rhat_tk - pt.kappa * dtau) / pt.tau;
    Some(Delta {
        dx,
        dy,
        dz,
        dtau,
        dkappa,
    })
}

/// Run the homogeneous self-dual loop. `certify` receives the normalized
/// candidate `x / tau`, the duality-gap bound `r_g / tau` and the scaled
/// dual-feasibility residual `‖r_d‖_max / tau`, and decides acceptance
/// against the original problem's tolerances. The gap bound is only
/// meaningful together with a small dual residual.
pub(crate) fn solve_hsd<F>(lp: &StandardForm, max_iter: usize, mut certify: F) -> HsdOutcome
where
    F: FnMut(&DVector<f64>, f64, f64) -> Certificate,
{
    let ncols = lp.a.ncols();
    let nrows = lp.a.nrows();
    let mut pt = Point::start(nrows, ncols);

    let init = Residuals::compute(lp, &pt);
    let norm_p0 = init.r_p.norm().max(1.0);
    let norm_d0 = init.r_d.norm().max(1.0);
    let norm_g0 = init.r_g.abs().max(1.0);
    let mu0 = init.mu;

    let mut trace = Vec::new();
    let mut best_x = &pt.x / pt.tau;
    let mut best_merit = f64::INFINITY;
    let mut initial_refinement = true;

    for iteration in 0..=max_iter {
        let res = Residuals::compute(lp, &pt);
        let primal_obj = lp.c.dot(&pt.x) / pt.tau;
        let dual_est = (lp.b.dot(&pt.y) - pt.kappa) / pt.tau;
        trace.push((primal_obj, dual_est));

        let candidate = &pt.x / pt.tau;
        let gap_bound = res.r_g / pt.tau;
        let dual_inf = res.r_d.amax() / pt.tau;
        let cert = certify(&candidate, gap_bound, dual_inf);
        if cert.accept {
            return HsdOutcome {
                x: candidate,
                status: HsdStatus::Optimal,
                iterations: iteration,
                trace,
            };
        }
        if cert.merit < best_merit {
            best_merit = cert.merit;
            best_x = candidate;
        }

        // Infeasibility: all scaled residuals closed while tau collapsed.
        let rho_p = res.r_p.norm() / norm_p0;
        let rho_d = res.r_d.norm() / norm_d0;
        let rho_g = res.r_g.abs() / norm_g0;
        let rho_mu = res.mu / mu0;
        let tau_collapsed = pt.tau < DETECT_TOL * pt.kappa.max(1.0);
        let residuals_closed = rho_p < DETECT_TOL && rho_d < DETECT_TOL && rho_g < DETECT_TOL;
        if (residuals_closed || rho_mu < DETECT_TOL) && tau_collapsed {
            // For an l1 objective (c >= 0) the program cannot be unbounded,
            // so a collapsed tau always certifies infeasibility.
            return HsdOutcome {
                x: best_x,
                status: HsdStatus::Infeasible,
                iterations: iteration,
                trace,
            };
        }

        if iteration == max_iter {
            break;
        }

        let dinv = pt.x.component_div(&pt.z);
        let Some(factor) = factorize(&lp.a, &dinv) else {
            break;
        };
        let Some((p, q)) = sym_solve(&factor, &lp.a, &dinv, &lp.c, &lp.b) else {
            break;
        };

        // Predictor (affine scaling; full centering on the refinement pass).
        let gamma_pred = if initial_refinement { 1.0 } else { 0.0 };
        let xs_pred = DVector::from_fn(ncols, |i, _| {
            gamma_pred * res.mu - pt.x[i] * pt.z[i]
        });
        let tk_pred = gamma_pred * res.mu - pt.tau * pt.kappa;
        let Some(aff) = newton_direction(
            lp, &pt, &factor, &dinv, &p, &q, &res.r_p, &res.r_d, res.r_g, &xs_pred, tk_pred,
        ) else {
            break;
        };
        if !aff.is_finite() {
            break;
        }
        let alpha_aff = pt.step_size(&aff, 1.0);

        // Corrector with second-order complementarity terms.
        let (gamma, eta) = if initial_refinement {
            (10.0, 1.0)
        } else {
            let g = (1.0 - alpha_aff).powi(2) * BETA_CENTERING.min(1.0 - alpha_aff);
            (g, 1.0 - g)
        };
        let (xs_corr, tk_corr) = if initial_refinement {
            let xs = DVector::from_fn(ncols, |i, _| {
                (1.0 - alpha_aff) * gamma * res.mu
                    - pt.x[i] * pt.z[i]
                    - alpha_aff * alpha_aff * aff.dx[i] * aff.dz[i]
            });
            let tk = (1.0 - alpha_aff) * gamma * res.mu
                - pt.tau * pt.kappa
                - alpha_aff * alpha_aff * aff.dtau * aff.dkappa;
            (xs, tk)
        } else {
            let xs = DVector::from_fn(ncols, |i, _| {
                gamma * res.mu - pt.x[i] * pt.z[i] - aff.dx[i] * aff.dz[i]
            });
            let tk = gamma * res.mu - pt.tau * pt.kappa - aff.dtau * aff.dkappa;
            (xs, tk)
        };
        let rhat_p = &res.r_p * eta;
        let rhat_d = &res.r_d * eta;
        let rhat_g = res.r_g * eta;
        let Some(delta) = newton_direction(
            lp, &pt, &factor, &dinv, &p, &q, &rhat_p, &rhat_d, rhat_g, &xs_corr, tk_corr,
        ) else {
            break;
        };
        if !delta.is_finite() {
            break;
        }

        if initial_refinement {
            pt.advance(&delta, 1.0, true);
            initial_refinement = false;
        } else {
            let alpha = pt.step_size(&delta, ALPHA0);
            pt.advance(&delta, alpha, false);
        }
        if !(pt.tau.is_finite() && pt.kappa.is_finite()) {
            break;
        }
    }

    HsdOutcome {
        x: best_x,
        status: HsdStatus::IterLimit,
        iterations: max_iter,
        trace,
    }
}
