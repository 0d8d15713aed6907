//! Step-reference tracking: feedforward gains, steady state, and assembly
//! of the tracking compensator.
//!
//! Given realized gains `(K, H, G, F)` with `det(I - (A+BK)) != 0` and
//! `det(I - F) != 0`, the feedforward gains
//!
//! ```text
//! M = (C (I - (A+BK))^-1 B)^-1
//! L = -G (I - (A+BK))^-1 B M
//! ```
//!
//! place the steady state at `y_inf = r_plus` with `z_inf = 0`, so the
//! compensator state is already correct whenever the reference changes
//! after settling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, LoopCondition};
use crate::model::{rank_condition, Compensator, LtiSystem, SolutionPair, TrackingCompensator};
use crate::realization::closed_loop;
use crate::Result;

/// Normalized determinant acceptance: `|det| >= 1e-9 * (inf-norm)^dim`.
pub const DET_THRESHOLD_FACTOR: f64 = 1e-9;

/// A step reference: `r_minus` before time zero, `r_plus` from time zero on.
/// Only `r_plus` enters any computation; `r_minus` documents the previous
/// operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    pub r_minus: DVector<f64>,
    pub r_plus: DVector<f64>,
}

impl ReferenceSignal {
    pub fn new(r_minus: DVector<f64>, r_plus: DVector<f64>) -> Result<Self> {
        if r_minus.len() != r_plus.len() {
            return Err(Error::Dimension(
                "reference segments must have equal length".into(),
            ));
        }
        if r_minus.iter().chain(r_plus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference signal"));
        }
        Ok(Self { r_minus, r_plus })
    }

    /// A step from the origin to `r_plus`.
    pub fn step(r_plus: DVector<f64>) -> Result<Self> {
        let zero = DVector::zeros(r_plus.len());
        Self::new(zero, r_plus)
    }
}

/// Steady state of the tracking loop for a constant reference.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub x_inf: DVector<f64>,
    pub z_inf: DVector<f64>,
    pub y_inf: DVector<f64>,
}

/// Feedforward gains plus the determinant report of the two loop
/// conditions.
#[derive(Debug, Clone)]
pub struct FeedforwardGains {
    pub m_gain: DMatrix<f64>,
    pub l_gain: DMatrix<f64>,
    /// `det(I - (A+BK))`
    pub det_state_loop: f64,
    /// `det(I - F)`
    pub det_compensator_loop: f64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Determinant with the normalized acceptance rule, decided in log space so
/// large compensators cannot overflow the threshold.
fn checked_det(m: &DMatrix<f64>, which: LoopCondition) -> Result<f64> {
    let dim = m.nrows();
    let lu = m.clone().lu();
    let det = lu.determinant();
    // ln|det| from the diagonal of U.
    let mut log_det = 0.0_f64;
    let mut singular_pivot = false;
    for i in 0..dim {
        let pivot = lu.u()[(i, i)].abs();
        if pivot == 0.0 {
            singular_pivot = true;
            break;
        }
        log_det += pivot.ln();
    }
    let norm = inf_norm(m).max(f64::MIN_POSITIVE);
    let log_threshold = DET_THRESHOLD_FACTOR.ln() + dim as f64 * norm.ln();
    if singular_pivot || log_det < log_threshold {
        return Err(Error::SingularCondition { which, det });
    }
    Ok(det)
}

/// Compute `(M, L)` and the determinant report. `x1` is the second state
/// block of the solution the gains were realized from; it must agree with
/// `A + BK` and is used to report the state-loop determinant in the same
/// form the solution data carries.
pub fn feedforward_gains(
    sys: &LtiSystem,
    comp: &Compensator,
    x1: &DMatrix<f64>,
) -> Result<FeedforwardGains> {
    let (ok, rank) = rank_condition(sys)?;
    if !ok {
        return Err(Error::RankDeficient {
            rank,
            required: sys.n() + sys.m(),
        });
    }
    if comp.n() != sys.n() || comp.m() != sys.m() {
        return Err(Error::Dimension(
            "system and compensator dimensions differ".into(),
        ));
    }
    let n = sys.n();
    let a_bk = sys.a() + sys.b() * comp.k();
    if x1.nrows() != n || x1.ncols() != n {
        return Err(Error::Dimension(format!(
            "X1 must be {}x{}, got {}x{}",
            n,
            n,
            x1.nrows(),
            x1.ncols()
        )));
    }
    let drift = crate::model::max_abs(&(&a_bk - x1));
    if drift > 1e-6 * crate::model::max_abs(x1).max(1.0) {
        return Err(Error::Assumption(format!(
            "X1 disagrees with A + BK by {drift:.3e}; solution and gains do not belong together"
        )));
    }

    let eye_n = DMatrix::identity(n, n);
    let state_loop = &eye_n - &a_bk;
    let det_state_loop = checked_det(&state_loop, LoopCondition::StateLoop)?;

    let nz = comp.state_dim();
    let comp_loop = DMatrix::identity(nz, nz) - comp.f();
    let det_compensator_loop = checked_det(&comp_loop, LoopCondition::CompensatorLoop)?;

    // W = (I - (A+BK))^-1 B, DC gain C W, M = (C W)^-1, L = -G W M.
    let lu = state_loop.lu();
    let w = lu
        .solve(sys.b())
        .ok_or(Error::SingularCondition {
            which: LoopCondition::StateLoop,
            det: det_state_loop,
        })?;
    let dc = sys.c() * &w;
    let m_gain = dc.try_inverse().ok_or(Error::DcGainSingular)?;
    let l_gain = -(comp.g() * &w * &m_gain);

    Ok(FeedforwardGains {
        m_gain,
        l_gain,
        det_state_loop,
        det_compensator_loop,
    })
}

/// Package the compensator with its feedforward gains.
pub fn assemble_tracking(
    comp: &Compensator,
    m_gain: DMatrix<f64>,
    l_gain: DMatrix<f64>,
) -> Result<TrackingCompensator> {
    TrackingCompensator::new(comp.clone(), l_gain, m_gain)
}

/// Closed-loop augmented system including the reference input matrix
/// `M_r = [B M; L]`.
pub fn closed_loop_tracking(
    sys: &LtiSystem,
    tcomp: &TrackingCompensator,
) -> Result<crate::model::AugmentedSystem> {
    let base = closed_loop(sys, tcomp.base())?;
    let mr = tcomp.reference_input(sys)?;
    Ok(crate::model::AugmentedSystem::assemble(
        base.acl().clone(),
        base.ccl().clone(),
        Some(mr),
        sys.n(),
    ))
}

/// Fixed point of the tracking loop for the constant reference `r_plus`:
/// solves `(I - A_cl) psi_inf = M_r r_plus` and reads off
/// `y_inf = C x_inf`.
pub fn steady_state(
    sys: &LtiSystem,
    tcomp: &TrackingCompensator,
    r_plus: &DVector<f64>,
) -> Result<SteadyState> {
    if r_plus.len() != sys.m() {
        return Err(Error::Dimension(format!(
            "reference has {} entries, input dimension is {}",
            r_plus.len(),
            sys.m()
        )));
    }
    if r_plus.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reference"));
    }
    // The loop conditions are prerequisites for a well-posed fixed point.
    let n = sys.n();
    let a_bk = sys.a() + sys.b() * tcomp.base().k();
    checked_det(
        &(DMatrix::identity(n, n) - &a_bk),
        LoopCondition::StateLoop,
    )?;
    let nz = tcomp.base().state_dim();
    checked_det(
        &(DMatrix::identity(nz, nz) - tcomp.base().f()),
        LoopCondition::CompensatorLoop,
    )?;

    let aug = closed_loop_tracking(sys, tcomp)?;
    let dim = aug.dim();
    let resolvent = DMatrix::identity(dim, dim) - aug.acl();
    let rhs = aug.mr().expect("tracking system carries M_r") * r_plus;
    let psi_inf = resolvent
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("I - A_cl is singular".into()))?;
    let x_inf = psi_inf.rows(0, n).into_owned();
    let z_inf = psi_inf.rows(n, nz).into_owned();
    let y_inf = sys.c() * &x_inf;
    Ok(SteadyState {
        x_inf,
        z_inf,
        y_inf,
    })
}

/// The companion form of `F` predicted by the solution blocks
/// `[-X_1 ... -X_{N-1}; I_{n(N-2)} 0]`; its `det(I - F)` agrees with the
/// realized gains.
pub fn compensator_companion(pair: &SolutionPair) -> DMatrix<f64> {
    let n = pair.n();
    let horizon = pair.horizon();
    let nz = n * (horizon - 1);
    let mut f = DMatrix::zeros(nz, nz);
    if nz == 0 {
        return f;
    }
    let x_rest = pair.x().view((0, n), (n, nz)).into_owned();
    f.view_mut((0, 0), (n, nz)).copy_from(&(-x_rest));
    let lower = n * horizon.saturating_sub(2);
    if lower > 0 {
        f.view_mut((n, 0), (lower, lower))
            .copy_from(&DMatrix::identity(lower, lower));
    }
    f
}
