//! Closed-loop trajectory generation, constraint auditing and the
//! open-loop/closed-loop equivalence check.

use std::io::Write;

use nalgebra::DVector;

use crate::error::Error;
use crate::l1lp::SolveOptions;
use crate::model::{
    Compensator, LtiSystem, OutputBounds, SolutionPair, SynthesisSpec, TrackingCompensator,
    Variant,
};
use crate::synthesis::solve_open_loop;
use crate::tracking::ReferenceSignal;
use crate::Result;

/// Closed-loop input sequences must reproduce the solution columns to this
/// absolute tolerance.
pub const INPUT_MATCH_TOL: f64 = 1e-8;
/// Open- and closed-loop ℓ1 values must agree to this relative tolerance.
pub const VALUE_REL_TOL: f64 = 1e-6;

/// Time-indexed records of a simulation run; every field holds `steps + 1`
/// entries (`t = 0..=steps`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    x: Vec<DVector<f64>>,
    z: Vec<DVector<f64>>,
    u: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
    r: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    /// Number of transitions simulated; records run `t = 0..=steps()`.
    pub fn steps(&self) -> usize {
        self.x.len() - 1
    }

    pub fn x(&self, t: usize) -> &DVector<f64> {
        &self.x[t]
    }

    pub fn z(&self, t: usize) -> &DVector<f64> {
        &self.z[t]
    }

    pub fn u(&self, t: usize) -> &DVector<f64> {
        &self.u[t]
    }

    pub fn y(&self, t: usize) -> &DVector<f64> {
        &self.y[t]
    }

    pub fn r(&self, t: usize) -> Option<&DVector<f64>> {
        self.r.as_ref().map(|r| &r[t])
    }

    /// Tracking error `y(t) - r(t)`; zero vector when no reference is
    /// recorded.
    pub fn error(&self, t: usize) -> DVector<f64> {
        match self.r(t) {
            Some(r) => self.y(t) - r,
            None => DVector::zeros(self.y(t).len()),
        }
    }

    /// CSV with header `t,x1..,z1..,u1..,y1..[,r1..]`, one row per step.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let (nx, nz, nu, ny) = (
            self.x[0].len(),
            self.z[0].len(),
            self.u[0].len(),
            self.y[0].len(),
        );
        write!(w, "t")?;
        for i in 1..=nx {
            write!(w, ",x{}", i)?;
        }
        for i in 1..=nz {
            write!(w, ",z{}", i)?;
        }
        for i in 1..=nu {
            write!(w, ",u{}", i)?;
        }
        for i in 1..=ny {
            write!(w, ",y{}", i)?;
        }
        if self.r.is_some() {
            for i in 1..=nu {
                write!(w, ",r{}", i)?;
            }
        }
        writeln!(w)?;
        for t in 0..=self.steps() {
            write!(w, "{}", t)?;
            let mut write_vec = |v: &DVector<f64>| -> std::io::Result<()> {
                for e in v.iter() {
                    write!(w, ",{}", crate::io::format_f64(*e))?;
                }
                Ok(())
            };
            write_vec(&self.x[t])?;
            write_vec(&self.z[t])?;
            write_vec(&self.u[t])?;
            write_vec(&self.y[t])?;
            if let Some(r) = &self.r {
                write_vec(&r[t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_finite(v: &DVector<f64>, step: usize) -> Result<()> {
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::Divergence { step });
    }
    Ok(())
}

/// Iterate the plant under the regulation compensator for `steps`
/// transitions from `x0` (with `z(0) = 0`).
pub fn run_closed_loop(
    sys: &LtiSystem,
    comp: &Compensator,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if x0.len() != sys.n() || comp.n() != sys.n() || comp.m() != sys.m() {
        return Err(Error::Dimension(
            "simulation dimensions do not conform".into(),
        ));
    }
    let mut x = x0.clone();
    let mut z = comp.z0();
    let mut traj = Trajectory {
        x: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        r: None,
    };
    for t in 0..=steps {
        let u = comp.h() * &z + comp.k() * &x;
        let y = sys.c() * &x + sys.d() * &u;
        check_finite(&x, t)?;
        check_finite(&u, t)?;
        traj.x.push(x.clone());
        traj.z.push(z.clone());
        traj.u.push(u.clone());
        traj.y.push(y);
        if t < steps {
            let x_next = sys.a() * &x + sys.b() * &u;
            let z_next = comp.f() * &z + comp.g() * &x;
            x = x_next;
            z = z_next;
        }
    }
    Ok(traj)
}

/// Iterate the tracking loop with `r(t) = r_plus` for all `t >= 0`.
pub fn run_tracking(
    sys: &LtiSystem,
    tcomp: &TrackingCompensator,
    x0: &DVector<f64>,
    reference: &ReferenceSignal,
    steps: usize,
) -> Result<Trajectory> {
    let comp = tcomp.base();
    if steps < comp.horizon() {
        return Err(Error::InvalidArgument(format!(
            "tracking runs need at least N = {} steps",
            comp.horizon()
        )));
    }
    if x0.len() != sys.n() || comp.n() != sys.n() || comp.m() != sys.m() {
        return Err(Error::Dimension(
            "simulation dimensions do not conform".into(),
        ));
    }
    if reference.r_plus.len() != sys.m() {
        return Err(Error::Dimension(
            "reference dimension must match the input dimension".into(),
        ));
    }
    let r = &reference.r_plus;
    let mut x = x0.clone();
    let mut z = comp.z0();
    let mut traj = Trajectory {
        x: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        r: Some(Vec::with_capacity(steps + 1)),
    };
    for t in 0..=steps {
        let u = comp.h() * &z + comp.k() * &x + tcomp.m_gain() * r;
        let y = sys.c() * &x + sys.d() * &u;
        check_finite(&x, t)?;
        check_finite(&u, t)?;
        traj.x.push(x.clone());
        traj.z.push(z.clone());
        traj.u.push(u.clone());
        traj.y.push(y);
        traj.r.as_mut().unwrap().push(r.clone());
        if t < steps {
            let x_next = sys.a() * &x + sys.b() * &u;
            let z_next = comp.f() * &z + comp.g() * &x + tcomp.l() * r;
            x = x_next;
            z = z_next;
        }
    }
    Ok(traj)
}

/// Per-basis-vector comparison of the closed loop against the open-loop
/// optimum.
#[derive(Debug, Clone)]
pub struct BasisEquivalence {
    pub basis_index: usize,
    /// `max_t ‖u(t) - U_t e_i‖_max` over `t < N`.
    pub input_mismatch: f64,
    pub closed_loop_value: f64,
    pub open_loop_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub checks: Vec<BasisEquivalence>,
}

impl EquivalenceReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Corollary check: for each basis initial state, the compensator must
/// replay the corresponding solution columns exactly, and its ℓ1 cost must
/// equal the open-loop optimal value. Values are compared, not minimizer
/// vectors: the open-loop program may have several minimizers.
pub fn check_equivalence(
    sys: &LtiSystem,
    spec: &SynthesisSpec,
    pair: &SolutionPair,
    comp: &Compensator,
    options: &SolveOptions,
) -> Result<EquivalenceReport> {
    if spec.variant() != Variant::Sparse {
        return Err(Error::Assumption(
            "the open/closed-loop equivalence is stated for the sparse objective".into(),
        ));
    }
    let n = sys.n();
    let horizon = spec.horizon();
    let mut checks = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let traj = run_closed_loop(sys, comp, &e, horizon)?;
        let mut input_mismatch = 0.0_f64;
        let mut closed_value = 0.0_f64;
        for t in 0..horizon {
            let expected = pair.u_block(t).column(i).into_owned();
            input_mismatch = input_mismatch.max((traj.u(t) - &expected).amax());
            closed_value += traj.u(t).iter().map(|v| v.abs()).sum::<f64>();
        }
        let open = solve_open_loop(sys, &e, horizon, spec.bounds(), options)?;
        let denom = open.objective.abs().max(1e-12);
        let value_ok = (closed_value - open.objective).abs() <= VALUE_REL_TOL * denom
            || (closed_value - open.objective).abs() <= 1e-9;
        checks.push(BasisEquivalence {
            basis_index: i,
            input_mismatch,
            closed_loop_value: closed_value,
            open_loop_value: open.objective,
            pass: input_mismatch <= INPUT_MATCH_TOL && value_ok,
        });
    }
    Ok(EquivalenceReport { checks })
}

/// Output-bound audit of a trajectory.
#[derive(Debug, Clone)]
pub struct ConstraintAudit {
    /// Worst overshoot per channel, `max_t max(0, |y_i(t)| - s_i)`.
    pub per_channel: Vec<f64>,
}

impl ConstraintAudit {
    pub fn worst(&self) -> f64 {
        self.per_channel.iter().fold(0.0_f64, |a, &b| a.max(b))
    }
}

pub fn audit_constraints(traj: &Trajectory, bounds: &OutputBounds) -> ConstraintAudit {
    let channels = bounds.len();
    let mut per_channel = vec![0.0_f64; channels];
    for t in 0..=traj.steps() {
        let y = traj.y(t);
        for ch in 0..channels.min(y.len()) {
            if let Some(s) = bounds.limit(ch) {
                per_channel[ch] = per_channel[ch].max(y[ch].abs() - s);
            }
        }
    }
    for v in &mut per_channel {
        *v = v.max(0.0);
    }
    ConstraintAudit { per_channel }
}
