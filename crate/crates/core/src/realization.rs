//! Feedback realization: recover the compensator gains from a solution pair.
//!
//! With `Z = [0 I_{n(N-1)}]` and `V = Z (P ⊗ I_n) = [I_{n(N-1)} 0]`, the
//! gains solve
//!
//! ```text
//! [K H; G F] [X; Z] = [U; V],     Psi = [X; Z]
//! ```
//!
//! After the `X_0 = I_n` normalization, `Psi` is unit block-triangular:
//!
//! ```text
//! Psi = [I_n  X_1 ... X_{N-1}]        Psi^-1 = [I_n  -(X_1 ... X_{N-1})]
//!       [0    I_{n(N-1)}      ]                [0     I_{n(N-1)}       ]
//! ```
//!
//! so `[K H; G F] = [U; V] Psi^-1` is formed structurally with no general
//! solve:
//!
//! ```text
//! K = U_0          H = [U_1 ... U_{N-1}] - K [X_1 ... X_{N-1}]
//! G = [I_n; 0]     F = [-X_1 ... -X_{N-1}; I_{n(N-2)}  0]
//! ```

use nalgebra::DMatrix;

use crate::error::Error;
use crate::model::{
    max_abs, shift_block_columns, AugmentedSystem, Compensator, LtiSystem, SolutionPair,
};
use crate::Result;

/// Accepted deviation of `X_0` from the identity before realization is
/// refused; within it, `X_0` is snapped to `I_n` exactly.
pub const X0_TOL: f64 = 1e-6;

/// Accepted relative residual of the realized gains in the defining
/// equation.
pub const REALIZATION_RESIDUAL_TOL: f64 = 1e-9;

/// The matrices of the realization step, kept for verification.
#[derive(Debug, Clone)]
pub struct RealizationData {
    z: DMatrix<f64>,
    v: DMatrix<f64>,
    psi: DMatrix<f64>,
    compensator: Compensator,
    residual: f64,
}

impl RealizationData {
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn compensator(&self) -> &Compensator {
        &self.compensator
    }

    pub fn into_compensator(self) -> Compensator {
        self.compensator
    }

    /// `‖[K H; G F] Psi - [U; V]‖_max` measured at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Solve the realization equation for `(K, H, G, F)`.
pub fn realize(pair: &SolutionPair, n: usize, horizon: usize) -> Result<RealizationData> {
    if pair.n() != n || pair.horizon() != horizon {
        return Err(Error::Dimension(format!(
            "pair is n = {}, N = {}, requested n = {}, N = {}",
            pair.n(),
            pair.horizon(),
            n,
            horizon
        )));
    }
    let m = pair.m();
    let nz = n * (horizon - 1);

    let deviation = max_abs(&(pair.x_block(0) - DMatrix::identity(n, n)));
    if deviation > X0_TOL {
        return Err(Error::X0Deviation { deviation });
    }

    // X with the leading block snapped to the exact identity.
    let mut x = pair.x().clone();
    x.view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let x_rest = x.view((0, n), (n, nz)).into_owned();
    let u_rest = pair.u().view((0, n), (m, nz)).into_owned();

    let k = pair.u_block(0);
    let h = &u_rest - &k * &x_rest;

    let mut g = DMatrix::zeros(nz, n);
    if nz > 0 {
        g.view_mut((0, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
    }
    let mut f = DMatrix::zeros(nz, nz);
    if nz > 0 {
        f.view_mut((0, 0), (n, nz)).copy_from(&(-&x_rest));
        let lower = n * (horizon.saturating_sub(2));
        if lower > 0 {
            f.view_mut((n, 0), (lower, lower))
                .copy_from(&DMatrix::identity(lower, lower));
        }
    }

    // Z = [0 I], V = Z (P ⊗ I_n) = [I 0].
    let mut z = DMatrix::zeros(nz, n * horizon);
    if nz > 0 {
        z.view_mut((0, n), (nz, nz))
            .copy_from(&DMatrix::identity(nz, nz));
    }
    let v = shift_block_columns(&z, n);

    let mut psi = DMatrix::zeros(n * horizon, n * horizon);
    psi.view_mut((0, 0), (n, n * horizon)).copy_from(&x);
    psi.view_mut((n, 0), (nz, n * horizon)).copy_from(&z);

    let compensator = Compensator::new(f, g, h, k)?;

    // [K H; G F] Psi must reproduce [U; V].
    let gains = compensator.stacked_gain();
    let mut uv = DMatrix::zeros(m + nz, n * horizon);
    uv.view_mut((0, 0), (m, n * horizon)).copy_from(pair.u());
    uv.view_mut((m, 0), (nz, n * horizon)).copy_from(&v);
    let residual = max_abs(&(&gains * &psi - uv));
    let allowed = REALIZATION_RESIDUAL_TOL * (1.0 + max_abs(pair.u()));
    if residual > allowed {
        return Err(Error::RealizationResidual { residual });
    }

    Ok(RealizationData {
        z,
        v,
        psi,
        compensator,
        residual,
    })
}

/// Assemble the closed-loop augmented system
/// `A_cl = [A+BK BH; G F]`, `C_cl = [C+DK DH]`.
pub fn closed_loop(sys: &LtiSystem, comp: &Compensator) -> Result<AugmentedSystem> {
    if comp.n() != sys.n() || comp.m() != sys.m() {
        return Err(Error::Dimension(format!(
            "compensator is ({} x {}), system is ({} x {})",
            comp.m(),
            comp.n(),
            sys.m(),
            sys.n()
        )));
    }
    let (n, nz, p) = (sys.n(), comp.state_dim(), sys.p());
    let mut acl = DMatrix::zeros(n + nz, n + nz);
    acl.view_mut((0, 0), (n, n))
        .copy_from(&(sys.a() + sys.b() * comp.k()));
    acl.view_mut((0, n), (n, nz))
        .copy_from(&(sys.b() * comp.h()));
    acl.view_mut((n, 0), (nz, n)).copy_from(comp.g());
    acl.view_mut((n, n), (nz, nz)).copy_from(comp.f());

    let mut ccl = DMatrix::zeros(p, n + nz);
    ccl.view_mut((0, 0), (p, n))
        .copy_from(&(sys.c() + sys.d() * comp.k()));
    ccl.view_mut((0, n), (p, nz))
        .copy_from(&(sys.d() * comp.h()));

    Ok(AugmentedSystem::assemble(acl, ccl, None, n))
}

/// Result of the nilpotency check by explicit powering.
#[derive(Debug, Clone, Copy)]
pub struct NilpotencyReport {
    /// `‖A_cl^N‖_max`
    pub power_norm: f64,
    /// Largest eigenvalue magnitude of `A_cl`.
    pub spectral_radius: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Check `A_cl^N ≈ 0` by repeated multiplication. For an N-independent
/// residual prefer [`similarity_residual`], which this check complements.
pub fn verify_nilpotent(aug: &AugmentedSystem, n_steps: usize) -> NilpotencyReport {
    let acl = aug.acl();
    let mut power = DMatrix::identity(acl.nrows(), acl.ncols());
    for _ in 0..n_steps {
        power = &power * acl;
    }
    let power_norm = max_abs(&power);
    let spectral_radius = acl
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |a, l| a.max(l.norm()));
    let tolerance = 1e-6 * max_abs(acl).max(1.0);
    NilpotencyReport {
        power_norm,
        spectral_radius,
        tolerance,
        passes: power_norm <= tolerance,
    }
}

/// `‖A_cl Psi - Psi (P ⊗ I_n)‖_max`: the similarity identity behind the
/// stability proof, exact to rounding for a correctly realized loop and
/// independent of the horizon length.
pub fn similarity_residual(aug: &AugmentedSystem, realization: &RealizationData) -> f64 {
    let psi = realization.psi();
    let shifted = shift_block_columns(psi, aug.plant_dim());
    max_abs(&(aug.acl() * psi - shifted))
}
