//! Domain types and shared matrix utilities.
//!
//! Everything downstream (program assembly, realization, tracking,
//! simulation) is expressed in terms of the types defined here: a discrete
//! plant [`LtiSystem`], a synthesis request [`SynthesisSpec`], the open-loop
//! solution matrices [`SolutionPair`], the realized [`Compensator`] (plus its
//! tracking extension) and the assembled closed-loop [`AugmentedSystem`].
//!
//! The free functions provide the small amount of matrix algebra the rest of
//! the crate leans on: the nilpotent shift matrix, Kronecker products, the
//! N-step reachability matrix, zero-order-hold discretization and SVD-based
//! rank decisions.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// A discrete-time LTI plant
///
/// ```text
/// x(t+1) = A x(t) + B u(t)
/// y(t)   = C x(t) + D u(t)
/// ```
///
/// with `A: n×n`, `B: n×m`, `C: p×n`, `D: p×m` and `m <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = b.ncols();
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B must have {} rows, got {}",
                n,
                b.nrows()
            )));
        }
        if n == 0 || m == 0 {
            return Err(Error::Dimension("state and input must be non-empty".into()));
        }
        if m > n {
            return Err(Error::Assumption(format!(
                "more inputs than states (m = {} > n = {})",
                m, n
            )));
        }
        let p = c.nrows();
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C must have {} columns, got {}",
                n,
                c.ncols()
            )));
        }
        if d.nrows() != p || d.ncols() != m {
            return Err(Error::Dimension(format!(
                "D must be {}x{}, got {}x{}",
                p,
                m,
                d.nrows(),
                d.ncols()
            )));
        }
        for (mat, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !all_finite(mat) {
                return Err(Error::NonFinite(match name {
                    "A" => "A",
                    "B" => "B",
                    "C" => "C",
                    _ => "D",
                }));
            }
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// Per-channel symmetric output bounds `|y_i(t)| <= s_i`, with `None`
/// meaning the channel is unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBounds {
    limits: Vec<Option<f64>>,
}

impl OutputBounds {
    /// All `p` channels unconstrained.
    pub fn unbounded(p: usize) -> Self {
        Self {
            limits: vec![None; p],
        }
    }

    /// Bounds from per-channel limits; bounded entries must be strictly
    /// positive and finite.
    pub fn from_limits(limits: Vec<Option<f64>>) -> Result<Self> {
        for (i, l) in limits.iter().enumerate() {
            if let Some(s) = l {
                if !s.is_finite() {
                    return Err(Error::NonFinite("output bounds"));
                }
                if *s <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "output bound s[{}] must be > 0, got {}",
                        i, s
                    )));
                }
            }
        }
        Ok(Self { limits })
    }

    /// The same limit on every channel.
    pub fn uniform(p: usize, s: f64) -> Result<Self> {
        Self::from_limits(vec![Some(s); p])
    }

    pub fn len(&self) -> usize {
        self.limits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.limits.is_empty()
    }

    pub fn limit(&self, channel: usize) -> Option<f64> {
        self.limits[channel]
    }

    /// True when no channel carries a bound.
    pub fn is_unbounded(&self) -> bool {
        self.limits.iter().all(|l| l.is_none())
    }

    pub fn limits(&self) -> &[Option<f64>] {
        &self.limits
    }
}

/// Objective selected by the synthesis program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Minimize `||U||_1` (sparse inputs).
    Sparse,
    /// Minimize `||U (P ⊗ I_n) - U||_1` (minimum attention: penalize input
    /// variation); output constraints are dropped in this variant.
    MinimumAttention,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Sparse => write!(f, "sparse"),
            Variant::MinimumAttention => write!(f, "minimum-attention"),
        }
    }
}

/// What to synthesize: horizon, output bounds and the objective variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSpec {
    horizon: usize,
    bounds: OutputBounds,
    variant: Variant,
}

impl SynthesisSpec {
    pub fn new(horizon: usize, bounds: OutputBounds, variant: Variant) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        Ok(Self {
            horizon,
            bounds,
            variant,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn bounds(&self) -> &OutputBounds {
        &self.bounds
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

/// Open-loop solution matrices `X ∈ R^{n×nN}` and `U ∈ R^{m×nN}` together
/// with the certified objective value.
///
/// Column block `t` of `X` (`U`) holds the state (input) at time `t` for all
/// `n` basis initial states simultaneously: `x(t) = X_t x0`, `u(t) = U_t x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    x: DMatrix<f64>,
    u: DMatrix<f64>,
    objective: f64,
}

impl SolutionPair {
    pub fn new(x: DMatrix<f64>, u: DMatrix<f64>, objective: f64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() % n != 0 {
            return Err(Error::Dimension(format!(
                "X must be n x nN, got {}x{}",
                n,
                x.ncols()
            )));
        }
        if u.ncols() != x.ncols() {
            return Err(Error::Dimension(format!(
                "U must have {} columns, got {}",
                x.ncols(),
                u.ncols()
            )));
        }
        if !all_finite(&x) || !all_finite(&u) {
            return Err(Error::NonFinite("solution pair"));
        }
        if !objective.is_finite() || objective < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "objective must be finite and >= 0, got {}",
                objective
            )));
        }
        Ok(Self { x, u, objective })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.x.ncols() / self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// `X_t`, the `n×n` state block at step `t`.
    pub fn x_block(&self, t: usize) -> DMatrix<f64> {
        let n = self.n();
        self.x.view((0, t * n), (n, n)).into_owned()
    }

    /// `U_t`, the `m×n` input block at step `t`.
    pub fn u_block(&self, t: usize) -> DMatrix<f64> {
        let n = self.n();
        self.u.view((0, t * n), (self.m(), n)).into_owned()
    }
}

/// Entrywise ℓ1 norm of a matrix (sum of absolute values).
pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Max-abs-entry norm; same as the vector ∞-norm of the flattened matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `M (P ⊗ I_n)` computed structurally: shift column blocks left by one,
/// zero-filling the last block.
pub fn shift_block_columns(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let cols = m.ncols();
    let mut out = DMatrix::zeros(m.nrows(), cols);
    if cols > n {
        out.view_mut((0, 0), (m.nrows(), cols - n))
            .copy_from(&m.view((0, n), (m.nrows(), cols - n)));
    }
    out
}

/// Dynamic linear state-feedback compensator
///
/// ```text
/// z(t+1) = F z(t) + G x(t),   z(0) = 0
/// u(t)   = H z(t) + K x(t)
/// ```
///
/// with compensator state dimension `n(N-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl Compensator {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        k: DMatrix<f64>,
    ) -> Result<Self> {
        let n = k.ncols();
        let m = k.nrows();
        let nz = f.nrows();
        if n == 0 || m == 0 {
            return Err(Error::Dimension("K must be non-empty".into()));
        }
        if f.ncols() != nz {
            return Err(Error::Dimension(format!(
                "F must be square, got {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if nz % n != 0 {
            return Err(Error::Dimension(format!(
                "compensator state dimension {} is not a multiple of n = {}",
                nz, n
            )));
        }
        if g.nrows() != nz || g.ncols() != n {
            return Err(Error::Dimension(format!(
                "G must be {}x{}, got {}x{}",
                nz,
                n,
                g.nrows(),
                g.ncols()
            )));
        }
        if h.nrows() != m || h.ncols() != nz {
            return Err(Error::Dimension(format!(
                "H must be {}x{}, got {}x{}",
                m,
                nz,
                h.nrows(),
                h.ncols()
            )));
        }
        for mat in [&f, &g, &h, &k] {
            if !all_finite(mat) {
                return Err(Error::NonFinite("compensator gains"));
            }
        }
        Ok(Self { f, g, h, k })
    }

    pub fn n(&self) -> usize {
        self.k.ncols()
    }

    pub fn m(&self) -> usize {
        self.k.nrows()
    }

    /// Compensator state dimension `n(N-1)`.
    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    /// The horizon `N` the gains were realized for.
    pub fn horizon(&self) -> usize {
        self.state_dim() / self.n() + 1
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// The required initial compensator state, identically zero.
    pub fn z0(&self) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }

    /// The full gain matrix `[K H; G F]` acting on `[x; z]`.
    pub fn stacked_gain(&self) -> DMatrix<f64> {
        let (n, m, nz) = (self.n(), self.m(), self.state_dim());
        let mut out = DMatrix::zeros(m + nz, n + nz);
        out.view_mut((0, 0), (m, n)).copy_from(&self.k);
        out.view_mut((0, n), (m, nz)).copy_from(&self.h);
        out.view_mut((m, 0), (nz, n)).copy_from(&self.g);
        out.view_mut((m, n), (nz, nz)).copy_from(&self.f);
        out
    }
}

/// [`Compensator`] extended with feedforward gains for step-reference
/// tracking:
///
/// ```text
/// z(t+1) = F z(t) + G x(t) + L r(t),   z(0) = 0
/// u(t)   = H z(t) + K x(t) + M r(t)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCompensator {
    base: Compensator,
    l: DMatrix<f64>,
    m_gain: DMatrix<f64>,
}

impl TrackingCompensator {
    pub fn new(base: Compensator, l: DMatrix<f64>, m_gain: DMatrix<f64>) -> Result<Self> {
        let m = base.m();
        if m_gain.nrows() != m || m_gain.ncols() != m {
            return Err(Error::Dimension(format!(
                "M must be {}x{}, got {}x{}",
                m,
                m,
                m_gain.nrows(),
                m_gain.ncols()
            )));
        }
        if l.nrows() != base.state_dim() || l.ncols() != m {
            return Err(Error::Dimension(format!(
                "L must be {}x{}, got {}x{}",
                base.state_dim(),
                m,
                l.nrows(),
                l.ncols()
            )));
        }
        if !all_finite(&l) || !all_finite(&m_gain) {
            return Err(Error::NonFinite("feedforward gains"));
        }
        Ok(Self { base, l, m_gain })
    }

    pub fn base(&self) -> &Compensator {
        &self.base
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn m_gain(&self) -> &DMatrix<f64> {
        &self.m_gain
    }

    /// `M_r = [B M; L]`, the reference input matrix of the augmented system.
    pub fn reference_input(&self, sys: &LtiSystem) -> Result<DMatrix<f64>> {
        if sys.n() != self.base.n() || sys.m() != self.base.m() {
            return Err(Error::Dimension(
                "system and compensator dimensions differ".into(),
            ));
        }
        let bm = sys.b() * &self.m_gain;
        let mut out = DMatrix::zeros(sys.n() + self.base.state_dim(), sys.m());
        out.view_mut((0, 0), (sys.n(), sys.m())).copy_from(&bm);
        out.view_mut((sys.n(), 0), (self.base.state_dim(), sys.m()))
            .copy_from(&self.l);
        Ok(out)
    }
}

/// Closed-loop augmented system acting on `psi = [x; z]`:
///
/// ```text
/// psi(t+1) = A_cl psi(t) (+ M_r r(t))
/// y(t)     = C_cl psi(t)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    acl: DMatrix<f64>,
    ccl: DMatrix<f64>,
    mr: Option<DMatrix<f64>>,
    n: usize,
}

impl AugmentedSystem {
    pub(crate) fn assemble(
        acl: DMatrix<f64>,
        ccl: DMatrix<f64>,
        mr: Option<DMatrix<f64>>,
        n: usize,
    ) -> Self {
        Self { acl, ccl, mr, n }
    }

    pub fn acl(&self) -> &DMatrix<f64> {
        &self.acl
    }

    pub fn ccl(&self) -> &DMatrix<f64> {
        &self.ccl
    }

    pub fn mr(&self) -> Option<&DMatrix<f64>> {
        self.mr.as_ref()
    }

    /// Plant state dimension `n` (the augmented state is `n + n(N-1)`).
    pub fn plant_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.acl.nrows()
    }
}

/// The `N×N` nilpotent shift matrix `P` with `I_{N-1}` in its lower-left
/// block; `P e_t = e_{t+1}` and `P^N = 0`.
pub fn shift_matrix(n_steps: usize) -> Result<DMatrix<f64>> {
    if n_steps == 0 {
        return Err(Error::Dimension("shift matrix needs N >= 1".into()));
    }
    let mut p = DMatrix::zeros(n_steps, n_steps);
    for i in 0..n_steps - 1 {
        p[(i + 1, i)] = 1.0;
    }
    Ok(p)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `Φ_N = [A^{N-1}B ... AB B]` together with its numerical rank.
pub fn reachability_matrix(sys: &LtiSystem, n_steps: usize) -> Result<(DMatrix<f64>, usize)> {
    if n_steps == 0 {
        return Err(Error::Dimension("reachability matrix needs N >= 1".into()));
    }
    let (n, m) = (sys.n(), sys.m());
    let mut phi = DMatrix::zeros(n, m * n_steps);
    let mut block = sys.b().clone();
    for t in 0..n_steps {
        // block = A^t B goes into column block N-1-t (B is rightmost).
        phi.view_mut((0, (n_steps - 1 - t) * m), (n, m))
            .copy_from(&block);
        if t + 1 < n_steps {
            block = sys.a() * &block;
        }
    }
    let rank = matrix_rank(&phi);
    Ok((phi, rank))
}

/// Numerical rank: singular values below `max(dim) * eps * sigma_max` count
/// as zero.
pub fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    if sigma_max == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Zero-order-hold discretization of `xdot = Ac x + Bc u` with sampling
/// period `dt`:
///
/// ```text
/// A = exp(Ac dt),   B = (∫_0^dt exp(Ac σ) dσ) Bc
/// ```
///
/// both read off the exponential of the augmented matrix `[[Ac, Bc], [0, 0]] dt`.
pub fn zoh_discretize(
    ac: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ac.nrows();
    if ac.ncols() != n {
        return Err(Error::Dimension(format!(
            "Ac must be square, got {}x{}",
            ac.nrows(),
            ac.ncols()
        )));
    }
    let m = bc.ncols();
    if bc.nrows() != n {
        return Err(Error::Dimension(format!(
            "Bc must have {} rows, got {}",
            n,
            bc.nrows()
        )));
    }
    if !all_finite(ac) || !all_finite(bc) {
        return Err(Error::NonFinite("continuous-time matrices"));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sampling period must be > 0, got {}",
            dt
        )));
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(ac);
    aug.view_mut((0, n), (n, m)).copy_from(bc);
    let e = (aug * dt).exp();
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, m)).into_owned();
    if !all_finite(&a) || !all_finite(&b) {
        return Err(Error::NonFinite("discretized matrices"));
    }
    Ok((a, b))
}

/// Steady-state tracking rank condition: `rank [I-A B; C 0] = n + m`.
///
/// Requires `p = m` and `D = 0`; returns the decision and the computed rank.
pub fn rank_condition(sys: &LtiSystem) -> Result<(bool, usize)> {
    if sys.p() != sys.m() {
        return Err(Error::Assumption(format!(
            "tracking requires p = m, got p = {}, m = {}",
            sys.p(),
            sys.m()
        )));
    }
    if max_abs(sys.d()) != 0.0 {
        return Err(Error::Assumption("tracking requires D = 0".into()));
    }
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let mut s = DMatrix::zeros(n + p, n + m);
    s.view_mut((0, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) - sys.a()));
    s.view_mut((0, n), (n, m)).copy_from(sys.b());
    s.view_mut((n, 0), (p, n)).copy_from(sys.c());
    let rank = matrix_rank(&s);
    Ok((rank == n + m, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn shift_matrix_degenerate_and_small() {
        let p1 = shift_matrix(1).unwrap();
        assert_eq!(p1, DMatrix::zeros(1, 1));
        let p2 = shift_matrix(2).unwrap();
        assert_eq!(p2, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert!(shift_matrix(0).is_err());
    }

    #[test]
    fn shift_matrix_is_nilpotent() {
        for n in 1..=64usize {
            let p = shift_matrix(n).unwrap();
            let mut power = DMatrix::identity(n, n);
            for _ in 0..n {
                power = &power * &p;
            }
            assert_eq!(max_abs(&power), 0.0, "P^{n} must vanish exactly");
        }
        // Cube of the 3-step shift, spelled out.
        let p = shift_matrix(3).unwrap();
        assert_eq!(max_abs(&(&p * &p * &p)), 0.0);
        assert!(max_abs(&(&p * &p)) > 0.0);
    }

    #[test]
    fn kron_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(kron(&i2, &i3), DMatrix::<f64>::identity(6, 6));

        let p = shift_matrix(2).unwrap();
        let i1 = DMatrix::<f64>::identity(1, 1);
        assert_eq!(kron(&p, &i1), p);
    }

    #[test]
    fn kron_shift_advances_basis_blocks() {
        // (P ⊗ I_n)(e_{t+1} ⊗ x0) = e_{t+2} ⊗ x0
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n_steps = 5;
        let n = 3;
        let p = shift_matrix(n_steps).unwrap();
        let pk = kron(&p, &DMatrix::identity(n, n));
        let v = random_matrix(&mut rng, n, 1);
        for t in 0..n_steps - 1 {
            let mut e_t = DMatrix::zeros(n_steps, 1);
            e_t[(t, 0)] = 1.0;
            let mut e_next = DMatrix::zeros(n_steps, 1);
            e_next[(t + 1, 0)] = 1.0;
            let lhs = &pk * kron(&e_t, &v);
            let rhs = kron(&e_next, &v);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn kron_mixed_product(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 2, 3);
            let c = random_matrix(&mut rng, 3, 2);
            let b = random_matrix(&mut rng, 3, 3);
            let d = random_matrix(&mut rng, 3, 3);
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn reachability_examples() {
        let n = 3;
        let sys = LtiSystem::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        let (phi, rank) = reachability_matrix(&sys, 1).unwrap();
        assert_eq!(phi, DMatrix::identity(n, n));
        assert_eq!(rank, n);

        let sys = LtiSystem::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let (phi, rank) = reachability_matrix(&sys, 2).unwrap();
        assert_eq!(phi, DMatrix::from_row_slice(1, 2, &[2.0, 1.0]));
        assert_eq!(rank, 1);
    }

    #[test]
    fn reachability_rank_is_coordinate_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 4;
            let a = random_matrix(&mut rng, n, n);
            let b = random_matrix(&mut rng, n, 1);
            let sys = LtiSystem::new(
                a.clone(),
                b.clone(),
                DMatrix::identity(n, n),
                DMatrix::zeros(n, 1),
            )
            .unwrap();
            let (_, rank) = reachability_matrix(&sys, n).unwrap();

            // Well-conditioned change of coordinates.
            let t = DMatrix::identity(n, n) + random_matrix(&mut rng, n, n) * 0.1;
            let t_inv = t.clone().try_inverse().unwrap();
            let sys_t = LtiSystem::new(
                &t * &a * &t_inv,
                &t * &b,
                DMatrix::identity(n, n),
                DMatrix::zeros(n, 1),
            )
            .unwrap();
            let (_, rank_t) = reachability_matrix(&sys_t, n).unwrap();
            assert_eq!(rank, rank_t);
        }
    }

    #[test]
    fn zoh_zero_dynamics() {
        let n = 3;
        let (a, b) = zoh_discretize(&DMatrix::zeros(n, n), &DMatrix::identity(n, n), 0.5).unwrap();
        assert_relative_eq!(a, DMatrix::identity(n, n), epsilon = 1e-14);
        assert_relative_eq!(b, DMatrix::identity(n, n) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn zoh_matches_hyperbolic_closed_form() {
        // Ac = [[0,1],[1,0]] has exp(Ac t) = [[cosh t, sinh t], [sinh t, cosh t]],
        // and the input integral has the same structure with (sinh t, cosh t - 1).
        let ac = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let bc = DMatrix::from_row_slice(2, 1, &[-2.0, 1.0]);
        let dt = 0.2;
        let (a, b) = zoh_discretize(&ac, &bc, dt).unwrap();

        let (ch, sh) = (dt.cosh(), dt.sinh());
        let a_exact = DMatrix::from_row_slice(2, 2, &[ch, sh, sh, ch]);
        let integral = DMatrix::from_row_slice(2, 2, &[sh, ch - 1.0, ch - 1.0, sh]);
        let b_exact = integral * &bc;
        assert_relative_eq!(a, a_exact, epsilon = 1e-12);
        assert_relative_eq!(b, b_exact, epsilon = 1e-12);
        // Spot values for the record.
        assert_relative_eq!(a[(0, 0)], 1.02007, epsilon = 1e-5);
        assert_relative_eq!(a[(0, 1)], 0.20134, epsilon = 1e-5);
    }

    #[test]
    fn zoh_matches_eigen_decomposition_oracle() {
        // Symmetric Ac is orthogonally diagonalizable: Ac = V diag(lam) V^T.
        // Then A = V diag(exp(lam dt)) V^T and
        // B = V diag((exp(lam dt) - 1)/lam) V^T Bc.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 4;
            let raw = random_matrix(&mut rng, n, n);
            let ac = (&raw + raw.transpose()) * 0.5;
            let bc = random_matrix(&mut rng, n, 2);
            let dt = 0.3;

            let eig = nalgebra::SymmetricEigen::new(ac.clone());
            let v = &eig.eigenvectors;
            let expd = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * dt).exp()));
            let intd = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
                if l.abs() < 1e-12 {
                    dt
                } else {
                    ((l * dt).exp() - 1.0) / l
                }
            }));
            let a_oracle = v * expd * v.transpose();
            let b_oracle = v * intd * v.transpose() * &bc;

            let (a, b) = zoh_discretize(&ac, &bc, dt).unwrap();
            assert_relative_eq!(a, a_oracle, epsilon = 1e-10, max_relative = 1e-10);
            assert_relative_eq!(b, b_oracle, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn zoh_rejects_bad_input() {
        let ac = DMatrix::from_element(1, 1, f64::NAN);
        let bc = DMatrix::from_element(1, 1, 1.0);
        assert!(zoh_discretize(&ac, &bc, 0.1).is_err());
        let ac = DMatrix::from_element(1, 1, 1.0);
        assert!(zoh_discretize(&ac, &bc, 0.0).is_err());
    }

    #[test]
    fn rank_condition_cases() {
        let n = 2;
        let full = LtiSystem::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        let (ok, rank) = rank_condition(&full).unwrap();
        assert!(ok);
        assert_eq!(rank, 2 * n);

        let no_output = LtiSystem::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
        )
        .unwrap();
        let (ok, _) = rank_condition(&no_output).unwrap();
        assert!(!ok);

        // p != m is an assumption violation, not `false`.
        let wide = LtiSystem::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::zeros(1, n),
            DMatrix::zeros(1, n),
        )
        .unwrap();
        assert!(matches!(rank_condition(&wide), Err(Error::Assumption(_))));

        // D != 0 likewise.
        let feedthrough = LtiSystem::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
        )
        .unwrap();
        assert!(matches!(
            rank_condition(&feedthrough),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn lti_system_validation() {
        let ok = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(ok.is_ok());

        // m > n
        let bad = LtiSystem::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
        );
        assert!(matches!(bad, Err(Error::Assumption(_))));

        // non-conforming C
        let bad = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(bad, Err(Error::Dimension(_))));

        // NaN entry
        let bad = LtiSystem::new(
            DMatrix::from_element(1, 1, f64::NAN),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(bad, Err(Error::NonFinite(_))));
    }

    #[test]
    fn output_bounds_validation() {
        assert!(OutputBounds::from_limits(vec![Some(1.0), None]).is_ok());
        assert!(OutputBounds::from_limits(vec![Some(0.0)]).is_err());
        assert!(OutputBounds::from_limits(vec![Some(-1.0)]).is_err());
        assert!(OutputBounds::unbounded(3).is_unbounded());
    }

    #[test]
    fn solution_pair_blocks() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let u = DMatrix::from_row_slice(1, 2, &[-2.0, 0.0]);
        let pair = SolutionPair::new(x, u, 2.0).unwrap();
        assert_eq!(pair.horizon(), 2);
        assert_eq!(pair.x_block(0)[(0, 0)], 1.0);
        assert_eq!(pair.u_block(0)[(0, 0)], -2.0);
        assert_eq!(pair.u_block(1)[(0, 0)], 0.0);
    }

    #[test]
    fn shift_block_columns_matches_kron_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, steps) = (2, 4);
        let m = random_matrix(&mut rng, 3, n * steps);
        let p = shift_matrix(steps).unwrap();
        let expected = &m * kron(&p, &DMatrix::identity(n, n));
        assert_relative_eq!(shift_block_columns(&m, n), expected, epsilon = 1e-14);
    }
}
