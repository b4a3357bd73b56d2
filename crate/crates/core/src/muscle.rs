//! Virtual antagonistic muscle pair acting on a single revolute joint.
//!
//! Each joint is driven by two muscles whose normalized fiber lengths are
//! affine in the joint angle. A muscle produces
//! `f_max * (FL(l) * FV(v) * activation + FP(l))` along its line of pull and
//! the joint torque is the signed sum of both muscles.
//!
//! Sign convention: muscle 1 has a positive length slope (`a1 > 0`), so it
//! lengthens as `q` grows and therefore pulls the joint towards negative `q`.
//! Muscle 2 is its mirror image. With this convention co-contraction yields
//! restoring stiffness on the ascending limb of FL and positive damping
//! through FV, i.e. `tau ~= -4 * f_max * beta * a1 * q_dot` near rest.

use crate::scalar::{ensure_finite, Real};
use crate::{invalid, Result};

/// Parametrization of one antagonistic muscle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleParams<T> {
    /// Lower knot of the force-length bump.
    pub l_min: T,
    /// Upper knot of the force-length bump.
    pub l_max: T,
    /// Force-velocity plateau for fast lengthening.
    pub fv_max: T,
    /// Passive force scale.
    pub fp_max: T,
    /// Normalized fiber length at one end of the joint range.
    pub lce_min: T,
    /// Normalized fiber length at the other end of the joint range.
    pub lce_max: T,
    /// Peak force scale, folded with the moment arm into torque units.
    pub f_max: T,
    pub phi_min: T,
    pub phi_max: T,
    /// Activation time constant in seconds.
    pub tau_act: T,
    /// Velocity scaling inside FV; sets the emulated damping strength.
    pub beta: T,
}

impl<T: Real> MuscleParams<T> {
    /// Reference parameter set tuned for a direct-drive legged robot joint.
    #[allow(clippy::approx_constant)] // the joint range is specified as ±3.14, not ±π
    pub fn reference() -> Self {
        Self {
            l_min: T::lit(0.24),
            l_max: T::lit(1.53),
            fv_max: T::lit(1.38),
            fp_max: T::lit(1.76),
            lce_min: T::lit(0.74),
            lce_max: T::lit(0.94),
            f_max: T::lit(34.0),
            phi_min: T::lit(-3.14),
            phi_max: T::lit(3.14),
            tau_act: T::lit(0.01),
            beta: T::lit(0.36),
        }
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            (self.l_min, "l_min"),
            (self.l_max, "l_max"),
            (self.fv_max, "fv_max"),
            (self.fp_max, "fp_max"),
            (self.lce_min, "lce_min"),
            (self.lce_max, "lce_max"),
            (self.f_max, "f_max"),
            (self.phi_min, "phi_min"),
            (self.phi_max, "phi_max"),
            (self.tau_act, "tau_act"),
            (self.beta, "beta"),
        ];
        for (v, name) in fields {
            ensure_finite(v, name)?;
        }
        let one = T::one();
        if !(self.l_min < one && one < self.l_max) {
            return Err(invalid("need l_min < 1 < l_max"));
        }
        if self.fv_max <= one {
            return Err(invalid("need fv_max > 1"));
        }
        if self.fp_max < T::zero() {
            return Err(invalid("need fp_max >= 0"));
        }
        if self.f_max <= T::zero() {
            return Err(invalid("need f_max > 0"));
        }
        if self.tau_act <= T::zero() {
            return Err(invalid("need tau_act > 0"));
        }
        if self.beta < T::zero() {
            return Err(invalid("need beta >= 0"));
        }
        if self.lce_min >= self.lce_max {
            return Err(invalid("need lce_min < lce_max"));
        }
        if self.phi_min >= self.phi_max {
            return Err(invalid("degenerate joint range: need phi_min < phi_max"));
        }
        Ok(())
    }

    /// Knot of the passive-force curve where the cubic rise turns linear.
    pub fn fp_knot(&self) -> T {
        T::lit(0.5) * (T::one() + self.l_max)
    }
}

/// Affine joint-angle to fiber-length maps `l_k = a_k * q + b_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleGeometry<T> {
    pub a1: T,
    pub b1: T,
    pub a2: T,
    pub b2: T,
}

impl<T: Real> MuscleGeometry<T> {
    /// Explicit geometry; the moment arms must be antagonistic (`a1 = -a2`, `a1 > 0`).
    pub fn new(a1: T, b1: T, a2: T, b2: T) -> Result<Self> {
        for (v, name) in [(a1, "a1"), (b1, "b1"), (a2, "a2"), (b2, "b2")] {
            ensure_finite(v, name)?;
        }
        if a1 <= T::zero() || a1 != -a2 {
            return Err(invalid("geometry needs a1 > 0 and a2 = -a1"));
        }
        Ok(Self { a1, b1, a2, b2 })
    }

    #[inline]
    pub fn lengths(&self, q: T) -> [T; 2] {
        [self.a1 * q + self.b1, self.a2 * q + self.b2]
    }

    /// Scaled fiber velocities `beta * a_k * q_dot`.
    #[inline]
    pub fn scaled_velocities(&self, q_dot: T, beta: T) -> [T; 2] {
        [beta * self.a1 * q_dot, beta * self.a2 * q_dot]
    }
}

/// Anchors both muscles so they sweep `[lce_min, lce_max]` in opposite
/// directions over `[phi_min, phi_max]`.
pub fn derive_geometry<T: Real>(p: &MuscleParams<T>) -> Result<MuscleGeometry<T>> {
    p.validate()?;
    let span = p.phi_max - p.phi_min;
    if span <= T::zero() {
        return Err(invalid("degenerate joint range"));
    }
    let a1 = (p.lce_max - p.lce_min) / span;
    Ok(MuscleGeometry { a1, b1: p.lce_min - a1 * p.phi_min, a2: -a1, b2: p.lce_min + a1 * p.phi_max })
}

/// Activities, lengths and scaled velocities of both muscles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MuscleState<T> {
    pub m_act: [T; 2],
    pub l: [T; 2],
    pub l_dot_bar: [T; 2],
}

impl<T: Real> MuscleState<T> {
    pub fn new(m_act: [T; 2], q: T, q_dot: T, p: &MuscleParams<T>, g: &MuscleGeometry<T>) -> Self {
        let zero_one = |x: T| x.max(T::zero()).min(T::one());
        Self {
            m_act: [zero_one(m_act[0]), zero_one(m_act[1])],
            l: g.lengths(q),
            l_dot_bar: g.scaled_velocities(q_dot, p.beta),
        }
    }

    pub fn at_rest(p: &MuscleParams<T>, g: &MuscleGeometry<T>, q: T) -> Self {
        Self::new([T::zero(); 2], q, T::zero(), p, g)
    }
}

/// Force-length, force-velocity and passive curves.
///
/// [`HillCurves`] is the production implementation. The trait exists so that
/// analyses can pin individual curves, e.g. FL to 1 when isolating damping.
pub trait ForceCurves<T: Real> {
    fn fl(&self, l: T, p: &MuscleParams<T>) -> Result<T>;
    fn fv(&self, v_bar: T, p: &MuscleParams<T>) -> Result<T>;
    fn fp(&self, l: T, p: &MuscleParams<T>) -> Result<T>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HillCurves;

impl<T: Real> ForceCurves<T> for HillCurves {
    fn fl(&self, l: T, p: &MuscleParams<T>) -> Result<T> {
        fl_curve(l, p)
    }
    fn fv(&self, v_bar: T, p: &MuscleParams<T>) -> Result<T> {
        fv_curve(v_bar, p)
    }
    fn fp(&self, l: T, p: &MuscleParams<T>) -> Result<T> {
        fp_curve(l, p)
    }
}

/// Piecewise-quadratic force-length bump: 0 outside `[l_min, l_max]`, 1 at `L = 1`.
pub fn fl_curve<T: Real>(l: T, p: &MuscleParams<T>) -> Result<T> {
    let l = ensure_finite(l, "fiber length")?;
    let one = T::one();
    let half = T::lit(0.5);
    if l <= p.l_min || l >= p.l_max {
        return Ok(T::zero());
    }
    let left_mid = half * (p.l_min + one);
    let right_mid = half * (one + p.l_max);
    let value = if l <= left_mid {
        let x = (l - p.l_min) / (left_mid - p.l_min);
        half * x * x
    } else if l <= one {
        let x = (one - l) / (one - left_mid);
        one - half * x * x
    } else if l <= right_mid {
        let x = (l - one) / (right_mid - one);
        one - half * x * x
    } else {
        let x = (p.l_max - l) / (p.l_max - right_mid);
        half * x * x
    };
    Ok(value)
}

/// Force-velocity gain. Zero at `v <= -1` (fast shortening), `fv_max` plateau
/// for fast lengthening, slope exactly 2 at rest.
pub fn fv_curve<T: Real>(v_bar: T, p: &MuscleParams<T>) -> Result<T> {
    let v = ensure_finite(v_bar, "scaled fiber velocity")?;
    let one = T::one();
    let y = p.fv_max - one;
    let value = if v <= -one {
        T::zero()
    } else if v <= T::zero() {
        (v + one) * (v + one)
    } else if v <= y {
        p.fv_max - (y - v) * (y - v) / y
    } else {
        p.fv_max
    };
    Ok(value)
}

/// Passive force: zero up to optimal length, cubic rise to the knot
/// `b = (1 + l_max) / 2`, linear beyond.
pub fn fp_curve<T: Real>(l: T, p: &MuscleParams<T>) -> Result<T> {
    let l = ensure_finite(l, "fiber length")?;
    let one = T::one();
    let quarter = T::lit(0.25);
    let b = p.fp_knot();
    let value = if l <= one {
        T::zero()
    } else if l <= b {
        let x = (l - one) / (b - one);
        quarter * p.fp_max * x * x * x
    } else {
        let x = (l - b) / (b - one);
        quarter * p.fp_max * (one + T::lit(3.0) * x)
    };
    Ok(value)
}

/// Clamps an excitation into `[0, 1]`, reporting whether clamping was needed.
#[inline]
pub fn clamp_excitation<T: Real>(x: T) -> (T, bool) {
    let c = x.max(T::zero()).min(T::one());
    (c, c != x)
}

/// Exact solution of the first-order activation low-pass over one step.
///
/// Excitations outside `[0, 1]` are clamped before the update.
pub fn activation_step<T: Real>(m: T, action: T, dt: T, tau_act: T) -> Result<T> {
    let m = ensure_finite(m, "activity")?;
    let action = ensure_finite(action, "excitation")?;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(invalid("activation step needs dt > 0"));
    }
    if !(tau_act > T::zero()) {
        return Err(invalid("activation step needs tau_act > 0"));
    }
    let (target, _) = clamp_excitation(action);
    let next = target + (m - target) * (-dt / tau_act).exp();
    Ok(next.max(T::zero()).min(T::one()))
}

/// Per-muscle force magnitudes `f_max * (FL * FV * m + FP)` along each line of pull.
pub fn muscle_forces_with<T: Real, C: ForceCurves<T> + ?Sized>(
    curves: &C,
    state: &MuscleState<T>,
    q: T,
    q_dot: T,
    p: &MuscleParams<T>,
    g: &MuscleGeometry<T>,
) -> Result<[T; 2]> {
    ensure_finite(q, "joint angle")?;
    ensure_finite(q_dot, "joint velocity")?;
    let lengths = g.lengths(q);
    let vels = g.scaled_velocities(q_dot, p.beta);
    let mut out = [T::zero(); 2];
    for k in 0..2 {
        let m = ensure_finite(state.m_act[k], "activity")?;
        let active = curves.fl(lengths[k], p)? * curves.fv(vels[k], p)? * m;
        out[k] = p.f_max * (active + curves.fp(lengths[k], p)?);
    }
    Ok(out)
}

pub fn muscle_forces<T: Real>(
    state: &MuscleState<T>,
    q: T,
    q_dot: T,
    p: &MuscleParams<T>,
    g: &MuscleGeometry<T>,
) -> Result<[T; 2]> {
    muscle_forces_with(&HillCurves, state, q, q_dot, p, g)
}

/// Net joint torque of the pair. Muscle 1 pulls towards `-q`, muscle 2 towards `+q`.
///
/// Lengths and velocities are recomputed from `(q, q_dot)`; the state only
/// contributes activities. Angles outside the joint range are allowed, the
/// curves saturate on their own.
pub fn joint_torque_with<T: Real, C: ForceCurves<T> + ?Sized>(
    curves: &C,
    state: &MuscleState<T>,
    q: T,
    q_dot: T,
    p: &MuscleParams<T>,
    g: &MuscleGeometry<T>,
) -> Result<T> {
    let [f1, f2] = muscle_forces_with(curves, state, q, q_dot, p, g)?;
    Ok(f2 - f1)
}

pub fn joint_torque<T: Real>(
    state: &MuscleState<T>,
    q: T,
    q_dot: T,
    p: &MuscleParams<T>,
    g: &MuscleGeometry<T>,
) -> Result<T> {
    joint_torque_with(&HillCurves, state, q, q_dot, p, g)
}

/// Velocity scaling that makes full co-contraction equivalent to a damping
/// controller `tau = -k_damp * q_dot` near rest: `k_damp / (4 * a1 * f_max)`.
pub fn beta_from_damping<T: Real>(k_damp: T, a1: T, f_max: T) -> Result<T> {
    ensure_finite(k_damp, "k_damp")?;
    ensure_finite(a1, "a1")?;
    ensure_finite(f_max, "f_max")?;
    if a1 <= T::zero() {
        return Err(invalid("damping rule needs a1 > 0"));
    }
    if f_max <= T::zero() {
        return Err(invalid("damping rule needs f_max > 0"));
    }
    if k_damp < T::zero() {
        return Err(invalid("damping rule needs k_damp >= 0"));
    }
    Ok(k_damp / (T::lit(4.0) * a1 * f_max))
}

/// Damping coefficient emulated by full co-contraction with FL = 1 (inverse of [`beta_from_damping`]).
pub fn equivalent_damping<T: Real>(beta: T, a1: T, f_max: T) -> T {
    T::lit(4.0) * beta * a1 * f_max
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p() -> MuscleParams<f64> {
        MuscleParams::reference()
    }

    struct PinnedLength;

    impl ForceCurves<f64> for PinnedLength {
        fn fl(&self, _l: f64, _p: &MuscleParams<f64>) -> Result<f64> {
            Ok(1.0)
        }
        fn fv(&self, v: f64, p: &MuscleParams<f64>) -> Result<f64> {
            fv_curve(v, p)
        }
        fn fp(&self, _l: f64, _p: &MuscleParams<f64>) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn fl_anchors() {
        let p = p();
        assert_eq!(fl_curve(1.0, &p).unwrap(), 1.0);
        assert_eq!(fl_curve(0.24, &p).unwrap(), 0.0);
        assert_eq!(fl_curve(1.53, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(fl_curve(0.62, &p).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(fl_curve(0.1, &p).unwrap(), 0.0);
        assert_eq!(fl_curve(2.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn fv_anchors() {
        let p = p();
        assert_eq!(fv_curve(0.0, &p).unwrap(), 1.0);
        assert_eq!(fv_curve(-1.0, &p).unwrap(), 0.0);
        assert_eq!(fv_curve(-3.0, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(fv_curve(0.38, &p).unwrap(), 1.38, epsilon = 1e-12);
        assert_eq!(fv_curve(5.0, &p).unwrap(), 1.38);
    }

    #[test]
    fn fp_anchors() {
        let p = p();
        assert_eq!(fp_curve(0.9, &p).unwrap(), 0.0);
        assert_eq!(fp_curve(1.0, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(p.fp_knot(), 1.265, epsilon = 1e-12);
        assert_abs_diff_eq!(fp_curve(1.265, &p).unwrap(), 0.44, epsilon = 1e-12);
        // linear continuation slope 0.75 * fp_max / (b - 1)
        let slope = (fp_curve(1.4, &p).unwrap() - fp_curve(1.3, &p).unwrap()) / 0.1;
        assert_abs_diff_eq!(slope, 0.75 * 1.76 / 0.265, epsilon = 1e-9);
    }

    #[test]
    fn curves_reject_nan() {
        let p = p();
        assert!(fl_curve(f64::NAN, &p).is_err());
        assert!(fv_curve(f64::INFINITY, &p).is_err());
        assert!(fp_curve(f64::NAN, &p).is_err());
    }

    // second-order one-sided stencils: exact on each quadratic branch
    fn one_sided_slopes(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let left = (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h);
        let right = (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
        (left, right)
    }

    #[test]
    fn curves_are_c1_at_knots() {
        let p = p();
        let h = 1e-7;
        let fl = |x| fl_curve(x, &p).unwrap();
        let fv = |x| fv_curve(x, &p).unwrap();
        let fp = |x| fp_curve(x, &p).unwrap();
        for knot in [0.24, 0.62, 1.0, 1.265, 1.53] {
            let (l, r) = one_sided_slopes(fl, knot, h);
            assert!((l - r).abs() < 1e-6, "fl knot {knot}: {l} vs {r}");
        }
        for knot in [-1.0, 0.0, 0.38] {
            let (l, r) = one_sided_slopes(fv, knot, h);
            assert!((l - r).abs() < 1e-6, "fv knot {knot}: {l} vs {r}");
        }
        for knot in [1.0, 1.265] {
            let (l, r) = one_sided_slopes(fp, knot, h);
            assert!((l - r).abs() < 1e-6, "fp knot {knot}: {l} vs {r}");
        }
        let (l, r) = one_sided_slopes(fv, 0.0, h);
        assert_abs_diff_eq!(l, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn activation_examples() {
        let m = activation_step(0.0, 1.0, 0.01, 0.01).unwrap();
        assert_abs_diff_eq!(m, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(m, 0.6321, epsilon = 1e-4);
        for dt in [1e-4, 0.01, 3.0] {
            assert_abs_diff_eq!(activation_step(0.5, 0.5, dt, 0.01).unwrap(), 0.5, epsilon = 1e-15);
        }
        let m = activation_step(1.0, 0.0, 0.002, 0.01).unwrap();
        assert_abs_diff_eq!(m, (-0.2f64).exp(), epsilon = 1e-15);
        assert!(activation_step(0.2, 0.5, 0.0, 0.01).is_err());
        // out-of-range excitation is clamped
        assert_eq!(activation_step(1.0, 7.0, 0.01, 0.01).unwrap(), 1.0);
        assert_eq!(clamp_excitation(-0.5), (0.0, true));
        assert_eq!(clamp_excitation(0.5), (0.5, false));
    }

    #[test]
    fn geometry_from_reference_params() {
        let p = p();
        let g = derive_geometry(&p).unwrap();
        assert_abs_diff_eq!(g.a1, 0.2 / 6.28, epsilon = 1e-15);
        assert_abs_diff_eq!(g.a1, 0.03185, epsilon = 1e-5);
        assert_eq!(g.a2, -g.a1);
        let [l1, l2] = g.lengths(p.phi_min);
        assert_abs_diff_eq!(l1, 0.74, epsilon = 1e-12);
        assert_abs_diff_eq!(l2, 0.94, epsilon = 1e-12);
        let [l1, l2] = g.lengths(p.phi_max);
        assert_abs_diff_eq!(l1, 0.94, epsilon = 1e-12);
        assert_abs_diff_eq!(l2, 0.74, epsilon = 1e-12);

        let mut bad = p;
        bad.phi_max = bad.phi_min;
        assert!(derive_geometry(&bad).is_err());
        assert!(MuscleGeometry::new(0.1, 0.8, 0.1, 0.8).is_err());
    }

    #[test]
    fn torque_examples() {
        let p = p();
        let g = derive_geometry(&p).unwrap();
        let st = MuscleState::new([1.0, 1.0], 0.0, 0.0, &p, &g);
        assert_abs_diff_eq!(joint_torque(&st, 0.0, 0.0, &p, &g).unwrap(), 0.0, epsilon = 1e-12);

        // single muscle at FV(0) = 1 with FL pinned: full f_max, pulling towards -q
        let st = MuscleState::new([1.0, 0.0], 0.0, 0.0, &p, &g);
        let tau = joint_torque_with(&PinnedLength, &st, 0.0, 0.0, &p, &g).unwrap();
        assert_abs_diff_eq!(tau, -34.0, epsilon = 1e-12);
        let st = MuscleState::new([0.0, 1.0], 0.0, 0.0, &p, &g);
        let tau = joint_torque_with(&PinnedLength, &st, 0.0, 0.0, &p, &g).unwrap();
        assert_abs_diff_eq!(tau, 34.0, epsilon = 1e-12);

        // co-contraction damping near rest
        let st = MuscleState::new([1.0, 1.0], 0.0, 0.0, &p, &g);
        let q_dot = 1e-4;
        let tau = joint_torque_with(&PinnedLength, &st, 0.0, q_dot, &p, &g).unwrap();
        let expected = -4.0 * p.f_max * p.beta * g.a1 * q_dot;
        assert!((tau - expected).abs() <= 1e-3 * expected.abs());

        assert!(joint_torque(&st, f64::NAN, 0.0, &p, &g).is_err());
        // outside the joint range the torque is still defined
        assert!(joint_torque(&st, 10.0, 0.0, &p, &g).unwrap().is_finite());
    }

    #[test]
    fn damping_rule_examples() {
        assert_abs_diff_eq!(beta_from_damping(0.1, 1.0, 1.0).unwrap(), 0.025, epsilon = 1e-15);
        assert_eq!(beta_from_damping(0.0, 0.5, 34.0).unwrap(), 0.0);
        // inverting for the moment arm that reproduces beta = 0.36
        let a1 = 0.1 / (4.0 * 34.0 * 0.36);
        assert_abs_diff_eq!(a1, 2.04e-3, epsilon = 5e-6);
        assert_abs_diff_eq!(beta_from_damping(0.1, a1, 34.0).unwrap(), 0.36, epsilon = 1e-12);
        assert!(beta_from_damping(0.1, 0.0, 34.0).is_err());
        assert!(beta_from_damping(0.1, 1.0, -1.0).is_err());
        assert_abs_diff_eq!(equivalent_damping(0.025, 1.0, 1.0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn params_validation() {
        let p = p();
        assert!(p.validate().is_ok());
        let mut q = p;
        q.fv_max = 1.0;
        assert!(q.validate().is_err());
        let mut q = p;
        q.l_min = 1.1;
        assert!(q.validate().is_err());
        let mut q = p;
        q.beta = -0.1;
        assert!(q.validate().is_err());
        let mut q = p;
        q.tau_act = f64::NAN;
        assert!(q.validate().is_err());
    }

    #[test]
    fn generic_over_f32() {
        let p = MuscleParams::<f32>::reference();
        let g = derive_geometry(&p).unwrap();
        let st = MuscleState::new([1.0f32, 1.0], 0.0, 0.0, &p, &g);
        assert!(joint_torque(&st, 0.0f32, 0.0, &p, &g).unwrap().abs() < 1e-5);
        assert_eq!(fv_curve(0.0f32, &p).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn fv_taylor_remainder(v in -0.2f64..0.2) {
            let p = p();
            // curvature of the lengthening branch is 1/(fv_max - 1), the shortening branch 1
            let c = 1.0f64.max(1.0 / (p.fv_max - 1.0));
            let err = (fv_curve(v, &p).unwrap() - 1.0 - 2.0 * v).abs();
            prop_assert!(err <= c * v * v * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn activation_is_a_contraction(m in 0.0f64..1.0, mh in 0.0f64..1.0, a in 0.0f64..1.0, dt in 1e-5f64..0.1) {
            let tau = 0.01;
            let x = activation_step(m, a, dt, tau).unwrap();
            let y = activation_step(mh, a, dt, tau).unwrap();
            prop_assert!((x - y).abs() <= (m - mh).abs() * (-dt / tau).exp() + 1e-15);
        }

        #[test]
        fn activity_stays_in_unit_interval(m in 0.0f64..1.0, a in -2.0f64..3.0, dt in 1e-5f64..10.0) {
            let x = activation_step(m, a, dt, 0.01).unwrap();
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn torque_bounded_and_antisymmetric(q in -3.14f64..3.14, qd in -50.0f64..50.0, m1 in 0.0f64..1.0, m2 in 0.0f64..1.0) {
            let p = p();
            let g = derive_geometry(&p).unwrap();
            let st = MuscleState::new([m1, m2], q, qd, &p, &g);
            let tau = joint_torque(&st, q, qd, &p, &g).unwrap();
            let fp_peak = fp_curve(p.lce_max, &p).unwrap();
            prop_assert!(tau.abs() <= p.f_max * (p.fv_max + fp_peak) * 2.0);

            let q_mirror = p.phi_min + p.phi_max - q;
            let mirrored = MuscleState::new([m2, m1], q_mirror, -qd, &p, &g);
            let tau_m = joint_torque(&mirrored, q_mirror, -qd, &p, &g).unwrap();
            prop_assert!((tau + tau_m).abs() <= 1e-9 * (1.0 + tau.abs()));
        }

        #[test]
        fn geometry_lengths_sum_constant(q in -10.0f64..10.0) {
            let p = p();
            let g = derive_geometry(&p).unwrap();
            let [l1, l2] = g.lengths(q);
            prop_assert!((l1 + l2 - (p.lce_min + p.lce_max)).abs() < 1e-12);
        }
    }
}
