//! Low-level joint controllers: PD, direct torque and emulated muscles.
//!
//! All three share [`TorqueLimits`] and expose the same [`JointController`]
//! surface, so plants, the multi-rate loop and the trainer do not care which
//! actuator is in use. Only the action dimensionality differs (1 vs 2).

use crate::muscle::{activation_step, clamp_excitation, joint_torque, MuscleGeometry, MuscleParams, MuscleState};
use crate::scalar::{ensure_finite, Real};
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains<T> {
    pub k_stiff: T,
    pub k_damp: T,
}

impl<T: Real> PdGains<T> {
    pub fn new(k_stiff: T, k_damp: T) -> Result<Self> {
        ensure_finite(k_stiff, "k_stiff")?;
        ensure_finite(k_damp, "k_damp")?;
        if k_stiff < T::zero() || k_damp < T::zero() {
            return Err(invalid("PD gains must be non-negative"));
        }
        Ok(Self { k_stiff, k_damp })
    }

    /// Gains tuned for walking in simulation.
    pub fn reference() -> Self {
        Self { k_stiff: T::lit(2.0), k_damp: T::lit(0.05) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueLimits<T> {
    /// Saturation of every controller output, N·m.
    pub tau_abs_max: T,
    /// Scale from normalized policy torque to N·m.
    pub k_scale: T,
    /// Always-on joint damping added by the low-level loop, N·m·s/rad.
    pub k_damp_floor: T,
}

impl<T: Real> TorqueLimits<T> {
    pub fn new(tau_abs_max: T, k_scale: T, k_damp_floor: T) -> Result<Self> {
        ensure_finite(tau_abs_max, "tau_abs_max")?;
        ensure_finite(k_scale, "k_scale")?;
        ensure_finite(k_damp_floor, "k_damp_floor")?;
        if tau_abs_max <= T::zero() {
            return Err(invalid("tau_abs_max must be positive"));
        }
        if k_scale > tau_abs_max || k_scale < T::zero() {
            return Err(invalid("k_scale must lie in [0, tau_abs_max]"));
        }
        if k_damp_floor < T::zero() {
            return Err(invalid("k_damp_floor must be non-negative"));
        }
        Ok(Self { tau_abs_max, k_scale, k_damp_floor })
    }

    /// Floor damping used on hardware and mirrored in hardware-faithful runs.
    pub fn hardware_floor_damping() -> T {
        T::lit(0.08)
    }

    #[inline]
    pub fn clamp(&self, tau: T) -> T {
        tau.max(-self.tau_abs_max).min(self.tau_abs_max)
    }

    #[inline]
    fn finish(&self, raw: T, q_dot: T) -> T {
        self.clamp(raw - self.k_damp_floor * q_dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActuatorKind {
    Pd,
    Torque,
    Muscle,
}

impl ActuatorKind {
    pub const ALL: [ActuatorKind; 3] = [ActuatorKind::Pd, ActuatorKind::Torque, ActuatorKind::Muscle];

    pub fn action_dim(self) -> usize {
        match self {
            ActuatorKind::Pd | ActuatorKind::Torque => 1,
            ActuatorKind::Muscle => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActuatorKind::Pd => "pd",
            ActuatorKind::Torque => "torque",
            ActuatorKind::Muscle => "muscle",
        }
    }
}

impl std::str::FromStr for ActuatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd" => Ok(ActuatorKind::Pd),
            "torque" => Ok(ActuatorKind::Torque),
            "muscle" => Ok(ActuatorKind::Muscle),
            other => Err(invalid(format!("unknown actuator '{other}'"))),
        }
    }
}

/// A policy action interpreted for a specific controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActuatorCommand<T> {
    DesiredPosition(T),
    NormalizedTorque(T),
    Excitation([T; 2]),
}

impl<T: Real> ActuatorCommand<T> {
    pub fn from_action(kind: ActuatorKind, action: &[T]) -> Result<Self> {
        let expected = kind.action_dim();
        if action.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: action.len() });
        }
        Ok(match kind {
            ActuatorKind::Pd => ActuatorCommand::DesiredPosition(action[0]),
            ActuatorKind::Torque => ActuatorCommand::NormalizedTorque(action[0]),
            ActuatorKind::Muscle => ActuatorCommand::Excitation([action[0], action[1]]),
        })
    }

    pub fn kind(&self) -> ActuatorKind {
        match self {
            ActuatorCommand::DesiredPosition(_) => ActuatorKind::Pd,
            ActuatorCommand::NormalizedTorque(_) => ActuatorKind::Torque,
            ActuatorCommand::Excitation(_) => ActuatorKind::Muscle,
        }
    }
}

/// `k_stiff * (q_des - q) - k_damp * q_dot`, minus floor damping, saturated.
pub fn pd_torque<T: Real>(q_des: T, q: T, q_dot: T, gains: &PdGains<T>, limits: &TorqueLimits<T>) -> Result<T> {
    ensure_finite(q_des, "desired position")?;
    ensure_finite(q, "joint angle")?;
    ensure_finite(q_dot, "joint velocity")?;
    let raw = gains.k_stiff * (q_des - q) - gains.k_damp * q_dot;
    Ok(limits.finish(raw, q_dot))
}

/// `k_scale * clip(cmd, -1, 1)`.
pub fn direct_torque<T: Real>(cmd: T, limits: &TorqueLimits<T>) -> Result<T> {
    ensure_finite(cmd, "normalized torque")?;
    let clipped = cmd.max(-T::one()).min(T::one());
    Ok(limits.clamp(limits.k_scale * clipped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleStep<T> {
    pub torque: T,
    pub state: MuscleState<T>,
    /// At least one excitation was outside `[0, 1]` and got clamped.
    pub clamped: bool,
}

/// Advances activations by `dt`, refreshes lengths and velocities and returns
/// the muscle torque plus floor damping, saturated.
#[allow(clippy::too_many_arguments)]
pub fn muscle_actuator_step<T: Real>(
    cmd: [T; 2],
    q: T,
    q_dot: T,
    state: &MuscleState<T>,
    p: &MuscleParams<T>,
    g: &MuscleGeometry<T>,
    limits: &TorqueLimits<T>,
    dt: T,
) -> Result<MuscleStep<T>> {
    let mut clamped = false;
    let mut m_act = state.m_act;
    for k in 0..2 {
        let (c, was_clamped) = clamp_excitation(ensure_finite(cmd[k], "excitation")?);
        clamped |= was_clamped;
        m_act[k] = activation_step(state.m_act[k], c, dt, p.tau_act)?;
    }
    let next = MuscleState::new(m_act, q, q_dot, p, g);
    let tau = joint_torque(&next, q, q_dot, p, g)?;
    Ok(MuscleStep { torque: limits.finish(tau, q_dot), state: next, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput<T> {
    pub torque: T,
    pub clamped: bool,
}

/// One joint's low-level controller. The muscle variant owns its state.
#[derive(Debug, Clone, PartialEq)]
pub enum JointController<T> {
    Pd { gains: PdGains<T>, limits: TorqueLimits<T> },
    Torque { limits: TorqueLimits<T> },
    Muscle { params: MuscleParams<T>, geometry: MuscleGeometry<T>, limits: TorqueLimits<T>, state: MuscleState<T> },
}

impl<T: Real> JointController<T> {
    pub fn pd(gains: PdGains<T>, limits: TorqueLimits<T>) -> Self {
        JointController::Pd { gains, limits }
    }

    pub fn torque(limits: TorqueLimits<T>) -> Self {
        JointController::Torque { limits }
    }

    pub fn muscle(params: MuscleParams<T>, geometry: MuscleGeometry<T>, limits: TorqueLimits<T>) -> Result<Self> {
        params.validate()?;
        let state = MuscleState::at_rest(&params, &geometry, T::zero());
        Ok(JointController::Muscle { params, geometry, limits, state })
    }

    pub fn kind(&self) -> ActuatorKind {
        match self {
            JointController::Pd { .. } => ActuatorKind::Pd,
            JointController::Torque { .. } => ActuatorKind::Torque,
            JointController::Muscle { .. } => ActuatorKind::Muscle,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.kind().action_dim()
    }

    pub fn limits(&self) -> &TorqueLimits<T> {
        match self {
            JointController::Pd { limits, .. }
            | JointController::Torque { limits }
            | JointController::Muscle { limits, .. } => limits,
        }
    }

    pub fn limits_mut(&mut self) -> &mut TorqueLimits<T> {
        match self {
            JointController::Pd { limits, .. }
            | JointController::Torque { limits }
            | JointController::Muscle { limits, .. } => limits,
        }
    }

    pub fn muscle_state(&self) -> Option<&MuscleState<T>> {
        match self {
            JointController::Muscle { state, .. } => Some(state),
            _ => None,
        }
    }

    /// Resets muscle activities and kinematics; a no-op for the other controllers.
    pub fn reset(&mut self, m_act: [T; 2], q: T, q_dot: T) {
        if let JointController::Muscle { params, geometry, state, .. } = self {
            *state = MuscleState::new(m_act, q, q_dot, params, geometry);
        }
    }

    /// Computes the joint torque for one controller tick of length `dt`.
    pub fn compute(&mut self, action: &[T], q: T, q_dot: T, dt: T) -> Result<ControlOutput<T>> {
        let cmd = ActuatorCommand::from_action(self.kind(), action)?;
        match (self, cmd) {
            (JointController::Pd { gains, limits }, ActuatorCommand::DesiredPosition(q_des)) => {
                Ok(ControlOutput { torque: pd_torque(q_des, q, q_dot, gains, limits)?, clamped: false })
            }
            (JointController::Torque { limits }, ActuatorCommand::NormalizedTorque(cmd)) => {
                ensure_finite(q_dot, "joint velocity")?;
                let tau = direct_torque(cmd, limits)?;
                let torque = limits.finish(tau, q_dot);
                Ok(ControlOutput { torque, clamped: cmd.abs() > T::one() })
            }
            (JointController::Muscle { params, geometry, limits, state }, ActuatorCommand::Excitation(e)) => {
                let step = muscle_actuator_step(e, q, q_dot, state, params, geometry, limits, dt)?;
                *state = step.state;
                Ok(ControlOutput { torque: step.torque, clamped: step.clamped })
            }
            _ => unreachable!("command kind derived from controller kind"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::muscle::derive_geometry;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn wide() -> TorqueLimits<f64> {
        TorqueLimits::new(100.0, 2.7, 0.0).unwrap()
    }

    #[test]
    fn pd_examples() {
        let lim = wide();
        let g = PdGains::reference();
        assert_eq!(pd_torque(0.3, 0.3, 0.0, &g, &lim).unwrap(), 0.0);
        assert_abs_diff_eq!(pd_torque(1.0, 0.0, 0.0, &g, &lim).unwrap(), 2.0, epsilon = 1e-15);
        let damp_only = PdGains::new(0.0, 0.05).unwrap();
        assert_abs_diff_eq!(pd_torque(0.0, 0.0, 2.0, &damp_only, &lim).unwrap(), -0.1, epsilon = 1e-15);
        assert!(pd_torque(f64::NAN, 0.0, 0.0, &g, &lim).is_err());
        assert!(PdGains::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn direct_torque_examples() {
        let lim = wide();
        assert_eq!(direct_torque(0.0, &lim).unwrap(), 0.0);
        assert_abs_diff_eq!(direct_torque(1.0, &lim).unwrap(), 2.7, epsilon = 1e-15);
        assert_abs_diff_eq!(direct_torque(1.4, &lim).unwrap(), 2.7, epsilon = 1e-15);
        assert_abs_diff_eq!(direct_torque(-3.0, &lim).unwrap(), -2.7, epsilon = 1e-15);
        assert!(direct_torque(f64::INFINITY, &lim).is_err());
    }

    #[test]
    fn limits_validation() {
        assert!(TorqueLimits::new(0.0, 0.0, 0.0).is_err());
        assert!(TorqueLimits::new(1.0, 2.0, 0.0).is_err());
        assert!(TorqueLimits::new(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn muscle_step_examples() {
        let p = MuscleParams::reference();
        let g = derive_geometry(&p).unwrap();
        let lim = wide();
        let rest = MuscleState::at_rest(&p, &g, 0.0);
        let s = muscle_actuator_step([0.0, 0.0], 0.0, 0.0, &rest, &p, &g, &lim, 0.002).unwrap();
        assert_eq!(s.torque, 0.0);
        assert_eq!(s.state.m_act, [0.0, 0.0]);

        // symmetric co-contraction at q = 0 produces no net torque
        let mut st = rest;
        for _ in 0..100 {
            let s = muscle_actuator_step([1.0, 1.0], 0.0, 0.0, &st, &p, &g, &lim, 0.002).unwrap();
            assert_abs_diff_eq!(s.torque, 0.0, epsilon = 1e-12);
            st = s.state;
        }
        assert!(st.m_act[0] > 0.99);

        let s = muscle_actuator_step([1.5, -0.2], 0.0, 0.0, &rest, &p, &g, &lim, 0.002).unwrap();
        assert!(s.clamped);
    }

    #[test]
    fn muscle_step_response_follows_activation_envelope() {
        let p = MuscleParams::reference();
        let g = derive_geometry(&p).unwrap();
        let lim = wide();
        let dt = 0.002;
        let full = {
            let st = MuscleState::new([1.0, 0.0], 0.0, 0.0, &p, &g);
            joint_torque(&st, 0.0, 0.0, &p, &g).unwrap()
        };
        let mut st = MuscleState::at_rest(&p, &g, 0.0);
        for n in 1..=50 {
            let s = muscle_actuator_step([1.0, 0.0], 0.0, 0.0, &st, &p, &g, &lim, dt).unwrap();
            st = s.state;
            let t = n as f64 * dt;
            let envelope = full * (1.0 - (-t / p.tau_act).exp());
            assert!((s.torque - envelope).abs() <= 0.02 * full.abs(), "t={t}");
        }
    }

    #[test]
    fn floor_damping_parity() {
        let p = MuscleParams::reference();
        let g = derive_geometry(&p).unwrap();
        let lim = TorqueLimits::new(10.0, 2.7, 0.08).unwrap();
        let mut pd = JointController::pd(PdGains::new(0.0, 0.0).unwrap(), lim);
        let mut musc = JointController::muscle(p.with_beta(0.36), g, lim).unwrap();
        let mut tq = JointController::torque(lim);
        for qd in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let a = pd.compute(&[0.0], 0.0, qd, 0.002).unwrap().torque;
            let b = musc.compute(&[0.0, 0.0], 0.0, qd, 0.002).unwrap().torque;
            let c = tq.compute(&[0.0], 0.0, qd, 0.002).unwrap().torque;
            assert_abs_diff_eq!(a, -0.08 * qd, epsilon = 1e-12);
            assert_abs_diff_eq!(b, -0.08 * qd, epsilon = 1e-12);
            assert_abs_diff_eq!(c, -0.08 * qd, epsilon = 1e-12);
        }
    }

    #[test]
    fn action_dims() {
        assert_eq!(ActuatorKind::Pd.action_dim(), 1);
        assert_eq!(ActuatorKind::Muscle.action_dim(), 2);
        let mut c = JointController::torque(wide());
        assert!(matches!(c.compute(&[0.0, 1.0], 0.0, 0.0, 0.01), Err(Error::DimensionMismatch { .. })));
        assert_eq!("muscle".parse::<ActuatorKind>().unwrap(), ActuatorKind::Muscle);
        assert!("hydraulic".parse::<ActuatorKind>().is_err());
    }

    proptest! {
        #[test]
        fn outputs_respect_limit(
            x in -50.0f64..50.0, q in -4.0f64..4.0, qd in -100.0f64..100.0,
            e1 in -1.0f64..2.0, e2 in -1.0f64..2.0,
        ) {
            let lim = TorqueLimits::new(2.7, 2.7, 0.08).unwrap();
            let p = MuscleParams::reference();
            let g = derive_geometry(&p).unwrap();
            let mut ctrls = [
                (JointController::pd(PdGains::new(5.0, 0.1).unwrap(), lim), vec![x]),
                (JointController::torque(lim), vec![x]),
                (JointController::muscle(p, g, lim).unwrap(), vec![e1, e2]),
            ];
            for (c, a) in ctrls.iter_mut() {
                let out = c.compute(a, q, qd, 0.002).unwrap();
                prop_assert!(out.torque.abs() <= 2.7);
            }
        }

        #[test]
        fn controllers_are_pure(q in -3.0f64..3.0, qd in -10.0f64..10.0, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let p = MuscleParams::reference();
            let g = derive_geometry(&p).unwrap();
            let lim = wide();
            let c0 = JointController::muscle(p, g, lim).unwrap();
            let (mut a, mut b) = (c0.clone(), c0);
            let ta = a.compute(&[e1, e2], q, qd, 0.002).unwrap();
            let tb = b.compute(&[e1, e2], q, qd, 0.002).unwrap();
            prop_assert_eq!(ta, tb);
            prop_assert_eq!(a, b);
        }
    }
}
