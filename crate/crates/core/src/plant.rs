//! Desk-scale plants stepped with semi-implicit Euler.
//!
//! * [`PendulumPlant`]: one revolute joint with gravity load and hard stops.
//! * [`HopperPlant`]: a point-mass body on a massless prismatic-like leg
//!   driven through a joint with transmission `r` (leg length `L0 + r*q`).

use crate::scalar::{ensure_finite, Real};
use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState<T> {
    pub q: T,
    pub q_dot: T,
    /// Body height (hopper only).
    pub z: T,
    pub z_dot: T,
    pub in_contact: bool,
    pub t: T,
}

impl<T: Real> PlantState<T> {
    pub fn joint(q: T, q_dot: T) -> Self {
        Self { q, q_dot, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        ensure_finite(self.q, "q")?;
        ensure_finite(self.q_dot, "q_dot")?;
        ensure_finite(self.z, "z")?;
        ensure_finite(self.z_dot, "z_dot")?;
        Ok(())
    }
}

/// Smooth Coulomb friction `c * tanh(q_dot / 1e-2)`.
#[inline]
fn coulomb<T: Real>(c: T, q_dot: T) -> T {
    if c == T::zero() {
        T::zero()
    } else {
        c * (q_dot / T::lit(1e-2)).tanh()
    }
}

fn check_dt<T: Real>(dt: T) -> Result<()> {
    if !(dt > T::zero() && dt <= T::lit(0.01)) {
        return Err(invalid("plant step needs dt in (0, 0.01]"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumPlant<T> {
    pub inertia: T,
    /// Gravity torque coefficient `m * g * d`; torque is `-mgd * sin(q)`.
    pub mgd: T,
    pub joint_damping: T,
    pub phi_min: T,
    pub phi_max: T,
    pub tau_abs_max: T,
    /// Coulomb friction torque at unit friction scale.
    pub coulomb_friction: T,
    pub friction_scale: T,
    /// Lever arm at which a mass shift is attached.
    pub payload_arm: T,
}

impl<T: Real> PendulumPlant<T> {
    /// Leg segment hanging from a fixed stand.
    #[allow(clippy::approx_constant)]
    pub fn desk() -> Self {
        Self {
            inertia: T::lit(0.01),
            mgd: T::lit(0.3),
            joint_damping: T::zero(),
            phi_min: T::lit(-3.14),
            phi_max: T::lit(3.14),
            tau_abs_max: T::lit(2.7),
            coulomb_friction: T::zero(),
            friction_scale: T::one(),
            payload_arm: T::lit(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > T::zero()) {
            return Err(invalid("pendulum inertia must be positive"));
        }
        if !(self.phi_min < self.phi_max) {
            return Err(invalid("pendulum needs phi_min < phi_max"));
        }
        if !(self.tau_abs_max > T::zero()) {
            return Err(invalid("pendulum tau_abs_max must be positive"));
        }
        Ok(())
    }

    /// Adds a point mass `dm` at `payload_arm`; inertia is floored at 10% of its base value.
    pub fn shift_mass(&mut self, dm: T) {
        let arm = self.payload_arm;
        let floor = self.inertia * T::lit(0.1);
        self.inertia = (self.inertia + dm * arm * arm).max(floor);
        self.mgd = (self.mgd + dm * T::lit(9.81) * arm).max(T::zero());
    }

    pub fn energy(&self, s: &PlantState<T>) -> T {
        T::lit(0.5) * self.inertia * s.q_dot * s.q_dot + self.mgd * (T::one() - s.q.cos())
    }

    pub fn step(&self, s: &PlantState<T>, tau: T, dt: T) -> Result<PlantState<T>> {
        ensure_finite(tau, "torque")?;
        check_dt(dt)?;
        s.check()?;
        let tau = tau.max(-self.tau_abs_max).min(self.tau_abs_max);
        let friction = coulomb(self.coulomb_friction * self.friction_scale, s.q_dot);
        let acc = (tau - self.mgd * s.q.sin() - self.joint_damping * s.q_dot - friction) / self.inertia;
        let mut q_dot = s.q_dot + dt * acc;
        let mut q = s.q + dt * q_dot;
        if q < self.phi_min {
            q = self.phi_min;
            q_dot = T::zero();
        } else if q > self.phi_max {
            q = self.phi_max;
            q_dot = T::zero();
        }
        Ok(PlantState { q, q_dot, z: s.z, z_dot: s.z_dot, in_contact: false, t: s.t + dt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopperPlant<T> {
    pub body_mass: T,
    /// Leg length change per radian of joint angle, m/rad.
    pub transmission: T,
    pub leg_rest_length: T,
    pub leg_inertia: T,
    pub gravity: T,
    pub ground_height: T,
    pub joint_damping: T,
    pub q_min: T,
    pub q_max: T,
    pub tau_abs_max: T,
    pub coulomb_friction: T,
    pub friction_scale: T,
    /// Body velocity restitution at touchdown; 0 is a fully inelastic foot.
    pub restitution: T,
    pub contact_tolerance: T,
}

impl<T: Real> HopperPlant<T> {
    pub fn desk() -> Self {
        Self {
            body_mass: T::lit(1.0),
            transmission: T::lit(0.1),
            leg_rest_length: T::lit(0.25),
            leg_inertia: T::lit(2e-3),
            gravity: T::lit(9.81),
            ground_height: T::zero(),
            joint_damping: T::zero(),
            q_min: T::lit(-1.2),
            q_max: T::lit(1.0),
            tau_abs_max: T::lit(2.7),
            coulomb_friction: T::zero(),
            friction_scale: T::one(),
            restitution: T::zero(),
            contact_tolerance: T::lit(1e-9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.body_mass > T::zero()) {
            return Err(invalid("hopper body_mass must be positive"));
        }
        if self.transmission == T::zero() || !self.transmission.is_finite() {
            return Err(invalid("hopper transmission must be non-zero"));
        }
        if !(self.leg_inertia > T::zero()) {
            return Err(invalid("hopper leg_inertia must be positive"));
        }
        if !(self.q_min < self.q_max) {
            return Err(invalid("hopper needs q_min < q_max"));
        }
        if !(self.tau_abs_max > T::zero()) {
            return Err(invalid("hopper tau_abs_max must be positive"));
        }
        if self.restitution < T::zero() || self.restitution > T::one() {
            return Err(invalid("hopper restitution must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn shift_mass(&mut self, dm: T) {
        self.body_mass = (self.body_mass + dm).max(self.body_mass * T::lit(0.1));
    }

    #[inline]
    pub fn leg_length(&self, q: T) -> T {
        self.leg_rest_length + self.transmission * q
    }

    #[inline]
    pub fn foot_height(&self, s: &PlantState<T>) -> T {
        s.z - self.leg_length(s.q) - self.ground_height
    }

    /// Joint angle that puts the foot on the ground for body height `z`.
    #[inline]
    fn stance_angle(&self, z: T) -> T {
        (z - self.ground_height - self.leg_rest_length) / self.transmission
    }

    /// Body resting on the leg at joint angle `q`.
    pub fn standing(&self, q: T) -> PlantState<T> {
        let q = q.max(self.q_min).min(self.q_max);
        PlantState {
            q,
            q_dot: T::zero(),
            z: self.ground_height + self.leg_length(q),
            z_dot: T::zero(),
            in_contact: true,
            t: T::zero(),
        }
    }

    /// Torque that balances gravity in stance.
    pub fn hover_torque(&self) -> T {
        self.transmission * self.body_mass * self.gravity
    }

    pub fn at_stop(&self, s: &PlantState<T>) -> bool {
        s.q <= self.q_min || s.q >= self.q_max
    }

    pub fn step(&self, s: &PlantState<T>, tau: T, dt: T) -> Result<PlantState<T>> {
        ensure_finite(tau, "torque")?;
        check_dt(dt)?;
        s.check()?;
        let tau = tau.max(-self.tau_abs_max).min(self.tau_abs_max);
        let tau_net =
            tau - self.joint_damping * s.q_dot - coulomb(self.coulomb_friction * self.friction_scale, s.q_dot);
        if s.in_contact {
            let leg_force = tau_net / self.transmission;
            if leg_force >= T::zero() {
                return Ok(self.stance_step(s, leg_force, dt));
            }
            // leg would pull on the ground: lift off with continuous velocities
            let lifted = PlantState { in_contact: false, ..*s };
            return Ok(self.flight_step(&lifted, tau_net, dt));
        }
        Ok(self.flight_step(s, tau_net, dt))
    }

    fn stance_step(&self, s: &PlantState<T>, leg_force: T, dt: T) -> PlantState<T> {
        let acc = leg_force / self.body_mass - self.gravity;
        let mut z_dot = s.z_dot + dt * acc;
        let mut z = s.z + dt * z_dot;
        let q = self.stance_angle(z);
        let t = s.t + dt;
        let (lo, hi) = (self.leg_length(self.q_min), self.leg_length(self.q_max));
        let (short, long) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let leg = z - self.ground_height;
        if leg <= short {
            // fully compressed leg is rigid
            z = self.ground_height + short;
            z_dot = z_dot.max(T::zero());
            let q = self.stance_angle(z).max(self.q_min).min(self.q_max);
            return PlantState { q, q_dot: z_dot / self.transmission, z, z_dot, in_contact: true, t };
        }
        if leg >= long {
            // leg reached full extension: the foot leaves the ground
            let q_stop =
                if self.leg_length(self.q_max) >= self.leg_length(self.q_min) { self.q_max } else { self.q_min };
            return PlantState { q: q_stop, q_dot: T::zero(), z, z_dot, in_contact: false, t };
        }
        PlantState { q, q_dot: z_dot / self.transmission, z, z_dot, in_contact: true, t }
    }

    fn flight_step(&self, s: &PlantState<T>, tau_net: T, dt: T) -> PlantState<T> {
        let mut z_dot = s.z_dot - dt * self.gravity;
        let mut z = s.z + dt * z_dot;
        let mut q_dot = s.q_dot + dt * tau_net / self.leg_inertia;
        let mut q = s.q + dt * q_dot;
        if q < self.q_min {
            q = self.q_min;
            q_dot = T::zero();
        } else if q > self.q_max {
            q = self.q_max;
            q_dot = T::zero();
        }
        let t = s.t + dt;
        let probe = PlantState { q, q_dot, z, z_dot, in_contact: false, t };
        if self.foot_height(&probe) > -self.contact_tolerance {
            return probe;
        }
        // touchdown
        if self.restitution > T::zero() && z_dot < T::zero() {
            z = self.ground_height + self.leg_length(q);
            z_dot = -self.restitution * z_dot;
            return PlantState { q, q_dot, z, z_dot, in_contact: false, t };
        }
        let q_touch = self.stance_angle(z);
        if q_touch < self.q_min || q_touch > self.q_max {
            let q_stop = q_touch.max(self.q_min).min(self.q_max);
            z = self.ground_height + self.leg_length(q_stop);
            z_dot = T::zero();
            return PlantState { q: q_stop, q_dot: T::zero(), z, z_dot, in_contact: true, t };
        }
        // inelastic foot impact: the body keeps its velocity, the leg absorbs it
        PlantState { q: q_touch, q_dot: z_dot / self.transmission, z, z_dot, in_contact: true, t }
    }
}

/// Either desk plant, selected at configuration time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantModel<T> {
    Pendulum(PendulumPlant<T>),
    Hopper(HopperPlant<T>),
}

impl<T: Real> PlantModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            PlantModel::Pendulum(p) => p.validate(),
            PlantModel::Hopper(h) => h.validate(),
        }
    }

    pub fn step(&self, s: &PlantState<T>, tau: T, dt: T) -> Result<PlantState<T>> {
        match self {
            PlantModel::Pendulum(p) => p.step(s, tau, dt),
            PlantModel::Hopper(h) => h.step(s, tau, dt),
        }
    }

    pub fn joint_limits(&self) -> (T, T) {
        match self {
            PlantModel::Pendulum(p) => (p.phi_min, p.phi_max),
            PlantModel::Hopper(h) => (h.q_min, h.q_max),
        }
    }

    pub fn at_stop(&self, s: &PlantState<T>) -> bool {
        let (lo, hi) = self.joint_limits();
        s.q <= lo || s.q >= hi
    }

    /// Initial state with the joint at `q`.
    pub fn initial_state(&self, q: T) -> PlantState<T> {
        match self {
            PlantModel::Pendulum(p) => PlantState::joint(q.max(p.phi_min).min(p.phi_max), T::zero()),
            PlantModel::Hopper(h) => h.standing(q),
        }
    }

    /// Instantaneous velocity change; acts on the joint for the pendulum and on the body for the hopper.
    pub fn apply_push(&self, s: &mut PlantState<T>, dv: T) {
        match self {
            PlantModel::Pendulum(_) => s.q_dot = s.q_dot + dv,
            PlantModel::Hopper(h) => {
                s.z_dot = s.z_dot + dv;
                if s.in_contact {
                    s.q_dot = s.z_dot / h.transmission;
                }
            }
        }
    }

    pub fn shift_mass(&mut self, dm: T) {
        match self {
            PlantModel::Pendulum(p) => p.shift_mass(dm),
            PlantModel::Hopper(h) => h.shift_mass(dm),
        }
    }

    pub fn add_joint_damping(&mut self, d: T) {
        match self {
            PlantModel::Pendulum(p) => p.joint_damping = p.joint_damping + d,
            PlantModel::Hopper(h) => h.joint_damping = h.joint_damping + d,
        }
    }

    pub fn scale_friction(&mut self, k: T) {
        match self {
            PlantModel::Pendulum(p) => p.friction_scale = p.friction_scale * k,
            PlantModel::Hopper(h) => h.friction_scale = h.friction_scale * k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlantModel::Pendulum(_) => "pendulum",
            PlantModel::Hopper(_) => "hopper",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pendulum_equilibrium_under_gravity_torque() {
        let p = PendulumPlant::<f64>::desk();
        let s = PlantState::joint(0.4, 0.0);
        let n = p.step(&s, p.mgd * 0.4f64.sin(), 0.005).unwrap();
        assert_eq!(n.q, s.q);
        assert_eq!(n.q_dot, 0.0);
        assert_abs_diff_eq!(n.t, 0.005, epsilon = 1e-18);
    }

    #[test]
    fn pendulum_free_rotation() {
        let p = PendulumPlant { mgd: 0.0, joint_damping: 0.0, ..PendulumPlant::<f64>::desk() };
        let s = PlantState::joint(0.0, 1.0);
        let n = p.step(&s, 0.0, 0.005).unwrap();
        assert_abs_diff_eq!(n.q, 0.005, epsilon = 1e-15);
        assert_eq!(n.q_dot, 1.0);
    }

    #[test]
    fn pendulum_hard_stop() {
        let p = PendulumPlant { phi_min: -0.5, phi_max: 0.5, mgd: 0.0, ..PendulumPlant::<f64>::desk() };
        let s = PlantState::joint(0.499, 5.0);
        let n = p.step(&s, 0.0, 0.005).unwrap();
        assert_eq!(n.q, 0.5);
        assert_eq!(n.q_dot, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PendulumPlant::<f64>::desk();
        let s = PlantState::joint(0.0, 0.0);
        assert!(p.step(&s, f64::NAN, 0.005).is_err());
        assert!(p.step(&s, 0.0, 0.02).is_err());
        assert!(p.step(&s, 0.0, 0.0).is_err());
        let h = HopperPlant::<f64>::desk();
        assert!(h.step(&h.standing(0.0), f64::INFINITY, 0.001).is_err());
        let bad = HopperPlant { transmission: 0.0, ..h };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hopper_ballistic_flight() {
        let h = HopperPlant::<f64>::desk();
        let dt = 1e-3;
        let mut s = PlantState { q: 0.0, q_dot: 0.0, z: 1.0, z_dot: 0.5, in_contact: false, t: 0.0 };
        for n in 1..=200 {
            s = h.step(&s, 0.0, dt).unwrap();
            let t = n as f64 * dt;
            let exact = 1.0 + 0.5 * t - 0.5 * 9.81 * t * t;
            // semi-implicit Euler lags the parabola by g*dt*t/2
            assert!((s.z - exact).abs() <= 0.5 * 9.81 * dt * t + 1e-12);
            assert!(!s.in_contact);
        }
    }

    #[test]
    fn hopper_hover_in_stance() {
        let h = HopperPlant::<f64>::desk();
        let s0 = h.standing(0.2);
        let mut s = s0;
        for _ in 0..1000 {
            s = h.step(&s, h.hover_torque(), 1e-3).unwrap();
        }
        assert!(s.in_contact);
        assert_abs_diff_eq!(s.z, s0.z, epsilon = 1e-9);
        assert_abs_diff_eq!(s.z_dot, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn hopper_takes_off_and_lands() {
        let h = HopperPlant::<f64>::desk();
        let mut s = h.standing(-0.8);
        let mut airborne = false;
        let mut landed = false;
        for _ in 0..3000 {
            // push hard until full extension, then relax
            let tau = if s.in_contact && !airborne { h.tau_abs_max } else { 0.0 };
            s = h.step(&s, tau, 1e-3).unwrap();
            if !s.in_contact {
                airborne = true;
                assert!(h.foot_height(&s) > -h.contact_tolerance);
            } else if airborne {
                landed = true;
            }
        }
        assert!(airborne && landed);
    }

    #[test]
    fn pulling_leg_lifts_off() {
        let h = HopperPlant::<f64>::desk();
        let s = h.standing(0.0);
        let n = h.step(&s, -1.0, 1e-3).unwrap();
        assert!(!n.in_contact);
    }

    proptest! {
        #[test]
        fn deterministic_and_time_monotone(taus in proptest::collection::vec(-3.0f64..3.0, 1..200)) {
            let h = PlantModel::Hopper(HopperPlant::<f64>::desk());
            let run = || {
                let mut s = h.initial_state(0.0);
                let mut out = Vec::new();
                for &tau in &taus {
                    let n = h.step(&s, tau, 1e-3).unwrap();
                    assert!(n.t > s.t);
                    s = n;
                    out.push(s);
                }
                out
            };
            let a = run();
            let b = run();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.q.to_bits(), y.q.to_bits());
                prop_assert_eq!(x.z.to_bits(), y.z.to_bits());
            }
        }

        #[test]
        fn hopper_contact_consistency(taus in proptest::collection::vec(-3.0f64..3.0, 1..300)) {
            let h = HopperPlant::<f64>::desk();
            let mut s = h.standing(0.0);
            for &tau in &taus {
                let n = h.step(&s, tau, 1e-3).unwrap();
                if n.in_contact {
                    // the ground only pushes: never slower than free fall
                    prop_assert!(n.z_dot >= s.z_dot - h.gravity * 1e-3 - 1e-12);
                    prop_assert!(h.foot_height(&n).abs() < 1e-9);
                } else {
                    prop_assert!(h.foot_height(&n) > -h.contact_tolerance);
                }
                s = n;
            }
        }
    }
}
