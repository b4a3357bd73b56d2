//! Observation noise and per-episode domain randomization.
//!
//! All ranges are sampled uniformly and added to the nominal value.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actuators::ActuatorKind;
use crate::learn::task::Task;
use crate::muscle::MuscleState;
use crate::plant::{PlantModel, PlantState};
use crate::scalar::Real;
use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Range<T> {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo: T::lit(lo), hi: T::lit(hi) }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self::new(-half_width, half_width)
    }

    pub fn zero() -> Self {
        Self { lo: T::zero(), hi: T::zero() }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo <= self.hi) {
            return Err(invalid(format!("range '{name}' must satisfy lo <= hi")));
        }
        Ok(())
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { lo: self.lo * T::lit(k), hi: self.hi * T::lit(k) }
    }

    /// Uniform draw; always consumes exactly one random number.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        let x = self.lo + (self.hi - self.lo) * T::lit(u);
        x.min(self.hi)
    }
}

/// Per-channel additive observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputNoise<T> {
    pub base_lin_vel: Range<T>,
    pub base_ang_vel: Range<T>,
    pub gravity: Range<T>,
    pub joint_pos: Range<T>,
    pub joint_vel: Range<T>,
    pub muscle_length: Range<T>,
    pub muscle_vel: Range<T>,
    pub muscle_act: Range<T>,
    pub muscle_force: Range<T>,
}

impl<T: Real> InputNoise<T> {
    pub fn sim_to_real() -> Self {
        Self {
            base_lin_vel: Range::symmetric(0.02),
            base_ang_vel: Range::symmetric(0.05),
            gravity: Range::symmetric(0.05),
            joint_pos: Range::symmetric(0.01),
            joint_vel: Range::symmetric(0.075),
            muscle_length: Range::symmetric(0.01),
            muscle_vel: Range::symmetric(1.0),
            muscle_act: Range::symmetric(0.01),
            muscle_force: Range::symmetric(1.0),
        }
    }

    pub fn none() -> Self {
        Self {
            base_lin_vel: Range::zero(),
            base_ang_vel: Range::zero(),
            gravity: Range::zero(),
            joint_pos: Range::zero(),
            joint_vel: Range::zero(),
            muscle_length: Range::zero(),
            muscle_vel: Range::zero(),
            muscle_act: Range::zero(),
            muscle_force: Range::zero(),
        }
    }

    pub fn channels(&self) -> [(&'static str, Range<T>); 9] {
        [
            ("base_lin_vel", self.base_lin_vel),
            ("base_ang_vel", self.base_ang_vel),
            ("gravity", self.gravity),
            ("joint_pos", self.joint_pos),
            ("joint_vel", self.joint_vel),
            ("muscle_length", self.muscle_length),
            ("muscle_vel", self.muscle_vel),
            ("muscle_act", self.muscle_act),
            ("muscle_force", self.muscle_force),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.channels().iter().try_for_each(|(n, r)| r.validate(n))
    }
}

/// Ranges drawn once per episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainRandomization<T> {
    pub init_joint_pos: Range<T>,
    pub init_muscle_act: Range<T>,
    /// Multiplies the plant's Coulomb friction.
    pub friction: Range<T>,
    pub joint_damping: Range<T>,
    /// Instantaneous velocity change per push.
    pub push: Range<T>,
    pub mass_shift: Range<T>,
    /// Seconds between pushes.
    pub push_interval: T,
}

impl<T: Real> DomainRandomization<T> {
    pub fn sim_to_real() -> Self {
        Self {
            init_joint_pos: Range::symmetric(1.0),
            init_muscle_act: Range::new(0.5, 1.0),
            friction: Range::new(0.5, 1.25),
            joint_damping: Range::new(0.0, 0.09),
            push: Range::symmetric(1.5),
            mass_shift: Range::new(-0.5, 1.2),
            push_interval: T::lit(2.0),
        }
    }

    pub fn none() -> Self {
        Self {
            init_joint_pos: Range::zero(),
            init_muscle_act: Range::zero(),
            friction: Range::new(1.0, 1.0),
            joint_damping: Range::zero(),
            push: Range::zero(),
            mass_shift: Range::zero(),
            push_interval: T::lit(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init_joint_pos.validate("init_joint_pos")?;
        self.init_muscle_act.validate("init_muscle_act")?;
        self.friction.validate("friction")?;
        self.joint_damping.validate("joint_damping")?;
        self.push.validate("push")?;
        self.mass_shift.validate("mass_shift")?;
        if !(self.push_interval > T::zero()) {
            return Err(invalid("push_interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAndDR<T> {
    pub noise: InputNoise<T>,
    pub dr: DomainRandomization<T>,
}

impl<T: Real> NoiseAndDR<T> {
    pub fn sim_to_real() -> Self {
        Self { noise: InputNoise::sim_to_real(), dr: DomainRandomization::sim_to_real() }
    }

    pub fn none() -> Self {
        Self { noise: InputNoise::none(), dr: DomainRandomization::none() }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.dr.validate()
    }
}

/// Muscle quantities exposed to the policy when the muscle controller is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleObservation<T> {
    pub state: MuscleState<T>,
    pub forces: [T; 2],
}

/// Number of observation channels for a plant/task/actuator combination.
pub fn observation_dim<T: Real>(plant: &PlantModel<T>, task: &Task<T>, kind: ActuatorKind) -> usize {
    let plant_dim = match plant {
        PlantModel::Pendulum(_) => 4,
        PlantModel::Hopper(_) => 5,
    };
    let task_dim = usize::from(task.command_channel().is_some());
    let muscle_dim = if kind == ActuatorKind::Muscle { 8 } else { 0 };
    plant_dim + task_dim + muscle_dim
}

/// Builds the (noisy) observation vector into `out`.
///
/// Layout: `q, q_dot`, then plant channels (pendulum: `sin q, cos q`;
/// hopper: `z, z_dot, contact`), the task command if any, and for the
/// muscle controller `l1, l2, v1, v2, m1, m2, f1, f2`.
pub fn observe<T: Real, R: Rng + ?Sized>(
    plant: &PlantModel<T>,
    state: &PlantState<T>,
    muscle: Option<&MuscleObservation<T>>,
    task: &Task<T>,
    noise: &InputNoise<T>,
    rng: &mut R,
    out: &mut Vec<T>,
) {
    out.clear();
    out.push(state.q + noise.joint_pos.sample(rng));
    out.push(state.q_dot + noise.joint_vel.sample(rng));
    match plant {
        PlantModel::Pendulum(_) => {
            out.push(state.q.sin() + noise.gravity.sample(rng));
            out.push(state.q.cos() + noise.gravity.sample(rng));
        }
        PlantModel::Hopper(_) => {
            out.push(state.z);
            out.push(state.z_dot + noise.base_lin_vel.sample(rng));
            out.push(if state.in_contact { T::one() } else { T::zero() });
        }
    }
    if let Some(c) = task.command_channel() {
        out.push(c);
    }
    if let Some(m) = muscle {
        for k in 0..2 {
            out.push(m.state.l[k] + noise.muscle_length.sample(rng));
        }
        for k in 0..2 {
            out.push(m.state.l_dot_bar[k] + noise.muscle_vel.sample(rng));
        }
        for k in 0..2 {
            out.push(m.state.m_act[k] + noise.muscle_act.sample(rng));
        }
        for k in 0..2 {
            out.push(m.forces[k] + noise.muscle_force.sample(rng));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Push<T> {
    pub t: T,
    pub dv: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedEpisode<T> {
    pub plant: PlantModel<T>,
    pub initial: PlantState<T>,
    pub init_muscle_act: [T; 2],
    pub pushes: Vec<Push<T>>,
}

/// Draws one episode's randomization. Equal seeds give equal draws.
pub fn randomize_episode<T: Real>(
    plant: &PlantModel<T>,
    nominal_q: T,
    dr: &DomainRandomization<T>,
    horizon: T,
    seed: u64,
) -> Result<RandomizedEpisode<T>> {
    dr.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = *plant;
    let q0 = nominal_q + dr.init_joint_pos.sample(&mut rng);
    let clamp01 = |x: T| x.max(T::zero()).min(T::one());
    let init_muscle_act = [clamp01(dr.init_muscle_act.sample(&mut rng)), clamp01(dr.init_muscle_act.sample(&mut rng))];
    let friction = dr.friction.sample(&mut rng);
    let damping = dr.joint_damping.sample(&mut rng);
    let mass = dr.mass_shift.sample(&mut rng);
    if friction != T::one() {
        plant.scale_friction(friction);
    }
    if damping != T::zero() {
        plant.add_joint_damping(damping);
    }
    if mass != T::zero() {
        plant.shift_mass(mass);
    }
    let mut pushes = Vec::new();
    let mut k = 1u32;
    loop {
        let t = dr.push_interval * T::lit(f64::from(k));
        if t >= horizon {
            break;
        }
        let dv = dr.push.sample(&mut rng);
        if dv != T::zero() {
            pushes.push(Push { t, dv });
        }
        k += 1;
    }
    let initial = plant.initial_state(q0);
    Ok(RandomizedEpisode { plant, initial, init_muscle_act, pushes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{HopperPlant, PendulumPlant};

    #[test]
    fn zero_noise_is_identity() {
        let plant = PlantModel::Pendulum(PendulumPlant::<f64>::desk());
        let s = PlantState::joint(0.3, -0.2);
        let task = Task::Hold { target: 0.5, fail_angle: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = Vec::new();
        observe(&plant, &s, None, &task, &InputNoise::none(), &mut rng, &mut out);
        assert_eq!(out, vec![0.3, -0.2, 0.3f64.sin(), 0.3f64.cos(), 0.5]);
    }

    #[test]
    fn muscle_channels_only_with_muscle() {
        let plant = PlantModel::Hopper(HopperPlant::<f64>::desk());
        let s = plant.initial_state(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = Vec::new();
        observe(&plant, &s, None, &Task::Hop, &InputNoise::none(), &mut rng, &mut out);
        assert_eq!(out.len(), observation_dim(&plant, &Task::Hop, ActuatorKind::Pd));
        let m = MuscleObservation { state: MuscleState::default(), forces: [0.0; 2] };
        observe(&plant, &s, Some(&m), &Task::Hop, &InputNoise::none(), &mut rng, &mut out);
        assert_eq!(out.len(), observation_dim(&plant, &Task::Hop, ActuatorKind::Muscle));
        assert_eq!(out.len(), 5 + 8);
    }

    #[test]
    fn noise_stays_in_range() {
        let noise = InputNoise::<f64>::sim_to_real();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (name, r) in noise.channels() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..1_000_000 / 9 {
                let x = r.sample(&mut rng);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            assert!(r.contains(lo) && r.contains(hi), "{name}");
            // the range is actually explored
            assert!(hi - lo > 0.99 * (r.hi - r.lo), "{name}");
        }
    }

    #[test]
    fn degenerate_randomization_is_identity() {
        let plant = PlantModel::Pendulum(PendulumPlant::<f64>::desk());
        let ep = randomize_episode(&plant, 0.2, &DomainRandomization::none(), 10.0, 3).unwrap();
        assert_eq!(ep.plant, plant);
        assert_eq!(ep.initial, plant.initial_state(0.2));
        assert_eq!(ep.init_muscle_act, [0.0, 0.0]);
        assert!(ep.pushes.is_empty());
    }

    #[test]
    fn randomization_is_seeded() {
        let plant = PlantModel::Hopper(HopperPlant::<f64>::desk());
        let dr = DomainRandomization::sim_to_real();
        let a = randomize_episode(&plant, 0.0, &dr, 10.0, 11).unwrap();
        let b = randomize_episode(&plant, 0.0, &dr, 10.0, 11).unwrap();
        let c = randomize_episode(&plant, 0.0, &dr, 10.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.pushes.len(), 4);
        for seed in 0..500 {
            let ep = randomize_episode(&plant, 0.0, &dr, 1.0, seed).unwrap();
            for m in ep.init_muscle_act {
                assert!((0.5..=1.0).contains(&m));
            }
        }
    }

    #[test]
    fn rejects_inverted_range() {
        let mut dr = DomainRandomization::<f64>::sim_to_real();
        dr.friction = Range::new(1.0, 0.0);
        assert!(dr.validate().is_err());
    }
}
