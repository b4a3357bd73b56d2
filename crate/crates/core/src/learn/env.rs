//! One fully specified training/evaluation environment.

use crate::actuators::JointController;
use crate::learn::noise::{observation_dim, randomize_episode, NoiseAndDR};
use crate::learn::policy::{ActionMap, Policy, PolicySpec};
use crate::learn::reward::RewardConfig;
use crate::learn::task::Task;
use crate::mrloop::{run_episode, EpisodeSpec, EpisodeTrace, LatencyModel, RateConfig};
use crate::plant::PlantModel;
use crate::scalar::Real;
use crate::{invalid, Result};

/// Stateless mixing of a seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSetup<T> {
    pub plant: PlantModel<T>,
    /// Template; each rollout works on a reset copy.
    pub controller: JointController<T>,
    pub task: Task<T>,
    pub reward: RewardConfig<T>,
    pub rates: RateConfig,
    pub latency: LatencyModel,
    pub noise_dr: NoiseAndDR<T>,
    /// Seconds.
    pub horizon: f64,
    /// Joint angle the initial-position randomization is centered on.
    pub nominal_q: T,
}

impl<T: Real> EnvSetup<T> {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.task.validate_for(&self.plant)?;
        self.reward.validate()?;
        self.rates.validate()?;
        self.latency.validate()?;
        self.noise_dr.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        observation_dim(&self.plant, &self.task, self.controller.kind())
    }

    /// Zero-parameter policy with the actuator's action map.
    pub fn initial_policy(&self, hidden: Vec<usize>) -> PolicySpec {
        let (lo, hi) = self.plant.joint_limits();
        let map = ActionMap::for_actuator(self.controller.kind(), (lo.to_f64_lossy(), hi.to_f64_lossy()));
        PolicySpec::zeros(self.observation_dim(), hidden, map)
    }

    /// Randomizes, resets and runs one episode. Equal seeds give identical traces.
    pub fn rollout<P: Policy<T> + ?Sized>(&self, policy: &mut P, seed: u64, record: bool) -> Result<EpisodeTrace<T>> {
        let ep = randomize_episode(
            &self.plant,
            self.nominal_q,
            &self.noise_dr.dr,
            T::lit(self.horizon),
            derive_seed(seed, 1),
        )?;
        let mut controller = self.controller.clone();
        controller.reset(ep.init_muscle_act, ep.initial.q, ep.initial.q_dot);
        policy.reset();
        let spec = EpisodeSpec {
            rates: self.rates,
            latency: LatencyModel { seed: derive_seed(seed, 3), ..self.latency },
            horizon: self.horizon,
            task: self.task,
            reward: self.reward,
            noise: self.noise_dr.noise,
            pushes: ep.pushes,
            seed: derive_seed(seed, 2),
            record,
        };
        run_episode(&ep.plant, ep.initial, &mut controller, policy, &spec)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::actuators::{PdGains, TorqueLimits};
    use crate::plant::PendulumPlant;

    /// Pendulum hold with the PD actuator, ideal-sim rates, no randomization.
    pub fn pendulum_hold() -> EnvSetup<f64> {
        let plant = PendulumPlant::desk();
        EnvSetup {
            plant: PlantModel::Pendulum(plant),
            controller: JointController::pd(
                PdGains::reference(),
                TorqueLimits::new(plant.tau_abs_max, 2.7, 0.0).unwrap(),
            ),
            task: Task::Hold { target: 0.5, fail_angle: 1.5 },
            reward: RewardConfig::default(),
            rates: RateConfig::ideal_sim(),
            latency: LatencyModel::default(),
            noise_dr: NoiseAndDR::none(),
            horizon: 2.0,
            nominal_q: 0.0,
        }
    }
}
