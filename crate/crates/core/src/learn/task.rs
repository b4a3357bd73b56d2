//! Task objectives and termination rules.

use crate::learn::reward::{reward_hop_ln, reward_walk, RewardConfig, TaskReward};
use crate::plant::{PlantModel, PlantState};
use crate::scalar::Real;
use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task<T> {
    /// Keep the pendulum joint near `target`; fails beyond `fail_angle`.
    Hold { target: T, fail_angle: T },
    /// Track the reward's target joint velocity.
    Walk,
    /// Jump the hopper as fast as possible.
    Hop,
    /// No objective, no failure other than divergence.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    /// Left the hold window or the hopper body collapsed.
    Fell,
    /// Pressed against a hard stop for too long.
    StuckAtStop,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        self != Termination::Horizon
    }

    pub fn name(self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::Fell => "fell",
            Termination::StuckAtStop => "stuck_at_stop",
        }
    }
}

impl<T: Real> Task<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Hold { .. } => "hold",
            Task::Walk => "walk",
            Task::Hop => "hop",
            Task::Free => "free",
        }
    }

    pub fn validate_for(&self, plant: &PlantModel<T>) -> Result<()> {
        match (self, plant) {
            (Task::Hold { fail_angle, .. }, PlantModel::Pendulum(_)) => {
                if !(*fail_angle > T::zero()) {
                    return Err(invalid("hold fail_angle must be positive"));
                }
                Ok(())
            }
            (Task::Walk, PlantModel::Pendulum(_)) | (Task::Hop, PlantModel::Hopper(_)) | (Task::Free, _) => Ok(()),
            _ => Err(invalid(format!("task '{}' is not defined on the {} plant", self.name(), plant.name()))),
        }
    }

    /// Command value shown to the policy, if the task has one.
    pub fn command_channel(&self) -> Option<T> {
        match self {
            Task::Hold { target, .. } => Some(*target),
            _ => None,
        }
    }

    pub fn reward(&self, s: &PlantState<T>, cfg: &RewardConfig<T>) -> TaskReward {
        let ln = match self {
            // log of the Gaussian tracking kernel, exact even far from target
            Task::Hold { target, .. } => {
                let e = *target - s.q;
                -(e * e) / cfg.sigma
            }
            Task::Walk => reward_walk(s.q_dot, cfg).ln(),
            Task::Hop => reward_hop_ln(s.z_dot, cfg),
            Task::Free => return TaskReward { ln: f64::NEG_INFINITY },
        };
        TaskReward { ln: ln.to_f64_lossy() }
    }
}

/// Stateful failure detector for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureMonitor<T> {
    pub max_time_at_stop: T,
    /// Hopper collapse threshold as a fraction of leg rest length.
    pub min_height_fraction: T,
    time_at_stop: T,
}

impl<T: Real> Default for FailureMonitor<T> {
    fn default() -> Self {
        Self { max_time_at_stop: T::lit(0.5), min_height_fraction: T::lit(0.4), time_at_stop: T::zero() }
    }
}

impl<T: Real> FailureMonitor<T> {
    pub fn reset(&mut self) {
        self.time_at_stop = T::zero();
    }

    /// Called after every physics step of length `dt`.
    pub fn check(&mut self, plant: &PlantModel<T>, task: &Task<T>, s: &PlantState<T>, dt: T) -> Option<Termination> {
        if let Task::Hold { target, fail_angle } = task {
            if (s.q - *target).abs() > *fail_angle {
                return Some(Termination::Fell);
            }
        }
        if let PlantModel::Hopper(h) = plant {
            if s.z - h.ground_height < self.min_height_fraction * h.leg_rest_length {
                return Some(Termination::Fell);
            }
        }
        if matches!(task, Task::Free) {
            return None;
        }
        if plant.at_stop(s) {
            self.time_at_stop = self.time_at_stop + dt;
            if self.time_at_stop > self.max_time_at_stop {
                return Some(Termination::StuckAtStop);
            }
        } else {
            self.time_at_stop = T::zero();
        }
        None
    }
}
