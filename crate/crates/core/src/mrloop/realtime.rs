//! Soft real-time replay: the policy runs on its own thread and exchanges
//! data with the control loop through latest-value mailboxes.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{muscle_observation, EpisodeSpec, EpisodeTrace, StepRecord};
use crate::actuators::JointController;
use crate::learn::noise::observe;
use crate::learn::policy::Policy;
use crate::learn::reward::EpisodeReturn;
use crate::learn::task::Termination;
use crate::plant::{PlantModel, PlantState};
use crate::scalar::Real;
use crate::Result;

/// Single-slot, latest-value channel. Readers never wait on writers.
#[derive(Debug, Default)]
pub struct Mailbox<V> {
    slot: Mutex<Option<(u64, V)>>,
}

impl<V: Clone> Mailbox<V> {
    pub fn new() -> Self {
        Self { slot: Mutex::new(None) }
    }

    pub fn post(&self, seq: u64, v: V) {
        let mut g = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        *g = Some((seq, v));
    }

    /// Latest value, or `None` if empty or the writer holds the lock right now.
    pub fn try_latest(&self) -> Option<(u64, V)> {
        self.slot.try_lock().ok().and_then(|g| g.clone())
    }
}

/// Replays `spec` in wall-clock time scaled by `time_scale` (1 is real time).
/// Tick timing is not reproducible; use [`super::run_episode`] for that.
pub fn run_realtime<T, P>(
    plant: &PlantModel<T>,
    initial: PlantState<T>,
    controller: &mut JointController<T>,
    policy: P,
    spec: &EpisodeSpec<T>,
    time_scale: f64,
) -> Result<EpisodeTrace<T>>
where
    T: Real,
    P: Policy<T> + Send + 'static,
{
    plant.validate()?;
    spec.rates.validate()?;
    let dt = spec.rates.physics_dt;
    let n_steps = (spec.horizon / dt - 1e-9).ceil() as usize;
    let action_dim = controller.action_dim();
    let observations: Arc<Mailbox<Vec<T>>> = Arc::new(Mailbox::new());
    let actions: Arc<Mailbox<Vec<T>>> = Arc::new(Mailbox::new());
    let stop = Arc::new(Mutex::new(false));

    let worker = {
        let (observations, actions, stop) = (observations.clone(), actions.clone(), stop.clone());
        let period = Duration::from_secs_f64(time_scale / spec.rates.policy_hz);
        let mut policy = policy;
        thread::spawn(move || {
            let mut act = vec![T::zero(); action_dim];
            let mut ticks = 0u64;
            let mut seen = None;
            let start = Instant::now();
            while !*stop.lock().unwrap_or_else(|e| e.into_inner()) {
                if let Some((seq, obs)) = observations.try_latest() {
                    if seen != Some(seq) {
                        seen = Some(seq);
                        policy.act(&obs, &mut act);
                        actions.post(ticks, act.clone());
                        ticks += 1;
                    }
                }
                let next = start + period.mul_f64((ticks + 1) as f64);
                thread::sleep(next.saturating_duration_since(Instant::now()).min(period));
            }
            ticks
        })
    };

    let ctrl_every = ((1.0 / (spec.rates.controller_hz * dt)).round() as usize).max(1);
    let mut rng = <rand_chacha::ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(spec.seed);
    let mut obs = Vec::new();
    let mut state = initial;
    let mut torque = T::zero();
    let mut applied = vec![T::zero(); action_dim];
    let mut have_action = false;
    let mut records = Vec::with_capacity(n_steps);
    let mut controller_ticks = 0;
    let start = Instant::now();
    let mut result = Ok(());
    for i in 0..n_steps {
        if i % ctrl_every == 0 {
            let m_obs = match muscle_observation(controller, &state) {
                Ok(m) => m,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            };
            observe(plant, &state, m_obs.as_ref(), &spec.task, &spec.noise, &mut rng, &mut obs);
            observations.post(i as u64, obs.clone());
            if let Some((_, a)) = actions.try_latest() {
                applied = a;
                have_action = true;
            }
            if have_action {
                match controller.compute(&applied, state.q, state.q_dot, T::lit(ctrl_every as f64 * dt)) {
                    Ok(out) => torque = out.torque,
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            controller_ticks += 1;
        }
        state = match plant.step(&state, torque, T::lit(dt)) {
            Ok(s) => s,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        records.push(StepRecord {
            state,
            torque,
            action: applied.clone(),
            m_act: controller.muscle_state().map(|m| m.m_act),
            reward: None,
            done: i + 1 == n_steps,
        });
        let due = start + Duration::from_secs_f64((i + 1) as f64 * dt * time_scale);
        thread::sleep(due.saturating_duration_since(Instant::now()));
    }
    *stop.lock().unwrap_or_else(|e| e.into_inner()) = true;
    let policy_ticks = worker.join().unwrap_or(0) as usize;
    result?;
    let physics_steps = records.len();
    Ok(EpisodeTrace {
        muscle: controller.muscle_state().is_some(),
        records,
        action_dim,
        policy_ticks,
        controller_ticks,
        physics_steps,
        planned_policy_ticks: (spec.horizon * spec.rates.policy_hz).round() as usize,
        clamped_ticks: 0,
        termination: Termination::Horizon,
        end_time: physics_steps as f64 * dt,
        ret: EpisodeReturn::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuators::{PdGains, TorqueLimits};
    use crate::learn::policy::ConstantPolicy;
    use crate::learn::task::Task;
    use crate::mrloop::RateConfig;
    use crate::plant::PendulumPlant;

    #[test]
    fn mailbox_keeps_latest() {
        let m = Mailbox::new();
        assert_eq!(m.try_latest(), None);
        m.post(1, 10);
        m.post(2, 20);
        assert_eq!(m.try_latest(), Some((2, 20)));
    }

    #[test]
    fn realtime_replay_completes() {
        let plant = PlantModel::Pendulum(PendulumPlant::<f64>::desk());
        let mut ctrl = JointController::pd(PdGains::reference(), TorqueLimits::new(2.7, 2.7, 0.0).unwrap());
        let spec = EpisodeSpec::new(RateConfig::ideal_sim(), 0.2, Task::Free);
        let tr = run_realtime(&plant, PlantState::joint(0.5, 0.0), &mut ctrl, ConstantPolicy(vec![0.0]), &spec, 1.0)
            .unwrap();
        assert_eq!(tr.physics_steps, 40);
        assert_eq!(tr.controller_ticks, 10);
        assert!(tr.policy_ticks >= 1);
        assert!(tr.records.iter().all(|r| r.state.q.is_finite()));
    }
}
