//! Multi-rate policy / controller / physics loop.
//!
//! Everything is scheduled on integer physics-step indices, so tick counts
//! are exact and runs are reproducible bit for bit.

mod realtime;
mod stability;

pub use realtime::{run_realtime, Mailbox};
pub use stability::{stability_metric, sweep_beta, write_sweep_csv, HoldBenchmark, StabilityCell};

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::actuators::JointController;
use crate::format::fmt_sig9;
use crate::learn::noise::{observe, InputNoise, MuscleObservation, Push};
use crate::learn::policy::Policy;
use crate::learn::reward::{reward_action_rate, EpisodeReturn, RewardConfig, TaskReward};
use crate::learn::task::{FailureMonitor, Task, Termination};
use crate::muscle::muscle_forces;
use crate::plant::{PlantModel, PlantState};
use crate::scalar::Real;
use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    /// Controller and physics share a coarse step, as in a GPU simulator.
    IdealSim,
    /// Fine physics with an independently clocked controller, as on the desk rig.
    HardwareFaithful,
}

impl LoopMode {
    pub fn name(self) -> &'static str {
        match self {
            LoopMode::IdealSim => "ideal-sim",
            LoopMode::HardwareFaithful => "hardware-faithful",
        }
    }
}

impl std::str::FromStr for LoopMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal-sim" => Ok(LoopMode::IdealSim),
            "hardware-faithful" => Ok(LoopMode::HardwareFaithful),
            other => Err(invalid(format!("unknown loop mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    pub mode: LoopMode,
    pub policy_hz: f64,
    pub controller_hz: f64,
    /// Physics step in seconds.
    pub physics_dt: f64,
    /// Hold the last torque between controller ticks; otherwise torque is applied for one physics step only.
    pub backend_hold: bool,
}

impl RateConfig {
    pub fn ideal_sim() -> Self {
        Self { mode: LoopMode::IdealSim, policy_hz: 50.0, controller_hz: 50.0, physics_dt: 0.005, backend_hold: true }
    }

    pub fn hardware_faithful() -> Self {
        Self {
            mode: LoopMode::HardwareFaithful,
            policy_hz: 50.0,
            controller_hz: 500.0,
            physics_dt: 2e-4,
            backend_hold: true,
        }
    }

    pub fn for_mode(mode: LoopMode) -> Self {
        match mode {
            LoopMode::IdealSim => Self::ideal_sim(),
            LoopMode::HardwareFaithful => Self::hardware_faithful(),
        }
    }

    pub fn with_controller_hz(self, controller_hz: f64) -> Self {
        Self { controller_hz, ..self }
    }

    /// Physics steps per controller tick in ideal-sim mode.
    pub fn substeps(&self) -> usize {
        (1.0 / (self.controller_hz * self.physics_dt)).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("policy_hz", self.policy_hz), ("controller_hz", self.controller_hz), ("physics_dt", self.physics_dt)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.physics_dt > 0.01 {
            return Err(invalid("physics_dt must not exceed 0.01 s"));
        }
        if self.controller_hz < self.policy_hz {
            return Err(invalid("controller_hz must be at least policy_hz"));
        }
        if self.controller_hz * self.physics_dt > 1.0 + 1e-9 {
            return Err(invalid("controller_hz exceeds the physics rate"));
        }
        if self.mode == LoopMode::IdealSim {
            let n = self.substeps() as f64;
            if (n * self.physics_dt * self.controller_hz - 1.0).abs() > 1e-9 {
                return Err(invalid("ideal-sim needs a whole number of physics substeps per controller tick"));
            }
        }
        Ok(())
    }
}

/// Policy-to-controller transport delay and controller clock jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    /// Seconds between a policy tick and the controller seeing its action.
    pub action_delay: f64,
    /// Std of the controller tick time, truncated at two sigma.
    pub jitter_std: f64,
    pub seed: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { action_delay: 0.0, jitter_std: 0.0, seed: 0 }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.action_delay >= 0.0 && self.action_delay.is_finite()) {
            return Err(invalid("action_delay must be non-negative"));
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(invalid("jitter_std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec<T> {
    pub rates: RateConfig,
    pub latency: LatencyModel,
    /// Seconds.
    pub horizon: f64,
    pub task: Task<T>,
    pub reward: RewardConfig<T>,
    pub noise: InputNoise<T>,
    pub pushes: Vec<Push<T>>,
    /// Seeds the observation noise.
    pub seed: u64,
    /// Keep one record per physics step.
    pub record: bool,
}

impl<T: Real> EpisodeSpec<T> {
    pub fn new(rates: RateConfig, horizon: f64, task: Task<T>) -> Self {
        Self {
            rates,
            latency: LatencyModel::default(),
            horizon,
            task,
            reward: RewardConfig::default(),
            noise: InputNoise::none(),
            pushes: Vec::new(),
            seed: 0,
            record: true,
        }
    }
}

/// State after one physics step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub state: PlantState<T>,
    pub torque: T,
    /// Action the controller was following during this step.
    pub action: Vec<T>,
    pub m_act: Option<[T; 2]>,
    /// Rewards, present on policy ticks only.
    pub reward: Option<(f64, f64)>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<T> {
    pub records: Vec<StepRecord<T>>,
    pub action_dim: usize,
    pub muscle: bool,
    pub policy_ticks: usize,
    pub controller_ticks: usize,
    pub physics_steps: usize,
    /// Policy ticks a full-length episode would have.
    pub planned_policy_ticks: usize,
    pub clamped_ticks: usize,
    pub termination: Termination,
    pub end_time: f64,
    pub ret: EpisodeReturn,
}

impl<T: Real> EpisodeTrace<T> {
    /// Policy steps completed before any failure.
    pub fn success_steps(&self, policy_hz: f64) -> usize {
        if self.termination.is_failure() {
            ((self.end_time * policy_hz + 1e-9).floor() as usize).min(self.planned_policy_ticks)
        } else {
            self.planned_policy_ticks
        }
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = ["t", "q", "q_dot", "z", "z_dot", "tau"].iter().map(|s| s.to_string()).collect();
        cols.extend((0..self.action_dim).map(|k| format!("act_{k}")));
        if self.muscle {
            cols.extend(["m_act_0".to_string(), "m_act_1".to_string()]);
        }
        cols.extend(["r_task", "r_act", "done"].iter().map(|s| s.to_string()));
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for r in &self.records {
            let s = &r.state;
            let mut f: Vec<String> =
                [s.t, s.q, s.q_dot, s.z, s.z_dot, r.torque].iter().map(|x| fmt_sig9(x.to_f64_lossy())).collect();
            f.extend(r.action.iter().map(|x| fmt_sig9(x.to_f64_lossy())));
            if let Some(m) = r.m_act {
                f.extend(m.iter().map(|x| fmt_sig9(x.to_f64_lossy())));
            }
            match r.reward {
                Some((task, act)) => {
                    f.push(fmt_sig9(task));
                    f.push(fmt_sig9(act));
                }
                None => f.extend([String::new(), String::new()]),
            }
            f.push(u8::from(r.done).to_string());
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }
}

/// Step indices `round(k * period / dt)` for `k = 0, 1, ...` below `n_steps`,
/// optionally jittered, strictly increasing.
fn tick_steps<R: Rng>(period: f64, dt: f64, n_steps: usize, jitter_std: f64, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let mut t = k as f64 * period;
        if jitter_std > 0.0 && k > 0 {
            t += truncated_normal(rng, 2.0) * jitter_std;
        }
        let mut idx = (t / dt).round().max(0.0) as usize;
        if let Some(&prev) = out.last() {
            idx = idx.max(prev + 1);
        }
        if idx >= n_steps {
            break;
        }
        out.push(idx);
        k += 1;
    }
    out
}

fn truncated_normal<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        if x.abs() <= bound {
            return x;
        }
    }
}

pub(crate) fn muscle_observation<T: Real>(
    controller: &JointController<T>,
    s: &PlantState<T>,
) -> Result<Option<MuscleObservation<T>>> {
    match controller {
        JointController::Muscle { params, geometry, state, .. } => {
            let forces = muscle_forces(state, s.q, s.q_dot, params, geometry)?;
            Ok(Some(MuscleObservation { state: *state, forces }))
        }
        _ => Ok(None),
    }
}

/// Runs one episode from `initial`. The controller should already be reset.
pub fn run_episode<T: Real, P: Policy<T> + ?Sized>(
    plant: &PlantModel<T>,
    initial: PlantState<T>,
    controller: &mut JointController<T>,
    policy: &mut P,
    spec: &EpisodeSpec<T>,
) -> Result<EpisodeTrace<T>> {
    plant.validate()?;
    spec.rates.validate()?;
    spec.latency.validate()?;
    spec.reward.validate()?;
    spec.noise.validate()?;
    spec.task.validate_for(plant)?;
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(invalid("horizon must be positive"));
    }
    let rates = &spec.rates;
    let dt = rates.physics_dt;
    let dt_t = T::lit(dt);
    let n_steps = (spec.horizon / dt - 1e-9).ceil() as usize;

    let mut jitter_rng = ChaCha8Rng::seed_from_u64(spec.latency.seed);
    let ctrl_steps = tick_steps(1.0 / rates.controller_hz, dt, n_steps, spec.latency.jitter_std, &mut jitter_rng);
    let policy_steps = tick_steps(1.0 / rates.policy_hz, dt, n_steps, 0.0, &mut jitter_rng);
    let delay_steps = (spec.latency.action_delay / dt).round() as usize;
    let mut push_steps: Vec<(usize, T)> =
        spec.pushes.iter().map(|p| ((p.t.to_f64_lossy() / dt).round() as usize, p.dv)).collect();
    push_steps.sort_by_key(|p| p.0);

    let mut obs_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let action_dim = controller.action_dim();
    let muscle = controller.muscle_state().is_some();
    let mut obs = Vec::new();
    let mut new_action = vec![T::zero(); action_dim];
    let mut prev_action: Option<Vec<T>> = None;
    let mut applied: Vec<T> = vec![T::zero(); action_dim];
    let mut have_action = false;
    let mut pending: VecDeque<(usize, Vec<T>)> = VecDeque::new();
    let mut monitor = FailureMonitor::<T>::default();

    let mut state = initial;
    let mut torque = T::zero();
    let mut last_ctrl_step: Option<usize> = None;
    let (mut pi, mut ci, mut pu) = (0usize, 0usize, 0usize);
    let mut records = Vec::with_capacity(if spec.record { n_steps } else { 0 });
    let mut ret = EpisodeReturn::default();
    let mut clamped_ticks = 0;
    let mut termination = Termination::Horizon;
    let mut steps_done = 0;

    for i in 0..n_steps {
        let mut reward = None;
        if pi < policy_steps.len() && policy_steps[pi] == i {
            pi += 1;
            let m_obs = muscle_observation(controller, &state)?;
            observe(plant, &state, m_obs.as_ref(), &spec.task, &spec.noise, &mut obs_rng, &mut obs);
            policy.act(&obs, &mut new_action);
            let r_task: TaskReward = spec.task.reward(&state, &spec.reward);
            let r_act = match &prev_action {
                Some(prev) => reward_action_rate(prev, &new_action, spec.reward.w_act)?.to_f64_lossy(),
                None => 0.0,
            };
            if !matches!(spec.task, Task::Free) {
                ret.push(r_task, r_act);
            }
            reward = Some((r_task.value(), r_act));
            prev_action = Some(new_action.clone());
            pending.push_back((i + delay_steps, new_action.clone()));
        }
        while pending.front().is_some_and(|(due, _)| *due <= i) {
            applied = pending.pop_front().map(|p| p.1).unwrap_or_default();
            have_action = true;
        }
        let ctrl_tick = ci < ctrl_steps.len() && ctrl_steps[ci] == i;
        if ctrl_tick {
            ci += 1;
            if have_action {
                let elapsed = match last_ctrl_step {
                    Some(prev) => (i - prev) as f64 * dt,
                    None => 1.0 / rates.controller_hz,
                };
                let out = controller.compute(&applied, state.q, state.q_dot, T::lit(elapsed))?;
                torque = out.torque;
                clamped_ticks += usize::from(out.clamped);
            }
            last_ctrl_step = Some(i);
        } else if !rates.backend_hold {
            torque = T::zero();
        }
        while pu < push_steps.len() && push_steps[pu].0 <= i {
            plant.apply_push(&mut state, push_steps[pu].1);
            pu += 1;
        }
        state = plant.step(&state, torque, dt_t)?;
        steps_done = i + 1;
        let failed = monitor.check(plant, &spec.task, &state, dt_t);
        let done = failed.is_some() || i + 1 == n_steps;
        if spec.record {
            records.push(StepRecord {
                state,
                torque,
                action: applied.clone(),
                m_act: controller.muscle_state().map(|m| m.m_act),
                reward,
                done,
            });
        }
        if let Some(t) = failed {
            termination = t;
            break;
        }
    }

    Ok(EpisodeTrace {
        records,
        action_dim,
        muscle,
        policy_ticks: pi,
        controller_ticks: ci,
        physics_steps: steps_done,
        planned_policy_ticks: policy_steps.len(),
        clamped_ticks,
        termination,
        end_time: steps_done as f64 * dt,
        ret,
    })
}
