//! Turns a validated configuration into core objects.

use emumuscle::actuators::{JointController, PdGains, TorqueLimits};
use emumuscle::learn::cem::CemConfig;
use emumuscle::learn::env::EnvSetup;
use emumuscle::learn::noise::{NoiseAndDR, Range};
use emumuscle::learn::reward::RewardConfig;
use emumuscle::learn::task::Task;
use emumuscle::mrloop::{HoldBenchmark, LatencyModel, LoopMode, RateConfig};
use emumuscle::muscle::{beta_from_damping, derive_geometry, MuscleGeometry, MuscleParams};
use emumuscle::plant::{HopperPlant, PendulumPlant, PlantModel};

use crate::config::{ActuatorType, BetaSource, LoadedConfig, Mode, NoisePreset, PlantKind, TaskType};
use crate::CliError;

/// Everything a command needs, resolved and cross-checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub plant: PlantModel<f64>,
    pub rates: RateConfig,
    pub latency: LatencyModel,
    pub task: Task<f64>,
    pub reward: RewardConfig<f64>,
    pub noise_dr: NoiseAndDR<f64>,
    pub muscle: Option<(MuscleParams<f64>, MuscleGeometry<f64>)>,
    pub actuators: Vec<ActuatorType>,
    pub cem: CemConfig,
}

impl LoadedConfig {
    /// Actuators a command will touch: the train list if given, else the `[actuator]` type.
    pub fn actuators_in_use(&self) -> Vec<ActuatorType> {
        let mut v = self.config.train.actuators.clone().unwrap_or_else(|| vec![self.config.actuator.kind]);
        v.sort();
        v.dedup();
        v
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let c = &self.config;
        let actuators = self.actuators_in_use();
        if actuators.is_empty() {
            return Err(self.error(Some("train"), Some("actuators"), "actuator list is empty"));
        }
        let uses_muscle = actuators.contains(&ActuatorType::Muscle);
        match (&c.muscle, uses_muscle) {
            (None, true) => {
                return Err(self.error(
                    Some("actuator"),
                    Some("type"),
                    "a [muscle] section is required when the muscle actuator is used",
                ))
            }
            (Some(_), false) => {
                return Err(self.error(Some("muscle"), None, "[muscle] section given but no muscle actuator is used"))
            }
            _ => {}
        }
        if actuators.contains(&ActuatorType::Torque) && c.actuator.k_scale.is_none() {
            return Err(self.error(Some("actuator"), Some("k_scale"), "k_scale is required for the torque actuator"));
        }

        let plant = self.plant()?;
        plant.validate().map_err(|e| self.error(Some("plant"), None, e))?;
        let rates = self.rates()?;
        let latency = LatencyModel {
            action_delay: c.rates.action_delay.unwrap_or(0.0),
            jitter_std: c.rates.jitter_std.unwrap_or(0.0),
            seed: 0,
        };
        latency.validate().map_err(|e| self.error(Some("rates"), None, e))?;

        let t = &c.task;
        let task = match t.kind {
            TaskType::Hold => Task::Hold { target: t.target, fail_angle: t.fail_angle },
            TaskType::Walk => Task::Walk,
            TaskType::Hop => Task::Hop,
            TaskType::Free => Task::Free,
        };
        task.validate_for(&plant).map_err(|e| self.error(Some("task"), Some("type"), e))?;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return Err(self.error(Some("task"), Some("horizon"), "horizon must be positive"));
        }
        let reward = RewardConfig {
            v_target: t.v_target,
            sigma: t.sigma,
            hop_gain: t.hop_gain,
            hop_clip: (t.hop_clip[0], t.hop_clip[1]),
            w_act: t.w_act,
        };
        reward.validate().map_err(|e| self.error(Some("task"), None, e))?;

        let noise_dr = self.noise_dr();
        noise_dr.validate().map_err(|e| self.error(Some("noise_dr"), None, e))?;

        let muscle = match &c.muscle {
            Some(_) => Some(self.muscle_params()?),
            None => None,
        };

        let tr = &c.train;
        let cem = CemConfig {
            population: tr.population,
            elite_fraction: tr.elite_fraction,
            generations: tr.generations,
            init_std: tr.init_std,
            extra_std: tr.extra_std,
            noise_decay: tr.noise_decay,
            episodes_per_candidate: tr.episodes_per_candidate,
            eval_episodes: tr.eval_episodes,
        };
        cem.validate().map_err(|e| self.error(Some("train"), None, e))?;
        if tr.seeds.is_empty() {
            return Err(self.error(Some("train"), Some("seeds"), "seed list is empty"));
        }
        if tr.hidden.contains(&0) {
            return Err(self.error(Some("train"), Some("hidden"), "hidden layer sizes must be positive"));
        }

        let r = Resolved { plant, rates, latency, task, reward, noise_dr, muscle, actuators, cem };
        for &a in &r.actuators {
            self.controller(&r, a)?;
        }
        Ok(r)
    }

    fn plant(&self) -> Result<PlantModel<f64>, CliError> {
        let s = &self.config.plant;
        let pendulum_only = [("inertia", s.inertia), ("mgd", s.mgd)];
        let hopper_only = [
            ("body_mass", s.body_mass),
            ("transmission", s.transmission),
            ("leg_rest_length", s.leg_rest_length),
            ("leg_inertia", s.leg_inertia),
        ];
        Ok(match s.kind {
            PlantKind::Pendulum => {
                if let Some((k, _)) = hopper_only.iter().find(|(_, v)| v.is_some()) {
                    return Err(self.error(Some("plant"), Some(k), format!("'{k}' does not apply to the pendulum")));
                }
                let d = PendulumPlant::desk();
                PlantModel::Pendulum(PendulumPlant {
                    inertia: s.inertia.unwrap_or(d.inertia),
                    mgd: s.mgd.unwrap_or(d.mgd),
                    joint_damping: s.joint_damping.unwrap_or(d.joint_damping),
                    tau_abs_max: s.tau_abs_max.unwrap_or(d.tau_abs_max),
                    coulomb_friction: s.coulomb_friction.unwrap_or(d.coulomb_friction),
                    ..d
                })
            }
            PlantKind::Hopper => {
                if let Some((k, _)) = pendulum_only.iter().find(|(_, v)| v.is_some()) {
                    return Err(self.error(Some("plant"), Some(k), format!("'{k}' does not apply to the hopper")));
                }
                let d = HopperPlant::desk();
                PlantModel::Hopper(HopperPlant {
                    body_mass: s.body_mass.unwrap_or(d.body_mass),
                    transmission: s.transmission.unwrap_or(d.transmission),
                    leg_rest_length: s.leg_rest_length.unwrap_or(d.leg_rest_length),
                    leg_inertia: s.leg_inertia.unwrap_or(d.leg_inertia),
                    joint_damping: s.joint_damping.unwrap_or(d.joint_damping),
                    tau_abs_max: s.tau_abs_max.unwrap_or(d.tau_abs_max),
                    coulomb_friction: s.coulomb_friction.unwrap_or(d.coulomb_friction),
                    ..d
                })
            }
        })
    }

    fn rates(&self) -> Result<RateConfig, CliError> {
        let s = &self.config.rates;
        let mode = match self.config.actuator.mode {
            Mode::IdealSim => LoopMode::IdealSim,
            Mode::HardwareFaithful => LoopMode::HardwareFaithful,
        };
        let base = RateConfig::for_mode(mode);
        let rates = RateConfig {
            mode,
            policy_hz: s.policy_hz.unwrap_or(base.policy_hz),
            controller_hz: s.controller_hz.unwrap_or(base.controller_hz),
            physics_dt: s.physics_dt.unwrap_or(base.physics_dt),
            backend_hold: s.backend_hold.unwrap_or(base.backend_hold),
        };
        rates.validate().map_err(|e| self.error(Some("rates"), None, e))?;
        if let Some(n) = s.substeps {
            if n != rates.substeps() {
                return Err(self.error(
                    Some("rates"),
                    Some("substeps"),
                    format!("substeps = {n} disagrees with controller_hz and physics_dt ({})", rates.substeps()),
                ));
            }
        }
        Ok(rates)
    }

    fn noise_dr(&self) -> NoiseAndDR<f64> {
        let s = &self.config.noise_dr;
        let mut n = match s.preset {
            NoisePreset::None => NoiseAndDR::none(),
            NoisePreset::SimToReal => NoiseAndDR::sim_to_real(),
        };
        let set = |slot: &mut Range<f64>, v: Option<[f64; 2]>| {
            if let Some([lo, hi]) = v {
                *slot = Range { lo, hi };
            }
        };
        set(&mut n.noise.joint_pos, s.joint_pos);
        set(&mut n.noise.joint_vel, s.joint_vel);
        set(&mut n.noise.muscle_length, s.muscle_length);
        set(&mut n.noise.muscle_vel, s.muscle_vel);
        set(&mut n.noise.muscle_act, s.muscle_act);
        set(&mut n.noise.muscle_force, s.muscle_force);
        set(&mut n.noise.base_lin_vel, s.base_lin_vel);
        set(&mut n.noise.base_ang_vel, s.base_ang_vel);
        set(&mut n.noise.gravity, s.gravity);
        set(&mut n.dr.init_joint_pos, s.init_joint_pos);
        set(&mut n.dr.init_muscle_act, s.init_muscle_act);
        set(&mut n.dr.friction, s.friction);
        set(&mut n.dr.joint_damping, s.joint_damping);
        set(&mut n.dr.push, s.push);
        set(&mut n.dr.mass_shift, s.mass_shift);
        if let Some(p) = s.push_interval {
            n.dr.push_interval = p;
        }
        n
    }

    /// Muscle parameters with beta resolved from the configured source.
    pub fn muscle_params(&self) -> Result<(MuscleParams<f64>, MuscleGeometry<f64>), CliError> {
        let m = self.config.muscle.clone().unwrap_or_default();
        let mut p = MuscleParams {
            l_min: m.l_min,
            l_max: m.l_max,
            fv_max: m.fv_max,
            fp_max: m.fp_max,
            lce_min: m.lce_min,
            lce_max: m.lce_max,
            f_max: m.f_max,
            phi_min: m.phi_min,
            phi_max: m.phi_max,
            tau_act: m.tau_act,
            beta: m.beta,
        };
        let g = derive_geometry(&p).map_err(|e| self.error(Some("muscle"), None, e))?;
        if m.beta_source == BetaSource::DampingRule {
            p.beta = beta_from_damping(m.k_damp_target, g.a1, p.f_max)
                .map_err(|e| self.error(Some("muscle"), Some("k_damp_target"), e))?;
        }
        p.validate().map_err(|e| self.error(Some("muscle"), None, e))?;
        Ok((p, g))
    }

    /// Damping the muscle should emulate: the muscle section's target, else the PD gain.
    pub fn target_damping(&self) -> f64 {
        self.config.muscle.as_ref().map_or(self.config.actuator.k_damp, |m| m.k_damp_target)
    }

    pub fn limits(&self, r: &Resolved) -> Result<TorqueLimits<f64>, CliError> {
        let a = &self.config.actuator;
        let plant_max = match r.plant {
            PlantModel::Pendulum(p) => p.tau_abs_max,
            PlantModel::Hopper(h) => h.tau_abs_max,
        };
        let tau_abs_max = a.tau_abs_max.unwrap_or(plant_max);
        let floor = a.k_damp_floor.unwrap_or(match a.mode {
            Mode::IdealSim => 0.0,
            Mode::HardwareFaithful => TorqueLimits::<f64>::hardware_floor_damping(),
        });
        TorqueLimits::new(tau_abs_max, a.k_scale.unwrap_or(tau_abs_max), floor)
            .map_err(|e| self.error(Some("actuator"), None, e))
    }

    pub fn controller(&self, r: &Resolved, kind: ActuatorType) -> Result<JointController<f64>, CliError> {
        let limits = self.limits(r)?;
        let a = &self.config.actuator;
        Ok(match kind {
            ActuatorType::Pd => JointController::pd(
                PdGains::new(a.k_stiff, a.k_damp).map_err(|e| self.error(Some("actuator"), None, e))?,
                limits,
            ),
            ActuatorType::Torque => JointController::torque(limits),
            ActuatorType::Muscle => {
                let (p, g) = r.muscle.ok_or_else(|| self.error(Some("muscle"), None, "missing [muscle] section"))?;
                JointController::muscle(p, g, limits).map_err(|e| self.error(Some("muscle"), None, e))?
            }
        })
    }

    pub fn env(&self, r: &Resolved, kind: ActuatorType) -> Result<EnvSetup<f64>, CliError> {
        Ok(EnvSetup {
            plant: r.plant,
            controller: self.controller(r, kind)?,
            task: r.task,
            reward: r.reward,
            rates: r.rates,
            latency: r.latency,
            noise_dr: r.noise_dr,
            horizon: self.config.task.horizon,
            nominal_q: self.config.task.nominal_q,
        })
    }

    pub fn hold_benchmark(&self, r: &Resolved) -> Result<HoldBenchmark<f64>, CliError> {
        let s = &self.config.sweep;
        let mut b = HoldBenchmark::<f64>::reference();
        if let Some((p, _)) = r.muscle {
            b.params = p;
        }
        if let Some(i) = s.inertia {
            b.plant.inertia = i;
        }
        b.kick = s.kick;
        b.horizon = s.horizon;
        b.settle_time = s.settle_time;
        b.threshold = s.threshold;
        b.rates.physics_dt = r.rates.physics_dt.min(b.rates.physics_dt);
        b.plant.validate().map_err(|e| self.error(Some("sweep"), Some("inertia"), e))?;
        if !(s.settle_time >= 0.0 && s.settle_time < s.horizon) {
            return Err(self.error(Some("sweep"), Some("settle_time"), "settle_time must lie in [0, horizon)"));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> LoadedConfig {
        LoadedConfig::from_str(text, "cfg.toml").unwrap()
    }

    #[test]
    fn default_resolves() {
        let r = LoadedConfig::defaults().resolve().unwrap();
        assert_eq!(r.actuators, vec![ActuatorType::Pd]);
        assert!(r.muscle.is_none());
    }

    #[test]
    fn muscle_section_required_iff_muscle() {
        let err = load("schema_version = 1\n[actuator]\ntype = \"muscle\"\n").resolve().unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:3:"), "{err}");
        let err = load("schema_version = 1\n[muscle]\nbeta = 0.3\n").resolve().unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:2:"), "{err}");
        load("schema_version = 1\n[actuator]\ntype = \"muscle\"\n[muscle]\n").resolve().unwrap();
    }

    #[test]
    fn torque_needs_k_scale() {
        let err = load("schema_version = 1\n[actuator]\ntype = \"torque\"\n").resolve().unwrap_err().to_string();
        assert!(err.contains("k_scale"), "{err}");
        load("schema_version = 1\n[actuator]\ntype = \"torque\"\nk_scale = 2.0\n").resolve().unwrap();
    }

    #[test]
    fn damping_rule_beta() {
        let c = load("schema_version = 1\n[actuator]\ntype = \"muscle\"\n[muscle]\nbeta_source = \"damping-rule\"\n");
        let (p, g) = c.muscle_params().unwrap();
        assert!((p.beta - beta_from_damping(0.1, g.a1, p.f_max).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn task_must_fit_plant() {
        let err = load("schema_version = 1\n[plant]\ntype = \"hopper\"\n").resolve().unwrap_err().to_string();
        assert!(err.contains("hold"), "{err}");
        load("schema_version = 1\n[plant]\ntype = \"hopper\"\n[task]\ntype = \"hop\"\n").resolve().unwrap();
    }

    #[test]
    fn substeps_checked() {
        let err = load("schema_version = 1\n[rates]\nsubsteps = 3\n").resolve().unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:3:"), "{err}");
        load("schema_version = 1\n[rates]\nsubsteps = 4\n").resolve().unwrap();
    }

    #[test]
    fn floor_damping_follows_mode() {
        let c = load("schema_version = 1\n[actuator]\nmode = \"hardware-faithful\"\n");
        let r = c.resolve().unwrap();
        assert_eq!(c.limits(&r).unwrap().k_damp_floor, 0.08);
        let c = LoadedConfig::defaults();
        let r = c.resolve().unwrap();
        assert_eq!(c.limits(&r).unwrap().k_damp_floor, 0.0);
    }
}
