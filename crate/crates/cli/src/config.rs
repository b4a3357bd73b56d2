//! Experiment configuration: TOML with a versioned, closed schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Pendulum,
    Hopper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActuatorType {
    Pd,
    Torque,
    Muscle,
}

impl ActuatorType {
    pub fn name(self) -> &'static str {
        match self {
            ActuatorType::Pd => "pd",
            ActuatorType::Torque => "torque",
            ActuatorType::Muscle => "muscle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    IdealSim,
    HardwareFaithful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSource {
    Explicit,
    DampingRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    Hold,
    Walk,
    Hop,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePreset {
    None,
    SimToReal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    #[serde(rename = "type")]
    pub kind: PlantKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mgd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_abs_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coulomb_friction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmission: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg_rest_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg_inertia: Option<f64>,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            kind: PlantKind::Pendulum,
            inertia: None,
            mgd: None,
            joint_damping: None,
            tau_abs_max: None,
            coulomb_friction: None,
            body_mass: None,
            transmission: None,
            leg_rest_length: None,
            leg_inertia: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorSection {
    #[serde(rename = "type")]
    pub kind: ActuatorType,
    pub mode: Mode,
    pub k_stiff: f64,
    pub k_damp: f64,
    /// Defaults to the plant's torque limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_abs_max: Option<f64>,
    /// Required whenever the torque actuator is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_scale: Option<f64>,
    /// Defaults to 0.08 in hardware-faithful mode and 0 in ideal-sim mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_damp_floor: Option<f64>,
}

impl Default for ActuatorSection {
    fn default() -> Self {
        Self {
            kind: ActuatorType::Pd,
            mode: Mode::IdealSim,
            k_stiff: 2.0,
            k_damp: 0.05,
            tau_abs_max: None,
            k_scale: None,
            k_damp_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuscleSection {
    pub l_min: f64,
    pub l_max: f64,
    pub fv_max: f64,
    pub fp_max: f64,
    pub lce_min: f64,
    pub lce_max: f64,
    pub f_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub tau_act: f64,
    pub beta_source: BetaSource,
    /// Used when `beta_source = "explicit"`.
    pub beta: f64,
    /// Target damping for `beta_source = "damping-rule"`.
    pub k_damp_target: f64,
}

impl Default for MuscleSection {
    fn default() -> Self {
        let p = emumuscle::muscle::MuscleParams::<f64>::reference();
        Self {
            l_min: p.l_min,
            l_max: p.l_max,
            fv_max: p.fv_max,
            fp_max: p.fp_max,
            lce_min: p.lce_min,
            lce_max: p.lce_max,
            f_max: p.f_max,
            phi_min: p.phi_min,
            phi_max: p.phi_max,
            tau_act: p.tau_act,
            beta_source: BetaSource::Explicit,
            beta: p.beta,
            k_damp_target: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physics_dt: Option<f64>,
    /// Physics steps per controller tick; checked against the other rates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend_hold: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    #[serde(rename = "type")]
    pub kind: TaskType,
    pub horizon: f64,
    pub target: f64,
    pub fail_angle: f64,
    pub nominal_q: f64,
    pub v_target: f64,
    pub sigma: f64,
    pub hop_gain: f64,
    pub hop_clip: [f64; 2],
    pub w_act: f64,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self {
            kind: TaskType::Hold,
            horizon: 2.0,
            target: 0.5,
            fail_angle: 1.5,
            nominal_q: 0.0,
            v_target: 0.5,
            sigma: 0.25,
            hop_gain: 10.0,
            hop_clip: [0.0, 10.0],
            w_act: 0.004,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub preset: NoisePreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub push_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_pos: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_vel: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub muscle_length: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub muscle_vel: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub muscle_act: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub muscle_force: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_lin_vel: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_ang_vel: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_joint_pos: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_muscle_act: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub friction: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_damping: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub push: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_shift: Option<[f64; 2]>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            preset: NoisePreset::None,
            push_interval: None,
            joint_pos: None,
            joint_vel: None,
            muscle_length: None,
            muscle_vel: None,
            muscle_act: None,
            muscle_force: None,
            base_lin_vel: None,
            base_ang_vel: None,
            gravity: None,
            init_joint_pos: None,
            init_muscle_act: None,
            friction: None,
            joint_damping: None,
            push: None,
            mass_shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub population: usize,
    pub elite_fraction: f64,
    pub generations: usize,
    pub init_std: f64,
    pub extra_std: f64,
    pub noise_decay: f64,
    pub episodes_per_candidate: usize,
    pub eval_episodes: usize,
    pub hidden: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Defaults to the `[actuator]` type alone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actuators: Option<Vec<ActuatorType>>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = emumuscle::learn::cem::CemConfig::default();
        Self {
            population: c.population,
            elite_fraction: c.elite_fraction,
            generations: c.generations,
            init_std: c.init_std,
            extra_std: c.extra_std,
            noise_decay: c.noise_decay,
            episodes_per_candidate: c.episodes_per_candidate,
            eval_episodes: c.eval_episodes,
            hidden: vec![32],
            seeds: vec![0],
            actuators: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSection {
    pub episodes: usize,
    /// Multiplies the training push range to get unseen pushes.
    pub push_scale: f64,
    pub mass_shift_scale: f64,
    pub confidence: f64,
    pub resamples: usize,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        Self { episodes: 100, push_scale: 1.5, mass_shift_scale: 1.0, confidence: 0.95, resamples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub betas: Vec<f64>,
    pub freqs: Vec<f64>,
    pub kick: f64,
    pub horizon: f64,
    pub settle_time: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let b = emumuscle::mrloop::HoldBenchmark::<f64>::reference();
        Self {
            betas: vec![0.0, 0.1, 0.2, 0.36, 0.5, 0.66, 0.8, 1.0],
            freqs: vec![50.0, 100.0, 200.0, 250.0, 500.0, 1000.0, 2500.0, 5000.0],
            kick: b.kick,
            horizon: b.horizon,
            settle_time: b.settle_time,
            threshold: b.threshold,
            inertia: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub actuator: ActuatorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muscle: Option<MuscleSection>,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub noise_dr: NoiseSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub robustness: RobustnessSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            plant: PlantSection::default(),
            actuator: ActuatorSection::default(),
            muscle: None,
            rates: RatesSection::default(),
            task: TaskSection::default(),
            noise_dr: NoiseSection::default(),
            train: TrainSection::default(),
            robustness: RobustnessSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Parsed configuration plus the source text, kept for error locations.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub origin: String,
    pub text: String,
}

impl LoadedConfig {
    pub fn defaults() -> Self {
        Self { config: ExperimentConfig::default(), origin: "<defaults>".into(), text: String::new() }
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::from_str(&text, &path.display().to_string())
    }

    pub fn from_str(text: &str, origin: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => CliError::Config(format!("{origin}:{l}: {msg}")),
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        })?;
        let loaded = Self { config, origin: origin.to_string(), text: text.to_string() };
        if loaded.config.schema_version != SCHEMA_VERSION {
            return Err(loaded.error(
                None,
                Some("schema_version"),
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", loaded.config.schema_version),
            ));
        }
        Ok(loaded)
    }

    /// Config error pointing at `key` inside `[section]`, or at the section header.
    pub fn error(&self, section: Option<&str>, key: Option<&str>, msg: impl std::fmt::Display) -> CliError {
        match locate(&self.text, section, key) {
            Some(line) => CliError::Config(format!("{}:{line}: {msg}", self.origin)),
            None => CliError::Config(format!("{}: {msg}", self.origin)),
        }
    }
}

/// 1-based line number of byte offset `pos`.
pub fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Finds `key = ...` inside `[section]` (top level when `section` is None),
/// falling back to the section header.
pub fn locate(text: &str, section: Option<&str>, key: Option<&str>) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            if current.as_deref() == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(k) = key {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == k {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back = LoadedConfig::from_str(&text, "x").unwrap();
        assert_eq!(back.config, c);
    }

    #[test]
    fn minimal_config() {
        let c = LoadedConfig::from_str("schema_version = 1\n", "x").unwrap();
        assert_eq!(c.config, ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = "schema_version = 1\n[plant]\ntype = \"pendulum\"\nmasss = 2.0\n";
        let err = LoadedConfig::from_str(text, "cfg.toml").unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:4:"), "{err}");
    }

    #[test]
    fn wrong_schema_version() {
        let err = LoadedConfig::from_str("schema_version = 7\n", "cfg.toml").unwrap_err().to_string();
        assert!(err.starts_with("cfg.toml:1:"), "{err}");
    }

    #[test]
    fn locate_keys() {
        let text = "a = 1\n[x]\nb = 2\n[y]\nb = 3\n";
        assert_eq!(locate(text, Some("y"), Some("b")), Some(5));
        assert_eq!(locate(text, Some("x"), Some("zz")), Some(2));
        assert_eq!(locate(text, None, Some("a")), Some(1));
        assert_eq!(locate(text, Some("w"), None), None);
    }
}
