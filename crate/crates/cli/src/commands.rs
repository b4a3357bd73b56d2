//! Subcommand implementations. Each writes into the output directory only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use emumuscle::format::fmt_sig9;
use emumuscle::learn::cem::{train as cem_train, write_curve_csv, GenerationStats, TrainOutcome};
use emumuscle::learn::env::EnvSetup;
use emumuscle::learn::noise::NoiseAndDR;
use emumuscle::learn::policy::{FnPolicy, Policy, PolicySpec};
use emumuscle::learn::robustness::{bootstrap_ci, success_rate};
use emumuscle::learn::task::Task;
use emumuscle::mrloop::{sweep_beta as run_sweep, write_sweep_csv};
use emumuscle::muscle::{beta_from_damping, fl_curve, fp_curve, fv_curve, MuscleParams};
use emumuscle::plant::PlantModel;

use crate::build::Resolved;
use crate::config::{ActuatorType, LoadedConfig};
use crate::output::OutDir;
use crate::CliError;

fn out_dir(c: &LoadedConfig) -> Result<OutDir, CliError> {
    OutDir::create(Path::new(&c.config.output.directory))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(CliError::runtime)?;
    Ok(buf)
}

fn policy_file(actuator: ActuatorType, seed: u64) -> String {
    format!("policies/{}_seed{seed}.json", actuator.name())
}

/// Hand-written policy used by `simulate` when no trained policy is given.
fn scripted_policy(
    env: &EnvSetup<f64>,
    kind: ActuatorType,
    c: &LoadedConfig,
) -> Result<Box<dyn Policy<f64>>, CliError> {
    let a = &c.config.actuator;
    let mgd = match env.plant {
        PlantModel::Pendulum(p) => p.mgd,
        PlantModel::Hopper(_) => 0.0,
    };
    match (env.task, kind) {
        (Task::Hold { target, .. }, ActuatorType::Pd) => {
            // offset the setpoint so the spring balances gravity exactly at the target
            let q_des = target + mgd * target.sin() / a.k_stiff;
            Ok(Box::new(FnPolicy(move |_obs: &[f64], act: &mut [f64]| act[0] = q_des)))
        }
        (Task::Hold { target, .. }, ActuatorType::Torque) => {
            let (k, d) = (a.k_stiff, a.k_damp);
            let scale = a.k_scale.unwrap_or(1.0);
            Ok(Box::new(FnPolicy(move |obs: &[f64], act: &mut [f64]| {
                act[0] = (k * (target - obs[0]) - d * obs[1] + mgd * target.sin()) / scale;
            })))
        }
        _ => Ok(Box::new(env.initial_policy(Vec::new()).build::<f64>()?)),
    }
}

pub fn simulate(c: &LoadedConfig, policy_path: Option<&Path>) -> Result<(), CliError> {
    let r = c.resolve()?;
    let kind = c.config.actuator.kind;
    let env = c.env(&r, kind)?;
    let seed = c.config.train.seeds[0];
    let mut policy: Box<dyn Policy<f64>> = match policy_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: cannot read policy: {e}", p.display())))?;
            let spec: PolicySpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", p.display(), e.line())))?;
            if spec.obs_dim != env.observation_dim() || spec.action_dim != env.controller.action_dim() {
                return Err(CliError::Config(format!(
                    "{}: policy dimensions ({} -> {}) do not match the configured setup ({} -> {})",
                    p.display(),
                    spec.obs_dim,
                    spec.action_dim,
                    env.observation_dim(),
                    env.controller.action_dim()
                )));
            }
            Box::new(spec.build::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => scripted_policy(&env, kind, c)?,
    };
    let trace = env.rollout(policy.as_mut(), seed, true)?;
    let mut out = out_dir(c)?;
    out.write("trace.csv", &csv_bytes(|b| trace.write_csv(b))?)?;
    let summary = serde_json::json!({
        "seed": seed,
        "actuator": kind.name(),
        "task": env.task.name(),
        "plant": env.plant.name(),
        "termination": trace.termination.name(),
        "policy_ticks": trace.policy_ticks,
        "controller_ticks": trace.controller_ticks,
        "physics_steps": trace.physics_steps,
        "clamped_ticks": trace.clamped_ticks,
        "return": fmt_sig9(trace.ret.total()),
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(CliError::runtime)?;
    text.push('\n');
    out.write("summary.json", text.as_bytes())?;
    println!(
        "simulated {} s: {} policy / {} controller ticks, termination {}, return {}",
        fmt_sig9(trace.end_time),
        trace.policy_ticks,
        trace.controller_ticks,
        trace.termination.name(),
        fmt_sig9(trace.ret.total())
    );
    out.finish("simulate", &[seed], &c.config)?;
    Ok(())
}

pub struct TrainRun {
    pub actuator: ActuatorType,
    pub seed: u64,
    pub outcome: TrainOutcome,
}

fn train_all(c: &LoadedConfig, r: &Resolved) -> Result<Vec<TrainRun>, CliError> {
    let jobs: Vec<(ActuatorType, u64)> =
        r.actuators.iter().flat_map(|&a| c.config.train.seeds.iter().map(move |&s| (a, s))).collect();
    jobs.into_par_iter()
        .map(|(actuator, seed)| {
            let env = c.env(r, actuator)?;
            let init = env.initial_policy(c.config.train.hidden.clone());
            let outcome = cem_train(&env, &init, &r.cem, seed)?;
            Ok(TrainRun { actuator, seed, outcome })
        })
        .collect()
}

fn aggregate(curves: &[&[GenerationStats]]) -> Vec<GenerationStats> {
    let n_gen = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    let n = curves.len() as f64;
    (0..n_gen)
        .map(|g| GenerationStats {
            generation: g,
            mean_return: curves.iter().map(|c| c[g].mean_return).sum::<f64>() / n,
            max_return: curves.iter().map(|c| c[g].max_return).sum::<f64>() / n,
            mean_episode_len: curves.iter().map(|c| c[g].mean_episode_len).sum::<f64>() / n,
        })
        .collect()
}

fn write_training(out: &mut OutDir, runs: &[TrainRun]) -> Result<(), CliError> {
    let mut summary = String::from("seed,actuator,initial_return,final_return\n");
    let mut by_actuator: BTreeMap<ActuatorType, Vec<&[GenerationStats]>> = BTreeMap::new();
    for run in runs {
        let name = run.actuator.name();
        out.write(
            &format!("curves/{name}_seed{}.csv", run.seed),
            &csv_bytes(|b| write_curve_csv(&run.outcome.curve, b))?,
        )?;
        let mut json = serde_json::to_string_pretty(&run.outcome.policy).map_err(CliError::runtime)?;
        json.push('\n');
        out.write(&policy_file(run.actuator, run.seed), json.as_bytes())?;
        summary.push_str(&format!(
            "{},{name},{},{}\n",
            run.seed,
            fmt_sig9(run.outcome.initial_return),
            fmt_sig9(run.outcome.final_return)
        ));
        by_actuator.entry(run.actuator).or_default().push(&run.outcome.curve);
    }
    for (a, curves) in by_actuator {
        let agg = aggregate(&curves);
        out.write(&format!("curves/{}_aggregate.csv", a.name()), &csv_bytes(|b| write_curve_csv(&agg, b))?)?;
    }
    out.write("train_summary.csv", summary.as_bytes())
}

pub fn train(c: &LoadedConfig) -> Result<Vec<TrainRun>, CliError> {
    let r = c.resolve()?;
    let runs = train_all(c, &r)?;
    let mut out = out_dir(c)?;
    write_training(&mut out, &runs)?;
    for run in &runs {
        println!(
            "{} seed {}: return {} -> {}",
            run.actuator.name(),
            run.seed,
            fmt_sig9(run.outcome.initial_return),
            fmt_sig9(run.outcome.final_return)
        );
    }
    out.finish("train", &c.config.train.seeds, &c.config)?;
    Ok(runs)
}

pub fn sweep_beta(c: &LoadedConfig, betas: Option<&[f64]>, freqs: Option<&[f64]>) -> Result<(), CliError> {
    let r = c.resolve()?;
    let betas = betas.unwrap_or(&c.config.sweep.betas);
    let freqs = freqs.unwrap_or(&c.config.sweep.freqs);
    if betas.is_empty() || freqs.is_empty() {
        return Err(c.error(Some("sweep"), None, "beta and frequency grids must be non-empty"));
    }
    let bench = c.hold_benchmark(&r)?;
    let k_damp = c.target_damping();
    let g = emumuscle::muscle::derive_geometry(&bench.params)?;
    let recommended = beta_from_damping(k_damp, g.a1, bench.params.f_max)?;
    println!("recommended beta for k_damp = {}: {}", fmt_sig9(k_damp), fmt_sig9(recommended));
    let cells = run_sweep(&bench, betas, freqs).map_err(|e| match e {
        emumuscle::Error::InvalidParameter(m) => c.error(Some("sweep"), None, m),
        other => CliError::runtime(other),
    })?;
    let mut out = out_dir(c)?;
    out.write("sweep.csv", &csv_bytes(|b| write_sweep_csv(&cells, b))?)?;
    for cell in &cells {
        if !cell.stable {
            println!(
                "unstable: beta {} at {} Hz, amplitude {} rad",
                fmt_sig9(cell.beta),
                fmt_sig9(cell.controller_hz),
                fmt_sig9(cell.amplitude)
            );
        }
    }
    out.finish("sweep-beta", &[], &c.config)?;
    Ok(())
}

/// Training randomization with pushes and mass shifts widened beyond what was seen.
fn perturbation_suite(c: &LoadedConfig, r: &Resolved) -> NoiseAndDR<f64> {
    let mut s = r.noise_dr;
    s.dr.push = s.dr.push.scaled(c.config.robustness.push_scale);
    s.dr.mass_shift = s.dr.mass_shift.scaled(c.config.robustness.mass_shift_scale);
    s
}

fn load_policy(path: &Path) -> Result<PolicySpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), e.line())))
}

pub fn eval_robustness(c: &LoadedConfig, policies: Option<&Path>) -> Result<(), CliError> {
    let r = c.resolve()?;
    let rb = &c.config.robustness;
    if rb.episodes == 0 || rb.resamples == 0 || !(rb.confidence > 0.0 && rb.confidence < 1.0) {
        return Err(c.error(Some("robustness"), None, "episodes and resamples must be positive, confidence in (0, 1)"));
    }
    let mut out = out_dir(c)?;
    let mut specs: BTreeMap<(ActuatorType, u64), PolicySpec> = BTreeMap::new();
    match policies {
        Some(dir) => {
            for &a in &r.actuators {
                for &s in &c.config.train.seeds {
                    let path: PathBuf = dir.join(policy_file(a, s));
                    specs.insert((a, s), load_policy(&path)?);
                }
            }
        }
        None => {
            let runs = train_all(c, &r)?;
            write_training(&mut out, &runs)?;
            for run in runs {
                specs.insert((run.actuator, run.seed), run.outcome.policy);
            }
        }
    }
    let suite = perturbation_suite(c, &r);
    let mut table = String::from("seed,actuator,success_rate,mean_return\n");
    let mut per_actuator: BTreeMap<ActuatorType, Vec<(f64, f64)>> = BTreeMap::new();
    for &a in &r.actuators {
        let env = c.env(&r, a)?;
        for &s in &c.config.train.seeds {
            let spec = &specs[&(a, s)];
            if spec.obs_dim != env.observation_dim() || spec.action_dim != env.controller.action_dim() {
                return Err(CliError::Config(format!(
                    "policy for {} seed {s} does not match the configured setup",
                    a.name()
                )));
            }
            let rep = success_rate(&env, spec, &suite, rb.episodes, s)?;
            table.push_str(&format!("{s},{},{},{}\n", a.name(), fmt_sig9(rep.success_rate), fmt_sig9(rep.mean_return)));
            per_actuator.entry(a).or_default().push((rep.success_rate, rep.mean_return));
        }
    }
    out.write("robustness.csv", table.as_bytes())?;
    let mut summary = String::from("actuator,n_seeds,mean_success_rate,ci_lo,ci_hi,mean_return\n");
    for (a, rows) in &per_actuator {
        let rates: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let n = rows.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let (lo, hi) = bootstrap_ci(&rates, rb.resamples, rb.confidence, 0)?;
        let ret = rows.iter().map(|r| r.1).sum::<f64>() / n;
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.name(),
            rows.len(),
            fmt_sig9(mean),
            fmt_sig9(lo),
            fmt_sig9(hi),
            fmt_sig9(ret)
        ));
        println!(
            "{}: success rate {} [{}, {}] over {} seeds",
            a.name(),
            fmt_sig9(mean),
            fmt_sig9(lo),
            fmt_sig9(hi),
            rows.len()
        );
    }
    out.write("robustness_summary.csv", summary.as_bytes())?;
    out.finish("eval-robustness", &c.config.train.seeds, &c.config)?;
    Ok(())
}

pub fn export_curves(c: &LoadedConfig) -> Result<(), CliError> {
    let p: MuscleParams<f64> = match &c.config.muscle {
        Some(_) => c.muscle_params()?.0,
        None => MuscleParams::reference(),
    };
    let mut text = String::from("curve,x,y\n");
    let mut push = |name: &str, x: f64, y: f64| text.push_str(&format!("{name},{},{}\n", fmt_sig9(x), fmt_sig9(y)));
    for k in 0..=400 {
        let l = 2.0 * k as f64 / 400.0;
        push("fl", l, fl_curve(l, &p)?);
    }
    for k in 0..=300 {
        let v = -1.5 + 3.0 * k as f64 / 300.0;
        push("fv", v, fv_curve(v, &p)?);
    }
    for k in 0..=400 {
        let l = 2.0 * k as f64 / 400.0;
        push("fp", l, fp_curve(l, &p)?);
    }
    let mut out = out_dir(c)?;
    out.write("curves.csv", text.as_bytes())?;
    out.finish("export-curves", &[], &c.config)?;
    Ok(())
}
