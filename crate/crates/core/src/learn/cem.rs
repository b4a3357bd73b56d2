//! Cross-entropy method over policy parameters.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::format::fmt_sig9;
use crate::learn::env::{derive_seed, EnvSetup};
use crate::learn::policy::PolicySpec;
use crate::scalar::Real;
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CemConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub generations: usize,
    /// Initial per-parameter standard deviation.
    pub init_std: f64,
    /// Exploration noise added to the elite spread, scaled by `noise_decay^generation`.
    pub extra_std: f64,
    pub noise_decay: f64,
    pub episodes_per_candidate: usize,
    /// Episodes used to score the initial and final mean policy.
    pub eval_episodes: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            generations: 30,
            init_std: 0.5,
            extra_std: 0.1,
            noise_decay: 0.9,
            episodes_per_candidate: 1,
            eval_episodes: 4,
        }
    }
}

impl CemConfig {
    pub fn n_elite(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 8 {
            return Err(invalid("population must be at least 8"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(invalid("elite_fraction must lie in (0, 1]"));
        }
        if !(self.init_std >= 0.0 && self.extra_std >= 0.0) {
            return Err(invalid("noise scales must be non-negative"));
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(invalid("noise_decay must lie in (0, 1]"));
        }
        if self.episodes_per_candidate == 0 || self.eval_episodes == 0 {
            return Err(invalid("episode counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_return: f64,
    pub max_return: f64,
    /// Mean policy steps per episode.
    pub mean_episode_len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: PolicySpec,
    pub curve: Vec<GenerationStats>,
    pub initial_return: f64,
    pub final_return: f64,
}

pub fn write_curve_csv<W: Write>(curve: &[GenerationStats], mut w: W) -> io::Result<()> {
    writeln!(w, "generation,mean_return,max_return,mean_episode_len")?;
    for g in curve {
        writeln!(
            w,
            "{},{},{},{}",
            g.generation,
            fmt_sig9(g.mean_return),
            fmt_sig9(g.max_return),
            fmt_sig9(g.mean_episode_len)
        )?;
    }
    Ok(())
}

/// Mean return and mean episode length of `policy` over `seeds`.
pub fn evaluate<T: Real>(env: &EnvSetup<T>, policy: &PolicySpec, seeds: &[u64]) -> Result<(f64, f64)> {
    let mut net = policy.build::<T>()?;
    let (mut ret, mut len) = (0.0, 0.0);
    for &s in seeds {
        let tr = env.rollout(&mut net, s, false)?;
        ret += tr.ret.total();
        len += tr.policy_ticks as f64;
    }
    let n = seeds.len() as f64;
    Ok((ret / n, len / n))
}

/// Trains from `init`. Results depend only on the inputs, not on thread count.
pub fn train<T: Real>(env: &EnvSetup<T>, init: &PolicySpec, cfg: &CemConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    env.validate()?;
    init.validate()?;
    if init.obs_dim != env.observation_dim() || init.action_dim != env.controller.action_dim() {
        return Err(invalid("initial policy does not match the environment dimensions"));
    }
    let eval_seeds: Vec<u64> =
        (0..cfg.eval_episodes as u64).map(|k| derive_seed(derive_seed(seed, 0xE7A1), k)).collect();
    let (initial_return, _) = evaluate(env, init, &eval_seeds)?;
    if !initial_return.is_finite() {
        return Err(Error::NonFiniteReturn { generation: 0, candidate: 0 });
    }
    if cfg.generations == 0 {
        return Ok(TrainOutcome {
            policy: init.clone(),
            curve: Vec::new(),
            initial_return,
            final_return: initial_return,
        });
    }

    let n = init.param_count();
    let mut mean = init.params.clone();
    let mut std = vec![cfg.init_std; n];
    let n_elite = cfg.n_elite();
    let mut curve = Vec::with_capacity(cfg.generations);

    for g in 0..cfg.generations {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + g as u64));
        let candidates: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                (0..n)
                    .map(|i| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        mean[i] + std[i] * e
                    })
                    .collect()
            })
            .collect();
        // common random numbers: every candidate sees the same episodes
        let episode_seeds: Vec<u64> = (0..cfg.episodes_per_candidate as u64)
            .map(|k| derive_seed(derive_seed(seed, 2000 + g as u64), k))
            .collect();
        let scores: Vec<(f64, f64)> = candidates
            .par_iter()
            .map(|params| evaluate(env, &init.with_params(params.clone())?, &episode_seeds))
            .collect::<Result<_>>()?;
        if let Some(c) = scores.iter().position(|s| !s.0.is_finite()) {
            return Err(Error::NonFiniteReturn { generation: g, candidate: c });
        }

        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0).then(a.cmp(&b)));
        let elites = &order[..n_elite];
        let extra = cfg.extra_std * cfg.noise_decay.powi(g as i32);
        for i in 0..n {
            let m = elites.iter().map(|&e| candidates[e][i]).sum::<f64>() / n_elite as f64;
            let v = elites.iter().map(|&e| (candidates[e][i] - m).powi(2)).sum::<f64>() / n_elite as f64;
            mean[i] = m;
            std[i] = (v + extra * extra).sqrt();
        }

        let pop = cfg.population as f64;
        curve.push(GenerationStats {
            generation: g,
            mean_return: scores.iter().map(|s| s.0).sum::<f64>() / pop,
            max_return: scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max),
            mean_episode_len: scores.iter().map(|s| s.1).sum::<f64>() / pop,
        });
    }

    let policy = init.with_params(mean)?;
    let (final_return, _) = evaluate(env, &policy, &eval_seeds)?;
    Ok(TrainOutcome { policy, curve, initial_return, final_return })
}
