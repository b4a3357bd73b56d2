//! Success rate under perturbations and bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::learn::env::{derive_seed, EnvSetup};
use crate::learn::noise::NoiseAndDR;
use crate::learn::policy::PolicySpec;
use crate::scalar::Real;
use crate::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    /// Fraction of policy steps, over all episodes, before a failure.
    pub success_rate: f64,
    pub mean_return: f64,
    pub episode_success: Vec<f64>,
}

/// Runs `n_episodes` with `suite` replacing the environment's randomization.
/// Episode seeds are disjoint from the training streams.
pub fn success_rate<T: Real>(
    env: &EnvSetup<T>,
    policy: &PolicySpec,
    suite: &NoiseAndDR<T>,
    n_episodes: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    if n_episodes == 0 {
        return Err(invalid("n_episodes must be positive"));
    }
    let env = EnvSetup { noise_dr: *suite, ..env.clone() };
    env.validate()?;
    policy.validate()?;
    let runs: Vec<(usize, usize, f64)> = (0..n_episodes as u64)
        .into_par_iter()
        .map(|k| {
            let mut net = policy.build::<T>()?;
            let tr = env.rollout(&mut net, derive_seed(derive_seed(seed, 0x0B05), k), false)?;
            Ok((tr.success_steps(env.rates.policy_hz), tr.planned_policy_ticks, tr.ret.total()))
        })
        .collect::<Result<_>>()?;
    let ok: usize = runs.iter().map(|r| r.0).sum();
    let planned: usize = runs.iter().map(|r| r.1).sum();
    Ok(RobustnessReport {
        success_rate: ok as f64 / planned.max(1) as f64,
        mean_return: runs.iter().map(|r| r.2).sum::<f64>() / n_episodes as f64,
        episode_success: runs.iter().map(|r| r.0 as f64 / r.1.max(1) as f64).collect(),
    })
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() || resamples == 0 {
        return Err(invalid("bootstrap needs values and resamples"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - confidence) / 2.0;
    let idx = |p: f64| ((p * (resamples - 1) as f64).round() as usize).min(resamples - 1);
    Ok((means[idx(alpha)], means[idx(1.0 - alpha)]))
}
