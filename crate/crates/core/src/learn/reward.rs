//! Task rewards and action-rate regularization.

use crate::scalar::Real;
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig<T> {
    pub v_target: T,
    /// Sensitivity of the Gaussian tracking kernel.
    pub sigma: T,
    pub hop_gain: T,
    pub hop_clip: (T, T),
    /// Action-rate weight.
    pub w_act: T,
}

impl<T: Real> Default for RewardConfig<T> {
    fn default() -> Self {
        Self {
            v_target: T::lit(0.5),
            sigma: T::lit(0.25),
            hop_gain: T::lit(10.0),
            hop_clip: (T::zero(), T::lit(10.0)),
            w_act: T::lit(0.004),
        }
    }
}

impl<T: Real> RewardConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) {
            return Err(invalid("reward sigma must be positive"));
        }
        if !(self.w_act >= T::zero()) {
            return Err(invalid("action-rate weight must be non-negative"));
        }
        if !(self.hop_clip.0 <= self.hop_clip.1) {
            return Err(invalid("hop clip bounds must be ordered"));
        }
        Ok(())
    }
}

/// Gaussian tracking kernel `exp(-(target - value)^2 / sigma)`.
#[inline]
pub fn tracking_kernel<T: Real>(target: T, value: T, sigma: T) -> T {
    let e = target - value;
    (-(e * e) / sigma).exp()
}

/// Velocity tracking reward in `(0, 1]`.
pub fn reward_walk<T: Real>(v_x: T, cfg: &RewardConfig<T>) -> T {
    tracking_kernel(cfg.v_target, v_x, cfg.sigma)
}

/// Natural log of the hopping reward: `hop_gain * clip(v_z, lo, hi)`.
pub fn reward_hop_ln<T: Real>(v_z: T, cfg: &RewardConfig<T>) -> T {
    let (lo, hi) = cfg.hop_clip;
    cfg.hop_gain * v_z.max(lo).min(hi)
}

/// Hopping reward `exp(hop_gain * clip(v_z))`; may overflow narrow scalar types,
/// accumulate via [`reward_hop_ln`] instead.
pub fn reward_hop<T: Real>(v_z: T, cfg: &RewardConfig<T>) -> T {
    reward_hop_ln(v_z, cfg).exp()
}

/// `-w_act * sum((a_next - a_prev)^2)`.
pub fn reward_action_rate<T: Real>(a_prev: &[T], a_next: &[T], w_act: T) -> Result<T> {
    if a_prev.len() != a_next.len() {
        return Err(Error::DimensionMismatch { expected: a_prev.len(), got: a_next.len() });
    }
    let sq = a_prev.iter().zip(a_next).fold(T::zero(), |acc, (&a, &b)| acc + (b - a) * (b - a));
    Ok(-w_act * sq)
}

/// Per-step task reward, kept in log form so huge hop rewards stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskReward {
    pub ln: f64,
}

impl TaskReward {
    pub fn from_value(v: f64) -> Self {
        Self { ln: v.ln() }
    }

    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

/// Episode return: log-sum-exp of task rewards plus a plain sum of action-rate terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeReturn {
    pub ln_task: f64,
    pub action_rate: f64,
    pub steps: usize,
}

impl Default for EpisodeReturn {
    fn default() -> Self {
        Self { ln_task: f64::NEG_INFINITY, action_rate: 0.0, steps: 0 }
    }
}

impl EpisodeReturn {
    pub fn push(&mut self, task: TaskReward, r_act: f64) {
        self.ln_task = log_add_exp(self.ln_task, task.ln);
        self.action_rate += r_act;
        self.steps += 1;
    }

    pub fn task_sum(&self) -> f64 {
        self.ln_task.exp()
    }

    /// Total return `sum(r_task) + sum(r_act)`.
    pub fn total(&self) -> f64 {
        self.task_sum() + self.action_rate
    }
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn walk_examples() {
        let cfg = RewardConfig::<f64>::default();
        assert_eq!(reward_walk(cfg.v_target, &cfg), 1.0);
        let r = reward_walk(cfg.v_target - 0.5, &cfg);
        assert_abs_diff_eq!(r, (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.3679, epsilon = 1e-4);
        assert_eq!(cfg.sigma, 0.25);
    }

    #[test]
    fn hop_examples() {
        let cfg = RewardConfig::<f64>::default();
        assert_eq!(reward_hop(-1.0, &cfg), 1.0);
        assert_eq!(reward_hop(0.0, &cfg), 1.0);
        assert_abs_diff_eq!(reward_hop(0.1, &cfg), std::f64::consts::E, epsilon = 1e-12);
        assert_eq!(reward_hop_ln(12.0, &cfg), 100.0);
        // f32 overflows at exp(100); the log form does not
        let cfg32 = RewardConfig::<f32>::default();
        assert_eq!(reward_hop_ln(12.0f32, &cfg32), 100.0);
        assert!(reward_hop(12.0f32, &cfg32).is_infinite());
    }

    #[test]
    fn action_rate_examples() {
        assert_eq!(reward_action_rate(&[0.3, 0.1], &[0.3, 0.1], 0.004).unwrap(), 0.0);
        assert_abs_diff_eq!(reward_action_rate(&[0.0, 0.0], &[1.0, 0.0], 0.004).unwrap(), -0.004, epsilon = 1e-15);
        let a = reward_action_rate(&[0.0, 0.0], &[0.2, -0.1], 0.004).unwrap();
        let b = reward_action_rate(&[0.0, 0.0], &[0.4, -0.2], 0.004).unwrap();
        assert_abs_diff_eq!(b, 4.0 * a, epsilon = 1e-15);
        assert!(reward_action_rate(&[0.0], &[0.0, 1.0], 0.004).is_err());
    }

    #[test]
    fn episode_return_composition() {
        let mut ret = EpisodeReturn::default();
        ret.push(TaskReward::from_value(0.5), -0.01);
        ret.push(TaskReward::from_value(0.25), -0.02);
        assert_abs_diff_eq!(ret.total(), 0.75 - 0.03, epsilon = 1e-12);
        let mut big = EpisodeReturn::default();
        for _ in 0..1000 {
            big.push(TaskReward { ln: 100.0 }, 0.0);
        }
        assert!(big.ln_task.is_finite());
        assert_abs_diff_eq!(big.ln_task, 100.0 + 1000f64.ln(), epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn reward_bounds(v in -100.0f64..100.0, a in proptest::collection::vec(-5.0f64..5.0, 3), b in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let cfg = RewardConfig::default();
            let r = reward_walk(v, &cfg);
            prop_assert!(r > 0.0 || v.abs() > 10.0);
            prop_assert!(r <= 1.0);
            prop_assert!(reward_hop_ln(v, &cfg) <= 100.0);
            prop_assert!(reward_hop(v, &cfg) >= 1.0);
            prop_assert!(reward_action_rate(&a, &b, cfg.w_act).unwrap() <= 0.0);
        }
    }
}
