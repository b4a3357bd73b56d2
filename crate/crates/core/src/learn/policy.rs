//! Policies mapping observations to actions.

use serde::{Deserialize, Serialize};

use crate::actuators::ActuatorKind;
use crate::scalar::Real;
use crate::{invalid, Error, Result};

pub trait Policy<T> {
    fn act(&mut self, obs: &[T], action: &mut [T]);
    fn reset(&mut self) {}
}

/// Emits the same action every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPolicy<T>(pub Vec<T>);

impl<T: Copy> Policy<T> for ConstantPolicy<T> {
    fn act(&mut self, _obs: &[T], action: &mut [T]) {
        action.copy_from_slice(&self.0);
    }
}

/// Wraps a closure `(obs, action)`.
pub struct FnPolicy<F>(pub F);

impl<T, F: FnMut(&[T], &mut [T])> Policy<T> for FnPolicy<F> {
    fn act(&mut self, obs: &[T], action: &mut [T]) {
        (self.0)(obs, action)
    }
}

/// Affine map from the network's `tanh` output in `[-1, 1]` to the actuator's action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMap {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ActionMap {
    /// PD targets span the joint range, torques stay normalized, excitations land in `[0, 1]`.
    pub fn for_actuator(kind: ActuatorKind, joint_limits: (f64, f64)) -> Self {
        match kind {
            ActuatorKind::Pd => {
                let (lo, hi) = joint_limits;
                Self { offset: vec![0.5 * (lo + hi)], scale: vec![0.5 * (hi - lo)] }
            }
            ActuatorKind::Torque => Self { offset: vec![0.0], scale: vec![1.0] },
            ActuatorKind::Muscle => Self { offset: vec![0.5; 2], scale: vec![0.5; 2] },
        }
    }
}

/// Serializable MLP description; `hidden` empty gives a linear policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub action_map: ActionMap,
    /// Row-major weights then bias, layer by layer.
    pub params: Vec<f64>,
}

impl PolicySpec {
    pub fn default_hidden() -> Vec<usize> {
        vec![32]
    }

    pub fn large_hidden() -> Vec<usize> {
        vec![128; 3]
    }

    /// All-zero parameters.
    pub fn zeros(obs_dim: usize, hidden: Vec<usize>, action_map: ActionMap) -> Self {
        let action_dim = action_map.offset.len();
        let n = param_count(obs_dim, &hidden, action_dim);
        Self { obs_dim, action_dim, hidden, action_map, params: vec![0.0; n] }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.obs_dim);
        d.extend(&self.hidden);
        d.push(self.action_dim);
        d
    }

    pub fn param_count(&self) -> usize {
        param_count(self.obs_dim, &self.hidden, self.action_dim)
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: params.len() });
        }
        Ok(Self { params, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 || self.hidden.contains(&0) {
            return Err(invalid("policy layer sizes must be positive"));
        }
        if self.action_map.offset.len() != self.action_dim || self.action_map.scale.len() != self.action_dim {
            return Err(invalid("action map length must equal action_dim"));
        }
        if self.params.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: self.params.len() });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("policy parameter"));
        }
        Ok(())
    }

    pub fn build<T: Real>(&self) -> Result<MlpPolicy<T>> {
        self.validate()?;
        let width = self.layer_dims().into_iter().max().unwrap_or(0);
        Ok(MlpPolicy {
            dims: self.layer_dims(),
            params: self.params.iter().map(|&p| T::lit(p)).collect(),
            offset: self.action_map.offset.iter().map(|&p| T::lit(p)).collect(),
            scale: self.action_map.scale.iter().map(|&p| T::lit(p)).collect(),
            buf: [vec![T::zero(); width], vec![T::zero(); width]],
        })
    }
}

fn param_count(obs_dim: usize, hidden: &[usize], action_dim: usize) -> usize {
    let mut n = 0;
    let mut fan_in = obs_dim;
    for &h in hidden.iter().chain(std::iter::once(&action_dim)) {
        n += (fan_in + 1) * h;
        fan_in = h;
    }
    n
}

/// Runtime form of a [`PolicySpec`]; every layer uses `tanh`.
#[derive(Debug, Clone)]
pub struct MlpPolicy<T> {
    dims: Vec<usize>,
    params: Vec<T>,
    offset: Vec<T>,
    scale: Vec<T>,
    buf: [Vec<T>; 2],
}

impl<T: Real> Policy<T> for MlpPolicy<T> {
    fn act(&mut self, obs: &[T], action: &mut [T]) {
        assert_eq!(obs.len(), self.dims[0], "observation length");
        assert_eq!(action.len(), *self.dims.last().unwrap(), "action length");
        let [a, b] = &mut self.buf;
        a[..obs.len()].copy_from_slice(obs);
        let mut off = 0;
        for w in self.dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + (n_in + 1) * n_out];
            for (j, out) in b[..n_out].iter_mut().enumerate() {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = row.iter().zip(&a[..n_in]).fold(bias[j], |acc, (&wij, &x)| acc + wij * x);
                *out = z.tanh();
            }
            off += (n_in + 1) * n_out;
            std::mem::swap(a, b);
        }
        for (k, act) in action.iter_mut().enumerate() {
            *act = self.offset[k] + self.scale[k] * a[k];
        }
    }
}
