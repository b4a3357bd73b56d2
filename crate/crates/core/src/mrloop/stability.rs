//! Co-contraction hold benchmark and the beta / controller-rate sweep.

use std::io::{self, Write};

use rayon::prelude::*;

use super::{run_episode, EpisodeSpec, EpisodeTrace, RateConfig};
use crate::actuators::{JointController, TorqueLimits};
use crate::format::fmt_sig9;
use crate::learn::policy::ConstantPolicy;
use crate::learn::task::Task;
use crate::muscle::{derive_geometry, MuscleParams};
use crate::plant::{PendulumPlant, PlantModel, PlantState};
use crate::scalar::Real;
use crate::{invalid, Error, Result};

/// Peak-to-peak joint angle over records with `t >= settle_time`.
pub fn stability_metric<T: Real>(trace: &EpisodeTrace<T>, settle_time: f64) -> Result<T> {
    let mut it = trace.records.iter().filter(|r| r.state.t.to_f64_lossy() >= settle_time).map(|r| r.state.q);
    let first = it.next().ok_or_else(|| Error::EmptyWindow(format!("no samples after t = {settle_time}")))?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), q| (lo.min(q), hi.max(q)));
    Ok(hi - lo)
}

/// Fully co-contracted muscle pair holding a light segment against a velocity kick.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldBenchmark<T> {
    pub plant: PendulumPlant<T>,
    pub params: MuscleParams<T>,
    pub limits: TorqueLimits<T>,
    /// Physics step and loop mode; the controller rate is swept.
    pub rates: RateConfig,
    pub kick: T,
    pub horizon: f64,
    pub settle_time: f64,
    /// Peak-to-peak amplitude below which a cell counts as stable.
    pub threshold: T,
}

impl<T: Real> HoldBenchmark<T> {
    pub fn reference() -> Self {
        Self {
            plant: PendulumPlant { mgd: T::zero(), ..PendulumPlant::desk() },
            params: MuscleParams::reference(),
            limits: TorqueLimits {
                tau_abs_max: T::lit(50.0),
                k_scale: T::lit(50.0),
                k_damp_floor: TorqueLimits::hardware_floor_damping(),
            },
            rates: RateConfig::hardware_faithful(),
            kick: T::lit(1.0),
            horizon: 4.0,
            settle_time: 3.0,
            // sampled-data limit cycles near the stability boundary are a few
            // hundredths of a radian; decaying transients stay below 1e-3
            threshold: T::lit(0.02),
        }
    }

    pub fn run(&self, beta: T, controller_hz: f64) -> Result<EpisodeTrace<T>> {
        if !(beta >= T::zero()) {
            return Err(invalid("beta must be non-negative"));
        }
        let params = self.params.with_beta(beta);
        let geometry = derive_geometry(&params)?;
        let mut plant = self.plant;
        plant.tau_abs_max = self.limits.tau_abs_max;
        let mut controller = JointController::muscle(params, geometry, self.limits)?;
        controller.reset([T::one(); 2], T::zero(), self.kick);
        let rates = RateConfig { policy_hz: self.rates.policy_hz.min(controller_hz), ..self.rates }
            .with_controller_hz(controller_hz);
        let spec = EpisodeSpec::new(rates, self.horizon, Task::Free);
        run_episode(
            &PlantModel::Pendulum(plant),
            PlantState::joint(T::zero(), self.kick),
            &mut controller,
            &mut ConstantPolicy(vec![T::one(); 2]),
            &spec,
        )
    }

    pub fn amplitude(&self, beta: T, controller_hz: f64) -> Result<T> {
        stability_metric(&self.run(beta, controller_hz)?, self.settle_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCell<T> {
    pub beta: T,
    pub controller_hz: f64,
    pub amplitude: T,
    pub stable: bool,
}

/// Runs every `(beta, controller_hz)` pair; output is ordered beta-major.
pub fn sweep_beta<T: Real>(bench: &HoldBenchmark<T>, betas: &[T], freqs: &[f64]) -> Result<Vec<StabilityCell<T>>> {
    let pairs: Vec<(T, f64)> = betas.iter().flat_map(|&b| freqs.iter().map(move |&f| (b, f))).collect();
    pairs
        .into_par_iter()
        .map(|(beta, controller_hz)| {
            let amplitude = bench.amplitude(beta, controller_hz)?;
            Ok(StabilityCell { beta, controller_hz, amplitude, stable: amplitude < bench.threshold })
        })
        .collect()
}

pub fn write_sweep_csv<T: Real, W: Write>(cells: &[StabilityCell<T>], mut w: W) -> io::Result<()> {
    writeln!(w, "beta,controller_hz,amplitude,stable")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_sig9(c.beta.to_f64_lossy()),
            fmt_sig9(c.controller_hz),
            fmt_sig9(c.amplitude.to_f64_lossy()),
            u8::from(c.stable)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREQS: [f64; 5] = [50.0, 100.0, 250.0, 500.0, 5000.0];
    /// Slack for slowly decaying overdamped transients in the window.
    const FLOOR: f64 = 1e-3;

    fn grid() -> Vec<StabilityCell<f64>> {
        let betas = [0.0, 0.1, 0.36, 0.66, 1.0];
        sweep_beta(&HoldBenchmark::reference(), &betas, &FREQS).unwrap()
    }

    #[test]
    fn sweep_shape_and_invariants() {
        let cells = grid();
        assert_eq!(cells.len(), 25);
        let at = |b: f64, f: f64| cells.iter().find(|c| c.beta == b && c.controller_hz == f).unwrap();
        for f in FREQS {
            assert!(at(0.0, f).stable, "beta 0 at {f} Hz");
        }
        for b in [0.0, 0.1, 0.36, 0.66, 1.0] {
            // controller at the physics rate stands in for continuous time
            assert!(at(b, 5000.0).stable);
            for w in FREQS.windows(2) {
                assert!(at(b, w[1]).amplitude <= at(b, w[0]).amplitude + FLOOR, "beta {b}: {} -> {} Hz", w[0], w[1]);
            }
        }
        let low: Vec<f64> = cells.iter().filter(|c| c.controller_hz == FREQS[0]).map(|c| c.amplitude).collect();
        assert!(low.windows(2).all(|w| w[1] >= w[0] - FLOOR), "{low:?}");
        assert!(at(0.66, 100.0).amplitude > 5.0 * at(0.36, 100.0).amplitude);
        assert!(!at(0.66, 100.0).stable && at(0.36, 100.0).stable);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn amplitude_monotone(b1 in 0.0..1.0f64, db in 0.0..0.5f64, i in 0usize..4) {
            let b = HoldBenchmark::reference();
            let (f_lo, f_hi) = (FREQS[i], FREQS[i + 1]);
            let b2 = (b1 + db).min(1.0);
            let lo = b.amplitude(b1, f_lo).unwrap();
            proptest::prop_assert!(b.amplitude(b2, f_lo).unwrap() >= lo - FLOOR);
            proptest::prop_assert!(b.amplitude(b1, f_hi).unwrap() <= lo + FLOOR);
        }
    }

    #[test]
    fn damping_rule_beta_holds() {
        let b = HoldBenchmark::<f64>::reference();
        let g = derive_geometry(&b.params).unwrap();
        let beta = crate::muscle::beta_from_damping(0.1, g.a1, b.params.f_max).unwrap();
        assert!(b.amplitude(beta, 500.0).unwrap() < 0.05);
    }

    #[test]
    fn sweep_csv_format() {
        let cells = [StabilityCell { beta: 0.36, controller_hz: 500.0, amplitude: 0.25, stable: false }];
        let mut buf = Vec::new();
        write_sweep_csv(&cells, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "beta,controller_hz,amplitude,stable\n0.36,500,0.25,0\n");
    }

    #[test]
    fn metric_needs_samples() {
        let b = HoldBenchmark::<f64> { horizon: 0.5, ..HoldBenchmark::reference() };
        assert!(matches!(b.amplitude(0.36, 500.0), Err(Error::EmptyWindow(_))));
    }
}
