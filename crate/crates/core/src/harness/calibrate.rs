//! Identification of a sensing model from sweeps of the simulated plant:
//! unloaded stiffness sweep, constant-flow damping runs and deadweight
//! transmission steps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DampingChoice, Scenario};
use super::summary::Metric;
use super::HarnessError;
use crate::calib::{
    calibrate_damping, calibrate_stiffness, calibrate_transmission, CalibrationArtifact, DampingTrajectory,
    FlowDirection, Provenance, StiffnessSample, TransmissionSample, SCHEMA_VERSION,
};
use crate::plant::{ContactModel, Plant, MAX_TIMESTEP};
use crate::sensing::SensingModel;
use crate::types::ActuatorVector;

/// RNG stream reserved for calibration sweeps.
pub const CALIBRATION_STREAM: u64 = u64::MAX - 1;

/// Unloaded volume vectors per actuator in the stiffness sweep.
const STIFFNESS_SAMPLES_PER_ACTUATOR: usize = 20;
/// Readings averaged per sweep point.
const READINGS: usize = 50;
/// Lowest swept volume, fraction of `v_max`.
const MIN_FRACTION: f64 = 0.05;
/// Flow magnitudes of the damping runs, ml/s.
const DAMPING_FLOWS: [f64; 9] = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
const DAMPING_THRESHOLD: f64 = 0.1;
/// Longest damping run, s.
const MAX_RUN_S: f64 = 10.0;
/// Deadweight used for the transmission steps, N.
const TRANSMISSION_LOAD: f64 = 4.0;
/// Volume spacing of the transmission steps, ml.
const TRANSMISSION_STEP_ML: f64 = 0.5;

/// A calibration artifact together with figures describing its quality.
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub artifact: CalibrationArtifact,
    pub metrics: Vec<Metric>,
}

impl CalibrationRun {
    pub fn sensing_model(&self, scenario: &Scenario) -> Result<SensingModel, HarnessError> {
        Ok(self.artifact.sensing_model(scenario.sensing.mode)?)
    }
}

fn mean(readings: &[ActuatorVector]) -> ActuatorVector {
    let n = readings[0].len();
    let mut acc = vec![0.0; n];
    for r in readings {
        for (a, v) in acc.iter_mut().zip(r.iter()) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / readings.len() as f64).collect::<Vec<_>>().into()
}

fn averaged_pressure(plant: &mut Plant, count: usize) -> ActuatorVector {
    let readings: Vec<ActuatorVector> = (0..count).map(|_| plant.measure().pressure).collect();
    mean(&readings)
}

/// Latin-hypercube volume vectors over `[lo, hi]^n`.
fn latin_hypercube(rng: &mut ChaCha8Rng, samples: usize, n: usize, lo: f64, hi: f64) -> Vec<ActuatorVector> {
    let mut columns: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut strata: Vec<f64> = (0..samples)
                .map(|k| lo + (hi - lo) * (k as f64 + rng.random::<f64>()) / samples as f64)
                .collect();
            strata.shuffle(rng);
            strata
        })
        .collect();
    (0..samples)
        .map(|k| columns.iter_mut().map(|c| c[k]).collect::<Vec<_>>().into())
        .collect()
}

/// Constant-flow runs of actuator 0, inflating from empty and deflating
/// from full, with the others held at half volume. The recorded pressure
/// has the coupling from the held actuators (row `k_row`) removed.
pub(crate) fn damping_runs(
    plant: &mut Plant,
    k_row: &[f64],
    flows: &[f64],
) -> Result<Vec<DampingTrajectory>, HarnessError> {
    let n = plant.actuator_count();
    let v_max = plant.config().v_max;
    let hold = 0.5 * v_max;
    let mut runs = Vec::new();
    for &q in flows {
        for direction in [FlowDirection::Inflate, FlowDirection::Deflate] {
            let (start, flow) = match direction {
                FlowDirection::Inflate => (0.0, q),
                FlowDirection::Deflate => (v_max, -q),
            };
            let mut volume = vec![hold; n];
            volume[0] = start;
            plant.set_contact(ContactModel::Free)?;
            plant.set_volume(&volume.into())?;
            let steps = ((0.95 * v_max / q).min(MAX_RUN_S) / MAX_TIMESTEP).floor() as usize;
            let mut command = vec![0.0; n];
            command[0] = flow;
            let command: ActuatorVector = command.into();
            let mut run = DampingTrajectory {
                flow,
                direction,
                time: Vec::with_capacity(steps),
                volume: Vec::with_capacity(steps),
                pressure: Vec::with_capacity(steps),
            };
            for _ in 0..steps {
                plant.step(&command, MAX_TIMESTEP)?;
                let p = plant.measure().pressure[0];
                let s = plant.state();
                let v = s.volumes();
                // coupling from the actuators held at rest
                let coupling: f64 = (1..n).map(|j| k_row[j] * v[j]).sum();
                run.time.push(s.time);
                run.volume.push(v[0]);
                run.pressure.push(p - coupling);
            }
            runs.push(run);
        }
    }
    Ok(runs)
}

fn transmission_steps(plant: &mut Plant, actuator: usize, v_lin: f64) -> Result<Vec<TransmissionSample>, HarnessError> {
    let n = plant.actuator_count();
    let v_max = plant.config().v_max;
    let mut volumes: Vec<f64> = Vec::new();
    let mut v = TRANSMISSION_STEP_ML;
    while v <= v_max + 1e-9 {
        volumes.push(v.min(v_max));
        v += TRANSMISSION_STEP_ML;
    }
    // the linearised region needs at least three volumes
    for extra in [v_lin, 0.5 * (v_lin + v_max), v_max] {
        if !volumes.iter().any(|x| (x - extra).abs() < 1e-9) {
            volumes.push(extra);
        }
    }
    volumes.sort_by(f64::total_cmp);
    let mut samples = Vec::new();
    for &v in &volumes {
        plant.set_contact(ContactModel::Free)?;
        plant.set_volume(&ActuatorVector::from_element(n, v))?;
        let unloaded = averaged_pressure(plant, READINGS)[actuator];
        let mut load = vec![0.0; n];
        load[actuator] = TRANSMISSION_LOAD;
        plant.set_contact(ContactModel::Deadweight { load: load.into() })?;
        let loaded = averaged_pressure(plant, READINGS)[actuator];
        samples.push(TransmissionSample {
            volume: v,
            bend: 0.0,
            force: TRANSMISSION_LOAD,
            pressure_rise: loaded - unloaded,
        });
    }
    plant.set_contact(ContactModel::Free)?;
    Ok(samples)
}

/// Identifies stiffness, damping and transmission of the scenario's plant.
pub fn calibrate_from_plant(scenario: &Scenario) -> Result<CalibrationRun, HarnessError> {
    let n = scenario.actuator_count();
    let v_max = scenario.plant.v_max;
    let mut config = scenario.plant.clone();
    config.seed = super::condition_seed(scenario.seed, CALIBRATION_STREAM);
    let mut plant = Plant::new(config, &ActuatorVector::zeros(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(CALIBRATION_STREAM);

    let mut stiffness_samples = Vec::new();
    for volume in latin_hypercube(&mut rng, STIFFNESS_SAMPLES_PER_ACTUATOR * n, n, MIN_FRACTION * v_max, v_max) {
        plant.set_volume(&volume)?;
        let pressure = averaged_pressure(&mut plant, READINGS);
        stiffness_samples.push(StiffnessSample { volume, pressure });
    }
    let stiffness = calibrate_stiffness(&stiffness_samples)?;
    let k_row: Vec<f64> = (0..n).map(|j| stiffness.stiffness.get(0, j)).collect();

    let runs = damping_runs(&mut plant, &k_row, &DAMPING_FLOWS)?;
    let scalar = crate::types::StiffnessMatrix::scalar(k_row[0])?;
    let damping = calibrate_damping(&runs, &scalar, DAMPING_THRESHOLD)?;
    let damping_samples: usize = runs.iter().map(|r| r.time.len()).sum();

    let mut transmission = Vec::with_capacity(n);
    let mut map = None;
    let mut spread = 0.0f64;
    let mut transmission_samples = 0;
    for i in 0..n {
        let samples = transmission_steps(&mut plant, i, scenario.sensing.v_lin_ml)?;
        let fit = calibrate_transmission(&samples, scenario.sensing.v_lin_ml)?;
        transmission.push(fit.linear);
        spread = spread.max(fit.spread);
        transmission_samples += fit.samples;
        if i == 0 {
            map = Some(fit.map);
        }
    }

    let artifact = CalibrationArtifact {
        schema_version: SCHEMA_VERSION,
        stiffness: stiffness.stiffness.clone(),
        damping: match scenario.sensing.damping {
            DampingChoice::Linear => damping.linear,
            DampingChoice::Piecewise => damping.piecewise,
        },
        transmission: transmission.clone().into(),
        transmission_map: if n == 1 { map } else { None },
        provenance: Provenance {
            source: format!("simulated {} sweep", scenario.kind),
            seed: scenario.seed,
            stiffness_samples: stiffness.samples,
            stiffness_residual_rms_kpa: stiffness.residual_rms,
            damping_samples,
            transmission_samples,
            transmission_spread_kpa_per_n: spread,
        },
    };
    let mut metrics = vec![Metric::new("calib_stiffness_residual_rms_kpa", stiffness.residual_rms, None)];
    for r in 0..n {
        for c in 0..n {
            metrics.push(Metric::new(
                format!("calib_k_{r}{c}"),
                stiffness.stiffness.get(r, c),
                Some(scenario.plant.stiffness.get(r, c)),
            ));
        }
    }
    for (i, t) in transmission.iter().enumerate() {
        metrics.push(Metric::new(
            format!("calib_transmission_{i}"),
            *t,
            Some(super::reference::TRANSMISSION),
        ));
    }
    if let crate::plant::DampingLaw::Linear { coefficient } = damping.linear {
        metrics.push(Metric::new("calib_damping_linear", coefficient, None));
    }
    Ok(CalibrationRun { artifact, metrics })
}
