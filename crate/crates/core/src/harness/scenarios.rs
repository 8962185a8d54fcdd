//! Protocol runners. Each writes its raw logs and a manifest into the output
//! directory; the summary is then built from those files, so a run and a
//! later `summarize` of its directory agree exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::calibrate::{calibrate_from_plant, damping_runs};
use super::config::{Protocol, Scenario, ScenarioKind, SensingSource, SCHEMA_VERSION};
use super::summary::{
    summarize, write_samples, ConditionRecord, Manifest, Metric, RunSummary, SampleRow, SegmentRecord, PRNG_NAME,
    SAMPLES_FILE,
};
use super::HarnessError;
use crate::calib::{calibrate_damping, calibrate_transmission, TransmissionSample};
use crate::control::{run_closed_loop, LoopState, Segment, TimeSeriesLog};
use crate::kinematics::{build_wrench_transform, WrenchTransform};
use crate::plant::{ContactModel, DampingLaw, Plant, PlantConfig, MAX_TIMESTEP};
use crate::sensing::{capture_baseline, SensingModel};
use crate::types::ActuatorVector;

/// RNG stream of randomised protocol orders.
pub const PROTOCOL_STREAM: u64 = u64::MAX - 2;
pub const ECHO_FILE: &str = "config.echo.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CALIBRATION_FILE: &str = "calibration.toml";

/// Simulation step of the open-loop protocols, s.
const SAMPLE_DT: f64 = MAX_TIMESTEP;
/// Pump speed used to reach an inflation in the sensing protocols, ml/s.
const PUMP_FLOW: f64 = 5.0;

/// Independent seed for one condition or purpose of a run.
pub fn condition_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn protocol_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROTOCOL_STREAM);
    rng
}

fn plant_for(scenario: &Scenario, stream: u64, initial: f64) -> Result<Plant, HarnessError> {
    let config = PlantConfig {
        seed: condition_seed(scenario.seed, stream),
        ..scenario.plant.clone()
    };
    let n = config.actuator_count();
    Ok(Plant::new(config, &ActuatorVector::from_element(n, initial))?)
}

/// Drives the volume to `target` at no more than `max_flow`, then leaves
/// the pump at rest.
fn pump_to(plant: &mut Plant, target: &ActuatorVector, max_flow: f64) -> Result<(), HarnessError> {
    let start = plant.state().volumes();
    let distance = target.sub(&start).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let steps = (distance / (max_flow * SAMPLE_DT)).ceil() as usize;
    for _ in 0..steps {
        let remaining = target.sub(&plant.state().volumes());
        let flow = remaining.map(|r| (r / SAMPLE_DT).clamp(-max_flow, max_flow));
        plant.step(&flow, SAMPLE_DT)?;
    }
    plant.set_volume(target)?;
    Ok(())
}

fn settle(plant: &mut Plant, seconds: f64) -> Result<(), HarnessError> {
    let rest = ActuatorVector::zeros(plant.actuator_count());
    for _ in 0..(seconds / SAMPLE_DT).round() as usize {
        plant.step(&rest, SAMPLE_DT)?;
    }
    Ok(())
}

fn mean_pressure(plant: &mut Plant, count: usize) -> ActuatorVector {
    let n = plant.actuator_count();
    let mut acc = vec![0.0; n];
    for _ in 0..count {
        for (a, p) in acc.iter_mut().zip(plant.measure().pressure.iter()) {
            *a += p;
        }
    }
    acc.iter().map(|a| a / count as f64).collect::<Vec<_>>().into()
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn write_sample_file(out: &Path, rows: &[SampleRow]) -> Result<String, HarnessError> {
    let name = format!("logs/{SAMPLES_FILE}");
    let path = out.join(&name);
    let mut w = create(&path)?;
    write_samples(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(&path, e))?;
    Ok(name)
}

fn sensing_model(scenario: &Scenario, out: &Path, metrics: &mut Vec<Metric>) -> Result<SensingModel, HarnessError> {
    match scenario.sensing.source {
        SensingSource::Matched => Ok(SensingModel::matched(&scenario.plant, scenario.sensing.mode)),
        SensingSource::Calibrated => {
            let run = calibrate_from_plant(scenario)?;
            run.artifact.save(&out.join(CALIBRATION_FILE))?;
            metrics.extend(run.metrics.iter().cloned());
            run.sensing_model(scenario)
        }
    }
}

fn new_manifest(scenario: &Scenario) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION,
        kind: scenario.kind,
        seed: scenario.seed,
        prng: PRNG_NAME.into(),
        actuators: scenario.actuator_count(),
        conditions: Vec::new(),
        samples: None,
        steady_fraction: None,
        settle_band_n: None,
        metrics: Vec::new(),
    }
}

/// Executes the scenario, writing `config.echo.toml`, `logs/`,
/// `manifest.json` and `summary.csv` under `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunSummary, HarnessError> {
    scenario.validate()?;
    let logs = out.join("logs");
    std::fs::create_dir_all(&logs).map_err(|e| HarnessError::io(&logs, e))?;
    let echo = out.join(ECHO_FILE);
    std::fs::write(&echo, scenario.to_toml()?).map_err(|e| HarnessError::io(&echo, e))?;

    let mut manifest = new_manifest(scenario);
    match scenario.kind {
        ScenarioKind::SfaSteps | ScenarioKind::SeeSteps => run_steps(scenario, out, &mut manifest)?,
        ScenarioKind::StaticSensing => run_static(scenario, out, &mut manifest)?,
        ScenarioKind::Repeatability => run_repeatability(scenario, out, &mut manifest)?,
        ScenarioKind::QuasistaticValidation => run_quasistatic(scenario, out, &mut manifest)?,
        ScenarioKind::DampingId => run_damping(scenario, out, &mut manifest)?,
        ScenarioKind::TransmissionSweep => run_transmission(scenario, out, &mut manifest)?,
    }
    manifest.write(out)?;
    let summary = summarize(out)?;
    let path = out.join(SUMMARY_FILE);
    std::fs::write(&path, summary.to_csv()).map_err(|e| HarnessError::io(&path, e))?;
    log::info!(
        "{} run finished: {} conditions, summary in {}",
        scenario.kind,
        manifest.conditions.len(),
        path.display()
    );
    Ok(summary)
}

struct StepCondition {
    index: usize,
    repetition: usize,
    inflation: f64,
    table: &'static str,
    axis: usize,
    demands: Vec<f64>,
}

fn step_conditions(scenario: &Scenario) -> Vec<StepCondition> {
    let p = scenario.steps().expect("validated steps protocol");
    let axes: Vec<(&'static str, usize, &Vec<f64>)> = match scenario.kind {
        ScenarioKind::SfaSteps => vec![("force", 2, &p.demands_n)],
        _ => vec![("fx", 0, &p.demands_x_n), ("fy", 1, &p.demands_y_n), ("fz", 2, &p.demands_z_n)]
            .into_iter()
            .filter(|a| !a.2.is_empty())
            .collect(),
    };
    let mut out = Vec::new();
    for repetition in 0..scenario.repetitions {
        for &inflation in &p.inflations {
            for &(table, axis, demands) in &axes {
                out.push(StepCondition {
                    index: out.len(),
                    repetition,
                    inflation,
                    table,
                    axis,
                    demands: demands.clone(),
                });
            }
        }
    }
    out
}

fn run_step_condition(
    scenario: &Scenario,
    model: &SensingModel,
    transform: &WrenchTransform,
    cond: &StepCondition,
    out: &Path,
) -> Result<ConditionRecord, HarnessError> {
    let p = scenario.steps().expect("validated steps protocol");
    let cfg = &scenario.controller;
    let n = scenario.actuator_count();
    let start_volume = ActuatorVector::from_element(n, cond.inflation * scenario.plant.v_max);
    let mut plant = plant_for(scenario, cond.index as u64, start_volume[0])?;
    let mut log = TimeSeriesLog::default();
    let mut segments = Vec::new();
    let ticks = (p.segment_s * cfg.rate_hz).round();
    for &demand in &cond.demands {
        plant.set_contact(ContactModel::Free)?;
        plant.set_volume(&start_volume)?;
        plant.clamp_at_current_extension(p.bilateral_clamp)?;
        let mut state = LoopState::new(n);
        let mut d = Vector3::zeros();
        d[cond.axis] = demand;
        let start_s = plant.state().time;
        let segment = Segment {
            demand: d,
            duration_s: p.segment_s,
        };
        run_closed_loop(&mut plant, model, transform, cfg, &segment, &mut state, &mut log)?;
        segments.push(SegmentRecord {
            table: cond.table.to_string(),
            axis: cond.axis,
            target: demand,
            repetition: cond.repetition,
            start_s,
            end_s: start_s + ticks * cfg.dt(),
        });
    }
    let name = format!("logs/cond_{:03}.csv", cond.index);
    let path = out.join(&name);
    let mut w = create(&path)?;
    log.write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(&path, e))?;
    Ok(ConditionRecord {
        index: cond.index,
        label: format!(
            "{} inflation {}% rep {}",
            cond.table,
            crate::control::format_g9(cond.inflation * 100.0),
            cond.repetition
        ),
        inflation: cond.inflation,
        log: Some(name),
        segments,
    })
}

fn run_steps(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let p = scenario.steps().expect("validated steps protocol");
    let model = sensing_model(scenario, out, &mut manifest.metrics)?;
    let transform = build_wrench_transform(&scenario.geometry.to_geometry()?)?;
    let conditions = step_conditions(scenario);
    let records: Result<Vec<ConditionRecord>, HarnessError> = conditions
        .par_iter()
        .map(|c| run_step_condition(scenario, &model, &transform, c, out))
        .collect();
    manifest.conditions = records?;
    manifest.steady_fraction = Some(p.steady_fraction);
    manifest.settle_band_n = Some(p.settle_band_n);
    Ok(())
}

fn run_static(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let Protocol::StaticSensing(p) = &scenario.protocol else {
        unreachable!("validated static protocol")
    };
    let model = sensing_model(scenario, out, &mut manifest.metrics)?;
    let v_max = scenario.plant.v_max;
    let conditions: Vec<(usize, usize, f64)> = (0..scenario.repetitions)
        .flat_map(|r| p.inflations.iter().map(move |&i| (r, i)))
        .enumerate()
        .map(|(k, (r, i))| (k, r, i))
        .collect();
    let results: Result<Vec<(ConditionRecord, Vec<SampleRow>)>, HarnessError> = conditions
        .par_iter()
        .map(|&(index, repetition, inflation)| {
            let mut plant = plant_for(scenario, index as u64, 0.0)?;
            let volume = ActuatorVector::from_element(1, inflation * v_max);
            pump_to(&mut plant, &volume, PUMP_FLOW)?;
            settle(&mut plant, p.settle_s)?;
            let baseline: Vec<ActuatorVector> =
                (0..p.baseline_readings).map(|_| plant.measure().pressure).collect();
            let model = model.clone().with_baseline(capture_baseline(&baseline)?);
            let mut rows = Vec::new();
            for &load in &p.loads_n {
                plant.set_contact(ContactModel::Deadweight {
                    load: ActuatorVector::from_element(1, load),
                })?;
                settle(&mut plant, p.settle_s)?;
                for _ in 0..p.readings_per_load {
                    let m = plant.measure();
                    let s = plant.state();
                    let f = model.estimate(&m.pressure, &s.volumes(), &s.flows())?;
                    rows.push(SampleRow {
                        condition: index,
                        repetition,
                        inflation,
                        load_n: load,
                        volume_ml: s.volumes()[0],
                        bend_deg: 0.0,
                        pressure_kpa: m.pressure[0],
                        extension_mm: m.extension[0],
                        f_est_n: f[0],
                        f_true_n: s.external_force[0],
                    });
                }
            }
            let record = ConditionRecord {
                index,
                label: format!("inflation {}% rep {repetition}", crate::control::format_g9(inflation * 100.0)),
                inflation,
                log: None,
                segments: Vec::new(),
            };
            Ok((record, rows))
        })
        .collect();
    let mut rows = Vec::new();
    for (record, r) in results? {
        manifest.conditions.push(record);
        rows.extend(r);
    }
    manifest.samples = Some(write_sample_file(out, &rows)?);
    Ok(())
}

fn run_repeatability(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let Protocol::Repeatability(p) = &scenario.protocol else {
        unreachable!("validated repeatability protocol")
    };
    let model = sensing_model(scenario, out, &mut manifest.metrics)?;
    let v_max = scenario.plant.v_max;
    let mut plant = plant_for(scenario, 0, 0.0)?;
    let mut rng = protocol_rng(scenario.seed);
    let mut order: Vec<usize> = (0..p.inflations.len()).collect();
    let mut rows = Vec::new();
    for repetition in 0..scenario.repetitions {
        order.shuffle(&mut rng);
        for &level in &order {
            let inflation = p.inflations[level];
            pump_to(&mut plant, &ActuatorVector::from_element(1, inflation * v_max), p.max_flow_ml_s)?;
            settle(&mut plant, p.settle_s)?;
            let m = plant.measure();
            let s = plant.state();
            let f = model.estimate(&m.pressure, &s.volumes(), &s.flows())?;
            rows.push(SampleRow {
                condition: level,
                repetition,
                inflation,
                load_n: 0.0,
                volume_ml: s.volumes()[0],
                bend_deg: 0.0,
                pressure_kpa: m.pressure[0],
                extension_mm: m.extension[0],
                f_est_n: f[0],
                f_true_n: s.external_force[0],
            });
        }
    }
    manifest.conditions = p
        .inflations
        .iter()
        .enumerate()
        .map(|(index, &inflation)| ConditionRecord {
            index,
            label: format!("level {}%", crate::control::format_g9(inflation * 100.0)),
            inflation,
            log: None,
            segments: Vec::new(),
        })
        .collect();
    manifest.samples = Some(write_sample_file(out, &rows)?);
    Ok(())
}

fn run_quasistatic(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let Protocol::QuasistaticValidation(p) = &scenario.protocol else {
        unreachable!("validated quasi-static protocol")
    };
    let model = sensing_model(scenario, out, &mut manifest.metrics)?;
    let v_max = scenario.plant.v_max;
    let mut plant = plant_for(scenario, 0, 0.0)?;
    let mut rng = protocol_rng(scenario.seed);
    let mut rows = Vec::new();
    for repetition in 0..scenario.repetitions {
        for pose in 0..p.poses {
            let inflation = *p.inflations.choose(&mut rng).expect("non-empty");
            let load = *p.loads_n.choose(&mut rng).expect("non-empty");
            plant.set_contact(ContactModel::Deadweight {
                load: ActuatorVector::from_element(1, load),
            })?;
            pump_to(&mut plant, &ActuatorVector::from_element(1, inflation * v_max), p.max_flow_ml_s)?;
            settle(&mut plant, p.settle_s)?;
            let pressure = mean_pressure(&mut plant, p.readings_per_pose);
            let s = plant.state();
            let f = model.estimate(&pressure, &s.volumes(), &s.flows())?;
            let index = repetition * p.poses + pose;
            rows.push(SampleRow {
                condition: index,
                repetition,
                inflation,
                load_n: load,
                volume_ml: s.volumes()[0],
                bend_deg: 0.0,
                pressure_kpa: pressure[0],
                extension_mm: s.extensions()[0],
                f_est_n: f[0],
                f_true_n: s.external_force[0],
            });
            manifest.conditions.push(ConditionRecord {
                index,
                label: format!(
                    "pose {pose} rep {repetition}: {}% {} N",
                    crate::control::format_g9(inflation * 100.0),
                    crate::control::format_g9(load)
                ),
                inflation,
                log: None,
                segments: Vec::new(),
            });
        }
    }
    manifest.samples = Some(write_sample_file(out, &rows)?);
    Ok(())
}

fn run_damping(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let Protocol::DampingId(p) = &scenario.protocol else {
        unreachable!("validated damping protocol")
    };
    let mut plant = plant_for(scenario, 0, 0.0)?;
    let k = scenario.plant.stiffness.get(0, 0);
    let runs = damping_runs(&mut plant, &[k], &p.flows_ml_s)?;

    let name = "logs/damping.csv".to_string();
    let path = out.join(&name);
    let mut w = create(&path)?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "run,flow_ml_s,t,volume_ml,pressure_kpa")?;
        for (i, r) in runs.iter().enumerate() {
            for j in 0..r.time.len() {
                writeln!(
                    w,
                    "{i},{},{},{},{}",
                    crate::control::format_g9(r.flow),
                    crate::control::format_g9(r.time[j]),
                    crate::control::format_g9(r.volume[j]),
                    crate::control::format_g9(r.pressure[j])
                )?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| HarnessError::io(&path, e))?;

    let fit = calibrate_damping(&runs, &crate::types::StiffnessMatrix::scalar(k)?, p.threshold_ml_s)?;
    let DampingLaw::Piecewise {
        slope_neg: ref_slope_neg,
        offset_neg: ref_offset_neg,
        plateau: ref_plateau,
        slope_pos: ref_slope_pos,
        offset_pos: ref_offset_pos,
        ..
    } = DampingLaw::piecewise_default()
    else {
        unreachable!("piecewise default")
    };
    if let DampingLaw::Piecewise {
        slope_neg,
        offset_neg,
        plateau,
        slope_pos,
        offset_pos,
        ..
    } = fit.piecewise
    {
        manifest.metrics.extend([
            Metric::new("damping_slope_neg", slope_neg, Some(ref_slope_neg)),
            Metric::new("damping_offset_neg", offset_neg, Some(ref_offset_neg)),
            Metric::new("damping_plateau", plateau, Some(ref_plateau)),
            Metric::new("damping_slope_pos", slope_pos, Some(ref_slope_pos)),
            Metric::new("damping_offset_pos", offset_pos, Some(ref_offset_pos)),
        ]);
    }
    if let DampingLaw::Linear { coefficient } = fit.linear {
        let reference = match DampingLaw::linear_default() {
            DampingLaw::Linear { coefficient } => Some(coefficient),
            _ => None,
        };
        manifest.metrics.push(Metric::new("damping_linear", coefficient, reference));
    }
    manifest.conditions = runs
        .iter()
        .enumerate()
        .map(|(index, r)| ConditionRecord {
            index,
            label: format!("constant flow {} ml/s", crate::control::format_g9(r.flow)),
            inflation: r.volume.first().copied().unwrap_or(0.0) / scenario.plant.v_max,
            log: Some(name.clone()),
            segments: Vec::new(),
        })
        .collect();
    Ok(())
}

fn run_transmission(scenario: &Scenario, out: &Path, manifest: &mut Manifest) -> Result<(), HarnessError> {
    let Protocol::TransmissionSweep(p) = &scenario.protocol else {
        unreachable!("validated transmission protocol")
    };
    let v_max = scenario.plant.v_max;
    let mut plant = plant_for(scenario, 0, 0.0)?;
    let ramp_steps = ((p.ramp_s / SAMPLE_DT).round() as usize).max(1);
    let rest = ActuatorVector::zeros(1);
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for &volume in &p.volumes_ml {
        for &bend in &p.bends_deg {
            plant.set_contact(ContactModel::Free)?;
            plant.set_volume(&ActuatorVector::from_element(1, volume))?;
            plant.set_bend(bend.to_radians());
            plant.clamp_at_current_extension(true)?;
            let unloaded = mean_pressure(&mut plant, p.readings)[0];
            let x0 = plant.state().extensions()[0];
            for k in 1..=ramp_steps {
                let tip = x0 - p.displacement_mm * k as f64 / ramp_steps as f64;
                plant.set_contact(ContactModel::Clamped {
                    tip_position: ActuatorVector::from_element(1, tip),
                    bilateral: true,
                })?;
                plant.step(&rest, SAMPLE_DT)?;
            }
            let loaded = mean_pressure(&mut plant, p.readings)[0];
            let force = plant.state().external_force[0];
            samples.push(TransmissionSample {
                volume,
                bend,
                force,
                pressure_rise: loaded - unloaded,
            });
            rows.push(SampleRow {
                condition: rows.len(),
                repetition: 0,
                inflation: volume / v_max,
                load_n: force,
                volume_ml: volume,
                bend_deg: bend,
                pressure_kpa: loaded - unloaded,
                extension_mm: plant.state().extensions()[0],
                f_est_n: f64::NAN,
                f_true_n: force,
            });
        }
    }
    plant.set_bend(0.0);
    let fit = calibrate_transmission(&samples, scenario.sensing.v_lin_ml)?;
    for r in &mut rows {
        r.f_est_n = r.pressure_kpa / fit.linear;
    }
    let name = "logs/transmission.csv".to_string();
    let path = out.join(&name);
    let mut w = create(&path)?;
    write_samples(&mut w, &rows)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(&path, e))?;

    manifest.metrics.push(Metric::new(
        "transmission_linear",
        fit.linear,
        Some(super::reference::TRANSMISSION),
    ));
    manifest.metrics.push(Metric::new(
        "transmission_spread",
        fit.spread,
        Some(super::reference::TRANSMISSION_SPREAD),
    ));
    for (i, v) in fit.map.volumes.iter().enumerate() {
        for (j, b) in fit.map.bends.iter().enumerate() {
            manifest.metrics.push(Metric::new(
                format!(
                    "transmission@{}ml_{}deg",
                    crate::control::format_g9(*v),
                    crate::control::format_g9(*b)
                ),
                fit.map.values[i][j],
                None,
            ));
        }
    }
    manifest.conditions = rows
        .iter()
        .map(|r| ConditionRecord {
            index: r.condition,
            label: format!(
                "{} ml at {} deg",
                crate::control::format_g9(r.volume_ml),
                crate::control::format_g9(r.bend_deg)
            ),
            inflation: r.inflation,
            log: Some(name.clone()),
            segments: Vec::new(),
        })
        .collect();
    Ok(())
}
