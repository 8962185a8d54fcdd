//! Discrete-time force control in actuator space.
//!
//! Per actuator the flow command is
//! `V̇_d = G_P·e + G_I·∫e dt + G_D·ė`, clamped to `±saturation`, where the
//! SEE error is `e = H⁺·f_d − f̂_act` and the SFA is the `n = 1` case with
//! `H = [0; 0; 1]`.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kinematics::{KinematicsError, WrenchTransform};
use crate::plant::{Plant, PlantError};
use crate::sensing::{SensingError, SensingModel};
use crate::types::ActuatorVector;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid controller configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("non-finite controller input")]
    NonFinite,
    #[error("{what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ControlError {
    ControlError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// First-order EMA coefficient for a cutoff at the given sample rate.
pub fn ema_alpha(cutoff_hz: f64, rate_hz: f64) -> f64 {
    1.0 - (-2.0 * PI * cutoff_hz / rate_hz).exp()
}

pub fn ema_step(prev_filtered: f64, raw: f64, alpha: f64) -> f64 {
    alpha * raw + (1.0 - alpha) * prev_filtered
}

/// One gain per actuator, or the same gain for all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagonal {
    Uniform(f64),
    PerActuator(Vec<f64>),
}

impl Diagonal {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Diagonal::Uniform(g) => *g,
            Diagonal::PerActuator(g) => g[i],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Diagonal::Uniform(g) => std::slice::from_ref(g),
            Diagonal::PerActuator(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    /// ml/(s·N).
    pub proportional: Diagonal,
    /// ml/(s·N·s), multiplies `∫e dt`.
    pub integral: Diagonal,
    /// ml/N, multiplies `ė`.
    pub derivative: Diagonal,
}

impl PidGains {
    pub fn new(p: f64, i: f64, d: f64) -> Self {
        Self {
            proportional: Diagonal::Uniform(p),
            integral: Diagonal::Uniform(i),
            derivative: Diagonal::Uniform(d),
        }
    }

    /// PD gains of the reference SFA.
    pub fn sfa_pd() -> Self {
        Self::new(1.97, 0.0, 0.2)
    }

    /// PI gains of the reference SEE.
    pub fn see_pi() -> Self {
        Self::new(1.97, 0.02, 0.0)
    }
}

mod cutoff {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Hz(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(hz) => s.serialize_f64(*hz),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Hz(hz) => Ok(Some(hz)),
            Raw::Word(w) if w == "none" => Ok(None),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a frequency in Hz or \"none\", got \"{w}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub rate_hz: f64,
    /// Pressure EMA cutoff.
    pub filter_cutoff_hz: f64,
    /// EMA cutoff on the error ahead of the derivative; `"none"` for a raw
    /// backward difference.
    #[serde(with = "cutoff")]
    pub derivative_cutoff_hz: Option<f64>,
    /// Flow limit per actuator, ml/s.
    pub saturation: f64,
    pub conditional_integration: bool,
    pub gains: PidGains,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            rate_hz: 250.0,
            filter_cutoff_hz: 100.0,
            derivative_cutoff_hz: Some(10.0),
            saturation: 5.0,
            conditional_integration: true,
            gains: PidGains::sfa_pd(),
        }
    }
}

impl ControllerConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn pressure_alpha(&self) -> f64 {
        ema_alpha(self.filter_cutoff_hz, self.rate_hz)
    }

    pub fn derivative_alpha(&self) -> f64 {
        self.derivative_cutoff_hz.map_or(1.0, |fc| ema_alpha(fc, self.rate_hz))
    }

    pub fn validate(&self, actuators: usize) -> Result<(), ControlError> {
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(invalid("rate_hz", "must be positive"));
        }
        let nyquist = self.rate_hz / 2.0;
        if !(self.filter_cutoff_hz > 0.0 && self.filter_cutoff_hz < nyquist) {
            return Err(invalid("filter_cutoff_hz", format!("must lie in (0, {nyquist})")));
        }
        if let Some(fc) = self.derivative_cutoff_hz {
            if !(fc > 0.0 && fc < nyquist) {
                return Err(invalid("derivative_cutoff_hz", format!("must lie in (0, {nyquist})")));
            }
        }
        if !(self.saturation > 0.0) || !self.saturation.is_finite() {
            return Err(invalid("saturation", "must be positive"));
        }
        for (field, gains) in [
            ("gains.proportional", &self.gains.proportional),
            ("gains.integral", &self.gains.integral),
            ("gains.derivative", &self.gains.derivative),
        ] {
            if gains.values().iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                return Err(invalid(field, "gains must be finite and non-negative"));
            }
            if let Diagonal::PerActuator(g) = gains {
                if g.len() != actuators {
                    return Err(invalid(
                        field,
                        format!("{} entries for {actuators} actuators", g.len()),
                    ));
                }
            }
        }
        if 1.0 / self.rate_hz > crate::plant::MAX_TIMESTEP {
            return Err(invalid("rate_hz", "control period exceeds the plant's largest timestep"));
        }
        Ok(())
    }
}

/// Controller memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    /// `∫e dt` per actuator, N·s.
    pub integral: Vec<f64>,
    /// Low-passed error per actuator from the previous tick, N.
    pub filtered_error: Option<Vec<f64>>,
    /// Low-passed pressure per actuator, kPa.
    pub filtered_pressure: Option<ActuatorVector>,
}

impl LoopState {
    pub fn new(actuators: usize) -> Self {
        Self {
            integral: vec![0.0; actuators],
            filtered_error: None,
            filtered_pressure: None,
        }
    }

    /// Smooths a raw pressure reading; the first reading seeds the filter.
    pub fn filter_pressure(&mut self, raw: &ActuatorVector, alpha: f64) -> ActuatorVector {
        let next = match &self.filtered_pressure {
            None => raw.clone(),
            Some(prev) => prev
                .iter()
                .zip(raw.iter())
                .map(|(&p, &r)| ema_step(p, r, alpha))
                .collect(),
        };
        self.filtered_pressure = Some(next.clone());
        next
    }
}

/// PID update on actuator-space errors, shared by both controllers.
pub fn pid_step(errors: &[f64], state: &mut LoopState, cfg: &ControllerConfig) -> Result<ActuatorVector, ControlError> {
    let n = errors.len();
    if state.integral.len() != n {
        return Err(ControlError::DimensionMismatch {
            what: "loop state",
            expected: n,
            found: state.integral.len(),
        });
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(ControlError::NonFinite);
    }
    let dt = cfg.dt();
    let alpha_d = cfg.derivative_alpha();
    let prev = state.filtered_error.clone().unwrap_or_else(|| errors.to_vec());
    let mut filtered = Vec::with_capacity(n);
    let mut out = ActuatorVector::zeros(n);
    for i in 0..n {
        let e = errors[i];
        let ef = ema_step(prev[i], e, alpha_d);
        let de = (ef - prev[i]) / dt;
        filtered.push(ef);
        let g = &cfg.gains;
        let unsat = g.proportional.get(i) * e + g.integral.get(i) * state.integral[i] + g.derivative.get(i) * de;
        let saturated = unsat.abs() > cfg.saturation;
        if !(saturated && cfg.conditional_integration) {
            state.integral[i] += e * dt;
        }
        out[i] = unsat.clamp(-cfg.saturation, cfg.saturation);
    }
    state.filtered_error = Some(filtered);
    Ok(out)
}

/// Single SFA: `e = f_d − f̂`.
pub fn sfa_pid_step(
    f_demand: f64,
    f_estimate: f64,
    state: &mut LoopState,
    cfg: &ControllerConfig,
) -> Result<f64, ControlError> {
    if !f_demand.is_finite() || !f_estimate.is_finite() {
        return Err(ControlError::NonFinite);
    }
    Ok(pid_step(&[f_demand - f_estimate], state, cfg)?[0])
}

/// SEE: `e = H⁺·f_d − P_ext ⊘ T̂`, per-actuator PID with diagonal gains.
pub fn see_pid_step(
    f_demand: &Vector3<f64>,
    p_ext: &ActuatorVector,
    model: &SensingModel,
    transform: &WrenchTransform,
    state: &mut LoopState,
    cfg: &ControllerConfig,
) -> Result<ActuatorVector, ControlError> {
    let f_est = p_ext.component_div(&model.transmission);
    actuator_space_step(f_demand, &f_est, transform, state, cfg)
}

fn actuator_space_step(
    f_demand: &Vector3<f64>,
    f_est: &ActuatorVector,
    transform: &WrenchTransform,
    state: &mut LoopState,
    cfg: &ControllerConfig,
) -> Result<ActuatorVector, ControlError> {
    let n = transform.actuator_count();
    if f_est.len() != n {
        return Err(ControlError::DimensionMismatch {
            what: "force estimate",
            expected: n,
            found: f_est.len(),
        });
    }
    if !f_demand.iter().all(|v| v.is_finite()) {
        return Err(ControlError::NonFinite);
    }
    let errors = transform.cartesian_to_actuator(f_demand).sub(f_est);
    pid_step(errors.as_slice(), state, cfg)
}

/// One constant-demand stretch of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Cartesian demand, N.
    pub demand: Vector3<f64>,
    pub duration_s: f64,
}

/// One logged controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub volume: ActuatorVector,
    pub flow_command: ActuatorVector,
    pub pressure_raw: ActuatorVector,
    pub pressure_filtered: ActuatorVector,
    pub force_estimate: ActuatorVector,
    pub force_true: ActuatorVector,
    pub cartesian_estimate: Vector3<f64>,
    pub cartesian_true: Vector3<f64>,
}

pub const LOG_HEADER: &str =
    "t,act_index,V,Vdot_cmd,P_raw,P_filt,f_est_act,f_true_act,fx_est,fy_est,fz_est,fx_true,fy_true,fz_true";

/// `%g`-style formatting with 9 significant digits.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

/// Per-tick record of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeriesLog {
    pub ticks: Vec<Tick>,
}

/// A parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub act_index: usize,
    pub values: [f64; 12],
}

impl LogRow {
    pub fn f_est_act(&self) -> f64 {
        self.values[4]
    }

    pub fn f_true_act(&self) -> f64 {
        self.values[5]
    }

    pub fn cartesian_true(&self) -> Vector3<f64> {
        Vector3::new(self.values[9], self.values[10], self.values[11])
    }

    pub fn cartesian_estimate(&self) -> Vector3<f64> {
        Vector3::new(self.values[6], self.values[7], self.values[8])
    }
}

impl TimeSeriesLog {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for tick in &self.ticks {
            for i in 0..tick.volume.len() {
                let fields = [
                    tick.volume[i],
                    tick.flow_command[i],
                    tick.pressure_raw[i],
                    tick.pressure_filtered[i],
                    tick.force_estimate[i],
                    tick.force_true[i],
                    tick.cartesian_estimate.x,
                    tick.cartesian_estimate.y,
                    tick.cartesian_estimate.z,
                    tick.cartesian_true.x,
                    tick.cartesian_true.y,
                    tick.cartesian_true.z,
                ];
                write!(w, "{},{i}", format_g9(tick.t))?;
                for v in fields {
                    write!(w, ",{}", format_g9(v))?;
                }
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    /// Parses rows written by [`TimeSeriesLog::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Vec<LogRow>> {
        let bad = |line: usize, msg: &str| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"));
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h == LOG_HEADER => {}
            Some(_) => return Err(bad(1, "unexpected header")),
            None => return Err(bad(1, "empty log")),
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 14 {
                return Err(bad(k + 2, "truncated row"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(k + 2, "malformed number"));
            let mut values = [0.0; 12];
            for (j, v) in values.iter_mut().enumerate() {
                *v = num(cols[j + 2])?;
            }
            rows.push(LogRow {
                t: num(cols[0])?,
                act_index: cols[1].parse().map_err(|_| bad(k + 2, "malformed index"))?,
                values,
            });
        }
        if rows.is_empty() {
            return Err(bad(2, "no data rows"));
        }
        Ok(rows)
    }
}

/// Runs one segment at the controller rate: measure, filter pressure,
/// estimate force from the pump's volume and actual flow, PID, command.
pub fn run_closed_loop(
    plant: &mut Plant,
    model: &SensingModel,
    transform: &WrenchTransform,
    cfg: &ControllerConfig,
    segment: &Segment,
    state: &mut LoopState,
    log: &mut TimeSeriesLog,
) -> Result<(), ControlError> {
    let n = plant.actuator_count();
    for (what, found) in [
        ("sensing model", model.actuator_count()),
        ("wrench transform", transform.actuator_count()),
        ("loop state", state.integral.len()),
    ] {
        if found != n {
            return Err(ControlError::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    cfg.validate(n)?;
    let dt = cfg.dt();
    let alpha = cfg.pressure_alpha();
    let ticks = (segment.duration_s * cfg.rate_hz).round() as usize;
    for _ in 0..ticks {
        let reading = plant.measure();
        let filtered = state.filter_pressure(&reading.pressure, alpha);
        let s = plant.state();
        let volume = s.volumes();
        let f_est = model.estimate(&filtered, &volume, &s.flows())?;
        let flow = actuator_space_step(&segment.demand, &f_est, transform, state, cfg)?;
        let force_true = s.external_force.clone();
        log.ticks.push(Tick {
            t: s.time,
            volume,
            flow_command: flow.clone(),
            pressure_raw: reading.pressure,
            pressure_filtered: filtered,
            cartesian_estimate: transform.actuator_to_cartesian(&f_est)?,
            cartesian_true: transform.actuator_to_cartesian(&force_true)?,
            force_estimate: f_est,
            force_true,
        });
        plant.step(&flow, dt)?;
    }
    Ok(())
}
