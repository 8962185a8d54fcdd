//! Ground-truth simulator of a single SFA or the coupled SEE.
//!
//! Per actuator `i` the plant holds a fluid volume `V_i` and evaluates, after
//! each fixed explicit-Euler step,
//!
//! ```text
//! V   ← clamp(V + V̇·dt, 0, V_max)
//! R   ← R + dt·(ρ·(K·V) − R)/τ_r            (relaxation, optional)
//! f   ← contact force (free / clamped / deadweight)
//! x   = g_x·V − c_f·f
//! P   = K·V − R + P_d(V̇) + T·f
//! ```
//!
//! Measurements add zero-mean Gaussian noise whose σ is interpolated from
//! the state-uncertainty table at `V/V_max`.

mod damping;
mod noise;

pub use damping::{damping_pressure, DampingLaw};
pub use noise::{NoiseModel, NoiseRow, STATE_UNCERTAINTY};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ActuatorState, ActuatorVector, StiffnessMatrix};

/// Largest timestep the explicit update accepts, s.
pub const MAX_TIMESTEP: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid plant configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("timestep {0} s outside (0, {MAX_TIMESTEP}]")]
    Timestep(f64),
    #[error("non-finite flow command")]
    NonFiniteFlow,
    #[error("{what} has {found} entries, plant has {expected} actuators")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("volume {volume} ml outside [0, {v_max}]")]
    VolumeOutOfRange { volume: f64, v_max: f64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> PlantError {
    PlantError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// Slow stress relaxation: a first-order lag of a fraction `ratio` of the
/// elastic pressure, subtracted from the measured pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relaxation {
    pub enabled: bool,
    pub ratio: f64,
    pub time_constant_s: f64,
}

impl Default for Relaxation {
    fn default() -> Self {
        Self {
            enabled: false,
            ratio: 0.05,
            time_constant_s: 30.0,
        }
    }
}

/// Force transmission `T` (kPa/N): pressure rise per newton of axial load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmission {
    /// Per-actuator nominal transmission, kPa/N.
    pub nominal: ActuatorVector,
    /// Relative change per rad of bending (`T·(1 + s·|α|)`).
    pub bend_sensitivity: f64,
    /// Optional `[volume ml, factor]` table multiplying the nominal value,
    /// linearly interpolated and clamped at the ends. Empty means flat.
    #[serde(default)]
    pub volume_profile: Vec<[f64; 2]>,
}

impl Transmission {
    pub fn flat(nominal: ActuatorVector) -> Self {
        Self {
            nominal,
            bend_sensitivity: 0.0,
            volume_profile: Vec::new(),
        }
    }

    /// Strongly volume-dependent at low inflation and nearly constant above
    /// 2.5 ml, where it stays within about ±4% of the nominal value.
    pub fn characterised_profile() -> Vec<[f64; 2]> {
        vec![
            [0.0, 1.80],
            [0.5, 1.45],
            [1.0, 1.25],
            [1.5, 1.13],
            [2.0, 1.07],
            [2.5, 1.04],
            [3.0, 1.00],
            [3.5, 0.97],
        ]
    }

    pub fn profile_factor(&self, volume: f64) -> f64 {
        let p = &self.volume_profile;
        match p.len() {
            0 => 1.0,
            1 => p[0][1],
            _ => {
                if volume <= p[0][0] {
                    return p[0][1];
                }
                if volume >= p[p.len() - 1][0] {
                    return p[p.len() - 1][1];
                }
                let i = p.partition_point(|r| r[0] <= volume);
                let (a, b) = (p[i - 1], p[i]);
                a[1] + (volume - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
            }
        }
    }

    /// Effective transmission of actuator `i` at `volume` and bend `bend`.
    pub fn at(&self, i: usize, volume: f64, bend: f64) -> f64 {
        self.nominal[i] * self.profile_factor(volume) * (1.0 + self.bend_sensitivity * bend.abs())
    }
}

/// Ground-truth parameters of the simulated actuator system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// `K_true`, kPa/ml.
    pub stiffness: StiffnessMatrix,
    pub transmission: Transmission,
    pub damping: DampingLaw,
    /// Maximum fluid volume per actuator, ml.
    pub v_max: f64,
    /// Volume-to-extension gain `g_x`, mm/ml.
    pub extension_gain: f64,
    /// Axial compliance `c_f`, mm/N.
    pub axial_compliance: f64,
    pub noise: NoiseModel,
    pub relaxation: Relaxation,
    pub seed: u64,
}

impl PlantConfig {
    /// Single reference SFA, noise and relaxation off.
    pub fn sfa() -> Self {
        Self {
            stiffness: StiffnessMatrix::scalar(43.31).expect("positive"),
            transmission: Transmission::flat(ActuatorVector::from_slice(&[48.5])),
            damping: DampingLaw::linear_default(),
            v_max: 3.5,
            extension_gain: 10.0,
            axial_compliance: 1.0,
            noise: NoiseModel::off(),
            relaxation: Relaxation::default(),
            seed: 0,
        }
    }

    /// Three coupled SFAs with the typical calibrated stiffness matrix.
    pub fn see() -> Self {
        Self {
            stiffness: StiffnessMatrix::from_rows(&SEE_STIFFNESS.map(|r| r.to_vec()))
                .expect("valid matrix"),
            transmission: Transmission::flat(ActuatorVector::from_element(3, 48.5)),
            ..Self::sfa()
        }
    }

    pub fn actuator_count(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let n = self.actuator_count();
        if self.transmission.nominal.len() != n {
            return Err(PlantError::DimensionMismatch {
                what: "transmission.nominal",
                expected: n,
                found: self.transmission.nominal.len(),
            });
        }
        if self.transmission.nominal.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(invalid("transmission.nominal", "entries must be positive"));
        }
        if !self.transmission.bend_sensitivity.is_finite() {
            return Err(invalid("transmission.bend_sensitivity", "must be finite"));
        }
        let profile = &self.transmission.volume_profile;
        if profile.iter().any(|r| !(r[1] > 0.0) || !r[0].is_finite() || !r[1].is_finite()) {
            return Err(invalid("transmission.volume_profile", "factors must be positive"));
        }
        if profile.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(invalid(
                "transmission.volume_profile",
                "volumes must be strictly increasing",
            ));
        }
        if !self.damping.is_finite() {
            return Err(invalid("damping", "coefficients must be finite"));
        }
        if !(self.v_max > 0.0) || !self.v_max.is_finite() {
            return Err(invalid("v_max", "must be positive"));
        }
        if !(self.extension_gain > 0.0) || !self.extension_gain.is_finite() {
            return Err(invalid("extension_gain", "must be positive"));
        }
        if !(self.axial_compliance >= 0.0) || !self.axial_compliance.is_finite() {
            return Err(invalid("axial_compliance", "must be non-negative"));
        }
        let r = &self.relaxation;
        if !(0.0..1.0).contains(&r.ratio) {
            return Err(invalid("relaxation.ratio", "must lie in [0, 1)"));
        }
        if !(r.time_constant_s > 0.0) {
            return Err(invalid("relaxation.time_constant_s", "must be positive"));
        }
        self.noise.validate().map_err(|reason| invalid("noise.table", reason))
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self::sfa()
    }
}

/// Typical calibrated SEE stiffness, kPa/ml.
pub const SEE_STIFFNESS: [[f64; 3]; 3] = [
    [43.31, 1.94, 1.48],
    [0.94, 48.64, 1.39],
    [0.36, 1.18, 44.18],
];

/// How the tip interacts with its environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContactModel {
    Free,
    /// Tip held at `tip_position` (mm, per actuator). Bilateral clamps can
    /// pull as well as push; unilateral ones release when `g_x·V < x_c`.
    Clamped {
        tip_position: ActuatorVector,
        bilateral: bool,
    },
    /// Constant axial load in N per actuator.
    Deadweight { load: ActuatorVector },
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub actuators: Vec<ActuatorState>,
    /// Relaxation pressure per actuator, kPa.
    pub relaxation: Vec<f64>,
    /// External axial force per actuator, N (positive opposes extension).
    pub external_force: ActuatorVector,
    pub time: f64,
}

impl PlantState {
    pub fn volumes(&self) -> ActuatorVector {
        self.actuators.iter().map(|a| a.volume).collect::<Vec<_>>().into()
    }

    pub fn flows(&self) -> ActuatorVector {
        self.actuators.iter().map(|a| a.flow).collect::<Vec<_>>().into()
    }

    pub fn pressures(&self) -> ActuatorVector {
        self.actuators.iter().map(|a| a.pressure).collect::<Vec<_>>().into()
    }

    pub fn extensions(&self) -> ActuatorVector {
        self.actuators.iter().map(|a| a.extension).collect::<Vec<_>>().into()
    }
}

/// A noisy sensor reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub pressure: ActuatorVector,
    pub extension: ActuatorVector,
}

/// Single-owner simulator instance.
#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    contact: ContactModel,
    state: PlantState,
    bend: f64,
    rng: ChaCha8Rng,
}

impl Plant {
    /// Plant at rest with `initial_volume` and a free tip.
    pub fn new(config: PlantConfig, initial_volume: &ActuatorVector) -> Result<Self, PlantError> {
        config.validate()?;
        let n = config.actuator_count();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut plant = Self {
            state: PlantState {
                actuators: vec![ActuatorState::default(); n],
                relaxation: vec![0.0; n],
                external_force: ActuatorVector::zeros(n),
                time: 0.0,
            },
            config,
            contact: ContactModel::Free,
            bend: 0.0,
            rng,
        };
        plant.set_volume(initial_volume)?;
        Ok(plant)
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn contact(&self) -> &ContactModel {
        &self.contact
    }

    pub fn actuator_count(&self) -> usize {
        self.config.actuator_count()
    }

    /// Places the fluid volume directly, at rest (zero flow).
    pub fn set_volume(&mut self, volume: &ActuatorVector) -> Result<(), PlantError> {
        let n = self.actuator_count();
        if volume.len() != n {
            return Err(PlantError::DimensionMismatch {
                what: "volume",
                expected: n,
                found: volume.len(),
            });
        }
        for &v in volume.iter() {
            if !(0.0..=self.config.v_max).contains(&v) {
                return Err(PlantError::VolumeOutOfRange {
                    volume: v,
                    v_max: self.config.v_max,
                });
            }
        }
        for (a, &v) in self.state.actuators.iter_mut().zip(volume.iter()) {
            a.volume = v;
            a.flow = 0.0;
        }
        self.resolve();
        Ok(())
    }

    pub fn set_contact(&mut self, contact: ContactModel) -> Result<(), PlantError> {
        let n = self.actuator_count();
        let check = |what, v: &ActuatorVector| {
            if v.len() != n {
                Err(PlantError::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                })
            } else {
                Ok(())
            }
        };
        match &contact {
            ContactModel::Free => {}
            ContactModel::Clamped { tip_position, .. } => {
                check("contact.tip_position", tip_position)?;
                if !(self.config.axial_compliance > 0.0) {
                    return Err(invalid(
                        "axial_compliance",
                        "clamped contact needs a positive compliance",
                    ));
                }
            }
            ContactModel::Deadweight { load } => check("contact.load", load)?,
        }
        self.contact = contact;
        self.resolve();
        Ok(())
    }

    /// Clamps the tip where it currently is; the present force is kept at zero.
    pub fn clamp_at_current_extension(&mut self, bilateral: bool) -> Result<(), PlantError> {
        let g = self.config.extension_gain;
        let tip: Vec<f64> = self.state.actuators.iter().map(|a| g * a.volume).collect();
        self.set_contact(ContactModel::Clamped {
            tip_position: tip.into(),
            bilateral,
        })
    }

    /// Bending angle of the actuator body, rad (affects transmission only).
    pub fn set_bend(&mut self, bend: f64) {
        self.bend = bend;
        self.resolve();
    }

    pub fn bend(&self) -> f64 {
        self.bend
    }

    /// Advances the plant by `dt` seconds under the commanded flows (ml/s).
    pub fn step(&mut self, commanded_flow: &ActuatorVector, dt: f64) -> Result<&PlantState, PlantError> {
        if !(dt > 0.0 && dt <= MAX_TIMESTEP) {
            return Err(PlantError::Timestep(dt));
        }
        let n = self.actuator_count();
        if commanded_flow.len() != n {
            return Err(PlantError::DimensionMismatch {
                what: "flow command",
                expected: n,
                found: commanded_flow.len(),
            });
        }
        if !commanded_flow.is_finite() {
            return Err(PlantError::NonFiniteFlow);
        }
        let v_max = self.config.v_max;
        for (a, &q) in self.state.actuators.iter_mut().zip(commanded_flow.iter()) {
            let unclamped = a.volume + q * dt;
            let next = unclamped.clamp(0.0, v_max);
            // the pump delivers the command exactly unless a limit is hit
            a.flow = if next == unclamped { q } else { (next - a.volume) / dt };
            a.volume = next;
        }
        let relax = self.config.relaxation;
        if relax.enabled {
            let elastic = self.config.stiffness.apply(&self.state.volumes());
            for (r, &e) in self.state.relaxation.iter_mut().zip(elastic.iter()) {
                *r += dt * (relax.ratio * e - *r) / relax.time_constant_s;
            }
        }
        self.state.time += dt;
        self.resolve();
        Ok(&self.state)
    }

    /// Recomputes contact force, extension and pressure from `V`, `V̇`, `R`.
    fn resolve(&mut self) {
        let cfg = &self.config;
        let g = cfg.extension_gain;
        let c = cfg.axial_compliance;
        let volumes = self.state.volumes();
        let elastic = cfg.stiffness.apply(&volumes);
        for i in 0..self.state.actuators.len() {
            let a = &mut self.state.actuators[i];
            let force = match &self.contact {
                ContactModel::Free => 0.0,
                ContactModel::Deadweight { load } => load[i],
                ContactModel::Clamped {
                    tip_position,
                    bilateral,
                } => {
                    let f = (g * a.volume - tip_position[i]) / c;
                    if *bilateral {
                        f
                    } else {
                        f.max(0.0)
                    }
                }
            };
            self.state.external_force[i] = force;
            a.extension = match &self.contact {
                // the constraint holds exactly rather than up to rounding
                ContactModel::Clamped {
                    tip_position,
                    bilateral,
                } if *bilateral || force > 0.0 => tip_position[i],
                _ => g * a.volume - c * force,
            };
            a.pressure = elastic[i] - self.state.relaxation[i]
                + damping_pressure(a.flow, &cfg.damping)
                + cfg.transmission.at(i, a.volume, self.bend) * force;
        }
    }

    /// Noisy pressure and extension reading. Deterministic given the seed
    /// and the sequence of calls.
    pub fn measure(&mut self) -> Measurement {
        let n = self.actuator_count();
        let mut pressure = self.state.pressures();
        let mut extension = self.state.extensions();
        if self.config.noise.enabled {
            for i in 0..n {
                let fraction = self.state.actuators[i].volume / self.config.v_max;
                let (sx, sp) = self.config.noise.sigma_at(fraction);
                let zp: f64 = StandardNormal.sample(&mut self.rng);
                let zx: f64 = StandardNormal.sample(&mut self.rng);
                pressure[i] += sp * zp;
                extension[i] += sx * zx;
            }
        }
        Measurement {
            pressure,
            extension,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64) -> ActuatorVector {
        ActuatorVector::from_slice(&[x])
    }

    #[test]
    fn free_rest_pressure_is_elastic() {
        let plant = Plant::new(PlantConfig::sfa(), &v(2.0)).unwrap();
        assert_relative_eq!(plant.state().actuators[0].pressure, 86.62, epsilon = 1e-12);
        assert_eq!(plant.state().external_force[0], 0.0);
    }

    #[test]
    fn deadweight_adds_transmitted_pressure() {
        let mut plant = Plant::new(PlantConfig::sfa(), &v(2.0)).unwrap();
        plant
            .set_contact(ContactModel::Deadweight { load: v(2.0) })
            .unwrap();
        plant.step(&v(0.0), 0.004).unwrap();
        assert_relative_eq!(plant.state().actuators[0].pressure, 183.62, epsilon = 1e-9);
        // extension shortened by c_f·f
        assert_relative_eq!(plant.state().actuators[0].extension, 18.0, epsilon = 1e-12);
    }

    #[test]
    fn clamped_injection_converts_volume_to_force() {
        let cfg = PlantConfig::sfa();
        let (g, c) = (cfg.extension_gain, cfg.axial_compliance);
        let mut plant = Plant::new(cfg, &v(2.0)).unwrap();
        plant.clamp_at_current_extension(true).unwrap();
        for _ in 0..125 {
            plant.step(&v(1.0), 0.004).unwrap();
        }
        let s = plant.state();
        assert_relative_eq!(s.actuators[0].volume, 2.5, epsilon = 1e-12);
        assert_relative_eq!(s.external_force[0], 0.5 * g / c, epsilon = 1e-9);
        assert!((s.actuators[0].extension - g * 2.0).abs() <= 1e-9);
    }

    #[test]
    fn unilateral_clamp_releases() {
        let mut plant = Plant::new(PlantConfig::sfa(), &v(2.0)).unwrap();
        plant.clamp_at_current_extension(false).unwrap();
        plant.step(&v(-5.0), 0.01).unwrap();
        assert_eq!(plant.state().external_force[0], 0.0);
        assert!(plant.state().actuators[0].extension < 20.0);
        let mut bilateral = Plant::new(PlantConfig::sfa(), &v(2.0)).unwrap();
        bilateral.clamp_at_current_extension(true).unwrap();
        bilateral.step(&v(-5.0), 0.01).unwrap();
        assert!(bilateral.state().external_force[0] < 0.0);
    }

    #[test]
    fn volume_is_clamped_to_range() {
        let mut plant = Plant::new(PlantConfig::sfa(), &v(3.49)).unwrap();
        plant.step(&v(5.0), 0.01).unwrap();
        assert_eq!(plant.state().actuators[0].volume, 3.5);
        assert_relative_eq!(plant.state().actuators[0].flow, 1.0, epsilon = 1e-9);
        let mut plant = Plant::new(PlantConfig::sfa(), &v(0.01)).unwrap();
        plant.step(&v(-5.0), 0.01).unwrap();
        assert_eq!(plant.state().actuators[0].volume, 0.0);
    }

    #[test]
    fn rejects_bad_steps() {
        let mut plant = Plant::new(PlantConfig::sfa(), &v(1.0)).unwrap();
        assert_eq!(plant.step(&v(0.0), 0.0).unwrap_err(), PlantError::Timestep(0.0));
        assert_eq!(plant.step(&v(0.0), 0.02).unwrap_err(), PlantError::Timestep(0.02));
        assert_eq!(
            plant.step(&v(f64::NAN), 0.004).unwrap_err(),
            PlantError::NonFiniteFlow
        );
        assert!(matches!(
            plant.step(&ActuatorVector::zeros(3), 0.004),
            Err(PlantError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn noise_off_measures_truth() {
        let mut plant = Plant::new(PlantConfig::sfa(), &v(2.0)).unwrap();
        let m = plant.measure();
        assert_eq!(m.pressure, plant.state().pressures());
        assert_eq!(m.extension, plant.state().extensions());
    }

    #[test]
    fn relaxation_lowers_pressure_over_time() {
        let mut cfg = PlantConfig::sfa();
        cfg.relaxation.enabled = true;
        let mut plant = Plant::new(cfg, &v(3.0)).unwrap();
        let p0 = plant.state().actuators[0].pressure;
        for _ in 0..2500 {
            plant.step(&v(0.0), 0.004).unwrap();
        }
        let p1 = plant.state().actuators[0].pressure;
        // after 10 s: R = ρ·K·V·(1 − e^{−1/3}) approximately
        let expected = 0.05 * 43.31 * 3.0 * (1.0 - (-10.0f64 / 30.0).exp());
        assert!(p1 < p0);
        assert!(((p0 - p1) - expected).abs() < 0.01, "{}", p0 - p1);
    }

    #[test]
    fn config_validation_names_field() {
        let mut cfg = PlantConfig::sfa();
        cfg.relaxation.ratio = 1.0;
        assert!(matches!(
            cfg.validate(),
            Err(PlantError::InvalidConfig { field: "relaxation.ratio", .. })
        ));
        let mut cfg = PlantConfig::sfa();
        cfg.v_max = 0.0;
        assert!(matches!(
            cfg.validate(),
            Err(PlantError::InvalidConfig { field: "v_max", .. })
        ));
    }

    #[test]
    fn transmission_profile_interpolates() {
        let mut t = Transmission::flat(v(48.5));
        assert_eq!(t.at(0, 1.0, 0.0), 48.5);
        t.volume_profile = vec![[1.0, 2.0], [3.0, 1.0]];
        assert_eq!(t.profile_factor(0.0), 2.0);
        assert_eq!(t.profile_factor(2.0), 1.5);
        assert_eq!(t.profile_factor(9.0), 1.0);
        t.bend_sensitivity = 0.1;
        assert_relative_eq!(t.at(0, 3.0, -1.0), 48.5 * 1.1, epsilon = 1e-12);
    }
}
