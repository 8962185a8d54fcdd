//! Intrinsic force estimators in actuator space and their Cartesian mapping.
//!
//! * static: `f = (P − P_baseline) ⊘ T`, baseline captured at the current inflation
//! * quasi-static: `f = (P − K·V) ⊘ T`
//! * dynamic: `f = (P − K·V − P_d(V̇)) ⊘ T`

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{KinematicsError, WrenchTransform};
use crate::plant::{damping_pressure, DampingLaw, PlantConfig};
use crate::types::{ActuatorVector, StiffnessMatrix};

pub const MIN_BASELINE_SAMPLES: usize = 10;
/// Larger per-actuator spread than this means the system had not settled.
pub const MAX_BASELINE_SPREAD_KPA: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("baseline needs at least {MIN_BASELINE_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("baseline spread {spread:.2} kPa on actuator {actuator} exceeds {MAX_BASELINE_SPREAD_KPA} kPa; system not settled")]
    Unsettled { actuator: usize, spread: f64 },
    #[error("static estimation requires a captured baseline")]
    MissingBaseline,
    #[error("transmission entries must be positive")]
    NonPositiveTransmission,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    Static,
    QuasiStatic,
    Dynamic,
}

/// Calibrated quantities the estimators use.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    pub stiffness: StiffnessMatrix,
    pub damping: DampingLaw,
    /// kPa/N per actuator.
    pub transmission: ActuatorVector,
    pub baseline: Option<ActuatorVector>,
    pub mode: SensingMode,
}

impl SensingModel {
    pub fn new(
        stiffness: StiffnessMatrix,
        damping: DampingLaw,
        transmission: ActuatorVector,
        mode: SensingMode,
    ) -> Result<Self, SensingError> {
        if transmission.len() != stiffness.dim() {
            return Err(SensingError::DimensionMismatch {
                expected: stiffness.dim(),
                found: transmission.len(),
            });
        }
        if transmission.iter().any(|&t| !(t > 0.0)) {
            return Err(SensingError::NonPositiveTransmission);
        }
        Ok(Self {
            stiffness,
            damping,
            transmission,
            baseline: None,
            mode,
        })
    }

    /// Model identical to the plant's ground truth (nominal transmission).
    pub fn matched(plant: &PlantConfig, mode: SensingMode) -> Self {
        Self {
            stiffness: plant.stiffness.clone(),
            damping: plant.damping,
            transmission: plant.transmission.nominal.clone(),
            baseline: None,
            mode,
        }
    }

    pub fn with_baseline(mut self, baseline: ActuatorVector) -> Self {
        self.baseline = Some(baseline);
        self
    }

    pub fn actuator_count(&self) -> usize {
        self.stiffness.dim()
    }

    /// Pressure attributed to external load, in kPa, for the current mode.
    pub fn external_pressure(
        &self,
        pressure: &ActuatorVector,
        volume: &ActuatorVector,
        flow: &ActuatorVector,
    ) -> Result<ActuatorVector, SensingError> {
        self.check_len(pressure)?;
        match self.mode {
            SensingMode::Static => {
                let base = self.baseline.as_ref().ok_or(SensingError::MissingBaseline)?;
                Ok(pressure.sub(base))
            }
            SensingMode::QuasiStatic => {
                self.check_len(volume)?;
                Ok(pressure.sub(&self.stiffness.apply(volume)))
            }
            SensingMode::Dynamic => {
                self.check_len(volume)?;
                self.check_len(flow)?;
                let damping = flow.map(|q| damping_pressure(q, &self.damping));
                Ok(pressure.sub(&self.stiffness.apply(volume)).sub(&damping))
            }
        }
    }

    /// Actuator-space force for the model's mode.
    pub fn estimate(
        &self,
        pressure: &ActuatorVector,
        volume: &ActuatorVector,
        flow: &ActuatorVector,
    ) -> Result<ActuatorVector, SensingError> {
        Ok(self
            .external_pressure(pressure, volume, flow)?
            .component_div(&self.transmission))
    }

    fn check_len(&self, v: &ActuatorVector) -> Result<(), SensingError> {
        if v.len() == self.actuator_count() {
            Ok(())
        } else {
            Err(SensingError::DimensionMismatch {
                expected: self.actuator_count(),
                found: v.len(),
            })
        }
    }
}

/// Per-actuator mean of at-rest pressure samples.
pub fn capture_baseline(samples: &[ActuatorVector]) -> Result<ActuatorVector, SensingError> {
    if samples.len() < MIN_BASELINE_SAMPLES {
        return Err(SensingError::TooFewSamples(samples.len()));
    }
    let n = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(SensingError::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let count = samples.len() as f64;
    let mut mean = ActuatorVector::zeros(n);
    for s in samples {
        mean = mean.add(s);
    }
    let mean = mean.scale(1.0 / count);
    for i in 0..n {
        let var = samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (count - 1.0);
        let spread = var.sqrt();
        if spread > MAX_BASELINE_SPREAD_KPA {
            return Err(SensingError::Unsettled { actuator: i, spread });
        }
    }
    Ok(mean)
}

/// `f = (P − P_baseline) ⊘ T`.
pub fn estimate_static(pressure: &ActuatorVector, model: &SensingModel) -> Result<ActuatorVector, SensingError> {
    let base = model.baseline.as_ref().ok_or(SensingError::MissingBaseline)?;
    model.check_len(pressure)?;
    Ok(pressure.sub(base).component_div(&model.transmission))
}

/// `f = (P − K·V) ⊘ T`.
pub fn estimate_quasistatic(pressure: &ActuatorVector, volume: &ActuatorVector, model: &SensingModel) -> ActuatorVector {
    pressure
        .sub(&model.stiffness.apply(volume))
        .component_div(&model.transmission)
}

/// `f = (P − K·V − P_d(V̇)) ⊘ T`.
pub fn estimate_dynamic(
    pressure: &ActuatorVector,
    volume: &ActuatorVector,
    flow: &ActuatorVector,
    model: &SensingModel,
) -> ActuatorVector {
    let damping = flow.map(|q| damping_pressure(q, &model.damping));
    pressure
        .sub(&model.stiffness.apply(volume))
        .sub(&damping)
        .component_div(&model.transmission)
}

/// Force estimate in both spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceEstimate {
    pub actuator: ActuatorVector,
    pub cartesian: Vector3<f64>,
    pub timestamp: f64,
}

pub fn to_cartesian(
    f_act: ActuatorVector,
    transform: &WrenchTransform,
    timestamp: f64,
) -> Result<ForceEstimate, SensingError> {
    let cartesian = transform.actuator_to_cartesian(&f_act)?;
    Ok(ForceEstimate {
        actuator: f_act,
        cartesian,
        timestamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{build_wrench_transform, SeeGeometry};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn one(x: f64) -> ActuatorVector {
        ActuatorVector::from_slice(&[x])
    }

    fn sfa_model(mode: SensingMode) -> SensingModel {
        SensingModel::matched(&PlantConfig::sfa(), mode)
    }

    #[test]
    fn baseline_of_constant_samples() {
        let samples = vec![one(90.0); 100];
        assert_eq!(capture_baseline(&samples).unwrap(), one(90.0));
    }

    #[test]
    fn baseline_of_noisy_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(90.0, 3.12).unwrap();
        let samples: Vec<_> = (0..1000).map(|_| one(noise.sample(&mut rng))).collect();
        let b = capture_baseline(&samples).unwrap();
        assert!((b[0] - 90.0).abs() < 0.3);
    }

    #[test]
    fn baseline_preconditions() {
        assert_eq!(
            capture_baseline(&vec![one(90.0); 5]),
            Err(SensingError::TooFewSamples(5))
        );
        let wild: Vec<_> = (0..20).map(|i| one(if i % 2 == 0 { 80.0 } else { 100.0 })).collect();
        assert!(matches!(capture_baseline(&wild), Err(SensingError::Unsettled { .. })));
    }

    #[test]
    fn static_estimates() {
        let model = sfa_model(SensingMode::Static).with_baseline(one(100.0));
        assert_relative_eq!(estimate_static(&one(148.5), &model).unwrap()[0], 1.0, epsilon = 1e-12);
        assert_eq!(estimate_static(&one(100.0), &model).unwrap()[0], 0.0);
        assert_relative_eq!(estimate_static(&one(197.0), &model).unwrap()[0], 2.0, epsilon = 1e-12);
        assert_eq!(
            estimate_static(&one(1.0), &sfa_model(SensingMode::Static)),
            Err(SensingError::MissingBaseline)
        );
    }

    #[test]
    fn quasistatic_estimates() {
        let model = sfa_model(SensingMode::QuasiStatic);
        let f = estimate_quasistatic(&one(100.0), &one(2.0), &model);
        assert_relative_eq!(f[0], (100.0 - 86.62) / 48.5, epsilon = 1e-12);
        assert!((f[0] - 0.2759).abs() < 5e-5);
        let unloaded = estimate_quasistatic(&one(43.31 * 2.0), &one(2.0), &model);
        assert_eq!(unloaded[0], 0.0);
    }

    #[test]
    fn dynamic_estimates() {
        let model = sfa_model(SensingMode::Dynamic);
        let f = estimate_dynamic(&one(100.0), &one(2.0), &one(1.0), &model);
        assert_relative_eq!(f[0], (100.0 - 86.62 - 4.46) / 48.5, epsilon = 1e-12);
        assert!((f[0] - 0.1839).abs() < 5e-5);
        // reduces to the quasi-static estimate bitwise at zero flow
        let d = estimate_dynamic(&one(123.4), &one(2.7), &one(0.0), &model);
        let q = estimate_quasistatic(&one(123.4), &one(2.7), &model);
        assert_eq!(d[0].to_bits(), q[0].to_bits());
    }

    #[test]
    fn mode_dispatch() {
        let p = one(120.0);
        let v = one(2.0);
        let q = one(0.5);
        let dynamic = sfa_model(SensingMode::Dynamic);
        assert_eq!(dynamic.estimate(&p, &v, &q).unwrap(), estimate_dynamic(&p, &v, &q, &dynamic));
        let quasi = sfa_model(SensingMode::QuasiStatic);
        assert_eq!(quasi.estimate(&p, &v, &q).unwrap(), estimate_quasistatic(&p, &v, &quasi));
        assert!(sfa_model(SensingMode::Static).estimate(&p, &v, &q).is_err());
    }

    #[test]
    fn cartesian_mapping() {
        let single = build_wrench_transform(&SeeGeometry::single_axis()).unwrap();
        let est = to_cartesian(one(2.0), &single, 0.5).unwrap();
        assert_eq!(est.cartesian, Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(est.timestamp, 0.5);

        let see = build_wrench_transform(&SeeGeometry::default_see()).unwrap();
        let est = to_cartesian(ActuatorVector::from_element(3, 1.0), &see, 0.0).unwrap();
        assert!(est.cartesian.x.abs() < 1e-12 && est.cartesian.y.abs() < 1e-12);
        assert_relative_eq!(est.cartesian.z, 3.0 * 15f64.to_radians().cos(), epsilon = 1e-12);
        let zero = to_cartesian(ActuatorVector::zeros(3), &see, 0.0).unwrap();
        assert_eq!(zero.cartesian, Vector3::zeros());
    }

    #[test]
    fn rejects_non_positive_transmission() {
        let err = SensingModel::new(
            StiffnessMatrix::scalar(1.0).unwrap(),
            DampingLaw::linear_default(),
            one(0.0),
            SensingMode::QuasiStatic,
        );
        assert_eq!(err, Err(SensingError::NonPositiveTransmission));
    }

    #[test]
    fn plant_round_trip_deadweight() {
        let cfg = PlantConfig::sfa();
        let mut plant = crate::plant::Plant::new(cfg.clone(), &one(3.0)).unwrap();
        plant
            .set_contact(crate::plant::ContactModel::Deadweight { load: one(4.0) })
            .unwrap();
        let s = plant.state();
        let f = estimate_quasistatic(&s.pressures(), &s.volumes(), &SensingModel::matched(&cfg, SensingMode::QuasiStatic));
        assert!((f[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn plant_round_trip_constant_inflow() {
        for damping in [DampingLaw::linear_default(), DampingLaw::piecewise_default()] {
            let cfg = PlantConfig {
                damping,
                ..PlantConfig::sfa()
            };
            let model = SensingModel::matched(&cfg, SensingMode::Dynamic);
            let mut plant = crate::plant::Plant::new(cfg, &one(0.5)).unwrap();
            plant
                .set_contact(crate::plant::ContactModel::Deadweight { load: one(1.5) })
                .unwrap();
            for _ in 0..200 {
                let s = plant.step(&one(1.0), 0.004).unwrap();
                let f = model.estimate(&s.pressures(), &s.volumes(), &s.flows()).unwrap();
                assert!((f[0] - 1.5).abs() < 1e-9);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn quasistatic_is_linear_in_pressure(p in -200.0..400.0f64, dp in -100.0..100.0f64, v in 0.0..3.5f64) {
            let model = sfa_model(SensingMode::QuasiStatic);
            let a = estimate_quasistatic(&one(p + dp), &one(v), &model);
            let b = estimate_quasistatic(&one(p), &one(v), &model);
            let expected = ((p + dp) - 43.31 * v) / 48.5 - (p - 43.31 * v) / 48.5;
            proptest::prop_assert_eq!(a[0] - b[0], expected);
            proptest::prop_assert!((a[0] - b[0] - dp / 48.5).abs() < 1e-12);
        }

        #[test]
        fn dynamic_reduces_to_quasistatic_at_rest(p in -200.0..400.0f64, v in 0.0..3.5f64) {
            let model = sfa_model(SensingMode::Dynamic);
            let d = estimate_dynamic(&one(p), &one(v), &one(0.0), &model);
            let q = estimate_quasistatic(&one(p), &one(v), &model);
            proptest::prop_assert_eq!(d[0].to_bits(), q[0].to_bits());
        }

        #[test]
        fn matched_plant_is_recovered(load in 0.0..6.0f64, v in 2.5..3.5f64) {
            let cfg = PlantConfig::sfa();
            let mut plant = crate::plant::Plant::new(cfg.clone(), &one(v)).unwrap();
            plant.set_contact(crate::plant::ContactModel::Deadweight { load: one(load) }).unwrap();
            let s = plant.state();
            let f = estimate_quasistatic(&s.pressures(), &s.volumes(), &SensingModel::matched(&cfg, SensingMode::QuasiStatic));
            proptest::prop_assert!((f[0] - load).abs() < 1e-9);
        }
    }
}
