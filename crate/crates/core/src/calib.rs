//! Identification of the sensing model from recorded batches: volumetric
//! stiffness by least squares, the damping law from constant-flow
//! trajectories, and the force transmission.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{condition_number, solve_least_squares, LinAlgError};
use crate::plant::DampingLaw;
use crate::sensing::{SensingMode, SensingModel};
use crate::types::{ActuatorVector, DomainError, StiffnessMatrix};

pub const SCHEMA_VERSION: u32 = 1;
/// Stacked volume matrices worse conditioned than this are rejected.
pub const MAX_SAMPLE_CONDITION: f64 = 1e6;
pub const MIN_BRANCH_SAMPLES: usize = 10;
/// Allowed relative deviation of the actual from the nominal flow.
pub const FLOW_TOLERANCE: f64 = 0.05;
/// Fraction at the start of each damping trajectory that is discarded.
pub const DISCARD_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("sample {index} has {found} entries, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("degenerate sample spread: condition number {0:.3e} exceeds {MAX_SAMPLE_CONDITION:.0e}")]
    Degenerate(f64),
    #[error("damping trajectories must cover both flow signs")]
    OneSidedFlow,
    #[error("damping branch `{branch}` has {found} samples, need {MIN_BRANCH_SAMPLES}")]
    SparseBranch { branch: &'static str, found: usize },
    #[error("trajectory {index}: actual flow {actual:.4} ml/s deviates from {nominal} ml/s by more than 5%")]
    FlowMismatch { index: usize, nominal: f64, actual: f64 },
    #[error("trajectory {index}: {reason}")]
    BadTrajectory { index: usize, reason: String },
    #[error("transmission sample {index}: applied force must be positive, got {force}")]
    NonPositiveForce { index: usize, force: f64 },
    #[error("need samples at 3 or more volumes at or above {v_lin} ml, found {found}")]
    EmptyLinearRegion { v_lin: f64, found: usize },
    #[error("transmission grid cell (V={volume}, bend={bend}) has no samples")]
    IncompleteGrid { volume: f64, bend: f64 },
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u32),
    #[error("artifact parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("artifact serialisation error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Settled, unloaded pressure reading at a known volume vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessSample {
    pub volume: ActuatorVector,
    pub pressure: ActuatorVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessFit {
    pub stiffness: StiffnessMatrix,
    /// RMS of `K̂·V − P` over all samples and actuators, kPa.
    pub residual_rms: f64,
    pub samples: usize,
    pub diagonally_dominant: bool,
}

/// `K̂ = argmin Σ‖K·V_s − P_s‖²`, one least-squares problem per row of `K̂`.
pub fn calibrate_stiffness(samples: &[StiffnessSample]) -> Result<StiffnessFit, CalibError> {
    let n = samples.first().map_or(0, |s| s.volume.len());
    let needed = (2 * n).max(2);
    if samples.len() < needed {
        return Err(CalibError::TooFewSamples {
            needed,
            found: samples.len(),
        });
    }
    for (index, s) in samples.iter().enumerate() {
        for len in [s.volume.len(), s.pressure.len()] {
            if len != n {
                return Err(CalibError::DimensionMismatch {
                    index,
                    expected: n,
                    found: len,
                });
            }
        }
    }
    let m = samples.len();
    let a = DMatrix::from_fn(m, n, |r, c| samples[r].volume[c]);
    let condition = condition_number(&a);
    if !(condition <= MAX_SAMPLE_CONDITION) {
        return Err(CalibError::Degenerate(condition));
    }
    let mut k = DMatrix::zeros(n, n);
    for row in 0..n {
        let b = DVector::from_fn(m, |r, _| samples[r].pressure[row]);
        let x = solve_least_squares(&a, &b)?;
        k.row_mut(row).copy_from(&x.transpose());
    }
    let residual = &a * k.transpose() - DMatrix::from_fn(m, n, |r, c| samples[r].pressure[c]);
    let residual_rms = (residual.norm_squared() / (m * n) as f64).sqrt();
    let stiffness = StiffnessMatrix::new(k)?;
    let diagonally_dominant = stiffness.is_diagonally_dominant();
    if !diagonally_dominant {
        warn!("calibrated stiffness matrix is not diagonally dominant");
    }
    Ok(StiffnessFit {
        stiffness,
        residual_rms,
        samples: m,
        diagonally_dominant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    Inflate,
    Deflate,
}

/// Constant-flow record of a single actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingTrajectory {
    /// Nominal flow, ml/s.
    pub flow: f64,
    pub direction: FlowDirection,
    pub time: Vec<f64>,
    pub volume: Vec<f64>,
    pub pressure: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingFit {
    pub piecewise: DampingLaw,
    pub linear: DampingLaw,
    /// Retained samples in the negative, plateau and positive branches.
    pub branch_samples: [usize; 3],
}

/// `y ≈ a·x + b` by least squares; returns `(a, b)`.
fn line_fit(points: &[(f64, f64)]) -> Result<(f64, f64), CalibError> {
    let a = DMatrix::from_fn(points.len(), 2, |r, c| if c == 0 { points[r].0 } else { 1.0 });
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let x = solve_least_squares(&a, &b)?;
    Ok((x[0], x[1]))
}

/// Fits the three-branch law (boundary at `threshold`) and a linear
/// coefficient through the origin to the residual `P − K̂·V` of the second
/// half of every trajectory.
pub fn calibrate_damping(
    trajectories: &[DampingTrajectory],
    stiffness: &StiffnessMatrix,
    threshold: f64,
) -> Result<DampingFit, CalibError> {
    if stiffness.dim() != 1 {
        return Err(CalibError::DimensionMismatch {
            index: 0,
            expected: 1,
            found: stiffness.dim(),
        });
    }
    let k = stiffness.get(0, 0);
    let mut points = Vec::new();
    for (index, tr) in trajectories.iter().enumerate() {
        let bad = |reason: &str| CalibError::BadTrajectory {
            index,
            reason: reason.to_string(),
        };
        if tr.time.len() != tr.volume.len() || tr.time.len() != tr.pressure.len() {
            return Err(bad("time, volume and pressure lengths differ"));
        }
        if !tr.flow.is_finite() || tr.flow == 0.0 {
            return Err(bad("nominal flow must be finite and non-zero"));
        }
        let expected = if tr.flow > 0.0 {
            FlowDirection::Inflate
        } else {
            FlowDirection::Deflate
        };
        if tr.direction != expected {
            return Err(bad("direction disagrees with the sign of the flow"));
        }
        let start = (tr.time.len() as f64 * DISCARD_FRACTION).ceil() as usize;
        if tr.time.len() - start < 2 {
            return Err(bad("too short"));
        }
        for j in start + 1..tr.time.len() {
            let dt = tr.time[j] - tr.time[j - 1];
            if !(dt > 0.0) {
                return Err(bad("time must be strictly increasing"));
            }
            let actual = (tr.volume[j] - tr.volume[j - 1]) / dt;
            if (actual - tr.flow).abs() >= FLOW_TOLERANCE * tr.flow.abs() {
                return Err(CalibError::FlowMismatch {
                    index,
                    nominal: tr.flow,
                    actual,
                });
            }
        }
        for j in start..tr.time.len() {
            points.push((tr.flow, tr.pressure[j] - k * tr.volume[j]));
        }
    }
    if !points.iter().any(|p| p.0 > 0.0) || !points.iter().any(|p| p.0 < 0.0) {
        return Err(CalibError::OneSidedFlow);
    }

    let neg: Vec<_> = points.iter().copied().filter(|p| p.0 <= 0.0).collect();
    let plateau: Vec<_> = points
        .iter()
        .copied()
        .filter(|p| p.0 > 0.0 && p.0 <= threshold)
        .collect();
    let pos: Vec<_> = points.iter().copied().filter(|p| p.0 > threshold).collect();
    for (branch, set) in [("negative", &neg), ("plateau", &plateau), ("positive", &pos)] {
        if set.len() < MIN_BRANCH_SAMPLES {
            return Err(CalibError::SparseBranch {
                branch,
                found: set.len(),
            });
        }
    }
    let (slope_neg, offset_neg) = line_fit(&neg)?;
    let (slope_pos, offset_pos) = line_fit(&pos)?;
    let plateau_mean = plateau.iter().map(|p| p.1).sum::<f64>() / plateau.len() as f64;

    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();

    Ok(DampingFit {
        piecewise: DampingLaw::Piecewise {
            slope_neg,
            offset_neg,
            plateau: plateau_mean,
            threshold,
            slope_pos,
            offset_pos,
        },
        linear: DampingLaw::Linear {
            coefficient: sxy / sxx,
        },
        branch_samples: [neg.len(), plateau.len(), pos.len()],
    })
}

/// Pressure rise under a known axial load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionSample {
    /// ml.
    pub volume: f64,
    /// rad.
    pub bend: f64,
    /// N, positive.
    pub force: f64,
    /// kPa.
    pub pressure_rise: f64,
}

/// Mean `ΔP/f` on a `(volume, bend)` grid, kPa/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMap {
    pub volumes: Vec<f64>,
    pub bends: Vec<f64>,
    /// `values[i][j]` at `volumes[i]`, `bends[j]`.
    pub values: Vec<Vec<f64>>,
}

fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        return (0, 0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last, last, 0.0);
    }
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    (lo, hi, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

impl TransmissionMap {
    /// Bilinear interpolation, clamped to the grid.
    pub fn query(&self, volume: f64, bend: f64) -> f64 {
        let (i0, i1, s) = bracket(&self.volumes, volume);
        let (j0, j1, t) = bracket(&self.bends, bend);
        let v = &self.values;
        let a = v[i0][j0] * (1.0 - t) + v[i0][j1] * t;
        let b = v[i1][j0] * (1.0 - t) + v[i1][j1] * t;
        a * (1.0 - s) + b * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionFit {
    pub map: TransmissionMap,
    /// Mean ratio over samples with `V ≥ V_lin`, kPa/N.
    pub linear: f64,
    /// Sample standard deviation of those ratios, kPa/N.
    pub spread: f64,
    pub samples: usize,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    v
}

fn grid_index(grid: &[f64], x: f64) -> usize {
    grid.iter()
        .position(|&g| (g - x).abs() <= 1e-9)
        .expect("value taken from grid")
}

pub fn calibrate_transmission(samples: &[TransmissionSample], v_lin: f64) -> Result<TransmissionFit, CalibError> {
    for (index, s) in samples.iter().enumerate() {
        if !(s.force > 0.0) {
            return Err(CalibError::NonPositiveForce { index, force: s.force });
        }
    }
    let linear_region: Vec<f64> = samples
        .iter()
        .filter(|s| s.volume >= v_lin)
        .map(|s| s.pressure_rise / s.force)
        .collect();
    let region_volumes = distinct(samples.iter().filter(|s| s.volume >= v_lin).map(|s| s.volume));
    if region_volumes.len() < 3 {
        return Err(CalibError::EmptyLinearRegion {
            v_lin,
            found: region_volumes.len(),
        });
    }
    let count = linear_region.len() as f64;
    let linear = linear_region.iter().sum::<f64>() / count;
    let spread = if linear_region.len() > 1 {
        (linear_region.iter().map(|r| (r - linear).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
    } else {
        0.0
    };

    let volumes = distinct(samples.iter().map(|s| s.volume));
    let bends = distinct(samples.iter().map(|s| s.bend));
    let mut sums = vec![vec![(0.0, 0usize); bends.len()]; volumes.len()];
    for s in samples {
        let cell = &mut sums[grid_index(&volumes, s.volume)][grid_index(&bends, s.bend)];
        cell.0 += s.pressure_rise / s.force;
        cell.1 += 1;
    }
    let mut values = vec![vec![0.0; bends.len()]; volumes.len()];
    for (i, row) in sums.iter().enumerate() {
        for (j, &(sum, n)) in row.iter().enumerate() {
            if n == 0 {
                return Err(CalibError::IncompleteGrid {
                    volume: volumes[i],
                    bend: bends[j],
                });
            }
            values[i][j] = sum / n as f64;
        }
    }
    Ok(TransmissionFit {
        map: TransmissionMap { volumes, bends, values },
        linear,
        spread,
        samples: samples.len(),
    })
}

/// Where the artifact's numbers came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    pub seed: u64,
    pub stiffness_samples: usize,
    pub stiffness_residual_rms_kpa: f64,
    pub damping_samples: usize,
    pub transmission_samples: usize,
    pub transmission_spread_kpa_per_n: f64,
}

/// Persisted sensing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationArtifact {
    pub schema_version: u32,
    /// kPa/ml, row-major.
    pub stiffness: StiffnessMatrix,
    pub damping: DampingLaw,
    /// kPa/N per actuator.
    pub transmission: ActuatorVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission_map: Option<TransmissionMap>,
    pub provenance: Provenance,
}

impl CalibrationArtifact {
    pub fn to_toml(&self) -> Result<String, CalibError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, CalibError> {
        let artifact: Self = toml::from_str(text)?;
        if artifact.schema_version != SCHEMA_VERSION {
            return Err(CalibError::SchemaVersion(artifact.schema_version));
        }
        if artifact.transmission.len() != artifact.stiffness.dim() {
            return Err(CalibError::DimensionMismatch {
                index: 0,
                expected: artifact.stiffness.dim(),
                found: artifact.transmission.len(),
            });
        }
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibError> {
        std::fs::write(path, self.to_toml()?).map_err(|source| CalibError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CalibError> {
        let text = std::fs::read_to_string(path).map_err(|source| CalibError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn sensing_model(&self, mode: SensingMode) -> Result<SensingModel, crate::sensing::SensingError> {
        SensingModel::new(
            self.stiffness.clone(),
            self.damping,
            self.transmission.clone(),
            mode,
        )
    }
}
