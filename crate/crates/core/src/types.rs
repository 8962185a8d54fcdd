//! Domain value types.
//!
//! All stored quantities use fixed units: volume in ml, pressure in kPa,
//! force in N, flow in ml/s, length in mm, time in s and angles in rad.
//! Conversions (degrees, percentages) happen at I/O boundaries only.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("stiffness matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("stiffness matrix rows have unequal lengths")]
    Ragged,
    #[error("stiffness diagonal entry {index} must be strictly positive, got {value}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// State of a single actuator at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Fluid volume, ml.
    pub volume: f64,
    /// Actual flow into the actuator, ml/s.
    pub flow: f64,
    /// Hydraulic pressure, kPa.
    pub pressure: f64,
    /// Axial extension, mm.
    pub extension: f64,
}

/// Per-actuator quantity (pressures, volumes, flows, axial forces).
///
/// The length is fixed by the owning system: 1 for a single SFA, 3 for the SEE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActuatorVector(DVector<f64>);

impl ActuatorVector {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_element(n: usize, value: f64) -> Self {
        Self(DVector::from_element(n, value))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Checks that `self` has length `n`.
    pub fn expect_len(&self, n: usize) -> Result<(), DomainError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(DomainError::DimensionMismatch {
                expected: n,
                found: self.len(),
            })
        }
    }

    /// Elementwise `self ⊘ rhs`.
    pub fn component_div(&self, rhs: &ActuatorVector) -> Self {
        Self(self.0.component_div(&rhs.0))
    }

    /// Elementwise `self ⊙ rhs`.
    pub fn component_mul(&self, rhs: &ActuatorVector) -> Self {
        Self(self.0.component_mul(&rhs.0))
    }

    pub fn sub(&self, rhs: &ActuatorVector) -> Self {
        Self(&self.0 - &rhs.0)
    }

    pub fn add(&self, rhs: &ActuatorVector) -> Self {
        Self(&self.0 + &rhs.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(&self.0 * k)
    }
}

impl From<DVector<f64>> for ActuatorVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl From<Vec<f64>> for ActuatorVector {
    fn from(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }
}

impl From<ActuatorVector> for Vec<f64> {
    fn from(v: ActuatorVector) -> Self {
        v.0.as_slice().to_vec()
    }
}

impl From<ActuatorVector> for DVector<f64> {
    fn from(v: ActuatorVector) -> Self {
        v.0
    }
}

impl FromIterator<f64> for ActuatorVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        iter.into_iter().collect::<Vec<_>>().into()
    }
}

impl Index<usize> for ActuatorVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ActuatorVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for ActuatorVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Volumetric stiffness `K_V` in kPa/ml; `n x n` for coupled actuators.
///
/// Diagonal entries are always strictly positive. Diagonal dominance is
/// expected for physical systems but only reported, never enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StiffnessMatrix(DMatrix<f64>);

impl StiffnessMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, DomainError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(DomainError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::NonFinite("stiffness matrix"));
        }
        for i in 0..matrix.nrows() {
            let d = matrix[(i, i)];
            if d <= 0.0 {
                return Err(DomainError::NonPositiveDiagonal { index: i, value: d });
            }
        }
        Ok(Self(matrix))
    }

    /// Single-actuator stiffness.
    pub fn scalar(k: f64) -> Result<Self, DomainError> {
        Self::new(DMatrix::from_element(1, 1, k))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DomainError> {
        Self::try_from(rows.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Elastic pressure `K·V`.
    pub fn apply(&self, volume: &ActuatorVector) -> ActuatorVector {
        ActuatorVector(&self.0 * volume.as_dvector())
    }

    /// `|k_ii| > Σ_{j≠i} |k_ij|` for every row.
    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.dim()).all(|i| {
            let off: f64 = (0..self.dim())
                .filter(|&j| j != i)
                .map(|j| self.0[(i, j)].abs())
                .sum();
            self.0[(i, i)].abs() > off
        })
    }
}

impl TryFrom<Vec<Vec<f64>>> for StiffnessMatrix {
    type Error = DomainError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != rows.first().map_or(0, Vec::len)) {
            return Err(DomainError::Ragged);
        }
        let cols = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(n, cols, &flat))
    }
}

impl From<StiffnessMatrix> for Vec<Vec<f64>> {
    fn from(k: StiffnessMatrix) -> Self {
        k.0.row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}
