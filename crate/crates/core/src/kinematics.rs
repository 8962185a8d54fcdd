//! Geometric maps: constant-curvature SFA poses and the force-only wrench
//! transform `H` between actuator space and the Cartesian tip frame.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinAlgError};
use crate::types::ActuatorVector;

/// Tolerance on `‖u_i‖ = 1`.
const UNIT_TOLERANCE: f64 = 1e-12;
/// Below this bend angle the arc is evaluated by its Taylor series.
const SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("actuator direction {index} has norm {norm}, expected a unit vector")]
    NotUnit { index: usize, norm: f64 },
    #[error("geometry needs at least one actuator")]
    Empty,
    #[error("{directions} directions but {attachments} attachment points")]
    AttachmentCount { directions: usize, attachments: usize },
    #[error("uncontrollable geometry: rank(H) = {rank}, need {required}")]
    Uncontrollable { rank: usize, required: usize },
    #[error("force vector has {found} entries, transform expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid arc: length {length} mm, bend {bend} rad")]
    InvalidArc { length: f64, bend: f64 },
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// Actuator directions (and attachment points) of a parallel assembly,
/// expressed in the tip frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SeeGeometry {
    directions: Vec<Vector3<f64>>,
    attachments: Vec<Vector3<f64>>,
}

impl SeeGeometry {
    pub fn new(
        directions: Vec<Vector3<f64>>,
        attachments: Vec<Vector3<f64>>,
    ) -> Result<Self, KinematicsError> {
        if directions.is_empty() {
            return Err(KinematicsError::Empty);
        }
        if directions.len() != attachments.len() {
            return Err(KinematicsError::AttachmentCount {
                directions: directions.len(),
                attachments: attachments.len(),
            });
        }
        for (index, u) in directions.iter().enumerate() {
            let norm = u.norm();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(KinematicsError::NotUnit { index, norm });
            }
        }
        Ok(Self {
            directions,
            attachments,
        })
    }

    /// One actuator along the tip-frame z axis.
    pub fn single_axis() -> Self {
        Self {
            directions: vec![Vector3::z()],
            attachments: vec![Vector3::zeros()],
        }
    }

    /// `count` actuators evenly spaced on a circle of `radius` mm, each
    /// tilted outward from the vertical by `tilt` rad.
    pub fn symmetric(count: usize, radius: f64, tilt: f64, azimuth_offset: f64) -> Self {
        let (st, ct) = tilt.sin_cos();
        let (directions, attachments) = (0..count)
            .map(|i| {
                let phi = azimuth_offset + std::f64::consts::TAU * i as f64 / count as f64;
                let (sp, cp) = phi.sin_cos();
                (
                    Vector3::new(st * cp, st * sp, ct).normalize(),
                    Vector3::new(radius * cp, radius * sp, 0.0),
                )
            })
            .unzip();
        Self {
            directions,
            attachments,
        }
    }

    /// Three actuators at 120° on a 25 mm circle, tilted 15° outward.
    pub fn default_see() -> Self {
        Self::symmetric(3, 25.0, 15f64.to_radians(), 0.0)
    }

    pub fn actuator_count(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    /// Attachment points in mm; only needed for moments, which are not used.
    pub fn attachments(&self) -> &[Vector3<f64>] {
        &self.attachments
    }
}

/// Config-file description of a geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub count: usize,
    pub radius_mm: f64,
    pub tilt_deg: f64,
    pub azimuth_offset_deg: f64,
    /// Explicit unit directions; overrides the symmetric layout when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<[f64; 3]>>,
}

impl GeometryConfig {
    pub fn single_axis() -> Self {
        Self {
            count: 1,
            radius_mm: 0.0,
            tilt_deg: 0.0,
            azimuth_offset_deg: 0.0,
            directions: None,
        }
    }

    pub fn default_see() -> Self {
        Self {
            count: 3,
            radius_mm: 25.0,
            tilt_deg: 15.0,
            azimuth_offset_deg: 0.0,
            directions: None,
        }
    }

    pub fn to_geometry(&self) -> Result<SeeGeometry, KinematicsError> {
        match &self.directions {
            Some(dirs) => {
                let directions: Vec<Vector3<f64>> =
                    dirs.iter().map(|d| Vector3::new(d[0], d[1], d[2])).collect();
                let attachments = vec![Vector3::zeros(); directions.len()];
                SeeGeometry::new(directions, attachments)
            }
            None if self.count == 0 => Err(KinematicsError::Empty),
            None if self.count == 1 && self.tilt_deg == 0.0 => Ok(SeeGeometry::single_axis()),
            None => Ok(SeeGeometry::symmetric(
                self.count,
                self.radius_mm,
                self.tilt_deg.to_radians(),
                self.azimuth_offset_deg.to_radians(),
            )),
        }
    }
}

/// `3 x n` map from actuator-space forces to the Cartesian tip force, with
/// its (pseudo-)inverse cached.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchTransform {
    h: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl WrenchTransform {
    pub fn from_matrix(h: DMatrix<f64>) -> Result<Self, KinematicsError> {
        if h.nrows() != 3 {
            return Err(LinAlgError::NotThreeRows(h.nrows()).into());
        }
        let required = h.ncols().min(3);
        let rank = linalg::numerical_rank(&h);
        if rank < required {
            return Err(KinematicsError::Uncontrollable { rank, required });
        }
        let inverse = linalg::invert_transform(&h)?;
        Ok(Self { h, inverse })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn actuator_count(&self) -> usize {
        self.h.ncols()
    }

    /// `f_cart = H · f_act`.
    pub fn actuator_to_cartesian(&self, f_act: &ActuatorVector) -> Result<Vector3<f64>, KinematicsError> {
        if f_act.len() != self.actuator_count() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.actuator_count(),
                found: f_act.len(),
            });
        }
        let v = &self.h * f_act.as_dvector();
        Ok(Vector3::new(v[0], v[1], v[2]))
    }

    /// `f_act = H⁻¹ · f_cart` (or `H⁺ · f_cart`).
    pub fn cartesian_to_actuator(&self, f_cart: &Vector3<f64>) -> ActuatorVector {
        let f = nalgebra::DVector::from_column_slice(f_cart.as_slice());
        ActuatorVector::from(&self.inverse * f)
    }
}

/// Column `j` of `H` is the unit direction of actuator `j`.
pub fn build_wrench_transform(geometry: &SeeGeometry) -> Result<WrenchTransform, KinematicsError> {
    let n = geometry.actuator_count();
    let h = DMatrix::from_fn(3, n, |r, c| geometry.directions[c][r]);
    WrenchTransform::from_matrix(h)
}

/// Tip pose of a constant-curvature actuator in its bending plane.
///
/// `position.x` is the in-plane lateral offset, `position.z` the axial
/// coordinate; `y` is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipPose {
    pub position: Vector3<f64>,
    pub tangent: Vector3<f64>,
}

impl TipPose {
    /// `(lateral, axial)` in mm.
    pub fn in_plane(&self) -> (f64, f64) {
        (self.position.x, self.position.z)
    }
}

/// Tip of a circular arc of length `arc_length` (mm) bent by `bend` (rad).
pub fn constant_curvature_pose(arc_length: f64, bend: f64) -> Result<TipPose, KinematicsError> {
    if !(arc_length > 0.0) || !arc_length.is_finite() || !(bend.abs() < std::f64::consts::TAU) {
        return Err(KinematicsError::InvalidArc {
            length: arc_length,
            bend,
        });
    }
    let (lateral, axial) = if bend.abs() < SMALL_ANGLE {
        // L(1 − cos α)/α ≈ Lα/2, L sin α/α ≈ L(1 − α²/6)
        (
            arc_length * bend / 2.0,
            arc_length * (1.0 - bend * bend / 6.0),
        )
    } else {
        let radius = arc_length / bend;
        let half = (bend / 2.0).sin();
        (radius * 2.0 * half * half, radius * bend.sin())
    };
    Ok(TipPose {
        position: Vector3::new(lateral, 0.0, axial),
        tangent: Vector3::new(bend.sin(), 0.0, bend.cos()),
    })
}
