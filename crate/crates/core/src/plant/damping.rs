use serde::{Deserialize, Serialize};

/// Pressure offset caused by flow through the fluid lines, in kPa.
///
/// The piecewise form is discontinuous at `V̇ = 0` and at `threshold`;
/// each branch is evaluated exactly as written, including the negative
/// branch's offset at `V̇ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingLaw {
    Piecewise {
        /// kPa/(ml/s), applies for `V̇ ≤ 0`.
        slope_neg: f64,
        /// kPa, applies for `V̇ ≤ 0`.
        offset_neg: f64,
        /// kPa, applies for `0 < V̇ ≤ threshold`.
        plateau: f64,
        /// ml/s.
        threshold: f64,
        /// kPa/(ml/s), applies for `V̇ > threshold`.
        slope_pos: f64,
        /// kPa, applies for `V̇ > threshold`.
        offset_pos: f64,
    },
    Linear {
        /// kPa/(ml/s).
        coefficient: f64,
    },
}

impl DampingLaw {
    /// Identified three-branch law of the reference SFA.
    pub const fn piecewise_default() -> Self {
        DampingLaw::Piecewise {
            slope_neg: 3.00,
            offset_neg: -16.82,
            plateau: 13.1,
            threshold: 0.1,
            slope_pos: 1.66,
            offset_pos: 13.10,
        }
    }

    /// Linearised damping of the reference SFA, 4.46 kPa/(ml/s).
    pub const fn linear_default() -> Self {
        DampingLaw::Linear { coefficient: 4.46 }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            DampingLaw::Piecewise {
                slope_neg,
                offset_neg,
                plateau,
                threshold,
                slope_pos,
                offset_pos,
            } => [slope_neg, offset_neg, plateau, threshold, slope_pos, offset_pos]
                .iter()
                .all(|v| v.is_finite()),
            DampingLaw::Linear { coefficient } => coefficient.is_finite(),
        }
    }
}

impl Default for DampingLaw {
    fn default() -> Self {
        Self::linear_default()
    }
}

/// Damping pressure `P_d(V̇)` in kPa.
pub fn damping_pressure(flow: f64, law: &DampingLaw) -> f64 {
    match *law {
        DampingLaw::Piecewise {
            slope_neg,
            offset_neg,
            plateau,
            threshold,
            slope_pos,
            offset_pos,
        } => {
            if flow <= 0.0 {
                slope_neg * flow + offset_neg
            } else if flow <= threshold {
                plateau
            } else {
                slope_pos * flow + offset_pos
            }
        }
        DampingLaw::Linear { coefficient } => coefficient * flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn piecewise_branches() {
        let law = DampingLaw::piecewise_default();
        assert_relative_eq!(damping_pressure(1.0, &law), 14.76, epsilon = 1e-12);
        assert_eq!(damping_pressure(0.05, &law), 13.1);
        assert_eq!(damping_pressure(0.1, &law), 13.1);
        assert_relative_eq!(damping_pressure(-1.0, &law), -19.82, epsilon = 1e-12);
        assert_eq!(damping_pressure(0.0, &law), -16.82);
    }

    #[test]
    fn linear_law() {
        assert_relative_eq!(
            damping_pressure(1.0, &DampingLaw::linear_default()),
            4.46,
            epsilon = 1e-15
        );
        assert_eq!(damping_pressure(0.0, &DampingLaw::linear_default()), 0.0);
    }

    #[test]
    fn piecewise_is_finite_everywhere() {
        let law = DampingLaw::piecewise_default();
        for &v in &[-1e300, -5.0, -1e-300, 0.0, 1e-300, 0.1, 0.1000001, 5.0, 1e300] {
            assert!(damping_pressure(v, &law).is_finite());
        }
    }

    #[test]
    fn toml_tagged_form() {
        let law: DampingLaw = toml::from_str("kind = \"linear\"\ncoefficient = 2.0").unwrap();
        assert_eq!(law, DampingLaw::Linear { coefficient: 2.0 });
        let err = toml::from_str::<DampingLaw>("kind = \"linear\"\ncoefficient = 2.0\nfoo = 1").unwrap_err();
        assert!(err.to_string().contains("foo"));
    }
}
