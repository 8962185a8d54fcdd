use serde::{Deserialize, Serialize};

/// One row of the state-uncertainty table: standard deviations of the
/// extension and pressure readings at a given volume fraction `V/V_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRow {
    pub fraction: f64,
    pub sigma_x_mm: f64,
    pub sigma_p_kpa: f64,
}

/// Gaussian measurement noise with volume-dependent magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub enabled: bool,
    pub table: Vec<NoiseRow>,
}

/// Repeatability of the reference SFA over 500 randomised repetitions,
/// at volume fractions k/7.
pub const STATE_UNCERTAINTY: [(f64, f64); 8] = [
    (0.15, 3.12),
    (0.22, 3.81),
    (0.25, 4.02),
    (0.29, 4.01),
    (0.24, 3.30),
    (0.19, 2.49),
    (0.14, 2.01),
    (0.12, 0.88),
];

impl NoiseModel {
    pub fn state_uncertainty_table() -> Vec<NoiseRow> {
        STATE_UNCERTAINTY
            .iter()
            .enumerate()
            .map(|(k, &(sx, sp))| NoiseRow {
                fraction: k as f64 / 7.0,
                sigma_x_mm: sx,
                sigma_p_kpa: sp,
            })
            .collect()
    }

    /// Measured repeatability table, disabled.
    pub fn off() -> Self {
        Self {
            enabled: false,
            table: Self::state_uncertainty_table(),
        }
    }

    /// Measured repeatability table, enabled.
    pub fn measured() -> Self {
        Self {
            enabled: true,
            table: Self::state_uncertainty_table(),
        }
    }

    /// Same σ at every volume.
    pub fn constant(sigma_x_mm: f64, sigma_p_kpa: f64) -> Self {
        Self {
            enabled: true,
            table: vec![
                NoiseRow { fraction: 0.0, sigma_x_mm, sigma_p_kpa },
                NoiseRow { fraction: 1.0, sigma_x_mm, sigma_p_kpa },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.table.is_empty() {
            return Err("table must not be empty".into());
        }
        for row in &self.table {
            if !(0.0..=1.0).contains(&row.fraction) {
                return Err(format!("fraction {} outside [0, 1]", row.fraction));
            }
            if !(row.sigma_x_mm >= 0.0 && row.sigma_p_kpa >= 0.0)
                || !row.sigma_x_mm.is_finite()
                || !row.sigma_p_kpa.is_finite()
            {
                return Err("standard deviations must be finite and non-negative".into());
            }
        }
        if self.table.windows(2).any(|w| w[1].fraction <= w[0].fraction) {
            return Err("fractions must be strictly increasing".into());
        }
        Ok(())
    }

    /// `(σ_x, σ_P)` linearly interpolated at `fraction`, clamped to the table ends.
    pub fn sigma_at(&self, fraction: f64) -> (f64, f64) {
        let t = &self.table;
        let first = t[0];
        let last = t[t.len() - 1];
        if fraction <= first.fraction {
            return (first.sigma_x_mm, first.sigma_p_kpa);
        }
        if fraction >= last.fraction {
            return (last.sigma_x_mm, last.sigma_p_kpa);
        }
        let i = t.partition_point(|r| r.fraction <= fraction);
        let (a, b) = (t[i - 1], t[i]);
        let w = (fraction - a.fraction) / (b.fraction - a.fraction);
        (
            a.sigma_x_mm + w * (b.sigma_x_mm - a.sigma_x_mm),
            a.sigma_p_kpa + w * (b.sigma_p_kpa - a.sigma_p_kpa),
        )
    }

    /// Mean of the tabulated pressure σ.
    pub fn mean_sigma_pressure(&self) -> f64 {
        self.table.iter().map(|r| r.sigma_p_kpa).sum::<f64>() / self.table.len() as f64
    }
}
