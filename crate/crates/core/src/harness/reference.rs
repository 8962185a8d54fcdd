//! Hardware results of the reference SFA and SEE, for side-by-side output.

/// Initial inflations of the step experiments, fractions of `v_max`.
pub const STEP_INFLATIONS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

/// SFA demands, N.
pub const SFA_DEMANDS: [f64; 4] = [0.0, 2.0, 4.0, 6.0];

/// SFA steady-state error, N; rows follow [`STEP_INFLATIONS`], columns
/// [`SFA_DEMANDS`].
pub const SFA_STEADY_STATE: [[f64; 4]; 4] = [
    [0.48, 0.20, 0.13, 0.74],
    [0.67, 0.36, 0.26, 0.59],
    [0.27, 0.35, 0.18, 0.61],
    [0.93, 0.55, 0.18, 1.02],
];

/// SEE lateral demands (x and y), N.
pub const SEE_LATERAL_DEMANDS: [f64; 5] = [-5.0, -2.5, 0.0, 2.5, 5.0];

/// SEE axial demands, N.
pub const SEE_AXIAL_DEMANDS: [f64; 5] = [0.0, 3.75, 7.5, 11.25, 15.0];

/// SEE steady-state error in x, N.
pub const SEE_STEADY_STATE_X: [[f64; 5]; 4] = [
    [1.66, 0.98, 0.47, 0.55, 1.56],
    [1.52, 0.94, 0.36, 0.84, 1.12],
    [1.53, 0.89, 0.31, 0.65, 1.11],
    [1.56, 0.57, 0.39, 0.72, 0.73],
];

/// SEE steady-state error in y, N.
pub const SEE_STEADY_STATE_Y: [[f64; 5]; 4] = [
    [1.05, 0.80, 0.43, 0.57, 0.57],
    [1.39, 0.78, 0.41, 0.56, 0.60],
    [1.45, 0.96, 0.35, 0.73, 0.82],
    [0.87, 0.40, 0.37, 0.43, 0.36],
];

/// SEE steady-state error in z, N.
pub const SEE_STEADY_STATE_Z: [[f64; 5]; 4] = [
    [0.59, 0.72, 1.10, 1.54, 2.10],
    [0.56, 0.66, 1.02, 1.32, 1.64],
    [0.48, 0.65, 0.91, 1.24, 1.54],
    [0.49, 0.65, 0.82, 1.00, 1.11],
];

/// Mean x error per inflation row.
pub const SEE_ROW_MEAN_X: [f64; 4] = [1.04, 0.96, 0.90, 0.79];

/// Quasi-static validation: mean absolute error and its spread, N.
pub const QUASISTATIC_MEAN_ERROR: f64 = 0.56;
pub const QUASISTATIC_ERROR_SPREAD: f64 = 0.66;

/// Linearised transmission above 2.5 ml and its spread, kPa/N.
pub const TRANSMISSION: f64 = 48.5;
pub const TRANSMISSION_SPREAD: f64 = 3.25;

/// Force uncertainty implied by the mean pressure repeatability, N.
pub const FORCE_UNCERTAINTY: f64 = 0.06;

fn lookup<const C: usize>(rows: &[f64], cols: &[f64; C], table: &[[f64; C]], row: f64, col: f64) -> Option<f64> {
    let r = rows.iter().position(|&x| (x - row).abs() < 1e-9)?;
    let c = cols.iter().position(|&x| (x - col).abs() < 1e-9)?;
    Some(table[r][c])
}

/// Hardware steady-state error for an SFA cell, if the cell was measured.
pub fn sfa_reference(inflation: f64, demand: f64) -> Option<f64> {
    lookup(&STEP_INFLATIONS, &SFA_DEMANDS, &SFA_STEADY_STATE, inflation, demand)
}

/// Hardware steady-state error for an SEE cell; `axis` is 0, 1 or 2.
pub fn see_reference(axis: usize, inflation: f64, demand: f64) -> Option<f64> {
    match axis {
        0 => lookup(&STEP_INFLATIONS, &SEE_LATERAL_DEMANDS, &SEE_STEADY_STATE_X, inflation, demand),
        1 => lookup(&STEP_INFLATIONS, &SEE_LATERAL_DEMANDS, &SEE_STEADY_STATE_Y, inflation, demand),
        2 => lookup(&STEP_INFLATIONS, &SEE_AXIAL_DEMANDS, &SEE_STEADY_STATE_Z, inflation, demand),
        _ => None,
    }
}
