//! Built-in MAV roll-attitude scenarios (150 mm KH2013A lateral model).

use nalgebra::DMatrix;

use crate::adaptive_law::GainWeights;
use crate::command::CommandSpec;
use crate::error::Result;
use crate::lti::{StateSpace, TransferFunction};
use crate::passivity::synthesize_pfc;
use crate::reference_model::RefModelConfig;
use crate::sim::{Scenario, SimSettings};

pub const LATERAL_STATE_NAMES: [&str; 4] = ["v", "p", "r", "phi"];
pub const ACTUATOR_STATE_NAMES: [&str; 2] = ["delta_r", "delta_r_dot"];

pub const GAMMA: f64 = 10.0;
pub const SIGMA: f64 = 5.0;
pub const CLSAC_LV: f64 = 20.0;
pub const SWEEP_LV: [f64; 3] = [10.0, 50.0, 100.0];
/// Ten degrees.
pub const COMMAND_AMPLITUDE: f64 = 0.1745;
pub const COMMAND_PERIOD: f64 = 20.0;

const A_LP: [f64; 16] = [
    -3.34, 1.93, -7.55, 7.82, //
    -40.5, -2.22, 2.48, 0.0, //
    234.0, -2.84, -27.0, 0.0, //
    0.0, 1.0, 0.268, 0.0,
];
const B_LP: [f64; 4] = [-8.41, 59.7, 793.0, 0.0];

const A_P: [f64; 36] = [
    -3.34, 1.93, -7.55, 7.82, -8.41, 0.0, //
    -40.5, -2.22, 2.48, 0.0, 59.7, 0.0, //
    234.0, -2.84, -27.0, 0.0, 793.0, 0.0, //
    0.0, 1.0, 0.268, 0.0, 0.0, 0.0, //
    0.0, 0.0, 0.0, 0.0, 0.0, 1.0, //
    0.0, 0.0, 0.0, 0.0, -2367.0, -72.22,
];

fn ss(n: usize, a: &[f64], b: &[f64], c: &[f64]) -> StateSpace {
    StateSpace::new(
        DMatrix::from_row_slice(n, n, a),
        DMatrix::from_row_slice(n, 1, b),
        DMatrix::from_row_slice(1, n, c),
    )
    .expect("built-in model dimensions")
}

/// Rudder to roll angle, states `[v, p, r, phi]`.
pub fn lateral_model() -> StateSpace {
    ss(4, &A_LP, &B_LP, &[0.0, 0.0, 0.0, 1.0])
}

/// Rudder command to rudder deflection, states `[delta_r, delta_r_dot]`.
pub fn actuator_model() -> StateSpace {
    ss(2, &[0.0, 1.0, -2367.0, -72.22], &[0.0, 2367.0], &[1.0, 0.0])
}

/// Lateral model with actuator, six states.
pub fn build_augmented_plant() -> StateSpace {
    ss(
        6,
        &A_P,
        &[0.0, 0.0, 0.0, 0.0, 0.0, 2367.0],
        &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    )
}

pub fn state_names() -> Vec<String> {
    LATERAL_STATE_NAMES
        .iter()
        .chain(ACTUATOR_STATE_NAMES.iter())
        .map(|s| s.to_string())
        .collect()
}

/// `C(s) = (4s + 40) / 10`.
pub fn compensator() -> TransferFunction {
    TransferFunction::from_coeffs(&[4.0, 40.0], &[10.0]).expect("non-zero denominator")
}

/// `dx = -5 x + 5 u`, `y = x`, with optional output-error gain.
pub fn reference_model(lv: Option<f64>) -> RefModelConfig {
    let m1 = |x| DMatrix::from_element(1, 1, x);
    RefModelConfig::new(m1(-5.0), m1(5.0), m1(1.0), lv.map(m1)).expect("Hurwitz reference model")
}

/// MAV scenario with the given command, settings and output-error gain.
pub fn mav_scenario(
    name: &str,
    lv: Option<f64>,
    command: CommandSpec,
    sim: SimSettings,
) -> Result<Scenario> {
    let pfc = synthesize_pfc(&compensator())?;
    let weights = GainWeights::uniform(GAMMA, SIGMA, 1, 1, 1)?;
    Scenario::at_rest(
        name,
        build_augmented_plant(),
        Some(pfc),
        reference_model(lv),
        weights,
        command,
        sim,
    )?
    .with_state_names(state_names())
}

pub fn square_command() -> CommandSpec {
    CommandSpec::square(COMMAND_AMPLITUDE, COMMAND_PERIOD)
}

#[derive(Debug, Clone)]
pub struct DefaultScenarios {
    pub sac: Scenario,
    pub clsac: Scenario,
    pub lv_sweep: Vec<Scenario>,
}

impl DefaultScenarios {
    /// Every scenario, sweep last.
    pub fn all(&self) -> Vec<&Scenario> {
        let mut v = vec![&self.sac, &self.clsac];
        v.extend(self.lv_sweep.iter());
        v
    }
}

pub fn default_scenarios() -> DefaultScenarios {
    let build = |name: &str, lv| {
        mav_scenario(name, lv, square_command(), SimSettings::default()).expect("built-in scenario")
    };
    DefaultScenarios {
        sac: build("mav_sac", None),
        clsac: build("mav_clsac", Some(CLSAC_LV)),
        lv_sweep: SWEEP_LV
            .iter()
            .map(|&lv| build(&format!("mav_clsac_lv{lv}"), Some(lv)))
            .collect(),
    }
}
