//! JSON scenario files.
//!
//! Matrices are nested row-major arrays. Only `plant` is required for
//! transfer-function work; simulation additionally needs
//! `reference_model`, `weights` and `command`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptive_law::{AdaptiveGains, GainWeights};
use crate::command::CommandSpec;
use crate::error::Error;
use crate::linalg::{from_rows, to_rows};
use crate::lti::{StateSpace, TransferFunction};
use crate::passivity::{synthesize_pfc, PfcDesign};
use crate::reference_model::RefModelConfig;
use crate::scenarios;
use crate::sim::{InitialState, Scenario, SimSettings};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfConfig {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfcConfig {
    pub compensator: TfConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefModelSection {
    pub am: Rows,
    pub bm: Rows,
    pub cm: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lv: Option<Rows>,
}

/// A scalar stands for that multiple of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Matrix(Rows),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Fallback for any block not given explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_pe: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ie: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_px: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ix: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_pu: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_iu: Option<Weight>,
    pub sigma: f64,
    #[serde(default)]
    pub leak_all: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfc: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_ie: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_ix: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_iu: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub plant: SystemConfig,
    /// Drives the plant input; its states follow the plant's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuator: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfc: Option<PfcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_model: Option<RefModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandSpec>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateConfig>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed JSON or a field of the wrong shape.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed but inconsistent or incomplete.
    Invalid(Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                column,
                message,
            } => {
                write!(
                    f,
                    "config parse error at line {line}, column {column}: {message}"
                )
            }
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError::Invalid(e)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn missing(section: &str) -> ConfigError {
    ConfigError::Invalid(Error::InvalidParameter(format!(
        "config has no '{section}' section"
    )))
}

fn matrix(name: &str, rows: &Rows) -> Result<DMatrix<f64>> {
    from_rows(rows).map_err(|e| ConfigError::Invalid(Error::Dimension(format!("{name}: {e}"))))
}

fn system(section: &str, s: &SystemConfig) -> Result<StateSpace> {
    let a = matrix(&format!("{section}.a"), &s.a)?;
    let b = matrix(&format!("{section}.b"), &s.b)?;
    let c = matrix(&format!("{section}.c"), &s.c)?;
    let sys = match &s.d {
        Some(d) => StateSpace::with_feedthrough(a, b, c, matrix(&format!("{section}.d"), d)?)?,
        None => StateSpace::new(a, b, c)?,
    };
    Ok(sys)
}

fn names(s: &SystemConfig, n: usize, prefix: &str) -> Vec<String> {
    s.state_names
        .clone()
        .unwrap_or_else(|| (1..=n).map(|i| format!("{prefix}{i}")).collect())
}

fn weight(w: &Option<Weight>, fallback: Option<f64>, n: usize, name: &str) -> Result<DMatrix<f64>> {
    match w {
        Some(Weight::Scalar(g)) => Ok(DMatrix::identity(n, n) * *g),
        Some(Weight::Matrix(rows)) => matrix(name, rows),
        None => fallback
            .map(|g| DMatrix::identity(n, n) * g)
            .ok_or_else(|| {
                ConfigError::Invalid(Error::InvalidParameter(format!("weights.{name} missing")))
            }),
    }
}

fn export_weight(m: &DMatrix<f64>) -> Weight {
    let g = m[(0, 0)];
    if *m == DMatrix::identity(m.nrows(), m.ncols()) * g {
        Weight::Scalar(g)
    } else {
        Weight::Matrix(to_rows(m))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// The plant (cascaded with the actuator when present) and its state
    /// names.
    pub fn plant_model(&self) -> Result<(StateSpace, Vec<String>)> {
        let plant = system("plant", &self.plant)?;
        let mut state_names = names(&self.plant, plant.nstates(), "x");
        let model = match &self.actuator {
            Some(act) => {
                let act_sys = system("actuator", act)?;
                state_names.extend(names(act, act_sys.nstates(), "a"));
                plant.driven_by(&act_sys)?
            }
            None => plant,
        };
        if state_names.len() != model.nstates() {
            return Err(Error::Dimension(format!(
                "{} state names for {} states",
                state_names.len(),
                model.nstates()
            ))
            .into());
        }
        Ok((model, state_names))
    }

    pub fn pfc_design(&self) -> Result<Option<PfcDesign>> {
        self.pfc
            .as_ref()
            .map(|p| {
                let c = TransferFunction::from_coeffs(&p.compensator.num, &p.compensator.den)?;
                Ok(synthesize_pfc(&c)?)
            })
            .transpose()
    }

    pub fn reference(&self) -> Result<RefModelConfig> {
        let r = self
            .reference_model
            .as_ref()
            .ok_or_else(|| missing("reference_model"))?;
        let lv =
            r.lv.as_ref()
                .map(|lv| matrix("reference_model.lv", lv))
                .transpose()?;
        Ok(RefModelConfig::new(
            matrix("reference_model.am", &r.am)?,
            matrix("reference_model.bm", &r.bm)?,
            matrix("reference_model.cm", &r.cm)?,
            lv,
        )?)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let (plant, state_names) = self.plant_model()?;
        let pfc = self.pfc_design()?;
        let reference = self.reference()?;
        let w = self.weights.as_ref().ok_or_else(|| missing("weights"))?;
        let command = self.command.clone().ok_or_else(|| missing("command"))?;
        let (m, n_m, m_m) = (plant.noutputs(), reference.nstates(), reference.ninputs());
        let weights = GainWeights {
            gamma_pe: weight(&w.gamma_pe, w.gamma, m, "gamma_pe")?,
            gamma_ie: weight(&w.gamma_ie, w.gamma, m, "gamma_ie")?,
            gamma_px: weight(&w.gamma_px, w.gamma, n_m, "gamma_px")?,
            gamma_ix: weight(&w.gamma_ix, w.gamma, n_m, "gamma_ix")?,
            gamma_pu: weight(&w.gamma_pu, w.gamma, m_m, "gamma_pu")?,
            gamma_iu: weight(&w.gamma_iu, w.gamma, m_m, "gamma_iu")?,
            sigma: w.sigma,
            leak_all: w.leak_all,
        }
        .validated()?;
        let mut scenario = Scenario::at_rest(
            self.name.clone(),
            plant,
            pfc,
            reference,
            weights,
            command,
            self.sim,
        )?
        .with_state_names(state_names)?;
        if let Some(init) = &self.initial_state {
            let i = &mut scenario.initial;
            let vec = |v: &Option<Vec<f64>>, dflt: &DVector<f64>| {
                v.as_ref()
                    .map_or_else(|| dflt.clone(), |v| DVector::from_vec(v.clone()))
            };
            let mat = |v: &Option<Rows>, dflt: &DMatrix<f64>, name| {
                v.as_ref()
                    .map_or_else(|| Ok(dflt.clone()), |r| matrix(name, r))
            };
            *i = InitialState {
                plant: vec(&init.plant, &i.plant),
                pfc: vec(&init.pfc, &i.pfc),
                reference: vec(&init.reference, &i.reference),
                gains: AdaptiveGains {
                    k_ie: mat(&init.k_ie, &i.gains.k_ie, "initial_state.k_ie")?,
                    k_ix: mat(&init.k_ix, &i.gains.k_ix, "initial_state.k_ix")?,
                    k_iu: mat(&init.k_iu, &i.gains.k_iu, "initial_state.k_iu")?,
                },
            };
            scenario.validate()?;
        }
        Ok(scenario)
    }

    /// Config describing `s`, with the plant written as one system.
    pub fn from_scenario(s: &Scenario) -> Self {
        let w = &s.weights;
        let i = &s.initial;
        let at_rest = i.plant.iter().all(|&x| x == 0.0)
            && i.pfc.iter().all(|&x| x == 0.0)
            && i.reference.iter().all(|&x| x == 0.0)
            && i.gains
                .k_ie
                .iter()
                .chain(i.gains.k_ix.iter())
                .chain(i.gains.k_iu.iter())
                .all(|&x| x == 0.0);
        ScenarioConfig {
            name: s.name.clone(),
            plant: SystemConfig {
                a: to_rows(s.plant.a()),
                b: to_rows(s.plant.b()),
                c: to_rows(s.plant.c()),
                d: None,
                state_names: Some(s.state_names.clone()),
            },
            actuator: None,
            pfc: s.pfc.as_ref().map(|p| PfcConfig {
                compensator: TfConfig {
                    num: p.compensator.num.coeffs().to_vec(),
                    den: p.compensator.den.coeffs().to_vec(),
                },
            }),
            reference_model: Some(RefModelSection {
                am: to_rows(s.reference.am()),
                bm: to_rows(s.reference.bm()),
                cm: to_rows(s.reference.cm()),
                lv: s.reference.lv().map(to_rows),
            }),
            weights: Some(WeightsConfig {
                gamma: None,
                gamma_pe: Some(export_weight(&w.gamma_pe)),
                gamma_ie: Some(export_weight(&w.gamma_ie)),
                gamma_px: Some(export_weight(&w.gamma_px)),
                gamma_ix: Some(export_weight(&w.gamma_ix)),
                gamma_pu: Some(export_weight(&w.gamma_pu)),
                gamma_iu: Some(export_weight(&w.gamma_iu)),
                sigma: w.sigma,
                leak_all: w.leak_all,
            }),
            command: Some(s.command.clone()),
            sim: s.sim,
            initial_state: (!at_rest).then(|| InitialStateConfig {
                plant: Some(i.plant.as_slice().to_vec()),
                pfc: Some(i.pfc.as_slice().to_vec()),
                reference: Some(i.reference.as_slice().to_vec()),
                k_ie: Some(to_rows(&i.gains.k_ie)),
                k_ix: Some(to_rows(&i.gains.k_ix)),
                k_iu: Some(to_rows(&i.gains.k_iu)),
            }),
        }
    }
}

/// The built-in scenarios as configs, with the lateral model and the
/// actuator kept as separate sections.
pub fn default_configs() -> Vec<ScenarioConfig> {
    let lateral = scenarios::lateral_model();
    let actuator = scenarios::actuator_model();
    let section = |sys: &StateSpace, names: &[&str]| SystemConfig {
        a: to_rows(sys.a()),
        b: to_rows(sys.b()),
        c: to_rows(sys.c()),
        d: None,
        state_names: Some(names.iter().map(|s| s.to_string()).collect()),
    };
    scenarios::default_scenarios()
        .all()
        .into_iter()
        .map(|s| {
            let mut cfg = ScenarioConfig::from_scenario(s);
            cfg.plant = section(&lateral, &scenarios::LATERAL_STATE_NAMES);
            cfg.actuator = Some(section(&actuator, &scenarios::ACTUATOR_STATE_NAMES));
            cfg
        })
        .collect()
}
