//! Fixed-step simulation of the adaptive loop.
//!
//! The monolithic state is `[x_p; x_pfc; x_ref; x_ol; vec K_Ie; vec K_Ix;
//! vec K_Iu]`. `x_ref` is the model the controller follows (open-loop for
//! SAC, closed-loop for CL-SAC) and `x_ol` is an open-loop copy kept for
//! the deviation metrics.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptive_law::{
    control_with, integral_gain_derivatives, proportional_gains, AdaptiveGains, GainWeights,
    ProportionalGains,
};
use crate::cgt::IdealGains;
use crate::command::CommandSpec;
use crate::error::{Error, Result};
use crate::integrator::{rk4_step, step_count};
use crate::lti::StateSpace;
use crate::passivity::PfcDesign;
use crate::reference_model::RefModelConfig;
use crate::trace::{SimTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    Sac,
    ClSac,
}

impl Controller {
    pub fn as_str(self) -> &'static str {
        match self {
            Controller::Sac => "sac",
            Controller::ClSac => "clsac",
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Controller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sac" => Ok(Controller::Sac),
            "clsac" | "cl-sac" => Ok(Controller::ClSac),
            other => Err(Error::InvalidParameter(format!(
                "unknown controller '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every `decimate`-th record when writing traces.
    #[serde(default = "default_decimate")]
    pub decimate: usize,
}

fn default_decimate() -> usize {
    1
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dt: 1e-3,
            t_final: 40.0,
            decimate: 1,
        }
    }
}

impl SimSettings {
    pub fn steps(&self) -> usize {
        step_count(self.t_final, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub plant: DVector<f64>,
    pub pfc: DVector<f64>,
    pub reference: DVector<f64>,
    pub gains: AdaptiveGains,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: StateSpace,
    pub state_names: Vec<String>,
    pub pfc: Option<PfcDesign>,
    pub reference: RefModelConfig,
    pub weights: GainWeights,
    pub command: CommandSpec,
    pub sim: SimSettings,
    pub initial: InitialState,
}

impl Scenario {
    /// Assembles a scenario at rest: zero states and zero integral gains.
    /// Plant states are named `x1, x2, ...`.
    pub fn at_rest(
        name: impl Into<String>,
        plant: StateSpace,
        pfc: Option<PfcDesign>,
        reference: RefModelConfig,
        weights: GainWeights,
        command: CommandSpec,
        sim: SimSettings,
    ) -> Result<Self> {
        let nd = pfc.as_ref().map_or(0, |p| p.realization.nstates());
        let initial = InitialState {
            plant: DVector::zeros(plant.nstates()),
            pfc: DVector::zeros(nd),
            reference: DVector::zeros(reference.nstates()),
            gains: AdaptiveGains::zeros(plant.noutputs(), reference.nstates(), reference.ninputs()),
        };
        let scenario = Scenario {
            name: name.into(),
            state_names: (1..=plant.nstates()).map(|i| format!("x{i}")).collect(),
            plant,
            pfc,
            reference,
            weights,
            command,
            sim,
            initial,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_state_names(mut self, names: Vec<String>) -> Result<Self> {
        self.state_names = names;
        self.validate()?;
        Ok(self)
    }

    /// Same scenario with the closed-loop gain replaced.
    pub fn with_lv(&self, lv: Option<DMatrix<f64>>) -> Result<Self> {
        let mut s = self.clone();
        s.reference = self.reference.with_lv(lv)?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.sim;
        if !(sim.dt > 0.0) || !sim.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                sim.dt
            )));
        }
        if !(sim.t_final >= sim.dt) || !sim.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_final must be at least dt, got {}",
                sim.t_final
            )));
        }
        if sim.decimate == 0 {
            return Err(Error::InvalidParameter(
                "decimate must be at least 1".into(),
            ));
        }
        self.command.validate()?;

        let (m, p) = (self.plant.noutputs(), self.plant.ninputs());
        if m != p {
            return Err(Error::Dimension(format!(
                "plant must be square, got {p} inputs and {m} outputs"
            )));
        }
        if self.reference.noutputs() != m {
            return Err(Error::Dimension(format!(
                "reference model has {} outputs, plant has {m}",
                self.reference.noutputs()
            )));
        }
        if let Some(pfc) = &self.pfc {
            let r = &pfc.realization;
            if r.ninputs() != p || r.noutputs() != m {
                return Err(Error::Dimension(format!(
                    "feedforward is {}x{}, plant is {m}x{p}",
                    r.noutputs(),
                    r.ninputs()
                )));
            }
        }
        if self.plant.has_feedthrough() {
            return Err(Error::InvalidParameter(
                "plant must be strictly proper".into(),
            ));
        }
        let (n_m, m_m) = (self.reference.nstates(), self.reference.ninputs());
        self.weights.check_dims(m, n_m, m_m)?;
        if self.state_names.len() != self.plant.nstates() {
            return Err(Error::Dimension(format!(
                "{} state names for {} plant states",
                self.state_names.len(),
                self.plant.nstates()
            )));
        }
        let nd = self.pfc.as_ref().map_or(0, |p| p.realization.nstates());
        let init = &self.initial;
        let g = &init.gains;
        if init.plant.len() != self.plant.nstates()
            || init.pfc.len() != nd
            || init.reference.len() != n_m
            || g.k_ie.shape() != (m, m)
            || g.k_ix.shape() != (m, n_m)
            || g.k_iu.shape() != (m, m_m)
        {
            return Err(Error::Dimension(
                "initial state does not match the scenario".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    np: usize,
    nd: usize,
    nm: usize,
    m: usize,
    mm: usize,
    pfc: usize,
    reference: usize,
    ol: usize,
    gains: usize,
    len: usize,
}

impl Layout {
    fn of(s: &Scenario) -> Self {
        let np = s.plant.nstates();
        let nd = s.pfc.as_ref().map_or(0, |p| p.realization.nstates());
        let nm = s.reference.nstates();
        let m = s.plant.noutputs();
        let mm = s.reference.ninputs();
        let pfc = np;
        let reference = pfc + nd;
        let ol = reference + nm;
        let gains = ol + nm;
        let len = gains + m * m + m * nm + m * mm;
        Layout {
            np,
            nd,
            nm,
            m,
            mm,
            pfc,
            reference,
            ol,
            gains,
            len,
        }
    }
}

struct Signals {
    u_m: DVector<f64>,
    y_p: DVector<f64>,
    y_aug: DVector<f64>,
    y_ref: DVector<f64>,
    y_ol: DVector<f64>,
    e: DVector<f64>,
    u_p: DVector<f64>,
    gains: AdaptiveGains,
    prop: ProportionalGains,
}

struct Engine<'a> {
    s: &'a Scenario,
    lay: Layout,
    lv: Option<&'a DMatrix<f64>>,
}

impl<'a> Engine<'a> {
    fn new(s: &'a Scenario, controller: Controller) -> Result<Self> {
        s.validate()?;
        let lv = match controller {
            Controller::Sac => None,
            Controller::ClSac => Some(s.reference.lv().ok_or(Error::ClosedLoopGainMissing)?),
        };
        Ok(Engine {
            s,
            lay: Layout::of(s),
            lv,
        })
    }

    fn initial_state(&self) -> DVector<f64> {
        let l = self.lay;
        let init = &self.s.initial;
        let mut x = DVector::zeros(l.len);
        x.rows_mut(0, l.np).copy_from(&init.plant);
        x.rows_mut(l.pfc, l.nd).copy_from(&init.pfc);
        x.rows_mut(l.reference, l.nm).copy_from(&init.reference);
        x.rows_mut(l.ol, l.nm).copy_from(&init.reference);
        init.gains.write_to(&mut x.as_mut_slice()[l.gains..]);
        x
    }

    fn signals(&self, t: f64, x: &DVector<f64>, u_prev: &DVector<f64>) -> Signals {
        let (s, l) = (self.s, self.lay);
        let x_p = x.rows(0, l.np);
        let x_ref = x.rows(l.reference, l.nm).into_owned();
        let x_ol = x.rows(l.ol, l.nm).into_owned();
        let u_m = s.command.value_vec(t, l.mm);
        let y_p = s.plant.c() * x_p;
        let mut y_aug = y_p.clone();
        if let Some(pfc) = &s.pfc {
            let r = &pfc.realization;
            y_aug += r.c() * x.rows(l.pfc, l.nd) + r.d() * u_prev;
        }
        let y_ref = s.reference.output(&x_ref);
        let y_ol = s.reference.output(&x_ol);
        let e = &y_ref - &y_aug;
        let gains = AdaptiveGains::read_from(&x.as_slice()[l.gains..], l.m, l.nm, l.mm);
        let prop = proportional_gains(&e, &x_ref, &u_m, &self.s.weights);
        let u_p = control_with(&e, &x_ref, &u_m, &gains, &prop);
        Signals {
            u_m,
            y_p,
            y_aug,
            y_ref,
            y_ol,
            e,
            u_p,
            gains,
            prop,
        }
    }

    fn derivative(&self, t: f64, x: &DVector<f64>, u_prev: &DVector<f64>) -> DVector<f64> {
        let (s, l) = (self.s, self.lay);
        let sig = self.signals(t, x, u_prev);
        let x_ref = x.rows(l.reference, l.nm).into_owned();
        let x_ol = x.rows(l.ol, l.nm).into_owned();
        let mut dx = DVector::zeros(l.len);

        let dxp = s.plant.a() * x.rows(0, l.np) + s.plant.b() * &sig.u_p;
        dx.rows_mut(0, l.np).copy_from(&dxp);
        if let Some(pfc) = &s.pfc {
            let r = &pfc.realization;
            let dxd = r.a() * x.rows(l.pfc, l.nd) + r.b() * &sig.u_p;
            dx.rows_mut(l.pfc, l.nd).copy_from(&dxd);
        }
        let am = s.reference.am();
        let bm = s.reference.bm();
        let mut dref = am * &x_ref + bm * &sig.u_m;
        if let Some(lv) = self.lv {
            dref -= lv * (&sig.y_ref - &sig.y_aug);
        }
        dx.rows_mut(l.reference, l.nm).copy_from(&dref);
        dx.rows_mut(l.ol, l.nm)
            .copy_from(&(am * &x_ol + bm * &sig.u_m));

        let dg = integral_gain_derivatives(&sig.e, &x_ref, &sig.u_m, &sig.gains, &s.weights);
        dg.write_to(&mut dx.as_mut_slice()[l.gains..]);
        dx
    }

    fn record(&self, t: f64, x: &DVector<f64>, sig: Signals) -> TraceRecord {
        let l = self.lay;
        TraceRecord {
            t,
            u_m: sig.u_m,
            y_m_ol: sig.y_ol,
            y_mo: sig.y_ref,
            y_p: sig.y_p,
            y_aug: sig.y_aug,
            e: sig.e,
            u_p: sig.u_p,
            x_p: x.rows(0, l.np).into_owned(),
            x_pfc: x.rows(l.pfc, l.nd).into_owned(),
            x_m: x.rows(l.reference, l.nm).into_owned(),
            gains: sig.gains,
            prop: sig.prop,
        }
    }
}

/// Runs `scenario` under `controller` and returns the full-rate trace.
///
/// The feedforward feedthrough `d0 u_p` uses the control from the previous
/// step, which is exact when `d0 = 0`.
pub fn run(scenario: &Scenario, controller: Controller) -> Result<SimTrace> {
    let engine = Engine::new(scenario, controller)?;
    let dt = scenario.sim.dt;
    let steps = scenario.sim.steps();
    let mut x = engine.initial_state();
    let mut u_prev = DVector::zeros(engine.lay.m);
    let mut records = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let sig = engine.signals(t, &x, &u_prev);
        if !sig.u_p.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { t });
        }
        let u_now = sig.u_p.clone();
        records.push(engine.record(t, &x, sig));
        if k == steps {
            break;
        }
        u_prev = u_now;
        x = rk4_step(|tt, xx| engine.derivative(tt, xx, &u_prev), &x, t, dt)?;
    }
    Ok(SimTrace {
        scenario: scenario.name.clone(),
        controller,
        dt,
        state_names: scenario.state_names.clone(),
        records,
    })
}

/// Plant and model outputs under the ideal control
/// `u* = S21 x_m + S22 u_m` from `x_p(0) = S11 x_m(0) + S12 u_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealRun {
    pub time: Vec<f64>,
    pub y_p: Vec<DVector<f64>>,
    pub y_m: Vec<DVector<f64>>,
}

impl IdealRun {
    /// Largest `|y_p - y_m|` entry over the run.
    pub fn max_output_gap(&self) -> f64 {
        self.y_p
            .iter()
            .zip(&self.y_m)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

pub fn run_ideal_control(
    plant: &StateSpace,
    reference: &RefModelConfig,
    s: &IdealGains,
    command: &CommandSpec,
    x_m0: &DVector<f64>,
    sim: &SimSettings,
) -> Result<IdealRun> {
    command.validate()?;
    if !command.is_constant() {
        return Err(Error::InvalidParameter(
            "ideal trajectories hold for constant commands only".into(),
        ));
    }
    let (np, nm) = (plant.nstates(), reference.nstates());
    if x_m0.len() != nm {
        return Err(Error::Dimension(format!(
            "x_m(0) has {} entries, expected {nm}",
            x_m0.len()
        )));
    }
    let u_m = command.value_vec(0.0, reference.ninputs());
    let x_p0 = &s.s11 * x_m0 + &s.s12 * &u_m;
    if x_p0.len() != np {
        return Err(Error::Dimension(
            "S11 does not map model states to plant states".into(),
        ));
    }
    let mut x = DVector::zeros(np + nm);
    x.rows_mut(0, np).copy_from(&x_p0);
    x.rows_mut(np, nm).copy_from(x_m0);

    let f = |_t: f64, z: &DVector<f64>| {
        let xp = z.rows(0, np);
        let xm = z.rows(np, nm);
        let u = &s.s21 * xm + &s.s22 * &u_m;
        let mut dz = DVector::zeros(np + nm);
        dz.rows_mut(0, np)
            .copy_from(&(plant.a() * xp + plant.b() * u));
        dz.rows_mut(np, nm)
            .copy_from(&(reference.am() * xm + reference.bm() * &u_m));
        dz
    };

    let steps = sim.steps();
    let mut out = IdealRun {
        time: Vec::with_capacity(steps + 1),
        y_p: Vec::with_capacity(steps + 1),
        y_m: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let t = k as f64 * sim.dt;
        out.time.push(t);
        out.y_p.push(plant.c() * x.rows(0, np));
        out.y_m.push(reference.cm() * x.rows(np, nm));
        if k < steps {
            x = rk4_step(f, &x, t, sim.dt)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn first_order(command: CommandSpec, lv: Option<f64>) -> Scenario {
        let plant = StateSpace::new(m1(-1.0), m1(1.0), m1(1.0)).unwrap();
        let reference = RefModelConfig::new(m1(-5.0), m1(5.0), m1(1.0), lv.map(m1)).unwrap();
        let weights = GainWeights::uniform(10.0, 5.0, 1, 1, 1).unwrap();
        let sim = SimSettings {
            dt: 1e-2,
            t_final: 2.0,
            decimate: 1,
        };
        Scenario::at_rest("toy", plant, None, reference, weights, command, sim).unwrap()
    }

    #[test]
    fn controller_parse() {
        assert_eq!("sac".parse::<Controller>().unwrap(), Controller::Sac);
        assert_eq!("CLSAC".parse::<Controller>().unwrap(), Controller::ClSac);
        assert!("pid".parse::<Controller>().is_err());
    }

    #[test]
    fn record_count_and_grid() {
        let trace = run(&first_order(CommandSpec::step(1.0), None), Controller::Sac).unwrap();
        assert_eq!(trace.records.len(), 201);
        for (k, r) in trace.records.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 1e-2);
        }
    }

    #[test]
    fn zero_command_stays_at_rest() {
        for c in [Controller::Sac, Controller::ClSac] {
            let trace = run(&first_order(CommandSpec::constant(0.0), Some(20.0)), c).unwrap();
            for r in &trace.records {
                assert_eq!(r.u_p[0], 0.0);
                assert_eq!(r.y_p[0], 0.0);
                assert_eq!(r.e[0], 0.0);
                assert_eq!(r.gains.k_ie[(0, 0)], 0.0);
            }
        }
    }

    #[test]
    fn clsac_requires_gain() {
        let s = first_order(CommandSpec::step(1.0), None);
        assert_eq!(
            run(&s, Controller::ClSac).unwrap_err(),
            Error::ClosedLoopGainMissing
        );
    }

    #[test]
    fn sac_reference_matches_open_loop_copy() {
        let trace = run(
            &first_order(CommandSpec::step(1.0), Some(20.0)),
            Controller::Sac,
        )
        .unwrap();
        assert!(trace.records.iter().all(|r| r.y_mo == r.y_m_ol));
    }

    #[test]
    fn invalid_settings_rejected() {
        let mut s = first_order(CommandSpec::step(1.0), None);
        s.sim.dt = 0.0;
        assert!(s.validate().is_err());
        let mut s = first_order(CommandSpec::step(1.0), None);
        s.sim.t_final = 1e-3;
        assert!(s.validate().is_err());
        let mut s = first_order(CommandSpec::step(1.0), None);
        s.initial.plant = DVector::zeros(3);
        assert!(s.validate().is_err());
    }

    #[test]
    fn divergence_reported() {
        let plant = StateSpace::new(m1(400.0), m1(1.0), m1(1.0)).unwrap();
        let reference = RefModelConfig::new(m1(-5.0), m1(5.0), m1(1.0), None).unwrap();
        let weights = GainWeights::uniform(1e-6, 5.0, 1, 1, 1).unwrap();
        let sim = SimSettings {
            dt: 1e-2,
            t_final: 10.0,
            decimate: 1,
        };
        let mut s = Scenario::at_rest(
            "unstable",
            plant,
            None,
            reference,
            weights,
            CommandSpec::constant(0.0),
            sim,
        )
        .unwrap();
        s.initial.plant[0] = 1.0;
        assert!(matches!(
            run(&s, Controller::Sac),
            Err(Error::Divergence { .. })
        ));
    }
}
