use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use nalgebra::DMatrix;

use saclab::bounds::{bound_report, error_system_matrices, BoundReport};
use saclab::cgt::{solve_cgt_closedloop, solve_cgt_openloop, IdealGains};
use saclab::command::CommandSpec;
use saclab::config::{default_configs, ScenarioConfig};
use saclab::lti::{StateSpace, DEFAULT_STAB_MARGIN};
use saclab::passivity::{
    augment_plant, check_waspr_sufficient, gain_sweep_csv, gain_sweep_stability, log_spaced,
};
use saclab::sim::{self, run_ideal_control, Controller, Scenario, SimSettings};
use saclab::trace::{metrics, Metrics, SimTrace, TraceTable};

use crate::error::CliError;
use crate::{ConfigArg, SimArgs};

type Result<T> = std::result::Result<T, CliError>;

const SWEEP_POINTS: usize = 50;
const SWEEP_RANGE: (f64, f64) = (0.1, 1e4);
const ENERGY_SLACK: f64 = 1.05;
const IDEAL_RUN_SECONDS: f64 = 20.0;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn load_config(arg: &ConfigArg) -> Result<ScenarioConfig> {
    match &arg.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Ok(ScenarioConfig::from_json(&text)?)
        }
        None => Ok(default_configs()
            .into_iter()
            .find(|c| c.name == "mav_clsac")
            .expect("built-in CL-SAC scenario")),
    }
}

fn load_scenario(args: &SimArgs) -> Result<Scenario> {
    let mut scenario = load_config(&args.config)?.to_scenario()?;
    if let Some(dt) = args.dt {
        scenario.sim.dt = dt;
    }
    if let Some(t) = args.t_final {
        scenario.sim.t_final = t;
    }
    if let Some(d) = args.decimate {
        scenario.sim.decimate = d;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn write_trace(trace: &SimTrace, path: &Path, decimate: usize) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    trace
        .write_csv(std::io::BufWriter::new(file), decimate)
        .map_err(|e| io_err(path, e))
}

fn plant_hf_gain(s: &Scenario) -> Result<DMatrix<f64>> {
    let sys = match &s.pfc {
        Some(pfc) => s.plant.parallel(&pfc.realization)?,
        None => s.plant.clone(),
    };
    Ok(sys.c() * sys.b())
}

fn final_ke(trace: &SimTrace) -> Result<DMatrix<f64>> {
    let last = trace.records.last().ok_or(saclab::Error::EmptyTrace)?;
    Ok(&last.prop.k_pe + &last.gains.k_ie)
}

fn report_for(s: &Scenario, ke: &DMatrix<f64>) -> Result<BoundReport> {
    let (a_mm, a_mn) =
        error_system_matrices(&plant_hf_gain(s)?, ke, s.reference.cm(), s.reference.lv())?;
    let m = a_mm.nrows();
    Ok(bound_report(&a_mm, &a_mn, &DMatrix::identity(m, m))?)
}

fn fmt_row(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cols: Vec<String> = (0..m.ncols())
                .map(|j| format!("{:.8e}", m[(i, j)]))
                .collect();
            format!("[{}]", cols.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

pub fn tf(arg: &ConfigArg, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(arg)?;
    let (plant, _) = cfg.plant_model()?;
    if !plant.is_siso() {
        return Err(CliError::Validation(format!(
            "transfer functions need a SISO plant, got {} inputs and {} outputs",
            plant.ninputs(),
            plant.noutputs()
        )));
    }
    let t = plant.to_tf()?;
    let mut text = format!("T(s) {t}\n");
    if let Some(pfc) = cfg.pfc_design()? {
        let f = augment_plant(&t, &pfc.feedforward);
        let _ = writeln!(text, "C(s) {}", pfc.compensator);
        let _ = writeln!(text, "D(s) {}", pfc.feedforward);
        let _ = writeln!(text, "F(s) {}", f.tf);
    }
    print!("{text}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("tf.txt"), text.as_bytes())?;
    }
    Ok(())
}

fn print_check(label: &str, sys: &StateSpace) -> Result<()> {
    let check = check_waspr_sufficient(sys, DEFAULT_STAB_MARGIN)?;
    println!("{label}: {}", check.verdict);
    for r in &check.reasons {
        println!("  - {r}");
    }
    Ok(())
}

pub fn check_waspr(arg: &ConfigArg) -> Result<()> {
    let cfg = load_config(arg)?;
    let (plant, _) = cfg.plant_model()?;
    print_check("plant", &plant)?;
    if let Some(pfc) = cfg.pfc_design()? {
        let augmented = plant.parallel(&pfc.realization)?;
        print_check("plant with PFC", &augmented)?;
        if plant.is_siso() {
            let f = augment_plant(&plant.to_tf()?, &pfc.feedforward);
            println!(
                "F(s): relative degree {}, minimum phase {}",
                f.relative_degree, f.minimum_phase
            );
        }
    }
    Ok(())
}

pub fn synthesize_pfc(arg: &ConfigArg, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(arg)?;
    let (plant, _) = cfg.plant_model()?;
    let pfc = cfg
        .pfc_design()?
        .ok_or_else(|| CliError::Validation("config has no 'pfc' section".into()))?;
    if !plant.is_siso() {
        return Err(CliError::Validation(
            "PFC synthesis needs a SISO plant".into(),
        ));
    }
    let r = &pfc.realization;
    println!("C(s) {}", pfc.compensator);
    println!("D(s) {}", pfc.feedforward);
    println!("realization a = {}", fmt_row(r.a()));
    println!("realization b = {}", fmt_row(r.b()));
    println!("realization c = {}", fmt_row(r.c()));
    println!("realization d0 = {:.8e}", pfc.d0());
    let f = augment_plant(&plant.to_tf()?, &pfc.feedforward);
    println!("F(s) {}", f.tf);
    println!("relative degree = {}", f.relative_degree);
    println!("minimum phase = {}", f.minimum_phase);
    println!("waspr candidate = {}", f.is_waspr_candidate());

    let gains = log_spaced(SWEEP_RANGE.0, SWEEP_RANGE.1, SWEEP_POINTS);
    let sweep = gain_sweep_stability(&f.tf, &gains, DEFAULT_STAB_MARGIN)?;
    let stable = sweep.iter().filter(|p| p.stable).count();
    println!(
        "gain sweep: {stable} of {} gains in [{:e}, {:e}] stable",
        sweep.len(),
        SWEEP_RANGE.0,
        SWEEP_RANGE.1
    );
    for p in sweep.iter().filter(|p| !p.stable) {
        let worst = p
            .poles
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "  unstable at k = {:.6e} (max real part {:.6e})",
            p.gain, worst
        );
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(
            &dir.join("gain_sweep.csv"),
            gain_sweep_csv(&sweep).as_bytes(),
        )?;
    }
    Ok(())
}

fn metrics_text(scenario: &Scenario, controller: Controller, m: &Metrics) -> String {
    format!(
        "scenario = {}\ncontroller = {controller}\n{m}",
        scenario.name
    )
}

pub fn run(args: &SimArgs, controller: Controller) -> Result<()> {
    let scenario = load_scenario(args)?;
    if controller == Controller::ClSac && scenario.reference.lv().is_none() {
        return Err(saclab::Error::ClosedLoopGainMissing.into());
    }
    let start = Instant::now();
    let trace = sim::run(&scenario, controller)?;
    let m = metrics(&trace)?;
    let elapsed = start.elapsed();
    create_dir(&args.out)?;
    let trace_path = args.out.join("trace.csv");
    let metrics_path = args.out.join("metrics.txt");
    write_trace(&trace, &trace_path, scenario.sim.decimate)?;
    write_file(
        &metrics_path,
        metrics_text(&scenario, controller, &m).as_bytes(),
    )?;
    print!("{}", metrics_text(&scenario, controller, &m));
    println!("trace = {}", trace_path.display());
    println!("metrics = {}", metrics_path.display());
    println!("wall_clock_seconds = {:.3}", elapsed.as_secs_f64());
    Ok(())
}

fn run_pair(
    a: &Scenario,
    ca: Controller,
    b: &Scenario,
    cb: Controller,
) -> Result<(SimTrace, SimTrace)> {
    let (ra, rb) = thread::scope(|s| {
        let ha = s.spawn(|| sim::run(a, ca));
        let hb = s.spawn(|| sim::run(b, cb));
        (
            ha.join().expect("simulation thread"),
            hb.join().expect("simulation thread"),
        )
    });
    Ok((ra?, rb?))
}

fn energy_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn compare(args: &SimArgs) -> Result<()> {
    let scenario = load_scenario(args)?;
    if scenario.reference.lv().is_none() {
        return Err(saclab::Error::ClosedLoopGainMissing.into());
    }
    let start = Instant::now();
    let (sac, clsac) = run_pair(&scenario, Controller::Sac, &scenario, Controller::ClSac)?;
    let (ms, mc) = (metrics(&sac)?, metrics(&clsac)?);
    let report = report_for(&scenario, &final_ke(&clsac)?)?;
    let elapsed = start.elapsed();

    let mut text = format!("scenario = {}\n", scenario.name);
    let _ = writeln!(text, "{:<26}{:>18}{:>18}", "metric", "sac", "clsac");
    for ((name, a), b) in Metrics::NAMES.iter().zip(ms.values()).zip(mc.values()) {
        let _ = writeln!(text, "{name:<26}{a:>18.8e}{b:>18.8e}");
    }
    let ratio = energy_ratio(mc.control_energy, ms.control_energy);
    let _ = writeln!(text, "control_energy_ratio = {ratio:.8e}");
    let _ = writeln!(text, "ke_source = clsac final");
    text.push_str(&report.to_string());
    let tracking_ok = mc.rms_tracking_error < ms.rms_tracking_error;
    let energy_ok = mc.control_energy <= ENERGY_SLACK * ms.control_energy;
    let _ = writeln!(
        text,
        "tracking ordering (clsac < sac): {}",
        verdict(tracking_ok)
    );
    let _ = writeln!(
        text,
        "energy ordering (clsac <= 1.05 sac): {}",
        verdict(energy_ok)
    );

    create_dir(&args.out)?;
    let decimate = scenario.sim.decimate;
    write_trace(&sac, &args.out.join("trace_sac.csv"), decimate)?;
    write_trace(&clsac, &args.out.join("trace_clsac.csv"), decimate)?;
    write_file(&args.out.join("comparison.txt"), text.as_bytes())?;
    print!("{text}");
    println!("wall_clock_seconds = {:.3}", elapsed.as_secs_f64());
    Ok(())
}

fn lv_matrix(s: &Scenario, lv: f64) -> DMatrix<f64> {
    DMatrix::from_fn(s.reference.nstates(), s.reference.noutputs(), |i, j| {
        if i == j {
            lv
        } else {
            0.0
        }
    })
}

pub fn sweep_lv(args: &SimArgs, values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Validation(format!(
            "Lv values must be non-negative, got {bad}"
        )));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let base = load_scenario(args)?;
    let scenarios = values
        .iter()
        .map(|&lv| Ok(base.with_lv(Some(lv_matrix(&base, lv)))?))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let traces: Vec<saclab::Result<SimTrace>> = thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| s.spawn(move || sim::run(sc, Controller::ClSac)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread"))
            .collect()
    });
    let traces = traces.into_iter().collect::<saclab::Result<Vec<_>>>()?;
    let rows = traces
        .iter()
        .map(metrics)
        .collect::<saclab::Result<Vec<_>>>()?;

    create_dir(&args.out)?;
    let mut csv =
        String::from("lv,rms_model_error,rms_model_deviation,control_energy,rms_tracking_error\n");
    println!(
        "{:>12}{:>18}{:>18}{:>18}{:>18}",
        "lv", "rms_e_my", "rms_deviation", "control_energy", "rms_tracking"
    );
    for ((lv, m), trace) in values.iter().zip(&rows).zip(&traces) {
        let _ = writeln!(
            csv,
            "{lv:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            m.rms_model_error, m.rms_model_deviation, m.control_energy, m.rms_tracking_error
        );
        println!(
            "{lv:>12}{:>18.8e}{:>18.8e}{:>18.8e}{:>18.8e}",
            m.rms_model_error, m.rms_model_deviation, m.control_energy, m.rms_tracking_error
        );
        write_trace(
            trace,
            &args.out.join(format!("trace_lv{lv}.csv")),
            base.sim.decimate,
        )?;
    }
    write_file(&args.out.join("sweep_lv.csv"), csv.as_bytes())?;
    if rows.len() >= 2 {
        let pairs = || rows.windows(2).map(|w| (&w[0], &w[1]));
        let e_dec = pairs().all(|(a, b)| b.rms_model_error < a.rms_model_error);
        let dev_inc = pairs().all(|(a, b)| b.rms_model_deviation > a.rms_model_deviation);
        let energy_noninc = pairs().all(|(a, b)| b.control_energy <= a.control_energy);
        println!("rms e_my strictly decreasing: {}", verdict(e_dec));
        println!("rms deviation strictly increasing: {}", verdict(dev_inc));
        println!("control energy non-increasing: {}", verdict(energy_noninc));
    }
    println!("wall_clock_seconds = {:.3}", start.elapsed().as_secs_f64());
    Ok(())
}

fn print_gains(prefix: &str, g: &IdealGains) {
    println!("{prefix}s11 = {}", fmt_row(&g.s11));
    println!("{prefix}s12 = {}", fmt_row(&g.s12));
    println!("{prefix}s21 = {}", fmt_row(&g.s21));
    println!("{prefix}s22 = {}", fmt_row(&g.s22));
}

pub fn cgt_check(arg: &ConfigArg) -> Result<()> {
    let cfg = load_config(arg)?;
    let (plant, _) = cfg.plant_model()?;
    let reference = cfg.reference()?;
    let ol = solve_cgt_openloop(&plant, &reference)?;
    println!("open-loop:");
    print_gains("  ", &ol.gains);
    println!("  residual = {:.3e}", ol.residual);
    println!("  condition = {:.3e}", ol.condition);

    let amplitude = cfg.command.as_ref().map_or(1.0, |c| c.amplitude);
    let ol_ref = reference.with_lv(None)?;
    let sim = SimSettings {
        dt: cfg.sim.dt,
        t_final: IDEAL_RUN_SECONDS,
        decimate: 1,
    };
    let x_m0 = nalgebra::DVector::zeros(reference.nstates());
    let ideal = run_ideal_control(
        &plant,
        &ol_ref,
        &ol.gains,
        &CommandSpec::step(amplitude),
        &x_m0,
        &sim,
    )?;
    println!(
        "  ideal control step {amplitude}: max |y_p - y_m| = {:.3e} over {IDEAL_RUN_SECONDS} s",
        ideal.max_output_gap()
    );

    if reference.lv().is_some() {
        println!("closed-loop:");
        match solve_cgt_closedloop(&plant, &reference, &ol.gains) {
            Ok(cl) => {
                print_gains("  ", &cl.gains);
                println!("  residual = {:.3e}", cl.residual);
                println!("  iterations = {}", cl.iterations);
            }
            Err(saclab::Error::CgtNoConvergence {
                iterations,
                residual,
            }) => {
                println!(
                    "  no convergence after {iterations} iterations, best residual {residual:.3e}"
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn ke_from_table(table: &TraceTable, m: usize) -> Result<DMatrix<f64>> {
    let last = table
        .rows
        .last()
        .ok_or_else(|| CliError::Parse("trace has no data rows".into()))?;
    let value = |name: String| -> Result<f64> {
        let j = table
            .columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Parse(format!("trace has no column '{name}'")))?;
        Ok(last[j])
    };
    let mut ke = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let suffix = if m == 1 {
                String::new()
            } else {
                format!("_{}_{}", i + 1, j + 1)
            };
            ke[(i, j)] = value(format!("k_pe{suffix}"))? + value(format!("k_ie{suffix}"))?;
        }
    }
    Ok(ke)
}

pub fn bounds(arg: &ConfigArg, trace: Option<&Path>) -> Result<()> {
    let scenario = load_config(arg)?.to_scenario()?;
    let m = scenario.plant.noutputs();
    let (ke, source) = match trace {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let table = TraceTable::parse(&text).map_err(|e| CliError::Parse(e.to_string()))?;
            (ke_from_table(&table, m)?, path.display().to_string())
        }
        None => {
            let controller = if scenario.reference.lv().is_some() {
                Controller::ClSac
            } else {
                Controller::Sac
            };
            let t = sim::run(&scenario, controller)?;
            (final_ke(&t)?, format!("{controller} simulation"))
        }
    };
    let report = report_for(&scenario, &ke)?;
    println!("ke_source = {source}");
    println!("ke = {}", fmt_row(&ke));
    println!("cpbp = {}", fmt_row(&plant_hf_gain(&scenario)?));
    print!("{report}");
    Ok(())
}

pub fn export_scenarios(dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for cfg in default_configs() {
        let path: PathBuf = dir.join(format!("{}.json", cfg.name));
        write_file(&path, cfg.to_json().as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}
