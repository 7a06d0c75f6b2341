use nalgebra::{DMatrix, DVector};

use saclab::cgt::{cgt_residual, solve_cgt_closedloop, solve_cgt_openloop};
use saclab::command::CommandSpec;
use saclab::lti::{TransferFunction, DEFAULT_STAB_MARGIN};
use saclab::passivity::{augment_plant, check_waspr_sufficient};
use saclab::scenarios::{
    build_augmented_plant, compensator, default_scenarios, mav_scenario, reference_model,
};
use saclab::sim::{run, run_ideal_control, Controller, SimSettings};
use saclab::trace::{metrics, TraceTable};

const PRINTED_T_NUM: [f64; 3] = [6.444e05, 1.119e07, 9.185e08];
const PRINTED_T_DEN: [f64; 7] = [1.0, 104.8, 6728.0, 2.28e05, 5.18e06, 1.4e07, 6.351e06];

fn within(actual: &[f64], printed: &[f64], rel: f64) -> bool {
    actual.len() == printed.len()
        && actual
            .iter()
            .zip(printed)
            .all(|(a, p)| ((a - p) / p).abs() <= rel)
}

#[test]
fn plant_transfer_function_matches_printed_coefficients() {
    let t = build_augmented_plant().to_tf().unwrap();
    assert!(
        within(t.num.coeffs(), &PRINTED_T_NUM, 0.01),
        "num {}",
        t.num
    );
    assert!(
        within(t.den.coeffs(), &PRINTED_T_DEN, 0.01),
        "den {}",
        t.den
    );
}

#[test]
fn pfc_makes_plant_waspr() {
    let plant = build_augmented_plant();
    assert!(!check_waspr_sufficient(&plant, DEFAULT_STAB_MARGIN)
        .unwrap()
        .pass());

    let pfc = saclab::passivity::synthesize_pfc(&compensator()).unwrap();
    assert_eq!(
        pfc.feedforward,
        TransferFunction::from_coeffs(&[10.0], &[4.0, 40.0]).unwrap()
    );
    let f = augment_plant(&plant.to_tf().unwrap(), &pfc.feedforward);
    assert_eq!(f.relative_degree, 1);
    assert!(f.minimum_phase);
    let with_pfc = plant.parallel(&pfc.realization).unwrap();
    assert!(check_waspr_sufficient(&with_pfc, DEFAULT_STAB_MARGIN)
        .unwrap()
        .pass());
}

#[test]
fn cgt_residuals_on_builtin_scenarios() {
    for s in default_scenarios().all() {
        let ol = solve_cgt_openloop(&s.plant, &s.reference).unwrap();
        assert!(
            ol.residual <= 1e-8 * (1.0 + ol.gains.norm()),
            "{}: {}",
            s.name,
            ol.residual
        );
        let cp_s11 = s.plant.c() * &ol.gains.s11;
        assert!((cp_s11 - s.reference.cm()).norm() < 1e-10);
        if s.reference.lv().is_some() {
            let cl = solve_cgt_closedloop(&s.plant, &s.reference, &ol.gains).unwrap();
            assert!(cgt_residual(&s.plant, &s.reference, &cl.gains).unwrap() <= 1e-8);
        }
    }
}

#[test]
fn ideal_control_tracks_from_nonzero_model_state() {
    let plant = build_augmented_plant();
    let reference = reference_model(None);
    let s = solve_cgt_openloop(&plant, &reference).unwrap();
    let sim = SimSettings {
        dt: 1e-3,
        t_final: 10.0,
        decimate: 1,
    };
    let run = run_ideal_control(
        &plant,
        &reference,
        &s.gains,
        &CommandSpec::step(0.1745),
        &DVector::from_element(1, -0.05),
        &sim,
    )
    .unwrap();
    assert!(run.max_output_gap() <= 1e-6, "gap {}", run.max_output_gap());
    assert!((run.y_m.last().unwrap()[0] - 0.1745).abs() < 1e-6);
}

#[test]
fn ideal_control_rejects_square_command() {
    let plant = build_augmented_plant();
    let reference = reference_model(None);
    let s = solve_cgt_openloop(&plant, &reference).unwrap();
    let err = run_ideal_control(
        &plant,
        &reference,
        &s.gains,
        &CommandSpec::square(1.0, 20.0),
        &DVector::zeros(1),
        &SimSettings::default(),
    );
    assert!(err.is_err());
}

#[test]
fn zero_lv_reproduces_sac() {
    let sim = SimSettings {
        dt: 1e-3,
        t_final: 10.0,
        decimate: 1,
    };
    let sac = mav_scenario("sac", None, CommandSpec::step(0.1), sim).unwrap();
    let cl = sac.with_lv(Some(DMatrix::zeros(1, 1))).unwrap();
    let a = run(&sac, Controller::Sac).unwrap();
    let b = run(&cl, Controller::ClSac).unwrap();
    let ma = metrics(&a).unwrap();
    let mb = metrics(&b).unwrap();
    assert_eq!(ma, mb);
    assert!(a
        .records
        .iter()
        .zip(&b.records)
        .all(|(x, y)| x.u_p == y.u_p));
}

#[test]
fn closed_loop_model_collapses_to_open_loop_model() {
    let sim = SimSettings {
        dt: 1e-3,
        t_final: 20.0,
        decimate: 1,
    };
    let s = mav_scenario("step", Some(20.0), CommandSpec::step(0.1745), sim).unwrap();
    let trace = run(&s, Controller::ClSac).unwrap();
    let n = trace.records.len();
    let tail = &trace.records[n * 4 / 5..];
    let worst = tail
        .iter()
        .map(|r| (r.y_mo[0] - r.y_m_ol[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.02 * 0.1745, "deviation {worst}");
    let early = trace.records[..n / 10]
        .iter()
        .map(|r| (r.y_mo[0] - r.y_m_ol[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst < early);
}

#[test]
fn runs_are_bit_identical() {
    let s = default_scenarios().clsac;
    let a = run(&s, Controller::ClSac).unwrap();
    let b = run(&s, Controller::ClSac).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string(1), b.to_csv_string(1));
}

#[test]
fn trace_csv_reparses_at_printed_precision() {
    let mut s = default_scenarios().clsac;
    s.sim.t_final = 5.0;
    let trace = run(&s, Controller::ClSac).unwrap();
    let table = TraceTable::parse(&trace.to_csv_string(1)).unwrap();
    assert_eq!(table.rows.len(), trace.len());
    assert_eq!(table.columns, trace.columns());
    let phi = table.column("phi").unwrap();
    let u = table.column("u_p").unwrap();
    for (k, r) in trace.records.iter().enumerate() {
        assert!((phi[k] - r.x_p[3]).abs() <= 5e-9 * r.x_p[3].abs());
        assert!((u[k] - r.u_p[0]).abs() <= 5e-9 * r.u_p[0].abs());
    }
    // printing the parsed values again gives the same numbers
    let mut reprinted = table.columns.join(",") + "\n";
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        reprinted += &(fields.join(",") + "\n");
    }
    assert_eq!(TraceTable::parse(&reprinted).unwrap(), table);
}
