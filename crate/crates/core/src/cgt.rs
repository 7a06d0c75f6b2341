//! Command generator tracker (CGT) diagnostics for step commands.
//!
//! Perfect model following asks for ideal trajectories
//! `x* = S11 x_m + S12 u_m`, `u* = S21 x_m + S22 u_m`. For a constant command
//! the blocks satisfy
//!
//! ```text
//! Ap S11 + Bp S21 = S11 M        Ap S12 + Bp S22 = S11 Bm + S11 Lv Cp S12
//! Cp S11 = Cm                    Cp S12 = 0
//! ```
//!
//! with `M = Am` for the open-loop model and
//! `M = Am - Lv Cm + Lv Cp S11` for the closed-loop one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{kron, unvec, vec_of};
use crate::lti::StateSpace;
use crate::reference_model::RefModelConfig;

/// Linear systems with a condition number above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e13;
pub const CLOSED_LOOP_MAX_ITER: usize = 200;
pub const CLOSED_LOOP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IdealGains {
    pub s11: DMatrix<f64>,
    pub s12: DMatrix<f64>,
    pub s21: DMatrix<f64>,
    pub s22: DMatrix<f64>,
}

impl IdealGains {
    /// Frobenius norm of all four blocks together.
    pub fn norm(&self) -> f64 {
        (self.s11.norm_squared()
            + self.s12.norm_squared()
            + self.s21.norm_squared()
            + self.s22.norm_squared())
        .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgtSolution {
    pub gains: IdealGains,
    pub residual: f64,
    pub condition: f64,
    pub iterations: usize,
}

fn check_dims(plant: &StateSpace, reference: &RefModelConfig) -> Result<()> {
    if plant.ninputs() != plant.noutputs() {
        return Err(Error::Dimension(format!(
            "CGT needs a square plant, got {} inputs and {} outputs",
            plant.ninputs(),
            plant.noutputs()
        )));
    }
    if reference.noutputs() != plant.noutputs() {
        return Err(Error::Dimension(format!(
            "reference model has {} outputs, plant has {}",
            reference.noutputs(),
            plant.noutputs()
        )));
    }
    Ok(())
}

/// Solves the block equations with `M` and the `S11 Lv Cp` factor of the
/// second block frozen, which makes the system linear in all unknowns.
/// Unknown ordering: `[vec S11; vec S21; vec S12; vec S22]`.
fn solve_linearized(
    plant: &StateSpace,
    reference: &RefModelConfig,
    m: &DMatrix<f64>,
    s12_coupling: Option<&DMatrix<f64>>,
) -> Result<(IdealGains, f64)> {
    let (ap, bp, cp) = (plant.a(), plant.b(), plant.c());
    let np = plant.nstates();
    let mi = plant.ninputs();
    let nm = reference.nstates();
    let mm = reference.ninputs();

    let i_np = DMatrix::<f64>::identity(np, np);
    let i_nm = DMatrix::<f64>::identity(nm, nm);
    let i_mm = DMatrix::<f64>::identity(mm, mm);

    let (u11, u21, u12, u22) = (np * nm, mi * nm, np * mm, mi * mm);
    let o21 = u11;
    let o12 = o21 + u21;
    let o22 = o12 + u12;
    let nunk = o22 + u22;

    let (r1, r3, r2, r4) = (np * nm, cp.nrows() * nm, np * mm, cp.nrows() * mm);
    let q3 = r1;
    let q2 = q3 + r3;
    let q4 = q2 + r2;
    let neq = q4 + r4;
    if neq != nunk {
        return Err(Error::Dimension(format!(
            "CGT block system has {neq} equations and {nunk} unknowns"
        )));
    }

    let mut big = DMatrix::<f64>::zeros(neq, nunk);
    let mut rhs = DVector::<f64>::zeros(neq);

    // Ap S11 + Bp S21 - S11 M = 0
    big.view_mut((0, 0), (r1, u11))
        .copy_from(&(kron(&i_nm, ap) - kron(&m.transpose(), &i_np)));
    big.view_mut((0, o21), (r1, u21))
        .copy_from(&kron(&i_nm, bp));

    // Cp S11 = Cm
    big.view_mut((q3, 0), (r3, u11)).copy_from(&kron(&i_nm, cp));
    rhs.rows_mut(q3, r3).copy_from(&vec_of(reference.cm()));

    // Ap S12 + Bp S22 - S11 Bm - (S11 Lv Cp) S12 = 0
    let mut s12_block = kron(&i_mm, ap);
    if let Some(g) = s12_coupling {
        s12_block -= kron(&i_mm, g);
    }
    big.view_mut((q2, 0), (r2, u11))
        .copy_from(&(-kron(&reference.bm().transpose(), &i_np)));
    big.view_mut((q2, o12), (r2, u12)).copy_from(&s12_block);
    big.view_mut((q2, o22), (r2, u22))
        .copy_from(&kron(&i_mm, bp));

    // Cp S12 = 0
    big.view_mut((q4, o12), (r4, u12))
        .copy_from(&kron(&i_mm, cp));

    let sv = big.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::CgtSingular { condition });
    }
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or(Error::CgtSingular { condition })?;
    let s = sol.as_slice();
    Ok((
        IdealGains {
            s11: unvec(&s[..u11], np, nm),
            s21: unvec(&s[o21..o21 + u21], mi, nm),
            s12: unvec(&s[o12..o12 + u12], np, mm),
            s22: unvec(&s[o22..o22 + u22], mi, mm),
        },
        condition,
    ))
}

pub fn solve_cgt_openloop(plant: &StateSpace, reference: &RefModelConfig) -> Result<CgtSolution> {
    check_dims(plant, reference)?;
    let ol = reference.with_lv(None)?;
    let (gains, condition) = solve_linearized(plant, &ol, reference.am(), None)?;
    let residual = cgt_residual(plant, &ol, &gains)?;
    Ok(CgtSolution {
        gains,
        residual,
        condition,
        iterations: 1,
    })
}

/// Fixed-point iteration on the closed-loop block equations, seeded with
/// `init` (normally the open-loop solution). A missing or zero `Lv` returns
/// the seed unchanged.
pub fn solve_cgt_closedloop(
    plant: &StateSpace,
    reference: &RefModelConfig,
    init: &IdealGains,
) -> Result<CgtSolution> {
    check_dims(plant, reference)?;
    let lv = match reference.lv() {
        Some(lv) if lv.iter().any(|&x| x != 0.0) => lv,
        _ => {
            return Ok(CgtSolution {
                gains: init.clone(),
                residual: cgt_residual(plant, reference, init)?,
                condition: f64::NAN,
                iterations: 0,
            })
        }
    };
    let cp = plant.c();
    let mut current = init.clone();
    let mut best = (
        current.clone(),
        cgt_residual(plant, reference, &current)?,
        f64::NAN,
    );
    let mut iterations = 0;
    for it in 1..=CLOSED_LOOP_MAX_ITER {
        iterations = it;
        let m = reference.am() - lv * reference.cm() + lv * cp * &current.s11;
        let coupling = &current.s11 * lv * cp;
        let (next, condition) = solve_linearized(plant, reference, &m, Some(&coupling))?;
        let residual = cgt_residual(plant, reference, &next)?;
        let step = (&next.s11 - &current.s11).norm()
            + (&next.s12 - &current.s12).norm()
            + (&next.s21 - &current.s21).norm()
            + (&next.s22 - &current.s22).norm();
        if residual < best.1 || best.2.is_nan() {
            best = (next.clone(), residual, condition);
        }
        let scale = 1.0 + next.norm();
        current = next;
        if residual <= 1e-12 * scale || step <= 1e-15 * scale {
            break;
        }
    }
    let (gains, residual, condition) = best;
    if residual > CLOSED_LOOP_TOL * (1.0 + gains.norm()) {
        return Err(Error::CgtNoConvergence {
            iterations,
            residual,
        });
    }
    Ok(CgtSolution {
        gains,
        residual,
        condition,
        iterations,
    })
}

/// Largest Frobenius norm among the four block equations. Uses the
/// closed-loop form when the reference model carries `Lv`.
pub fn cgt_residual(plant: &StateSpace, reference: &RefModelConfig, s: &IdealGains) -> Result<f64> {
    check_dims(plant, reference)?;
    let (ap, bp, cp) = (plant.a(), plant.b(), plant.c());
    let (np, mi, nm, mm) = (
        plant.nstates(),
        plant.ninputs(),
        reference.nstates(),
        reference.ninputs(),
    );
    let shapes_ok = s.s11.shape() == (np, nm)
        && s.s12.shape() == (np, mm)
        && s.s21.shape() == (mi, nm)
        && s.s22.shape() == (mi, mm);
    if !shapes_ok {
        return Err(Error::Dimension(
            "ideal gain blocks do not match plant/model sizes".into(),
        ));
    }
    let (m, coupling) = match reference.lv() {
        Some(lv) => (
            reference.am() - lv * reference.cm() + lv * cp * &s.s11,
            &s.s11 * lv * cp * &s.s12,
        ),
        None => (reference.am().clone(), DMatrix::zeros(np, mm)),
    };
    let e1 = ap * &s.s11 + bp * &s.s21 - &s.s11 * m;
    let e2 = ap * &s.s12 + bp * &s.s22 - &s.s11 * reference.bm() - coupling;
    let e3 = cp * &s.s11 - reference.cm();
    let e4 = cp * &s.s12;
    Ok([e1.norm(), e2.norm(), e3.norm(), e4.norm()]
        .into_iter()
        .fold(0.0, f64::max))
}
