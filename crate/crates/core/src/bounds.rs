//! Output-error bound quantities for SAC and CL-SAC.
//!
//! With `A_mm = -CpBp Ke` (SAC) and `A_mn = A_mm - Cm Lv` (CL-SAC), the
//! output error norms are bounded by a constant times `sqrt(lambda_max(S))`
//! where `S = -(A + A^T) Q^-1 / 2`. The constant is not computable from the
//! model alone, so only the spectra and their ratio are reported.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, sym_eigenvalues};

/// Returns `(A_mm, A_mn)`.
pub fn error_system_matrices(
    cpbp: &DMatrix<f64>,
    ke: &DMatrix<f64>,
    cm: &DMatrix<f64>,
    lv: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = cpbp.nrows();
    if cpbp.ncols() != m || ke.shape() != (m, m) || cm.nrows() != m {
        return Err(Error::Dimension(format!(
            "CpBp {:?}, Ke {:?} and Cm {:?} are inconsistent",
            cpbp.shape(),
            ke.shape(),
            cm.shape()
        )));
    }
    let a_mm = -(cpbp * ke);
    let a_mn = match lv {
        Some(lv) => {
            if lv.shape() != (cm.ncols(), m) {
                return Err(Error::Dimension(format!(
                    "Lv is {:?}, expected ({}, {m})",
                    lv.shape(),
                    cm.ncols()
                )));
            }
            &a_mm - cm * lv
        }
        None => a_mm.clone(),
    };
    Ok((a_mm, a_mn))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub a_mm: DMatrix<f64>,
    pub a_mn: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub lambda_max_s1: f64,
    pub lambda_max_s2: f64,
    /// `sqrt(lambda_max(S2) / lambda_max(S1))`, present only when both are
    /// positive.
    pub bound_ratio: Option<f64>,
}

impl BoundReport {
    /// False when either error system is not dissipative for the supplied
    /// gains, in which case the bounds say nothing.
    pub fn applicable(&self) -> bool {
        self.bound_ratio.is_some()
    }
}

pub fn bound_report(
    a_mm: &DMatrix<f64>,
    a_mn: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<BoundReport> {
    let m = a_mm.nrows();
    if a_mm.shape() != (m, m) || a_mn.shape() != (m, m) || q.shape() != (m, m) {
        return Err(Error::Dimension(
            "A_mm, A_mn and Q must share one square size".into(),
        ));
    }
    if !is_positive_definite(q, 0.0) {
        return Err(Error::NotPositiveDefinite("Q".into()));
    }
    let q_inv = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("Q".into()))?;
    let s_of = |a: &DMatrix<f64>| -(a + a.transpose()) * &q_inv * 0.5;
    let s1 = s_of(a_mm);
    let s2 = s_of(a_mn);
    let lambda_max =
        |s: &DMatrix<f64>| -> Result<f64> { Ok(*sym_eigenvalues(s)?.last().expect("non-empty")) };
    let lambda_max_s1 = lambda_max(&s1)?;
    let lambda_max_s2 = lambda_max(&s2)?;
    let bound_ratio = (lambda_max_s1 > 0.0 && lambda_max_s2 > 0.0)
        .then(|| (lambda_max_s2 / lambda_max_s1).sqrt());
    Ok(BoundReport {
        a_mm: a_mm.clone(),
        a_mn: a_mn.clone(),
        s1,
        s2,
        lambda_max_s1,
        lambda_max_s2,
        bound_ratio,
    })
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
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

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "a_mm = {}", fmt_matrix(&self.a_mm))?;
        writeln!(f, "a_mn = {}", fmt_matrix(&self.a_mn))?;
        writeln!(f, "s1 = {}", fmt_matrix(&self.s1))?;
        writeln!(f, "s2 = {}", fmt_matrix(&self.s2))?;
        writeln!(f, "lambda_max_s1 = {:.8e}", self.lambda_max_s1)?;
        writeln!(f, "lambda_max_s2 = {:.8e}", self.lambda_max_s2)?;
        match self.bound_ratio {
            Some(r) => writeln!(f, "bound_ratio = {r:.8e}"),
            None => writeln!(f, "bound_ratio = bound inapplicable"),
        }
    }
}
