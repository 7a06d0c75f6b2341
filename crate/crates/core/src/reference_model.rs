//! Open-loop and closed-loop reference models.
//!
//! The closed-loop model adds output-error feedback `-Lv (y_mo - y_p)` so the
//! model is pulled toward the plant while the adaptive gains are learning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{self, eig};

#[derive(Debug, Clone, PartialEq)]
pub struct RefModelConfig {
    am: DMatrix<f64>,
    bm: DMatrix<f64>,
    cm: DMatrix<f64>,
    lv: Option<DMatrix<f64>>,
}

impl RefModelConfig {
    /// Rejects dimension mismatches and a non-Hurwitz `Am`.
    pub fn new(
        am: DMatrix<f64>,
        bm: DMatrix<f64>,
        cm: DMatrix<f64>,
        lv: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = am.nrows();
        if am.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!(
                "Am must be square and non-empty, got {}x{}",
                am.nrows(),
                am.ncols()
            )));
        }
        if bm.nrows() != n {
            return Err(Error::Dimension(format!(
                "Bm has {} rows, expected {n}",
                bm.nrows()
            )));
        }
        if cm.ncols() != n {
            return Err(Error::Dimension(format!(
                "Cm has {} columns, expected {n}",
                cm.ncols()
            )));
        }
        if let Some(lv) = &lv {
            if lv.shape() != (n, cm.nrows()) {
                return Err(Error::Dimension(format!(
                    "Lv is {}x{}, expected {}x{}",
                    lv.nrows(),
                    lv.ncols(),
                    n,
                    cm.nrows()
                )));
            }
        }
        let spectrum = eig(&am)?;
        let max_real = spectrum
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if !lti::is_hurwitz(&spectrum, lti::DEFAULT_STAB_MARGIN) {
            return Err(Error::NotHurwitz { max_real });
        }
        Ok(RefModelConfig { am, bm, cm, lv })
    }

    pub fn am(&self) -> &DMatrix<f64> {
        &self.am
    }
    pub fn bm(&self) -> &DMatrix<f64> {
        &self.bm
    }
    pub fn cm(&self) -> &DMatrix<f64> {
        &self.cm
    }
    pub fn lv(&self) -> Option<&DMatrix<f64>> {
        self.lv.as_ref()
    }

    /// Same model with the feedback gain replaced (or removed).
    pub fn with_lv(&self, lv: Option<DMatrix<f64>>) -> Result<Self> {
        RefModelConfig::new(self.am.clone(), self.bm.clone(), self.cm.clone(), lv)
    }

    pub fn nstates(&self) -> usize {
        self.am.nrows()
    }
    /// Command dimension `m_m`.
    pub fn ninputs(&self) -> usize {
        self.bm.ncols()
    }
    /// Output dimension `m`, shared with the plant.
    pub fn noutputs(&self) -> usize {
        self.cm.nrows()
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.cm * x
    }

    fn check(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.nstates() || u.len() != self.ninputs() {
            return Err(Error::Dimension(format!(
                "reference model expects state {} and command {}, got {} and {}",
                self.nstates(),
                self.ninputs(),
                x.len(),
                u.len()
            )));
        }
        Ok(())
    }

    /// `Am x + Bm u`.
    pub fn ol_derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, u)?;
        Ok(&self.am * x + &self.bm * u)
    }

    /// `Am x + Bm u - Lv (Cm x - y_p)`.
    pub fn cl_derivative(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        y_p: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let lv = self.lv.as_ref().ok_or(Error::ClosedLoopGainMissing)?;
        self.check(x, u)?;
        if y_p.len() != self.noutputs() {
            return Err(Error::Dimension(format!(
                "plant output has {} entries, expected {}",
                y_p.len(),
                self.noutputs()
            )));
        }
        Ok(&self.am * x + &self.bm * u - lv * (&self.cm * x - y_p))
    }
}

/// Upper bound on the closed-loop model's deviation from the open-loop
/// model: `|Lv| sqrt(1 / (2 |Am|)) sqrt(V0 / lambda_min(P1))`.
pub fn lv_deviation_bound(lv_norm: f64, am_norm: f64, v0: f64, lambda_min_p1: f64) -> Result<f64> {
    if !(am_norm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "|Am| must be positive, got {am_norm}"
        )));
    }
    if !(lambda_min_p1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_min(P1) must be positive, got {lambda_min_p1}"
        )));
    }
    if !(lv_norm >= 0.0) || !(v0 >= 0.0) {
        return Err(Error::InvalidParameter(
            "|Lv| and V0 must be non-negative".into(),
        ));
    }
    Ok(lv_norm * (1.0 / (2.0 * am_norm)).sqrt() * (v0 / lambda_min_p1).sqrt())
}
