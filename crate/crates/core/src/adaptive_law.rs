//! Control law `u_p = K(t) r` with `r = [e, x_m, u_m]` and the adaptive gain
//! dynamics. Each gain block is the sum of a proportional part, recomputed
//! from the current signals, and an integral part carried as state.
//!
//! For CL-SAC the caller passes `e_my = y_mo - y` and the closed-loop model
//! state `x_mo` in place of `e_y` and `x_m`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;

/// Adaptation weights and the sigma leak rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GainWeights {
    pub gamma_pe: DMatrix<f64>,
    pub gamma_ie: DMatrix<f64>,
    pub gamma_px: DMatrix<f64>,
    pub gamma_ix: DMatrix<f64>,
    pub gamma_pu: DMatrix<f64>,
    pub gamma_iu: DMatrix<f64>,
    pub sigma: f64,
    /// Apply the sigma leak to `K_Ix` and `K_Iu` as well as `K_Ie`.
    pub leak_all: bool,
}

impl GainWeights {
    /// Every weight `gamma * I` of the appropriate size.
    pub fn uniform(
        gamma: f64,
        sigma: f64,
        outputs: usize,
        model_states: usize,
        commands: usize,
    ) -> Result<Self> {
        let id = |n| DMatrix::identity(n, n) * gamma;
        GainWeights {
            gamma_pe: id(outputs),
            gamma_ie: id(outputs),
            gamma_px: id(model_states),
            gamma_ix: id(model_states),
            gamma_pu: id(commands),
            gamma_iu: id(commands),
            sigma,
            leak_all: false,
        }
        .validated()
    }

    /// Checks positivity of `sigma` and of every weight's symmetric part.
    pub fn validated(self) -> Result<Self> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        for (name, g) in self.named() {
            let ev = sym_eigenvalues(g)?;
            if ev.first().is_none_or(|&l| l <= 0.0) {
                return Err(Error::NotPositiveDefinite(format!("weight {name}")));
            }
        }
        Ok(self)
    }

    fn named(&self) -> [(&'static str, &DMatrix<f64>); 6] {
        [
            ("gamma_pe", &self.gamma_pe),
            ("gamma_ie", &self.gamma_ie),
            ("gamma_px", &self.gamma_px),
            ("gamma_ix", &self.gamma_ix),
            ("gamma_pu", &self.gamma_pu),
            ("gamma_iu", &self.gamma_iu),
        ]
    }

    /// Verifies the weight sizes against `(m, n_m, m_m)`.
    pub fn check_dims(&self, outputs: usize, model_states: usize, commands: usize) -> Result<()> {
        let expect = [
            outputs,
            outputs,
            model_states,
            model_states,
            commands,
            commands,
        ];
        for ((name, g), n) in self.named().into_iter().zip(expect) {
            if g.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Integral gain blocks. These are state variables of the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveGains {
    pub k_ie: DMatrix<f64>,
    pub k_ix: DMatrix<f64>,
    pub k_iu: DMatrix<f64>,
}

impl AdaptiveGains {
    pub fn zeros(outputs: usize, model_states: usize, commands: usize) -> Self {
        AdaptiveGains {
            k_ie: DMatrix::zeros(outputs, outputs),
            k_ix: DMatrix::zeros(outputs, model_states),
            k_iu: DMatrix::zeros(outputs, commands),
        }
    }

    pub fn len(&self) -> usize {
        self.k_ie.len() + self.k_ix.len() + self.k_iu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column-major concatenation `[vec K_Ie; vec K_Ix; vec K_Iu]`.
    pub fn write_to(&self, out: &mut [f64]) {
        let (a, rest) = out.split_at_mut(self.k_ie.len());
        let (b, c) = rest.split_at_mut(self.k_ix.len());
        a.copy_from_slice(self.k_ie.as_slice());
        b.copy_from_slice(self.k_ix.as_slice());
        c.copy_from_slice(self.k_iu.as_slice());
    }

    pub fn read_from(src: &[f64], outputs: usize, model_states: usize, commands: usize) -> Self {
        let ne = outputs * outputs;
        let nx = outputs * model_states;
        AdaptiveGains {
            k_ie: DMatrix::from_column_slice(outputs, outputs, &src[..ne]),
            k_ix: DMatrix::from_column_slice(outputs, model_states, &src[ne..ne + nx]),
            k_iu: DMatrix::from_column_slice(
                outputs,
                commands,
                &src[ne + nx..ne + nx + outputs * commands],
            ),
        }
    }
}

/// Memoryless proportional gain blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalGains {
    pub k_pe: DMatrix<f64>,
    pub k_px: DMatrix<f64>,
    pub k_pu: DMatrix<f64>,
}

/// `K_pe = e e^T G_pe`, `K_px = e x_m^T G_px`, `K_pu = e u_m^T G_pu`.
pub fn proportional_gains(
    e: &DVector<f64>,
    x_m: &DVector<f64>,
    u_m: &DVector<f64>,
    w: &GainWeights,
) -> ProportionalGains {
    ProportionalGains {
        k_pe: e * e.transpose() * &w.gamma_pe,
        k_px: e * x_m.transpose() * &w.gamma_px,
        k_pu: e * u_m.transpose() * &w.gamma_pu,
    }
}

/// Time derivatives of the integral gains. The sigma leak acts on `K_Ie`
/// only unless `w.leak_all` is set.
pub fn integral_gain_derivatives(
    e: &DVector<f64>,
    x_m: &DVector<f64>,
    u_m: &DVector<f64>,
    gains: &AdaptiveGains,
    w: &GainWeights,
) -> AdaptiveGains {
    let mut d = AdaptiveGains {
        k_ie: e * e.transpose() * &w.gamma_ie - &gains.k_ie * w.sigma,
        k_ix: e * x_m.transpose() * &w.gamma_ix,
        k_iu: e * u_m.transpose() * &w.gamma_iu,
    };
    if w.leak_all {
        d.k_ix -= &gains.k_ix * w.sigma;
        d.k_iu -= &gains.k_iu * w.sigma;
    }
    d
}

/// `u_p = (K_pe + K_Ie) e + (K_px + K_Ix) x_m + (K_pu + K_Iu) u_m`.
pub fn control(
    e: &DVector<f64>,
    x_m: &DVector<f64>,
    u_m: &DVector<f64>,
    gains: &AdaptiveGains,
    w: &GainWeights,
) -> DVector<f64> {
    let p = proportional_gains(e, x_m, u_m, w);
    control_with(e, x_m, u_m, gains, &p)
}

pub(crate) fn control_with(
    e: &DVector<f64>,
    x_m: &DVector<f64>,
    u_m: &DVector<f64>,
    gains: &AdaptiveGains,
    p: &ProportionalGains,
) -> DVector<f64> {
    (&p.k_pe + &gains.k_ie) * e + (&p.k_px + &gains.k_ix) * x_m + (&p.k_pu + &gains.k_iu) * u_m
}
