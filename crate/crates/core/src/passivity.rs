//! W-ASPR feasibility checks, certificate verification and parallel
//! feedforward compensator (PFC) synthesis.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::is_positive_definite;
use crate::lti::{self, eig, poly_roots, Complex64, StateSpace, TransferFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// MIMO transmission zeros are not computed.
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WasprCheck {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl WasprCheck {
    pub fn pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Sufficient W-ASPR test: minimum phase, and the high-frequency gain
/// (`C B`, or `D` when the plant has feedthrough) has its spectrum in the
/// open right half plane.
pub fn check_waspr_sufficient(plant: &StateSpace, margin: f64) -> Result<WasprCheck> {
    if plant.ninputs() != plant.noutputs() {
        return Err(Error::Dimension(format!(
            "W-ASPR check needs a square plant, got {} inputs and {} outputs",
            plant.ninputs(),
            plant.noutputs()
        )));
    }
    let mut reasons = Vec::new();
    let mut failed = false;

    let (hf_gain, label) = if plant.has_feedthrough() {
        (plant.d().clone(), "D")
    } else {
        (plant.c() * plant.b(), "CB")
    };
    let spectrum = eig(&hf_gain)?;
    if spectrum.iter().all(|l| l.re > margin) {
        reasons.push(format!("{label} spectrum in open right half plane"));
    } else {
        failed = true;
        reasons.push(format!("{label} spectrum not in open right half plane"));
    }

    let mut indeterminate = false;
    if plant.is_siso() {
        let tf = plant.to_tf()?;
        if tf.is_minimum_phase(margin) {
            reasons.push("minimum phase".into());
        } else {
            failed = true;
            reasons.push("not minimum phase".into());
        }
    } else {
        indeterminate = true;
        reasons.push("minimum-phase test for MIMO plants not available".into());
    }

    let verdict = if failed {
        Verdict::Fail
    } else if indeterminate {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    Ok(WasprCheck { verdict, reasons })
}

/// Matrices `P`, `Q`, `W`, `Ke~` claimed to satisfy the W-ASPR conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct WasprCertificate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub ke_tilde: DMatrix<f64>,
}

/// Checks `P Ac + Ac^T P = -Q` with `Ac = A - B Ke~ C`, and `P B = C^T W^T`,
/// each relative to `tol`, with `P` and `Q` positive definite.
pub fn verify_waspr_certificate(
    plant: &StateSpace,
    cert: &WasprCertificate,
    tol: f64,
) -> Result<bool> {
    let (n, m, p) = (plant.nstates(), plant.ninputs(), plant.noutputs());
    let dims_ok = cert.p.shape() == (n, n)
        && cert.q.shape() == (n, n)
        && cert.w.shape() == (m, m)
        && cert.ke_tilde.shape() == (m, p);
    if !dims_ok {
        return Err(Error::Dimension(
            "certificate does not match plant dimensions".into(),
        ));
    }
    if !is_positive_definite(&cert.p, lti::DEFAULT_STAB_MARGIN)
        || !is_positive_definite(&cert.q, lti::DEFAULT_STAB_MARGIN)
    {
        return Ok(false);
    }
    let ac = plant.a() - plant.b() * &cert.ke_tilde * plant.c();
    let lyap = &cert.p * &ac + ac.transpose() * &cert.p + &cert.q;
    let pb = &cert.p * plant.b();
    let coupling = &pb - plant.c().transpose() * cert.w.transpose();
    Ok(lyap.norm() <= tol * cert.q.norm() && coupling.norm() <= tol * pb.norm())
}

/// `D(s) = 1 / C(s)` and a realization of it with explicit feedthrough.
#[derive(Debug, Clone, PartialEq)]
pub struct PfcDesign {
    pub compensator: TransferFunction,
    pub feedforward: TransferFunction,
    pub realization: StateSpace,
}

impl PfcDesign {
    /// High-frequency gain of `D(s)`.
    pub fn d0(&self) -> f64 {
        self.realization.d()[(0, 0)]
    }
}

pub fn synthesize_pfc(compensator: &TransferFunction) -> Result<PfcDesign> {
    if compensator.num.is_zero() || compensator.num.degree() < compensator.den.degree() {
        return Err(Error::CompensatorInverseImproper);
    }
    let feedforward = compensator.reciprocal()?;
    let realization = feedforward.to_ss()?;
    Ok(PfcDesign {
        compensator: compensator.clone(),
        feedforward,
        realization,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPlant {
    pub tf: TransferFunction,
    pub relative_degree: i64,
    pub minimum_phase: bool,
}

impl AugmentedPlant {
    /// Relative degree at most one and minimum phase.
    pub fn is_waspr_candidate(&self) -> bool {
        self.minimum_phase && (0..=1).contains(&self.relative_degree)
    }
}

/// `F(s) = T(s) + D(s)` with its relative degree and minimum-phase verdict.
pub fn augment_plant(
    plant_tf: &TransferFunction,
    feedforward: &TransferFunction,
) -> AugmentedPlant {
    let tf = plant_tf.add(feedforward);
    AugmentedPlant {
        relative_degree: tf.relative_degree(),
        minimum_phase: tf.is_minimum_phase(lti::DEFAULT_STAB_MARGIN),
        tf,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSweepPoint {
    pub gain: f64,
    pub poles: Vec<Complex64>,
    pub stable: bool,
}

/// Closed-loop poles of `F` under static output feedback `k`: roots of
/// `den + k num`.
pub fn gain_sweep_stability(
    f: &TransferFunction,
    gains: &[f64],
    margin: f64,
) -> Result<Vec<GainSweepPoint>> {
    gains
        .iter()
        .map(|&k| {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sweep gain must be positive, got {k}"
                )));
            }
            let char_poly = f.den.add(&f.num.scale(k));
            let mut poles = poly_roots(&char_poly)?;
            lti::sort_roots(&mut poles);
            let stable = lti::is_hurwitz(&poles, margin);
            Ok(GainSweepPoint {
                gain: k,
                poles,
                stable,
            })
        })
        .collect()
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// CSV with columns `gain, pole_re_1, pole_im_1, ..., stable`.
pub fn gain_sweep_csv(points: &[GainSweepPoint]) -> String {
    let npoles = points.iter().map(|p| p.poles.len()).max().unwrap_or(0);
    let mut out = String::from("gain");
    for i in 1..=npoles {
        let _ = write!(out, ",pole_re_{i},pole_im_{i}");
    }
    out.push_str(",stable\n");
    for p in points {
        let _ = write!(out, "{:.8e}", p.gain);
        for i in 0..npoles {
            match p.poles.get(i) {
                Some(z) => {
                    let _ = write!(out, ",{:.8e},{:.8e}", z.re, z.im);
                }
                None => out.push_str(",,"),
            }
        }
        let _ = writeln!(out, ",{}", p.stable);
    }
    out
}
