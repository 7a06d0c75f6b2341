//! Simulation traces, their CSV form, and summary metrics.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::adaptive_law::{AdaptiveGains, ProportionalGains};
use crate::error::{Error, Result};
use crate::sim::Controller;

/// Signals at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub u_m: DVector<f64>,
    pub y_m_ol: DVector<f64>,
    /// Output of the model being followed (`y_m` for SAC, `y_mo` for CL-SAC).
    pub y_mo: DVector<f64>,
    pub y_p: DVector<f64>,
    pub y_aug: DVector<f64>,
    /// Adaptation error `y_mo - y_aug`.
    pub e: DVector<f64>,
    pub u_p: DVector<f64>,
    pub x_p: DVector<f64>,
    pub x_pfc: DVector<f64>,
    pub x_m: DVector<f64>,
    pub gains: AdaptiveGains,
    pub prop: ProportionalGains,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub controller: Controller,
    pub dt: f64,
    pub state_names: Vec<String>,
    pub records: Vec<TraceRecord>,
}

fn vec_names(out: &mut Vec<String>, base: &str, n: usize) {
    if n == 1 {
        out.push(base.to_string());
    } else {
        out.extend((1..=n).map(|i| format!("{base}_{i}")));
    }
}

fn mat_names(out: &mut Vec<String>, base: &str, m: &DMatrix<f64>) {
    if m.shape() == (1, 1) {
        out.push(base.to_string());
        return;
    }
    for i in 1..=m.nrows() {
        for j in 1..=m.ncols() {
            out.push(format!("{base}_{i}_{j}"));
        }
    }
}

fn push_mat(row: &mut Vec<f64>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            row.push(m[(i, j)]);
        }
    }
}

impl SimTrace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn columns(&self) -> Vec<String> {
        let mut names = vec!["t".to_string()];
        let Some(r) = self.records.first() else {
            return names;
        };
        vec_names(&mut names, "u_m", r.u_m.len());
        vec_names(&mut names, "y_m_ol", r.y_m_ol.len());
        vec_names(&mut names, "y_mo", r.y_mo.len());
        vec_names(&mut names, "y_p", r.y_p.len());
        vec_names(&mut names, "y_aug", r.y_aug.len());
        vec_names(&mut names, "e", r.e.len());
        vec_names(&mut names, "u_p", r.u_p.len());
        names.extend(self.state_names.iter().cloned());
        vec_names(&mut names, "x_pfc", r.x_pfc.len());
        mat_names(&mut names, "k_pe", &r.prop.k_pe);
        mat_names(&mut names, "k_ie", &r.gains.k_ie);
        mat_names(&mut names, "k_px", &r.prop.k_px);
        mat_names(&mut names, "k_ix", &r.gains.k_ix);
        mat_names(&mut names, "k_pu", &r.prop.k_pu);
        mat_names(&mut names, "k_iu", &r.gains.k_iu);
        names
    }

    fn row(r: &TraceRecord) -> Vec<f64> {
        let mut row = vec![r.t];
        for v in [
            &r.u_m, &r.y_m_ol, &r.y_mo, &r.y_p, &r.y_aug, &r.e, &r.u_p, &r.x_p, &r.x_pfc,
        ] {
            row.extend(v.iter());
        }
        for m in [
            &r.prop.k_pe,
            &r.gains.k_ie,
            &r.prop.k_px,
            &r.gains.k_ix,
            &r.prop.k_pu,
            &r.gains.k_iu,
        ] {
            push_mat(&mut row, m);
        }
        row
    }

    /// Writes every `decimate`-th record (the first always included) with
    /// nine significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, decimate: usize) -> io::Result<()> {
        let step = decimate.max(1);
        writeln!(w, "{}", self.columns().join(","))?;
        let mut line = String::new();
        for r in self.records.iter().step_by(step) {
            line.clear();
            for (i, v) in Self::row(r).iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.8e}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self, decimate: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, decimate)
            .expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// A parsed trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("trace has no header".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                let row = line
                    .split(',')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|e| Error::InvalidParameter(format!("trace row {}: {e}", i + 2)))?;
                if row.len() != columns.len() {
                    return Err(Error::InvalidParameter(format!(
                        "trace row {} has {} fields, header has {}",
                        i + 2,
                        row.len(),
                        columns.len()
                    )));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceTable { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// RMS of `y_p - y_m_ol`.
    pub rms_tracking_error: f64,
    /// RMS of the adaptation error `e`.
    pub rms_model_error: f64,
    /// RMS of `y_mo - y_m_ol`.
    pub rms_model_deviation: f64,
    /// Sum of `|u_p|^2 dt`.
    pub control_energy: f64,
    pub control_total_variation: f64,
    pub peak_u: f64,
}

fn rms<'a>(diffs: impl Iterator<Item = DVector<f64>> + 'a, n: usize) -> f64 {
    (diffs.map(|d| d.norm_squared()).sum::<f64>() / n as f64).sqrt()
}

pub fn metrics(trace: &SimTrace) -> Result<Metrics> {
    let recs = &trace.records;
    if recs.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = recs.len();
    let control_total_variation = recs
        .windows(2)
        .map(|w| (&w[1].u_p - &w[0].u_p).abs().sum())
        .sum();
    Ok(Metrics {
        rms_tracking_error: rms(recs.iter().map(|r| &r.y_p - &r.y_m_ol), n),
        rms_model_error: rms(recs.iter().map(|r| r.e.clone()), n),
        rms_model_deviation: rms(recs.iter().map(|r| &r.y_mo - &r.y_m_ol), n),
        control_energy: recs.iter().map(|r| r.u_p.norm_squared()).sum::<f64>() * trace.dt,
        control_total_variation,
        peak_u: recs.iter().map(|r| r.u_p.amax()).fold(0.0, f64::max),
    })
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = [
        "rms_tracking_error",
        "rms_model_error",
        "rms_model_deviation",
        "control_energy",
        "control_total_variation",
        "peak_u",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.rms_tracking_error,
            self.rms_model_error,
            self.rms_model_deviation,
            self.control_energy,
            self.control_total_variation,
            self.peak_u,
        ]
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in Self::NAMES.iter().zip(self.values()) {
            writeln!(f, "{name} = {v:.8e}")?;
        }
        Ok(())
    }
}
