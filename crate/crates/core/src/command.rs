//! Reference command generators.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Step,
    Square,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSpec {
    pub kind: CommandKind,
    /// Output units (radians for a roll command).
    pub amplitude: f64,
    /// Seconds; square waves only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Added to the square wave.
    #[serde(default)]
    pub offset: f64,
}

impl CommandSpec {
    pub fn step(amplitude: f64) -> Self {
        CommandSpec {
            kind: CommandKind::Step,
            amplitude,
            period: None,
            offset: 0.0,
        }
    }

    pub fn square(amplitude: f64, period: f64) -> Self {
        CommandSpec {
            kind: CommandKind::Square,
            amplitude,
            period: Some(period),
            offset: 0.0,
        }
    }

    pub fn constant(amplitude: f64) -> Self {
        CommandSpec {
            kind: CommandKind::Constant,
            amplitude,
            period: None,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.offset.is_finite() {
            return Err(Error::InvalidParameter(
                "command amplitude and offset must be finite".into(),
            ));
        }
        if self.kind == CommandKind::Square {
            match self.period {
                Some(p) if p > 0.0 && p.is_finite() => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "square command needs a positive period".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Constant over time (step or constant kinds).
    pub fn is_constant(&self) -> bool {
        self.kind != CommandKind::Square
    }

    /// Scalar command value at `t >= 0`. The square wave is `+amplitude` on
    /// the first half of each period, including its start.
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            CommandKind::Step | CommandKind::Constant => self.amplitude,
            CommandKind::Square => {
                let period = self.period.unwrap_or(f64::INFINITY);
                let phase = (t / period).rem_euclid(1.0);
                let sign = if phase < 0.5 { 1.0 } else { -1.0 };
                self.amplitude * sign + self.offset
            }
        }
    }

    /// The same value on every one of `channels` command inputs.
    pub fn value_vec(&self, t: f64, channels: usize) -> DVector<f64> {
        DVector::from_element(channels, self.value(t))
    }
}
