//! Initial temperature profiles on the interior nodes.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spatial::{sine_mode, Grid1D};

/// Named initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    /// `u0 = x` on `(0, 0.5]`, zero on `(0.5, 1)`.
    PaperRamp,
    /// `sin(k π x)`.
    Sine(usize),
    Zero,
}

impl InitialPreset {
    pub fn values(&self, grid: &Grid1D) -> Vec<f64> {
        match *self {
            InitialPreset::PaperRamp => paper_ramp(grid),
            InitialPreset::Sine(k) => sine_mode(grid, k),
            InitialPreset::Zero => vec![0.0; grid.n()],
        }
    }
}

impl FromStr for InitialPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper_ramp" => Ok(InitialPreset::PaperRamp),
            "zero" => Ok(InitialPreset::Zero),
            other => match other.strip_prefix("sine:") {
                Some(k) => match k.trim().parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(InitialPreset::Sine(k)),
                    _ => Err(Error::InvalidArgument(format!(
                        "invalid sine mode index in preset {other:?}"
                    ))),
                },
                None => Err(Error::InvalidArgument(format!(
                    "unknown initial preset {other:?} (expected paper_ramp, sine:<k> or zero)"
                ))),
            },
        }
    }
}

impl fmt::Display for InitialPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialPreset::PaperRamp => f.write_str("paper_ramp"),
            InitialPreset::Sine(k) => write!(f, "sine:{k}"),
            InitialPreset::Zero => f.write_str("zero"),
        }
    }
}

/// Ramp with a jump at `x = 0.5`; a node exactly at 0.5 takes the left value.
pub fn paper_ramp(grid: &Grid1D) -> Vec<f64> {
    (1..=grid.n())
        .map(|k| {
            // compare on the integer index so x = 0.5 is detected exactly
            if 2 * k <= grid.n() + 1 {
                grid.node(k)
            } else {
                0.0
            }
        })
        .collect()
}

/// Resolves a preset name to node values.
pub fn initial_preset(name: &str, grid: &Grid1D) -> Result<Vec<f64>> {
    Ok(name.parse::<InitialPreset>()?.values(grid))
}
