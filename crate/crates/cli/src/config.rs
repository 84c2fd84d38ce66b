//! Run configuration: TOML schema, validation and resolution into a problem.
//!
//! ```toml
//! flux_kernel = [{ weight = 5.0, rate = 1.0 }]
//! capacity_kernel = []
//! initial = "paper_ramp"          # or "sine:<k>", "zero", or { file = "u0.txt" }
//! source = "zero"
//! snapshots = [0.0, 0.01, 0.02, 0.05, 0.1]
//!
//! [grid]
//! h = 2e-3                        # or n = 499
//!
//! [time]
//! tau = 5e-5
//! T = 0.1
//!
//! [scheme]
//! sigma = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use memheat::{
    step_count, ExpSumKernel, Grid1D, InitialPreset, KernelPair, KernelTerm, ProblemSpec, SchemeConfig, Source,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SNAPSHOTS: [f64; 5] = [0.0, 0.01, 0.02, 0.05, 0.1];

/// Snapshot times must sit on the time grid to this absolute tolerance.
const SNAPSHOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub flux_kernel: Vec<TermConfig>,
    #[serde(default)]
    pub capacity_kernel: Vec<TermConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_snapshots")]
    pub snapshots: Vec<f64>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub scheme: SchemeSection,
}

fn default_source() -> String {
    "zero".into()
}

fn default_snapshots() -> Vec<f64> {
    DEFAULT_SNAPSHOTS.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTerm")]
pub struct TermConfig {
    pub weight: f64,
    pub rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    weight: f64,
    rate: f64,
}

impl TryFrom<RawTerm> for TermConfig {
    type Error = String;

    fn try_from(raw: RawTerm) -> Result<Self, String> {
        if !(raw.weight > 0.0 && raw.weight.is_finite()) {
            return Err(format!("kernel weight must be positive and finite, got {}", raw.weight));
        }
        if !(raw.rate > 0.0 && raw.rate.is_finite()) {
            return Err(format!("kernel rate must be positive and finite, got {}", raw.rate));
        }
        Ok(TermConfig {
            weight: raw.weight,
            rate: raw.rate,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Preset(String),
    File { file: PathBuf },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Preset("paper_ramp".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<usize>,
    h: Option<f64>,
}

impl TryFrom<RawGrid> for GridConfig {
    type Error = String;

    fn try_from(raw: RawGrid) -> Result<Self, String> {
        match (raw.n, raw.h) {
            (Some(_), Some(_)) => Err("give exactly one of `n` and `h`, not both".into()),
            (None, None) => Err("one of `n` (interior nodes) or `h` (mesh step) is required".into()),
            (n, h) => Ok(GridConfig { n, h }),
        }
    }
}

impl GridConfig {
    fn resolve(&self) -> Result<Grid1D> {
        match (self.n, self.h) {
            (Some(n), _) => Grid1D::new(n).context("grid.n"),
            (_, Some(h)) => Grid1D::from_step(h).context("grid.h"),
            _ => unreachable!("validated on parse"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTime")]
pub struct TimeConfig {
    pub tau: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    tau: f64,
    #[serde(rename = "T", alias = "t_final")]
    t_final: f64,
}

impl TryFrom<RawTime> for TimeConfig {
    type Error = String;

    fn try_from(raw: RawTime) -> Result<Self, String> {
        if !(raw.tau > 0.0 && raw.tau.is_finite()) {
            return Err(format!("`tau` must be positive, got {}", raw.tau));
        }
        if !(raw.t_final > 0.0 && raw.t_final.is_finite()) {
            return Err(format!("`T` must be positive, got {}", raw.t_final));
        }
        Ok(TimeConfig {
            tau: raw.tau,
            t_final: raw.t_final,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    1.0
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection { sigma: default_sigma() }
    }
}

/// A snapshot time together with its level index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
}

/// A validated configuration turned into solver inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Canonical config: grid given by `n`, defaults filled in.
    pub config: RunConfig,
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Resolves against `base_dir`, the directory relative file paths refer to.
    pub fn resolve(&self, base_dir: &Path) -> Result<Resolved> {
        let grid = self.grid.resolve()?;
        let kernels = KernelPair::new(kernel(&self.flux_kernel)?, kernel(&self.capacity_kernel)?);
        let (u0, initial) = match &self.initial {
            InitialConfig::Preset(name) => {
                let preset: InitialPreset = name.parse().context("initial")?;
                (preset.values(&grid), InitialConfig::Preset(preset.to_string()))
            }
            InitialConfig::File { file } => {
                let path = base_dir.join(file);
                let values = read_node_values(&path, grid.n())?;
                (
                    values,
                    InitialConfig::File {
                        file: fs::canonicalize(&path).unwrap_or(path),
                    },
                )
            }
        };
        if self.source != "zero" {
            bail!(
                "source: unsupported preset {:?} (only \"zero\" is available)",
                self.source
            );
        }
        let steps = step_count(self.time.t_final, self.time.tau).context("time")?;
        let scheme = SchemeConfig::new(self.scheme.sigma, self.time.tau).context("scheme.sigma")?;
        let snapshots = snapshots(&self.snapshots, self.time.tau, self.time.t_final)?;
        let problem = ProblemSpec::new(grid, kernels, u0, Source::Zero, self.time.t_final)?;
        let mut config = self.clone();
        config.grid = GridConfig {
            n: Some(grid.n()),
            h: None,
        };
        config.initial = initial;
        config.snapshots = snapshots.iter().map(|s| s.t).collect();
        Ok(Resolved {
            config,
            problem,
            scheme,
            steps,
            snapshots,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn kernel(terms: &[TermConfig]) -> Result<ExpSumKernel> {
    Ok(ExpSumKernel::new(
        terms.iter().map(|t| KernelTerm::new(t.weight, t.rate)).collect(),
    )?)
}

fn snapshots(times: &[f64], tau: f64, horizon: f64) -> Result<Vec<Snapshot>> {
    let mut out: Vec<Snapshot> = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if !(t >= 0.0 && t <= horizon + SNAPSHOT_TOLERANCE) {
            bail!("snapshots[{i}]: time {t} lies outside [0, T = {horizon}]");
        }
        let step = (t / tau).round();
        if (t - step * tau).abs() > SNAPSHOT_TOLERANCE {
            bail!("snapshots[{i}]: time {t} is not on the time grid of step tau = {tau}");
        }
        out.push(Snapshot {
            step: step as usize,
            t: step * tau,
        });
    }
    out.sort_by_key(|s| s.step);
    out.dedup_by_key(|s| s.step);
    Ok(out)
}

/// Reads one value per interior node; separators are whitespace or commas,
/// `#` starts a comment.
fn read_node_values(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("initial: reading {}", path.display()))?;
    let mut values = Vec::with_capacity(n);
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for token in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
        {
            let v: f64 = token
                .parse()
                .with_context(|| format!("initial: {}:{}: not a number: {token:?}", path.display(), line_no + 1))?;
            values.push(v);
        }
    }
    if values.len() != n {
        bail!(
            "initial: {} holds {} values, the grid has {n} interior nodes",
            path.display(),
            values.len()
        );
    }
    Ok(values)
}
