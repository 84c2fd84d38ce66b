use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use memheat::diagnostics::level_discrepancy;
use memheat::oracles::DENSE_BLOCK_MAX_NODES;
use memheat::{
    audit, dense_block_run, run, step_count, volterra_solve, AuditReport, ModalSeries, SchemeConfig, Trajectory,
};
use rayon::prelude::*;

use crate::config::{Resolved, RunConfig};
use crate::output::{num, CsvFile, Provenance};

/// Refinement levels of the compare convergence table.
const REFINEMENTS: usize = 3;

pub struct SolveSummary {
    pub report: AuditReport,
    pub final_u: Vec<f64>,
}

impl SolveSummary {
    pub fn final_energy(&self) -> f64 {
        self.report.steps.last().map_or(0.0, |d| d.energy)
    }
}

/// Runs the scheme, writes one `x,u` file per snapshot and the energy log.
pub fn solve(resolved: &Resolved, out: &Path, provenance: &Provenance) -> Result<SolveSummary> {
    let trajectory = run(&resolved.problem, resolved.scheme, &mut []).context("running the scheme")?;
    write_snapshots(resolved, &trajectory, out, provenance)?;
    let report = audit(&trajectory, &resolved.problem, resolved.scheme)?;
    let mut log = CsvFile::create(&out.join("energy.csv"), provenance, "n,t,energy,bound,margin")?;
    for d in &report.steps {
        log.row(&[d.step.to_string(), num(d.t), num(d.energy), num(d.bound), num(d.margin)])?;
    }
    log.finish()?;
    Ok(SolveSummary {
        report,
        final_u: trajectory.last().u.clone(),
    })
}

fn write_snapshots(resolved: &Resolved, trajectory: &Trajectory, out: &Path, provenance: &Provenance) -> Result<()> {
    let grid = resolved.problem.grid();
    let width = resolved.steps.to_string().len();
    for snap in &resolved.snapshots {
        let state = &trajectory.states[snap.step];
        let path = out.join(format!("snapshot_{:0width$}.csv", snap.step));
        let mut csv = CsvFile::create(&path, provenance, "x,u")?;
        csv.row(&[num(0.0), num(0.0)])?;
        for (k, u) in state.u.iter().enumerate() {
            csv.row(&[num(grid.node(k + 1)), num(*u)])?;
        }
        csv.row(&[num(1.0), num(0.0)])?;
        csv.finish()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Volterra,
    Modal,
    DenseBlock,
}

impl Oracle {
    pub fn name(self) -> &'static str {
        match self {
            Oracle::Volterra => "volterra",
            Oracle::Modal => "modal",
            Oracle::DenseBlock => "dense-block",
        }
    }
}

/// One row of the τ-halving table.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub tau: f64,
    /// Worst over the snapshot times.
    pub snapshot_max_abs: f64,
    pub snapshot_weighted_l2: f64,
    /// Worst over every time level.
    pub all_levels_max_abs: f64,
}

/// Compares the scheme with `oracle` at the snapshots, for τ, τ/2 and τ/4.
pub fn compare(
    resolved: &Resolved,
    oracle: Oracle,
    modes: usize,
    out: &Path,
    provenance: &Provenance,
) -> Result<Vec<ConvergenceRow>> {
    let problem = &resolved.problem;
    let grid = *problem.grid();
    // Preconditions before any time stepping.
    let series = match oracle {
        Oracle::Modal => Some(ModalSeries::new(problem, modes).context("modal oracle")?),
        Oracle::DenseBlock if grid.n() > DENSE_BLOCK_MAX_NODES => {
            bail!(
                "dense-block oracle: grid has {} interior nodes, limit is {DENSE_BLOCK_MAX_NODES}",
                grid.n()
            )
        }
        _ => None,
    };
    let scale = |level: usize| (1usize << level) as f64;
    for level in 0..REFINEMENTS {
        step_count(problem.horizon(), resolved.scheme.tau / scale(level))
            .with_context(|| format!("refinement level {level}"))?;
    }

    let mut detail = CsvFile::create(&out.join("compare.csv"), provenance, "level,tau,t,max_abs,weighted_l2")?;
    let mut rows = Vec::with_capacity(REFINEMENTS);
    for level in 0..REFINEMENTS {
        let config = SchemeConfig::new(resolved.scheme.sigma, resolved.scheme.tau / scale(level))?;
        let scheme = run(problem, config, &mut [])?;
        let reference = match oracle {
            Oracle::Volterra => Some(volterra_solve(problem, config.tau)?),
            Oracle::DenseBlock => Some(dense_block_run(problem, config)?),
            Oracle::Modal => None,
        };
        let oracle_u = |step: usize| -> Vec<f64> {
            match (&reference, &series) {
                (Some(r), _) => r.states[step].u.clone(),
                (None, Some(s)) => s.eval(scheme.states[step].t),
                (None, None) => unreachable!(),
            }
        };
        let mut row = ConvergenceRow {
            tau: config.tau,
            snapshot_max_abs: 0.0,
            snapshot_weighted_l2: 0.0,
            all_levels_max_abs: 0.0,
        };
        for (step, state) in scheme.states.iter().enumerate() {
            let d = level_discrepancy(&state.u, &oracle_u(step), &grid)?;
            row.all_levels_max_abs = row.all_levels_max_abs.max(d.max_abs);
        }
        for snap in &resolved.snapshots {
            let step = snap.step << level;
            let d = level_discrepancy(&scheme.states[step].u, &oracle_u(step), &grid)?;
            row.snapshot_max_abs = row.snapshot_max_abs.max(d.max_abs);
            row.snapshot_weighted_l2 = row.snapshot_weighted_l2.max(d.weighted_l2);
            detail.row(&[
                level.to_string(),
                num(config.tau),
                num(snap.t),
                num(d.max_abs),
                num(d.weighted_l2),
            ])?;
        }
        rows.push(row);
    }
    detail.finish()?;

    let mut table = CsvFile::create(
        &out.join("convergence.csv"),
        provenance,
        "level,tau,snapshot_max_abs,snapshot_weighted_l2,all_levels_max_abs,order",
    )?;
    for (level, row) in rows.iter().enumerate() {
        let order = match level.checked_sub(1).map(|p| rows[p].snapshot_max_abs) {
            Some(prev) if prev > 0.0 && row.snapshot_max_abs > 0.0 => num((prev / row.snapshot_max_abs).log2()),
            _ => String::new(),
        };
        table.row(&[
            level.to_string(),
            num(row.tau),
            num(row.snapshot_max_abs),
            num(row.snapshot_weighted_l2),
            num(row.all_levels_max_abs),
            order,
        ])?;
    }
    table.finish()?;
    Ok(rows)
}

/// Per-value result of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub value: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub final_energy: f64,
}

/// Parses a comma-separated list; an empty list is allowed.
pub fn parse_values(list: &str) -> Result<Vec<(String, f64)>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: f64 = s.parse().map_err(|_| anyhow!("--values: {s:?} is not a number"))?;
            Ok((s.to_owned(), v))
        })
        .collect()
}

/// Sets the numeric scalar addressed by the dotted `path`. Numeric segments
/// index arrays; missing tables along the way are created.
pub fn set_path(doc: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let invalid = |why: String| anyhow!("invalid parameter path {path:?}: {why}");
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(invalid("empty segment".into()));
    }
    let (leaf, parents) = segments.split_last().expect("split yields one segment");
    // Edit a copy so a failed edit leaves `doc` untouched.
    let mut root = toml::Value::Table(doc.clone());
    let mut node = &mut root;
    for seg in parents {
        node = match node {
            toml::Value::Table(t) => t
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => array_slot(a, seg).map_err(invalid)?,
            _ => return Err(invalid(format!("{seg:?} descends into a scalar"))),
        };
    }
    let slot = match node {
        toml::Value::Table(t) => t.entry(leaf.to_string()).or_insert(toml::Value::Float(f64::NAN)),
        toml::Value::Array(a) => array_slot(a, leaf).map_err(invalid)?,
        _ => return Err(invalid(format!("{leaf:?} descends into a scalar"))),
    };
    *slot = match slot {
        toml::Value::Integer(_) => toml::Value::Integer(
            raw.parse()
                .map_err(|_| anyhow!("value {raw:?} for integer parameter {path:?} is not an integer"))?,
        ),
        toml::Value::Float(_) => toml::Value::Float(raw.parse()?),
        other => return Err(invalid(format!("addresses a {}, not a number", other.type_str()))),
    };
    if let toml::Value::Table(t) = root {
        *doc = t;
    }
    Ok(())
}

fn array_slot<'a>(array: &'a mut toml::value::Array, seg: &str) -> std::result::Result<&'a mut toml::Value, String> {
    let i: usize = seg.parse().map_err(|_| format!("{seg:?} is not an array index"))?;
    let len = array.len();
    array
        .get_mut(i)
        .ok_or_else(|| format!("index {i} out of range (length {len})"))
}

/// One solve per value, concurrently, each into its own subdirectory.
pub fn sweep(
    config_path: &Path,
    base_dir: &Path,
    param: &str,
    values: &[(String, f64)],
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let base = RunConfig::parse(&text).with_context(|| format!("invalid config {}", config_path.display()))?;
    let base_resolved = base.resolve(base_dir)?;
    let doc: toml::Table = toml::from_str(&text)?;
    // Validate every value before solving any.
    let jobs: Vec<(usize, &str, f64, Resolved)> = values
        .iter()
        .enumerate()
        .map(|(i, (raw, value))| {
            let mut edited = doc.clone();
            set_path(&mut edited, param, raw)?;
            let config: RunConfig = toml::Value::Table(edited)
                .try_into()
                .with_context(|| format!("{param} = {raw}"))?;
            let resolved = config.resolve(base_dir).with_context(|| format!("{param} = {raw}"))?;
            Ok((i, raw.as_str(), *value, resolved))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(i, raw, value, resolved)| {
            let dir: PathBuf = out.join(format!("{i:03}_{raw}"));
            let provenance = Provenance::new("sweep", &[format!("sweep {param} = {raw}")], &resolved.config.to_toml());
            let summary = solve(resolved, &dir, &provenance).with_context(|| format!("{param} = {raw}"))?;
            let (min_u, max_u) = summary
                .final_u
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
                    (lo.min(u), hi.max(u))
                });
            Ok(SweepRow {
                value: *value,
                min_u,
                max_u,
                final_energy: summary.final_energy(),
            })
        })
        .collect::<Result<_>>()?;

    let listed: Vec<&str> = values.iter().map(|(raw, _)| raw.as_str()).collect();
    let provenance = Provenance::new(
        "sweep",
        &[format!("sweep {param} over [{}]", listed.join(", "))],
        &base_resolved.config.to_toml(),
    );
    let mut summary = CsvFile::create(&out.join("summary.csv"), &provenance, "value,min_u,max_u,final_energy")?;
    for row in &rows {
        summary.row(&[num(row.value), num(row.min_u), num(row.max_u), num(row.final_energy)])?;
    }
    summary.finish()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> toml::Table {
        toml::from_str("flux_kernel = [{ weight = 5.0, rate = 1.0 }]\n[grid]\nn = 10\n").unwrap()
    }

    #[test]
    fn set_path_edits_scalars() {
        let mut d = doc();
        set_path(&mut d, "flux_kernel.0.weight", "10").unwrap();
        assert_eq!(d["flux_kernel"][0]["weight"].as_float(), Some(10.0));
        set_path(&mut d, "grid.n", "20").unwrap();
        assert_eq!(d["grid"]["n"].as_integer(), Some(20));
        set_path(&mut d, "scheme.sigma", "0.5").unwrap();
        assert_eq!(d["scheme"]["sigma"].as_float(), Some(0.5));
    }

    #[test]
    fn set_path_rejects_bad_paths() {
        let mut d = doc();
        assert!(set_path(&mut d, "flux_kernel.3.weight", "1").is_err());
        assert!(set_path(&mut d, "flux_kernel", "1").is_err());
        assert!(set_path(&mut d, "grid.n", "2.5").is_err());
        assert!(set_path(&mut d, "grid..n", "2").is_err());
        assert!(set_path(&mut d, "grid.n.x", "2").is_err());
        // failed edits leave the document intact
        assert_eq!(d, doc());
    }

    #[test]
    fn value_lists() {
        assert!(parse_values("").unwrap().is_empty());
        let v = parse_values("1, 5,10").unwrap();
        assert_eq!(v.iter().map(|p| p.1).collect::<Vec<_>>(), [1.0, 5.0, 10.0]);
        assert!(parse_values("1,x").is_err());
    }
}
