//! CSV writers. Every file opens with `#` provenance lines echoing the
//! resolved configuration; numbers carry 17 significant digits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header lines written atop every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    lines: Vec<String>,
}

impl Provenance {
    /// `resolved_toml` must be the canonical config; it is echoed verbatim so
    /// stripping the `# ` prefix reproduces a runnable config file.
    pub fn new(command: &str, extra: &[String], resolved_toml: &str) -> Self {
        let mut lines = vec![format!("memheat {} {command}", env!("CARGO_PKG_VERSION"))];
        lines.extend(extra.iter().cloned());
        lines.push("--- resolved config ---".into());
        lines.extend(resolved_toml.lines().map(str::to_owned));
        lines.push("--- end config ---".into());
        Self { lines }
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for line in &self.lines {
            if line.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {line}")?;
            }
        }
        Ok(())
    }
}

pub struct CsvFile {
    out: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path, provenance: &Provenance, header: &str) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        provenance.write_to(&mut out)?;
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
