//! Structured pass/fail reports for theorem-level checks.

use std::path::{Path, PathBuf};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sense {
    /// Pass iff `value <= threshold`.
    AtMost,
    /// Pass iff `value >= threshold`.
    AtLeast,
    /// Informational only; always passes.
    Info,
}

#[derive(Clone, Debug)]
pub struct Metric {
    pub name: String,
    /// Short free-form parameter echo for the CSV row.
    pub parameters: String,
    pub value: f64,
    pub threshold: f64,
    pub sense: Sense,
    pub pass: bool,
}

/// One experiment's outcome: configuration echo, metric rows, artifact paths.
/// The experiment passes iff every metric passes.
#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub id: String,
    pub config_echo: String,
    pub metrics: Vec<Metric>,
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn new(id: impl Into<String>) -> Self {
        ExperimentReport { id: id.into(), ..Default::default() }
    }

    pub fn push(&mut self, name: &str, parameters: &str, value: f64, threshold: f64, sense: Sense) {
        let pass = match sense {
            Sense::AtMost => value <= threshold,
            Sense::AtLeast => value >= threshold,
            Sense::Info => true,
        };
        self.metrics.push(Metric {
            name: name.into(),
            parameters: parameters.into(),
            value,
            threshold,
            sense,
            pass,
        });
    }

    pub fn info(&mut self, name: &str, parameters: &str, value: f64) {
        self.push(name, parameters, value, f64::NAN, Sense::Info);
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    /// CSV rows: check name, parameters, measured value, tolerance, pass/fail.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "check,parameters,value,threshold,pass")?;
        for m in &self.metrics {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{}",
                m.name,
                m.parameters,
                m.value,
                m.threshold,
                if m.pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }

    pub fn write_summary(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "experiment: {}", self.id)?;
        writeln!(w, "overall: {}", if self.pass() { "pass" } else { "FAIL" })?;
        for m in &self.metrics {
            let rel = match m.sense {
                Sense::AtMost => "<=",
                Sense::AtLeast => ">=",
                Sense::Info => "(info)",
            };
            writeln!(
                w,
                "  [{}] {} = {:.6e} {} {:.6e}  {}",
                if m.pass { "pass" } else { "FAIL" },
                m.name,
                m.value,
                rel,
                m.threshold,
                m.parameters
            )?;
        }
        for a in &self.artifacts {
            writeln!(w, "  artifact: {}", a.display())?;
        }
        if !self.config_echo.is_empty() {
            writeln!(w, "--- configuration ---")?;
            writeln!(w, "{}", self.config_echo)?;
        }
        Ok(())
    }

    /// Writes `<id>-metrics.csv` and `<id>-summary.txt` under `dir` and
    /// records them as artifacts.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}-metrics.csv", self.id));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&csv)?);
        self.write_csv(&mut f)?;
        self.artifacts.push(csv);
        let txt = dir.join(format!("{}-summary.txt", self.id));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&txt)?);
        self.write_summary(&mut f)?;
        self.artifacts.push(txt);
        Ok(())
    }

    /// One console line per metric plus an overall verdict.
    pub fn print(&self) {
        for m in &self.metrics {
            println!(
                "[{}] {}/{}: {:.6e} vs {:.6e}",
                if m.pass { "pass" } else { "FAIL" },
                self.id,
                m.name,
                m.value,
                m.threshold
            );
        }
        println!("[{}] {} overall", if self.pass() { "pass" } else { "FAIL" }, self.id);
    }
}
