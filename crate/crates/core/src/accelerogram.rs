//! Uniformly sampled acceleration records and their plain-text format.
//!
//! The native format is a header line `# dt=<seconds> n=<count> label=<text>`
//! followed by one acceleration value (in g) per line, written with nine
//! significant digits. Recorded motions may also arrive as two whitespace- or
//! comma-separated columns `time acceleration`; the time step is inferred and
//! must be uniform to within one part in a million.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Standard gravity used for every g <-> m/s² conversion.
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq)]
pub struct Accelerogram {
    dt: f64,
    samples: Vec<f64>,
    pub label: String,
}

/// Unit of the acceleration column in an ingested file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccelUnit {
    G,
    MetersPerSecondSquared,
}

impl std::str::FromStr for AccelUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(AccelUnit::G),
            "m/s2" | "m/s^2" => Ok(AccelUnit::MetersPerSecondSquared),
            other => Err(Error::Format(format!(
                "unknown acceleration unit '{other}' (expected g or m/s2)"
            ))),
        }
    }
}

impl Accelerogram {
    /// Sample `k` is the acceleration (g) at time `k * dt`.
    pub fn new(dt: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Parameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Parameter("accelerogram has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            dt,
            samples,
            label: label.into(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Same record with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dt: self.dt,
            samples: self.samples.iter().map(|a| a * factor).collect(),
            label: self.label.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * (self.samples.len() + 1));
        let label = self.label.replace(['\n', '\r'], " ");
        let _ = writeln!(
            out,
            "# dt={} n={} label={}",
            self.dt,
            self.samples.len(),
            label
        );
        for v in &self.samples {
            out.push_str(&format_sig9(*v));
            out.push('\n');
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parses the native single-column format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty accelerogram file".into()))?;
        let (dt, n, label) = parse_header(header)?;
        let samples: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("sample {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        if samples.len() != n {
            return Err(Error::Format(format!(
                "header announces {n} samples, file holds {}",
                samples.len()
            )));
        }
        Self::new(dt, samples, label)
    }

    /// Parses a `time, acceleration` two-column file, inferring the step.
    pub fn from_two_column(text: &str, unit: AccelUnit, label: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty());
            let (Some(t), Some(a), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Format(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))
            };
            times.push(parse(t)?);
            values.push(parse(a)?);
        }
        if times.len() < 2 {
            return Err(Error::Format(
                "need at least two samples to infer the time step".into(),
            ));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Format("time column must be increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if ((step - dt) / dt).abs() > 1e-6 {
                return Err(Error::Format(format!(
                    "non-uniform time step at row {}: {step} vs {dt}",
                    i + 1
                )));
            }
        }
        let scale = match unit {
            AccelUnit::G => 1.0,
            AccelUnit::MetersPerSecondSquared => 1.0 / STANDARD_GRAVITY,
        };
        Self::new(dt, values.into_iter().map(|v| v * scale).collect(), label)
    }

    /// Reads either format: files whose first line starts with `# dt=` are
    /// native, anything else is treated as two-column data in `unit`.
    pub fn read(path: &Path, unit: Option<AccelUnit>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with("# dt=") {
            return Self::from_text(&text);
        }
        let unit = unit.ok_or_else(|| {
            Error::Format(format!(
                "{}: two-column file requires an explicit unit",
                path.display()
            ))
        })?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_two_column(&text, unit, &label)
    }
}

fn parse_header(header: &str) -> Result<(f64, usize, String)> {
    let rest = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format(format!("bad header: {header}")))?;
    let bad = || Error::Format(format!("bad header: {header}"));
    let rest = rest.strip_prefix("dt=").ok_or_else(bad)?;
    let (dt, rest) = rest.split_once(' ').ok_or_else(bad)?;
    let rest = rest.strip_prefix("n=").ok_or_else(bad)?;
    let (n, rest) = rest.split_once(' ').unwrap_or((rest, ""));
    let label = rest.strip_prefix("label=").unwrap_or("");
    let dt = dt.parse::<f64>().map_err(|_| bad())?;
    let n = n.parse::<usize>().map_err(|_| bad())?;
    Ok((dt, n, label.to_string()))
}

/// Nine significant digits in scientific notation, e.g. `-1.23456789e-2`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.8e}")
}
