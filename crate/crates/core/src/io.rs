//! File formats: spectrum CSV, run configuration JSON, fit and simulation
//! reports.
//!
//! Spectrum files are CSV with a mandatory first line `# axis=<nm|cm-1>`,
//! optional further `# key=value` comment lines, and then `x,intensity` rows
//! with strictly monotone x. Floats are printed with 12 significant digits
//! and LF line endings, so parse-then-serialize is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ensemble::{ContrastScan, EnsembleConfig, EnsembleSummary, SpectrumHistogram};
use crate::fit::FitResult;
use crate::units::{nm_to_wavenumber, wavenumber_to_nm, AxisUnit, UnitError};

#[derive(Debug, Error)]
pub enum IoFormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line 1: missing header `# axis=<nm|cm-1>`")]
    MissingHeader,
    #[error("line 1: {0}")]
    BadAxis(UnitError),
    #[error("line {line}: expected `x,intensity`, got `{content}`")]
    BadRow { line: usize, content: String },
    #[error("line {line}: non-numeric value `{content}`")]
    BadNumber { line: usize, content: String },
    #[error("line {line}: x values must be strictly monotone")]
    NonMonotonic { line: usize },
    #[error("no data rows found")]
    Empty,
    #[error("config error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A sampled spectrum: x axis (nm or cm⁻¹) and intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub axis: AxisUnit,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Spectrum {
    pub fn from_histogram(h: &SpectrumHistogram) -> Self {
        Self {
            axis: h.axis,
            xs: h.centers.clone(),
            ys: h.intensities.clone(),
        }
    }

    /// Convert the axis to cm⁻¹ (pointwise, no Jacobian reweighting: the
    /// intensities are samples in arbitrary units, not a density), sorted
    /// ascending. A cm⁻¹ spectrum is returned unchanged apart from ordering.
    pub fn to_wavenumber(&self) -> Result<Spectrum, UnitError> {
        let mut pts: Vec<(f64, f64)> = match self.axis {
            AxisUnit::Wavenumber => self
                .xs
                .iter()
                .copied()
                .zip(self.ys.iter().copied())
                .collect(),
            AxisUnit::Nanometer => self
                .xs
                .iter()
                .zip(&self.ys)
                .map(|(&x, &y)| nm_to_wavenumber(x).map(|e| (e, y)))
                .collect::<Result<_, _>>()?,
        };
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Spectrum {
            axis: AxisUnit::Wavenumber,
            xs: pts.iter().map(|p| p.0).collect(),
            ys: pts.iter().map(|p| p.1).collect(),
        })
    }

    /// Convert the axis to nm, sorted ascending.
    pub fn to_nanometer(&self) -> Result<Spectrum, UnitError> {
        let mut pts: Vec<(f64, f64)> = match self.axis {
            AxisUnit::Nanometer => self
                .xs
                .iter()
                .copied()
                .zip(self.ys.iter().copied())
                .collect(),
            AxisUnit::Wavenumber => self
                .xs
                .iter()
                .zip(&self.ys)
                .map(|(&x, &y)| wavenumber_to_nm(x).map(|l| (l, y)))
                .collect::<Result<_, _>>()?,
        };
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Spectrum {
            axis: AxisUnit::Nanometer,
            xs: pts.iter().map(|p| p.0).collect(),
            ys: pts.iter().map(|p| p.1).collect(),
        })
    }
}

/// 12 significant digits, scientific notation; the fixed width keeps
/// serialize-parse-serialize a fixpoint.
pub fn format_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Render a spectrum to CSV. `meta` rows become `# key=value` comment lines
/// after the axis header.
pub fn spectrum_to_csv(s: &Spectrum, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# axis={}", s.axis);
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    for (x, y) in s.xs.iter().zip(&s.ys) {
        let _ = writeln!(out, "{},{}", format_sig12(*x), format_sig12(*y));
    }
    out
}

/// Parse a spectrum from CSV text (see module docs for the format).
pub fn parse_spectrum(text: &str) -> Result<Spectrum, IoFormatError> {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(IoFormatError::MissingHeader);
    };
    let axis_str = first
        .strip_prefix("# axis=")
        .or_else(|| first.strip_prefix("#axis="))
        .ok_or(IoFormatError::MissingHeader)?;
    let axis: AxisUnit = axis_str.trim().parse().map_err(IoFormatError::BadAxis)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut row_lines = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((xs_str, ys_str)) = line.split_once(',') else {
            return Err(IoFormatError::BadRow {
                line: line_no,
                content: raw.to_string(),
            });
        };
        let parse = |tok: &str| -> Result<f64, IoFormatError> {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| IoFormatError::BadNumber {
                    line: line_no,
                    content: tok.trim().to_string(),
                })
        };
        xs.push(parse(xs_str)?);
        ys.push(parse(ys_str)?);
        row_lines.push(line_no);
    }
    if xs.is_empty() {
        return Err(IoFormatError::Empty);
    }
    // strictly monotone, either direction; report the first offender
    if xs.len() >= 2 {
        let ascending = xs[1] > xs[0];
        for k in 1..xs.len() {
            let ok = if ascending {
                xs[k] > xs[k - 1]
            } else {
                xs[k] < xs[k - 1]
            };
            if !ok {
                return Err(IoFormatError::NonMonotonic { line: row_lines[k] });
            }
        }
    }
    Ok(Spectrum { axis, xs, ys })
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum, IoFormatError> {
    parse_spectrum(&std::fs::read_to_string(path)?)
}

pub fn write_spectrum(
    path: &Path,
    s: &Spectrum,
    meta: &[(String, String)],
) -> Result<(), IoFormatError> {
    std::fs::write(path, spectrum_to_csv(s, meta))?;
    Ok(())
}

/// SHA-256 of raw bytes, lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// Digest of a config: SHA-256 over its canonical (serde) JSON encoding, so
/// formatting and key layout of the input file do not matter.
pub fn config_digest<T: Serialize>(cfg: &T) -> Result<String, IoFormatError> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

/// Output locations of a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Spectrum CSV path.
    pub spectrum: String,
    /// Summary JSON path.
    pub summary: String,
}

/// Top-level document for `simulate`: the ensemble configuration plus where
/// to write the results. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ensemble: EnsembleConfig,
    pub output: OutputPaths,
}

pub fn read_run_config(path: &Path) -> Result<RunConfig, IoFormatError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Summary JSON written next to a simulated spectrum.
#[derive(Serialize)]
pub struct SimulateReport<'a> {
    pub tool_version: &'a str,
    pub config_digest: &'a str,
    pub config: &'a EnsembleConfig,
    pub summary: &'a EnsembleSummary,
}

/// Which fitted component carries the |m|=3/2 doublet when forming
/// I_{3/2}/I_{1/2}; physically undetermined for an unlabeled spectrum, so it
/// is a reporting choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreeHalvesSide {
    Upper,
    Lower,
}

/// Fitted parameters and uncertainties of one spectrum decomposition.
/// Non-finite uncertainties (singular curvature) are reported as null.
#[derive(Serialize, Deserialize, Debug)]
pub struct FitReport {
    pub tool_version: String,
    /// SHA-256 of the input spectrum file bytes.
    pub input_digest: String,
    /// Axis the fit ran on.
    pub axis: String,
    pub converged: bool,
    pub iterations: usize,
    pub amp1: f64,
    pub center1: f64,
    pub sigma1: f64,
    pub amp2: f64,
    pub center2: f64,
    pub sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    pub stderr_amp1: Option<f64>,
    pub stderr_center1: Option<f64>,
    pub stderr_sigma1: Option<f64>,
    pub stderr_amp2: Option<f64>,
    pub stderr_center2: Option<f64>,
    pub stderr_sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_baseline: Option<f64>,
    /// |c2 − c1| converted to cm⁻¹ whatever the fit axis.
    pub splitting_cm1: f64,
    /// Area ratio of the upper-center component over the lower-center one.
    pub area_ratio: f64,
    /// Which component was taken as |m|=3/2 for the weight ratio below.
    pub three_halves_component: ThreeHalvesSide,
    /// I_{3/2}/I_{1/2} under the chosen assignment.
    pub weight_ratio_i3_over_i1: f64,
    pub residual_rms: f64,
}

impl FitReport {
    pub fn new(
        fit: &FitResult,
        axis: AxisUnit,
        three_halves: ThreeHalvesSide,
        input_digest: String,
        tool_version: &str,
    ) -> Result<Self, UnitError> {
        let m = &fit.model;
        let splitting_cm1 = match axis {
            AxisUnit::Wavenumber => fit.splitting,
            AxisUnit::Nanometer => (nm_to_wavenumber(m.c1)? - nm_to_wavenumber(m.c2)?).abs(),
        };
        let weight_ratio_i3_over_i1 = match three_halves {
            ThreeHalvesSide::Upper => fit.area_ratio,
            ThreeHalvesSide::Lower => fit.area_ratio.recip(),
        };
        let finite = |v: f64| v.is_finite().then_some(v);
        Ok(Self {
            tool_version: tool_version.to_string(),
            input_digest,
            axis: axis.to_string(),
            converged: fit.converged,
            iterations: fit.iterations,
            amp1: m.amp1,
            center1: m.c1,
            sigma1: m.s1,
            amp2: m.amp2,
            center2: m.c2,
            sigma2: m.s2,
            baseline: fit.baseline,
            stderr_amp1: finite(fit.stderr.amp1),
            stderr_center1: finite(fit.stderr.c1),
            stderr_sigma1: finite(fit.stderr.s1),
            stderr_amp2: finite(fit.stderr.amp2),
            stderr_center2: finite(fit.stderr.c2),
            stderr_sigma2: finite(fit.stderr.s2),
            stderr_baseline: fit.stderr.baseline.and_then(finite),
            splitting_cm1,
            area_ratio: fit.area_ratio,
            three_halves_component: three_halves,
            weight_ratio_i3_over_i1,
            residual_rms: fit.residual_rms,
        })
    }
}

/// Render a contrast scan as CSV: one row per sigma, fit failures inline,
/// monotonicity assessment appended as metadata comments.
pub fn contrast_scan_to_csv(scan: &ContrastScan, digest: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# contrast scan");
    let _ = writeln!(out, "# config_digest={digest}");
    let _ = writeln!(
        out,
        "sigma,contrast,w_z_exc_z_analyzer,w_y_exc_x_analyzer,failure"
    );
    let opt = |v: Option<f64>| v.map(format_sig12).unwrap_or_default();
    for p in &scan.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig12(p.sigma),
            opt(p.contrast),
            opt(p.w_z_exc_z_analyzer),
            opt(p.w_y_exc_x_analyzer),
            p.failure.as_deref().unwrap_or("")
        );
    }
    let _ = writeln!(
        out,
        "# monotone_non_increasing={}",
        scan.monotone_non_increasing
    );
    let _ = writeln!(out, "# max_increase={}", format_sig12(scan.max_increase));
    out
}

/// Pretty JSON with a trailing newline (the layout golden tests pin).
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String, IoFormatError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
