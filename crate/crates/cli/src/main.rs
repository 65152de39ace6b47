//! Command-line front end: reproducible simulation and fitting runs.
//!
//! Exit codes: 0 success, 1 validation or convergence failure, 2 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use anisoline::ensemble::{contrast_scan, simulate_spectrum};
use anisoline::fit::{fit_two_gaussians, FitOptions};
use anisoline::io::{
    self, config_digest, contrast_scan_to_csv, read_run_config, spectrum_to_csv, to_json_pretty,
    FitReport, SimulateReport, Spectrum, ThreeHalvesSide,
};
use anisoline::optics::{table1, DetectionRow, ExcitationCol, TABLE1_REFERENCE};
use anisoline::units::{nm_to_wavenumber, wavenumber_to_nm, AxisUnit};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "anisoline",
    version,
    about = "Polarization-resolved line shapes of a J=1/2 -> J=3/2 transition in an anisotropic matrix"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the static single-crystal intensity table and check it against
    /// the built-in fractions
    Table1,
    /// Run a Monte Carlo line-shape simulation from a JSON config
    Simulate {
        /// Run configuration (JSON)
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Decompose a spectrum into a sum of two Gaussians
    Fit {
        /// Spectrum CSV (`# axis=<nm|cm-1>` header)
        spectrum: PathBuf,
        /// Fit an additional constant baseline
        #[arg(long)]
        baseline: bool,
        /// Axis to fit on; the input is converted when needed
        #[arg(long, default_value = "cm-1", value_parser = ["nm", "cm-1"])]
        axis: String,
        /// Which fitted component to report as |m|=3/2 in the weight ratio
        #[arg(long, default_value = "upper", value_parser = ["upper", "lower"])]
        three_halves: String,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a residual CSV here
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Scan the polarization contrast against the fluctuation strength
    ContrastScan {
        /// Scan configuration (JSON)
        #[arg(short, long)]
        config: PathBuf,
        /// Output CSV path (default: stdout)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert a scalar between nm and cm-1
    ConvertUnits {
        value: f64,
        #[arg(value_parser = ["nm", "cm-1"])]
        from: String,
        #[arg(value_parser = ["nm", "cm-1"])]
        to: String,
    },
}

/// Failure classified for the exit code.
enum Failure {
    /// Exit 1: bad config, schema violation, non-convergence, mismatch.
    Validation(anyhow::Error),
    /// Exit 2: unreadable/unwritable/malformed files.
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Io(e) => e,
        }
    }
}

fn io_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Io(e.into())
}

fn validation<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors count as validation failures; --help/--version exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Table1 => cmd_table1(),
        Command::Simulate { config } => cmd_simulate(&config),
        Command::Fit {
            spectrum,
            baseline,
            axis,
            three_halves,
            report,
            residuals,
        } => cmd_fit(
            &spectrum,
            baseline,
            &axis,
            &three_halves,
            report.as_deref(),
            residuals.as_deref(),
        ),
        Command::ContrastScan { config, output } => cmd_contrast_scan(&config, output.as_deref()),
        Command::ConvertUnits { value, from, to } => cmd_convert(value, &from, &to),
    }
}

fn cmd_table1() -> Result<(), Failure> {
    let t = table1().map_err(validation)?;
    let fraction = |(n, d): (u32, u32)| -> String {
        if n == 0 {
            "0".to_string()
        } else if d == 1 {
            format!("{n}")
        } else {
            format!("{n}/{d}")
        }
    };
    println!("Static single-crystal intensities of the two line components");
    println!("(excitation beam along x, fluorescence detected along y, axis along z)");
    println!();
    println!(
        "{:<12} {:>22} {:>22} {:>22} {:>22}",
        "detection", "z-exc I_3/2", "z-exc I_1/2", "y-exc I_3/2", "y-exc I_1/2"
    );
    let mut worst = 0.0f64;
    let mut diffs: Vec<String> = Vec::new();
    for (r, row) in DetectionRow::ALL.iter().enumerate() {
        let mut cells = Vec::new();
        for (c, col) in ExcitationCol::ALL.iter().enumerate() {
            let (i3, i1) = t.entry(*row, *col);
            let ((n3, d3), (n1, d1)) = TABLE1_REFERENCE[r][c];
            for (tag, got, (num, den)) in [("I_3/2", i3, (n3, d3)), ("I_1/2", i1, (n1, d1))] {
                let dev = (got - num as f64 / den as f64).abs();
                worst = worst.max(dev);
                if dev > 1e-12 {
                    diffs.push(format!(
                        "{}-exc / {} {tag}: computed {got:.15} vs {}",
                        col.name(),
                        row.name(),
                        fraction((num, den))
                    ));
                }
            }
            cells.push(format!("{:.12} ({})", i3, fraction((n3, d3))));
            cells.push(format!("{:.12} ({})", i1, fraction((n1, d1))));
        }
        println!(
            "{:<12} {:>22} {:>22} {:>22} {:>22}",
            row.name(),
            cells[0],
            cells[1],
            cells[2],
            cells[3]
        );
    }
    println!();
    println!("max deviation from reference fractions: {worst:.3e}");
    if !diffs.is_empty() {
        for d in &diffs {
            eprintln!("MISMATCH {d}");
        }
        return Err(validation(anyhow!(
            "{} table entries deviate from the reference fractions beyond 1e-12",
            diffs.len()
        )));
    }
    Ok(())
}

/// Reading a config file: a missing/unreadable file is an I/O failure, a
/// schema violation is a validation failure.
fn classify_config_error(path: &Path) -> impl Fn(io::IoFormatError) -> Failure + '_ {
    move |e| match e {
        io::IoFormatError::Io(inner) => {
            io_err(anyhow!(inner).context(format!("reading config {}", path.display())))
        }
        other => validation(anyhow!(other).context(format!("invalid config {}", path.display()))),
    }
}

fn cmd_simulate(config: &Path) -> Result<(), Failure> {
    let cfg = read_run_config(config).map_err(classify_config_error(config))?;
    cfg.ensemble.validate().map_err(validation)?;
    let digest = config_digest(&cfg.ensemble).map_err(validation)?;
    let out = simulate_spectrum(&cfg.ensemble).map_err(validation)?;

    let spectrum = Spectrum::from_histogram(&out.histogram);
    let meta = vec![
        ("config_digest".to_string(), digest.clone()),
        ("seed".to_string(), cfg.ensemble.seed.to_string()),
    ];
    std::fs::write(&cfg.output.spectrum, spectrum_to_csv(&spectrum, &meta))
        .with_context(|| format!("writing spectrum to {}", cfg.output.spectrum))
        .map_err(io_err)?;

    let report = SimulateReport {
        tool_version: VERSION,
        config_digest: &digest,
        config: &cfg.ensemble,
        summary: &out.summary,
    };
    std::fs::write(
        &cfg.output.summary,
        to_json_pretty(&report).map_err(validation)?,
    )
    .with_context(|| format!("writing summary to {}", cfg.output.summary))
    .map_err(io_err)?;

    if out.summary.clipping_warning {
        eprintln!(
            "warning: {:.2}% of the intensity fell outside the histogram range",
            100.0 * out.summary.clipped_fraction
        );
    }
    println!(
        "wrote {} and {} (area ratio upper/lower: {})",
        cfg.output.spectrum,
        cfg.output.summary,
        out.summary
            .ratio_upper_lower
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| "n/a".to_string())
    );
    Ok(())
}

fn cmd_fit(
    spectrum_path: &Path,
    baseline: bool,
    axis: &str,
    three_halves: &str,
    report_path: Option<&Path>,
    residuals: Option<&Path>,
) -> Result<(), Failure> {
    let bytes = std::fs::read(spectrum_path)
        .with_context(|| format!("reading spectrum {}", spectrum_path.display()))
        .map_err(io_err)?;
    let input_digest = io::sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| {
        io_err(anyhow!(
            "spectrum {} is not UTF-8: {e}",
            spectrum_path.display()
        ))
    })?;
    let raw = io::parse_spectrum(&text)
        .map_err(|e| io_err(anyhow!(e).context(format!("parsing {}", spectrum_path.display()))))?;

    let target_axis: AxisUnit = axis.parse().map_err(validation)?;
    let spectrum = match target_axis {
        AxisUnit::Wavenumber => raw.to_wavenumber().map_err(validation)?,
        AxisUnit::Nanometer => raw.to_nanometer().map_err(validation)?,
    };

    let side = match three_halves {
        "lower" => ThreeHalvesSide::Lower,
        _ => ThreeHalvesSide::Upper,
    };
    let opts = FitOptions {
        baseline,
        ..FitOptions::default()
    };
    let fit = fit_two_gaussians(&spectrum.xs, &spectrum.ys, None, &opts).map_err(validation)?;
    let report =
        FitReport::new(&fit, target_axis, side, input_digest, VERSION).map_err(validation)?;
    let json = to_json_pretty(&report).map_err(validation)?;
    match report_path {
        Some(p) => std::fs::write(p, json)
            .with_context(|| format!("writing report to {}", p.display()))
            .map_err(io_err)?,
        None => print!("{json}"),
    }

    if let Some(p) = residuals {
        let res = Spectrum {
            axis: spectrum.axis,
            xs: spectrum.xs.clone(),
            ys: spectrum
                .xs
                .iter()
                .zip(&spectrum.ys)
                .map(|(&x, &y)| y - (fit.model.eval(x) + fit.baseline.unwrap_or(0.0)))
                .collect(),
        };
        std::fs::write(p, spectrum_to_csv(&res, &[]))
            .with_context(|| format!("writing residuals to {}", p.display()))
            .map_err(io_err)?;
    }

    if !fit.converged {
        return Err(validation(anyhow!(
            "fit did not converge within {} iterations (report written)",
            fit.iterations
        )));
    }
    Ok(())
}

fn cmd_contrast_scan(config: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))
        .map_err(io_err)?;
    let cfg: anisoline::ensemble::ContrastScanConfig =
        serde_json::from_str(&text).map_err(|e| {
            validation(anyhow!(e).context(format!("invalid config {}", config.display())))
        })?;
    let digest = config_digest(&cfg).map_err(validation)?;
    let scan = contrast_scan(&cfg).map_err(validation)?;
    let csv = contrast_scan_to_csv(&scan, &digest);
    match output {
        Some(p) => std::fs::write(p, csv)
            .with_context(|| format!("writing scan to {}", p.display()))
            .map_err(io_err)?,
        None => print!("{csv}"),
    }
    let failures: Vec<&str> = scan
        .points
        .iter()
        .filter_map(|p| p.failure.as_deref())
        .collect();
    if !failures.is_empty() {
        return Err(validation(anyhow!(
            "{} scan point(s) failed to fit: {}",
            failures.len(),
            failures.join("; ")
        )));
    }
    Ok(())
}

fn cmd_convert(value: f64, from: &str, to: &str) -> Result<(), Failure> {
    let from: AxisUnit = from.parse().map_err(validation)?;
    let to: AxisUnit = to.parse().map_err(validation)?;
    let out = match (from, to) {
        (a, b) if a == b => Ok(value),
        (AxisUnit::Nanometer, AxisUnit::Wavenumber) => nm_to_wavenumber(value),
        (AxisUnit::Wavenumber, AxisUnit::Nanometer) => wavenumber_to_nm(value),
        _ => unreachable!(),
    }
    .map_err(validation)?;
    println!("{}", io::format_sig12(out));
    Ok(())
}
