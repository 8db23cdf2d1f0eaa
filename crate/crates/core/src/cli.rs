//! The `cellwise` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 shape or singularity problem,
//! 4 non-convergence (outputs are still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cellhandler::handle_row;
use crate::error::{Error, Result};
use crate::estimator::{
    clr_transform, d_step, detections_to_cells, di_estimate, log_transform, ColumnScaler, DiConfig,
    InitialMethod,
};
use crate::evalkit::{discrepancy, discrepancy_symmetric, ContaminationMode, SymmetricKind};
use crate::io::{
    read_csv_path, read_report, report_rows, write_atomic, write_csv, write_report, CsvTable,
    ModelFile, Provenance, ReportRow,
};
use crate::numkit::chi2_quantile;
use crate::simulation::{run_simulation, CovarianceKind, SimulationConfig, Variant};
use crate::table::DataTable;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SHAPE: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_) | Error::Singular { .. } | Error::Degenerate(_) => EXIT_SHAPE,
            Error::Convergence { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cellwise",
    version,
    about = "Cellwise outlier detection and robust covariance estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a robust model from a CSV and report flagged cells.
    Estimate(EstimateArgs),
    /// Flag cells of a CSV under a stored model.
    Detect(DetectArgs),
    /// Run a seeded contamination study.
    Simulate(SimulateArgs),
    /// Turn a cell report into a class grid (CSV, optional SVG).
    Cellmap(CellmapArgs),
    /// Discrepancy between the covariances of two model files.
    Discrepancy(DiscrepancyArgs),
    /// Log or centered-log-ratio transform a CSV.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiArgs {
    /// Probability level of the chi-squared(1) cutoff.
    #[arg(long, default_value_t = 0.99)]
    pub quantile: f64,
    /// Cap on flagged-plus-missing cells per column, as a fraction of rows.
    #[arg(long, default_value_t = 0.25)]
    pub maxcol: f64,
    #[arg(long = "max-iter", default_value_t = 25)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// rank, diagonal, or model=PATH
    #[arg(long, default_value = "rank")]
    pub initial: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Output directory for model.json, report.csv, report.json and iterations.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub di: DiArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub quantile: f64,
    /// Apply the per-column cap of the estimator (fraction of rows).
    #[arg(long)]
    pub maxcol: Option<f64>,
    /// Report CSV; provenance goes to the same path with a `.json` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    A09,
    Randcorr,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Cell,
    Row,
    Mixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "a09")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Cellwise fraction per column.
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    /// Row fraction in row and mixed modes (defaults to --eps).
    #[arg(long = "row-eps")]
    pub row_eps: Option<f64>,
    #[arg(long, default_value_t = 6.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value = "cell")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for scores.csv, discrepancy.csv and provenance.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub di: DiArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CellmapArgs {
    /// A report written by estimate or detect.
    pub report: PathBuf,
    /// Grid rows (data rows 0..rows).
    #[arg(long)]
    pub rows: usize,
    /// Grid columns (file columns 0..cols).
    #[arg(long)]
    pub cols: usize,
    /// Drop report cells outside the grid instead of failing.
    #[arg(long)]
    pub clip: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Kl,
    PlusInverse,
    AbsLog,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscrepancyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, value_enum, default_value = "kl")]
    pub kind: KindArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    #[arg(long, conflicts_with = "log", required_unless_present = "log")]
    pub clr: bool,
    #[arg(long)]
    pub log: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Cellmap(a) => cmd_cellmap(a),
        Command::Discrepancy(a) => cmd_discrepancy(a),
        Command::Preprocess(a) => cmd_preprocess(a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::input(format!("cannot create {}: {e}", dir.display())))
}

fn read_input(path: &Path) -> Result<CsvTable> {
    let csv = read_csv_path(path)?;
    for (name, reason) in &csv.unusable {
        eprintln!("warning: dropping column {name}: {reason}");
    }
    Ok(csv)
}

/// Drops columns without a usable robust scale, with a warning.
fn screen_scales(csv: CsvTable) -> CsvTable {
    let keep: Vec<usize> = (0..csv.table.n_cols())
        .filter(|&j| {
            let ok = ColumnScaler::fit(&csv.table.select_columns(&[j])).is_ok();
            if !ok {
                eprintln!(
                    "warning: dropping column {}: median absolute deviation is zero",
                    csv.table.names()[j]
                );
            }
            ok
        })
        .collect();
    let mut unusable = csv.unusable;
    for j in 0..csv.table.n_cols() {
        if !keep.contains(&j) {
            unusable.push((
                csv.table.names()[j].clone(),
                "zero median absolute deviation".into(),
            ));
        }
    }
    CsvTable {
        table: csv.table.select_columns(&keep),
        source_columns: keep.iter().map(|&j| csv.source_columns[j]).collect(),
        unusable,
    }
}

fn di_config(args: &DiArgs, table: &DataTable) -> Result<DiConfig> {
    let initial = match args.initial.as_str() {
        "rank" => InitialMethod::Rank,
        "diagonal" => InitialMethod::Diagonal,
        other => {
            let Some(path) = other.strip_prefix("model=") else {
                return Err(Error::input(format!(
                    "--initial must be rank, diagonal or model=PATH, got {other:?}"
                )));
            };
            let file = ModelFile::load(Path::new(path))?;
            let idx = column_positions(&file.columns, table.names())?;
            let model = file.cov_model()?;
            let mu = idx.iter().map(|&k| model.mu()[k]).collect();
            InitialMethod::External(crate::model::CovModel::new(
                mu,
                model.sigma().submatrix(&idx),
            )?)
        }
    };
    let config = DiConfig {
        quantile: args.quantile,
        max_col_frac: args.maxcol,
        max_iter: args.max_iter,
        tol: args.tol,
        initial,
    };
    config.validate()?;
    Ok(config)
}

/// Position in `available` of every name in `wanted`.
fn column_positions(available: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    let missing: Vec<&str> = wanted
        .iter()
        .filter(|w| !available.contains(w))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::input(format!(
            "columns not found: {} (available: {})",
            missing.join(", "),
            available.join(", ")
        )));
    }
    Ok(wanted
        .iter()
        .map(|w| available.iter().position(|a| a == w).unwrap())
        .collect())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let csv = screen_scales(read_input(&args.input)?);
    if csv.table.n_cols() == 0 {
        return Err(Error::input("no usable numeric columns"));
    }
    let config = di_config(&args.di, &csv.table)?;
    let fit = di_estimate(&csv.table, &config)?;
    for s in &fit.set_aside {
        eprintln!("warning: column {} set aside: {}", s.name, s.reason);
    }

    let names: Vec<String> = fit
        .columns
        .iter()
        .map(|&j| csv.table.names()[j].clone())
        .collect();
    let sources: Vec<usize> = fit.columns.iter().map(|&j| csv.source_columns[j]).collect();
    let report = report_rows(&fit.flagged_cells(&csv.table), &names, &sources);

    let provenance_config = json!({
        "input": args.input,
        "di": args.di,
        "cutoff": config.cutoff()?,
        "dropped_columns": csv.unusable,
        "set_aside": fit.set_aside.iter().map(|s| json!({"column": s.name, "reason": s.reason})).collect::<Vec<_>>(),
    });
    let model_file = ModelFile::new(
        names.clone(),
        &fit.model,
        Some(&fit.scaler),
        Some(&fit.standardized_model),
        Provenance::now("estimate", provenance_config.clone()),
    );

    ensure_dir(&args.out)?;
    write_atomic(
        &args.out.join("model.json"),
        model_file.to_json()?.as_bytes(),
    )?;
    write_atomic(
        &args.out.join("report.csv"),
        write_report(&report)?.as_bytes(),
    )?;
    let sidecar = json!({
        "command": "estimate",
        "config": provenance_config,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "flagged_cells": report.iter().filter(|r| !r.missing()).count(),
        "missing_cells": report.iter().filter(|r| r.missing()).count(),
    });
    write_atomic(
        &args.out.join("report.json"),
        (serde_json::to_string_pretty(&sidecar)? + "\n").as_bytes(),
    )?;
    let mut log = String::from("iteration,change\n");
    for (t, c) in fit.criterion_history.iter().enumerate() {
        let _ = writeln!(log, "{},{c}", t + 1);
    }
    write_atomic(&args.out.join("iterations.csv"), log.as_bytes())?;

    println!(
        "estimated {} columns from {} rows in {} iterations ({}); {} cells flagged",
        names.len(),
        csv.table.n_rows(),
        fit.iterations,
        if fit.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iter().filter(|r| !r.missing()).count()
    );
    if fit.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: no convergence within {} iterations; outputs hold the last iterate",
            config.max_iter
        );
        Ok(EXIT_NONCONVERGENCE)
    }
}

/// Flags cells of `input` under a stored model.
pub fn detect_report(
    csv: &CsvTable,
    model: &ModelFile,
    quantile: f64,
    maxcol: Option<f64>,
) -> Result<Vec<ReportRow>> {
    let idx = column_positions(csv.table.names(), &model.columns)?;
    let extra: Vec<&str> = csv
        .table
        .names()
        .iter()
        .filter(|n| !model.columns.contains(n))
        .map(String::as_str)
        .collect();
    if !extra.is_empty() {
        eprintln!(
            "note: ignoring columns not in the model: {}",
            extra.join(", ")
        );
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::input(format!(
            "quantile {quantile} must lie in (0, 1)"
        )));
    }
    let q = chi2_quantile(1, quantile)?;
    let kept = csv.table.select_columns(&idx);
    let sources: Vec<usize> = idx.iter().map(|&j| csv.source_columns[j]).collect();
    let d = kept.n_cols();
    let (scaler, frame_model) = match model.standardized_model()? {
        Some(pair) => pair,
        None => (
            ColumnScaler {
                locations: vec![0.0; d],
                scales: vec![1.0; d],
            },
            model.cov_model()?,
        ),
    };
    let z = scaler.apply(&kept);
    let rows = match maxcol {
        Some(frac) => {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::input(format!("maxcol {frac} must lie in (0, 1]")));
            }
            let cap = (z.n_rows() as f64 * frac).floor() as usize;
            d_step(&z, &frame_model, q, cap)?.rows
        }
        None => {
            use rayon::prelude::*;
            (0..z.n_rows())
                .into_par_iter()
                .map(|i| handle_row(z.row(i), &frame_model, q))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let cells = detections_to_cells(&rows, &kept, &scaler);
    Ok(report_rows(&cells, &model.columns, &sources))
}

fn cmd_detect(args: &DetectArgs) -> Result<i32> {
    let csv = read_input(&args.input)?;
    let model = ModelFile::load(&args.model)?;
    let report = detect_report(&csv, &model, args.quantile, args.maxcol)?;
    write_atomic(&args.out, write_report(&report)?.as_bytes())?;
    let sidecar = json!({
        "command": "detect",
        "config": args,
        "model_provenance": model.provenance,
        "flagged_cells": report.iter().filter(|r| !r.missing()).count(),
    });
    write_atomic(
        &args.out.with_extension("json"),
        (serde_json::to_string_pretty(&sidecar)? + "\n").as_bytes(),
    )?;
    println!(
        "{} cells flagged in {} rows",
        report.iter().filter(|r| !r.missing()).count(),
        csv.table.n_rows()
    );
    Ok(EXIT_OK)
}

pub fn simulation_config(args: &SimulateArgs) -> Result<SimulationConfig> {
    let row = args.row_eps.unwrap_or(args.eps);
    let (epsilon, mode) = match args.mode {
        ModeArg::Cell => (args.eps, ContaminationMode::Cellwise),
        ModeArg::Row => (row, ContaminationMode::Rowwise),
        ModeArg::Mixed => (
            args.eps,
            ContaminationMode::Mixed {
                cell_frac: args.eps,
                row_frac: row,
            },
        ),
    };
    if args.di.initial.starts_with("model=") {
        return Err(Error::input(
            "simulate supports --initial rank or diagonal only",
        ));
    }
    let empty = DataTable::from_rows(Vec::new(), &[])?;
    let config = SimulationConfig {
        covariance: match args.model {
            ModelArg::A09 => CovarianceKind::A09,
            ModelArg::Randcorr => CovarianceKind::RandCorr,
        },
        d: args.d,
        n: args.n,
        reps: args.reps,
        epsilon,
        gamma: args.gamma,
        mode,
        seed: args.seed,
        di: di_config(&args.di, &empty)?,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let config = simulation_config(args)?;
    let outcome = run_simulation(&config)?;
    ensure_dir(&args.out)?;
    write_atomic(
        &args.out.join("scores.csv"),
        outcome.scores_csv().as_bytes(),
    )?;
    write_atomic(
        &args.out.join("discrepancy.csv"),
        outcome.discrepancy_csv().as_bytes(),
    )?;
    let provenance = json!({
        "command": "simulate",
        "config": args,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_atomic(
        &args.out.join("provenance.json"),
        (serde_json::to_string_pretty(&provenance)? + "\n").as_bytes(),
    )?;
    let (d_init, d_di) = outcome.mean_discrepancy();
    let recall = outcome
        .mean_recall(Variant::Di)
        .map_or_else(|| "NA".to_string(), |r| format!("{r:.4}"));
    println!(
        "{} replications: mean discrepancy initial {d_init:.4}, DI {d_di:.4}; mean DI recall {recall}",
        config.reps
    );
    Ok(EXIT_OK)
}

/// Class of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Regular,
    High,
    Low,
    Missing,
}

impl CellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CellClass::Regular => "regular",
            CellClass::High => "high",
            CellClass::Low => "low",
            CellClass::Missing => "missing",
        }
    }

    fn color(self) -> &'static str {
        match self {
            CellClass::Regular => "#ffff66",
            CellClass::High => "#d7191c",
            CellClass::Low => "#2c7bb6",
            CellClass::Missing => "#ffffff",
        }
    }
}

/// `rows x cols` grid of (class, residual magnitude).
pub fn cellmap_grid(
    report: &[ReportRow],
    rows: usize,
    cols: usize,
    clip: bool,
) -> Result<Vec<Vec<(CellClass, f64)>>> {
    let mut grid = vec![vec![(CellClass::Regular, 0.0); cols]; rows];
    for r in report {
        if r.row >= rows || r.col >= cols {
            if clip {
                continue;
            }
            return Err(Error::input(format!(
                "report cell ({}, {}) lies outside the {rows}x{cols} grid",
                r.row, r.col
            )));
        }
        let class = if r.missing() {
            CellClass::Missing
        } else if r.residual > 0.0 {
            CellClass::High
        } else if r.residual < 0.0 {
            CellClass::Low
        } else {
            CellClass::Regular
        };
        grid[r.row][r.col] = (class, r.residual.abs());
    }
    Ok(grid)
}

pub fn cellmap_csv(grid: &[Vec<(CellClass, f64)>]) -> String {
    let mut out = String::from("row,col,class,magnitude\n");
    for (i, row) in grid.iter().enumerate() {
        for (j, (class, mag)) in row.iter().enumerate() {
            let _ = writeln!(out, "{i},{j},{},{mag}", class.as_str());
        }
    }
    out
}

pub fn cellmap_svg(grid: &[Vec<(CellClass, f64)>]) -> String {
    const CELL: usize = 16;
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
        cols * CELL,
        rows * CELL
    );
    for (i, row) in grid.iter().enumerate() {
        for (j, (class, _)) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"#999999\" stroke-width=\"0.5\"/>",
                j * CELL,
                i * CELL,
                class.color()
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn cmd_cellmap(args: &CellmapArgs) -> Result<i32> {
    let file = std::fs::File::open(&args.report)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", args.report.display())))?;
    let report = read_report(file)?;
    let grid = cellmap_grid(&report, args.rows, args.cols, args.clip)?;
    write_atomic(&args.out, cellmap_csv(&grid).as_bytes())?;
    if let Some(svg) = &args.svg {
        write_atomic(svg, cellmap_svg(&grid).as_bytes())?;
    }
    Ok(EXIT_OK)
}

/// Value printed by the discrepancy command.
pub fn model_discrepancy(a: &ModelFile, b: &ModelFile, kind: KindArg) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!(
            "model dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (sa, sb) = (a.sigma_matrix()?, b.sigma_matrix()?);
    match kind {
        KindArg::Kl => discrepancy(&sa, &sb),
        KindArg::PlusInverse => discrepancy_symmetric(&sa, &sb, SymmetricKind::PlusInverse),
        KindArg::AbsLog => discrepancy_symmetric(&sa, &sb, SymmetricKind::AbsLog),
    }
}

fn cmd_discrepancy(args: &DiscrepancyArgs) -> Result<i32> {
    let value = model_discrepancy(
        &ModelFile::load(&args.a)?,
        &ModelFile::load(&args.b)?,
        args.kind,
    )?;
    println!("{value}");
    Ok(EXIT_OK)
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<i32> {
    let csv = read_csv_path(&args.input)?;
    if !csv.unusable.is_empty() {
        let list: Vec<String> = csv
            .unusable
            .iter()
            .map(|(n, r)| format!("{n} ({r})"))
            .collect();
        return Err(Error::input(format!(
            "unusable columns: {}",
            list.join("; ")
        )));
    }
    let out = if args.clr {
        clr_transform(&csv.table)?
    } else {
        log_transform(&csv.table)?
    };
    write_atomic(&args.out, write_csv(&out)?.as_bytes())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(r: usize, c: usize, obs: Option<f64>, res: f64) -> ReportRow {
        ReportRow {
            row: r,
            col: c,
            column: format!("c{c}"),
            observed: obs,
            imputed: 0.0,
            residual: res,
            criterion: res * res,
        }
    }

    #[test]
    fn cellmap_classes() {
        let g = cellmap_grid(&[], 20, 16, false).unwrap();
        assert_eq!((g.len(), g[0].len()), (20, 16));
        assert!(g.iter().flatten().all(|c| c.0 == CellClass::Regular));
        let g = cellmap_grid(
            &[
                row(1, 2, Some(5.0), 3.0),
                row(0, 0, None, 0.0),
                row(2, 1, Some(-1.0), -4.0),
            ],
            3,
            3,
            false,
        )
        .unwrap();
        assert_eq!(g[1][2], (CellClass::High, 3.0));
        assert_eq!(g[0][0].0, CellClass::Missing);
        assert_eq!(g[2][1], (CellClass::Low, 4.0));
        assert!(cellmap_grid(&[row(5, 0, Some(1.0), 3.0)], 3, 3, false).is_err());
        assert!(cellmap_grid(&[row(5, 0, Some(1.0), 3.0)], 3, 3, true).is_ok());
        assert!(cellmap_svg(&g).contains("#d7191c"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Error::input("x").exit_code(), EXIT_INPUT);
        assert_eq!(Error::Shape("x".into()).exit_code(), EXIT_SHAPE);
        assert_eq!(
            Error::Convergence {
                what: "x",
                iterations: 1,
                residual: 1.0
            }
            .exit_code(),
            EXIT_NONCONVERGENCE
        );
    }

    #[test]
    fn parse_rejects_bad_usage() {
        assert_eq!(
            run(["cellwise", "simulate", "--mode", "sideways", "--out", "x"]),
            2
        );
        assert_eq!(run(["cellwise", "preprocess", "in.csv", "--out", "x"]), 2);
    }

    #[test]
    fn column_matching() {
        let avail = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert_eq!(
            column_positions(&avail, &["c".into(), "a".into()]).unwrap(),
            vec![2, 0]
        );
        let err = column_positions(&avail, &["z".into()])
            .unwrap_err()
            .to_string();
        assert!(err.contains('z'));
    }
}
