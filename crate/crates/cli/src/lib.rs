//! The `scenmine` command line.
//!
//! Exit codes: 0 on success, 2 on configuration or data errors, 3 when a
//! run finished but some cells failed. Logs go to standard error; results
//! are only ever written to the output paths.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use scenmine::config::{parse_delimiter, Overrides, RunFile, RunSettings};
use scenmine::dataset::DataRepository;
use scenmine::exec::Workers;
use scenmine::grid::{grid_search, GridOptions};
use scenmine::metrics::pearson_matrix;
use scenmine::reporting::{ReportKind, ResultStore, CONFIG_FILE, REPORTS_DIR};
use scenmine::runner::run_suite;
use scenmine::scenario::generate_presets;
use scenmine::window::assemble;
use scenmine::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// File the effective scenario suite is copied to inside an output directory.
pub const SCENARIO_SNAPSHOT: &str = "scenarios.csv";

#[derive(Debug, Parser)]
#[command(name = "scenmine", version, about = "Scenario-driven time-series mining experiments")]
pub struct Cli {
    /// Worker threads for data-parallel work (0 = every core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load every dataset in a directory and write a manifest.
    Ingest {
        data_dir: PathBuf,
        /// Manifest path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = ",")]
        delimiter: String,
    },
    /// Pearson correlation of one attribute between sources.
    Correlate {
        data_dir: PathBuf,
        #[arg(long)]
        attribute: String,
        /// Comma-separated source ids; default is every source with the attribute.
        #[arg(long, value_delimiter = ',')]
        sources: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = ",")]
        delimiter: String,
    },
    /// Run every scenario × algorithm cell of a configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Grid-search the configuration's [optimize] section.
    Optimize {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Regenerate report files from a results directory.
    Report {
        results_dir: PathBuf,
        /// all, summary, spearman, dispersion, cells or series.
        #[arg(long, default_value = "all")]
        kind: String,
        /// Defaults to `<results_dir>/reports`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the six standard scenarios for one main location.
    Presets {
        #[arg(long)]
        main: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        context: String,
        /// At least three, comma-separated; the first three are used.
        #[arg(long, value_delimiter = ',', required = true)]
        neighbors: Vec<String>,
        /// Defaults to the target attribute.
        #[arg(long)]
        neighbor_attribute: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct OverrideArgs {
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Outcome of a subcommand that completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    PartialFailure,
}

fn write_output(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            fs::write(path, body).map_err(|e| io_err(path, e))
        }
        None => std::io::stdout()
            .write_all(body)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn load_settings(config: &Path, args: &OverrideArgs, workers: Option<usize>) -> Result<RunSettings> {
    let overrides = Overrides {
        data_dir: args.data_dir.clone(),
        window: args.window,
        split: args.split,
        seed: args.seed,
        workers,
    };
    let mut settings = RunSettings::load(config, &overrides)?;
    settings.data_dir = fs::canonicalize(&settings.data_dir).map_err(|e| io_err(&settings.data_dir, e))?;
    Ok(settings)
}

/// Writes the effective suite and an explicit config next to the results so
/// the directory can be re-run on its own.
fn write_snapshot(settings: &RunSettings, out: &Path, optimize_of: Option<&Path>) -> Result<String> {
    settings.run.suite.write_file(&out.join(SCENARIO_SNAPSHOT))?;
    let optimize = match optimize_of {
        Some(config) => {
            let text = fs::read_to_string(config).map_err(|e| io_err(config, e))?;
            RunFile::parse(&text)?.optimize
        }
        None => None,
    };
    settings
        .snapshot(Path::new(SCENARIO_SNAPSHOT), optimize.as_ref())
        .to_toml()
}

pub fn cmd_ingest(data_dir: &Path, out: Option<&Path>, delimiter: &str, workers: Workers) -> Result<Status> {
    let repo = DataRepository::load_dir(data_dir, parse_delimiter(delimiter)?, workers)?;
    let mut buf = Vec::new();
    repo.write_manifest(&mut buf)
        .map_err(|e| io_err(Path::new("<manifest>"), e))?;
    write_output(out, &buf)?;
    log::info!("loaded {} datasets from {}", repo.len(), data_dir.display());
    Ok(Status::Ok)
}

pub fn cmd_correlate(
    data_dir: &Path,
    attribute: &str,
    sources: &[String],
    out: Option<&Path>,
    delimiter: &str,
    workers: Workers,
) -> Result<Status> {
    let repo = DataRepository::load_dir(data_dir, parse_delimiter(delimiter)?, workers)?;
    let ids: Vec<String> = if sources.is_empty() {
        repo.datasets()
            .filter(|d| d.attribute_index(attribute).is_some())
            .map(|d| d.source_id().to_string())
            .collect()
    } else {
        sources.to_vec()
    };
    if ids.len() < 2 {
        return Err(Error::UnresolvedRef {
            reference: attribute.to_string(),
            reason: format!("present in {} source(s); at least 2 are needed", ids.len()),
        });
    }
    let m = pearson_matrix(&repo, attribute, &ids)?;
    let mut body = format!("source,{}\n", m.source_ids.join(","));
    for (id, row) in m.source_ids.iter().zip(&m.entries) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        body.push_str(&format!("{id},{}\n", cells.join(",")));
    }
    body.push_str(&format!("\nn_common,{}\n", m.source_ids.join(",")));
    for (id, row) in m.source_ids.iter().zip(&m.n_common) {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        body.push_str(&format!("{id},{}\n", cells.join(",")));
    }
    write_output(out, body.as_bytes())?;
    Ok(Status::Ok)
}

pub fn cmd_run(config: &Path, out: &Path, args: &OverrideArgs, workers: Option<usize>) -> Result<Status> {
    let settings = load_settings(config, args, workers)?;
    let repo = DataRepository::load_dir(&settings.data_dir, settings.delimiter, settings.run.workers)?;
    log::info!(
        "running {} scenarios × {} algorithms",
        settings.run.suite.scenarios().len(),
        settings.run.algorithms.len()
    );
    let run = run_suite(&repo, &settings.run)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for sub in [scenmine::reporting::CELLS_DIR, REPORTS_DIR] {
        let dir = out.join(sub);
        if dir.is_dir() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
    }
    let snapshot = write_snapshot(&settings, out, None)?;
    let store = ResultStore::from_run(&run, Some(snapshot))?;
    store.write_dir(out)?;
    let failed: Vec<_> = run.failures().collect();
    if failed.is_empty() {
        log::info!("{} cells written to {}", run.outcomes.len(), out.display());
        return Ok(Status::Ok);
    }
    eprintln!("{} of {} cells failed:", failed.len(), run.outcomes.len());
    for f in failed {
        eprintln!("  {}: {}", f.key, f.error);
    }
    Ok(Status::PartialFailure)
}

pub fn cmd_optimize(config: &Path, out: &Path, args: &OverrideArgs, workers: Option<usize>) -> Result<Status> {
    let settings = load_settings(config, args, workers)?;
    let opt = settings
        .optimize
        .as_ref()
        .ok_or_else(|| Error::RunConfig("no [optimize] section".into()))?;
    let repo = DataRepository::load_dir(&settings.data_dir, settings.delimiter, settings.run.workers)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let ids: Vec<String> = if opt.scenarios.is_empty() {
        settings
            .run
            .suite
            .scenarios()
            .iter()
            .map(|s| s.scenario_id().to_string())
            .collect()
    } else {
        opt.scenarios.clone()
    };
    let options = GridOptions {
        windows: opt.windows.clone(),
        window: settings.run.window,
        split: settings.run.split,
        seed: settings.run.seed,
        eps_re: settings.run.eps_re,
        workers: settings.run.workers,
    };
    let mut best = String::from("scenario_id,algorithm,assignment,objective_measure,objective\n");
    for id in &ids {
        let spec = settings.run.suite.get(id).expect("validated scenario id");
        let table = assemble(&repo, spec)?;
        log::info!(
            "{id}: {} trials",
            opt.grid.len() * opt.windows.as_ref().map_or(1, Vec::len)
        );
        let result = grid_search(&opt.base, &opt.grid, &table, &options)?;
        let path = out.join(format!("grid_{id}.csv"));
        fs::write(&path, result.to_csv()).map_err(|e| io_err(&path, e))?;
        let t = result.best_trial();
        best.push_str(&format!(
            "{id},{},{},{},{}\n",
            opt.algorithm,
            scenmine::grid::assignment_string(&t.assignment).replace(',', ";"),
            result.objective,
            scenmine::reporting::fmt_sig(t.objective)
        ));
    }
    let path = out.join("best.csv");
    fs::write(&path, best).map_err(|e| io_err(&path, e))?;
    let snapshot = write_snapshot(&settings, out, Some(config))?;
    let path = out.join(CONFIG_FILE);
    fs::write(&path, snapshot).map_err(|e| io_err(&path, e))?;
    Ok(Status::Ok)
}

pub fn cmd_report(results_dir: &Path, kind: &str, out: Option<&Path>) -> Result<Status> {
    let kind: ReportKind = kind.parse()?;
    let store = ResultStore::load_dir(results_dir)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| results_dir.join(REPORTS_DIR));
    for path in store.write_reports(&dir, kind)? {
        log::info!("wrote {}", path.display());
    }
    Ok(Status::Ok)
}

pub fn cmd_presets(
    main: &str,
    target: &str,
    context: &str,
    neighbors: &[String],
    neighbor_attribute: Option<&str>,
    out: Option<&Path>,
) -> Result<Status> {
    let suite = generate_presets(main, target, context, neighbors, neighbor_attribute.unwrap_or(target))?;
    let mut buf = Vec::new();
    suite.write(&mut buf).map_err(|e| io_err(Path::new("<presets>"), e))?;
    write_output(out, &buf)?;
    Ok(Status::Ok)
}

pub fn execute(cli: &Cli) -> Result<Status> {
    let workers = Workers(cli.workers.unwrap_or(1));
    match &cli.command {
        Command::Ingest {
            data_dir,
            out,
            delimiter,
        } => cmd_ingest(data_dir, out.as_deref(), delimiter, workers),
        Command::Correlate {
            data_dir,
            attribute,
            sources,
            out,
            delimiter,
        } => cmd_correlate(data_dir, attribute, sources, out.as_deref(), delimiter, workers),
        Command::Run { config, out, overrides } => cmd_run(config, out, overrides, cli.workers),
        Command::Optimize { config, out, overrides } => cmd_optimize(config, out, overrides, cli.workers),
        Command::Report { results_dir, kind, out } => cmd_report(results_dir, kind, out.as_deref()),
        Command::Presets {
            main,
            target,
            context,
            neighbors,
            neighbor_attribute,
            out,
        } => cmd_presets(
            main,
            target,
            context,
            neighbors,
            neighbor_attribute.as_deref(),
            out.as_deref(),
        ),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::PartialFailure) => EXIT_PARTIAL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
