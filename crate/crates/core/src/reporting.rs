//! Result store, on-disk results directory, and the aggregate views built
//! from it: ranking tables, Spearman tables, prediction series and the
//! RMSE/dispersion correlation.
//!
//! Results directory layout:
//!
//! ```text
//! index.csv                     one row per cell, run order
//! config.toml                   run configuration snapshot (when known)
//! cells/<scenario>__<location>__<algorithm>.csv
//! reports/cells.csv             value, stddev and variance of every measure
//! reports/summary_<group>_<measure>.csv
//! reports/spearman.csv          per-cell ρ, best flagged per location and algorithm
//! reports/spearman_by_label.csv mean ρ per scenario label and algorithm
//! reports/dispersion.csv        per-cell RMSE and its stddev, plus their correlation
//! ```
//!
//! Predictions are written losslessly; every other number uses 12
//! significant digits. Nothing time-dependent is written, so re-emitting a
//! store yields byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::dataset::DATE_FORMAT;
use crate::error::{Error, Result};
use crate::learners::Algorithm;
use crate::metrics::{pearson, spearman_rho, ErrorStat, Measure, MetricReport};
use crate::runner::{CellKey, CellOutcome, EvaluationRecord, FailedCell, Prediction, SuiteRun};
use crate::scenario::ScenarioLabel;

pub const INDEX_FILE: &str = "index.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const CELLS_DIR: &str = "cells";
pub const REPORTS_DIR: &str = "reports";

const INDEX_HEADER: [&str; 14] = [
    "scenario_id",
    "scenario_label",
    "location",
    "algorithm",
    "status",
    "seed",
    "params",
    "cell_file",
    "n_test",
    "ae",
    "re",
    "rmse",
    "spearman_rho",
    "error",
];

/// Formats `x` with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exp) {
        return format!("{x:.11e}");
    }
    format!("{:.*}", (11 - exp).max(0) as usize, x)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_else(|| "undefined".into())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Every cell outcome of a run, indexed by (scenario, location, algorithm).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultStore {
    outcomes: Vec<CellOutcome>,
    index: BTreeMap<CellKey, usize>,
    /// Text of the configuration that produced the run.
    pub config_snapshot: Option<String>,
}

impl ResultStore {
    pub fn new(outcomes: Vec<CellOutcome>, config_snapshot: Option<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, o) in outcomes.iter().enumerate() {
            let key = o.key();
            if index.insert(key.clone(), i).is_some() {
                return Err(Error::InvalidScenario(format!("duplicate result cell {key}")));
            }
        }
        Ok(ResultStore {
            outcomes,
            index,
            config_snapshot,
        })
    }

    pub fn from_run(run: &SuiteRun, config_snapshot: Option<String>) -> Result<Self> {
        Self::new(run.outcomes.clone(), config_snapshot)
    }

    pub fn outcomes(&self) -> &[CellOutcome] {
        &self.outcomes
    }

    pub fn records(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.outcomes.iter().filter_map(|o| match o {
            CellOutcome::Ok(r) => Some(r.as_ref()),
            CellOutcome::Failed(_) => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &FailedCell> {
        self.outcomes.iter().filter_map(|o| match o {
            CellOutcome::Failed(f) => Some(f),
            CellOutcome::Ok(_) => None,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellOutcome> {
        self.index.get(key).map(|&i| &self.outcomes[i])
    }

    /// The successful record of a cell.
    pub fn record(&self, scenario_id: &str, location: &str, algorithm: Algorithm) -> Result<&EvaluationRecord> {
        let key = CellKey {
            scenario_id: scenario_id.to_string(),
            location: location.to_string(),
            algorithm,
        };
        match self.get(&key) {
            Some(CellOutcome::Ok(r)) => Ok(r),
            Some(CellOutcome::Failed(f)) => Err(Error::CellNotFound(format!("{key} failed: {}", f.error))),
            None => Err(Error::CellNotFound(key.to_string())),
        }
    }

    /// Writes index, cell files, the config snapshot and every report.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let cells = dir.join(CELLS_DIR);
        fs::create_dir_all(&cells).map_err(|e| Error::io(&cells, e))?;
        for r in self.records() {
            let path = cells.join(cell_file_name(&r.key()));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_cell(r, BufWriter::new(file), &path)?;
        }
        let index = dir.join(INDEX_FILE);
        let file = fs::File::create(&index).map_err(|e| Error::io(&index, e))?;
        self.write_index(BufWriter::new(file), &index)?;
        if let Some(text) = &self.config_snapshot {
            let path = dir.join(CONFIG_FILE);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        self.write_reports(&dir.join(REPORTS_DIR), ReportKind::All)?;
        Ok(())
    }

    fn write_index<W: Write>(&self, out: W, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(INDEX_HEADER).map_err(csv_err(path))?;
        for o in &self.outcomes {
            let row: Vec<String> = match o {
                CellOutcome::Ok(r) => vec![
                    r.scenario_id.clone(),
                    r.scenario_label.to_string(),
                    r.location.clone(),
                    r.algorithm.to_string(),
                    "ok".into(),
                    r.seed.to_string(),
                    r.params.clone(),
                    format!("{CELLS_DIR}/{}", cell_file_name(&r.key())),
                    r.predictions.len().to_string(),
                    fmt_sig(r.metrics.ae.value),
                    fmt_sig(r.metrics.re.value),
                    fmt_sig(r.metrics.rmse.value),
                    fmt_opt(r.metrics.spearman_rho),
                    String::new(),
                ],
                CellOutcome::Failed(f) => vec![
                    f.key.scenario_id.clone(),
                    f.scenario_label.to_string(),
                    f.key.location.clone(),
                    f.key.algorithm.to_string(),
                    "failed".into(),
                    f.seed.to_string(),
                    f.params.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    f.error.clone(),
                ],
            };
            w.write_record(&row).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a results directory written by [`ResultStore::write_dir`].
    /// Metrics are recomputed from the stored predictions.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let index = dir.join(INDEX_FILE);
        let mut rdr = csv::Reader::from_path(&index).map_err(csv_err(&index))?;
        let headers = rdr.headers().map_err(csv_err(&index))?.clone();
        if headers.iter().ne(INDEX_HEADER) {
            return Err(format_err(&index, "unexpected index header"));
        }
        let mut outcomes = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err(&index))?;
            let bad = |what: &str| format_err(&index, format!("row {}: bad {what}", row + 1));
            let label: ScenarioLabel = rec[1].parse().map_err(|_| bad("scenario_label"))?;
            let algorithm: Algorithm = rec[3].parse().map_err(|_| bad("algorithm"))?;
            let seed: u64 = rec[5].parse().map_err(|_| bad("seed"))?;
            match &rec[4] {
                "ok" => {
                    let path = dir.join(&rec[7]);
                    let record = read_cell(&path)?;
                    if record.scenario_id != rec[0]
                        || record.location != rec[2]
                        || record.algorithm != algorithm
                        || record.seed != seed
                    {
                        return Err(format_err(&path, "cell metadata disagrees with the index"));
                    }
                    outcomes.push(CellOutcome::Ok(Box::new(record)));
                }
                "failed" => outcomes.push(CellOutcome::Failed(FailedCell {
                    key: CellKey {
                        scenario_id: rec[0].to_string(),
                        location: rec[2].to_string(),
                        algorithm,
                    },
                    scenario_label: label,
                    params: rec[6].to_string(),
                    seed,
                    error: rec[13].to_string(),
                })),
                _ => return Err(bad("status")),
            }
        }
        let config = dir.join(CONFIG_FILE);
        let snapshot = match fs::read_to_string(&config) {
            Ok(text) => Some(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&config, e)),
        };
        Self::new(outcomes, snapshot)
    }

    /// Writes the requested report files into `dir`; returns their paths.
    pub fn write_reports(&self, dir: &Path, kind: ReportKind) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut emit = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        let has_records = self.records().next().is_some();
        if matches!(kind, ReportKind::Cells | ReportKind::All) {
            emit("cells.csv".into(), self.cells_report())?;
        }
        if matches!(kind, ReportKind::Summary | ReportKind::All) && has_records {
            for group in GroupBy::ALL {
                for measure in Measure::ALL {
                    let table = summarize(self, group, measure)?;
                    emit(format!("summary_{group}_{measure}.csv").to_lowercase(), table.to_csv())?;
                }
            }
        }
        if matches!(kind, ReportKind::Spearman | ReportKind::All) {
            emit("spearman.csv".into(), spearman_table(self).to_csv())?;
            emit("spearman_by_label.csv".into(), spearman_by_label(self).to_csv())?;
        }
        if matches!(kind, ReportKind::Dispersion | ReportKind::All) {
            emit("dispersion.csv".into(), self.dispersion_report())?;
        }
        if kind == ReportKind::Series {
            let series = dir.join("series");
            fs::create_dir_all(&series).map_err(|e| Error::io(&series, e))?;
            for r in self.records() {
                let path = series.join(cell_file_name(&r.key()));
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                emit_series(self, &r.scenario_id, &r.location, r.algorithm, BufWriter::new(file))?;
                written.push(path);
            }
        }
        Ok(written)
    }

    fn cells_report(&self) -> String {
        let mut out = String::from("scenario_id,scenario_label,location,algorithm,n_test");
        for m in ["ae", "re", "rmse"] {
            out.push_str(&format!(",{m},{m}_stddev,{m}_variance"));
        }
        out.push_str(",n_excluded_re,spearman_rho\n");
        for r in self.records() {
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.scenario_id,
                r.scenario_label,
                r.location,
                r.algorithm,
                r.predictions.len()
            ));
            for s in [&r.metrics.ae, &r.metrics.re, &r.metrics.rmse] {
                out.push_str(&format!(
                    ",{},{},{}",
                    fmt_sig(s.value),
                    fmt_sig(s.stddev),
                    fmt_sig(s.variance)
                ));
            }
            out.push_str(&format!(
                ",{},{}\n",
                r.metrics.n_excluded_re,
                fmt_opt(r.metrics.spearman_rho)
            ));
        }
        out
    }

    fn dispersion_report(&self) -> String {
        let mut out = String::from("scenario_id,location,algorithm,rmse,rmse_stddev\n");
        for r in self.records() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.scenario_id,
                r.location,
                r.algorithm,
                fmt_sig(r.metrics.rmse.value),
                fmt_sig(r.metrics.rmse.stddev)
            ));
        }
        let corr = error_dispersion_correlation(self).ok();
        out.push_str(&format!("# correlation: {}\n", fmt_opt(corr)));
        out
    }
}

/// `<scenario>__<location>__<algorithm>.csv`
pub fn cell_file_name(key: &CellKey) -> String {
    format!("{key}.csv")
}

fn write_cell<W: Write>(r: &EvaluationRecord, mut out: W, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let stat = |s: &ErrorStat| format!("{} {} {}", fmt_sig(s.value), fmt_sig(s.stddev), fmt_sig(s.variance));
    let meta = [
        ("scenario_id", r.scenario_id.clone()),
        ("scenario_label", r.scenario_label.to_string()),
        ("location", r.location.clone()),
        ("algorithm", r.algorithm.to_string()),
        ("params", r.params.clone()),
        ("seed", r.seed.to_string()),
        ("eps_re", r.eps_re.to_string()),
        ("ae", stat(&r.metrics.ae)),
        ("re", stat(&r.metrics.re)),
        ("rmse", stat(&r.metrics.rmse)),
        ("spearman_rho", fmt_opt(r.metrics.spearman_rho)),
        ("n_excluded_re", r.metrics.n_excluded_re.to_string()),
    ];
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    write_series_rows(&r.predictions, &mut out).map_err(io)?;
    out.flush().map_err(io)
}

fn write_series_rows<W: Write>(predictions: &[Prediction], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "date,actual,predicted,deviation")?;
    for p in predictions {
        writeln!(
            out,
            "{},{},{},{}",
            p.date.format(DATE_FORMAT),
            p.actual,
            p.predicted,
            p.predicted - p.actual
        )?;
    }
    Ok(())
}

/// Reads a series or cell file body: `date,actual,predicted,deviation` rows
/// after any `#` comment lines.
pub fn read_series(text: &str, path: &Path) -> Result<Vec<Prediction>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some("date,actual,predicted,deviation") {
        return Err(format_err(path, "missing series header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || format_err(path, format!("series row {}: {line:?}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(Prediction {
                date: NaiveDate::parse_from_str(f[0], DATE_FORMAT).map_err(|_| bad())?,
                actual: f[1].parse().map_err(|_| bad())?,
                predicted: f[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Loads one cell file; metrics are recomputed from its predictions.
pub fn read_cell(path: &Path) -> Result<EvaluationRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: BTreeMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(": "))
        .collect();
    let field = |k: &str| {
        meta.get(k)
            .copied()
            .ok_or_else(|| format_err(path, format!("missing {k:?}")))
    };
    let bad = |k: &str| format_err(path, format!("bad {k:?}"));
    let predictions = read_series(&text, path)?;
    let eps_re: f64 = field("eps_re")?.parse().map_err(|_| bad("eps_re"))?;
    let metrics = MetricReport::compute(
        &predictions.iter().map(|p| p.predicted).collect::<Vec<_>>(),
        &predictions.iter().map(|p| p.actual).collect::<Vec<_>>(),
        eps_re,
    )?;
    Ok(EvaluationRecord {
        scenario_id: field("scenario_id")?.to_string(),
        scenario_label: field("scenario_label")?.parse().map_err(|_| bad("scenario_label"))?,
        location: field("location")?.to_string(),
        algorithm: field("algorithm")?.parse().map_err(|_| bad("algorithm"))?,
        params: field("params")?.to_string(),
        metrics,
        predictions,
        timing: None,
        seed: field("seed")?.parse().map_err(|_| bad("seed"))?,
        eps_re,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Summary,
    Spearman,
    Dispersion,
    Cells,
    Series,
    /// Everything except series (the cell files already hold them).
    All,
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "summary" => Ok(ReportKind::Summary),
            "spearman" => Ok(ReportKind::Spearman),
            "dispersion" => Ok(ReportKind::Dispersion),
            "cells" => Ok(ReportKind::Cells),
            "series" => Ok(ReportKind::Series),
            "all" => Ok(ReportKind::All),
            _ => Err(Error::Parse(format!("unknown report kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupBy {
    Algorithm,
    Location,
    Scenario,
}

impl GroupBy {
    pub const ALL: [GroupBy; 3] = [GroupBy::Algorithm, GroupBy::Location, GroupBy::Scenario];

    fn key(self, r: &EvaluationRecord) -> String {
        match self {
            GroupBy::Algorithm => r.algorithm.to_string(),
            GroupBy::Location => r.location.clone(),
            GroupBy::Scenario => r.scenario_label.to_string(),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Algorithm => "algorithm",
            GroupBy::Location => "location",
            GroupBy::Scenario => "scenario",
        })
    }
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "algorithm" => Ok(GroupBy::Algorithm),
            "location" => Ok(GroupBy::Location),
            "scenario" => Ok(GroupBy::Scenario),
            _ => Err(Error::Parse(format!("unknown grouping {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub rank: usize,
    pub key: String,
    /// Mean over the group's cells; `None` when no cell defines the measure.
    pub mean: Option<f64>,
    /// Means of the per-cell stddev and variance (error measures only).
    pub mean_stddev: Option<f64>,
    pub mean_variance: Option<f64>,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub group_by: GroupBy,
    pub measure: Measure,
    pub rows: Vec<RankingRow>,
}

impl RankingTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("rank,{},mean,mean_stddev,mean_variance,n_cells\n", self.group_by);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.rank,
                r.key,
                fmt_opt(r.mean),
                r.mean_stddev.map(fmt_sig).unwrap_or_default(),
                r.mean_variance.map(fmt_sig).unwrap_or_default(),
                r.n_cells
            ));
        }
        out
    }
}

fn mean_of(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean of `measure` per group, ranked best first with dense ranks.
/// Groups order by key when their means are equal; groups with no defined
/// value come last.
pub fn summarize(store: &ResultStore, group_by: GroupBy, measure: Measure) -> Result<RankingTable> {
    if store.records().next().is_none() {
        return Err(Error::CellNotFound("result store has no successful cells".into()));
    }
    let mut groups: BTreeMap<String, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in store.records() {
        groups.entry(group_by.key(r)).or_default().push(r);
    }
    let mut rows: Vec<RankingRow> = groups
        .into_iter()
        .map(|(key, members)| {
            let values: Vec<f64> = members.iter().filter_map(|r| r.metrics.value(measure)).collect();
            let stats: Vec<&ErrorStat> = members.iter().filter_map(|r| r.metrics.stat(measure)).collect();
            RankingRow {
                rank: 0,
                mean: mean_of(&values),
                mean_stddev: mean_of(&stats.iter().map(|s| s.stddev).collect::<Vec<_>>()),
                mean_variance: mean_of(&stats.iter().map(|s| s.variance).collect::<Vec<_>>()),
                n_cells: members.len(),
                key,
            }
        })
        .collect();
    let sign = if measure.lower_is_better() { 1.0 } else { -1.0 };
    rows.sort_by(|a, b| match (a.mean, b.mean) {
        (Some(x), Some(y)) => (sign * x).total_cmp(&(sign * y)).then_with(|| a.key.cmp(&b.key)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.key.cmp(&b.key),
    });
    let mut rank = 0;
    for i in 0..rows.len() {
        if i == 0 || rows[i].mean != rows[i - 1].mean {
            rank += 1;
        }
        rows[i].rank = rank;
    }
    Ok(RankingTable {
        group_by,
        measure,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpearmanCell {
    pub location: String,
    pub scenario_id: String,
    pub scenario_label: ScenarioLabel,
    pub algorithm: Algorithm,
    /// `None` when ρ is undefined for the cell.
    pub rho: Option<f64>,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpearmanTable {
    pub cells: Vec<SpearmanCell>,
}

impl SpearmanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("location,scenario_id,scenario_label,algorithm,rho,best\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.location,
                c.scenario_id,
                c.scenario_label,
                c.algorithm,
                fmt_opt(c.rho),
                u8::from(c.best)
            ));
        }
        out
    }
}

/// Flags every maximal defined value within each group.
fn flag_maxima<K: Ord>(rhos: &[Option<f64>], group: impl Fn(usize) -> K) -> Vec<bool> {
    let mut best: BTreeMap<K, f64> = BTreeMap::new();
    for (i, r) in rhos.iter().enumerate() {
        if let Some(r) = *r {
            let e = best.entry(group(i)).or_insert(r);
            *e = e.max(r);
        }
    }
    rhos.iter()
        .enumerate()
        .map(|(i, r)| r.is_some_and(|r| best.get(&group(i)) == Some(&r)))
        .collect()
}

/// ρ of every cell recomputed from its predictions. Within each
/// (location, algorithm) column the maximal cells are flagged.
pub fn spearman_table(store: &ResultStore) -> SpearmanTable {
    let records: Vec<&EvaluationRecord> = store.records().collect();
    let rhos: Vec<Option<f64>> = records
        .iter()
        .map(|r| spearman_rho(&r.predicted(), &r.actual()).ok())
        .collect();
    let best = flag_maxima(&rhos, |i| (records[i].location.clone(), records[i].algorithm));
    let cells = records
        .iter()
        .zip(rhos)
        .zip(best)
        .map(|((r, rho), best)| SpearmanCell {
            location: r.location.clone(),
            scenario_id: r.scenario_id.clone(),
            scenario_label: r.scenario_label,
            algorithm: r.algorithm,
            rho,
            best,
        })
        .collect();
    SpearmanTable { cells }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpearman {
    pub scenario_label: ScenarioLabel,
    pub algorithm: Algorithm,
    /// Mean over the cells whose ρ is defined.
    pub mean_rho: Option<f64>,
    pub n_cells: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpearmanTable {
    pub rows: Vec<LabelSpearman>,
}

impl LabelSpearmanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario_label,algorithm,mean_rho,n_cells,best\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.scenario_label,
                r.algorithm,
                fmt_opt(r.mean_rho),
                r.n_cells,
                u8::from(r.best)
            ));
        }
        out
    }
}

/// Per-cell ρ averaged over locations for each scenario label and algorithm;
/// the maximal label per algorithm is flagged.
pub fn spearman_by_label(store: &ResultStore) -> LabelSpearmanTable {
    let mut groups: BTreeMap<(ScenarioLabel, Algorithm), (Vec<f64>, usize)> = BTreeMap::new();
    for c in spearman_table(store).cells {
        let e = groups.entry((c.scenario_label, c.algorithm)).or_default();
        e.0.extend(c.rho);
        e.1 += 1;
    }
    let mut rows: Vec<LabelSpearman> = groups
        .into_iter()
        .map(|((scenario_label, algorithm), (rhos, n_cells))| LabelSpearman {
            scenario_label,
            algorithm,
            mean_rho: mean_of(&rhos),
            n_cells,
            best: false,
        })
        .collect();
    let means: Vec<Option<f64>> = rows.iter().map(|r| r.mean_rho).collect();
    let algs: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    for (row, best) in rows.iter_mut().zip(flag_maxima(&means, |i| algs[i])) {
        row.best = best;
    }
    LabelSpearmanTable { rows }
}

/// Writes `date,actual,predicted,deviation` for one cell.
pub fn emit_series<W: Write>(
    store: &ResultStore,
    scenario_id: &str,
    location: &str,
    algorithm: Algorithm,
    mut out: W,
) -> Result<()> {
    let r = store.record(scenario_id, location, algorithm)?;
    let io = |e| Error::io(format!("<series {}>", r.key()), e);
    write_series_rows(&r.predictions, &mut out).map_err(io)?;
    out.flush().map_err(io)
}

/// Pearson correlation between each cell's RMSE and the stddev of its
/// squared-error terms, over every successful cell.
pub fn error_dispersion_correlation(store: &ResultStore) -> Result<f64> {
    let (rmse, spread): (Vec<f64>, Vec<f64>) = store
        .records()
        .map(|r| (r.metrics.rmse.value, r.metrics.rmse.stddev))
        .unzip();
    pearson(&rmse, &spread)
}
