//! Exhaustive grid search over learner hyperparameters and window sizes.
//!
//! Every grid point runs window → chronological split → train → predict →
//! metrics on one assembled table. Trials are enumerated lexicographically:
//! the window axis (when given) is outermost, then the declared axes in
//! order, the last axis varying fastest. The best trial minimises the
//! objective; ties go to the earliest trial.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::learners::{self, Activation, Algorithm, LearnerConfig, ParamValue};
use crate::metrics::{Measure, MetricReport, DEFAULT_RE_EPS};
use crate::reporting::fmt_sig;
use crate::scenario::{DEFAULT_SPLIT, DEFAULT_WINDOW};
use crate::window::{chronological_split, window, AssembledTable, WindowedTable};

/// Name used for the window axis in trial assignments.
pub const WINDOW_AXIS: &str = "window";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

impl GridAxis {
    pub fn new(name: impl Into<String>, values: Vec<ParamValue>) -> Self {
        GridAxis {
            name: name.into(),
            values,
        }
    }

    pub fn ints(name: &str, values: impl IntoIterator<Item = i64>) -> Self {
        Self::new(name, values.into_iter().map(ParamValue::Int).collect())
    }

    pub fn reals(name: &str, values: impl IntoIterator<Item = f64>) -> Self {
        Self::new(name, values.into_iter().map(ParamValue::Real).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    axes: Vec<GridAxis>,
    pub objective: Measure,
}

impl ParamGrid {
    pub fn new(axes: Vec<GridAxis>, objective: Measure) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if a.values.is_empty() {
                return Err(Error::InvalidConfig(format!("grid axis {:?} has no values", a.name)));
            }
            if a.name == WINDOW_AXIS {
                return Err(Error::InvalidConfig("the window axis is passed separately".into()));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidConfig(format!("grid axis {:?} declared twice", a.name)));
            }
        }
        Ok(ParamGrid { axes, objective })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every assignment in lexicographic order (last axis fastest).
    pub fn assignments(&self) -> Vec<Vec<(String, ParamValue)>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut a = prefix.clone();
                        a.push((axis.name.clone(), v.clone()));
                        a
                    })
                })
                .collect();
        }
        out
    }
}

/// Settings shared by every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Window sizes to sweep; `None` evaluates `window` only.
    pub windows: Option<Vec<usize>>,
    pub window: usize,
    pub split: f64,
    /// Shared by every trial.
    pub seed: u64,
    pub eps_re: f64,
    pub workers: Workers,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            windows: None,
            window: DEFAULT_WINDOW,
            split: DEFAULT_SPLIT,
            seed: 0,
            eps_re: DEFAULT_RE_EPS,
            workers: Workers::SEQUENTIAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub assignment: Vec<(String, ParamValue)>,
    pub config: LearnerConfig,
    pub window: usize,
    pub report: MetricReport,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub trials: Vec<Trial>,
    pub best: usize,
    pub objective: Measure,
}

impl GridResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.objective).collect()
    }

    /// One row per trial in grid order; `best` marks the winner.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = self.trials[0].assignment.iter().map(|(n, _)| n.as_str()).collect();
        let mut out = format!(
            "trial,{}{}objective,ae,re,rmse,spearman_rho,best\n",
            names.join(","),
            if names.is_empty() { "" } else { "," }
        );
        for (i, t) in self.trials.iter().enumerate() {
            out.push_str(&i.to_string());
            for (_, v) in &t.assignment {
                out.push_str(&format!(",{}", v.to_string().replace(',', " ")));
            }
            out.push_str(&format!(
                ",{},{},{},{},{},{}\n",
                fmt_sig(t.objective),
                fmt_sig(t.report.ae.value),
                fmt_sig(t.report.re.value),
                fmt_sig(t.report.rmse.value),
                t.report.spearman_rho.map(fmt_sig).unwrap_or_else(|| "undefined".into()),
                u8::from(i == self.best)
            ));
        }
        out
    }
}

pub fn assignment_string(assignment: &[(String, ParamValue)]) -> String {
    assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Index of the smallest value; the first one wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Trains and scores one configuration on a prepared split.
pub fn evaluate_split(
    config: &LearnerConfig,
    train: &WindowedTable,
    test: &WindowedTable,
    seed: u64,
    eps_re: f64,
) -> Result<(Vec<f64>, MetricReport)> {
    let model = learners::train(config, train, seed)?;
    let pred = model.predict(&test.x)?;
    let report = MetricReport::compute(&pred, &test.y, eps_re)?;
    Ok((pred, report))
}

pub fn grid_search(
    base: &LearnerConfig,
    grid: &ParamGrid,
    table: &AssembledTable,
    opts: &GridOptions,
) -> Result<GridResult> {
    let windows = opts.windows.clone().unwrap_or_else(|| vec![opts.window]);
    if windows.is_empty() {
        return Err(Error::InvalidConfig("window axis has no values".into()));
    }
    let mut splits = Vec::with_capacity(windows.len());
    for &w in &windows {
        let named = |e: Error| {
            let mut assignment = Vec::new();
            if opts.windows.is_some() {
                assignment.push((WINDOW_AXIS.to_string(), ParamValue::Int(w as i64)));
            }
            if let Some(first) = grid.assignments().into_iter().next() {
                assignment.extend(first);
            }
            Error::GridTrial {
                assignment: assignment_string(&assignment),
                source: Box::new(e),
            }
        };
        let wt = window(table, w).map_err(named)?;
        splits.push(chronological_split(&wt, opts.split).map_err(named)?);
    }

    let mut points = Vec::with_capacity(windows.len() * grid.len());
    for (wi, &w) in windows.iter().enumerate() {
        for params in grid.assignments() {
            let mut assignment = Vec::with_capacity(params.len() + 1);
            if opts.windows.is_some() {
                assignment.push((WINDOW_AXIS.to_string(), ParamValue::Int(w as i64)));
            }
            assignment.extend(params);
            points.push((wi, assignment));
        }
    }

    let outcomes = exec::map(opts.workers, &points, |_, (wi, assignment)| -> Result<Trial> {
        let named = |e: Error| Error::GridTrial {
            assignment: assignment_string(assignment),
            source: Box::new(e),
        };
        let mut config = base.clone();
        for (name, value) in assignment.iter().filter(|(n, _)| n != WINDOW_AXIS) {
            config.set(name, value).map_err(named)?;
        }
        config.validate().map_err(named)?;
        let (train, test) = &splits[*wi];
        let (_, report) = evaluate_split(&config, train, test, opts.seed, opts.eps_re).map_err(named)?;
        Ok(Trial {
            objective: report.objective(grid.objective),
            assignment: assignment.clone(),
            config,
            window: windows[*wi],
            report,
        })
    });
    let trials: Vec<Trial> = outcomes.into_iter().collect::<Result<_>>()?;
    let best = argmin(&trials.iter().map(|t| t.objective).collect::<Vec<_>>()).expect("grid is non-empty");
    Ok(GridResult {
        trials,
        best,
        objective: grid.objective,
    })
}

/// Window sizes swept during the initial windowing study.
pub const WINDOW_PRESET: [usize; 7] = [1, 3, 5, 7, 10, 20, 30];

/// Built-in grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresetGrid {
    /// k ∈ {1, 2, 3, 4, 5, 7, 10, 15, 20}
    Knn,
    /// max_depth ∈ 1..=10
    Dt,
    /// activation × epochs {2, 4, 6, 8, 10, 15}
    Dl,
    /// trees 10..=100 step 10 × depth {3, 5, 7, 15} × rate {0.01, 0.02, 0.03, 0.1} × bins {10, 20, 30}
    Gbt,
}

impl PresetGrid {
    pub fn algorithm(self) -> Algorithm {
        match self {
            PresetGrid::Knn => Algorithm::Knn,
            PresetGrid::Dt => Algorithm::Dt,
            PresetGrid::Dl => Algorithm::Dl,
            PresetGrid::Gbt => Algorithm::Gbt,
        }
    }

    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => PresetGrid::Knn,
            Algorithm::Dt => PresetGrid::Dt,
            Algorithm::Dl => PresetGrid::Dl,
            Algorithm::Gbt => PresetGrid::Gbt,
        }
    }

    pub fn axes(self) -> Vec<GridAxis> {
        match self {
            PresetGrid::Knn => vec![GridAxis::ints("k", [1, 2, 3, 4, 5, 7, 10, 15, 20])],
            PresetGrid::Dt => vec![GridAxis::ints("max_depth", 1..=10)],
            PresetGrid::Dl => vec![
                GridAxis::new(
                    "activation",
                    Activation::ALL
                        .iter()
                        .map(|a| ParamValue::Text(a.to_string()))
                        .collect(),
                ),
                GridAxis::ints("epochs", [2, 4, 6, 8, 10, 15]),
            ],
            PresetGrid::Gbt => vec![
                GridAxis::ints("n_trees", (1..=10).map(|i| i * 10)),
                GridAxis::ints("max_depth", [3, 5, 7, 15]),
                GridAxis::reals("learning_rate", [0.01, 0.02, 0.03, 0.1]),
                GridAxis::ints("n_bins", [10, 20, 30]),
            ],
        }
    }

    pub fn grid(self) -> ParamGrid {
        ParamGrid::new(self.axes(), Measure::Re).expect("preset grids are valid")
    }
}

impl fmt::Display for PresetGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.algorithm(), f)
    }
}

impl FromStr for PresetGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self::for_algorithm(s.parse()?))
    }
}
