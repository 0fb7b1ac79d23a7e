//! Runs every scenario × algorithm cell of a suite: assemble, window, split,
//! train, predict, measure.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DataRepository;
use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::learners::{self, Algorithm, LearnerConfig};
use crate::metrics::{MetricReport, DEFAULT_RE_EPS};
use crate::scenario::{ScenarioLabel, ScenarioSpec, ScenarioSuite};
use crate::window::{assemble, chronological_split, window};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub suite: ScenarioSuite,
    /// At most one configuration per algorithm.
    pub algorithms: Vec<LearnerConfig>,
    pub window: usize,
    pub split: f64,
    pub seed: u64,
    pub eps_re: f64,
    pub workers: Workers,
}

impl RunConfig {
    /// Window, split and algorithms taken from the suite's defaults.
    pub fn from_suite(suite: ScenarioSuite) -> Self {
        let d = suite.defaults.clone();
        RunConfig {
            algorithms: d.algorithms.iter().map(|a| LearnerConfig::default_for(*a)).collect(),
            window: d.window,
            split: d.split,
            suite,
            seed: 0,
            eps_re: DEFAULT_RE_EPS,
            workers: Workers::SEQUENTIAL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::RunConfig("window must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::RunConfig(format!(
                "split must lie in (0, 1), got {}",
                self.split
            )));
        }
        if !(self.eps_re > 0.0) {
            return Err(Error::RunConfig(format!(
                "eps_re must be positive, got {}",
                self.eps_re
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::RunConfig("no algorithms configured".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            a.validate()?;
            if self.algorithms[..i].iter().any(|b| b.algorithm() == a.algorithm()) {
                return Err(Error::RunConfig(format!(
                    "algorithm {} configured twice",
                    a.algorithm()
                )));
            }
        }
        Ok(())
    }

    pub fn learner(&self, algorithm: Algorithm) -> Option<&LearnerConfig> {
        self.algorithms.iter().find(|c| c.algorithm() == algorithm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub scenario_id: String,
    pub scenario_label: ScenarioLabel,
    /// Main source id.
    pub location: String,
    pub algorithm: Algorithm,
    pub params: String,
    pub metrics: MetricReport,
    pub predictions: Vec<Prediction>,
    /// Wall-clock time of the cell; absent for records loaded from disk.
    pub timing: Option<Duration>,
    pub seed: u64,
    pub eps_re: f64,
}

impl EvaluationRecord {
    pub fn key(&self) -> CellKey {
        CellKey {
            scenario_id: self.scenario_id.clone(),
            location: self.location.clone(),
            algorithm: self.algorithm,
        }
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.predicted).collect()
    }

    pub fn actual(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.actual).collect()
    }

    /// Same cell, parameters, seed, predictions and metrics; timing ignored.
    pub fn same_result(&self, other: &EvaluationRecord) -> bool {
        EvaluationRecord {
            timing: None,
            ..self.clone()
        } == EvaluationRecord {
            timing: None,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub scenario_id: String,
    pub location: String,
    pub algorithm: Algorithm,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}__{}__{}", self.scenario_id, self.location, self.algorithm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub key: CellKey,
    pub scenario_label: ScenarioLabel,
    pub params: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Ok(Box<EvaluationRecord>),
    Failed(FailedCell),
}

impl CellOutcome {
    pub fn key(&self) -> CellKey {
        match self {
            CellOutcome::Ok(r) => r.key(),
            CellOutcome::Failed(f) => f.key.clone(),
        }
    }
}

/// Outcomes in scenario-major, algorithm-minor order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub outcomes: Vec<CellOutcome>,
}

impl SuiteRun {
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

    pub fn n_failed(&self) -> usize {
        self.failures().count()
    }
}

/// Seed of one cell, derived from the run seed and the cell identity.
pub fn cell_seed(seed: u64, scenario_id: &str, algorithm: Algorithm) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((scenario_id.len() as u64).to_le_bytes());
    h.update(scenario_id.as_bytes());
    h.update(algorithm.to_string().as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Evaluates one cell.
pub fn run_cell(
    repo: &DataRepository,
    cfg: &RunConfig,
    spec: &ScenarioSpec,
    learner: &LearnerConfig,
) -> Result<EvaluationRecord> {
    let started = Instant::now();
    let seed = cell_seed(cfg.seed, spec.scenario_id(), learner.algorithm());
    spec.validate(repo)?;
    let table = assemble(repo, spec)?;
    let wt = window(&table, cfg.window)?;
    let (train, test) = chronological_split(&wt, cfg.split)?;
    let model = learners::train(learner, &train, seed)?;
    let predicted = model.predict(&test.x)?;
    let metrics = MetricReport::compute(&predicted, &test.y, cfg.eps_re)?;
    let predictions = test
        .example_dates
        .iter()
        .zip(&test.y)
        .zip(&predicted)
        .map(|((&date, &actual), &predicted)| Prediction {
            date,
            actual,
            predicted,
        })
        .collect();
    Ok(EvaluationRecord {
        scenario_id: spec.scenario_id().to_string(),
        scenario_label: spec.label(),
        location: spec.main_source().to_string(),
        algorithm: learner.algorithm(),
        params: learner.params_string(),
        metrics,
        predictions,
        timing: Some(started.elapsed()),
        seed,
        eps_re: cfg.eps_re,
    })
}

/// Runs every cell. Cell failures are recorded, not propagated; the call
/// fails only on an invalid configuration or when every cell fails.
pub fn run_suite(repo: &DataRepository, cfg: &RunConfig) -> Result<SuiteRun> {
    cfg.validate()?;
    let cells: Vec<(&ScenarioSpec, &LearnerConfig)> = cfg
        .suite
        .scenarios()
        .iter()
        .flat_map(|s| cfg.algorithms.iter().map(move |a| (s, a)))
        .collect();
    let total = cells.len();
    let outcomes = exec::map(cfg.workers, &cells, |i, (spec, learner)| {
        match run_cell(repo, cfg, spec, learner) {
            Ok(record) => {
                log::info!(
                    "[{}/{total}] {} RE={:.6} ({:.2?})",
                    i + 1,
                    record.key(),
                    record.metrics.re.value,
                    record.timing.unwrap_or_default()
                );
                CellOutcome::Ok(Box::new(record))
            }
            Err(e) => {
                let key = CellKey {
                    scenario_id: spec.scenario_id().to_string(),
                    location: spec.main_source().to_string(),
                    algorithm: learner.algorithm(),
                };
                log::warn!("[{}/{total}] {key} failed: {e}", i + 1);
                CellOutcome::Failed(FailedCell {
                    scenario_label: spec.label(),
                    params: learner.params_string(),
                    seed: cell_seed(cfg.seed, spec.scenario_id(), learner.algorithm()),
                    error: e.to_string(),
                    key,
                })
            }
        }
    });
    if total > 0 && outcomes.iter().all(|o| matches!(o, CellOutcome::Failed(_))) {
        let first = match &outcomes[0] {
            CellOutcome::Failed(f) => format!("{}: {}", f.key, f.error),
            CellOutcome::Ok(_) => unreachable!(),
        };
        return Err(Error::SuiteFailed { cells: total, first });
    }
    Ok(SuiteRun { outcomes })
}

/// Re-executes a single cell of the suite.
pub fn rerun_cell(
    repo: &DataRepository,
    cfg: &RunConfig,
    scenario_id: &str,
    algorithm: Algorithm,
) -> Result<EvaluationRecord> {
    let spec = cfg
        .suite
        .get(scenario_id)
        .ok_or_else(|| Error::CellNotFound(format!("no scenario {scenario_id:?}")))?;
    let learner = cfg
        .learner(algorithm)
        .ok_or_else(|| Error::CellNotFound(format!("algorithm {algorithm} is not part of the run")))?;
    run_cell(repo, cfg, spec, learner)
}
