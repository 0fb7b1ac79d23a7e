//! TOML run configuration.
//!
//! ```toml
//! data_dir = "data"            # relative paths resolve against this file
//! delimiter = ","
//! scenario_file = "scenarios.csv"
//! window = 7
//! split = 0.8
//! seed = 42
//! eps_re = 1e-9
//! workers = 1
//!
//! [[presets]]                  # may be combined with scenario_file
//! main = "s1"
//! target = "humidity"
//! context = "temperature"
//! neighbors = ["s2", "s3", "s4"]
//! neighbor_attribute = "humidity"  # default: target
//!
//! [[algorithms]]
//! algorithm = "KNN"
//! k = 5
//!
//! [optimize]
//! algorithm = "DL"
//! scenarios = ["s1-cadm"]      # default: every scenario
//! objective = "RE"
//! windows = [1, 3, 5, 7]       # optional window axis
//! [[optimize.axes]]            # default: the algorithm's preset grid
//! name = "epochs"
//! values = [2, 4, 6]
//! ```
//!
//! Window, split and algorithms fall back to the scenario file's defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Workers;
use crate::grid::{GridAxis, ParamGrid, PresetGrid};
use crate::learners::{Algorithm, LearnerConfig, ParamValue};
use crate::metrics::{Measure, DEFAULT_RE_EPS};
use crate::runner::RunConfig;
use crate::scenario::{parse_suite, PresetParams, ScenarioSuite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    pub algorithm: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisEntry {
    pub name: String,
    pub values: Vec<ParamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<AxisEntry>,
}

/// The file as written; see the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub data_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub presets: Vec<PresetParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::RunConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::RunConfig(e.to_string()))
    }
}

/// Scalar overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub window: Option<usize>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSettings {
    pub algorithm: Algorithm,
    pub base: LearnerConfig,
    /// Empty means every scenario of the suite.
    pub scenarios: Vec<String>,
    pub grid: ParamGrid,
    pub windows: Option<Vec<usize>>,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub data_dir: PathBuf,
    pub delimiter: u8,
    pub run: RunConfig,
    pub optimize: Option<OptimizeSettings>,
}

pub fn parse_delimiter(text: &str) -> Result<u8> {
    match text {
        "\\t" | "\t" | "tab" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(Error::RunConfig(format!(
            "delimiter must be a single ASCII character, got {s:?}"
        ))),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn learner_from_entry(entry: &AlgorithmEntry) -> Result<LearnerConfig> {
    let algorithm: Algorithm = entry.algorithm.parse()?;
    let config = LearnerConfig::with_params(algorithm, entry.params.iter().map(|(k, v)| (k.as_str(), v)))?;
    config.validate()?;
    Ok(config)
}

fn entry_from_learner(config: &LearnerConfig) -> AlgorithmEntry {
    AlgorithmEntry {
        algorithm: config.algorithm().to_string(),
        params: config.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

impl RunSettings {
    /// Resolves a parsed file; relative paths are taken from `base_dir`.
    pub fn resolve(file: &RunFile, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let delimiter = file
            .delimiter
            .as_deref()
            .map(parse_delimiter)
            .transpose()?
            .unwrap_or(b',');
        let mut suites = Vec::new();
        if let Some(path) = &file.scenario_file {
            suites.push(parse_suite(&resolve(base_dir, path))?);
        }
        for p in &file.presets {
            suites.push(p.generate()?);
        }
        if suites.is_empty() {
            return Err(Error::RunConfig("neither scenario_file nor presets given".into()));
        }
        let suite = ScenarioSuite::merge(suites)?;
        let mut run = RunConfig::from_suite(suite);
        if !file.algorithms.is_empty() {
            run.algorithms = file.algorithms.iter().map(learner_from_entry).collect::<Result<_>>()?;
        }
        run.window = overrides.window.or(file.window).unwrap_or(run.window);
        run.split = overrides.split.or(file.split).unwrap_or(run.split);
        run.seed = overrides.seed.or(file.seed).unwrap_or(0);
        run.eps_re = file.eps_re.unwrap_or(DEFAULT_RE_EPS);
        run.workers = Workers(overrides.workers.or(file.workers).unwrap_or(1));
        run.validate()?;

        let optimize = file
            .optimize
            .as_ref()
            .map(|o| -> Result<OptimizeSettings> {
                let algorithm: Algorithm = o.algorithm.parse()?;
                let base = run
                    .learner(algorithm)
                    .cloned()
                    .unwrap_or_else(|| LearnerConfig::default_for(algorithm));
                let objective = match &o.objective {
                    Some(m) => m.parse::<Measure>()?,
                    None => Measure::Re,
                };
                let axes = if o.axes.is_empty() {
                    PresetGrid::for_algorithm(algorithm).axes()
                } else {
                    o.axes
                        .iter()
                        .map(|a| GridAxis::new(a.name.clone(), a.values.clone()))
                        .collect()
                };
                let scenarios = o.scenarios.clone().unwrap_or_default();
                for id in &scenarios {
                    if run.suite.get(id).is_none() {
                        return Err(Error::RunConfig(format!("optimize names unknown scenario {id:?}")));
                    }
                }
                Ok(OptimizeSettings {
                    algorithm,
                    base,
                    scenarios,
                    grid: ParamGrid::new(axes, objective)?,
                    windows: o.windows.clone(),
                })
            })
            .transpose()?;

        Ok(RunSettings {
            data_dir: resolve(base_dir, overrides.data_dir.as_deref().unwrap_or(&file.data_dir)),
            delimiter,
            run,
            optimize,
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = RunFile::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::resolve(&file, base, overrides)
    }

    /// An equivalent file with every value explicit. `scenario_file` names
    /// where the caller stores the suite (see [`ScenarioSuite::write_file`]).
    pub fn snapshot(&self, scenario_file: &Path, optimize: Option<&OptimizeSection>) -> RunFile {
        RunFile {
            data_dir: self.data_dir.clone(),
            delimiter: Some((self.delimiter as char).to_string()),
            scenario_file: Some(scenario_file.to_path_buf()),
            window: Some(self.run.window),
            split: Some(self.run.split),
            seed: Some(self.run.seed),
            eps_re: Some(self.run.eps_re),
            workers: None,
            presets: Vec::new(),
            algorithms: self.run.algorithms.iter().map(entry_from_learner).collect(),
            optimize: optimize.cloned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRESET_RUN: &str = r#"
data_dir = "data"
seed = 5
window = 3

[[presets]]
main = "a"
target = "hum"
context = "temp"
neighbors = ["b", "c", "d"]
neighbor_attribute = "hum"

[[algorithms]]
algorithm = "KNN"
k = 3

[[algorithms]]
algorithm = "DL"
activation = "Tanh"
hidden_layers = [8, 4]
"#;

    #[test]
    fn presets_and_algorithms() {
        let file = RunFile::parse(PRESET_RUN).unwrap();
        let s = RunSettings::resolve(&file, Path::new("/cfg"), &Overrides::default()).unwrap();
        assert_eq!(s.data_dir, PathBuf::from("/cfg/data"));
        assert_eq!(s.run.suite.scenarios().len(), 6);
        assert_eq!(s.run.window, 3);
        assert_eq!(s.run.split, 0.8);
        assert_eq!(s.run.seed, 5);
        assert_eq!(s.run.algorithms.len(), 2);
        assert_eq!(s.run.algorithms[0].params_string(), "k=3;measure=Euclidean");
        assert!(s.run.algorithms[1].params_string().contains("hidden_layers=[8 4]"));
        assert!(s.optimize.is_none());
    }

    #[test]
    fn overrides_win() {
        let file = RunFile::parse(PRESET_RUN).unwrap();
        let o = Overrides {
            window: Some(9),
            seed: Some(1),
            workers: Some(0),
            data_dir: Some("/elsewhere".into()),
            ..Default::default()
        };
        let s = RunSettings::resolve(&file, Path::new("/cfg"), &o).unwrap();
        assert_eq!((s.run.window, s.run.seed, s.run.workers), (9, 1, Workers::ALL));
        assert_eq!(s.data_dir, PathBuf::from("/elsewhere"));
    }

    #[test]
    fn snapshot_resolves_to_the_same_run() {
        let dir = tempfile::tempdir().unwrap();
        let file = RunFile::parse(PRESET_RUN).unwrap();
        let s = RunSettings::resolve(&file, dir.path(), &Overrides::default()).unwrap();
        s.run.suite.write_file(&dir.path().join("scenarios.csv")).unwrap();
        let snap = s.snapshot(Path::new("scenarios.csv"), None);
        let text = snap.to_toml().unwrap();
        let back = RunSettings::resolve(&RunFile::parse(&text).unwrap(), dir.path(), &Overrides::default()).unwrap();
        assert_eq!(back.run.algorithms, s.run.algorithms);
        assert_eq!(back.run.suite.scenarios(), s.run.suite.scenarios());
        assert_eq!((back.run.window, back.run.split, back.run.seed), (3, 0.8, 5));
        assert_eq!(back.data_dir, s.data_dir);
    }

    #[test]
    fn optimize_section() {
        let text = format!(
            "{PRESET_RUN}\n[optimize]\nalgorithm = \"KNN\"\nscenarios = [\"a-cadm\"]\nwindows = [1, 3]\n\
             [[optimize.axes]]\nname = \"k\"\nvalues = [1, 2]\n"
        );
        let s = RunSettings::resolve(&RunFile::parse(&text).unwrap(), Path::new("."), &Overrides::default()).unwrap();
        let o = s.optimize.unwrap();
        assert_eq!(o.grid.len(), 2);
        assert_eq!(o.grid.objective, Measure::Re);
        assert_eq!(o.base.params_string(), "k=3;measure=Euclidean");
        assert_eq!(o.windows, Some(vec![1, 3]));

        let preset = format!("{PRESET_RUN}\n[optimize]\nalgorithm = \"GBT\"\n");
        let s = RunSettings::resolve(&RunFile::parse(&preset).unwrap(), Path::new("."), &Overrides::default()).unwrap();
        assert_eq!(s.optimize.unwrap().grid.len(), 480);
    }

    #[test]
    fn errors() {
        assert!(RunFile::parse("data_dir = \"x\"\nbogus = 1\n").is_err());
        let none = RunFile::parse("data_dir = \"x\"\n").unwrap();
        assert!(matches!(
            RunSettings::resolve(&none, Path::new("."), &Overrides::default()),
            Err(Error::RunConfig(_))
        ));
        let bad_measure = format!("{PRESET_RUN}\n[optimize]\nalgorithm = \"KNN\"\nobjective = \"MAPE\"\n");
        assert!(matches!(
            RunSettings::resolve(
                &RunFile::parse(&bad_measure).unwrap(),
                Path::new("."),
                &Overrides::default()
            ),
            Err(Error::Measure(_))
        ));
        let bad_split = PRESET_RUN.replace("window = 3", "split = 1.5");
        assert!(RunSettings::resolve(
            &RunFile::parse(&bad_split).unwrap(),
            Path::new("."),
            &Overrides::default()
        )
        .is_err());
        assert_eq!(parse_delimiter("tab").unwrap(), b'\t');
        assert!(parse_delimiter(";;").is_err());
    }
}
