//! Regression learners behind one train/predict interface: k-nearest
//! neighbours, a variance-reduction decision tree, histogram gradient boosted
//! trees and a fully connected network.
//!
//! KNN and the network see standardized features (constants fitted on the
//! training rows); the tree learners work on raw values.

mod gbt;
mod knn;
mod mlp;
mod tree;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::matrix::Matrix;
use crate::window::WindowedTable;

pub use gbt::GbtModel;
pub use knn::KnnModel;
pub use mlp::{Activation, Mlp, MlpRegressor};
pub use tree::{Node, RegressionTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "DL")]
    Dl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Knn, Algorithm::Dt, Algorithm::Gbt, Algorithm::Dl];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Knn => "KNN",
            Algorithm::Dt => "DT",
            Algorithm::Gbt => "GBT",
            Algorithm::Dl => "DL",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "KNN" => Ok(Algorithm::Knn),
            "DT" => Ok(Algorithm::Dt),
            "GBT" => Ok(Algorithm::Gbt),
            "DL" => Ok(Algorithm::Dl),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// A hyperparameter value as it appears in configuration files and grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
    List(Vec<i64>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
            ParamValue::List(v) => {
                let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", parts.join(" "))
            }
        }
    }
}

impl ParamValue {
    fn as_usize(&self, name: &str) -> Result<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
            ParamValue::Real(v) if *v >= 0.0 && v.fract() == 0.0 => Ok(*v as usize),
            _ => Err(Error::InvalidConfig(format!(
                "{name} must be a non-negative integer, got {self}"
            ))),
        }
    }

    fn as_f64(&self, name: &str) -> Result<f64> {
        match self {
            ParamValue::Int(v) => Ok(*v as f64),
            ParamValue::Real(v) => Ok(*v),
            _ => Err(Error::InvalidConfig(format!("{name} must be a number, got {self}"))),
        }
    }

    fn as_text(&self, name: &str) -> Result<&str> {
        match self {
            ParamValue::Text(v) => Ok(v),
            _ => Err(Error::InvalidConfig(format!("{name} must be text, got {self}"))),
        }
    }

    fn as_sizes(&self, name: &str) -> Result<Vec<usize>> {
        let bad = || Error::InvalidConfig(format!("{name} must be a list of positive integers, got {self}"));
        match self {
            ParamValue::List(v) => v.iter().map(|&n| usize::try_from(n).map_err(|_| bad())).collect(),
            ParamValue::Int(n) if *n > 0 => Ok(vec![*n as usize]),
            ParamValue::Text(t) => t
                .split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<usize>().map_err(|_| bad()))
                .collect(),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtParams {
    pub max_depth: usize,
    /// Minimum relative reduction of the node's squared error for a split.
    pub min_gain: f64,
    pub min_leaf_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Equal-width histogram bins per feature used as split candidates.
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlParams {
    pub activation: Activation,
    pub epochs: usize,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: 4,
            min_gain: 0.01,
            min_leaf_size: 2,
        }
    }
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 50,
            max_depth: 7,
            learning_rate: 0.01,
            n_bins: 20,
        }
    }
}

impl Default for DlParams {
    fn default() -> Self {
        DlParams {
            activation: Activation::Rectifier,
            epochs: 5,
            hidden_layers: vec![50, 50],
            learning_rate: 0.01,
            batch_size: 16,
        }
    }
}

/// An algorithm together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum LearnerConfig {
    #[serde(rename = "KNN")]
    Knn(KnnParams),
    #[serde(rename = "DT")]
    Dt(DtParams),
    #[serde(rename = "GBT")]
    Gbt(GbtParams),
    #[serde(rename = "DL")]
    Dl(DlParams),
}

impl LearnerConfig {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => LearnerConfig::Knn(KnnParams::default()),
            Algorithm::Dt => LearnerConfig::Dt(DtParams::default()),
            Algorithm::Gbt => LearnerConfig::Gbt(GbtParams::default()),
            Algorithm::Dl => LearnerConfig::Dl(DlParams::default()),
        }
    }

    /// Default configuration with the named overrides applied, then validated.
    pub fn with_params<'a>(
        algorithm: Algorithm,
        overrides: impl IntoIterator<Item = (&'a str, &'a ParamValue)>,
    ) -> Result<Self> {
        let mut cfg = Self::default_for(algorithm);
        for (name, value) in overrides {
            cfg.set(name, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            LearnerConfig::Knn(_) => Algorithm::Knn,
            LearnerConfig::Dt(_) => Algorithm::Dt,
            LearnerConfig::Gbt(_) => Algorithm::Gbt,
            LearnerConfig::Dl(_) => Algorithm::Dl,
        }
    }

    /// Sets one named hyperparameter. Does not validate ranges; see [`validate`](Self::validate).
    pub fn set(&mut self, name: &str, value: &ParamValue) -> Result<()> {
        match (self, name) {
            (LearnerConfig::Knn(p), "k") => p.k = value.as_usize(name)?,
            (LearnerConfig::Knn(_), "measure") => {
                let m = value.as_text(name)?;
                if !m.eq_ignore_ascii_case("euclidean") {
                    return Err(Error::InvalidConfig(format!("unsupported KNN measure {m:?}")));
                }
            }
            (LearnerConfig::Dt(p), "max_depth") => p.max_depth = value.as_usize(name)?,
            (LearnerConfig::Dt(p), "min_gain") => p.min_gain = value.as_f64(name)?,
            (LearnerConfig::Dt(p), "min_leaf_size") => p.min_leaf_size = value.as_usize(name)?,
            (LearnerConfig::Gbt(p), "n_trees") => p.n_trees = value.as_usize(name)?,
            (LearnerConfig::Gbt(p), "max_depth") => p.max_depth = value.as_usize(name)?,
            (LearnerConfig::Gbt(p), "learning_rate") => p.learning_rate = value.as_f64(name)?,
            (LearnerConfig::Gbt(p), "n_bins") => p.n_bins = value.as_usize(name)?,
            (LearnerConfig::Dl(p), "activation") => p.activation = value.as_text(name)?.parse()?,
            (LearnerConfig::Dl(p), "epochs") => p.epochs = value.as_usize(name)?,
            (LearnerConfig::Dl(p), "hidden_layers") => p.hidden_layers = value.as_sizes(name)?,
            (LearnerConfig::Dl(p), "learning_rate") => p.learning_rate = value.as_f64(name)?,
            (LearnerConfig::Dl(p), "batch_size") => p.batch_size = value.as_usize(name)?,
            (cfg, _) => {
                return Err(Error::InvalidConfig(format!(
                    "{} has no parameter {name:?}",
                    cfg.algorithm()
                )))
            }
        }
        Ok(())
    }

    /// Snapshot of every hyperparameter in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, ParamValue)> {
        let int = |v: usize| ParamValue::Int(v as i64);
        match self {
            LearnerConfig::Knn(p) => vec![("k", int(p.k)), ("measure", ParamValue::Text("Euclidean".into()))],
            LearnerConfig::Dt(p) => vec![
                ("max_depth", int(p.max_depth)),
                ("min_gain", ParamValue::Real(p.min_gain)),
                ("min_leaf_size", int(p.min_leaf_size)),
            ],
            LearnerConfig::Gbt(p) => vec![
                ("n_trees", int(p.n_trees)),
                ("max_depth", int(p.max_depth)),
                ("learning_rate", ParamValue::Real(p.learning_rate)),
                ("n_bins", int(p.n_bins)),
            ],
            LearnerConfig::Dl(p) => vec![
                ("activation", ParamValue::Text(p.activation.to_string())),
                ("epochs", int(p.epochs)),
                (
                    "hidden_layers",
                    ParamValue::List(p.hidden_layers.iter().map(|&h| h as i64).collect()),
                ),
                ("learning_rate", ParamValue::Real(p.learning_rate)),
                ("batch_size", int(p.batch_size)),
            ],
        }
    }

    /// `name=value` pairs joined by `;`.
    pub fn params_string(&self) -> String {
        self.params()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(format!("{}: {msg}", self.algorithm())));
        match self {
            LearnerConfig::Knn(p) if p.k < 1 => fail("k must be at least 1".into()),
            LearnerConfig::Dt(p) if p.max_depth < 1 => fail("max_depth must be at least 1".into()),
            LearnerConfig::Dt(p) if p.min_leaf_size < 1 => fail("min_leaf_size must be at least 1".into()),
            LearnerConfig::Dt(p) if !(p.min_gain >= 0.0 && p.min_gain.is_finite()) => {
                fail(format!("min_gain {} must be a finite non-negative number", p.min_gain))
            }
            LearnerConfig::Gbt(p) if p.max_depth < 1 => fail("max_depth must be at least 1".into()),
            LearnerConfig::Gbt(p) if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) => {
                fail(format!("learning_rate {} outside (0, 1]", p.learning_rate))
            }
            LearnerConfig::Gbt(p) if p.n_bins < 2 => fail("n_bins must be at least 2".into()),
            LearnerConfig::Dl(p) if p.epochs < 1 => fail("epochs must be at least 1".into()),
            LearnerConfig::Dl(p) if p.hidden_layers.is_empty() || p.hidden_layers.contains(&0) => {
                fail("hidden_layers must be non-empty positive sizes".into())
            }
            LearnerConfig::Dl(p) if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) => {
                fail(format!("learning_rate {} must be positive", p.learning_rate))
            }
            LearnerConfig::Dl(p) if p.batch_size < 1 => fail("batch_size must be at least 1".into()),
            _ => Ok(()),
        }
    }

    /// Whether training consumes the seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, LearnerConfig::Dl(_))
    }
}

/// Per-feature mean and standard deviation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Zero-variance features keep a scale of 1.
    pub stddevs: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mut means = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stddevs = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, stddevs }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let t = self.transform_row(x.row(i));
            out.row_mut(i).copy_from_slice(&t);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedModel {
    Knn(KnnModel),
    Tree(RegressionTree),
    Gbt(GbtModel),
    Dl(MlpRegressor),
}

/// A fitted predictor; immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: LearnerConfig,
    pub feature_names: Vec<String>,
    pub standardization: Option<Standardizer>,
    /// SHA-256 prefix over the training matrix and targets.
    pub train_fingerprint: String,
    pub seed: u64,
    pub fitted: FittedModel,
}

fn fingerprint(x: &Matrix, y: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((x.rows() as u64).to_le_bytes());
    h.update((x.cols() as u64).to_le_bytes());
    for v in x.as_slice().iter().chain(y) {
        h.update(v.to_le_bytes());
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains on a windowed table; feature names are carried into the model.
pub fn train(config: &LearnerConfig, data: &WindowedTable, seed: u64) -> Result<TrainedModel> {
    let mut model = train_xy(config, &data.x, &data.y, seed)?;
    model.feature_names = data.feature_names.clone();
    Ok(model)
}

/// Trains on a raw feature matrix and target vector.
pub fn train_xy(config: &LearnerConfig, x: &Matrix, y: &[f64], seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} training rows vs {} targets",
            x.rows(),
            y.len()
        )));
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData("training data".into()));
    }
    let (standardization, fitted) = match config {
        LearnerConfig::Knn(p) => {
            let s = Standardizer::fit(x);
            let model = KnnModel::fit(p, s.transform(x), y.to_vec());
            (Some(s), FittedModel::Knn(model))
        }
        LearnerConfig::Dt(p) => (None, FittedModel::Tree(RegressionTree::fit_exact(x, y, p))),
        LearnerConfig::Gbt(p) => (None, FittedModel::Gbt(GbtModel::fit(x, y, p))),
        LearnerConfig::Dl(p) => {
            let s = Standardizer::fit(x);
            let model = MlpRegressor::fit(&s.transform(x), y, p, seed)?;
            (Some(s), FittedModel::Dl(model))
        }
    };
    Ok(TrainedModel {
        config: config.clone(),
        feature_names: (0..x.cols()).map(|j| format!("f{j}")).collect(),
        standardization,
        train_fingerprint: fingerprint(x, y),
        seed: if config.is_stochastic() { seed } else { 0 },
        fitted,
    })
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(Error::FeatureShape {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let scaled;
        let input = match &self.standardization {
            Some(s) => {
                scaled = s.transform_row(row);
                scaled.as_slice()
            }
            None => row,
        };
        let out = match &self.fitted {
            FittedModel::Knn(m) => m.predict_one(input),
            FittedModel::Tree(t) => t.predict_one(input),
            FittedModel::Gbt(m) => m.predict_one(input),
            FittedModel::Dl(m) => m.predict_one(input),
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFiniteData("prediction".into()))
        }
    }

    /// Predicts every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_with(x, Workers::SEQUENTIAL)
    }

    /// Like [`predict`](Self::predict), spreading rows over `workers`.
    pub fn predict_with(&self, x: &Matrix, workers: Workers) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() && x.rows() > 0 {
            return Err(Error::FeatureShape {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        let rows: Vec<usize> = (0..x.rows()).collect();
        exec::map(workers, &rows, |_, &i| self.predict_row(x.row(i)))
            .into_iter()
            .collect()
    }

    /// Writes a versioned JSON dump of the model.
    pub fn dump<W: Write>(&self, out: W) -> Result<()> {
        let doc = ModelDump {
            format: DUMP_FORMAT.into(),
            version: DUMP_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer_pretty(out, &doc).map_err(|e| Error::io("<model dump>", std::io::Error::other(e)))
    }

    pub fn load_dump<R: Read>(input: R) -> Result<Self> {
        let doc: ModelDump = serde_json::from_reader(input).map_err(|e| Error::Parse(format!("model dump: {e}")))?;
        if doc.format != DUMP_FORMAT || doc.version != DUMP_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model dump {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.model)
    }
}

pub const DUMP_FORMAT: &str = "scenmine-model";
pub const DUMP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDump {
    format: String,
    version: u32,
    model: TrainedModel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(xs: &[f64]) -> Matrix {
        Matrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn random_problem(seed: u64, n: usize, f: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * f).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = Matrix::from_vec(n, f, data).unwrap();
        let y = x
            .iter_rows()
            .map(|r| r[0].sin() * 2.0 + r.iter().sum::<f64>() * 0.3 + rng.gen_range(-0.1..0.1))
            .collect();
        (x, y)
    }

    fn mse(model: &TrainedModel, x: &Matrix, y: &[f64]) -> f64 {
        let p = model.predict(x).unwrap();
        p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn dt_constant_target() {
        let x = col(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let m = train_xy(&LearnerConfig::default_for(Algorithm::Dt), &x, &[7.5; 5], 0).unwrap();
        for v in m.predict(&col(&[-10.0, 2.5, 99.0])).unwrap() {
            assert_eq!(v, 7.5);
        }
    }

    #[test]
    fn gbt_without_trees_predicts_the_mean() {
        let cfg = LearnerConfig::Gbt(GbtParams {
            n_trees: 0,
            ..Default::default()
        });
        let y = [1.0, 2.0, 4.0, 8.0];
        let m = train_xy(&cfg, &col(&[0.0, 1.0, 2.0, 3.0]), &y, 0).unwrap();
        assert_eq!(m.predict(&col(&[10.0])).unwrap(), vec![3.75]);
    }

    #[test]
    fn gbt_single_stump_recovers_leaf_means() {
        // Split between 1 and 2 separates {0,0} from {10,10}; base 5, leaves -5 / +5.
        let cfg = LearnerConfig::Gbt(GbtParams {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            n_bins: 20,
        });
        let m = train_xy(&cfg, &col(&[0.0, 1.0, 2.0, 3.0]), &[0.0, 0.0, 10.0, 10.0], 0).unwrap();
        let p = m.predict(&col(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 10.0, 10.0]);
    }

    #[test]
    fn knn_memorizes_and_averages() {
        let cfg = LearnerConfig::Knn(KnnParams { k: 1 });
        let m = train_xy(&cfg, &col(&[1.0, 3.0]), &[10.0, 30.0], 0).unwrap();
        match &m.fitted {
            FittedModel::Knn(k) => assert_eq!(k.targets(), &[10.0, 30.0]),
            _ => unreachable!(),
        }
        assert_eq!(m.predict(&col(&[3.0, 1.0])).unwrap(), vec![30.0, 10.0]);

        let cfg = LearnerConfig::Knn(KnnParams { k: 2 });
        let m = train_xy(&cfg, &col(&[0.0, 2.0, 10.0]), &[0.0, 2.0, 10.0], 0).unwrap();
        assert_eq!(m.predict(&col(&[1.0])).unwrap(), vec![1.0]);
    }

    #[test]
    fn knn_with_all_neighbours_predicts_the_mean() {
        let (x, y) = random_problem(3, 25, 3);
        let cfg = LearnerConfig::Knn(KnnParams { k: 25 });
        let m = train_xy(&cfg, &x, &y, 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let (q, _) = random_problem(4, 10, 3);
        for p in m.predict(&q).unwrap() {
            assert!((p - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_is_scale_invariant() {
        let (x, y) = random_problem(5, 40, 4);
        let (q, _) = random_problem(6, 15, 4);
        let cfg = LearnerConfig::default_for(Algorithm::Knn);
        let base = train_xy(&cfg, &x, &y, 0).unwrap().predict(&q).unwrap();
        let scale = |m: &Matrix| {
            let mut s = m.clone();
            for i in 0..s.rows() {
                s.row_mut(i)[2] *= 37.5;
            }
            s
        };
        let scaled = train_xy(&cfg, &scale(&x), &y, 0).unwrap().predict(&scale(&q)).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dt_training_error_non_increasing_in_depth() {
        let (x, y) = random_problem(7, 120, 3);
        let mut prev = f64::INFINITY;
        for depth in 1..=8 {
            let cfg = LearnerConfig::Dt(DtParams {
                max_depth: depth,
                ..Default::default()
            });
            let e = mse(&train_xy(&cfg, &x, &y, 0).unwrap(), &x, &y);
            assert!(e <= prev + 1e-12, "depth {depth}: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn gbt_training_error_non_increasing_in_trees() {
        let (x, y) = random_problem(8, 150, 4);
        let mut prev = f64::INFINITY;
        for n_trees in [0, 1, 2, 5, 10, 20, 40] {
            let cfg = LearnerConfig::Gbt(GbtParams {
                n_trees,
                max_depth: 3,
                learning_rate: 0.1,
                n_bins: 10,
            });
            let e = mse(&train_xy(&cfg, &x, &y, 0).unwrap(), &x, &y);
            assert!(e <= prev + 1e-12, "{n_trees} trees: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn training_is_deterministic_and_seeded() {
        let (x, y) = random_problem(9, 60, 3);
        for alg in Algorithm::ALL {
            let cfg = LearnerConfig::default_for(alg);
            let a = train_xy(&cfg, &x, &y, 11).unwrap().predict(&x).unwrap();
            let b = train_xy(&cfg, &x, &y, 11).unwrap().predict(&x).unwrap();
            assert_eq!(a, b, "{alg}");
        }
        let cfg = LearnerConfig::default_for(Algorithm::Dl);
        let a = train_xy(&cfg, &x, &y, 1).unwrap().predict(&x).unwrap();
        let b = train_xy(&cfg, &x, &y, 2).unwrap().predict(&x).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let cfg = LearnerConfig::default_for(Algorithm::Knn);
        let m = train_xy(&cfg, &col(&[1.0, 2.0]), &[1.0, 2.0], 0).unwrap();
        let wide = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            m.predict(&wide),
            Err(Error::FeatureShape { expected: 1, got: 2 })
        ));
        assert!(matches!(
            train_xy(&cfg, &col(&[1.0, f64::NAN]), &[1.0, 2.0], 0),
            Err(Error::NonFiniteData(_))
        ));
        assert!(train_xy(&cfg, &col(&[1.0]), &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn parameter_overrides_and_validation() {
        let v = ParamValue::Int(3);
        let cfg = LearnerConfig::with_params(Algorithm::Knn, [("k", &v)]).unwrap();
        assert_eq!(cfg, LearnerConfig::Knn(KnnParams { k: 3 }));
        let zero = ParamValue::Int(0);
        assert!(LearnerConfig::with_params(Algorithm::Knn, [("k", &zero)]).is_err());
        assert!(LearnerConfig::with_params(Algorithm::Gbt, [("n_bins", &ParamValue::Int(1))]).is_err());
        assert!(LearnerConfig::with_params(Algorithm::Gbt, [("learning_rate", &ParamValue::Real(1.5))]).is_err());
        assert!(LearnerConfig::with_params(Algorithm::Dt, [("k", &v)]).is_err());
        let act = ParamValue::Text("Tanh".into());
        let layers = ParamValue::List(vec![4, 3]);
        let cfg =
            LearnerConfig::with_params(Algorithm::Dl, [("activation", &act), ("hidden_layers", &layers)]).unwrap();
        assert_eq!(
            cfg.params_string(),
            "activation=Tanh;epochs=5;hidden_layers=[4 3];learning_rate=0.01;batch_size=16"
        );
    }

    #[test]
    fn table_defaults() {
        assert_eq!(KnnParams::default().k, 5);
        let dt = DtParams::default();
        assert_eq!((dt.max_depth, dt.min_gain, dt.min_leaf_size), (4, 0.01, 2));
        let g = GbtParams::default();
        assert_eq!((g.n_trees, g.max_depth, g.learning_rate, g.n_bins), (50, 7, 0.01, 20));
        let d = DlParams::default();
        assert_eq!(
            (d.activation, d.epochs, d.hidden_layers.clone()),
            (Activation::Rectifier, 5, vec![50, 50])
        );
    }

    #[test]
    fn dump_round_trip() {
        let (x, y) = random_problem(10, 30, 2);
        for alg in Algorithm::ALL {
            let m = train_xy(&LearnerConfig::default_for(alg), &x, &y, 3).unwrap();
            let mut buf = Vec::new();
            m.dump(&mut buf).unwrap();
            let back = TrainedModel::load_dump(buf.as_slice()).unwrap();
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap(), "{alg}");
        }
    }

    #[test]
    fn parallel_prediction_matches_sequential() {
        let (x, y) = random_problem(12, 80, 3);
        let m = train_xy(&LearnerConfig::default_for(Algorithm::Knn), &x, &y, 0).unwrap();
        assert_eq!(m.predict(&x).unwrap(), m.predict_with(&x, Workers::ALL).unwrap());
    }
}
