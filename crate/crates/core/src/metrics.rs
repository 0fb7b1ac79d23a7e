//! Error measures (AE, RE, RMSE), Spearman's rank correlation, and Pearson
//! correlation matrices between sources.
//!
//! Every error measure also reports the population standard deviation and
//! variance of its per-example terms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DataRepository;
use crate::error::{DateSpan, Error, Result};
use crate::scenario::AttributeRef;

/// Default cut-off below which an actual value is excluded from RE.
pub const DEFAULT_RE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "AE")]
    Ae,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "RMSE")]
    Rmse,
    #[serde(rename = "SPEARMAN")]
    Spearman,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Ae, Measure::Re, Measure::Rmse, Measure::Spearman];

    /// Whether smaller values are better.
    pub fn lower_is_better(self) -> bool {
        !matches!(self, Measure::Spearman)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Ae => "AE",
            Measure::Re => "RE",
            Measure::Rmse => "RMSE",
            Measure::Spearman => "SPEARMAN",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AE" => Ok(Measure::Ae),
            "RE" => Ok(Measure::Re),
            "RMSE" => Ok(Measure::Rmse),
            "SPEARMAN" | "RHO" | "SPEARMAN_RHO" => Ok(Measure::Spearman),
            _ => Err(Error::Measure(s.to_string())),
        }
    }
}

/// Mean of a measure's per-example terms with their spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStat {
    pub value: f64,
    pub stddev: f64,
    pub variance: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population mean, variance and standard deviation of `terms`.
fn population(terms: &[f64]) -> (f64, f64, f64) {
    let m = mean(terms);
    let variance = terms.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / terms.len() as f64;
    (m, variance.sqrt(), variance)
}

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} actual values",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty prediction vector".into()));
    }
    if pred.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData("metric input".into()));
    }
    Ok(())
}

/// Mean absolute deviation `|p - d|`.
pub fn absolute_error(pred: &[f64], actual: &[f64]) -> Result<ErrorStat> {
    check_pair(pred, actual)?;
    let terms: Vec<f64> = pred.iter().zip(actual).map(|(p, d)| (p - d).abs()).collect();
    let (value, stddev, variance) = population(&terms);
    Ok(ErrorStat {
        value,
        stddev,
        variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrorStat {
    pub stat: ErrorStat,
    pub n_excluded: usize,
}

/// Mean of `|p - d| / |d|` over examples with `|d| >= eps`.
pub fn relative_error(pred: &[f64], actual: &[f64], eps: f64) -> Result<RelativeErrorStat> {
    check_pair(pred, actual)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("RE eps must be positive, got {eps}")));
    }
    let terms: Vec<f64> = pred
        .iter()
        .zip(actual)
        .filter(|(_, d)| d.abs() >= eps)
        .map(|(p, d)| (p - d).abs() / d.abs())
        .collect();
    if terms.is_empty() {
        return Err(Error::AllExcluded(pred.len()));
    }
    let (value, stddev, variance) = population(&terms);
    Ok(RelativeErrorStat {
        stat: ErrorStat {
            value,
            stddev,
            variance,
        },
        n_excluded: pred.len() - terms.len(),
    })
}

/// Root of the mean squared error; spread is over the squared-error terms.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<ErrorStat> {
    check_pair(pred, actual)?;
    let terms: Vec<f64> = pred.iter().zip(actual).map(|(p, d)| (p - d) * (p - d)).collect();
    let (mse, stddev, variance) = population(&terms);
    Ok(ErrorStat {
        value: mse.sqrt(),
        stddev,
        variance,
    })
}

/// 1-based ranks with ties sharing the average of the positions they span.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson's correlation coefficient, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} points", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData("correlation input".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of fractional ranks.
pub fn spearman_rho(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::Shape(format!("{} vs {} values", pred.len(), actual.len())));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} points", pred.len())));
    }
    if pred.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData("correlation input".into()));
    }
    pearson(&fractional_ranks(pred), &fractional_ranks(actual))
        .map_err(|_| Error::UndefinedCorrelation("zero rank variance".into()))
}

/// All measures for one prediction vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ae: ErrorStat,
    pub re: ErrorStat,
    pub rmse: ErrorStat,
    /// `None` when either side has constant ranks.
    pub spearman_rho: Option<f64>,
    pub n_used: BTreeMap<Measure, usize>,
    pub n_excluded_re: usize,
}

impl MetricReport {
    pub fn compute(pred: &[f64], actual: &[f64], eps_re: f64) -> Result<Self> {
        let ae = absolute_error(pred, actual)?;
        let re = relative_error(pred, actual, eps_re)?;
        let rm = rmse(pred, actual)?;
        let spearman_rho = match spearman_rho(pred, actual) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        let n = pred.len();
        let mut n_used = BTreeMap::new();
        n_used.insert(Measure::Ae, n);
        n_used.insert(Measure::Re, n - re.n_excluded);
        n_used.insert(Measure::Rmse, n);
        n_used.insert(Measure::Spearman, if spearman_rho.is_some() { n } else { 0 });
        Ok(MetricReport {
            ae,
            re: re.stat,
            rmse: rm,
            spearman_rho,
            n_used,
            n_excluded_re: re.n_excluded,
        })
    }

    pub fn stat(&self, measure: Measure) -> Option<&ErrorStat> {
        match measure {
            Measure::Ae => Some(&self.ae),
            Measure::Re => Some(&self.re),
            Measure::Rmse => Some(&self.rmse),
            Measure::Spearman => None,
        }
    }

    /// Headline value of a measure; `None` only for an undefined Spearman ρ.
    pub fn value(&self, measure: Measure) -> Option<f64> {
        match measure {
            Measure::Spearman => self.spearman_rho,
            m => self.stat(m).map(|s| s.value),
        }
    }

    /// Value to minimise when selecting by `measure` (negated ρ; undefined ρ is +∞).
    pub fn objective(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Spearman => self.spearman_rho.map_or(f64::INFINITY, |r| -r),
            m => self.value(m).expect("error measures are always defined"),
        }
    }
}

/// Symmetric matrix of Pearson coefficients between sources for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub source_ids: Vec<String>,
    pub entries: Vec<Vec<f64>>,
    pub n_common: Vec<Vec<usize>>,
}

/// Pairwise Pearson correlations of `attribute`, each pair aligned on the
/// dates where both sources have a value.
pub fn pearson_matrix(repo: &DataRepository, attribute: &str, source_ids: &[String]) -> Result<CorrelationMatrix> {
    let mut series = Vec::with_capacity(source_ids.len());
    for id in source_ids {
        let r = AttributeRef::new(id.clone(), attribute);
        let idx = r.resolve(repo)?;
        let ds = repo.get(id).expect("resolved");
        let present: BTreeMap<_, f64> = ds
            .rows()
            .iter()
            .filter_map(|row| row.values[idx].map(|v| (row.date, v)))
            .collect();
        series.push(present);
    }
    let n = source_ids.len();
    let mut entries = vec![vec![0.0; n]; n];
    let mut n_common = vec![vec![0usize; n]; n];
    for i in 0..n {
        entries[i][i] = 1.0;
        n_common[i][i] = series[i].len();
        for j in i + 1..n {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (date, va) in &series[i] {
                if let Some(vb) = series[j].get(date) {
                    a.push(*va);
                    b.push(*vb);
                }
            }
            if a.len() < 2 {
                let span = |k: usize| DateSpan {
                    source_id: source_ids[k].clone(),
                    first: series[k].keys().next().copied(),
                    last: series[k].keys().next_back().copied(),
                };
                return Err(Error::NoOverlap {
                    spans: vec![span(i), span(j)],
                });
            }
            let r = pearson(&a, &b)
                .map_err(|e| Error::UndefinedCorrelation(format!("{} vs {}: {e}", source_ids[i], source_ids[j])))?;
            entries[i][j] = r;
            entries[j][i] = r;
            n_common[i][j] = a.len();
            n_common[j][i] = a.len();
        }
    }
    Ok(CorrelationMatrix {
        source_ids: source_ids.to_vec(),
        entries,
        n_common,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn absolute_error_examples() {
        let s = absolute_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((s.value, s.stddev, s.variance), (0.0, 0.0, 0.0));
        let s = absolute_error(&[9.0], &[10.0]).unwrap();
        assert_eq!((s.value, s.stddev, s.variance), (1.0, 0.0, 0.0));
        // terms {1, 3}: mean 2, population stddev 1
        let s = absolute_error(&[1.0, 3.0], &[2.0, 6.0]).unwrap();
        assert_eq!((s.value, s.stddev, s.variance), (2.0, 1.0, 1.0));
        assert!(matches!(absolute_error(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(absolute_error(&[], &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn relative_error_examples() {
        let r = relative_error(&[9.0], &[10.0], DEFAULT_RE_EPS).unwrap();
        assert!(close(r.stat.value, 0.1));
        let r = relative_error(&[9.0, 22.0], &[10.0, 20.0], DEFAULT_RE_EPS).unwrap();
        assert!(close(r.stat.value, 0.1));
        assert!(r.stat.stddev < 1e-15);
        let r = relative_error(&[5.0, 9.0], &[0.0, 10.0], 1e-9).unwrap();
        assert!(close(r.stat.value, 0.1));
        assert_eq!(r.n_excluded, 1);
        assert!(matches!(
            relative_error(&[1.0], &[0.0], 1e-9),
            Err(Error::AllExcluded(1))
        ));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        let s = rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert!(close(s.value, 2f64.sqrt()));
        // squared terms {0, 4}: mean 2, stddev 2
        assert!(close(s.stddev, 2.0) && close(s.variance, 4.0));
        assert_eq!(rmse(&[3.0], &[0.0]).unwrap().value, 3.0);
    }

    #[test]
    fn spearman_examples() {
        assert!(close(spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0));
        assert!(close(
            spearman_rho(&[3.0, 2.0, 1.0], &[10.0, 20.0, 30.0]).unwrap(),
            -1.0
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_with_ties_matches_rank_table() {
        // pred ranks by hand: 1 -> 1, 2 and 2 -> 2.5, 3 -> 4; actual ranks 1..4
        let pr = [1.0, 2.5, 2.5, 4.0];
        assert_eq!(fractional_ranks(&[1.0, 2.0, 2.0, 3.0]), pr);
        // mean 2.5 on both sides; deviations pr: -1.5,0,0,1.5 ; ar: -1.5,-.5,.5,1.5
        let sxy: f64 = 1.5 * 1.5 + 0.0 + 0.0 + 1.5 * 1.5;
        let sxx: f64 = 2.0 * 1.5 * 1.5;
        let syy = 2.0 * 1.5 * 1.5 + 2.0 * 0.25;
        let expected = sxy / (sxx * syy).sqrt();
        let got = spearman_rho(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(got, expected), "{got} vs {expected}");
        assert!(close(expected, 0.9486832980505138));
    }

    #[test]
    fn report_handles_constant_predictions() {
        let r = MetricReport::compute(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], DEFAULT_RE_EPS).unwrap();
        assert_eq!(r.spearman_rho, None);
        assert_eq!(r.n_used[&Measure::Spearman], 0);
        assert_eq!(r.objective(Measure::Spearman), f64::INFINITY);
        assert!(close(r.ae.value, 2.0 / 3.0));
    }

    #[test]
    fn measure_names() {
        for m in Measure::ALL {
            assert_eq!(m.to_string().parse::<Measure>().unwrap(), m);
        }
        assert!(matches!("MAPE".parse::<Measure>(), Err(Error::Measure(_))));
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1e3f64..1e3, n),
                proptest::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_ae((p, d) in vec_pair()) {
            let ae = absolute_error(&p, &d).unwrap().value;
            let rm = rmse(&p, &d).unwrap().value;
            prop_assert!(rm >= ae * (1.0 - 1e-12));
        }

        #[test]
        fn translation_invariance((p, d) in vec_pair(), c in -100.0f64..100.0) {
            let ps: Vec<f64> = p.iter().map(|x| x + c).collect();
            let ds: Vec<f64> = d.iter().map(|x| x + c).collect();
            let tol = 1e-9;
            prop_assert!((absolute_error(&p, &d).unwrap().value - absolute_error(&ps, &ds).unwrap().value).abs() < tol);
            prop_assert!((rmse(&p, &d).unwrap().value - rmse(&ps, &ds).unwrap().value).abs() < tol);
        }

        #[test]
        fn spearman_invariant_under_increasing_maps((p, d) in vec_pair(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            prop_assume!(p.len() >= 2);
            if let Ok(r) = spearman_rho(&p, &d) {
                prop_assert!((-1.0..=1.0).contains(&r));
                let pe: Vec<f64> = p.iter().map(|x| (x / 200.0).exp()).collect();
                let da: Vec<f64> = d.iter().map(|x| a * x + b).collect();
                prop_assert!((spearman_rho(&pe, &d).unwrap() - r).abs() <= 1e-12);
                prop_assert!((spearman_rho(&p, &da).unwrap() - r).abs() <= 1e-12);
            }
        }

        #[test]
        fn variance_is_stddev_squared((p, d) in vec_pair()) {
            let r = MetricReport::compute(&p, &d, DEFAULT_RE_EPS);
            if let Ok(r) = r {
                for s in [r.ae, r.re, r.rmse] {
                    prop_assert!((s.variance - s.stddev * s.stddev).abs() <= 1e-12 * s.variance.max(1.0));
                }
            }
        }
    }

    #[test]
    fn pearson_matrix_affine_and_negated() {
        use crate::dataset::{Row, SourceDataset};
        let d0 = chrono::NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
        let make = |id: &str, f: &dyn Fn(f64) -> f64| {
            SourceDataset::new(
                id,
                vec!["h".into()],
                (0..20u64)
                    .map(|i| Row {
                        date: d0 + chrono::Days::new(i),
                        values: vec![Some(f(((i * 7) % 11) as f64))],
                    })
                    .collect(),
            )
            .unwrap()
        };
        let repo =
            DataRepository::from_datasets([make("x", &|v| v), make("y", &|v| 2.0 * v + 3.0), make("z", &|v| -v)])
                .unwrap();
        let ids: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let m = pearson_matrix(&repo, "h", &ids).unwrap();
        assert_eq!(m.entries[0][0], 1.0);
        assert!(close(m.entries[0][1], 1.0));
        assert!(close(m.entries[0][2], -1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.entries[i][j], m.entries[j][i]);
            }
        }
        assert_eq!(m.n_common[0][1], 20);
        assert!(pearson_matrix(&repo, "nope", &ids).is_err());
    }
}
