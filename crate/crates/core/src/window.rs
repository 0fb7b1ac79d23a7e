//! Scenario assembly and the time-window transform.
//!
//! An assembled table joins the scenario's attributes on the dates where all of
//! them are present. Windowing then turns row `t` into one example whose
//! features are the previous `w` rows of every column (lag 1 block first) and
//! whose target is the target column at `t`. Lags count positions in the
//! aligned table, so a calendar gap just widens the distance between rows.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::dataset::{common_complete_dates, DataRepository, SourceDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scenario::{AttributeRef, ScenarioSpec};

/// Prediction horizon in rows. Only next-row prediction is supported.
pub const HORIZON: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<(AttributeRef, Vec<f64>)>,
    pub target_column: usize,
}

impl AssembledTable {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<(AttributeRef, Vec<f64>)>, target_column: usize) -> Result<Self> {
        if columns.is_empty() || target_column >= columns.len() {
            return Err(Error::Shape("assembled table needs a target column".into()));
        }
        if let Some((r, _)) = columns.iter().find(|(_, v)| v.len() != dates.len()) {
            return Err(Error::Shape(format!("column {r} length differs from the date index")));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape("dates must be strictly increasing".into()));
        }
        if columns.iter().any(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFiniteData("assembled table".into()));
        }
        Ok(AssembledTable {
            dates,
            columns,
            target_column,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// The first `n` rows.
    pub fn prefix(&self, n: usize) -> AssembledTable {
        AssembledTable {
            dates: self.dates[..n].to_vec(),
            columns: self.columns.iter().map(|(r, v)| (r.clone(), v[..n].to_vec())).collect(),
            target_column: self.target_column,
        }
    }
}

/// Joins the scenario's attributes on their common complete dates.
///
/// Column order is target, other main attributes, context, then collaborative
/// sources in slot order; the target is column 0. Only the attributes the
/// scenario uses decide which dates are complete.
pub fn assemble(repo: &DataRepository, spec: &ScenarioSpec) -> Result<AssembledTable> {
    let refs = spec.attributes();
    let mut per_source: BTreeMap<&str, (&SourceDataset, Vec<usize>)> = BTreeMap::new();
    let mut resolved = Vec::with_capacity(refs.len());
    for r in &refs {
        let idx = r.resolve(repo)?;
        let ds = repo.get(&r.source_id).expect("resolved");
        let entry = per_source
            .entry(r.source_id.as_str())
            .or_insert_with(|| (ds, Vec::new()));
        entry.1.push(idx);
        resolved.push((ds, idx));
    }
    // Main source first so overlap diagnostics lead with it.
    let mut selection: Vec<(&SourceDataset, Vec<usize>)> = Vec::with_capacity(per_source.len());
    if let Some(main) = per_source.remove(spec.main_source()) {
        selection.push(main);
    }
    selection.extend(per_source.into_values());
    let dates = common_complete_dates(&selection)?;

    let columns = refs
        .iter()
        .zip(&resolved)
        .map(|(r, (ds, idx))| {
            let values = dates
                .iter()
                .map(|d| ds.value(*d, *idx).expect("date is complete"))
                .collect();
            ((*r).clone(), values)
        })
        .collect();
    AssembledTable::new(dates, columns, 0)
}

/// Supervised examples produced by [`window`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedTable {
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub example_dates: Vec<NaiveDate>,
    /// Row of the assembled table each example predicts.
    pub example_positions: Vec<usize>,
    /// Lag of each feature, in rows before the example's position.
    pub feature_lags: Vec<usize>,
    /// Assembled-table column each feature was read from.
    pub feature_columns: Vec<usize>,
    pub window: usize,
    pub horizon: usize,
}

impl WindowedTable {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Examples `start..end`, keeping the feature layout.
    pub fn slice(&self, start: usize, end: usize) -> WindowedTable {
        WindowedTable {
            feature_names: self.feature_names.clone(),
            x: self.x.slice_rows(start, end),
            y: self.y[start..end].to_vec(),
            example_dates: self.example_dates[start..end].to_vec(),
            example_positions: self.example_positions[start..end].to_vec(),
            feature_lags: self.feature_lags.clone(),
            feature_columns: self.feature_columns.clone(),
            window: self.window,
            horizon: self.horizon,
        }
    }
}

/// Builds one example per row `t` in `w..n`; features are lags 1..=w of every column.
pub fn window(table: &AssembledTable, w: usize) -> Result<WindowedTable> {
    if w == 0 {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    let n = table.len();
    if n <= w {
        return Err(Error::SeriesTooShort { needed: w + 1, have: n });
    }
    let n_cols = table.columns.len();
    let mut feature_names = Vec::with_capacity(w * n_cols);
    let mut feature_lags = Vec::with_capacity(w * n_cols);
    let mut feature_columns = Vec::with_capacity(w * n_cols);
    for lag in 1..=w {
        for (c, (r, _)) in table.columns.iter().enumerate() {
            feature_names.push(format!("{r}.lag{lag}"));
            feature_lags.push(lag);
            feature_columns.push(c);
        }
    }

    let m = n - w;
    let mut data = Vec::with_capacity(m * w * n_cols);
    let target = &table.columns[table.target_column].1;
    let mut y = Vec::with_capacity(m);
    for t in w..n {
        for lag in 1..=w {
            data.extend(table.columns.iter().map(|(_, v)| v[t - lag]));
        }
        y.push(target[t]);
    }
    Ok(WindowedTable {
        feature_names,
        x: Matrix::from_vec(m, w * n_cols, data)?,
        y,
        example_dates: table.dates[w..].to_vec(),
        example_positions: (w..n).collect(),
        feature_lags,
        feature_columns,
        window: w,
        horizon: HORIZON,
    })
}

/// Train/test split by date order: the first `floor(fraction × m)` examples train.
pub fn chronological_split(wt: &WindowedTable, train_fraction: f64) -> Result<(WindowedTable, WindowedTable)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let m = wt.len();
    if m < 2 {
        return Err(Error::Split(format!("need at least 2 examples, have {m}")));
    }
    let n_train = (train_fraction * m as f64).floor() as usize;
    if n_train == 0 || n_train >= m {
        return Err(Error::Split(format!(
            "fraction {train_fraction} of {m} examples leaves an empty side"
        )));
    }
    Ok((wt.slice(0, n_train), wt.slice(n_train, m)))
}
