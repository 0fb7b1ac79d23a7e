//! Per-location daily datasets and the in-memory repository that holds them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{DateSpan, Error, Result};
use crate::exec::{self, Workers};

/// Marker for an ignored or missing value, shared with scenario files.
pub const MISSING_MARKER: &str = "?";

/// File extensions picked up when loading a repository directory.
pub const DATASET_EXTENSIONS: [&str; 3] = ["csv", "tsv", "txt"];

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub date: NaiveDate,
    /// Aligned with [`SourceDataset::attribute_names`]; `None` is a missing value.
    pub values: Vec<Option<f64>>,
}

/// One location's dated attribute table.
///
/// Rows are sorted by date with no duplicates, every row has one slot per
/// attribute, and there are at least two rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDataset {
    source_id: String,
    attribute_names: Vec<String>,
    rows: Vec<Row>,
}

impl SourceDataset {
    /// Builds a dataset from unsorted rows, enforcing the dataset invariants.
    pub fn new(source_id: impl Into<String>, attribute_names: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        let source_id = source_id.into();
        let path = PathBuf::from(format!("<{source_id}>"));
        let mut seen = HashMap::new();
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != attribute_names.len() {
                return Err(Error::Format {
                    path,
                    message: format!(
                        "row {} has {} values, expected {}",
                        i + 1,
                        row.values.len(),
                        attribute_names.len()
                    ),
                });
            }
            if seen.insert(row.date, i).is_some() {
                return Err(Error::DuplicateDate {
                    path,
                    row: i + 1,
                    date: row.date,
                });
            }
        }
        Self::from_checked_rows(source_id, attribute_names, rows, &path)
    }

    fn from_checked_rows(
        source_id: String,
        attribute_names: Vec<String>,
        mut rows: Vec<Row>,
        path: &Path,
    ) -> Result<Self> {
        if source_id.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "empty source id".into(),
            });
        }
        let unique: BTreeSet<&String> = attribute_names.iter().collect();
        if unique.len() != attribute_names.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "duplicate attribute name in header".into(),
            });
        }
        if rows.len() < 2 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("need at least 2 rows, found {}", rows.len()),
            });
        }
        rows.sort_by_key(|r| r.date);
        Ok(SourceDataset {
            source_id,
            attribute_names,
            rows,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|a| a == name)
    }

    pub fn first_date(&self) -> NaiveDate {
        self.rows[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.rows[self.rows.len() - 1].date
    }

    /// Value of `attribute` on `date`, if the row exists and the cell is present.
    pub fn value(&self, date: NaiveDate, attribute: usize) -> Option<f64> {
        let i = self.rows.binary_search_by_key(&date, |r| r.date).ok()?;
        self.rows[i].values[attribute]
    }

    /// Dates whose row is present in every listed attribute.
    pub fn complete_dates(&self, attributes: &[usize]) -> Vec<NaiveDate> {
        self.rows
            .iter()
            .filter(|r| attributes.iter().all(|&a| r.values[a].is_some()))
            .map(|r| r.date)
            .collect()
    }

    /// Writes the dataset in the same format [`load_dataset`] reads.
    pub fn write<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let to_io = |e: csv::Error| Error::io(format!("<{}>", self.source_id), std::io::Error::other(e));
        let mut header = vec!["date".to_string()];
        header.extend(self.attribute_names.iter().cloned());
        wtr.write_record(&header).map_err(to_io)?;
        for row in &self.rows {
            let mut record = vec![row.date.format(DATE_FORMAT).to_string()];
            record.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wtr.write_record(&record).map_err(to_io)?;
        }
        wtr.flush().map_err(|e| Error::io(format!("<{}>", self.source_id), e))
    }

    pub fn write_file(&self, path: &Path, delimiter: u8) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file), delimiter)
    }
}

fn parse_cell(raw: &str) -> std::result::Result<Option<f64>, ()> {
    let cell = raw.trim();
    if cell.is_empty() || cell == MISSING_MARKER {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(()),
    }
}

/// Parses a delimited dataset from any reader. `path` is only used in diagnostics.
pub fn read_dataset<R: Read>(reader: R, path: &Path, source_id: &str, delimiter: u8) -> Result<SourceDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };

    let headers = rdr.headers().map_err(|e| format_err(e.to_string()))?.clone();
    let mut columns = headers.iter().map(|h| h.trim().trim_start_matches('\u{feff}'));
    match columns.next() {
        Some(first) if first.eq_ignore_ascii_case("date") => {}
        Some(first) => {
            return Err(format_err(format!(
                "first header column must be `date`, found {first:?}"
            )))
        }
        None => return Err(format_err("missing header row".into())),
    }
    let attribute_names: Vec<String> = columns.map(str::to_string).collect();
    if attribute_names.is_empty() {
        return Err(format_err("no attribute columns".into()));
    }
    if let Some(bad) = attribute_names.iter().find(|a| a.is_empty()) {
        return Err(format_err(format!("empty attribute name {bad:?}")));
    }

    let mut rows = Vec::new();
    let mut seen: HashMap<NaiveDate, usize> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| format_err(format!("row {row_no}: {e}")))?;
        let raw_date = record.get(0).unwrap_or_default().trim();
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| Error::DateFormat {
            path: path.to_path_buf(),
            row: row_no,
            value: raw_date.to_string(),
        })?;
        if seen.insert(date, row_no).is_some() {
            return Err(Error::DuplicateDate {
                path: path.to_path_buf(),
                row: row_no,
                date,
            });
        }
        let mut values = Vec::with_capacity(attribute_names.len());
        for (j, raw) in record.iter().skip(1).enumerate() {
            let value = parse_cell(raw).map_err(|()| Error::CellParse {
                path: path.to_path_buf(),
                row: row_no,
                column: attribute_names[j].clone(),
                value: raw.to_string(),
            })?;
            values.push(value);
        }
        rows.push(Row { date, values });
    }
    SourceDataset::from_checked_rows(source_id.to_string(), attribute_names, rows, path)
}

/// Loads one dataset file; rows come back sorted by date.
pub fn load_dataset(path: &Path, source_id: &str, delimiter: u8) -> Result<SourceDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), path, source_id, delimiter)
}

fn span_of(dataset: &SourceDataset, dates: &[NaiveDate]) -> DateSpan {
    DateSpan {
        source_id: dataset.source_id().to_string(),
        first: dates.first().copied(),
        last: dates.last().copied(),
    }
}

/// Sorted dates on which every dataset has a complete row in the selected attributes.
pub fn common_complete_dates(selection: &[(&SourceDataset, Vec<usize>)]) -> Result<Vec<NaiveDate>> {
    if selection.is_empty() {
        return Err(Error::Shape("no datasets selected".into()));
    }
    let per_dataset: Vec<Vec<NaiveDate>> = selection.iter().map(|(d, attrs)| d.complete_dates(attrs)).collect();
    let mut common: Vec<NaiveDate> = per_dataset[0].clone();
    for dates in &per_dataset[1..] {
        let keep: BTreeSet<NaiveDate> = dates.iter().copied().collect();
        common.retain(|d| keep.contains(d));
    }
    if common.is_empty() {
        return Err(Error::NoOverlap {
            spans: selection
                .iter()
                .zip(&per_dataset)
                .map(|((d, _), dates)| span_of(d, dates))
                .collect(),
        });
    }
    Ok(common)
}

/// Sorted intersection of the datasets' dates, keeping only dates where every
/// dataset has a value in every attribute.
pub fn common_date_index(datasets: &[&SourceDataset]) -> Result<Vec<NaiveDate>> {
    let selection: Vec<(&SourceDataset, Vec<usize>)> = datasets
        .iter()
        .map(|d| (*d, (0..d.attribute_names().len()).collect()))
        .collect();
    common_complete_dates(&selection)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub path: PathBuf,
    pub rows: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub attributes: Vec<String>,
}

/// Loaded datasets keyed by source id, with the provenance of each load.
#[derive(Debug, Clone, Default)]
pub struct DataRepository {
    datasets: BTreeMap<String, SourceDataset>,
    manifest: Vec<ManifestEntry>,
}

impl DataRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dataset: SourceDataset, path: impl Into<PathBuf>) -> Result<()> {
        let id = dataset.source_id().to_string();
        let path = path.into();
        if self.datasets.contains_key(&id) {
            return Err(Error::Format {
                path,
                message: format!("duplicate source id {id:?}"),
            });
        }
        self.manifest.push(ManifestEntry {
            source_id: id.clone(),
            path,
            rows: dataset.len(),
            first_date: dataset.first_date(),
            last_date: dataset.last_date(),
            attributes: dataset.attribute_names().to_vec(),
        });
        self.manifest.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        self.datasets.insert(id, dataset);
        Ok(())
    }

    pub fn from_datasets(datasets: impl IntoIterator<Item = SourceDataset>) -> Result<Self> {
        let mut repo = Self::new();
        for d in datasets {
            let path = PathBuf::from(format!("<memory:{}>", d.source_id()));
            repo.insert(d, path)?;
        }
        Ok(repo)
    }

    /// Loads every `*.csv`, `*.tsv` or `*.txt` file in `dir`; the file stem is the source id.
    ///
    /// All files are attempted; failures are reported together as [`Error::Ingest`].
    pub fn load_dir(dir: &Path, delimiter: u8, workers: Workers) -> Result<Self> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let ext_ok = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| DATASET_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if path.is_file() && ext_ok {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::Format {
                path: dir.to_path_buf(),
                message: "no datasets found".into(),
            });
        }

        let loaded = exec::map(workers, &files, |_, path| {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            load_dataset(path, &id, delimiter)
        });
        let mut repo = Self::new();
        let mut failures = Vec::new();
        for (path, result) in files.iter().zip(loaded) {
            match result.and_then(|d| repo.insert(d, path.clone())) {
                Ok(()) => {}
                Err(e) => failures.push(e),
            }
        }
        if failures.is_empty() {
            Ok(repo)
        } else {
            Err(Error::Ingest(failures))
        }
    }

    pub fn get(&self, source_id: &str) -> Option<&SourceDataset> {
        self.datasets.get(source_id)
    }

    pub fn source_ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    pub fn datasets(&self) -> impl Iterator<Item = &SourceDataset> {
        self.datasets.values()
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Writes the manifest as `source_id,path,rows,first_date,last_date,attributes`.
    pub fn write_manifest<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "source_id,path,rows,first_date,last_date,attributes")?;
        for m in &self.manifest {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m.source_id,
                m.path.display(),
                m.rows,
                m.first_date,
                m.last_date,
                m.attributes.join(";")
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    fn parse(text: &str) -> Result<SourceDataset> {
        read_dataset(text.as_bytes(), Path::new("mem.csv"), "loc", b',')
    }

    fn ds(id: &str, rows: &[(&str, &[Option<f64>])]) -> SourceDataset {
        let n = rows[0].1.len();
        SourceDataset::new(
            id,
            (0..n).map(|i| format!("a{i}")).collect(),
            rows.iter()
                .map(|(date, v)| Row {
                    date: d(date),
                    values: v.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn loads_three_rows_two_attributes() {
        let ds = parse("date,temp,hum\n2016-01-01,1.5,30\n2016-01-02,2,31\n2016-01-03,-1,29.5\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.attribute_names(), &["temp".to_string(), "hum".to_string()]);
        assert_eq!(ds.rows()[2].values, vec![Some(-1.0), Some(29.5)]);
    }

    #[test]
    fn sorts_rows_by_date() {
        let ds = parse("date,t\n2016-01-03,3\n2016-01-01,1\n2016-01-02,2\n").unwrap();
        let dates: Vec<_> = ds.rows().iter().map(|r| r.date).collect();
        assert_eq!(dates, vec![d("2016-01-01"), d("2016-01-02"), d("2016-01-03")]);
        assert_eq!(ds.rows()[0].values, vec![Some(1.0)]);
    }

    #[test]
    fn duplicate_date_reports_row() {
        let err = parse("date,t\n2016-01-01,1\n2016-01-02,2\n2016-01-02,3\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateDate { row: 3, .. }), "{err}");
    }

    #[test]
    fn bad_date_and_bad_cell() {
        let err = parse("date,t\n2016-01-01,1\n01/02/2016,2\n").unwrap_err();
        assert!(matches!(err, Error::DateFormat { row: 2, .. }), "{err}");
        let err = parse("date,t\n2016-01-01,1\n2016-01-02,abc\n").unwrap_err();
        assert!(
            matches!(err, Error::CellParse { row: 2, ref column, .. } if column == "t"),
            "{err}"
        );
        let err = parse("date,t\n2016-01-01,1\n2016-01-02,NaN\n").unwrap_err();
        assert!(matches!(err, Error::CellParse { .. }));
    }

    #[test]
    fn empty_and_question_mark_are_missing() {
        let ds = parse("date,a,b\n2016-01-01,,?\n2016-01-02, 4 ,5\n").unwrap();
        assert_eq!(ds.rows()[0].values, vec![None, None]);
        assert_eq!(ds.rows()[1].values, vec![Some(4.0), Some(5.0)]);
    }

    #[test]
    fn rejects_too_few_rows_and_bad_header() {
        assert!(matches!(parse("date,a\n2016-01-01,1\n"), Err(Error::Format { .. })));
        assert!(matches!(
            parse("day,a\n2016-01-01,1\n2016-01-02,1\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse("date\n2016-01-01\n2016-01-02\n"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let ds = read_dataset(
            "date;a\n2016-01-01;1\n2016-01-02;2\n".as_bytes(),
            Path::new("x"),
            "x",
            b';',
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn common_index_identity() {
        let a = ds(
            "a",
            &[
                ("2016-01-01", &[Some(1.0)]),
                ("2016-01-02", &[Some(1.0)]),
                ("2016-01-03", &[Some(1.0)]),
                ("2016-01-04", &[Some(1.0)]),
                ("2016-01-05", &[Some(1.0)]),
            ],
        );
        assert_eq!(common_date_index(&[&a]).unwrap().len(), 5);
    }

    #[test]
    fn common_index_intersection_and_missingness() {
        let a = ds(
            "a",
            &[
                ("2016-01-01", &[Some(1.0)]),
                ("2016-01-02", &[Some(2.0)]),
                ("2016-01-03", &[Some(3.0)]),
            ],
        );
        let b = ds(
            "b",
            &[
                ("2016-01-02", &[Some(1.0)]),
                ("2016-01-03", &[Some(1.0)]),
                ("2016-01-04", &[Some(1.0)]),
            ],
        );
        assert_eq!(
            common_date_index(&[&a, &b]).unwrap(),
            vec![d("2016-01-02"), d("2016-01-03")]
        );

        let c = ds(
            "c",
            &[
                ("2016-01-02", &[Some(1.0)]),
                ("2016-01-03", &[None]),
                ("2016-01-04", &[Some(1.0)]),
            ],
        );
        assert_eq!(common_date_index(&[&a, &c]).unwrap(), vec![d("2016-01-02")]);
    }

    #[test]
    fn no_overlap_lists_spans() {
        let a = ds("a", &[("2016-01-01", &[Some(1.0)]), ("2016-01-02", &[Some(2.0)])]);
        let b = ds("b", &[("2017-01-01", &[Some(1.0)]), ("2017-01-02", &[Some(2.0)])]);
        match common_date_index(&[&a, &b]).unwrap_err() {
            Error::NoOverlap { spans } => {
                assert_eq!(spans.len(), 2);
                assert_eq!(spans[1].first, Some(d("2017-01-01")));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn write_then_reload_is_identity() {
        let original = parse("date,a,b\n2016-01-02,0.1,\n2016-01-01,1e-7,-3.25\n2016-01-05,?,2\n").unwrap();
        let mut buf = Vec::new();
        original.write(&mut buf, b',').unwrap();
        let back = read_dataset(buf.as_slice(), Path::new("mem"), "loc", b',').unwrap();
        assert_eq!(original, back);
    }

    #[test]
    fn repository_rejects_duplicate_ids() {
        let a = ds("a", &[("2016-01-01", &[Some(1.0)]), ("2016-01-02", &[Some(2.0)])]);
        let mut repo = DataRepository::from_datasets([a.clone()]).unwrap();
        assert!(repo.insert(a, "again").is_err());
        assert_eq!(repo.manifest()[0].rows, 2);
    }
}
