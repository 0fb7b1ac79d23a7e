//! Scenario matrices: which main, context and collaborative attributes take
//! part in each test scenario, and which main attribute is predicted.
//!
//! The on-disk matrix has a `scenario_id` column followed by one column per
//! `source.attribute`. Each cell holds the role that attribute plays in that
//! row's scenario:
//!
//! | cell        | meaning                                   |
//! |-------------|-------------------------------------------|
//! | `target`    | predicted attribute (exactly one per row) |
//! | `main`      | extra attribute of the main source        |
//! | `context`   | context attribute                         |
//! | `cs1`..`csP`| attribute of collaborative source slot P  |
//! | `?` / empty | ignored                                   |
//!
//! Leading `# key = value` lines carry suite defaults (`window`, `split`,
//! `algorithms`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataRepository, MISSING_MARKER};
use crate::error::{Error, Result};
use crate::learners::Algorithm;

pub const DEFAULT_WINDOW: usize = 7;
pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeRef {
    pub source_id: String,
    pub attribute: String,
}

impl AttributeRef {
    pub fn new(source_id: impl Into<String>, attribute: impl Into<String>) -> Self {
        AttributeRef {
            source_id: source_id.into(),
            attribute: attribute.into(),
        }
    }

    /// Checks that the reference names an existing source and attribute.
    pub fn resolve(&self, repo: &DataRepository) -> Result<usize> {
        let ds = repo.get(&self.source_id).ok_or_else(|| Error::UnresolvedRef {
            reference: self.to_string(),
            reason: "unknown source".into(),
        })?;
        ds.attribute_index(&self.attribute).ok_or_else(|| Error::UnresolvedRef {
            reference: self.to_string(),
            reason: format!("source has no attribute {:?}", self.attribute),
        })
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.source_id, self.attribute)
    }
}

impl FromStr for AttributeRef {
    type Err = Error;

    /// Splits at the first `.`; source ids therefore cannot contain dots.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().split_once('.') {
            Some((src, attr)) if !src.is_empty() && !attr.is_empty() => Ok(AttributeRef::new(src, attr)),
            _ => Err(Error::Parse(format!(
                "column {s:?} is not of the form source.attribute"
            ))),
        }
    }
}

/// Scenario kind, derived from which attribute groups are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioLabel {
    Standalone,
    Cadm,
    CadmCdm(usize),
    Cdm(usize),
}

impl ScenarioLabel {
    pub fn derive(has_context: bool, collaborative_sources: usize) -> Self {
        match (has_context, collaborative_sources) {
            (false, 0) => ScenarioLabel::Standalone,
            (true, 0) => ScenarioLabel::Cadm,
            (true, n) => ScenarioLabel::CadmCdm(n),
            (false, n) => ScenarioLabel::Cdm(n),
        }
    }
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioLabel::Standalone => f.write_str("Standalone"),
            ScenarioLabel::Cadm => f.write_str("CADM"),
            ScenarioLabel::CadmCdm(n) => write!(f, "CADM+CDM({n})"),
            ScenarioLabel::Cdm(n) => write!(f, "CDM({n})"),
        }
    }
}

impl FromStr for ScenarioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |inner: &str| {
            inner
                .strip_suffix(')')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Parse(format!("bad scenario label {s:?}")))
        };
        if s.eq_ignore_ascii_case("standalone") {
            Ok(ScenarioLabel::Standalone)
        } else if s.eq_ignore_ascii_case("cadm") {
            Ok(ScenarioLabel::Cadm)
        } else if let Some(rest) = s.strip_prefix("CADM+CDM(") {
            Ok(ScenarioLabel::CadmCdm(count(rest)?))
        } else if let Some(rest) = s.strip_prefix("CDM(") {
            Ok(ScenarioLabel::Cdm(count(rest)?))
        } else {
            Err(Error::Parse(format!("bad scenario label {s:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaborativeSource {
    pub source_id: String,
    pub attributes: Vec<AttributeRef>,
}

/// One row of the scenario matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    scenario_id: String,
    target: AttributeRef,
    main_attributes: Vec<AttributeRef>,
    context_attributes: Vec<AttributeRef>,
    collaborative: Vec<CollaborativeSource>,
    label: ScenarioLabel,
}

impl ScenarioSpec {
    /// `main_attributes` are main-source attributes besides the target.
    pub fn new(
        scenario_id: impl Into<String>,
        target: AttributeRef,
        main_attributes: Vec<AttributeRef>,
        context_attributes: Vec<AttributeRef>,
        collaborative: Vec<CollaborativeSource>,
    ) -> Result<Self> {
        let scenario_id = scenario_id.into();
        let invalid = |msg: String| Error::InvalidScenario(format!("{scenario_id}: {msg}"));
        if scenario_id.trim().is_empty() {
            return Err(Error::InvalidScenario("empty scenario id".into()));
        }
        if let Some(bad) = std::iter::once(&target)
            .chain(&main_attributes)
            .chain(&context_attributes)
            .chain(collaborative.iter().flat_map(|c| &c.attributes))
            .find(|r| r.source_id.is_empty() || r.attribute.is_empty())
        {
            return Err(invalid(format!("empty reference {bad}")));
        }
        if let Some(bad) = main_attributes.iter().find(|r| r.source_id != target.source_id) {
            return Err(invalid(format!("main attribute {bad} is not from the target's source")));
        }
        let mut seen_sources = BTreeSet::new();
        for cs in &collaborative {
            if cs.source_id == target.source_id {
                return Err(invalid(format!(
                    "collaborative source {} is the main source",
                    cs.source_id
                )));
            }
            if !seen_sources.insert(cs.source_id.as_str()) {
                return Err(invalid(format!("collaborative source {} listed twice", cs.source_id)));
            }
            if cs.attributes.is_empty() {
                return Err(invalid(format!(
                    "collaborative source {} has no attributes",
                    cs.source_id
                )));
            }
            if let Some(bad) = cs.attributes.iter().find(|r| r.source_id != cs.source_id) {
                return Err(invalid(format!(
                    "{bad} does not belong to collaborative source {}",
                    cs.source_id
                )));
            }
        }
        let mut seen = BTreeSet::new();
        let all = std::iter::once(&target)
            .chain(&main_attributes)
            .chain(&context_attributes)
            .chain(collaborative.iter().flat_map(|c| &c.attributes));
        for r in all {
            if !seen.insert(r) {
                return Err(invalid(format!("attribute {r} appears twice")));
            }
        }
        let label = ScenarioLabel::derive(!context_attributes.is_empty(), collaborative.len());
        Ok(ScenarioSpec {
            scenario_id,
            target,
            main_attributes,
            context_attributes,
            collaborative,
            label,
        })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn target(&self) -> &AttributeRef {
        &self.target
    }

    /// Source id of the main data, which is also the "location" of the scenario.
    pub fn main_source(&self) -> &str {
        &self.target.source_id
    }

    pub fn main_attributes(&self) -> &[AttributeRef] {
        &self.main_attributes
    }

    pub fn context_attributes(&self) -> &[AttributeRef] {
        &self.context_attributes
    }

    pub fn collaborative(&self) -> &[CollaborativeSource] {
        &self.collaborative
    }

    pub fn label(&self) -> ScenarioLabel {
        self.label
    }

    /// Every participating attribute: target, main, context, then collaborative slots in order.
    pub fn attributes(&self) -> Vec<&AttributeRef> {
        std::iter::once(&self.target)
            .chain(&self.main_attributes)
            .chain(&self.context_attributes)
            .chain(self.collaborative.iter().flat_map(|c| &c.attributes))
            .collect()
    }

    pub fn validate(&self, repo: &DataRepository) -> Result<()> {
        for r in self.attributes() {
            r.resolve(repo)?;
        }
        Ok(())
    }
}

/// Settings shared by every scenario of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteDefaults {
    pub window: usize,
    pub split: f64,
    pub algorithms: Vec<Algorithm>,
}

impl Default for SuiteDefaults {
    fn default() -> Self {
        SuiteDefaults {
            window: DEFAULT_WINDOW,
            split: DEFAULT_SPLIT,
            algorithms: Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSuite {
    scenarios: Vec<ScenarioSpec>,
    pub defaults: SuiteDefaults,
}

impl ScenarioSuite {
    pub fn new(scenarios: Vec<ScenarioSpec>, defaults: SuiteDefaults) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Parse("no scenarios".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &scenarios {
            if !ids.insert(s.scenario_id()) {
                return Err(Error::DuplicateScenario(s.scenario_id().to_string()));
            }
        }
        if defaults.window == 0 {
            return Err(Error::Parse("window must be at least 1".into()));
        }
        if !(defaults.split > 0.0 && defaults.split < 1.0) {
            return Err(Error::Parse(format!("split {} outside (0, 1)", defaults.split)));
        }
        Ok(ScenarioSuite { scenarios, defaults })
    }

    /// Concatenates suites, keeping the first suite's defaults.
    pub fn merge(suites: Vec<ScenarioSuite>) -> Result<Self> {
        let defaults = suites
            .first()
            .map(|s| s.defaults.clone())
            .ok_or_else(|| Error::Parse("no scenarios".into()))?;
        let scenarios = suites.into_iter().flat_map(|s| s.scenarios).collect();
        Self::new(scenarios, defaults)
    }

    pub fn scenarios(&self) -> &[ScenarioSpec] {
        &self.scenarios
    }

    pub fn get(&self, scenario_id: &str) -> Option<&ScenarioSpec> {
        self.scenarios.iter().find(|s| s.scenario_id() == scenario_id)
    }

    pub fn validate(&self, repo: &DataRepository) -> Result<()> {
        self.scenarios.iter().try_for_each(|s| s.validate(repo))
    }

    /// Writes the suite as a scenario matrix that [`parse_suite_str`] reads back.
    /// Header order: every scenario's attribute order is kept when the orders
    /// agree, otherwise first appearance wins.
    fn column_order(&self) -> Vec<&AttributeRef> {
        let mut seen: Vec<&AttributeRef> = Vec::new();
        let mut after: Vec<Vec<usize>> = Vec::new();
        for s in &self.scenarios {
            let mut prev: Option<usize> = None;
            for r in s.attributes() {
                let i = match seen.iter().position(|c| *c == r) {
                    Some(i) => i,
                    None => {
                        seen.push(r);
                        after.push(Vec::new());
                        seen.len() - 1
                    }
                };
                if let Some(p) = prev {
                    after[p].push(i);
                }
                prev = Some(i);
            }
        }
        let mut indegree = vec![0usize; seen.len()];
        for succ in &after {
            for &j in succ {
                indegree[j] += 1;
            }
        }
        let mut placed = vec![false; seen.len()];
        let mut order = Vec::with_capacity(seen.len());
        while order.len() < seen.len() {
            let next = (0..seen.len())
                .find(|&i| !placed[i] && indegree[i] == 0)
                .or_else(|| (0..seen.len()).find(|&i| !placed[i]))
                .expect("unplaced column remains");
            placed[next] = true;
            for &j in &after[next] {
                indegree[j] = indegree[j].saturating_sub(1);
            }
            order.push(seen[next]);
        }
        order
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let columns = self.column_order();
        writeln!(out, "# window = {}", self.defaults.window)?;
        writeln!(out, "# split = {}", self.defaults.split)?;
        let algos: Vec<String> = self.defaults.algorithms.iter().map(ToString::to_string).collect();
        writeln!(out, "# algorithms = {}", algos.join(";"))?;
        let header: Vec<String> = std::iter::once("scenario_id".to_string())
            .chain(columns.iter().map(ToString::to_string))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for s in &self.scenarios {
            let mut roles: BTreeMap<&AttributeRef, String> = BTreeMap::new();
            roles.insert(s.target(), "target".into());
            for r in s.main_attributes() {
                roles.insert(r, "main".into());
            }
            for r in s.context_attributes() {
                roles.insert(r, "context".into());
            }
            for (slot, cs) in s.collaborative().iter().enumerate() {
                for r in &cs.attributes {
                    roles.insert(r, format!("cs{}", slot + 1));
                }
            }
            let row: Vec<String> = std::iter::once(s.scenario_id().to_string())
                .chain(
                    columns
                        .iter()
                        .map(|c| roles.get(c).cloned().unwrap_or_else(|| MISSING_MARKER.to_string())),
                )
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Target,
    Main,
    Context,
    Collaborative(usize),
}

fn parse_role(cell: &str) -> Result<Option<Role>> {
    let c = cell.trim();
    if c.is_empty() || c == MISSING_MARKER {
        return Ok(None);
    }
    let lower = c.to_ascii_lowercase();
    let role = match lower.as_str() {
        "target" => Role::Target,
        "main" => Role::Main,
        "context" => Role::Context,
        other => match other.strip_prefix("cs").and_then(|n| n.parse::<usize>().ok()) {
            Some(slot) if slot >= 1 => Role::Collaborative(slot),
            _ => return Err(Error::Parse(format!("unknown cell value {c:?}"))),
        },
    };
    Ok(Some(role))
}

fn apply_directive(defaults: &mut SuiteDefaults, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Parse(format!("bad {what} directive {value:?}"));
    match key {
        "window" => defaults.window = value.parse().map_err(|_| bad("window"))?,
        "split" => defaults.split = value.parse().map_err(|_| bad("split"))?,
        "algorithms" => {
            defaults.algorithms = value
                .split([';', ','])
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<Vec<Algorithm>>>()?;
            if defaults.algorithms.is_empty() {
                return Err(bad("algorithms"));
            }
        }
        other => return Err(Error::Parse(format!("unknown directive {other:?}"))),
    }
    Ok(())
}

/// Parses a scenario matrix from text.
pub fn parse_suite_str(text: &str, delimiter: u8) -> Result<ScenarioSuite> {
    let mut defaults = SuiteDefaults::default();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                apply_directive(&mut defaults, k.trim(), v.trim())?;
            }
        } else if !trimmed.is_empty() {
            break;
        }
        body_start += line.len();
    }

    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(&text.as_bytes()[body_start..]);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| Error::Parse(e.to_string()))?,
        None => return Err(Error::Parse("no scenarios".into())),
    };
    let mut cols = header.iter();
    match cols.next().map(str::trim) {
        Some("scenario_id") => {}
        other => {
            return Err(Error::Parse(format!(
                "first column must be scenario_id, found {other:?}"
            )))
        }
    }
    let columns: Vec<AttributeRef> = cols.map(str::parse).collect::<Result<_>>()?;
    let unique: BTreeSet<&AttributeRef> = columns.iter().collect();
    if unique.len() != columns.len() {
        return Err(Error::Parse("duplicate column in header".into()));
    }

    let mut scenarios = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        let id = record.get(0).unwrap_or_default().trim().to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateScenario(id));
        }
        let row_err = |msg: String| Error::Parse(format!("scenario {id:?}: {msg}"));

        let mut target = None;
        let mut main = Vec::new();
        let mut context = Vec::new();
        let mut slots: BTreeMap<usize, Vec<AttributeRef>> = BTreeMap::new();
        for (col, cell) in columns.iter().zip(record.iter().skip(1)) {
            match parse_role(cell).map_err(|e| row_err(e.to_string()))? {
                None => {}
                Some(Role::Target) => {
                    if target.replace(col.clone()).is_some() {
                        return Err(row_err("more than one target column".into()));
                    }
                }
                Some(Role::Main) => main.push(col.clone()),
                Some(Role::Context) => context.push(col.clone()),
                Some(Role::Collaborative(slot)) => slots.entry(slot).or_default().push(col.clone()),
            }
        }
        let target = target.ok_or_else(|| row_err("no target column".into()))?;
        let mut collaborative = Vec::with_capacity(slots.len());
        for (expected, (slot, attributes)) in (1..).zip(slots) {
            if slot != expected {
                return Err(row_err(format!(
                    "collaborative slots must be numbered 1..P, missing cs{expected}"
                )));
            }
            let source_id = attributes[0].source_id.clone();
            if attributes.iter().any(|a| a.source_id != source_id) {
                return Err(row_err(format!("slot cs{slot} mixes several sources")));
            }
            collaborative.push(CollaborativeSource { source_id, attributes });
        }
        scenarios.push(ScenarioSpec::new(id, target, main, context, collaborative)?);
    }
    ScenarioSuite::new(scenarios, defaults)
}

/// Reads a comma-delimited scenario matrix file.
pub fn parse_suite(path: &Path) -> Result<ScenarioSuite> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite_str(&text, b',')
}

/// Parses the file and checks every reference against the repository.
pub fn parse_and_validate(path: &Path, repo: &DataRepository) -> Result<ScenarioSuite> {
    let suite = parse_suite(path)?;
    suite.validate(repo)?;
    Ok(suite)
}

/// Parameters of the six standard scenarios for one main location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetParams {
    pub main: String,
    pub target: String,
    pub context: String,
    pub neighbors: Vec<String>,
    /// Defaults to `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_attribute: Option<String>,
}

/// Suffixes of the preset scenario ids, in emission order.
pub const PRESET_SUFFIXES: [&str; 6] = ["standalone", "cadm", "cadm-cdm1", "cadm-cdm2", "cadm-cdm3", "cdm3"];

/// The six standard scenarios: Standalone, CADM, CADM+CDM with 1, 2 and 3
/// neighbours, and CDM with 3 neighbours. Neighbours are used in the order given.
pub fn generate_presets(
    main: &str,
    target_attribute: &str,
    context_attribute: &str,
    neighbors: &[String],
    neighbor_attribute: &str,
) -> Result<ScenarioSuite> {
    if neighbors.len() < 3 {
        return Err(Error::InsufficientNeighbors(neighbors.len()));
    }
    let target = AttributeRef::new(main, target_attribute);
    let context = vec![AttributeRef::new(main, context_attribute)];
    let cs = |n: usize| -> Vec<CollaborativeSource> {
        neighbors[..n]
            .iter()
            .map(|src| CollaborativeSource {
                source_id: src.clone(),
                attributes: vec![AttributeRef::new(src.clone(), neighbor_attribute)],
            })
            .collect()
    };
    let id = |suffix: &str| format!("{main}-{suffix}");
    let scenarios = vec![
        ScenarioSpec::new(id(PRESET_SUFFIXES[0]), target.clone(), vec![], vec![], vec![])?,
        ScenarioSpec::new(id(PRESET_SUFFIXES[1]), target.clone(), vec![], context.clone(), vec![])?,
        ScenarioSpec::new(id(PRESET_SUFFIXES[2]), target.clone(), vec![], context.clone(), cs(1))?,
        ScenarioSpec::new(id(PRESET_SUFFIXES[3]), target.clone(), vec![], context.clone(), cs(2))?,
        ScenarioSpec::new(id(PRESET_SUFFIXES[4]), target.clone(), vec![], context, cs(3))?,
        ScenarioSpec::new(id(PRESET_SUFFIXES[5]), target, vec![], vec![], cs(3))?,
    ];
    ScenarioSuite::new(scenarios, SuiteDefaults::default())
}

impl PresetParams {
    pub fn generate(&self) -> Result<ScenarioSuite> {
        generate_presets(
            &self.main,
            &self.target,
            &self.context,
            &self.neighbors,
            self.neighbor_attribute.as_deref().unwrap_or(&self.target),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sarmasu() -> ScenarioSuite {
        let n: Vec<String> = ["Reghin", "TMures", "Ludus"].iter().map(|s| s.to_string()).collect();
        generate_presets("Sarmasu", "hum", "temp", &n, "hum").unwrap()
    }

    #[test]
    fn all_ignored_row_is_standalone() {
        let text = "scenario_id,Sarmasu.hum,Sarmasu.temp,Reghin.hum,TMures.hum,Ludus.hum\n\
                    s1,target,?,?,?,?\n";
        let suite = parse_suite_str(text, b',').unwrap();
        assert_eq!(suite.scenarios()[0].label(), ScenarioLabel::Standalone);
    }

    #[test]
    fn context_and_three_sources_is_cadm_cdm3() {
        let text = "scenario_id,Sarmasu.hum,Sarmasu.temp,Reghin.hum,TMures.hum,Ludus.hum\n\
                    s1,target,context,cs1,cs2,cs3\n\
                    s2,target,?,cs1,cs2,cs3\n";
        let suite = parse_suite_str(text, b',').unwrap();
        assert_eq!(suite.scenarios()[0].label(), ScenarioLabel::CadmCdm(3));
        assert_eq!(suite.scenarios()[1].label(), ScenarioLabel::Cdm(3));
        let cs: Vec<&str> = suite.scenarios()[0]
            .collaborative()
            .iter()
            .map(|c| c.source_id.as_str())
            .collect();
        assert_eq!(cs, ["Reghin", "TMures", "Ludus"]);
    }

    #[test]
    fn slot_numbers_define_collaborative_order() {
        let text = "scenario_id,TMures.hum,TMures.temp,Sarmasu.hum,Reghin.hum,Ludus.hum\n\
                    t1,target,context,cs2,cs1,cs3\n";
        let suite = parse_suite_str(text, b',').unwrap();
        let cs: Vec<&str> = suite.scenarios()[0]
            .collaborative()
            .iter()
            .map(|c| c.source_id.as_str())
            .collect();
        assert_eq!(cs, ["Reghin", "Sarmasu", "Ludus"]);
    }

    #[test]
    fn empty_file_and_header_only_are_errors() {
        assert!(matches!(parse_suite_str("", b','), Err(Error::Parse(_))));
        assert!(matches!(
            parse_suite_str("scenario_id,a.b\n", b','),
            Err(Error::Parse(_))
        ));
        assert!(matches!(parse_suite_str("# window = 7\n", b','), Err(Error::Parse(_))));
    }

    #[test]
    fn duplicate_scenario_and_row_errors() {
        let dup = "scenario_id,a.x\ns,target\ns,target\n";
        assert!(matches!(parse_suite_str(dup, b','), Err(Error::DuplicateScenario(id)) if id == "s"));
        let no_target = "scenario_id,a.x,a.y\ns,main,?\n";
        assert!(parse_suite_str(no_target, b',').is_err());
        let two_targets = "scenario_id,a.x,a.y\ns,target,target\n";
        assert!(parse_suite_str(two_targets, b',').is_err());
        let gap = "scenario_id,a.x,b.y\ns,target,cs2\n";
        assert!(parse_suite_str(gap, b',').is_err());
        let mixed = "scenario_id,a.x,b.y,c.y\ns,target,cs1,cs1\n";
        assert!(parse_suite_str(mixed, b',').is_err());
        let foreign_main = "scenario_id,a.x,b.y\ns,target,main\n";
        assert!(parse_suite_str(foreign_main, b',').is_err());
        let bad_cell = "scenario_id,a.x,b.y\ns,target,val\n";
        assert!(parse_suite_str(bad_cell, b',').is_err());
    }

    #[test]
    fn directives_set_defaults() {
        let text = "# window = 3\n# split = 0.75\n# algorithms = KNN;DT\nscenario_id,a.x\ns,target\n";
        let suite = parse_suite_str(text, b',').unwrap();
        assert_eq!(suite.defaults.window, 3);
        assert_eq!(suite.defaults.split, 0.75);
        assert_eq!(suite.defaults.algorithms, vec![Algorithm::Knn, Algorithm::Dt]);
        assert!(parse_suite_str("# colour = red\nscenario_id,a.x\ns,target\n", b',').is_err());
    }

    #[test]
    fn unresolved_reference() {
        use crate::dataset::{Row, SourceDataset};
        let d0 = chrono::NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
        let ds = SourceDataset::new(
            "a",
            vec!["x".into()],
            (0..3)
                .map(|i| Row {
                    date: d0 + chrono::Days::new(i),
                    values: vec![Some(i as f64)],
                })
                .collect(),
        )
        .unwrap();
        let repo = DataRepository::from_datasets([ds]).unwrap();
        let suite = parse_suite_str("scenario_id,a.x,b.x\ns,target,cs1\n", b',').unwrap();
        assert!(matches!(suite.validate(&repo), Err(Error::UnresolvedRef { .. })));
        let suite = parse_suite_str("scenario_id,a.x,a.z\ns,target,main\n", b',').unwrap();
        assert!(matches!(suite.validate(&repo), Err(Error::UnresolvedRef { .. })));
    }

    #[test]
    fn presets_for_one_main_location() {
        let suite = sarmasu();
        let labels: Vec<ScenarioLabel> = suite.scenarios().iter().map(|s| s.label()).collect();
        assert_eq!(
            labels,
            [
                ScenarioLabel::Standalone,
                ScenarioLabel::Cadm,
                ScenarioLabel::CadmCdm(1),
                ScenarioLabel::CadmCdm(2),
                ScenarioLabel::CadmCdm(3),
                ScenarioLabel::Cdm(3),
            ]
        );
        let two = &suite.scenarios()[3];
        let cs: Vec<&str> = two.collaborative().iter().map(|c| c.source_id.as_str()).collect();
        assert_eq!(cs, ["Reghin", "TMures"]);
        assert_eq!(two.context_attributes(), &[AttributeRef::new("Sarmasu", "temp")]);
        assert_eq!(suite.scenarios()[4].attributes().len(), 5);
    }

    #[test]
    fn presets_need_three_neighbors() {
        let n = vec!["A".to_string(), "B".to_string()];
        assert!(matches!(
            generate_presets("M", "h", "t", &n, "h"),
            Err(Error::InsufficientNeighbors(2))
        ));
    }

    #[test]
    fn standalone_attributes_are_a_subset_of_every_preset() {
        let suite = sarmasu();
        let base: BTreeSet<_> = suite.scenarios()[0].attributes().into_iter().collect();
        for s in suite.scenarios() {
            let all: BTreeSet<_> = s.attributes().into_iter().collect();
            assert!(base.is_subset(&all), "{}", s.scenario_id());
        }
    }

    #[test]
    fn preset_file_round_trip() {
        let suite = sarmasu();
        let mut buf = Vec::new();
        suite.write(&mut buf).unwrap();
        let back = parse_suite_str(std::str::from_utf8(&buf).unwrap(), b',').unwrap();
        assert_eq!(back, suite);
    }

    #[test]
    fn label_text_round_trip() {
        for l in [
            ScenarioLabel::Standalone,
            ScenarioLabel::Cadm,
            ScenarioLabel::CadmCdm(2),
            ScenarioLabel::Cdm(3),
        ] {
            assert_eq!(l.to_string().parse::<ScenarioLabel>().unwrap(), l);
        }
    }

    // Candidate columns in one global order; each scenario picks a subset,
    // so the header written by `write` preserves every scenario's ordering.
    fn arb_suite() -> impl Strategy<Value = ScenarioSuite> {
        let row = (
            0usize..2,
            proptest::collection::vec(any::<bool>(), 2),
            proptest::collection::vec(any::<bool>(), 2),
            proptest::collection::vec(any::<bool>(), 3),
        );
        (proptest::collection::vec(row, 1..6), 1usize..12, 1u32..99).prop_map(|(rows, window, split)| {
            let scenarios = rows
                .into_iter()
                .enumerate()
                .map(|(i, (loc, mains, ctx, cs))| {
                    let main = ["m0", "m1"][loc];
                    let target = AttributeRef::new(main, "y");
                    let main_attrs = ["a", "b"]
                        .iter()
                        .zip(&mains)
                        .filter(|(_, on)| **on)
                        .map(|(a, _)| AttributeRef::new(main, *a))
                        .collect();
                    let context = ["c0", "c1"]
                        .iter()
                        .zip(&ctx)
                        .filter(|(_, on)| **on)
                        .map(|(c, _)| AttributeRef::new("ctx", *c))
                        .collect();
                    let collaborative = ["n0", "n1", "n2"]
                        .iter()
                        .zip(&cs)
                        .filter(|(_, on)| **on)
                        .map(|(n, _)| CollaborativeSource {
                            source_id: n.to_string(),
                            attributes: vec![AttributeRef::new(*n, "y")],
                        })
                        .collect();
                    ScenarioSpec::new(format!("s{i}"), target, main_attrs, context, collaborative).unwrap()
                })
                .collect();
            let defaults = SuiteDefaults {
                window,
                split: split as f64 / 100.0,
                algorithms: vec![Algorithm::Knn, Algorithm::Dl],
            };
            ScenarioSuite::new(scenarios, defaults).unwrap()
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(suite in arb_suite()) {
            let mut buf = Vec::new();
            suite.write(&mut buf).unwrap();
            let back = parse_suite_str(std::str::from_utf8(&buf).unwrap(), b',').unwrap();
            prop_assert_eq!(back, suite);
        }

        #[test]
        fn label_is_a_function_of_emptiness(has_ctx in any::<bool>(), n in 0usize..6) {
            let label = ScenarioLabel::derive(has_ctx, n);
            let expected = match (has_ctx, n) {
                (false, 0) => ScenarioLabel::Standalone,
                (true, 0) => ScenarioLabel::Cadm,
                (true, n) => ScenarioLabel::CadmCdm(n),
                (false, n) => ScenarioLabel::Cdm(n),
            };
            prop_assert_eq!(label, expected);
        }
    }
}
