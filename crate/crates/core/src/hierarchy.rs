//! The five-level geographic hierarchy (World, UN region, UN sub-region,
//! UN intermediate region, country or dependent territory) built from the
//! ISO 3166 / UN M49 regional-codes table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Code of the synthetic root node (M49 "World").
pub const WORLD_CODE: &str = "001";

/// Regional-codes snapshot shipped with the crate (249 countries and territories).
pub const BUNDLED_TABLE: &str = include_str!("../data/iso3166_m49.csv");

/// Regions whose prompts were refused by the provider in the reference run.
pub const REFERENCE_REJECTIONS: [&str; 5] = ["ERI", "SSD", "SDN", "VGB", "VIR"];

const REQUIRED_COLUMNS: [&str; 8] = [
    "name",
    "alpha-3",
    "region",
    "sub-region",
    "intermediate-region",
    "region-code",
    "sub-region-code",
    "intermediate-region-code",
];

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("region table is empty")]
    Empty,
    #[error("region table is missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {source}")]
    Csv { row: u64, source: csv::Error },
    #[error("row {row}: empty name")]
    EmptyName { row: u64 },
    #[error("row {row}: empty alpha-3 code for `{name}`")]
    EmptyCode { row: u64, name: String },
    #[error("row {row}: duplicate region code `{code}`")]
    DuplicateCode { row: u64, code: String },
    #[error("row {row}: `{name}` names an intermediate region but no sub-region")]
    IntermediateWithoutSubRegion { row: u64, name: String },
    #[error("row {row}: `{name}` names a sub-region but no region")]
    SubRegionWithoutRegion { row: u64, name: String },
    #[error("row {row}: region `{code}` is inconsistent with an earlier mention ({detail})")]
    Inconsistent { row: u64, code: String, detail: String },
    #[error("unknown region code `{0}`")]
    UnknownRegion(String),
    #[error("level {requested} is not strictly below {ancestor} (level {ancestor_level})")]
    LevelNotBelow {
        ancestor: String,
        ancestor_level: Level,
        requested: Level,
    },
    #[error("invalid hierarchy: {0}")]
    Invalid(String),
    #[error("hierarchy JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T, E = HierarchyError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    World,
    UnRegion,
    UnSubRegion,
    UnIntermediateRegion,
    Country,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::World,
        Level::UnRegion,
        Level::UnSubRegion,
        Level::UnIntermediateRegion,
        Level::Country,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    /// Machine name used in CSV and JSON artifacts.
    pub fn as_str(self) -> &'static str {
        match self {
            Level::World => "world",
            Level::UnRegion => "un_region",
            Level::UnSubRegion => "un_sub_region",
            Level::UnIntermediateRegion => "un_intermediate_region",
            Level::Country => "country",
        }
    }

    /// Human-readable label for reports.
    pub fn label(self) -> &'static str {
        match self {
            Level::World => "World",
            Level::UnRegion => "UN region",
            Level::UnSubRegion => "UN sub-region",
            Level::UnIntermediateRegion => "UN intermediate region",
            Level::Country => "ISO country or dependent territory",
        }
    }

    /// Levels strictly below this one, top-down.
    pub fn below(self) -> impl Iterator<Item = Level> {
        Level::ALL.into_iter().filter(move |l| *l > self)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown level `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionNode {
    pub code: String,
    pub name: String,
    pub level: Level,
    pub parent_code: Option<String>,
}

impl RegionNode {
    pub fn is_root(&self) -> bool {
        self.parent_code.is_none()
    }
}

/// Text prompt for a region: bare "forest" for the root, "forest in {name}" otherwise.
pub fn prompt_for(node: &RegionNode) -> String {
    if node.level == Level::World {
        "forest".to_owned()
    } else {
        format!("forest in {}", node.name)
    }
}

/// Immutable region tree plus the set of codes excluded from analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionHierarchy {
    nodes: BTreeMap<String, RegionNode>,
    root: String,
    exclusions: BTreeSet<String>,
    children: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct Serialized {
    exclusions: BTreeSet<String>,
    nodes: BTreeMap<String, RegionNode>,
    root: String,
}

impl RegionHierarchy {
    fn from_parts(
        nodes: BTreeMap<String, RegionNode>,
        root: String,
        exclusions: BTreeSet<String>,
    ) -> Result<Self> {
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut roots = 0;
        for node in nodes.values() {
            match &node.parent_code {
                None => {
                    roots += 1;
                    if node.code != root {
                        return Err(HierarchyError::Invalid(format!(
                            "node `{}` has no parent but is not the root",
                            node.code
                        )));
                    }
                }
                Some(parent) => {
                    let p = nodes
                        .get(parent)
                        .ok_or_else(|| HierarchyError::UnknownRegion(parent.clone()))?;
                    if p.level >= node.level {
                        return Err(HierarchyError::Invalid(format!(
                            "parent `{}` of `{}` is not at a higher level",
                            p.code, node.code
                        )));
                    }
                    children.entry(parent.clone()).or_default().push(node.code.clone());
                }
            }
        }
        if roots != 1 || !nodes.contains_key(&root) {
            return Err(HierarchyError::Invalid(format!("expected exactly one root, found {roots}")));
        }
        // Levels strictly increase along parent links, so every chain terminates
        // at the unique parentless node: everything is reachable from the root.
        for code in &exclusions {
            if !nodes.contains_key(code) {
                return Err(HierarchyError::UnknownRegion(code.clone()));
            }
        }
        Ok(Self {
            nodes,
            root,
            exclusions,
            children,
        })
    }

    /// Hierarchy built from the bundled snapshot, without exclusions.
    pub fn bundled() -> Self {
        parse_region_table(BUNDLED_TABLE.as_bytes()).expect("bundled region table is valid")
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| HierarchyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_region_table(file)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let s: Serialized = serde_json::from_str(json)?;
        Self::from_parts(s.nodes, s.root, s.exclusions)
    }

    /// Canonical JSON: sorted keys, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(Serialized {
            exclusions: self.exclusions.clone(),
            nodes: self.nodes.clone(),
            root: self.root.clone(),
        })
        .expect("hierarchy serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    /// Returns a copy with `codes` added to the exclusion set.
    pub fn with_exclusions<I, S>(&self, codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = self.clone();
        for code in codes {
            let code = code.as_ref();
            if !out.nodes.contains_key(code) {
                return Err(HierarchyError::UnknownRegion(code.to_owned()));
            }
            out.exclusions.insert(code.to_owned());
        }
        Ok(out)
    }

    pub fn root(&self) -> &RegionNode {
        &self.nodes[&self.root]
    }

    pub fn get(&self, code: &str) -> Option<&RegionNode> {
        self.nodes.get(code)
    }

    pub fn node(&self, code: &str) -> Result<&RegionNode> {
        self.get(code)
            .ok_or_else(|| HierarchyError::UnknownRegion(code.to_owned()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &RegionNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn exclusions(&self) -> &BTreeSet<String> {
        &self.exclusions
    }

    pub fn is_excluded(&self, code: &str) -> bool {
        self.exclusions.contains(code)
    }

    /// Immediate children of `code`, sorted by code.
    pub fn children(&self, code: &str) -> impl Iterator<Item = &RegionNode> {
        self.children
            .get(code)
            .into_iter()
            .flatten()
            .map(|c| &self.nodes[c])
    }

    pub fn parent(&self, code: &str) -> Option<&RegionNode> {
        self.nodes
            .get(code)?
            .parent_code
            .as_deref()
            .map(|p| &self.nodes[p])
    }

    /// True when `descendant` lies strictly below `ancestor`.
    pub fn is_descendant(&self, ancestor: &str, descendant: &str) -> bool {
        let mut cur = self.parent(descendant);
        while let Some(node) = cur {
            if node.code == ancestor {
                return true;
            }
            cur = self.parent(&node.code);
        }
        false
    }

    /// Non-excluded nodes at exactly `level` below `ancestor`, sorted by code.
    pub fn descendants_at_level(&self, ancestor: &str, level: Level) -> Result<Vec<&RegionNode>> {
        let anc = self.node(ancestor)?;
        if level <= anc.level {
            return Err(HierarchyError::LevelNotBelow {
                ancestor: ancestor.to_owned(),
                ancestor_level: anc.level,
                requested: level,
            });
        }
        let mut out = Vec::new();
        let mut stack = vec![ancestor];
        while let Some(code) = stack.pop() {
            for child in self.children(code) {
                if child.level == level {
                    if !self.is_excluded(&child.code) {
                        out.push(child);
                    }
                } else if child.level < level {
                    stack.push(&child.code);
                }
            }
        }
        out.sort_by(|a, b| a.code.cmp(&b.code));
        Ok(out)
    }

    /// Node counts per level, indexed by ordinal.
    pub fn level_counts(&self, include_excluded: bool) -> [usize; 5] {
        let mut counts = [0; 5];
        for node in self.nodes.values() {
            if include_excluded || !self.is_excluded(&node.code) {
                counts[node.level.ordinal() as usize] += 1;
            }
        }
        counts
    }
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for word in name
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push('-');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

struct Aggregate<'a> {
    name: &'a str,
    code: &'a str,
    level: Level,
}

/// Parses the regional-codes CSV into a hierarchy rooted at a synthetic World
/// node. Extra columns are ignored. Aggregates are keyed by their M49 code, or
/// by a name slug when the code cell is empty.
pub fn parse_region_table<R: Read>(reader: R) -> Result<RegionHierarchy> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| HierarchyError::Csv { row: 1, source })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(HierarchyError::Empty);
    }
    let mut idx = [0usize; 8];
    for (slot, col) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| HierarchyError::MissingColumn(col.to_owned()))?;
    }

    let mut nodes = BTreeMap::new();
    nodes.insert(
        WORLD_CODE.to_owned(),
        RegionNode {
            code: WORLD_CODE.to_owned(),
            name: "World".to_owned(),
            level: Level::World,
            parent_code: None,
        },
    );

    let mut seen_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i as u64 + 2;
        let record = record.map_err(|source| HierarchyError::Csv { row, source })?;
        seen_rows += 1;
        let cell = |k: usize| record.get(idx[k]).unwrap_or("").trim();
        let name = cell(0);
        if name.is_empty() {
            return Err(HierarchyError::EmptyName { row });
        }
        let code = cell(1);
        if code.is_empty() {
            return Err(HierarchyError::EmptyCode {
                row,
                name: name.to_owned(),
            });
        }
        let (region, sub, inter) = (cell(2), cell(3), cell(4));
        if !inter.is_empty() && sub.is_empty() {
            return Err(HierarchyError::IntermediateWithoutSubRegion {
                row,
                name: name.to_owned(),
            });
        }
        if !sub.is_empty() && region.is_empty() {
            return Err(HierarchyError::SubRegionWithoutRegion {
                row,
                name: name.to_owned(),
            });
        }

        let chain = [
            Aggregate { name: region, code: cell(5), level: Level::UnRegion },
            Aggregate { name: sub, code: cell(6), level: Level::UnSubRegion },
            Aggregate { name: inter, code: cell(7), level: Level::UnIntermediateRegion },
        ];
        let mut parent = WORLD_CODE.to_owned();
        for agg in chain.iter().filter(|a| !a.name.is_empty()) {
            let agg_code = if agg.code.is_empty() {
                slug(agg.name)
            } else {
                agg.code.to_owned()
            };
            match nodes.get(&agg_code) {
                Some(existing) => {
                    let existing: &RegionNode = existing;
                    if existing.level != agg.level
                        || existing.name != agg.name
                        || existing.parent_code.as_deref() != Some(parent.as_str())
                    {
                        return Err(HierarchyError::Inconsistent {
                            row,
                            code: agg_code,
                            detail: format!(
                                "`{}` at {} under {:?} vs `{}` at {} under `{}`",
                                existing.name,
                                existing.level,
                                existing.parent_code,
                                agg.name,
                                agg.level,
                                parent
                            ),
                        });
                    }
                }
                None => {
                    nodes.insert(
                        agg_code.clone(),
                        RegionNode {
                            code: agg_code.clone(),
                            name: agg.name.to_owned(),
                            level: agg.level,
                            parent_code: Some(parent.clone()),
                        },
                    );
                }
            }
            parent = agg_code;
        }

        if nodes.contains_key(code) {
            return Err(HierarchyError::DuplicateCode {
                row,
                code: code.to_owned(),
            });
        }
        nodes.insert(
            code.to_owned(),
            RegionNode {
                code: code.to_owned(),
                name: name.to_owned(),
                level: Level::Country,
                parent_code: Some(parent),
            },
        );
    }
    if seen_rows == 0 {
        return Err(HierarchyError::Empty);
    }
    RegionHierarchy::from_parts(nodes, WORLD_CODE.to_owned(), BTreeSet::new())
}
