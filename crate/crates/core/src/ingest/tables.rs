//! Tab-separated inputs: base-prediction score tables, affinity labels and
//! partition assignments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which family of base predictors a score table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TableGroup {
    D1,
    D2,
    D3,
    D1F,
    D2F,
    DockingSmina,
    DockingVinardo,
    Other,
}

impl TableGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            TableGroup::D1 => "D1",
            TableGroup::D2 => "D2",
            TableGroup::D3 => "D3",
            TableGroup::D1F => "D1F",
            TableGroup::D2F => "D2F",
            TableGroup::DockingSmina => "DOCKING_SMINA",
            TableGroup::DockingVinardo => "DOCKING_VINARDO",
            TableGroup::Other => "OTHER",
        }
    }
}

impl fmt::Display for TableGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "D1" => TableGroup::D1,
            "D2" => TableGroup::D2,
            "D3" => TableGroup::D3,
            "D1F" => TableGroup::D1F,
            "D2F" => TableGroup::D2F,
            "DOCKING_SMINA" | "SMINA" => TableGroup::DockingSmina,
            "DOCKING_VINARDO" | "VINARDO" => TableGroup::DockingVinardo,
            "OTHER" => TableGroup::Other,
            _ => return Err(Error::invalid(format!("unknown table group `{s}`"))),
        })
    }
}

/// Predictions from many model instances, one row per complex.
///
/// Row order is the order of the source file; lookups go through an index.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePredictionTable {
    pub group: TableGroup,
    id_header: String,
    column_ids: Vec<String>,
    row_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl BasePredictionTable {
    pub fn new(group: TableGroup, column_ids: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &column_ids {
            if !seen.insert(c.as_str()) {
                return Err(Error::Table {
                    row: 1,
                    message: format!("duplicate column id `{c}`"),
                });
            }
        }
        Ok(BasePredictionTable {
            group,
            id_header: "complex_id".to_string(),
            column_ids,
            row_ids: Vec::new(),
            rows: Vec::new(),
            index: HashMap::new(),
        })
    }

    /// Append a row; fails on duplicate ids, width mismatch or non-finite values.
    pub fn push_row(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let id = id.into();
        let row = self.rows.len() + 2;
        if values.len() != self.column_ids.len() {
            return Err(Error::Table {
                row,
                message: format!(
                    "expected {} values, found {}",
                    self.column_ids.len(),
                    values.len()
                ),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Table {
                row,
                message: "non-finite value".into(),
            });
        }
        if self.index.contains_key(&id) {
            return Err(Error::Table {
                row,
                message: format!("duplicate complex id `{id}`"),
            });
        }
        self.index.insert(id.clone(), self.rows.len());
        self.row_ids.push(id);
        self.rows.push(values);
        Ok(())
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_ids.len()
    }

    pub fn row(&self, complex_id: &str) -> Option<&[f64]> {
        self.index.get(complex_id).map(|&i| self.rows[i].as_slice())
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.row_ids
            .iter()
            .map(String::as_str)
            .zip(self.rows.iter().map(Vec::as_slice))
    }

    /// Concatenate tables column-wise over the ids present in every table.
    pub fn merge(group: TableGroup, tables: &[&BasePredictionTable]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::invalid("cannot merge zero tables"))?;
        let columns = tables
            .iter()
            .flat_map(|t| t.column_ids.iter().cloned())
            .collect();
        let mut merged = BasePredictionTable::new(group, columns)?;
        for id in &first.row_ids {
            if let Some(parts) = tables.iter().map(|t| t.row(id)).collect::<Option<Vec<_>>>() {
                merged.push_row(id.clone(), parts.concat())?;
            }
        }
        Ok(merged)
    }
}

fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

/// Parse a score table: header `id<TAB>col1<TAB>col2...`, one row per complex.
pub fn parse_score_table(text: &str, group: TableGroup) -> Result<BasePredictionTable> {
    let mut lines = tsv_lines(text);
    let (_, header) = lines.next().ok_or(Error::Table {
        row: 1,
        message: "missing header row".into(),
    })?;
    let mut fields = header.split('\t');
    let id_header = fields.next().unwrap_or_default().to_string();
    let columns: Vec<String> = fields.map(str::to_string).collect();
    if columns.is_empty() {
        return Err(Error::Table {
            row: 1,
            message: "header has no prediction columns".into(),
        });
    }
    let mut table = BasePredictionTable::new(group, columns)?;
    table.id_header = id_header;
    for (row, line) in lines {
        let mut cells = line.split('\t');
        let id = cells.next().unwrap_or_default();
        if id.is_empty() {
            return Err(Error::Table {
                row,
                message: "empty complex id".into(),
            });
        }
        let values = cells
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| Error::Table {
                    row,
                    message: format!("non-numeric cell `{c}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        table.push_row(id, values).map_err(|e| match e {
            Error::Table { message, .. } => Error::Table { row, message },
            other => other,
        })?;
    }
    Ok(table)
}

/// Serialize a score table in source row order with shortest round-trip floats.
pub fn write_score_table(table: &BasePredictionTable) -> String {
    let mut out = String::new();
    out.push_str(&table.id_header);
    for c in &table.column_ids {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for (id, values) in table.rows() {
        out.push_str(id);
        for v in values {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    Kd,
    Ki,
    IC50,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssayMethod {
    XRay,
    Nmr,
    Unknown,
}

/// Experimental affinity as a natural log of Kd/Ki, kept in the upstream units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityLabel {
    pub complex_id: String,
    pub value: f64,
    pub measure_kind: MeasureKind,
    pub assay_method: Option<AssayMethod>,
    pub year: Option<i32>,
}

impl AffinityLabel {
    pub fn new(complex_id: impl Into<String>, value: f64) -> Self {
        AffinityLabel {
            complex_id: complex_id.into(),
            value,
            measure_kind: MeasureKind::Unknown,
            assay_method: None,
            year: None,
        }
    }
}

const LABEL_HEADER: [&str; 5] = ["complex_id", "ln_affinity", "measure_kind", "assay_method", "year"];

/// Parse the affinity label table. Empty metadata cells mean "unknown".
pub fn parse_labels(text: &str) -> Result<Vec<AffinityLabel>> {
    let mut lines = tsv_lines(text);
    let (_, header) = lines.next().ok_or(Error::Table {
        row: 1,
        message: "missing header row".into(),
    })?;
    let header: Vec<&str> = header.split('\t').collect();
    if header.len() < 2 || header[..2] != LABEL_HEADER[..2] {
        return Err(Error::Table {
            row: 1,
            message: format!("label header must start with `{}`", LABEL_HEADER[..2].join("\t")),
        });
    }
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    for (row, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err(Error::Table {
                row,
                message: format!("expected {} cells, found {}", header.len(), cells.len()),
            });
        }
        let id = cells[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Table {
                row,
                message: format!("duplicate complex id `{id}`"),
            });
        }
        let value: f64 = cells[1].trim().parse().map_err(|_| Error::Table {
            row,
            message: format!("non-numeric affinity `{}`", cells[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Table {
                row,
                message: "non-finite affinity".into(),
            });
        }
        let cell = |i: usize| cells.get(i).map(|c| c.trim()).filter(|c| !c.is_empty());
        let measure_kind = match cell(2).map(str::to_ascii_uppercase).as_deref() {
            None => MeasureKind::Unknown,
            Some("KD") => MeasureKind::Kd,
            Some("KI") => MeasureKind::Ki,
            Some("IC50") => MeasureKind::IC50,
            Some(_) => MeasureKind::Unknown,
        };
        let assay_method = cell(3).map(|c| match c.to_ascii_uppercase().replace(['-', ' '], "").as_str() {
            "XRAY" | "XRAYDIFFRACTION" => AssayMethod::XRay,
            "NMR" | "SOLUTIONNMR" => AssayMethod::Nmr,
            _ => AssayMethod::Unknown,
        });
        let year = match cell(4) {
            None => None,
            Some(y) => Some(y.parse().map_err(|_| Error::Table {
                row,
                message: format!("non-integer year `{y}`"),
            })?),
        };
        labels.push(AffinityLabel {
            complex_id: id,
            value,
            measure_kind,
            assay_method,
            year,
        });
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Partition {
    Train,
    CoreSet,
    GeneralSet,
    Screen,
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "TRAIN" => Partition::Train,
            "CORESET" | "CORE" => Partition::CoreSet,
            "GENERALSET" | "GENERAL" => Partition::GeneralSet,
            "SCREEN" => Partition::Screen,
            _ => return Err(Error::invalid(format!("unknown partition `{s}`"))),
        })
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "TRAIN",
            Partition::CoreSet => "CORESET",
            Partition::GeneralSet => "GENERALSET",
            Partition::Screen => "SCREEN",
        })
    }
}

/// Parse `complex_id<TAB>partition` rows (header required).
pub fn parse_partitions(text: &str) -> Result<BTreeMap<String, Partition>> {
    let mut out = BTreeMap::new();
    for (row, line) in tsv_lines(text).skip(1) {
        let (id, tag) = line.split_once('\t').ok_or(Error::Table {
            row,
            message: "expected two cells".into(),
        })?;
        let partition = tag.parse().map_err(|e: Error| Error::Table {
            row,
            message: e.to_string(),
        })?;
        if out.insert(id.to_string(), partition).is_some() {
            return Err(Error::Table {
                row,
                message: format!("duplicate complex id `{id}`"),
            });
        }
    }
    Ok(out)
}
