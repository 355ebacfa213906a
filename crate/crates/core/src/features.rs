//! Meta-model feature groups.
//!
//! Every group starts from the two selected docking energies. All groups but
//! `E` add the ligand molecular weight, then either per-architecture means of
//! deep-learning predictions or leading principal-component scores of those
//! predictions.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ingest::{BasePredictionTable, Cohort, ScoringFunction, TableGroup};
use crate::pca::{project, PcaBasis, PcaSource};
use crate::pose_rmsd::RmsdFilterMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    E,
    EW,
    ED1,
    ED2,
    ED3,
    #[serde(rename = "ED1-F")]
    ED1F,
    #[serde(rename = "ED2-F")]
    ED2F,
    #[serde(rename = "ED1-F-P")]
    ED1FP,
    #[serde(rename = "ED2-F-P")]
    ED2FP,
    #[serde(rename = "ED3-P")]
    ED3P,
    #[serde(rename = "ED-A-P")]
    EDAP,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 11] = [
        FeatureGroup::E,
        FeatureGroup::EW,
        FeatureGroup::ED1,
        FeatureGroup::ED2,
        FeatureGroup::ED3,
        FeatureGroup::ED1F,
        FeatureGroup::ED2F,
        FeatureGroup::ED1FP,
        FeatureGroup::ED2FP,
        FeatureGroup::ED3P,
        FeatureGroup::EDAP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::E => "E",
            FeatureGroup::EW => "EW",
            FeatureGroup::ED1 => "ED1",
            FeatureGroup::ED2 => "ED2",
            FeatureGroup::ED3 => "ED3",
            FeatureGroup::ED1F => "ED1-F",
            FeatureGroup::ED2F => "ED2-F",
            FeatureGroup::ED1FP => "ED1-F-P",
            FeatureGroup::ED2FP => "ED2-F-P",
            FeatureGroup::ED3P => "ED3-P",
            FeatureGroup::EDAP => "ED-A-P",
        }
    }

    pub fn uses_mw(self) -> bool {
        self != FeatureGroup::E
    }

    /// Prediction tables the group draws on, in column order.
    pub fn tables(self) -> &'static [TableGroup] {
        match self {
            FeatureGroup::E | FeatureGroup::EW => &[],
            FeatureGroup::ED1 => &[TableGroup::D1],
            FeatureGroup::ED2 => &[TableGroup::D2],
            FeatureGroup::ED3 | FeatureGroup::ED3P => &[TableGroup::D3],
            FeatureGroup::ED1F | FeatureGroup::ED1FP => &[TableGroup::D1F],
            FeatureGroup::ED2F | FeatureGroup::ED2FP => &[TableGroup::D2F],
            FeatureGroup::EDAP => &[TableGroup::D1F, TableGroup::D2F, TableGroup::D3],
        }
    }

    pub fn pca_source(self) -> Option<PcaSource> {
        match self {
            FeatureGroup::ED1FP => Some(PcaSource::D1FP),
            FeatureGroup::ED2FP => Some(PcaSource::D2FP),
            FeatureGroup::ED3P => Some(PcaSource::D3P),
            FeatureGroup::EDAP => Some(PcaSource::DAP),
            _ => None,
        }
    }

    pub fn is_pca(self) -> bool {
        self.pca_source().is_some()
    }

    /// Names of the docking and molecular-weight columns.
    pub fn fixed_columns(self) -> Vec<String> {
        let mut cols = vec!["smina".to_string(), "vinardo".to_string()];
        if self.uses_mw() {
            cols.push("mw".to_string());
        }
        cols
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == norm || g.as_str().replace('-', "") == norm.replace('-', ""))
            .ok_or_else(|| Error::invalid(format!("unknown feature group `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureGroupSpec {
    pub group: FeatureGroup,
    pub rmsd_mode: RmsdFilterMode,
    /// Number of PC columns; set exactly for PCA-based groups.
    pub pc_count: Option<usize>,
}

impl FeatureGroupSpec {
    pub fn new(group: FeatureGroup, rmsd_mode: RmsdFilterMode, pc_count: Option<usize>) -> Result<Self> {
        let spec = FeatureGroupSpec {
            group,
            rmsd_mode,
            pc_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.group.is_pca(), self.pc_count) {
            (true, Some(k)) if k >= 1 => Ok(()),
            (true, Some(_)) => Err(Error::invalid("pc_count must be at least 1")),
            (true, None) => Err(Error::invalid(format!("group {} needs a pc_count", self.group))),
            (false, Some(_)) => Err(Error::invalid(format!("group {} takes no pc_count", self.group))),
            (false, None) => Ok(()),
        }
    }

    /// Cell name such as `ED2-F_VvS_101.0`.
    pub fn cell_name(&self) -> String {
        format!("{}_{}", self.group, self.rmsd_mode)
    }
}

/// Named numeric columns aligned to complexes, with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub complex_ids: Vec<String>,
    pub column_names: Vec<String>,
    pub values: DMatrix<f64>,
    pub labels: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.complex_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            complex_ids: rows.iter().map(|&r| self.complex_ids[r].clone()).collect(),
            column_names: self.column_names.clone(),
            values: self.values.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// TSV with `complex_id`, the feature columns, then `label`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("complex_id");
        for c in &self.column_names {
            out.push('\t');
            out.push_str(c);
        }
        out.push_str("\tlabel\n");
        for (i, id) in self.complex_ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.n_cols() {
                let _ = write!(out, "\t{}", self.values[(i, j)]);
            }
            let _ = writeln!(out, "\t{}", self.labels[i]);
        }
        out
    }
}

/// Default architecture key: the first two `|`-separated fields of a column id.
pub fn architecture_key(column_id: &str) -> String {
    column_id.splitn(3, '|').take(2).collect::<Vec<_>>().join("|")
}

/// Average the instance columns of each architecture. Architectures keep the
/// order of their first column.
pub fn dl_mean_scores(table: &BasePredictionTable, key: impl Fn(&str) -> String) -> Result<BasePredictionTable> {
    if table.n_cols() == 0 {
        return Err(Error::invalid(format!("table {} has no prediction columns", table.group)));
    }
    let mut order: Vec<String> = Vec::new();
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, c) in table.column_ids().iter().enumerate() {
        let k = key(c);
        if !members.contains_key(&k) {
            order.push(k.clone());
        }
        members.entry(k).or_default().push(j);
    }
    let groups: Vec<&Vec<usize>> = order.iter().map(|k| &members[k]).collect();
    let mut out = BasePredictionTable::new(table.group, order.clone())?;
    for (id, row) in table.rows() {
        let means = groups
            .iter()
            .map(|cols| cols.iter().map(|&j| row[j]).sum::<f64>() / cols.len() as f64)
            .collect();
        out.push_row(id, means)?;
    }
    Ok(out)
}

/// Raw prediction columns of `tables` for every record in `cohort`, in
/// cohort order, plus the column ids.
pub fn prediction_block(cohort: &Cohort, tables: &[TableGroup]) -> Result<(DMatrix<f64>, Vec<String>)> {
    let ids: Vec<&str> = cohort.records().map(|(id, _)| id).collect();
    let mut loaded = Vec::with_capacity(tables.len());
    for &g in tables {
        let t = cohort
            .table(g)
            .ok_or_else(|| Error::missing(format!("{g} predictions"), ids.iter().map(|s| s.to_string()).collect()))?;
        loaded.push(t);
    }
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| loaded.iter().any(|t| t.row(id).is_none()))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        let names: Vec<&str> = tables.iter().map(|g| g.as_str()).collect();
        return Err(Error::missing(format!("{} predictions", names.join("+")), missing));
    }
    let column_ids: Vec<String> = loaded.iter().flat_map(|t| t.column_ids().iter().cloned()).collect();
    let width = column_ids.len();
    let mut data = Vec::with_capacity(ids.len() * width);
    for id in &ids {
        for t in &loaded {
            data.extend_from_slice(t.row(id).expect("checked above"));
        }
    }
    Ok((DMatrix::from_row_slice(ids.len(), width, &data), column_ids))
}

/// Docking energies (and MW when the group uses it) for every record.
fn fixed_block(cohort: &Cohort, spec: &FeatureGroupSpec) -> Result<DMatrix<f64>> {
    let width = if spec.group.uses_mw() { 3 } else { 2 };
    let mut data = Vec::with_capacity(cohort.len() * width);
    let mut no_scores = Vec::new();
    let mut no_mw = Vec::new();
    for (id, rec) in cohort.records() {
        match rec.filter_results.get(&spec.rmsd_mode.mode) {
            Some(fr) => {
                data.push(fr.energy(ScoringFunction::Smina));
                data.push(fr.energy(ScoringFunction::Vinardo));
            }
            None => {
                no_scores.push(id.to_string());
                data.extend([0.0, 0.0]);
            }
        }
        if spec.group.uses_mw() {
            match rec.molecular_weight() {
                Some(mw) => data.push(mw),
                None => {
                    no_mw.push(id.to_string());
                    data.push(0.0);
                }
            }
        }
    }
    if !no_scores.is_empty() {
        return Err(Error::missing(
            format!("docking scores ({})", spec.rmsd_mode.mode.tag()),
            no_scores,
        ));
    }
    if !no_mw.is_empty() {
        return Err(Error::missing("mw", no_mw));
    }
    Ok(DMatrix::from_row_slice(cohort.len(), width, &data))
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Build the feature matrix of `spec` for every record of `cohort`, in
/// complex-id order. PCA groups need a basis fitted on the group's tables.
pub fn assemble_features(cohort: &Cohort, spec: &FeatureGroupSpec, pca: Option<&PcaBasis>) -> Result<FeatureMatrix> {
    spec.validate()?;
    let complex_ids: Vec<String> = cohort.records().map(|(id, _)| id.to_string()).collect();
    let labels: Vec<f64> = cohort.records().map(|(_, r)| r.label.value).collect();
    let fixed = fixed_block(cohort, spec)?;
    let mut column_names = spec.group.fixed_columns();
    let extra = if let Some(source) = spec.group.pca_source() {
        let basis = pca.ok_or_else(|| Error::invalid(format!("group {} needs a PCA basis", spec.group)))?;
        if basis.source_group != source {
            return Err(Error::Schema(format!(
                "PCA basis was fitted on {:?}, group {} needs {:?}",
                basis.source_group, spec.group, source
            )));
        }
        let k = spec.pc_count.expect("validated");
        let (block, ids) = prediction_block(cohort, spec.group.tables())?;
        if ids != basis.column_ids {
            return Err(Error::Schema(format!(
                "prediction columns do not match the PCA basis ({} vs {} columns)",
                ids.len(),
                basis.column_ids.len()
            )));
        }
        column_names.extend((1..=k).map(|i| format!("pc{i}")));
        if cohort.is_empty() {
            DMatrix::zeros(0, k)
        } else {
            project(basis, &block, k)?
        }
    } else if spec.group.tables().is_empty() {
        DMatrix::zeros(cohort.len(), 0)
    } else {
        let g = spec.group.tables()[0];
        let table = cohort
            .table(g)
            .ok_or_else(|| Error::missing(format!("{g} predictions"), complex_ids.clone()))?;
        let missing: Vec<String> = complex_ids.iter().filter(|id| table.row(id).is_none()).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::missing(format!("{g} predictions"), missing));
        }
        let means = dl_mean_scores(table, architecture_key)?;
        column_names.extend(means.column_ids().iter().cloned());
        let width = means.n_cols();
        let mut data = Vec::with_capacity(complex_ids.len() * width);
        for id in &complex_ids {
            data.extend_from_slice(means.row(id).expect("checked above"));
        }
        DMatrix::from_row_slice(complex_ids.len(), width, &data)
    };
    let values = hcat(&[&fixed, &extra]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite feature value".into()));
    }
    Ok(FeatureMatrix {
        complex_ids,
        column_names,
        values,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_rmsd::{Cutoff, FilterMode};

    #[test]
    fn group_names_parse() {
        for g in FeatureGroup::ALL {
            assert_eq!(g.as_str().parse::<FeatureGroup>().unwrap(), g);
            assert_eq!(serde_json::to_string(&g).unwrap(), format!("\"{g}\""));
        }
        assert_eq!("ED_A_P".parse::<FeatureGroup>().unwrap(), FeatureGroup::EDAP);
        assert_eq!("ed1f".parse::<FeatureGroup>().unwrap(), FeatureGroup::ED1F);
        assert!("EDX".parse::<FeatureGroup>().is_err());
    }

    #[test]
    fn means_per_architecture() {
        let cols = ["D1|a|r1", "D1|a|r2", "D1|b|r1", "D1|b|r2"].map(String::from).to_vec();
        let mut t = BasePredictionTable::new(TableGroup::D1, cols).unwrap();
        t.push_row("x", vec![1.0, 3.0, 10.0, 20.0]).unwrap();
        let m = dl_mean_scores(&t, architecture_key).unwrap();
        assert_eq!(m.column_ids(), ["D1|a", "D1|b"]);
        assert_eq!(m.row("x").unwrap(), [2.0, 15.0]);
        let single = dl_mean_scores(&t, |c| c.to_string()).unwrap();
        assert_eq!(single.row("x").unwrap(), [1.0, 3.0, 10.0, 20.0]);
    }

    #[test]
    fn spec_requires_pc_count_for_pca_groups() {
        let mode = RmsdFilterMode::new(FilterMode::Consensus, Cutoff::Unfiltered);
        assert!(FeatureGroupSpec::new(FeatureGroup::EDAP, mode, None).is_err());
        assert!(FeatureGroupSpec::new(FeatureGroup::E, mode, Some(2)).is_err());
        let spec = FeatureGroupSpec::new(FeatureGroup::ED2F, mode, None).unwrap();
        assert_eq!(spec.cell_name(), "ED2-F_VvS_101.0");
    }
}
