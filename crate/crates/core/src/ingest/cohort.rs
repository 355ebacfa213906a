use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use super::molecule::{molecular_weight, Molecule};
use super::poses::{PoseSet, ScoringFunction};
use super::tables::{
    AffinityLabel, AssayMethod, BasePredictionTable, MeasureKind, Partition, TableGroup,
};
use crate::pose_rmsd::{FilterMode, FilterResult};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ComplexRecord {
    pub label: AffinityLabel,
    pub partition: Partition,
    pub ligand: Option<Molecule>,
    pub experimental_pose: Option<Molecule>,
    pub pose_sets: BTreeMap<ScoringFunction, PoseSet>,
    pub filter_results: BTreeMap<FilterMode, FilterResult>,
    mw: Option<f64>,
}

impl ComplexRecord {
    pub fn new(label: AffinityLabel, partition: Partition) -> Self {
        ComplexRecord {
            label,
            partition,
            ligand: None,
            experimental_pose: None,
            pose_sets: BTreeMap::new(),
            filter_results: BTreeMap::new(),
            mw: None,
        }
    }

    /// Attach the ligand structure and cache its molecular weight.
    pub fn set_ligand(&mut self, ligand: Molecule) -> Result<()> {
        self.mw = Some(molecular_weight(&ligand)?);
        self.ligand = Some(ligand);
        Ok(())
    }

    pub fn set_molecular_weight(&mut self, mw: f64) {
        self.mw = Some(mw);
    }

    /// Molecular weight of the ligand, falling back to the experimental pose.
    pub fn molecular_weight(&self) -> Option<f64> {
        self.mw.or_else(|| {
            self.experimental_pose
                .as_ref()
                .and_then(|m| molecular_weight(m).ok())
        })
    }
}

/// Complexes keyed by id plus the base-prediction tables they draw from.
/// Iteration is in lexicographic id order.
#[derive(Debug, Clone, Default)]
pub struct Cohort {
    records: BTreeMap<String, ComplexRecord>,
    tables: BTreeMap<TableGroup, Arc<BasePredictionTable>>,
}

impl Cohort {
    /// Build records from labels and partition tags; every label needs a tag
    /// and vice versa.
    pub fn from_labels(labels: Vec<AffinityLabel>, partitions: &BTreeMap<String, Partition>) -> Result<Self> {
        let mut records = BTreeMap::new();
        let mut untagged = Vec::new();
        for label in labels {
            match partitions.get(&label.complex_id) {
                Some(&p) => {
                    let id = label.complex_id.clone();
                    if records.insert(id.clone(), ComplexRecord::new(label, p)).is_some() {
                        return Err(Error::invalid(format!("duplicate complex id `{id}`")));
                    }
                }
                None => untagged.push(label.complex_id),
            }
        }
        if !untagged.is_empty() {
            return Err(Error::missing("partition tag", untagged));
        }
        let unlabeled: Vec<String> = partitions
            .keys()
            .filter(|id| !records.contains_key(*id))
            .cloned()
            .collect();
        if !unlabeled.is_empty() {
            return Err(Error::missing("affinity label", unlabeled));
        }
        Ok(Cohort {
            records,
            tables: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, record: ComplexRecord) -> Result<()> {
        let id = record.label.complex_id.clone();
        if self.records.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate complex id `{id}`")));
        }
        self.records.insert(id, record);
        Ok(())
    }

    pub fn add_table(&mut self, table: BasePredictionTable) {
        self.tables.insert(table.group, Arc::new(table));
    }

    pub fn table(&self, group: TableGroup) -> Option<&BasePredictionTable> {
        self.tables.get(&group).map(Arc::as_ref)
    }

    pub fn tables(&self) -> impl Iterator<Item = &BasePredictionTable> {
        self.tables.values().map(Arc::as_ref)
    }

    pub fn get(&self, id: &str) -> Option<&ComplexRecord> {
        self.records.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut ComplexRecord> {
        self.records.get_mut(id)
    }

    pub fn records(&self) -> impl Iterator<Item = (&str, &ComplexRecord)> {
        self.records.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn records_mut(&mut self) -> impl Iterator<Item = (&str, &mut ComplexRecord)> {
        self.records.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ids of one partition, sorted.
    pub fn ids_in(&self, partition: Partition) -> Vec<String> {
        self.records
            .iter()
            .filter(|(_, r)| r.partition == partition)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.records.values().filter(|r| r.partition == partition).count()
    }

    /// Copy of the cohort keeping records for which `keep` returns true.
    /// Tables are shared, not copied.
    pub fn filter_records(&self, mut keep: impl FnMut(&str, &ComplexRecord) -> bool) -> Cohort {
        Cohort {
            records: self
                .records
                .iter()
                .filter(|(k, v)| keep(k, v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            tables: self.tables.clone(),
        }
    }

    /// Restrict to the given partition.
    pub fn partition(&self, partition: Partition) -> Cohort {
        self.filter_records(|_, r| r.partition == partition)
    }

    /// Attach filter results; ids without a record are ignored.
    pub fn attach_filter_results(&mut self, results: impl IntoIterator<Item = FilterResult>) {
        for fr in results {
            if let Some(rec) = self.records.get_mut(&fr.complex_id) {
                rec.filter_results.insert(fr.mode, fr);
            }
        }
    }

    /// Ids of `partition` missing a row in any of `groups`.
    pub fn missing_table_rows(&self, partition: Partition, groups: &[TableGroup]) -> Vec<String> {
        let mut missing = Vec::new();
        for (id, rec) in &self.records {
            if rec.partition != partition {
                continue;
            }
            let covered = groups
                .iter()
                .all(|g| self.table(*g).is_some_and(|t| t.row(id).is_some()));
            if !covered {
                missing.push(id.clone());
            }
        }
        missing
    }
}

/// Per-complex predicted affinities from the two docking tools.
pub type DockingScores = HashMap<String, (f64, f64)>;

/// Cohort selection rules for the external general-set benchmark, applied in
/// order: exclusion list, NMR assays, IC50 measures, publication year after
/// 2000, and zero docking scores. Missing metadata fails the rule it feeds.
pub fn filter_general_set(
    labels: &[AffinityLabel],
    exclusions: &HashSet<String>,
    docking: &DockingScores,
) -> Vec<String> {
    labels
        .iter()
        .filter(|l| !exclusions.contains(&l.complex_id))
        .filter(|l| matches!(l.assay_method, Some(m) if m != AssayMethod::Nmr))
        .filter(|l| matches!(l.measure_kind, MeasureKind::Kd | MeasureKind::Ki))
        .filter(|l| matches!(l.year, Some(y) if y > 2000))
        .filter(|l| match docking.get(&l.complex_id) {
            Some(&(smina, vinardo)) => smina != 0.0 && vinardo != 0.0,
            None => false,
        })
        .map(|l| l.complex_id.clone())
        .collect()
}
