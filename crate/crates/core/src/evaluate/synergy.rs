use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Predictor families compared per complex. Declaration order is the
/// tie-break priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SynergyGroup {
    Meta,
    Dl,
    Dock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyPartition {
    pub counts: BTreeMap<SynergyGroup, usize>,
    pub assignment: BTreeMap<String, SynergyGroup>,
}

/// Assign each complex to the family with the smallest absolute error.
pub fn synergy_partition(abs_errors: &BTreeMap<String, BTreeMap<SynergyGroup, f64>>) -> Result<SynergyPartition> {
    synergy_partition_among(abs_errors, &[SynergyGroup::Meta, SynergyGroup::Dl, SynergyGroup::Dock])
}

/// As [`synergy_partition`], restricted to `groups`. Ties resolve to the
/// group earliest in META > DL > DOCK order.
pub fn synergy_partition_among(
    abs_errors: &BTreeMap<String, BTreeMap<SynergyGroup, f64>>,
    groups: &[SynergyGroup],
) -> Result<SynergyPartition> {
    if groups.is_empty() {
        return Err(Error::invalid("no synergy groups requested"));
    }
    let mut ordered = groups.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut counts: BTreeMap<SynergyGroup, usize> = ordered.iter().map(|g| (*g, 0)).collect();
    let mut assignment = BTreeMap::new();
    let mut missing = Vec::new();
    for (id, errs) in abs_errors {
        let mut best: Option<(SynergyGroup, f64)> = None;
        for g in &ordered {
            match errs.get(g) {
                Some(&e) if best.is_none_or(|(_, b)| e < b) => best = Some((*g, e)),
                Some(_) => {}
                None => {
                    missing.push(id.clone());
                    best = None;
                    break;
                }
            }
        }
        if let Some((g, _)) = best {
            *counts.get_mut(&g).expect("group registered") += 1;
            assignment.insert(id.clone(), g);
        }
    }
    if !missing.is_empty() {
        return Err(Error::missing("synergy group error", missing));
    }
    Ok(SynergyPartition { counts, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SynergyGroup::*;

    fn errs(rows: &[(&str, f64, f64, f64)]) -> BTreeMap<String, BTreeMap<SynergyGroup, f64>> {
        rows.iter()
            .map(|(id, m, d, k)| (id.to_string(), [(Meta, *m), (Dl, *d), (Dock, *k)].into()))
            .collect()
    }

    #[test]
    fn winner_is_minimum() {
        let p = synergy_partition(&errs(&[("a", 0.1, 0.2, 0.3), ("b", 0.5, 0.2, 0.3), ("c", 0.5, 0.4, 0.3)])).unwrap();
        assert_eq!(p.assignment["a"], Meta);
        assert_eq!(p.assignment["b"], Dl);
        assert_eq!(p.assignment["c"], Dock);
        assert_eq!(p.counts.values().sum::<usize>(), 3);
    }

    #[test]
    fn ties_follow_priority() {
        let p = synergy_partition(&errs(&[("a", 0.2, 0.2, 0.2), ("b", 0.5, 0.3, 0.3)])).unwrap();
        assert_eq!(p.assignment["a"], Meta);
        assert_eq!(p.assignment["b"], Dl);
    }

    #[test]
    fn two_group_variant_and_missing() {
        let e = errs(&[("a", 0.0, 0.2, 0.1), ("b", 0.0, 0.1, 0.2)]);
        let p = synergy_partition_among(&e, &[Dock, Dl]).unwrap();
        assert_eq!(p.counts[&Dock], 1);
        assert_eq!(p.counts[&Dl], 1);
        assert!(!p.counts.contains_key(&Meta));
        let mut bad = e.clone();
        bad.get_mut("a").unwrap().remove(&Dl);
        assert!(synergy_partition(&bad).is_err());
    }
}
