use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::elements;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Canonical element symbol, e.g. "C", "Cl".
    pub element: String,
    /// Cartesian coordinates in Angstroms.
    pub position: [f64; 3],
}

impl Atom {
    /// Build an atom, validating the element symbol and coordinates.
    pub fn new(element: &str, position: [f64; 3]) -> Result<Self> {
        let element = elements::normalize_symbol(element)
            .ok_or_else(|| Error::UnknownElement(element.trim().to_string()))?;
        if position.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate for {element} atom"
            )));
        }
        Ok(Atom {
            element: element.to_string(),
            position,
        })
    }

    pub fn is_hydrogen(&self) -> bool {
        elements::is_hydrogen(&self.element)
    }

    pub fn squared_distance(&self, other: &Atom) -> f64 {
        let d0 = self.position[0] - other.position[0];
        let d1 = self.position[1] - other.position[1];
        let d2 = self.position[2] - other.position[2];
        d0 * d0 + d1 * d1 + d2 * d2
    }
}

/// A ligand structure as parsed from one SDF record. Hydrogens are kept in
/// `atoms` (they count towards molecular weight) and skipped by
/// [`Molecule::heavy_atoms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub source_id: String,
    atoms: Vec<Atom>,
    /// SDF data items (`> <name>` blocks), in file order by name.
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

impl Molecule {
    pub fn new(source_id: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        let source_id = source_id.into();
        if !atoms.iter().any(|a| !a.is_hydrogen()) {
            return Err(Error::invalid(format!(
                "molecule `{source_id}` has no heavy atoms"
            )));
        }
        Ok(Molecule {
            source_id,
            atoms,
            properties: BTreeMap::new(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn heavy_atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.atoms.iter().filter(|a| !a.is_hydrogen())
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.heavy_atoms().count()
    }

    /// Rigidly shift every atom by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Molecule {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            for (c, o) in atom.position.iter_mut().zip(offset) {
                *c += o;
            }
        }
        out
    }
}

/// Sum of standard atomic weights over all explicit atoms, hydrogens included.
pub fn molecular_weight(molecule: &Molecule) -> Result<f64> {
    molecule.atoms.iter().try_fold(0.0, |acc, atom| {
        elements::atomic_weight(&atom.element)
            .map(|w| acc + w)
            .ok_or_else(|| Error::UnknownElement(atom.element.clone()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mol(elements: &[&str]) -> Molecule {
        let atoms = elements
            .iter()
            .enumerate()
            .map(|(i, e)| Atom::new(e, [i as f64, 0.0, 0.0]).unwrap())
            .collect();
        Molecule::new("m", atoms).unwrap()
    }

    #[test]
    fn weight_of_single_carbon() {
        assert_eq!(molecular_weight(&mol(&["C"])).unwrap(), 12.011);
    }

    #[test]
    fn weight_of_water_and_benzene() {
        assert_abs_diff_eq!(molecular_weight(&mol(&["O", "H", "H"])).unwrap(), 18.015, epsilon = 1e-3);
        let benzene = ["C", "C", "C", "C", "C", "C", "H", "H", "H", "H", "H", "H"];
        assert_abs_diff_eq!(molecular_weight(&mol(&benzene)).unwrap(), 78.11, epsilon = 1e-2);
    }

    #[test]
    fn heavy_atoms_exclude_hydrogen() {
        let water = mol(&["O", "H", "H"]);
        assert_eq!(water.atoms().len(), 3);
        assert_eq!(water.heavy_atom_count(), 1);
    }

    #[test]
    fn rejects_hydrogen_only_and_unknown_elements() {
        let h2 = vec![Atom::new("H", [0.0; 3]).unwrap(), Atom::new("H", [1.0, 0.0, 0.0]).unwrap()];
        assert!(Molecule::new("h2", h2).is_err());
        assert!(matches!(Atom::new("Qq", [0.0; 3]), Err(Error::UnknownElement(_))));
        assert!(Atom::new("C", [f64::NAN, 0.0, 0.0]).is_err());
    }
}
