//! Seeded synthetic cohorts with a known affinity model.
//!
//! Each complex has a latent affinity `z`. Deep-learning instance columns are
//! `z` plus architecture bias, architecture noise and instance noise; docking
//! energies are noisy linear functions of `z`. The label is
//! `0.6 * mean(D1F, D2F, D3 columns) + 0.3 * smina + noise`, where `smina` is the
//! rank-0 SMINA energy. Poses are rigid translations of the ligand, so their
//! RMSD to the ligand is controlled directly.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ingest::{
    write_score_table, write_sdf, AffinityLabel, AssayMethod, Atom, BasePredictionTable, Cohort, ComplexRecord,
    MeasureKind, Molecule, Partition, PoseSet, ScoringFunction, TableGroup, ENERGY_PROPERTY,
};
use crate::pose_rmsd::{filter_complex, FilterMode};
use crate::seed;
use crate::Result;

/// Architectures per prediction table.
pub const ARCHITECTURES: [(TableGroup, usize); 5] = [
    (TableGroup::D1, 6),
    (TableGroup::D2, 6),
    (TableGroup::D3, 10),
    (TableGroup::D1F, 6),
    (TableGroup::D2F, 6),
];

/// Tables whose column mean drives the label.
pub const LABEL_TABLES: [TableGroup; 3] = [TableGroup::D1F, TableGroup::D2F, TableGroup::D3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_core: usize,
    pub instances_per_architecture: usize,
    pub poses_per_tool: usize,
    pub label_noise: f64,
    /// Probability that one docking tool produced no poses.
    pub failure_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_train: 400,
            n_core: 100,
            instances_per_architecture: 50,
            poses_per_tool: 9,
            label_noise: 0.5,
            failure_rate: 0.02,
            seed: 1701,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticComplex {
    pub label: AffinityLabel,
    pub partition: Partition,
    pub ligand: Molecule,
    /// Ranked `(energy, pose)` lists; empty when the tool failed.
    pub smina: Vec<(f64, Molecule)>,
    pub vinardo: Vec<(f64, Molecule)>,
    /// Mean of the label tables' instance columns.
    pub dl_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub complexes: Vec<SyntheticComplex>,
    pub tables: Vec<BasePredictionTable>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [normal(rng), normal(rng), normal(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_ligand(id: &str, rng: &mut ChaCha8Rng) -> Molecule {
    let n_heavy = rng.random_range(6..=14);
    let mut atoms = Vec::new();
    let mut at = [0.0f64; 3];
    for _ in 0..n_heavy {
        let u: f64 = rng.random();
        let element = if u < 0.7 {
            "C"
        } else if u < 0.85 {
            "N"
        } else {
            "O"
        };
        let pos = at.map(round4);
        atoms.push(Atom::new(element, pos).expect("known element"));
        if element == "C" {
            for _ in 0..rng.random_range(0..=2) {
                let d = random_direction(rng);
                let h = [pos[0] + d[0], pos[1] + d[1], pos[2] + d[2]].map(round4);
                atoms.push(Atom::new("H", h).expect("known element"));
            }
        }
        let d = random_direction(rng);
        at = [at[0] + 1.5 * d[0], at[1] + 1.5 * d[1], at[2] + 1.5 * d[2]];
    }
    Molecule::new(id, atoms).expect("has heavy atoms")
}

fn poses(
    ligand: &Molecule,
    tool: ScoringFunction,
    best_energy: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, Molecule)> {
    let mut energy = best_energy;
    (0..count)
        .map(|rank| {
            if rank > 0 {
                energy += rng.random_range(0.0..0.6);
            }
            let near = if rank == 0 { 0.75 } else { 0.5 };
            let dist = if rng.random::<f64>() < near {
                rng.random_range(0.0..2.0)
            } else {
                rng.random_range(3.5..7.0)
            };
            let d = random_direction(rng);
            let mut pose = ligand.translated([d[0] * dist, d[1] * dist, d[2] * dist].map(round4));
            pose.source_id = format!("{}_{}_{rank}", ligand.source_id, tool);
            let e = (energy * 1000.0).round() / 1000.0;
            pose.properties.insert(ENERGY_PROPERTY.to_string(), e.to_string());
            (e, pose)
        })
        .collect()
}

impl SyntheticDataset {
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        let n = config.n_train + config.n_core;
        let mut rng = seed::derived_rng(config.seed, "synthetic", 0);
        let ids: Vec<String> = (0..n).map(|i| format!("s{i:04}")).collect();
        let latent: Vec<f64> = (0..n).map(|_| -15.0 + 3.0 * normal(&mut rng)).collect();

        let mut tables = Vec::new();
        let mut label_sum = vec![0.0; n];
        let mut label_cols = 0usize;
        for (group, n_arch) in ARCHITECTURES {
            let k = config.instances_per_architecture;
            let columns: Vec<String> = (0..n_arch)
                .flat_map(|a| (0..k).map(move |i| format!("{group}|arch{a}|rep{}|fold{}", i / 5, i % 5)))
                .collect();
            let bias: Vec<f64> = (0..n_arch).map(|_| 0.5 * normal(&mut rng)).collect();
            let mut table = BasePredictionTable::new(group, columns)?;
            for (row, id) in ids.iter().enumerate() {
                let mut values = Vec::with_capacity(n_arch * k);
                for b in &bias {
                    let shared = normal(&mut rng);
                    for _ in 0..k {
                        let v = latent[row] + b + shared + normal(&mut rng);
                        values.push((v * 1e6).round() / 1e6);
                    }
                }
                if LABEL_TABLES.contains(&group) {
                    label_sum[row] += values.iter().sum::<f64>();
                }
                table.push_row(id.clone(), values)?;
            }
            if LABEL_TABLES.contains(&group) {
                label_cols += n_arch * k;
            }
            tables.push(table);
        }

        let mut complexes = Vec::with_capacity(n);
        for (row, id) in ids.iter().enumerate() {
            let z = latent[row];
            let ligand = random_ligand(id, &mut rng);
            let smina_best = 0.4 * z - 2.0 + normal(&mut rng);
            let vinardo_best = 0.4 * z - 1.5 + normal(&mut rng);
            let mut smina = poses(&ligand, ScoringFunction::Smina, smina_best, config.poses_per_tool, &mut rng);
            let mut vinardo = poses(&ligand, ScoringFunction::Vinardo, vinardo_best, config.poses_per_tool, &mut rng);
            let smina_score = smina[0].0;
            let failure: f64 = rng.random();
            if failure < config.failure_rate / 2.0 {
                smina.clear();
            } else if failure < config.failure_rate {
                vinardo.clear();
            }
            let dl_mean = label_sum[row] / label_cols as f64;
            let value = 0.6 * dl_mean + 0.3 * smina_score + config.label_noise * normal(&mut rng);
            let label = AffinityLabel {
                complex_id: id.clone(),
                value: (value * 1e6).round() / 1e6,
                measure_kind: if row % 2 == 0 { MeasureKind::Kd } else { MeasureKind::Ki },
                assay_method: Some(AssayMethod::XRay),
                year: Some(2005 + (row % 15) as i32),
            };
            complexes.push(SyntheticComplex {
                label,
                partition: if row < config.n_train {
                    Partition::Train
                } else {
                    Partition::CoreSet
                },
                ligand,
                smina,
                vinardo,
                dl_mean,
            });
        }
        Ok(SyntheticDataset {
            config: config.clone(),
            complexes,
            tables,
        })
    }

    /// In-memory cohort with ligands, poses, tables and filter results for
    /// both filter modes.
    pub fn cohort(&self) -> Result<Cohort> {
        let mut cohort = Cohort::default();
        for c in &self.complexes {
            let id = &c.label.complex_id;
            let mut rec = ComplexRecord::new(c.label.clone(), c.partition);
            rec.set_ligand(c.ligand.clone())?;
            rec.experimental_pose = Some(c.ligand.clone());
            let set = |tool, poses: &Vec<(f64, Molecule)>| {
                if poses.is_empty() {
                    Ok(PoseSet::failed(id.clone(), tool))
                } else {
                    PoseSet::new(id.clone(), tool, poses.clone())
                }
            };
            let smina = set(ScoringFunction::Smina, &c.smina)?;
            let vinardo = set(ScoringFunction::Vinardo, &c.vinardo)?;
            for mode in [FilterMode::Experimental, FilterMode::Consensus] {
                let fr = filter_complex(mode, &smina, &vinardo, Some(&c.ligand))?;
                rec.filter_results.insert(mode, fr);
            }
            rec.pose_sets.insert(ScoringFunction::Smina, smina);
            rec.pose_sets.insert(ScoringFunction::Vinardo, vinardo);
            cohort.insert(rec)?;
        }
        for t in &self.tables {
            cohort.add_table(t.clone());
        }
        Ok(cohort)
    }

    /// Write the dataset as input files:
    /// `labels.tsv`, `partitions.tsv`, `poses/<id>_{smina,vinardo}.sdf`,
    /// `ligands/<id>_ligand.sdf` and `tables/<group>.tsv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("poses"))?;
        fs::create_dir_all(dir.join("ligands"))?;
        fs::create_dir_all(dir.join("tables"))?;
        let mut labels = String::from("complex_id\tln_affinity\tmeasure_kind\tassay_method\tyear\n");
        let mut partitions = String::from("complex_id\tpartition\n");
        for c in &self.complexes {
            let l = &c.label;
            let kind = match l.measure_kind {
                MeasureKind::Kd => "Kd",
                MeasureKind::Ki => "Ki",
                MeasureKind::IC50 => "IC50",
                MeasureKind::Unknown => "",
            };
            let year = l.year.map(|y| y.to_string()).unwrap_or_default();
            labels.push_str(&format!("{}\t{}\t{kind}\tXRAY\t{year}\n", l.complex_id, l.value));
            partitions.push_str(&format!("{}\t{}\n", l.complex_id, c.partition));
            let id = &l.complex_id;
            let mols = |poses: &Vec<(f64, Molecule)>| poses.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>();
            fs::write(dir.join("poses").join(format!("{id}_smina.sdf")), write_sdf(&mols(&c.smina)))?;
            fs::write(dir.join("poses").join(format!("{id}_vinardo.sdf")), write_sdf(&mols(&c.vinardo)))?;
            fs::write(
                dir.join("ligands").join(format!("{id}_ligand.sdf")),
                write_sdf(std::slice::from_ref(&c.ligand)),
            )?;
        }
        fs::write(dir.join("labels.tsv"), labels)?;
        fs::write(dir.join("partitions.tsv"), partitions)?;
        for t in &self.tables {
            fs::write(dir.join("tables").join(format!("{}.tsv", t.group)), write_score_table(t))?;
        }
        Ok(())
    }
}
