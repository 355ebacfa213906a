//! Shared fixtures: a synthetic dataset on disk and a runner for the binary.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affistack::pipeline::synthetic::{SyntheticConfig, SyntheticDataset, ARCHITECTURES};

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub dataset: SyntheticDataset,
}

impl Fixture {
    /// Write `config` to disk with a run config covering the given matrix.
    pub fn new(config: &SyntheticConfig, groups: &[&str], algorithms: &[&str], modes: &[&str], cutoffs: &[&str]) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let dataset = SyntheticDataset::generate(config).expect("synthetic data");
        dataset.write_to_dir(&dir.path().join("data")).expect("write data");
        let fixture = Fixture { dir, dataset };
        fixture.write_config("config.toml", groups, algorithms, modes, cutoffs, "");
        fixture
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> PathBuf {
        self.path().join("config.toml")
    }

    pub fn write_config(&self, name: &str, groups: &[&str], algorithms: &[&str], modes: &[&str], cutoffs: &[&str], extra: &str) {
        let list = |v: &[&str]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
        let mut text = String::from(
            "labels = \"data/labels.tsv\"\npartitions = \"data/partitions.tsv\"\nposes_dir = \"data/poses\"\nligands_dir = \"data/ligands\"\nseed = 1701\n",
        );
        text.push_str(extra);
        text.push_str("\n[score_tables]\n");
        for (g, _) in ARCHITECTURES {
            let _ = writeln!(text, "\"{g}\" = \"data/tables/{g}.tsv\"");
        }
        let _ = write!(
            text,
            "\n[matrix]\ngroups = [{}]\nalgorithms = [{}]\nmodes = [{}]\ncutoffs = [{}]\n",
            list(groups),
            list(algorithms),
            list(modes),
            list(cutoffs)
        );
        std::fs::write(self.path().join(name), text).expect("write config");
    }
}

pub fn small_config() -> SyntheticConfig {
    SyntheticConfig {
        n_train: 60,
        n_core: 20,
        instances_per_architecture: 3,
        ..SyntheticConfig::default()
    }
}

pub fn affistack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affistack"))
        .args(args)
        .env("AFFISTACK_LOG", "error")
        .output()
        .expect("run affistack")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = affistack(args);
    assert!(
        out.status.success(),
        "affistack {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}
