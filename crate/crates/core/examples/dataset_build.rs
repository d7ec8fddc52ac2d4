//! Writes a small augmented dataset (two scenarios, coarse crop stride) and
//! reads one sample back.

use std::path::PathBuf;

use dtc_core::dataset::{self, DatasetConfig};

fn main() -> dtc_core::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dtc_dataset"));
    let cfg = DatasetConfig {
        n_scenarios: 2,
        crop_stride: 30,
        test_fraction: 0.5,
        ..DatasetConfig::default()
    };
    let manifest = dataset::write_dataset(&dir, &cfg, 42)?;
    println!(
        "{} samples ({} per scenario) in {}: train {} / val {} / test {}",
        manifest.sample_count,
        cfg.samples_per_scenario(),
        dir.display(),
        manifest.splits.train,
        manifest.splits.val,
        manifest.splits.test
    );
    let entry = &manifest.samples[5];
    let s = dataset::read_sample(dir.join("samples").join(&entry.file))?;
    println!(
        "{}: scenario {} offset {:?} rotation {} UT cell {:?} paths {}",
        entry.file, s.meta.scenario, s.meta.crop_offset, s.meta.rotation_deg, s.meta.ut_cell, s.meta.path_count
    );
    Ok(())
}
