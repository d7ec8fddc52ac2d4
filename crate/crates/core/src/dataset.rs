//! Dataset construction: per-scenario full-grid labels, 64×64 crops at
//! stride 4, four rotations, one UT per augmented crop, a scenario-held-out
//! 7:1:2 split, and the checksummed sample container.
//!
//! Rotations follow the `rot90` convention with rows as the first index:
//! one quarter turn maps `out[r][c] = in[c][n−1−r]`. In scene coordinates
//! (columns along x, rows along y) that is `(x, y) → (y, −x)`, so rotated CSI
//! labels are synthesized with every departure azimuth shifted by `−π/2` per
//! quarter turn.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envfeat::{self, FeatureKind, FeatureMap};
use crate::formats::{self, Reader};
use crate::pilot::{self, PilotMask, PilotPattern};
use crate::raychan::{self, ArrayConfig, CsiMatrix, OfdmConfig, PathLossMap, SynthConfig};
use crate::rng::{self, Domain};
use crate::scene::{self, ScenarioConfig, Scene};
use crate::{Error, Result};

pub const FORMAT_VERSION: u16 = 1;
pub const SAMPLE_MAGIC: &[u8; 4] = b"DTCS";
const SECTION_COUNT: u16 = 8;

/// Row-major `size × size` sub-grids at offsets `(stride·i, stride·j)`.
pub fn crop_offsets(rows: usize, cols: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if stride == 0
        || size > rows
        || size > cols
        || !(rows - size).is_multiple_of(stride)
        || !(cols - size).is_multiple_of(stride)
    {
        return Err(Error::LayoutMismatch(format!(
            "{size}x{size} crops at stride {stride} do not tile {rows}x{cols}"
        )));
    }
    let per_r = (rows - size) / stride + 1;
    let per_c = (cols - size) / stride + 1;
    Ok((0..per_r)
        .flat_map(|i| (0..per_c).map(move |j| (i * stride, j * stride)))
        .collect())
}

pub fn crop<T: Clone>(map: &Array2<T>, offset: (usize, usize), size: usize) -> Array2<T> {
    map.slice(s![offset.0..offset.0 + size, offset.1..offset.1 + size])
        .to_owned()
}

/// All crops of `map`, in [`crop_offsets`] order.
pub fn crop_grid<T: Clone>(map: &Array2<T>, size: usize, stride: usize) -> Result<Vec<Array2<T>>> {
    let (r, c) = map.dim();
    Ok(crop_offsets(r, c, size, stride)?
        .into_iter()
        .map(|o| crop(map, o, size))
        .collect())
}

/// Source index of output pixel `(r, c)` after `quarter_turns` rotations of an
/// `n × n` grid.
pub fn rotate_index(r: usize, c: usize, n: usize, quarter_turns: u8) -> (usize, usize) {
    match quarter_turns % 4 {
        0 => (r, c),
        1 => (c, n - 1 - r),
        2 => (n - 1 - r, n - 1 - c),
        _ => (n - 1 - c, r),
    }
}

/// Destination of source pixel `(r, c)`; inverse of [`rotate_index`].
pub fn rotated_position(r: usize, c: usize, n: usize, quarter_turns: u8) -> (usize, usize) {
    rotate_index(r, c, n, (4 - quarter_turns % 4) % 4)
}

pub fn rotate90<T: Clone>(map: &Array2<T>, quarter_turns: u8) -> Result<Array2<T>> {
    let (rows, cols) = map.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch {
            expected: (rows, rows),
            found: (rows, cols),
        });
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| {
        map[rotate_index(r, c, rows, quarter_turns)].clone()
    }))
}

/// The 0°, 90°, 180° and 270° variants.
pub fn rotate_variants<T: Clone>(map: &Array2<T>) -> Result<[Array2<T>; 4]> {
    Ok([
        rotate90(map, 0)?,
        rotate90(map, 1)?,
        rotate90(map, 2)?,
        rotate90(map, 3)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Rotated samples get CSI synthesized from the rotated geometry.
    #[default]
    Consistent,
    /// Rotated samples reuse the CSI of the unrotated geometry.
    Unrotated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_scenarios: usize,
    pub scenario: ScenarioConfig,
    pub synth: SynthConfig,
    pub array: ArrayConfig,
    pub ofdm: OfdmConfig,
    pub crop_size: usize,
    pub crop_stride: usize,
    pub label_mode: LabelMode,
    pub pilot: PilotPattern,
    /// Fraction of scenarios held out for testing.
    pub test_fraction: f64,
    /// Train:val ratio among the remaining samples.
    pub train_val_ratio: [usize; 2],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_scenarios: 10,
            scenario: ScenarioConfig::default(),
            synth: SynthConfig::default(),
            array: ArrayConfig::default(),
            ofdm: OfdmConfig::default(),
            crop_size: 64,
            crop_stride: 4,
            label_mode: LabelMode::Consistent,
            pilot: PilotPattern::default(),
            test_fraction: 0.2,
            train_val_ratio: [7, 1],
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.synth.validate()?;
        self.array.validate()?;
        self.ofdm.validate()?;
        let g = &self.scenario.grid;
        crop_offsets(g.rows, g.cols, self.crop_size, self.crop_stride)?;
        if !(0.0..1.0).contains(&self.test_fraction) || self.train_val_ratio.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidConfig("bad split configuration".into()));
        }
        Ok(())
    }

    pub fn crops_per_scenario(&self) -> usize {
        let g = &self.scenario.grid;
        let per = |d: usize| (d - self.crop_size) / self.crop_stride + 1;
        per(g.rows) * per(g.cols)
    }

    pub fn samples_per_scenario(&self) -> usize {
        self.crops_per_scenario() * 4
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DatasetConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub index: usize,
    pub scenario: usize,
    /// Top-left cell of the crop in the full grid.
    pub crop_offset: [usize; 2],
    pub rotation_deg: u16,
    /// UT cell in the sample (cropped, rotated) frame.
    pub ut_cell: [usize; 2],
    /// UT cell in the full scenario grid.
    pub ut_cell_full: [usize; 2],
    pub master_seed: u64,
    pub label_mode: LabelMode,
    pub los_present: bool,
    pub path_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bs_map: FeatureMap,
    pub ut_map: FeatureMap,
    pub height_map: FeatureMap,
    pub pr_map: FeatureMap,
    pub pl_map: PathLossMap,
    pub csi: CsiMatrix,
    pub pilot_csi: CsiMatrix,
    pub meta: SampleMeta,
}

fn put_section(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&u32::try_from(payload.len()).expect("section fits in u32").to_le_bytes());
    out.extend_from_slice(payload);
}

impl Sample {
    /// Container layout: magic, `u16` version, `u16` section count, then per
    /// section a `u32` byte length and the payload (bs, ut, height, pr and pl
    /// maps, csi, pilot csi, JSON metadata), then a CRC-32 of all preceding
    /// bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SAMPLE_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&SECTION_COUNT.to_le_bytes());
        for m in [&self.bs_map, &self.ut_map, &self.height_map, &self.pr_map] {
            put_section(&mut out, &m.to_bytes());
        }
        put_section(&mut out, &self.pl_map.to_bytes());
        put_section(&mut out, &self.csi.to_bytes());
        put_section(&mut out, &self.pilot_csi.to_bytes());
        put_section(
            &mut out,
            serde_json::to_string(&self.meta).expect("meta serializes").as_bytes(),
        );
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader::new(bytes);
        rd.magic(SAMPLE_MAGIC)?;
        let at = rd.offset();
        let version = rd.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        let at = rd.offset();
        let count = rd.u16()?;
        if count != SECTION_COUNT {
            return Err(Error::format(
                at,
                format!("expected {SECTION_COUNT} sections, found {count}"),
            ));
        }
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = rd.u32()? as usize;
            let start = rd.offset();
            sections.push((start, rd.take(len)?));
        }
        let crc_at = rd.offset();
        let stored = rd.u32()?;
        rd.finish()?;
        if crc32fast::hash(&bytes[..crc_at]) != stored {
            return Err(Error::format(crc_at, "checksum mismatch"));
        }
        let at_section = |i: usize, e: Error| match e {
            Error::Format { offset, reason } => Error::format(sections[i].0 + offset, reason),
            other => other,
        };
        let map = |i: usize, kind| FeatureMap::from_bytes(kind, sections[i].1).map_err(|e| at_section(i, e));
        let meta: SampleMeta = serde_json::from_slice(sections[7].1)
            .map_err(|e| Error::format(sections[7].0, format!("metadata: {e}")))?;
        Ok(Sample {
            bs_map: map(0, FeatureKind::BsLocation)?,
            ut_map: map(1, FeatureKind::UtLocation)?,
            height_map: map(2, FeatureKind::Height)?,
            pr_map: map(3, FeatureKind::PenetrationRatio)?,
            pl_map: PathLossMap::from_bytes(sections[4].1).map_err(|e| at_section(4, e))?,
            csi: CsiMatrix::from_bytes(sections[5].1).map_err(|e| at_section(5, e))?,
            pilot_csi: CsiMatrix::from_bytes(sections[6].1).map_err(|e| at_section(6, e))?,
            meta,
        })
    }
}

pub fn write_sample(s: &Sample, path: impl AsRef<Path>) -> Result<()> {
    formats::write_atomic(path.as_ref(), &s.to_bytes())
}

pub fn read_sample(path: impl AsRef<Path>) -> Result<Sample> {
    Sample::from_bytes(&formats::read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub index: usize,
    pub scenario: usize,
    pub split: Split,
    pub file: String,
    /// CRC-32 of the encoded container.
    pub crc32: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub master_seed: u64,
    pub sample_count: usize,
    pub config: DatasetConfig,
    pub splits: SplitCounts,
    /// Split of each scenario's samples; train/val scenarios are listed as
    /// `train` because their samples are divided between the two.
    pub scenario_splits: Vec<Split>,
    pub test_scenarios: Vec<usize>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Receives samples in index order.
pub trait SampleSink {
    fn accept(&mut self, sample: &Sample, entry: &SampleEntry, encoded: &[u8]) -> Result<()>;
}

impl<F: FnMut(&Sample, &SampleEntry, &[u8]) -> Result<()>> SampleSink for F {
    fn accept(&mut self, sample: &Sample, entry: &SampleEntry, encoded: &[u8]) -> Result<()> {
        self(sample, entry, encoded)
    }
}

/// Writes each sample to `<dir>/samples/<file>`.
pub struct DirectorySink {
    pub dir: PathBuf,
}

impl SampleSink for DirectorySink {
    fn accept(&mut self, _: &Sample, entry: &SampleEntry, encoded: &[u8]) -> Result<()> {
        formats::write_atomic(&self.dir.join("samples").join(&entry.file), encoded)
    }
}

/// Sample-level split assignment: `round(test_fraction·n)` scenarios chosen by
/// a seeded shuffle are held out for test; the other scenarios' samples are
/// shuffled and divided train:val by `train_val_ratio`.
pub fn assign_splits(cfg: &DatasetConfig, master_seed: u64) -> (Vec<Split>, Vec<usize>, Vec<Split>) {
    let n = cfg.n_scenarios;
    let per = cfg.samples_per_scenario();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(master_seed, Domain::Split, 0));
    let n_test = (cfg.test_fraction * n as f64).round() as usize;
    let mut test: Vec<usize> = order[n - n_test..].to_vec();
    test.sort_unstable();
    let scenario_splits: Vec<Split> = (0..n)
        .map(|i| if test.contains(&i) { Split::Test } else { Split::Train })
        .collect();
    let mut pool: Vec<usize> = (0..n * per)
        .filter(|i| scenario_splits[i / per] != Split::Test)
        .collect();
    pool.shuffle(&mut rng::stream(master_seed, Domain::Split, 1));
    let [a, b] = cfg.train_val_ratio;
    let n_train = (pool.len() as f64 * a as f64 / (a + b) as f64).round() as usize;
    let mut per_sample = vec![Split::Test; n * per];
    for (k, &i) in pool.iter().enumerate() {
        per_sample[i] = if k < n_train { Split::Train } else { Split::Val };
    }
    (scenario_splits, test, per_sample)
}

/// Full-grid labels of one scenario.
pub struct ScenarioLabels {
    pub scene: Scene,
    pub pl: PathLossMap,
    pub height: Array2<f64>,
    pub pr: Array2<f64>,
    pub bs: Array2<f64>,
    pub valid: Array2<bool>,
}

impl ScenarioLabels {
    pub fn build(cfg: &DatasetConfig, master_seed: u64, scenario: usize) -> Result<Self> {
        let scene = scene::generate_scenario_indexed(&cfg.scenario, master_seed, scenario as u64)?;
        let pl = raychan::pl_map(&scene, &cfg.synth, &cfg.array, &cfg.ofdm)?;
        let height = envfeat::height_map(&scene).values;
        let pr = envfeat::penetration_ratio_map(&scene).values;
        let bs = envfeat::location_map(scene.bs, &scene.grid)?.values;
        let valid = scene::footprint_mask(&scene).mapv(|c| !c);
        Ok(ScenarioLabels {
            scene,
            pl,
            height,
            pr,
            bs,
            valid,
        })
    }
}

fn f32_map(m: Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v as f32 as f64)
}

/// Builds sample `index` of a scenario whose labels are already computed.
pub fn build_sample(
    cfg: &DatasetConfig,
    labels: &ScenarioLabels,
    mask: &PilotMask,
    master_seed: u64,
    scenario: usize,
    local: usize,
) -> Result<Sample> {
    let g = &labels.scene.grid;
    let n = cfg.crop_size;
    let offsets = crop_offsets(g.rows, g.cols, n, cfg.crop_stride)?;
    let offset = offsets[local / 4];
    let rot = (local % 4) as u8;
    let index = scenario * cfg.samples_per_scenario() + local;

    let valid = crop(&labels.valid, offset, n);
    let cells: Vec<(usize, usize)> = valid.indexed_iter().filter(|(_, &ok)| ok).map(|(ix, _)| ix).collect();
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut rng = rng::stream(master_seed, Domain::UtDraw, index as u64);
    let (ur, uc) = cells[rng.random_range(0..cells.len())];
    let full = (offset.0 + ur, offset.1 + uc);
    let ut = g.cell_center(full.0, full.1);

    let paths = raychan::trace_paths(&labels.scene, ut, &cfg.synth, &cfg.array)?;
    let label_paths = match cfg.label_mode {
        LabelMode::Consistent => paths.rotated(rot),
        LabelMode::Unrotated => paths.clone(),
    };
    let csi = raychan::assemble_csi(&label_paths, &cfg.array, &cfg.ofdm).quantized_f32();
    let pilot_csi = pilot::observe(&csi, mask, None)?;

    let prep = |m: &Array2<f64>| -> Result<Array2<f64>> { Ok(f32_map(rotate90(&crop(m, offset, n), rot)?)) };
    let mut ut_map = Array2::zeros((n, n));
    let ut_cell = rotated_position(ur, uc, n, rot);
    ut_map[ut_cell] = 1.0;
    Ok(Sample {
        bs_map: FeatureMap {
            kind: FeatureKind::BsLocation,
            values: prep(&labels.bs)?,
        },
        ut_map: FeatureMap {
            kind: FeatureKind::UtLocation,
            values: ut_map,
        },
        height_map: FeatureMap {
            kind: FeatureKind::Height,
            values: prep(&labels.height)?,
        },
        pr_map: FeatureMap {
            kind: FeatureKind::PenetrationRatio,
            values: prep(&labels.pr)?,
        },
        pl_map: PathLossMap::from_values(prep(&labels.pl.values)?),
        csi,
        pilot_csi,
        meta: SampleMeta {
            index,
            scenario,
            crop_offset: [offset.0, offset.1],
            rotation_deg: rot as u16 * 90,
            ut_cell: [ut_cell.0, ut_cell.1],
            ut_cell_full: [full.0, full.1],
            master_seed,
            label_mode: cfg.label_mode,
            los_present: paths.los_present,
            path_count: paths.len(),
        },
    })
}

pub fn sample_file_name(index: usize) -> String {
    format!("sample_{index:05}.dtcs")
}

const CHUNK: usize = 64;

/// Generates every sample, streaming them to `sink` in index order, and
/// returns the manifest.
pub fn build_dataset(cfg: &DatasetConfig, master_seed: u64, sink: &mut dyn SampleSink) -> Result<DatasetManifest> {
    cfg.validate()?;
    let per = cfg.samples_per_scenario();
    let (scenario_splits, test_scenarios, per_sample) = assign_splits(cfg, master_seed);
    let mask = pilot::make_mask(cfg.pilot, &cfg.array, &cfg.ofdm)?;
    let mut entries = Vec::with_capacity(cfg.n_scenarios * per);
    for scenario in 0..cfg.n_scenarios {
        let labels = ScenarioLabels::build(cfg, master_seed, scenario)?;
        for start in (0..per).step_by(CHUNK) {
            let end = (start + CHUNK).min(per);
            let chunk: Vec<(Sample, Vec<u8>)> = (start..end)
                .into_par_iter()
                .map(|local| {
                    let s = build_sample(cfg, &labels, &mask, master_seed, scenario, local)?;
                    let bytes = s.to_bytes();
                    Ok((s, bytes))
                })
                .collect::<Result<_>>()?;
            for (s, bytes) in chunk {
                let entry = SampleEntry {
                    index: s.meta.index,
                    scenario,
                    split: per_sample[s.meta.index],
                    file: sample_file_name(s.meta.index),
                    crc32: crc32fast::hash(&bytes),
                };
                sink.accept(&s, &entry, &bytes)?;
                entries.push(entry);
            }
        }
    }
    let count = |sp: Split| entries.iter().filter(|e| e.split == sp).count();
    Ok(DatasetManifest {
        format_version: FORMAT_VERSION,
        master_seed,
        sample_count: entries.len(),
        config: cfg.clone(),
        splits: SplitCounts {
            train: count(Split::Train),
            val: count(Split::Val),
            test: count(Split::Test),
        },
        scenario_splits,
        test_scenarios,
        samples: entries,
    })
}

/// Builds the dataset into `dir` (`samples/*.dtcs` plus `manifest.json`).
pub fn write_dataset(dir: &Path, cfg: &DatasetConfig, master_seed: u64) -> Result<DatasetManifest> {
    let mut sink = DirectorySink { dir: dir.to_path_buf() };
    let manifest = build_dataset(cfg, master_seed, &mut sink)?;
    formats::write_atomic(&dir.join("manifest.json"), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_counts_and_offsets() {
        let m = Array2::from_shape_fn((124, 124), |(i, j)| (i * 124 + j) as f64);
        let crops = crop_grid(&m, 64, 4).unwrap();
        assert_eq!(crops.len(), 256);
        assert_eq!(crops[0], m.slice(s![0..64, 0..64]));
        assert_eq!(crops[17][[0, 0]], m[[4, 4]]);
        for (o0, o1) in crop_offsets(124, 124, 64, 4).unwrap() {
            assert!(o0 <= 62 && 62 < o0 + 64 && o1 <= 62 && 62 < o1 + 64);
        }
        assert!(matches!(crop_grid(&m, 64, 7), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn rotation_index_map() {
        let n = 5;
        let m = Array2::from_shape_fn((n, n), |(i, j)| i * n + j);
        let r1 = rotate90(&m, 1).unwrap();
        for r in 0..n {
            for c in 0..n {
                assert_eq!(r1[[r, c]], m[[c, n - 1 - r]]);
                let (dr, dc) = rotated_position(r, c, n, 1);
                assert_eq!(r1[[dr, dc]], m[[r, c]]);
            }
        }
        let mut x = m.clone();
        for _ in 0..4 {
            x = rotate90(&x, 1).unwrap();
        }
        assert_eq!(x, m);
        let v = rotate_variants(&m).unwrap();
        assert_eq!(v[0], m);
        assert_eq!(v[2], rotate90(&r1, 1).unwrap());
        assert!(rotate90(&Array2::<u8>::zeros((2, 3)), 1).is_err());
    }

    #[test]
    fn split_arithmetic() {
        let cfg = DatasetConfig::default();
        assert_eq!(cfg.samples_per_scenario(), 1024);
        let (scen, test, per) = assign_splits(&cfg, 42);
        assert_eq!(test.len(), 2);
        assert_eq!(scen.iter().filter(|s| **s == Split::Test).count(), 2);
        let c = |sp| per.iter().filter(|s| **s == sp).count();
        assert_eq!((c(Split::Train), c(Split::Val), c(Split::Test)), (7168, 1024, 2048));
        for (i, s) in per.iter().enumerate() {
            assert_eq!(*s == Split::Test, test.contains(&(i / 1024)));
        }
        assert_eq!(assign_splits(&cfg, 42).2, per);
    }
}
