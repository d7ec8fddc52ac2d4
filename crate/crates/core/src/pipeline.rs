//! End-to-end digital-twin run: sense dynamic objects, inject them into the
//! static scene, extract feature maps, predict path loss and reconstruct CSI
//! from pilots, then score against synthesized ground truth.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::envfeat::FeatureStack;
use crate::formats;
use crate::metrics;
use crate::pilot::{self, PilotMask, PilotNoise, PilotPattern};
use crate::raychan::{self, ArrayConfig, CsiMatrix, OfdmConfig, PathLossMap, SynthConfig};
use crate::recon::{self, LocalEnvSummary, PlBaselineConfig, ProxConfig, DEFAULT_HEIGHT_WINDOW};
use crate::scene::{Scene, Vec3};
use crate::sensing::{self, DetectedObject, DynamicObjects, SensingConfig, SensingFrame};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sensing,
    FeatureExtraction,
    Prediction,
    GroundTruth,
    Metrics,
    Output,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Sensing => "sensing",
            Stage::FeatureExtraction => "feature extraction",
            Stage::Prediction => "prediction",
            Stage::GroundTruth => "ground truth",
            Stage::Metrics => "metrics",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sensing_enabled: bool,
    pub sensing: SensingConfig,
    /// Pilot layout; a `SeededRandom` pattern takes its seed from `seed`.
    pub pilot: PilotPattern,
    pub pilot_noise_snr_db: Option<f64>,
    pub prox: ProxConfig,
    pub use_film: bool,
    pub baseline: PlBaselineConfig,
    pub synth: SynthConfig,
    pub array: ArrayConfig,
    pub ofdm: OfdmConfig,
    /// Also synthesize the full ground-truth PL map and report the baseline
    /// RMSE (slow).
    pub evaluate_pl_map: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            sensing_enabled: true,
            sensing: SensingConfig::default(),
            pilot: PilotPattern::SeededRandom { density: 0.25, seed: 0 },
            pilot_noise_snr_db: None,
            prox: ProxConfig::default(),
            use_film: true,
            baseline: PlBaselineConfig::default(),
            synth: SynthConfig::default(),
            array: ArrayConfig::default(),
            ofdm: OfdmConfig::default(),
            evaluate_pl_map: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Wall-clock milliseconds per stage. `total_ms` is the sum of the three
/// pipeline stages; the two map timings are informational sub-measurements of
/// feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub sensing_ms: f64,
    pub feature_extraction_ms: f64,
    pub prediction_ms: f64,
    pub total_ms: f64,
    pub height_map_ms: f64,
    pub pr_map_ms: f64,
    pub repetitions: usize,
    pub hardware: String,
}

impl LatencyReport {
    fn from_stages(sensing: f64, features: f64, prediction: f64, height: f64, pr: f64, repetitions: usize) -> Self {
        LatencyReport {
            sensing_ms: sensing,
            feature_extraction_ms: features,
            prediction_ms: prediction,
            total_ms: sensing + features + prediction,
            height_map_ms: height,
            pr_map_ms: pr,
            repetitions,
            hardware: hardware_note(),
        }
    }
}

/// Architecture, thread count and (on Linux) the CPU model name.
pub fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    format!("{} {} threads, {model}", std::env::consts::ARCH, threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub ut: Vec3,
    pub ut_cell: [usize; 2],
    pub detected: Vec<DetectedObject>,
    pub env: LocalEnvSummary,
    pub film_active: bool,
    pub pilot_count: usize,
    pub los_present: bool,
    pub path_count: usize,
    pub nmse_db: f64,
    pub nmse_zero_fill_db: f64,
    pub sgcs: f64,
    pub pl_true_at_ut_db: f64,
    pub pl_baseline_at_ut_db: f64,
    pub pl_rmse_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub scene: Scene,
    pub frame: Option<SensingFrame>,
    pub features: FeatureStack,
    pub pl_baseline: PathLossMap,
    pub mask: PilotMask,
    pub csi_true: CsiMatrix,
    pub csi_pilot: CsiMatrix,
    pub csi_recon: CsiMatrix,
    pub report: PipelineReport,
    pub latency: LatencyReport,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Sensing stage: fitted cuboids injected into a copy of the static scene.
fn sense(
    static_scene: &Scene,
    dynamic: &DynamicObjects,
    cfg: &PipelineConfig,
) -> Result<(Scene, Option<SensingFrame>)> {
    if !cfg.sensing_enabled || dynamic.objects.is_empty() {
        return Ok((static_scene.clone(), None));
    }
    let frame = sensing::sense_objects(&dynamic.objects, &cfg.sensing, cfg.seed)?;
    let scene = sensing::inject_dynamic(static_scene, &frame.detected)?;
    Ok((scene, Some(frame)))
}

/// Runs every stage. Ground-truth synthesis and scoring are not part of the
/// timed stages.
pub fn run_pipeline(
    static_scene: &Scene,
    dynamic: &DynamicObjects,
    ut: Vec3,
    cfg: &PipelineConfig,
) -> std::result::Result<PipelineOutput, StageError> {
    let t = Instant::now();
    let (scene, frame) = sense(static_scene, dynamic, cfg).at(Stage::Sensing)?;
    let sensing_ms = ms(t);

    let t = Instant::now();
    let th = Instant::now();
    let height_map = crate::envfeat::height_map(&scene);
    let height_ms = ms(th);
    let tp = Instant::now();
    let pr_map = crate::envfeat::penetration_ratio_map(&scene);
    let pr_ms = ms(tp);
    let features = FeatureStack {
        grid: scene.grid,
        bs_map: crate::envfeat::location_map(scene.bs, &scene.grid).at(Stage::FeatureExtraction)?,
        height_map,
        pr_map,
        ut_map: Some(crate::envfeat::ut_location_map(ut, &scene.grid).at(Stage::FeatureExtraction)?),
    };
    let env = LocalEnvSummary::compute(&scene, &features.height_map, ut, DEFAULT_HEIGHT_WINDOW)
        .at(Stage::FeatureExtraction)?;
    let features_ms = ms(t);

    // Observed pilots come from the true environment (static scene plus the
    // actual dynamic objects), not from the reconstructed one.
    let mut truth_scene = static_scene.clone();
    truth_scene.cuboids.extend(dynamic.objects.iter().copied());
    let paths = raychan::trace_paths(&truth_scene, ut, &cfg.synth, &cfg.array).at(Stage::GroundTruth)?;
    let csi_true = raychan::assemble_csi(&paths, &cfg.array, &cfg.ofdm);
    let pattern = match cfg.pilot {
        PilotPattern::SeededRandom { density, .. } => PilotPattern::SeededRandom {
            density,
            seed: cfg.seed,
        },
        regular => regular,
    };
    let mask = pilot::make_mask(pattern, &cfg.array, &cfg.ofdm).at(Stage::Prediction)?;
    let noise = cfg
        .pilot_noise_snr_db
        .map(|snr_db| PilotNoise { snr_db, seed: cfg.seed });
    let csi_pilot = pilot::observe(&csi_true, &mask, noise).at(Stage::Prediction)?;

    let t = Instant::now();
    let pl_baseline = recon::pl_baseline_map(&scene, &cfg.baseline).at(Stage::Prediction)?;
    let env_arg = cfg.use_film.then_some(&env);
    let csi_recon = recon::reconstruct_csi(&csi_pilot, &mask, env_arg, &cfg.prox).at(Stage::Prediction)?;
    let prediction_ms = ms(t);

    let (n_t, n_k) = csi_true.dim();
    let film_active = cfg.use_film && !recon::derive_film(&env, &cfg.prox.film, n_t, n_k).is_neutral();
    let nmse = metrics::nmse_sample(&csi_recon, &csi_true).at(Stage::Metrics)?;
    let nmse_zf = metrics::nmse_sample(&csi_pilot, &csi_true).at(Stage::Metrics)?;
    let sgcs = metrics::sgcs_sample(&csi_recon, &csi_true, 0).at(Stage::Metrics)?;
    let ut_cell = scene
        .grid
        .nearest_cell(ut.x, ut.y)
        .expect("UT validated by feature extraction");
    let pl_rmse_db = if cfg.evaluate_pl_map {
        let truth = raychan::pl_map(&truth_scene, &cfg.synth, &cfg.array, &cfg.ofdm).at(Stage::GroundTruth)?;
        let pred = PathLossMap::new(pl_baseline.values.clone(), truth.valid_mask.clone())
            .map_err(|_| Error::MaskMismatch { row: 0, col: 0 })
            .at(Stage::Metrics)?;
        Some(metrics::rmse_pl(&pred, &truth).at(Stage::Metrics)?)
    } else {
        None
    };
    let report = PipelineReport {
        seed: cfg.seed,
        ut,
        ut_cell: [ut_cell.0, ut_cell.1],
        detected: frame.as_ref().map(|f| f.detected.clone()).unwrap_or_default(),
        env,
        film_active,
        pilot_count: mask.count(),
        los_present: paths.los_present,
        path_count: paths.len(),
        nmse_db: metrics::to_db(nmse),
        nmse_zero_fill_db: metrics::to_db(nmse_zf),
        sgcs,
        pl_true_at_ut_db: raychan::path_loss_db(&csi_true).unwrap_or(cfg.synth.path_loss_floor_db()),
        pl_baseline_at_ut_db: pl_baseline.values[ut_cell],
        pl_rmse_db,
    };
    Ok(PipelineOutput {
        scene,
        frame,
        features,
        pl_baseline,
        mask,
        csi_true,
        csi_pilot,
        csi_recon,
        report,
        latency: LatencyReport::from_stages(sensing_ms, features_ms, prediction_ms, height_ms, pr_ms, 1),
    })
}

/// Writes every artifact of a run into `dir`. All files except
/// `latency.json` are deterministic for fixed inputs and seed.
pub fn write_artifacts(out: &PipelineOutput, dir: &Path) -> std::result::Result<(), StageError> {
    let w = |name: &str, bytes: &[u8]| formats::write_atomic(&dir.join(name), bytes).at(Stage::Output);
    out.features.save_dir(&dir.join("features")).at(Stage::Output)?;
    w("pl_baseline.dtcm", &out.pl_baseline.to_bytes())?;
    w("pl_baseline.csv", out.pl_baseline.to_csv().as_bytes())?;
    w("pl_baseline.ppm", &formats::map_to_ppm(&out.pl_baseline.values))?;
    w("pr_map.ppm", &formats::map_to_ppm(&out.features.pr_map.values))?;
    w("csi_true.dtcc", &out.csi_true.to_bytes())?;
    w("csi_pilot.dtcc", &out.csi_pilot.to_bytes())?;
    w("csi_recon.dtcc", &out.csi_recon.to_bytes())?;
    w("pilot_mask.dtcb", &out.mask.to_bytes())?;
    w("scene.json", out.scene.to_json().as_bytes())?;
    if let Some(frame) = &out.frame {
        w("cloud.dtcp", &frame.cloud.to_bytes())?;
    }
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes");
    w("report.json", report.as_bytes())?;
    let latency = serde_json::to_string_pretty(&out.latency).expect("latency serializes");
    w("latency.json", latency.as_bytes())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median per-stage timings over `repetitions` in-memory pipeline runs.
pub fn profile(
    scene: &Scene,
    dynamic: &DynamicObjects,
    ut: Vec3,
    cfg: &PipelineConfig,
    repetitions: usize,
) -> std::result::Result<LatencyReport, StageError> {
    if repetitions == 0 {
        return Err(StageError {
            stage: Stage::Output,
            source: Error::InvalidConfig("repetitions must be at least 1".into()),
        });
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    for _ in 0..repetitions {
        let l = run_pipeline(scene, dynamic, ut, cfg)?.latency;
        for (c, v) in cols.iter_mut().zip([
            l.sensing_ms,
            l.feature_extraction_ms,
            l.prediction_ms,
            l.height_map_ms,
            l.pr_map_ms,
        ]) {
            c.push(v);
        }
    }
    let [s, f, p, h, r] = cols.map(median);
    Ok(LatencyReport::from_stages(s, f, p, h, r, repetitions))
}

/// Process exit code for a failed run: 3 for unreadable or malformed inputs,
/// 2 for invalid parameters, 4 for numeric or geometric failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        3
    } else if matches!(e, Error::InvalidConfig(_) | Error::InvalidDensity(_)) {
        2
    } else {
        4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Cuboid, GridSpec};

    fn scene() -> Scene {
        let wall = Cuboid::from_bounds(9.0, 9.5, 3.0, 9.0, 4.0).unwrap();
        Scene::centered(GridSpec::default(), 2.0, vec![wall]).unwrap()
    }

    #[test]
    fn static_run_is_deterministic_and_sensing_free() {
        let s = scene();
        let ut = Vec3::new(11.05, 6.25, 1.0);
        let cfg = PipelineConfig::default();
        let a = run_pipeline(&s, &DynamicObjects::default(), ut, &cfg).unwrap();
        let b = run_pipeline(&s, &DynamicObjects::default(), ut, &cfg).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.csi_recon, b.csi_recon);
        assert!(a.frame.is_none());
        assert!(a.report.env.pr_at_ut > 0.0);
        let l = &a.latency;
        assert!((l.total_ms - (l.sensing_ms + l.feature_extraction_ms + l.prediction_ms)).abs() < 1e-12);
    }

    #[test]
    fn pedestrian_on_line_raises_pr() {
        let s = Scene::centered(GridSpec::default(), 2.0, vec![]).unwrap();
        let ut = Vec3::new(10.05, 6.25, 1.0);
        let cfg = PipelineConfig::default();
        let clear = run_pipeline(&s, &DynamicObjects::default(), ut, &cfg).unwrap();
        assert_eq!(clear.report.env.pr_at_ut, 0.0);
        let dynamic = DynamicObjects {
            objects: vec![Cuboid::new(7.75, 6.0, 0.5, 0.5, 1.8).unwrap()],
        };
        let blocked = run_pipeline(&s, &dynamic, ut, &cfg).unwrap();
        assert!(blocked.report.env.pr_at_ut > 0.0);
        assert_eq!(blocked.report.detected.len(), 1);
    }

    #[test]
    fn errors_carry_stage_and_exit_code() {
        let s = scene();
        let e = run_pipeline(
            &s,
            &DynamicObjects::default(),
            Vec3::new(50.0, 1.0, 1.0),
            &PipelineConfig::default(),
        )
        .unwrap_err();
        assert_eq!(e.stage, Stage::FeatureExtraction);
        assert_eq!(exit_code(&e.source), 4);
        assert_eq!(exit_code(&Error::format(3, "x")), 3);
        assert_eq!(exit_code(&Error::InvalidDensity(2.0)), 2);
    }
}
