//! Command-line front end. Exit codes: 0 success, 2 usage, 3 input format,
//! 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dtc_core::dataset::{self, DatasetConfig, LabelMode};
use dtc_core::envfeat::FeatureStack;
use dtc_core::formats;
use dtc_core::metrics;
use dtc_core::pilot::{self, PilotMask, PilotPattern};
use dtc_core::pipeline::{self, PipelineConfig, StageError};
use dtc_core::raychan::{self, ArrayConfig, CsiMatrix, OfdmConfig, PathLossMap, SynthConfig};
use dtc_core::recon::{self, LocalEnvSummary, PlBaselineConfig, ProxConfig, DEFAULT_HEIGHT_WINDOW};
use dtc_core::scene::{self, ScenarioConfig, Scene, Vec3};
use dtc_core::sensing::{self, DynamicObjects, SensingConfig};
use dtc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dtc", version, about = "Digital-twin channel toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random cuboid scene.
    GenScene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario generator config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize the CSI at one UT position, optionally with pilots and a PL map.
    Synth {
        #[arg(long)]
        scene: PathBuf,
        /// UT position `x,y,z` in meters.
        #[arg(long, value_parser = parse_vec3)]
        ut: Vec3,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reflection_order: Option<u8>,
        /// Pilot pattern, `regular:<ant>,<sc>` or `random:<density>[,<seed>]`.
        #[arg(long)]
        pilot: Option<PilotPattern>,
        #[arg(long, requires = "pilot")]
        pilot_out: Option<PathBuf>,
        #[arg(long, requires = "pilot")]
        mask_out: Option<PathBuf>,
        /// Also write the full-grid PL map (`.dtcm`, `.csv` or `.ppm`).
        #[arg(long)]
        pl_map: Option<PathBuf>,
    },
    /// Export BS/UT location, height and penetration-ratio maps.
    Features {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = parse_vec3)]
        ut: Option<Vec3>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the augmented dataset into a directory.
    Dataset {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_scenarios: Option<usize>,
        #[arg(long, value_parser = parse_label_mode)]
        label_mode: Option<LabelMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct full CSI from a pilot observation.
    Reconstruct {
        #[arg(long)]
        pilot_csi: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reconstruction config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Scene and UT used to condition the reconstruction on the environment.
        #[arg(long, requires = "ut")]
        scene: Option<PathBuf>,
        #[arg(long, value_parser = parse_vec3)]
        ut: Option<Vec3>,
    },
    /// Physics path-loss baseline map.
    PlBaseline {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted CSI or PL maps against ground truth.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        truth: Vec<PathBuf>,
        /// Write the summary CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate sensing of dynamic objects and fit cuboids.
    Sense {
        #[arg(long)]
        objects: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Static scene to inject the fitted cuboids into.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run sensing, features, prediction and scoring end to end.
    Pipeline {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        objects: Option<PathBuf>,
        #[arg(long, value_parser = parse_vec3)]
        ut: Vec3,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        pilot: Option<PilotPattern>,
        #[arg(long)]
        no_sensing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median stage latencies over repeated in-memory runs.
    Profile {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        objects: Option<PathBuf>,
        #[arg(long, value_parser = parse_vec3)]
        ut: Option<Vec3>,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
    },
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got '{s}'")),
    }
}

fn parse_label_mode(s: &str) -> std::result::Result<LabelMode, String> {
    match s {
        "consistent" => Ok(LabelMode::Consistent),
        "unrotated" => Ok(LabelMode::Unrotated),
        _ => Err(format!("unknown label mode '{s}' (consistent|unrotated)")),
    }
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(formats::read_file(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))),
    }
}

fn write_map(path: &Path, m: &PathLossMap) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => m.to_csv().into_bytes(),
        Some("ppm") => formats::map_to_ppm(&m.values),
        _ => m.to_bytes(),
    };
    formats::write_atomic(path, &bytes)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// CSI files (`.dtcc`) are scored with NMSE/SGCS, maps with RMSE and the
/// hybrid loss.
fn eval(pred: &[PathBuf], truth: &[PathBuf]) -> Result<String> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidConfig(format!(
            "{} predictions for {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let is_csi = pred.iter().all(|p| p.extension().is_some_and(|e| e == "dtcc"));
    if is_csi {
        let p = pred.iter().map(CsiMatrix::load).collect::<Result<Vec<_>>>()?;
        let t = truth.iter().map(CsiMatrix::load).collect::<Result<Vec<_>>>()?;
        let n = metrics::nmse(&p, &t)?;
        let nmse_db = metrics::MetricReport::from_values(
            "nmse",
            "dB",
            n.per_sample.iter().map(|&v| metrics::to_db(v)).collect(),
        )?;
        let s = metrics::sgcs(&p, &t)?;
        let mse = metrics::MetricReport::from_values("csi_mse", "linear", vec![metrics::csi_mse_loss(&p, &t)?])?;
        Ok(metrics::MetricReport::summary_csv(&[nmse_db, s, mse]))
    } else {
        let p = pred.iter().map(PathLossMap::load).collect::<Result<Vec<_>>>()?;
        let t = truth.iter().map(PathLossMap::load).collect::<Result<Vec<_>>>()?;
        let rmse = metrics::rmse_pl_report(&p, &t)?;
        let loss = metrics::pl_hybrid_loss(&p, &t, &metrics::LossConfig::default())?;
        let loss = metrics::MetricReport::from_values("pl_hybrid_loss", "dB", vec![loss])?;
        Ok(metrics::MetricReport::summary_csv(&[rmse, loss]))
    }
}

fn run(cmd: Cmd) -> std::result::Result<(), StageError> {
    let plain = |source: Error| StageError {
        stage: pipeline::Stage::Output,
        source,
    };
    match cmd {
        Cmd::Pipeline {
            scene,
            objects,
            ut,
            seed,
            config,
            pilot,
            no_sensing,
            out,
        } => {
            let (scene, dynamic, mut cfg) = (|| -> Result<_> {
                let scene = Scene::load(&scene)?;
                let dynamic = objects.map(DynamicObjects::load).transpose()?.unwrap_or_default();
                let cfg: PipelineConfig = load_toml(config.as_ref())?;
                Ok((scene, dynamic, cfg))
            })()
            .map_err(plain)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(p) = pilot {
                cfg.pilot = p;
            }
            if no_sensing {
                cfg.sensing_enabled = false;
            }
            let result = pipeline::run_pipeline(&scene, &dynamic, ut, &cfg)?;
            pipeline::write_artifacts(&result, &out)?;
            println!("{}", json(&result.report));
            Ok(())
        }
        Cmd::Profile {
            scene,
            objects,
            ut,
            repetitions,
        } => {
            let scene = Scene::load(&scene).map_err(plain)?;
            let dynamic = objects
                .map(DynamicObjects::load)
                .transpose()
                .map_err(plain)?
                .unwrap_or_default();
            let ut = ut.unwrap_or_else(|| {
                let g = scene.grid;
                g.cell_center(g.rows / 4, g.cols / 4)
            });
            let report = pipeline::profile(&scene, &dynamic, ut, &PipelineConfig::default(), repetitions)?;
            println!("{}", json(&report));
            Ok(())
        }
        other => run_simple(other).map_err(plain),
    }
}

fn run_simple(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenScene { seed, config, out } => {
            let cfg: ScenarioConfig = load_toml(config.as_ref())?;
            scene::generate_scenario(&cfg, seed)?.save(&out)
        }
        Cmd::Synth {
            scene,
            ut,
            out,
            reflection_order,
            pilot,
            pilot_out,
            mask_out,
            pl_map,
        } => {
            let scene = Scene::load(&scene)?;
            let mut cfg = SynthConfig::default();
            if let Some(o) = reflection_order {
                cfg.reflection_order = o;
            }
            let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
            let paths = raychan::trace_paths(&scene, ut, &cfg, &array)?;
            let h = raychan::assemble_csi(&paths, &array, &ofdm);
            h.save(&out)?;
            if let Some(p) = pilot {
                let mask = pilot::make_mask(p, &array, &ofdm)?;
                if let Some(path) = pilot_out {
                    pilot::observe(&h, &mask, None)?.save(path)?;
                }
                if let Some(path) = mask_out {
                    mask.save(path)?;
                }
            }
            if let Some(path) = pl_map {
                write_map(&path, &raychan::pl_map(&scene, &cfg, &array, &ofdm)?)?;
            }
            println!(
                "{{\"paths\": {}, \"los\": {}, \"pl_db\": {}}}",
                paths.len(),
                paths.los_present,
                raychan::path_loss_db(&h).unwrap_or(cfg.path_loss_floor_db())
            );
            Ok(())
        }
        Cmd::Features { scene, ut, out } => {
            let scene = Scene::load(&scene)?;
            FeatureStack::build(&scene, ut)?.save_dir(&out).map(|_| ())
        }
        Cmd::Dataset {
            seed,
            config,
            n_scenarios,
            label_mode,
            out,
        } => {
            let mut cfg: DatasetConfig = load_toml(config.as_ref())?;
            if let Some(n) = n_scenarios {
                cfg.n_scenarios = n;
            }
            if let Some(m) = label_mode {
                cfg.label_mode = m;
            }
            let m = dataset::write_dataset(&out, &cfg, seed)?;
            println!("{}", json(&m.splits));
            Ok(())
        }
        Cmd::Reconstruct {
            pilot_csi,
            mask,
            out,
            config,
            iterations,
            scene,
            ut,
        } => {
            let mut cfg = match &config {
                Some(p) => ProxConfig::load(p)?,
                None => ProxConfig::default(),
            };
            if let Some(k) = iterations {
                let last_beta = *cfg.beta.last().unwrap_or(&1.0);
                let last_lambda = *cfg.lambda_thr.last().unwrap_or(&0.0);
                cfg.beta.resize(k, last_beta);
                cfg.lambda_thr.resize(k, last_lambda);
                cfg.iterations = k;
            }
            let h0 = CsiMatrix::load(&pilot_csi)?;
            let mask = PilotMask::load(&mask)?;
            let env = match (scene, ut) {
                (Some(s), Some(ut)) => {
                    let s = Scene::load(&s)?;
                    let height = dtc_core::envfeat::height_map(&s);
                    Some(LocalEnvSummary::compute(&s, &height, ut, DEFAULT_HEIGHT_WINDOW)?)
                }
                _ => None,
            };
            recon::reconstruct_csi(&h0, &mask, env.as_ref(), &cfg)?.save(&out)
        }
        Cmd::PlBaseline { scene, kappa, out } => {
            let scene = Scene::load(&scene)?;
            let mut cfg = PlBaselineConfig::default();
            if let Some(k) = kappa {
                cfg.kappa = k;
            }
            write_map(&out, &recon::pl_baseline_map(&scene, &cfg)?)
        }
        Cmd::Eval { pred, truth, out } => {
            let csv = eval(&pred, &truth)?;
            match out {
                Some(p) => formats::write_atomic(&p, csv.as_bytes()),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Cmd::Sense {
            objects,
            seed,
            config,
            scene,
            out,
        } => {
            let dynamic = DynamicObjects::load(&objects)?;
            let cfg: SensingConfig = load_toml(config.as_ref())?;
            let frame = sensing::sense_objects(&dynamic.objects, &cfg, seed)?;
            frame.cloud.save(out.join("cloud.dtcp"))?;
            frame.cloud.save(out.join("cloud.xyz"))?;
            formats::write_atomic(&out.join("detected.json"), json(&frame.detected).as_bytes())?;
            if let Some(s) = scene {
                let s = Scene::load(&s)?;
                sensing::inject_dynamic(&s, &frame.detected)?.save(out.join("scene.json"))?;
            }
            Ok(())
        }
        Cmd::Pipeline { .. } | Cmd::Profile { .. } => unreachable!("handled by run"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.stage == pipeline::Stage::Output {
                eprintln!("dtc: {}", e.source);
            } else {
                eprintln!("dtc: {e}");
            }
            ExitCode::from(pipeline::exit_code(&e.source) as u8)
        }
    }
}
