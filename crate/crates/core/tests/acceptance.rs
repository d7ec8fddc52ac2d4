//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero when any criterion fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{DefaultHasher, Hasher};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use dtc_core::dataset::{self, DatasetConfig, Sample, SampleEntry, Split};
use dtc_core::envfeat;
use dtc_core::metrics::{self, LossConfig};
use dtc_core::patches::{self, PatchLayout};
use dtc_core::pilot::{self, PilotMask, PilotPattern};
use dtc_core::pipeline::{self, PipelineConfig};
use dtc_core::raychan::{
    self, ArrayConfig, CsiMatrix, MultipathSet, OfdmConfig, PathComponent, PathLossMap, SynthConfig,
};
use dtc_core::recon::{self, PlBaselineConfig, ProxConfig};
use dtc_core::scene::{self, Cuboid, GridSpec, ScenarioConfig, Scene, Vec3};
use dtc_core::sensing::{self, DbscanParams, DynamicObjects, SensingConfig, NOISE};
use dtc_core::SPEED_OF_LIGHT;
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const MASTER_SEED: u64 = 2024;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lib<T>(r: dtc_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xacce_0000 + tag)
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

/// Streams the full dataset, returning the manifest JSON and a digest of every
/// encoded sample.
struct DatasetRun {
    manifest_json: String,
    digest: u64,
    per_scenario: Vec<[usize; 4]>,
    counted: [usize; 3],
    secs: f64,
}

fn run_dataset(cfg: &DatasetConfig) -> Result<DatasetRun, String> {
    let t = Instant::now();
    let mut per_scenario = vec![[0usize; 4]; cfg.n_scenarios];
    let mut counted = [0usize; 3];
    let mut hasher = DefaultHasher::new();
    let mut sink = |s: &Sample, e: &SampleEntry, bytes: &[u8]| {
        per_scenario[e.scenario][usize::from(s.meta.rotation_deg / 90)] += 1;
        counted[match e.split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }] += 1;
        hasher.write(bytes);
        Ok(())
    };
    let manifest = lib(dataset::build_dataset(cfg, MASTER_SEED, &mut sink))?;
    Ok(DatasetRun {
        manifest_json: manifest.to_json(),
        digest: hasher.finish(),
        per_scenario,
        counted,
        secs: t.elapsed().as_secs_f64(),
    })
}

fn criterion_1(first: &DatasetRun) -> Outcome {
    let cfg = DatasetConfig::default();
    let crops = lib(dataset::crop_grid(
        &Array2::<f64>::zeros((124, 124)),
        cfg.crop_size,
        cfg.crop_stride,
    ))?
    .len();
    let per_ok = first.per_scenario.iter().all(|r| r.iter().all(|&c| c == 256));
    let per_total: Vec<usize> = first.per_scenario.iter().map(|r| r.iter().sum()).collect();
    let total: usize = per_total.iter().sum();
    let manifest = lib(dataset::DatasetManifest::from_json(&first.manifest_json))?;
    let s = manifest.splits;
    let ok = crops == 256
        && per_ok
        && per_total.iter().all(|&c| c == 1024)
        && total == 10240
        && manifest.sample_count == 10240
        && (s.train, s.val, s.test) == (7168, 1024, 2048)
        && first.counted == [7168, 1024, 2048]
        && first.secs < 600.0;
    check(
        ok,
        format!(
            "crops={crops} per_scenario={:?} total={total} split={}/{}/{} in {:.1}s",
            per_total, s.train, s.val, s.test, first.secs
        ),
    )
}

fn line_scene(extra: bool) -> Result<Scene, String> {
    let grid = GridSpec {
        origin: Vec3::new(-1.0, -5.0, 0.0),
        resolution: 0.1,
        rows: 100,
        cols: 120,
        rx_height: 1.0,
    };
    let mut cuboids = vec![lib(Cuboid::from_bounds(4.0, 6.0, -1.0, 1.0, 2.0))?];
    if extra {
        cuboids.push(lib(Cuboid::from_bounds(7.0, 8.0, -1.0, 1.0, 2.0))?);
    }
    lib(Scene::new(grid, Vec3::new(0.0, 0.0, 2.0), cuboids))
}

fn brute_height(scene: &Scene) -> (Array2<f64>, Array2<bool>) {
    let g = scene.grid;
    let mut h = Array2::zeros(g.shape());
    let mut f = Array2::from_elem(g.shape(), false);
    for ((i, j), v) in h.indexed_iter_mut() {
        let p = g.cell_center(i, j);
        for c in &scene.cuboids {
            if p.x >= c.min_x && p.x <= c.min_x + c.size_x && p.y >= c.min_y && p.y <= c.min_y + c.size_y {
                f[[i, j]] = true;
                *v = f64::max(*v, c.height);
            }
        }
    }
    (h, f)
}

fn criterion_2() -> Outcome {
    let q = Vec3::new(10.0, 0.0, 1.0);
    let one = lib(envfeat::penetration_ratio_point(&line_scene(false)?, q))?;
    let two = lib(envfeat::penetration_ratio_point(&line_scene(true)?, q))?;
    let rel = |v: f64, want: f64| ((v - want) / want).abs();
    let (e1, e2) = (rel(one, 1.0 / 3.0), rel(two, 2.0 / 3.0));

    let cfg = ScenarioConfig::default();
    let mut mismatches = 0usize;
    let mut scenes = 0usize;
    for seed in 0..20u64 {
        let mut s = lib(scene::generate_scenario(&cfg, seed))?;
        // Edges placed exactly on cell centers exercise the closed boundary.
        let g = s.grid;
        let a = g.cell_center(10 + seed as usize, 20);
        let b = g.cell_center(30 + seed as usize, 45);
        s.cuboids
            .push(lib(Cuboid::from_bounds(a.x, b.x, a.y, b.y, 1.5 + seed as f64 * 0.1))?);
        let (h, f) = brute_height(&s);
        let got_h = envfeat::height_map(&s).values;
        let got_f = scene::footprint_mask(&s);
        mismatches += Zip::from(&h).and(&got_h).fold(0, |n, a, b| n + usize::from(a != b));
        mismatches += Zip::from(&f).and(&got_f).fold(0, |n, a, b| n + usize::from(a != b));
        scenes += 1;
    }
    check(
        e1 <= 1e-9 && e2 <= 1e-9 && mismatches == 0,
        format!(
            "pr={one:.12} (rel {e1:.1e}), {two:.12} (rel {e2:.1e}); map mismatches={mismatches} over {scenes} scenes"
        ),
    )
}

fn random_paths(r: &mut ChaCha8Rng) -> MultipathSet {
    let n = r.random_range(1..=8);
    let paths = (0..n)
        .map(|_| {
            let g = Complex64::from_polar(r.random_range(1e-6..1e-3), r.random_range(-PI..PI));
            PathComponent::from_gain_delay_aod(g, r.random_range(0.0..200e-9), r.random_range(-PI / 2.0..PI / 2.0))
        })
        .collect();
    MultipathSet::new(paths, true)
}

/// Direct per-entry evaluation of the multipath sum.
fn direct_csi(paths: &MultipathSet, array: &ArrayConfig, ofdm: &OfdmConfig) -> Array2<Complex64> {
    Array2::from_shape_fn((array.n_t, ofdm.n_k), |(n, k0)| {
        let k = (k0 + 1) as f64;
        let lambda_k = SPEED_OF_LIGHT / (array.carrier_hz + (k - 1.0) * ofdm.subcarrier_spacing_hz);
        paths
            .paths
            .iter()
            .map(|p| {
                let delay = -2.0 * PI * k * ofdm.subcarrier_spacing_hz * p.delay;
                let space = -2.0 * PI * array.spacing / lambda_k * n as f64 * p.aod.sin();
                p.gain * Complex64::from_polar(1.0, delay + space)
            })
            .sum()
    })
}

fn criterion_3() -> Outcome {
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let mut ones = true;
    for k in [1, ofdm.n_k / 2, ofdm.n_k] {
        let a = lib(raychan::steering_vector(0.0, k, &array, &ofdm))?;
        ones &= a.iter().all(|v| *v == Complex64::new(1.0, 0.0));
    }
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let paths = random_paths(&mut r);
        let got = raychan::assemble_csi(&paths, &array, &ofdm);
        let want = direct_csi(&paths, &array, &ofdm);
        let num: f64 = Zip::from(got.entries())
            .and(&want)
            .fold(0.0, |s, a, b| s + (a - b).norm_sqr());
        let den: f64 = want.iter().map(|v| v.norm_sqr()).sum();
        worst = worst.max((num / den).sqrt());
    }
    let h = lib(CsiMatrix::new(Array2::from_elem(
        (array.n_t, ofdm.n_k),
        Complex64::new(0.1, 0.0),
    )))?;
    let pl = lib(raychan::path_loss_db(&h))?;
    check(
        ones && worst <= 1e-12 && pl == 20.0,
        format!("steering(0) all ones={ones}; worst relative error={worst:.2e}; PL(0.1)={pl:?} dB"),
    )
}

fn friis_db(d: f64, f: f64) -> f64 {
    20.0 * (4.0 * PI * d * f / SPEED_OF_LIGHT).log10()
}

fn criterion_4() -> Outcome {
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let direct = SynthConfig::direct_only();
    let empty = Scene::empty();
    let map = lib(raychan::pl_map(&empty, &direct, &array, &ofdm))?;
    let g = empty.grid;
    let mut worst_friis = 0.0f64;
    for ((i, j), v) in map.values.indexed_iter() {
        if map.valid_mask[[i, j]] {
            let d = empty.bs.distance(g.cell_center(i, j));
            worst_friis = worst_friis.max((v - friis_db(d, array.carrier_hz)).abs());
        }
    }
    let valid_all = map.valid_count() == g.rows * g.cols;

    let cfg = ScenarioConfig {
        count_range: [1, 1],
        ..ScenarioConfig::default()
    };
    let base = PlBaselineConfig {
        kappa: direct.penetration_db_per_m,
        carrier_hz: array.carrier_hz,
    };
    let mut worst_base = 0.0f64;
    let mut mask_ok = true;
    for i in 0..20u64 {
        let s = lib(scene::generate_scenario_indexed(&cfg, MASTER_SEED, i))?;
        let synth = lib(raychan::pl_map(&s, &direct, &array, &ofdm))?;
        let pred = lib(recon::pl_baseline_map(&s, &base))?;
        mask_ok &= synth.valid_mask == pred.valid_mask;
        Zip::from(&synth.values)
            .and(&pred.values)
            .and(&synth.valid_mask)
            .for_each(|a, b, &ok| {
                if ok {
                    worst_base = worst_base.max((a - b).abs());
                }
            });
    }
    check(
        valid_all && worst_friis <= 0.01 && mask_ok && worst_base <= 0.01,
        format!("empty scene max |PL - Friis|={worst_friis:.2e} dB; baseline vs synth max diff={worst_base:.2e} dB over 20 scenes"),
    )
}

struct DensityResult {
    nmse_recon_db: f64,
    nmse_zf_db: f64,
    sgcs_wins: usize,
    pilots_exact: bool,
}

fn evaluate_density(suite: &[CsiMatrix], density: f64, cfg: &ProxConfig) -> Result<DensityResult, String> {
    let (n_t, n_k) = suite[0].dim();
    let mut recon_all = Vec::with_capacity(suite.len());
    let mut zf_all = Vec::with_capacity(suite.len());
    let mut pilots_exact = true;
    let mut sgcs_wins = 0;
    for (i, h) in suite.iter().enumerate() {
        let mask: PilotMask = lib(pilot::make_mask_dims(
            PilotPattern::SeededRandom {
                density,
                seed: i as u64,
            },
            n_t,
            n_k,
        ))?;
        let h0 = lib(pilot::observe(h, &mask, None))?;
        let rec = lib(recon::reconstruct_csi(&h0, &mask, None, cfg))?;
        Zip::from(rec.entries())
            .and(h0.entries())
            .and(&mask.mask)
            .for_each(|a, b, &m| {
                if m && a != b {
                    pilots_exact = false;
                }
            });
        if density == 0.5 {
            let s_rec = lib(metrics::sgcs_sample(&rec, h, i))?;
            let s_zf = lib(metrics::sgcs_sample(&h0, h, i))?;
            sgcs_wins += usize::from(s_rec > s_zf);
        }
        recon_all.push(rec);
        zf_all.push(h0);
    }
    Ok(DensityResult {
        nmse_recon_db: lib(metrics::nmse(&recon_all, suite))?.db,
        nmse_zf_db: lib(metrics::nmse(&zf_all, suite))?.db,
        sgcs_wins,
        pilots_exact,
    })
}

fn criterion_5() -> Outcome {
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let suite = recon::synthetic_suite(200, MASTER_SEED, &array, &ofdm);
    let cfg = ProxConfig::default();
    let r50 = evaluate_density(&suite, 0.5, &cfg)?;
    let r25 = evaluate_density(&suite, 0.25, &cfg)?;
    let r12 = evaluate_density(&suite, 0.125, &cfg)?;
    let gain = r50.nmse_zf_db - r50.nmse_recon_db;
    let monotone = r50.nmse_recon_db <= r25.nmse_recon_db && r25.nmse_recon_db <= r12.nmse_recon_db;
    let exact = r50.pilots_exact && r25.pilots_exact && r12.pilots_exact;
    check(
        gain >= 6.0 && monotone && exact && r50.sgcs_wins >= 180,
        format!(
            "NMSE recon/zero-fill @0.5={:.2}/{:.2} dB (gain {gain:.2} dB); @0.25={:.2} dB; @0.125={:.2} dB; pilots exact={exact}; SGCS wins {}/200",
            r50.nmse_recon_db, r50.nmse_zf_db, r25.nmse_recon_db, r12.nmse_recon_db, r50.sgcs_wins
        ),
    )
}

fn random_csi(r: &mut ChaCha8Rng, n_t: usize, n_k: usize) -> Result<CsiMatrix, String> {
    lib(CsiMatrix::new(Array2::from_shape_fn((n_t, n_k), |_| {
        Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    })))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let h = random_csi(&mut r, 64, 96)?;
    let mut worst_sgcs = 0.0f64;
    for _ in 0..10 {
        let c = Complex64::from_polar(r.random_range(0.1..10.0), r.random_range(-PI..PI));
        let s = lib(metrics::sgcs(&[h.scaled(c)], std::slice::from_ref(&h)))?;
        worst_sgcs = worst_sgcs.max((s.mean - 1.0).abs());
    }
    let half = lib(metrics::nmse(
        &[h.scaled(Complex64::new(0.5, 0.0))],
        std::slice::from_ref(&h),
    ))?
    .db;

    // Quarter-dB values are exact in binary, so the offset is exact too.
    let base = Array2::from_shape_fn((124, 124), |_| f64::from(r.random_range(200..600u32)) / 4.0);
    let truth = PathLossMap::from_values(base.clone());
    let shifted = PathLossMap::from_values(base.mapv(|v| v + 2.0));
    let offset = lib(metrics::rmse_pl(&shifted, &truth))?;

    let map = PathLossMap::from_values(Array2::from_shape_fn((64, 64), |_| r.random_range(60.0..140.0)));
    let loss = lib(metrics::pl_hybrid_loss(
        std::slice::from_ref(&map),
        std::slice::from_ref(&map),
        &LossConfig::default(),
    ))?;
    check(
        worst_sgcs <= 1e-12 && (half + 6.02).abs() <= 0.01 && offset == 2.0 && (loss - 0.0011).abs() <= 1e-6,
        format!("max |sgcs(cH,H)-1|={worst_sgcs:.1e}; nmse(0.5H)={half:.4} dB; offset rmse={offset:?}; identical loss={loss:.8}"),
    )
}

fn criterion_7() -> Outcome {
    let small = lib(PatchLayout::small(64, 64))?;
    let large = lib(PatchLayout::large(64, 64))?;
    let counts = (small.token_count(), large.token_count());
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let map = Array2::from_shape_fn((64, 64), |_| r.random_range(-200.0..200.0));
        for layout in [&small, &large] {
            let tokens = lib(patches::patchify(&map, layout))?;
            let back = lib(patches::unpatchify(&tokens, layout))?;
            worst = worst.max(Zip::from(&map).and(&back).fold(0.0f64, |m, a, b| m.max((a - b).abs())));
        }
    }
    check(
        counts == (441, 64) && worst <= 1e-12,
        format!("token counts={counts:?}; worst round-trip error={worst:.1e} over 50 maps"),
    )
}

/// Textbook O(n²) clustering with the same border rule as the library.
fn reference_dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let near: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| points[i].distance(points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = near.iter().map(|v| v.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for seed in 0..n {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        let mut stack = vec![seed];
        labels[seed] = next;
        while let Some(i) = stack.pop() {
            for &j in &near[i] {
                if core[j] && labels[j] == NOISE {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for &j in &near[i] {
            if core[j] {
                let d = points[i].distance(points[j]);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
        }
        if let Some((_, j)) = best {
            labels[i] = labels[j];
        }
    }
    labels
}

fn random_cloud(r: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = r.random_range(1..=200);
    let blobs: Vec<Vec3> = (0..r.random_range(1..=5))
        .map(|_| {
            Vec3::new(
                r.random_range(0.0..2.0),
                r.random_range(0.0..2.0),
                r.random_range(0.0..2.0),
            )
        })
        .collect();
    (0..n)
        .map(|_| {
            if r.random_bool(0.2) {
                Vec3::new(
                    r.random_range(0.0..2.0),
                    r.random_range(0.0..2.0),
                    r.random_range(0.0..2.0),
                )
            } else {
                let c = blobs[r.random_range(0..blobs.len())];
                let s = 0.15;
                c + Vec3::new(r.random_range(-s..s), r.random_range(-s..s), r.random_range(-s..s))
            }
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut identical = 0;
    for _ in 0..200 {
        let pts = random_cloud(&mut r);
        let p = DbscanParams {
            eps: r.random_range(0.02..0.3),
            min_pts: r.random_range(1..=8),
        };
        if lib(sensing::dbscan(&pts, &p))? == reference_dbscan(&pts, p.eps, p.min_pts) {
            identical += 1;
        }
    }

    let cfg = SensingConfig {
        bias_sigma: 0.05,
        noise_sigma: 0.01,
        ..SensingConfig::default()
    };
    let (mut fine_sum, mut coarse_sum, mut wins) = (0.0, 0.0, 0);
    let objects = 50;
    for i in 0..objects {
        let obj = lib(Cuboid::new(
            r.random_range(1.0..10.0),
            r.random_range(1.0..10.0),
            r.random_range(0.3..1.0),
            r.random_range(0.3..1.0),
            r.random_range(1.0..2.0),
        ))?;
        let frame = lib(sensing::sense_objects(&[obj], &cfg, MASTER_SEED + i))?;
        let truth = obj.center();
        let planar = |p: Vec3| (p.x - truth.x).hypot(p.y - truth.y);
        let fine = planar(frame.detected[0].center);
        let coarse = planar(frame.coarse[0]);
        fine_sum += fine;
        coarse_sum += coarse;
        wins += usize::from(fine < coarse);
    }
    let (fine, coarse) = (fine_sum / objects as f64, coarse_sum / objects as f64);
    check(
        identical == 200 && fine < coarse,
        format!("dbscan identical on {identical}/200 clouds; mean 2-D center error fine={:.2} cm coarse={:.2} cm (fine better on {wins}/{objects})", fine * 100.0, coarse * 100.0),
    )
}

fn pedestrian() -> DynamicObjects {
    DynamicObjects {
        objects: vec![Cuboid::new(8.0, 6.0, 0.5, 0.5, 1.8).expect("valid pedestrian")],
    }
}

fn criterion_9() -> Outcome {
    let cfg = ScenarioConfig::default();
    let (mut pr, mut height) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let s = lib(scene::generate_scenario(&cfg, seed))?;
        for _ in 0..5 {
            let t = Instant::now();
            std::hint::black_box(envfeat::penetration_ratio_map(&s));
            pr.push(t.elapsed().as_secs_f64() * 1e3);
            let t = Instant::now();
            std::hint::black_box(envfeat::height_map(&s));
            height.push(t.elapsed().as_secs_f64() * 1e3);
        }
    }
    let (pr, height) = (median(pr), median(height));
    let s = lib(scene::generate_scenario(&cfg, 0))?;
    let ut = Vec3::new(3.05, 9.05, 1.0);
    let lat = pipeline::profile(&s, &pedestrian(), ut, &PipelineConfig::default(), 21)
        .map_err(|e| format!("pipeline failed: {e}"))?;
    check(
        pr < 10.0 && height < 3.0 && lat.total_ms < 70.0,
        format!(
            "median PR map={pr:.3} ms, height map={height:.3} ms, pipeline={:.2} ms (sensing {:.2}, features {:.2}, prediction {:.2}); {}",
            lat.total_ms, lat.sensing_ms, lat.feature_extraction_ms, lat.prediction_ms, lat.hardware
        ),
    )
}

fn artifact_bytes(dir: &Path) -> Result<HashMap<String, Vec<u8>>, String> {
    let mut out = HashMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "latency.json") {
                let rel = p.strip_prefix(dir).expect("inside dir").display().to_string();
                out.insert(rel, std::fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn criterion_10(first: &DatasetRun) -> Outcome {
    let second = run_dataset(&DatasetConfig::default())?;
    let dataset_same = first.manifest_json == second.manifest_json && first.digest == second.digest;

    let s = lib(scene::generate_scenario(&ScenarioConfig::default(), 7))?;
    let ut = Vec3::new(2.05, 3.05, 1.0);
    let cfg = PipelineConfig {
        seed: 11,
        ..PipelineConfig::default()
    };
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = pipeline::run_pipeline(&s, &pedestrian(), ut, &cfg).map_err(|e| e.to_string())?;
        pipeline::write_artifacts(&out, dir.path()).map_err(|e| e.to_string())?;
        runs.push(artifact_bytes(dir.path())?);
    }
    let files = runs[0].len();
    let artifacts_same = files > 0 && runs[0] == runs[1];
    check(
        dataset_same && artifacts_same,
        format!(
            "manifest ({} bytes) identical={}, sample digest identical={}; {files} pipeline artifacts identical={artifacts_same}",
            first.manifest_json.len(),
            first.manifest_json == second.manifest_json,
            first.digest == second.digest
        ),
    )
}

fn main() -> ExitCode {
    let dataset = run_dataset(&DatasetConfig::default());
    let dataset = &dataset;
    let with_dataset = |f: fn(&DatasetRun) -> Outcome| {
        move || match dataset {
            Ok(d) => f(d),
            Err(e) => Err(e.clone()),
        }
    };
    let c1 = with_dataset(criterion_1);
    let c10 = with_dataset(criterion_10);
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("dataset arithmetic", Box::new(c1)),
        ("feature-map oracles", Box::new(criterion_2)),
        ("channel-model identities", Box::new(criterion_3)),
        ("FSPL closure", Box::new(criterion_4)),
        ("reconstruction properties", Box::new(criterion_5)),
        ("metric identities", Box::new(criterion_6)),
        ("patch round trips", Box::new(criterion_7)),
        ("DBSCAN oracle", Box::new(criterion_8)),
        ("performance", Box::new(criterion_9)),
        ("determinism", Box::new(c10)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} [{tag}] {name}: {detail} ({:.1}s)",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
