//! CSI reconstruction from pilot observations by unrolled proximal gradient
//! iterations, optionally conditioned on the local environment through FiLM
//! modulation, plus a physics path-loss baseline map.
//!
//! One iteration is
//!
//! ```text
//! Z   = H − β·(A ⊙ H − H₀)
//! H   = Γ ⊙ prox_λ(Z) + B
//! ```
//!
//! where `prox_λ` soft-thresholds the unitary 2-D DFT of `Z` (the
//! angular-delay domain, where geometric channels are sparse). After the last
//! iteration the pilot entries are reset to `H₀`.

use std::path::Path;

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::Dft2;
use crate::envfeat::{self, FeatureMap};
use crate::pilot::PilotMask;
use crate::raychan::{
    self, free_space_path_loss_db, ArrayConfig, CsiMatrix, MultipathSet, OfdmConfig, PathComponent, PathLossMap,
    SynthConfig,
};
use crate::scene::{self, footprint_mask, Scene, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Unitary 2-D DFT over (antenna, subcarrier).
    #[default]
    AngularDelay2dDft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `λ_k` is a fraction of the peak transform magnitude of `H₀`, which makes
    /// the schedule invariant to the channel's overall gain.
    #[default]
    Relative,
    /// `λ_k` is used as given.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilmConfig {
    pub enabled: bool,
    pub gain_strength: f64,
    pub bias_strength: f64,
    /// Height normalization in meters.
    pub height_scale: f64,
}

impl Default for FilmConfig {
    fn default() -> Self {
        FilmConfig {
            enabled: true,
            gain_strength: 0.05,
            bias_strength: 0.0,
            height_scale: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxConfig {
    pub iterations: usize,
    pub beta: Vec<f64>,
    pub lambda_thr: Vec<f64>,
    pub threshold_mode: ThresholdMode,
    pub transform: Transform,
    pub film: FilmConfig,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig {
            iterations: 3,
            beta: vec![1.0; 3],
            lambda_thr: vec![0.1, 0.05, 0.02],
            threshold_mode: ThresholdMode::Relative,
            transform: Transform::AngularDelay2dDft,
            film: FilmConfig::default(),
        }
    }
}

impl ProxConfig {
    /// Same schedule value for every iteration.
    pub fn constant(iterations: usize, beta: f64, lambda: f64, mode: ThresholdMode) -> Self {
        ProxConfig {
            iterations,
            beta: vec![beta; iterations],
            lambda_thr: vec![lambda; iterations],
            threshold_mode: mode,
            ..ProxConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.beta.len() != self.iterations || self.lambda_thr.len() != self.iterations {
            return Err(Error::InvalidConfig(format!(
                "beta ({}) and lambda_thr ({}) need one entry per iteration ({})",
                self.beta.len(),
                self.lambda_thr.len(),
                self.iterations
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) || self.lambda_thr.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidConfig(
                "beta must be finite and lambda_thr finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ProxConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = crate::formats::read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        ProxConfig::from_toml(&text)
    }
}

fn check_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `Z = H_prev − β·(A ⊙ H_prev − H₀)`.
pub fn grad_step(h_prev: &CsiMatrix, h0: &CsiMatrix, mask: &PilotMask, beta: f64) -> Result<CsiMatrix> {
    check_shape(h_prev.dim(), h0.dim())?;
    check_shape(h_prev.dim(), mask.dim())?;
    Ok(CsiMatrix::from_array_unchecked(grad_array(
        h_prev.entries(),
        h0.entries(),
        &mask.mask,
        beta,
    )))
}

fn grad_array(h: &Array2<Complex64>, h0: &Array2<Complex64>, mask: &Array2<bool>, beta: f64) -> Array2<Complex64> {
    let mut z = h.clone();
    Zip::from(&mut z).and(h0).and(mask).for_each(|z, &o, &m| {
        let ah = if m { *z } else { Complex64::new(0.0, 0.0) };
        *z -= (ah - o) * beta;
    });
    z
}

#[inline]
fn shrink(c: Complex64, lambda: f64) -> Complex64 {
    let m = c.norm();
    if m <= lambda {
        Complex64::new(0.0, 0.0)
    } else {
        c * ((m - lambda) / m)
    }
}

/// Complex soft-thresholding of the unitary 2-D DFT coefficients of `z` with
/// absolute threshold `lambda`.
pub fn prox_soft_threshold(z: &CsiMatrix, lambda: f64) -> Result<CsiMatrix> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be >= 0, got {lambda}")));
    }
    let (r, c) = z.dim();
    let dft = Dft2::new(r, c);
    Ok(CsiMatrix::from_array_unchecked(prox_array(&dft, z.entries(), lambda)))
}

fn prox_array(dft: &Dft2, z: &Array2<Complex64>, lambda: f64) -> Array2<Complex64> {
    let mut f = dft.forward(z);
    f.mapv_inplace(|c| shrink(c, lambda));
    dft.inverse(&f)
}

/// Elementwise modulation grids. `bias` is added to the real part.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmParams {
    pub gamma: Array2<f64>,
    pub bias: Array2<f64>,
}

impl FilmParams {
    pub fn neutral(n_t: usize, n_k: usize) -> Self {
        FilmParams {
            gamma: Array2::ones((n_t, n_k)),
            bias: Array2::zeros((n_t, n_k)),
        }
    }

    /// `Γ = γ_ant ⊗ γ_sc`, `B = b_ant ⊗ b_sc`.
    pub fn from_profiles(
        gamma_ant: &Array1<f64>,
        gamma_sc: &Array1<f64>,
        bias_ant: &Array1<f64>,
        bias_sc: &Array1<f64>,
    ) -> Self {
        FilmParams {
            gamma: outer(gamma_ant, gamma_sc),
            bias: outer(bias_ant, bias_sc),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.gamma.dim()
    }

    pub fn is_neutral(&self) -> bool {
        self.gamma.iter().all(|&g| g == 1.0) && self.bias.iter().all(|&b| b == 0.0)
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Scalar summary of the environment around the UT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalEnvSummary {
    pub pr_at_ut: f64,
    pub bs_ut_distance: f64,
    pub mean_height_window: f64,
}

pub const DEFAULT_HEIGHT_WINDOW: usize = 9;

impl LocalEnvSummary {
    pub fn neutral() -> Self {
        LocalEnvSummary {
            pr_at_ut: 0.0,
            bs_ut_distance: 0.0,
            mean_height_window: 0.0,
        }
    }

    /// Penetration ratio of the exact BS→UT segment, 3-D BS–UT distance, and
    /// the mean of `height` over the `window × window` cells centered on the
    /// UT cell (clipped at the grid border).
    pub fn compute(scene: &Scene, height: &FeatureMap, ut: Vec3, window: usize) -> Result<Self> {
        let (i, j) = scene
            .grid
            .nearest_cell(ut.x, ut.y)
            .ok_or(Error::OutOfGrid { x: ut.x, y: ut.y })?;
        check_shape(scene.grid.shape(), height.dim())?;
        let half = window / 2;
        let (rows, cols) = height.dim();
        let (r0, r1) = (i.saturating_sub(half), (i + half).min(rows - 1));
        let (c0, c1) = (j.saturating_sub(half), (j + half).min(cols - 1));
        let win = height.values.slice(ndarray::s![r0..=r1, c0..=c1]);
        Ok(LocalEnvSummary {
            pr_at_ut: envfeat::penetration_ratio_point(scene, ut)?,
            bs_ut_distance: scene.bs.distance(ut),
            mean_height_window: win.mean().unwrap_or(0.0),
        })
    }
}

/// Fixed map from the environment summary to FiLM profiles.
///
/// With `s = gain_strength·pr` and `h = mean_height / (mean_height + height_scale)`:
///
/// ```text
/// γ_ant[n] = 1 + s
/// γ_sc[k]  = 1 + s·h·k/(n_k − 1)
/// b_ant[n] = bias_strength·pr
/// b_sc[k]  = 1 / (1 + distance)
/// ```
///
/// The gain compensates the magnitude shrinkage of the prox step, which is
/// larger for obstructed (diffuse) channels; `pr = 0` gives the neutral pair.
pub fn derive_film(env: &LocalEnvSummary, cfg: &FilmConfig, n_t: usize, n_k: usize) -> FilmParams {
    let pr = env.pr_at_ut.clamp(0.0, 1.0);
    if pr == 0.0 || !cfg.enabled {
        return FilmParams::neutral(n_t, n_k);
    }
    let s = cfg.gain_strength * pr;
    let h = env.mean_height_window.max(0.0);
    let h = h / (h + cfg.height_scale);
    let denom = n_k.saturating_sub(1).max(1) as f64;
    let gamma_ant = Array1::from_elem(n_t, 1.0 + s);
    let gamma_sc = Array1::from_shape_fn(n_k, |k| 1.0 + s * h * k as f64 / denom);
    let bias_ant = Array1::from_elem(n_t, cfg.bias_strength * pr);
    let bias_sc = Array1::from_elem(n_k, 1.0 / (1.0 + env.bs_ut_distance.max(0.0)));
    FilmParams::from_profiles(&gamma_ant, &gamma_sc, &bias_ant, &bias_sc)
}

/// `Γ ⊙ H + B` with `B` on the real part.
pub fn film_modulate(h: &CsiMatrix, p: &FilmParams) -> Result<CsiMatrix> {
    check_shape(h.dim(), p.dim())?;
    let mut out = h.entries().clone();
    film_inplace(&mut out, p);
    CsiMatrix::new(out)
}

fn film_inplace(h: &mut Array2<Complex64>, p: &FilmParams) {
    Zip::from(h).and(&p.gamma).and(&p.bias).for_each(|v, &g, &b| {
        *v = *v * g + b;
    });
}

/// Runs the unrolled iterations starting from `H₀`, then restores the pilot
/// entries.
pub fn reconstruct_csi(
    h0: &CsiMatrix,
    mask: &PilotMask,
    env: Option<&LocalEnvSummary>,
    cfg: &ProxConfig,
) -> Result<CsiMatrix> {
    cfg.validate()?;
    check_shape(h0.dim(), mask.dim())?;
    let (n_t, n_k) = h0.dim();
    let dft = Dft2::new(n_t, n_k);
    let film = env
        .map(|e| derive_film(e, &cfg.film, n_t, n_k))
        .filter(|p| !p.is_neutral());
    let scale = match cfg.threshold_mode {
        ThresholdMode::Absolute => 1.0,
        ThresholdMode::Relative => dft.forward(h0.entries()).iter().map(|c| c.norm()).fold(0.0, f64::max),
    };
    let obs = h0.entries();
    let mut h = obs.clone();
    for k in 0..cfg.iterations {
        let z = grad_array(&h, obs, &mask.mask, cfg.beta[k]);
        h = prox_array(&dft, &z, cfg.lambda_thr[k] * scale);
        if let Some(p) = &film {
            film_inplace(&mut h, p);
        }
    }
    Zip::from(&mut h).and(obs).and(&mask.mask).for_each(|v, &o, &m| {
        if m {
            *v = o;
        }
    });
    CsiMatrix::new(h)
}

/// Seeded benchmark channels: sample `i` draws `L ∈ 1..=8` paths from stream
/// `(seed, Suite, i)` with Rayleigh amplitudes (later paths 6 dB weaker than
/// the first), uniform phase, delay in `[0, 100 ns)` and AoD in `(−π/2, π/2)`.
pub fn synthetic_suite(count: usize, seed: u64, array: &ArrayConfig, ofdm: &OfdmConfig) -> Vec<CsiMatrix> {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    (0..count)
        .map(|i| {
            let mut rng = crate::rng::stream(seed, crate::rng::Domain::Suite, i as u64);
            let n_paths = rng.random_range(1..=8);
            let paths = (0..n_paths)
                .map(|l| {
                    let g = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    let g = if l == 0 { g } else { g * 0.5 };
                    let delay = rng.random::<f64>() * 100e-9;
                    let aod = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
                    PathComponent::from_gain_delay_aod(g, delay, aod)
                })
                .collect();
            raychan::assemble_csi(&MultipathSet::new(paths, true), array, ofdm)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlBaselineConfig {
    /// Attenuation in dB per meter of occupied segment length.
    pub kappa: f64,
    pub carrier_hz: f64,
}

impl Default for PlBaselineConfig {
    fn default() -> Self {
        PlBaselineConfig {
            kappa: SynthConfig::default().penetration_db_per_m,
            carrier_hz: ArrayConfig::default().carrier_hz,
        }
    }
}

/// `FSPL(‖q − bs‖, f_c) + κ·occupied length` at every non-footprint cell.
pub fn pl_baseline_map(scene: &Scene, cfg: &PlBaselineConfig) -> Result<PathLossMap> {
    if !(cfg.kappa >= 0.0) || !(cfg.carrier_hz > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid baseline config {cfg:?}")));
    }
    let g = scene.grid;
    let valid = footprint_mask(scene).mapv(|c| !c);
    let values = Array2::from_shape_fn(g.shape(), |(i, j)| {
        if !valid[[i, j]] {
            return f64::NAN;
        }
        let q = g.cell_center(i, j);
        free_space_path_loss_db(scene.bs.distance(q), cfg.carrier_hz)
            + cfg.kappa * scene::occupied_length(&scene.cuboids, scene.bs, q)
    });
    PathLossMap::new(values, valid)
}
