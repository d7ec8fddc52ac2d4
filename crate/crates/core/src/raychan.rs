//! Geometric MISO-OFDM channel synthesizer.
//!
//! [`trace_paths`] enumerates the direct ray, an optional ground bounce and
//! image-method reflections off cuboid side walls (up to second order). Each
//! path carries a free-space amplitude `λ_c / (4π·L)`, carrier phase
//! `exp(-j2π·L/λ_c)`, one reflection coefficient per bounce and
//! `penetration_db_per_m` of loss for every meter it travels inside a cuboid.
//! [`assemble_csi`] turns the path set into the `n_t × n_k` space-frequency
//! matrix
//!
//! ```text
//! h(k) = Σ_l α_l · exp(-j2π·k·Δf·τ_l) · a_k(φ_l),   k = 1..n_k
//! a_k(φ)[n] = exp(-j2π·d/λ_k · n · sin φ),        n = 0..n_t-1
//! ```
//!
//! with `λ_k = c / (f_c + (k-1)·Δf)`. The array is a ULA along the scene y
//! axis, so `sin φ` is the y component of the horizontal departure direction.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats;
use crate::scene::{footprint_mask, occupied_length, Cuboid, Scene, Vec3};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    pub n_t: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    pub carrier_hz: f64,
}

impl ArrayConfig {
    /// ULA with half-carrier-wavelength spacing.
    pub fn half_wavelength(n_t: usize, carrier_hz: f64) -> Self {
        ArrayConfig {
            n_t,
            spacing: SPEED_OF_LIGHT / carrier_hz / 2.0,
            carrier_hz,
        }
    }

    pub fn carrier_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || !(self.spacing > 0.0) || !(self.carrier_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid array {self:?}")));
        }
        Ok(())
    }
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig::half_wavelength(64, 7.5e9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmConfig {
    pub n_k: usize,
    pub subcarrier_spacing_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            n_k: 96,
            subcarrier_spacing_hz: 600e3,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_k == 0 || !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid OFDM config {self:?}")));
        }
        Ok(())
    }

    /// Wavelength of subcarrier `k` (1-based).
    pub fn wavelength(&self, array: &ArrayConfig, k: usize) -> f64 {
        SPEED_OF_LIGHT / (array.carrier_hz + (k as f64 - 1.0) * self.subcarrier_spacing_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Wall reflection order, 0..=2.
    pub reflection_order: u8,
    /// Real amplitude reflection coefficient applied per bounce.
    pub reflection_coeff: f64,
    pub penetration_db_per_m: f64,
    pub ground_reflection: bool,
    pub tx_power_dbm: f64,
    /// Paths received below this power are dropped.
    pub power_threshold_dbm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            reflection_order: 1,
            reflection_coeff: -0.7,
            penetration_db_per_m: 10.0,
            ground_reflection: true,
            tx_power_dbm: 0.0,
            power_threshold_dbm: -250.0,
        }
    }
}

impl SynthConfig {
    /// Direct ray only: no wall or ground reflections.
    pub fn direct_only() -> Self {
        SynthConfig {
            reflection_order: 0,
            ground_reflection: false,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reflection_order > 2 {
            return Err(Error::InvalidConfig("reflection_order is capped at 2".into()));
        }
        if !(self.penetration_db_per_m >= 0.0) || !self.reflection_coeff.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid synthesizer config {self:?}")));
        }
        Ok(())
    }

    /// Path loss reported when every path falls below the power threshold.
    pub fn path_loss_floor_db(&self) -> f64 {
        self.tx_power_dbm - self.power_threshold_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Propagation delay in seconds.
    pub delay: f64,
    /// Angle of departure from array broadside, in `[-π/2, π/2]`.
    pub aod: f64,
    /// Departure azimuth in the scene frame, `atan2(dy, dx)`.
    pub azimuth: f64,
    /// Number of reflections (ground and walls).
    pub bounces: u8,
}

impl PathComponent {
    pub fn from_gain_delay_aod(gain: Complex64, delay: f64, aod: f64) -> Self {
        PathComponent {
            gain,
            delay,
            aod,
            azimuth: aod,
            bounces: 0,
        }
    }
}

fn aod_from_azimuth(azimuth: f64) -> f64 {
    azimuth.sin().clamp(-1.0, 1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultipathSet {
    /// Sorted by delay ascending.
    pub paths: Vec<PathComponent>,
    pub los_present: bool,
}

impl MultipathSet {
    pub fn new(mut paths: Vec<PathComponent>, los_present: bool) -> Self {
        sort_paths(&mut paths);
        MultipathSet { paths, los_present }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Path set seen by an array whose surroundings were rotated by
    /// `quarter_turns × 90°` with the dataset image rotation (see
    /// [`crate::dataset::rotate90`]): each such turn maps scene directions
    /// `(x, y) → (y, -x)`, i.e. subtracts π/2 from every departure azimuth.
    /// Gains and delays are unchanged by a rigid rotation.
    pub fn rotated(&self, quarter_turns: u8) -> MultipathSet {
        let shift = -f64::from(quarter_turns % 4) * PI / 2.0;
        let paths = self
            .paths
            .iter()
            .map(|p| {
                let az = p.azimuth + shift;
                let (s, c) = az.sin_cos();
                let az = s.atan2(c);
                PathComponent {
                    azimuth: az,
                    aod: aod_from_azimuth(az),
                    ..*p
                }
            })
            .collect();
        MultipathSet::new(paths, self.los_present)
    }
}

fn sort_paths(paths: &mut [PathComponent]) {
    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.aod.total_cmp(&b.aod))
            .then(a.gain.norm_sqr().total_cmp(&b.gain.norm_sqr()))
    });
}

/// Complex `n_t × n_k` space-frequency channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    entries: Array2<Complex64>,
}

impl CsiMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidConfig("CSI entries must be finite".into()));
        }
        Ok(CsiMatrix { entries })
    }

    pub(crate) fn from_array_unchecked(entries: Array2<Complex64>) -> Self {
        CsiMatrix { entries }
    }

    pub fn zeros(n_t: usize, n_k: usize) -> Self {
        CsiMatrix {
            entries: Array2::zeros((n_t, n_k)),
        }
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_inner(self) -> Array2<Complex64> {
        self.entries
    }

    /// `(n_t, n_k)`.
    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// Compensated sum of `|h|²`.
    pub fn frobenius_norm_sq(&self) -> f64 {
        let mut acc = Neumaier::default();
        self.entries.iter().for_each(|v| acc.add(v.norm_sqr()));
        acc.total()
    }

    pub fn scaled(&self, s: Complex64) -> CsiMatrix {
        CsiMatrix {
            entries: self.entries.mapv(|v| v * s),
        }
    }

    /// Copy with every component rounded to the nearest `f32`.
    pub fn quantized_f32(&self) -> CsiMatrix {
        CsiMatrix {
            entries: self
                .entries
                .mapv(|v| Complex64::new(v.re as f32 as f64, v.im as f32 as f64)),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        formats::encode_csi(&self.entries)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        CsiMatrix::new(formats::decode_csi(bytes)?).map_err(|_| Error::format(12, "non-finite CSI entry"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        formats::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        CsiMatrix::from_bytes(&formats::read_file(path.as_ref())?)
    }
}

/// Path loss in dB over the receiver grid. Invalid (footprint) cells hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossMap {
    pub values: Array2<f64>,
    pub valid_mask: Array2<bool>,
}

impl PathLossMap {
    /// Builds a map from values and a mask, writing NaN into invalid cells.
    pub fn new(mut values: Array2<f64>, valid_mask: Array2<bool>) -> Result<Self> {
        if values.dim() != valid_mask.dim() {
            return Err(Error::ShapeMismatch {
                expected: values.dim(),
                found: valid_mask.dim(),
            });
        }
        for (v, &ok) in values.iter_mut().zip(valid_mask.iter()) {
            if !ok {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidConfig("non-finite PL value on a valid cell".into()));
            }
        }
        Ok(PathLossMap { values, valid_mask })
    }

    /// Valid cells are exactly the non-NaN ones.
    pub fn from_values(values: Array2<f64>) -> Self {
        let valid_mask = values.mapv(|v| !v.is_nan());
        PathLossMap { values, valid_mask }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|&&v| v).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        formats::encode_map(&self.values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(PathLossMap::from_values(formats::decode_map(bytes)?))
    }

    pub fn to_csv(&self) -> String {
        formats::map_to_csv(&self.values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        formats::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PathLossMap::from_bytes(&formats::read_file(path.as_ref())?)
    }
}

/// Free-space path loss `20·log10(4π·d·f/c)` in dB.
pub fn free_space_path_loss_db(distance: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * PI * distance * freq_hz / SPEED_OF_LIGHT).log10()
}

/// Vertical cuboid face used for image-method reflections.
#[derive(Debug, Clone, Copy)]
struct Face {
    /// 0 for a face of constant x, 1 for constant y.
    axis: usize,
    coord: f64,
    /// Sign of the outward normal along `axis`.
    outward: f64,
    span: (f64, f64),
    height: f64,
}

impl Face {
    fn of(c: &Cuboid) -> [Face; 4] {
        let (ys, xs) = ((c.min_y, c.max_y()), (c.min_x, c.max_x()));
        [
            Face {
                axis: 0,
                coord: c.min_x,
                outward: -1.0,
                span: ys,
                height: c.height,
            },
            Face {
                axis: 0,
                coord: c.max_x(),
                outward: 1.0,
                span: ys,
                height: c.height,
            },
            Face {
                axis: 1,
                coord: c.min_y,
                outward: -1.0,
                span: xs,
                height: c.height,
            },
            Face {
                axis: 1,
                coord: c.max_y(),
                outward: 1.0,
                span: xs,
                height: c.height,
            },
        ]
    }

    fn along(&self, p: Vec3) -> f64 {
        if self.axis == 0 {
            p.x
        } else {
            p.y
        }
    }

    fn across(&self, p: Vec3) -> f64 {
        if self.axis == 0 {
            p.y
        } else {
            p.x
        }
    }

    fn outside(&self, p: Vec3) -> bool {
        (self.along(p) - self.coord) * self.outward > 0.0
    }

    fn mirror(&self, p: Vec3) -> Vec3 {
        let m = 2.0 * self.coord - self.along(p);
        if self.axis == 0 {
            Vec3::new(m, p.y, p.z)
        } else {
            Vec3::new(p.x, m, p.z)
        }
    }

    /// Crossing of segment `a → b` with the face plane, if it lies strictly
    /// inside the segment and within the face rectangle.
    fn hit(&self, a: Vec3, b: Vec3) -> Option<Vec3> {
        let (pa, pb) = (self.along(a), self.along(b));
        let denom = pb - pa;
        if denom == 0.0 {
            return None;
        }
        let t = (self.coord - pa) / denom;
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let mut r = a.lerp(b, t);
        if self.axis == 0 {
            r.x = self.coord;
        } else {
            r.y = self.coord;
        }
        let u = self.across(r);
        (u >= self.span.0 && u <= self.span.1 && r.z >= 0.0 && r.z <= self.height).then_some(r)
    }
}

struct PathBuilder<'a> {
    cuboids: &'a [Cuboid],
    cfg: &'a SynthConfig,
    wavelength: f64,
    bs: Vec3,
}

impl PathBuilder<'_> {
    /// Path through the given reflection points (`bs → pts… → ut`).
    fn build(&self, points: &[Vec3], bounces: u8) -> Option<(PathComponent, f64)> {
        let mut length = 0.0;
        let mut occupied = 0.0;
        for w in points.windows(2) {
            let seg = w[0].distance(w[1]);
            if seg == 0.0 {
                return None;
            }
            length += seg;
            occupied += occupied_length(self.cuboids, w[0], w[1]);
        }
        let amp = self.wavelength / (4.0 * PI * length)
            * self.cfg.reflection_coeff.powi(bounces as i32)
            * 10f64.powf(-self.cfg.penetration_db_per_m * occupied / 20.0);
        let power_dbm = self.cfg.tx_power_dbm + 20.0 * amp.abs().log10();
        if !(power_dbm >= self.cfg.power_threshold_dbm) {
            return None;
        }
        let gain = Complex64::from_polar(1.0, -2.0 * PI * length / self.wavelength) * amp;
        let dep = points[1] - self.bs;
        let azimuth = if dep.x == 0.0 && dep.y == 0.0 {
            0.0
        } else {
            dep.y.atan2(dep.x)
        };
        Some((
            PathComponent {
                gain,
                delay: length / SPEED_OF_LIGHT,
                aod: aod_from_azimuth(azimuth),
                azimuth,
                bounces,
            },
            occupied,
        ))
    }
}

/// Enumerates propagation paths from the scene BS to `ut`.
pub fn trace_paths(scene: &Scene, ut: Vec3, cfg: &SynthConfig, array: &ArrayConfig) -> Result<MultipathSet> {
    cfg.validate()?;
    array.validate()?;
    if !ut.is_finite() || !scene.grid.contains_xy(ut.x, ut.y) {
        return Err(Error::OutOfGrid { x: ut.x, y: ut.y });
    }
    if scene.cuboids.iter().any(|c| c.contains(ut)) {
        return Err(Error::UtInsideScatterer {
            x: ut.x,
            y: ut.y,
            z: ut.z,
        });
    }
    let bs = scene.bs;
    if bs == ut {
        return Err(Error::DegenerateSegment);
    }
    let builder = PathBuilder {
        cuboids: &scene.cuboids,
        cfg,
        wavelength: array.carrier_wavelength(),
        bs,
    };
    let mut paths = Vec::new();

    let mut los_present = false;
    if let Some((p, occ)) = builder.build(&[bs, ut], 0) {
        los_present = occ == 0.0;
        paths.push(p);
    } else if occupied_length(&scene.cuboids, bs, ut) == 0.0 {
        los_present = true;
    }

    if cfg.ground_reflection && bs.z > 0.0 && ut.z > 0.0 {
        let image = Vec3::new(bs.x, bs.y, -bs.z);
        let t = bs.z / (bs.z + ut.z);
        let mut g = image.lerp(ut, t);
        g.z = 0.0;
        if let Some((p, _)) = builder.build(&[bs, g, ut], 1) {
            paths.push(p);
        }
    }

    if cfg.reflection_order >= 1 {
        let faces: Vec<Face> = scene.cuboids.iter().flat_map(Face::of).collect();
        for f in &faces {
            if !(f.outside(bs) && f.outside(ut)) {
                continue;
            }
            if let Some(r) = f.hit(f.mirror(bs), ut) {
                if let Some((p, _)) = builder.build(&[bs, r, ut], 1) {
                    paths.push(p);
                }
            }
        }
        if cfg.reflection_order >= 2 {
            for (i, f1) in faces.iter().enumerate() {
                if !f1.outside(bs) {
                    continue;
                }
                let img1 = f1.mirror(bs);
                for (j, f2) in faces.iter().enumerate() {
                    if i == j || !f2.outside(ut) || !f2.outside(img1) {
                        continue;
                    }
                    let img2 = f2.mirror(img1);
                    let Some(r2) = f2.hit(img2, ut) else { continue };
                    if !f1.outside(r2) {
                        continue;
                    }
                    let Some(r1) = f1.hit(img1, r2) else { continue };
                    if let Some((p, _)) = builder.build(&[bs, r1, r2, ut], 2) {
                        paths.push(p);
                    }
                }
            }
        }
    }
    Ok(MultipathSet::new(paths, los_present))
}

/// ULA steering vector for subcarrier `k` (1-based).
pub fn steering_vector(aod: f64, k: usize, array: &ArrayConfig, ofdm: &OfdmConfig) -> Result<Array1<Complex64>> {
    if k == 0 || k > ofdm.n_k {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: ofdm.n_k,
        });
    }
    let psi = 2.0 * PI * array.spacing / ofdm.wavelength(array, k) * aod.sin();
    Ok(Array1::from_shape_fn(array.n_t, |n| {
        Complex64::from_polar(1.0, -psi * n as f64)
    }))
}

/// Column-by-column accumulation shared by [`assemble_csi`] and the PL sweep.
/// `visit(k, column)` receives each finished column (0-based `k`).
fn for_each_column(
    paths: &MultipathSet,
    array: &ArrayConfig,
    ofdm: &OfdmConfig,
    mut visit: impl FnMut(usize, &[Complex64]),
) {
    let n_t = array.n_t;
    let mut col = vec![Complex64::new(0.0, 0.0); n_t];
    let sines: Vec<f64> = paths.paths.iter().map(|p| p.aod.sin()).collect();
    for k in 1..=ofdm.n_k {
        col.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let psi_scale = 2.0 * PI * array.spacing / ofdm.wavelength(array, k);
        for (p, &s) in paths.paths.iter().zip(&sines) {
            let coeff =
                p.gain * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * ofdm.subcarrier_spacing_hz * p.delay);
            let step = Complex64::from_polar(1.0, -psi_scale * s);
            let mut term = coeff;
            for v in col.iter_mut() {
                *v += term;
                term *= step;
            }
        }
        visit(k - 1, &col);
    }
}

/// Kahan-Babuska summation.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Space-frequency CSI matrix of a path set; an empty set gives zeros.
pub fn assemble_csi(paths: &MultipathSet, array: &ArrayConfig, ofdm: &OfdmConfig) -> CsiMatrix {
    let mut h = Array2::zeros((array.n_t, ofdm.n_k));
    for_each_column(paths, array, ofdm, |k, col| {
        h.column_mut(k).iter_mut().zip(col).for_each(|(dst, v)| *dst = *v);
    });
    CsiMatrix::from_array_unchecked(h)
}

/// `-10·log10(‖H‖²_F / (n_t·n_k))`.
pub fn path_loss_db(h: &CsiMatrix) -> Result<f64> {
    let (n_t, n_k) = h.dim();
    let energy = h.frobenius_norm_sq();
    if !(energy > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(-10.0 * (energy / (n_t * n_k) as f64).log10())
}

/// Path loss of a path set without materializing the matrix. Same sums as
/// `path_loss_db(&assemble_csi(..))`.
pub fn path_loss_of_paths(paths: &MultipathSet, array: &ArrayConfig, ofdm: &OfdmConfig) -> Result<f64> {
    let mut acc = Neumaier::default();
    for_each_column(paths, array, ofdm, |_, col| {
        col.iter().for_each(|v| acc.add(v.norm_sqr()));
    });
    let energy = acc.total();
    if !(energy > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(-10.0 * (energy / (array.n_t * ofdm.n_k) as f64).log10())
}

/// Synthesized path-loss map over the scene grid. Footprint cells are invalid;
/// cells where every path falls under the power threshold get
/// [`SynthConfig::path_loss_floor_db`].
pub fn pl_map(scene: &Scene, cfg: &SynthConfig, array: &ArrayConfig, ofdm: &OfdmConfig) -> Result<PathLossMap> {
    cfg.validate()?;
    array.validate()?;
    ofdm.validate()?;
    let g = scene.grid;
    let valid = footprint_mask(scene).mapv(|covered| !covered);
    let rows: Vec<Vec<f64>> = (0..g.rows)
        .into_par_iter()
        .map(|i| {
            (0..g.cols)
                .map(|j| {
                    if !valid[[i, j]] {
                        return Ok(f64::NAN);
                    }
                    let q = g.cell_center(i, j);
                    let paths = trace_paths(scene, q, cfg, array)?;
                    match path_loss_of_paths(&paths, array, ofdm) {
                        Ok(pl) => Ok(pl),
                        Err(Error::ZeroChannel) => Ok(cfg.path_loss_floor_db()),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values =
        Array2::from_shape_vec(g.shape(), rows.into_iter().flatten().collect()).expect("row lengths match the grid");
    PathLossMap::new(values, valid)
}
