//! Geometric scenario model: axis-aligned cuboid scatterers standing on the
//! ground plane, a base station, and the regular receiver grid.
//!
//! Grid convention: row `i` runs along +y and column `j` along +x. The center
//! of cell `(i, j)` is `origin + ((j + 0.5)·res, (i + 0.5)·res, rx_height)`.

use std::ops::{Add, Mul, Sub};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::rng::{self, Domain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Point at parameter `t` on the segment `self → to`.
    pub fn lerp(self, to: Vec3, t: f64) -> Vec3 {
        self + (to - self) * t
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Axis-aligned box with its base on the ground plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CuboidRaw")]
pub struct Cuboid {
    pub min_x: f64,
    pub min_y: f64,
    pub size_x: f64,
    pub size_y: f64,
    pub height: f64,
}

#[derive(Deserialize)]
struct CuboidRaw {
    min_x: f64,
    min_y: f64,
    size_x: f64,
    size_y: f64,
    height: f64,
}

impl TryFrom<CuboidRaw> for Cuboid {
    type Error = Error;
    fn try_from(r: CuboidRaw) -> Result<Self> {
        Cuboid::new(r.min_x, r.min_y, r.size_x, r.size_y, r.height)
    }
}

impl Cuboid {
    pub fn new(min_x: f64, min_y: f64, size_x: f64, size_y: f64, height: f64) -> Result<Self> {
        let finite = [min_x, min_y, size_x, size_y, height].iter().all(|v| v.is_finite());
        if !finite || size_x <= 0.0 || size_y <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cuboid needs finite coordinates and positive extents, got \
                 size ({size_x}, {size_y}) height {height}"
            )));
        }
        Ok(Cuboid {
            min_x,
            min_y,
            size_x,
            size_y,
            height,
        })
    }

    /// Builds the cuboid spanning `[x0, x1] × [y0, y1] × [0, height]`.
    pub fn from_bounds(x0: f64, x1: f64, y0: f64, y1: f64, height: f64) -> Result<Self> {
        Cuboid::new(x0, y0, x1 - x0, y1 - y0, height)
    }

    pub fn max_x(&self) -> f64 {
        self.min_x + self.size_x
    }

    pub fn max_y(&self) -> f64 {
        self.min_y + self.size_y
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            self.min_x + 0.5 * self.size_x,
            self.min_y + 0.5 * self.size_y,
            0.5 * self.height,
        )
    }

    /// Closed footprint membership test.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x() && y >= self.min_y && y <= self.max_y()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.contains_xy(p.x, p.y) && p.z >= 0.0 && p.z <= self.height
    }

    pub(crate) fn lower(&self) -> [f64; 3] {
        [self.min_x, self.min_y, 0.0]
    }

    pub(crate) fn upper(&self) -> [f64; 3] {
        [self.max_x(), self.max_y(), self.height]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec3,
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
    pub rx_height: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            origin: Vec3::default(),
            resolution: 0.1,
            rows: 124,
            cols: 124,
            rx_height: 1.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite())
            || self.rows == 0
            || self.cols == 0
            || !self.origin.is_finite()
            || !self.rx_height.is_finite()
        {
            return Err(Error::InvalidConfig(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.resolution
    }

    pub fn depth(&self) -> f64 {
        self.rows as f64 * self.resolution
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                (col as f64 + 0.5) * self.resolution,
                (row as f64 + 0.5) * self.resolution,
                self.rx_height,
            )
    }

    /// Closed extent test in the horizontal plane.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.origin.x, y - self.origin.y);
        dx >= 0.0 && dx <= self.width() && dy >= 0.0 && dy <= self.depth()
    }

    /// Cell whose center is nearest to `(x, y)`, or `None` outside the extent.
    /// Points on a shared cell edge go to the cell with the larger index.
    pub fn nearest_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.contains_xy(x, y) {
            return None;
        }
        let col = ((x - self.origin.x) / self.resolution).floor() as usize;
        let row = ((y - self.origin.y) / self.resolution).floor() as usize;
        Some((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// Range of cell indices along one axis whose centers may fall in
    /// `[lo, hi]`, padded by one cell; callers confirm with an exact test.
    pub(crate) fn candidate_range(origin: f64, res: f64, n: usize, lo: f64, hi: f64) -> (usize, usize) {
        let a = ((lo - origin) / res - 0.5).floor() - 1.0;
        let b = ((hi - origin) / res - 0.5).ceil() + 1.0;
        let a = a.max(0.0) as usize;
        let b = b.min(n as f64 - 1.0);
        if b < 0.0 {
            return (1, 0);
        }
        (a, b as usize)
    }
}

/// A complete static (or reconstructed) scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneRaw")]
pub struct Scene {
    pub bs: Vec3,
    pub grid: GridSpec,
    pub cuboids: Vec<Cuboid>,
}

#[derive(Deserialize)]
struct SceneRaw {
    bs: Vec3,
    grid: GridSpec,
    cuboids: Vec<Cuboid>,
}

impl TryFrom<SceneRaw> for Scene {
    type Error = Error;
    fn try_from(r: SceneRaw) -> Result<Self> {
        Scene::new(r.grid, r.bs, r.cuboids)
    }
}

impl Scene {
    pub fn new(grid: GridSpec, bs: Vec3, cuboids: Vec<Cuboid>) -> Result<Self> {
        grid.validate()?;
        if !bs.is_finite() || bs.z <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "base station must be finite and above ground, got {bs:?}"
            )));
        }
        if !grid.contains_xy(bs.x, bs.y) {
            return Err(Error::OutOfGrid { x: bs.x, y: bs.y });
        }
        Ok(Scene { bs, grid, cuboids })
    }

    /// Scene with the base station on the cell center nearest the grid
    /// middle (cell `(rows/2, cols/2)`), raised to `bs_height`.
    pub fn centered(grid: GridSpec, bs_height: f64, cuboids: Vec<Cuboid>) -> Result<Self> {
        let c = grid.cell_center(grid.rows / 2, grid.cols / 2);
        Scene::new(grid, Vec3::new(c.x, c.y, grid.origin.z + bs_height), cuboids)
    }

    pub fn empty() -> Self {
        Scene::centered(GridSpec::default(), 2.0, Vec::new()).expect("default grid is valid")
    }

    /// Grid cell holding the base station.
    pub fn bs_cell(&self) -> (usize, usize) {
        self.grid
            .nearest_cell(self.bs.x, self.bs.y)
            .expect("scene construction checks the BS extent")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::formats::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }
}

/// Intersection of a segment with a single cuboid, in segment parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub cuboid: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanResult {
    /// Per-cuboid intervals sorted by entry parameter.
    pub intervals: Vec<Interval>,
    /// Scatterer intersection nearest to the segment start.
    pub first_entry: Option<Vec3>,
    /// Scatterer intersection nearest to the segment end.
    pub last_exit: Option<Vec3>,
    pub segment_length: f64,
}

impl SpanResult {
    pub fn is_los(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn t_first_entry(&self) -> Option<f64> {
        self.intervals.first().map(|iv| iv.t_enter)
    }

    pub fn t_last_exit(&self) -> Option<f64> {
        self.intervals.iter().map(|iv| iv.t_exit).reduce(f64::max)
    }

    /// Fraction of the segment covered by the union of all intervals.
    pub fn occupied_fraction(&self) -> f64 {
        union_measure(self.intervals.iter().map(|iv| (iv.t_enter, iv.t_exit)))
    }

    pub fn occupied_length(&self) -> f64 {
        self.occupied_fraction() * self.segment_length
    }
}

/// Measure of a union of intervals given in ascending order of start.
fn union_measure(sorted: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (a, b) in sorted {
        match current {
            Some((ca, cb)) if a <= cb => current = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                current = Some((a, b));
            }
            None => current = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = current {
        total += cb - ca;
    }
    total
}

/// Slab-method clip of the segment `p0 → p1` against `bx`.
///
/// Returns `(t_enter, t_exit)` with `0 ≤ t_enter < t_exit ≤ 1`, or `None` on a
/// miss. Grazing contacts where the clipped interval collapses to a point are
/// reported as misses.
pub fn ray_box_intersection(p0: Vec3, p1: Vec3, bx: &Cuboid) -> Result<Option<(f64, f64)>> {
    if p0 == p1 {
        return Err(Error::DegenerateSegment);
    }
    Ok(clip_segment(p0, p1 - p0, bx))
}

#[inline]
pub(crate) fn clip_segment(p0: Vec3, dir: Vec3, bx: &Cuboid) -> Option<(f64, f64)> {
    let origin = [p0.x, p0.y, p0.z];
    let d = [dir.x, dir.y, dir.z];
    let lo = bx.lower();
    let hi = bx.upper();
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for a in 0..3 {
        if d[a] == 0.0 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let mut ta = (lo[a] - origin[a]) * inv;
        let mut tb = (hi[a] - origin[a]) * inv;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 >= t1 {
            return None;
        }
    }
    Some((t0, t1))
}

pub fn segment_intersections(scene: &Scene, p0: Vec3, p1: Vec3) -> Result<SpanResult> {
    segment_intersections_with(&scene.cuboids, p0, p1)
}

pub fn segment_intersections_with(cuboids: &[Cuboid], p0: Vec3, p1: Vec3) -> Result<SpanResult> {
    if p0 == p1 {
        return Err(Error::DegenerateSegment);
    }
    let dir = p1 - p0;
    let mut intervals: Vec<Interval> = cuboids
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            clip_segment(p0, dir, c).map(|(t_enter, t_exit)| Interval {
                cuboid: i,
                t_enter,
                t_exit,
            })
        })
        .collect();
    intervals.sort_by(|a, b| a.t_enter.total_cmp(&b.t_enter).then(a.t_exit.total_cmp(&b.t_exit)));
    let first_entry = intervals.first().map(|iv| p0.lerp(p1, iv.t_enter));
    let last_exit = intervals
        .iter()
        .map(|iv| iv.t_exit)
        .reduce(f64::max)
        .map(|t| p0.lerp(p1, t));
    Ok(SpanResult {
        intervals,
        first_entry,
        last_exit,
        segment_length: dir.norm(),
    })
}

/// Allocation-free summary of a segment against all cuboids:
/// `(first entry, last exit)` parameters, `None` for line of sight.
#[inline]
pub(crate) fn span_extremes(cuboids: &[Cuboid], p0: Vec3, p1: Vec3) -> Option<(f64, f64)> {
    let dir = p1 - p0;
    let mut span: Option<(f64, f64)> = None;
    for c in cuboids {
        if let Some((a, b)) = clip_segment(p0, dir, c) {
            span = Some(match span {
                Some((sa, sb)) => (sa.min(a), sb.max(b)),
                None => (a, b),
            });
        }
    }
    span
}

/// Length of the segment covered by the union of cuboid interiors.
pub(crate) fn occupied_length(cuboids: &[Cuboid], p0: Vec3, p1: Vec3) -> f64 {
    let dir = p1 - p0;
    let mut buf: SmallVec<[(f64, f64); 8]> = SmallVec::new();
    for c in cuboids {
        if let Some(iv) = clip_segment(p0, dir, c) {
            buf.push(iv);
        }
    }
    if buf.is_empty() {
        return 0.0;
    }
    buf.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    union_measure(buf.iter().copied()) * dir.norm()
}

/// Parameters of the random scenario generator. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub count_range: [usize; 2],
    pub size_range: [f64; 2],
    pub height_range: [f64; 2],
    /// Horizontal extent `[x, y]` in meters; must equal the grid extent.
    pub area: [f64; 2],
    pub grid: GridSpec,
    pub bs_height: f64,
    pub max_attempts: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            count_range: [5, 15],
            size_range: [0.5, 3.0],
            height_range: [1.0, 6.0],
            area: [12.4, 12.4],
            grid: GridSpec::default(),
            bs_height: 2.0,
            max_attempts: 200,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.count_range[0] > self.count_range[1] {
            return bad("count_range is empty");
        }
        for (name, r) in [("size_range", self.size_range), ("height_range", self.height_range)] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return bad(&format!("{name} must satisfy 0 < lo <= hi"));
            }
        }
        let tol = 1e-9 * self.area[0].abs().max(self.area[1].abs()).max(1.0);
        if (self.area[0] - self.grid.width()).abs() > tol || (self.area[1] - self.grid.depth()).abs() > tol {
            return bad("area does not match the grid extent");
        }
        if self.size_range[1] > self.area[0].min(self.area[1]) {
            return bad("cuboids larger than the area");
        }
        if self.bs_height <= 0.0 {
            return bad("bs_height must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Random scene for `seed`, equivalent to [`generate_scenario_indexed`] with
/// index 0.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scene> {
    generate_scenario_indexed(config, seed, 0)
}

/// Random scene drawn from stream `(seed, Scenario, index)`.
///
/// Draw order: cuboid count, then per cuboid and per attempt
/// `size_x, size_y, height, min_x, min_y`. An attempt is rejected when the
/// footprint covers the base-station position.
pub fn generate_scenario_indexed(config: &ScenarioConfig, seed: u64, index: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = rng::stream(seed, Domain::Scenario, index);
    let skeleton = Scene::centered(config.grid, config.bs_height, Vec::new())?;
    let bs = skeleton.bs;
    let origin = config.grid.origin;
    let count = rng.random_range(config.count_range[0]..=config.count_range[1]);
    let mut cuboids = Vec::with_capacity(count);
    for index in 0..count {
        let mut placed = None;
        for _ in 0..config.max_attempts.max(1) {
            let sx = uniform(&mut rng, config.size_range[0], config.size_range[1]);
            let sy = uniform(&mut rng, config.size_range[0], config.size_range[1]);
            let h = uniform(&mut rng, config.height_range[0], config.height_range[1]);
            let x0 = origin.x + uniform(&mut rng, 0.0, config.area[0] - sx);
            let y0 = origin.y + uniform(&mut rng, 0.0, config.area[1] - sy);
            let c = Cuboid::new(x0, y0, sx, sy, h)?;
            if !c.contains_xy(bs.x, bs.y) {
                placed = Some(c);
                break;
            }
        }
        match placed {
            Some(c) => cuboids.push(c),
            None => {
                return Err(Error::PlacementFailed {
                    index,
                    attempts: config.max_attempts,
                })
            }
        }
    }
    Scene::new(config.grid, bs, cuboids)
}

/// Binary grid marking cells whose centers lie inside any cuboid footprint.
pub fn footprint_mask(scene: &Scene) -> Array2<bool> {
    let g = &scene.grid;
    let mut mask = Array2::from_elem(g.shape(), false);
    for c in &scene.cuboids {
        let (r0, r1) = GridSpec::candidate_range(g.origin.y, g.resolution, g.rows, c.min_y, c.max_y());
        let (c0, c1) = GridSpec::candidate_range(g.origin.x, g.resolution, g.cols, c.min_x, c.max_x());
        for i in r0..=r1 {
            for j in c0..=c1 {
                let p = g.cell_center(i, j);
                if c.contains_xy(p.x, p.y) {
                    mask[[i, j]] = true;
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> Cuboid {
        Cuboid::new(0.0, 0.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn slab_through_unit_cube() {
        let r = ray_box_intersection(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(3.0, 0.5, 0.5), &unit_cube())
            .unwrap()
            .unwrap();
        assert!((r.0 - 0.25).abs() < 1e-15 && (r.1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn slab_miss_and_degenerate() {
        let c = unit_cube();
        let miss = ray_box_intersection(Vec3::new(-1.0, 2.0, 0.5), Vec3::new(3.0, 2.0, 0.5), &c).unwrap();
        assert!(miss.is_none());
        let p = Vec3::new(0.2, 0.2, 0.2);
        assert!(matches!(ray_box_intersection(p, p, &c), Err(Error::DegenerateSegment)));
    }

    #[test]
    fn slab_endpoint_inside_clamps_exit() {
        // Segment (-1, .5, .5) -> (0.5, .5, .5): enters at x = 0, i.e. t = 2/3.
        let r = ray_box_intersection(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(0.5, 0.5, 0.5), &unit_cube())
            .unwrap()
            .unwrap();
        assert!((r.0 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.1, 1.0);
    }

    #[test]
    fn grazing_contact_is_discarded() {
        // Touches the cube only at the edge x = 1, z = 1.
        let r = ray_box_intersection(Vec3::new(0.0, 0.5, 2.0), Vec3::new(2.0, 0.5, 0.0), &unit_cube()).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn empty_scene_is_los() {
        let s = Scene::empty();
        let r = segment_intersections(&s, s.bs, Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(r.is_los());
        assert!(r.first_entry.is_none() && r.last_exit.is_none());
        assert_eq!(r.occupied_length(), 0.0);
    }

    #[test]
    fn one_cuboid_mid_segment() {
        let c = Cuboid::from_bounds(4.0, 6.0, -1.0, 1.0, 5.0).unwrap();
        let s = Scene::new(
            GridSpec {
                origin: Vec3::new(-1.0, -6.0, 0.0),
                ..GridSpec::default()
            },
            Vec3::new(0.0, 0.0, 2.0),
            vec![c],
        )
        .unwrap();
        let r = segment_intersections(&s, Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.intervals.len(), 1);
        let qi = r.first_entry.unwrap();
        let qo = r.last_exit.unwrap();
        assert!((qi.x - 4.0).abs() < 1e-12 && (qo.x - 6.0).abs() < 1e-12);
        assert!((r.occupied_length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_disjoint_cuboids() {
        let a = Cuboid::from_bounds(2.0, 3.0, -1.0, 1.0, 5.0).unwrap();
        let b = Cuboid::from_bounds(6.0, 8.0, -1.0, 1.0, 5.0).unwrap();
        let r = segment_intersections_with(&[b, a], Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.intervals.len(), 2);
        assert_eq!(r.intervals[0].cuboid, 1);
        assert!((r.first_entry.unwrap().x - 2.0).abs() < 1e-12);
        assert!((r.last_exit.unwrap().x - 8.0).abs() < 1e-12);
        assert!((r.occupied_length() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_intervals_are_merged_for_occupancy() {
        let a = Cuboid::from_bounds(2.0, 5.0, -1.0, 1.0, 5.0).unwrap();
        let b = Cuboid::from_bounds(4.0, 6.0, -1.0, 1.0, 5.0).unwrap();
        let p0 = Vec3::new(0.0, 0.0, 1.0);
        let p1 = Vec3::new(10.0, 0.0, 1.0);
        assert!((occupied_length(&[a, b], p0, p1) - 4.0).abs() < 1e-12);
        let r = segment_intersections_with(&[a, b], p0, p1).unwrap();
        assert!((r.occupied_length() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_generation_edge_cases() {
        let cfg = ScenarioConfig {
            count_range: [0, 0],
            ..ScenarioConfig::default()
        };
        assert!(generate_scenario(&cfg, 3).unwrap().cuboids.is_empty());

        let cfg = ScenarioConfig {
            count_range: [5, 5],
            ..ScenarioConfig::default()
        };
        let a = generate_scenario(&cfg, 11).unwrap();
        let b = generate_scenario(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cuboids.len(), 5);
        for c in &a.cuboids {
            assert!(c.min_x >= 0.0 && c.max_x() <= 12.4 + 1e-9);
            assert!(c.min_y >= 0.0 && c.max_y() <= 12.4 + 1e-9);
            assert!(!c.contains_xy(a.bs.x, a.bs.y));
        }
        assert!(!footprint_mask(&a)[a.bs_cell()]);
    }

    #[test]
    fn placement_failure_is_reported() {
        // Every footprint covers the whole area and therefore the BS.
        let cfg = ScenarioConfig {
            count_range: [1, 1],
            size_range: [12.4, 12.4],
            max_attempts: 5,
            ..ScenarioConfig::default()
        };
        assert!(matches!(generate_scenario(&cfg, 1), Err(Error::PlacementFailed { .. })));
    }

    #[test]
    fn bad_area_rejected() {
        let cfg = ScenarioConfig {
            area: [10.0, 12.4],
            ..ScenarioConfig::default()
        };
        assert!(matches!(generate_scenario(&cfg, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn footprint_mask_counts() {
        let empty = Scene::empty();
        assert!(footprint_mask(&empty).iter().all(|&v| !v));

        let whole = Cuboid::new(-1.0, -1.0, 20.0, 20.0, 3.0).unwrap();
        let mut s = Scene::empty();
        s.cuboids.push(whole);
        assert!(footprint_mask(&s).iter().all(|&v| v));

        let mut s = Scene::empty();
        s.cuboids.push(Cuboid::new(2.0, 3.0, 1.0, 1.0, 2.0).unwrap());
        assert_eq!(footprint_mask(&s).iter().filter(|&&v| v).count(), 100);
    }

    #[test]
    fn default_bs_is_on_cell_62() {
        let s = Scene::empty();
        assert_eq!(s.bs_cell(), (62, 62));
        assert!((s.bs.x - 6.25).abs() < 1e-12 && s.bs.z == 2.0);
    }

    #[test]
    fn scene_json_round_trip_and_field_names() {
        let mut s = Scene::empty();
        s.cuboids.push(Cuboid::new(1.0, 2.0, 0.5, 0.7, 3.0).unwrap());
        let text = s.to_json();
        for key in [
            "\"bs\"",
            "\"grid\"",
            "\"origin\"",
            "\"resolution\"",
            "\"rows\"",
            "\"cols\"",
            "\"rx_height\"",
            "\"cuboids\"",
            "\"min_x\"",
            "\"size_y\"",
            "\"height\"",
        ] {
            assert!(text.contains(key), "missing {key}");
        }
        assert_eq!(Scene::from_json(&text).unwrap(), s);
        let bad = text.replace("0.7", "-0.7");
        assert!(Scene::from_json(&bad).is_err());
    }
}
