//! Synthetic sensing of dynamic objects: point-cloud capture, coarse
//! localization, DBSCAN-based fine localization with cuboid fitting, and
//! injection of the fitted cuboids into a static scene.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::formats;
use crate::rng::{self, Domain};
use crate::scene::{Cuboid, Scene, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        formats::encode_cloud(&self.points)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if path.extension().is_some_and(|e| e == "xyz") {
            formats::cloud_to_xyz(&self.points).into_bytes()
        } else {
            self.to_bytes()
        };
        formats::write_atomic(path, &bytes)
    }

    /// Reads `.xyz` text or the packed binary, chosen by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = formats::read_file(path)?;
        let points = if path.extension().is_some_and(|e| e == "xyz") {
            let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
            formats::cloud_from_xyz(&text)?
        } else {
            formats::decode_cloud(&bytes)?
        };
        Ok(PointCloud { points, seed: 0 })
    }
}

/// Faces seen by an overhead/side sensor: the top and the four walls.
fn visible_faces(c: &Cuboid) -> [(f64, [Vec3; 3]); 5] {
    let (x0, y0, x1, y1, h) = (c.min_x, c.min_y, c.max_x(), c.max_y(), c.height);
    let v = Vec3::new;
    // (area, [corner, edge u, edge v])
    [
        (
            c.size_x * c.size_y,
            [v(x0, y0, h), v(c.size_x, 0.0, 0.0), v(0.0, c.size_y, 0.0)],
        ),
        (c.size_y * h, [v(x0, y0, 0.0), v(0.0, c.size_y, 0.0), v(0.0, 0.0, h)]),
        (c.size_y * h, [v(x1, y0, 0.0), v(0.0, c.size_y, 0.0), v(0.0, 0.0, h)]),
        (c.size_x * h, [v(x0, y0, 0.0), v(c.size_x, 0.0, 0.0), v(0.0, 0.0, h)]),
        (c.size_x * h, [v(x0, y1, 0.0), v(c.size_x, 0.0, 0.0), v(0.0, 0.0, h)]),
    ]
}

/// Total area of the sampled faces.
pub fn visible_area(c: &Cuboid) -> f64 {
    visible_faces(c).iter().map(|f| f.0).sum()
}

/// `round(density · visible area)` points, each on a face chosen with
/// probability proportional to its area, uniform within the face, plus
/// isotropic Gaussian noise of standard deviation `noise_sigma`.
pub fn synth_point_cloud(obj: &Cuboid, density: f64, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    synth_point_cloud_indexed(obj, density, noise_sigma, seed, 0)
}

pub fn synth_point_cloud_indexed(
    obj: &Cuboid,
    density: f64,
    noise_sigma: f64,
    seed: u64,
    index: u64,
) -> Result<PointCloud> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "point density must be positive, got {density}"
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let faces = visible_faces(obj);
    let total: f64 = faces.iter().map(|f| f.0).sum();
    let count = (density * total).round() as usize;
    let noise = Normal::new(0.0, noise_sigma).expect("finite sigma");
    let mut rng = rng::stream(seed, Domain::PointCloud, index);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.random::<f64>() * total;
        let mut face = &faces[faces.len() - 1];
        for f in &faces {
            if pick < f.0 {
                face = f;
                break;
            }
            pick -= f.0;
        }
        let [o, u, v] = face.1;
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        let mut p = o + u * a + v * b;
        if noise_sigma > 0.0 {
            p = p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
        points.push(p);
    }
    Ok(PointCloud { points, seed })
}

/// True center plus a Gaussian offset of standard deviation `bias_sigma` on
/// each axis.
pub fn simulate_coarse(obj: &Cuboid, bias_sigma: f64, seed: u64) -> Result<Vec3> {
    simulate_coarse_indexed(obj, bias_sigma, seed, 0)
}

pub fn simulate_coarse_indexed(obj: &Cuboid, bias_sigma: f64, seed: u64, index: u64) -> Result<Vec3> {
    if !(bias_sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bias sigma must be >= 0, got {bias_sigma}"
        )));
    }
    let c = obj.center();
    if bias_sigma == 0.0 {
        return Ok(c);
    }
    let n = Normal::new(0.0, bias_sigma).expect("finite sigma");
    let mut rng = rng::stream(seed, Domain::CoarseLocalization, index);
    Ok(c + Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: 0.05, min_pts: 5 }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() || self.min_pts == 0 {
            return Err(Error::InvalidConfig(format!("invalid DBSCAN parameters {self:?}")));
        }
        Ok(())
    }
}

pub const NOISE: i32 = -1;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index becomes the root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Density-based clustering with Euclidean 3-D distance.
///
/// Neighborhoods are closed balls of radius `eps` and include the point
/// itself; a point is core when its neighborhood has at least `min_pts`
/// points. Clusters are the connected components of core points. A non-core
/// point within `eps` of some core point joins the cluster of its nearest core
/// neighbor (ties to the lower index); all other points are noise (`-1`).
/// Clusters are numbered in order of their lowest core point index.
pub fn dbscan(points: &[Vec3], p: &DbscanParams) -> Result<Vec<i32>> {
    p.validate()?;
    let key = |q: &Vec3| {
        (
            (q.x / p.eps).floor() as i64,
            (q.y / p.eps).floor() as i64,
            (q.z / p.eps).floor() as i64,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, q) in points.iter().enumerate() {
        if !q.is_finite() {
            return Err(Error::InvalidConfig(format!("point {i} is not finite")));
        }
        cells.entry(key(q)).or_default().push(i);
    }
    let eps2 = p.eps * p.eps;
    let neighbors: Vec<Vec<usize>> = points
        .iter()
        .map(|q| {
            let (cx, cy, cz) = key(q);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            out.extend(list.iter().copied().filter(|&j| {
                                let d = *q - points[j];
                                d.dot(d) <= eps2
                            }));
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect();
    Ok(labels_from_neighbors(points, &neighbors, p.min_pts))
}

/// Labels from precomputed closed-ball neighborhoods (shared by the grid and
/// brute-force paths).
pub(crate) fn labels_from_neighbors(points: &[Vec3], neighbors: &[Vec<usize>], min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        if core[i] {
            for &j in &neighbors[i] {
                if core[j] {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for i in 0..n {
        if core[i] {
            let root = uf.find(i);
            // Roots are the lowest index of their component, so the root is
            // always labeled before any other member.
            if root == i {
                labels[i] = next;
                next += 1;
            } else {
                labels[i] = labels[root];
            }
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for &j in &neighbors[i] {
            if core[j] {
                let d = points[i] - points[j];
                let d2 = d.dot(d);
                if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                    best = Some((d2, j));
                }
            }
        }
        if let Some((_, j)) = best {
            labels[i] = labels[j];
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub fitted: Cuboid,
    pub center: Vec3,
    pub point_count: usize,
}

pub const DEFAULT_ROI_RADIUS: f64 = 1.0;

/// Clusters the points within `roi_radius` of `coarse`, keeps the largest
/// cluster (ties to the lowest label) and fits its axis-aligned bounding box
/// with the base clamped to the ground.
pub fn fine_localize(cloud: &PointCloud, coarse: Vec3, roi_radius: f64, p: &DbscanParams) -> Result<DetectedObject> {
    if !(roi_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ROI radius must be positive, got {roi_radius}"
        )));
    }
    let r2 = roi_radius * roi_radius;
    let roi: Vec<Vec3> = cloud
        .points
        .iter()
        .copied()
        .filter(|q| {
            let d = *q - coarse;
            d.dot(d) <= r2
        })
        .collect();
    if roi.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let labels = dbscan(&roi, p)?;
    let n_clusters = labels.iter().copied().max().unwrap_or(NOISE);
    if n_clusters < 0 {
        return Err(Error::NoCluster);
    }
    let mut sizes = vec![0usize; n_clusters as usize + 1];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l as i32)
        .expect("at least one cluster");
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut count = 0;
    for (q, _) in roi.iter().zip(&labels).filter(|(_, &l)| l == best) {
        for (a, v) in [q.x, q.y, q.z].into_iter().enumerate() {
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
        count += 1;
    }
    // A flat cluster still gets a nonzero extent.
    let min_extent = p.eps.min(1e-3);
    let size = |a: usize| (hi[a] - lo[a]).max(min_extent);
    let height = hi[2].max(min_extent);
    let fitted = Cuboid::new(lo[0], lo[1], size(0), size(1), height)?;
    Ok(DetectedObject {
        fitted,
        center: fitted.center(),
        point_count: count,
    })
}

/// Appends the fitted cuboids to a copy of `scene`.
pub fn inject_dynamic(scene: &Scene, objects: &[DetectedObject]) -> Result<Scene> {
    let g = &scene.grid;
    let mut out = scene.clone();
    for o in objects {
        let c = &o.fitted;
        let inside = c.min_x >= g.origin.x
            && c.min_y >= g.origin.y
            && c.max_x() <= g.origin.x + g.width()
            && c.max_y() <= g.origin.y + g.depth();
        if !inside {
            return Err(Error::OutOfGrid {
                x: o.center.x,
                y: o.center.y,
            });
        }
        out.cuboids.push(*c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingConfig {
    /// Points per square meter of visible surface.
    pub density: f64,
    pub noise_sigma: f64,
    pub bias_sigma: f64,
    pub roi_radius: f64,
    pub dbscan: DbscanParams,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            density: 2000.0,
            noise_sigma: 0.01,
            bias_sigma: 0.05,
            roi_radius: DEFAULT_ROI_RADIUS,
            dbscan: DbscanParams::default(),
        }
    }
}

/// Ground-truth dynamic objects to be sensed, stored as JSON
/// `{"objects": [{min_x, min_y, size_x, size_y, height}, ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicObjects {
    #[serde(default)]
    pub objects: Vec<Cuboid>,
}

impl DynamicObjects {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(DynamicObjects::default());
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = formats::read_file(path.as_ref())?;
        DynamicObjects::from_json(&String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("objects serialize")
    }
}

/// Output of one sensing frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingFrame {
    pub cloud: PointCloud,
    pub coarse: Vec<Vec3>,
    pub detected: Vec<DetectedObject>,
}

/// Captures every object into one merged cloud (object `i` uses stream `i`),
/// simulates a coarse position per object and refines it against the merged
/// cloud.
pub fn sense_objects(objects: &[Cuboid], cfg: &SensingConfig, seed: u64) -> Result<SensingFrame> {
    let mut points = Vec::new();
    let mut coarse = Vec::with_capacity(objects.len());
    for (i, o) in objects.iter().enumerate() {
        points.extend(synth_point_cloud_indexed(o, cfg.density, cfg.noise_sigma, seed, i as u64)?.points);
        coarse.push(simulate_coarse_indexed(o, cfg.bias_sigma, seed, i as u64)?);
    }
    let cloud = PointCloud { points, seed };
    let detected = coarse
        .iter()
        .map(|&c| fine_localize(&cloud, c, cfg.roi_radius, &cfg.dbscan))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensingFrame {
        cloud,
        coarse,
        detected,
    })
}
