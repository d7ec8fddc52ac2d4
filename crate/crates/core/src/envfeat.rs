//! Propagation-guided environment feature maps.
//!
//! Three map families share the scene grid: one-hot BS/UT location maps, the
//! scatterer height map (max cuboid height over each cell center, 0 outside),
//! and the penetration-ratio map. For a point `q` with blocked line of sight
//! from the BS, the penetration ratio is `‖q_i − q_o‖ / ‖q_i − q‖`, where
//! `q_i` is the scatterer intersection nearest the BS and `q_o` the one
//! nearest `q`; it is 0 whenever the BS→`q` segment is clear. Because
//! `q_i`, `q_o` and `q` are collinear the ratio is evaluated from segment
//! parameters as `(t_o − t_i) / (1 − t_i)`.
//!
//! The ratio measures the first-entry→last-exit span, so gaps between
//! separate scatterers count as penetrated. The union of occupied intervals is
//! available separately through [`occupied_length_map`].

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats;
use crate::scene::{self, GridSpec, Scene, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    BsLocation,
    UtLocation,
    Height,
    PenetrationRatio,
}

impl FeatureKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            FeatureKind::BsLocation => "bs_map",
            FeatureKind::UtLocation => "ut_map",
            FeatureKind::Height => "height_map",
            FeatureKind::PenetrationRatio => "pr_map",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub values: Array2<f64>,
}

impl FeatureMap {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        formats::encode_map(&self.values)
    }

    pub fn from_bytes(kind: FeatureKind, bytes: &[u8]) -> Result<Self> {
        Ok(FeatureMap {
            kind,
            values: formats::decode_map(bytes)?,
        })
    }

    pub fn to_csv(&self) -> String {
        formats::map_to_csv(&self.values)
    }
}

/// Co-registered feature maps of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub grid: GridSpec,
    pub bs_map: FeatureMap,
    pub height_map: FeatureMap,
    pub pr_map: FeatureMap,
    pub ut_map: Option<FeatureMap>,
}

/// Sidecar manifest entry describing one exported map file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub kind: FeatureKind,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub grid: GridSpec,
    pub maps: Vec<FeatureFile>,
}

impl FeatureStack {
    pub fn build(scene: &Scene, ut: Option<Vec3>) -> Result<Self> {
        let ut_map = ut.map(|q| ut_location_map(q, &scene.grid)).transpose()?;
        Ok(FeatureStack {
            grid: scene.grid,
            bs_map: location_map(scene.bs, &scene.grid)?,
            height_map: height_map(scene),
            pr_map: penetration_ratio_map(scene),
            ut_map,
        })
    }

    pub fn maps(&self) -> impl Iterator<Item = &FeatureMap> {
        [&self.bs_map, &self.height_map, &self.pr_map]
            .into_iter()
            .chain(self.ut_map.as_ref())
    }

    /// Writes every map as `<stem>.dtcm` plus `<stem>.csv`, and the sidecar
    /// `features.json` recording each file's kind.
    pub fn save_dir(&self, dir: &Path) -> Result<FeatureManifest> {
        let mut maps = Vec::new();
        for m in self.maps() {
            let stem = m.kind.file_stem();
            formats::write_atomic(&dir.join(format!("{stem}.dtcm")), &m.to_bytes())?;
            formats::write_atomic(&dir.join(format!("{stem}.csv")), m.to_csv().as_bytes())?;
            let (rows, cols) = m.dim();
            maps.push(FeatureFile {
                kind: m.kind,
                file: format!("{stem}.dtcm"),
                rows,
                cols,
            });
        }
        let manifest = FeatureManifest { grid: self.grid, maps };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        formats::write_atomic(&dir.join("features.json"), text.as_bytes())?;
        Ok(manifest)
    }
}

/// One-hot map with the cell nearest to `q` set.
pub fn location_map(q: Vec3, grid: &GridSpec) -> Result<FeatureMap> {
    let (i, j) = grid.nearest_cell(q.x, q.y).ok_or(Error::OutOfGrid { x: q.x, y: q.y })?;
    let mut values = Array2::zeros(grid.shape());
    values[[i, j]] = 1.0;
    Ok(FeatureMap {
        kind: FeatureKind::BsLocation,
        values,
    })
}

/// Location map tagged as the UT map.
pub fn ut_location_map(q: Vec3, grid: &GridSpec) -> Result<FeatureMap> {
    let mut m = location_map(q, grid)?;
    m.kind = FeatureKind::UtLocation;
    Ok(m)
}

pub fn height_map(scene: &Scene) -> FeatureMap {
    let g = &scene.grid;
    let mut values: Array2<f64> = Array2::zeros(g.shape());
    for c in &scene.cuboids {
        let (r0, r1) = GridSpec::candidate_range(g.origin.y, g.resolution, g.rows, c.min_y, c.max_y());
        let (c0, c1) = GridSpec::candidate_range(g.origin.x, g.resolution, g.cols, c.min_x, c.max_x());
        for i in r0..=r1 {
            for j in c0..=c1 {
                let p = g.cell_center(i, j);
                if c.contains_xy(p.x, p.y) && c.height > values[[i, j]] {
                    values[[i, j]] = c.height;
                }
            }
        }
    }
    FeatureMap {
        kind: FeatureKind::Height,
        values,
    }
}

#[inline]
fn ratio_from_span(span: Option<(f64, f64)>) -> f64 {
    match span {
        None => 0.0,
        Some((t_in, t_out)) => (t_out - t_in) / (1.0 - t_in),
    }
}

/// Penetration ratio of the BS→`q` segment. Points inside a scatterer are
/// evaluated with the same formula (their last exit is `q` itself).
pub fn penetration_ratio_point(scene: &Scene, q: Vec3) -> Result<f64> {
    if q == scene.bs {
        return Err(Error::DegenerateSegment);
    }
    Ok(ratio_from_span(scene::span_extremes(&scene.cuboids, scene.bs, q)))
}

/// Penetration ratio at every cell center (receiver height).
pub fn penetration_ratio_map(scene: &Scene) -> FeatureMap {
    let g = scene.grid;
    let bs = scene.bs;
    let mut values = Array2::zeros(g.shape());
    values
        .axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, v) in row.iter_mut().enumerate() {
                let q = g.cell_center(i, j);
                *v = if q == bs {
                    0.0
                } else {
                    ratio_from_span(scene::span_extremes(&scene.cuboids, bs, q))
                };
            }
        });
    FeatureMap {
        kind: FeatureKind::PenetrationRatio,
        values,
    }
}

/// Length (meters) of the BS→cell segment inside the union of cuboids.
pub fn occupied_length_map(scene: &Scene) -> Array2<f64> {
    let g = scene.grid;
    Array2::from_shape_fn(g.shape(), |(i, j)| {
        let q = g.cell_center(i, j);
        if q == scene.bs {
            0.0
        } else {
            scene::occupied_length(&scene.cuboids, scene.bs, q)
        }
    })
}
