//! Builds the environment feature stack for a scene and writes it, plus a PPM
//! heatmap of the penetration ratio, to a directory (first argument or a
//! temporary one).

use std::path::PathBuf;

use dtc_core::envfeat::FeatureStack;
use dtc_core::formats;
use dtc_core::scene::{self, ScenarioConfig, Vec3};

fn main() -> dtc_core::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dtc_feature_maps"));
    let s = scene::generate_scenario(&ScenarioConfig::default(), 11)?;
    let stack = FeatureStack::build(&s, Some(Vec3::new(2.05, 2.05, 1.0)))?;
    for m in stack.maps() {
        let (sum, max) = m.values.iter().fold((0.0, 0.0f64), |(s, mx), &v| (s + v, mx.max(v)));
        println!(
            "{:<18} mean {:.4}  max {:.3}",
            m.kind.file_stem(),
            sum / m.values.len() as f64,
            max
        );
    }
    let manifest = stack.save_dir(&dir)?;
    formats::write_atomic(&dir.join("pr_map.ppm"), &formats::map_to_ppm(&stack.pr_map.values))?;
    println!("wrote {} maps and pr_map.ppm to {}", manifest.maps.len(), dir.display());
    Ok(())
}
