//! Segment/cuboid intersections and penetration ratios on a hand-built scene,
//! then a random scenario from the dataset generator.

use dtc_core::envfeat;
use dtc_core::scene::{self, Cuboid, GridSpec, ScenarioConfig, Scene, Vec3};

fn main() -> dtc_core::Result<()> {
    let grid = GridSpec {
        origin: Vec3::new(-1.0, -5.0, 0.0),
        rows: 100,
        cols: 120,
        ..GridSpec::default()
    };
    let walls = vec![
        Cuboid::from_bounds(4.0, 6.0, -1.0, 1.0, 2.0)?,
        Cuboid::from_bounds(7.0, 8.0, -1.0, 1.0, 2.0)?,
    ];
    let s = Scene::new(grid, Vec3::new(0.0, 0.0, 2.0), walls)?;
    let q = Vec3::new(10.0, 0.0, 1.0);

    let span = scene::segment_intersections(&s, s.bs, q)?;
    for iv in &span.intervals {
        println!("cuboid {}: t in [{:.3}, {:.3}]", iv.cuboid, iv.t_enter, iv.t_exit);
    }
    println!("occupied length   {:.3} m", span.occupied_length());
    println!("penetration ratio {:.6}", envfeat::penetration_ratio_point(&s, q)?);

    let random = scene::generate_scenario(&ScenarioConfig::default(), 7)?;
    let footprint = scene::footprint_mask(&random);
    println!(
        "\nrandom scenario: {} cuboids, {} of {} cells occupied, BS cell {:?}",
        random.cuboids.len(),
        footprint.iter().filter(|&&c| c).count(),
        footprint.len(),
        random.bs_cell()
    );
    Ok(())
}
