//! Simulated LiDAR capture, coarse detection and DBSCAN refinement for a few
//! pedestrians and a vehicle.

use dtc_core::scene::Cuboid;
use dtc_core::sensing::{self, SensingConfig};

fn main() -> dtc_core::Result<()> {
    let objects = [
        Cuboid::new(3.0, 4.0, 0.5, 0.5, 1.8)?,
        Cuboid::new(8.0, 6.0, 0.6, 0.4, 1.7)?,
        Cuboid::new(5.0, 9.0, 1.8, 4.2, 1.5)?,
    ];
    let frame = sensing::sense_objects(&objects, &SensingConfig::default(), 9)?;
    println!("{} points captured", frame.cloud.len());
    for ((obj, coarse), det) in objects.iter().zip(&frame.coarse).zip(&frame.detected) {
        let c = obj.center();
        let planar = |x: f64, y: f64| (x - c.x).hypot(y - c.y) * 100.0;
        println!(
            "object at ({:.2}, {:.2}): coarse error {:5.2} cm, refined {:5.2} cm ({} points)",
            c.x,
            c.y,
            planar(coarse.x, coarse.y),
            planar(det.center.x, det.center.y),
            det.point_count
        );
    }
    Ok(())
}
