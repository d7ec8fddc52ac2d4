//! Runs the full sense -> features -> predict pipeline once, prints the report,
//! then profiles stage latency.

use dtc_core::pipeline::{self, PipelineConfig};
use dtc_core::scene::{self, Cuboid, ScenarioConfig, Vec3};
use dtc_core::sensing::DynamicObjects;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = scene::generate_scenario(&ScenarioConfig::default(), 0)?;
    let dynamic = DynamicObjects {
        objects: vec![Cuboid::new(8.0, 6.0, 0.5, 0.5, 1.8)?],
    };
    let ut = Vec3::new(3.05, 9.05, 1.0);
    let cfg = PipelineConfig::default();

    let out = pipeline::run_pipeline(&s, &dynamic, ut, &cfg)?;
    let r = &out.report;
    println!(
        "UT cell {:?}: {} paths, {} pilots, NMSE {:.2} dB (zero-fill {:.2} dB), SGCS {:.4}",
        r.ut_cell, r.path_count, r.pilot_count, r.nmse_db, r.nmse_zero_fill_db, r.sgcs
    );
    println!(
        "PL at UT: true {:.2} dB, baseline {:.2} dB",
        r.pl_true_at_ut_db, r.pl_baseline_at_ut_db
    );

    let lat = pipeline::profile(&s, &dynamic, ut, &cfg, 20)?;
    println!("{}", serde_json::to_string_pretty(&lat)?);
    Ok(())
}
