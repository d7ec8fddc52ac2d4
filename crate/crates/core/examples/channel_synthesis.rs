//! Image-method path tracing, CSI assembly and a path-loss map.

use dtc_core::raychan::{self, ArrayConfig, OfdmConfig, SynthConfig};
use dtc_core::scene::{self, ScenarioConfig, Vec3};

fn main() -> dtc_core::Result<()> {
    let s = scene::generate_scenario(&ScenarioConfig::default(), 3)?;
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let cfg = SynthConfig::default();
    let ut = Vec3::new(1.05, 11.05, 1.0);

    let paths = raychan::trace_paths(&s, ut, &cfg, &array)?;
    println!("{} paths, LoS {}", paths.len(), paths.los_present);
    for p in &paths.paths {
        println!(
            "  delay {:7.2} ns  aod {:+6.1} deg  |gain| {:.3e}  bounces {}",
            p.delay * 1e9,
            p.aod.to_degrees(),
            p.gain.norm(),
            p.bounces
        );
    }
    let h = raychan::assemble_csi(&paths, &array, &ofdm);
    println!("CSI {:?}, path loss {:.2} dB", h.dim(), raychan::path_loss_db(&h)?);

    let map = raychan::pl_map(&s, &cfg, &array, &ofdm)?;
    let valid: Vec<f64> = map
        .values
        .iter()
        .zip(&map.valid_mask)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| v)
        .collect();
    let (lo, hi) = valid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("PL map over {} valid cells: {lo:.1} .. {hi:.1} dB", valid.len());
    Ok(())
}
