//! Pilot-density sweep on the seeded benchmark suite: zero-filled pilots vs
//! the unrolled shrinkage reconstruction.

use dtc_core::metrics;
use dtc_core::pilot::{self, PilotPattern};
use dtc_core::raychan::{ArrayConfig, OfdmConfig};
use dtc_core::recon::{self, ProxConfig};

fn main() -> dtc_core::Result<()> {
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let suite = recon::synthetic_suite(100, 1, &array, &ofdm);
    let cfg = ProxConfig::default();
    println!("density  zero-fill NMSE  recon NMSE  recon SGCS");
    for density in [0.5, 0.25, 0.125] {
        let (mut zf, mut rec) = (Vec::new(), Vec::new());
        for (i, h) in suite.iter().enumerate() {
            let pattern = PilotPattern::SeededRandom {
                density,
                seed: i as u64,
            };
            let mask = pilot::make_mask(pattern, &array, &ofdm)?;
            let h0 = pilot::observe(h, &mask, None)?;
            rec.push(recon::reconstruct_csi(&h0, &mask, None, &cfg)?);
            zf.push(h0);
        }
        println!(
            "{density:>7}  {:>11.2} dB  {:>7.2} dB  {:>10.4}",
            metrics::nmse(&zf, &suite)?.db,
            metrics::nmse(&rec, &suite)?.db,
            metrics::sgcs(&rec, &suite)?.mean
        );
    }
    Ok(())
}
