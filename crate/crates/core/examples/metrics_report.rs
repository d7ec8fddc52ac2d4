//! Scores the penetration-ratio PL baseline against synthesized PL maps and
//! prints RMSE, the hybrid loss and an error CDF.

use dtc_core::metrics::{self, EmpiricalCdf, LossConfig, MetricReport};
use dtc_core::raychan::{self, ArrayConfig, OfdmConfig, PathLossMap, SynthConfig};
use dtc_core::recon::{self, PlBaselineConfig};
use dtc_core::scene::{self, ScenarioConfig};

fn main() -> dtc_core::Result<()> {
    let (array, ofdm) = (ArrayConfig::default(), OfdmConfig::default());
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for i in 0..4 {
        let s = scene::generate_scenario_indexed(&ScenarioConfig::default(), 5, i)?;
        let t = raychan::pl_map(&s, &SynthConfig::default(), &array, &ofdm)?;
        let b = recon::pl_baseline_map(&s, &PlBaselineConfig::default())?;
        pred.push(PathLossMap::new(b.values, t.valid_mask.clone())?);
        truth.push(t);
    }
    let rmse = metrics::rmse_pl_report(&pred, &truth)?;
    let loss = metrics::pl_hybrid_loss(&pred, &truth, &LossConfig::default())?;
    let loss = MetricReport::from_values("pl_hybrid_loss", "dB", vec![loss])?;
    print!("{}", MetricReport::summary_csv(&[rmse, loss]));

    let errors: Vec<f64> = pred
        .iter()
        .zip(&truth)
        .flat_map(|(p, t)| {
            p.values
                .iter()
                .zip(&t.values)
                .zip(&t.valid_mask)
                .filter(|(_, &ok)| ok)
                .map(|((a, b), _)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .collect();
    let cdf = EmpiricalCdf::new(&errors)?;
    for q in [0.5, 0.9, 0.99] {
        println!("|error| p{:<2} {:.2} dB", (q * 100.0) as u32, cdf.quantile(q));
    }
    Ok(())
}
