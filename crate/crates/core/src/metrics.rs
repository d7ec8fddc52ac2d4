//! Evaluation metrics and losses for path-loss maps and CSI.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::raychan::{CsiMatrix, PathLossMap};
use crate::{Error, Result};

/// Reported in place of `10·log10(0)`.
pub const NMSE_DB_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub unit: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
    pub per_sample: Vec<f64>,
}

impl MetricReport {
    pub fn from_values(name: &str, unit: &str, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(MetricReport {
            name: name.to_string(),
            unit: unit.to_string(),
            mean,
            std: var.sqrt(),
            count: values.len(),
            per_sample: values,
        })
    }

    /// `metric,unit,mean,std,count` header plus one summary row.
    pub fn summary_csv(reports: &[MetricReport]) -> String {
        let mut out = String::from("metric,unit,mean,std,count\n");
        for r in reports {
            out.push_str(&format!("{},{},{},{},{}\n", r.name, r.unit, r.mean, r.std, r.count));
        }
        out
    }

    /// `sample,value` rows.
    pub fn per_sample_csv(&self) -> String {
        let mut out = String::from("sample,value\n");
        for (i, v) in self.per_sample.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

fn check_maps(pred: &PathLossMap, truth: &PathLossMap) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: truth.dim(),
            found: pred.dim(),
        });
    }
    for ((row, col), &ok) in truth.valid_mask.indexed_iter() {
        if pred.valid_mask[[row, col]] != ok {
            return Err(Error::MaskMismatch { row, col });
        }
    }
    Ok(())
}

/// Root-mean-square dB error over valid cells.
pub fn rmse_pl(pred: &PathLossMap, truth: &PathLossMap) -> Result<f64> {
    check_maps(pred, truth)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    ndarray::Zip::from(&pred.values)
        .and(&truth.values)
        .and(&truth.valid_mask)
        .for_each(|&p, &t, &ok| {
            if ok {
                sum += (p - t).powi(2);
                n += 1;
            }
        });
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((sum / n as f64).sqrt())
}

/// Per-map RMSE summarized as mean and standard deviation.
pub fn rmse_pl_report(pred: &[PathLossMap], truth: &[PathLossMap]) -> Result<MetricReport> {
    check_len(pred.len(), truth.len())?;
    let values = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| rmse_pl(p, t))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_values("rmse_pl", "dB", values)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == 0 || b == 0 {
        return Err(Error::EmptyInput);
    }
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: (b, 1),
            found: (a, 1),
        });
    }
    Ok(())
}

fn check_csi(p: &CsiMatrix, t: &CsiMatrix) -> Result<()> {
    if p.dim() != t.dim() {
        return Err(Error::ShapeMismatch {
            expected: t.dim(),
            found: p.dim(),
        });
    }
    Ok(())
}

/// `10·log10(x)`, with [`NMSE_DB_FLOOR`] for zero and anything below it.
pub fn to_db(linear: f64) -> f64 {
    if linear <= 0.0 {
        NMSE_DB_FLOOR
    } else {
        (10.0 * linear.log10()).max(NMSE_DB_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub linear: f64,
    pub db: f64,
    pub per_sample: Vec<f64>,
}

pub fn nmse_sample(pred: &CsiMatrix, truth: &CsiMatrix) -> Result<f64> {
    check_csi(pred, truth)?;
    let denom = truth.frobenius_norm_sq();
    if denom == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let num: f64 = ndarray::Zip::from(pred.entries())
        .and(truth.entries())
        .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr());
    Ok(num / denom)
}

/// Mean over samples of `‖Ĥ − H‖²_F / ‖H‖²_F`.
pub fn nmse(pred: &[CsiMatrix], truth: &[CsiMatrix]) -> Result<Nmse> {
    check_len(pred.len(), truth.len())?;
    let per_sample = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| nmse_sample(p, t))
        .collect::<Result<Vec<_>>>()?;
    let linear = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(Nmse {
        linear,
        db: to_db(linear),
        per_sample,
    })
}

/// Mean over subcarriers of `|ĥᴴh|² / (‖ĥ‖²‖h‖²)` for one sample.
pub fn sgcs_sample(pred: &CsiMatrix, truth: &CsiMatrix, sample: usize) -> Result<f64> {
    check_csi(pred, truth)?;
    let (_, n_k) = truth.dim();
    let mut acc = 0.0;
    for (k, (p, t)) in pred
        .entries()
        .columns()
        .into_iter()
        .zip(truth.entries().columns())
        .enumerate()
    {
        let pn: f64 = p.iter().map(|v| v.norm_sqr()).sum();
        let tn: f64 = t.iter().map(|v| v.norm_sqr()).sum();
        if pn == 0.0 || tn == 0.0 {
            return Err(Error::ZeroColumn { sample, column: k });
        }
        let inner: num_complex::Complex64 = p.iter().zip(t.iter()).map(|(a, b)| a.conj() * b).sum();
        acc += inner.norm_sqr() / (pn * tn);
    }
    Ok(acc / n_k as f64)
}

pub fn sgcs(pred: &[CsiMatrix], truth: &[CsiMatrix]) -> Result<MetricReport> {
    check_len(pred.len(), truth.len())?;
    let values = pred
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(i, (p, t))| sgcs_sample(p, t, i))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_values("sgcs", "unitless", values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub epsilon: f64,
    pub freq_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: 0.001,
            freq_weight: 0.1,
        }
    }
}

/// `ρ(x) = sqrt(x² + ε²)`.
pub fn charbonnier(x: f64, eps: f64) -> f64 {
    (x * x + eps * eps).sqrt()
}

fn zero_filled(m: &PathLossMap, mask: &Array2<bool>) -> Array2<f64> {
    ndarray::Zip::from(&m.values)
        .and(mask)
        .map_collect(|&v, &ok| if ok { v } else { 0.0 })
}

/// Per-sample hybrid loss: mean elementwise Charbonnier of the spatial error
/// plus `freq_weight · ρ(‖F(P̂)‖_F − ‖F(P)‖_F)`, with `F` the unitary 2-D DFT
/// and cells invalid in the truth map set to zero in both maps.
pub fn pl_hybrid_loss_sample(pred: &PathLossMap, truth: &PathLossMap, cfg: &LossConfig) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: truth.dim(),
            found: pred.dim(),
        });
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let p = zero_filled(pred, &truth.valid_mask);
    let t = zero_filled(truth, &truth.valid_mask);
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("prediction is not finite on a valid cell".into()));
    }
    let spatial = ndarray::Zip::from(&p)
        .and(&t)
        .fold(0.0, |acc, a, b| acc + charbonnier(a - b, cfg.epsilon))
        / p.len() as f64;
    let norm = |m: &Array2<f64>| dft::forward_real(m).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let freq = charbonnier(norm(&p) - norm(&t), cfg.epsilon);
    Ok(spatial + cfg.freq_weight * freq)
}

/// Mean of [`pl_hybrid_loss_sample`] over a set of maps.
pub fn pl_hybrid_loss(pred: &[PathLossMap], truth: &[PathLossMap], cfg: &LossConfig) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        total += pl_hybrid_loss_sample(p, t, cfg)?;
    }
    Ok(total / pred.len() as f64)
}

/// Mean over samples of `‖Ĥ − H‖²_F`.
pub fn csi_mse_loss(pred: &[CsiMatrix], truth: &[CsiMatrix]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        check_csi(p, t)?;
        total += ndarray::Zip::from(p.entries())
            .and(t.entries())
            .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr());
    }
    Ok(total / pred.len() as f64)
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidConfig("CDF input contains NaN".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of values `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Smallest value `v` with `F(v) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[idx - 1]
    }

    /// One `(value, F(value))` pair per sorted input value; ties share the
    /// fraction of their last occurrence.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.sorted.iter().map(|&v| (v, self.eval(v))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,fraction\n");
        for (v, f) in self.points() {
            out.push_str(&format!("{v},{f}\n"));
        }
        out
    }
}

pub fn cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(EmpiricalCdf::new(values)?.points())
}
