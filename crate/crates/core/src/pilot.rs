//! Pilot sampling masks and the observation operator `H₀ = A ⊙ H`.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::formats;
use crate::raychan::{ArrayConfig, CsiMatrix, OfdmConfig};
use crate::rng::{self, Domain};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PilotPattern {
    /// Pilots on every `ant_stride`-th antenna and `sc_stride`-th subcarrier,
    /// starting at index 0.
    RegularGrid { ant_stride: usize, sc_stride: usize },
    /// Exactly `round(density·n_t·n_k)` positions drawn without replacement.
    SeededRandom { density: f64, seed: u64 },
}

impl Default for PilotPattern {
    fn default() -> Self {
        PilotPattern::RegularGrid {
            ant_stride: 8,
            sc_stride: 4,
        }
    }
}

impl std::str::FromStr for PilotPattern {
    type Err = Error;

    /// `regular:<ant>,<sc>` or `random:<density>[,<seed>]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad pilot pattern '{s}'"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        match (kind, parts.as_slice()) {
            ("regular", [a, b]) => Ok(PilotPattern::RegularGrid {
                ant_stride: a.parse().map_err(|_| bad())?,
                sc_stride: b.parse().map_err(|_| bad())?,
            }),
            ("random", [d]) => Ok(PilotPattern::SeededRandom {
                density: d.parse().map_err(|_| bad())?,
                seed: 0,
            }),
            ("random", [d, seed]) => Ok(PilotPattern::SeededRandom {
                density: d.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotMask {
    pub mask: Array2<bool>,
    pub pattern: Option<PilotPattern>,
}

impl PilotMask {
    pub fn from_mask(mask: Array2<bool>) -> Self {
        PilotMask { mask, pattern: None }
    }

    pub fn full(n_t: usize, n_k: usize) -> Self {
        PilotMask::from_mask(Array2::from_elem((n_t, n_k), true))
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.mask.len() as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        formats::encode_mask(&self.mask)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(PilotMask::from_mask(formats::decode_mask(bytes)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        formats::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PilotMask::from_bytes(&formats::read_file(path.as_ref())?)
    }
}

pub fn make_mask(pattern: PilotPattern, array: &ArrayConfig, ofdm: &OfdmConfig) -> Result<PilotMask> {
    make_mask_dims(pattern, array.n_t, ofdm.n_k)
}

pub fn make_mask_dims(pattern: PilotPattern, n_t: usize, n_k: usize) -> Result<PilotMask> {
    let mask = match pattern {
        PilotPattern::RegularGrid { ant_stride, sc_stride } => {
            if ant_stride == 0 || sc_stride == 0 {
                return Err(Error::InvalidConfig("pilot strides must be at least 1".into()));
            }
            Array2::from_shape_fn((n_t, n_k), |(n, k)| n % ant_stride == 0 && k % sc_stride == 0)
        }
        PilotPattern::SeededRandom { density, seed } => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidDensity(density));
            }
            let total = n_t * n_k;
            let count = ((density * total as f64).round() as usize).min(total);
            let mut rng = rng::stream(seed, Domain::PilotMask, 0);
            let mut flat = vec![false; total];
            for i in index::sample(&mut rng, total, count) {
                flat[i] = true;
            }
            Array2::from_shape_vec((n_t, n_k), flat).expect("sized")
        }
    };
    Ok(PilotMask {
        mask,
        pattern: Some(pattern),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotNoise {
    /// Ratio of mean pilot-entry power to noise power, in dB.
    pub snr_db: f64,
    pub seed: u64,
}

/// Hadamard sampling of `h`. With `noise`, circularly-symmetric complex
/// Gaussian noise is added on pilot entries only; its variance is the mean
/// `|H|²` over pilot entries divided by the linear SNR.
pub fn observe(h: &CsiMatrix, mask: &PilotMask, noise: Option<PilotNoise>) -> Result<CsiMatrix> {
    if h.dim() != mask.dim() {
        return Err(Error::ShapeMismatch {
            expected: h.dim(),
            found: mask.dim(),
        });
    }
    let mut out = Array2::zeros(h.dim());
    ndarray::Zip::from(&mut out)
        .and(h.entries())
        .and(&mask.mask)
        .for_each(|o, &v, &m| {
            if m {
                *o = v;
            }
        });
    if let Some(noise) = noise {
        let n = mask.count();
        if n > 0 {
            let power: f64 = out.iter().map(|v: &Complex64| v.norm_sqr()).sum::<f64>() / n as f64;
            let sigma = (power / 10f64.powf(noise.snr_db / 10.0) / 2.0).sqrt();
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("finite sigma");
                let mut rng = rng::stream(noise.seed, Domain::PilotNoise, 0);
                ndarray::Zip::from(&mut out).and(&mask.mask).for_each(|o, &m| {
                    if m {
                        *o += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    }
                });
            }
        }
    }
    CsiMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csi(n_t: usize, n_k: usize) -> CsiMatrix {
        CsiMatrix::new(Array2::from_shape_fn((n_t, n_k), |(i, j)| {
            Complex64::new(i as f64 + 1.0, j as f64 - 2.0)
        }))
        .unwrap()
    }

    #[test]
    fn mask_counts() {
        let arr = ArrayConfig::default();
        let ofdm = OfdmConfig::default();
        let full = make_mask(PilotPattern::SeededRandom { density: 1.0, seed: 1 }, &arr, &ofdm).unwrap();
        assert_eq!(full.count(), 64 * 96);
        let grid = make_mask(PilotPattern::default(), &arr, &ofdm).unwrap();
        assert_eq!(grid.count(), 192);
        let a = make_mask(PilotPattern::SeededRandom { density: 0.25, seed: 9 }, &arr, &ofdm).unwrap();
        let b = make_mask(PilotPattern::SeededRandom { density: 0.25, seed: 9 }, &arr, &ofdm).unwrap();
        let c = make_mask(
            PilotPattern::SeededRandom {
                density: 0.25,
                seed: 10,
            },
            &arr,
            &ofdm,
        )
        .unwrap();
        assert_eq!(a.count(), 1536);
        assert_eq!(a, b);
        assert_ne!(a.mask, c.mask);
        for d in [0.0, -0.5, 1.5] {
            assert!(matches!(
                make_mask(PilotPattern::SeededRandom { density: d, seed: 0 }, &arr, &ofdm),
                Err(Error::InvalidDensity(_))
            ));
        }
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!("regular:8,4".parse::<PilotPattern>().unwrap(), PilotPattern::default());
        assert_eq!(
            "random:0.5,3".parse::<PilotPattern>().unwrap(),
            PilotPattern::SeededRandom { density: 0.5, seed: 3 }
        );
        assert!("grid:1".parse::<PilotPattern>().is_err());
    }

    #[test]
    fn observe_cases() {
        let h = csi(4, 6);
        assert_eq!(observe(&h, &PilotMask::full(4, 6), None).unwrap(), h);
        let none = PilotMask::from_mask(Array2::from_elem((4, 6), false));
        assert!(observe(&h, &none, None)
            .unwrap()
            .entries()
            .iter()
            .all(|v| v.norm() == 0.0));
        assert!(matches!(
            observe(&h, &PilotMask::full(4, 5), None),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn noise_only_on_pilots_and_reproducible() {
        let h = csi(8, 12);
        let mask = make_mask_dims(PilotPattern::SeededRandom { density: 0.5, seed: 2 }, 8, 12).unwrap();
        let noise = Some(PilotNoise { snr_db: 10.0, seed: 4 });
        let a = observe(&h, &mask, noise).unwrap();
        let b = observe(&h, &mask, noise).unwrap();
        assert_eq!(a, b);
        for ((v, m), t) in a.entries().iter().zip(mask.mask.iter()).zip(h.entries().iter()) {
            if *m {
                assert_ne!(v, t);
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }
}
