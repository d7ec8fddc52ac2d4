//! Patch tokenization of a 64x64 map at both scales and the overlap-averaged
//! inverse.

use dtc_core::patches::{self, PatchLayout};
use ndarray::Array2;

fn main() -> dtc_core::Result<()> {
    let map = Array2::from_shape_fn((64, 64), |(i, j)| 60.0 + 0.5 * i as f64 + 0.25 * j as f64);
    for layout in [PatchLayout::small(64, 64)?, PatchLayout::large(64, 64)?] {
        let tokens = patches::patchify(&map, &layout)?;
        let back = patches::unpatchify(&tokens, &layout)?;
        let err = (&back - &map).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cov = layout.coverage();
        println!(
            "patch {} stride {}: {:?} tokens of length {}, coverage {}..{}, round-trip error {err:.1e}",
            layout.patch,
            layout.stride,
            layout.tokens_per_dim(),
            layout.token_len(),
            cov.iter().min().unwrap(),
            cov.iter().max().unwrap()
        );
    }
    Ok(())
}
