//! Two-scale patch tokenization of square feature maps.
//!
//! The small scale uses 4×4 patches at stride 3 (one cell of overlap), the
//! large scale non-overlapping 8×8 patches. Tokens are flattened row-major and
//! ordered row-major over patch positions. Reassembly averages every token
//! value that covers a cell.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLayout {
    pub patch: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    /// Scale tag: 0 for the small scale, 1 for the large scale.
    pub segment: u8,
}

impl PatchLayout {
    pub fn new(patch: usize, stride: usize, rows: usize, cols: usize, segment: u8) -> Result<Self> {
        let layout = PatchLayout {
            patch,
            stride,
            rows,
            cols,
            segment,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn small(rows: usize, cols: usize) -> Result<Self> {
        PatchLayout::new(4, 3, rows, cols, 0)
    }

    pub fn large(rows: usize, cols: usize) -> Result<Self> {
        PatchLayout::new(8, 8, rows, cols, 1)
    }

    pub fn validate(&self) -> Result<()> {
        let fits = |dim: usize| dim >= self.patch && (dim - self.patch).is_multiple_of(self.stride);
        if self.patch == 0 || self.stride == 0 || !fits(self.rows) || !fits(self.cols) {
            return Err(Error::LayoutMismatch(format!(
                "patch {} stride {} does not tile {}x{}",
                self.patch, self.stride, self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Patch positions along (rows, cols).
    pub fn tokens_per_dim(&self) -> (usize, usize) {
        (
            (self.rows - self.patch) / self.stride + 1,
            (self.cols - self.patch) / self.stride + 1,
        )
    }

    pub fn token_count(&self) -> usize {
        let (a, b) = self.tokens_per_dim();
        a * b
    }

    pub fn token_len(&self) -> usize {
        self.patch * self.patch
    }

    /// Top-left cell of token `t`.
    pub fn origin(&self, t: usize) -> (usize, usize) {
        let (_, per_row) = self.tokens_per_dim();
        ((t / per_row) * self.stride, (t % per_row) * self.stride)
    }

    /// Number of tokens covering each cell.
    pub fn coverage(&self) -> Array2<usize> {
        let mut cov = Array2::zeros((self.rows, self.cols));
        for t in 0..self.token_count() {
            let (r, c) = self.origin(t);
            cov.slice_mut(s![r..r + self.patch, c..c + self.patch])
                .mapv_inplace(|v| v + 1);
        }
        cov
    }
}

/// Token matrix of shape `token_count × patch²`.
pub fn patchify(map: &Array2<f64>, layout: &PatchLayout) -> Result<Array2<f64>> {
    layout.validate()?;
    if map.dim() != (layout.rows, layout.cols) {
        return Err(Error::LayoutMismatch(format!(
            "map is {:?}, layout expects {}x{}",
            map.dim(),
            layout.rows,
            layout.cols
        )));
    }
    let p = layout.patch;
    let mut tokens = Array2::zeros((layout.token_count(), layout.token_len()));
    for (t, mut row) in tokens.outer_iter_mut().enumerate() {
        let (r, c) = layout.origin(t);
        for (dst, src) in row.iter_mut().zip(map.slice(s![r..r + p, c..c + p]).iter()) {
            *dst = *src;
        }
    }
    Ok(tokens)
}

/// Inverse of [`patchify`]: each cell is the mean of the token values that
/// cover it.
pub fn unpatchify(tokens: &Array2<f64>, layout: &PatchLayout) -> Result<Array2<f64>> {
    layout.validate()?;
    if tokens.dim() != (layout.token_count(), layout.token_len()) {
        return Err(Error::LayoutMismatch(format!(
            "expected {} tokens of length {}, got {:?}",
            layout.token_count(),
            layout.token_len(),
            tokens.dim()
        )));
    }
    let p = layout.patch;
    let mut sum = Array2::<f64>::zeros((layout.rows, layout.cols));
    for (t, row) in tokens.outer_iter().enumerate() {
        let (r, c) = layout.origin(t);
        for (dst, src) in sum.slice_mut(s![r..r + p, c..c + p]).iter_mut().zip(row.iter()) {
            *dst += *src;
        }
    }
    let cov = layout.coverage();
    Ok(ndarray::Zip::from(&sum).and(&cov).map_collect(|&s, &n| s / n as f64))
}

/// Debug dump: one line per token, `index,segment,row,col,v0,v1,...`.
pub fn tokens_to_csv(tokens: &Array2<f64>, layout: &PatchLayout) -> String {
    let mut out = String::from("token,segment,row,col,values\n");
    for (t, row) in tokens.outer_iter().enumerate() {
        let (r, c) = layout.origin(t);
        out.push_str(&format!("{t},{},{r},{c}", layout.segment));
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
