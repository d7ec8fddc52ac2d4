//! On-disk artifact formats.
//!
//! All binary formats are little-endian and start with a four-byte magic:
//!
//! | magic  | header                 | payload                                        |
//! |--------|------------------------|------------------------------------------------|
//! | `DTCC` | `u32 n_t`, `u32 n_k`   | row-major interleaved `(re, im)` `f32` pairs    |
//! | `DTCM` | `u32 rows`, `u32 cols` | row-major `f32`, NaN on invalid cells           |
//! | `DTCB` | `u32 rows`, `u32 cols` | each row bit-packed into `ceil(cols/8)` bytes, LSB first |
//! | `DTCP` | `u32 count`            | `count` triples of `f32` `(x, y, z)`            |
//!
//! Values are narrowed to `f32` on write; decoding widens back to `f64`.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::scene::Vec3;
use crate::{Error, Result};

pub const CSI_MAGIC: &[u8; 4] = b"DTCC";
pub const MAP_MAGIC: &[u8; 4] = b"DTCM";
pub const MASK_MAGIC: &[u8; 4] = b"DTCB";
pub const CLOUD_MAGIC: &[u8; 4] = b"DTCP";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.pos,
                format!("truncated: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let got = self.take(4)?;
        if got != want {
            return Err(Error::format(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(want)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(self.pos, format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    fn dims(&mut self) -> Result<(usize, usize)> {
        let a = self.u32()? as usize;
        let b = self.u32()? as usize;
        Ok((a, b))
    }
}

fn dim_u32(n: usize) -> [u8; 4] {
    u32::try_from(n).expect("dimension fits in u32").to_le_bytes()
}

pub fn encode_csi(m: &Array2<Complex64>) -> Vec<u8> {
    let (r, c) = m.dim();
    let mut out = Vec::with_capacity(12 + r * c * 8);
    out.extend_from_slice(CSI_MAGIC);
    out.extend_from_slice(&dim_u32(r));
    out.extend_from_slice(&dim_u32(c));
    for v in m.iter() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub(crate) fn read_csi(rd: &mut Reader) -> Result<Array2<Complex64>> {
    rd.magic(CSI_MAGIC)?;
    let (r, c) = rd.dims()?;
    let need = r.checked_mul(c).and_then(|n| n.checked_mul(8));
    match need {
        Some(n) if n <= rd.remaining() => {}
        _ => return Err(Error::format(rd.offset(), "CSI payload shorter than header dims")),
    }
    let mut data = Vec::with_capacity(r * c);
    for _ in 0..r * c {
        let re = rd.f32()? as f64;
        let im = rd.f32()? as f64;
        data.push(Complex64::new(re, im));
    }
    Ok(Array2::from_shape_vec((r, c), data).expect("length checked"))
}

pub fn decode_csi(bytes: &[u8]) -> Result<Array2<Complex64>> {
    let mut rd = Reader::new(bytes);
    let m = read_csi(&mut rd)?;
    rd.finish()?;
    Ok(m)
}

pub fn encode_map(m: &Array2<f64>) -> Vec<u8> {
    let (r, c) = m.dim();
    let mut out = Vec::with_capacity(12 + r * c * 4);
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&dim_u32(r));
    out.extend_from_slice(&dim_u32(c));
    for v in m.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub(crate) fn read_map(rd: &mut Reader) -> Result<Array2<f64>> {
    rd.magic(MAP_MAGIC)?;
    let (r, c) = rd.dims()?;
    match r.checked_mul(c).and_then(|n| n.checked_mul(4)) {
        Some(n) if n <= rd.remaining() => {}
        _ => return Err(Error::format(rd.offset(), "map payload shorter than header dims")),
    }
    let mut data = Vec::with_capacity(r * c);
    for _ in 0..r * c {
        data.push(rd.f32()? as f64);
    }
    Ok(Array2::from_shape_vec((r, c), data).expect("length checked"))
}

pub fn decode_map(bytes: &[u8]) -> Result<Array2<f64>> {
    let mut rd = Reader::new(bytes);
    let m = read_map(&mut rd)?;
    rd.finish()?;
    Ok(m)
}

pub fn encode_mask(m: &Array2<bool>) -> Vec<u8> {
    let (r, c) = m.dim();
    let row_bytes = c.div_ceil(8);
    let mut out = Vec::with_capacity(12 + r * row_bytes);
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&dim_u32(r));
    out.extend_from_slice(&dim_u32(c));
    for row in m.rows() {
        let mut packed = vec![0u8; row_bytes];
        for (j, &bit) in row.iter().enumerate() {
            if bit {
                packed[j / 8] |= 1 << (j % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<Array2<bool>> {
    let mut rd = Reader::new(bytes);
    rd.magic(MASK_MAGIC)?;
    let (r, c) = rd.dims()?;
    let row_bytes = c.div_ceil(8);
    let mut m = Array2::from_elem((r, c), false);
    for i in 0..r {
        let at = rd.offset();
        let packed = rd.take(row_bytes)?;
        for j in 0..c {
            m[[i, j]] = packed[j / 8] >> (j % 8) & 1 == 1;
        }
        if c % 8 != 0 && packed[row_bytes - 1] >> (c % 8) != 0 {
            return Err(Error::format(at + row_bytes - 1, "padding bits set"));
        }
    }
    rd.finish()?;
    Ok(m)
}

pub fn encode_cloud(points: &[Vec3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + points.len() * 12);
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&dim_u32(points.len()));
    for p in points {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8]) -> Result<Vec<Vec3>> {
    let mut rd = Reader::new(bytes);
    rd.magic(CLOUD_MAGIC)?;
    let n = rd.u32()? as usize;
    if n.checked_mul(12).is_none_or(|b| b > rd.remaining()) {
        return Err(Error::format(rd.offset(), "point payload shorter than count"));
    }
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rd.f32()? as f64;
        let y = rd.f32()? as f64;
        let z = rd.f32()? as f64;
        pts.push(Vec3::new(x, y, z));
    }
    rd.finish()?;
    Ok(pts)
}

/// One point per line, `x y z`.
pub fn cloud_to_xyz(points: &[Vec3]) -> String {
    let mut s = String::with_capacity(points.len() * 32);
    for p in points {
        s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    s
}

pub fn cloud_from_xyz(text: &str) -> Result<Vec<Vec3>> {
    let mut pts = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected 3 coordinates, got {}",
                line_no + 1,
                vals.len()
            )));
        }
        pts.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    Ok(pts)
}

/// Grid as CSV, one line per row; invalid (NaN) cells are left empty.
pub fn map_to_csv(m: &Array2<f64>) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let line: Vec<String> = row
            .iter()
            .map(|v| if v.is_nan() { String::new() } else { v.to_string() })
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Color ramp used for heatmaps: piecewise linear through
/// black → blue → cyan → yellow → white at 0, ¼, ½, ¾, 1.
pub const RAMP: [[u8; 3]; 5] = [[0, 0, 0], [0, 0, 255], [0, 255, 255], [255, 255, 0], [255, 255, 255]];

/// Color of the invalid-cell sentinel in heatmaps.
pub const INVALID_COLOR: [u8; 3] = [128, 128, 128];

pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let a = RAMP[i][ch] as f64;
        let b = RAMP[i + 1][ch] as f64;
        out[ch] = (a + (b - a) * f).round() as u8;
    }
    out
}

/// Binary PPM (P6) heatmap. Values are normalized linearly between the finite
/// minimum and maximum; NaN cells are drawn in [`INVALID_COLOR`]. Row 0 is
/// written first.
pub fn map_to_ppm(m: &Array2<f64>) -> Vec<u8> {
    let (r, c) = m.dim();
    let finite = m.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P6\n{c} {r}\n255\n").into_bytes();
    out.reserve(r * c * 3);
    for v in m.iter() {
        let px = if v.is_finite() {
            ramp_color((v - lo) / span)
        } else {
            INVALID_COLOR
        };
        out.extend_from_slice(&px);
    }
    out
}
