//! 8-bit RGB frame storage and the few pixel operations the pipeline needs.

use crate::error::{Error, Result};

/// BT.601 luma coefficients.
pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

/// A row-major, interleaved 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RgbFrame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "buffer of {} bytes does not match {width}x{height} RGB",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A frame where every pixel has the same color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds a frame by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Per-pixel BT.601 luma on the 0-255 scale, row-major.
    pub fn luma(&self) -> Vec<f64> {
        self.pixels().map(luma_of).collect()
    }

    /// Bilinear resample to `width` x `height` using pixel-center alignment.
    /// Returns an identical copy when the size already matches.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<RgbFrame> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("cannot resize to {width}x{height}")));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs = axis_taps(self.width, width);
        let ys = axis_taps(self.height, height);
        let mut data = Vec::with_capacity(width * height * 3);
        for &(y0, y1, fy) in &ys {
            let row0 = &self.data[y0 * self.width * 3..(y0 + 1) * self.width * 3];
            let row1 = &self.data[y1 * self.width * 3..(y1 + 1) * self.width * 3];
            for &(x0, x1, fx) in &xs {
                for c in 0..3 {
                    let a = row0[x0 * 3 + c] as f64;
                    let b = row0[x1 * 3 + c] as f64;
                    let d = row1[x0 * 3 + c] as f64;
                    let e = row1[x1 * 3 + c] as f64;
                    let top = a + (b - a) * fx;
                    let bottom = d + (e - d) * fx;
                    let v = top + (bottom - top) * fy;
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Ok(RgbFrame {
            width,
            height,
            data,
        })
    }

    /// Copies out the `width` x `height` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<RgbFrame> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(Error::InvalidFrame(format!(
                "crop {width}x{height}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * 3);
        for row in y..y + height {
            let start = (row * self.width + x) * 3;
            data.extend_from_slice(&self.data[start..start + width * 3]);
        }
        Ok(RgbFrame {
            width,
            height,
            data,
        })
    }
}

#[inline]
pub fn luma_of(p: [u8; 3]) -> f64 {
    LUMA_R * p[0] as f64 + LUMA_G * p[1] as f64 + LUMA_B * p[2] as f64
}

/// For each destination coordinate: the two source taps and the blend factor.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_buffer() {
        assert!(RgbFrame::new(2, 2, vec![0; 11]).is_err());
        assert!(RgbFrame::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn resize_same_size_is_identity() {
        let f = RgbFrame::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 9]);
        assert_eq!(f.resize_bilinear(7, 5).unwrap(), f);
    }

    #[test]
    fn resize_preserves_constant_color() {
        let f = RgbFrame::filled(3, 4, [10, 200, 77]);
        let r = f.resize_bilinear(11, 6).unwrap();
        assert!(r.pixels().all(|p| p == [10, 200, 77]));
    }

    #[test]
    fn upscale_by_two_interpolates_midpoints() {
        let f = RgbFrame::new(2, 1, vec![0, 0, 0, 200, 200, 200]).unwrap();
        let r = f.resize_bilinear(4, 1).unwrap();
        let reds: Vec<u8> = r.pixels().map(|p| p[0]).collect();
        assert_eq!(reds, vec![0, 50, 150, 200]);
    }

    #[test]
    fn crop_bounds_checked() {
        let f = RgbFrame::filled(4, 4, [1, 2, 3]);
        assert!(f.crop(2, 2, 3, 1).is_err());
        let c = f.crop(1, 1, 3, 3).unwrap();
        assert_eq!((c.width(), c.height()), (3, 3));
    }

    #[test]
    fn luma_of_white_is_255() {
        assert!((luma_of([255, 255, 255]) - 255.0).abs() < 1e-12);
    }
}
