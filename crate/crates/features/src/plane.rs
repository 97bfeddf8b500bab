use crate::error::{FeatureError, Result};

/// A single real-valued image plane, row-major with `x` the column index.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FeatureError::Plane("dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(FeatureError::Plane(format!(
                "expected {} samples, found {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::Plane("samples must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with replicated borders.
    #[inline]
    pub fn clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Area-averaging resample to `width × height`.
    pub fn resample_area(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FeatureError::Plane(
                "target dimensions must be positive".into(),
            ));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let wx = area_weights(self.width, width);
        let wy = area_weights(self.height, height);
        let mut rows = vec![0.0; self.height * width];
        for y in 0..self.height {
            for (ox, taps) in wx.iter().enumerate() {
                rows[y * width + ox] = taps.iter().map(|&(i, w)| w * self.get(i, y)).sum();
            }
        }
        let mut data = vec![0.0; height * width];
        for (oy, taps) in wy.iter().enumerate() {
            for ox in 0..width {
                data[oy * width + ox] = taps.iter().map(|&(i, w)| w * rows[i * width + ox]).sum();
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// For each output cell, the source samples it overlaps and their normalized
/// overlap weights.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (first..last.max(first + 1))
                .map(|i| {
                    let a = lo.max(i as f64);
                    let b = hi.min((i + 1) as f64);
                    (i.min(src - 1), (b - a).max(0.0))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Gray or RGB input image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Gray(Plane),
    Rgb([Plane; 3]),
}

impl Image {
    pub fn rgb(r: Plane, g: Plane, b: Plane) -> Result<Self> {
        if (r.width, r.height) != (g.width, g.height) || (r.width, r.height) != (b.width, b.height)
        {
            return Err(FeatureError::ChannelMismatch(
                "RGB planes differ in size".into(),
            ));
        }
        Ok(Self::Rgb([r, g, b]))
    }

    pub fn width(&self) -> usize {
        match self {
            Image::Gray(p) => p.width,
            Image::Rgb(c) => c[0].width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Gray(p) => p.height,
            Image::Rgb(c) => c[0].height,
        }
    }

    /// Rec.601 luma for RGB, the plane itself for gray.
    pub fn luma(&self) -> Plane {
        match self {
            Image::Gray(p) => p.clone(),
            Image::Rgb([r, g, b]) => Plane {
                width: r.width,
                height: r.height,
                data: r
                    .data
                    .iter()
                    .zip(&g.data)
                    .zip(&b.data)
                    .map(|((r, g), b)| 0.299 * r + 0.587 * g + 0.114 * b)
                    .collect(),
            },
        }
    }

    pub fn resample_area(&self, width: usize, height: usize) -> Result<Self> {
        Ok(match self {
            Image::Gray(p) => Image::Gray(p.resample_area(width, height)?),
            Image::Rgb([r, g, b]) => Image::Rgb([
                r.resample_area(width, height)?,
                g.resample_area(width, height)?,
                b.resample_area(width, height)?,
            ]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_averages_blocks() {
        let p = Plane::from_fn(4, 2, |x, y| (x + 4 * y) as f64);
        let h = p.resample_area(2, 1).unwrap();
        assert_eq!(
            h.data(),
            &[(0.0 + 1.0 + 4.0 + 5.0) / 4.0, (2.0 + 3.0 + 6.0 + 7.0) / 4.0]
        );
    }

    #[test]
    fn fractional_resample_preserves_mean() {
        let p = Plane::from_fn(7, 5, |x, y| ((x * 3 + y * 5) % 11) as f64);
        let r = p.resample_area(3, 2).unwrap();
        assert!((r.mean() - p.mean()).abs() < 1e-12);
    }

    #[test]
    fn luma_weights_sum_to_one() {
        let one = Plane::filled(2, 2, 1.0);
        let img = Image::rgb(one.clone(), one.clone(), one).unwrap();
        assert!(img.luma().data().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
