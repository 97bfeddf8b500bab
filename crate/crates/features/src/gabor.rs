use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FeatureError, Result};
use crate::plane::Plane;

/// Complex Gabor filter bank: `scales` wavelengths spaced geometrically from
/// `min_wavelength` to `max_wavelength`, `orientations` angles uniform in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborBank {
    pub scales: usize,
    pub orientations: usize,
    pub min_wavelength: f64,
    pub max_wavelength: f64,
    /// Envelope σ as a fraction of the wavelength.
    pub sigma_ratio: f64,
    /// Spatial aspect ratio γ of the envelope.
    pub aspect: f64,
}

impl Default for GaborBank {
    fn default() -> Self {
        Self {
            scales: 5,
            orientations: 8,
            min_wavelength: 4.0,
            max_wavelength: 32.0,
            sigma_ratio: 0.56,
            aspect: 0.5,
        }
    }
}

/// Sampled kernel on `[-radius, radius]²`, row-major.
#[derive(Debug, Clone)]
pub struct GaborKernel {
    pub radius: usize,
    pub taps: Vec<Complex<f64>>,
}

impl GaborBank {
    pub fn len(&self) -> usize {
        self.scales * self.orientations
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wavelength(&self, v: usize) -> f64 {
        if self.scales <= 1 {
            return self.min_wavelength;
        }
        let t = v as f64 / (self.scales - 1) as f64;
        self.min_wavelength * (self.max_wavelength / self.min_wavelength).powf(t)
    }

    pub fn orientation(&self, u: usize) -> f64 {
        u as f64 * PI / self.orientations as f64
    }

    pub fn radius(&self, v: usize) -> usize {
        (2.0 * self.sigma_ratio * self.wavelength(v)).ceil() as usize
    }

    pub fn max_radius(&self) -> usize {
        (0..self.scales).map(|v| self.radius(v)).max().unwrap_or(0)
    }

    /// Zero-mean kernel for scale `v` and orientation `u`, normalized by the
    /// envelope mass so responses are comparable across scales.
    pub fn kernel(&self, v: usize, u: usize) -> GaborKernel {
        let lambda = self.wavelength(v);
        let sigma = self.sigma_ratio * lambda;
        let theta = self.orientation(u);
        let (s, c) = theta.sin_cos();
        let r = self.radius(v) as isize;
        let mut env = Vec::new();
        let mut carrier = Vec::new();
        for y in -r..=r {
            for x in -r..=r {
                let xr = x as f64 * c + y as f64 * s;
                let yr = -(x as f64) * s + y as f64 * c;
                env.push(
                    (-(xr * xr + self.aspect * self.aspect * yr * yr) / (2.0 * sigma * sigma))
                        .exp(),
                );
                carrier.push(Complex::from_polar(1.0, 2.0 * PI * xr / lambda));
            }
        }
        let mass: f64 = env.iter().sum();
        let dc: Complex<f64> = env
            .iter()
            .zip(&carrier)
            .map(|(e, c)| c * e)
            .sum::<Complex<f64>>()
            / mass;
        let taps = env
            .iter()
            .zip(&carrier)
            .map(|(e, c)| (c - dc) * (e / mass))
            .collect();
        GaborKernel {
            radius: r as usize,
            taps,
        }
    }
}

/// Replicate-padded image spectrum shared by all kernels of one image.
struct PaddedSpectrum {
    width: usize,
    height: usize,
    pad: usize,
    fw: usize,
    fh: usize,
    spectrum: Vec<Complex<f64>>,
}

fn fft2(
    data: &mut [Complex<f64>],
    w: usize,
    h: usize,
    inverse: bool,
    planner: &mut FftPlanner<f64>,
) {
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for r in data.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut buf = vec![Complex::default(); h];
    for x in 0..w {
        for y in 0..h {
            buf[y] = data[y * w + x];
        }
        col.process(&mut buf);
        for y in 0..h {
            data[y * w + x] = buf[y];
        }
    }
}

impl PaddedSpectrum {
    fn new(image: &Plane, pad: usize) -> Self {
        let (w, h) = (image.width(), image.height());
        let fw = w + 4 * pad;
        let fh = h + 4 * pad;
        let mut data = vec![Complex::default(); fw * fh];
        for y in 0..h + 2 * pad {
            for x in 0..w + 2 * pad {
                data[y * fw + x] = Complex::new(
                    image.clamped(x as isize - pad as isize, y as isize - pad as isize),
                    0.0,
                );
            }
        }
        fft2(&mut data, fw, fh, false, &mut FftPlanner::new());
        Self {
            width: w,
            height: h,
            pad,
            fw,
            fh,
            spectrum: data,
        }
    }

    /// Magnitude of the convolution with `kernel`, cropped to the image.
    fn response(&self, kernel: &GaborKernel) -> Plane {
        let (fw, fh) = (self.fw, self.fh);
        let side = 2 * kernel.radius + 1;
        let mut k = vec![Complex::default(); fw * fh];
        for y in 0..side {
            for x in 0..side {
                k[y * fw + x] = kernel.taps[y * side + x];
            }
        }
        let mut planner = FftPlanner::new();
        fft2(&mut k, fw, fh, false, &mut planner);
        for (a, b) in k.iter_mut().zip(&self.spectrum) {
            *a *= b;
        }
        fft2(&mut k, fw, fh, true, &mut planner);
        let norm = (fw * fh) as f64;
        // Full linear convolution index of output pixel p is p + pad + radius.
        let off = self.pad + kernel.radius;
        Plane::from_fn(self.width, self.height, |x, y| {
            k[(y + off) * fw + x + off].norm() / norm
        })
    }
}

/// Magnitude responses `|G_{v,u}|`, ordered scale-major (`v` outer, `u` inner).
pub fn gabor_bank(image: &Plane, bank: &GaborBank) -> Result<Vec<Plane>> {
    if bank.is_empty() {
        return Ok(Vec::new());
    }
    let r = bank.max_radius();
    if image.width() <= r || image.height() <= r {
        return Err(FeatureError::TooSmall {
            width: image.width(),
            height: image.height(),
            reason: format!("the largest Gabor kernel has radius {r}"),
        });
    }
    let spectrum = PaddedSpectrum::new(image, r);
    let pairs: Vec<(usize, usize)> = (0..bank.scales)
        .flat_map(|v| (0..bank.orientations).map(move |u| (v, u)))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(v, u)| spectrum.response(&bank.kernel(v, u)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_are_dc_free() {
        let bank = GaborBank::default();
        for v in 0..bank.scales {
            for u in 0..bank.orientations {
                let sum: Complex<f64> = bank.kernel(v, u).taps.iter().sum();
                assert!(sum.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fft_response_matches_direct_convolution() {
        let bank = GaborBank {
            scales: 1,
            orientations: 3,
            min_wavelength: 4.0,
            max_wavelength: 4.0,
            ..GaborBank::default()
        };
        let img = Plane::from_fn(13, 11, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.2);
        let planes = gabor_bank(&img, &bank).unwrap();
        let k = bank.kernel(0, 1);
        let r = k.radius as isize;
        let side = 2 * r + 1;
        for (x, y) in [(0usize, 0usize), (6, 5), (12, 10)] {
            let mut acc = Complex::<f64>::default();
            for dy in -r..=r {
                for dx in -r..=r {
                    let tap = k.taps[((dy + r) * side + dx + r) as usize];
                    acc += tap * img.clamped(x as isize - dx, y as isize - dy);
                }
            }
            assert!((acc.norm() - planes[1].get(x, y)).abs() < 1e-12);
        }
    }
}
