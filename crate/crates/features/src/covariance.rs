use dps_core::{regularize, SpdMatrix};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{FeatureError, Result};
use crate::field::{build_feature_field, DescriptorKind, FeatureField, FeatureOptions};
use crate::plane::Image;

/// Default relative diagonal load for descriptor regularization.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn whole(field: &FeatureField) -> Self {
        Self {
            x: 0,
            y: 0,
            width: field.width(),
            height: field.height(),
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Grid of equally sized tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tiling {
    pub rows: usize,
    pub cols: usize,
}

impl Tiling {
    pub const WHOLE: Tiling = Tiling { rows: 1, cols: 1 };

    pub fn grid(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    /// Tile rectangles in row-major order.
    pub fn regions(&self, width: usize, height: usize) -> Result<Vec<Region>> {
        if self.rows == 0 || self.cols == 0 || !width.is_multiple_of(self.cols) || !height.is_multiple_of(self.rows) {
            return Err(FeatureError::Tiling {
                rows: self.rows,
                cols: self.cols,
                width,
                height,
            });
        }
        let (tw, th) = (width / self.cols, height / self.rows);
        Ok((0..self.rows)
            .flat_map(|r| {
                (0..self.cols).map(move |c| Region {
                    x: c * tw,
                    y: r * th,
                    width: tw,
                    height: th,
                })
            })
            .collect())
    }
}

/// Per-channel means over `region`.
pub fn region_mean(field: &FeatureField, region: Region) -> Result<Vec<f64>> {
    check_region(field, region)?;
    Ok(field
        .planes()
        .iter()
        .map(|p| {
            let mut s = 0.0;
            for y in region.y..region.y + region.height {
                for x in region.x..region.x + region.width {
                    s += p.get(x, y);
                }
            }
            s / region.area() as f64
        })
        .collect())
}

fn check_region(field: &FeatureField, region: Region) -> Result<()> {
    if region.area() < 2 {
        return Err(FeatureError::Region(format!(
            "area {} is below 2",
            region.area()
        )));
    }
    if region.x + region.width > field.width() || region.y + region.height > field.height() {
        return Err(FeatureError::Region(format!(
            "{region:?} exceeds the {}×{} field",
            field.width(),
            field.height()
        )));
    }
    Ok(())
}

/// Unbiased sample covariance of the feature vectors in `region`.
///
/// Values are shifted by the region's first pixel before accumulating, so a
/// constant channel yields exact zeros.
pub fn region_covariance(field: &FeatureField, region: Region) -> Result<DMatrix<f64>> {
    check_region(field, region)?;
    let c = field.channels();
    let shift: Vec<f64> = field.planes().iter().map(|p| p.get(region.x, region.y)).collect();
    let mut sum = vec![0.0; c];
    let mut cross = DMatrix::<f64>::zeros(c, c);
    let mut v = vec![0.0; c];
    for y in region.y..region.y + region.height {
        for x in region.x..region.x + region.width {
            for (k, p) in field.planes().iter().enumerate() {
                v[k] = p.get(x, y) - shift[k];
                sum[k] += v[k];
            }
            for i in 0..c {
                for j in i..c {
                    cross[(i, j)] += v[i] * v[j];
                }
            }
        }
    }
    let n = region.area() as f64;
    let mut cov = DMatrix::<f64>::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            let s = (cross[(i, j)] - sum[i] * sum[j] / n) / (n - 1.0);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    Ok(cov)
}

/// Region covariance lifted onto the SPD cone.
pub fn covariance_descriptor(
    field: &FeatureField,
    region: Region,
    epsilon: f64,
) -> Result<SpdMatrix<f64>> {
    Ok(regularize(&region_covariance(field, region)?, epsilon)?)
}

/// Descriptor extraction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub features: FeatureOptions,
    /// Resample to the kind's protocol size before extracting.
    pub resample: bool,
    pub epsilon: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            features: FeatureOptions::default(),
            resample: true,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// One descriptor per tile, in row-major tile order.
pub fn image_to_points(
    image: &Image,
    kind: DescriptorKind,
    tiling: Tiling,
    opts: &ExtractOptions,
) -> Result<Vec<SpdMatrix<f64>>> {
    let working = match kind.protocol_size() {
        Some((w, h)) if opts.resample => image.resample_area(w, h)?,
        _ => image.clone(),
    };
    let regions = tiling.regions(working.width(), working.height())?;
    let field = build_feature_field(&working, kind, &opts.features)?;
    regions
        .par_iter()
        .map(|&r| covariance_descriptor(&field, r, opts.epsilon))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    #[test]
    fn two_pixel_region_by_hand() {
        let field = FeatureField::new(
            DescriptorKind::Texture5,
            vec![
                Plane::new(2, 1, vec![0.0, 2.0]).unwrap(),
                Plane::new(2, 1, vec![0.0, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        let region = Region::whole(&field);
        let cov = region_covariance(&field, region).unwrap();
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let spd = covariance_descriptor(&field, region, 1e-6).unwrap();
        assert!(spd.eigen().smallest() > 0.0);
        assert!((spd.matrix()[(0, 0)] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn indivisible_tiling_is_rejected() {
        assert!(Tiling::grid(3, 3).regions(10, 9).is_err());
        assert_eq!(Tiling::grid(8, 8).regions(256, 256).unwrap().len(), 64);
    }
}
