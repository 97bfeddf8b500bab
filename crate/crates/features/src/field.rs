use std::fmt;
use std::str::FromStr;

use crate::error::{FeatureError, Result};
use crate::gabor::{gabor_bank, GaborBank};
use crate::gradients::signed_gradients;
use crate::plane::{Image, Plane};

/// Per-pixel feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    /// `[I, |Ix|, |Iy|, |Ixx|, |Iyy|]`
    Texture5,
    /// `[I, |Ix|, |Iy|, |Ixx|, |Iyy|, 20 Gabor magnitudes]`
    Virus25,
    /// `[I, x, y, 40 Gabor magnitudes]`
    Face43,
    /// `[x, y, R, G, B, |∇R|, |∇G|, |∇B|, |∇²R|, |∇²G|, |∇²B|]`
    Color11,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 4] =
        [Self::Texture5, Self::Virus25, Self::Face43, Self::Color11];

    pub fn dim(self) -> usize {
        match self {
            Self::Texture5 => 5,
            Self::Virus25 => 25,
            Self::Face43 => 43,
            Self::Color11 => 11,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Texture5 => "texture5",
            Self::Virus25 => "virus25",
            Self::Face43 => "face43",
            Self::Color11 => "color11",
        }
    }

    /// Protocol working size `(width, height)`, if images are resampled first.
    pub fn protocol_size(self) -> Option<(usize, usize)> {
        match self {
            Self::Texture5 => Some((256, 256)),
            Self::Face43 => Some((64, 64)),
            Self::Color11 => Some((32, 64)),
            Self::Virus25 => None,
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FeatureError::UnknownKind(s.to_string()))
    }
}

/// Gabor banks used by the layouts that need them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    /// 5 scales × 8 orientations.
    pub face_bank: GaborBank,
    /// 5 scales × 4 orientations, giving the 20 responses of the 25-dim layout.
    pub virus_bank: GaborBank,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            face_bank: GaborBank::default(),
            virus_bank: GaborBank {
                orientations: 4,
                ..GaborBank::default()
            },
        }
    }
}

/// Stacked per-pixel feature planes of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    width: usize,
    height: usize,
    kind: DescriptorKind,
    planes: Vec<Plane>,
}

impl FeatureField {
    pub fn new(kind: DescriptorKind, planes: Vec<Plane>) -> Result<Self> {
        let first = planes.first().ok_or_else(|| {
            FeatureError::ChannelMismatch("a field needs at least one plane".into())
        })?;
        let (width, height) = (first.width(), first.height());
        if planes
            .iter()
            .any(|p| p.width() != width || p.height() != height)
        {
            return Err(FeatureError::ChannelMismatch(
                "planes differ in size".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            kind,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn channel(&self, c: usize) -> &Plane {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }
}

fn coordinate_planes(w: usize, h: usize) -> [Plane; 2] {
    [
        Plane::from_fn(w, h, |x, _| x as f64),
        Plane::from_fn(w, h, |_, y| y as f64),
    ]
}

fn gray(image: &Image) -> Plane {
    image.luma()
}

fn intensity_derivatives(i: &Plane) -> Result<Vec<Plane>> {
    let g = signed_gradients(i)?;
    Ok(vec![
        g.dx.map(f64::abs),
        g.dy.map(f64::abs),
        g.dxx.map(f64::abs),
        g.dyy.map(f64::abs),
    ])
}

/// Builds the feature planes for `kind` at the image's own resolution.
pub fn build_feature_field(
    image: &Image,
    kind: DescriptorKind,
    opts: &FeatureOptions,
) -> Result<FeatureField> {
    let (w, h) = (image.width(), image.height());
    let planes = match kind {
        DescriptorKind::Texture5 => {
            let i = gray(image);
            let mut p = vec![i.clone()];
            p.extend(intensity_derivatives(&i)?);
            p
        }
        DescriptorKind::Virus25 => {
            let i = gray(image);
            let mut p = vec![i.clone()];
            p.extend(intensity_derivatives(&i)?);
            p.extend(gabor_bank(&i, &opts.virus_bank)?);
            p
        }
        DescriptorKind::Face43 => {
            let i = gray(image);
            let [x, y] = coordinate_planes(w, h);
            let mut p = vec![i.clone(), x, y];
            p.extend(gabor_bank(&i, &opts.face_bank)?);
            p
        }
        DescriptorKind::Color11 => {
            let Image::Rgb(rgb) = image else {
                return Err(FeatureError::ChannelMismatch(
                    "color11 needs an RGB image".into(),
                ));
            };
            let [x, y] = coordinate_planes(w, h);
            let mut p = vec![x, y];
            p.extend(rgb.iter().cloned());
            let grads = rgb
                .iter()
                .map(signed_gradients)
                .collect::<Result<Vec<_>>>()?;
            for g in &grads {
                p.push(Plane::from_fn(w, h, |x, y| {
                    g.dx.get(x, y).hypot(g.dy.get(x, y))
                }));
            }
            for g in &grads {
                p.push(Plane::from_fn(w, h, |x, y| {
                    g.dxx.get(x, y).hypot(g.dyy.get(x, y))
                }));
            }
            p
        }
    };
    FeatureField::new(kind, planes)
}
