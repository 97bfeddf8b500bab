use crate::error::{FeatureError, Result};
use crate::plane::Plane;

/// Absolute first and second central differences with replicated borders.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dx: Plane,
    pub dy: Plane,
    pub dxx: Plane,
    pub dyy: Plane,
}

/// Signed differences; the feature layouts take magnitudes of these.
pub(crate) struct SignedGradients {
    pub dx: Plane,
    pub dy: Plane,
    pub dxx: Plane,
    pub dyy: Plane,
}

pub(crate) fn signed_gradients(image: &Plane) -> Result<SignedGradients> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(FeatureError::TooSmall {
            width: w,
            height: h,
            reason: "differences need at least 3×3 pixels".into(),
        });
    }
    let at =
        |x: usize, y: usize, ox: isize, oy: isize| image.clamped(x as isize + ox, y as isize + oy);
    Ok(SignedGradients {
        dx: Plane::from_fn(w, h, |x, y| 0.5 * (at(x, y, 1, 0) - at(x, y, -1, 0))),
        dy: Plane::from_fn(w, h, |x, y| 0.5 * (at(x, y, 0, 1) - at(x, y, 0, -1))),
        dxx: Plane::from_fn(w, h, |x, y| {
            at(x, y, 1, 0) - 2.0 * image.get(x, y) + at(x, y, -1, 0)
        }),
        dyy: Plane::from_fn(w, h, |x, y| {
            at(x, y, 0, 1) - 2.0 * image.get(x, y) + at(x, y, 0, -1)
        }),
    })
}

/// `(|∂I/∂x|, |∂I/∂y|, |∂²I/∂x²|, |∂²I/∂y²|)`.
pub fn gradients(image: &Plane) -> Result<Gradients> {
    let s = signed_gradients(image)?;
    Ok(Gradients {
        dx: s.dx.map(f64::abs),
        dy: s.dy.map(f64::abs),
        dxx: s.dxx.map(f64::abs),
        dyy: s.dyy.map(f64::abs),
    })
}
