use std::f64::consts::PI;

use dps_features::covariance::region_mean;
use dps_features::{
    build_feature_field, covariance_descriptor, gabor_bank, gradients, image_to_points, load_image,
    save_gray, DescriptorKind, ExtractOptions, FeatureOptions, GaborBank, Image, Plane, Region,
    Tiling,
};

fn checkerboard(n: usize) -> Plane {
    Plane::from_fn(n, n, |x, y| ((x / 2 + y / 2) % 2) as f64)
}

fn textured(w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        0.5 + 0.2 * (0.31 * x + 0.17 * y).sin()
            + 0.15 * (0.07 * x * y).cos()
            + 0.1 * (0.9 * y).sin()
    })
}

fn mean_over(p: &Plane, margin: usize) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for y in margin..p.height() - margin {
        for x in margin..p.width() - margin {
            s += p.get(x, y);
            n += 1;
        }
    }
    s / n as f64
}

#[test]
fn constant_image_has_zero_gradients() {
    let g = gradients(&Plane::filled(6, 5, 0.7)).unwrap();
    for p in [&g.dx, &g.dy, &g.dxx, &g.dyy] {
        assert!(p.data().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn ramp_has_unit_slope_and_no_curvature() {
    let g = gradients(&Plane::from_fn(8, 6, |x, _| x as f64)).unwrap();
    for y in 0..6 {
        for x in 1..7 {
            assert_eq!(g.dx.get(x, y), 1.0);
            assert_eq!(g.dxx.get(x, y), 0.0);
        }
        for x in 0..8 {
            assert_eq!(g.dy.get(x, y), 0.0);
            assert_eq!(g.dyy.get(x, y), 0.0);
        }
    }
}

#[test]
fn checkerboard_responses_are_transpose_symmetric() {
    let g = gradients(&checkerboard(12)).unwrap();
    for y in 0..12 {
        for x in 0..12 {
            assert_eq!(g.dx.get(x, y), g.dy.get(y, x));
            assert_eq!(g.dxx.get(x, y), g.dyy.get(y, x));
        }
    }
}

#[test]
fn tiny_images_are_rejected() {
    assert!(gradients(&Plane::filled(2, 5, 0.0)).is_err());
    assert!(gabor_bank(&Plane::filled(30, 30, 0.0), &GaborBank::default()).is_err());
}

#[test]
fn gabor_ignores_constant_images() {
    let intensity = 0.8;
    let planes = gabor_bank(&Plane::filled(48, 40, intensity), &GaborBank::default()).unwrap();
    assert_eq!(planes.len(), 40);
    let worst = planes
        .iter()
        .flat_map(|p| p.data().iter())
        .fold(0.0f64, |a, &b| a.max(b));
    assert!(worst <= 1e-6 * intensity, "largest response {worst}");
}

#[test]
fn gratings_light_up_their_own_plane() {
    let bank = GaborBank::default();
    for v in 0..bank.scales {
        for u in 0..bank.orientations {
            let (lambda, theta) = (bank.wavelength(v), bank.orientation(u));
            let img = Plane::from_fn(96, 96, |x, y| {
                0.5 + 0.5
                    * (2.0 * PI * (x as f64 * theta.cos() + y as f64 * theta.sin()) / lambda).sin()
            });
            let planes = gabor_bank(&img, &bank).unwrap();
            let energy: Vec<f64> = planes.iter().map(|p| mean_over(p, 24)).collect();
            let best = (0..energy.len())
                .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
                .unwrap();
            assert_eq!(
                best,
                v * bank.orientations + u,
                "grating ({v},{u}) energies {energy:?}"
            );
        }
    }
}

#[test]
fn quarter_turn_permutes_orientation_planes() {
    let bank = GaborBank::default();
    let n = 64;
    let img = textured(n, n);
    // Rotate by 90°: (x, y) ↦ (n-1-y, x).
    let rot = Plane::from_fn(n, n, |x, y| img.get(y, n - 1 - x));
    let a = gabor_bank(&img, &bank).unwrap();
    let b = gabor_bank(&rot, &bank).unwrap();
    let shift = bank.orientations / 2;
    for v in 0..bank.scales {
        for u in 0..bank.orientations {
            let pa = &a[v * bank.orientations + u];
            let pb = &b[v * bank.orientations + (u + shift) % bank.orientations];
            let xs: Vec<f64> = (0..n * n).map(|i| pa.get(i % n, i / n)).collect();
            let ys: Vec<f64> = (0..n * n).map(|i| pb.get(n - 1 - i / n, i % n)).collect();
            let r = dps_core::stats::pearson(&xs, &ys);
            assert!(r >= 0.9, "plane ({v},{u}) correlation {r}");
        }
    }
}

#[test]
fn layouts_have_documented_channels() {
    let opts = FeatureOptions::default();
    let gray = Image::Gray(textured(48, 48));
    let p = textured(48, 48);
    let rgb = Image::rgb(p.clone(), p.map(|v| 1.0 - v), p.map(|v| v * v)).unwrap();
    for kind in DescriptorKind::ALL {
        let img = if kind == DescriptorKind::Color11 {
            &rgb
        } else {
            &gray
        };
        let field = build_feature_field(img, kind, &opts).unwrap();
        assert_eq!(field.channels(), kind.dim(), "{kind}");
        assert_eq!(kind.name().parse::<DescriptorKind>().unwrap(), kind);
    }
    assert!(build_feature_field(&gray, DescriptorKind::Color11, &opts).is_err());
    let face = build_feature_field(&gray, DescriptorKind::Face43, &opts).unwrap();
    assert_eq!(face.channel(1).get(3, 7), 3.0);
    assert_eq!(face.channel(2).get(3, 7), 7.0);
}

#[test]
fn texture_layout_on_constant_image() {
    let field = build_feature_field(
        &Image::Gray(Plane::filled(9, 9, 0.4)),
        DescriptorKind::Texture5,
        &FeatureOptions::default(),
    )
    .unwrap();
    assert!(field.channel(0).data().iter().all(|v| *v == 0.4));
    for c in 1..5 {
        assert!(field.channel(c).data().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn constant_field_gives_scaled_identity() {
    let field = build_feature_field(
        &Image::Gray(Plane::filled(9, 9, 0.4)),
        DescriptorKind::Texture5,
        &FeatureOptions::default(),
    )
    .unwrap();
    let spd = covariance_descriptor(&field, Region::whole(&field), 1e-6).unwrap();
    let expect = nalgebra::DMatrix::<f64>::identity(5, 5) * 1e-6;
    assert!((spd.matrix() - expect).amax() < 1e-18);
}

#[test]
fn tile_means_average_to_global_mean() {
    let field = build_feature_field(
        &Image::Gray(textured(32, 24)),
        DescriptorKind::Texture5,
        &FeatureOptions::default(),
    )
    .unwrap();
    let global = region_mean(&field, Region::whole(&field)).unwrap();
    let tiles = Tiling::grid(4, 4).regions(32, 24).unwrap();
    for c in 0..5 {
        let avg: f64 = tiles
            .iter()
            .map(|&r| region_mean(&field, r).unwrap()[c])
            .sum::<f64>()
            / tiles.len() as f64;
        assert!((avg - global[c]).abs() < 1e-12);
    }
}

#[test]
fn protocol_descriptor_counts() {
    let opts = ExtractOptions::default();
    let texture = image_to_points(
        &Image::Gray(textured(300, 280)),
        DescriptorKind::Texture5,
        Tiling::grid(8, 8),
        &opts,
    )
    .unwrap();
    assert_eq!(texture.len(), 64);
    assert!(texture.iter().all(|d| d.dim() == 5));
    let face = image_to_points(
        &Image::Gray(textured(90, 100)),
        DescriptorKind::Face43,
        Tiling::WHOLE,
        &opts,
    )
    .unwrap();
    assert_eq!((face.len(), face[0].dim()), (1, 43));
    let p = textured(50, 120);
    let person = Image::rgb(p.clone(), p.map(|v| 1.0 - v), p.map(|v| 0.5 * v)).unwrap();
    let color = image_to_points(&person, DescriptorKind::Color11, Tiling::WHOLE, &opts).unwrap();
    assert_eq!((color.len(), color[0].dim()), (1, 11));
    let virus = image_to_points(
        &Image::Gray(textured(41, 41)),
        DescriptorKind::Virus25,
        Tiling::WHOLE,
        &opts,
    )
    .unwrap();
    assert_eq!((virus.len(), virus[0].dim()), (1, 25));
    assert!(image_to_points(
        &Image::Gray(textured(41, 41)),
        DescriptorKind::Virus25,
        Tiling::grid(3, 3),
        &opts
    )
    .is_err());
}

#[test]
fn images_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let plane = Plane::from_fn(7, 5, |x, y| ((x + 2 * y) % 6) as f64 / 5.0);
    for ext in ["png", "pgm"] {
        let path = dir.path().join(format!("tile.{ext}"));
        save_gray(&plane, &path).unwrap();
        let Image::Gray(back) = load_image(&path).unwrap() else {
            panic!("expected a gray image")
        };
        for (a, b) in back.data().iter().zip(plane.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
    assert!(load_image(&dir.path().join("missing.png")).is_err());
}
