use std::fs;
use std::path::{Path, PathBuf};

use dps_core::cache::{DescriptorRecord, DescriptorSet};
use dps_core::{spd_expm, SpdMatrix};
use dps_features::{image_to_points, load_image, DescriptorKind, ExtractOptions, Image, Tiling};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::SyntheticSpec;
use crate::error::{HarnessError, Result};

const IMAGE_EXTENSIONS: [&str; 4] = ["pgm", "ppm", "pnm", "png"];

/// One decoded image and its class.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub path: PathBuf,
    pub label: usize,
    pub image: Image,
}

#[derive(Debug, Clone)]
pub struct ImageDataset {
    pub root: PathBuf,
    pub class_names: Vec<String>,
    pub images: Vec<LabeledImage>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| HarnessError::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Loads `root/<class>/<image>` in lexicographic order; labels follow the
/// sorted class directory names. Files with other extensions are ignored.
pub fn load_image_dataset(root: &Path) -> Result<ImageDataset> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(HarnessError::dataset(root, "no class subdirectories"));
    }
    let mut class_names = Vec::with_capacity(class_dirs.len());
    let mut files = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let images: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| is_image(p))
            .collect();
        if images.is_empty() {
            return Err(HarnessError::dataset(dir, "class has no images"));
        }
        class_names.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        files.extend(images.into_iter().map(|p| (p, label)));
    }
    let images = files
        .into_par_iter()
        .map(|(path, label)| {
            let image = load_image(&path)?;
            Ok(LabeledImage { path, label, image })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageDataset {
        root: root.to_path_buf(),
        class_names,
        images,
    })
}

/// Region covariance descriptors for every tile of every image; records are
/// named `<class>/<file>#<tile>` and keep image order, then row-major tiles.
pub fn extract_descriptors(
    dataset: &ImageDataset,
    kind: DescriptorKind,
    tiling: Tiling,
    opts: &ExtractOptions,
) -> Result<DescriptorSet<f64>> {
    let per_image = dataset
        .images
        .par_iter()
        .map(|img| {
            let points = image_to_points(&img.image, kind, tiling, opts).map_err(|e| {
                HarnessError::dataset(&img.path, format!("descriptor extraction failed: {e}"))
            })?;
            let stem = img
                .path
                .strip_prefix(&dataset.root)
                .unwrap_or(&img.path)
                .to_string_lossy()
                .replace('\\', "/");
            Ok(points
                .into_iter()
                .enumerate()
                .map(|(t, descriptor)| DescriptorRecord {
                    name: format!("{stem}#{t}"),
                    label: img.label,
                    descriptor,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DescriptorSet {
        class_names: dataset.class_names.clone(),
        records: per_image.into_iter().flatten().collect(),
    })
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    (&a + a.transpose()) * 0.5
}

/// Class `c` has log-mean `M_c = spread · S_c`; its samples are
/// `expm(M_c + noise · R)` with `S_c`, `R` symmetric with standard normal
/// entries before symmetrization. All centres are drawn first, then the
/// samples class by class.
pub fn synthetic_spd_dataset(spec: &SyntheticSpec) -> Result<DescriptorSet<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centres: Vec<DMatrix<f64>> = (0..spec.classes)
        .map(|_| random_symmetric(&mut rng, spec.dim, spec.spread))
        .collect();
    let mut records = Vec::with_capacity(spec.classes * spec.per_class);
    for (c, centre) in centres.iter().enumerate() {
        for i in 0..spec.per_class {
            let s = centre + random_symmetric(&mut rng, spec.dim, spec.noise);
            records.push(DescriptorRecord {
                name: format!("class{c}/{i:04}"),
                label: c,
                descriptor: spd_expm(&s)?,
            });
        }
    }
    Ok(DescriptorSet {
        class_names: (0..spec.classes).map(|c| format!("class{c}")).collect(),
        records,
    })
}

/// Points and labels of a descriptor set.
pub fn points_and_labels(set: &DescriptorSet<f64>) -> (Vec<SpdMatrix<f64>>, Vec<usize>) {
    set.records
        .iter()
        .map(|r| (r.descriptor.clone(), r.label))
        .unzip()
}
