//! Synthetic fixtures: the published class registries of the two material
//! datasets, and a seeded procedural texture generator for desk-scale
//! end-to-end runs.
//!
//! On combining the two registries: the published combined set is reported
//! with 24 classes, but the 11 + 20 lists below share exactly six normalized
//! names (asphalt, brick, cement_granular, gravel, paving, wood), so
//! exact-name merging yields 25. The extra merge that would reach 24 is not
//! published; it is left to an explicit alias-map entry rather than guessed
//! here.

use std::fs;
use std::path::{Path, PathBuf};

use super::DatasetIndex;
use crate::augment::{io, Image};
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Class registry of the building-material dataset (11 classes, 1231
/// images at 4608x3456).
pub const BMD_CLASSES: [&str; 11] = [
    "asphalt",
    "brick",
    "cement-granular",
    "clay hollow block",
    "concrete block",
    "gravel",
    "paving",
    "sandstorms",
    "soil",
    "stone",
    "wood",
];

/// Class registry of the construction-materials library (20 classes, 3266
/// images at 200x200).
pub const CML_CLASSES: [&str; 20] = [
    "Asphalt",
    "Brick",
    "Cement-Granular",
    "Cement-Smooth",
    "Concrete-Cast",
    "Concrete-Precast",
    "Foliage",
    "Form Work",
    "Grass",
    "Gravel",
    "Marble",
    "Metal-Grills",
    "Paving",
    "Soil-Compact",
    "Soil-Loose",
    "Soil-Mulch",
    "Soil-Vegetation",
    "Stone-Granular",
    "Stone-Limestone",
    "Wood",
];

/// Procedural texture families, visually separable by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextureClass {
    /// Horizontal stripes of period four with a random phase.
    Stripes,
    /// Four-pixel checkerboard with a random parity.
    Checker,
    /// Independent uniform noise per channel.
    Noise,
    /// Linear ramp toward one of the four edges.
    Gradient,
}

impl TextureClass {
    pub const ALL: [TextureClass; 4] = [
        TextureClass::Stripes,
        TextureClass::Checker,
        TextureClass::Noise,
        TextureClass::Gradient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TextureClass::Stripes => "stripes",
            TextureClass::Checker => "checker",
            TextureClass::Noise => "noise",
            TextureClass::Gradient => "gradient",
        }
    }
}

fn jitter(rng: &mut RngState, v: f64) -> u8 {
    super::super::augment::round_to_u8(v + rng.range_i64(-8, 8) as f64)
}

/// Draws one square texture image. Deterministic in `(class, size, rng)`.
pub fn generate_texture(class: TextureClass, size: usize, rng: &mut RngState) -> Image {
    let mut img = Image::filled(size, size, [0, 0, 0]);
    match class {
        TextureClass::Stripes => {
            let phase = rng.bounded(4) as usize;
            for y in 0..size {
                let bright = (y + phase) % 4 < 2;
                for x in 0..size {
                    let base: [f64; 3] = if bright {
                        [205.0, 80.0, 60.0]
                    } else {
                        [25.0, 20.0, 20.0]
                    };
                    img.set(
                        x,
                        y,
                        [
                            jitter(rng, base[0]),
                            jitter(rng, base[1]),
                            jitter(rng, base[2]),
                        ],
                    );
                }
            }
        }
        TextureClass::Checker => {
            let parity = rng.bounded(2) as usize;
            for y in 0..size {
                for x in 0..size {
                    let cell = (x / 4 + y / 4 + parity) % 2 == 0;
                    let base: [f64; 3] = if cell {
                        [60.0, 205.0, 80.0]
                    } else {
                        [20.0, 25.0, 20.0]
                    };
                    img.set(
                        x,
                        y,
                        [
                            jitter(rng, base[0]),
                            jitter(rng, base[1]),
                            jitter(rng, base[2]),
                        ],
                    );
                }
            }
        }
        TextureClass::Noise => {
            for y in 0..size {
                for x in 0..size {
                    img.set(
                        x,
                        y,
                        [
                            rng.bounded(256) as u8,
                            rng.bounded(256) as u8,
                            rng.bounded(256) as u8,
                        ],
                    );
                }
            }
        }
        TextureClass::Gradient => {
            let direction = rng.bounded(4);
            for y in 0..size {
                for x in 0..size {
                    let t = match direction {
                        0 => x as f64 / (size - 1) as f64,
                        1 => 1.0 - x as f64 / (size - 1) as f64,
                        2 => y as f64 / (size - 1) as f64,
                        _ => 1.0 - y as f64 / (size - 1) as f64,
                    };
                    img.set(
                        x,
                        y,
                        [
                            jitter(rng, 70.0 * t),
                            jitter(rng, 90.0 * t),
                            jitter(rng, 220.0 * t),
                        ],
                    );
                }
            }
        }
    }
    img
}

/// Writes a directory-per-class texture dataset: `counts[i]` images of
/// `TextureClass::ALL[i]`, each drawn on the substream
/// `substream2(seed, class_index, image_index)` so the tree is a pure
/// function of `(size, counts, seed)`.
pub fn write_texture_dataset(
    root: &Path,
    size: usize,
    counts: &[usize],
    seed: u64,
) -> Result<()> {
    if counts.is_empty() || counts.len() > TextureClass::ALL.len() {
        return Err(Error::Input(format!(
            "texture dataset supports 1..=4 classes, got {}",
            counts.len()
        )));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for (class_idx, (&count, class)) in counts.iter().zip(TextureClass::ALL).enumerate() {
        let dir = root.join(class.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..count {
            let mut rng = RngState::substream2(seed, class_idx as u64, i as u64);
            let img = generate_texture(class, size, &mut rng);
            io::write_ppm(&img, &dir.join(format!("img_{i:04}.ppm")))?;
        }
    }
    Ok(())
}

/// In-memory fixture index: `counts[i]` synthetic sample paths per class,
/// no files behind them. For split/merge arithmetic at dataset scale.
pub fn index_with_counts(
    name: &str,
    class_names: &[&str],
    counts: &[usize],
) -> Result<DatasetIndex> {
    if class_names.len() != counts.len() {
        return Err(Error::Input(format!(
            "{} class names for {} counts",
            class_names.len(),
            counts.len()
        )));
    }
    let mut samples = Vec::with_capacity(counts.iter().sum());
    for (class_id, (&class, &count)) in class_names.iter().zip(counts).enumerate() {
        for i in 0..count {
            samples.push((
                PathBuf::from(format!("{name}/{class}/img_{i:05}.ppm")),
                class_id,
            ));
        }
    }
    DatasetIndex::from_parts(
        name,
        class_names.iter().map(|s| s.to_string()).collect(),
        samples,
    )
}
