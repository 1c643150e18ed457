//! Seeded two-class image generator with known discriminative regions.
//!
//! Both classes share a nearly flat background and one or two wide, smooth
//! blobs. Positives additionally carry a speckled bright annulus (random pixel
//! dropout plus mild intensity jitter) centred in the upper-left quadrant; its
//! bounding square is recorded so that it can be masked. An equal-area square in the lower-right corner never
//! contains signal in either class.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::Label;
use crate::error::Result;
use crate::imaging::{save_pgm, GrayImage, Rect};

pub const IMAGE_SIZE: usize = 64;
/// Side of the square that always contains the annulus.
pub const MASK_SIDE: usize = 27;
const RING_FILL: f64 = 0.55;
const RING_JITTER: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub image: GrayImage,
    pub label: Label,
    /// Square around the annulus (positives) or where it would be (negatives).
    pub signal_region: Rect,
    /// Equal-area square with background only.
    pub background_region: Rect,
    /// Intensity of the background at the centre of the image.
    pub background_level: u8,
}

/// One image; the same `(label, seed)` always gives the same pixels.
pub fn generate(label: Label, seed: u64) -> SyntheticImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = IMAGE_SIZE;
    let base = rng.random_range(55.0..75.0);
    let tilt_r = rng.random_range(0.0..0.1);
    let tilt_c = rng.random_range(0.0..0.1);
    let mut field: Vec<f64> = (0..n * n)
        .map(|i| base + tilt_r * (i / n) as f64 + tilt_c * (i % n) as f64)
        .collect();

    // blobs in the lower-left and/or upper-right quadrants
    let blob_count = rng.random_range(1..=2);
    let first_corner = rng.random_range(0..2);
    for b in 0..blob_count {
        let (r0, c0) = if (first_corner + b) % 2 == 0 {
            (44.0, 6.0)
        } else {
            (6.0, 44.0)
        };
        let cr = r0 + rng.random_range(0.0..12.0);
        let cc = c0 + rng.random_range(0.0..12.0);
        let sigma: f64 = rng.random_range(6.5..8.0);
        let amp = rng.random_range(40.0..65.0);
        for (i, v) in field.iter_mut().enumerate() {
            let (dr, dc) = ((i / n) as f64 - cr, (i % n) as f64 - cc);
            *v += amp * (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp();
        }
    }

    let cr = rng.random_range(16..=24usize);
    let cc = rng.random_range(16..=24usize);
    if label == Label::Positive {
        let radius = rng.random_range(7.0..10.0);
        let lift = rng.random_range(80.0..100.0);
        for (i, v) in field.iter_mut().enumerate() {
            let (dr, dc) = ((i / n) as f64 - cr as f64, (i % n) as f64 - cc as f64);
            let d = (dr * dr + dc * dc).sqrt();
            if (d - radius).abs() <= 1.5 && rng.random_bool(RING_FILL) {
                *v += lift + rng.random_range(-RING_JITTER..RING_JITTER);
            }
        }
    }

    let data = field
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let image = GrayImage::new(n, n, data).expect("dimensions match");
    let half = MASK_SIDE / 2;
    SyntheticImage {
        background_level: image.get(n / 2, n / 2),
        image,
        label,
        signal_region: Rect::new(
            cr - half,
            cc - half,
            cr - half + MASK_SIDE,
            cc - half + MASK_SIDE,
        ),
        background_region: Rect::new(n - MASK_SIDE, n - MASK_SIDE, n, n),
    }
}

/// `positives` positive and `negatives` negative images with per-image seeds
/// derived from `seed`.
pub fn generate_dataset(positives: usize, negatives: usize, seed: u64) -> Vec<SyntheticImage> {
    let mut out = Vec::with_capacity(positives + negatives);
    for i in 0..positives {
        out.push(generate(Label::Positive, image_seed(seed, 2 * i as u64)));
    }
    for i in 0..negatives {
        out.push(generate(
            Label::Negative,
            image_seed(seed, 2 * i as u64 + 1),
        ));
    }
    out
}

fn image_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Writes the images as PGM files under `root/<positive_dir>` and
/// `root/<negative_dir>`.
pub fn write_dataset(
    images: &[SyntheticImage],
    root: &Path,
    positive_dir: &str,
    negative_dir: &str,
) -> Result<()> {
    let (mut p, mut q) = (0, 0);
    for img in images {
        let path = match img.label {
            Label::Positive => {
                p += 1;
                root.join(positive_dir)
                    .join(format!("pos_{:04}.pgm", p - 1))
            }
            Label::Negative => {
                q += 1;
                root.join(negative_dir)
                    .join(format!("neg_{:04}.pgm", q - 1))
            }
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        }
        save_pgm(&img.image, &path)?;
    }
    Ok(())
}
