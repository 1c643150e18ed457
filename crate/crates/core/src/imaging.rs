//! Grayscale images, intensity covers and the feature point cloud.

use std::fmt::Write as _;
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "pixel buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    /// In-bounds 8-neighbours of pixel `index` (row-major).
    pub(crate) fn neighbours8(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = ((index / self.width) as isize, (index % self.width) as isize);
        let (h, w) = (self.height as isize, self.width as isize);
        const OFFSETS: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        OFFSETS.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nr < h && nc >= 0 && nc < w).then(|| (nr * w + nc) as usize)
        })
    }
}

/// Decodes PNG, JPEG, BMP or PGM (P2/P5) into a grayscale image.
///
/// Color images are reduced to the floor of the mean of their RGB channels;
/// alpha is ignored.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grayscale(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Same as [`load_grayscale`] for an in-memory encoded image.
pub fn decode_grayscale(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.is_empty() {
        return Err(Error::Format("empty image file".into()));
    }
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::Format(e.to_string()))?;
    from_dynamic(&decoded)
}

fn from_dynamic(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if img.color().has_color() {
        img.to_rgb8()
            .pixels()
            .map(|p| ((u16::from(p[0]) + u16::from(p[1]) + u16::from(p[2])) / 3) as u8)
            .collect()
    } else {
        img.to_luma8().into_raw()
    };
    GrayImage::new(w, h, data)
}

/// Writes a binary PGM (P5).
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The point cloud `{(i, j, p)}`: one `(row, col, intensity)` triple per pixel.
pub fn image_to_point_cloud(img: &GrayImage) -> Vec<(usize, usize, u8)> {
    (0..img.height)
        .flat_map(|r| (0..img.width).map(move |c| (r, c, img.get(r, c))))
        .collect()
}

/// Inclusive intensity band `lo..=hi`.
///
/// Intensities are integers, so a half-open `[lo, hi + 1)` band and this closed
/// form are the same set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub lo: u8,
    pub hi: u8,
}

impl Band {
    #[inline]
    pub fn contains(&self, value: u8) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// A finite cover of the intensity range `[0, 255]` by bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityCover {
    bands: Vec<Band>,
}

impl IntensityCover {
    /// Validates that every band is nonempty and the union is all of `[0, 255]`.
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Argument("cover needs at least one band".into()));
        }
        let mut covered = [false; 256];
        for b in &bands {
            if b.lo > b.hi {
                return Err(Error::Argument(format!("empty band [{}, {}]", b.lo, b.hi)));
            }
            for v in b.lo..=b.hi {
                covered[v as usize] = true;
            }
        }
        if let Some(gap) = covered.iter().position(|c| !c) {
            return Err(Error::Argument(format!("cover misses intensity {gap}")));
        }
        Ok(Self { bands })
    }

    /// `count` equal-width bands, each widened by `overlap` intensity levels on
    /// both sides (clamped to `[0, 255]`).
    pub fn uniform(count: usize, overlap: u8) -> Result<Self> {
        if count == 0 || count > 256 {
            return Err(Error::Argument(format!(
                "band count must be in 1..=256, got {count}"
            )));
        }
        let bands = (0..count)
            .map(|i| {
                let lo = i * 256 / count;
                let hi = (i + 1) * 256 / count - 1;
                Band {
                    lo: lo.saturating_sub(overlap as usize) as u8,
                    hi: (hi + overlap as usize).min(255) as u8,
                }
            })
            .collect();
        Self::new(bands)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }
}

/// One feature point: the centroid of a connected band component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpcVertex {
    pub row: f64,
    pub col: f64,
    pub intensity: f64,
    pub pixel_count: usize,
}

impl FpcVertex {
    pub fn coords(&self) -> [f64; 3] {
        [self.row, self.col, self.intensity]
    }
}

/// Centroids of the 8-connected components of every band preimage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeaturePointCloud {
    pub vertices: Vec<FpcVertex>,
}

impl FeaturePointCloud {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.vertices.iter().map(FpcVertex::coords).collect()
    }

    /// Text export: a header line, then `row col intensity pixel_count` per vertex.
    pub fn to_text(&self) -> String {
        let mut out = String::from("row col intensity pixel_count\n");
        for v in &self.vertices {
            let _ = writeln!(out, "{} {} {} {}", v.row, v.col, v.intensity, v.pixel_count);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "row col intensity pixel_count" => {}
            _ => return Err(Error::Format("missing FPC header".into())),
        }
        let bad = |l: &str| Error::Format(format!("bad FPC record: {l:?}"));
        let mut vertices = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            vertices.push(FpcVertex {
                row: num(f[0])?,
                col: num(f[1])?,
                intensity: num(f[2])?,
                pixel_count: f[3].parse().map_err(|_| bad(line))?,
            });
        }
        Ok(Self { vertices })
    }
}

/// Builds the feature point cloud of `img` for the given cover.
///
/// Vertices are grouped by band (in cover order); within a band, components are
/// listed in raster order of their first pixel.
pub fn build_fpc(img: &GrayImage, cover: &IntensityCover) -> FeaturePointCloud {
    let n = img.data.len();
    let mut label = vec![u32::MAX; n];
    let mut stack = Vec::new();
    let mut vertices = Vec::new();
    for (band_id, band) in cover.bands().iter().enumerate() {
        let tag = band_id as u32;
        for seed in 0..n {
            if label[seed] == tag || !band.contains(img.data[seed]) {
                continue;
            }
            label[seed] = tag;
            stack.push(seed);
            let (mut sr, mut sc, mut sp, mut count) = (0.0, 0.0, 0.0, 0usize);
            while let Some(idx) = stack.pop() {
                sr += (idx / img.width) as f64;
                sc += (idx % img.width) as f64;
                sp += f64::from(img.data[idx]);
                count += 1;
                for nb in img.neighbours8(idx) {
                    if label[nb] != tag && band.contains(img.data[nb]) {
                        label[nb] = tag;
                        stack.push(nb);
                    }
                }
            }
            let k = count as f64;
            vertices.push(FpcVertex {
                row: sr / k,
                col: sc / k,
                intensity: sp / k,
                pixel_count: count,
            });
        }
    }
    FeaturePointCloud { vertices }
}

/// [`build_fpc`] with a size cap: while the cloud has more than `cap`
/// vertices, the band count is halved and the cloud rebuilt.
///
/// Returns the cloud together with the band count that produced it.
pub fn build_fpc_capped(
    img: &GrayImage,
    band_count: usize,
    overlap: u8,
    cap: usize,
) -> Result<(FeaturePointCloud, usize)> {
    let mut bands = band_count;
    loop {
        let fpc = build_fpc(img, &IntensityCover::uniform(bands, overlap)?);
        if fpc.len() <= cap || bands == 1 {
            return Ok((fpc, bands));
        }
        bands = (bands / 2).max(1);
    }
}

/// Half-open rectangle `[r0, r1) x [c0, c1)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl Rect {
    pub fn new(r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        Self { r0, c0, r1, c1 }
    }

    pub fn area(&self) -> usize {
        self.r1.saturating_sub(self.r0) * self.c1.saturating_sub(self.c0)
    }
}

impl std::str::FromStr for Rect {
    type Err = Error;

    /// Parses `r0,c0,r1,c1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Argument(format!("bad rectangle {s:?}, expected r0,c0,r1,c1")))?;
        match parts[..] {
            [r0, c0, r1, c1] => Ok(Rect::new(r0, c0, r1, c1)),
            _ => Err(Error::Argument(format!(
                "bad rectangle {s:?}, expected r0,c0,r1,c1"
            ))),
        }
    }
}

/// Copy of `img` with every pixel of `rect` set to `fill`.
pub fn mask_region(img: &GrayImage, rect: Rect, fill: u8) -> Result<GrayImage> {
    if rect.r0 > rect.r1 || rect.c0 > rect.c1 || rect.r1 > img.height || rect.c1 > img.width {
        return Err(Error::Argument(format!(
            "rectangle {rect:?} outside {}x{} image",
            img.height, img.width
        )));
    }
    let mut out = img.clone();
    for r in rect.r0..rect.r1 {
        out.data[r * img.width + rect.c0..r * img.width + rect.c1].fill(fill);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(img: DynamicImage, fmt: image::ImageFormat) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, fmt).unwrap();
        buf.into_inner()
    }

    #[test]
    fn decodes_gray_png_verbatim() {
        let gray = image::GrayImage::from_raw(2, 2, vec![0, 255, 128, 64]).unwrap();
        let bytes = encode(DynamicImage::ImageLuma8(gray), image::ImageFormat::Png);
        let img = decode_grayscale(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 255, 128, 64]);
    }

    #[test]
    fn rgb_uses_floor_of_channel_mean() {
        let rgb = image::RgbImage::from_raw(2, 1, vec![30, 60, 90, 1, 1, 2]).unwrap();
        let bytes = encode(DynamicImage::ImageRgb8(rgb), image::ImageFormat::Png);
        assert_eq!(decode_grayscale(&bytes).unwrap().data(), &[60, 1]);
    }

    #[test]
    fn empty_and_garbage_files_are_format_errors() {
        assert!(matches!(decode_grayscale(&[]), Err(Error::Format(_))));
        assert!(matches!(
            decode_grayscale(b"not an image"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn reads_ascii_and_binary_pgm() {
        let ascii = b"P2\n3 1\n255\n0 17 255\n";
        assert_eq!(decode_grayscale(ascii).unwrap().data(), &[0, 17, 255]);
        let mut binary = b"P5\n2 2\n255\n".to_vec();
        binary.extend_from_slice(&[9, 8, 7, 6]);
        let img = decode_grayscale(&binary).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[9, 8, 7, 6]);
    }

    #[test]
    fn pgm_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = GrayImage::from_fn(5, 3, |r, c| (r * 40 + c) as u8).unwrap();
        save_pgm(&img, &path).unwrap();
        assert_eq!(load_grayscale(&path).unwrap(), img);
        assert!(matches!(
            load_grayscale(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn point_cloud_is_one_triple_per_pixel() {
        let one = GrayImage::new(1, 1, vec![7]).unwrap();
        assert_eq!(image_to_point_cloud(&one), vec![(0, 0, 7)]);
        let row = GrayImage::new(2, 1, vec![3, 9]).unwrap();
        assert_eq!(image_to_point_cloud(&row), vec![(0, 0, 3), (0, 1, 9)]);
        let big = GrayImage::filled(7, 5, 1).unwrap();
        assert_eq!(image_to_point_cloud(&big).len(), 35);
    }

    #[test]
    fn uniform_cover_partitions_range() {
        let cover = IntensityCover::uniform(32, 0).unwrap();
        assert_eq!(cover.bands().len(), 32);
        assert_eq!(cover.bands()[0], Band { lo: 0, hi: 7 });
        assert_eq!(cover.bands()[31], Band { lo: 248, hi: 255 });
        for v in 0..=255u8 {
            assert_eq!(cover.bands().iter().filter(|b| b.contains(v)).count(), 1);
        }
        let overlapping = IntensityCover::uniform(4, 3).unwrap();
        assert_eq!(overlapping.bands()[1], Band { lo: 61, hi: 130 });
        assert!(IntensityCover::uniform(0, 0).is_err());
        assert!(IntensityCover::new(vec![Band { lo: 0, hi: 100 }]).is_err());
    }

    #[test]
    fn constant_image_gives_one_centered_vertex() {
        let img = GrayImage::filled(5, 4, 100).unwrap();
        let fpc = build_fpc(&img, &IntensityCover::uniform(1, 0).unwrap());
        assert_eq!(fpc.len(), 1);
        let v = fpc.vertices[0];
        assert_eq!(
            (v.row, v.col, v.intensity, v.pixel_count),
            (1.5, 2.0, 100.0, 20)
        );
    }

    #[test]
    fn two_dots_on_background() {
        let mut img = GrayImage::filled(4, 4, 0).unwrap();
        img.set(0, 0, 200);
        img.set(3, 3, 200);
        let cover =
            IntensityCover::new(vec![Band { lo: 0, hi: 127 }, Band { lo: 128, hi: 255 }]).unwrap();
        let fpc = build_fpc(&img, &cover);
        assert_eq!(fpc.len(), 3);
        // background: the 14 remaining pixels, symmetric about the centre
        let bg = fpc.vertices[0];
        assert_eq!(
            (bg.row, bg.col, bg.intensity, bg.pixel_count),
            (1.5, 1.5, 0.0, 14)
        );
        assert_eq!(fpc.vertices[1].coords(), [0.0, 0.0, 200.0]);
        assert_eq!(fpc.vertices[2].coords(), [3.0, 3.0, 200.0]);
    }

    #[test]
    fn empty_band_contributes_nothing() {
        let img = GrayImage::filled(3, 3, 10).unwrap();
        let fpc = build_fpc(&img, &IntensityCover::uniform(8, 0).unwrap());
        assert_eq!(fpc.len(), 1);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        // checkerboard: under 8-connectivity each colour is a single component
        let img = GrayImage::from_fn(4, 4, |r, c| if (r + c) % 2 == 0 { 0 } else { 255 }).unwrap();
        let fpc = build_fpc(&img, &IntensityCover::uniform(2, 0).unwrap());
        assert_eq!(fpc.len(), 2);
    }

    #[test]
    fn cap_halves_band_count() {
        let img = GrayImage::from_fn(16, 16, |r, c| ((r * 16 + c) * 7 % 256) as u8).unwrap();
        let (full, _) = build_fpc_capped(&img, 64, 0, usize::MAX).unwrap();
        let (capped, bands) = build_fpc_capped(&img, 64, 0, 20).unwrap();
        assert!(full.len() > 20);
        assert!(capped.len() <= 20);
        assert!(bands < 64 && 64 % bands == 0);
    }

    #[test]
    fn fpc_text_round_trip() {
        let img = GrayImage::from_fn(6, 6, |r, c| ((r * 31 + c * 17) % 256) as u8).unwrap();
        let fpc = build_fpc(&img, &IntensityCover::uniform(4, 0).unwrap());
        let text = fpc.to_text();
        assert!(text.starts_with("row col intensity pixel_count\n"));
        assert_eq!(FeaturePointCloud::from_text(&text).unwrap(), fpc);
    }

    #[test]
    fn masking() {
        let img = GrayImage::from_fn(4, 4, |r, c| (r * 4 + c + 1) as u8).unwrap();
        let all = mask_region(&img, Rect::new(0, 0, 4, 4), 0).unwrap();
        assert!(all.data().iter().all(|&v| v == 0));
        assert_eq!(mask_region(&img, Rect::new(2, 1, 2, 3), 9).unwrap(), img);
        assert_eq!(mask_region(&img, Rect::new(1, 3, 4, 3), 9).unwrap(), img);
        let part = mask_region(&img, Rect::new(0, 0, 2, 2), 50).unwrap();
        let changed = part
            .data()
            .iter()
            .zip(img.data())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 4);
        assert!(mask_region(&img, Rect::new(0, 0, 5, 1), 0).is_err());
        assert!(mask_region(&img, Rect::new(3, 0, 2, 1), 0).is_err());
    }

    #[test]
    fn rect_parsing() {
        assert_eq!("1, 2,3,4".parse::<Rect>().unwrap(), Rect::new(1, 2, 3, 4));
        assert!("1,2,3".parse::<Rect>().is_err());
        assert!("a,b,c,d".parse::<Rect>().is_err());
    }
}
