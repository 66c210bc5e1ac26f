//! Image datasets (IDX and CIFAR-10 binary) and the two self-supervised
//! tasks built on them: rotation prediction and colorization.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, FormatError, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD: usize = 3073;
pub const NUM_CLASSES: u8 = 10;
pub const ROTATION_CLASSES: usize = 12;
pub const COORD_FEATURES: usize = 42;

/// Images scaled to `[0, 1]`, stored contiguously as `n × C × H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub name: String,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pixels: Vec<f64>,
    labels: Vec<u8>,
}

impl ImageDataset {
    pub fn new(
        name: impl Into<String>,
        [channels, height, width]: [usize; 3],
        pixels: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let per = channels * height * width;
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(Error::invalid(format!(
                "{} pixels do not form {} images of {channels}×{height}×{width}",
                pixels.len(),
                labels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            name: name.into(),
            channels,
            height,
            width,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn image_tensor(&self, i: usize) -> Tensor {
        Tensor::from_parts(self.shape().to_vec(), self.image(i).to_vec())
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The first `n` images (all of them if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            name: self.name.clone(),
            channels: self.channels,
            height: self.height,
            width: self.width,
            pixels: self.pixels[..n * self.image_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    fn pixel_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| (p * 255.0).round() as u8).collect()
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, kind: FormatError) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        kind,
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn check_labels(path: &Path, labels: &[u8]) -> Result<()> {
    match labels.iter().find(|&&l| l >= NUM_CLASSES) {
        Some(&label) => Err(format_err(
            path,
            FormatError::LabelRange {
                label,
                classes: NUM_CLASSES,
            },
        )),
        None => Ok(()),
    }
}

/// Loads an IDX image file (`0x00000803`, dims `n, rows, cols`) and its IDX
/// label file (`0x00000801`, dim `n`).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read(ip)?;
    let labels = read(lp)?;

    if images.len() < 16 {
        return Err(format_err(ip, FormatError::Truncated { expected: 16, found: images.len() }));
    }
    let magic = be_u32(&images, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(ip, FormatError::BadMagic { expected: IDX_IMAGES_MAGIC, found: magic }));
    }
    let (n, rows, cols) = (
        be_u32(&images, 4) as usize,
        be_u32(&images, 8) as usize,
        be_u32(&images, 12) as usize,
    );
    let expected = 16 + n * rows * cols;
    if images.len() != expected {
        return Err(format_err(ip, FormatError::Truncated { expected, found: images.len() }));
    }

    if labels.len() < 8 {
        return Err(format_err(lp, FormatError::Truncated { expected: 8, found: labels.len() }));
    }
    let magic = be_u32(&labels, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(lp, FormatError::BadMagic { expected: IDX_LABELS_MAGIC, found: magic }));
    }
    let n_labels = be_u32(&labels, 4) as usize;
    if labels.len() != 8 + n_labels {
        return Err(format_err(lp, FormatError::Truncated { expected: 8 + n_labels, found: labels.len() }));
    }
    if n_labels != n {
        return Err(format_err(lp, FormatError::CountMismatch { images: n, labels: n_labels }));
    }
    let labels = labels[8..].to_vec();
    check_labels(lp, &labels)?;
    let pixels = images[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    let name = ip
        .file_name()
        .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    ImageDataset::new(name, [1, rows, cols], pixels, labels)
}

/// Writes a single-channel dataset back to IDX files.
pub fn write_idx(ds: &ImageDataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    if ds.channels != 1 {
        return Err(Error::invalid("IDX image files hold single-channel images"));
    }
    let mut img = Vec::with_capacity(16 + ds.pixels.len());
    for v in [IDX_IMAGES_MAGIC, ds.len() as u32, ds.height as u32, ds.width as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(ds.pixel_bytes());
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend_from_slice(&ds.labels);
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    fs::write(ip, img).map_err(|e| Error::io(ip, e))?;
    fs::write(lp, lab).map_err(|e| Error::io(lp, e))
}

/// Loads CIFAR-10 binary batches: 3073-byte records of one label byte
/// followed by the R, G and B planes of a 32×32 image.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<ImageDataset> {
    if batch_paths.is_empty() {
        return Err(Error::invalid("no CIFAR-10 batch files given"));
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(format_err(path, FormatError::RecordSize { len: bytes.len(), record: CIFAR_RECORD }));
        }
        let start = labels.len();
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(rec[0]);
            pixels.extend(rec[1..].iter().map(|&b| f64::from(b) / 255.0));
        }
        check_labels(path, &labels[start..])?;
    }
    ImageDataset::new("cifar10", [3, 32, 32], pixels, labels)
}

pub fn write_cifar10(ds: &ImageDataset, path: impl AsRef<Path>) -> Result<()> {
    if ds.shape() != [3, 32, 32] {
        return Err(Error::invalid("CIFAR-10 records hold 3×32×32 images"));
    }
    let bytes = ds.pixel_bytes();
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD);
    for (i, img) in bytes.chunks_exact(ds.image_len()).enumerate() {
        out.push(ds.labels[i]);
        out.extend_from_slice(img);
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Standard file names below a data directory.
#[derive(Debug, Clone)]
pub struct DataLayout {
    pub root: PathBuf,
}

impl DataLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `(images, labels)` for `dataset` ∈ {mnist, fashion-mnist} and split
    /// ∈ {train, test}.
    pub fn idx_paths(&self, dataset: &str, train: bool) -> (PathBuf, PathBuf) {
        let dir = self.root.join(dataset);
        let prefix = if train { "train" } else { "t10k" };
        (
            dir.join(format!("{prefix}-images-idx3-ubyte")),
            dir.join(format!("{prefix}-labels-idx1-ubyte")),
        )
    }

    pub fn cifar_paths(&self, train: bool) -> Vec<PathBuf> {
        let dir = self.root.join("cifar-10-batches-bin");
        if train {
            (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect()
        } else {
            vec![dir.join("test_batch.bin")]
        }
    }

    pub fn load_idx(&self, dataset: &str, train: bool) -> Result<ImageDataset> {
        let (i, l) = self.idx_paths(dataset, train);
        for p in [&i, &l] {
            if !p.exists() {
                return Err(Error::invalid(format!(
                    "missing {}: download the {dataset} IDX files (uncompressed) into {}",
                    p.display(),
                    self.root.join(dataset).display()
                )));
            }
        }
        load_idx(i, l)
    }

    pub fn load_cifar10(&self, train: bool) -> Result<ImageDataset> {
        let paths: Vec<PathBuf> = self.cifar_paths(train).into_iter().filter(|p| p.exists()).collect();
        if paths.is_empty() {
            return Err(Error::invalid(format!(
                "missing CIFAR-10 binary batches: extract cifar-10-binary.tar.gz into {}",
                self.root.display()
            )));
        }
        load_cifar10(&paths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Rotates a `[C,H,W]` image by `degrees` about its centre. Samples that
/// fall outside the source image read as 0.
pub fn rotate_image(img: &Tensor, degrees: f64, mode: Interpolation) -> Result<Tensor> {
    let &[c, h, w] = img.shape() else {
        return Err(Error::invalid(format!("expected a C×H×W image, got {:?}", img.shape())));
    };
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let src = img.data();
    let at = |ch: usize, y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            src[(ch * h + y as usize) * w + x as usize]
        }
    };
    let mut out = vec![0.0; src.len()];
    for r in 0..h {
        for col in 0..w {
            let (dy, dx) = (r as f64 - cy, col as f64 - cx);
            let sy = cos * dy + sin * dx + cy;
            let sx = -sin * dy + cos * dx + cx;
            for ch in 0..c {
                out[(ch * h + r) * w + col] = match mode {
                    Interpolation::Nearest => at(ch, sy.round() as isize, sx.round() as isize),
                    Interpolation::Bilinear => {
                        let (y0, x0) = (sy.floor(), sx.floor());
                        let (fy, fx) = (sy - y0, sx - x0);
                        let (y0, x0) = (y0 as isize, x0 as isize);
                        let top = at(ch, y0, x0) * (1.0 - fx) + at(ch, y0, x0 + 1) * fx;
                        let bottom = at(ch, y0 + 1, x0) * (1.0 - fx) + at(ch, y0 + 1, x0 + 1) * fx;
                        top * (1.0 - fy) + bottom * fy
                    }
                };
            }
        }
    }
    Tensor::new(img.shape().to_vec(), out)
}

/// Index of the nearest of the twelve angles `30·i` degrees, comparing raw
/// angles (no wrap-around); ties go to the smaller index.
pub fn rotation_label(degrees: f64) -> Result<usize> {
    if !(0.0..360.0).contains(&degrees) {
        return Err(Error::invalid(format!("rotation angle {degrees} outside [0, 360)")));
    }
    let mut best = (0, f64::INFINITY);
    for i in 0..ROTATION_CLASSES {
        let d = (degrees - (30 * i) as f64).abs();
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// Maps `[0, 1]` pixels to `[−1, 1]`.
pub fn to_signed(pixels: &[f64]) -> Vec<f64> {
    pixels.iter().map(|p| 2.0 * p - 1.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSample {
    /// Rotated image, flattened, in `[−1, 1]`.
    pub x: Vec<f64>,
    /// Original image, flattened, in `[−1, 1]`.
    pub cond: Vec<f64>,
    pub label: usize,
    pub angle: f64,
}

pub fn make_rotation_pair<R: Rng + ?Sized>(
    img: &Tensor,
    mode: Interpolation,
    rng: &mut R,
) -> Result<RotationSample> {
    let angle = rng.random_range(0.0..360.0);
    let rotated = rotate_image(img, angle, mode)?;
    Ok(RotationSample {
        x: to_signed(rotated.data()),
        cond: to_signed(img.data()),
        label: rotation_label(angle)?,
        angle,
    })
}

pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Rec. 601 luma of a `[3,H,W]` image, giving `[1,H,W]`.
pub fn grayscale(img: &Tensor) -> Result<Tensor> {
    let &[3, h, w] = img.shape() else {
        return Err(Error::invalid(format!("grayscale needs a 3×H×W image, got {:?}", img.shape())));
    };
    let plane = h * w;
    let d = img.data();
    let gray = (0..plane)
        .map(|i| LUMA[0] * d[i] + LUMA[1] * d[plane + i] + LUMA[2] * d[2 * plane + i])
        .collect();
    Tensor::new(vec![1, h, w], gray)
}

/// `(i₁, i₂) ‖ (i₁ᵏ + i₂, i₂ᵏ + i₁, i₁ᵏ − i₂, i₂ᵏ − i₁)` for `k = 0..=9`, with
/// `0⁰ = 1`.
pub fn coord_features(i1: f64, i2: f64) -> [f64; COORD_FEATURES] {
    let mut out = [0.0; COORD_FEATURES];
    out[0] = i1;
    out[1] = i2;
    for k in 0..10 {
        let (p1, p2) = (i1.powi(k), i2.powi(k));
        let base = 2 + 4 * k as usize;
        out[base] = p1 + i2;
        out[base + 1] = p2 + i1;
        out[base + 2] = p1 - i2;
        out[base + 3] = p2 - i1;
    }
    out
}

/// How pixel indices become the coordinates fed to [`coord_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordMode {
    /// `i ↦ 2i/(n−1) − 1`.
    #[default]
    Normalized,
    Raw,
}

impl CoordMode {
    pub fn map(self, i: usize, n: usize) -> f64 {
        match self {
            CoordMode::Normalized if n > 1 => 2.0 * i as f64 / (n as f64 - 1.0) - 1.0,
            CoordMode::Normalized => 0.0,
            CoordMode::Raw => i as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorizationSample {
    pub x_prime: [f64; COORD_FEATURES],
    /// Grayscale image, flattened, in `[−1, 1]`.
    pub cond: Vec<f64>,
    /// RGB at the pixel, in `[−1, 1]`.
    pub target: [f64; 3],
}

/// One sample per requested `(row, col)` pixel of a `[3,H,W]` image.
pub fn colorization_samples(
    img: &Tensor,
    pixels: &[(usize, usize)],
    mode: CoordMode,
) -> Result<Vec<ColorizationSample>> {
    let gray = grayscale(img)?;
    let cond = to_signed(gray.data());
    let (h, w) = (img.shape()[1], img.shape()[2]);
    let d = img.data();
    pixels
        .iter()
        .map(|&(r, c)| {
            if r >= h || c >= w {
                return Err(Error::invalid(format!("pixel ({r}, {c}) outside {h}×{w}")));
            }
            let at = |ch: usize| 2.0 * d[(ch * h + r) * w + c] - 1.0;
            Ok(ColorizationSample {
                x_prime: coord_features(mode.map(r, h), mode.map(c, w)),
                cond: cond.clone(),
                target: [at(0), at(1), at(2)],
            })
        })
        .collect()
}
