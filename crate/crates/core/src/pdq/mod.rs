//! PDQ-compatible 256-bit perceptual hashing.
//!
//! The pipeline is: Rec.601 luminance, two passes of a Jarosz box filter
//! (a tent-filter approximation) decimated to 64x64, the 16x16 lowest AC
//! block of an orthonormal DCT-II, and a strict greater-than-median
//! threshold. Bit `k = 16 * i + j` corresponds to DCT coefficient `[i][j]`,
//! where `i` indexes vertical frequency `i + 1` and `j` horizontal frequency
//! `j + 1`.

mod bits;
mod dct;
mod filter;
pub mod pnm;
pub mod transform;

pub use bits::{HashBits, HexError};
pub use dct::{dct16, DctBlock};
pub use filter::downsample64;
pub use transform::Dihedral;

use thiserror::Error;

/// Side length of the intermediate luminance buffer.
pub const BUFFER_DIM: usize = 64;
/// Side length of the retained DCT block.
pub const DCT_DIM: usize = 16;
/// Largest accepted image side.
pub const MAX_DIM: usize = 1 << 16;

const LUMA_FROM_R: f64 = 0.299;
const LUMA_FROM_G: f64 = 0.587;
const LUMA_FROM_B: f64 = 0.114;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions {width}x{height} outside 1..={MAX_DIM}")]
    BadDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0}, expected 1 or 3")]
    BadChannels(usize),
    #[error("pixel buffer holds {actual} samples, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("luma sample {value} at index {index} is not a finite value in [0, 255]")]
    LumaOutOfRange { index: usize, value: f64 },
    #[error("expected a {expected}x{expected} plane, got {width}x{height}")]
    WrongPlaneSize {
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("malformed {format} data: {reason}")]
    Decode { format: &'static str, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray = 1,
    Rgb = 3,
}

impl Channels {
    pub fn count(self) -> usize {
        self as usize
    }

    pub fn from_count(n: usize) -> Result<Self, ImageError> {
        match n {
            1 => Ok(Channels::Gray),
            3 => Ok(Channels::Rgb),
            other => Err(ImageError::BadChannels(other)),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
        return Err(ImageError::BadDimensions { width, height });
    }
    Ok(())
}

/// Decoded 8-bit raster, row-major, interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: Channels,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: Channels, data: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let expected = width * height * channels.count();
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        Self::new(width, height, Channels::Gray, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        Self::new(width, height, Channels::Rgb, data)
    }

    /// Builds a grayscale image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_gray(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::gray(width, height, data)
    }

    /// Builds an RGB image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_rgb(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::rgb(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels.count();
        let at = (y * self.width + x) * c;
        &self.data[at..at + c]
    }
}

/// Real-valued luminance plane with samples in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LumaPlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl LumaPlane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        if samples.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                actual: samples.len(),
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=255.0).contains(*v)))
        {
            return Err(ImageError::LumaOutOfRange { index, value });
        }
        Ok(LumaPlane { width, height, samples })
    }

    // Callers guarantee the invariants.
    pub(crate) fn from_parts(width: usize, height: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        LumaPlane { width, height, samples }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }
}

/// A 256-bit fingerprint plus a 0..=100 quality score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PdqHash {
    pub bits: HashBits,
    pub quality: u8,
}

impl PdqHash {
    pub fn distance(&self, other: &PdqHash) -> u32 {
        self.bits.distance(&other.bits)
    }
}

/// Hashes of the eight dihedral variants, indexed in [`Dihedral::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DihedralSet([PdqHash; 8]);

impl DihedralSet {
    pub fn get(&self, t: Dihedral) -> &PdqHash {
        &self.0[t.index()]
    }

    pub fn as_array(&self) -> &[PdqHash; 8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dihedral, &PdqHash)> {
        Dihedral::ALL.iter().copied().zip(self.0.iter())
    }
}

/// Converts to luminance. Grayscale passes through; RGB uses Rec.601 weights.
pub fn to_luma(img: &RasterImage) -> LumaPlane {
    let samples = match img.channels {
        Channels::Gray => img.data.iter().map(|&v| f64::from(v)).collect(),
        Channels::Rgb => img
            .data
            .chunks_exact(3)
            .map(|p| LUMA_FROM_R * f64::from(p[0]) + LUMA_FROM_G * f64::from(p[1]) + LUMA_FROM_B * f64::from(p[2]))
            .collect(),
    };
    LumaPlane::from_parts(img.width, img.height, samples)
}

pub fn hash(img: &RasterImage) -> PdqHash {
    hash_luma(&to_luma(img))
}

pub fn hash_luma(luma: &LumaPlane) -> PdqHash {
    let buffer = downsample64(luma);
    let block = dct16(&buffer).expect("downsample64 always yields 64x64");
    PdqHash {
        bits: threshold_at_median(&block),
        quality: quality(&buffer),
    }
}

pub fn dihedral_hashes(img: &RasterImage) -> DihedralSet {
    let luma = to_luma(img);
    DihedralSet(Dihedral::ALL.map(|t| hash_luma(&t.apply_luma(&luma))))
}

/// Sets bit `16 * i + j` iff `block[i][j]` is strictly above the lower median.
pub fn threshold_at_median(block: &DctBlock) -> HashBits {
    let mut flat: Vec<f64> = block.iter().flatten().copied().collect();
    let mid = flat.len() / 2 - 1;
    let (_, median, _) = flat.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    let mut bits = HashBits::ZERO;
    for (k, v) in block.iter().flatten().enumerate() {
        if *v > median {
            bits.set(k, true);
        }
    }
    bits
}

/// `clamp(floor(100 * (sum|dx| + sum|dy|) / (255 * 64 * 64)), 0, 100)`.
pub fn quality(buffer: &LumaPlane) -> u8 {
    let (w, h) = (buffer.width, buffer.height);
    let mut gradient = 0.0;
    for y in 0..h {
        let row = buffer.row(y);
        gradient += row.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>();
        if y + 1 < h {
            let next = buffer.row(y + 1);
            gradient += row.iter().zip(next).map(|(a, b)| (b - a).abs()).sum::<f64>();
        }
    }
    let scaled = (100.0 * gradient / (255.0 * (w * h) as f64)).floor();
    scaled.clamp(0.0, 100.0) as u8
}
