//! On-disk raster formats: binary PGM (P5), binary PPM (P6) with maxval 255,
//! and raw luma (8-byte LE width, 8-byte LE height, then one byte per pixel).

use std::path::Path;

use super::{Channels, ImageError, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterFormat {
    Pgm,
    Ppm,
    RawLuma,
}

impl RasterFormat {
    /// Guess from a file extension; `None` means sniff the content.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(RasterFormat::Pgm),
            "ppm" => Some(RasterFormat::Ppm),
            "raw" | "luma" => Some(RasterFormat::RawLuma),
            _ => None,
        }
    }
}

fn pnm_error(reason: impl Into<String>) -> ImageError {
    ImageError::Decode {
        format: "PNM",
        reason: reason.into(),
    }
}

struct Header<'a> {
    rest: &'a [u8],
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        loop {
            match self.rest.first() {
                Some(b) if b.is_ascii_whitespace() => self.rest = &self.rest[1..],
                Some(b'#') => {
                    let end = self.rest.iter().position(|&b| b == b'\n').unwrap_or(self.rest.len());
                    self.rest = &self.rest[end..];
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space();
        let len = self.rest.iter().take_while(|b| b.is_ascii_digit()).count();
        if len == 0 {
            return Err(pnm_error(format!("missing {what}")));
        }
        let text = std::str::from_utf8(&self.rest[..len]).expect("ascii digits");
        self.rest = &self.rest[len..];
        text.parse().map_err(|_| pnm_error(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => Channels::Gray,
        Some(b"P6") => Channels::Rgb,
        _ => return Err(pnm_error("expected P5 or P6 magic")),
    };
    let mut header = Header { rest: &bytes[2..] };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(pnm_error(format!("maxval {maxval} unsupported, expected 255")));
    }
    match header.rest.first() {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(pnm_error("missing whitespace after maxval")),
    }
    let pixels = &header.rest[1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels.count()))
        .ok_or_else(|| pnm_error("dimensions overflow"))?;
    if pixels.len() < expected {
        return Err(ImageError::LengthMismatch {
            expected,
            actual: pixels.len(),
        });
    }
    RasterImage::new(width, height, channels, pixels[..expected].to_vec())
}

pub fn encode_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = match img.channels() {
        Channels::Gray => "P5",
        Channels::Rgb => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn decode_raw_luma(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let err = |reason: &str| ImageError::Decode {
        format: "raw luma",
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(err("shorter than the 16-byte header"));
    }
    let width = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes"));
    let height = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let (width, height) = match (usize::try_from(width), usize::try_from(height)) {
        (Ok(w), Ok(h)) if w <= super::MAX_DIM && h <= super::MAX_DIM => (w, h),
        _ => return Err(err("dimensions out of range")),
    };
    RasterImage::gray(width, height, bytes[16..].to_vec())
}

/// Raw luma stores one byte per pixel, so RGB input is rejected.
pub fn encode_raw_luma(img: &RasterImage) -> Result<Vec<u8>, ImageError> {
    if img.channels() != Channels::Gray {
        return Err(ImageError::BadChannels(img.channels().count()));
    }
    let mut out = Vec::with_capacity(16 + img.data().len());
    out.extend_from_slice(&(img.width() as u64).to_le_bytes());
    out.extend_from_slice(&(img.height() as u64).to_le_bytes());
    out.extend_from_slice(img.data());
    Ok(out)
}

/// Decodes with an explicit format, or sniffs the PNM magic and falls back
/// to raw luma.
pub fn decode(bytes: &[u8], format: Option<RasterFormat>) -> Result<RasterImage, ImageError> {
    match format {
        Some(RasterFormat::Pgm | RasterFormat::Ppm) => decode_pnm(bytes),
        Some(RasterFormat::RawLuma) => decode_raw_luma(bytes),
        None if matches!(bytes.get(..2), Some(b"P5" | b"P6")) => decode_pnm(bytes),
        None => decode_raw_luma(bytes),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot decode {path}: {source}")]
    Image { path: String, source: ImageError },
}

pub fn load(path: &Path) -> Result<RasterImage, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes, RasterFormat::from_path(path)).map_err(|source| LoadError::Image {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_with_comments() {
        let bytes = b"P5\n# made by hand\n3 2 # dims\n255\n\x00\x01\x02\x03\x04\x05";
        let img = decode_pnm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.data(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn ppm_roundtrip() {
        let img = RasterImage::from_fn_rgb(4, 3, |x, y| [x as u8, y as u8, 200]).unwrap();
        let bytes = encode_pnm(&img);
        assert!(bytes.starts_with(b"P6\n4 3\n255\n"));
        assert_eq!(decode(&bytes, None).unwrap(), img);
    }

    #[test]
    fn raw_luma_roundtrip_and_layout() {
        let img = RasterImage::gray(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = encode_raw_luma(&img).unwrap();
        assert_eq!(&bytes[..16], &[2, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(decode(&bytes, None).unwrap(), img);
        assert_eq!(decode(&bytes, Some(RasterFormat::RawLuma)).unwrap(), img);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_pnm(b"P4\n1 1\n255\n\x00").is_err());
        assert!(decode_pnm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(matches!(
            decode_pnm(b"P5\n2 2\n255\n\x00"),
            Err(ImageError::LengthMismatch { expected: 4, actual: 1 })
        ));
        assert!(decode_pnm(b"P5\n0 2\n255\n").is_err());
        assert!(decode_raw_luma(&[1, 2, 3]).is_err());
        let mut short = encode_raw_luma(&RasterImage::gray(2, 2, vec![0; 4]).unwrap()).unwrap();
        short.pop();
        assert!(decode_raw_luma(&short).is_err());
    }

    #[test]
    fn extension_hints() {
        assert_eq!(RasterFormat::from_path(Path::new("a.PGM")), Some(RasterFormat::Pgm));
        assert_eq!(
            RasterFormat::from_path(Path::new("a.luma")),
            Some(RasterFormat::RawLuma)
        );
        assert_eq!(RasterFormat::from_path(Path::new("a.bin")), None);
    }
}
