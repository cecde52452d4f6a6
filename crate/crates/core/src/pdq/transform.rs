//! Pixel-space transforms: the eight dihedral symmetries plus the resize,
//! crop and overlay edits used to probe hash robustness.

use super::{ImageError, LumaPlane, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dihedral {
    Identity,
    /// Clockwise quarter turn.
    Rotate90,
    Rotate180,
    Rotate270,
    /// Mirror left-right.
    FlipHorizontal,
    /// Mirror top-bottom.
    FlipVertical,
    /// Mirror about the main diagonal.
    Transpose,
    /// Mirror about the anti-diagonal.
    AntiTranspose,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::Rotate90,
        Dihedral::Rotate180,
        Dihedral::Rotate270,
        Dihedral::FlipHorizontal,
        Dihedral::FlipVertical,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dihedral::Identity => "identity",
            Dihedral::Rotate90 => "rotate90",
            Dihedral::Rotate180 => "rotate180",
            Dihedral::Rotate270 => "rotate270",
            Dihedral::FlipHorizontal => "flip-horizontal",
            Dihedral::FlipVertical => "flip-vertical",
            Dihedral::Transpose => "transpose",
            Dihedral::AntiTranspose => "anti-transpose",
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(
            self,
            Dihedral::Rotate90 | Dihedral::Rotate270 | Dihedral::Transpose | Dihedral::AntiTranspose
        )
    }

    /// Output dimensions for a `w x h` input.
    pub fn output_dims(self, w: usize, h: usize) -> (usize, usize) {
        if self.swaps_axes() {
            (h, w)
        } else {
            (w, h)
        }
    }

    /// Source coordinate feeding output pixel `(x, y)` of a `w x h` input.
    fn source(self, x: usize, y: usize, w: usize, h: usize) -> (usize, usize) {
        match self {
            Dihedral::Identity => (x, y),
            Dihedral::Rotate90 => (y, h - 1 - x),
            Dihedral::Rotate180 => (w - 1 - x, h - 1 - y),
            Dihedral::Rotate270 => (w - 1 - y, x),
            Dihedral::FlipHorizontal => (w - 1 - x, y),
            Dihedral::FlipVertical => (x, h - 1 - y),
            Dihedral::Transpose => (y, x),
            Dihedral::AntiTranspose => (w - 1 - y, h - 1 - x),
        }
    }

    fn permute<T: Copy>(self, data: &[T], w: usize, h: usize, channels: usize) -> Vec<T> {
        let (ow, oh) = self.output_dims(w, h);
        let mut out = Vec::with_capacity(data.len());
        for y in 0..oh {
            for x in 0..ow {
                let (sx, sy) = self.source(x, y, w, h);
                let at = (sy * w + sx) * channels;
                out.extend_from_slice(&data[at..at + channels]);
            }
        }
        out
    }

    pub fn apply(self, img: &RasterImage) -> RasterImage {
        let (w, h) = (img.width(), img.height());
        let (ow, oh) = self.output_dims(w, h);
        let data = self.permute(img.data(), w, h, img.channels().count());
        RasterImage::new(ow, oh, img.channels(), data).expect("permutation keeps invariants")
    }

    pub fn apply_luma(self, luma: &LumaPlane) -> LumaPlane {
        let (w, h) = (luma.width(), luma.height());
        let (ow, oh) = self.output_dims(w, h);
        LumaPlane::from_parts(ow, oh, self.permute(luma.samples(), w, h, 1))
    }
}

impl RasterImage {
    /// Bilinear resampling with pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<RasterImage, ImageError> {
        super::check_dims(width, height)?;
        let c = self.channels().count();
        let (sw, sh) = (self.width(), self.height());
        let coord = |d: usize, src: usize, dst: usize| -> (usize, usize, f64) {
            let s = ((d as f64 + 0.5) * src as f64 / dst as f64 - 0.5).max(0.0);
            let i0 = (s.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        };
        let mut data = Vec::with_capacity(width * height * c);
        for y in 0..height {
            let (y0, y1, fy) = coord(y, sh, height);
            for x in 0..width {
                let (x0, x1, fx) = coord(x, sw, width);
                for ch in 0..c {
                    let p = |xx: usize, yy: usize| f64::from(self.data()[(yy * sw + xx) * c + ch]);
                    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                    let v = top * (1.0 - fy) + bottom * fy;
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        RasterImage::new(width, height, self.channels(), data)
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<RasterImage, ImageError> {
        if x + width > self.width() || y + height > self.height() {
            return Err(ImageError::BadDimensions { width, height });
        }
        let c = self.channels().count();
        let mut data = Vec::with_capacity(width * height * c);
        for row in y..y + height {
            let at = (row * self.width() + x) * c;
            data.extend_from_slice(&self.data()[at..at + width * c]);
        }
        RasterImage::new(width, height, self.channels(), data)
    }

    /// Paints a solid rectangle, clipped to the image. `color` supplies one
    /// value per channel.
    pub fn fill_rect(&self, x: usize, y: usize, width: usize, height: usize, color: &[u8]) -> RasterImage {
        let c = self.channels().count();
        assert_eq!(color.len(), c, "one color value per channel");
        let mut data = self.data().to_vec();
        for row in y..(y + height).min(self.height()) {
            for col in x..(x + width).min(self.width()) {
                let at = (row * self.width() + col) * c;
                data[at..at + c].copy_from_slice(color);
            }
        }
        RasterImage::new(self.width(), self.height(), self.channels(), data).expect("same shape")
    }
}
