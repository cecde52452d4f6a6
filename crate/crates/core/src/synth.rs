//! Seeded synthetic images: smooth random textures used as stand-ins for
//! photographs in simulations and robustness checks.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pdq::RasterImage;

/// Highest spatial frequency per axis, in cycles across the image.
const MAX_CYCLES: i32 = 16;

/// Amplitude falloff exponent: amplitude ~ 1 / |f|^FALLOFF.
pub const FALLOFF: f64 = 1.5;

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: [f64; 3],
}

/// RGB image with a power-law (natural-image-like) spectrum: random-phase
/// waves up to 16 cycles whose amplitude decays as `1 / |f|^1.5`.
/// Identical `(seed, width, height)` always produce identical pixels.
pub fn smooth_texture(seed: u64, width: usize, height: usize) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = Vec::new();
    // Half-plane of frequencies; (kx, ky) and (-kx, -ky) are the same wave.
    for ky in 0..=MAX_CYCLES {
        for kx in -MAX_CYCLES..=MAX_CYCLES {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let radial = f64::from(kx * kx + ky * ky).sqrt();
            let scale = radial.powf(-FALLOFF);
            waves.push(Wave {
                kx: f64::from(kx),
                ky: f64::from(ky),
                phase: rng.random_range(0.0..TAU),
                amp: [(); 3].map(|_| scale * rng.random_range(0.5..1.5)),
            });
        }
    }
    // cos(a + b) = cos a cos b - sin a sin b, with a from x and b from y.
    let mut field = vec![[0.0f64; 3]; width * height];
    let mut col_cos = vec![0.0; width];
    let mut col_sin = vec![0.0; width];
    for w in &waves {
        for (x, (c, s)) in col_cos.iter_mut().zip(col_sin.iter_mut()).enumerate() {
            let a = TAU * w.kx * x as f64 / width as f64 + w.phase;
            *c = a.cos();
            *s = a.sin();
        }
        for y in 0..height {
            let b = TAU * w.ky * y as f64 / height as f64;
            let (sb, cb) = b.sin_cos();
            let row = &mut field[y * width..(y + 1) * width];
            for (px, (ca, sa)) in row.iter_mut().zip(col_cos.iter().zip(&col_sin)) {
                let v = ca * cb - sa * sb;
                for (c, amp) in px.iter_mut().zip(w.amp) {
                    *c += amp * v;
                }
            }
        }
    }
    let (lo, hi) = field
        .iter()
        .flatten()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-9);
    let data = field
        .iter()
        .flatten()
        .map(|v| (20.0 + 215.0 * (v - lo) / span).round() as u8)
        .collect();
    RasterImage::rgb(width, height, data).expect("dimensions come from the caller")
}
