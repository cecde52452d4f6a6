use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{ImageError, LumaPlane, BUFFER_DIM, DCT_DIM};

/// `block[i][j]`: vertical frequency `i + 1`, horizontal frequency `j + 1`.
pub type DctBlock = [[f64; DCT_DIM]; DCT_DIM];

type Basis = [[f64; BUFFER_DIM]; DCT_DIM];

/// Orthonormal DCT-II rows for frequencies 1..=16.
fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(|| {
        let scale = (2.0 / BUFFER_DIM as f64).sqrt();
        let mut m = [[0.0; BUFFER_DIM]; DCT_DIM];
        for (i, row) in m.iter_mut().enumerate() {
            for (t, v) in row.iter_mut().enumerate() {
                *v = scale * (PI * (i + 1) as f64 * (2 * t + 1) as f64 / (2 * BUFFER_DIM) as f64).cos();
            }
        }
        m
    })
}

/// Low-frequency AC block of the 2-D DCT-II of a 64x64 plane, DC excluded.
pub fn dct16(plane: &LumaPlane) -> Result<DctBlock, ImageError> {
    if plane.width() != BUFFER_DIM || plane.height() != BUFFER_DIM {
        return Err(ImageError::WrongPlaneSize {
            expected: BUFFER_DIM,
            width: plane.width(),
            height: plane.height(),
        });
    }
    let d = basis();
    // AC terms ignore a constant offset; removing one keeps flat planes at exactly zero.
    let origin = plane.samples()[0];
    let mut partial = [[0.0; BUFFER_DIM]; DCT_DIM];
    for (i, out_row) in partial.iter_mut().enumerate() {
        for (y, &c) in d[i].iter().enumerate() {
            for (acc, v) in out_row.iter_mut().zip(plane.row(y)) {
                *acc += c * (v - origin);
            }
        }
    }
    let mut block = [[0.0; DCT_DIM]; DCT_DIM];
    for (i, out_row) in block.iter_mut().enumerate() {
        for (j, out) in out_row.iter_mut().enumerate() {
            *out = partial[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
        }
    }
    Ok(block)
}
