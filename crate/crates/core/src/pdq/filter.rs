//! Jarosz tent-filter approximation and decimation to 64x64.

use super::{LumaPlane, BUFFER_DIM};

const PASSES: usize = 2;

/// Box width for one axis: roughly half the decimation stride, rounded up.
fn window_size(old: usize, new: usize) -> usize {
    old.div_ceil(2 * new)
}

/// One box pass along a strided line. Output `o` averages the window
/// `[o - (w - h), o + h - 1]` clipped to the line, with `h = (w + 2) / 2`.
fn box_line(
    input: &[f64],
    output: &mut [f64],
    start: usize,
    len: usize,
    stride: usize,
    window: usize,
    prefix: &mut Vec<f64>,
) {
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0;
    for i in 0..len {
        acc += input[start + i * stride];
        prefix.push(acc);
    }
    let ahead = (window + 2) / 2 - 1;
    let behind = window - 1 - ahead;
    for o in 0..len {
        let lo = o.saturating_sub(behind);
        let hi = (o + ahead).min(len - 1);
        output[start + o * stride] = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
    }
}

/// Smooths with two row/column box passes and samples pixel centres down to
/// 64x64. A 64x64 input comes back unchanged up to rounding.
pub fn downsample64(luma: &LumaPlane) -> LumaPlane {
    let (w, h) = (luma.width(), luma.height());
    // Filtering offsets from the first sample so constant planes stay exact.
    let origin = luma.samples()[0];
    let mut a: Vec<f64> = luma.samples().iter().map(|v| v - origin).collect();
    let mut b = vec![0.0; a.len()];
    let mut prefix = Vec::with_capacity(w.max(h) + 1);
    let wx = window_size(w, BUFFER_DIM);
    let wy = window_size(h, BUFFER_DIM);
    for _ in 0..PASSES {
        for y in 0..h {
            box_line(&a, &mut b, y * w, w, 1, wx, &mut prefix);
        }
        for x in 0..w {
            box_line(&b, &mut a, x, h, w, wy, &mut prefix);
        }
    }
    let mut out = Vec::with_capacity(BUFFER_DIM * BUFFER_DIM);
    for i in 0..BUFFER_DIM {
        let sy = ((2 * i + 1) * h) / (2 * BUFFER_DIM);
        for j in 0..BUFFER_DIM {
            let sx = ((2 * j + 1) * w) / (2 * BUFFER_DIM);
            out.push((a[sy * w + sx] + origin).clamp(0.0, 255.0));
        }
    }
    LumaPlane::from_parts(BUFFER_DIM, BUFFER_DIM, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> LumaPlane {
        let mut s = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                s.push(f(x, y));
            }
        }
        LumaPlane::new(w, h, s).unwrap()
    }

    /// Plain mean over each output cell's source block.
    fn area_average(p: &LumaPlane) -> Vec<f64> {
        let (bw, bh) = (p.width() / 64, p.height() / 64);
        let mut out = vec![0.0; 64 * 64];
        for i in 0..64 {
            for j in 0..64 {
                let mut s = 0.0;
                for y in i * bh..(i + 1) * bh {
                    for x in j * bw..(j + 1) * bw {
                        s += p.at(x, y);
                    }
                }
                out[i * 64 + j] = s / (bw * bh) as f64;
            }
        }
        out
    }

    #[test]
    fn window_sizes_follow_the_ratio() {
        assert_eq!(window_size(64, 64), 1);
        assert_eq!(window_size(128, 64), 1);
        assert_eq!(window_size(129, 64), 2);
        assert_eq!(window_size(512, 64), 4);
        assert_eq!(window_size(1, 64), 1);
    }

    #[test]
    fn constant_plane_stays_constant() {
        let out = downsample64(&plane(128, 128, |_, _| 77.0));
        assert_eq!(out.width(), 64);
        assert_eq!(out.height(), 64);
        assert!(out.samples().iter().all(|v| (v - 77.0).abs() <= 1e-9));
        let odd = downsample64(&plane(300, 17, |_, _| 76.245));
        assert!(odd.samples().iter().all(|&v| v == 76.245));
    }

    #[test]
    fn buffer_sized_input_is_identity() {
        let p = plane(64, 64, |x, y| ((x * 31 + y * 17) % 256) as f64 * 0.99);
        let out = downsample64(&p);
        for (a, b) in out.samples().iter().zip(p.samples()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn small_inputs_upsample_by_nearest() {
        let p = plane(2, 1, |x, _| if x == 0 { 10.0 } else { 20.0 });
        let out = downsample64(&p);
        assert_eq!(out.at(0, 0), 10.0);
        assert_eq!(out.at(31, 40), 10.0);
        assert_eq!(out.at(32, 0), 20.0);
    }

    #[test]
    fn gradient_is_monotone_and_tracks_area_average() {
        let p = plane(512, 512, |x, _| x as f64 * 255.0 / 511.0);
        let out = downsample64(&p);
        let oracle = area_average(&p);
        for i in 0..64 {
            let row = out.row(i);
            assert!(row.windows(2).all(|w| w[1] >= w[0]), "row {i} not monotone");
            assert!(oracle[i * 64..i * 64 + 64].windows(2).all(|w| w[1] >= w[0]));
            for j in 0..64 {
                assert!((row[j] - oracle[i * 64 + j]).abs() < 1.0, "({i},{j})");
            }
        }
    }

    #[test]
    fn box_line_matches_the_reference_phases() {
        // Running-sum formulation with explicit phases, as in the reference hasher.
        fn reference(v: &[f64], window: usize) -> Vec<f64> {
            let half = (window + 2) / 2;
            let n = v.len();
            let mut out = vec![0.0; n];
            let (mut li, mut ri, mut oi) = (0, 0, 0);
            let (mut sum, mut cur) = (0.0, 0.0);
            for _ in 0..half - 1 {
                sum += v[ri];
                cur += 1.0;
                ri += 1;
            }
            for _ in 0..window - half + 1 {
                sum += v[ri];
                cur += 1.0;
                out[oi] = sum / cur;
                ri += 1;
                oi += 1;
            }
            for _ in 0..n - window {
                sum += v[ri];
                sum -= v[li];
                out[oi] = sum / cur;
                li += 1;
                ri += 1;
                oi += 1;
            }
            for _ in 0..half - 1 {
                sum -= v[li];
                cur -= 1.0;
                out[oi] = sum / cur;
                li += 1;
                oi += 1;
            }
            out
        }
        let v: Vec<f64> = (0..40).map(|i| ((i * 7919) % 97) as f64).collect();
        for window in 1..=9 {
            let mut out = vec![0.0; v.len()];
            box_line(&v, &mut out, 0, v.len(), 1, window, &mut Vec::new());
            for (a, b) in out.iter().zip(reference(&v, window)) {
                assert!((a - b).abs() < 1e-9, "window {window}");
            }
        }
    }
}
