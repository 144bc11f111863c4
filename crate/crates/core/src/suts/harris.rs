//! Harris corner detector.

use super::{InterestPoint, SutError, SutOutput};
use crate::image::ImageBuffer;

pub const HARRIS_K: f64 = 0.04;
const TENSOR_SIGMA: f64 = 1.5;
const TENSOR_RADIUS: usize = 5;
/// Responses at or below this are treated as flat.
const RESPONSE_FLOOR: f64 = 1e-8;
pub const MIN_SIDE: u32 = 7;

fn gaussian(radius: usize, sigma: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

#[inline]
fn clampi(v: isize, n: usize) -> usize {
    v.clamp(0, n as isize - 1) as usize
}

/// Separable filter with replicated borders.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] =
                k.iter().enumerate().map(|(i, kv)| kv * src[y * w + clampi(x as isize + i as isize - r, w)]).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] =
                k.iter().enumerate().map(|(i, kv)| kv * tmp[clampi(y as isize + i as isize - r, h) * w + x]).sum();
        }
    }
    out
}

/// Harris response map (row-major, same size as the image).
pub fn harris_response(image: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (image.width as usize, image.height as usize);
    let l = image.luma();
    let at = |x: isize, y: isize| l[clampi(y, h) * w + clampi(x, w)];
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
            let i = y as usize * w + x as usize;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let k = gaussian(TENSOR_RADIUS, TENSOR_SIGMA);
    let (sxx, syy, sxy) = (blur(&ixx, w, h, &k), blur(&iyy, w, h, &k), blur(&ixy, w, h, &k));
    (0..w * h)
        .map(|i| {
            let tr = sxx[i] + syy[i];
            sxx[i] * syy[i] - sxy[i] * sxy[i] - HARRIS_K * tr * tr
        })
        .collect()
}

/// Top `max_points` local maxima of the Harris response, strongest first.
///
/// Non-maximum suppression over 3×3 neighborhoods keeps, out of a plateau of
/// equal responses, only the pixel with the lowest `(y, x)`.
pub fn harris_detect(image: &ImageBuffer, max_points: usize) -> Result<SutOutput, SutError> {
    if image.width < MIN_SIDE || image.height < MIN_SIDE {
        return Err(SutError::TooSmall { width: image.width, height: image.height, min: MIN_SIDE });
    }
    let (w, h) = (image.width as usize, image.height as usize);
    let r = harris_response(image);
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = r[y * w + x];
            if !(v > RESPONSE_FLOOR) {
                continue;
            }
            let mut keep = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = r[ny as usize * w + nx as usize];
                    let earlier = (dy, dx) < (0, 0);
                    if q > v || (earlier && q == v) {
                        keep = false;
                        break 'nb;
                    }
                }
            }
            if keep {
                points.push(InterestPoint { x: x as f64, y: y as f64, confidence: v });
            }
        }
    }
    super::sort_points(&mut points);
    points.truncate(max_points);
    Ok(SutOutput::InterestPoints { points })
}
