//! Full-reference image quality: PSNR and single-scale SSIM.

use thiserror::Error;

use crate::image::ImageBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum QualityError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("image {0}x{1} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    TooSmall(u32, u32),
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), QualityError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(QualityError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Peak signal-to-noise ratio with peak 1 over all channels; `+∞` for
/// identical images.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, QualityError> {
    same_dims(a, b)?;
    let sum: f64 = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    let mse = sum / a.pixels.len().max(1) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k: [f64; SSIM_WINDOW] = std::array::from_fn(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering: output is (w−10)×(h−10).
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of the luma channels over every valid 11×11 Gaussian window.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, QualityError> {
    same_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w.min(h) < SSIM_WINDOW {
        return Err(QualityError::TooSmall(a.width, a.height));
    }
    let k = gaussian_taps();
    let la = a.luma();
    let lb = b.luma();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&la, w, h, &k);
    let mu_b = filter_valid(&lb, w, h, &k);
    let e_aa = filter_valid(&prod(&la, &la), w, h, &k);
    let e_bb = filter_valid(&prod(&lb, &lb), w, h, &k);
    let e_ab = filter_valid(&prod(&la, &lb), w, h, &k);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    Ok(total / mu_a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Provenance;

    fn checker(w: u32, h: u32, cell: u32) -> ImageBuffer {
        let mut img = ImageBuffer::filled(w, h, [0.0; 3], Provenance::Real);
        for y in 0..h {
            for x in 0..w {
                if ((x / cell) + (y / cell)) % 2 == 0 {
                    img.set(x, y, [0.9, 0.9, 0.9]);
                } else {
                    img.set(x, y, [0.1, 0.1, 0.1]);
                }
            }
        }
        img
    }

    #[test]
    fn psnr_examples() {
        let z = ImageBuffer::filled(8, 8, [0.0; 3], Provenance::Real);
        let o = ImageBuffer::filled(8, 8, [1.0; 3], Provenance::Real);
        let t = ImageBuffer::filled(8, 8, [0.1; 3], Provenance::Real);
        assert_eq!(psnr(&z, &z).unwrap(), f64::INFINITY);
        assert!(psnr(&z, &o).unwrap().abs() < 1e-12);
        // f32 storage of 0.1 perturbs the last digits
        assert!((psnr(&z, &t).unwrap() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ImageBuffer::filled(12, 12, [0.0; 3], Provenance::Real);
        let b = ImageBuffer::filled(12, 13, [0.0; 3], Provenance::Real);
        assert!(matches!(psnr(&a, &b), Err(QualityError::DimensionMismatch(..))));
        assert!(matches!(ssim(&a, &b), Err(QualityError::DimensionMismatch(..))));
    }

    #[test]
    fn ssim_identity_and_too_small() {
        let a = checker(32, 24, 4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let s = ImageBuffer::filled(10, 40, [0.5; 3], Provenance::Real);
        assert!(matches!(ssim(&s, &s), Err(QualityError::TooSmall(10, 40))));
    }

    #[test]
    fn ssim_of_inverse_checker_is_negative() {
        let a = checker(32, 32, 4);
        let mut b = a.clone();
        b.pixels.iter_mut().for_each(|v| *v = 1.0 - *v);
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_images_with_equal_mean() {
        let a = ImageBuffer::filled(16, 16, [0.3, 0.5, 0.7], Provenance::Real);
        let b = ImageBuffer::filled(16, 16, [0.5, 0.5, 0.5], Provenance::Real);
        assert!((ssim(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric() {
        let a = checker(20, 20, 3);
        let mut b = checker(20, 20, 5);
        b.set(3, 3, [0.4, 0.2, 0.1]);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
    }
}
