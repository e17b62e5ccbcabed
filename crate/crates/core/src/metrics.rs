//! Fidelity metrics and color conversion for evaluation.
//!
//! PSNR and SSIM work on single planes after cropping `shave` pixels from
//! every border. SSIM follows the usual single-scale formulation: an 11×11
//! Gaussian window with σ = 1.5, `C1 = (0.01·255)²`, `C2 = (0.03·255)²`,
//! averaged over valid window positions only.

use thiserror::Error;

use crate::plane::{ImagePlane, RgbImage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("nothing left to compare after shaving {shave} pixels from a {dims:?} image")]
    TooSmall { dims: (usize, usize), shave: usize },
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn shaved(a: &ImagePlane, b: &ImagePlane, shave: usize, min: usize) -> Result<(ImagePlane, ImagePlane), MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimMismatch(a.dims(), b.dims()));
    }
    let (h, w) = a.dims();
    if h < 2 * shave + min || w < 2 * shave + min {
        return Err(MetricError::TooSmall { dims: (h, w), shave });
    }
    let crop = |p: &ImagePlane| p.crop(shave, shave, h - 2 * shave, w - 2 * shave);
    Ok((crop(a), crop(b)))
}

/// Mean squared error in double precision.
pub fn mse(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64, MetricError> {
    let (a, b) = shaved(a, b, shave, 1)?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64, MetricError> {
    let e = mse(a, b, shave)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / e).log10())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode filtering: output is `(h - 10) × (w - 10)`.
fn filter_valid(data: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| g[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity over all valid 11×11 window positions.
pub fn ssim(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64, MetricError> {
    let (a, b) = shaved(a, b, shave, SSIM_WINDOW)?;
    let (h, w) = a.dims();
    let g = gaussian_window();
    let x: Vec<f64> = a.pixels().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.pixels().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, h, w, &g);
    let mu_y = filter_valid(&y, h, w, &g);
    let e_xx = filter_valid(&xx, h, w, &g);
    let e_yy = filter_valid(&yy, h, w, &g);
    let e_xy = filter_valid(&xy, h, w, &g);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// BT.601 studio-swing luma.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(|c| c as f64);
    (16.0 + (65.738 * r + 129.057 * g + 25.064 * b) / 256.0).round().clamp(0.0, 255.0) as u8
}

/// Luma plane of an RGB image.
pub fn to_luma(img: &RgbImage) -> ImagePlane {
    ImagePlane::from_fn(img.height(), img.width(), |y, x| luma(img.pixel(y, x)))
}

/// BT.601 studio-swing YCbCr planes.
pub fn rgb_to_ycbcr(img: &RgbImage) -> [ImagePlane; 3] {
    let (h, w) = img.dims();
    let conv = |coef: [f64; 3], offset: f64| {
        ImagePlane::from_fn(h, w, |y, x| {
            let [r, g, b] = img.pixel(y, x).map(|c| c as f64);
            (offset + (coef[0] * r + coef[1] * g + coef[2] * b) / 256.0).round().clamp(0.0, 255.0) as u8
        })
    };
    [
        conv([65.738, 129.057, 25.064], 16.0),
        conv([-37.945, -74.494, 112.439], 128.0),
        conv([112.439, -94.154, -18.285], 128.0),
    ]
}

/// Inverse of [`rgb_to_ycbcr`].
pub fn ycbcr_to_rgb(planes: &[ImagePlane; 3]) -> RgbImage {
    let (h, w) = planes[0].dims();
    let mut data = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        let y = planes[0].pixels()[i] as f64 - 16.0;
        let cb = planes[1].pixels()[i] as f64 - 128.0;
        let cr = planes[2].pixels()[i] as f64 - 128.0;
        let rgb = [
            (298.082 * y + 408.583 * cr) / 256.0,
            (298.082 * y - 100.291 * cb - 208.120 * cr) / 256.0,
            (298.082 * y + 516.412 * cb) / 256.0,
        ];
        data.extend(rgb.map(|v| v.round().clamp(0.0, 255.0) as u8));
    }
    RgbImage::new(h, w, data).expect("dims match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64, h: usize, w: usize) -> ImagePlane {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ImagePlane::from_fn(h, w, |_, _| rng.gen())
    }

    #[test]
    fn psnr_examples() {
        let a = random(1, 8, 8);
        assert_eq!(psnr(&a, &a, 0).unwrap(), f64::INFINITY);
        let zero = ImagePlane::filled(4, 4, 0);
        let full = ImagePlane::filled(4, 4, 255);
        assert_eq!(psnr(&zero, &full, 0).unwrap(), 0.0);
        // MSE 1 everywhere -> 20 log10(255).
        let one = ImagePlane::filled(4, 4, 1);
        assert!((psnr(&zero, &one, 1).unwrap() - 48.130_803_608_679_1).abs() < 1e-12);
    }

    #[test]
    fn psnr_errors() {
        let a = ImagePlane::filled(4, 4, 0);
        let b = ImagePlane::filled(4, 5, 0);
        assert!(matches!(psnr(&a, &b, 0), Err(MetricError::DimMismatch(..))));
        assert!(matches!(psnr(&a, &a, 2), Err(MetricError::TooSmall { .. })));
        assert!(matches!(ssim(&a, &a, 0), Err(MetricError::TooSmall { .. })));
    }

    #[test]
    fn psnr_shave_ignores_border() {
        let a = ImagePlane::filled(6, 6, 10);
        let b = ImagePlane::from_fn(6, 6, |y, x| if y == 0 || x == 5 { 200 } else { 10 });
        assert_eq!(psnr(&a, &b, 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ssim_identities() {
        let a = random(2, 20, 23);
        assert!((ssim(&a, &a, 0).unwrap() - 1.0).abs() < 1e-12);
        let c = ImagePlane::filled(16, 16, 64);
        assert!((ssim(&c, &c, 0).unwrap() - 1.0).abs() < 1e-12);
        let b = random(3, 20, 23);
        let s = ssim(&a, &b, 0).unwrap();
        assert!(s < 0.2 && s > -1.0, "{s}");
    }

    #[test]
    fn ssim_constant_shift_by_hand() {
        // Constant planes: variances vanish, so SSIM reduces to the luminance term.
        let a = ImagePlane::filled(12, 12, 100);
        let b = ImagePlane::filled(12, 12, 110);
        let want = (2.0 * 100.0 * 110.0 + C1) / (100.0f64.powi(2) + 110.0f64.powi(2) + C1);
        assert!((ssim(&a, &b, 0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_rotation_invariant() {
        let a = random(4, 24, 18);
        let b = random(5, 24, 18);
        assert_eq!(psnr(&a, &b, 2).unwrap(), psnr(&b, &a, 2).unwrap());
        assert!((psnr(&a, &b, 2).unwrap() - psnr(&a.rotate90(), &b.rotate90(), 2).unwrap()).abs() < 1e-9);
        assert!((ssim(&a, &b, 2).unwrap() - ssim(&b, &a, 2).unwrap()).abs() < 1e-12);
        assert!((ssim(&a, &b, 2).unwrap() - ssim(&a.rotate90(), &b.rotate90(), 2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn luma_examples() {
        assert_eq!(luma([0, 0, 0]), 16);
        assert_eq!(luma([255, 255, 255]), 235);
        // 16 + 65.738 * 255 / 256 = 81.48
        assert_eq!(luma([255, 0, 0]), 81);
        let img = RgbImage::new(1, 2, vec![0, 0, 0, 255, 0, 0]).unwrap();
        assert_eq!(to_luma(&img).pixels(), &[16, 81]);
    }

    #[test]
    fn ycbcr_roundtrip_is_close() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let data: Vec<u8> = (0..300).map(|_| rng.gen()).collect();
        let img = RgbImage::new(10, 10, data).unwrap();
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img));
        let worst = img.data().iter().zip(back.data()).map(|(&a, &b)| (a as i32 - b as i32).abs()).max().unwrap();
        assert!(worst <= 3, "{worst}");
        assert_eq!(rgb_to_ycbcr(&img)[0], to_luma(&img));
    }
}
