//! Classical resampling: nearest, bilinear and bicubic upscaling by an
//! integer factor, plus the antialiased bicubic downscaler used to make
//! low-resolution fixtures.
//!
//! Upscaling uses half-pixel centers, so output sample `d` sits at source
//! coordinate `(d + 0.5) / r - 0.5`. In units of `1 / 2r` that coordinate is
//! the integer `2d + 1 - r`, which lets bilinear and Keys bicubic weights be
//! evaluated exactly in integers. Results are rounded half away from zero
//! and clamped to `[0, 255]`.

use std::fmt;
use std::str::FromStr;

use crate::model::ResidualMode;
use crate::plane::ImagePlane;

/// Interpolation method for classical upscaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interpolation {
    Nearest,
    Bilinear,
    Bicubic,
}

impl Interpolation {
    pub const ALL: [Interpolation; 3] = [Interpolation::Nearest, Interpolation::Bilinear, Interpolation::Bicubic];

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Nearest => "nearest",
            Interpolation::Bilinear => "bilinear",
            Interpolation::Bicubic => "bicubic",
        }
    }
}

impl From<ResidualMode> for Interpolation {
    fn from(mode: ResidualMode) -> Self {
        match mode {
            ResidualMode::Nearest => Interpolation::Nearest,
            ResidualMode::Bilinear => Interpolation::Bilinear,
            ResidualMode::Bicubic => Interpolation::Bicubic,
        }
    }
}

impl FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(Interpolation::Nearest),
            "bilinear" => Ok(Interpolation::Bilinear),
            "bicubic" => Ok(Interpolation::Bicubic),
            _ => Err(format!("unknown interpolation `{s}`")),
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Division rounding half away from zero.
#[inline]
pub(crate) fn div_round_i64(s: i64, d: i64) -> i64 {
    if s >= 0 {
        (2 * s + d) / (2 * d)
    } else {
        -((-2 * s + d) / (2 * d))
    }
}

/// One output coordinate's taps: clamped source indices and integer weights.
struct Taps {
    index: Vec<usize>,
    weight: Vec<i64>,
    /// Number of taps per output coordinate.
    len: usize,
    /// Sum of the weights of one coordinate.
    scale: i64,
}

/// Keys cubic (a = -1/2) at `k / d`, scaled by `2 d^3`.
fn keys_scaled(k: i64, d: i64) -> i64 {
    let k = k.abs();
    if k <= d {
        3 * k * k * k - 5 * k * k * d + 2 * d * d * d
    } else if k < 2 * d {
        -k * k * k + 5 * k * k * d - 8 * k * d * d + 4 * d * d * d
    } else {
        0
    }
}

fn upscale_taps(len: usize, r: usize, method: Interpolation) -> Taps {
    let d = 2 * r as i64;
    let out_len = len * r;
    let clamp = |i: i64| i.clamp(0, len as i64 - 1) as usize;
    let (taps, scale) = match method {
        Interpolation::Nearest => (1, 1),
        Interpolation::Bilinear => (2, d),
        Interpolation::Bicubic => (4, 2 * d * d * d),
    };
    let mut index = Vec::with_capacity(out_len * taps);
    let mut weight = Vec::with_capacity(out_len * taps);
    for o in 0..out_len {
        let num = 2 * o as i64 + 1 - r as i64;
        let base = num.div_euclid(d);
        let frac = num.rem_euclid(d);
        match method {
            Interpolation::Nearest => {
                index.push(o / r);
                weight.push(1);
            }
            Interpolation::Bilinear => {
                index.extend([clamp(base), clamp(base + 1)]);
                weight.extend([d - frac, frac]);
            }
            Interpolation::Bicubic => {
                for t in -1..=2 {
                    index.push(clamp(base + t));
                    weight.push(keys_scaled(frac - t * d, d));
                }
            }
        }
    }
    Taps { index, weight, len: taps, scale }
}

/// Upscales by integer factor `r`.
///
/// # Panics
///
/// If `r == 0`.
pub fn classical_upscale(img: &ImagePlane, r: usize, method: Interpolation) -> ImagePlane {
    assert!(r >= 1, "upscale factor must be positive");
    if r == 1 {
        return img.clone();
    }
    let (h, w) = img.dims();
    if method == Interpolation::Nearest {
        return ImagePlane::from_fn(h * r, w * r, |y, x| img.get(y / r, x / r));
    }
    let tx = upscale_taps(w, r, method);
    let ty = upscale_taps(h, r, method);
    let (ow, oh) = (w * r, h * r);

    // Horizontal pass keeps the full weight scale so nothing is rounded early.
    let mut rows = vec![0i64; h * ow];
    for y in 0..h {
        let src = img.row(y);
        let dst = &mut rows[y * ow..(y + 1) * ow];
        for (x, out) in dst.iter_mut().enumerate() {
            let taps = x * tx.len..(x + 1) * tx.len;
            *out = tx.index[taps.clone()].iter().zip(&tx.weight[taps]).map(|(&i, &wt)| wt * src[i] as i64).sum();
        }
    }
    let denom = tx.scale * ty.scale;
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        let taps = y * ty.len..(y + 1) * ty.len;
        for x in 0..ow {
            let acc: i64 = ty.index[taps.clone()]
                .iter()
                .zip(&ty.weight[taps.clone()])
                .map(|(&i, &wt)| wt * rows[i * ow + x])
                .sum();
            out.push(div_round_i64(acc, denom).clamp(0, 255) as u8);
        }
    }
    ImagePlane::new(oh, ow, out).expect("dims match")
}

/// Keys cubic kernel with `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        1.5 * x * x * x - 2.5 * x * x + 1.0
    } else if x < 2.0 {
        -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0
    } else {
        0.0
    }
}

/// Normalized antialiased cubic weights for downscaling one axis by `scale`.
///
/// Returns, for every output coordinate, `(first source index, weights)`,
/// with indices not yet clamped.
pub fn downscale_weights(len: usize, scale: usize) -> Vec<(i64, Vec<f64>)> {
    let s = scale as f64;
    let out_len = len.div_ceil(scale);
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * s - 0.5;
            let first = (center - 2.0 * s).ceil() as i64;
            let last = (center + 2.0 * s).floor() as i64;
            let mut weights: Vec<f64> = (first..=last).map(|j| cubic((center - j as f64) / s)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            (first, weights)
        })
        .collect()
}

/// Antialiased bicubic downscale by `scale`, output `ceil(h / scale) × ceil(w / scale)`.
///
/// Source samples beyond the border are clamped to the edge. This is a
/// fixture generator; it is not guaranteed to reproduce officially
/// distributed low-resolution files.
///
/// # Panics
///
/// If `scale == 0`.
pub fn make_lr(hr: &ImagePlane, scale: usize) -> ImagePlane {
    assert!(scale >= 1, "scale must be positive");
    if scale == 1 {
        return hr.clone();
    }
    let (h, w) = hr.dims();
    let wx = downscale_weights(w, scale);
    let wy = downscale_weights(h, scale);
    let clamp = |i: i64, len: usize| i.clamp(0, len as i64 - 1) as usize;
    let ow = wx.len();
    let mut rows = vec![0f64; h * ow];
    for y in 0..h {
        for (x, (first, weights)) in wx.iter().enumerate() {
            rows[y * ow + x] =
                weights.iter().enumerate().map(|(k, wt)| wt * hr.get(y, clamp(first + k as i64, w)) as f64).sum();
        }
    }
    ImagePlane::from_fn(wy.len(), ow, |y, x| {
        let (first, weights) = &wy[y];
        let v: f64 = weights.iter().enumerate().map(|(k, wt)| wt * rows[clamp(first + k as i64, h) * ow + x]).sum();
        v.round().clamp(0.0, 255.0) as u8
    })
}
