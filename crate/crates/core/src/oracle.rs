//! Slow, independent reference implementations.
//!
//! Nothing here calls into the optimized engine: rotation, gathering,
//! indexing, block turning, rounding and the residual upsamplers are all
//! rewritten as plain nested loops, with floating-point arithmetic where
//! the engine uses integers. The reference agrees with the engine bit for
//! bit on models whose stage upscales are powers of two (every weight is then
//! a dyadic fraction and the float path is exact).

use thiserror::Error;

use crate::model::{LutTable, ModelError, ModelSpec, ResidualMode, StageSpec};
use crate::plane::ImagePlane;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("function returned {len} values for tuple {tuple:?}, expected {expected}")]
    BlockLength { tuple: Vec<u8>, len: usize, expected: usize },
    #[error("function returned {value} for tuple {tuple:?}, outside [-127, 127]")]
    OutOfRange { tuple: Vec<u8>, value: i32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Tabulates `f` over every tuple in `[0, v)^n`, first element most significant.
pub fn build_lut_from_function<F>(mut f: F, v: u16, n: usize, r: usize) -> Result<LutTable, OracleError>
where
    F: FnMut(&[u8]) -> Vec<i32>,
{
    // Geometry is validated before enumerating anything.
    LutTable::zeros(v, n, r)?;
    let mut entries = Vec::new();
    let mut tuple = vec![0u8; n];
    let total = (v as usize).pow(n as u32);
    for count in 0..total {
        let mut rest = count;
        for slot in tuple.iter_mut().rev() {
            *slot = (rest % v as usize) as u8;
            rest /= v as usize;
        }
        let block = f(&tuple);
        if block.len() != r * r {
            return Err(OracleError::BlockLength { tuple, len: block.len(), expected: r * r });
        }
        for value in block {
            if !(-127..=127).contains(&value) {
                return Err(OracleError::OutOfRange { tuple, value });
            }
            entries.push(value as i8);
        }
    }
    Ok(LutTable::new(v, n, r, entries)?)
}

/// Ready-made table functions for fixtures.
pub mod fixtures {
    /// Every block cell holds `value`.
    pub fn constant(value: i32, r: usize) -> impl Fn(&[u8]) -> Vec<i32> {
        move |_| vec![value; r * r]
    }

    /// Every block cell holds the pivot minus its first neighbour, clamped.
    pub fn difference(r: usize) -> impl Fn(&[u8]) -> Vec<i32> {
        move |t: &[u8]| {
            let d = t[0] as i32 - t.get(1).copied().unwrap_or(t[0]) as i32;
            vec![d.clamp(-127, 127); r * r]
        }
    }

    /// A smooth sharpening-like response: pivot minus neighbour mean, scaled
    /// and varied across the block so block orientation matters.
    pub fn gradient(r: usize) -> impl Fn(&[u8]) -> Vec<i32> {
        move |t: &[u8]| {
            let pivot = t[0] as i32;
            let others = &t[1..];
            let mean = if others.is_empty() {
                pivot
            } else {
                others.iter().map(|&x| x as i32).sum::<i32>() / others.len() as i32
            };
            (0..r * r)
                .map(|i| {
                    let (sy, sx) = ((i / r) as i32, (i % r) as i32);
                    ((pivot - mean) * (2 + sy - sx)).clamp(-127, 127)
                })
                .collect()
        }
    }
}

fn clamp_read(img: &ImagePlane, y: i64, x: i64) -> f64 {
    let yy = y.max(0).min(img.height() as i64 - 1) as usize;
    let xx = x.max(0).min(img.width() as i64 - 1) as usize;
    img.pixels()[yy * img.width() + xx] as f64
}

fn keys(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x.powi(3) - (a + 3.0) * x.powi(2) + 1.0
    } else if x < 2.0 {
        a * x.powi(3) - 5.0 * a * x.powi(2) + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

fn round_half_away(x: f64) -> f64 {
    x.signum() * (x.abs() + 0.5).floor()
}

/// Reference residual upsampler, returned as real values before rounding.
fn reference_residual(img: &ImagePlane, r: usize, mode: ResidualMode) -> Vec<Vec<f64>> {
    let (h, w) = (img.height() * r, img.width() * r);
    let mut out = vec![vec![0.0; w]; h];
    for (oy, row) in out.iter_mut().enumerate() {
        for (ox, cell) in row.iter_mut().enumerate() {
            if mode == ResidualMode::Nearest || r == 1 {
                *cell = img.pixels()[(oy / r) * img.width() + ox / r] as f64;
                continue;
            }
            let sy = (oy as f64 + 0.5) / r as f64 - 0.5;
            let sx = (ox as f64 + 0.5) / r as f64 - 0.5;
            let (fy, fx) = (sy.floor(), sx.floor());
            let mut acc = 0.0;
            let taps: &[i64] = if mode == ResidualMode::Bilinear { &[0, 1] } else { &[-1, 0, 1, 2] };
            for &ty in taps {
                for &tx in taps {
                    let (py, px) = (fy + ty as f64, fx + tx as f64);
                    let weight = if mode == ResidualMode::Bilinear {
                        (1.0 - (sy - py).abs()) * (1.0 - (sx - px).abs())
                    } else {
                        keys(sy - py) * keys(sx - px)
                    };
                    acc += weight * clamp_read(img, py as i64, px as i64);
                }
            }
            *cell = acc;
        }
    }
    out
}

fn reference_stage(img: &ImagePlane, stage: &StageSpec) -> ImagePlane {
    let r = stage.upscale();
    let (h, w) = (img.height(), img.width());
    let residual = reference_residual(img, r, stage.residual());
    let mut out = vec![0u8; h * r * w * r];
    for y in 0..h {
        for x in 0..w {
            let mut correction = vec![0.0f64; r * r];
            for (shift, branch) in [(4u32, stage.msb()), (0u32, stage.lsb())] {
                let mut sum = vec![0i64; r * r];
                let mut reads = 0i64;
                for (pattern, table) in branch.kernels() {
                    let levels = table.levels() as usize;
                    for turn in 0..pattern.rotations() as usize {
                        // Gather with the pattern turned `turn` times clockwise.
                        let mut index = 0usize;
                        for &(dy, dx) in pattern.offsets() {
                            let (mut a, mut b) = (dy as i64, dx as i64);
                            for _ in 0..turn {
                                let t = a;
                                a = b;
                                b = -t;
                            }
                            let raw = clamp_read(img, y as i64 + a, x as i64 + b) as u8;
                            let nibble = if shift == 4 { raw / 16 } else { raw % 16 };
                            index = index * levels + nibble as usize;
                        }
                        let start = index * r * r;
                        let block = &table.entries()[start..start + r * r];
                        // Turn the block clockwise by the same amount: the cell at
                        // centered position p moves to rot(p).
                        let c = (r as f64 - 1.0) / 2.0;
                        for sy in 0..r {
                            for sx in 0..r {
                                let (mut py, mut px) = (sy as f64 - c, sx as f64 - c);
                                for _ in 0..turn {
                                    let t = py;
                                    py = px;
                                    px = -t;
                                }
                                let (ty, tx) = ((py + c).round() as usize, (px + c).round() as usize);
                                sum[ty * r + tx] += block[sy * r + sx] as i64;
                            }
                        }
                        reads += 1;
                    }
                }
                for (c, s) in correction.iter_mut().zip(&sum) {
                    *c += round_half_away(*s as f64 / reads as f64);
                }
            }
            for sy in 0..r {
                for sx in 0..r {
                    let (oy, ox) = (y * r + sy, x * r + sx);
                    let base = round_half_away(residual[oy][ox]).clamp(0.0, 255.0);
                    let v = (base + correction[sy * r + sx]).clamp(0.0, 255.0);
                    out[oy * w * r + ox] = v as u8;
                }
            }
        }
    }
    ImagePlane::new(h * r, w * r, out).expect("dims match")
}

/// Reference forward pass with the same contract as the engine's `model_forward`.
pub fn reference_forward(img: &ImagePlane, model: &ModelSpec) -> ImagePlane {
    let mut current = img.clone();
    for stage in model.stages() {
        current = reference_stage(&current, stage);
    }
    current
}
