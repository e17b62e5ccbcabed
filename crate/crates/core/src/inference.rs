//! The integer forward pass.
//!
//! For every pixel and every kernel, the rotation ensemble gathers the
//! kernel's pixels under each quarter turn, reads the `r × r` block the table
//! stores for that tuple, turns the block the same way as the offsets, and
//! adds it into the pixel's accumulator. A branch divides its sum by `N · M`
//! with a single rounding step, and a stage adds both branch corrections to
//! the upsampled stage input before clamping back to 8 bits.
//!
//! Work is split across output rows with rayon; every output pixel is
//! computed from a fixed accumulation order, so results do not depend on the
//! number of threads.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BranchSpec, KernelPattern, LutTable, ModelSpec, ResidualMode, StageSpec};
use crate::plane::ImagePlane;
use crate::resample::{classical_upscale, Interpolation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InferenceError {
    #[error("kernel gathers {pattern} pixels but its table is indexed by {table}")]
    ArityMismatch { pattern: usize, table: usize },
    #[error("input value {value} is not below the table's {levels} levels")]
    ValueOutOfRange { value: u8, levels: u16 },
}

/// Splits each pixel into its high and low nibble.
pub fn split_nibbles(img: &ImagePlane) -> (ImagePlane, ImagePlane) {
    let (h, w) = img.dims();
    let msb = img.pixels().iter().map(|p| p >> 4).collect();
    let lsb = img.pixels().iter().map(|p| p & 0x0f).collect();
    (ImagePlane::new(h, w, msb).expect("same dims"), ImagePlane::new(h, w, lsb).expect("same dims"))
}

/// Values under `pattern` anchored at `(y, x)`, replicating edge pixels.
pub fn gather_tuple(plane: &ImagePlane, pattern: &KernelPattern, y: usize, x: usize) -> Vec<u8> {
    pattern
        .offsets()
        .iter()
        .map(|&(dy, dx)| plane.get_clamped(y as isize + dy as isize, x as isize + dx as isize))
        .collect()
}

/// Base-`v` positional index of a tuple, first element most significant.
pub fn lut_index(tuple: &[u8], v: u16) -> Result<usize, InferenceError> {
    tuple.iter().try_fold(0usize, |idx, &t| {
        if t as u16 >= v {
            Err(InferenceError::ValueOutOfRange { value: t, levels: v })
        } else {
            Ok(idx * v as usize + t as usize)
        }
    })
}

/// Division by a positive divisor, rounding half away from zero.
#[inline]
pub fn div_round(s: i32, d: i32) -> i32 {
    if s >= 0 {
        (2 * s + d) / (2 * d)
    } else {
        -((-2 * s + d) / (2 * d))
    }
}

/// Signed accumulator with one `r × r` block per input pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMap {
    height: usize,
    width: usize,
    scale: usize,
    values: Vec<i32>,
}

impl SignedMap {
    fn zeros(height: usize, width: usize, scale: usize) -> Self {
        SignedMap { height, width, scale, values: vec![0; height * width * scale * scale] }
    }

    /// Input height; the map itself is `scale · height` rows tall.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    /// Row-major values over the `scale · height × scale · width` grid.
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> i32 {
        self.values[y * self.width * self.scale + x]
    }
}

/// Rotates a row-major `r × r` block `j` quarter turns clockwise.
pub(crate) fn rotate_block(block: &[i8], r: usize, j: usize) -> Vec<i8> {
    let mut out = block.to_vec();
    for _ in 0..j % 4 {
        let prev = out.clone();
        for y in 0..r {
            for x in 0..r {
                out[y * r + x] = prev[(r - 1 - x) * r + y];
            }
        }
    }
    out
}

/// A kernel with its offsets and table blocks pre-rotated for every turn.
struct PreparedKernel {
    /// Per turn, the rotated `(dy, dx)` offsets.
    offsets: Vec<Vec<(isize, isize)>>,
    /// Per turn, the table with every block already rotated.
    tables: Vec<Vec<i8>>,
    levels: usize,
    block: usize,
}

impl PreparedKernel {
    fn new(pattern: &KernelPattern, table: &LutTable) -> Self {
        let r = table.upscale();
        let turns = pattern.rotations() as usize;
        let offsets = (0..turns)
            .map(|j| pattern.rotated(j).offsets().iter().map(|&(dy, dx)| (dy as isize, dx as isize)).collect())
            .collect();
        let tables = (0..turns)
            .map(|j| {
                let mut rotated = Vec::with_capacity(table.entries().len());
                for idx in 0..table.block_count() {
                    rotated.extend(rotate_block(table.block(idx), r, j));
                }
                rotated
            })
            .collect();
        PreparedKernel { offsets, tables, levels: table.levels() as usize, block: r * r }
    }

    fn radius(&self) -> isize {
        self.offsets.iter().flatten().map(|&(dy, dx)| dy.abs().max(dx.abs())).max().unwrap_or(0)
    }
}

struct PreparedBranch {
    kernels: Vec<PreparedKernel>,
    divisor: i32,
}

impl PreparedBranch {
    fn new(branch: &BranchSpec) -> Self {
        PreparedBranch {
            kernels: branch.kernels().iter().map(|(p, t)| PreparedKernel::new(p, t)).collect(),
            divisor: branch.divisor(),
        }
    }
}

/// Source plane view with a per-pixel value transform (identity or nibble extraction).
struct Source<'a, F> {
    pixels: &'a [u8],
    height: isize,
    width: isize,
    radius: isize,
    map: F,
}

impl<F: Fn(u8) -> u8> Source<'_, F> {
    #[inline]
    fn at(&self, y: isize, x: isize) -> usize {
        let (y, x) =
            if y >= self.radius && x >= self.radius && y + self.radius < self.height && x + self.radius < self.width {
                (y, x)
            } else {
                (y.clamp(0, self.height - 1), x.clamp(0, self.width - 1))
            };
        (self.map)(self.pixels[(y * self.width + x) as usize]) as usize
    }

    /// Adds every kernel's rotation-ensemble reads for pixel `(y, x)` into `acc`.
    #[inline]
    fn accumulate(&self, kernels: &[PreparedKernel], y: isize, x: isize, acc: &mut [i32]) {
        let interior =
            y >= self.radius && x >= self.radius && y + self.radius < self.height && x + self.radius < self.width;
        for kernel in kernels {
            for (offsets, table) in kernel.offsets.iter().zip(&kernel.tables) {
                let mut idx = 0usize;
                for &(dy, dx) in offsets {
                    let value = if interior {
                        (self.map)(self.pixels[((y + dy) * self.width + x + dx) as usize]) as usize
                    } else {
                        self.at(y + dy, x + dx)
                    };
                    idx = idx * kernel.levels + value;
                }
                let block = &table[idx * kernel.block..(idx + 1) * kernel.block];
                for (a, &e) in acc.iter_mut().zip(block) {
                    *a += e as i32;
                }
            }
        }
    }
}

fn check_range(plane: &ImagePlane, levels: u16) -> Result<(), InferenceError> {
    match plane.pixels().iter().copied().max() {
        Some(value) if value as u16 >= levels => Err(InferenceError::ValueOutOfRange { value, levels }),
        _ => Ok(()),
    }
}

fn accumulate_map(plane: &ImagePlane, kernels: &[PreparedKernel], r: usize) -> SignedMap {
    let (h, w) = plane.dims();
    let radius = kernels.iter().map(PreparedKernel::radius).max().unwrap_or(0);
    let src = Source { pixels: plane.pixels(), height: h as isize, width: w as isize, radius, map: |p| p };
    let mut map = SignedMap::zeros(h, w, r);
    let ow = w * r;
    map.values.par_chunks_mut(ow * r).enumerate().for_each(|(y, rows)| {
        let mut acc = vec![0i32; r * r];
        for x in 0..w {
            acc.fill(0);
            src.accumulate(kernels, y as isize, x as isize, &mut acc);
            for sy in 0..r {
                rows[sy * ow + x * r..sy * ow + x * r + r].copy_from_slice(&acc[sy * r..sy * r + r]);
            }
        }
    });
    map
}

/// Raw rotation-ensemble sum of one kernel over a plane (no division).
pub fn kernel_forward(
    plane: &ImagePlane,
    pattern: &KernelPattern,
    table: &LutTable,
) -> Result<SignedMap, InferenceError> {
    if pattern.len() != table.arity() {
        return Err(InferenceError::ArityMismatch { pattern: pattern.len(), table: table.arity() });
    }
    check_range(plane, table.levels())?;
    Ok(accumulate_map(plane, &[PreparedKernel::new(pattern, table)], table.upscale()))
}

/// Sum over every kernel of a branch, with the divisor `N · M` still to apply.
pub fn branch_forward(plane: &ImagePlane, branch: &BranchSpec) -> Result<(SignedMap, i32), InferenceError> {
    check_range(plane, branch.levels())?;
    let prepared = PreparedBranch::new(branch);
    Ok((accumulate_map(plane, &prepared.kernels, branch.upscale()), prepared.divisor))
}

/// Upsamples by `r` with the given residual mode.
pub fn upsample(img: &ImagePlane, r: usize, mode: ResidualMode) -> ImagePlane {
    classical_upscale(img, r, Interpolation::from(mode))
}

/// One stage: both nibble branches plus the residual, clamped to 8 bits.
pub fn stage_forward(img: &ImagePlane, stage: &StageSpec) -> ImagePlane {
    let r = stage.upscale();
    let (h, w) = img.dims();
    let msb = PreparedBranch::new(stage.msb());
    let lsb = PreparedBranch::new(stage.lsb());
    let radius = msb.kernels.iter().chain(&lsb.kernels).map(PreparedKernel::radius).max().unwrap_or(0);
    let high = Source { pixels: img.pixels(), height: h as isize, width: w as isize, radius, map: |p: u8| p >> 4 };
    let low = Source { pixels: img.pixels(), height: h as isize, width: w as isize, radius, map: |p: u8| p & 0x0f };

    let mut out = upsample(img, r, stage.residual()).into_pixels();
    let ow = w * r;
    out.par_chunks_mut(ow * r).enumerate().for_each(|(y, rows)| {
        let mut acc_m = vec![0i32; r * r];
        let mut acc_l = vec![0i32; r * r];
        for x in 0..w {
            acc_m.fill(0);
            acc_l.fill(0);
            high.accumulate(&msb.kernels, y as isize, x as isize, &mut acc_m);
            low.accumulate(&lsb.kernels, y as isize, x as isize, &mut acc_l);
            for sy in 0..r {
                for sx in 0..r {
                    let i = sy * r + sx;
                    let px = &mut rows[sy * ow + x * r + sx];
                    let v = *px as i32 + div_round(acc_m[i], msb.divisor) + div_round(acc_l[i], lsb.divisor);
                    *px = v.clamp(0, 255) as u8;
                }
            }
        }
    });
    ImagePlane::new(h * r, ow, out).expect("dims match")
}

/// Runs every stage in order; output is the input scaled by the product of stage upscales.
pub fn model_forward(img: &ImagePlane, model: &ModelSpec) -> ImagePlane {
    model.stages().iter().fold(img.clone(), |x, stage| stage_forward(&x, stage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_pattern, BuiltinKernel, ModelLayout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize, levels: u16) -> ImagePlane {
        ImagePlane::from_fn(h, w, |_, _| rng.gen_range(0..levels) as u8)
    }

    #[test]
    fn nibble_split() {
        let img = ImagePlane::new(1, 3, vec![0, 255, 167]).unwrap();
        let (m, l) = split_nibbles(&img);
        assert_eq!(m.pixels(), &[0, 15, 10]);
        assert_eq!(l.pixels(), &[0, 15, 7]);
    }

    #[test]
    fn gather_clamps_at_edges() {
        let h = builtin_pattern("H").unwrap();
        let c = ImagePlane::filled(3, 4, 7);
        assert_eq!(gather_tuple(&c, &h, 1, 3), vec![7, 7]);
        let p = ImagePlane::from_fn(2, 3, |y, x| (y * 3 + x) as u8);
        assert_eq!(gather_tuple(&p, &h, 0, 2), vec![2, 2]);
    }

    #[test]
    fn gather_knight_kernel_matches_index_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_plane(&mut rng, 5, 5, 256);
        let c = builtin_pattern("HDB_C").unwrap();
        let px = p.pixels();
        assert_eq!(gather_tuple(&p, &c, 2, 2), vec![px[12], px[5 * 3 + 4], px[5 * 4 + 3]]);
    }

    #[test]
    fn index_examples() {
        assert_eq!(lut_index(&[0, 0], 16), Ok(0));
        assert_eq!(lut_index(&[15, 15], 16), Ok(255));
        assert_eq!(lut_index(&[1, 2, 3], 16), Ok(291));
        assert_eq!(lut_index(&[16, 0], 16), Err(InferenceError::ValueOutOfRange { value: 16, levels: 16 }));
    }

    #[test]
    fn div_round_examples() {
        assert_eq!(div_round(6, 4), 2);
        assert_eq!(div_round(-6, 4), -2);
        assert_eq!(div_round(5, 4), 1);
        assert_eq!(div_round(-5, 4), -1);
        assert_eq!(div_round(127 * 12, 12), 127);
    }

    #[test]
    fn block_rotation() {
        // 1 2     3 1
        // 3 4  -> 4 2
        assert_eq!(rotate_block(&[1, 2, 3, 4], 2, 1), vec![3, 1, 4, 2]);
        assert_eq!(rotate_block(&[1, 2, 3, 4], 2, 4), vec![1, 2, 3, 4]);
    }

    #[test]
    fn zero_and_constant_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plane = random_plane(&mut rng, 5, 7, 16);
        let d = builtin_pattern("D").unwrap();
        let zero = kernel_forward(&plane, &d, &LutTable::zeros(16, 2, 2).unwrap()).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0));
        let c = kernel_forward(&plane, &d, &LutTable::filled(16, 2, 2, -9).unwrap()).unwrap();
        assert!(c.values().iter().all(|&v| v == -36));
        assert_eq!(c.values().len(), 5 * 7 * 4);
    }

    #[test]
    fn kernel_rejects_bad_inputs() {
        let p = ImagePlane::filled(2, 2, 16);
        let d = builtin_pattern("D").unwrap();
        assert!(matches!(
            kernel_forward(&p, &d, &LutTable::zeros(16, 2, 1).unwrap()),
            Err(InferenceError::ValueOutOfRange { value: 16, levels: 16 })
        ));
        assert!(matches!(
            kernel_forward(&p, &d, &LutTable::zeros(17, 3, 1).unwrap()),
            Err(InferenceError::ArityMismatch { .. })
        ));
    }

    /// Four-rotation loop written against the offset map and a hand-rolled block turn.
    fn brute_kernel(plane: &ImagePlane, offsets: &[(i32, i32)], table: &LutTable) -> Vec<i32> {
        let (h, w) = plane.dims();
        let r = table.upscale();
        let v = table.levels() as usize;
        let mut out = vec![0i32; h * w * r * r];
        for y in 0..h {
            for x in 0..w {
                for j in 0..4 {
                    let mut idx = 0;
                    for &(dy, dx) in offsets {
                        let (mut a, mut b) = (dy, dx);
                        for _ in 0..j {
                            (a, b) = (b, -a);
                        }
                        let yy = (y as i32 + a).clamp(0, h as i32 - 1) as usize;
                        let xx = (x as i32 + b).clamp(0, w as i32 - 1) as usize;
                        idx = idx * v + plane.get(yy, xx) as usize;
                    }
                    for sy in 0..r {
                        for sx in 0..r {
                            // Cell (sy, sx) of a block turned j times clockwise
                            // comes from the source cell turned back j times.
                            let (mut ty, mut tx) = (sy, sx);
                            for _ in 0..j {
                                (ty, tx) = (r - 1 - tx, ty);
                            }
                            out[(y * r + sy) * w * r + x * r + sx] += table.block(idx)[ty * r + tx] as i32;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kernel_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in [BuiltinKernel::D, BuiltinKernel::HdbC, BuiltinKernel::L] {
            let p = k.pattern();
            let plane = random_plane(&mut rng, 6, 6, 16);
            let table = LutTable::random(16, p.len(), 2, &mut rng).unwrap();
            let map = kernel_forward(&plane, &p, &table).unwrap();
            assert_eq!(map.values(), brute_kernel(&plane, p.offsets(), &table).as_slice(), "{k}");
        }
    }

    #[test]
    fn branch_sums_and_divisor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plane = random_plane(&mut rng, 4, 5, 16);
        let one = BranchSpec::new(vec![(builtin_pattern("H").unwrap(), LutTable::zeros(16, 2, 1).unwrap())]).unwrap();
        let (sum, d) = branch_forward(&plane, &one).unwrap();
        assert_eq!(d, 4);
        assert!(sum.values().iter().all(|&v| v == 0));

        let hdb = BranchSpec::new(
            BuiltinKernel::HDB.iter().map(|k| (k.pattern(), LutTable::filled(16, 3, 2, 5).unwrap())).collect(),
        )
        .unwrap();
        let (sum, d) = branch_forward(&plane, &hdb).unwrap();
        assert_eq!(d, 12);
        assert!(sum.values().iter().all(|&v| v == 60));

        let tables: Vec<LutTable> = (0..2).map(|_| LutTable::random(16, 2, 2, &mut rng).unwrap()).collect();
        let hd =
            BranchSpec::new(BuiltinKernel::HD.iter().zip(&tables).map(|(k, t)| (k.pattern(), t.clone())).collect())
                .unwrap();
        let (sum, d) = branch_forward(&plane, &hd).unwrap();
        assert_eq!(d, 8);
        let mut expected = vec![0i32; sum.values().len()];
        for (k, t) in BuiltinKernel::HD.iter().zip(&tables) {
            for (e, v) in expected.iter_mut().zip(brute_kernel(&plane, k.offsets(), t)) {
                *e += v;
            }
        }
        assert_eq!(sum.values(), expected.as_slice());
    }

    #[test]
    fn whole_image_rotation_matches_pattern_rotation() {
        // Turning the plane, applying the unturned pattern and turning the
        // output back is the same as reading with the turned pattern.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in BuiltinKernel::ALL {
            let p = KernelPattern::new(k.offsets().to_vec(), 1).unwrap();
            let table = LutTable::random(16, p.len(), 2, &mut rng).unwrap();
            let plane = random_plane(&mut rng, 5, 8, 16);
            for j in 0..4 {
                // Content turned j times counter-clockwise.
                let turned = plane.rotate((4 - j) % 4);
                let map = kernel_forward(&turned, &p, &table).unwrap();
                let (th, tw) = (map.height() * 2, map.width() * 2);
                let back = ImagePlane::from_fn(th, tw, |y, x| (map.get(y, x) + 128) as u8).rotate(j);

                let rotated = KernelPattern::new(p.rotated(j).offsets().to_vec(), 1).unwrap();
                let mut rotated_table = table.clone();
                let blocks: Vec<i8> =
                    (0..table.block_count()).flat_map(|i| rotate_block(table.block(i), 2, j)).collect();
                rotated_table.entries_mut().copy_from_slice(&blocks);
                let direct = kernel_forward(&plane, &rotated, &rotated_table).unwrap();
                let direct = ImagePlane::from_fn(10, 16, |y, x| (direct.get(y, x) + 128) as u8);
                assert_eq!(back, direct, "{k} j={j}");
            }
        }
    }

    #[test]
    fn zero_model_is_nearest_upsampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_plane(&mut rng, 6, 9, 256);
        let zero = ModelLayout::hklut_s().zeros().unwrap();
        let out = model_forward(&img, &zero);
        assert_eq!(out, upsample(&img, 4, ResidualMode::Nearest));
    }

    #[test]
    fn saturation() {
        let full = ModelLayout::progressive(&[2]).constant(127).unwrap();
        let img = ImagePlane::filled(3, 3, 255);
        assert!(model_forward(&img, &full).pixels().iter().all(|&p| p == 255));
        let empty = ModelLayout::progressive(&[2]).constant(-127).unwrap();
        assert!(model_forward(&ImagePlane::filled(2, 2, 100), &empty).pixels().iter().all(|&p| p == 0));
    }

    #[test]
    fn constant_tables_shift_every_pixel() {
        let m = ModelLayout::progressive(&[2]).constant(10).unwrap();
        let img = ImagePlane::from_fn(4, 4, |y, x| (y * 40 + x * 10) as u8);
        let out = model_forward(&img, &m);
        let base = upsample(&img, 2, ResidualMode::Nearest);
        for (o, b) in out.pixels().iter().zip(base.pixels()) {
            assert_eq!(*o as i32, (*b as i32 + 20).min(255));
        }
    }

    #[test]
    fn shapes() {
        let m = ModelLayout::hklut_s().zeros().unwrap();
        assert_eq!(model_forward(&ImagePlane::filled(4, 4, 0), &m).dims(), (16, 16));
        let l = ModelLayout::hklut_l().zeros().unwrap();
        assert_eq!(model_forward(&ImagePlane::filled(1, 3, 9), &l).dims(), (4, 12));
        assert_eq!(model_forward(&ImagePlane::filled(2, 2, 9), &ModelSpec::default()), ImagePlane::filled(2, 2, 9));
    }

    #[test]
    fn upsample_examples() {
        assert_eq!(upsample(&ImagePlane::filled(1, 1, 42), 2, ResidualMode::Nearest), ImagePlane::filled(2, 2, 42));
        let p = ImagePlane::new(1, 2, vec![3, 9]).unwrap();
        for mode in [ResidualMode::Nearest, ResidualMode::Bilinear, ResidualMode::Bicubic] {
            assert_eq!(upsample(&p, 1, mode), p);
        }
    }

    #[test]
    fn rotation_equivariance_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mode in [ResidualMode::Nearest, ResidualMode::Bilinear, ResidualMode::Bicubic] {
            let m = ModelLayout::hklut_l().with_residual(mode).random(&mut rng).unwrap();
            let img = random_plane(&mut rng, 7, 5, 256);
            assert_eq!(model_forward(&img.rotate90(), &m), model_forward(&img, &m).rotate90(), "{mode}");
        }
    }
}
