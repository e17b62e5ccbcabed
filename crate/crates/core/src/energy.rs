//! Operation counting and theoretical energy estimates.
//!
//! Counts are per produced image. Energy is the dot product of the counts
//! with a per-operation cost table; the defaults below are the usual 45 nm
//! figures (8-bit add 0.03 pJ, 32-bit add 0.1 pJ, 32-bit multiply 3.1 pJ,
//! float add 0.9 pJ, float multiply 3.7 pJ) with a table read costed like
//! an 8-bit add. The table can be replaced from configuration.
//!
//! What an engine stage is charged for, with `H × W` the stage input and
//! `r` its upscale:
//!
//! | work | count | kind |
//! |---|---|---|
//! | nibble split | `2 H W` | 8-bit |
//! | table reads | `H W Σ_branch N M` | lookup |
//! | index formation | `(n - 1)` per read | 32-bit add |
//! | block accumulation | `r²` per read | 32-bit add |
//! | rounded division | `2` adds + `1` multiply per output pixel and branch | 32-bit |
//! | residual + corrections | `2` per output pixel | 32-bit add |
//! | clamp | `2` compares per output pixel | 8-bit |
//! | bilinear residual | `4` multiplies + `4` adds per output pixel | 32-bit |
//! | bicubic residual | `8` multiplies + `8` adds per output pixel | 32-bit |

use serde::Deserialize;
use thiserror::Error;

use crate::model::{Branch, KernelPattern, ModelSpec, ResidualMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnergyError {
    #[error("output {height}x{width} is not a multiple of the model upscale {upscale}")]
    NotDivisible { height: usize, width: usize, upscale: usize },
}

/// Energy per operation in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyCosts {
    pub int8_add: f64,
    pub int32_add: f64,
    pub int32_mul: f64,
    pub float_add: f64,
    pub float_mul: f64,
    pub lookup: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        EnergyCosts { int8_add: 0.03, int32_add: 0.1, int32_mul: 3.1, float_add: 0.9, float_mul: 3.7, lookup: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub lookups: u64,
    pub int8_ops: u64,
    pub int32_adds: u64,
    pub int32_muls: u64,
    pub float_adds: u64,
    pub float_muls: u64,
}

impl OpCounts {
    pub fn float_ops(&self) -> u64 {
        self.float_adds + self.float_muls
    }

    pub fn integer_ops(&self) -> u64 {
        self.int8_ops + self.int32_adds + self.int32_muls
    }

    pub fn energy_pj(&self, costs: &EnergyCosts) -> f64 {
        self.lookups as f64 * costs.lookup
            + self.int8_ops as f64 * costs.int8_add
            + self.int32_adds as f64 * costs.int32_add
            + self.int32_muls as f64 * costs.int32_mul
            + self.float_adds as f64 * costs.float_add
            + self.float_muls as f64 * costs.float_mul
    }

    fn add(&mut self, other: OpCounts) {
        self.lookups += other.lookups;
        self.int8_ops += other.int8_ops;
        self.int32_adds += other.int32_adds;
        self.int32_muls += other.int32_muls;
        self.float_adds += other.float_adds;
        self.float_muls += other.float_muls;
    }
}

/// Counts for one stage given its input size.
pub fn stage_ops(model: &ModelSpec, stage: usize, in_height: usize, in_width: usize) -> OpCounts {
    let stage = &model.stages()[stage];
    let pixels = (in_height * in_width) as u64;
    let r2 = (stage.upscale() * stage.upscale()) as u64;
    let out_pixels = pixels * r2;
    let mut c = OpCounts { int8_ops: 2 * pixels, ..OpCounts::default() };
    for b in Branch::BOTH {
        let branch = stage.branch(b);
        let m = branch.rotations() as u64;
        for (pattern, _) in branch.kernels() {
            let reads = pixels * m;
            c.lookups += reads;
            c.int32_adds += reads * (pattern.len() as u64 - 1) + reads * r2;
        }
        c.int32_adds += 2 * out_pixels;
        c.int32_muls += out_pixels;
    }
    c.int32_adds += 2 * out_pixels;
    c.int8_ops += 2 * out_pixels;
    match stage.residual() {
        ResidualMode::Nearest => {}
        ResidualMode::Bilinear => {
            c.int32_muls += 4 * out_pixels;
            c.int32_adds += 4 * out_pixels;
        }
        ResidualMode::Bicubic => {
            c.int32_muls += 8 * out_pixels;
            c.int32_adds += 8 * out_pixels;
        }
    }
    c
}

/// Operation counts for producing one `out_height × out_width` image.
pub fn estimate_ops(model: &ModelSpec, out_height: usize, out_width: usize) -> Result<OpCounts, EnergyError> {
    let upscale = model.total_upscale();
    if !out_height.is_multiple_of(upscale) || !out_width.is_multiple_of(upscale) {
        return Err(EnergyError::NotDivisible { height: out_height, width: out_width, upscale });
    }
    let (mut h, mut w) = (out_height / upscale, out_width / upscale);
    let mut total = OpCounts::default();
    for (s, stage) in model.stages().iter().enumerate() {
        total.add(stage_ops(model, s, h, w));
        h *= stage.upscale();
        w *= stage.upscale();
    }
    Ok(total)
}

/// A single-table configuration with quantized inputs recovered by
/// simplex interpolation, used as a comparison point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpolatedLutConfig {
    pub pattern: KernelPattern,
    pub levels: u16,
    pub upscale: usize,
}

impl InterpolatedLutConfig {
    /// 2×2 square kernel, 17 levels.
    pub fn square(upscale: usize) -> Self {
        InterpolatedLutConfig { pattern: crate::model::BuiltinKernel::S.pattern(), levels: 17, upscale }
    }
}

/// Counts for an interpolated single-stage table model.
///
/// Per pixel and rotation: `n` shifts and `n` masks split each input into
/// a level and a fraction, `n (n - 1) / 2` compares sort the fractions,
/// `n + 1` vertex reads, `n + 1` float subtractions form the weights and
/// each of the `r²` outputs takes `n + 1` float multiplies and `n` float
/// adds. The ensemble adds `r²` floats per rotation and one multiply per
/// output for the average, then rounds and clamps.
pub fn estimate_interpolated_ops(
    cfg: &InterpolatedLutConfig,
    out_height: usize,
    out_width: usize,
) -> Result<OpCounts, EnergyError> {
    let r = cfg.upscale;
    if !out_height.is_multiple_of(r) || !out_width.is_multiple_of(r) {
        return Err(EnergyError::NotDivisible { height: out_height, width: out_width, upscale: r });
    }
    let pixels = (out_height / r * out_width / r) as u64;
    let n = cfg.pattern.len() as u64;
    let m = cfg.pattern.rotations() as u64;
    let r2 = (r * r) as u64;
    let per = pixels * m;
    Ok(OpCounts {
        lookups: per * (n + 1),
        int8_ops: per * (2 * n + n * (n - 1) / 2) + 2 * pixels * r2,
        int32_adds: 0,
        int32_muls: 0,
        float_adds: per * ((n + 1) + r2 * n + r2),
        float_muls: per * r2 * (n + 1) + pixels * r2,
    })
}
