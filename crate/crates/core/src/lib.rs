//! Integer-only lookup-table super-resolution.
//!
//! A model is a stack of stages. Each stage splits 8-bit pixels into their
//! high and low nibbles, reads small signed blocks from per-kernel tables
//! for every rotation of every kernel, averages them with integer rounding
//! and adds the result to an upsampled copy of the stage input.
//!
//! ```
//! use hklut::{model_forward, ImagePlane, ModelLayout};
//!
//! let model = ModelLayout::hklut_s().zeros().unwrap();
//! let lr = ImagePlane::from_fn(3, 5, |y, x| (y * 40 + x) as u8);
//! let sr = model_forward(&lr, &model);
//! assert_eq!(sr.dims(), (12, 20));
//! assert_eq!(sr.get(11, 19), lr.get(2, 4));
//! ```

pub mod bench;
pub mod dataset;
pub mod energy;
pub mod eval;
pub mod format;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod plane;
pub mod resample;

pub use format::{load_model, load_model_file, save_model, save_model_file};
pub use inference::model_forward;
pub use model::{
    lut_size_bytes, BuiltinKernel, ByteSize, KernelPattern, LutTable, ModelLayout, ModelSpec, ResidualMode,
};
pub use oracle::{build_lut_from_function, reference_forward};
pub use plane::{Image, ImagePlane, RgbImage};
pub use resample::{classical_upscale, Interpolation};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/format.md")]
    mod format {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
