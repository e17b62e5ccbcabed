//! Dataset evaluation and report rendering.
//!
//! Protocol: the HR image is cropped to a multiple of the scale, the LR
//! input is the official file when the dataset ships one and a generated
//! [`make_lr`](crate::resample::make_lr) image otherwise, every color
//! channel is upscaled independently, and PSNR/SSIM are measured on BT.601
//! luma with `scale` border pixels shaved.

use std::fmt::{self, Write as _};
use std::time::Instant;

use thiserror::Error;

use crate::dataset::{check_pair_dims, read_png, DatasetError, DatasetIndex};
use crate::energy::OpCounts;
use crate::inference::model_forward;
use crate::metrics::{psnr, ssim, to_luma, MetricError};
use crate::model::ModelSpec;
use crate::plane::{Image, ImagePlane};
use crate::resample::{classical_upscale, make_lr, Interpolation};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{image}: {source}")]
    Metric { image: String, source: MetricError },
    #[error("model upscale {model} does not match dataset scale {dataset}")]
    ScaleMismatch { model: usize, dataset: usize },
}

/// What produces the SR image.
#[derive(Debug, Clone, Copy)]
pub enum Upscaler<'a> {
    Classical(Interpolation),
    Model(&'a ModelSpec),
}

impl Upscaler<'_> {
    pub fn upscale(&self, lr: &ImagePlane, scale: usize) -> ImagePlane {
        match self {
            Upscaler::Classical(method) => classical_upscale(lr, scale, *method),
            Upscaler::Model(model) => model_forward(lr, model),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Upscaler::Classical(method) => method.name().to_string(),
            Upscaler::Model(model) => model.metadata.get("name").cloned().unwrap_or_else(|| "model".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSource {
    Official,
    Generated,
}

impl fmt::Display for LrSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSource::Official => "official",
            LrSource::Generated => "generated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub lr_source: LrSource,
}

/// Model-only cost figures attached to a report.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    pub size_bytes: u64,
    pub ops: OpCounts,
    pub energy_pj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub method: String,
    pub scale: usize,
    pub images: Vec<ImageScore>,
    pub cost: Option<CostSummary>,
    /// Total forward time over the dataset, excluding I/O.
    pub forward_ms: f64,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        self.images.iter().map(|s| s.psnr).sum::<f64>() / self.images.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.images.iter().map(|s| s.ssim).sum::<f64>() / self.images.len() as f64
    }

    pub fn uses_generated_lr(&self) -> bool {
        self.images.iter().any(|s| s.lr_source == LrSource::Generated)
    }

    /// One `dataset image metric value` line per figure; dataset-level
    /// figures use the image name `mean`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let d = &self.dataset;
        for s in &self.images {
            let _ = writeln!(out, "{d} {} psnr {:.4}", s.name, s.psnr);
            let _ = writeln!(out, "{d} {} ssim {:.6}", s.name, s.ssim);
            let _ = writeln!(out, "{d} {} lr_source {}", s.name, s.lr_source);
        }
        let _ = writeln!(out, "{d} mean psnr {:.4}", self.mean_psnr());
        let _ = writeln!(out, "{d} mean ssim {:.6}", self.mean_ssim());
        let _ = writeln!(out, "{d} mean forward_ms {:.3}", self.forward_ms);
        if let Some(c) = &self.cost {
            let _ = writeln!(out, "{d} mean size_bytes {}", c.size_bytes);
            let _ = writeln!(out, "{d} mean lookups {}", c.ops.lookups);
            let _ = writeln!(out, "{d} mean integer_ops {}", c.ops.integer_ops());
            let _ = writeln!(out, "{d} mean float_ops {}", c.ops.float_ops());
            let _ = writeln!(out, "{d} mean energy_pj {:.1}", c.energy_pj);
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} x{} {}", self.dataset, self.scale, self.method)?;
        if self.uses_generated_lr() {
            writeln!(f, "warning: some LR inputs were generated, scores are not comparable to published figures")?;
        }
        for s in &self.images {
            writeln!(f, "  {:<20} {:>8.4} dB  {:.6}  ({} LR)", s.name, s.psnr, s.ssim, s.lr_source)?;
        }
        writeln!(f, "  {:<20} {:>8.4} dB  {:.6}", "mean", self.mean_psnr(), self.mean_ssim())?;
        writeln!(f, "  forward {:.3} ms total", self.forward_ms)?;
        if let Some(c) = &self.cost {
            writeln!(f, "  size {} ({} B)", crate::model::ByteSize(c.size_bytes), c.size_bytes)?;
            writeln!(
                f,
                "  ops: {} lookups, {} integer, {} float; energy {:.1} pJ per image",
                c.ops.lookups,
                c.ops.integer_ops(),
                c.ops.float_ops(),
                c.energy_pj
            )?;
        }
        Ok(())
    }
}

/// Crops the bottom and right edges to a multiple of `scale`.
pub fn modcrop(img: &Image, scale: usize) -> Image {
    let (h, w) = img.dims();
    let (h, w) = (h - h % scale, w - w % scale);
    img.map_planes(|p| Ok::<_, std::convert::Infallible>(p.crop(0, 0, h, w))).expect("infallible")
}

/// Luma for RGB, the plane itself for grayscale.
pub fn luma_plane(img: &Image) -> ImagePlane {
    match img {
        Image::Gray(p) => p.clone(),
        Image::Rgb(c) => to_luma(c),
    }
}

/// Scores one HR/LR pair. Returns the score and the forward time in ms.
pub fn evaluate_pair(
    name: &str,
    hr: &Image,
    lr: Option<&Image>,
    scale: usize,
    upscaler: &Upscaler,
) -> Result<(ImageScore, f64), EvalError> {
    let hr = modcrop(hr, scale);
    let (lr, lr_source) = match lr {
        Some(lr) => (lr.clone(), LrSource::Official),
        None => (
            hr.map_planes(|p| Ok::<_, std::convert::Infallible>(make_lr(p, scale))).expect("infallible"),
            LrSource::Generated,
        ),
    };
    let start = Instant::now();
    let sr = lr.map_planes(|p| Ok::<_, std::convert::Infallible>(upscaler.upscale(p, scale))).expect("infallible");
    let forward_ms = start.elapsed().as_secs_f64() * 1e3;
    let (h, w) = hr.dims();
    let (sh, sw) = sr.dims();
    let (h, w) = (h.min(sh), w.min(sw));
    let hr_y = luma_plane(&hr).crop(0, 0, h, w);
    let sr_y = luma_plane(&sr).crop(0, 0, h, w);
    let metric = |source| EvalError::Metric { image: name.to_string(), source };
    let score = ImageScore {
        name: name.to_string(),
        psnr: psnr(&sr_y, &hr_y, scale).map_err(metric)?,
        ssim: ssim(&sr_y, &hr_y, scale).map_err(metric)?,
        lr_source,
    };
    Ok((score, forward_ms))
}

/// Evaluates every record of an indexed dataset.
pub fn evaluate(index: &DatasetIndex, upscaler: &Upscaler) -> Result<EvalReport, EvalError> {
    let scale = index.records.first().map_or(1, |r| r.scale);
    if let Upscaler::Model(m) = upscaler {
        if m.total_upscale() != scale {
            return Err(EvalError::ScaleMismatch { model: m.total_upscale(), dataset: scale });
        }
    }
    let mut images = Vec::with_capacity(index.records.len());
    let mut forward_ms = 0.0;
    for record in &index.records {
        let hr = read_png(&record.hr)?;
        let lr = match &record.lr {
            Some(path) => {
                let lr = read_png(path)?;
                check_pair_dims(path, hr.dims(), lr.dims(), scale)?;
                Some(lr)
            }
            None => None,
        };
        let (score, ms) = evaluate_pair(&record.name, &hr, lr.as_ref(), scale, upscaler)?;
        images.push(score);
        forward_ms += ms;
    }
    Ok(EvalReport { dataset: index.name.clone(), method: upscaler.name(), scale, images, cost: None, forward_ms })
}
