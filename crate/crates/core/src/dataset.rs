//! PNG input/output and benchmark dataset discovery.
//!
//! Datasets follow the common layout
//!
//! ```text
//! <root>/<name>/HR/*.png
//! <root>/<name>/LR_bicubic/X4/*.png
//! ```
//!
//! where an LR file is named either exactly like its HR partner or with an
//! `x{scale}` suffix on the stem (`baby.png` ↔ `babyx4.png`).

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::plane::{Image, ImagePlane, RgbImage};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed PNG: {source}")]
    Decode { path: PathBuf, source: png::DecodingError },
    #[error("{path}: cannot encode PNG: {source}")]
    Encode { path: PathBuf, source: png::EncodingError },
    #[error("{path}: unsupported PNG color layout {color:?}")]
    Color { path: PathBuf, color: png::ColorType },
    #[error("no HR images found under {0}")]
    Empty(PathBuf),
    #[error("no LR partner for {hr} in {lr_dir}")]
    MissingPartner { hr: PathBuf, lr_dir: PathBuf },
    #[error("unsupported scale {0}, expected 2 or 4")]
    Scale(usize),
    #[error("{lr}: LR size {lr_dims:?} does not match HR size {hr_dims:?} at scale {scale}")]
    DimPolicy { lr: PathBuf, lr_dims: (usize, usize), hr_dims: (usize, usize), scale: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_owned(), source }
}

/// Decodes a PNG to 8-bit samples: palettes and low bit depths are expanded,
/// 16-bit samples keep their high byte, alpha is dropped.
pub fn read_png(path: &Path) -> Result<Image, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let decode = |source| DatasetError::Decode { path: path.to_owned(), source };
    let mut reader = decoder.read_info().map_err(decode)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(decode)?;
    buf.truncate(info.buffer_size());
    let (h, w) = (info.height as usize, info.width as usize);
    let (color, _) = reader.output_color_type();
    let channels = color.samples();
    let pick = |keep: usize| -> Vec<u8> { buf.chunks_exact(channels).flat_map(|px| px[..keep].to_vec()).collect() };
    let bad = |_| DatasetError::Color { path: path.to_owned(), color };
    match color {
        png::ColorType::Grayscale => Ok(Image::Gray(ImagePlane::new(h, w, buf).map_err(bad)?)),
        png::ColorType::GrayscaleAlpha => Ok(Image::Gray(ImagePlane::new(h, w, pick(1)).map_err(bad)?)),
        png::ColorType::Rgb => Ok(Image::Rgb(RgbImage::new(h, w, buf).map_err(bad)?)),
        png::ColorType::Rgba => Ok(Image::Rgb(RgbImage::new(h, w, pick(3)).map_err(bad)?)),
        png::ColorType::Indexed => Err(DatasetError::Color { path: path.to_owned(), color }),
    }
}

/// Lossless 8-bit PNG encoding.
pub fn write_png(image: &Image, path: &Path) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let (h, w) = image.dims();
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    let data = match image {
        Image::Gray(p) => {
            encoder.set_color(png::ColorType::Grayscale);
            p.pixels()
        }
        Image::Rgb(c) => {
            encoder.set_color(png::ColorType::Rgb);
            c.data()
        }
    };
    encoder.set_depth(png::BitDepth::Eight);
    let encode = |source| DatasetError::Encode { path: path.to_owned(), source };
    let mut writer = encoder.write_header().map_err(encode)?;
    writer.write_image_data(data).map_err(encode)?;
    writer.finish().map_err(encode)
}

/// Directory names inside a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub hr_dir: String,
    /// LR directory with `{scale}` substituted.
    pub lr_dir: String,
}

impl Default for Layout {
    fn default() -> Self {
        Layout { hr_dir: "HR".into(), lr_dir: "LR_bicubic/X{scale}".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub name: String,
    pub hr: PathBuf,
    /// `None` when the dataset ships no LR directory for this scale.
    pub lr: Option<PathBuf>,
    pub scale: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub name: String,
    pub records: Vec<PairRecord>,
}

impl DatasetIndex {
    /// True when every record has an official LR file.
    pub fn has_official_lr(&self) -> bool {
        self.records.iter().all(|r| r.lr.is_some())
    }
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Pairs HR images with their LR partners, in lexicographic order.
///
/// A missing LR directory yields records without LR paths; an LR directory
/// that lacks some partner is an error.
pub fn index_dataset(dataset_dir: &Path, scale: usize, layout: &Layout) -> Result<DatasetIndex, DatasetError> {
    if scale != 2 && scale != 4 {
        return Err(DatasetError::Scale(scale));
    }
    let hr_dir = dataset_dir.join(&layout.hr_dir);
    let hr_files = if hr_dir.is_dir() { png_files(&hr_dir)? } else { Vec::new() };
    if hr_files.is_empty() {
        return Err(DatasetError::Empty(hr_dir));
    }
    let lr_dir = dataset_dir.join(layout.lr_dir.replace("{scale}", &scale.to_string()));
    let lr_present = lr_dir.is_dir();
    let mut records = Vec::with_capacity(hr_files.len());
    for hr in hr_files {
        let stem = hr.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let lr = if lr_present {
            let candidates = [
                lr_dir.join(hr.file_name().expect("file has a name")),
                lr_dir.join(format!("{stem}x{scale}.png")),
                lr_dir.join(format!("{stem}_x{scale}.png")),
            ];
            let found = candidates.into_iter().find(|c| c.is_file());
            Some(found.ok_or_else(|| DatasetError::MissingPartner { hr: hr.clone(), lr_dir: lr_dir.clone() })?)
        } else {
            None
        };
        records.push(PairRecord { name: stem, hr, lr, scale });
    }
    let name = dataset_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DatasetIndex { name, records })
}

/// LR sizes must be the floor or ceiling of the HR size over the scale.
pub fn check_pair_dims(
    lr: &Path,
    hr_dims: (usize, usize),
    lr_dims: (usize, usize),
    scale: usize,
) -> Result<(), DatasetError> {
    let ok = |hr: usize, lr: usize| lr == hr / scale || lr == hr.div_ceil(scale);
    if ok(hr_dims.0, lr_dims.0) && ok(hr_dims.1, lr_dims.1) && lr_dims.0 > 0 && lr_dims.1 > 0 {
        Ok(())
    } else {
        Err(DatasetError::DimPolicy { lr: lr.to_owned(), lr_dims, hr_dims, scale })
    }
}

pub use crate::resample::make_lr;
