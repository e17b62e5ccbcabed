//! The `.hklut` binary model format.
//!
//! ```text
//! "HKLT"  u8 version (=1)  u8 n_stages
//! per stage:
//!     u8 upscale  u8 residual (0 nearest, 1 bilinear, 2 bicubic)
//!     MSB branch, then LSB branch:
//!         u8 n_kernels
//!         per kernel:
//!             u8 n  u8 v  n × (i8 dy, i8 dx)  v^n × r² × i8 entries
//! ```
//!
//! There is no padding, and the declared lengths must consume the input
//! exactly. Every kernel is read back with four rotations. Free-form
//! metadata lives in an optional sidecar manifest next to the model file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{
    table_size_bytes, Branch, BranchSpec, ByteSize, KernelPattern, LutTable, ModelError, ModelSpec, ResidualMode,
    StageSpec, StorageSize,
};

pub const MAGIC: &[u8; 4] = b"HKLT";
pub const VERSION: u8 = 1;
/// Extension appended to a model path for its sidecar manifest.
pub const MANIFEST_SUFFIX: &str = ".manifest";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not an hklut file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("file truncated while reading {0}")]
    Truncated(String),
    #[error("{0} trailing bytes after the last stage")]
    TrailingBytes(usize),
    #[error("unknown residual mode code {code} in stage {stage}")]
    ResidualCode { stage: usize, code: u8 },
    #[error("invalid model at {location}")]
    Invalid { location: String, source: ModelError },
    #[error("model cannot be represented in the file format: {0}")]
    Unrepresentable(String),
    #[error("malformed manifest line {line}: {text}")]
    Manifest { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn location(stage: usize, branch: Branch, kernel: Option<usize>) -> String {
    match kernel {
        Some(k) => format!("stage {stage} {} kernel {k}", branch.name()),
        None => format!("stage {stage} {}", branch.name()),
    }
}

fn count_u8(value: usize, what: &str) -> Result<u8, FormatError> {
    u8::try_from(value).map_err(|_| FormatError::Unrepresentable(format!("{what} = {value} exceeds 255")))
}

/// Number of bytes `save_model` writes for `model`.
pub fn encoded_len(model: &ModelSpec) -> u64 {
    let header = 6u64;
    let stages: u64 = model
        .stages()
        .iter()
        .map(|s| {
            2 + Branch::BOTH
                .iter()
                .map(|&b| 1 + s.branch(b).kernels().iter().map(|(p, _)| 2 + 2 * p.len() as u64).sum::<u64>())
                .sum::<u64>()
        })
        .sum();
    header + stages + model.size_bytes()
}

/// Writes `model` and returns the number of bytes written.
pub fn save_model<W: Write>(model: &ModelSpec, mut sink: W) -> Result<u64, FormatError> {
    let mut written = 0u64;
    let mut put = |bytes: &[u8]| -> Result<(), FormatError> {
        sink.write_all(bytes)?;
        written += bytes.len() as u64;
        Ok(())
    };
    put(MAGIC)?;
    put(&[VERSION, count_u8(model.stages().len(), "stage count")?])?;
    for stage in model.stages() {
        put(&[count_u8(stage.upscale(), "upscale")?, stage.residual().code()])?;
        for b in Branch::BOTH {
            let branch = stage.branch(b);
            put(&[count_u8(branch.kernels().len(), "kernel count")?])?;
            for (pattern, table) in branch.kernels() {
                if pattern.rotations() != 4 {
                    return Err(FormatError::Unrepresentable(format!(
                        "kernel with {} rotations (only 4 is stored)",
                        pattern.rotations()
                    )));
                }
                put(&[pattern.len() as u8, count_u8(table.levels() as usize, "levels")?])?;
                for &(dy, dx) in pattern.offsets() {
                    put(&[dy as i8 as u8, dx as i8 as u8])?;
                }
                let raw: Vec<u8> = table.entries().iter().map(|&e| e as u8).collect();
                put(&raw)?;
            }
        }
    }
    Ok(written)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: impl FnOnce() -> String) -> Result<&'a [u8], FormatError> {
        if self.data.len() - self.pos < len {
            return Err(FormatError::Truncated(what()));
        }
        let out = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u8(&mut self, what: impl FnOnce() -> String) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }
}

/// Reads a model, validating every structural invariant.
pub fn load_model<R: Read>(mut source: R) -> Result<ModelSpec, FormatError> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data, pos: 0 };

    let magic = cur.take(4, || "magic".into())?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic.try_into().expect("4 bytes")));
    }
    let version = cur.u8(|| "version".into())?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let n_stages = cur.u8(|| "stage count".into())? as usize;
    let mut stages = Vec::with_capacity(n_stages);
    for s in 0..n_stages {
        let upscale = cur.u8(|| format!("stage {s} upscale"))? as usize;
        let code = cur.u8(|| format!("stage {s} residual mode"))?;
        let residual = ResidualMode::from_code(code).ok_or(FormatError::ResidualCode { stage: s, code })?;
        let mut branches = Vec::with_capacity(2);
        for b in Branch::BOTH {
            let n_kernels = cur.u8(|| format!("{} kernel count", location(s, b, None)))? as usize;
            let mut kernels = Vec::with_capacity(n_kernels);
            for k in 0..n_kernels {
                let at = || location(s, b, Some(k));
                let n = cur.u8(|| format!("{} arity", at()))? as usize;
                let v = cur.u8(|| format!("{} levels", at()))? as u16;
                let raw = cur.take(2 * n, || format!("{} offsets", at()))?;
                let offsets = raw.chunks(2).map(|c| (c[0] as i8 as i32, c[1] as i8 as i32)).collect();
                let invalid = |source| FormatError::Invalid { location: at(), source };
                let pattern = KernelPattern::new(offsets, 4).map_err(invalid)?;
                let len = table_size_bytes(v, n, upscale) as usize;
                let entries = cur.take(len, || format!("{} entries", at()))?;
                let table =
                    LutTable::new(v, n, upscale, entries.iter().map(|&e| e as i8).collect()).map_err(invalid)?;
                kernels.push((pattern, table));
            }
            let branch = BranchSpec::new(kernels)
                .map_err(|source| FormatError::Invalid { location: location(s, b, None), source })?;
            branches.push(branch);
        }
        let lsb = branches.pop().expect("two branches");
        let msb = branches.pop().expect("two branches");
        let stage = StageSpec::new(msb, lsb, residual)
            .map_err(|source| FormatError::Invalid { location: format!("stage {s}"), source })?;
        stages.push(stage);
    }
    if cur.pos != data.len() {
        return Err(FormatError::TrailingBytes(data.len() - cur.pos));
    }
    Ok(ModelSpec::new(stages))
}

/// Path of the sidecar manifest for a model file.
pub fn manifest_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.as_os_str().to_owned();
    name.push(MANIFEST_SUFFIX);
    PathBuf::from(name)
}

/// Writes `key = value` lines; the manifest carries no semantics.
pub fn write_manifest<W: Write>(metadata: &BTreeMap<String, String>, mut sink: W) -> io::Result<()> {
    for (k, v) in metadata {
        writeln!(sink, "{} = {}", k.trim(), v.replace('\n', " "))?;
    }
    Ok(())
}

pub fn read_manifest<R: Read>(source: R) -> Result<BTreeMap<String, String>, FormatError> {
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (k, v) =
            text.split_once('=').ok_or_else(|| FormatError::Manifest { line: i + 1, text: text.to_owned() })?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

/// Saves a model file plus, when metadata is present, its manifest.
pub fn save_model_file(model: &ModelSpec, path: &Path) -> Result<u64, FormatError> {
    let mut buf = Vec::with_capacity(encoded_len(model) as usize);
    let n = save_model(model, &mut buf)?;
    fs::write(path, &buf)?;
    if !model.metadata.is_empty() {
        write_manifest(&model.metadata, fs::File::create(manifest_path(path))?)?;
    }
    Ok(n)
}

/// Loads a model file and its manifest, if one exists.
pub fn load_model_file(path: &Path) -> Result<ModelSpec, FormatError> {
    let mut model = load_model(io::BufReader::new(fs::File::open(path)?))?;
    let manifest = manifest_path(path);
    if manifest.exists() {
        model.metadata = read_manifest(fs::File::open(manifest)?)?;
    }
    Ok(model)
}

/// Human-readable summary of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectReport {
    pub lines: Vec<String>,
    pub total_bytes: u64,
}

impl fmt::Display for InspectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        write!(f, "total {} ({} B)", ByteSize(self.total_bytes), self.total_bytes)
    }
}

pub fn inspect(model: &ModelSpec) -> InspectReport {
    let mut lines = Vec::new();
    for (k, v) in &model.metadata {
        lines.push(format!("{k}: {v}"));
    }
    lines.push(format!("stages: {}, total upscale x{}", model.stages().len(), model.total_upscale()));
    for (s, stage) in model.stages().iter().enumerate() {
        lines.push(format!(
            "stage {s}: x{} residual {} ({})",
            stage.upscale(),
            stage.residual(),
            ByteSize(stage.size_bytes())
        ));
        for b in Branch::BOTH {
            let branch = stage.branch(b);
            let names: Vec<&str> = branch.kernels().iter().map(|(p, _)| p.name()).collect();
            lines.push(format!(
                "  {}: {} kernels [{}] {}",
                b.name(),
                names.len(),
                names.join(", "),
                ByteSize(branch.size_bytes())
            ));
            for (p, t) in branch.kernels() {
                lines.push(format!(
                    "    {:<6} n={} v={} r={} {:>10} B {:?}",
                    p.name(),
                    t.arity(),
                    t.levels(),
                    t.upscale(),
                    t.size_bytes(),
                    p.offsets()
                ));
            }
        }
    }
    InspectReport { lines, total_bytes: model.size_bytes() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelLayout;
    use rand::SeedableRng;

    fn bytes(model: &ModelSpec) -> Vec<u8> {
        let mut buf = Vec::new();
        let n = save_model(model, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(encoded_len(model), n);
        buf
    }

    #[test]
    fn empty_model_is_header_only() {
        assert_eq!(bytes(&ModelSpec::default()), b"HKLT\x01\x00");
        assert_eq!(load_model(&b"HKLT\x01\x00"[..]).unwrap(), ModelSpec::default());
    }

    #[test]
    fn hklut_s_payload() {
        let m = ModelLayout::hklut_s().zeros().unwrap();
        let buf = bytes(&m);
        // Header 6, per stage 2 + 2 branch counts + 3·(2+6) + 2·(2+4) = 40.
        assert_eq!(buf.len(), 102_400 + 6 + 2 * 40);
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let m = ModelLayout::hklut_l().random(&mut rng).unwrap();
        let buf = bytes(&m);
        let back = load_model(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(bytes(&back), buf);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = bytes(&ModelSpec::default());
        buf[0] = b'X';
        assert!(matches!(load_model(&buf[..]), Err(FormatError::BadMagic(m)) if &m == b"XKLT"));
        assert!(matches!(load_model(&b"HKLT\x02\x00"[..]), Err(FormatError::UnsupportedVersion(2))));
        assert!(matches!(load_model(&b"HKL"[..]), Err(FormatError::Truncated(_))));
    }

    #[test]
    fn truncated_entries() {
        let m = ModelLayout::hklut_s().zeros().unwrap();
        let buf = bytes(&m);
        let err = load_model(&buf[..buf.len() - 1]).unwrap_err();
        match err {
            FormatError::Truncated(what) => assert_eq!(what, "stage 1 lsb kernel 1 entries"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn trailing_bytes() {
        let mut buf = bytes(&ModelSpec::default());
        buf.push(0);
        assert!(matches!(load_model(&buf[..]), Err(FormatError::TrailingBytes(1))));
    }

    #[test]
    fn invariant_violations_are_located() {
        let m = ModelLayout::hklut_s().zeros().unwrap();
        let mut buf = bytes(&m);
        // First entry of stage 0, MSB kernel 0: after header(6) + stage(2) + count(1) + n,v(2) + offsets(6).
        buf[17] = 0x80;
        match load_model(&buf[..]).unwrap_err() {
            FormatError::Invalid { location, source } => {
                assert_eq!(location, "stage 0 msb kernel 0");
                assert_eq!(source, ModelError::EntryRange { index: 0, value: -128 });
            }
            other => panic!("{other}"),
        }
        let mut buf = bytes(&m);
        buf[7] = 7;
        assert!(matches!(load_model(&buf[..]), Err(FormatError::ResidualCode { stage: 0, code: 7 })));
        let mut buf = bytes(&m);
        buf[11] = 1; // first offset no longer the pivot
        assert!(matches!(load_model(&buf[..]), Err(FormatError::Invalid { .. })));
    }

    #[test]
    fn rotation_counts_other_than_four_are_rejected() {
        let p = KernelPattern::new(vec![(0, 0), (0, 1)], 2).unwrap();
        let b = BranchSpec::new(vec![(p, LutTable::zeros(16, 2, 1).unwrap())]).unwrap();
        let m = ModelSpec::new(vec![StageSpec::new(b.clone(), b, ResidualMode::Nearest).unwrap()]);
        assert!(matches!(save_model(&m, Vec::new()), Err(FormatError::Unrepresentable(_))));
    }

    #[test]
    fn inspect_totals() {
        let s = inspect(&ModelLayout::hklut_s().zeros().unwrap()).to_string();
        assert!(s.ends_with("total 100.0 KB (102400 B)"), "{s}");
        assert!(inspect(&ModelSpec::default()).to_string().ends_with("total 0 B (0 B)"));
        let l = inspect(&ModelLayout::hklut_l().zeros().unwrap());
        assert_eq!(l.total_bytes, 115_200);
        assert!(l.to_string().contains("total 112.5 KB"));
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.hklut");
        let m =
            ModelLayout::hklut_s().zeros().unwrap().with_metadata("name", "zero").with_metadata("source", "fixture");
        save_model_file(&m, &path).unwrap();
        assert!(manifest_path(&path).exists());
        let back = load_model_file(&path).unwrap();
        assert_eq!(back.metadata, m.metadata);
        assert!(matches!(read_manifest(&b"oops"[..]), Err(FormatError::Manifest { line: 1, .. })));
    }
}
