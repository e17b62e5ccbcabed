//! Kernels, tables, branches, stages and whole models, plus storage accounting.
//!
//! A model is an ordered list of stages. Every stage splits its 8-bit input
//! into a most-significant and a least-significant nibble plane, runs one
//! branch of lookup tables over each plane, and adds both corrections to an
//! upsampled copy of the stage input. Each table is indexed by the pixels a
//! [`KernelPattern`] gathers around a pivot, and stores one `r × r` block of
//! signed residuals per possible input tuple.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Largest `|dy|` or `|dx|` a kernel offset may have (a 5×5 window).
pub const MAX_RADIUS: i32 = 2;
/// Largest number of pixels a kernel may gather.
pub const MAX_PIXELS: usize = 4;
/// Largest magnitude of a stored residual entry.
pub const ENTRY_LIMIT: i8 = 127;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown kernel pattern `{0}`")]
    UnknownPattern(String),
    #[error("kernel must gather between 1 and {MAX_PIXELS} pixels, got {0}")]
    PixelCount(usize),
    #[error("first kernel offset must be the pivot (0, 0), got ({0}, {1})")]
    PivotNotFirst(i32, i32),
    #[error("kernel offset ({0}, {1}) appears twice")]
    DuplicateOffset(i32, i32),
    #[error("kernel offset ({0}, {1}) leaves the 5x5 window")]
    OffsetOutOfWindow(i32, i32),
    #[error("rotation count must be 1, 2 or 4, got {0}")]
    Rotations(u8),
    #[error("table geometry invalid: v={v}, n={n}, r={r}")]
    TableGeometry { v: u16, n: usize, r: usize },
    #[error("table holds {actual} entries, expected {expected}")]
    TableLength { expected: usize, actual: usize },
    #[error("table entry {index} is {value}, outside [-127, 127]")]
    EntryRange { index: usize, value: i8 },
    #[error("kernel gathers {pattern} pixels but its table is indexed by {table}")]
    ArityMismatch { pattern: usize, table: usize },
    #[error("branch has no kernels")]
    EmptyBranch,
    #[error("branch mixes tables with different upscale or level counts")]
    MixedTables,
    #[error("branch mixes kernels with different rotation counts")]
    MixedRotations,
    #[error("stage upscale {stage} disagrees with branch tables (msb r={msb}, lsb r={lsb})")]
    StageUpscale { stage: usize, msb: usize, lsb: usize },
    #[error("stage tables have {0} levels, nibble planes need at least 16")]
    TooFewLevels(u16),
    #[error("unknown residual mode `{0}`")]
    UnknownResidual(String),
    #[error("invalid model layout `{0}`")]
    Layout(String),
}

/// Pixel offset `(dy, dx)` relative to the pivot.
pub type Offset = (i32, i32);

/// Maps an offset through `j` clockwise quarter turns, `(dy, dx) -> (dx, -dy)`.
#[inline]
pub fn rotate_offset((dy, dx): Offset, j: usize) -> Offset {
    match j % 4 {
        0 => (dy, dx),
        1 => (dx, -dy),
        2 => (-dy, -dx),
        _ => (-dx, dy),
    }
}

/// The built-in kernel shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BuiltinKernel {
    /// 2×2 square.
    S,
    /// Horizontal pair.
    H,
    /// Diagonal pair.
    D,
    /// Three-pixel L.
    L,
    /// Horizontal arm reaching two pixels.
    HdbA,
    /// Diagonal reaching two pixels.
    HdbB,
    /// Two knight-move neighbors.
    HdbC,
}

impl BuiltinKernel {
    pub const ALL: [BuiltinKernel; 7] = [
        BuiltinKernel::S,
        BuiltinKernel::H,
        BuiltinKernel::D,
        BuiltinKernel::L,
        BuiltinKernel::HdbA,
        BuiltinKernel::HdbB,
        BuiltinKernel::HdbC,
    ];

    /// Two-pixel kernels that tile a 3×3 window under rotation.
    pub const HD: [BuiltinKernel; 2] = [BuiltinKernel::H, BuiltinKernel::D];
    /// Three-pixel kernels that tile a 5×5 window under rotation.
    pub const HDB: [BuiltinKernel; 3] = [BuiltinKernel::HdbA, BuiltinKernel::HdbB, BuiltinKernel::HdbC];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKernel::S => "S",
            BuiltinKernel::H => "H",
            BuiltinKernel::D => "D",
            BuiltinKernel::L => "L",
            BuiltinKernel::HdbA => "HDB_A",
            BuiltinKernel::HdbB => "HDB_B",
            BuiltinKernel::HdbC => "HDB_C",
        }
    }

    pub fn offsets(self) -> &'static [Offset] {
        match self {
            BuiltinKernel::S => &[(0, 0), (0, 1), (1, 0), (1, 1)],
            BuiltinKernel::H => &[(0, 0), (0, 1)],
            BuiltinKernel::D => &[(0, 0), (1, 1)],
            BuiltinKernel::L => &[(0, 0), (0, 1), (1, 1)],
            BuiltinKernel::HdbA => &[(0, 0), (0, 1), (0, 2)],
            BuiltinKernel::HdbB => &[(0, 0), (1, 1), (2, 2)],
            BuiltinKernel::HdbC => &[(0, 0), (1, 2), (2, 1)],
        }
    }

    pub fn pattern(self) -> KernelPattern {
        KernelPattern { name: self.name().to_owned(), offsets: self.offsets().to_vec(), rotations: 4 }
    }

    fn from_offsets(offsets: &[Offset]) -> Option<BuiltinKernel> {
        Self::ALL.into_iter().find(|k| k.offsets() == offsets)
    }
}

impl FromStr for BuiltinKernel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownPattern(s.to_owned()))
    }
}

impl fmt::Display for BuiltinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered set of pixel offsets, pivot first, that index one lookup table.
///
/// The name is derived from the offsets: built-in shapes carry their
/// canonical name and anything else is called `custom`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelPattern {
    name: String,
    offsets: Vec<Offset>,
    rotations: u8,
}

impl KernelPattern {
    pub fn new(offsets: Vec<Offset>, rotations: u8) -> Result<Self, ModelError> {
        if offsets.is_empty() || offsets.len() > MAX_PIXELS {
            return Err(ModelError::PixelCount(offsets.len()));
        }
        if offsets[0] != (0, 0) {
            return Err(ModelError::PivotNotFirst(offsets[0].0, offsets[0].1));
        }
        for (i, &(dy, dx)) in offsets.iter().enumerate() {
            if dy.abs() > MAX_RADIUS || dx.abs() > MAX_RADIUS {
                return Err(ModelError::OffsetOutOfWindow(dy, dx));
            }
            if offsets[..i].contains(&(dy, dx)) {
                return Err(ModelError::DuplicateOffset(dy, dx));
            }
        }
        if !matches!(rotations, 1 | 2 | 4) {
            return Err(ModelError::Rotations(rotations));
        }
        let name = match BuiltinKernel::from_offsets(&offsets) {
            Some(k) => k.name().to_owned(),
            None => "custom".to_owned(),
        };
        Ok(KernelPattern { name, offsets, rotations })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    /// Number of gathered pixels `n`.
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Number of rotations `M` averaged by the ensemble.
    pub fn rotations(&self) -> u8 {
        self.rotations
    }

    /// Chebyshev radius of the pattern.
    pub fn radius(&self) -> i32 {
        self.offsets.iter().map(|&(dy, dx)| dy.abs().max(dx.abs())).max().unwrap_or(0)
    }

    /// The pattern after `j` clockwise quarter turns about the pivot.
    pub fn rotated(&self, j: usize) -> KernelPattern {
        let offsets: Vec<Offset> = self.offsets.iter().map(|&o| rotate_offset(o, j)).collect();
        let name = match BuiltinKernel::from_offsets(&offsets) {
            Some(k) => k.name().to_owned(),
            None if j.is_multiple_of(4) => self.name.clone(),
            None => "custom".to_owned(),
        };
        KernelPattern { name, offsets, rotations: self.rotations }
    }
}

/// Canonical pattern for a built-in kernel name (`S`, `H`, `D`, `L`, `HDB_A`, `HDB_B`, `HDB_C`).
pub fn builtin_pattern(name: &str) -> Result<KernelPattern, ModelError> {
    Ok(name.parse::<BuiltinKernel>()?.pattern())
}

/// `p` rotated `j` quarter turns clockwise.
pub fn rotate_pattern(p: &KernelPattern, j: usize) -> KernelPattern {
    p.rotated(j)
}

/// Number of bytes a table with `v` levels, `n` inputs and upscale `r` occupies.
pub fn table_size_bytes(v: u16, n: usize, r: usize) -> u64 {
    (v as u64).pow(n as u32) * (r as u64) * (r as u64)
}

/// Cached mapping from every `n`-tuple over `v` levels to an `r × r` residual block.
///
/// Entries are stored entry-major, then row-major inside each block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LutTable {
    v: u16,
    n: usize,
    r: usize,
    entries: Vec<i8>,
}

impl LutTable {
    pub fn new(v: u16, n: usize, r: usize, entries: Vec<i8>) -> Result<Self, ModelError> {
        Self::check_geometry(v, n, r)?;
        let expected = table_size_bytes(v, n, r) as usize;
        if entries.len() != expected {
            return Err(ModelError::TableLength { expected, actual: entries.len() });
        }
        if let Some(index) = entries.iter().position(|&e| e < -ENTRY_LIMIT) {
            return Err(ModelError::EntryRange { index, value: entries[index] });
        }
        Ok(LutTable { v, n, r, entries })
    }

    pub fn zeros(v: u16, n: usize, r: usize) -> Result<Self, ModelError> {
        Self::filled(v, n, r, 0)
    }

    pub fn filled(v: u16, n: usize, r: usize, value: i8) -> Result<Self, ModelError> {
        Self::check_geometry(v, n, r)?;
        Self::new(v, n, r, vec![value; table_size_bytes(v, n, r) as usize])
    }

    /// Table with entries drawn uniformly from `[-127, 127]`.
    pub fn random<R: Rng + ?Sized>(v: u16, n: usize, r: usize, rng: &mut R) -> Result<Self, ModelError> {
        Self::check_geometry(v, n, r)?;
        let entries = (0..table_size_bytes(v, n, r)).map(|_| rng.gen_range(-ENTRY_LIMIT..=ENTRY_LIMIT)).collect();
        Self::new(v, n, r, entries)
    }

    fn check_geometry(v: u16, n: usize, r: usize) -> Result<(), ModelError> {
        if v == 0 || v > 255 || n == 0 || n > MAX_PIXELS || r == 0 || r > 255 {
            return Err(ModelError::TableGeometry { v, n, r });
        }
        Ok(())
    }

    /// Quantization levels per input.
    pub fn levels(&self) -> u16 {
        self.v
    }

    /// Number of inputs indexing the table.
    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn upscale(&self) -> usize {
        self.r
    }

    /// Number of `r × r` blocks, `v^n`.
    pub fn block_count(&self) -> usize {
        (self.v as usize).pow(self.n as u32)
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Mutable access for fixture generation; callers must keep entries in `[-127, 127]`.
    pub fn entries_mut(&mut self) -> &mut [i8] {
        &mut self.entries
    }

    /// The row-major `r × r` block stored at `index`.
    pub fn block(&self, index: usize) -> &[i8] {
        let len = self.r * self.r;
        &self.entries[index * len..(index + 1) * len]
    }

    /// Re-checks the entry range invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self.entries.iter().position(|&e| e < -ENTRY_LIMIT) {
            Some(index) => Err(ModelError::EntryRange { index, value: self.entries[index] }),
            None => Ok(()),
        }
    }
}

/// One nibble branch: a set of kernels, each with its table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchSpec {
    kernels: Vec<(KernelPattern, LutTable)>,
}

impl BranchSpec {
    pub fn new(kernels: Vec<(KernelPattern, LutTable)>) -> Result<Self, ModelError> {
        let Some((first_pattern, first_table)) = kernels.first() else {
            return Err(ModelError::EmptyBranch);
        };
        for (pattern, table) in &kernels {
            if pattern.len() != table.arity() {
                return Err(ModelError::ArityMismatch { pattern: pattern.len(), table: table.arity() });
            }
            if table.upscale() != first_table.upscale() || table.levels() != first_table.levels() {
                return Err(ModelError::MixedTables);
            }
            if pattern.rotations() != first_pattern.rotations() {
                return Err(ModelError::MixedRotations);
            }
        }
        Ok(BranchSpec { kernels })
    }

    pub fn kernels(&self) -> &[(KernelPattern, LutTable)] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> impl Iterator<Item = &mut LutTable> {
        self.kernels.iter_mut().map(|(_, t)| t)
    }

    pub fn upscale(&self) -> usize {
        self.kernels[0].1.upscale()
    }

    pub fn levels(&self) -> u16 {
        self.kernels[0].1.levels()
    }

    /// Shared rotation count of the branch's kernels.
    pub fn rotations(&self) -> u8 {
        self.kernels[0].0.rotations()
    }

    /// `N · M`, the number of table reads averaged per pixel.
    pub fn divisor(&self) -> i32 {
        self.kernels.len() as i32 * self.rotations() as i32
    }
}

/// Interpolation used for the per-stage residual connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ResidualMode {
    #[default]
    Nearest,
    Bilinear,
    Bicubic,
}

impl ResidualMode {
    pub fn code(self) -> u8 {
        match self {
            ResidualMode::Nearest => 0,
            ResidualMode::Bilinear => 1,
            ResidualMode::Bicubic => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ResidualMode::Nearest),
            1 => Some(ResidualMode::Bilinear),
            2 => Some(ResidualMode::Bicubic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResidualMode::Nearest => "nearest",
            ResidualMode::Bilinear => "bilinear",
            ResidualMode::Bicubic => "bicubic",
        }
    }
}

impl FromStr for ResidualMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(ResidualMode::Nearest),
            "bilinear" => Ok(ResidualMode::Bilinear),
            "bicubic" => Ok(ResidualMode::Bicubic),
            _ => Err(ModelError::UnknownResidual(s.to_owned())),
        }
    }
}

impl fmt::Display for ResidualMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which nibble a branch consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Msb,
    Lsb,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Msb, Branch::Lsb];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Msb => "msb",
            Branch::Lsb => "lsb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StageSpec {
    msb: BranchSpec,
    lsb: BranchSpec,
    upscale: usize,
    residual: ResidualMode,
}

impl StageSpec {
    pub fn new(msb: BranchSpec, lsb: BranchSpec, residual: ResidualMode) -> Result<Self, ModelError> {
        let upscale = msb.upscale();
        for branch in [&msb, &lsb] {
            if branch.levels() < 16 {
                return Err(ModelError::TooFewLevels(branch.levels()));
            }
        }
        if lsb.upscale() != upscale {
            return Err(ModelError::StageUpscale { stage: upscale, msb: msb.upscale(), lsb: lsb.upscale() });
        }
        Ok(StageSpec { msb, lsb, upscale, residual })
    }

    pub fn msb(&self) -> &BranchSpec {
        &self.msb
    }

    pub fn lsb(&self) -> &BranchSpec {
        &self.lsb
    }

    pub fn branch(&self, which: Branch) -> &BranchSpec {
        match which {
            Branch::Msb => &self.msb,
            Branch::Lsb => &self.lsb,
        }
    }

    pub fn branch_mut(&mut self, which: Branch) -> &mut BranchSpec {
        match which {
            Branch::Msb => &mut self.msb,
            Branch::Lsb => &mut self.lsb,
        }
    }

    pub fn upscale(&self) -> usize {
        self.upscale
    }

    pub fn residual(&self) -> ResidualMode {
        self.residual
    }
}

/// A complete serializable model.
///
/// Metadata is free-form and carries no semantics; it does not take part in
/// equality.
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    stages: Vec<StageSpec>,
    pub metadata: BTreeMap<String, String>,
}

impl PartialEq for ModelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.stages == other.stages
    }
}

impl Eq for ModelSpec {}

impl ModelSpec {
    pub fn new(stages: Vec<StageSpec>) -> Self {
        ModelSpec { stages, metadata: BTreeMap::new() }
    }

    pub fn with_metadata(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.to_owned(), value.to_owned());
        self
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [StageSpec] {
        &mut self.stages
    }

    /// Product of the stage upscales.
    pub fn total_upscale(&self) -> usize {
        self.stages.iter().map(StageSpec::upscale).product()
    }

    /// Iterates over every table with its `(stage, branch, kernel)` location.
    pub fn tables(&self) -> impl Iterator<Item = ((usize, Branch, usize), &KernelPattern, &LutTable)> {
        self.stages.iter().enumerate().flat_map(|(s, stage)| {
            Branch::BOTH.into_iter().flat_map(move |b| {
                stage.branch(b).kernels().iter().enumerate().map(move |(k, (p, t))| ((s, b, k), p, t))
            })
        })
    }

    /// Same shape with every entry set to zero.
    pub fn zeroed(&self) -> ModelSpec {
        let mut m = self.clone();
        for stage in &mut m.stages {
            for b in Branch::BOTH {
                for table in stage.branch_mut(b).kernels_mut() {
                    table.entries_mut().fill(0);
                }
            }
        }
        m
    }
}

/// Storage accounting: one byte per table entry.
pub trait StorageSize {
    fn size_bytes(&self) -> u64;
}

impl StorageSize for LutTable {
    fn size_bytes(&self) -> u64 {
        table_size_bytes(self.v, self.n, self.r)
    }
}

impl StorageSize for BranchSpec {
    fn size_bytes(&self) -> u64 {
        self.kernels.iter().map(|(_, t)| t.size_bytes()).sum()
    }
}

impl StorageSize for StageSpec {
    fn size_bytes(&self) -> u64 {
        self.msb.size_bytes() + self.lsb.size_bytes()
    }
}

impl StorageSize for ModelSpec {
    fn size_bytes(&self) -> u64 {
        self.stages.iter().map(StorageSize::size_bytes).sum()
    }
}

/// Bytes of table storage held by a table, branch, stage or model.
pub fn lut_size_bytes<T: StorageSize + ?Sized>(item: &T) -> u64 {
    item.size_bytes()
}

/// Byte count rendered in binary units (1 KB = 1024 B).
///
/// The default precision is one decimal; `{:.2}` selects two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ByteSize(pub u64);

impl fmt::Display for ByteSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const UNITS: [&str; 3] = ["KB", "MB", "GB"];
        if self.0 < 1024 {
            return write!(f, "{} B", self.0);
        }
        let mut value = self.0 as f64 / 1024.0;
        let mut unit = 0;
        while value >= 1024.0 && unit + 1 < UNITS.len() {
            value /= 1024.0;
            unit += 1;
        }
        let precision = f.precision().unwrap_or(1);
        write!(f, "{:.*} {}", precision, value, UNITS[unit])
    }
}

/// Shape of one stage: kernels per branch and the upscale factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLayout {
    pub upscale: usize,
    pub msb: Vec<KernelPattern>,
    pub lsb: Vec<KernelPattern>,
    pub residual: ResidualMode,
}

/// Shape of a whole model, without table contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelLayout {
    pub levels: u16,
    pub stages: Vec<StageLayout>,
}

impl ModelLayout {
    /// Asymmetric stages (three-pixel kernels on the MSB plane, two-pixel
    /// kernels on the LSB plane) with the given upscale per stage.
    pub fn progressive(upscales: &[usize]) -> ModelLayout {
        Self::with_branches(upscales, &BuiltinKernel::HDB, &BuiltinKernel::HD)
    }

    pub fn with_branches(upscales: &[usize], msb: &[BuiltinKernel], lsb: &[BuiltinKernel]) -> ModelLayout {
        let stages = upscales
            .iter()
            .map(|&upscale| StageLayout {
                upscale,
                msb: msb.iter().map(|k| k.pattern()).collect(),
                lsb: lsb.iter().map(|k| k.pattern()).collect(),
                residual: ResidualMode::Nearest,
            })
            .collect();
        ModelLayout { levels: 16, stages }
    }

    /// Two ×2 stages (100 KB of tables).
    pub fn hklut_s() -> ModelLayout {
        Self::progressive(&[2, 2])
    }

    /// ×2, ×1, ×2 stages (112.5 KB of tables).
    pub fn hklut_l() -> ModelLayout {
        Self::progressive(&[2, 1, 2])
    }

    pub fn with_residual(mut self, residual: ResidualMode) -> ModelLayout {
        for stage in &mut self.stages {
            stage.residual = residual;
        }
        self
    }

    pub fn total_upscale(&self) -> usize {
        self.stages.iter().map(|s| s.upscale).product()
    }

    /// Table bytes the layout will occupy once built.
    pub fn size_bytes(&self) -> u64 {
        self.stages
            .iter()
            .flat_map(|s| s.msb.iter().chain(&s.lsb).map(move |p| table_size_bytes(self.levels, p.len(), s.upscale)))
            .sum()
    }

    /// Builds a model, asking `make` for each table given its location and pattern.
    pub fn build<F>(&self, mut make: F) -> Result<ModelSpec, ModelError>
    where
        F: FnMut((usize, Branch, usize), &KernelPattern, u16, usize) -> Result<LutTable, ModelError>,
    {
        let mut stages = Vec::with_capacity(self.stages.len());
        for (s, layout) in self.stages.iter().enumerate() {
            let mut branch = |which: Branch, patterns: &[KernelPattern]| -> Result<BranchSpec, ModelError> {
                let kernels = patterns
                    .iter()
                    .enumerate()
                    .map(|(k, p)| Ok((p.clone(), make((s, which, k), p, self.levels, layout.upscale)?)))
                    .collect::<Result<Vec<_>, ModelError>>()?;
                BranchSpec::new(kernels)
            };
            let msb = branch(Branch::Msb, &layout.msb)?;
            let lsb = branch(Branch::Lsb, &layout.lsb)?;
            stages.push(StageSpec::new(msb, lsb, layout.residual)?);
        }
        Ok(ModelSpec::new(stages))
    }

    pub fn zeros(&self) -> Result<ModelSpec, ModelError> {
        self.build(|_, p, v, r| LutTable::zeros(v, p.len(), r))
    }

    pub fn constant(&self, value: i8) -> Result<ModelSpec, ModelError> {
        self.build(|_, p, v, r| LutTable::filled(v, p.len(), r, value))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ModelSpec, ModelError> {
        self.build(|_, p, v, r| LutTable::random(v, p.len(), r, rng))
    }
}

impl FromStr for ModelLayout {
    type Err = ModelError;

    /// Accepts `hklut-s`, `hklut-l`, or an upscale factorization such as `2x1x2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hklut-s" | "s" => return Ok(ModelLayout::hklut_s()),
            "hklut-l" | "l" => return Ok(ModelLayout::hklut_l()),
            _ => {}
        }
        let upscales = s
            .split(['x', 'X', '*'])
            .map(|part| part.trim().parse::<usize>().ok().filter(|r| (1..=255).contains(r)))
            .collect::<Option<Vec<_>>>()
            .filter(|u| !u.is_empty() && u.len() <= 255)
            .ok_or_else(|| ModelError::Layout(s.to_owned()))?;
        Ok(ModelLayout::progressive(&upscales))
    }
}
