//! Command-line front end: argument definitions and command bodies.
//!
//! Commands write their human-readable output to the supplied writer and
//! return an error for any failure, which `main` turns into a nonzero exit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use hklut::dataset::{index_dataset, read_png, write_png, Layout};
use hklut::energy::{estimate_ops, EnergyCosts};
use hklut::eval::{evaluate, CostSummary, Upscaler};
use hklut::format::{inspect, load_model_file, save_model_file};
use hklut::metrics::{rgb_to_ycbcr, ycbcr_to_rgb};
use hklut::model::{ByteSize, LutTable, ModelError, ModelLayout, ModelSpec, ResidualMode, StorageSize};
use hklut::oracle::{build_lut_from_function, fixtures};
use hklut::{classical_upscale, model_forward, Image, ImagePlane, Interpolation, RgbImage};

pub mod verify;

#[derive(Debug, Parser)]
#[command(name = "hklut", version, about = "Integer-only lookup-table super-resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upscale PNG images with a model.
    Upscale(UpscaleArgs),
    /// Score a model or a classical method on a benchmark dataset.
    Eval(EvalArgs),
    /// Print the table storage of a model file or layout.
    Size(SizeArgs),
    /// Check a model against the reference implementation and invariants.
    Verify(VerifyArgs),
    /// Write a model file with fabricated tables.
    MakeRefLut(MakeRefLutArgs),
    /// Time the forward pass.
    Bench(BenchArgs),
    /// Describe the contents of a model file.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Channels {
    /// Every RGB channel goes through the model.
    Rgb,
    /// Only luma goes through the model; chroma follows the residual mode.
    Y,
}

#[derive(Debug, Args)]
pub struct UpscaleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory; files keep their input names.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Channels::Rgb)]
    pub channels: Channels,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "method", required_unless_present = "method")]
    pub model: Option<PathBuf>,
    /// Classical baseline instead of a model.
    #[arg(long)]
    pub method: Option<Interpolation>,
    /// Directory holding the datasets.
    #[arg(long, env = "HKLUT_DATASETS", default_value = "datasets")]
    pub root: PathBuf,
    #[arg(long, default_value = "Set5")]
    pub dataset: String,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// Also write `dataset image metric value` lines here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// TOML file overriding the per-operation energy costs.
    #[arg(long)]
    pub energy_config: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[arg(required_unless_present = "layout")]
    pub model: Option<PathBuf>,
    /// Layout such as `hklut-s`, `hklut-l` or `2x1x2` instead of a file.
    #[arg(long, conflicts_with = "model")]
    pub layout: Option<ModelLayout>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(required_unless_present = "random")]
    pub model: Option<PathBuf>,
    /// Verify this many freshly generated random models instead.
    #[arg(long, conflicts_with = "model")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random test images per model.
    #[arg(long, default_value_t = 8)]
    pub images: usize,
}

#[derive(Debug, Args)]
pub struct MakeRefLutArgs {
    /// `zero`, `constant:C`, `diff`, `gradient` or `random:SEED`.
    #[arg(long)]
    pub kind: TableKind,
    #[arg(long, default_value = "hklut-s")]
    pub layout: ModelLayout,
    #[arg(long, default_value_t = ResidualMode::Nearest)]
    pub residual: ResidualMode,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub model: PathBuf,
    /// Input height; the output is scaled by the model.
    #[arg(long, default_value_t = 360)]
    pub height: usize,
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Timing uses a single worker unless told otherwise.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub model: PathBuf,
}

/// Table contents for `make-ref-lut`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Zero,
    Constant(i8),
    Diff,
    Gradient,
    Random(u64),
}

impl std::str::FromStr for TableKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        match (head, arg) {
            ("zero", None) => Ok(TableKind::Zero),
            ("diff", None) => Ok(TableKind::Diff),
            ("gradient", None) => Ok(TableKind::Gradient),
            ("constant", Some(c)) => match c.parse::<i8>() {
                Ok(c) if c > i8::MIN => Ok(TableKind::Constant(c)),
                _ => Err(format!("constant must be in [-127, 127], got `{c}`")),
            },
            ("random", Some(seed)) => seed.parse().map(TableKind::Random).map_err(|e| format!("bad seed: {e}")),
            _ => Err(format!("unknown table kind `{s}`")),
        }
    }
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    match cli.command {
        Command::Upscale(a) => with_threads(a.threads, || cmd_upscale(&a, out)),
        Command::Eval(a) => with_threads(a.threads, || cmd_eval(&a, out)),
        Command::Size(a) => cmd_size(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::MakeRefLut(a) => cmd_make_ref_lut(&a, out),
        Command::Bench(a) => with_threads(Some(a.threads), || cmd_bench(&a, out)),
        Command::Inspect(a) => cmd_inspect(&a, out),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building thread pool")?.install(f),
    }
}

fn load(path: &Path) -> Result<ModelSpec> {
    load_model_file(path).with_context(|| format!("loading {}", path.display()))
}

/// Applies `model` to an image with the given channel policy.
pub fn upscale_image(img: &Image, model: &ModelSpec, channels: Channels) -> Image {
    match (img, channels) {
        (Image::Gray(p), _) => Image::Gray(model_forward(p, model)),
        (Image::Rgb(c), Channels::Rgb) => {
            let [r, g, b] = c.planes();
            Image::Rgb(RgbImage::from_planes(&[
                model_forward(&r, model),
                model_forward(&g, model),
                model_forward(&b, model),
            ]))
        }
        (Image::Rgb(c), Channels::Y) => {
            let [y, cb, cr] = rgb_to_ycbcr(c);
            let method = model.stages().first().map_or(Interpolation::Nearest, |s| s.residual().into());
            let r = model.total_upscale();
            let chroma = |p: &ImagePlane| classical_upscale(p, r, method);
            Image::Rgb(ycbcr_to_rgb(&[model_forward(&y, model), chroma(&cb), chroma(&cr)]))
        }
    }
}

fn cmd_upscale(a: &UpscaleArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let model = load(&a.model)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for input in &a.inputs {
        let img = read_png(input)?;
        let sr = upscale_image(&img, &model, a.channels);
        let name = input.file_name().with_context(|| format!("{} has no file name", input.display()))?;
        let dest = a.out.join(name);
        write_png(&sr, &dest)?;
        let (h, w) = sr.dims();
        writeln!(out, "{} -> {} ({w}x{h})", input.display(), dest.display())?;
    }
    Ok(())
}

fn load_costs(path: Option<&Path>) -> Result<EnergyCosts> {
    match path {
        None => Ok(EnergyCosts::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let costs = load_costs(a.energy_config.as_deref())?;
    let dir = a.root.join(&a.dataset);
    if !dir.is_dir() {
        bail!("dataset directory {} not found (set --root or HKLUT_DATASETS)", dir.display());
    }
    let index = index_dataset(&dir, a.scale, &Layout::default())?;
    let model = a.model.as_deref().map(load).transpose()?;
    let upscaler = match (&model, a.method) {
        (Some(m), _) => Upscaler::Model(m),
        (None, Some(method)) => Upscaler::Classical(method),
        (None, None) => bail!("either --model or --method is required"),
    };
    let mut report = evaluate(&index, &upscaler)?;
    if let Some(m) = &model {
        // Costs are quoted for one output at the size of the first HR image.
        let (h, w) = read_png(&index.records[0].hr)?.dims();
        let s = m.total_upscale();
        let ops = estimate_ops(m, h - h % s, w - w % s)?;
        report.cost = Some(CostSummary { size_bytes: m.size_bytes(), ops, energy_pj: ops.energy_pj(&costs) });
    }
    write!(out, "{report}")?;
    if let Some(path) = &a.report {
        fs::write(path, report.to_key_values()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_size(a: &SizeArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let bytes = match (&a.model, &a.layout) {
        (Some(path), _) => load(path)?.size_bytes(),
        (None, Some(layout)) => layout.size_bytes(),
        (None, None) => bail!("a model path or --layout is required"),
    };
    writeln!(out, "{} ({bytes} B)", ByteSize(bytes))?;
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let models: Vec<(String, ModelSpec)> = match (&a.model, a.random) {
        (Some(path), _) => vec![(path.display().to_string(), load(path)?)],
        (None, Some(n)) => (0..n)
            .map(|i| {
                let (name, layout) = verify::random_layout(i);
                Ok((format!("random #{i} ({name})"), layout.random(&mut rng)?))
            })
            .collect::<Result<_, ModelError>>()?,
        (None, None) => bail!("a model path or --random is required"),
    };
    let mut failed = 0;
    for (name, model) in &models {
        let images = verify::test_images(&mut rng, a.images);
        let report = verify::verify_model(model, &images);
        writeln!(out, "{name}:")?;
        write!(out, "{report}")?;
        if !report.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} of {} models failed verification", models.len());
    }
    writeln!(out, "all {} models passed", models.len())?;
    Ok(())
}

/// Builds a model of the given layout whose tables come from `kind`.
pub fn make_reference_model(kind: TableKind, layout: &ModelLayout) -> Result<ModelSpec> {
    let model = match kind {
        TableKind::Zero => layout.zeros()?,
        TableKind::Constant(c) => layout.constant(c)?,
        TableKind::Random(seed) => layout.random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))?,
        TableKind::Diff | TableKind::Gradient => {
            let mut failure = None;
            let model = layout.build(|_, p, v, r| {
                let built = if kind == TableKind::Diff {
                    build_lut_from_function(fixtures::difference(r), v, p.len(), r)
                } else {
                    build_lut_from_function(fixtures::gradient(r), v, p.len(), r)
                };
                built.or_else(|e| {
                    failure = Some(e);
                    LutTable::zeros(v, p.len(), r)
                })
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            model
        }
    };
    Ok(model)
}

fn cmd_make_ref_lut(a: &MakeRefLutArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let layout = a.layout.clone().with_residual(a.residual);
    let label = match a.kind {
        TableKind::Zero => "zero".to_string(),
        TableKind::Constant(c) => format!("constant:{c}"),
        TableKind::Diff => "diff".to_string(),
        TableKind::Gradient => "gradient".to_string(),
        TableKind::Random(s) => format!("random:{s}"),
    };
    let model = make_reference_model(a.kind, &layout)?.with_metadata("kind", &label);
    let written = save_model_file(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(
        out,
        "wrote {} ({written} B on disk, tables {} = {} B)",
        a.out.display(),
        ByteSize(model.size_bytes()),
        model.size_bytes()
    )?;
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    if a.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    if a.height == 0 || a.width == 0 {
        bail!("input dimensions must be positive");
    }
    let model = load(&a.model)?;
    let stats = hklut::bench::bench_runtime(&model, a.height, a.width, a.repeats, a.seed);
    let s = model.total_upscale();
    writeln!(
        out,
        "{}x{} -> {}x{}, {} runs on {} thread(s): {:.3} ± {:.3} ms",
        a.width,
        a.height,
        a.width * s,
        a.height * s,
        a.repeats,
        rayon::current_num_threads(),
        stats.mean_ms,
        stats.std_ms
    )?;
    Ok(())
}

fn cmd_inspect(a: &InspectArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let model = load(&a.model)?;
    writeln!(out, "{}", inspect(&model))?;
    Ok(())
}
