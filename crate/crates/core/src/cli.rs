//! `covapix` command-line interface: segment → extract → fuse → render →
//! stats. Each subcommand is a thin composition of library calls.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::covapixel::{
    self, extract_covapixels, read_covapix, write_covapix, Covapixel, CovapixelError, CovapixelSet,
    FeatureSpace,
};
use crate::fusion::{fuse_reduce, FusionError, FusionOp, Objective};
use crate::imaging::{
    self, overlay_boundaries, quality_stats, read_ppm, render_ellipses, render_flat, rgb_to_lab,
    write_ppm, Background, ImageBuffer, ImagingError,
};
use crate::segmentation::{grid_segment, slic_segment, LabelMap, SegmentationError, SlicParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("segmentation: {0}")]
    Segmentation(#[from] SegmentationError),
    #[error("covapixel: {0}")]
    Covapixel(#[from] CovapixelError),
    #[error("fusion: {0}")]
    Fusion(#[from] FusionError),
    #[error("imaging: {0}")]
    Imaging(#[from] ImagingError),
    #[error("fuse: {0}")]
    Selection(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "covapix",
    version,
    about = "Covapixel image summaries and covariance fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition an image into superpixels or grid tiles.
    Segment(SegmentArgs),
    /// Summarize each labeled region as a covapixel.
    Extract(ExtractArgs),
    /// Replace a list of covapixels with their fused estimate.
    Fuse(FuseArgs),
    /// Render covapixels to a PPM image.
    Render(RenderArgs),
    /// Compare a reconstruction with its original.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Slic,
    Grid,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Target superpixel count (slic).
    #[arg(long)]
    k: Option<usize>,
    /// Tile size WxH (grid).
    #[arg(long, value_parser = parse_tile)]
    tile: Option<(usize, usize)>,
    #[arg(long, default_value_t = 10.0)]
    compactness: f64,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long = "labels-out")]
    labels_out: PathBuf,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "xy_lab", value_parser = parse_features)]
    features: FeatureSpace,
    #[arg(long, default_value_t = covapixel::DEFAULT_EPS)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpArg {
    Kf,
    Ci,
    Cu,
    Ca,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Logdet,
    Trace,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// Pairwise operator folded over the listed ids.
    #[arg(long, value_enum, default_value = "ci")]
    op: OpArg,
    #[arg(long, value_enum, default_value = "logdet")]
    objective: ObjectiveArg,
    #[arg(long, value_delimiter = ',', required = true)]
    ids: Vec<u32>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RenderMode {
    Flat,
    Ellipse,
    Boundary,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: RenderMode,
    #[arg(long, default_value_t = 2.0)]
    nsigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

fn parse_tile(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.parse().map_err(|_| format!("bad tile width {w:?}"))?;
    let h = h.parse().map_err(|_| format!("bad tile height {h:?}"))?;
    Ok((w, h))
}

fn parse_features(s: &str) -> Result<FeatureSpace, String> {
    s.parse().map_err(|e: CovapixelError| e.to_string())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_image(path: &Path) -> Result<ImageBuffer<f64>, CliError> {
    Ok(read_ppm(&read_file(path)?)?)
}

fn read_labels(path: &Path) -> Result<LabelMap, CliError> {
    Ok(LabelMap::from_bytes(&read_file(path)?)?)
}

fn read_set(path: &Path) -> Result<CovapixelSet<f64>, CliError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CovapixelError::Format("document is not UTF-8".into()))?;
    Ok(read_covapix(&text)?)
}

fn segment(args: &SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let img = read_image(&args.input)?;
    let labels = match args.method {
        Method::Grid => {
            let (tw, th) = args
                .tile
                .ok_or_else(|| CliError::Usage("--method grid requires --tile WxH".into()))?;
            grid_segment(img.width(), img.height(), tw, th)?
        }
        Method::Slic => {
            let k = args
                .k
                .ok_or_else(|| CliError::Usage("--method slic requires --k N".into()))?;
            let params = SlicParams {
                target_regions: k,
                compactness: args.compactness,
                iterations: args.iters,
            };
            slic_segment(&rgb_to_lab(&img)?, &params)?
        }
    };
    write_file(&args.labels_out, &labels.to_bytes())?;
    writeln!(out, "region_count={}", labels.region_count()).ok();
    Ok(())
}

fn extract(args: &ExtractArgs) -> Result<(), CliError> {
    let rgb = read_image(&args.input)?;
    let labels = read_labels(&args.labels)?;
    let img = match args.features {
        FeatureSpace::XyLab => rgb_to_lab(&rgb)?,
        _ => rgb,
    };
    let covapixels = extract_covapixels(&img, &labels, args.features, args.eps)?;
    let set = CovapixelSet {
        feature_space: args.features,
        eps: args.eps,
        width: img.width(),
        height: img.height(),
        covapixels,
    };
    write_file(&args.out, write_covapix(&set)?.as_bytes())
}

fn fuse(args: &FuseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut set = read_set(&args.input)?;
    let mut seen = std::collections::BTreeSet::new();
    for &id in &args.ids {
        if !seen.insert(id) {
            return Err(CliError::Selection(format!("id {id} listed twice")));
        }
    }
    let picked: Vec<&Covapixel<f64>> = args
        .ids
        .iter()
        .map(|&id| {
            set.covapixels
                .iter()
                .find(|c| c.id == id)
                .ok_or_else(|| CliError::Selection(format!("no covapixel with id {id}")))
        })
        .collect::<Result<_, _>>()?;
    let estimates: Vec<_> = picked.iter().map(|c| c.est.clone()).collect();
    let op = match args.op {
        OpArg::Kf => FusionOp::Kf,
        OpArg::Ci => FusionOp::Ci,
        OpArg::Cu => FusionOp::Cu,
        OpArg::Ca => FusionOp::Ca,
    };
    let objective = match args.objective {
        ObjectiveArg::Logdet => Objective::LogDet,
        ObjectiveArg::Trace => Objective::Trace,
    };
    let result = fuse_reduce(&estimates, op, objective)?;
    let fused = Covapixel {
        id: *seen.first().expect("ids non-empty"),
        n: picked.iter().map(|c| c.n).sum(),
        est: result.estimate,
        feature_space: set.feature_space,
    };
    set.covapixels.retain(|c| !seen.contains(&c.id));
    set.covapixels.push(fused);
    set.covapixels.sort_by_key(|c| c.id);
    write_file(&args.out, write_covapix(&set)?.as_bytes())?;
    writeln!(out, "aux={}", result.aux).ok();
    Ok(())
}

fn render(args: &RenderArgs) -> Result<(), CliError> {
    let set = read_set(&args.input)?;
    let labels = args.labels.as_deref().map(read_labels).transpose()?;
    if let Some(l) = &labels {
        if l.dims() != (set.width, set.height) {
            return Err(ImagingError::DimensionMismatch {
                left: (set.width, set.height),
                right: l.dims(),
            }
            .into());
        }
    }
    let need_labels = || {
        labels
            .as_ref()
            .ok_or_else(|| CliError::Usage("--mode flat|boundary requires --labels".into()))
    };
    let img = match args.mode {
        RenderMode::Flat => render_flat(need_labels()?, &set.covapixels)?,
        RenderMode::Boundary => {
            let l = need_labels()?;
            overlay_boundaries(&render_flat(l, &set.covapixels)?, l)?
        }
        RenderMode::Ellipse => {
            let background = labels.as_ref().map_or(Background::Black, Background::Flat);
            render_ellipses(
                &set.covapixels,
                set.width,
                set.height,
                args.nsigma,
                background,
            )?
        }
    };
    write_file(&args.out, &write_ppm(&img)?)
}

fn stats(args: &StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let original = read_image(&args.original)?;
    let recon = read_image(&args.recon)?;
    let labels = read_labels(&args.labels)?;
    let report: imaging::QualityReport<f64> = quality_stats(&original, &recon, &labels)?;
    writeln!(out, "{report}").ok();
    Ok(())
}

/// Runs the CLI on `argv` (including the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code: 0 on
/// success, 1 on runtime errors, 2 on usage errors.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{e}").ok();
                    0
                }
                _ => {
                    write!(err, "{e}").ok();
                    2
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Segment(a) => segment(a, out),
        Command::Extract(a) => extract(a),
        Command::Fuse(a) => fuse(a, out),
        Command::Render(a) => render(a),
        Command::Stats(a) => stats(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
