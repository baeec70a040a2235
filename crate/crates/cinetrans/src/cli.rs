//! The `cinetrans` command line.
//!
//! Exit codes: 0 success, 2 validation or configuration error (including
//! bad flags), 3 IO or format error, 4 a required metric was not
//! computable.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cinetrans_core::analysis::{analyze_layers, AttnCapture};
use cinetrans_core::curation::{split_stitch, GammaAnchor};
use cinetrans_core::demo::{demo_multishot_generation, DemoMask, Render, SmoothingConfig};
use cinetrans_core::metrics::{
    build_reference_distribution, eval_report, EvalFeatures, Histogram, References, Scorers,
};
use cinetrans_core::shotmask::{apply_visible_first_frame, build_block_diagonal_mask, LayerPolicy};
use cinetrans_core::synthetic::{gen_synthetic_multishot, SyntheticSpec};
use cinetrans_core::{ShotLabels, TokenLayout};

use crate::config::RunConfig;
use crate::io::{self, Result};
use crate::parallel::segment_batch;
use crate::schema::{StatsJson, StitchJson, WithConfig};
use crate::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(name = "cinetrans", version, about = "Shot-structured attention masks, segmentation and multi-shot metrics")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic multi-shot video and its ground-truth labels.
    GenSynthetic(GenArgs),
    /// Detect shots and gradual transitions in CTF videos.
    Segment(SegmentArgs),
    /// Drop and join segments by endpoint-embedding distances.
    Stitch(StitchArgs),
    /// Build the block-diagonal attention mask for a shot labeling.
    Mask(MaskArgs),
    /// Intra/inter-shot statistics of captured attention maps.
    Analyze(AnalyzeArgs),
    /// Multi-shot metrics for one video.
    Eval(EvalArgs),
    /// Reference histogram from a list of consistency scores.
    RefDist(RefDistArgs),
    /// Masked-attention smoothing demo rendered to a CTF video.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Ground-truth labels JSON.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output labels JSON (single input).
    #[arg(short, long, conflicts_with = "out_dir")]
    pub output: Option<PathBuf>,
    /// Directory for `<stem>.labels.json` files (any number of inputs).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub cut_threshold: Option<f64>,
    #[arg(long)]
    pub single: Option<f64>,
    #[arg(long)]
    pub all: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// Segments as a JSON list or an EMBv1 file of alternating first/last rows.
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub gamma_anchor: Option<AnchorArg>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum AnchorArg {
    GroupHead,
    Predecessor,
}

#[derive(Debug, Clone, Args)]
pub struct LayoutArgs {
    #[arg(long, default_value_t = 1)]
    pub tokens_per_slice: usize,
    #[arg(long, default_value_t = 1)]
    pub compression: usize,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub layout: LayoutArgs,
    /// Let every query see the first latent slice.
    #[arg(long)]
    pub visible_first_frame: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub attn: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub layout: LayoutArgs,
    /// Layer preset (`all`, `none`, `unet-last6`, `dit-mid`) or index list.
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub video: PathBuf,
    /// Detected shots of the video.
    #[arg(long)]
    pub labels: PathBuf,
    /// Requested shot count.
    #[arg(long)]
    pub specified: usize,
    #[arg(long)]
    pub ref_semantic: Option<PathBuf>,
    #[arg(long)]
    pub ref_visual: Option<PathBuf>,
    /// Exit with status 4 when inter-shot metrics are not computable.
    #[arg(long)]
    pub require_multishot: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefDistArgs {
    /// One score in [0, 1] per line.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Shot labels whose partition drives the mask.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[command(flatten)]
    pub layout: LayoutArgs,
    /// Use the all-true mask instead of the block mask.
    #[arg(long)]
    pub full_mask: bool,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Partition sidecar; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Errors are reported on stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as i32
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(&a, &config),
        Command::Segment(a) => {
            override_with(&mut config.cut_threshold, a.cut_threshold);
            override_with(&mut config.single_threshold, a.single);
            override_with(&mut config.all_threshold, a.all);
            segment_cmd(&a, &config)
        }
        Command::Stitch(a) => {
            override_with(&mut config.alpha, a.alpha);
            override_with(&mut config.beta, a.beta);
            override_with(&mut config.gamma, a.gamma);
            override_with(
                &mut config.gamma_anchor,
                a.gamma_anchor.map(|g| match g {
                    AnchorArg::GroupHead => GammaAnchor::GroupHead,
                    AnchorArg::Predecessor => GammaAnchor::Predecessor,
                }),
            );
            stitch(&a, &config)
        }
        Command::Mask(a) => mask(&a),
        Command::Analyze(a) => {
            override_with(&mut config.layer_policy, a.layers.clone());
            analyze(&a, &config)
        }
        Command::Eval(a) => eval(&a, &config),
        Command::RefDist(a) => {
            override_with(&mut config.bins, a.bins);
            override_with(&mut config.epsilon, a.epsilon);
            ref_dist(&a, &config)
        }
        Command::Demo(a) => {
            override_with(&mut config.seed, a.seed);
            demo(&a, &config)
        }
    }
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn with_config<T>(body: T, config: &RunConfig) -> WithConfig<T> {
    WithConfig {
        body,
        config: config.clone(),
    }
}

fn layout_for(labels: &ShotLabels, l: &LayoutArgs) -> Result<TokenLayout> {
    Ok(TokenLayout::new(labels.n_frames(), l.compression, l.tokens_per_slice)?)
}

fn gen_synthetic(a: &GenArgs, config: &RunConfig) -> Result<ExitCode> {
    let spec: SyntheticSpec = io::read_json(&a.spec)?;
    let (seq, labels) = gen_synthetic_multishot(&spec)?;
    io::write_ctf(&a.output, &seq)?;
    io::write_json(&a.labels, &with_config(labels, config))?;
    Ok(ExitCode::Ok)
}

fn segment_cmd(a: &SegmentArgs, config: &RunConfig) -> Result<ExitCode> {
    let outputs: Vec<PathBuf> = match (&a.output, &a.out_dir) {
        (Some(o), None) if a.inputs.len() == 1 => vec![o.clone()],
        (None, Some(dir)) => a
            .inputs
            .iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or(p.as_os_str()).to_string_lossy();
                dir.join(format!("{stem}.labels.json"))
            })
            .collect(),
        _ => {
            return Err(CliError::Usage(
                "give -o for a single input or --out-dir for several".into(),
            ))
        }
    };
    let cfg = config.segment_config();
    // a failing file does not stop the others; the first failure sets the status
    let mut videos = Vec::new();
    let mut first_err: Option<CliError> = None;
    let mut readable = Vec::new();
    for (i, p) in a.inputs.iter().enumerate() {
        match io::read_ctf(p) {
            Ok(v) => {
                videos.push(v);
                readable.push(i);
            }
            Err(e) => {
                eprintln!("error: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    for (labels, &i) in segment_batch(&videos, &cfg).into_iter().zip(&readable) {
        let written = labels
            .map_err(CliError::from)
            .and_then(|l| io::write_json(&outputs[i], &with_config(l, config)));
        if let Err(e) = written {
            eprintln!("error: {}: {e}", a.inputs[i].display());
            first_err.get_or_insert(e);
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(ExitCode::Ok),
    }
}

fn stitch(a: &StitchArgs, config: &RunConfig) -> Result<ExitCode> {
    let segments = io::read_segments(&a.segments)?;
    let groups = split_stitch(&segments, &config.stitch_config())?;
    io::write_json(&a.output, &with_config(StitchJson::new(&segments, &groups), config))?;
    Ok(ExitCode::Ok)
}

fn mask(a: &MaskArgs) -> Result<ExitCode> {
    let labels: ShotLabels = io::read_json(&a.labels)?;
    let layout = layout_for(&labels, &a.layout)?;
    let mut mask = build_block_diagonal_mask(&labels.to_partition(), &layout)?;
    if a.visible_first_frame {
        mask = apply_visible_first_frame(&mask, layout.tokens_per_slice)?;
    }
    io::write_mask(&a.output, &mask)?;
    Ok(ExitCode::Ok)
}

fn analyze(a: &AnalyzeArgs, config: &RunConfig) -> Result<ExitCode> {
    let maps = io::read_attn(&a.attn)?;
    let labels: ShotLabels = io::read_json(&a.labels)?;
    let policy = LayerPolicy::preset(&config.layer_policy, maps.layers())?;
    let capture = AttnCapture::new(maps, layout_for(&labels, &a.layout)?)?;
    let stats = analyze_layers(&capture, &labels.to_partition(), &policy)?;
    io::write_json(&a.output, &with_config(StatsJson::from(&stats), config))?;
    Ok(ExitCode::Ok)
}

fn read_reference(path: &Option<PathBuf>) -> Result<Option<Histogram>> {
    path.as_deref().map(io::read_json::<Histogram>).transpose()
}

fn eval(a: &EvalArgs, config: &RunConfig) -> Result<ExitCode> {
    let seq = io::read_ctf(&a.video)?;
    let labels: ShotLabels = io::read_json(&a.labels)?;
    let references = References {
        semantic: read_reference(&a.ref_semantic)?,
        visual: read_reference(&a.ref_visual)?,
    };
    let features = EvalFeatures::extract(&seq, &config.extractors)?;
    let report = eval_report(&seq, &labels, a.specified, &features, &references, &Scorers::default())?;
    let single = report.inter_semantic.is_none();
    io::write_json(&a.output, &with_config(report, config))?;
    if a.require_multishot && single {
        return Err(CliError::NotComputable(
            "inter-shot metrics need at least two detected shots".into(),
        ));
    }
    Ok(ExitCode::Ok)
}

fn ref_dist(a: &RefDistArgs, config: &RunConfig) -> Result<ExitCode> {
    let scores = io::read_scores(&a.scores)?;
    let hist = build_reference_distribution(&scores, config.bins, config.epsilon)?;
    io::write_json(&a.output, &with_config(hist, config))?;
    Ok(ExitCode::Ok)
}

fn sidecar_path(a: &DemoArgs) -> PathBuf {
    a.sidecar.clone().unwrap_or_else(|| a.output.with_extension("json"))
}

fn demo(a: &DemoArgs, config: &RunConfig) -> Result<ExitCode> {
    let labels: ShotLabels = io::read_json(&a.labels)?;
    let partition = labels.to_partition();
    let smoothing = SmoothingConfig {
        temperature: a.temperature,
        ..SmoothingConfig::new(layout_for(&labels, &a.layout)?, a.iters, config.seed)
    };
    let render = Render {
        height: a.height,
        width: a.width,
        channels: 3,
    };
    let mask = if a.full_mask { DemoMask::Full } else { DemoMask::Block };
    let seq = demo_multishot_generation(&partition, &smoothing, &render, mask)?;
    let sidecar = sidecar_path(a);
    if sidecar.as_path() == a.output.as_path() {
        return Err(CliError::Usage("sidecar path equals the video path".into()));
    }
    io::write_ctf(&a.output, &seq)?;
    io::write_json(&sidecar, &with_config(partition.to_labels(), config))?;
    Ok(ExitCode::Ok)
}
