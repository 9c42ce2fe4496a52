use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scnn::action_pattern::{ApiBuilder, ApiOptions, Normalization, Outline};
use scnn::eval::{confusion, dump_activations, dump_filters, report};
use scnn::io::{load_api, load_dataset, load_frames, save_api, save_frames, save_gray, Checkpoint, Manifest};
use scnn::scnn::{build_compact, build_scnn_with_channels, Network};
use scnn::synth::{synth_video_with, Background, SynthOptions, VideoKind};
use scnn::train::{train_with, Clock, LabeledImage, TrainConfig, LOG_HEADER};
use scnn::transfer::{transfer_train, TransferPlan};

#[derive(Parser)]
#[command(name = "scnn", version, about = "Action pattern images and a series CNN for action recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Action pattern image operations.
    Api {
        #[command(subcommand)]
        command: ApiCommand,
    },
    /// Train a network from scratch.
    Train(TrainCmd),
    /// Grow a trained network by one class.
    Transfer(TransferCmd),
    /// Confusion matrix and metrics on a labelled set.
    Eval(EvalCmd),
    /// Dump a layer's filters, or its activations for one pattern.
    Inspect(InspectCmd),
    /// Write a synthetic video as a frame directory.
    Synth(SynthCmd),
}

#[derive(Subcommand)]
enum ApiCommand {
    /// Build a pattern from a directory of frames.
    Build(ApiBuildCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Fixed,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlineArg {
    Binarize,
    Perimeter,
}

#[derive(Args)]
struct ApiArgs {
    /// Keep edges of every orientation.
    #[arg(long)]
    no_direction_filter: bool,
    #[arg(long, value_enum, default_value = "max")]
    norm: NormArg,
    #[arg(long, value_enum, default_value = "binarize")]
    outline: OutlineArg,
}

impl ApiArgs {
    fn builder(&self) -> ApiBuilder {
        ApiBuilder::new(ApiOptions {
            direction_filter: !self.no_direction_filter,
            normalization: match self.norm {
                NormArg::Fixed => Normalization::Fixed,
                NormArg::Max => Normalization::FrameMax,
            },
            outline: match self.outline {
                OutlineArg::Binarize => Outline::Binarize,
                OutlineArg::Perimeter => Outline::Perimeter,
            },
            ..ApiOptions::default()
        })
    }
}

#[derive(Args)]
struct ApiBuildCmd {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    api: ApiArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Scnn,
    Compact,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Wall,
    Off,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 45)]
    batch: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.004)]
    l2: f64,
    #[arg(long, default_value_t = 8)]
    drop_period: usize,
    #[arg(long, default_value_t = 0.1)]
    drop_factor: f64,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Stop after three consecutive logged losses below this value.
    #[arg(long)]
    loss_stop: Option<f64>,
    #[arg(long, default_value_t = 10)]
    log_every: usize,
    /// Write the progress table here instead of stdout.
    #[arg(long)]
    log: Option<PathBuf>,
    /// `off` prints a placeholder instead of elapsed time, for reproducible logs.
    #[arg(long, value_enum, default_value = "wall")]
    clock: ClockArg,
    /// Options for directory entries in manifests.
    #[command(flatten)]
    api: ApiArgs,
}

impl TrainArgs {
    fn config(&self, freeze_through: Option<usize>) -> TrainConfig {
        TrainConfig {
            initial_lr: self.lr,
            momentum: self.momentum,
            l2_lambda: self.l2,
            batch_size: self.batch,
            lr_drop_factor: self.drop_factor,
            lr_drop_period_epochs: self.drop_period,
            max_epochs: self.epochs,
            loss_stop_threshold: self.loss_stop,
            max_iterations: self.max_iterations,
            log_every: self.log_every,
            freeze_through,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    fn clock(&self) -> Clock {
        match self.clock {
            ClockArg::Wall => Clock::Wall,
            ClockArg::Off => Clock::Off,
        }
    }

    fn log_sink(&self) -> Result<Box<dyn Write>> {
        let mut sink: Box<dyn Write> = match &self.log {
            Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => Box::new(std::io::stdout()),
        };
        writeln!(sink, "{LOG_HEADER}")?;
        Ok(sink)
    }
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated class labels; defaults to the manifest's labels in order of appearance.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "scnn")]
    arch: ArchArg,
    /// Input channels; the single pattern plane is replicated.
    #[arg(long, default_value_t = 1)]
    channels: usize,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct TransferCmd {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    new_class: String,
    #[arg(long)]
    new_manifest: PathBuf,
    #[arg(long)]
    old_manifest: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    old_fraction: f64,
    /// At most this many new-class patterns are used.
    #[arg(long, default_value_t = 100)]
    new_count: usize,
    /// Leave layers up to and including this one untouched.
    #[arg(long)]
    freeze_through: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Class treated as positive for sensitivity/specificity; defaults to the last label.
    #[arg(long)]
    positive: Option<String>,
    #[command(flatten)]
    api: ApiArgs,
}

#[derive(Args)]
struct InspectCmd {
    #[arg(long)]
    ckpt: PathBuf,
    /// Show activations for this pattern instead of the filters.
    #[arg(long)]
    api: Option<PathBuf>,
    #[arg(long)]
    layer: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    TranslateSquare,
    WaveBar,
    Static,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Amplitude of the static background texture.
    #[arg(long, default_value_t = 0.1)]
    noise: f32,
}

fn load_labelled(path: &Path, classes: &[String], api: &ApiArgs) -> Result<Vec<LabeledImage>> {
    let manifest = Manifest::load(path, Some(classes))?;
    if manifest.entries.is_empty() {
        bail!("{} lists no samples", path.display());
    }
    Ok(load_dataset(&manifest, classes, &api.builder())?)
}

fn run_train(cmd: &TrainCmd) -> Result<()> {
    let classes = match &cmd.classes {
        Some(c) => c.clone(),
        None => Manifest::load(&cmd.manifest, None)?.labels(),
    };
    let data = load_labelled(&cmd.manifest, &classes, &cmd.train.api)?;
    let side = data[0].image.width();
    let spec = match cmd.arch {
        ArchArg::Scnn => build_scnn_with_channels(classes.len(), cmd.channels)?,
        ArchArg::Compact => build_compact(side, cmd.channels, classes.len())?,
    };
    let mut net: Network<f32> = Network::new(spec, cmd.train.seed)?;
    let mut sink = cmd.train.log_sink()?;
    let mut write_err = None;
    train_with(&mut net, &data, &cmd.train.config(None), cmd.train.clock(), |rec| {
        if let Err(e) = writeln!(sink, "{rec}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing the training log");
    }
    Checkpoint::new(net, classes)?.save(&cmd.out)?;
    Ok(())
}

fn run_transfer(cmd: &TransferCmd) -> Result<()> {
    let source = Checkpoint::load(&cmd.source)?;
    let old = load_labelled(&cmd.old_manifest, &source.labels, &cmd.train.api)?;
    let new_label = [cmd.new_class.clone()];
    let new: Vec<_> = load_labelled(&cmd.new_manifest, &new_label, &cmd.train.api)?
        .into_iter()
        .map(|s| s.image)
        .collect();
    let mut plan = TransferPlan::new(&source.labels, cmd.new_class.clone());
    plan.old_data_fraction = cmd.old_fraction;
    plan.new_class_api_count = cmd.new_count;
    plan.seed = cmd.train.seed;
    let freeze = match &cmd.freeze_through {
        Some(name) => Some(
            source
                .network
                .spec
                .layer_index(name)
                .with_context(|| format!("no layer named {name}"))?,
        ),
        None => None,
    };
    let mut sink = cmd.train.log_sink()?;
    let mut write_err = None;
    let outcome = transfer_train(
        &source.network,
        &source.labels,
        &old,
        &new,
        &plan,
        &cmd.train.config(freeze),
        cmd.train.clock(),
        |rec| {
            if let Err(e) = writeln!(sink, "{rec}") {
                write_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_err {
        return Err(e).context("writing the training log");
    }
    Checkpoint::new(outcome.network, plan.new_classes)?.save(&cmd.out)?;
    Ok(())
}

fn run_eval(cmd: &EvalCmd) -> Result<()> {
    let ck = Checkpoint::load(&cmd.ckpt)?;
    let test = load_labelled(&cmd.manifest, &ck.labels, &cmd.api)?;
    let cm = confusion(&ck.network, &test, &ck.labels)?;
    let positive = match &cmd.positive {
        Some(p) => cm.class_index(p).with_context(|| format!("unknown class {p}"))?,
        None => ck.labels.len() - 1,
    };
    let text = report(&cm, positive)?;
    fs::write(&cmd.report, &text).with_context(|| format!("writing {}", cmd.report.display()))?;
    print!("{}", scnn::eval::render_confusion(&cm));
    println!("accuracy {:.2}% ({}/{})", 100.0 * cm.accuracy(), cm.trace(), cm.total());
    Ok(())
}

fn run_inspect(cmd: &InspectCmd) -> Result<()> {
    let ck = Checkpoint::load(&cmd.ckpt)?;
    let img = match &cmd.api {
        Some(p) => dump_activations(&ck.network, load_api(p)?.image(), &cmd.layer)?,
        None => dump_filters(&ck.network, &cmd.layer)?,
    };
    save_gray(&cmd.out, &img)?;
    Ok(())
}

fn run_synth(cmd: &SynthCmd) -> Result<()> {
    let kind = match cmd.kind {
        KindArg::TranslateSquare => VideoKind::TranslateSquare,
        KindArg::WaveBar => VideoKind::WaveBar,
        KindArg::Static => VideoKind::Static,
    };
    let opts = SynthOptions {
        width: cmd.size,
        height: cmd.size,
        background: Background::Texture {
            base: 0.0,
            amplitude: cmd.noise,
        },
        ..SynthOptions::default()
    };
    save_frames(&cmd.out, &synth_video_with(kind, cmd.frames, cmd.seed, &opts)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Api {
            command: ApiCommand::Build(cmd),
        } => {
            let api = cmd.api.builder().build(&load_frames(&cmd.frames)?)?;
            save_api(&cmd.out, &api)?;
            Ok(())
        }
        Command::Train(cmd) => run_train(&cmd),
        Command::Transfer(cmd) => run_transfer(&cmd),
        Command::Eval(cmd) => run_eval(&cmd),
        Command::Inspect(cmd) => run_inspect(&cmd),
        Command::Synth(cmd) => run_synth(&cmd),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
