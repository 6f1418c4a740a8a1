//! Command-line front end. `run` parses arguments, merges them over an
//! optional `--config` file (flags win) and returns the process exit code:
//! 0 on success, 1 on a usage error, 2 on a runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{synthetic_digits, Dataset, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, DEFAULT_CONFIDENCE};
use crate::io::{self, RunConfig};
use crate::nets::model::ModelBundle;
use crate::nets::train::{
    default_classifier_layers, default_h_dae_layers, default_x_dae_layers, reconstruction_rmse, train_classifier, train_dae,
    train_generator, GeneratorConfig, GeneratorMode, NoiseSigmas, TrainConfig, TAP_H,
};
use crate::nets::AdamConfig;
use crate::ppgn::{self, Condition, MaskedImage, Models, SweepAxis, VariantKind, VariantSpec};
use crate::rng::RngStream;
use crate::samplers::ChainRecord;
use crate::tensor::Tensor;

#[derive(Parser, Debug)]
#[command(name = "ppgn", about = "Plug-and-play generative sampling on 28x28 digit images", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic digit dataset as an IDX image/label pair.
    MakeData(MakeDataArgs),
    /// Train the condition network (also used as the encoder).
    TrainClassifier(TrainClassifierArgs),
    /// Train a denoising autoencoder on pixels or on encoder codes.
    TrainDae(TrainDaeArgs),
    /// Train a generator that inverts the encoder's code.
    TrainGenerator(TrainGeneratorArgs),
    /// Run sampling chains and write a grid, chain summaries and a report.
    Sample(SampleArgs),
    /// Fill a masked region of a real image.
    Inpaint(InpaintArgs),
    /// Score a PGM grid of samples.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// IDX image file; without it a synthetic dataset is generated.
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file matching `--images`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Size of the synthetic dataset.
    #[arg(long, default_value_t = 12000)]
    synthetic: usize,
    #[arg(long = "data_seed", alias = "data-seed", default_value_t = 1)]
    data_seed: u64,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long = "batch_size", alias = "batch-size", default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max_steps", alias = "max-steps")]
    max_steps: Option<usize>,
    /// Anneal the learning rate to this value with a cosine schedule.
    #[arg(long = "final_lr", alias = "final-lr")]
    final_lr: Option<f64>,
}

#[derive(Args, Debug)]
struct MakeDataArgs {
    #[arg(long, default_value_t = 12000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args, Debug)]
struct TrainClassifierArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Fraction of the data held back for the test accuracy.
    #[arg(long = "test_fraction", alias = "test-fraction", default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Space {
    X,
    H,
}

#[derive(Args, Debug)]
struct TrainDaeArgs {
    #[arg(long, value_enum)]
    space: Space,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Corruption noise; defaults to 0.1 for pixels and to 10% of the mean
    /// code activation for codes.
    #[arg(long)]
    sigma: Option<f64>,
    /// Encoder whose `h` code the DAE models (`--space h`).
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainGeneratorArgs {
    #[arg(long, default_value = "noiseless")]
    mode: GeneratorMode,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also save the discriminator here.
    #[arg(long)]
    discriminator: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Init {
    /// Start from (the code of) a held-out real image.
    Data,
    /// Start from (the code of) a uniform random image.
    Random,
}

/// Sampler settings shared by `sample` and `inpaint`.
#[derive(Args, Debug, Clone)]
struct ChainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    eps3: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "target_class", alias = "target-class")]
    target_class: Option<usize>,
    /// Condition on a hidden unit of this classifier tap instead of a class.
    #[arg(long = "hidden_layer", alias = "hidden-layer")]
    hidden_layer: Option<String>,
    #[arg(long = "hidden_unit", alias = "hidden-unit")]
    hidden_unit: Option<usize>,
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Independent classifier used for the quality score.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long)]
    generator: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long = "h_dae", alias = "h-dae")]
    h_dae: Option<PathBuf>,
    #[arg(long = "x_dae", alias = "x-dae")]
    x_dae: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Add code-space noise `before` the reconstruction or `after` the step.
    #[arg(long = "noise_placement", alias = "noise-placement")]
    noise_placement: Option<String>,
    /// Worker threads for the chains (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = Init::Data)]
    init: Init,
    /// Repeat the run over the standard grid of one multiplier.
    #[arg(long)]
    sweep: Option<SweepAxis>,
}

#[derive(Args, Debug)]
struct InpaintArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Index of the real image in the data to inpaint.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long = "mask_x", alias = "mask-x")]
    mask_x: Option<usize>,
    #[arg(long = "mask_y", alias = "mask-y")]
    mask_y: Option<usize>,
    #[arg(long = "mask_w", alias = "mask-w")]
    mask_w: Option<usize>,
    #[arg(long = "mask_h", alias = "mask-h")]
    mask_h: Option<usize>,
    /// Weight of the pull towards the observed pixels around the hole. Required;
    /// 0 relies on clamping alone, values near 1 follow the surroundings closely.
    #[arg(long = "context_weight", alias = "context-weight")]
    context_weight: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// PGM grid of 28x28 samples.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "target_class", alias = "target-class")]
    target_class: Option<usize>,
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    threshold: f64,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::MakeData(a) => {
            let ds = synthetic_digits(a.n, a.seed);
            io::write_idx(&ds, &a.images, &a.labels)?;
            println!("wrote {} images to {}", ds.len(), a.images.display());
            Ok(())
        }
        Command::TrainClassifier(a) => cmd_train_classifier(a),
        Command::TrainDae(a) => cmd_train_dae(a),
        Command::TrainGenerator(a) => cmd_train_generator(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Inpaint(a) => cmd_inpaint(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    path.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::InvalidArgument(format!("--{flag} (or '{flag}' in the config) is required")))
}

fn load_data(d: &DataArgs, cfg: &RunConfig) -> Result<Dataset> {
    match (d.images.clone().or(cfg.images.clone()), d.labels.clone().or(cfg.labels.clone())) {
        (Some(images), Some(labels)) => io::load_idx(&images, &labels),
        (None, None) => Ok(synthetic_digits(d.synthetic, d.data_seed)),
        _ => Err(Error::InvalidArgument("--images and --labels must be given together".into())),
    }
}

fn train_config(t: &TrainArgs, cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        adam: AdamConfig { lr: t.lr, ..AdamConfig::default() },
        seed: t.seed.or(cfg.seed).unwrap_or(0),
        max_steps: t.max_steps,
        final_lr: t.final_lr,
    }
}

fn cmd_train_classifier(a: TrainClassifierArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let output = required(a.output.or(cfg.output.clone()), "output")?;
    let data = load_data(&a.data, &cfg)?;
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(Error::InvalidArgument(format!("test_fraction must be in [0, 1), got {}", a.test_fraction)));
    }
    let n_train = data.len() - (data.len() as f64 * a.test_fraction).round() as usize;
    let (train, test) = data.split_at(n_train);
    let test = (!test.is_empty()).then_some(&test);
    let (model, report) = train_classifier(&train, test, default_classifier_layers(), &train_config(&a.train, &cfg))?;
    io::save_checkpoint(&model, &output)?;
    println!("train_accuracy={}", io::format_sig6(report.train_accuracy));
    if let Some(acc) = report.test_accuracy {
        println!("test_accuracy={}", io::format_sig6(acc));
    }
    Ok(())
}

fn cmd_train_dae(a: TrainDaeArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let output = required(a.output.or(cfg.output.clone()), "output")?;
    let data = load_data(&a.data, &cfg)?;
    let tcfg = train_config(&a.train, &cfg);
    let (samples, layers, sigma) = match a.space {
        Space::X => (data.images.clone(), default_x_dae_layers(), a.sigma.unwrap_or(0.1)),
        Space::H => {
            let encoder = io::load_checkpoint(&required(a.encoder.or(cfg.encoder.clone()), "encoder")?)?;
            let (_, taps) = encoder.predict_taps(&data.images)?;
            let codes = taps
                .get(TAP_H)
                .cloned()
                .ok_or_else(|| Error::Model { model: encoder.name.clone(), reason: format!("no tap '{TAP_H}'") })?;
            let sigma = a.sigma.unwrap_or(0.1 * codes.mean());
            let dim = codes.as_matrix_dims().1;
            (codes, default_h_dae_layers(dim), sigma)
        }
    };
    let (model, losses) = train_dae(&samples, layers, sigma, &tcfg)?;
    io::save_checkpoint(&model, &output)?;
    println!("sigma={}", io::format_sig6(sigma));
    println!("final_loss={}", io::format_sig6(losses.last().copied().unwrap_or(f64::NAN)));
    Ok(())
}

fn cmd_train_generator(a: TrainGeneratorArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let output = required(a.output.or(cfg.output.clone()), "output")?;
    let encoder = io::load_checkpoint(&required(a.encoder.or(cfg.encoder.clone()), "encoder")?)?;
    let data = load_data(&a.data, &cfg)?;
    let mut gcfg = GeneratorConfig::new(a.mode, train_config(&a.train, &cfg));
    if a.mode == GeneratorMode::Joint {
        gcfg.sigmas = Some(NoiseSigmas::from_data(&encoder, &data.images)?);
    }
    let (g, d, _) = train_generator(&encoder, &data.images, &gcfg)?;
    io::save_checkpoint(&g, &output)?;
    if let Some(path) = a.discriminator {
        io::save_checkpoint(&d, &path)?;
    }
    println!("reconstruction_rmse={}", io::format_sig6(reconstruction_rmse(&encoder, &g, &data.images)?));
    Ok(())
}

// ------------------------------------------------------------------ sampling

/// Every model a sampling command may need, loaded once.
struct Loaded {
    classifier: ModelBundle,
    heldout: Option<ModelBundle>,
    generator: Option<ModelBundle>,
    encoder: Option<ModelBundle>,
    h_dae: Option<ModelBundle>,
    x_dae: Option<ModelBundle>,
}

impl Loaded {
    fn models(&self) -> Result<Models<'_>> {
        let noise = match &self.generator {
            Some(g) => NoiseSigmas::from_generator(g)?,
            None => None,
        };
        Ok(Models {
            generator: self.generator.as_ref(),
            encoder: Some(self.encoder()),
            h_dae: self.h_dae.as_ref(),
            x_dae: self.x_dae.as_ref(),
            noise,
        })
    }

    /// The encoder if one was given, otherwise the classifier.
    fn encoder(&self) -> &ModelBundle {
        self.encoder.as_ref().unwrap_or(&self.classifier)
    }
}

/// Flags merged over the config file.
struct ChainSettings {
    spec: VariantSpec,
    chains: usize,
    target: usize,
    hidden: Option<(String, usize)>,
    threads: usize,
    output: PathBuf,
}

fn chain_settings(a: &ChainArgs, cfg: &RunConfig) -> Result<ChainSettings> {
    let kind: VariantKind = a.variant.as_deref().or(cfg.variant.as_deref()).unwrap_or("noiseless_joint").parse()?;
    let steps = a.steps.or(cfg.steps).unwrap_or(200);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let mut spec = VariantSpec::with_defaults(kind, steps, seed);
    let c = &mut spec.config;
    c.eps1 = a.eps1.or(cfg.eps1).unwrap_or(c.eps1);
    c.eps2 = a.eps2.or(cfg.eps2).unwrap_or(c.eps2);
    c.eps3 = a.eps3.or(cfg.eps3).unwrap_or(c.eps3);
    c.validate()?;
    if kind == VariantKind::DgnAm {
        spec.lambda_decay = c.eps1;
    }
    if let Some(p) = a.noise_placement.as_deref().or(cfg.noise_placement.as_deref()) {
        spec.noise_placement = p.parse()?;
    }
    let hidden = match (a.hidden_layer.clone().or(cfg.hidden_layer.clone()), a.hidden_unit.or(cfg.hidden_unit)) {
        (Some(layer), Some(unit)) => Some((layer, unit)),
        (None, None) => None,
        _ => return Err(Error::InvalidArgument("hidden_layer and hidden_unit must be given together".into())),
    };
    let chains = a.chains.or(cfg.chains).unwrap_or(10);
    if chains == 0 {
        return Err(Error::InvalidArgument("chains must be >= 1".into()));
    }
    let threads = a.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    Ok(ChainSettings {
        spec,
        chains,
        target: a.target_class.or(cfg.target_class).unwrap_or(0),
        hidden,
        threads,
        output: required(a.output.clone().or(cfg.output.clone()), "output")?,
    })
}

fn load_models(a: &ChainArgs, cfg: &RunConfig) -> Result<Loaded> {
    let opt = |flag: &Option<PathBuf>, key: &Option<PathBuf>| -> Result<Option<ModelBundle>> {
        flag.clone().or(key.clone()).map(|p| io::load_checkpoint(&p)).transpose()
    };
    Ok(Loaded {
        classifier: io::load_checkpoint(&required(a.classifier.clone().or(cfg.classifier.clone()), "classifier")?)?,
        heldout: opt(&a.heldout, &cfg.heldout)?,
        generator: opt(&a.generator, &cfg.generator)?,
        encoder: opt(&a.encoder, &cfg.encoder)?,
        h_dae: opt(&a.h_dae, &cfg.h_dae)?,
        x_dae: opt(&a.x_dae, &cfg.x_dae)?,
    })
}

fn condition<'a>(loaded: &'a Loaded, s: &ChainSettings) -> Result<Condition<'a>> {
    match &s.hidden {
        Some((layer, unit)) => Condition::hidden_unit(&loaded.classifier, layer, *unit),
        None => Condition::output_class(&loaded.classifier, s.target),
    }
}

/// Runs `f(chain)` for every chain on up to `threads` workers and returns the
/// results in chain order.
fn run_chains<F>(chains: usize, threads: usize, f: F) -> Result<Vec<ChainRecord>>
where
    F: Fn(usize) -> Result<ChainRecord> + Sync,
{
    let mut out: Vec<Option<Result<ChainRecord>>> = (0..chains).map(|_| None).collect();
    let per_worker = chains.div_ceil(threads);
    std::thread::scope(|scope| {
        for (w, slots) in out.chunks_mut(per_worker).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(f(w * per_worker + k));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("every chain slot is filled")).collect()
}

/// Initial chain states: real images from the data, or seeded uniform noise.
fn init_images(init: Init, data: &Dataset, chains: usize, seed: u64) -> Vec<Tensor> {
    match init {
        Init::Data => (0..chains).map(|i| data.image(i % data.len().max(1))).collect(),
        Init::Random => {
            let mut rng = RngStream::new(seed, crate::rng::streams::INIT);
            (0..chains)
                .map(|_| Tensor::from_parts(vec![data.dim()], (0..data.dim()).map(|_| rng.uniform()).collect()))
                .collect()
        }
    }
}

fn chain_summary(records: &[ChainRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        let n = r.energy_terms.len().max(1) as f64;
        let prior = r.energy_terms.iter().map(|t| t.0).sum::<f64>() / n;
        let cond = r.energy_terms.iter().map(|t| t.1).sum::<f64>() / n;
        out.push_str(&format!(
            "chain={i} steps={} final_confidence={} acceptance_rate={} mean_prior_norm={} mean_condition_norm={}\n",
            r.len().saturating_sub(1),
            io::format_sig6(r.final_confidence()),
            io::format_sig6(r.acceptance_rate()),
            io::format_sig6(prior),
            io::format_sig6(cond),
        ));
    }
    out
}

const MIXING_LAGS: [usize; 3] = [1, 10, 50];

/// Filters final samples by classifier confidence, then scores the survivors.
fn build_report(records: &[ChainRecord], loaded: &Loaded, s: &ChainSettings) -> Result<EvalReport> {
    let finals: Vec<Tensor> = records.iter().map(|r| r.final_sample().clone()).collect();
    let mut report = EvalReport { n_total: finals.len(), ..Default::default() };
    let kept = if s.hidden.is_some() {
        finals.clone()
    } else {
        eval::confidence_filter(&finals, &loaded.classifier, s.target, DEFAULT_CONFIDENCE)?
    };
    report.n_kept = kept.len();
    if let (Some(heldout), false, None) = (&loaded.heldout, kept.is_empty(), &s.hidden) {
        report.quality = eval::quality(&kept, heldout, s.target)?;
    }
    if kept.len() >= 2 {
        let d = eval::diversity(&kept)?;
        report.mean_l2 = d.mean_l2;
        report.mean_ssim = d.mean_ssim;
    }
    let lags: Vec<usize> = MIXING_LAGS.iter().copied().filter(|&lag| lag < records[0].len()).collect();
    let mixes = records.iter().map(|r| eval::mixing(r, &lags)).collect::<Result<Vec<_>>>()?;
    let k = mixes.len() as f64;
    report.mean_displacement = mixes.iter().map(|m| m.mean_displacement).sum::<f64>() / k;
    report.autocorrelation = lags
        .iter()
        .enumerate()
        .map(|(j, &lag)| (lag, mixes.iter().map(|m| m.autocorrelation[j].1).sum::<f64>() / k))
        .collect();
    let mean_conf = records.iter().map(|r| r.final_confidence()).sum::<f64>() / k;
    let accept = records.iter().map(|r| r.acceptance_rate()).sum::<f64>() / k;
    report.extra.push(("mean_final_confidence".into(), mean_conf));
    report.extra.push(("acceptance_rate".into(), accept));
    Ok(report)
}

fn write_outputs(dir: &Path, grid: &[Tensor], records: &[ChainRecord], report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cols = (grid.len() as f64).sqrt().ceil() as usize;
    io::write_grid(grid, cols.max(1), &dir.join("grid.pgm"))?;
    io::atomic_write(&dir.join("chains.txt"), chain_summary(records).as_bytes())?;
    io::write_report(report, &dir.join("report.txt"))
}

fn sample_once(spec: &VariantSpec, s: &ChainSettings, loaded: &Loaded, starts: &[Tensor], dir: &Path) -> Result<()> {
    let models = loaded.models()?;
    let cond = condition(loaded, s)?;
    spec.check_models(&models, &cond)?;
    let records = run_chains(s.chains, s.threads, |chain| ppgn::sample_variant(spec, &models, &cond, &starts[chain], chain))?;
    let report = build_report(&records, loaded, s)?;
    let finals: Vec<Tensor> = records.iter().map(|r| r.final_sample().clone()).collect();
    write_outputs(dir, &finals, &records, &report)?;
    println!("{}: kept {}/{} -> {}", spec.kind, report.n_kept, report.n_total, dir.display());
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let cfg = load_config(&a.chain.config)?;
    let s = chain_settings(&a.chain, &cfg)?;
    let loaded = load_models(&a.chain, &cfg)?;
    let data = load_data(&a.chain.data, &cfg)?;
    let images = init_images(a.init, &data, s.chains, s.spec.config.seed);
    let starts: Vec<Tensor> = if s.spec.kind.is_code_space() {
        images.iter().map(|x| ppgn::encode(loaded.encoder(), x)).collect::<Result<_>>()?
    } else {
        images
    };
    match a.sweep {
        None => sample_once(&s.spec, &s, &loaded, &starts, &s.output),
        Some(axis) => {
            for config in ppgn::sweep(axis, &s.spec.config) {
                let mut spec = VariantSpec { config, ..s.spec };
                let value = match axis {
                    SweepAxis::Eps1 => config.eps1,
                    SweepAxis::Eps3 => config.eps3,
                };
                if spec.kind == VariantKind::DgnAm {
                    spec.lambda_decay = config.eps1;
                }
                let name = match axis {
                    SweepAxis::Eps1 => format!("eps1_{value:e}"),
                    SweepAxis::Eps3 => format!("eps3_{value:e}"),
                };
                sample_once(&spec, &s, &loaded, &starts, &s.output.join(name))?;
            }
            Ok(())
        }
    }
}

fn cmd_inpaint(a: InpaintArgs) -> Result<()> {
    let cfg = load_config(&a.chain.config)?;
    let s = chain_settings(&a.chain, &cfg)?;
    let loaded = load_models(&a.chain, &cfg)?;
    let data = load_data(&a.chain.data, &cfg)?;
    if a.index >= data.len() {
        return Err(Error::InvalidArgument(format!("index {} out of range for {} images", a.index, data.len())));
    }
    let x_real = data.image(a.index);
    let side = IMAGE_SIDE;
    let mx = a.mask_x.or(cfg.mask_x).unwrap_or(side / 4);
    let my = a.mask_y.or(cfg.mask_y).unwrap_or(side / 4);
    let mw = a.mask_w.or(cfg.mask_w).unwrap_or(side / 2);
    let mh = a.mask_h.or(cfg.mask_h).unwrap_or(side / 2);
    let weight = a
        .context_weight
        .or(cfg.context_weight)
        .ok_or_else(|| Error::InvalidArgument("inpaint needs context_weight (try 0, 0.1 or 1)".into()))?;
    let masked = MaskedImage::rectangle(x_real.clone(), side, mx, my, mw, mh)?;
    let models = loaded.models()?;
    let cond = condition(&loaded, &s)?;
    s.spec.check_models(&models, &cond)?;
    // Start every chain from the code of the image with the hole blanked out.
    let hole = masked.x_real.mul(&masked.mask.map("invert", |m| 1.0 - m)?)?;
    let h0 = ppgn::encode(loaded.encoder(), &hole)?;
    let records = run_chains(s.chains, s.threads, |chain| ppgn::inpaint(&s.spec, &models, &masked, &cond, &h0, weight, chain))?;
    let report = build_report(&records, &loaded, &s)?;
    let mut grid = vec![x_real, hole];
    grid.extend(records.iter().map(|r| r.final_sample().clone()));
    write_outputs(&s.output, &grid, &records, &report)?;
    println!("inpainted {} chains -> {}", records.len(), s.output.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let classifier = io::load_checkpoint(&required(a.classifier.or(cfg.classifier.clone()), "classifier")?)?;
    let heldout = a.heldout.or(cfg.heldout.clone()).map(|p| io::load_checkpoint(&p)).transpose()?;
    let target = a.target_class.or(cfg.target_class).unwrap_or(0);
    let samples = io::decode_grid(&fs::read(&a.grid)?, IMAGE_SIDE)?;
    let kept = eval::confidence_filter(&samples, &classifier, target, a.threshold)?;
    let mut report = EvalReport { n_total: samples.len(), n_kept: kept.len(), ..Default::default() };
    if let (Some(h), false) = (&heldout, kept.is_empty()) {
        report.quality = eval::quality(&kept, h, target)?;
    }
    if kept.len() >= 2 {
        let d = eval::diversity(&kept)?;
        report.mean_l2 = d.mean_l2;
        report.mean_ssim = d.mean_ssim;
    }
    match a.output.or(cfg.output.clone()) {
        Some(path) => io::write_report(&report, &path),
        None => {
            print!("{}", io::encode_report(&report));
            Ok(())
        }
    }
}
