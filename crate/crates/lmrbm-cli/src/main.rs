use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lmrbm::imputation::ImputeMode;
use lmrbm::missingness::Mechanism;
use lmrbm::training::{RankPolicy, Variant};
use lmrbm::{Error, Result};
use lmrbm_cli::cfg::{parse_list, ConfigFile};
use lmrbm_cli::commands;
use lmrbm_cli::suite::{run_suite, Method, SuiteConfig, SuiteData};

#[derive(Parser)]
#[command(
    name = "lmrbm",
    version,
    about = "Train and evaluate RBM imputation of incomplete binary images"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mask a binarized IDX corpus into a masked dataset (plus clean truth)
    GenData(GenDataArgs),
    /// Train an RBM on a masked dataset and write a checkpoint
    Train(TrainArgs),
    /// Complete a masked dataset with one of the imputation methods
    Impute(ImputeArgs),
    /// Score completions against clean truth and print a results CSV row
    Eval(EvalArgs),
    /// Run the full mechanisms x rates x methods experiment suite
    Suite(SuiteArgs),
    /// Summarize any artifact file (IDX, LMDS, LMCP, LMRB)
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    /// Keep only the first N images
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// auto, dense, or an explicit integer rank
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// mean, diffusion, or rbm
    #[arg(long)]
    method: Option<String>,
    /// Checkpoint for method rbm
    #[arg(long)]
    model: Option<PathBuf>,
    /// Masked dataset supplying pixel statistics (defaults to --data)
    #[arg(long)]
    stats_data: Option<PathBuf>,
    #[arg(long)]
    impute_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Test completions (LMCP)
    #[arg(long)]
    completions: Option<PathBuf>,
    /// Clean test truth (LMDS, all observed)
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Training-set completions used to fit classifiers (LMCP)
    #[arg(long)]
    train_completions: Option<PathBuf>,
    /// Clean training truth used to fit the feature extractor (LMDS)
    #[arg(long)]
    train_truth: Option<PathBuf>,
    /// Checkpoint for hidden-feature accuracy (optional)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Masked test dataset for hidden features (optional)
    #[arg(long)]
    masked_data: Option<PathBuf>,
    /// Masked training dataset for hidden features (optional)
    #[arg(long)]
    masked_train: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Append the CSV row here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Training IDX images
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Test IDX images
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Output directory for results.csv and plots/
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of im,so,pm
    #[arg(long)]
    mechanisms: Option<String>,
    /// Comma-separated rates in [0,1)
    #[arg(long)]
    rates: Option<String>,
    /// Comma-separated subset of mean,diffusion,rbm_zeroed,rbm_lm
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated training seeds
    #[arg(long)]
    train_seeds: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    impute_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent suite cells
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// File to summarize
    path: PathBuf,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("missing required --{flag}")))
}

fn parse_rank(raw: &str) -> Result<RankPolicy> {
    match raw {
        "auto" => Ok(RankPolicy::Auto),
        "dense" => Ok(RankPolicy::Dense),
        other => other
            .parse::<usize>()
            .map(RankPolicy::Fixed)
            .map_err(|_| Error::InvalidConfig(format!("--rank: expected auto, dense, or an integer, got {other:?}"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData(a) => {
            let cfg = load_config(&a.config)?;
            let data = required(cfg.resolve_opt(a.data, "data")?, "data")?;
            let labels = required(cfg.resolve_opt(a.labels, "labels")?, "labels")?;
            let mechanism =
                Mechanism::parse(&required(cfg.resolve_opt(a.mechanism, "mechanism")?, "mechanism")?)?;
            let rate = required(cfg.resolve_opt(a.rate, "rate")?, "rate")?;
            let count = cfg.resolve_opt(a.count, "count")?;
            let seed = cfg.resolve(a.seed, "seed", 0)?;
            let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
            let (n, truth) = commands::gen_data(&data, &labels, mechanism, rate, count, seed, &out)?;
            println!("wrote {n} masked samples to {}", out.display());
            println!("clean truth at {}", truth.display());
        }
        Cmd::Train(a) => {
            let cfg = load_config(&a.config)?;
            let data = required(cfg.resolve_opt(a.data, "data")?, "data")?;
            let variant = Variant::parse(&cfg.resolve(a.variant, "variant", "lm".into())?)?;
            let hidden = cfg.resolve(a.hidden, "hidden", 128)?;
            let epochs = cfg.resolve(a.epochs, "epochs", 100)?;
            let batch = cfg.resolve(a.batch, "batch", 128)?;
            let lr = cfg.resolve(a.lr, "lr", 1e-4)?;
            let rank = parse_rank(&cfg.resolve(a.rank, "rank", "dense".into())?)?;
            let seed = cfg.resolve(a.seed, "seed", 0)?;
            let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
            let errors = commands::train_model(
                &data, variant, hidden, epochs, batch, lr, rank, seed, &out,
            )?;
            if let (Some(first), Some(last)) = (errors.first(), errors.last()) {
                println!(
                    "trained {} epochs; observed recon error {first:.4} -> {last:.4}",
                    errors.len()
                );
            }
            println!("checkpoint at {}", out.display());
        }
        Cmd::Impute(a) => {
            let cfg = load_config(&a.config)?;
            let data = required(cfg.resolve_opt(a.data, "data")?, "data")?;
            let method = cfg.resolve(a.method, "method", "mean".into())?;
            let model = cfg.resolve_opt(a.model, "model")?;
            let stats_data = cfg.resolve_opt(a.stats_data, "stats-data")?;
            let mode = ImputeMode::parse(&cfg.resolve(a.impute_mode, "impute-mode", "mean".into())?)?;
            let seed = cfg.resolve(a.seed, "seed", 0)?;
            let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
            let n = commands::impute(
                &data,
                &method,
                model.as_deref(),
                stats_data.as_deref(),
                mode,
                seed,
                &out,
            )?;
            println!("wrote {n} completions to {}", out.display());
        }
        Cmd::Eval(a) => {
            let cfg = load_config(&a.config)?;
            let completions =
                required(cfg.resolve_opt(a.completions, "completions")?, "completions")?;
            let truth = required(cfg.resolve_opt(a.truth, "truth")?, "truth")?;
            let train_completions = required(
                cfg.resolve_opt(a.train_completions, "train-completions")?,
                "train-completions",
            )?;
            let train_truth =
                required(cfg.resolve_opt(a.train_truth, "train-truth")?, "train-truth")?;
            let model = cfg.resolve_opt(a.model, "model")?;
            let masked_data = cfg.resolve_opt(a.masked_data, "masked-data")?;
            let masked_train = cfg.resolve_opt(a.masked_train, "masked-train")?;
            let mechanism = match cfg.resolve_opt(a.mechanism, "mechanism")? {
                Some(raw) => Some(Mechanism::parse(&raw)?),
                None => None,
            };
            let rate = cfg.resolve(a.rate, "rate", 0.0)?;
            let seed = cfg.resolve(a.seed, "seed", 0)?;
            let report = commands::evaluate(
                &completions,
                &truth,
                &train_completions,
                &train_truth,
                model.as_deref(),
                masked_data.as_deref(),
                masked_train.as_deref(),
                mechanism,
                rate,
                seed,
            )?;
            let text = format!("{}\n{}\n", commands::csv_header(), report.csv_row());
            match cfg.resolve_opt(a.out, "out")? {
                Some(path) => std::fs::write(&path, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Suite(a) => {
            let cfg = load_config(&a.config)?;
            let data = required(cfg.resolve_opt(a.data, "data")?, "data")?;
            let labels = required(cfg.resolve_opt(a.labels, "labels")?, "labels")?;
            let test_data = required(cfg.resolve_opt(a.test_data, "test-data")?, "test-data")?;
            let test_labels =
                required(cfg.resolve_opt(a.test_labels, "test-labels")?, "test-labels")?;
            let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;

            let defaults = SuiteConfig::default();
            let mut suite_cfg = defaults.clone();
            if let Some(raw) = cfg.resolve_opt(a.mechanisms, "mechanisms")? {
                suite_cfg.mechanisms = parse_list::<String>(&raw, "mechanisms")?
                    .iter()
                    .map(|s| Mechanism::parse(s))
                    .collect::<Result<_>>()?;
            }
            if let Some(raw) = cfg.resolve_opt(a.rates, "rates")? {
                suite_cfg.rates = parse_list(&raw, "rates")?;
            }
            if let Some(raw) = cfg.resolve_opt(a.methods, "methods")? {
                suite_cfg.methods = parse_list::<String>(&raw, "methods")?
                    .iter()
                    .map(|s| Method::parse(s))
                    .collect::<Result<_>>()?;
            }
            if let Some(raw) = cfg.resolve_opt(a.train_seeds, "train-seeds")? {
                suite_cfg.train_seeds = parse_list(&raw, "train-seeds")?;
            }
            suite_cfg.test_repetitions = cfg.resolve(a.reps, "reps", defaults.test_repetitions)?;
            suite_cfg.train_size = cfg.resolve(a.train_size, "train-size", defaults.train_size)?;
            suite_cfg.test_size = cfg.resolve(a.test_size, "test-size", defaults.test_size)?;
            suite_cfg.hidden_units = cfg.resolve(a.hidden, "hidden", defaults.hidden_units)?;
            suite_cfg.epochs = cfg.resolve(a.epochs, "epochs", defaults.epochs)?;
            suite_cfg.batch_size = cfg.resolve(a.batch, "batch", defaults.batch_size)?;
            suite_cfg.learning_rate = cfg.resolve(a.lr, "lr", defaults.learning_rate)?;
            if let Some(raw) = cfg.resolve_opt(a.rank, "rank")? {
                suite_cfg.rank_policy = parse_rank(&raw)?;
            }
            if let Some(raw) = cfg.resolve_opt(a.impute_mode, "impute-mode")? {
                suite_cfg.impute_mode = ImputeMode::parse(&raw)?;
            }
            suite_cfg.master_seed = cfg.resolve(a.seed, "seed", 0)?;
            suite_cfg.jobs = cfg.resolve(a.jobs, "jobs", 1)?;

            let (train_images, train_labels, h, w) = commands::load_binary_corpus(&data, &labels)?;
            let (test_images, test_labels_v, th, tw) =
                commands::load_binary_corpus(&test_data, &test_labels)?;
            if (h, w) != (th, tw) {
                return Err(Error::dim("image geometry", h * w, th * tw));
            }
            let suite_data = SuiteData {
                train_images,
                train_labels,
                test_images,
                test_labels: test_labels_v,
                height: h,
                width: w,
            };
            let csv = run_suite(&suite_cfg, &suite_data, &out)?;
            println!("results at {}", csv.display());
        }
        Cmd::Inspect(a) => {
            println!("{}", commands::inspect(&a.path)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(lmrbm_cli::exit_code(&e) as u8)
        }
    }
}
