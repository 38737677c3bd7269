//! Implementations behind the CLI subcommands. Kept in the library so
//! integration tests can drive them without spawning processes.

use std::path::{Path, PathBuf};

use lmrbm::evaluation::{
    evaluate_method, hidden_features_matrix, ClfProtocol, EvalInputs, FeatureExtractor,
    MetricsReport, ReportMeta, CSV_HEADER,
};
use lmrbm::imputation::{train_pixel_stats, Imputer, ImputeMode, DIFFUSION_DEFAULT_ITERATIONS};
use lmrbm::io::{
    binarize_images, load_checkpoint, load_idx_images, load_idx_labels, read_completions,
    read_masked_dataset, save_checkpoint, write_completions, write_masked_dataset, CompletionSet,
};
use lmrbm::missingness::{build_masked_dataset, MaskedDataset, Mechanism, MissingnessSpec};
use lmrbm::training::{train, RankPolicy, TrainConfig, Variant};
use lmrbm::types::{BinaryVector, Mask, Weights};
use lmrbm::{Error, Result};

pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// Loads an IDX image/label pair and binarizes at the standard threshold.
pub fn load_binary_corpus(
    images_path: &Path,
    labels_path: &Path,
) -> Result<(Vec<BinaryVector>, Vec<u8>, usize, usize)> {
    let images = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.pixels.len() != labels.len() {
        return Err(Error::dim("images vs labels", images.pixels.len(), labels.len()));
    }
    let binary = binarize_images(&images, BINARIZE_THRESHOLD);
    Ok((binary, labels, images.height, images.width))
}

/// Path of the clean-truth companion written next to a masked dataset.
pub fn truth_path(masked_out: &Path) -> PathBuf {
    let stem = masked_out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let ext = masked_out
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "lmds".into());
    masked_out.with_file_name(format!("{stem}-truth.{ext}"))
}

/// `gen-data`: masks a binarized IDX corpus and writes the masked dataset
/// plus a clean-truth companion (`<out>-truth`).
#[allow(clippy::too_many_arguments)]
pub fn gen_data(
    images_path: &Path,
    labels_path: &Path,
    mechanism: Mechanism,
    rate: f64,
    count: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<(usize, PathBuf)> {
    let (images, labels, height, width) = load_binary_corpus(images_path, labels_path)?;
    let take = count.unwrap_or(images.len()).min(images.len());
    if take == 0 {
        return Err(Error::EmptyDataset);
    }
    let spec = MissingnessSpec::new(mechanism, rate, height, width)?;
    let masked = build_masked_dataset(&images[..take], &labels[..take], &spec, seed, 0)?;
    write_masked_dataset(&masked, out)?;

    // clean companion: same pixels, nothing missing
    let clean = MaskedDataset {
        samples: images[..take]
            .iter()
            .zip(&labels[..take])
            .map(|(img, &label)| lmrbm::missingness::MaskedSample {
                pixels: img.clone(),
                mask: Mask::all_observed(img.len()),
                label,
            })
            .collect(),
        height,
        width,
    };
    let tpath = truth_path(out);
    write_masked_dataset(&clean, &tpath)?;
    Ok((take, tpath))
}

/// `train`: trains an RBM on a masked dataset and writes a checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    data: &Path,
    variant: Variant,
    hidden: usize,
    epochs: usize,
    batch: usize,
    lr: f64,
    rank: RankPolicy,
    seed: u64,
    out: &Path,
) -> Result<Vec<f64>> {
    let dataset = read_masked_dataset(data)?;
    let mut cfg = TrainConfig::new(variant, hidden);
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.rank_policy = rank;
    cfg.seed = seed;
    let (params, log) = train(&dataset, &cfg)?;
    save_checkpoint(&params, variant, out)?;
    Ok(log.epochs.iter().map(|e| e.recon_error).collect())
}

/// `impute`: completes a masked dataset with one of the methods and writes
/// an LMCP file. Pixel statistics for mean/diffusion come from
/// `stats_data` when given (normally the training set), else from the
/// input itself.
pub fn impute(
    data: &Path,
    method: &str,
    model: Option<&Path>,
    stats_data: Option<&Path>,
    mode: ImputeMode,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    let dataset = read_masked_dataset(data)?;
    let stats_source = match stats_data {
        Some(p) => read_masked_dataset(p)?,
        None => dataset.clone(),
    };
    let stats = train_pixel_stats(&stats_source)?;
    let loaded;
    let imputer = match method {
        "mean" => Imputer::Mean(&stats),
        "diffusion" => Imputer::Diffusion {
            stats: &stats,
            iterations: DIFFUSION_DEFAULT_ITERATIONS,
        },
        "rbm" => {
            let path = model.ok_or_else(|| {
                Error::InvalidConfig("method rbm requires --model".into())
            })?;
            loaded = load_checkpoint(path)?.0;
            Imputer::Rbm {
                params: &loaded,
                mode,
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown impute method {other:?} (expected mean, diffusion, rbm)"
            )))
        }
    };
    let completions = lmrbm::imputation::complete_dataset(&imputer, &dataset, seed)?;
    let set = CompletionSet {
        labels: dataset.samples.iter().map(|s| s.label).collect(),
        completions,
        height: dataset.height,
        width: dataset.width,
    };
    write_completions(&set, out)?;
    Ok(set.completions.len())
}

/// `eval`: scores test completions against clean truth, fitting classifiers
/// on training completions. Hidden-feature accuracy is reported when a
/// checkpoint and the masked datasets are supplied.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    completions_path: &Path,
    truth: &Path,
    train_completions_path: &Path,
    train_truth: &Path,
    model: Option<&Path>,
    masked_test: Option<&Path>,
    masked_train: Option<&Path>,
    mechanism: Option<Mechanism>,
    rate: f64,
    seed: u64,
) -> Result<MetricsReport> {
    let test_set = read_completions(completions_path)?;
    let truth_set = read_masked_dataset(truth)?;
    let train_set = read_completions(train_completions_path)?;
    let train_truth_set = read_masked_dataset(train_truth)?;
    if truth_set.len() != test_set.completions.len() {
        return Err(Error::dim(
            "truth vs completions",
            test_set.completions.len(),
            truth_set.len(),
        ));
    }
    let truth_images: Vec<BinaryVector> =
        truth_set.samples.iter().map(|s| s.pixels.clone()).collect();
    let masks: Vec<Mask> = test_set
        .completions
        .iter()
        .map(|c| c.source_mask.clone())
        .collect();

    let protocol = ClfProtocol::default();
    let train_images: Vec<BinaryVector> = train_truth_set
        .samples
        .iter()
        .map(|s| s.pixels.clone())
        .collect();
    let train_labels: Vec<u8> = train_truth_set.samples.iter().map(|s| s.label).collect();
    let extractor = FeatureExtractor::fit(&train_images, &train_labels, &protocol, seed)?;

    let hidden_feats = match (model, masked_test, masked_train) {
        (Some(model), Some(mt), Some(mtr)) => {
            let (params, _) = load_checkpoint(model)?;
            let test_ds = read_masked_dataset(mt)?;
            let train_ds = read_masked_dataset(mtr)?;
            Some((
                hidden_features_matrix(&params, &train_ds)?,
                hidden_features_matrix(&params, &test_ds)?,
            ))
        }
        _ => None,
    };

    let meta = ReportMeta {
        mechanism: mechanism.map(|m| m.as_str().to_string()).unwrap_or_default(),
        rate,
        method: "custom".into(),
        variant: None,
        impute_mode: None,
        seed,
        wall_seconds: 0.0,
        extractor_hash: String::new(),
    };
    let inputs = EvalInputs {
        train_completions: &train_set.completions,
        train_labels: &train_set.labels,
        test_completions: &test_set.completions,
        test_labels: &test_set.labels,
        test_truth: &truth_images,
        test_masks: &masks,
        hidden: hidden_feats.as_ref().map(|(a, b)| (a, b)),
    };
    evaluate_method(&inputs, &extractor, &protocol, meta)
}

/// `inspect`: a one-screen summary of any artifact file, sniffed by magic.
pub fn inspect(path: &Path) -> Result<String> {
    let mut magic = [0u8; 4];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        f.read_exact(&mut magic)?;
    }
    let mut out = String::new();
    use std::fmt::Write as _;
    match &magic {
        b"LMDS" => {
            let ds = read_masked_dataset(path)?;
            let total: usize = ds.samples.iter().map(|s| s.mask.missing_count()).sum();
            let rate = total as f64 / (ds.len() * ds.n_pixels()) as f64;
            let _ = writeln!(out, "masked dataset (LMDS)");
            let _ = writeln!(out, "samples: {}", ds.len());
            let _ = writeln!(out, "image: {}x{}", ds.height, ds.width);
            let _ = writeln!(out, "mean missing rate: {rate:.4}");
        }
        b"LMCP" => {
            let set = read_completions(path)?;
            let _ = writeln!(out, "completions (LMCP)");
            let _ = writeln!(out, "samples: {}", set.completions.len());
            let _ = writeln!(out, "image: {}x{}", set.height, set.width);
        }
        b"LMRB" => {
            let (params, variant) = load_checkpoint(path)?;
            let _ = writeln!(out, "rbm checkpoint (LMRB)");
            let _ = writeln!(out, "variant: {}", variant.as_str());
            let _ = writeln!(
                out,
                "visible: {}  hidden: {}",
                params.n_visible(),
                params.n_hidden()
            );
            match &params.weights {
                Weights::Dense(_) => {
                    let _ = writeln!(out, "weights: dense");
                }
                Weights::Factored { a, .. } => {
                    let _ = writeln!(out, "weights: factored, rank {}", a.ncols());
                }
            }
            let w = params.effective_weights();
            let frob = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let _ = writeln!(out, "weight frobenius norm: {frob:.6}");
            let _ = writeln!(
                out,
                "mean lambda: {:.4}",
                params.lambda.sum() / params.lambda.len() as f64
            );
        }
        _ => {
            // try big-endian IDX magics
            let be = u32::from_be_bytes(magic);
            match be {
                2051 => {
                    let imgs = load_idx_images(path)?;
                    let _ = writeln!(out, "IDX images");
                    let _ = writeln!(out, "count: {}", imgs.pixels.len());
                    let _ = writeln!(out, "image: {}x{}", imgs.height, imgs.width);
                }
                2049 => {
                    let labels = load_idx_labels(path)?;
                    let _ = writeln!(out, "IDX labels");
                    let _ = writeln!(out, "count: {}", labels.len());
                }
                other => {
                    return Err(Error::Format(format!(
                        "{}: unrecognized magic {magic:?} / {other}",
                        path.display()
                    )))
                }
            }
        }
    }
    let _ = write!(out, "path: {}", path.display());
    Ok(out)
}

/// Shared header accessor so the binary prints the canonical header.
pub fn csv_header() -> &'static str {
    CSV_HEADER
}
