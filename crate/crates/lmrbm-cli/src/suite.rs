//! Full experiment suite: mechanisms × rates × methods, trained per seed
//! and evaluated over repeated independent test maskings, with per-row CSV
//! flushing (interrupted runs resume) and summary plots.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use lmrbm::evaluation::{
    frechet_feature_distance, hidden_features_matrix, rmse_missing, stack_binary,
    stack_completions, ClassifierBundle, ClfProtocol, FeatureExtractor, CSV_HEADER,
};
use lmrbm::imputation::{train_pixel_stats, Imputer, ImputeMode, DIFFUSION_DEFAULT_ITERATIONS};
use lmrbm::missingness::{build_masked_dataset, MaskedDataset, Mechanism, MissingnessSpec};
use lmrbm::rng::derive_seed;
use lmrbm::training::{train, RankPolicy, TrainConfig, Variant};
use lmrbm::types::{BinaryVector, Mask, RbmParams};
use lmrbm::{Error, Result};

use crate::plot::{write_curve_csv, write_line_chart, Curve};

/// A method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mean,
    Diffusion,
    RbmZeroed,
    RbmLm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Diffusion => "diffusion",
            Method::RbmZeroed => "rbm_zeroed",
            Method::RbmLm => "rbm_lm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Method::Mean),
            "diffusion" => Ok(Method::Diffusion),
            "rbm_zeroed" => Ok(Method::RbmZeroed),
            "rbm_lm" => Ok(Method::RbmLm),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (expected mean, diffusion, rbm_zeroed, rbm_lm)"
            ))),
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        match self {
            Method::RbmZeroed => Some(Variant::Zeroed),
            Method::RbmLm => Some(Variant::Lm),
            _ => None,
        }
    }

    fn id(&self) -> u64 {
        match self {
            Method::Mean => 0,
            Method::Diffusion => 1,
            Method::RbmZeroed => 2,
            Method::RbmLm => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub methods: Vec<Method>,
    /// RBM methods are trained once per listed seed; untrained methods use
    /// only the first.
    pub train_seeds: Vec<u64>,
    pub test_repetitions: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rank_policy: RankPolicy,
    pub impute_mode: ImputeMode,
    pub master_seed: u64,
    pub jobs: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            mechanisms: vec![Mechanism::Im, Mechanism::So, Mechanism::Pm],
            rates: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            methods: vec![
                Method::Mean,
                Method::Diffusion,
                Method::RbmZeroed,
                Method::RbmLm,
            ],
            train_seeds: vec![0, 1, 2],
            test_repetitions: 10,
            train_size: 10_000,
            test_size: 2_000,
            hidden_units: 128,
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-4,
            rank_policy: RankPolicy::Dense,
            impute_mode: ImputeMode::Sample,
            master_seed: 0,
            jobs: 1,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mechanisms.is_empty() || self.rates.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig(
                "mechanisms, rates, and methods must be non-empty".into(),
            ));
        }
        if self.train_seeds.is_empty() {
            return Err(Error::InvalidConfig("train_seeds must be non-empty".into()));
        }
        if self.test_repetitions == 0 {
            return Err(Error::InvalidConfig("test_repetitions must be >= 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be >= 1".into()));
        }
        for &r in &self.rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("rate {r} outside [0,1)")));
            }
        }
        Ok(())
    }
}

/// Clean binarized images and labels backing a suite run.
pub struct SuiteData {
    pub train_images: Vec<BinaryVector>,
    pub train_labels: Vec<u8>,
    pub test_images: Vec<BinaryVector>,
    pub test_labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
}

impl SuiteData {
    fn check(&self, cfg: &SuiteConfig) -> Result<()> {
        if self.train_images.len() < cfg.train_size {
            return Err(Error::InvalidConfig(format!(
                "train_size {} exceeds available {} images",
                cfg.train_size,
                self.train_images.len()
            )));
        }
        if self.test_images.len() < cfg.test_size {
            return Err(Error::InvalidConfig(format!(
                "test_size {} exceeds available {} images",
                cfg.test_size,
                self.test_images.len()
            )));
        }
        if self.train_images.len() != self.train_labels.len()
            || self.test_images.len() != self.test_labels.len()
        {
            return Err(Error::dim(
                "suite labels",
                self.train_images.len(),
                self.train_labels.len(),
            ));
        }
        Ok(())
    }
}

/// One unit of work: all repetitions of (mechanism, rate, method, seed).
#[derive(Debug, Clone, Copy)]
struct Group {
    mechanism: Mechanism,
    rate: f64,
    method: Method,
    seed: u64,
}

impl Group {
    fn coords(&self) -> [u64; 4] {
        [
            self.mechanism as u64,
            self.rate.to_bits(),
            self.method.id(),
            self.seed,
        ]
    }
}

// Substream tags for suite-level seed derivation.
const TAG_EXTRACTOR: u64 = 10;
const TAG_TRAIN_MASK: u64 = 11;
const TAG_TRAIN: u64 = 12;
const TAG_TRAIN_IMPUTE: u64 = 13;
const TAG_TEST_MASK: u64 = 14;
const TAG_TEST_IMPUTE: u64 = 15;
const TAG_CLF: u64 = 16;

fn plan(cfg: &SuiteConfig) -> Vec<Group> {
    let mut groups = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &rate in &cfg.rates {
            for &method in &cfg.methods {
                let seeds: &[u64] = if method.variant().is_some() {
                    &cfg.train_seeds
                } else {
                    &cfg.train_seeds[..1]
                };
                for &seed in seeds {
                    groups.push(Group {
                        mechanism,
                        rate,
                        method,
                        seed,
                    });
                }
            }
        }
    }
    groups
}

struct Shared<'a> {
    cfg: &'a SuiteConfig,
    data: &'a SuiteData,
    extractor: FeatureExtractor,
    truth_features: ndarray::Array2<f64>,
    protocol: ClfProtocol,
}

fn run_group(shared: &Shared<'_>, group: &Group, first_rep: usize) -> Result<Vec<String>> {
    let cfg = shared.cfg;
    let data = shared.data;
    let start = Instant::now();
    let coords = group.coords();
    let tagged = |tag: u64| -> u64 {
        derive_seed(
            cfg.master_seed,
            &[tag, coords[0], coords[1], coords[2], coords[3]],
        )
    };

    let spec = MissingnessSpec::new(group.mechanism, group.rate, data.height, data.width)?;
    let train_imgs = &data.train_images[..cfg.train_size];
    let train_labels = &data.train_labels[..cfg.train_size];
    let masked_train =
        build_masked_dataset(train_imgs, train_labels, &spec, tagged(TAG_TRAIN_MASK), 0)?;

    let stats = train_pixel_stats(&masked_train)?;
    let trained: Option<RbmParams> = match group.method.variant() {
        Some(variant) => {
            let mut tcfg = TrainConfig::new(variant, cfg.hidden_units);
            tcfg.epochs = cfg.epochs;
            tcfg.batch_size = cfg.batch_size;
            tcfg.learning_rate = cfg.learning_rate;
            tcfg.rank_policy = cfg.rank_policy;
            tcfg.seed = tagged(TAG_TRAIN);
            let (params, _) = train(&masked_train, &tcfg)?;
            Some(params)
        }
        None => None,
    };
    let imputer = match (&trained, group.method) {
        (Some(params), _) => Imputer::Rbm {
            params,
            mode: cfg.impute_mode,
        },
        (None, Method::Diffusion) => Imputer::Diffusion {
            stats: &stats,
            iterations: DIFFUSION_DEFAULT_ITERATIONS,
        },
        (None, _) => Imputer::Mean(&stats),
    };

    // Classifiers are fit once per trained model and reused across the
    // test repetitions.
    let train_completions = complete(&imputer, &masked_train, tagged(TAG_TRAIN_IMPUTE))?;
    let clf_seed = tagged(TAG_CLF);
    let recon_bundle = ClassifierBundle::fit(
        &stack_completions(&train_completions),
        train_labels,
        &shared.protocol,
        clf_seed,
    )?;
    let hidden_bundle = match &trained {
        Some(params) => {
            let feats = hidden_features_matrix(params, &masked_train)?;
            Some(ClassifierBundle::fit(
                &feats,
                train_labels,
                &shared.protocol,
                clf_seed,
            )?)
        }
        None => None,
    };
    let setup_seconds = start.elapsed().as_secs_f64() / cfg.test_repetitions as f64;

    let test_imgs = &data.test_images[..cfg.test_size];
    let test_labels = &data.test_labels[..cfg.test_size];
    let truth: Vec<BinaryVector> = test_imgs.to_vec();

    let mut rows = Vec::new();
    for rep in first_rep..cfg.test_repetitions {
        let rep_start = Instant::now();
        let rep_tag = |tag: u64| {
            derive_seed(
                cfg.master_seed,
                &[tag, coords[0], coords[1], coords[2], coords[3], rep as u64],
            )
        };
        let masked_test =
            build_masked_dataset(test_imgs, test_labels, &spec, rep_tag(TAG_TEST_MASK), 0)?;
        let completions = complete(&imputer, &masked_test, rep_tag(TAG_TEST_IMPUTE))?;
        let masks: Vec<Mask> = masked_test.samples.iter().map(|s| s.mask.clone()).collect();

        let rmse = rmse_missing(&completions, &truth, &masks)?;
        let completion_features = shared
            .extractor
            .features(&stack_completions(&completions))?;
        let ffd = frechet_feature_distance(&shared.truth_features, &completion_features)?;
        let clf_acc_recon =
            recon_bundle.accuracy(&stack_completions(&completions), test_labels)?;
        let clf_acc_hidden = match (&hidden_bundle, &trained) {
            (Some(bundle), Some(params)) => {
                let feats = hidden_features_matrix(params, &masked_test)?;
                Some(bundle.accuracy(&feats, test_labels)?)
            }
            _ => None,
        };

        let wall = setup_seconds + rep_start.elapsed().as_secs_f64();
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            group.mechanism.as_str(),
            group.rate,
            group.method.as_str(),
            group
                .method
                .variant()
                .map(|v| v.as_str().to_string())
                .unwrap_or_default(),
            if group.method.variant().is_some() {
                cfg.impute_mode.as_str()
            } else {
                ""
            },
            group.seed,
            rmse,
            ffd,
            clf_acc_recon,
            clf_acc_hidden.map(|a| a.to_string()).unwrap_or_default(),
            wall,
        ));
    }
    Ok(rows)
}

fn complete(
    imputer: &Imputer<'_>,
    dataset: &MaskedDataset,
    seed: u64,
) -> Result<Vec<lmrbm::imputation::Completion>> {
    lmrbm::imputation::complete_dataset(imputer, dataset, seed)
}

/// Runs the suite, appending to `out_dir/results.csv` (resuming a partial
/// file when present) and regenerating the plots. Returns the CSV path.
pub fn run_suite(cfg: &SuiteConfig, data: &SuiteData, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    data.check(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("results.csv");

    // Resume: count complete data rows already present.
    let existing = match std::fs::read_to_string(&csv_path) {
        Ok(text) => {
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == CSV_HEADER => {}
                Some(_) => {
                    return Err(Error::Format(format!(
                        "{}: unexpected CSV header",
                        csv_path.display()
                    )))
                }
                None => {}
            }
            lines.count()
        }
        Err(_) => 0,
    };

    let groups = plan(cfg);
    let reps = cfg.test_repetitions;
    let total_rows = groups.len() * reps;
    if existing > total_rows {
        return Err(Error::Format(format!(
            "{}: has {existing} rows but the plan holds {total_rows}",
            csv_path.display()
        )));
    }

    let protocol = ClfProtocol::default();
    let train_imgs = &data.train_images[..cfg.train_size];
    let extractor = FeatureExtractor::fit(
        train_imgs,
        &data.train_labels[..cfg.train_size],
        &protocol,
        derive_seed(cfg.master_seed, &[TAG_EXTRACTOR]),
    )?;
    let truth_features = extractor.features(&stack_binary(&data.test_images[..cfg.test_size]))?;
    let shared = Shared {
        cfg,
        data,
        extractor,
        truth_features,
        protocol,
    };

    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)?;
    if existing == 0 && file.metadata()?.len() == 0 {
        writeln!(file, "{CSV_HEADER}")?;
    }

    // Pending groups with the repetition offset to resume from.
    let pending: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .filter_map(|(g, _)| {
            let done = existing.saturating_sub(g * reps).min(reps);
            (done < reps).then_some((g, done))
        })
        .collect();

    // Chunks of `jobs` groups run concurrently; rows are written in plan
    // order after each chunk so reruns stay byte-deterministic.
    for chunk in pending.chunks(cfg.jobs.max(1)) {
        let results: Mutex<Vec<Option<Result<Vec<String>>>>> =
            Mutex::new((0..chunk.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..cfg.jobs.min(chunk.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    if k >= chunk.len() {
                        break;
                    }
                    let (g, first_rep) = chunk[k];
                    let out = run_group(&shared, &groups[g], first_rep);
                    results.lock().unwrap()[k] = Some(out);
                });
            }
        });
        for slot in results.into_inner().unwrap() {
            let rows = slot.expect("worker finished")?;
            for row in rows {
                writeln!(file, "{row}")?;
                file.flush()?;
            }
        }
    }
    drop(file);

    write_plots(cfg, &csv_path, out_dir)?;
    Ok(csv_path)
}

/// Aggregates the results CSV into per-(mechanism, metric) line charts with
/// one curve per method, averaging over seeds and repetitions.
pub fn write_plots(cfg: &SuiteConfig, csv_path: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let plots_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plots_dir)?;
    let metrics: [(usize, &str); 4] = [
        (6, "rmse_missing"),
        (7, "ffd"),
        (8, "clf_acc_recon"),
        (9, "clf_acc_hidden"),
    ];
    for &mechanism in &cfg.mechanisms {
        for &(col, metric) in &metrics {
            let mut curves: Vec<Curve> = Vec::new();
            for &method in &cfg.methods {
                let mut points = Vec::new();
                for &rate in &cfg.rates {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for line in text.lines().skip(1) {
                        let f: Vec<&str> = line.split(',').collect();
                        if f.len() <= col
                            || f[0] != mechanism.as_str()
                            || f[2] != method.as_str()
                            || f[1].parse::<f64>() != Ok(rate)
                        {
                            continue;
                        }
                        if let Ok(v) = f[col].parse::<f64>() {
                            sum += v;
                            count += 1;
                        }
                    }
                    if count > 0 {
                        points.push((rate, sum / count as f64));
                    }
                }
                if !points.is_empty() {
                    curves.push(Curve {
                        name: method.as_str().to_string(),
                        points,
                    });
                }
            }
            if curves.is_empty() {
                continue;
            }
            let stem = format!("{}_{}", mechanism.as_str(), metric);
            write_line_chart(
                &plots_dir.join(format!("{stem}.svg")),
                &format!("{} / {}", mechanism.as_str(), metric),
                metric,
                &curves,
            )?;
            write_curve_csv(&plots_dir.join(format!("{stem}.csv")), metric, &curves)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_counts_untrained_methods_once() {
        let cfg = SuiteConfig {
            mechanisms: vec![Mechanism::Im],
            rates: vec![0.3, 0.5],
            methods: vec![Method::Mean, Method::RbmLm],
            train_seeds: vec![0, 1, 2],
            ..SuiteConfig::default()
        };
        let groups = plan(&cfg);
        // per rate: 1 mean group + 3 rbm_lm groups
        assert_eq!(groups.len(), 2 * (1 + 3));
    }

    #[test]
    fn config_validation() {
        let cfg = SuiteConfig {
            rates: vec![],
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SuiteConfig {
            test_repetitions: 0,
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SuiteConfig {
            rates: vec![1.0],
            ..SuiteConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(SuiteConfig::default().validate().is_ok());
    }

    #[test]
    fn method_parse_round_trip() {
        for m in [
            Method::Mean,
            Method::Diffusion,
            Method::RbmZeroed,
            Method::RbmLm,
        ] {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("knn").is_err());
    }
}
