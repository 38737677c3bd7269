//! Metrics: missing-pixel RMSE, multinomial-logistic classification
//! accuracy (on completions and on hidden activations), and a Fréchet
//! feature distance over a small fixed extractor.
//!
//! RMSE is pooled over missing pixels only; ground truth is the binarized
//! image. The Fréchet distance is computed in the 10-logit space of a
//! frozen softmax model rather than an Inception network, and is reported
//! as "FFD" to avoid claiming FID comparability.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::imputation::Completion;
use crate::missingness::MaskedDataset;
use crate::rbm::hidden_conditional_observed;
use crate::rng::derive_rng;
use crate::types::{BinaryVector, Mask, RbmParams};

/// Multinomial logistic model: 10 x d weights plus 10 biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

pub const N_CLASSES: usize = 10;

/// Classifier training protocol, frozen for reproducibility: full-batch
/// gradient descent on standardized features.
#[derive(Debug, Clone, Copy)]
pub struct ClfProtocol {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for ClfProtocol {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.5,
        }
    }
}

/// Feature standardization to zero mean / unit variance using training-set
/// statistics. Zero-variance features pass through unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(features: &Array2<f64>) -> Self {
        let n = features.nrows() as f64;
        let mean = features.mean_axis(Axis(0)).unwrap();
        let mut var = Array1::<f64>::zeros(features.ncols());
        for row in features.axis_iter(Axis(0)) {
            for (j, (&x, &mu)) in row.iter().zip(mean.iter()).enumerate() {
                var[j] += (x - mu) * (x - mu);
            }
        }
        let std = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        });
        Self { mean, std }
    }

    pub fn apply(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features - &self.mean;
        out /= &self.std;
        out
    }
}

/// Row-wise stable softmax probabilities.
pub fn softmax_probs(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

fn check_features_labels(features: &Array2<f64>, labels: &[u8]) -> Result<()> {
    if features.nrows() != labels.len() {
        return Err(Error::dim("labels vs features", features.nrows(), labels.len()));
    }
    if labels.iter().any(|&l| l as usize >= N_CLASSES) {
        return Err(Error::InvalidConfig("label outside 0-9".into()));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("classifier features"));
    }
    Ok(())
}

fn logits(clf: &ClassifierParams, features: &Array2<f64>) -> Array2<f64> {
    features.dot(&clf.weights.t()) + &clf.biases
}

/// Mean multiclass cross-entropy of the classifier on a feature set.
pub fn cross_entropy_loss(
    clf: &ClassifierParams,
    features: &Array2<f64>,
    labels: &[u8],
) -> Result<f64> {
    check_features_labels(features, labels)?;
    let probs = softmax_probs(&logits(clf, features));
    let mut loss = 0.0;
    for (row, &label) in probs.axis_iter(Axis(0)).zip(labels) {
        loss -= row[label as usize].max(f64::MIN_POSITIVE).ln();
    }
    Ok(loss / labels.len() as f64)
}

/// Full-batch gradient descent on the multiclass cross-entropy, with the
/// mean gradient over the dataset. Deterministic given the seed.
pub fn train_softmax(
    features: &Array2<f64>,
    labels: &[u8],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<ClassifierParams> {
    check_features_labels(features, labels)?;
    if features.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = features.ncols();
    let mut rng = derive_rng(seed, &[0x50f7]);
    let mut clf = ClassifierParams {
        weights: Array2::from_shape_fn((N_CLASSES, d), |_| rng.random_range(-0.01..0.01)),
        biases: Array1::zeros(N_CLASSES),
    };
    let n = features.nrows() as f64;
    let mut onehot = Array2::<f64>::zeros((labels.len(), N_CLASSES));
    for (i, &l) in labels.iter().enumerate() {
        onehot[[i, l as usize]] = 1.0;
    }
    for _ in 0..epochs {
        let probs = softmax_probs(&logits(&clf, features));
        let diff = &probs - &onehot;
        let grad_w = diff.t().dot(features) / n;
        let grad_b = diff.sum_axis(Axis(0)) / n;
        clf.weights -= &(grad_w * learning_rate);
        clf.biases -= &(grad_b * learning_rate);
    }
    Ok(clf)
}

/// Fraction of argmax-correct predictions, ties broken toward the lowest
/// class index.
pub fn classify_accuracy(
    clf: &ClassifierParams,
    features: &Array2<f64>,
    labels: &[u8],
) -> Result<f64> {
    check_features_labels(features, labels)?;
    if clf.weights.ncols() != features.ncols() {
        return Err(Error::dim("feature dim", clf.weights.ncols(), features.ncols()));
    }
    let scores = logits(clf, features);
    let mut correct = 0usize;
    for (row, &label) in scores.axis_iter(Axis(0)).zip(labels) {
        let mut best = 0usize;
        for (j, &s) in row.iter().enumerate() {
            if s > row[best] {
                best = j;
            }
        }
        if best == label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// A standardizer plus trained softmax; the reusable unit of the
/// classification metric.
#[derive(Debug, Clone)]
pub struct ClassifierBundle {
    pub standardizer: Standardizer,
    pub params: ClassifierParams,
}

impl ClassifierBundle {
    pub fn fit(
        features: &Array2<f64>,
        labels: &[u8],
        protocol: &ClfProtocol,
        seed: u64,
    ) -> Result<Self> {
        let standardizer = Standardizer::fit(features);
        let z = standardizer.apply(features);
        let params = train_softmax(&z, labels, protocol.epochs, protocol.learning_rate, seed)?;
        Ok(Self {
            standardizer,
            params,
        })
    }

    pub fn accuracy(&self, features: &Array2<f64>, labels: &[u8]) -> Result<f64> {
        classify_accuracy(&self.params, &self.standardizer.apply(features), labels)
    }
}

/// Hidden activation probabilities of a masked sample, as a feature vector.
pub fn hidden_features(p: &RbmParams, s: &crate::missingness::MaskedSample) -> Result<Array1<f64>> {
    Ok(hidden_conditional_observed(&s.pixels, &s.mask, p)?.into_inner())
}

/// Hidden features of every sample of a dataset, stacked row-wise.
pub fn hidden_features_matrix(p: &RbmParams, dataset: &MaskedDataset) -> Result<Array2<f64>> {
    let m = p.n_hidden();
    let mut out = Array2::zeros((dataset.len(), m));
    for (i, s) in dataset.samples.iter().enumerate() {
        let f = hidden_features(p, s)?;
        out.row_mut(i).assign(&f);
    }
    Ok(out)
}

/// Pooled missing-pixel RMSE across the dataset.
pub fn rmse_missing(
    completions: &[Completion],
    ground_truth: &[BinaryVector],
    masks: &[Mask],
) -> Result<f64> {
    if completions.len() != ground_truth.len() || completions.len() != masks.len() {
        return Err(Error::dim("rmse inputs", completions.len(), ground_truth.len()));
    }
    let mut sq_sum = 0.0;
    let mut count = 0u64;
    for ((c, t), m) in completions.iter().zip(ground_truth).zip(masks) {
        if c.values.len() != t.len() || m.len() != t.len() {
            return Err(Error::dim("rmse sample", t.len(), c.values.len()));
        }
        for i in 0..t.len() {
            if m.missing()[i] == 1 {
                let d = c.values[i] - f64::from(t.bits()[i]);
                sq_sum += d * d;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidConfig("no missing pixels to score".into()));
    }
    Ok((sq_sum / count as f64).sqrt())
}

/// Fréchet distance between Gaussians fit to two feature sets:
/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the matrix
/// square root taken through the symmetric eigendecomposition of
/// S_a^{1/2} S_b S_a^{1/2}, eigenvalues clipped at zero.
pub fn frechet_feature_distance(features_a: &Array2<f64>, features_b: &Array2<f64>) -> Result<f64> {
    let d = features_a.ncols();
    if features_b.ncols() != d {
        return Err(Error::dim("feature dims", d, features_b.ncols()));
    }
    for f in [features_a, features_b] {
        if f.nrows() < d + 1 {
            return Err(Error::InvalidConfig(format!(
                "need at least {} samples for a {d}-dim Fréchet distance, got {}",
                d + 1,
                f.nrows()
            )));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("frechet features"));
        }
    }
    let (mu_a, cov_a) = gaussian_fit(features_a);
    let (mu_b, cov_b) = gaussian_fit(features_b);

    let diff = &mu_a - &mu_b;
    let mean_term: f64 = diff.iter().map(|x| x * x).sum();

    let sqrt_a = sym_sqrt(&cov_a);
    let inner = sqrt_a.dot(&cov_b).dot(&sqrt_a);
    let tr_sqrt: f64 = sym_eigenvalues(&inner)
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    let trace_a: f64 = (0..d).map(|i| cov_a[[i, i]]).sum();
    let trace_b: f64 = (0..d).map(|i| cov_b[[i, i]]).sum();
    Ok((mean_term + trace_a + trace_b - 2.0 * tr_sqrt).max(0.0))
}

fn gaussian_fit(features: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = features.nrows() as f64;
    let mean = features.mean_axis(Axis(0)).unwrap();
    let centered = features - &mean;
    let cov = centered.t().dot(&centered) / (n - 1.0);
    (mean, cov)
}

fn to_nalgebra(m: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn sym_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    // symmetrize first; the product construction is symmetric only up to
    // rounding
    let n = m.nrows();
    let sym = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]]));
    to_nalgebra(&sym)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect()
}

fn sym_sqrt(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let sym = to_nalgebra(&Array2::from_shape_fn((n, n), |(i, j)| {
        0.5 * (m[[i, j]] + m[[j, i]])
    }));
    let eig = sym.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let q = eig.eigenvectors;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, &lk) in vals.iter().enumerate() {
                acc += q[(i, k)] * lk * q[(j, k)];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// A frozen softmax model over raw pixels whose 10 pre-softmax logits are
/// the feature map for the Fréchet distance. The parameter hash identifies
/// the exact model in every report.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    standardizer: Standardizer,
    params: ClassifierParams,
    hash: String,
}

impl FeatureExtractor {
    /// Trains the extractor once on clean binarized training images.
    pub fn fit(
        images: &[BinaryVector],
        labels: &[u8],
        protocol: &ClfProtocol,
        seed: u64,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let pixels = stack_binary(images);
        let bundle = ClassifierBundle::fit(&pixels, labels, protocol, seed)?;
        let hash = {
            let bytes = bundle
                .params
                .weights
                .iter()
                .chain(bundle.params.biases.iter())
                .flat_map(|x| x.to_le_bytes());
            format!("{:016x}", fnv1a(bytes))
        };
        Ok(Self {
            standardizer: bundle.standardizer,
            params: bundle.params,
            hash,
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// 10-logit features for a batch of pixel vectors.
    pub fn features(&self, pixels: &Array2<f64>) -> Result<Array2<f64>> {
        if pixels.ncols() != self.params.weights.ncols() {
            return Err(Error::dim(
                "extractor input",
                self.params.weights.ncols(),
                pixels.ncols(),
            ));
        }
        Ok(logits(&self.params, &self.standardizer.apply(pixels)))
    }
}

/// Stacks binary vectors into an N x n f64 matrix.
pub fn stack_binary(images: &[BinaryVector]) -> Array2<f64> {
    let n = images.first().map_or(0, BinaryVector::len);
    let mut out = Array2::zeros((images.len(), n));
    for (i, img) in images.iter().enumerate() {
        out.row_mut(i).assign(&img.to_f64());
    }
    out
}

/// Stacks completion values into an N x n f64 matrix.
pub fn stack_completions(completions: &[Completion]) -> Array2<f64> {
    let n = completions.first().map_or(0, |c| c.values.len());
    let mut out = Array2::zeros((completions.len(), n));
    for (i, c) in completions.iter().enumerate() {
        out.row_mut(i).assign(&c.values);
    }
    out
}

/// Metadata attached to a metrics report.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub mechanism: String,
    pub rate: f64,
    pub method: String,
    pub variant: Option<String>,
    pub impute_mode: Option<String>,
    pub seed: u64,
    pub wall_seconds: f64,
    pub extractor_hash: String,
}

/// All metrics for one evaluated method on one test repetition.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rmse_missing: f64,
    pub ffd: f64,
    pub clf_acc_recon: f64,
    pub clf_acc_hidden: Option<f64>,
    pub meta: ReportMeta,
}

/// The bit-exact results CSV header.
pub const CSV_HEADER: &str =
    "mechanism,rate,method,variant,impute_mode,seed,rmse_missing,ffd,clf_acc_recon,clf_acc_hidden,wall_seconds";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.meta.mechanism,
            self.meta.rate,
            self.meta.method,
            self.meta.variant.as_deref().unwrap_or(""),
            self.meta.impute_mode.as_deref().unwrap_or(""),
            self.meta.seed,
            self.rmse_missing,
            self.ffd,
            self.clf_acc_recon,
            self.clf_acc_hidden
                .map(|a| a.to_string())
                .unwrap_or_default(),
            self.meta.wall_seconds,
        )
    }
}

/// Inputs to a full method evaluation.
pub struct EvalInputs<'a> {
    /// Completions of the (masked) training set, used to fit classifiers.
    pub train_completions: &'a [Completion],
    pub train_labels: &'a [u8],
    /// Completions of the test set under evaluation.
    pub test_completions: &'a [Completion],
    pub test_labels: &'a [u8],
    /// Clean binarized test images (metric ground truth).
    pub test_truth: &'a [BinaryVector],
    pub test_masks: &'a [Mask],
    /// Hidden features (train, test) for RBM methods.
    pub hidden: Option<(&'a Array2<f64>, &'a Array2<f64>)>,
}

/// Computes the full metric suite for one method: missing-pixel RMSE, FFD
/// between extractor features of the ground-truth test images and of the
/// completions, and classifier accuracies fit on training-set completions
/// (and on hidden features, when supplied).
pub fn evaluate_method(
    inputs: &EvalInputs<'_>,
    extractor: &FeatureExtractor,
    protocol: &ClfProtocol,
    mut meta: ReportMeta,
) -> Result<MetricsReport> {
    let start = std::time::Instant::now();
    let rmse = rmse_missing(inputs.test_completions, inputs.test_truth, inputs.test_masks)?;

    let truth_features = extractor.features(&stack_binary(inputs.test_truth))?;
    let completion_features = extractor.features(&stack_completions(inputs.test_completions))?;
    let ffd = frechet_feature_distance(&truth_features, &completion_features)?;

    let train_pixels = stack_completions(inputs.train_completions);
    let clf_seed = inputs.train_labels.len() as u64;
    let bundle = ClassifierBundle::fit(&train_pixels, inputs.train_labels, protocol, clf_seed)?;
    let clf_acc_recon =
        bundle.accuracy(&stack_completions(inputs.test_completions), inputs.test_labels)?;

    let clf_acc_hidden = match inputs.hidden {
        Some((train_h, test_h)) => {
            let bundle = ClassifierBundle::fit(train_h, inputs.train_labels, protocol, clf_seed)?;
            Some(bundle.accuracy(test_h, inputs.test_labels)?)
        }
        None => None,
    };

    meta.extractor_hash = extractor.hash().to_string();
    meta.wall_seconds += start.elapsed().as_secs_f64();
    Ok(MetricsReport {
        rmse_missing: rmse,
        ffd,
        clf_acc_recon,
        clf_acc_hidden,
        meta,
    })
}
