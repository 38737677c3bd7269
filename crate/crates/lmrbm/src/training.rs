//! Minibatch CD-1 training on masked data.
//!
//! The batch update follows the linearized-marginal scheme: hidden units are
//! driven by the effective visible input `v.(1-m) + sigmoid(b).m`, one Gibbs
//! half-step pair produces the negative phase, and (for the LM variant) two
//! extra terms update the visible-unit parameters at missing positions,
//! scaled by the per-unit observation probabilities. The Zeroed variant
//! omits those two terms, which reduces to training with missing-unit
//! parameters frozen for samples where they are unobserved.
//!
//! Hot paths are batched: per-sample quantities are stacked into row-major
//! matrices so the heavy lifting is GEMM.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::missingness::{MaskedDataset, MaskedSample};
use crate::rbm::sigmoid;
use crate::rng::{derive_rng, BinarySampler};
use crate::types::{RbmParams, Weights};

/// Update variant: full linearized-marginal update, or the baseline that
/// omits the missing-unit terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Lm,
    Zeroed,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Lm => "lm",
            Variant::Zeroed => "zeroed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lm" => Ok(Variant::Lm),
            "zeroed" => Ok(Variant::Zeroed),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant '{other}' (expected lm or zeroed)"
            ))),
        }
    }
}

/// Weight rank policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankPolicy {
    /// Dense n x m weights.
    Dense,
    /// Rank fixed to the expected number of observed visible units.
    Auto,
    /// Explicit rank.
    Fixed(usize),
}

/// Training configuration.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub rank_policy: RankPolicy,
    pub hidden_units: usize,
}

impl TrainConfig {
    /// Defaults mirroring the experimental protocol: batch 128, lr 1e-4.
    pub fn new(variant: Variant, hidden_units: usize) -> Self {
        Self {
            variant,
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-4,
            seed: 0,
            rank_policy: RankPolicy::Dense,
            hidden_units,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.hidden_units == 0 {
            return Err(Error::InvalidConfig("hidden_units must be >= 1".into()));
        }
        Ok(())
    }
}

/// Accumulated parameter updates for one batch.
#[derive(Debug, Clone)]
pub struct ParamDelta {
    pub db: Array1<f64>,
    pub dc: Array1<f64>,
    pub dw: Array2<f64>,
}

impl ParamDelta {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            db: Array1::zeros(n),
            dc: Array1::zeros(m),
            dw: Array2::zeros((n, m)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.db.iter().all(|x| x.is_finite())
            && self.dc.iter().all(|x| x.is_finite())
            && self.dw.iter().all(|x| x.is_finite())
    }
}

/// One completed epoch of the training log.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Root mean squared difference between observed pixels and their
    /// reconstruction probabilities, over the epoch.
    pub recon_error: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

/// Per-visible-unit observation probability over the dataset:
/// lambda_i = #(samples with pixel i observed) / #samples.
pub fn estimate_observation_probs(dataset: &MaskedDataset) -> Result<Array1<f64>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.n_pixels();
    let mut observed = Array1::<f64>::zeros(n);
    for s in &dataset.samples {
        observed += &s.mask.observed_f64();
    }
    Ok(observed / dataset.len() as f64)
}

/// Rank rule-of-thumb: the expected number of observed visible units,
/// clamped to [1, min(n, m)].
pub fn auto_rank(lambda: &Array1<f64>, m: usize) -> usize {
    let expected: f64 = lambda.sum();
    let r = expected.round() as i64;
    (r.max(1) as usize).min(lambda.len().min(m)).max(1)
}

/// CD-1 delta for one batch, plus observed-pixel reconstruction statistics
/// (sum of squared error against reconstruction probabilities, and count).
pub fn cd1_batch_delta_with_recon<S, F>(
    p: &RbmParams,
    batch: &[&MaskedSample],
    cfg: &TrainConfig,
    mut sampler_for: F,
) -> Result<(ParamDelta, f64, usize)>
where
    S: BinarySampler,
    F: FnMut(usize) -> S,
{
    let n = p.n_visible();
    let m = p.n_hidden();
    let bsz = batch.len();
    if bsz == 0 {
        return Ok((ParamDelta::zeros(n, m), 0.0, 0));
    }
    for s in batch.iter() {
        if s.pixels.len() != n || s.mask.len() != n {
            return Err(Error::dim("batch sample", n, s.pixels.len()));
        }
    }
    let eta = cfg.learning_rate;
    let w = p.effective_weights();
    let sig_b = p.visible_bias.mapv(sigmoid);

    // Stack per-sample rows.
    let mut v_pos = Array2::<f64>::zeros((bsz, n)); // v
    let mut obs = Array2::<f64>::zeros((bsz, n)); // 1 - m
    let mut miss = Array2::<f64>::zeros((bsz, n)); // m
    for (k, s) in batch.iter().enumerate() {
        let bits = s.pixels.bits().as_slice().expect("contiguous bits");
        let missing = s.mask.missing().as_slice().expect("contiguous mask");
        let v_row = v_pos.row_mut(k).into_slice().expect("contiguous row");
        let o_row = obs.row_mut(k).into_slice().expect("contiguous row");
        let m_row = miss.row_mut(k).into_slice().expect("contiguous row");
        for i in 0..n {
            let mi = f64::from(missing[i]);
            v_row[i] = f64::from(bits[i]);
            o_row[i] = 1.0 - mi;
            m_row[i] = mi;
        }
    }
    // Effective visible input x = v.(1-m) + sigmoid(b).m
    let mut x = &v_pos * &obs;
    {
        let sig = sig_b.as_slice().expect("contiguous");
        for (mut row, miss_row) in x.axis_iter_mut(Axis(0)).zip(miss.axis_iter(Axis(0))) {
            let row = row.as_slice_mut().expect("contiguous row");
            let m = miss_row.to_slice().expect("contiguous row");
            for i in 0..n {
                row[i] += sig[i] * m[i];
            }
        }
    }

    let mut samplers: Vec<S> = (0..bsz).map(&mut sampler_for).collect();

    // Positive-phase hidden sample: h ~ Bern(sigmoid(x W + c))
    let mut h_pre = x.dot(&w.view());
    h_pre += &p.hidden_bias;
    let h = sample_rows(&h_pre.mapv(sigmoid), &mut samplers);

    // Visible reconstruction: v' ~ Bern(sigmoid(h W^T + b))
    let mut v_pre = h.dot(&w.t());
    v_pre += &p.visible_bias;
    let v_prob = v_pre.mapv(sigmoid);
    let v_neg = sample_rows(&v_prob, &mut samplers);

    // Negative-phase hidden sample from the reconstructed visibles.
    let mut x_neg = &v_neg * &obs;
    {
        let sig = sig_b.as_slice().expect("contiguous");
        for (mut row, miss_row) in x_neg.axis_iter_mut(Axis(0)).zip(miss.axis_iter(Axis(0))) {
            let row = row.as_slice_mut().expect("contiguous row");
            let m = miss_row.to_slice().expect("contiguous row");
            for i in 0..n {
                row[i] += sig[i] * m[i];
            }
        }
    }
    let mut h_neg_pre = x_neg.dot(&w.view());
    h_neg_pre += &p.hidden_bias;
    let h_neg = sample_rows(&h_neg_pre.mapv(sigmoid), &mut samplers);

    // Accumulate the batch delta.
    let h_diff = &h - &h_neg;
    let dc = h_diff.sum_axis(Axis(0)) * eta;
    let db_obs = ((&v_pos - &v_neg) * &obs).sum_axis(Axis(0)) * eta;
    let v_pos_obs = &v_pos * &obs;
    let v_neg_obs = &v_neg * &obs;
    let mut dw = v_pos_obs.t().dot(&h) - v_neg_obs.t().dot(&h_neg);
    dw *= eta;
    let mut db = db_obs;

    if cfg.variant == Variant::Lm {
        // Missing-unit terms:
        //   db += eta . lambda . b_m . (1 - sigmoid(b)) . (W (h - h'))
        //   dW += eta . (lambda . b_m) (h - h')^T
        // with b_m = sigmoid(b) . m per sample.
        let d = h_diff.dot(&w.t()); // rows W(h - h') per sample
        let masked_d = (&d * &miss).sum_axis(Axis(0));
        let scale = &p.lambda * &sig_b * sig_b.mapv(|s| 1.0 - s);
        db += &(scale * masked_d * eta);

        let lam_bm = &miss * &(&p.lambda * &sig_b); // rows lambda . b_m
        let mut dw_lm = lam_bm.t().dot(&h_diff);
        dw_lm *= eta;
        dw += &dw_lm;
    }

    // Observed-pixel reconstruction statistics for the training log.
    let err = (&v_pos - &v_prob) * &obs;
    let sq_err: f64 = err.iter().map(|e| e * e).sum();
    let obs_count = obs.sum() as usize;

    Ok((ParamDelta { db, dc, dw }, sq_err, obs_count))
}

/// CD-1 delta for one batch of masked samples.
pub fn cd1_batch_delta<S, F>(
    p: &RbmParams,
    batch: &[&MaskedSample],
    cfg: &TrainConfig,
    sampler_for: F,
) -> Result<ParamDelta>
where
    S: BinarySampler,
    F: FnMut(usize) -> S,
{
    cd1_batch_delta_with_recon(p, batch, cfg, sampler_for).map(|(d, _, _)| d)
}

fn sample_rows<S: BinarySampler>(probs: &Array2<f64>, samplers: &mut [S]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(probs.raw_dim());
    for ((mut row, src), sampler) in out
        .axis_iter_mut(Axis(0))
        .zip(probs.axis_iter(Axis(0)))
        .zip(samplers.iter_mut())
    {
        for (o, &p) in row.iter_mut().zip(src.iter()) {
            *o = f64::from(sampler.draw(p));
        }
    }
    out
}

/// Applies a batch delta. Dense weights add dW directly; factored weights
/// follow the chain rule through W = A B with both factor updates using the
/// pre-update values: A += dW B^T, B += A_pre^T dW.
pub fn apply_delta(p: &RbmParams, d: &ParamDelta) -> Result<RbmParams> {
    let n = p.n_visible();
    let m = p.n_hidden();
    if d.db.len() != n || d.dc.len() != m || d.dw.dim() != (n, m) {
        return Err(Error::dim("delta dims", n * m, d.dw.len()));
    }
    let weights = match &p.weights {
        Weights::Dense(w) => Weights::Dense(w + &d.dw),
        Weights::Factored { a, b } => {
            let da = d.dw.dot(&b.t());
            let db_f = a.t().dot(&d.dw);
            Weights::Factored {
                a: a + &da,
                b: b + &db_f,
            }
        }
    };
    Ok(RbmParams {
        visible_bias: &p.visible_bias + &d.db,
        hidden_bias: &p.hidden_bias + &d.dc,
        weights,
        lambda: p.lambda.clone(),
    })
}

// Substream tags under the master seed.
const TAG_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_SAMPLE: u64 = 3;

/// Trains an RBM on a masked dataset. Deterministic given `cfg.seed`.
pub fn train(dataset: &MaskedDataset, cfg: &TrainConfig) -> Result<(RbmParams, TrainLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.n_pixels();
    let m = cfg.hidden_units;

    let lambda = estimate_observation_probs(dataset)?;
    let weights = {
        let mut rng = derive_rng(cfg.seed, &[TAG_INIT]);
        let mut uniform = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-0.01..0.01))
        };
        match cfg.rank_policy {
            RankPolicy::Dense => Weights::Dense(uniform(n, m)),
            RankPolicy::Auto => {
                let r = auto_rank(&lambda, m);
                Weights::Factored {
                    a: uniform(n, r),
                    b: uniform(r, m),
                }
            }
            RankPolicy::Fixed(r) => {
                if r == 0 || r > n.min(m) {
                    return Err(Error::InvalidConfig(format!(
                        "fixed rank {r} outside [1, {}]",
                        n.min(m)
                    )));
                }
                Weights::Factored {
                    a: uniform(n, r),
                    b: uniform(r, m),
                }
            }
        }
    };
    let mut params = RbmParams {
        visible_bias: Array1::zeros(n),
        hidden_bias: Array1::zeros(m),
        weights,
        lambda,
    };

    let mut log = TrainLog::default();
    let count = dataset.len();
    let mut order: Vec<usize> = (0..count).collect();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut shuffle_rng = derive_rng(cfg.seed, &[TAG_SHUFFLE, epoch as u64]);
        fisher_yates(&mut order, &mut shuffle_rng);

        let mut sq_err_total = 0.0;
        let mut obs_total = 0usize;
        let mut position = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&MaskedSample> = chunk.iter().map(|&i| &dataset.samples[i]).collect();
            let base = position;
            let sampler_for = |k: usize| {
                derive_rng(cfg.seed, &[TAG_SAMPLE, epoch as u64, (base + k) as u64])
            };
            let (delta, sq_err, obs_count) =
                cd1_batch_delta_with_recon(&params, &batch, cfg, sampler_for)?;
            params = apply_delta(&params, &delta)?;
            sq_err_total += sq_err;
            obs_total += obs_count;
            position += chunk.len();
        }
        params.validate().map_err(|_| Error::NonFinite("trained parameters"))?;
        let recon_error = if obs_total > 0 {
            (sq_err_total / obs_total as f64).sqrt()
        } else {
            0.0
        };
        log.epochs.push(EpochRecord {
            epoch,
            recon_error,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((params, log))
}

fn fisher_yates<R: rand::Rng>(order: &mut [usize], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}
