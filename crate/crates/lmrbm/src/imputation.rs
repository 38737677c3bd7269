//! Completion of masked samples: RBM conditional sampling, observed-mean
//! fill, and iterative diffusion inpainting.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::missingness::{MaskedDataset, MaskedSample};
use crate::rbm::{hidden_conditional_observed, sample_bernoulli, visible_conditional};
use crate::rng::{derive_rng, BinarySampler};
use crate::types::{BinaryVector, Mask, RbmParams};

/// How the RBM fills missing pixels: Bernoulli draws from the visible
/// conditional, or the conditional probabilities themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeMode {
    Sample,
    Mean,
}

impl ImputeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImputeMode::Sample => "sample",
            ImputeMode::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(ImputeMode::Sample),
            "mean" => Ok(ImputeMode::Mean),
            other => Err(Error::InvalidConfig(format!(
                "unknown impute mode '{other}' (expected sample or mean)"
            ))),
        }
    }
}

/// A completed sample: real values in [0,1], with observed positions equal
/// to the ground-truth observed pixels exactly.
#[derive(Debug, Clone)]
pub struct Completion {
    pub values: Array1<f64>,
    pub source_mask: Mask,
}

/// Per-pixel statistics over the observed entries of a training set.
#[derive(Debug, Clone)]
pub struct PixelStats {
    pub observed_mean: Array1<f64>,
    pub observed_count: Array1<u64>,
}

/// Fallback mean for pixels never observed in training.
pub const NEVER_OBSERVED_MEAN: f64 = 0.5;

/// Per-pixel mean over samples where the pixel is observed.
pub fn train_pixel_stats(dataset: &MaskedDataset) -> Result<PixelStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.n_pixels();
    let mut sum = Array1::<f64>::zeros(n);
    let mut count = Array1::<u64>::zeros(n);
    for s in &dataset.samples {
        for i in 0..n {
            if s.mask.missing()[i] == 0 {
                sum[i] += f64::from(s.pixels.bits()[i]);
                count[i] += 1;
            }
        }
    }
    let mean = Array1::from_shape_fn(n, |i| {
        if count[i] > 0 {
            sum[i] / count[i] as f64
        } else {
            NEVER_OBSERVED_MEAN
        }
    });
    Ok(PixelStats {
        observed_mean: mean,
        observed_count: count,
    })
}

/// One Gibbs half-step pair: h ~ P(h|v_o) under the linearized observed
/// energy, then missing pixels filled from P(v|h) (draws or probabilities).
pub fn impute_rbm<S: BinarySampler>(
    p: &RbmParams,
    s: &MaskedSample,
    mode: ImputeMode,
    sampler: &mut S,
) -> Result<Completion> {
    let h_probs = hidden_conditional_observed(&s.pixels, &s.mask, p)?;
    let h = sample_bernoulli(&h_probs, sampler);
    let v_probs = visible_conditional(&h, p)?;
    let n = s.pixels.len();
    let values = Array1::from_shape_fn(n, |i| {
        if s.mask.missing()[i] == 0 {
            f64::from(s.pixels.bits()[i])
        } else {
            match mode {
                ImputeMode::Mean => v_probs.probs()[i],
                ImputeMode::Sample => f64::from(sampler.draw(v_probs.probs()[i])),
            }
        }
    });
    Ok(Completion {
        values,
        source_mask: s.mask.clone(),
    })
}

/// Missing pixels replaced by their training observed mean.
pub fn impute_mean(stats: &PixelStats, s: &MaskedSample) -> Result<Completion> {
    let n = s.pixels.len();
    if stats.observed_mean.len() != n {
        return Err(Error::dim("pixel stats", n, stats.observed_mean.len()));
    }
    let values = Array1::from_shape_fn(n, |i| {
        if s.mask.missing()[i] == 0 {
            f64::from(s.pixels.bits()[i])
        } else {
            stats.observed_mean[i]
        }
    });
    Ok(Completion {
        values,
        source_mask: s.mask.clone(),
    })
}

/// Diffusion kernel weights, the single configuration point for the
/// 3x3 inpainting stencil: zero center, eight equal neighbor weights.
pub const DIFFUSION_CENTER_WEIGHT: f64 = 0.0;
pub const DIFFUSION_NEIGHBOR_WEIGHT: f64 = 0.125;

pub const DIFFUSION_DEFAULT_ITERATIONS: usize = 200;

/// Iterative diffusion inpainting: missing pixels start at the training
/// observed mean, then `iterations` rounds of the 3x3 neighborhood stencil
/// are applied at missing positions only, observed pixels being clamped to
/// ground truth after every round. Border stencils renormalize over the
/// in-bounds weights.
pub fn impute_diffusion(
    s: &MaskedSample,
    stats: &PixelStats,
    height: usize,
    width: usize,
    iterations: usize,
) -> Result<Completion> {
    let n = height * width;
    if s.pixels.len() != n {
        return Err(Error::dim("diffusion sample", n, s.pixels.len()));
    }
    if stats.observed_mean.len() != n {
        return Err(Error::dim("diffusion stats", n, stats.observed_mean.len()));
    }
    let mut values = Array1::from_shape_fn(n, |i| {
        if s.mask.missing()[i] == 0 {
            f64::from(s.pixels.bits()[i])
        } else {
            stats.observed_mean[i]
        }
    });
    let mut next = values.clone();
    for _ in 0..iterations {
        for r in 0..height {
            for c in 0..width {
                let i = r * width + c;
                if s.mask.missing()[i] == 0 {
                    continue;
                }
                let mut acc = DIFFUSION_CENTER_WEIGHT * values[i];
                let mut weight = DIFFUSION_CENTER_WEIGHT;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let rr = r as i64 + dr;
                        let cc = c as i64 + dc;
                        if rr < 0 || cc < 0 || rr >= height as i64 || cc >= width as i64 {
                            continue;
                        }
                        acc += DIFFUSION_NEIGHBOR_WEIGHT
                            * values[(rr as usize) * width + cc as usize];
                        weight += DIFFUSION_NEIGHBOR_WEIGHT;
                    }
                }
                next[i] = if weight > 0.0 { acc / weight } else { values[i] };
            }
        }
        std::mem::swap(&mut values, &mut next);
        // observed pixels stay clamped (they are never written above)
    }
    values.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(Completion {
        values,
        source_mask: s.mask.clone(),
    })
}

/// An imputation method with its required state.
pub enum Imputer<'a> {
    Mean(&'a PixelStats),
    Diffusion {
        stats: &'a PixelStats,
        iterations: usize,
    },
    Rbm {
        params: &'a RbmParams,
        mode: ImputeMode,
    },
}

/// Completes every sample of a dataset, one independent rng substream per
/// sample, derived from `(master_seed, sample_index)`.
pub fn complete_dataset(
    imputer: &Imputer<'_>,
    dataset: &MaskedDataset,
    master_seed: u64,
) -> Result<Vec<Completion>> {
    let mut out = Vec::with_capacity(dataset.len());
    for (idx, s) in dataset.samples.iter().enumerate() {
        let completion = match imputer {
            Imputer::Mean(stats) => impute_mean(stats, s)?,
            Imputer::Diffusion { stats, iterations } => {
                impute_diffusion(s, stats, dataset.height, dataset.width, *iterations)?
            }
            Imputer::Rbm { params, mode } => {
                let mut rng = derive_rng(master_seed, &[idx as u64]);
                impute_rbm(params, s, *mode, &mut rng)?
            }
        };
        out.push(completion);
    }
    Ok(out)
}

/// Ground-truth pixels reassembled from a clean image (used by tests and
/// the evaluation pipeline).
pub fn completion_observed_matches(completion: &Completion, truth: &BinaryVector) -> bool {
    completion
        .values
        .iter()
        .zip(truth.bits())
        .zip(completion.source_mask.missing())
        .all(|((&v, &t), &m)| m == 1 || v == f64::from(t))
}
