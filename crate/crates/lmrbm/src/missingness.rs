//! Mask generation under the three missingness mechanisms and construction
//! of masked datasets.
//!
//! All mechanisms are MCAR by construction: generators never see pixel
//! values, only image geometry and an rng.

use ndarray::Array1;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::types::{BinaryVector, Mask};

/// Missingness mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    /// Independent missingness: each pixel i.i.d. Bernoulli(rate).
    Im,
    /// Square observation: everything missing except one random square.
    So,
    /// Patch missingness: a fixed number of random rectangles are missing.
    Pm,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Im => "im",
            Mechanism::So => "so",
            Mechanism::Pm => "pm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "im" => Ok(Mechanism::Im),
            "so" => Ok(Mechanism::So),
            "pm" => Ok(Mechanism::Pm),
            other => Err(Error::InvalidConfig(format!(
                "unknown mechanism '{other}' (expected im, so or pm)"
            ))),
        }
    }
}

pub const DEFAULT_PM_PATCH_COUNT: usize = 3;

/// Parameters of a mask distribution.
#[derive(Debug, Clone)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    /// Nominal missing rate in (0,1).
    pub rate: f64,
    pub image_height: usize,
    pub image_width: usize,
    /// Number of rectangles for the PM mechanism.
    pub pm_patch_count: usize,
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, rate: f64, height: usize, width: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "missing rate {rate} outside [0,1]"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        Ok(Self {
            mechanism,
            rate,
            image_height: height,
            image_width: width,
            pm_patch_count: DEFAULT_PM_PATCH_COUNT,
        })
    }

    pub fn pixels(&self) -> usize {
        self.image_height * self.image_width
    }
}

/// One training or test sample: pixels with missing entries zeroed, the
/// mask that produced them, and the class label.
#[derive(Debug, Clone)]
pub struct MaskedSample {
    pub pixels: BinaryVector,
    pub mask: Mask,
    pub label: u8,
}

/// A collection of masked samples sharing image dimensions.
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    pub samples: Vec<MaskedSample>,
    pub height: usize,
    pub width: usize,
}

impl MaskedDataset {
    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Generates a mask under the mechanism of `spec`.
pub fn gen_mask<R: Rng>(spec: &MissingnessSpec, rng: &mut R) -> Mask {
    match spec.mechanism {
        Mechanism::Im => gen_mask_im(spec, rng),
        Mechanism::So => gen_mask_so(spec, rng),
        Mechanism::Pm => gen_mask_pm(spec, rng),
    }
}

/// Independent missingness: each pixel missing with probability `rate`.
pub fn gen_mask_im<R: Rng>(spec: &MissingnessSpec, rng: &mut R) -> Mask {
    let bits = Array1::from_iter(
        (0..spec.pixels()).map(|_| u8::from(rng.random::<f64>() < spec.rate)),
    );
    Mask::from_missing_unchecked(bits)
}

/// Side length of the observed square for the SO mechanism:
/// s = round(sqrt(H*W*(1-rate))), clamped to [1, min(H,W)].
pub fn so_square_side(spec: &MissingnessSpec) -> usize {
    let s = ((spec.pixels() as f64) * (1.0 - spec.rate)).sqrt().round() as usize;
    s.clamp(1, spec.image_height.min(spec.image_width))
}

/// Square observation: all pixels missing except one randomly placed
/// s x s square kept fully inside the image.
pub fn gen_mask_so<R: Rng>(spec: &MissingnessSpec, rng: &mut R) -> Mask {
    let (h, w) = (spec.image_height, spec.image_width);
    let s = so_square_side(spec);
    let top = rng.random_range(0..=(h - s));
    let left = rng.random_range(0..=(w - s));
    let mut bits = Array1::ones(h * w);
    for r in top..top + s {
        for c in left..left + s {
            bits[r * w + c] = 0u8;
        }
    }
    Mask::from_missing_unchecked(bits)
}

/// Expected union missing fraction for `count` i.i.d. rectangles whose
/// sides are uniform integers in [lo,hi] and whose top-left corners are
/// uniform over positions keeping them fully inside the image. Exact:
/// rectangles are independent, so per-pixel coverage multiplies out.
fn pm_expected_union(h: usize, w: usize, lo: usize, hi: usize, count: usize) -> f64 {
    let cover_1d = |len: usize| -> Vec<f64> {
        // e[i] = mean over side in [lo,hi] of P(pixel i covered)
        let mut e = vec![0.0; len];
        let mut sides = 0usize;
        for side in lo..=hi.min(len) {
            let npos = (len - side + 1) as f64;
            for (i, ei) in e.iter_mut().enumerate() {
                let first = i.saturating_sub(side - 1);
                let last = i.min(len - side);
                if last >= first {
                    *ei += (last - first + 1) as f64 / npos;
                }
            }
            sides += 1;
        }
        for ei in &mut e {
            *ei /= sides as f64;
        }
        e
    };
    let ey = cover_1d(h);
    let ex = cover_1d(w);
    let mut total = 0.0;
    for &a in &ey {
        for &b in &ex {
            total += 1.0 - (1.0 - a * b).powi(count as i32);
        }
    }
    total / (h * w) as f64
}

/// Size parameter for the PM mechanism: the integer s whose induced
/// rectangle-size law [floor(s/2), floor(3s/2)] gives expected union missing
/// fraction closest to the nominal rate. Solved against the exact
/// expectation rather than a fixed area formula, which would undershoot
/// badly at high rates because of rectangle overlap.
pub fn pm_size_param(spec: &MissingnessSpec) -> usize {
    let (h, w) = (spec.image_height, spec.image_width);
    let max_side = h.min(w);
    let mut best = 1usize;
    let mut best_dev = f64::INFINITY;
    for s in 1..=2 * max_side {
        let (lo, hi) = pm_side_range(s, max_side);
        let u = pm_expected_union(h, w, lo, hi, spec.pm_patch_count);
        let dev = (u - spec.rate).abs();
        if dev < best_dev {
            best_dev = dev;
            best = s;
        }
    }
    best
}

fn pm_side_range(s: usize, max_side: usize) -> (usize, usize) {
    let lo = (s / 2).clamp(1, max_side);
    let hi = (3 * s / 2).clamp(1, max_side);
    (lo, hi.max(lo))
}

/// Patch missingness: `pm_patch_count` rectangles with independently
/// uniform sides, uniform fully-inside positions; their union is missing.
pub fn gen_mask_pm<R: Rng>(spec: &MissingnessSpec, rng: &mut R) -> Mask {
    let (h, w) = (spec.image_height, spec.image_width);
    let s = pm_size_param(spec);
    let (lo, hi) = pm_side_range(s, h.min(w));
    let mut bits = Array1::zeros(h * w);
    for _ in 0..spec.pm_patch_count {
        let rh = rng.random_range(lo..=hi);
        let rw = rng.random_range(lo..=hi);
        let top = rng.random_range(0..=(h - rh));
        let left = rng.random_range(0..=(w - rw));
        for r in top..top + rh {
            for c in left..left + rw {
                bits[r * w + c] = 1u8;
            }
        }
    }
    Mask::from_missing_unchecked(bits)
}

/// Zeroes the missing positions of `pixels` and pairs them with the mask.
pub fn apply_mask(pixels: &BinaryVector, mask: &Mask, label: u8) -> Result<MaskedSample> {
    if pixels.len() != mask.len() {
        return Err(Error::dim("apply_mask", pixels.len(), mask.len()));
    }
    let bits = Array1::from_iter(
        pixels
            .bits()
            .iter()
            .zip(mask.missing().iter())
            .map(|(&p, &m)| p & (1 - m)),
    );
    Ok(MaskedSample {
        pixels: BinaryVector::from_bits_unchecked(bits),
        mask: mask.clone(),
        label,
    })
}

/// Builds a masked dataset from clean binary images, generating an
/// independent mask per sample from the substream `(master_seed, stream_tag,
/// sample_index)`.
pub fn build_masked_dataset(
    images: &[BinaryVector],
    labels: &[u8],
    spec: &MissingnessSpec,
    master_seed: u64,
    stream_tag: u64,
) -> Result<MaskedDataset> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if images.len() != labels.len() {
        return Err(Error::dim("labels vs images", images.len(), labels.len()));
    }
    let n = spec.pixels();
    let mut samples = Vec::with_capacity(images.len());
    for (idx, (img, &label)) in images.iter().zip(labels).enumerate() {
        if img.len() != n {
            return Err(Error::dim("image pixels", n, img.len()));
        }
        let mut rng = derive_rng(master_seed, &[stream_tag, idx as u64]);
        let mask = gen_mask(spec, &mut rng);
        samples.push(apply_mask(img, &mask, label)?);
    }
    Ok(MaskedDataset {
        samples,
        height: spec.image_height,
        width: spec.image_width,
    })
}
