use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::{Array1, Array2};
use rand::Rng;

use lmrbm::evaluation::frechet_feature_distance;
use lmrbm::imputation::{impute_diffusion, train_pixel_stats};
use lmrbm::missingness::{build_masked_dataset, gen_mask, Mechanism, MissingnessSpec};
use lmrbm::rng::derive_rng;
use lmrbm::training::{cd1_batch_delta, RankPolicy, TrainConfig, Variant};
use lmrbm::types::{BinaryVector, RbmParams, Weights};

const N: usize = 784;
const M: usize = 128;
const BATCH: usize = 128;

fn random_images(count: usize, seed: u64) -> Vec<BinaryVector> {
    let mut rng = derive_rng(seed, &[0]);
    (0..count)
        .map(|_| {
            BinaryVector::from_bits((0..N).map(|_| rng.random_range(0..=1u8)).collect()).unwrap()
        })
        .collect()
}

fn random_params(seed: u64, rank: Option<usize>) -> RbmParams {
    let mut rng = derive_rng(seed, &[1]);
    let weights = match rank {
        None => Weights::Dense(Array2::from_shape_fn((N, M), |_| {
            rng.random_range(-0.01..0.01)
        })),
        Some(r) => Weights::Factored {
            a: Array2::from_shape_fn((N, r), |_| rng.random_range(-0.1..0.1)),
            b: Array2::from_shape_fn((r, M), |_| rng.random_range(-0.1..0.1)),
        },
    };
    RbmParams {
        visible_bias: Array1::zeros(N),
        hidden_bias: Array1::zeros(M),
        weights,
        lambda: Array1::from_elem(N, 0.7),
    }
}

fn bench_cd1(c: &mut Criterion) {
    let images = random_images(BATCH, 11);
    let labels = vec![0u8; BATCH];
    let spec = MissingnessSpec::new(Mechanism::Im, 0.3, 28, 28).unwrap();
    let ds = build_masked_dataset(&images, &labels, &spec, 5, 0).unwrap();
    let batch: Vec<_> = ds.samples.iter().collect();
    let mut cfg = TrainConfig::new(Variant::Lm, M);
    cfg.rank_policy = RankPolicy::Dense;

    c.bench_function("cd1_batch_dense_784x128_b128", |b| {
        let params = random_params(3, None);
        b.iter(|| {
            cd1_batch_delta(&params, &batch, &cfg, |k| derive_rng(7, &[k as u64])).unwrap()
        })
    });
    c.bench_function("cd1_batch_factored_r16_784x128_b128", |b| {
        let params = random_params(4, Some(16));
        b.iter(|| {
            cd1_batch_delta(&params, &batch, &cfg, |k| derive_rng(7, &[k as u64])).unwrap()
        })
    });
}

fn bench_masks(c: &mut Criterion) {
    for (name, mech) in [
        ("mask_im", Mechanism::Im),
        ("mask_so", Mechanism::So),
        ("mask_pm", Mechanism::Pm),
    ] {
        let spec = MissingnessSpec::new(mech, 0.6, 28, 28).unwrap();
        c.bench_function(name, |b| {
            let mut rng = derive_rng(9, &[0]);
            b.iter(|| gen_mask(&spec, &mut rng))
        });
    }
}

fn bench_ffd(c: &mut Criterion) {
    let mut rng = derive_rng(13, &[0]);
    let a = Array2::from_shape_fn((2000, 10), |_| rng.random_range(-1.0..1.0));
    let b2 = Array2::from_shape_fn((2000, 10), |_| rng.random_range(-0.5..1.5));
    c.bench_function("ffd_2000x10", |b| {
        b.iter(|| frechet_feature_distance(&a, &b2).unwrap())
    });
}

fn bench_diffusion(c: &mut Criterion) {
    let images = random_images(64, 17);
    let labels = vec![0u8; 64];
    let spec = MissingnessSpec::new(Mechanism::Im, 0.5, 28, 28).unwrap();
    let ds = build_masked_dataset(&images, &labels, &spec, 21, 0).unwrap();
    let stats = train_pixel_stats(&ds).unwrap();
    c.bench_function("diffusion_200it_28x28", |b| {
        b.iter_batched(
            || ds.samples[0].clone(),
            |s| impute_diffusion(&s, &stats, 28, 28, 200).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_cd1, bench_masks, bench_ffd, bench_diffusion);
criterion_main!(benches);
