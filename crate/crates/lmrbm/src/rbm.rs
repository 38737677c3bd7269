//! Core RBM mathematics: energies (full, exact-observed, linearized-observed),
//! conditional distributions and sampling primitives.
//!
//! Conventions: W is stored n x m; the hidden pre-activation is `W^T x + c`
//! and the visible pre-activation is `W h + b`. Masks mark missing units
//! with 1. Missing entries of a stored visible vector are 0 and every
//! formula multiplies them out, so the sentinel is never read as data.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::rng::BinarySampler;
use crate::types::{BinaryVector, Mask, ProbabilityVector, RbmParams};

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus ln(1 + e^x) = max(x,0) + ln(1 + e^{-|x|}).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Element-wise sigmoid.
pub fn sigmoid_vec(x: &Array1<f64>) -> ProbabilityVector {
    ProbabilityVector::new_unchecked(x.mapv(sigmoid))
}

/// Element-wise softplus.
pub fn softplus_vec(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(softplus)
}

fn check_dims(p: &RbmParams, v: Option<&BinaryVector>, mask: Option<&Mask>, h: Option<&BinaryVector>) -> Result<()> {
    if let Some(v) = v {
        if v.len() != p.n_visible() {
            return Err(Error::dim("visible vector", p.n_visible(), v.len()));
        }
    }
    if let Some(m) = mask {
        if m.len() != p.n_visible() {
            return Err(Error::dim("mask", p.n_visible(), m.len()));
        }
    }
    if let Some(h) = h {
        if h.len() != p.n_hidden() {
            return Err(Error::dim("hidden vector", p.n_hidden(), h.len()));
        }
    }
    Ok(())
}

/// Full energy E(v,h) = -b^T v - v^T W h - c^T h.
pub fn energy(v: &BinaryVector, h: &BinaryVector, p: &RbmParams) -> Result<f64> {
    check_dims(p, Some(v), None, Some(h))?;
    let vf = v.to_f64();
    let hf = h.to_f64();
    let w = p.effective_weights();
    let wh = w.dot(&hf);
    Ok(-p.visible_bias.dot(&vf) - vf.dot(&wh) - p.hidden_bias.dot(&hf))
}

/// Exact observed energy after summing out the missing visible units:
/// E_o = -b_o^T v_o - v_o^T W_o h - c^T h - 1^T softplus(b_m + W_m h).
pub fn observed_energy_exact(
    v: &BinaryVector,
    mask: &Mask,
    h: &BinaryVector,
    p: &RbmParams,
) -> Result<f64> {
    check_dims(p, Some(v), Some(mask), Some(h))?;
    let obs = mask.observed_f64();
    let vf = v.to_f64();
    let vo = &vf * &obs;
    let hf = h.to_f64();
    let w = p.effective_weights();
    let wh = w.dot(&hf);
    let mut softplus_sum = 0.0;
    for (i, &mi) in mask.missing().iter().enumerate() {
        if mi == 1 {
            softplus_sum += softplus(p.visible_bias[i] + wh[i]);
        }
    }
    Ok(-p.visible_bias.dot(&vo) - vo.dot(&wh) - p.hidden_bias.dot(&hf) - softplus_sum)
}

/// Linearized observed energy:
/// E^_o = -b_o^T v_o - v_o^T W_o h - (c + W_m^T sigmoid(b_m))^T h.
pub fn observed_energy_linearized(
    v: &BinaryVector,
    mask: &Mask,
    h: &BinaryVector,
    p: &RbmParams,
) -> Result<f64> {
    check_dims(p, Some(v), Some(mask), Some(h))?;
    let obs = mask.observed_f64();
    let miss = mask.missing_f64();
    let vf = v.to_f64();
    let vo = &vf * &obs;
    let hf = h.to_f64();
    let w = p.effective_weights();
    let wh = w.dot(&hf);
    // W_m^T sigmoid(b_m) expressed over full rows: W^T (sigmoid(b) . m)
    let sig_b_m = p.visible_bias.mapv(sigmoid) * &miss;
    let shift = w.t().dot(&sig_b_m);
    Ok(-p.visible_bias.dot(&vo) - vo.dot(&wh) - (&p.hidden_bias + &shift).dot(&hf))
}

/// P(h_j = 1 | v) for fully observed v: sigmoid(W^T v + c).
pub fn hidden_conditional_full(v: &BinaryVector, p: &RbmParams) -> Result<ProbabilityVector> {
    check_dims(p, Some(v), None, None)?;
    Ok(hidden_conditional_from_input(&v.to_f64(), p))
}

/// P(h_j = 1 | v_o) under the linearized observed energy:
/// sigmoid(W^T (v . (1-m) + sigmoid(b) . m) + c).
pub fn hidden_conditional_observed(
    v: &BinaryVector,
    mask: &Mask,
    p: &RbmParams,
) -> Result<ProbabilityVector> {
    check_dims(p, Some(v), Some(mask), None)?;
    let x = effective_visible_input(v, mask, p);
    Ok(hidden_conditional_from_input(&x, p))
}

/// The effective visible input of Algorithm-style updates:
/// v . (1-m) + sigmoid(b) . m.
pub fn effective_visible_input(v: &BinaryVector, mask: &Mask, p: &RbmParams) -> Array1<f64> {
    v.to_f64() * mask.observed_f64() + p.visible_bias.mapv(sigmoid) * mask.missing_f64()
}

pub(crate) fn hidden_conditional_from_input(x: &Array1<f64>, p: &RbmParams) -> ProbabilityVector {
    let w = p.effective_weights();
    let pre = w.t().dot(x) + &p.hidden_bias;
    sigmoid_vec(&pre)
}

/// P(v_i = 1 | h) = sigmoid(W h + b).
pub fn visible_conditional(h: &BinaryVector, p: &RbmParams) -> Result<ProbabilityVector> {
    check_dims(p, None, None, Some(h))?;
    let w = p.effective_weights();
    let pre = w.dot(&h.to_f64()) + &p.visible_bias;
    Ok(sigmoid_vec(&pre))
}

/// Independent Bernoulli draws from a probability vector.
pub fn sample_bernoulli<S: BinarySampler>(probs: &ProbabilityVector, sampler: &mut S) -> BinaryVector {
    let bits = probs.probs().mapv(|p| sampler.draw(p));
    BinaryVector::from_bits_unchecked(bits)
}

const ORACLE_MAX_UNITS: usize = 12;

/// Partition function Z by exhaustive enumeration of all (v, h) states.
/// Exponential cost; guarded to n <= 12 and m <= 12. Test support only.
pub fn oracle_partition(p: &RbmParams) -> Result<f64> {
    let n = p.n_visible();
    let m = p.n_hidden();
    if n > ORACLE_MAX_UNITS || m > ORACLE_MAX_UNITS {
        return Err(Error::SizeGuard(format!(
            "oracle_partition limited to n,m <= {ORACLE_MAX_UNITS}, got n={n}, m={m}"
        )));
    }
    let mut z = 0.0;
    for vb in 0u64..(1 << n) {
        let v = bits_of(vb, n);
        for hb in 0u64..(1 << m) {
            let h = bits_of(hb, m);
            z += (-energy(&v, &h, p)?).exp();
        }
    }
    Ok(z)
}

/// Unpacks the low `len` bits of `x` into a BinaryVector (bit i = unit i).
pub fn bits_of(x: u64, len: usize) -> BinaryVector {
    BinaryVector::from_bits_unchecked(Array1::from_iter(
        (0..len).map(|i| ((x >> i) & 1) as u8),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    use crate::rng::derive_rng;

    fn zero_params(n: usize, m: usize) -> RbmParams {
        RbmParams::new_dense(Array1::zeros(n), Array1::zeros(m), Array2::zeros((n, m))).unwrap()
    }

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        for &x in &[0.3, -2.0, 17.5, 600.0] {
            let s = sigmoid(x) + sigmoid(-x);
            assert!((s - 1.0).abs() < 1e-15, "symmetry failed at {x}");
        }
        // high-precision value of 1/(1+e^50)
        let v = sigmoid(-50.0);
        assert!((v - 1.928749847963918e-22).abs() / 1.928749847963918e-22 < 1e-12);
        // stable out to |x| ~ 700
        assert!(sigmoid(-700.0) > 0.0);
        assert_eq!(sigmoid(700.0), 1.0);
    }

    #[test]
    fn softplus_basics() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        for &x in &[0.1, -3.0, 42.0] {
            assert!((softplus(x) - softplus(-x) - x).abs() < 1e-12);
        }
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn energy_zero_params_and_direct_arithmetic() {
        let p = zero_params(3, 2);
        let v = BinaryVector::from_bits(vec![1, 0, 1]).unwrap();
        let h = BinaryVector::from_bits(vec![1, 1]).unwrap();
        assert_eq!(energy(&v, &h, &p).unwrap(), 0.0);

        let p = RbmParams::new_dense(array![0.5], array![-0.25], array![[1.0]]).unwrap();
        let v = BinaryVector::from_bits(vec![1]).unwrap();
        let h = BinaryVector::from_bits(vec![1]).unwrap();
        assert!((energy(&v, &h, &p).unwrap() - (-1.25)).abs() < 1e-15);
    }

    #[test]
    fn energy_matches_triple_loop_oracle() {
        let mut rng = derive_rng(11, &[0]);
        let n = 4;
        let m = 3;
        let p = RbmParams::new_dense(
            Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0))),
            Array1::from_iter((0..m).map(|_| rng.random_range(-1.0..1.0))),
            Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let v = bits_of(0b1010, n);
        let h = bits_of(0b110, m);
        // naive elementwise-loop oracle
        let mut e = 0.0;
        for i in 0..n {
            e -= p.visible_bias[i] * f64::from(v.bits()[i]);
            for j in 0..m {
                if let crate::types::Weights::Dense(w) = &p.weights {
                    e -= f64::from(v.bits()[i]) * w[[i, j]] * f64::from(h.bits()[j]);
                }
            }
        }
        for j in 0..m {
            e -= p.hidden_bias[j] * f64::from(h.bits()[j]);
        }
        assert!((energy(&v, &h, &p).unwrap() - e).abs() < 1e-12);
    }

    #[test]
    fn observed_energy_exact_collapses() {
        let mut rng = derive_rng(5, &[1]);
        let n = 4;
        let m = 2;
        let p = RbmParams::new_dense(
            Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0))),
            Array1::from_iter((0..m).map(|_| rng.random_range(-1.0..1.0))),
            Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let v = bits_of(0b0110, n);
        let h = bits_of(0b01, m);
        // all-observed: equals the full energy exactly
        let mask = Mask::all_observed(n);
        assert_eq!(
            observed_energy_exact(&v, &mask, &h, &p).unwrap(),
            energy(&v, &h, &p).unwrap()
        );
        // all-missing, h = 0: collapses to -sum softplus(b_i)
        let mask = Mask::all_missing(n);
        let h0 = BinaryVector::zeros(m);
        let v0 = BinaryVector::zeros(n);
        let expect: f64 = -p.visible_bias.mapv(softplus).sum();
        assert!((observed_energy_exact(&v0, &mask, &h0, &p).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn linearized_equals_full_when_all_observed() {
        let p = RbmParams::new_dense(
            array![0.2, -0.4],
            array![0.1],
            array![[0.3], [-0.7]],
        )
        .unwrap();
        let v = BinaryVector::from_bits(vec![1, 0]).unwrap();
        let h = BinaryVector::from_bits(vec![1]).unwrap();
        let mask = Mask::all_observed(2);
        assert_eq!(
            observed_energy_linearized(&v, &mask, &h, &p).unwrap(),
            energy(&v, &h, &p).unwrap()
        );
    }

    #[test]
    fn linearized_remainder_is_constant_when_missing_rows_zero() {
        // W rows at missing positions all zero: E_o - E^_o = -1^T softplus(b_m)
        let mut w = Array2::zeros((3, 2));
        w[[0, 0]] = 0.4;
        w[[0, 1]] = -0.2;
        let p = RbmParams::new_dense(array![0.1, -0.3, 0.7], Array1::zeros(2), w).unwrap();
        let mask = Mask::from_missing(vec![0, 1, 1]).unwrap();
        let zeta: f64 = softplus(-0.3) + softplus(0.7);
        for hb in 0..4u64 {
            let h = bits_of(hb, 2);
            let v = BinaryVector::from_bits(vec![1, 0, 0]).unwrap();
            let eo = observed_energy_exact(&v, &mask, &h, &p).unwrap();
            let el = observed_energy_linearized(&v, &mask, &h, &p).unwrap();
            assert!((el - eo - zeta).abs() < 1e-12);
        }
    }

    #[test]
    fn hidden_conditional_trivials() {
        let n = 3;
        let m = 2;
        let p = RbmParams::new_dense(
            array![0.5, -0.5, 0.0],
            array![0.3, -0.9],
            Array2::zeros((n, m)),
        )
        .unwrap();
        let v = BinaryVector::from_bits(vec![1, 1, 0]).unwrap();
        let expect = p.hidden_bias.mapv(sigmoid);
        assert_eq!(hidden_conditional_full(&v, &p).unwrap().probs(), &expect);
        let v0 = BinaryVector::zeros(n);
        let p2 = RbmParams::new_dense(
            array![0.5, -0.5, 0.0],
            array![0.3, -0.9],
            Array2::ones((n, m)),
        )
        .unwrap();
        assert_eq!(
            hidden_conditional_full(&v0, &p2).unwrap().probs(),
            &p2.hidden_bias.mapv(sigmoid)
        );
    }

    #[test]
    fn hidden_conditional_observed_collapses() {
        let mut rng = derive_rng(3, &[2]);
        let n = 4;
        let m = 3;
        let p = RbmParams::new_dense(
            Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0))),
            Array1::from_iter((0..m).map(|_| rng.random_range(-1.0..1.0))),
            Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let v = bits_of(0b1001, n);
        // all-observed: bitwise identical to the full conditional
        let full = hidden_conditional_full(&v, &p).unwrap();
        let obs = hidden_conditional_observed(&v, &Mask::all_observed(n), &p).unwrap();
        assert_eq!(full.probs(), obs.probs());
        // all-missing: independent of v
        let mask = Mask::all_missing(n);
        let a = hidden_conditional_observed(&v, &mask, &p).unwrap();
        let b = hidden_conditional_observed(&BinaryVector::zeros(n), &mask, &p).unwrap();
        assert_eq!(a.probs(), b.probs());
        let w = p.effective_weights();
        let expect = sigmoid_vec(&(w.t().dot(&p.visible_bias.mapv(sigmoid)) + &p.hidden_bias));
        assert_eq!(a.probs(), expect.probs());
    }

    #[test]
    fn visible_conditional_trivials() {
        let p = RbmParams::new_dense(
            array![0.2, -1.0],
            array![0.0],
            Array2::zeros((2, 1)),
        )
        .unwrap();
        let h = BinaryVector::from_bits(vec![1]).unwrap();
        let expect = p.visible_bias.mapv(sigmoid);
        assert_eq!(visible_conditional(&h, &p).unwrap().probs(), &expect);
        let h0 = BinaryVector::zeros(1);
        assert_eq!(visible_conditional(&h0, &p).unwrap().probs(), &expect);
    }

    #[test]
    fn sample_bernoulli_edges_and_mean() {
        let mut rng = derive_rng(17, &[4]);
        let zeros = ProbabilityVector::new(Array1::zeros(10)).unwrap();
        let ones = ProbabilityVector::new(Array1::ones(10)).unwrap();
        assert_eq!(sample_bernoulli(&zeros, &mut rng), BinaryVector::zeros(10));
        assert!(sample_bernoulli(&ones, &mut rng).bits().iter().all(|&b| b == 1));

        let probs = ProbabilityVector::new(Array1::from_elem(100, 0.3)).unwrap();
        let mut total = 0u64;
        for _ in 0..1000 {
            total += sample_bernoulli(&probs, &mut rng)
                .bits()
                .iter()
                .map(|&b| u64::from(b))
                .sum::<u64>();
        }
        let mean = total as f64 / 1e5;
        assert!((mean - 0.3).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let probs = ProbabilityVector::new(Array1::from_elem(64, 0.5)).unwrap();
        let a = sample_bernoulli(&probs, &mut derive_rng(9, &[1, 2]));
        let b = sample_bernoulli(&probs, &mut derive_rng(9, &[1, 2]));
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_partition_trivials_and_guard() {
        let p = zero_params(3, 2);
        assert!((oracle_partition(&p).unwrap() - 32.0).abs() < 1e-9);

        let beta = 0.37;
        let p = RbmParams::new_dense(array![beta], Array1::zeros(0), Array2::zeros((1, 0))).unwrap();
        assert!((oracle_partition(&p).unwrap() - (1.0 + beta.exp())).abs() < 1e-12);

        let big = zero_params(13, 2);
        assert!(matches!(oracle_partition(&big), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn oracle_partition_normalizes_joint() {
        let mut rng = derive_rng(23, &[6]);
        let n = 4;
        let m = 3;
        let p = RbmParams::new_dense(
            Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0))),
            Array1::from_iter((0..m).map(|_| rng.random_range(-1.0..1.0))),
            Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let z = oracle_partition(&p).unwrap();
        let mut total = 0.0;
        for vb in 0..(1u64 << n) {
            for hb in 0..(1u64 << m) {
                total += (-energy(&bits_of(vb, n), &bits_of(hb, m), &p).unwrap()).exp() / z;
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = zero_params(3, 2);
        let v = BinaryVector::zeros(4);
        let h = BinaryVector::zeros(2);
        assert!(matches!(
            energy(&v, &h, &p),
            Err(Error::DimMismatch { .. })
        ));
    }
}
