//! Dense-vector kernels: normalization, cosine similarity, stable
//! log-softmax and a central-difference gradient probe.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Norms at or below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;

/// A unit-norm vector. Construct through [`normalize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Embedding<T>(Vec<T>);

impl<T: Scalar> Embedding<T> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Wrap a vector without normalizing it. Only for probing losses at
    /// off-sphere points in gradient checks.
    #[cfg(test)]
    pub(crate) fn from_raw_unchecked(v: Vec<T>) -> Self {
        Embedding(v)
    }

    pub fn neg(&self) -> Self {
        Embedding(self.0.iter().map(|&x| -x).collect())
    }
}

impl<T> Deref for Embedding<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Embedding<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<T>::deserialize(d)?;
        normalize(&raw).map_err(serde::de::Error::custom)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn normalize<T: Scalar>(v: &[T]) -> Result<Embedding<T>> {
    let n = norm(v);
    if !(n > T::lit(MIN_NORM)) {
        return Err(Error::ZeroVector { norm: n.as_f64() });
    }
    Ok(Embedding(v.iter().map(|&x| x / n).collect()))
}

pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(dot(a, b).max(-T::one()).min(T::one()))
}

/// `log Σ exp(x)` with max subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `target - logsumexp(pool)`, the log-probability of `target` under a
/// softmax over `pool`. `target` is expected to be one of the pool entries.
pub fn log_softmax_term<T: Scalar>(target: T, pool: &[T]) -> Result<T> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(target - log_sum_exp(pool))
}

/// Softmax weights of `pool`, stable for any finite input.
pub fn softmax<T: Scalar>(pool: &[T]) -> Vec<T> {
    let lse = log_sum_exp(pool);
    pool.iter().map(|&x| (x - lse).exp()).collect()
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every coordinate.
pub fn finite_diff_grad<T, F>(mut f: F, x: &[T], h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    if !(h > T::zero()) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: k });
        }
        grad.push((up - down) / (h + h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_three_four() {
        let e = normalize(&[3.0_f64, 4.0]).unwrap();
        assert!(approx(e[0], 0.6, 1e-15) && approx(e[1], 0.8, 1e-15));
    }

    #[test]
    fn normalize_unit_is_identity() {
        let u = [0.0_f64, 1.0, 0.0];
        assert_eq!(normalize(&u).unwrap().as_slice(), &u);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(normalize(&[0.0_f64, 0.0]), Err(Error::ZeroVector { .. })));
        assert!(matches!(normalize(&[1e-13_f64]), Err(Error::ZeroVector { .. })));
    }

    #[test]
    fn cosine_extremes() {
        let u = normalize(&[1.0_f64, 2.0, -0.5]).unwrap();
        assert!(approx(cosine(&u, &u).unwrap(), 1.0, 1e-15));
        assert!(approx(cosine(&u, &u.neg()).unwrap(), -1.0, 1e-15));
    }

    #[test]
    fn cosine_dimension_mismatch() {
        let a = normalize(&[1.0_f64, 0.0]).unwrap();
        let b = normalize(&[1.0_f64, 0.0, 0.0]).unwrap();
        assert!(matches!(cosine(&a, &b), Err(Error::DimensionMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn log_softmax_single_term_is_zero() {
        assert_eq!(log_softmax_term(0.0_f64, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn log_softmax_two_terms() {
        // -log(1 + e^-10)
        let expected = -(1.0_f64 + (-10.0_f64).exp()).ln();
        let got = log_softmax_term(10.0_f64, &[10.0, 0.0]).unwrap();
        assert!(approx(got, expected, 1e-15));
        assert!(approx(got, -4.5399e-5, 1e-9));
    }

    #[test]
    fn log_softmax_empty_pool() {
        assert!(matches!(log_softmax_term(0.0_f64, &[]), Err(Error::EmptyPool)));
    }

    #[test]
    fn log_softmax_large_inputs_stay_finite() {
        let v = log_softmax_term(1000.0_f64, &[1000.0, 999.0, -1000.0]).unwrap();
        assert!(v.is_finite() && v < 0.0);
    }

    #[test]
    fn finite_diff_known_gradients() {
        let g = finite_diff_grad(|x: &[f64]| dot(x, x), &[1.0, 2.0], 1e-5).unwrap();
        assert!(approx(g[0], 2.0, 1e-6) && approx(g[1], 4.0, 1e-6));

        let g = finite_diff_grad(|_: &[f64]| 3.0, &[1.0, 2.0, 3.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let a = [0.5, -1.5, 2.0];
        let g = finite_diff_grad(|x: &[f64]| dot(&a, x), &[0.1, 0.2, 0.3], 1e-5).unwrap();
        for (gi, ai) in g.iter().zip(a) {
            assert!(approx(*gi, ai, 1e-7));
        }
    }

    #[test]
    fn finite_diff_reports_non_finite() {
        let r = finite_diff_grad(|x: &[f64]| if x[1] > 1.0 { f64::NAN } else { x[0] }, &[0.0, 1.0], 1e-5);
        assert!(matches!(r, Err(Error::NonFiniteEvaluation { coordinate: 1 })));
        assert!(finite_diff_grad(|x: &[f64]| x[0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let e = normalize(&[3.0_f32, 4.0]).unwrap();
        assert!((e[0] - 0.6).abs() < 1e-6);
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0_f64, 1..24).prop_filter("non-zero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn normalize_has_unit_norm_and_is_idempotent(v in nonzero_vec()) {
            let e = normalize(&v).unwrap();
            prop_assert!((norm(&e) - 1.0).abs() < 1e-9);
            let e2 = normalize(&e).unwrap();
            for (a, b) in e.iter().zip(e2.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // direction preserved
            prop_assert!(dot(&e, &v) > 0.0);
        }

        #[test]
        fn cosine_symmetric_and_matches_summation(
            (a, b) in (2usize..16).prop_flat_map(|n| (
                prop::collection::vec(-5.0..5.0_f64, n),
                prop::collection::vec(-5.0..5.0_f64, n),
            ))
        ) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let (ea, eb) = (normalize(&a).unwrap(), normalize(&b).unwrap());
            let c = cosine(&ea, &eb).unwrap();
            prop_assert_eq!(c, cosine(&eb, &ea).unwrap());
            let mut oracle = 0.0;
            for i in 0..ea.dim() {
                oracle += ea[i] * eb[i];
            }
            prop_assert!((c - oracle.clamp(-1.0, 1.0)).abs() <= 1e-12);
            prop_assert!((cosine(&ea, &ea).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn log_softmax_shift_invariant_and_nonpositive(
            pool in prop::collection::vec(-20.0..20.0_f64, 1..12),
            idx in 0usize..12,
            shift in -50.0..50.0_f64,
        ) {
            let t = pool[idx % pool.len()];
            let base = log_softmax_term(t, &pool).unwrap();
            let shifted: Vec<f64> = pool.iter().map(|x| x + shift).collect();
            let moved = log_softmax_term(t + shift, &shifted).unwrap();
            prop_assert!((base - moved).abs() <= 1e-12);
            prop_assert!(base <= 0.0);
        }
    }
}
