//! Deterministic reductions. Batch sums are accumulated pairwise in index
//! order so results are byte-identical regardless of how many threads
//! produced the inputs.

use nalgebra::DVector;

const BLOCK: usize = 8;

/// Pairwise sum over a slice, splitting the index range in half recursively.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of equally sized vectors; returns the zero vector of
/// dimension `dim` for an empty input.
pub fn pairwise_sum_vectors(vs: &[DVector<f64>], dim: usize) -> DVector<f64> {
    match vs.len() {
        0 => DVector::zeros(dim),
        1 => vs[0].clone(),
        n if n <= BLOCK => {
            let mut acc = vs[0].clone();
            for v in &vs[1..] {
                acc += v;
            }
            acc
        }
        n => {
            let mid = n / 2;
            pairwise_sum_vectors(&vs[..mid], dim) + pairwise_sum_vectors(&vs[mid..], dim)
        }
    }
}

/// Mean via pairwise summation.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sequential_sum() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - seq).abs() < 1e-9);
    }

    #[test]
    fn vector_sum_matches() {
        let vs: Vec<DVector<f64>> = (0..37)
            .map(|i| DVector::from_fn(3, |r, _| (i * 3 + r) as f64))
            .collect();
        let total = pairwise_sum_vectors(&vs, 3);
        let mut expect = DVector::zeros(3);
        for v in &vs {
            expect += v;
        }
        assert_eq!(total, expect);
    }

    #[test]
    fn empty_vector_sum_is_zero() {
        let total = pairwise_sum_vectors(&[], 4);
        assert_eq!(total, DVector::zeros(4));
    }
}
