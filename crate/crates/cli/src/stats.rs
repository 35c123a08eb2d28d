//! Small statistics helpers for sweep summaries.

use cyclosync::seed::rng;
use rand::Rng;

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}

/// Bootstrap distribution of `stat` over resamples of `n` items, sorted.
pub fn bootstrap(
    n: usize,
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[usize]) -> f64,
) -> Vec<f64> {
    let mut r = rng(seed);
    let mut idx = vec![0usize; n];
    let mut out: Vec<f64> = (0..resamples)
        .map(|_| {
            for i in idx.iter_mut() {
                *i = r.random_range(0..n);
            }
            stat(&idx)
        })
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Empirical quantile of sorted data (nearest rank).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((correlation(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let data = [1.0, 2.0, 3.0, 4.0];
        let stat = |idx: &[usize]| idx.iter().map(|&i| data[i]).sum::<f64>();
        assert_eq!(bootstrap(4, 100, 9, stat), bootstrap(4, 100, 9, stat));
        let s = bootstrap(4, 200, 9, stat);
        assert!(quantile(&s, 0.05) <= quantile(&s, 0.95));
    }
}
