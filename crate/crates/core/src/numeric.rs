//! Deterministic reductions shared by the solvers.
//!
//! Per-state work is mapped in parallel, but every sum is reduced with the same
//! fixed pairwise tree, so results do not depend on the worker count.

use rayon::prelude::*;

const LEAF: usize = 32;

/// Pairwise (cascade) summation with a fixed split rule.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean of `f` over `items`, mapped in parallel and reduced pairwise.
pub fn par_mean<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    if items.is_empty() {
        return f64::NAN;
    }
    let values: Vec<f64> = items.par_iter().map(f).collect();
    pairwise_sum(&values) / items.len() as f64
}

/// Column means of a `width`-wide row produced per item.
pub fn par_mean_rows<T, F>(items: &[T], width: usize, f: F) -> Vec<f64>
where
    T: Sync,
    F: Fn(&T, &mut [f64]) + Sync + Send,
{
    if items.is_empty() {
        return vec![f64::NAN; width];
    }
    let mut rows = vec![0.0; items.len() * width];
    rows.par_chunks_mut(width)
        .zip(items.par_iter())
        .for_each(|(row, item)| f(item, row));
    let n = items.len() as f64;
    let mut column = vec![0.0; items.len()];
    (0..width)
        .map(|c| {
            for (dst, row) in column.iter_mut().zip(rows.chunks(width)) {
                *dst = row[c];
            }
            pairwise_sum(&column) / n
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `[x]_+`
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
