//! Brute-force and numerical reference computations.
//!
//! Nothing here calls the closed forms or search routines it is used to
//! check; each function enumerates or integrates directly.

use crate::graph::DependencyGraph;

/// Proper `k`-colorings of `g`, counted over all `k^n` assignments.
pub fn count_proper_colorings(g: &DependencyGraph, k: u64) -> u64 {
    let n = g.vertex_count();
    if n == 0 {
        return 1;
    }
    if k == 0 {
        return 0;
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut colors = vec![0u64; n];
    let mut count = 0;
    loop {
        if edges.iter().all(|&(a, b)| colors[a] != colors[b]) {
            count += 1;
        }
        if !advance(&mut colors, k) {
            return count;
        }
    }
}

/// Colorings of an `n`-vertex path (one color per layer) with `k` colors
/// where neighbours differ, over all `k^n` assignments.
pub fn count_path_block_colorings(n: usize, k: u64) -> u64 {
    if k == 0 {
        return 0;
    }
    let mut colors = vec![0u64; n];
    let mut count = 0;
    loop {
        if colors.windows(2).all(|w| w[0] != w[1]) {
            count += 1;
        }
        if !advance(&mut colors, k) {
            return count;
        }
    }
}

// Odometer increment in base k; false after the last assignment.
fn advance(digits: &mut [u64], k: u64) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < k {
            return true;
        }
        *d = 0;
    }
    false
}

/// Best point of `f` on `points` evenly spaced samples of `[lo, hi]`;
/// the lowest sample wins ties.
pub fn dense_grid_argmax<F, E>(mut f: F, lo: f64, hi: f64, points: usize) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    assert!(points >= 2, "grid needs at least two points");
    let mut best = (lo, f(lo)?);
    for i in 1..points {
        let r = if i == points - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (points - 1) as f64
        };
        let v = f(r)?;
        if v > best.1 {
            best = (r, v);
        }
    }
    Ok(best)
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(lo + h * i as f64)
        })
        .sum();
    h / 3.0 * (f(lo) + inner + f(hi))
}
