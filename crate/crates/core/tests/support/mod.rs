//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's information-theory, selection or
//! SVM code; only plain data types are shared.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nmibs::datacube::{CubeHeader, DataType, GroundTruth, HyperCube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// information theory
// ---------------------------------------------------------------------------

/// Symbol counts in first-seen order of the symbol value.
pub fn symbol_counts(symbols: &[u32]) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for &s in symbols {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    counts
}

/// Entropy in bits via natural log, summed in symbol order.
pub fn entropy_naive(counts: impl IntoIterator<Item = u64>) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: u64 = counts.iter().sum();
    let mut h = 0.0;
    for c in counts {
        let p = c as f64 / n as f64;
        h -= p * p.ln();
    }
    h / std::f64::consts::LN_2
}

/// Joint counts by scanning every (i, j) cell over every pixel.
pub fn brute_joint(a: &[u32], b: &[u32], bins_a: usize, bins_b: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; bins_b]; bins_a];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a
                .iter()
                .zip(b)
                .filter(|(&x, &y)| x as usize == i && y as usize == j)
                .count() as u64;
        }
    }
    out
}

pub struct BruteInfo {
    pub ha: f64,
    pub hb: f64,
    pub hab: f64,
}

impl BruteInfo {
    pub fn of(a: &[u32], b: &[u32], bins_a: usize, bins_b: usize) -> Self {
        let joint = brute_joint(a, b, bins_a, bins_b);
        BruteInfo {
            ha: entropy_naive(symbol_counts(a).into_values()),
            hb: entropy_naive(symbol_counts(b).into_values()),
            hab: entropy_naive(joint.into_iter().flatten()),
        }
    }

    pub fn nmi(&self) -> Option<f64> {
        (self.hab > 0.0).then(|| (self.ha + self.hb) / self.hab)
    }

    pub fn mi(&self) -> f64 {
        self.ha + self.hb - self.hab
    }
}

// ---------------------------------------------------------------------------
// step-by-step greedy selection
// ---------------------------------------------------------------------------

fn min_max_levels(values: &[f64], bins: usize) -> Vec<u32> {
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        if hi > lo {
            let level = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
            out.push(level.min(bins - 1) as u32);
        } else {
            out.push(0);
        }
    }
    out
}

fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Entropy with the ascending-count summation order.
fn entropy_sorted(mut counts: Vec<u64>) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort();
    let n = counts.iter().sum::<u64>() as f64;
    let mut h = 0.0;
    for c in counts {
        let p = c as f64 / n;
        h += -p * p.log2();
    }
    if h < 0.0 {
        0.0
    } else {
        h
    }
}

fn ordered_nmi(gt: &[u16], levels: &[u32]) -> Option<f64> {
    let mut g: BTreeMap<u16, u64> = BTreeMap::new();
    let mut l: BTreeMap<u32, u64> = BTreeMap::new();
    let mut j: BTreeMap<(u16, u32), u64> = BTreeMap::new();
    for (&a, &b) in gt.iter().zip(levels) {
        *g.entry(a).or_default() += 1;
        *l.entry(b).or_default() += 1;
        *j.entry((a, b)).or_default() += 1;
    }
    let hj = entropy_sorted(j.into_values().collect());
    if hj <= 0.0 {
        return None;
    }
    Some((entropy_sorted(g.into_values().collect()) + entropy_sorted(l.into_values().collect())) / hj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub band: usize,
    pub score: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSelection {
    pub selected: Vec<usize>,
    pub steps: Vec<OracleStep>,
}

/// Literal greedy loop: pick the best remaining band by its own NMI with the
/// labels, average it into the running estimate, keep it on strict gain.
pub fn greedy_oracle(
    cube: &HyperCube,
    gt: &GroundTruth,
    k: usize,
    th: f64,
    bins: usize,
) -> Option<OracleSelection> {
    let pixels: Vec<usize> = (0..gt.labels().len()).filter(|&p| gt.labels()[p] != 0).collect();
    let labels: Vec<u16> = pixels.iter().map(|&p| gt.labels()[p]).collect();
    let n = cube.band_count();
    let band_values = |b: usize| -> Vec<f64> { pixels.iter().map(|&p| cube.band(b)[p]).collect() };
    let nmi_of_band: Vec<Option<f64>> = (0..n)
        .map(|b| ordered_nmi(&labels, &min_max_levels(&band_values(b), bins)))
        .collect();

    let better = |a: usize, b: usize| -> bool {
        // true if band a should be picked before band b
        match (nmi_of_band[a], nmi_of_band[b]) {
            (Some(x), Some(y)) => x > y || (x == y && a < b),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => a < b,
        }
    };
    let argmax = |pool: &[usize]| -> usize {
        let mut best = pool[0];
        for &b in &pool[1..] {
            if better(b, best) {
                best = b;
            }
        }
        best
    };

    let mut pool: Vec<usize> = (0..n).collect();
    let first = argmax(&pool);
    nmi_of_band[first]?;
    pool.retain(|&b| b != first);
    let mut selected = vec![first];
    let mut est = min_max_scale(&band_values(first));
    let mut best_nmi = ordered_nmi(&labels, &min_max_levels(&est, bins));
    let mut steps = vec![OracleStep {
        band: first,
        score: best_nmi,
        accepted: true,
    }];

    let mut z = 0;
    while selected.len() < k && z < n - 1 {
        let b = argmax(&pool);
        pool.retain(|&x| x != b);
        let scaled = min_max_scale(&band_values(b));
        let trial: Vec<f64> = (0..est.len()).map(|i| (est[i] + scaled[i]) / 2.0).collect();
        let score = ordered_nmi(&labels, &min_max_levels(&trial, bins));
        let accept = match (score, best_nmi) {
            (Some(s), Some(cur)) => s > cur + th,
            (Some(_), None) => true,
            _ => false,
        };
        if accept {
            selected.push(b);
            est = trial;
            best_nmi = score;
        }
        steps.push(OracleStep {
            band: b,
            score,
            accepted: accept,
        });
        z += 1;
    }
    Some(OracleSelection { selected, steps })
}

/// Small random cube with exact duplicates, constants and coarse values, so
/// that ties are common. Values are multiples of 1/4 (exact in f32).
pub fn random_small_cube(rng: &mut ChaCha8Rng, max_bands: usize) -> (HyperCube, GroundTruth) {
    let samples = rng.random_range(3..=12);
    let lines = rng.random_range(1..=3);
    let pixels = samples * lines;
    let n = rng.random_range(1..=max_bands);
    let classes = rng.random_range(1..=4u16);
    let mut labels: Vec<u16> = (0..pixels)
        .map(|_| {
            if rng.random_bool(0.15) {
                0
            } else {
                rng.random_range(1..=classes)
            }
        })
        .collect();
    if labels.iter().all(|&l| l == 0) {
        labels[0] = 1;
    }
    let mut bands: Vec<Vec<f64>> = Vec::with_capacity(n);
    for b in 0..n {
        let kind = rng.random_range(0..5);
        let band: Vec<f64> = match kind {
            0 if b > 0 => bands[rng.random_range(0..b)].clone(),
            1 => vec![rng.random_range(0..8) as f64 / 4.0; pixels],
            2 => labels
                .iter()
                .map(|&l| l as f64 + rng.random_range(-2..=2) as f64 / 4.0)
                .collect(),
            _ => (0..pixels).map(|_| rng.random_range(0..40) as f64 / 4.0).collect(),
        };
        bands.push(band);
    }
    let header = CubeHeader::new(samples, lines, n, DataType::F32).unwrap();
    let cube = HyperCube::from_values(header, bands.concat()).unwrap();
    let gt = GroundTruth::new(samples, lines, labels).unwrap();
    (cube, gt)
}

// ---------------------------------------------------------------------------
// SVM dual
// ---------------------------------------------------------------------------

pub fn gaussian(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d).exp()
}

pub fn gram(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    x.iter().map(|a| x.iter().map(|b| gaussian(a, b, gamma)).collect()).collect()
}

pub fn dual_value(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, sum y a = 0}` by bisection on
/// the multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let residual = |lambda: f64| -> f64 {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c) * yi)
            .sum()
    };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    // residual is non-increasing in lambda
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter()
        .zip(y)
        .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c))
        .collect()
}

/// Accelerated projected gradient ascent on the dual, with restarts.
pub fn dual_maximizer(x: &[Vec<f64>], y: &[f64], gamma: f64, c: f64, iterations: usize) -> Vec<f64> {
    let k = gram(x, gamma);
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let objective = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| a[i] * (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    // Lipschitz bound of the gradient: max row sum of |Q|
    let lip = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lip;
    let mut alpha = vec![0.0; n];
    let mut value = objective(&alpha);
    let mut momentum = alpha.clone();
    let mut t = 1.0f64;
    let mut still = 0;
    for _ in 0..iterations {
        let ascended: Vec<f64> = (0..n)
            .map(|i| momentum[i] + step * (1.0 - (0..n).map(|j| q[i][j] * momentum[j]).sum::<f64>()))
            .collect();
        let next = project(&ascended, y, c);
        let next_value = objective(&next);
        let moved = next.iter().zip(&alpha).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if next_value < value {
            // restart from the last iterate
            momentum = alpha.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - alpha[i]))
            .collect();
        t = t_next;
        alpha = next;
        value = next_value;
        still = if moved < 1e-15 * c { still + 1 } else { 0 };
        if still >= 50 {
            break;
        }
    }
    alpha
}

/// Bias from the KKT conditions: mean over free multipliers, else the
/// midpoint of the feasible interval.
pub fn dual_bias(alpha: &[f64], x: &[Vec<f64>], y: &[f64], gamma: f64, c: f64) -> f64 {
    let k = gram(x, gamma);
    let n = alpha.len();
    let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum()).collect();
    let eps = 1e-6 * c;
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > eps && alpha[i] < c - eps).collect();
    if !free.is_empty() {
        return free.iter().map(|&i| y[i] - g[i]).sum::<f64>() / free.len() as f64;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let r = y[i] - g[i];
        let at_upper = alpha[i] >= c - eps;
        // y f >= 1 at zero, <= 1 at upper bound
        if (y[i] > 0.0) != at_upper {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

pub fn oracle_decision(alpha: &[f64], x: &[Vec<f64>], y: &[f64], bias: f64, gamma: f64, probe: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(x)
        .zip(y)
        .map(|((a, xi), yi)| a * yi * gaussian(xi, probe, gamma))
        .sum::<f64>()
        + bias
}

/// Random 2-D binary problem with both signs present.
pub fn random_binary_problem(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<i8>) {
    let n = rng.random_range(4..=12);
    let shift = rng.random_range(0.0..1.5);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let sign: i8 = if i % 2 == 0 { 1 } else { -1 };
        let centre = shift * sign as f64;
        x.push(vec![
            centre + rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        y.push(sign);
    }
    (x, y)
}

/// 10 x 10 probe grid over the bounding box of `x`, padded by 0.5.
pub fn probe_grid(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in x {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut out = Vec::with_capacity(100);
    for i in 0..10 {
        for j in 0..10 {
            let at = |d: usize, t: usize| lo[d] - 0.5 + (hi[d] - lo[d] + 1.0) * t as f64 / 9.0;
            out.push(vec![at(0, i), at(1, j)]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// (overall, average) accuracy recounted pixel by pixel.
pub fn recount_accuracies(truth: &[u16], predicted: &[u16]) -> (f64, f64) {
    let correct = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    let mut per_class: BTreeMap<u16, (usize, usize)> = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        let e = per_class.entry(t).or_default();
        e.1 += 1;
        if t == p {
            e.0 += 1;
        }
    }
    let aa = per_class.values().map(|&(c, n)| c as f64 / n as f64).sum::<f64>() / per_class.len() as f64;
    (correct as f64 / truth.len() as f64, aa)
}

// ---------------------------------------------------------------------------
// ranking statistics
// ---------------------------------------------------------------------------

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
