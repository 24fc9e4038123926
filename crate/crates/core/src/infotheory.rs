//! Histogram estimates of entropy, joint entropy, mutual information and
//! normalized mutual information `(H(a) + H(b)) / H(a, b)`.
//!
//! All entropies are in bits. Nonzero cell counts are summed in ascending
//! count order, so every quantity is bitwise reproducible and exactly
//! invariant to transposing a joint histogram or relabeling bins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InfoError {
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("histogram has no counts")]
    EmptyCounts,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("level {level} at index {index} is not below bin count {bins}")]
    LevelOutOfRange {
        index: usize,
        level: u32,
        bins: usize,
    },
    #[error("normalized mutual information is undefined: joint entropy is zero")]
    UndefinedNmi,
}

pub type Result<T, E = InfoError> = std::result::Result<T, E>;

pub const DEFAULT_BINS: usize = 256;

/// Discrete symbols in `0..bins`, one per labeled pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedBand {
    levels: Vec<u32>,
    bins: usize,
}

impl QuantizedBand {
    pub fn new(levels: Vec<u32>, bins: usize) -> Result<Self> {
        if let Some((index, &level)) = levels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= bins)
        {
            return Err(InfoError::LevelOutOfRange { index, level, bins });
        }
        Ok(QuantizedBand { levels, bins })
    }

    /// Dense relabeling of class ids: the i-th smallest distinct id becomes i.
    pub fn from_labels(labels: &[u16]) -> Self {
        let mut distinct: Vec<u16> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let levels = labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("present") as u32)
            .collect();
        QuantizedBand {
            levels,
            bins: distinct.len().max(1),
        }
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.bins];
        for &l in &self.levels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn entropy(&self) -> Result<f64> {
        entropy(&self.histogram())
    }
}

/// Min-max scaling onto `[0, 1]`. A constant input maps to all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - min) / range).collect()
}

/// Linear min-max quantization: `floor(norm(v) * bins)`, with the maximum
/// clamped into the top bin.
pub fn quantize(values: &[f64], bins: usize) -> Result<QuantizedBand> {
    if bins < 2 {
        return Err(InfoError::TooFewBins(bins));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(InfoError::NonFinite(i));
    }
    let top = (bins - 1) as u32;
    let levels = normalize(values)
        .into_iter()
        .map(|n| ((n * bins as f64).floor() as u32).min(top))
        .collect();
    Ok(QuantizedBand { levels, bins })
}

/// Shannon entropy in bits, `-sum p log2 p` over nonzero counts.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let mut nonzero: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    entropy_of_sorted(&mut nonzero)
}

fn entropy_of_sorted(nonzero: &mut [u64]) -> Result<f64> {
    let total: u64 = nonzero.iter().sum();
    if total == 0 {
        return Err(InfoError::EmptyCounts);
    }
    nonzero.sort_unstable();
    let n = total as f64;
    let h = nonzero
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // -0.0 for a single symbol
    Ok(h.max(0.0))
}

/// `rows x cols` co-occurrence counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    total: u64,
}

impl JointHistogram {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_marginal(&self) -> Vec<u64> {
        self.counts
            .chunks_exact(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.cols];
        for row in self.counts.chunks_exact(self.cols) {
            for (o, &c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    pub fn entropy(&self) -> Result<f64> {
        entropy(&self.counts)
    }
}

pub fn joint_histogram(a: &QuantizedBand, b: &QuantizedBand) -> Result<JointHistogram> {
    if a.len() != b.len() {
        return Err(InfoError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (rows, cols) = (a.bins, b.bins);
    let mut counts = vec![0u64; rows * cols];
    for (&x, &y) in a.levels.iter().zip(&b.levels) {
        counts[x as usize * cols + y as usize] += 1;
    }
    Ok(JointHistogram {
        rows,
        cols,
        counts,
        total: a.len() as u64,
    })
}

/// Marginal and joint entropies of a pair, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropies {
    pub a: f64,
    pub b: f64,
    pub joint: f64,
}

impl Entropies {
    pub fn of(a: &QuantizedBand, b: &QuantizedBand) -> Result<Self> {
        if a.len() != b.len() {
            return Err(InfoError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let cells = a.bins.saturating_mul(b.bins);
        if cells <= 4 * a.len() {
            let joint = joint_histogram(a, b)?;
            return Ok(Entropies {
                a: entropy(&joint.row_marginal())?,
                b: entropy(&joint.col_marginal())?,
                joint: joint.entropy()?,
            });
        }
        // Sparse path: the dense table would be mostly empty. Both paths feed
        // the same multiset of nonzero counts to the entropy sum.
        let mut codes: Vec<u64> = a
            .levels
            .iter()
            .zip(&b.levels)
            .map(|(&x, &y)| x as u64 * b.bins as u64 + y as u64)
            .collect();
        codes.sort_unstable();
        let mut runs: Vec<u64> = Vec::new();
        let mut iter = codes.iter().peekable();
        while let Some(&code) = iter.next() {
            let mut run = 1u64;
            while iter.peek() == Some(&&code) {
                iter.next();
                run += 1;
            }
            runs.push(run);
        }
        Ok(Entropies {
            a: a.entropy()?,
            b: b.entropy()?,
            joint: entropy_of_sorted(&mut runs)?,
        })
    }

    pub fn nmi(&self) -> Result<f64> {
        if self.joint <= 0.0 {
            return Err(InfoError::UndefinedNmi);
        }
        Ok((self.a + self.b) / self.joint)
    }

    pub fn mutual_information(&self) -> Result<f64> {
        if self.joint <= 0.0 {
            return Err(InfoError::UndefinedNmi);
        }
        Ok(self.a + self.b - self.joint)
    }
}

/// `(H(a) + H(b)) / H(a, b)`: 1 for independent inputs, 2 when each
/// determines the other.
pub fn nmi(a: &QuantizedBand, b: &QuantizedBand) -> Result<f64> {
    Entropies::of(a, b)?.nmi()
}

/// `H(a) + H(b) - H(a, b)` in bits.
pub fn mutual_information(a: &QuantizedBand, b: &QuantizedBand) -> Result<f64> {
    Entropies::of(a, b)?.mutual_information()
}
