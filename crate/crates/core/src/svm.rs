//! Soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization, and a one-vs-one multiclass wrapper.
//!
//! Decision function: `f(x) = sum_i alpha_i y_i K(sv_i, x) + b`.

use std::collections::VecDeque;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("no training samples")]
    Empty,
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("binary training needs both signs; got only {0:+}")]
    SingleSign(i8),
    #[error("label {0} is not +1 or -1")]
    InvalidSign(i8),
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0} is absent from the training set")]
    MissingClass(u16),
}

pub type Result<T, E = SvmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    pub c: f64,
    /// KKT slack used as the stopping criterion.
    pub tolerance: f64,
    /// Consecutive full sweeps without any update before stopping.
    pub max_passes: usize,
}

impl KernelParams {
    pub const DEFAULT_C: f64 = 100.0;
    pub const DEFAULT_TOLERANCE: f64 = 1e-3;
    pub const DEFAULT_MAX_PASSES: usize = 5;

    pub fn new(gamma: f64, c: f64) -> Self {
        KernelParams {
            gamma,
            c,
            tolerance: Self::DEFAULT_TOLERANCE,
            max_passes: Self::DEFAULT_MAX_PASSES,
        }
    }

    /// `gamma = 1 / n_features`, default `c`.
    pub fn default_for(n_features: usize) -> Self {
        Self::new(1.0 / n_features.max(1) as f64, Self::DEFAULT_C)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_passes(mut self, max_passes: usize) -> Self {
        self.max_passes = max_passes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SvmError::InvalidParams(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("c", self.c)?;
        positive("tolerance", self.tolerance)?;
        if self.max_passes == 0 {
            return Err(SvmError::InvalidParams("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

/// `exp(-gamma * |x - y|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            what: "kernel arguments",
            expected: x.len(),
            found: y.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(SvmError::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    Ok(rbf(x, y, gamma))
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let width = rows.first().ok_or(SvmError::Empty)?.len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(SvmError::DimensionMismatch {
                what: "feature row width",
                expected: width,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite { row: r, col: c });
        }
    }
    Ok(width)
}

/// A trained two-class model; only points with `alpha > 0` are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub signs: Vec<i8>,
    pub bias: f64,
    pub gamma: f64,
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.signs)
            .map(|((sv, &a), &s)| a * s as f64 * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision(x) > 0.0 {
            1
        } else {
            -1
        }
    }

    /// `sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`.
    pub fn dual_objective(&self) -> f64 {
        let n = self.alphas.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * (self.signs[i] * self.signs[j]) as f64
                    * rbf(&self.support_vectors[i], &self.support_vectors[j], self.gamma);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }
}

/// Diagnostics from one SMO run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStats {
    /// Dual objective after each accepted pair update (starts from 0).
    pub objective_trace: Vec<f64>,
    /// Final multipliers for every training point, in input order.
    pub alphas: Vec<f64>,
    pub pair_updates: usize,
    pub full_sweeps: usize,
    /// False when the update cap stopped training first.
    pub converged: bool,
}

/// Bounded cache of Gram matrix rows, evicting the oldest row first.
struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Rc<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    const BUDGET: usize = 1 << 25;

    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        KernelRows {
            x,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (Self::BUDGET / n.max(1)).clamp(2, n.max(2)),
        }
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(row) = &self.rows[i] {
            return row.clone();
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let row: Rc<[f64]> = self.x.iter().map(|xj| rbf(xi, xj, self.gamma)).collect();
        self.rows[i] = Some(row.clone());
        self.order.push_back(i);
        row
    }
}

struct Smo<'a> {
    y: Vec<f64>,
    alpha: Vec<f64>,
    /// `g_i = sum_j alpha_j y_j K_ij`, without bias.
    g: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    kernel: KernelRows<'a>,
    rng: ChaCha8Rng,
    objective: f64,
    objective_trace: Vec<f64>,
    updates: usize,
}

impl<'a> Smo<'a> {
    const EPS: f64 = 1e-12;

    fn error(&self, i: usize) -> f64 {
        self.g[i] + self.b - self.y[i]
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if hi - lo < Self::EPS {
            return false;
        }
        let row1 = self.kernel.row(i1);
        let row2 = self.kernel.row(i2);
        let (k11, k12, k22) = (row1[i1], row1[i2], row2[i2]);
        let eta = k11 + k22 - 2.0 * k12;

        // Objective change when alpha2 moves by t along the constraint line.
        let gain = |t: f64| t * y2 * (e1 - e2) - 0.5 * eta * t * t;
        let mut new_a2 = if eta > Self::EPS {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            let (g_lo, g_hi) = (gain(lo - a2), gain(hi - a2));
            if g_lo > g_hi + Self::EPS {
                lo
            } else if g_hi > g_lo + Self::EPS {
                hi
            } else {
                a2
            }
        };
        if new_a2 < Self::EPS {
            new_a2 = 0.0;
        } else if new_a2 > self.c - Self::EPS {
            new_a2 = self.c;
        }
        if (new_a2 - a2).abs() < Self::EPS * (new_a2 + a2 + Self::EPS) {
            return false;
        }
        let mut new_a1 = a1 + s * (a2 - new_a2);
        if new_a1 < Self::EPS {
            new_a1 = 0.0;
        } else if new_a1 > self.c - Self::EPS {
            new_a1 = self.c;
        }
        let (d1, d2) = (new_a1 - a1, new_a2 - a2);

        let b1 = self.b - e1 - y1 * d1 * k11 - y2 * d2 * k12;
        let b2 = self.b - e2 - y1 * d1 * k12 - y2 * d2 * k22;
        let new_b = if new_a1 > 0.0 && new_a1 < self.c {
            b1
        } else if new_a2 > 0.0 && new_a2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        // exact change for the realized (d1, d2), including round-off clipping
        let delta_w = d1 + d2
            - (d1 * y1 * self.g[i1] + d2 * y2 * self.g[i2])
            - 0.5 * (d1 * d1 * k11 + d2 * d2 * k22 + 2.0 * d1 * d2 * y1 * y2 * k12);
        self.objective += delta_w;
        self.objective_trace.push(self.objective);

        for (k, gk) in self.g.iter_mut().enumerate() {
            *gk += y1 * d1 * row1[k] + y2 * d2 * row2[k];
        }
        self.alpha[i1] = new_a1;
        self.alpha[i2] = new_a2;
        self.b = new_b;
        self.updates += 1;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let n = self.y.len();
        let e2 = self.error(i2);
        let r2 = e2 * self.y[i2];
        let a2 = self.alpha[i2];
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }

        // Second choice: the non-bound point with the largest |E1 - E2|.
        let best = (0..n)
            .filter(|&i| i != i2 && self.non_bound(i))
            .map(|i| (i, (self.error(i) - e2).abs()))
            .fold(None::<(usize, f64)>, |acc, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            });
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }

        let start = self.rng.random_range(0..n);
        for offset in 0..n {
            let i1 = (start + offset) % n;
            if self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.random_range(0..n);
        for offset in 0..n {
            let i1 = (start + offset) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    /// Bias implied by the KKT conditions: the mean of `y_i - g_i` over free
    /// multipliers, or the middle of the feasible interval when none is free.
    fn kkt_bias(&self) -> f64 {
        let free: Vec<usize> = (0..self.alpha.len()).filter(|&i| self.non_bound(i)).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| self.y[i] - self.g[i]).sum::<f64>() / free.len() as f64;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.alpha.len() {
            let r = self.y[i] - self.g[i];
            // alpha = 0 wants y f >= 1, alpha = c wants y f <= 1
            if (self.y[i] > 0.0) == (self.alpha[i] <= 0.0) {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => self.b,
        }
    }
}

/// Trains a binary RBF-SVM. Labels must be `+1` or `-1` with both present.
pub fn train_binary(features: &[Vec<f64>], labels: &[i8], params: &KernelParams, seed: u64) -> Result<BinaryModel> {
    train_binary_traced(features, labels, params, seed).map(|(model, _)| model)
}

/// As [`train_binary`], also returning solver diagnostics.
pub fn train_binary_traced(
    features: &[Vec<f64>],
    labels: &[i8],
    params: &KernelParams,
    seed: u64,
) -> Result<(BinaryModel, TrainingStats)> {
    params.validate()?;
    check_rows(features)?;
    if labels.len() != features.len() {
        return Err(SvmError::DimensionMismatch {
            what: "label count",
            expected: features.len(),
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(SvmError::InvalidSign(bad));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(SvmError::SingleSign(labels[0]));
    }

    let n = features.len();
    let mut smo = Smo {
        y: labels.iter().map(|&l| l as f64).collect(),
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        b: 0.0,
        c: params.c,
        tol: params.tolerance,
        kernel: KernelRows::new(features, params.gamma),
        rng: ChaCha8Rng::seed_from_u64(seed),
        objective: 0.0,
        objective_trace: vec![0.0],
        updates: 0,
    };

    let max_updates = 10_000usize.max(200 * n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut examine_all = true;
    let mut quiet_sweeps = 0;
    let mut full_sweeps = 0;
    let mut converged = false;
    while smo.updates < max_updates {
        order.shuffle(&mut smo.rng);
        if examine_all {
            // audit full sweeps against the bias the model will carry
            smo.b = smo.kkt_bias();
        }
        let mut changed = 0;
        for idx in 0..n {
            let i = order[idx];
            if (examine_all || smo.non_bound(i)) && smo.examine(i) {
                changed += 1;
            }
        }
        if examine_all {
            full_sweeps += 1;
            if changed == 0 {
                quiet_sweeps += 1;
                if quiet_sweeps >= params.max_passes {
                    converged = true;
                    break;
                }
            } else {
                quiet_sweeps = 0;
                examine_all = false;
            }
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
    let model = BinaryModel {
        support_vectors: keep.iter().map(|&i| features[i].clone()).collect(),
        alphas: keep.iter().map(|&i| smo.alpha[i]).collect(),
        signs: keep.iter().map(|&i| labels[i]).collect(),
        bias: smo.kkt_bias(),
        gamma: params.gamma,
    };
    let stats = TrainingStats {
        objective_trace: smo.objective_trace,
        alphas: smo.alpha,
        pair_updates: smo.updates,
        full_sweeps,
        converged,
    };
    Ok((model, stats))
}

/// Per-feature `[min, max]` fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    fn scale(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (v - self.min) / range
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    /// Class mapped to `+1`.
    pub positive: u16,
    /// Class mapped to `-1`.
    pub negative: u16,
    pub model: BinaryModel,
}

/// One-vs-one ensemble over all class pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub class_labels: Vec<u16>,
    pub pairwise: Vec<PairModel>,
    pub params: KernelParams,
    pub feature_scaling: Vec<FeatureRange>,
}

/// Seed for the `index`-th pair; index 0 keeps the run seed.
fn pair_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Classes are the distinct labels present in `labels`.
pub fn train_multiclass(features: &[Vec<f64>], labels: &[u16], params: &KernelParams, seed: u64) -> Result<MulticlassModel> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    train_multiclass_with_classes(features, labels, &classes, params, seed)
}

/// Trains against an expected class list; every class must have at least one
/// training sample.
pub fn train_multiclass_with_classes(
    features: &[Vec<f64>],
    labels: &[u16],
    classes: &[u16],
    params: &KernelParams,
    seed: u64,
) -> Result<MulticlassModel> {
    params.validate()?;
    let width = check_rows(features)?;
    if labels.len() != features.len() {
        return Err(SvmError::DimensionMismatch {
            what: "label count",
            expected: features.len(),
            found: labels.len(),
        });
    }
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::TooFewClasses(classes.len()));
    }
    if let Some(&missing) = classes.iter().find(|c| !labels.contains(c)) {
        return Err(SvmError::MissingClass(missing));
    }
    if let Some(&extra) = labels.iter().find(|l| classes.binary_search(l).is_err()) {
        return Err(SvmError::MissingClass(extra));
    }

    let feature_scaling: Vec<FeatureRange> = (0..width)
        .map(|j| {
            features.iter().fold(
                FeatureRange {
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                },
                |r, row| FeatureRange {
                    min: r.min.min(row[j]),
                    max: r.max.max(row[j]),
                },
            )
        })
        .collect();
    let scaled: Vec<Vec<f64>> = features
        .iter()
        .map(|row| scale_row(&feature_scaling, row))
        .collect();

    let pairs: Vec<(u16, u16)> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| classes[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let pairwise = pairs
        .par_iter()
        .enumerate()
        .map(|(index, &(positive, negative))| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (row, &label) in scaled.iter().zip(labels) {
                if label == positive {
                    x.push(row.clone());
                    y.push(1i8);
                } else if label == negative {
                    x.push(row.clone());
                    y.push(-1i8);
                }
            }
            let model = train_binary(&x, &y, params, pair_seed(seed, index))?;
            Ok(PairModel {
                positive,
                negative,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MulticlassModel {
        class_labels: classes,
        pairwise,
        params: *params,
        feature_scaling,
    })
}

fn scale_row(scaling: &[FeatureRange], row: &[f64]) -> Vec<f64> {
    scaling.iter().zip(row).map(|(r, &v)| r.scale(v)).collect()
}

impl MulticlassModel {
    pub fn feature_count(&self) -> usize {
        self.feature_scaling.len()
    }

    /// Predicts one already-validated row.
    fn predict_row(&self, row: &[f64]) -> u16 {
        let x = scale_row(&self.feature_scaling, row);
        let c = self.class_labels.len();
        let mut votes = vec![0usize; c];
        let mut margins = vec![0.0f64; c];
        let index = |label: u16| self.class_labels.binary_search(&label).expect("known class");
        for pair in &self.pairwise {
            let f = pair.model.decision(&x);
            let (p, n) = (index(pair.positive), index(pair.negative));
            if f > 0.0 {
                votes[p] += 1;
            } else {
                votes[n] += 1;
            }
            margins[p] += f;
            margins[n] -= f;
        }
        // most votes, then largest margin sum, then lowest class id
        let mut best = 0;
        for k in 1..c {
            let better = votes[k] > votes[best]
                || (votes[k] == votes[best] && margins[k].total_cmp(&margins[best]).is_gt());
            if better {
                best = k;
            }
        }
        self.class_labels[best]
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<u16>> {
        let width = self.feature_count();
        for (r, row) in features.iter().enumerate() {
            if row.len() != width {
                return Err(SvmError::DimensionMismatch {
                    what: "feature row width",
                    expected: width,
                    found: row.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(SvmError::NonFinite { row: r, col: c });
            }
        }
        Ok(features.par_iter().map(|row| self.predict_row(row)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Free-function form of [`MulticlassModel::predict`].
pub fn predict(model: &MulticlassModel, features: &[Vec<f64>]) -> Result<Vec<u16>> {
    model.predict(features)
}
