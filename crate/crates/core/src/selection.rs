//! Greedy band selection driven by normalized mutual information with the
//! ground truth, plus the MIM and MRMR baselines.
//!
//! All statistics use labeled pixels only. Bands are quantized with the
//! configured bin count; the ground truth is used as-is (one level per class).

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datacube::{DataError, GroundTruth, HyperCube};
use crate::infotheory::{self, InfoError, QuantizedBand};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("no informative bands")]
    NoInformativeBands,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nmibs,
    Mim,
    Mrmr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nmibs, Method::Mim, Method::Mrmr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nmibs => "nmibs",
            Method::Mim => "mim",
            Method::Mrmr => "mrmr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Target number of bands.
    pub k: usize,
    /// Minimum NMI gain a candidate must exceed to be accepted.
    pub th: f64,
    pub bins: usize,
    /// Cap on candidate evaluations; `None` means `N - 1`.
    pub max_iterations: Option<usize>,
}

impl SelectionConfig {
    pub fn new(k: usize) -> Self {
        SelectionConfig {
            k,
            th: 0.0,
            bins: infotheory::DEFAULT_BINS,
            max_iterations: None,
        }
    }

    pub fn with_th(mut self, th: f64) -> Self {
        self.th = th;
        self
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = Some(max_iterations);
        self
    }

    pub fn validate(&self, band_count: usize) -> Result<()> {
        validate_k(self.k, band_count)?;
        if self.bins < 2 {
            return Err(SelectionError::Config(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        if self.th.is_nan() {
            return Err(SelectionError::Config("th is NaN".into()));
        }
        if let Some(m) = self.max_iterations {
            if m == 0 || m > band_count.saturating_sub(1).max(1) {
                return Err(SelectionError::Config(format!(
                    "max_iterations must be in [1, {}], got {m}",
                    band_count.saturating_sub(1).max(1)
                )));
            }
        }
        Ok(())
    }
}

fn validate_k(k: usize, band_count: usize) -> Result<()> {
    if k == 0 || k > band_count {
        return Err(SelectionError::Config(format!(
            "k must be in [1, {band_count}], got {k}"
        )));
    }
    Ok(())
}

/// Score of a single band; `None` when the score is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandScore {
    pub band: usize,
    pub score: Option<f64>,
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub band: usize,
    /// Score of the band alone: NMI(GT, band) for NMIBS, I(GT; band) otherwise.
    pub band_score: Option<f64>,
    /// NMI(GT, GT_est) for NMIBS, relevance minus redundancy for MRMR.
    pub subset_score: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub k: usize,
    pub th: f64,
    pub bins: usize,
    pub selected: Vec<usize>,
    pub trace: Vec<TraceRow>,
    pub iterations_used: usize,
}

impl SelectionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection result serializes")
    }
}

/// Labeled-pixel view shared by all selectors.
struct Labeled<'a> {
    cube: &'a HyperCube,
    pixels: Vec<usize>,
    gt: QuantizedBand,
}

impl<'a> Labeled<'a> {
    fn new(cube: &'a HyperCube, gt: &GroundTruth) -> Result<Self> {
        gt.ensure_matches(cube)?;
        let pixels = gt.labeled_indices();
        if pixels.is_empty() {
            return Err(DataError::NoLabeledSamples.into());
        }
        let labels: Vec<u16> = pixels.iter().map(|&p| gt.labels()[p]).collect();
        Ok(Labeled {
            cube,
            pixels,
            gt: QuantizedBand::from_labels(&labels),
        })
    }

    fn band(&self, band: usize) -> Vec<f64> {
        let values = self.cube.band(band);
        self.pixels.iter().map(|&p| values[p]).collect()
    }

    fn quantized(&self, band: usize, bins: usize) -> Result<QuantizedBand> {
        Ok(infotheory::quantize(&self.band(band), bins)?)
    }
}

fn defined(value: std::result::Result<f64, InfoError>) -> Result<Option<f64>> {
    match value {
        Ok(v) => Ok(Some(v)),
        Err(InfoError::UndefinedNmi) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Descending by score, undefined last, ties to the lower band index.
fn by_score_desc(a: &BandScore, b: &BandScore) -> Ordering {
    match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.band.cmp(&b.band)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.band.cmp(&b.band),
    }
}

fn score_bands<F>(labeled: &Labeled<'_>, bins: usize, score: F) -> Result<Vec<BandScore>>
where
    F: Fn(&QuantizedBand, &QuantizedBand) -> std::result::Result<f64, InfoError> + Sync,
{
    let mut scores = (0..labeled.cube.band_count())
        .into_par_iter()
        .map(|band| {
            let q = labeled.quantized(band, bins)?;
            Ok(BandScore {
                band,
                score: defined(score(&labeled.gt, &q))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(by_score_desc);
    Ok(scores)
}

/// Every band scored by NMI(GT, band), best first.
pub fn rank_bands_by_nmi(cube: &HyperCube, gt: &GroundTruth, bins: usize) -> Result<Vec<BandScore>> {
    if bins < 2 {
        return Err(InfoError::TooFewBins(bins).into());
    }
    let labeled = Labeled::new(cube, gt)?;
    score_bands(&labeled, bins, infotheory::nmi)
}

/// NMIBS selection.
///
/// Seeds the subset with the top-ranked band and uses its normalized values as
/// the estimated reference map. The remaining bands are visited once each in
/// ranking order; a candidate is averaged into the estimate and accepted only
/// if NMI(GT, estimate) beats the best accepted value by more than `th`.
/// Rejected candidates are discarded.
pub fn nmibs_select(cube: &HyperCube, gt: &GroundTruth, config: &SelectionConfig) -> Result<SelectionResult> {
    let n = cube.band_count();
    config.validate(n)?;
    let labeled = Labeled::new(cube, gt)?;
    let ranking = score_bands(&labeled, config.bins, infotheory::nmi)?;
    if ranking.iter().all(|r| r.score.is_none()) {
        return Err(SelectionError::NoInformativeBands);
    }

    let first = ranking[0];
    let mut estimate = infotheory::normalize(&labeled.band(first.band));
    let mut best = defined(infotheory::nmi(
        &labeled.gt,
        &infotheory::quantize(&estimate, config.bins)?,
    ))?;
    let mut selected = vec![first.band];
    let mut trace = vec![TraceRow {
        band: first.band,
        band_score: first.score,
        subset_score: best,
        accepted: true,
    }];

    let max_iterations = config.max_iterations.unwrap_or(n - 1);
    let mut candidates = ranking[1..].iter();
    let mut iterations = 0;
    while selected.len() < config.k && iterations < max_iterations {
        let Some(candidate) = candidates.next() else {
            break;
        };
        iterations += 1;

        let band = infotheory::normalize(&labeled.band(candidate.band));
        let trial: Vec<f64> = estimate
            .iter()
            .zip(&band)
            .map(|(e, b)| (e + b) / 2.0)
            .collect();
        let score = defined(infotheory::nmi(
            &labeled.gt,
            &infotheory::quantize(&trial, config.bins)?,
        ))?;
        let accepted = match (score, best) {
            (Some(s), Some(b)) => s > b + config.th,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if accepted {
            best = score;
            estimate = trial;
            selected.push(candidate.band);
        }
        trace.push(TraceRow {
            band: candidate.band,
            band_score: candidate.score,
            subset_score: score,
            accepted,
        });
    }

    Ok(SelectionResult {
        method: Method::Nmibs,
        k: config.k,
        th: config.th,
        bins: config.bins,
        selected,
        trace,
        iterations_used: iterations,
    })
}

/// MI with the limit convention for a pair of constants (joint entropy 0).
fn mi_or_zero(a: &QuantizedBand, b: &QuantizedBand) -> Result<f64> {
    Ok(defined(infotheory::mutual_information(a, b))?.unwrap_or(0.0))
}

/// Top-`k` bands by I(GT; band). No redundancy control.
pub fn mim_select(cube: &HyperCube, gt: &GroundTruth, k: usize, bins: usize) -> Result<SelectionResult> {
    validate_k(k, cube.band_count())?;
    let labeled = Labeled::new(cube, gt)?;
    let ranking = score_bands(&labeled, bins, |a, b| match infotheory::mutual_information(a, b) {
        Err(InfoError::UndefinedNmi) => Ok(0.0),
        other => other,
    })?;
    let trace: Vec<TraceRow> = ranking
        .iter()
        .take(k)
        .map(|r| TraceRow {
            band: r.band,
            band_score: r.score,
            subset_score: None,
            accepted: true,
        })
        .collect();
    Ok(SelectionResult {
        method: Method::Mim,
        k,
        th: 0.0,
        bins,
        selected: trace.iter().map(|r| r.band).collect(),
        iterations_used: trace.len(),
        trace,
    })
}

/// Greedy max of `I(GT; b) - mean_{s in S} I(b; s)`.
pub fn mrmr_select(cube: &HyperCube, gt: &GroundTruth, k: usize, bins: usize) -> Result<SelectionResult> {
    let n = cube.band_count();
    validate_k(k, n)?;
    if bins < 2 {
        return Err(InfoError::TooFewBins(bins).into());
    }
    let labeled = Labeled::new(cube, gt)?;
    let bands: Vec<QuantizedBand> = (0..n)
        .into_par_iter()
        .map(|b| labeled.quantized(b, bins))
        .collect::<Result<_>>()?;
    let relevance: Vec<f64> = bands
        .par_iter()
        .map(|q| mi_or_zero(&labeled.gt, q))
        .collect::<Result<_>>()?;

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut redundancy = vec![0.0f64; n];
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);

    while selected.len() < k {
        if let Some(&last) = selected.last() {
            let updates: Vec<f64> = remaining
                .par_iter()
                .map(|&b| mi_or_zero(&bands[b], &bands[last]))
                .collect::<Result<_>>()?;
            for (&b, u) in remaining.iter().zip(updates) {
                redundancy[b] += u;
            }
        }
        let denom = selected.len().max(1) as f64;
        let score = |b: usize| {
            if selected.is_empty() {
                relevance[b]
            } else {
                relevance[b] - redundancy[b] / denom
            }
        };
        // first maximum in ascending index order
        let (pos, &band) = remaining
            .iter()
            .enumerate()
            .fold(None::<(usize, &usize)>, |best, cur| match best {
                Some(b) if score(*b.1) >= score(*cur.1) => Some(b),
                _ => Some(cur),
            })
            .expect("remaining is non-empty while |S| < k <= N");
        trace.push(TraceRow {
            band,
            band_score: Some(relevance[band]),
            subset_score: Some(score(band)),
            accepted: true,
        });
        selected.push(band);
        remaining.remove(pos);
    }

    Ok(SelectionResult {
        method: Method::Mrmr,
        k,
        th: 0.0,
        bins,
        iterations_used: selected.len(),
        selected,
        trace,
    })
}

/// Dispatch by method. `th` and `max_iterations` only affect NMIBS.
pub fn select(method: Method, cube: &HyperCube, gt: &GroundTruth, config: &SelectionConfig) -> Result<SelectionResult> {
    match method {
        Method::Nmibs => nmibs_select(cube, gt, config),
        Method::Mim => mim_select(cube, gt, config.k, config.bins),
        Method::Mrmr => mrmr_select(cube, gt, config.k, config.bins),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::{CubeHeader, DataType};

    /// Bands given pixel-major; one row of `lines = 1`.
    fn cube_from_bands(bands: &[Vec<f64>]) -> HyperCube {
        let pixels = bands[0].len();
        let header = CubeHeader::new(pixels, 1, bands.len(), DataType::F32).unwrap();
        let values = bands.concat().into_iter().map(|v| v as f32 as f64).collect();
        HyperCube::from_values(header, values).unwrap()
    }

    fn labels_to_f64(labels: &[u16]) -> Vec<f64> {
        labels.iter().map(|&l| l as f64).collect()
    }

    #[test]
    fn gt_copy_ranks_first_constant_last() {
        let labels = vec![1u16, 1, 2, 2, 3, 3];
        let gt = GroundTruth::new(6, 1, labels.clone()).unwrap();
        let cube = cube_from_bands(&[vec![4.0; 6], labels_to_f64(&labels)]);
        let ranking = rank_bands_by_nmi(&cube, &gt, 8).unwrap();
        assert_eq!(ranking[0].band, 1);
        assert_eq!(ranking[0].score, Some(2.0));
        // constant band vs a non-constant GT: H(B) = 0, NMI = H(GT)/H(GT) = 1
        assert_eq!(ranking[1], BandScore { band: 0, score: Some(1.0) });
    }

    #[test]
    fn undefined_scores_sort_last() {
        let gt = GroundTruth::new(3, 1, vec![1, 1, 1]).unwrap();
        let cube = cube_from_bands(&[vec![2.0; 3], vec![0.0, 1.0, 2.0]]);
        let ranking = rank_bands_by_nmi(&cube, &gt, 4).unwrap();
        assert_eq!(ranking[0], BandScore { band: 1, score: Some(1.0) });
        assert_eq!(ranking[1], BandScore { band: 0, score: None });
    }

    #[test]
    fn duplicate_bands_tie_to_lower_index() {
        let labels = vec![1u16, 2, 1, 2, 2, 1];
        let gt = GroundTruth::new(6, 1, labels).unwrap();
        let b = vec![0.3, 0.9, 0.1, 0.7, 0.5, 0.2];
        let cube = cube_from_bands(&[vec![0.0, 0.0, 1.0, 1.0, 0.5, 0.5], b.clone(), b]);
        let ranking = rank_bands_by_nmi(&cube, &gt, 4).unwrap();
        let pos1 = ranking.iter().position(|r| r.band == 1).unwrap();
        assert_eq!(ranking[pos1 + 1].band, 2);
        assert_eq!(ranking[pos1].score, ranking[pos1 + 1].score);
    }

    #[test]
    fn k_one_and_infinite_threshold() {
        let labels = vec![1u16, 1, 2, 2, 3, 3, 1, 2];
        let gt = GroundTruth::new(8, 1, labels.clone()).unwrap();
        let noisy: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| l as f64 + 0.4 * ((i * 7 % 5) as f64 / 5.0))
            .collect();
        let cube = cube_from_bands(&[noisy, labels_to_f64(&labels), vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]]);

        let one = nmibs_select(&cube, &gt, &SelectionConfig::new(1).with_bins(4)).unwrap();
        assert_eq!(one.selected, vec![1]);
        assert_eq!(one.iterations_used, 0);
        assert_eq!(one.trace.len(), 1);

        let strict = nmibs_select(&cube, &gt, &SelectionConfig::new(3).with_bins(4).with_th(f64::INFINITY)).unwrap();
        assert_eq!(strict.selected, vec![1]);
        assert_eq!(strict.iterations_used, 2);
        assert!(strict.trace[1..].iter().all(|r| !r.accepted));
    }

    #[test]
    fn duplicate_of_seed_band_is_rejected() {
        let labels = vec![1u16, 1, 2, 2, 1, 2, 1, 2];
        let gt = GroundTruth::new(8, 1, labels.clone()).unwrap();
        let copy = labels_to_f64(&labels);
        let noise = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let cube = cube_from_bands(&[copy.clone(), copy, noise]);
        let result = nmibs_select(&cube, &gt, &SelectionConfig::new(3).with_bins(4)).unwrap();
        assert_eq!(result.selected, vec![0]);
        assert_eq!(result.trace[1].band, 1);
        assert_eq!(result.trace[1].subset_score, Some(2.0));
        assert!(!result.trace[1].accepted);
        assert!(!result.trace[2].accepted);
    }

    #[test]
    fn config_validation() {
        let labels = vec![1u16, 2];
        let gt = GroundTruth::new(2, 1, labels).unwrap();
        let cube = cube_from_bands(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        for cfg in [
            SelectionConfig::new(0),
            SelectionConfig::new(3),
            SelectionConfig::new(1).with_bins(1),
            SelectionConfig::new(1).with_th(f64::NAN),
            SelectionConfig::new(1).with_max_iterations(2),
        ] {
            assert!(matches!(nmibs_select(&cube, &gt, &cfg), Err(SelectionError::Config(_))));
        }
        assert!(matches!(mim_select(&cube, &gt, 0, 4), Err(SelectionError::Config(_))));
        assert!(matches!(mrmr_select(&cube, &gt, 3, 4), Err(SelectionError::Config(_))));
    }

    #[test]
    fn no_informative_bands() {
        let gt = GroundTruth::new(3, 1, vec![2, 2, 2]).unwrap();
        let cube = cube_from_bands(&[vec![1.0; 3], vec![5.0; 3]]);
        assert!(matches!(
            nmibs_select(&cube, &gt, &SelectionConfig::new(1).with_bins(4)),
            Err(SelectionError::NoInformativeBands)
        ));
    }

    #[test]
    fn mim_keeps_duplicates_mrmr_drops_them() {
        // band 0 is informative, band 1 duplicates it, band 2 is weaker but
        // carries information band 0 lacks.
        let labels = vec![1u16, 1, 1, 1, 2, 2, 2, 2];
        let gt = GroundTruth::new(8, 1, labels).unwrap();
        let informative = vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let weak = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let cube = cube_from_bands(&[informative.clone(), informative, weak]);

        let mim = mim_select(&cube, &gt, 2, 3).unwrap();
        assert_eq!(mim.selected, vec![0, 1]);
        assert!((mim.trace[0].band_score.unwrap() - 0.75).abs() < 1e-12);

        // weak: I(GT) = 0.548795, I(band 0) = 0.360075
        // duplicate: I(GT) = 0.75, I(band 0) = H(band 0) = 1.561278
        let mrmr = mrmr_select(&cube, &gt, 2, 3).unwrap();
        assert_eq!(mrmr.selected, vec![0, 2]);
        assert!((mrmr.trace[1].subset_score.unwrap() - 0.188720).abs() < 1e-5);

        assert_eq!(mim_select(&cube, &gt, 3, 3).unwrap().selected.len(), 3);
        assert_eq!(mrmr_select(&cube, &gt, 1, 3).unwrap().selected, mim.selected[..1]);
    }

    #[test]
    fn mrmr_equal_independent_bands_follow_index_order() {
        let labels = vec![1u16, 1, 2, 2];
        let gt = GroundTruth::new(4, 1, labels).unwrap();
        let b = vec![0.0, 1.0, 0.0, 1.0];
        let cube = cube_from_bands(&[b.clone(), b.clone(), b]);
        assert_eq!(mrmr_select(&cube, &gt, 3, 2).unwrap().selected, vec![0, 1, 2]);
    }

    #[test]
    fn result_serializes_to_json() {
        let labels = vec![1u16, 1, 2, 2];
        let gt = GroundTruth::new(4, 1, labels.clone()).unwrap();
        let cube = cube_from_bands(&[labels_to_f64(&labels)]);
        let result = nmibs_select(&cube, &gt, &SelectionConfig::new(1).with_bins(4)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&result.to_json()).unwrap();
        assert_eq!(json["method"], "nmibs");
        assert_eq!(json["selected"], serde_json::json!([0]));
        assert_eq!(json["trace"][0]["accepted"], true);
    }
}
