//! select -> split -> train -> predict -> evaluate.
//!
//! Timing covers selection, training and prediction of the full scene; data
//! loading is excluded.

use serde::{Deserialize, Serialize};

use crate::datacube::{stratified_split, GroundTruth, HyperCube, SplitAssignment};
use crate::eval::{confusion, run_timed, EvalReport};
use crate::selection::{self, Method, SelectionConfig, SelectionResult};
use crate::svm::{self, KernelParams, MulticlassModel};
use crate::Error;

/// Which bands feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandChoice {
    Select(Method),
    AllBands,
}

impl BandChoice {
    pub fn name(self) -> &'static str {
        match self {
            BandChoice::Select(m) => m.name(),
            BandChoice::AllBands => "all-bands",
        }
    }
}

/// SVM settings; `gamma = None` means `1 / band count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmSettings {
    pub c: f64,
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings {
            c: KernelParams::DEFAULT_C,
            gamma: None,
            tolerance: KernelParams::DEFAULT_TOLERANCE,
            max_passes: KernelParams::DEFAULT_MAX_PASSES,
        }
    }
}

impl SvmSettings {
    pub fn params_for(&self, n_features: usize) -> KernelParams {
        let base = KernelParams::default_for(n_features);
        KernelParams {
            gamma: self.gamma.unwrap_or(base.gamma),
            c: self.c,
            tolerance: self.tolerance,
            max_passes: self.max_passes,
        }
    }
}

/// Classification of the whole scene with a fixed band subset.
#[derive(Debug, Clone)]
pub struct Classification {
    pub bands: Vec<usize>,
    pub split: SplitAssignment,
    pub model: MulticlassModel,
    /// Predicted class of every pixel, labeled or not, row-major.
    pub map: Vec<u16>,
    pub report: EvalReport,
}

fn features(cube: &HyperCube, pixels: &[usize], bands: &[usize]) -> Vec<Vec<f64>> {
    pixels.iter().map(|&p| cube.pixel_features(p, bands)).collect()
}

/// Splits, trains on the training pixels, predicts every pixel and scores
/// the test pixels. `elapsed_seconds` covers training and prediction.
pub fn classify(
    cube: &HyperCube,
    gt: &GroundTruth,
    bands: &[usize],
    train_fraction: f64,
    seed: u64,
    svm_settings: &SvmSettings,
) -> Result<Classification, Error> {
    gt.ensure_matches(cube)?;
    let split = stratified_split(gt, train_fraction, seed)?;
    let labels = gt.labels();
    let params = svm_settings.params_for(bands.len());

    let (trained, elapsed) = run_timed(|| -> Result<_, Error> {
        let train_x = features(cube, &split.train, bands);
        let train_y: Vec<u16> = split.train.iter().map(|&p| labels[p]).collect();
        let model = svm::train_multiclass_with_classes(&train_x, &train_y, gt.classes(), &params, seed)?;
        let all: Vec<usize> = (0..cube.pixel_count()).collect();
        let map = model.predict(&features(cube, &all, bands))?;
        Ok((model, map))
    });
    let (model, map) = trained?;

    let truth: Vec<u16> = split.test.iter().map(|&p| labels[p]).collect();
    let predicted: Vec<u16> = split.test.iter().map(|&p| map[p]).collect();
    let cm = confusion(&truth, &predicted, gt.classes())?;
    let report = EvalReport::from_confusion(cm, elapsed, bands.len(), train_fraction)?;
    Ok(Classification {
        bands: bands.to_vec(),
        split,
        model,
        map,
        report,
    })
}

pub fn run_selection(
    cube: &HyperCube,
    gt: &GroundTruth,
    method: Method,
    config: &SelectionConfig,
) -> Result<(SelectionResult, f64), Error> {
    let (result, elapsed) = run_timed(|| selection::select(method, cube, gt, config));
    Ok((result?, elapsed))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub choice: BandChoice,
    pub selection: Option<SelectionResult>,
    pub classification: Classification,
}

impl RunOutcome {
    /// Total time: selection plus training and prediction.
    pub fn elapsed_seconds(&self) -> f64 {
        self.classification.report.elapsed_seconds
    }
}

/// Full run for one band choice and one training fraction.
pub fn run(
    cube: &HyperCube,
    gt: &GroundTruth,
    choice: BandChoice,
    selection_config: &SelectionConfig,
    train_fraction: f64,
    seed: u64,
    svm_settings: &SvmSettings,
) -> Result<RunOutcome, Error> {
    let (selection, bands, select_secs) = match choice {
        BandChoice::Select(method) => {
            let (result, secs) = run_selection(cube, gt, method, selection_config)?;
            let bands = result.selected.clone();
            (Some(result), bands, secs)
        }
        BandChoice::AllBands => (None, (0..cube.band_count()).collect(), 0.0),
    };
    let mut classification = classify(cube, gt, &bands, train_fraction, seed, svm_settings)?;
    classification.report.elapsed_seconds += select_secs;
    Ok(RunOutcome {
        choice,
        selection,
        classification,
    })
}
