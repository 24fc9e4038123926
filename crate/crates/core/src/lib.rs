//! Hyperspectral band selection by normalized mutual information (NMIBS),
//! with MIM and MRMR baselines, an SMO-trained RBF-SVM for validation, and
//! OA/AA evaluation.
//!
//! Typical flow:
//!
//! ```no_run
//! use nmibs::datacube::{load_cube, load_ground_truth};
//! use nmibs::pipeline::{run, BandChoice, SvmSettings};
//! use nmibs::selection::{Method, SelectionConfig};
//! # fn main() -> Result<(), nmibs::Error> {
//! let cube = load_cube("scene.hdr".as_ref(), "scene.raw".as_ref())?;
//! let gt = load_ground_truth("scene_gt.raw".as_ref(), cube.header())?;
//! let outcome = run(
//!     &cube,
//!     &gt,
//!     BandChoice::Select(Method::Nmibs),
//!     &SelectionConfig::new(30),
//!     0.1,
//!     42,
//!     &SvmSettings::default(),
//! )?;
//! println!("OA {:.2}", outcome.classification.report.oa * 100.0);
//! # Ok(())
//! # }
//! ```

pub mod classmap;
pub mod datacube;
pub mod eval;
pub mod infotheory;
pub mod pipeline;
pub mod selection;
pub mod svm;
pub mod synthetic;

use thiserror::Error;

/// Any library failure, tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("datacube: {0}")]
    Data(#[from] datacube::DataError),
    #[error("infotheory: {0}")]
    Info(#[from] infotheory::InfoError),
    #[error("selection: {0}")]
    Selection(#[from] selection::SelectionError),
    #[error("svm: {0}")]
    Svm(#[from] svm::SvmError),
    #[error("eval: {0}")]
    Eval(#[from] eval::EvalError),
    #[error("map: {0}")]
    Map(#[from] classmap::MapError),
}

impl Error {
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Data(_) => "datacube",
            Error::Info(_) => "infotheory",
            Error::Selection(_) => "selection",
            Error::Svm(_) => "svm",
            Error::Eval(_) => "eval",
            Error::Map(_) => "map",
        }
    }
}
