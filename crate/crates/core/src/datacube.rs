//! Hyperspectral cubes, ground-truth rasters and stratified train/test splits.
//!
//! Cubes are stored band-sequential (BSQ): band `b`, row `r`, column `c` lives
//! at `b * lines * samples + r * samples + c`. On disk a cube is an ENVI-style
//! plain-text header next to a raw little-endian payload; ground truth is a
//! raw little-endian `u16` raster with the same `samples x lines` geometry.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header line {line}: {reason}: {content:?}")]
    HeaderLine {
        line: usize,
        content: String,
        reason: String,
    },
    #[error("header is missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("unsupported {key} = {value}")]
    Unsupported { key: &'static str, value: String },
    #[error("{what} size mismatch: expected {expected} bytes, found {actual} bytes")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("value count mismatch: expected {expected}, found {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("non-finite value at band {band}, row {row}, col {col}")]
    NonFinite { band: usize, row: usize, col: usize },
    #[error("value {value} at band {band}, row {row}, col {col} is not representable as {dtype}")]
    NotRepresentable {
        value: f64,
        dtype: DataType,
        band: usize,
        row: usize,
        col: usize,
    },
    #[error("no labeled samples")]
    NoLabeledSamples,
    #[error("raster is {actual_samples}x{actual_lines}, expected {expected_samples}x{expected_lines}")]
    DimensionMismatch {
        expected_samples: usize,
        expected_lines: usize,
        actual_samples: usize,
        actual_lines: usize,
    },
    #[error("label {0} is not one of the declared classes")]
    UndeclaredLabel(u16),
    #[error("csv file is empty")]
    EmptyCsv,
    #[error("csv row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv row {row}, column {column}: {reason}")]
    CsvCell {
        row: usize,
        column: usize,
        reason: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("split fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("class {0} has no labeled pixels")]
    EmptyClass(u16),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Sample encoding of the raw payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataType {
    U16,
    F32,
}

impl DataType {
    pub fn width(self) -> usize {
        match self {
            DataType::U16 => 2,
            DataType::F32 => 4,
        }
    }

    /// ENVI `data type` code.
    pub fn envi_code(self) -> u32 {
        match self {
            DataType::U16 => 12,
            DataType::F32 => 4,
        }
    }

    pub fn from_envi_code(code: u32) -> Option<Self> {
        match code {
            12 => Some(DataType::U16),
            4 => Some(DataType::F32),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::U16 => f.write_str("unsigned-16"),
            DataType::F32 => f.write_str("float-32"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interleave {
    BandSequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByteOrder {
    LittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub dtype: DataType,
    pub interleave: Interleave,
    pub byte_order: ByteOrder,
}

impl CubeHeader {
    pub fn new(samples: usize, lines: usize, bands: usize, dtype: DataType) -> Result<Self> {
        let header = CubeHeader {
            samples,
            lines,
            bands,
            dtype,
            interleave: Interleave::BandSequential,
            byte_order: ByteOrder::LittleEndian,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        for (key, value) in [
            ("samples", self.samples),
            ("lines", self.lines),
            ("bands", self.bands),
        ] {
            if value == 0 {
                return Err(DataError::Unsupported {
                    key,
                    value: "0".into(),
                });
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.samples * self.lines
    }

    /// Expected size of the raw payload in bytes.
    pub fn payload_bytes(&self) -> usize {
        self.pixel_count() * self.bands * self.dtype.width()
    }

    /// Parses ENVI header text. Keys are case-insensitive; brace-delimited
    /// values may span several lines. Unknown keys are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = None;
        let mut lines = None;
        let mut bands = None;
        let mut dtype = None;
        let mut interleave = None;
        let mut byte_order = None;

        let mut rows = text.lines().enumerate();
        while let Some((idx, raw)) = rows.next() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || (line_no == 1 && line.eq_ignore_ascii_case("ENVI")) {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(DataError::HeaderLine {
                    line: line_no,
                    content: raw.to_string(),
                    reason: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_ascii_lowercase();
            let mut value = value.trim().to_string();
            if value.starts_with('{') && !value.contains('}') {
                loop {
                    match rows.next() {
                        Some((_, more)) => {
                            value.push(' ');
                            value.push_str(more.trim());
                            if more.contains('}') {
                                break;
                            }
                        }
                        None => {
                            return Err(DataError::HeaderLine {
                                line: line_no,
                                content: raw.to_string(),
                                reason: "unterminated `{`".into(),
                            })
                        }
                    }
                }
            }

            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>().map_err(|e| DataError::HeaderLine {
                    line: line_no,
                    content: raw.to_string(),
                    reason: format!("invalid integer: {e}"),
                })
            };
            match key.as_str() {
                "samples" => samples = Some(int(&value)?),
                "lines" => lines = Some(int(&value)?),
                "bands" => bands = Some(int(&value)?),
                "data type" => {
                    let code = int(&value)? as u32;
                    dtype = Some(DataType::from_envi_code(code).ok_or(
                        DataError::Unsupported {
                            key: "data type",
                            value: value.clone(),
                        },
                    )?);
                }
                "interleave" => {
                    if !value.eq_ignore_ascii_case("bsq") {
                        return Err(DataError::Unsupported {
                            key: "interleave",
                            value,
                        });
                    }
                    interleave = Some(Interleave::BandSequential);
                }
                "byte order" => {
                    if int(&value)? != 0 {
                        return Err(DataError::Unsupported {
                            key: "byte order",
                            value,
                        });
                    }
                    byte_order = Some(ByteOrder::LittleEndian);
                }
                "header offset" => {
                    if int(&value)? != 0 {
                        return Err(DataError::Unsupported {
                            key: "header offset",
                            value,
                        });
                    }
                }
                _ => {}
            }
        }

        let header = CubeHeader {
            samples: samples.ok_or(DataError::MissingKey("samples"))?,
            lines: lines.ok_or(DataError::MissingKey("lines"))?,
            bands: bands.ok_or(DataError::MissingKey("bands"))?,
            dtype: dtype.ok_or(DataError::MissingKey("data type"))?,
            interleave: interleave.unwrap_or(Interleave::BandSequential),
            byte_order: byte_order.unwrap_or(ByteOrder::LittleEndian),
        };
        header.validate()?;
        Ok(header)
    }

    pub fn to_envi_string(&self) -> String {
        format!(
            "ENVI\nsamples = {}\nlines = {}\nbands = {}\nheader offset = 0\nfile type = ENVI Standard\ndata type = {}\ninterleave = bsq\nbyte order = 0\n",
            self.samples,
            self.lines,
            self.bands,
            self.dtype.envi_code()
        )
    }
}

/// Immutable band-sequential cube.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    header: CubeHeader,
    values: Vec<f64>,
}

impl HyperCube {
    /// Builds a cube from band-sequential values, rejecting non-finite entries
    /// and values the header's sample type cannot encode.
    pub fn from_values(header: CubeHeader, values: Vec<f64>) -> Result<Self> {
        header.validate()?;
        let expected = header.pixel_count() * header.bands;
        if values.len() != expected {
            return Err(DataError::ValueCount {
                expected,
                actual: values.len(),
            });
        }
        let plane = header.pixel_count();
        for (i, &v) in values.iter().enumerate() {
            let (band, row, col) = (i / plane, (i % plane) / header.samples, i % header.samples);
            if !v.is_finite() {
                return Err(DataError::NonFinite { band, row, col });
            }
            let representable = match header.dtype {
                DataType::U16 => v.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&v),
                DataType::F32 => (v as f32) as f64 == v,
            };
            if !representable {
                return Err(DataError::NotRepresentable {
                    value: v,
                    dtype: header.dtype,
                    band,
                    row,
                    col,
                });
            }
        }
        Ok(HyperCube { header, values })
    }

    /// Decodes a raw little-endian payload.
    pub fn decode(header: CubeHeader, bytes: &[u8]) -> Result<Self> {
        let expected = header.payload_bytes();
        if bytes.len() != expected {
            return Err(DataError::SizeMismatch {
                what: "cube payload",
                expected,
                actual: bytes.len(),
            });
        }
        let values: Vec<f64> = match header.dtype {
            DataType::U16 => bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            DataType::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
        };
        Self::from_values(header, values)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header.payload_bytes());
        match self.header.dtype {
            DataType::U16 => {
                for &v in &self.values {
                    out.extend_from_slice(&(v as u16).to_le_bytes());
                }
            }
            DataType::F32 => {
                for &v in &self.values {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn header(&self) -> &CubeHeader {
        &self.header
    }

    pub fn samples(&self) -> usize {
        self.header.samples
    }

    pub fn lines(&self) -> usize {
        self.header.lines
    }

    pub fn band_count(&self) -> usize {
        self.header.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.header.pixel_count()
    }

    /// All pixels of one band in row-major order.
    pub fn band(&self, band: usize) -> &[f64] {
        let plane = self.pixel_count();
        &self.values[band * plane..(band + 1) * plane]
    }

    pub fn value(&self, band: usize, row: usize, col: usize) -> f64 {
        self.values[band * self.pixel_count() + row * self.header.samples + col]
    }

    /// Spectrum of a pixel restricted to `bands`, in the order given.
    pub fn pixel_features(&self, pixel: usize, bands: &[usize]) -> Vec<f64> {
        let plane = self.pixel_count();
        bands.iter().map(|&b| self.values[b * plane + pixel]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_header(path: &Path) -> Result<CubeHeader> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CubeHeader::parse(&text)
}

pub fn load_cube(header_path: &Path, raw_path: &Path) -> Result<HyperCube> {
    let header = read_header(header_path)?;
    HyperCube::decode(header, &read_bytes(raw_path)?)
}

pub fn write_cube(cube: &HyperCube, header_path: &Path, raw_path: &Path) -> Result<()> {
    write_bytes(header_path, cube.header.to_envi_string().as_bytes())?;
    write_bytes(raw_path, &cube.encode())
}

/// Per-pixel class labels; `0` marks unlabeled background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    samples: usize,
    lines: usize,
    labels: Vec<u16>,
    classes: Vec<u16>,
}

impl GroundTruth {
    /// Classes are the distinct nonzero labels present in the raster.
    pub fn new(samples: usize, lines: usize, labels: Vec<u16>) -> Result<Self> {
        let classes: BTreeSet<u16> = labels.iter().copied().filter(|&l| l != 0).collect();
        Self::with_classes(samples, lines, labels, classes.into_iter().collect())
    }

    /// Uses an explicit class list, which may name classes absent from the
    /// raster. Every nonzero label must be declared.
    pub fn with_classes(
        samples: usize,
        lines: usize,
        labels: Vec<u16>,
        mut classes: Vec<u16>,
    ) -> Result<Self> {
        if labels.len() != samples * lines {
            return Err(DataError::ValueCount {
                expected: samples * lines,
                actual: labels.len(),
            });
        }
        classes.sort_unstable();
        classes.dedup();
        classes.retain(|&c| c != 0);
        if labels.iter().all(|&l| l == 0) {
            return Err(DataError::NoLabeledSamples);
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&l| l != 0 && classes.binary_search(&l).is_err())
        {
            return Err(DataError::UndeclaredLabel(bad));
        }
        Ok(GroundTruth {
            samples,
            lines,
            labels,
            classes,
        })
    }

    pub fn decode(header: &CubeHeader, bytes: &[u8]) -> Result<Self> {
        let expected = header.pixel_count() * 2;
        if bytes.len() != expected {
            return Err(DataError::SizeMismatch {
                what: "ground-truth payload",
                expected,
                actual: bytes.len(),
            });
        }
        let labels = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::new(header.samples, header.lines, labels)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.labels.iter().flat_map(|l| l.to_le_bytes()).collect()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Sorted distinct class ids (never contains 0).
    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Row-major indices of every labeled pixel, ascending.
    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn ensure_matches(&self, cube: &HyperCube) -> Result<()> {
        if self.samples != cube.samples() || self.lines != cube.lines() {
            return Err(DataError::DimensionMismatch {
                expected_samples: cube.samples(),
                expected_lines: cube.lines(),
                actual_samples: self.samples,
                actual_lines: self.lines,
            });
        }
        Ok(())
    }
}

pub fn load_ground_truth(path: &Path, header: &CubeHeader) -> Result<GroundTruth> {
    GroundTruth::decode(header, &read_bytes(path)?)
}

pub fn write_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    write_bytes(path, &gt.encode())
}

/// Reads a one-pixel-per-row CSV: band values followed by an integer label.
/// The result is a `P x 1` cube (samples = P, lines = 1).
pub fn load_csv_fixture(path: &Path) -> Result<(HyperCube, GroundTruth)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u16> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::RaggedRow {
                row,
                expected,
                found: record.len(),
            });
        }
        if expected < 2 {
            return Err(DataError::CsvCell {
                row,
                column: 1,
                reason: "need at least one band column and a label column".into(),
            });
        }
        let mut bands = Vec::with_capacity(expected - 1);
        for (col, cell) in record.iter().take(expected - 1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::CsvCell {
                row,
                column: col + 1,
                reason: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::CsvCell {
                    row,
                    column: col + 1,
                    reason: "non-finite value".into(),
                });
            }
            bands.push(v);
        }
        let cell = &record[expected - 1];
        let label: u16 = cell.parse().map_err(|_| DataError::CsvCell {
            row,
            column: expected,
            reason: format!("not a non-negative integer label: {cell:?}"),
        })?;
        rows.push(bands);
        labels.push(label);
    }

    let Some(width) = width else {
        return Err(DataError::EmptyCsv);
    };
    let pixels = rows.len();
    let bands = width - 1;
    let header = CubeHeader {
        samples: pixels,
        lines: 1,
        bands,
        dtype: DataType::F32,
        interleave: Interleave::BandSequential,
        byte_order: ByteOrder::LittleEndian,
    };
    let mut values = vec![0.0; pixels * bands];
    for (p, row) in rows.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            values[b * pixels + p] = v;
        }
    }
    // CSV cells keep full f64 precision in memory; F32 is nominal here.
    let cube = HyperCube { header, values };
    let gt = GroundTruth::new(pixels, 1, labels)?;
    Ok((cube, gt))
}

pub fn write_csv_fixture(cube: &HyperCube, gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let all: Vec<usize> = (0..cube.band_count()).collect();
    for p in 0..cube.pixel_count() {
        let mut row: Vec<String> = cube
            .pixel_features(p, &all)
            .iter()
            .map(|v| v.to_string())
            .collect();
        row.push(gt.labels()[p].to_string());
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Disjoint train/test partition of the labeled pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// Pixel indices, ascending.
    pub train: Vec<usize>,
    /// Pixel indices, ascending.
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

/// Number of training pixels drawn from a class of `size` pixels.
pub fn train_count(fraction: f64, size: usize) -> usize {
    if size == 0 {
        return 0;
    }
    ((fraction * size as f64).round() as usize).clamp(1, size)
}

/// Per-class random split: each class contributes `round(fraction * size)`
/// training pixels (at least one). Deterministic in `seed`.
pub fn stratified_split(gt: &GroundTruth, fraction: f64, seed: u64) -> Result<SplitAssignment> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &class in gt.classes() {
        let mut members: Vec<usize> = gt
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(DataError::EmptyClass(class));
        }
        members.shuffle(&mut rng);
        let n = train_count(fraction, members.len());
        train.extend_from_slice(&members[..n]);
        test.extend_from_slice(&members[n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment {
        train,
        test,
        fraction,
        seed,
    })
}
