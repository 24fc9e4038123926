//! Built-in synthetic cubes with known informative bands.
//!
//! Signal bands carry the class index plus uniform noise; noise bands are
//! independent uniform draws. Values are rounded to `f32` so the cubes encode
//! losslessly as float-32 rasters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::datacube::{CubeHeader, DataType, GroundTruth, HyperCube};

/// A generated cube together with what was planted in it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub cube: HyperCube,
    pub gt: GroundTruth,
    /// Distinct signal bands, ascending.
    pub signal: Vec<usize>,
    /// `(copy, source)` pairs: band `copy` is an exact duplicate of `source`.
    pub duplicates: Vec<(usize, usize)>,
}

impl Fixture {
    /// True if `bands` holds both members of any duplicate pair.
    pub fn has_duplicate_pair(&self, bands: &[usize]) -> bool {
        self.duplicates
            .iter()
            .any(|(copy, source)| bands.contains(copy) && bands.contains(source))
    }

    /// True if `bands` is the signal set, allowing a duplicate in place of
    /// its source.
    pub fn is_signal_set(&self, bands: &[usize]) -> bool {
        if bands.len() != self.signal.len() || self.has_duplicate_pair(bands) {
            return false;
        }
        let canonical = |b: usize| {
            self.duplicates
                .iter()
                .find(|(copy, _)| *copy == b)
                .map_or(b, |&(_, source)| source)
        };
        let mut mapped: Vec<usize> = bands.iter().map(|&b| canonical(b)).collect();
        mapped.sort_unstable();
        mapped == self.signal
    }
}

/// Shape of a random planted fixture.
#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub samples: usize,
    pub lines: usize,
    pub classes: u16,
    /// Inclusive range for the number of distinct signal bands.
    pub signal_range: (usize, usize),
    pub max_bands: usize,
    /// Half-width of the uniform noise added to signal bands.
    pub signal_noise: f64,
    pub duplicate_signal: bool,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            samples: 20,
            lines: 10,
            classes: 3,
            signal_range: (2, 3),
            max_bands: 20,
            signal_noise: 0.5,
            duplicate_signal: true,
        }
    }
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

fn build(
    samples: usize,
    lines: usize,
    bands: Vec<Vec<f64>>,
    labels: Vec<u16>,
) -> (HyperCube, GroundTruth) {
    let header = CubeHeader::new(samples, lines, bands.len(), DataType::F32).expect("non-empty geometry");
    let values = bands.concat().into_iter().map(f32_round).collect();
    let cube = HyperCube::from_values(header, values).expect("finite f32 values");
    let gt = GroundTruth::new(samples, lines, labels).expect("labeled pixels");
    (cube, gt)
}

fn signal_band(labels: &[u16], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let jitter = Uniform::new_inclusive(-noise, noise).expect("valid range");
    labels
        .iter()
        .map(|&l| (l - 1) as f64 + jitter.sample(rng))
        .collect()
}

fn noise_band(pixels: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..pixels).map(|_| rng.random::<f64>()).collect()
}

/// Random fixture with a few signal bands hidden among noise bands, and
/// optionally one exact duplicate of a signal band.
pub fn planted(seed: u64, spec: &PlantedSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = spec.samples * spec.lines;
    let m = rng.random_range(spec.signal_range.0..=spec.signal_range.1);
    let extra = usize::from(spec.duplicate_signal);
    let min_bands = (m + extra + 4).min(spec.max_bands);
    let n = rng.random_range(min_bands..=spec.max_bands);

    let labels: Vec<u16> = (0..pixels)
        .map(|_| rng.random_range(1..=spec.classes))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut signal: Vec<usize> = order[..m].to_vec();

    let mut bands: Vec<Vec<f64>> = Vec::with_capacity(n);
    for b in 0..n {
        if signal.contains(&b) {
            bands.push(signal_band(&labels, spec.signal_noise, &mut rng));
        } else {
            bands.push(noise_band(pixels, &mut rng));
        }
    }
    let mut duplicates = Vec::new();
    if spec.duplicate_signal {
        let copy = order[m];
        let source = signal[rng.random_range(0..m)];
        bands[copy] = bands[source].clone();
        duplicates.push((copy, source));
    }
    signal.sort_unstable();

    let (cube, gt) = build(spec.samples, spec.lines, bands, labels);
    Fixture {
        cube,
        gt,
        signal,
        duplicates,
    }
}

/// Quadrant class layout on a `side x side` scene, classes `1..=4`.
fn quadrant_labels(side: usize) -> Vec<u16> {
    let half = side / 2;
    (0..side * side)
        .map(|p| {
            let (row, col) = (p / side, p % side);
            (1 + 2 * usize::from(row >= half) + usize::from(col >= half)) as u16
        })
        .collect()
}

/// Half-width of the noise on [`trend_cube`] signal bands.
pub const TREND_SIGNAL_NOISE: f64 = 1.0;

/// 32 x 32 scene, 4 quadrant classes, 60 bands of which 8 carry signal.
pub fn trend_cube(seed: u64) -> Fixture {
    trend_cube_with(seed, TREND_SIGNAL_NOISE)
}

/// [`trend_cube`] with a chosen noise half-width on the signal bands.
pub fn trend_cube_with(seed: u64, signal_noise: f64) -> Fixture {
    const SIDE: usize = 32;
    const BANDS: usize = 60;
    const SIGNAL: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = quadrant_labels(SIDE);
    let mut order: Vec<usize> = (0..BANDS).collect();
    order.shuffle(&mut rng);
    let mut signal = order[..SIGNAL].to_vec();
    let bands: Vec<Vec<f64>> = (0..BANDS)
        .map(|b| {
            if signal.contains(&b) {
                signal_band(&labels, signal_noise, &mut rng)
            } else {
                noise_band(labels.len(), &mut rng)
            }
        })
        .collect();
    signal.sort_unstable();
    let (cube, gt) = build(SIDE, SIDE, bands, labels);
    Fixture {
        cube,
        gt,
        signal,
        duplicates: Vec::new(),
    }
}

/// Three signal bands, each with an exact duplicate, among noise bands.
pub fn duplicated_signal(seed: u64) -> Fixture {
    const SIDE: usize = 16;
    const BANDS: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u16> = (0..SIDE * SIDE).map(|_| rng.random_range(1..=3)).collect();
    let mut order: Vec<usize> = (0..BANDS).collect();
    order.shuffle(&mut rng);
    let sources = &order[..3];
    let copies = &order[3..6];
    let mut bands: Vec<Vec<f64>> = (0..BANDS).map(|_| noise_band(labels.len(), &mut rng)).collect();
    for &s in sources {
        bands[s] = signal_band(&labels, 0.75, &mut rng);
    }
    let mut duplicates = Vec::new();
    for (&copy, &source) in copies.iter().zip(sources) {
        bands[copy] = bands[source].clone();
        duplicates.push((copy, source));
    }
    let mut signal = sources.to_vec();
    signal.sort_unstable();
    let (cube, gt) = build(SIDE, SIDE, bands, labels);
    Fixture {
        cube,
        gt,
        signal,
        duplicates,
    }
}
