use std::fs;
use std::path::{Path, PathBuf};

use nmibs::classmap;
use nmibs::datacube::{
    load_csv_fixture, load_cube, load_ground_truth, read_header, write_csv_fixture, write_cube, write_ground_truth,
    GroundTruth, HyperCube,
};
use nmibs::eval::{average_accuracy, confusion, overall_accuracy, percent, ConfusionMatrix};
use nmibs::pipeline::{classify, run_selection, BandChoice, SvmSettings};
use nmibs::selection::SelectionConfig;
use nmibs::synthetic::{self, Fixture, PlantedSpec};
use serde::Serialize;

use crate::{EvalArgs, Failure, FixtureArgs, FixtureKind, InputArgs, OutputArgs, PipelineArgs, SelectArgs, SelectionFlags};

fn ensure_exists(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage("input", format!("{} does not exist", path.display())))
    }
}

fn load_input(input: &InputArgs) -> Result<(HyperCube, GroundTruth), Failure> {
    if let Some(csv) = &input.csv {
        ensure_exists(csv)?;
        return Ok(load_csv_fixture(csv).map_err(nmibs::Error::from)?);
    }
    // clap guarantees the full triple when `--csv` is absent
    let (header, raw, gt) = match (&input.header, &input.raw, &input.gt) {
        (Some(h), Some(r), Some(g)) => (h, r, g),
        _ => return Err(Failure::usage("input", "need --header, --raw and --gt, or --csv")),
    };
    for path in [header, raw, gt] {
        ensure_exists(path)?;
    }
    let cube = load_cube(header, raw).map_err(nmibs::Error::from)?;
    let labels = load_ground_truth(gt, cube.header()).map_err(nmibs::Error::from)?;
    Ok((cube, labels))
}

fn output_dir(output: &OutputArgs) -> Result<&Path, Failure> {
    fs::create_dir_all(&output.dir)
        .map_err(|e| Failure::runtime("output", format!("cannot create {}: {e}", output.dir.display())))?;
    Ok(&output.dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::runtime("output", format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn selection_config(flags: &SelectionFlags, k: usize) -> SelectionConfig {
    let config = SelectionConfig::new(k).with_th(flags.th).with_bins(flags.bins);
    match flags.max_iterations {
        Some(m) => config.with_max_iterations(m),
        None => config,
    }
}

pub fn select(args: SelectArgs) -> Result<(), Failure> {
    let (cube, gt) = load_input(&args.input)?;
    let dir = output_dir(&args.output)?;
    let methods = args.selection.method.expand();
    let config = selection_config(&args.selection, args.k);
    for &method in &methods {
        let (result, secs) = run_selection(&cube, &gt, method, &config)?;
        let name = if methods.len() == 1 {
            "selection.json".to_string()
        } else {
            format!("selection_{method}.json")
        };
        let mut text = result.to_json();
        text.push('\n');
        write_file(&dir.join(&name), text)?;
        println!("{method}: {} bands {:?} in {secs:.3}s -> {name}", result.selected.len(), result.selected);
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassScore {
    label: u16,
    accuracy: Option<f64>,
    accuracy_pct: Option<String>,
}

fn class_scores(cm: &ConfusionMatrix) -> Vec<ClassScore> {
    cm.class_labels
        .iter()
        .zip(cm.per_class())
        .map(|(&label, accuracy)| ClassScore {
            label,
            accuracy,
            accuracy_pct: accuracy.map(percent),
        })
        .collect()
}

/// One classification run. Wall-clock time is kept out of this record so
/// that `report.json` depends only on inputs, flags and seed.
#[derive(Serialize)]
struct RunRecord {
    method: &'static str,
    k: usize,
    train_fraction: f64,
    selected_bands: Vec<usize>,
    iterations_used: Option<usize>,
    train_pixels: usize,
    test_pixels: usize,
    oa: f64,
    aa: f64,
    oa_pct: String,
    aa_pct: String,
    per_class: Vec<ClassScore>,
    confusion: ConfusionMatrix,
    map_pgm: String,
    map_csv: String,
}

#[derive(Serialize)]
struct InputEcho {
    header: Option<PathBuf>,
    raw: Option<PathBuf>,
    gt: Option<PathBuf>,
    csv: Option<PathBuf>,
    samples: usize,
    lines: usize,
    bands: usize,
    classes: Vec<u16>,
}

#[derive(Serialize)]
struct PipelineReport {
    input: InputEcho,
    seed: u64,
    th: f64,
    bins: usize,
    max_iterations: Option<usize>,
    svm: SvmSettings,
    runs: Vec<RunRecord>,
}

struct Planned {
    choice: BandChoice,
    k: usize,
    bands: Vec<usize>,
    iterations_used: Option<usize>,
    select_secs: f64,
}

fn fraction_tag(f: f64) -> String {
    format!("{f}")
}

pub fn pipeline(args: PipelineArgs) -> Result<(), Failure> {
    let (cube, gt) = load_input(&args.input)?;
    let dir = output_dir(&args.output)?;
    let svm = SvmSettings {
        c: args.c,
        gamma: args.gamma,
        tolerance: args.tolerance,
        max_passes: args.max_passes,
    };
    svm.params_for(1).validate().map_err(nmibs::Error::from)?;

    let mut ks = args.k.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut planned = Vec::new();
    for method in args.selection.method.expand() {
        for &k in &ks {
            let (result, select_secs) = run_selection(&cube, &gt, method, &selection_config(&args.selection, k))?;
            planned.push(Planned {
                choice: BandChoice::Select(method),
                k,
                bands: result.selected,
                iterations_used: Some(result.iterations_used),
                select_secs,
            });
        }
    }
    if args.baseline {
        planned.push(Planned {
            choice: BandChoice::AllBands,
            k: cube.band_count(),
            bands: (0..cube.band_count()).collect(),
            iterations_used: None,
            select_secs: 0.0,
        });
    }

    let single = planned.len() * args.fractions.len() == 1;
    let max_label = gt.classes().last().copied().unwrap_or(0);
    let mut runs = Vec::new();
    let mut csv = String::from("method,k,train_fraction,oa_pct,aa_pct,time_s\n");
    println!("{:<10} {:>5} {:>8} {:>7} {:>7} {:>9}", "method", "k", "fraction", "OA%", "AA%", "time_s");
    for plan in &planned {
        for &f in &args.fractions {
            let out = classify(&cube, &gt, &plan.bands, f, args.seed, &svm)?;
            let seconds = plan.select_secs + out.report.elapsed_seconds;
            let stem = if single {
                "map".to_string()
            } else {
                format!("map_{}_k{}_f{}", plan.choice.name(), plan.k, fraction_tag(f))
            };
            let (pgm, map_csv) = (format!("{stem}.pgm"), format!("{stem}.csv"));
            let image = classmap::encode_pgm(&out.map, cube.samples(), cube.lines(), max_label)
                .map_err(nmibs::Error::from)?;
            write_file(&dir.join(&pgm), image)?;
            let text = classmap::encode_csv(&out.map, cube.samples(), cube.lines()).map_err(nmibs::Error::from)?;
            write_file(&dir.join(&map_csv), text)?;

            let report = out.report;
            let (oa_pct, aa_pct) = (percent(report.oa), percent(report.aa));
            csv.push_str(&format!("{},{},{},{oa_pct},{aa_pct},{seconds:.3}\n", plan.choice.name(), plan.k, f));
            println!(
                "{:<10} {:>5} {:>8} {:>7} {:>7} {:>9.3}",
                plan.choice.name(),
                plan.k,
                f,
                oa_pct,
                aa_pct,
                seconds
            );
            runs.push(RunRecord {
                method: plan.choice.name(),
                k: plan.k,
                train_fraction: f,
                selected_bands: plan.bands.clone(),
                iterations_used: plan.iterations_used,
                train_pixels: out.split.train.len(),
                test_pixels: out.split.test.len(),
                oa: report.oa,
                aa: report.aa,
                oa_pct,
                aa_pct,
                per_class: class_scores(&report.confusion),
                confusion: report.confusion,
                map_pgm: pgm,
                map_csv,
            });
        }
    }

    let report = PipelineReport {
        input: InputEcho {
            header: args.input.header.clone(),
            raw: args.input.raw.clone(),
            gt: args.input.gt.clone(),
            csv: args.input.csv.clone(),
            samples: cube.samples(),
            lines: cube.lines(),
            bands: cube.band_count(),
            classes: gt.classes().to_vec(),
        },
        seed: args.seed,
        th: args.selection.th,
        bins: args.selection.bins,
        max_iterations: args.selection.max_iterations,
        svm,
        runs,
    };
    write_file(&dir.join("report.json"), to_json(&report))?;
    write_file(&dir.join("report.csv"), csv)?;
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord {
    map: PathBuf,
    scored_pixels: u64,
    oa: f64,
    aa: f64,
    oa_pct: String,
    aa_pct: String,
    per_class: Vec<ClassScore>,
    confusion: ConfusionMatrix,
}

fn load_reference(args: &EvalArgs) -> Result<GroundTruth, Failure> {
    if let Some(csv) = &args.csv {
        ensure_exists(csv)?;
        let (_, gt) = load_csv_fixture(csv).map_err(nmibs::Error::from)?;
        return Ok(gt);
    }
    let (gt, header) = match (&args.gt, &args.header) {
        (Some(g), Some(h)) => (g, h),
        _ => return Err(Failure::usage("input", "need --gt and --header, or --csv")),
    };
    ensure_exists(gt)?;
    ensure_exists(header)?;
    let header = read_header(header).map_err(nmibs::Error::from)?;
    // a raster whose size disagrees with the header is a shape mismatch
    load_ground_truth(gt, &header).map_err(|e| Failure::from(nmibs::Error::from(e)).as_usage())
}

pub fn eval(args: EvalArgs) -> Result<(), Failure> {
    let gt = load_reference(&args)?;
    ensure_exists(&args.map)?;
    let text = fs::read_to_string(&args.map)
        .map_err(|e| Failure::runtime("map", format!("cannot read {}: {e}", args.map.display())))?;
    let predicted_map = classmap::decode_csv(&text, gt.samples(), gt.lines())
        .map_err(|e| Failure::from(nmibs::Error::from(e)).as_usage())?;

    let pixels = gt.labeled_indices();
    let truth: Vec<u16> = pixels.iter().map(|&p| gt.labels()[p]).collect();
    let predicted: Vec<u16> = pixels.iter().map(|&p| predicted_map[p]).collect();
    let cm = confusion(&truth, &predicted, gt.classes()).map_err(nmibs::Error::from)?;
    let oa = overall_accuracy(&cm).map_err(nmibs::Error::from)?;
    let aa = average_accuracy(&cm).map_err(nmibs::Error::from)?;

    let record = EvalRecord {
        map: args.map.clone(),
        scored_pixels: cm.total(),
        oa,
        aa,
        oa_pct: percent(oa),
        aa_pct: percent(aa),
        per_class: class_scores(&cm),
        confusion: cm,
    };
    println!("OA {}", record.oa_pct);
    println!("AA {}", record.aa_pct);
    for class in &record.per_class {
        println!("class {:>3} {}", class.label, class.accuracy_pct.as_deref().unwrap_or("-"));
    }
    let dir = output_dir(&args.output)?;
    write_file(&dir.join("eval.json"), to_json(&record))
}

#[derive(Serialize)]
struct FixtureTruth {
    name: &'static str,
    seed: u64,
    samples: usize,
    lines: usize,
    bands: usize,
    signal: Vec<usize>,
    /// `[copy, source]` pairs.
    duplicates: Vec<(usize, usize)>,
}

fn write_fixture(dir: &Path, name: &'static str, seed: u64, fixture: &Fixture) -> Result<(), Failure> {
    let path = |suffix: &str| dir.join(format!("{name}{suffix}"));
    let io = |e: nmibs::datacube::DataError| Failure::runtime("output", e.to_string());
    write_cube(&fixture.cube, &path(".hdr"), &path(".raw")).map_err(io)?;
    write_ground_truth(&fixture.gt, &path("_gt.raw")).map_err(io)?;
    write_csv_fixture(&fixture.cube, &fixture.gt, &path(".csv")).map_err(io)?;
    let truth = FixtureTruth {
        name,
        seed,
        samples: fixture.cube.samples(),
        lines: fixture.cube.lines(),
        bands: fixture.cube.band_count(),
        signal: fixture.signal.clone(),
        duplicates: fixture.duplicates.clone(),
    };
    write_file(&path("_truth.json"), to_json(&truth))?;
    println!("{name}: {} bands, signal {:?} -> {}", truth.bands, truth.signal, path(".hdr").display());
    Ok(())
}

pub fn fixtures(args: FixtureArgs) -> Result<(), Failure> {
    let dir = output_dir(&args.output)?;
    let all = args.kind == FixtureKind::All;
    if all || args.kind == FixtureKind::Planted {
        write_fixture(dir, "planted", args.seed, &synthetic::planted(args.seed, &PlantedSpec::default()))?;
    }
    if all || args.kind == FixtureKind::Trend {
        write_fixture(dir, "trend", args.seed, &synthetic::trend_cube(args.seed))?;
    }
    if all || args.kind == FixtureKind::Duplicated {
        write_fixture(dir, "duplicated", args.seed, &synthetic::duplicated_signal(args.seed))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_tags_are_plain_decimals() {
        assert_eq!(fraction_tag(0.1), "0.1");
        assert_eq!(fraction_tag(0.25), "0.25");
    }

    #[test]
    fn library_errors_keep_their_stage() {
        let err = nmibs::Error::from(nmibs::selection::SelectionError::Config("k must be in [1, 3], got 4".into()));
        let failure = Failure::from(err);
        assert_eq!(failure.stage, "selection");
        assert_eq!(failure.code, 2);
        assert!(failure.to_string().starts_with("selection stage failed"));
    }
}
