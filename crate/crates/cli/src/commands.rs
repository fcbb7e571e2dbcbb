use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use panosga::io::{
    load_image, load_labels, load_report, save_image, save_labels, save_report, save_report_csv,
    write_json, DatasetManifest, ManifestEntry,
};
use panosga::metrics::accumulate_into;
use panosga::validation::{CommandPredictor, DirPredictor};
use panosga::{
    aggregate, build_grid, compose, rotate_erp, rotate_labels, run_validation, sample_augmentation,
    summarize, weight_map, AugmentationConfig, ConfusionMatrix, ErpImage, GridSpec, ImageDims,
    Predictor, RotationAngles, Summary,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::args::{
    AggregateArgs, AugmentArgs, EvaluateArgs, Mode, RotateArgs, SgaValidateArgs, WeightFormat,
    WeightsArgs,
};

/// Why a subcommand stopped; each kind maps to its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Predictor(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Predictor(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Predictor(m) => m,
        }
    }
}

impl From<panosga::Error> for Failure {
    fn from(e: panosga::Error) -> Self {
        match e {
            panosga::Error::Predictor(_) => Failure::Predictor(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", path.display())))
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn check_angles(angles: RotationAngles) -> Result<(), Failure> {
    if angles.is_finite() {
        Ok(())
    } else {
        Err(usage(format!(
            "rotation angles must be finite, got {angles:?}"
        )))
    }
}

pub fn rotate(args: &RotateArgs) -> Outcome {
    let angles = RotationAngles::new(args.yaw, args.pitch, args.roll);
    check_angles(angles)?;
    let r = compose(angles);
    match args.mode {
        Mode::Image => save_image(&rotate_erp(&load_image(&args.input)?, &r), &args.output)?,
        Mode::Label => save_labels(&rotate_labels(&load_labels(&args.input)?, &r), &args.output)?,
    }
    info!("wrote {}", args.output.display());
    Ok(())
}

struct AugmentedCopy {
    entry: ManifestEntry,
    log_line: String,
}

pub fn augment(args: &AugmentArgs) -> Outcome {
    let max = RotationAngles::new(args.max_yaw, args.max_pitch, args.max_roll);
    let cfg = AugmentationConfig::new(max, args.prob).map_err(|e| usage(e.to_string()))?;
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let manifest = DatasetManifest::load(&args.manifest)?;
    let images_dir = args.out_dir.join("images");
    let labels_dir = args.out_dir.join("labels");
    create_dir(&images_dir)?;
    create_dir(&labels_dir)?;

    let per_entry = with_pool(args.jobs, || {
        manifest
            .entries
            .par_iter()
            .enumerate()
            .map(|(index, entry)| {
                let sample = manifest.load_sample(entry)?;
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                rng.set_stream(index as u64);
                let mut copies = Vec::with_capacity(args.count);
                for k in 0..args.count {
                    let draw = sample_augmentation(&cfg, &mut rng);
                    let r = compose(draw.angles);
                    let id = format!("{}_aug{k}", sample.id);
                    let image_rel = PathBuf::from("images").join(format!("{id}.png"));
                    let label_rel = PathBuf::from("labels").join(format!("{id}.png"));
                    save_image(
                        &rotate_erp(&sample.image, &r),
                        args.out_dir.join(&image_rel),
                    )?;
                    save_labels(
                        &rotate_labels(&sample.labels, &r),
                        args.out_dir.join(&label_rel),
                    )?;
                    let a = draw.angles;
                    copies.push(AugmentedCopy {
                        log_line: format!(
                            "{id},{},{},{},{},{}",
                            sample.id, draw.applied, a.yaw, a.pitch, a.roll
                        ),
                        entry: ManifestEntry {
                            sample_id: id,
                            image_path: image_rel,
                            label_path: label_rel,
                        },
                    });
                }
                Ok(copies)
            })
            .collect::<panosga::Result<Vec<_>>>()
    })??;

    let mut log = String::from("sample_id,source_id,applied,yaw,pitch,roll\n");
    let mut entries = Vec::new();
    for copy in per_entry.into_iter().flatten() {
        log.push_str(&copy.log_line);
        log.push('\n');
        entries.push(copy.entry);
    }
    let count = entries.len();
    let out_manifest = DatasetManifest {
        entries,
        num_classes: manifest.num_classes,
        ignore_id: manifest.ignore_id,
        base_dir: args.out_dir.clone(),
    };
    out_manifest.save(args.out_dir.join("manifest.json"))?;
    let log_path = args.out_dir.join("augmentations.csv");
    fs::write(&log_path, log)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", log_path.display())))?;
    info!("wrote {count} samples to {}", args.out_dir.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Outcome {
    if args.classes == Some(0) {
        return Err(usage("--classes must be at least 1"));
    }
    let mut manifest = DatasetManifest::load(&args.manifest)?;
    if let Some(c) = args.classes {
        manifest.num_classes = c;
    }
    let dataset = manifest.load_dataset()?;
    let per_sample = with_pool(args.jobs, || {
        dataset
            .samples
            .par_iter()
            .map(|s| {
                let pred = load_labels(args.pred_dir.join(format!("{}.png", s.id)))?
                    .with_ignore_id(s.labels.ignore_id());
                let mut cm = ConfusionMatrix::new(dataset.num_classes);
                accumulate_into(&mut cm, &pred, &s.labels)?;
                Ok(cm)
            })
            .collect::<panosga::Result<Vec<_>>>()
    })??;
    let mut total = ConfusionMatrix::new(dataset.num_classes);
    for cm in &per_sample {
        total.merge(cm);
    }
    let record = total.record()?;
    write_json(&record, &args.report)?;
    println!("miou {:.6}", record.miou);
    println!("pixel_accuracy {:.6}", record.pixel_accuracy);
    Ok(())
}

fn parse_predictor(spec: &str, work_dir: &Path) -> Result<Box<dyn Predictor>, Failure> {
    if let Some(path) = spec.strip_prefix("dir:") {
        Ok(Box::new(DirPredictor::new(path)))
    } else if let Some(template) = spec.strip_prefix("cmd:") {
        let p = CommandPredictor::new(template, work_dir).map_err(|e| usage(e.to_string()))?;
        Ok(Box::new(p))
    } else {
        Err(usage(format!(
            "--predictor must start with `dir:` or `cmd:`, got `{spec}`"
        )))
    }
}

pub fn sga_validate(args: &SgaValidateArgs) -> Outcome {
    let spec = GridSpec {
        yaw: args.grid_yaw.clone(),
        pitch: args.grid_pitch.clone(),
        roll: args.grid_roll.clone(),
    };
    let grid = build_grid(&spec).map_err(|e| usage(e.to_string()))?;
    let work_dir = tempfile::tempdir()
        .map_err(|e| Failure::Data(format!("cannot create work directory: {e}")))?;
    let predictor = parse_predictor(&args.predictor, work_dir.path())?;
    let dataset = DatasetManifest::load(&args.manifest)?.load_dataset()?;
    info!(
        "{} samples, {} situations",
        dataset.samples.len(),
        grid.len()
    );

    let results = with_pool(args.jobs, || {
        run_validation(&dataset, predictor.as_ref(), &grid)
    })?;
    for r in results.iter().filter(|r| r.error.is_some()) {
        log::error!(
            "situation {} failed: {}",
            r.index,
            r.error.as_deref().unwrap_or_default()
        );
    }
    let first_error = results.iter().find_map(|r| r.error.clone());
    let report = match aggregate(results) {
        Ok(report) => report,
        Err(_) => {
            return Err(Failure::Predictor(format!(
                "every situation failed; first error: {}",
                first_error.unwrap_or_default()
            )))
        }
    };
    save_report(&report, &args.report)?;
    if let Some(table) = &args.table {
        save_report_csv(&report, table)?;
    }
    println!(
        "miou mean {:.6} variance {:.6} range {:.6}",
        report.mean.miou, report.variance.miou, report.range.miou
    );
    println!(
        "pixel_accuracy mean {:.6} variance {:.6} range {:.6}",
        report.mean.pixel_accuracy, report.variance.pixel_accuracy, report.range.pixel_accuracy
    );
    if report.has_failures() {
        return Err(Failure::Predictor(format!(
            "{} of {} situations failed: {:?}",
            report.failed.len(),
            report.situations.len(),
            report.failed
        )));
    }
    Ok(())
}

fn parse_values(raw: &str) -> Result<Vec<f64>, Failure> {
    let path = Path::new(raw);
    let text = if path.is_file() {
        fs::read_to_string(path)
            .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?
    } else {
        raw.to_string()
    };
    let tokens: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    let bad = |t: &str| {
        let msg = format!("`{t}` is not a number");
        if path.is_file() {
            Failure::Data(msg)
        } else {
            usage(msg)
        }
    };
    tokens
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| bad(t)))
        .collect()
}

fn summary_lines(prefix: &str, s: &Summary, precision: usize) -> String {
    let mut out = String::new();
    for (name, v) in [
        ("mean", s.mean),
        ("variance", s.variance),
        ("range", s.range),
    ] {
        let _ = writeln!(out, "{prefix}{name} {v:.precision$}");
    }
    out
}

pub fn aggregate_cmd(args: &AggregateArgs) -> Outcome {
    let p = args.precision;
    if let Some(raw) = &args.source.values {
        let values = parse_values(raw)?;
        let s = summarize(&values).map_err(|e| usage(e.to_string()))?;
        print!("{}", summary_lines("", &s, p));
    } else if let Some(path) = &args.source.report {
        let report = load_report(path)?;
        let mut out = String::new();
        for (name, pair) in [
            ("mean", report.mean),
            ("variance", report.variance),
            ("range", report.range),
        ] {
            let _ = writeln!(out, "miou {name} {:.p$}", pair.miou);
            let _ = writeln!(out, "pixel_accuracy {name} {:.p$}", pair.pixel_accuracy);
        }
        print!("{out}");
    }
    Ok(())
}

pub fn weights(args: &WeightsArgs) -> Outcome {
    let width = args.width.unwrap_or(args.height.saturating_mul(2));
    let dims = ImageDims::new(args.height, width).map_err(|e| usage(e.to_string()))?;
    let format = args.format.unwrap_or_else(|| {
        let is_png = args
            .output
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            WeightFormat::Png
        } else {
            WeightFormat::Text
        }
    });
    let map = weight_map(dims);
    match format {
        WeightFormat::Png => {
            let data = (0..dims.height)
                .flat_map(|i| std::iter::repeat_n(map.row(i), dims.width))
                .collect();
            save_image(&ErpImage::new(dims, 1, data)?, &args.output)?;
        }
        WeightFormat::Text => {
            let mut out = String::new();
            for &w in map.rows() {
                let row = vec![w.to_string(); dims.width];
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            fs::write(&args.output, out).map_err(|e| {
                Failure::Data(format!("cannot write {}: {e}", args.output.display()))
            })?;
        }
    }
    info!("wrote {dims} weight map to {}", args.output.display());
    Ok(())
}
