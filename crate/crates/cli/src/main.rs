//! Command line front end for the sEMG gesture pipeline: synthesize
//! recordings, filter and normalize them, cut windows, train the CNN,
//! sweep hyperparameters, and render report tables and charts.

mod config;
mod errors;
mod manifest;
mod plots;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use emgcnn_core::dataio::{
    load_dataset, load_frames, save_dataset, save_frames, save_model, Dataset,
};
use emgcnn_core::dsp::{design_bandpass, design_notch, filter_forward_backward, zscore_classwise};
use emgcnn_core::eval::{average_subjectwise, ConfusionMatrix};
use emgcnn_core::sweep::{
    confusions_csv, improvement_delta, kernel_trend, parse_confusions_csv, parse_results_csv,
    results_csv, run_grid, Metric, ResultRow, SweepGrid, RESULTS_HEADER,
};
use emgcnn_core::synthgen::{generate, separability_check, Scale, SynthConfig};
use emgcnn_core::training::{train, EpochStats, TrainConfig};
use emgcnn_core::windowing::{segment, WindowParams};
use emgcnn_core::CLASS_NAMES;

use config::{parse_list, FileConfig};
use errors::CliError;
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "emgcnn",
    version,
    about = "Surface EMG gesture pipeline: synthesis, preprocessing, CNN training, sweeps, reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-subject sEMG dataset
    Synth(SynthArgs),
    /// Notch + bandpass filter and class-wise z-score a dataset
    Preprocess(PreprocessArgs),
    /// Cut a dataset into fixed-length labeled windows
    Segment(SegmentArgs),
    /// Train the CNN on a frame file and save model + metrics
    Train(TrainArgs),
    /// Train over a (window, overlap, kernel, seed) grid per subject
    Sweep(SweepArgs),
    /// Summarize a sweep results CSV into tables and SVG charts
    Report(ReportArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args)]
struct SynthArgs {
    /// Directory the dataset is written into
    #[arg(long)]
    out: PathBuf,
    /// Optional key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    sessions: Option<usize>,
    /// Active-class trials per session and class
    #[arg(long)]
    trials: Option<usize>,
    /// Motion trial duration in seconds
    #[arg(long)]
    trial_duration: Option<f64>,
    /// Rest duration after each trial in seconds
    #[arg(long)]
    rest_duration: Option<f64>,
    /// Sample rate in Hz
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    /// Active-segment RMS relative to unit background noise
    #[arg(long)]
    snr: Option<f64>,
    /// Protocol scale: full or small
    #[arg(long)]
    scale: Option<String>,
    /// Print the nearest-centroid separability score after generating
    #[arg(long, default_value_t = false)]
    check: bool,
}

const SYNTH_KEYS: &[&str] = &[
    "seed",
    "subjects",
    "sessions",
    "trials",
    "trial-duration",
    "rest-duration",
    "rate",
    "channels",
    "snr",
    "scale",
];

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.check_keys(SYNTH_KEYS)?;

    let seed = file.resolve(args.seed, "seed", 42u64)?;
    let defaults = SynthConfig::defaults(seed);
    let scale_raw = file.resolve(args.scale.clone(), "scale", "full".to_string())?;
    let scale = match scale_raw.as_str() {
        "full" => Scale::Full,
        "small" => Scale::Small,
        other => {
            return Err(CliError::Usage(format!(
                "scale must be 'full' or 'small', got '{other}'"
            )))
        }
    };
    let cfg = SynthConfig {
        seed,
        subjects: file.resolve(args.subjects, "subjects", defaults.subjects)?,
        sessions: file.resolve(args.sessions, "sessions", defaults.sessions)?,
        trials_per_active_class: file.resolve(args.trials, "trials", defaults.trials_per_active_class)?,
        trial_duration_s: file.resolve(args.trial_duration, "trial-duration", defaults.trial_duration_s)?,
        rest_duration_s: file.resolve(args.rest_duration, "rest-duration", defaults.rest_duration_s)?,
        sample_rate_hz: file.resolve(args.rate, "rate", defaults.sample_rate_hz)?,
        channels: file.resolve(args.channels, "channels", defaults.channels)?,
        snr: file.resolve(args.snr, "snr", defaults.snr)?,
        scale,
    };

    std::fs::create_dir_all(&args.out)?;
    let eff = cfg.effective();
    let mut man = RunManifest::new("synth", Some(seed));
    man.set("subjects", eff.subjects);
    man.set("sessions", eff.sessions);
    man.set("trials", eff.trials_per_active_class);
    man.set("trial-duration", eff.trial_duration_s);
    man.set("rest-duration", eff.rest_duration_s);
    man.set("rate", eff.sample_rate_hz);
    man.set("channels", eff.channels);
    man.set("snr", eff.snr);
    man.set("scale", scale_raw);
    man.output(&args.out);
    man.write_to_dir(&args.out)?;

    let recordings = generate(&cfg)?;
    let n = recordings.len();
    let samples = recordings.first().map_or(0, |r| r.num_samples());
    let ds = Dataset::new(recordings)?;
    save_dataset(&args.out, &ds)?;
    println!(
        "wrote {n} recordings ({} channels, {samples} samples each) to {}",
        ds.num_channels,
        args.out.display()
    );
    if args.check {
        let score = separability_check(&ds.recordings)?;
        println!("separability check: nearest-centroid accuracy {score:.3}");
    }
    Ok(())
}

// ----------------------------------------------------------- preprocess

#[derive(Args)]
struct PreprocessArgs {
    /// Directory holding the input dataset
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Directory the filtered dataset is written into
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Notch center frequency in Hz
    #[arg(long)]
    notch_hz: Option<f64>,
    /// Notch quality factor
    #[arg(long)]
    notch_q: Option<f64>,
    /// Bandpass low cutoff in Hz
    #[arg(long)]
    band_lo: Option<f64>,
    /// Bandpass high cutoff in Hz (clamped below Nyquist when needed)
    #[arg(long)]
    band_hi: Option<f64>,
    /// Butterworth order per bandpass edge
    #[arg(long)]
    order: Option<usize>,
}

const PREPROCESS_KEYS: &[&str] = &["notch-hz", "notch-q", "band-lo", "band-hi", "order"];

fn cmd_preprocess(args: PreprocessArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.check_keys(PREPROCESS_KEYS)?;
    let notch_hz = file.resolve(args.notch_hz, "notch-hz", 50.0)?;
    let notch_q = file.resolve(args.notch_q, "notch-q", 30.0)?;
    let band_lo = file.resolve(args.band_lo, "band-lo", 10.0)?;
    let band_hi = file.resolve(args.band_hi, "band-hi", 500.0)?;
    let order = file.resolve(args.order, "order", 4usize)?;

    let ds = load_dataset(&args.input)?;
    let fs = ds.sample_rate_hz;
    // A cutoff at or above Nyquist is not designable; pull it down and
    // say so rather than refusing the stock settings at low rates.
    let effective_hi = if band_hi >= 0.5 * fs {
        let clamped = 0.45 * fs;
        eprintln!("note: band-hi {band_hi} Hz >= Nyquist ({} Hz); clamped to {clamped} Hz", 0.5 * fs);
        clamped
    } else {
        band_hi
    };

    std::fs::create_dir_all(&args.out)?;
    let mut man = RunManifest::new("preprocess", None);
    man.set("notch-hz", notch_hz);
    man.set("notch-q", notch_q);
    man.set("band-lo", band_lo);
    man.set("band-hi", band_hi);
    man.set("band-hi-effective", effective_hi);
    man.set("order", order);
    man.input(&args.input);
    man.output(&args.out);
    man.write_to_dir(&args.out)?;

    let notch = design_notch(notch_hz, notch_q, fs)?;
    let bandpass = design_bandpass(band_lo, effective_hi, fs, order)?;

    let mut out_recs = Vec::with_capacity(ds.recordings.len());
    for rec in &ds.recordings {
        let mut filtered = rec.clone();
        for row in &mut filtered.samples {
            let after_notch = filter_forward_backward(row, &notch)?;
            *row = filter_forward_backward(&after_notch, &bandpass)?;
        }
        out_recs.push(zscore_classwise(&filtered)?);
    }
    let n = out_recs.len();
    let out_ds = Dataset::new(out_recs)?;
    save_dataset(&args.out, &out_ds)?;
    println!("filtered and normalized {n} recordings into {}", args.out.display());
    Ok(())
}

// -------------------------------------------------------------- segment

#[derive(Args)]
struct SegmentArgs {
    /// Directory holding the input dataset
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output frame file
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window length in samples
    #[arg(long)]
    window: Option<usize>,
    /// Overlap fraction in [0, 1)
    #[arg(long)]
    overlap: Option<f64>,
}

const SEGMENT_KEYS: &[&str] = &["window", "overlap"];

fn cmd_segment(args: SegmentArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.check_keys(SEGMENT_KEYS)?;
    let window = file.resolve(args.window, "window", 125usize)?;
    let overlap = file.resolve(args.overlap, "overlap", 0.0f64)?;

    let params = WindowParams::new(window, overlap)?;
    let ds = load_dataset(&args.input)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut man = RunManifest::new("segment", None);
    man.set("window", window);
    man.set("overlap", overlap);
    man.input(&args.input);
    man.output(&args.out);
    man.write_beside(&args.out)?;

    let set = segment(&ds.recordings, &params)?;
    let counts = set.class_counts();
    save_frames(&args.out, &set)?;
    let per_class: Vec<String> = CLASS_NAMES
        .iter()
        .zip(counts.iter())
        .map(|(name, n)| format!("{name}={n}"))
        .collect();
    println!(
        "cut {} frames of {window}x{} into {} ({})",
        set.frames.len(),
        set.num_channels,
        args.out.display(),
        per_class.join(" ")
    );
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// Input frame file
    #[arg(long)]
    frames: PathBuf,
    /// Directory for model.bin, curve.csv, metrics.csv, confusion.csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Convolution kernel size: 3, 5, or 7
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fraction of frames per class used for training
    #[arg(long)]
    train_fraction: Option<f64>,
}

const TRAIN_KEYS: &[&str] = &["kernel", "seed", "epochs", "lr", "batch-size", "train-fraction"];

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.check_keys(TRAIN_KEYS)?;
    let kernel = file.resolve(args.kernel, "kernel", 3usize)?;
    let seed = file.resolve(args.seed, "seed", 42u64)?;
    let defaults = TrainConfig::defaults(seed);
    let cfg = TrainConfig {
        learning_rate: file.resolve(args.lr, "lr", defaults.learning_rate)?,
        epochs: file.resolve(args.epochs, "epochs", defaults.epochs)?,
        batch_size: file.resolve(args.batch_size, "batch-size", defaults.batch_size)?,
        train_fraction: file.resolve(args.train_fraction, "train-fraction", defaults.train_fraction)?,
        ..defaults
    };

    let set = load_frames(&args.frames)?;

    std::fs::create_dir_all(&args.out)?;
    let mut man = RunManifest::new("train", Some(seed));
    man.set("kernel", kernel);
    man.set("epochs", cfg.epochs);
    man.set("lr", cfg.learning_rate);
    man.set("batch-size", cfg.batch_size);
    man.set("train-fraction", cfg.train_fraction);
    man.input(&args.frames);
    man.output(&args.out);
    man.write_to_dir(&args.out)?;

    let (net, report) = train(&set, kernel, &cfg)?;

    save_model(&args.out.join("model.bin"), &net)?;
    write_text(&args.out.join("curve.csv"), &report.curve_csv())?;
    write_text(
        &args.out.join("metrics.csv"),
        &format!(
            "accuracy,f1_macro\n{:.6},{:.6}\n",
            report.test_accuracy, report.test_f1_macro
        ),
    )?;
    write_text(&args.out.join("confusion.csv"), &confusion_table(&report.confusion))?;
    println!(
        "trained {} epochs in {:.1} s: test accuracy {:.4}, macro F1 {:.4} -> {}",
        cfg.epochs,
        report.seconds,
        report.test_accuracy,
        report.test_f1_macro,
        args.out.display()
    );
    Ok(())
}

/// Confusion counts as CSV: true class per row, predicted per column.
fn confusion_table(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("true_class");
    for p in CLASS_NAMES {
        out.push_str(&format!(",pred_{p}"));
    }
    out.push('\n');
    let counts = cm.counts();
    for (t, name) in CLASS_NAMES.iter().enumerate() {
        out.push_str(name);
        for p in 0..CLASS_NAMES.len() {
            out.push_str(&format!(",{}", counts[t][p]));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- sweep

#[derive(Args)]
struct SweepArgs {
    /// Directory holding the input dataset
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Results CSV; if it exists, finished cells are skipped and new
    /// rows are appended
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated window lengths
    #[arg(long)]
    windows: Option<String>,
    /// Comma-separated overlap fractions
    #[arg(long)]
    overlaps: Option<String>,
    /// Comma-separated kernel sizes
    #[arg(long)]
    kernels: Option<String>,
    /// Comma-separated master seeds
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

const SWEEP_KEYS: &[&str] = &[
    "windows",
    "overlaps",
    "kernels",
    "seeds",
    "jobs",
    "epochs",
    "lr",
    "batch-size",
    "train-fraction",
];

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    file.check_keys(SWEEP_KEYS)?;
    let default_grid = SweepGrid::defaults(42);
    let windows = match file.resolve_opt::<String>(args.windows.clone(), "windows")? {
        Some(raw) => parse_list(&raw, "windows")?,
        None => default_grid.windows.clone(),
    };
    let overlaps = match file.resolve_opt::<String>(args.overlaps.clone(), "overlaps")? {
        Some(raw) => parse_list(&raw, "overlaps")?,
        None => default_grid.overlaps.clone(),
    };
    let kernels = match file.resolve_opt::<String>(args.kernels.clone(), "kernels")? {
        Some(raw) => parse_list(&raw, "kernels")?,
        None => default_grid.kernels.clone(),
    };
    let seeds = match file.resolve_opt::<String>(args.seeds.clone(), "seeds")? {
        Some(raw) => parse_list(&raw, "seeds")?,
        None => default_grid.seeds.clone(),
    };
    let grid = SweepGrid { windows, overlaps, kernels, seeds };
    grid.validate().map_err(CliError::from)?;

    let jobs = file.resolve_opt::<usize>(args.jobs, "jobs")?;
    let template_seed = *grid.seeds.first().expect("validated non-empty");
    let defaults = TrainConfig::defaults(template_seed);
    let template = TrainConfig {
        epochs: file.resolve(args.epochs, "epochs", defaults.epochs)?,
        learning_rate: file.resolve(args.lr, "lr", defaults.learning_rate)?,
        batch_size: file.resolve(args.batch_size, "batch-size", defaults.batch_size)?,
        train_fraction: file.resolve(args.train_fraction, "train-fraction", defaults.train_fraction)?,
        ..defaults
    };
    template.validate().map_err(CliError::from)?;

    let confusions_path = sibling(&args.out, "_confusions.csv");
    let failures_path = sibling(&args.out, "_failures.log");

    // Resume: completed cell keys from an existing results file are
    // skipped and fresh rows appended, so an interrupted sweep can be
    // rerun with the same command line.
    let mut skip = HashSet::new();
    let resuming = args.out.exists();
    if resuming {
        let text = std::fs::read_to_string(&args.out)?;
        for row in parse_results_csv(&text)? {
            skip.insert(row.key.id());
        }
    }

    let ds = load_dataset(&args.input)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut man = RunManifest::new("sweep", Some(template_seed));
    man.set("windows", join_list(&grid.windows));
    man.set("overlaps", join_list(&grid.overlaps));
    man.set("kernels", join_list(&grid.kernels));
    man.set("seeds", join_list(&grid.seeds));
    man.set("epochs", template.epochs);
    man.set("lr", template.learning_rate);
    man.set("batch-size", template.batch_size);
    man.set("train-fraction", template.train_fraction);
    man.set("resumed-cells", skip.len());
    if let Some(j) = jobs {
        man.set("jobs", j);
    }
    man.input(&args.input);
    man.output(&args.out);
    man.output(&confusions_path);
    man.write_beside(&args.out)?;

    let outcome = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| run_grid(&ds.recordings, &grid, &template, &skip))?
        }
        None => run_grid(&ds.recordings, &grid, &template, &skip)?,
    };

    append_csv(&args.out, RESULTS_HEADER, &results_csv(&outcome.results))?;
    let conf_text = confusions_csv(&outcome.results);
    let conf_header_owned;
    let conf_header = {
        conf_header_owned = conf_text.lines().next().unwrap_or_default().to_string();
        conf_header_owned.as_str()
    };
    append_csv(&confusions_path, conf_header, &conf_text)?;

    if !outcome.failures.is_empty() {
        let mut log = String::new();
        for f in &outcome.failures {
            log.push_str(&format!("{}: {}\n", f.key.id(), f.error));
        }
        use std::io::Write;
        let mut fh = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&failures_path)?;
        fh.write_all(log.as_bytes())?;
        eprintln!(
            "warning: {} cells failed; details in {}",
            outcome.failures.len(),
            failures_path.display()
        );
    }
    println!(
        "sweep complete: {} new cells, {} skipped, {} failed -> {}",
        outcome.results.len(),
        skip.len(),
        outcome.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn join_list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Create `path` with `header` + body rows, or append just the body
/// rows when the file already exists.
fn append_csv(path: &Path, header: &str, full_text: &str) -> Result<(), CliError> {
    let body = full_text.strip_prefix(header).map_or(full_text, |rest| rest.trim_start_matches('\n'));
    if path.exists() {
        use std::io::Write;
        let mut fh = std::fs::OpenOptions::new().append(true).open(path)?;
        fh.write_all(body.as_bytes())?;
    } else {
        let mut text = String::from(header);
        text.push('\n');
        text.push_str(body);
        std::fs::write(path, text)?;
    }
    Ok(())
}

// --------------------------------------------------------------- report

#[derive(Args)]
struct ReportArgs {
    /// Sweep results CSV
    #[arg(long)]
    csv: PathBuf,
    /// Per-cell confusion CSV (default: <csv stem>_confusions.csv)
    #[arg(long)]
    confusions: Option<PathBuf>,
    /// Directory of per-epoch curve CSVs to chart
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Directory for tables and charts
    #[arg(long)]
    out: PathBuf,
    /// Overlap fraction treated as "high" in the improvement table
    #[arg(long, default_value_t = 0.75)]
    delta_hi: f64,
    /// Overlap fraction treated as the baseline
    #[arg(long, default_value_t = 0.0)]
    delta_lo: f64,
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.csv)?;
    let rows = parse_results_csv(&text)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no result rows", args.csv.display())));
    }
    std::fs::create_dir_all(&args.out)?;

    let mut man = RunManifest::new("report", None);
    man.set("delta-hi", args.delta_hi);
    man.set("delta-lo", args.delta_lo);
    man.input(&args.csv);
    man.output(&args.out);
    man.write_to_dir(&args.out)?;

    // Overlap improvement table, one row per (window, kernel).
    match (
        improvement_delta(&rows, Metric::Accuracy, args.delta_hi, args.delta_lo),
        improvement_delta(&rows, Metric::MacroF1, args.delta_hi, args.delta_lo),
    ) {
        (Ok(acc), Ok(f1)) => {
            let mut out = String::from("window,kernel,accuracy_delta_pp,f1_delta_pp\n");
            for (a, f) in acc.iter().zip(f1.iter()) {
                out.push_str(&format!(
                    "{},{},{:.2},{:.2}\n",
                    a.window, a.kernel, a.delta_pp, f.delta_pp
                ));
            }
            write_text(&args.out.join("deltas.csv"), &out)?;
        }
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("warning: skipping deltas.csv: {e}");
        }
    }

    // Kernel comparison at the high overlap setting.
    let trend_rows: Vec<ResultRow> = rows
        .iter()
        .filter(|r| (r.key.overlap_frac - args.delta_hi).abs() < 1e-9)
        .cloned()
        .collect();
    let trend = if trend_rows.is_empty() {
        eprintln!("warning: skipping kernel_trend.csv: no rows at overlap {}", args.delta_hi);
        None
    } else {
        match kernel_trend(&trend_rows, Metric::MacroF1) {
            Ok(trend) => {
                let mut out = String::from("window,kernel,f1_pct\n");
                for t in &trend {
                    out.push_str(&format!("{},{},{:.2}\n", t.window, t.kernel, t.mean_pct));
                }
                write_text(&args.out.join("kernel_trend.csv"), &out)?;
                Some(trend)
            }
            Err(e) => {
                eprintln!("warning: skipping kernel_trend.csv: {e}");
                None
            }
        }
    };

    // Grouped bars per window length.
    let mut windows: Vec<usize> = rows.iter().map(|r| r.key.window).collect();
    windows.sort_unstable();
    windows.dedup();
    for &w in &windows {
        let subset: Vec<ResultRow> =
            rows.iter().filter(|r| r.key.window == w).cloned().collect();
        let svg = plots::overlap_bars_svg(w, &subset);
        write_text(&args.out.join(format!("overlap_window{w}.svg")), &svg)?;
    }

    if let Some(trend) = &trend {
        let svg = plots::kernel_lines_svg(trend);
        write_text(&args.out.join("kernel_f1.svg"), &svg)?;
    }

    // Averaged confusion heatmaps at the longest window for the small
    // and large kernels, with and without overlap.
    let confusions_path = args
        .confusions
        .clone()
        .unwrap_or_else(|| sibling(&args.csv, "_confusions.csv"));
    if confusions_path.exists() {
        let conf_text = std::fs::read_to_string(&confusions_path)?;
        let matrices = parse_confusions_csv(&conf_text)?;
        let top_window = *windows.last().expect("rows non-empty");
        for kernel in [3usize, 7] {
            for overlap in [args.delta_lo, args.delta_hi] {
                let group: Vec<ConfusionMatrix> = matrices
                    .iter()
                    .filter(|(k, _)| {
                        k.window == top_window
                            && k.kernel == kernel
                            && (k.overlap_frac - overlap).abs() < 1e-9
                    })
                    .map(|(_, m)| m.clone())
                    .collect();
                if group.is_empty() {
                    eprintln!(
                        "warning: no confusion rows for window {top_window}, kernel {kernel}, \
                         overlap {overlap}; heatmap skipped"
                    );
                    continue;
                }
                let avg = average_subjectwise(&group)?;
                let title = format!(
                    "Confusion (%) at window {top_window}, kernel {kernel}x{kernel}, overlap {overlap}"
                );
                let svg = plots::heatmap_svg(&title, &avg);
                let fname = format!(
                    "confusion_w{top_window}_k{kernel}_o{}.svg",
                    (overlap * 100.0).round() as i64
                );
                write_text(&args.out.join(fname), &svg)?;
            }
        }
    } else {
        eprintln!(
            "warning: {} not found; confusion heatmaps skipped",
            confusions_path.display()
        );
    }

    // Per-epoch curve charts for any curve CSVs provided.
    if let Some(curves_dir) = &args.curves {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(curves_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for path in entries {
            match parse_curve_csv(&std::fs::read_to_string(&path)?) {
                Ok(curve) if !curve.is_empty() => {
                    let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    let svg = plots::curve_svg(&format!("Training curves: {stem}"), &curve);
                    write_text(&args.out.join(format!("curve_{stem}.svg")), &svg)?;
                }
                _ => eprintln!("warning: {} is not a curve CSV; skipped", path.display()),
            }
        }
    }

    println!("report written to {}", args.out.display());
    Ok(())
}

const CURVE_HEADER: &str = "epoch,train_loss,train_accuracy,val_loss,val_accuracy";

fn parse_curve_csv(text: &str) -> Result<Vec<EpochStats>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(CliError::Data("missing curve header".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Data(format!("bad curve row: {line}")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Data(format!("bad number '{s}' in curve row")))
        };
        out.push(EpochStats {
            train_loss: num(fields[1])?,
            train_accuracy: num(fields[2])?,
            val_loss: num(fields[3])?,
            val_accuracy: num(fields[4])?,
        });
    }
    Ok(out)
}
