use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stereocolor::bench::{
    self, correct_single, distort_dataset, evaluate_results_dir, run_benchmark, BenchConfig,
    EvaluationReport, Method, MethodId, MethodKind,
};
use stereocolor::config::Config;
use stereocolor::dataset::{load_dataset, split_dataset, DatasetManifest, SplitRatios};
use stereocolor::distort::{parse_ops, DistortionRanges};
use stereocolor::idt::IdtConfig;
use stereocolor::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stereocolor",
    version,
    about = "Color-mismatch correction for stereo pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a distorted TRIPLET dataset from clean stereo pairs.
    Distort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated operators to draw from: bc, gamma, hsv.
        #[arg(long, default_value = "bc,gamma,hsv")]
        ops: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Correct one left view toward its right view.
    Correct {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "pitie-mk")]
        method: String,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Score methods, or precomputed results, on the TEST split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated method names, or `all`.
        #[arg(long, default_value = "all", conflicts_with = "results")]
        method: String,
        /// Directory of corrected left views laid out like the dataset.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Row name for `--results`.
        #[arg(long, default_value = "external", requires = "results")]
        name: String,
        /// Row type for `--results`: global or local.
        #[arg(long = "type", default_value = "local", requires = "results")]
        kind: String,
        /// Also write per-frame scores here.
        #[arg(long)]
        frames_csv: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Score and time methods, printing a comparison table.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "all")]
        method: String,
        /// Timed runs per method.
        #[arg(long)]
        repeats: Option<usize>,
        /// Skip the timing probe.
        #[arg(long)]
        no_timing: bool,
        /// Also write the markdown table here.
        #[arg(long)]
        markdown: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Assign frames to TRAIN/VAL/TEST and write the listing.
    Split {
        #[arg(long)]
        data: PathBuf,
        /// Train, val and test fractions.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Split listing written by `split`; otherwise the split is computed.
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Name written into report rows; defaults to the directory name.
    #[arg(long)]
    dataset_name: Option<String>,
    /// Write the summary CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct Tuning {
    #[arg(long)]
    idt_iterations: Option<usize>,
    #[arg(long)]
    idt_bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_regrain: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Tuning {
    fn config(&self) -> Result<Config> {
        let mut c = load_config(self.config.as_deref())?;
        if let Some(n) = self.idt_iterations {
            c.set("idt.iterations", n);
        }
        if let Some(n) = self.idt_bins {
            c.set("idt.bins", n);
        }
        if let Some(s) = self.seed {
            c.set("idt.seed", s);
            c.set("split.seed", s);
        }
        if self.no_regrain {
            c.set("idt.regrain", false);
        }
        Ok(c)
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::new()), Config::load)
}

fn methods(list: &str, config: &Config) -> Result<Vec<Method>> {
    let idt = IdtConfig::from_config(config)?;
    Ok(bench::parse_methods(list)?
        .into_iter()
        .map(|id| Method::with_idt(id, idt))
        .collect())
}

fn manifest_with_split(data: &DataArgs, config: &Config) -> Result<DatasetManifest> {
    let mut manifest = load_dataset(&data.data)?;
    match &data.split_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            manifest.apply_split_text(&text)?;
            Ok(manifest)
        }
        None => split_dataset(
            &manifest,
            SplitRatios::from_config(config)?,
            config.get_or("split.seed", 0u64)?,
        ),
    }
}

fn dataset_name(data: &DataArgs) -> String {
    data.dataset_name.clone().unwrap_or_else(|| {
        data.data
            .file_name()
            .map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned())
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(report: &EvaluationReport, data: &DataArgs) -> Result<()> {
    if let Some(path) = &data.csv {
        write_text(path, &report.to_csv())?;
    }
    for f in &report.failures {
        eprintln!("skipped {} on {}: {}", f.method, f.frame, f.message);
    }
    print!("{}", report.to_markdown());
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Distort {
            input,
            out,
            ops,
            seed,
            config,
        } => {
            let config = load_config(config.as_deref())?;
            let ranges = DistortionRanges::from_config(&config)?;
            let seed = match seed {
                Some(s) => s,
                None => config.get_or("distort.seed", 0u64)?,
            };
            let n = distort_dataset(&input, &out, &parse_ops(&ops)?, &ranges, seed)?;
            println!("distorted {n} frame(s) into {}", out.display());
        }
        Command::Correct {
            left,
            right,
            out,
            method,
            tuning,
        } => {
            let config = tuning.config()?;
            let id: MethodId = method.parse()?;
            let method = Method::with_idt(id, IdtConfig::from_config(&config)?);
            correct_single(&left, &right, &method, &out)?;
        }
        Command::Evaluate {
            data,
            method,
            results,
            name,
            kind,
            frames_csv,
            tuning,
        } => {
            let config = tuning.config()?;
            let manifest = manifest_with_split(&data, &config)?;
            let dataset = dataset_name(&data);
            let report = match &results {
                Some(dir) => {
                    evaluate_results_dir(&manifest, dir, &name, kind.parse::<MethodKind>()?, &dataset)?
                }
                None => {
                    let bench_config = BenchConfig {
                        dataset_name: dataset,
                        timing: false,
                        ..BenchConfig::from_config(&config)?
                    };
                    run_benchmark(&manifest, &methods(&method, &config)?, &bench_config)?
                }
            };
            for f in &report.frames {
                println!(
                    "{}\t{}\tpsnr {:.4}\tssim {:.6}",
                    f.method, f.frame, f.metrics.psnr_db, f.metrics.ssim
                );
            }
            if let Some(path) = &frames_csv {
                write_text(path, &report.frames_to_csv())?;
            }
            emit(&report, &data)?;
        }
        Command::Bench {
            data,
            method,
            repeats,
            no_timing,
            markdown,
            tuning,
        } => {
            let mut config = tuning.config()?;
            if let Some(r) = repeats {
                config.set("bench.repeats", r);
            }
            if no_timing {
                config.set("bench.timing", false);
            }
            let manifest = manifest_with_split(&data, &config)?;
            let bench_config = BenchConfig {
                dataset_name: dataset_name(&data),
                ..BenchConfig::from_config(&config)?
            };
            let report = run_benchmark(&manifest, &methods(&method, &config)?, &bench_config)?;
            if let Some(path) = &markdown {
                write_text(path, &report.to_markdown())?;
            }
            emit(&report, &data)?;
        }
        Command::Split {
            data,
            ratios,
            seed,
            out,
            config,
        } => {
            let config = load_config(config.as_deref())?;
            let ratios = match ratios.as_deref() {
                None => SplitRatios::from_config(&config)?,
                Some([train, val, test]) => SplitRatios::new(*train, *val, *test)?,
                Some(_) => return Err(Error::InvalidParameter("--ratios takes train,val,test".into())),
            };
            let seed = match seed {
                Some(s) => s,
                None => config.get_or("split.seed", 0u64)?,
            };
            let manifest = split_dataset(&load_dataset(&data)?, ratios, seed)?;
            match out {
                Some(path) => write_text(&path, &manifest.split_to_text())?,
                None => print!("{}", manifest.split_to_text()),
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) => 1,
        e if e.is_method_error() => 3,
        _ => 2,
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("STEREOCOLOR_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("STEREOCOLOR_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
