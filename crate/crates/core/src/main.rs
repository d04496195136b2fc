use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eigenspec::io::SignalFormat;
use eigenspec::pipeline::{self, RunConfig};
use eigenspec::svm::Coding;
use eigenspec::Result;

#[derive(Parser)]
#[command(name = "eigenspec", version, about = "Bearing fault diagnosis with eigen-spectrograms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// rSVD target rank.
    #[arg(long, global = true)]
    rank: Option<u32>,
    /// Retained eigen-spectrograms.
    #[arg(long, global = true)]
    components: Option<u32>,
    #[arg(long, global = true, value_enum)]
    coding: Option<CodingArg>,
    /// z-score features before the SVM.
    #[arg(long, global = true)]
    standardize: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CodingArg {
    OneVsOne,
    OneVsAll,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one noisy signal file per fault class.
    Simulate {
        #[arg(long, value_enum, default_value = "csv")]
        format: SignalFormat,
    },
    /// Validate external signal files and convert them to CSV.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Force a format instead of guessing from the extension.
        #[arg(long, value_enum)]
        format: Option<SignalFormat>,
    },
    /// Turn a directory of signal files into train/test image datasets.
    BuildDataset { signal_dir: PathBuf },
    /// Fit the eigen-spectrogram basis and the SVM classifier.
    Train {
        /// Training dataset file or the directory holding train.espc.
        dataset: PathBuf,
        /// Also score this test dataset.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Score a dataset with a trained model.
    Evaluate { model_dir: PathBuf, dataset: PathBuf },
    /// Write the eigen-spectrograms as PGM images.
    ExportModes { basis: PathBuf },
    /// Per-class mean interpretation coefficients.
    Explain { model_dir: PathBuf, dataset: PathBuf },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(snr) = c.snr_db {
        cfg.snr_db = snr;
    }
    if let Some(rank) = c.rank {
        cfg.rsvd.target_rank = rank as usize;
    }
    if let Some(k) = c.components {
        cfg.rsvd.retained_components = k as usize;
    }
    if let Some(coding) = c.coding {
        cfg.svm.coding = match coding {
            CodingArg::OneVsOne => Coding::OneVsOne,
            CodingArg::OneVsAll => Coding::OneVsAll,
        };
    }
    if c.standardize {
        cfg.svm.standardize = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn percent(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.common.out;
    match cli.command {
        Command::Simulate { format } => {
            let cfg = load_config(&cli.common)?;
            for path in pipeline::cmd_simulate(&cfg, out, format)? {
                println!("{}", path.display());
            }
        }
        Command::Ingest { paths, format } => {
            let report = pipeline::cmd_ingest(&paths, format, out)?;
            for f in &report.accepted {
                println!("accepted {} -> {} ({})", f.source.display(), f.output.display(), f.label);
            }
            for f in &report.rejected {
                println!("rejected {}: {}", f.source.display(), f.reason);
            }
        }
        Command::BuildDataset { signal_dir } => {
            let cfg = load_config(&cli.common)?;
            let manifest = pipeline::cmd_build_dataset(&signal_dir, &cfg, out)?;
            println!("class,train,test");
            for (class, n) in &manifest.train_counts {
                println!("{class},{n},{}", manifest.test_counts.get(class).unwrap_or(&0));
            }
        }
        Command::Train { dataset, test } => {
            let cfg = load_config(&cli.common)?;
            let report = pipeline::cmd_train(&dataset, test.as_deref(), &cfg, out)?;
            println!("training accuracy {}", percent(report.train.accuracy));
            println!("cv mean accuracy {}", percent(report.cv_mean_accuracy));
            if let Some(t) = &report.test {
                println!("test accuracy {}", percent(t.accuracy));
            }
        }
        Command::Evaluate { model_dir, dataset } => {
            let report = pipeline::cmd_evaluate(&model_dir, &dataset, out)?;
            println!("accuracy {} ({}/{})", percent(report.accuracy), report.correct, report.samples);
        }
        Command::ExportModes { basis } => {
            for path in pipeline::cmd_export_modes(&basis, out)? {
                println!("{}", path.display());
            }
        }
        Command::Explain { model_dir, dataset } => {
            let cfg = load_config(&cli.common)?;
            print!("{}", pipeline::cmd_explain(&model_dir, &dataset, &cfg, out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
