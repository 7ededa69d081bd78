use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lae_cli::{cmd_compare, cmd_eval, cmd_report, cmd_run, cmd_synth, load_motion_specs, ConfigFile, Experiment};
use lae_core::Mode;

#[derive(Parser)]
#[command(name = "lae", version, about = "Latency-aware evaluation of single-object trackers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sequence under every mode, then evaluate.
    Run(Box<RunArgs>),
    /// Recompute the report of a run directory from its logs.
    Eval {
        run_dir: PathBuf,
        /// Report directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cell percentage change from report A to report B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a report as a table.
    Report {
        /// report.csv or the directory holding it.
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate annotation files from motion specs.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "lae-out")]
    out: PathBuf,
    /// Directory with dataset.json.
    #[arg(long, conflicts_with = "synth")]
    dataset: Option<PathBuf>,
    /// Motion spec file (one spec or an array).
    #[arg(long)]
    synth: Option<PathBuf>,
    /// synthetic | template | external:"COMMAND ARGS"
    #[arg(long)]
    tracker: Option<String>,
    /// Comma-separated: offline,lae_bare,lae_pvt,lae_pre_only,lae_post_only
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
    /// constant:SECONDS | trace:PATH | random:MEAN,STD | wallclock
    #[arg(long)]
    latency: Option<String>,
    /// Frame-0 processing time in seconds.
    #[arg(long)]
    init_latency: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel cells.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    search_radius: Option<f64>,
    #[arg(long)]
    search_scale: Option<f64>,
    /// Seconds to wait for an external tracker reply.
    #[arg(long)]
    timeout_secs: Option<f64>,
}

impl RunArgs {
    fn layers(&self) -> anyhow::Result<ConfigFile> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut flags = ConfigFile {
            dataset: self.dataset.clone(),
            synthetic: self.synth.as_deref().map(load_motion_specs).transpose()?,
            tracker: self.tracker.clone(),
            modes: self.modes.clone(),
            latency: self.latency.clone(),
            init_latency: self.init_latency,
            seed: self.seed,
            jobs: self.jobs,
            noise_sigma: self.noise_sigma,
            search_radius: self.search_radius,
            search_scale: self.search_scale,
            timeout_secs: self.timeout_secs,
            attributes: None,
        };
        flags.rebase(Path::new("."));
        // a source given on the command line replaces the file's source
        let mut file = file;
        if flags.dataset.is_some() || flags.synthetic.is_some() {
            file.dataset = None;
            file.synthetic = None;
        }
        Ok(file.overlay(flags))
    }
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => (|| {
            let exp = Experiment::resolve(args.layers()?)?;
            let summary = cmd_run(&exp, &args.out)?;
            for f in &summary.failures {
                eprintln!("failed: {} / {}: {}", f.sequence, f.mode.as_str(), f.message);
            }
            eprintln!(
                "{} of {} cells succeeded; results in {}",
                summary.cells - summary.failures.len(),
                summary.cells,
                args.out.display()
            );
            Ok(summary.failures.is_empty())
        })(),
        Command::Eval { run_dir, out } => cmd_eval(&run_dir, out.as_deref().unwrap_or(&run_dir)).map(|files| {
            eprintln!("wrote {}", files.report.display());
            true
        }),
        Command::Compare { a, b, out } => cmd_compare(&a, &b)
            .and_then(|csv| emit(&csv, out.as_deref()))
            .map(|_| true),
        Command::Report { path, out } => cmd_report(&path).and_then(|t| emit(&t, out.as_deref())).map(|_| true),
        Command::Synth { spec, out } => load_motion_specs(&spec)
            .and_then(|specs| cmd_synth(&specs, &out))
            .map(|m| {
                eprintln!("wrote {} sequences to {}", m.len(), out.display());
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("lae: {e:#}");
            ExitCode::FAILURE
        }
    }
}
