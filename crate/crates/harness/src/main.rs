use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use stam::snapshot::{self, Snapshot};
use stam_harness::metrics::{read_baseline_csv, read_metrics_csv, read_trace_csv};
use stam_harness::report::{plot_accuracy, plot_ltm, write_summary_csv};
use stam_harness::{
    emit_report, emit_sweep_report, load_config, run_ablation, run_experiment_with, run_sweep,
    summarize, AblationKind, Dataset, ExperimentConfig, HarnessError, Result, SweepAxis,
};

#[derive(Parser)]
#[command(
    name = "stam",
    version,
    about = "Unsupervised progressive learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Run only the first N phases.
    #[arg(long)]
    phases: Option<usize>,
    /// Override the examples per phase.
    #[arg(long)]
    np: Option<usize>,
    /// Override the labeled examples per class.
    #[arg(long)]
    labels: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        load_config(
            &self.config,
            self.seed,
            self.out.as_deref(),
            self.phases,
            self.np,
            self.labels,
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment.
    Run(Common),
    /// Run with one ablation: no-ltm, dynamic-ltm or drop:L[,L...].
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        which: String,
    },
    /// Run one experiment per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// alpha, gamma, theta, beta, delta, labels_per_class or stream_length;
        /// defaults to the config's [sweep] table.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Rebuild summary.csv (and plots) from an existing metrics.csv.
    Report {
        /// Directory holding metrics.csv.
        dir: PathBuf,
        /// Where to write; defaults to DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plots: bool,
    },
    /// Describe a snapshot file.
    InspectSnapshot { path: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let data = Dataset::load(&cfg)?;
            let result = run_experiment_with(&cfg, &data)?;
            emit_report(&result, &cfg.out_dir, cfg.eval.trace_every, c.plots)?;
            info!("wrote {}", cfg.out_dir.display());
        }
        Command::Ablate { common, which } => {
            let cfg = common.load()?;
            let kind = AblationKind::parse(&which)?;
            let data = Dataset::load(&cfg)?;
            let result = run_ablation(&cfg, &kind, &data)?;
            emit_report(&result, &cfg.out_dir, cfg.eval.trace_every, common.plots)?;
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let cfg = common.load()?;
            let from_cfg = cfg.sweep.clone();
            let axis = axis
                .or_else(|| from_cfg.as_ref().map(|s| s.axis.clone()))
                .ok_or_else(|| HarnessError::Config("no sweep axis given".into()))?;
            let values = values
                .or_else(|| from_cfg.map(|s| s.values))
                .unwrap_or_default();
            let axis = SweepAxis::parse(&axis)?;
            let data = Dataset::load(&cfg)?;
            let blocks = run_sweep(&cfg, axis, &values, &data)?;
            if !blocks.is_empty() {
                emit_sweep_report(&blocks, &cfg.out_dir, cfg.eval.trace_every, common.plots)?;
            }
        }
        Command::Report { dir, out, plots } => report(&dir, out.as_deref().unwrap_or(&dir), plots)?,
        Command::InspectSnapshot { path } => inspect(&path)?,
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn report(dir: &Path, out: &Path, plots: bool) -> Result<()> {
    let metrics = read_metrics_csv(open(&dir.join("metrics.csv"))?)?;
    if metrics.is_empty() {
        return Err(HarnessError::Evaluation("metrics.csv has no rows".into()));
    }
    std::fs::create_dir_all(out)
        .map_err(|e| HarnessError::Output(format!("{}: {e}", out.display())))?;
    let summary = summarize(&metrics);
    write_summary_csv(&out.join("summary.csv"), &summary)?;
    if plots {
        let baseline_path = dir.join("baseline_metrics.csv");
        let baseline = if baseline_path.is_file() {
            read_baseline_csv(open(&baseline_path)?)?
        } else {
            Vec::new()
        };
        plot_accuracy(&out.join("accuracy.svg"), &summary, &baseline)?;
        let trace_path = dir.join("ltm_trace.csv");
        if trace_path.is_file() {
            plot_ltm(&out.join("ltm.svg"), &read_trace_csv(open(&trace_path)?)?)?;
        }
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let snap = snapshot::load(path).map_err(|e| HarnessError::from_core(path.display(), e))?;
    match snap {
        Snapshot::Hierarchy(h) => {
            println!(
                "hierarchy snapshot: {} layers, {} images seen",
                h.len(),
                h.images_seen()
            );
            println!("ablation: {:?}", h.ablation());
            for (l, layer) in h.layers().iter().enumerate() {
                let c = layer.config();
                println!(
                    "layer {}{}: rho {} delta {} alpha {} theta {} beta {} | STM {} LTM {} | mean distance {:.4} | patches {}",
                    l + 1,
                    if h.is_active(l) { "" } else { " (dropped)" },
                    c.rho,
                    c.stm_capacity,
                    c.alpha,
                    c.theta,
                    c.beta,
                    layer.stm().len(),
                    layer.ltm().len(),
                    layer.dbar(),
                    layer.stats().patches,
                );
            }
            println!("memory footprint: {} pixels", h.memory_footprint());
        }
        Snapshot::Pca(m) => {
            println!(
                "PCA snapshot: {} samples, {} features, {} components explaining {:.4} of the variance",
                m.samples,
                m.n_features(),
                m.n_components(),
                m.explained().iter().sum::<f64>()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
