use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chanpred::config::{Approach, ExperimentConfig, Preset};
use chanpred::correlation::correlation_report;
use chanpred::pilot::{estimate_trace, EstimationNoise, PilotScheme};
use chanpred::nn::MlpModel;
use chanpred::pipeline::{
    estimate_cell, model_count, run_approach_with, snr_sweep, synthesize_channel, synthesize_truth, NmseReport,
};
use chanpred::rng::stream_key;
use chanpred::trace::{export_trace, import_trace};
use chanpred::{Error, Result};

#[derive(Parser)]
#[command(name = "chanpred", version, about = "Massive MIMO channel prediction experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in settings to start from.
    #[arg(long, value_enum, default_value_t = PresetArg::Paper, global = true, conflicts_with = "config")]
    preset: PresetArg,
    /// TOML config file; missing keys take the `paper` preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds to use, comma separated. Overrides the config.
    #[arg(long, value_delimiter = ',', global = true)]
    seed: Vec<u64>,
    /// SNR values in dB, comma separated. Overrides the config.
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true, global = true)]
    snr_db: Vec<f64>,
    /// Pilot length.
    #[arg(long, global = true)]
    tau: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the true channel and write truth.trace.
    Generate,
    /// LS-estimate a true-channel trace and write estimate.trace.
    Estimate {
        /// Trace produced by `generate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Auto/cross-correlation study in both domains, written to correlation.csv.
    Correlate {
        /// True-channel trace; synthesized from the first seed when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train and evaluate one approach at one SNR, written to nmse.csv and loss.csv.
    #[command(alias = "train")]
    Run {
        #[arg(long, value_parser = parse_approach)]
        approach: Approach,
        /// Write the trained predictors to this directory.
        #[arg(long)]
        save: Option<PathBuf>,
        /// Skip training and evaluate predictors saved by an earlier `--save`.
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Every configured approach at every SNR, written to nmse.csv and loss.csv.
    Sweep {
        /// Approaches, comma separated. Overrides the config.
        #[arg(long, value_delimiter = ',', value_parser = parse_approach)]
        approach: Vec<Approach>,
    },
}

fn parse_approach(s: &str) -> std::result::Result<Approach, String> {
    Approach::parse(s).ok_or_else(|| format!("unknown approach `{s}` (sl, sl-short, jl, jldt, persistence)"))
}

fn effective_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => match c.preset {
            PresetArg::Paper => Preset::Paper.config(),
            PresetArg::Desk => Preset::Desk.config(),
        },
    };
    if !c.seed.is_empty() {
        cfg.seeds = c.seed.clone();
    }
    if !c.snr_db.is_empty() {
        cfg.snr_db = c.snr_db.clone();
    }
    if let Some(tau) = c.tau {
        cfg.pilot.tau = tau;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Header lines embedded in every output file.
fn provenance_header(cfg: &ExperimentConfig, command: &str) -> Vec<String> {
    vec![
        format!("chanpred {command}"),
        format!("config_hash {}", cfg.hash()),
        format!("seeds {:?}", cfg.seeds),
        cfg.to_toml(),
    ]
}

fn with_header(header: &[String], body: &str) -> String {
    let mut s = String::new();
    for h in header {
        for line in h.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str(body);
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli, cfg: ExperimentConfig) -> Result<()> {
    let out = &cli.common.out;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    println!("config_hash {}", cfg.hash());
    println!("seeds {:?}", cfg.seeds);
    print!("{}", cfg.to_toml());

    let seed = cfg.seeds[0];
    match cli.command {
        Command::Generate => {
            let truth = synthesize_truth(&cfg, seed)?;
            let header = provenance_header(&cfg, &format!("generate seed {seed}"));
            export_trace(&truth, out.join("truth.trace"), &header)?;
            println!("wrote {}", out.join("truth.trace").display());
        }
        Command::Estimate { input } => {
            let truth = import_trace(&input)?;
            let snr = cfg.snr_db[0];
            let scheme = PilotScheme::from_config(&cfg.pilot, snr)?;
            let noise = EstimationNoise::Seeded(stream_key(seed, "pilot-noise", &[snr.to_bits()]));
            let est = estimate_trace(&truth, &scheme, noise)?;
            let header = provenance_header(&cfg, &format!("estimate seed {seed} snr_db {snr}"));
            export_trace(&est, out.join("estimate.trace"), &header)?;
            println!("wrote {}", out.join("estimate.trace").display());
        }
        Command::Correlate { input } => {
            let c = &cfg.correlation;
            let truth = match input {
                Some(p) => import_trace(p)?,
                None => synthesize_channel(&cfg, seed, c.n_avg + c.max_shift)?,
            };
            let report = correlation_report(&truth, c.max_shift, c.n_avg, seed)?;
            let header = provenance_header(&cfg, "correlate");
            write(&out.join("correlation.csv"), &with_header(&header, &report.to_csv()))?;
        }
        Command::Run { approach, save, load } => {
            let snr = cfg.snr_db[0];
            let truth = synthesize_truth(&cfg, seed)?;
            let cell = estimate_cell(&cfg, truth, seed, snr)?;
            let pretrained = match &load {
                Some(dir) => Some(
                    (0..model_count(&cfg, approach))
                        .map(|k| MlpModel::load(checkpoint_path(dir, approach, k)))
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            let (result, models) = run_approach_with(&cfg, &cell, approach, pretrained.as_deref())?;
            if let Some(dir) = &save {
                fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                for (k, m) in models.iter().enumerate() {
                    m.save(checkpoint_path(dir, approach, k))?;
                }
                println!("saved {} predictor(s) to {}", models.len(), dir.display());
            }
            println!("{} snr_db {snr} seed {seed}: nmse {:.3} dB", approach.as_str(), 10.0 * result.nmse.log10());
            let report = NmseReport::from_cells(vec![result]);
            emit_report(&cfg, &report, out, &format!("run {}", approach.as_str()))?;
        }
        Command::Sweep { approach } => {
            let approaches = if approach.is_empty() { cfg.approaches.clone() } else { approach };
            let report = snr_sweep(&cfg, &cfg.snr_db, &approaches, &cfg.seeds)?;
            for r in &report.rows {
                println!("{:<12} {:>6} dB: nmse {:.3} dB", r.approach.as_str(), r.snr_db, r.nmse_db);
            }
            emit_report(&cfg, &report, out, "sweep")?;
        }
    }
    Ok(())
}

/// One file per predictor: `<approach>-<index>.mlp`, index = subcarrier for SL.
fn checkpoint_path(dir: &Path, approach: Approach, k: usize) -> PathBuf {
    dir.join(format!("{}-{k}.mlp", approach.as_str()))
}

fn emit_report(cfg: &ExperimentConfig, report: &NmseReport, out: &Path, command: &str) -> Result<()> {
    let header = provenance_header(cfg, command);
    write(&out.join("nmse.csv"), &with_header(&header, &report.to_csv()))?;
    write(&out.join("loss.csv"), &with_header(&header, &report.loss_csv()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Any failure while assembling the config, including an unreadable file, is a config error.
    let cfg = match effective_config(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
