use std::path::PathBuf;
use std::process::ExitCode;

use acmvl::cli::{cmd_eval, cmd_export_latent, cmd_synth, cmd_train};
use acmvl::data::LoadOptions;
use acmvl::{Error, RngSeed};
use clap::{Parser, Subcommand};

/// Autoencoder-based co-training for multi-view data.
///
/// Log verbosity follows the ACMVL_LOG environment variable
/// (error, warn, info, debug, trace; default warn).
#[derive(Parser)]
#[command(name = "acmvl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the dataset named in a TOML config.
    Train { config: PathBuf },
    /// Write per-view latents (h_<v>.csv) and the joint latent (z.csv).
    ExportLatent {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip one header line in every CSV file.
        #[arg(long)]
        header: bool,
        /// Reject label files with unused class ids.
        #[arg(long)]
        strict: bool,
    },
    /// Score raw, autoencoder and joint features with LR and GMM.
    Eval {
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset directory overriding the config's data source.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset directory from a TOML spec.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config } => {
            let m = cmd_train(&config)?;
            for s in &m.stages {
                println!(
                    "epoch {} stage {} view {:>2}: best loss {:.6} at round {}/{}",
                    s.epoch, s.stage, s.view, s.best_loss, s.best_round, s.rounds
                );
            }
        }
        Command::ExportLatent {
            checkpoint,
            data,
            out,
            header,
            strict,
        } => {
            let e = cmd_export_latent(&checkpoint, &data, &out, LoadOptions { header, strict })?;
            println!("wrote {} rows to {}", e.rows, out.display());
        }
        Command::Eval {
            config,
            checkpoint,
            data,
            out,
        } => {
            let r = cmd_eval(
                &config,
                checkpoint.as_deref(),
                data.as_deref(),
                out.as_deref(),
            )?;
            print!("{}", r.table());
        }
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, RngSeed(seed))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ACMVL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
