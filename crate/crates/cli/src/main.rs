//! `oofdm`: runs the residual clipping noise experiments and writes CSV
//! results plus a manifest that `oofdm replay` can re-run.

mod commands;
mod output;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oofdm_rcn::experiment::SnrKind;
use oofdm_rcn::modems::Scheme;

use crate::output::{OutputDir, RunManifest, MANIFEST_FILE};
use crate::settings::{defaults, parse_snr_grid, ChannelSpec, PartialSettings, Settings};

#[derive(Parser)]
#[command(name = "oofdm", version, about = "Residual clipping noise experiments for layered optical OFDM")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML or JSON settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo frames per SNR point.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Rims of the constellation included in the noise estimate (1 to 3).
    #[arg(long, global = true)]
    rims: Option<u8>,
    /// `flat`, `low-pass:<dB>` or a CSV profile.
    #[arg(long, global = true)]
    channel: Option<ChannelSpec>,
    /// Output directory.
    #[arg(long, global = true, env = "OOFDM_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Default)]
struct SchemeArgs {
    /// Comma-separated list of aco, dco, pam, ado, haco, laco.
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<Scheme>>,
    #[arg(long)]
    layers: Option<usize>,
    /// QAM order (PAM uses its square root).
    #[arg(long)]
    order: Option<usize>,
    /// Frame length.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Default)]
struct SnrArgs {
    /// `start:stop:step` in dB or a comma-separated list.
    #[arg(long)]
    snr: Option<String>,
    /// Whether `--snr` is electrical or effective.
    #[arg(long, value_parser = parse_snr_kind)]
    snr_kind: Option<SnrKind>,
}

fn parse_snr_kind(s: &str) -> Result<SnrKind> {
    match s.to_ascii_lowercase().as_str() {
        "electrical" | "elec" => Ok(SnrKind::Electrical),
        "effective" | "eff" => Ok(SnrKind::Effective),
        _ => bail!("unknown SNR kind '{s}', expected electrical or effective"),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form electrical and optical power for a given effective power.
    PowerRelations {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        peff: Option<f64>,
        /// Also measure the powers over this many frames.
        #[arg(long)]
        validate: Option<usize>,
    },
    /// Worst-case versus measured residual clipping noise power.
    RcnPower {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        snr: SnrArgs,
    },
    /// Simulated symbol error rate against both theoretical models.
    Ser {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        snr: SnrArgs,
    },
    /// Distribution and cross-layer correlation of the clipping noise on one bin.
    RcnStats {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        snr: SnrArgs,
        /// Probe subcarrier.
        #[arg(long)]
        bin: Option<usize>,
    },
    /// Iterative bit and power loading for LACO.
    Allocate {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        snr: SnrArgs,
        /// Target symbol error rate.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        max_bits: Option<u32>,
        /// Skip the Monte Carlo check of each loading.
        #[arg(long)]
        no_simulate: bool,
    },
    /// Re-runs a previous run from its manifest.
    Replay {
        /// `manifest.json` or the directory holding it.
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PowerRelations { .. } => "power-relations",
            Command::RcnPower { .. } => "rcn-power",
            Command::Ser { .. } => "ser",
            Command::RcnStats { .. } => "rcn-stats",
            Command::Allocate { .. } => "allocate",
            Command::Replay { .. } => "replay",
        }
    }

    /// Flag values as a settings layer.
    fn flags(&self, g: &GlobalArgs) -> Result<PartialSettings> {
        let mut p = PartialSettings {
            seed: g.seed,
            runs: g.runs,
            rims: g.rims,
            channel: g.channel.clone(),
            out: g.out.clone(),
            ..Default::default()
        };
        let (scheme, snr) = match self {
            Command::PowerRelations { scheme, peff, validate } => {
                p.p_eff = *peff;
                p.validate_frames = *validate;
                (Some(scheme), None)
            }
            Command::RcnPower { scheme, snr } | Command::Ser { scheme, snr } => (Some(scheme), Some(snr)),
            Command::RcnStats { scheme, snr, bin } => {
                p.bin = *bin;
                (Some(scheme), Some(snr))
            }
            Command::Allocate { scheme, snr, target, max_bits, no_simulate } => {
                p.target_ser = *target;
                p.max_bits = *max_bits;
                if *no_simulate {
                    p.closed_loop = Some(false);
                }
                (Some(scheme), Some(snr))
            }
            Command::Replay { .. } => (None, None),
        };
        if let Some(s) = scheme {
            p.schemes = s.scheme.clone();
            p.layers = s.layers;
            p.order = s.order;
            p.n = s.n;
        }
        if let Some(s) = snr {
            p.snr_db = s.snr.as_deref().map(parse_snr_grid).transpose()?;
            p.snr_kind = s.snr_kind;
        }
        Ok(p)
    }
}

fn run_command(name: &str, settings: &Settings, out_dir: &Path) -> Result<PathBuf> {
    let mut out = OutputDir::create(out_dir)?;
    match name {
        "power-relations" => commands::power_relations_cmd(settings, &mut out)?,
        "rcn-power" => commands::rcn_power_cmd(settings, &mut out)?,
        "ser" => commands::ser_cmd(settings, &mut out)?,
        "rcn-stats" => commands::rcn_stats_cmd(settings, &mut out)?,
        "allocate" => commands::allocate_cmd(settings, &mut out)?,
        other => bail!("cannot run '{other}'"),
    }
    out.finish(name, settings)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let file = match &cli.global.config {
        Some(path) => PartialSettings::load(path)?,
        None => PartialSettings::default(),
    };
    let flags = cli.command.flags(&cli.global)?;
    let layered = file.merged(flags);

    let (name, settings) = match &cli.command {
        Command::Replay { manifest } => {
            let path = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest.clone() };
            let m = RunManifest::load(&path)?;
            if m.tool_version != env!("CARGO_PKG_VERSION") {
                eprintln!("warning: manifest written by version {}", m.tool_version);
            }
            m.settings.check()?;
            (m.subcommand, m.settings)
        }
        cmd => {
            let mut settings = defaults(cmd.name());
            layered.apply(&mut settings)?;
            (cmd.name().to_string(), settings)
        }
    };
    let out_dir = layered.out.unwrap_or_else(|| PathBuf::from("results"));
    let manifest = run_command(&name, &settings, &out_dir)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
