//! Command-line driver: emit frames, pass them through a channel, run
//! receivers on files, sweep the Monte-Carlo grid and summarize results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trofdm::channel::{format_taps, load_taps, ChannelTapList};
use trofdm::harness::{buffer_checksum, report, sweep_to_csv, transmit, ChannelSpec, ExperimentSpec};
use trofdm::receiver::{
    band_limit, bit_errors, compensated_front_end, decide, demodulate, esnr_db, front_end, genie_estimates, Mode,
    ReceiverConfig,
};
use trofdm::rx::zf_equalize;
use trofdm::signal::io::{load, save, save_trace};
use trofdm::sparse::save_cir_csv;
use trofdm::tx::{build_frame, max_payload_bits, random_bits, FrameManifest, FrameReference, OfdmConfig, PilotLayout};

const FRAME_FILE: &str = "frame.bin";
const MANIFEST_FILE: &str = "manifest.toml";
const RECEIVED_FILE: &str = "received.bin";
const CLEAN_FILE: &str = "clean.bin";
const TAPS_FILE: &str = "channel.taps";

#[derive(Parser)]
#[command(name = "trofdm", version, about = "Underwater acoustic OFDM link simulator")]
struct Cli {
    /// Experiment file (TOML). Defaults to the built-in reference experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one transmitted frame and its manifest into a directory.
    Tx {
        #[arg(long)]
        out: PathBuf,
        /// Payload seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Pilot spacing; defaults to the first one in the experiment.
        #[arg(long)]
        pilot_spacing: Option<usize>,
    },
    /// Pass a frame directory through the channel and add noise.
    Channel {
        /// Directory written by `tx`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// In-band SNR in dB relative to the received OFDM power; `inf` for none.
        #[arg(long, default_value = "inf")]
        snr: f64,
        /// Noise seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tap file overriding the experiment channel.
        #[arg(long)]
        taps: Option<PathBuf>,
    },
    /// Run receiver modes on a directory written by `channel`.
    Rx {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated modes, e.g. `NOTR,VTR_BPDN`.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        /// Directory for CIR estimates and equalized constellations.
        #[arg(long)]
        dump_diagnostics: Option<PathBuf>,
    },
    /// Run the full experiment grid into a resumable CSV.
    Sweep {
        #[arg(long, required_unless_present = "print_config")]
        out: Option<PathBuf>,
        /// Overrides the experiment's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        /// Print the effective experiment as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Print a summary table of a sweep CSV.
    Report { csv: PathBuf },
}

/// Reference channel, pilot spacing 5, four SNR points, 200 trials each.
fn default_experiment() -> ExperimentSpec {
    ExperimentSpec {
        base_seed: 1,
        trials_per_point: 200,
        snr_grid: vec![5.0, 10.0, 15.0, 20.0],
        pilot_spacings: vec![5],
        modes: Mode::ALL.to_vec(),
        payload_bits: None,
        allow_short_extensions: false,
        ofdm: OfdmConfig {
            blocks_per_frame: 3,
            ..OfdmConfig::default()
        },
        channel: ChannelSpec::Reference,
    }
}

fn load_experiment(path: Option<&Path>) -> Result<ExperimentSpec> {
    match path {
        Some(p) => ExperimentSpec::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(default_experiment()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn read_manifest(dir: &Path) -> Result<FrameManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_manifest(dir: &Path, manifest: &FrameManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, toml::to_string(manifest)?).with_context(|| format!("writing {}", path.display()))
}

/// Rebuilds the transmitted frame a manifest describes.
fn regenerate(manifest: &FrameManifest) -> Result<(PilotLayout, FrameReference)> {
    let cfg = &manifest.config;
    let pilots = PilotLayout::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.payload_seed);
    let payload = random_bits(manifest.payload_bits, &mut rng);
    let (_, layout, reference) = build_frame(&payload, cfg, &pilots)?;
    if layout != manifest.layout || trofdm::tx::config_hash(cfg) != manifest.config_hash {
        bail!("manifest does not match the frame it describes");
    }
    Ok((pilots, reference))
}

fn cmd_tx(spec: &ExperimentSpec, out: &Path, seed: u64, spacing: Option<usize>) -> Result<()> {
    let spacing = spacing
        .or(spec.pilot_spacings.first().copied())
        .context("no pilot spacing")?;
    let cfg = spec.ofdm_for(spacing);
    cfg.validate()?;
    let pilots = PilotLayout::new(&cfg);
    let bits = spec.payload_bits.unwrap_or_else(|| max_payload_bits(&cfg, &pilots));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload = random_bits(bits, &mut rng);
    let (frame, layout, _) = build_frame(&payload, &cfg, &pilots)?;
    create_dir(out)?;
    save(&frame, &out.join(FRAME_FILE))?;
    let manifest = FrameManifest {
        config_hash: trofdm::tx::config_hash(&cfg),
        payload_seed: seed,
        payload_bits: bits,
        config: cfg,
        layout,
    };
    write_manifest(out, &manifest)?;
    println!(
        "wrote {} samples ({:.3} s, {bits} payload bits) to {}",
        frame.len(),
        frame.duration(),
        out.display()
    );
    Ok(())
}

fn cmd_channel(
    spec: &ExperimentSpec,
    input: &Path,
    out: &Path,
    snr: f64,
    seed: u64,
    taps: Option<&Path>,
) -> Result<()> {
    let manifest = read_manifest(input)?;
    let frame = load(&input.join(FRAME_FILE))?;
    let channel = match taps {
        Some(p) => load_taps(p)?,
        None => spec.channel.resolve()?,
    };
    let (clean, received) = transmit(&frame, &manifest.layout, &manifest.config, &channel, snr, seed)?;
    create_dir(out)?;
    save(&received, &out.join(RECEIVED_FILE))?;
    save(&clean, &out.join(CLEAN_FILE))?;
    fs::write(out.join(TAPS_FILE), format_taps(&channel))?;
    write_manifest(out, &manifest)?;
    println!(
        "wrote {} received samples at {snr} dB, checksum {}",
        received.len(),
        buffer_checksum(&received)
    );
    Ok(())
}

fn cmd_rx(input: &Path, modes: &[Mode], dump: Option<&Path>) -> Result<()> {
    let manifest = read_manifest(input)?;
    let cfg = &manifest.config;
    let layout = &manifest.layout;
    let (pilots, reference) = regenerate(&manifest)?;
    let received = load(&input.join(RECEIVED_FILE))?;
    let channel: ChannelTapList = load_taps(&input.join(TAPS_FILE))?;
    let rcfg = ReceiverConfig::new(channel.delay_spread());
    let fe = front_end(&received, cfg, layout, &rcfg)?;
    println!(
        "frame at sample {}, a_hat {:.3e}, ISNR {:.2} dB",
        fe.sync.frame_start, fe.doppler.a_hat, fe.isnr_db
    );
    let genie = if modes.contains(&Mode::KnownCsi) {
        let clean = load(&input.join(CLEAN_FILE)).context("KNOWN_CSI needs the noiseless buffer")?;
        let clean_fe = compensated_front_end(&band_limit(&clean, cfg), fe.sync, fe.doppler, cfg, layout, &rcfg)?;
        let dem = demodulate(Mode::Notr, &clean_fe, cfg, layout, &pilots, &rcfg, None)?;
        Some(genie_estimates(&dem.observations, &reference, &pilots, cfg))
    } else {
        None
    };
    if let Some(dir) = dump {
        create_dir(dir)?;
    }
    println!(
        "{:<10} {:>12} {:>12} {:>9} {:>8}",
        "mode", "uncoded_ber", "coded_ber", "esnr_db", "support"
    );
    for &mode in modes {
        let dem = match demodulate(mode, &fe, cfg, layout, &pilots, &rcfg, genie.as_deref()) {
            Ok(d) => d,
            Err(e) => {
                println!("{:<10} failed: {e}", mode.name());
                continue;
            }
        };
        let dec = decide(&dem, &pilots, reference.payload_bits.len())?;
        let (ue, ub) = bit_errors(&reference.coded_bits, &dec.coded_hard)?;
        let (ce, cb) = bit_errors(&reference.payload_bits, &dec.payload_soft)?;
        let esnr = esnr_db(&dem.observations, &dem.estimates, &reference.block_symbols, &pilots)?;
        let support = dem.diagnostics.cir.as_ref().map(|c| c.support.len().to_string());
        println!(
            "{:<10} {:>12.4e} {:>12.4e} {:>9.2} {:>8}",
            mode.name(),
            ue as f64 / ub.max(1) as f64,
            ce as f64 / cb.max(1) as f64,
            esnr,
            support.as_deref().unwrap_or("-")
        );
        for w in &dem.diagnostics.warnings {
            println!("{:<10} warning: {w}", "");
        }
        if let Some(dir) = dump {
            let stem = mode.name().to_lowercase();
            if let Some(cir) = &dem.diagnostics.cir {
                save_cir_csv(
                    cir,
                    fe.probe.lead,
                    cfg.sample_rate,
                    &dir.join(format!("{stem}_cir.csv")),
                )?;
            }
            let points = dem
                .observations
                .iter()
                .zip(&dem.estimates)
                .flat_map(|(o, e)| zf_equalize(o, e, &pilots).symbols)
                .map(|s| (s.re, s.im));
            save_trace(&dir.join(format!("{stem}_constellation.csv")), ["re", "im"], points)?;
        }
    }
    Ok(())
}

fn cmd_sweep(
    mut spec: ExperimentSpec,
    out: Option<&Path>,
    seed: Option<u64>,
    modes: Option<Vec<Mode>>,
    print: bool,
) -> Result<()> {
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    if let Some(m) = modes {
        spec.modes = m;
    }
    if print {
        print!("{}", spec.to_toml());
        return Ok(());
    }
    let out = out.context("--out is required")?;
    let result = sweep_to_csv(&spec, out)?;
    let text = fs::read_to_string(out).with_context(|| format!("reading {}", out.display()))?;
    print!("{}", report(&text)?);
    if result.resumed_points > 0 {
        println!("{} points reused from {}", result.resumed_points, out.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let spec = load_experiment(cli.config.as_deref())?;
    match cli.command {
        Command::Tx {
            out,
            seed,
            pilot_spacing,
        } => cmd_tx(&spec, &out, seed, pilot_spacing),
        Command::Channel {
            input,
            out,
            snr,
            seed,
            taps,
        } => cmd_channel(&spec, &input, &out, snr, seed, taps.as_deref()),
        Command::Rx {
            input,
            modes,
            dump_diagnostics,
        } => cmd_rx(
            &input,
            &modes.unwrap_or_else(|| spec.modes.clone()),
            dump_diagnostics.as_deref(),
        ),
        Command::Sweep {
            out,
            seed,
            modes,
            print_config,
        } => cmd_sweep(spec, out.as_deref(), seed, modes, print_config),
        Command::Report { csv } => {
            let text = fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            print!("{}", report(&text)?);
            Ok(())
        }
    }
}
