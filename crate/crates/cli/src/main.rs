use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ncma_core::analysis::{rate_gain, sic_sinr};
use ncma_core::channel::db_to_linear;
use ncma_core::harness::{emit_results, run_scenario, ResultRow, ScenarioConfig};
use ncma_core::rag::{analytic_mean_rounds, run_rag, DetectionMode, GroupPolicy, RagParams};
use ncma_core::Profile;

mod selftest;

#[derive(Parser)]
#[command(name = "ncma", version, about = "Network-coded multiple access link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Throughput sweep over user C's SNR for one or more decoder profiles.
    Sweep(SweepArgs),
    /// Contention statistics of the random-access procedure.
    RagSim(RagArgs),
    /// Tables of the NOMA rate gain and the SIC first-user SINR.
    Theory,
    /// Runs the built-in oracle checks.
    Selftest,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// TOML scenario file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated profiles, or `all`.
    #[arg(long, value_delimiter = ',')]
    profile: Option<Vec<String>>,
    /// Comma-separated SNR points for user C, in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_c: Option<Vec<f64>>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; a `.manifest.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Detection {
    Ideal,
    Correlator,
}

#[derive(clap::Args)]
struct RagArgs {
    /// Smallest number of contending users.
    #[arg(long, default_value_t = 2)]
    min_users: usize,
    /// Largest number of contending users.
    #[arg(long, default_value_t = 10)]
    max_users: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Detection::Ideal)]
    detection: Detection,
    /// SNR of every contending user, in dB (matters for the correlator only).
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    snr: f64,
    /// Form weak triples before strong-weak pairs.
    #[arg(long)]
    weak_triples_first: bool,
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(list) = args.profile {
        cfg.profiles = if list.iter().any(|p| p == "all") {
            Profile::ALL.to_vec()
        } else {
            list.iter().map(|p| p.parse()).collect::<ncma_core::Result<_>>()?
        };
    }
    if let Some(v) = args.snr_c {
        cfg.snr_c_db = v;
    }
    if let Some(v) = args.slots {
        cfg.slots = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    cfg.validate()?;
    let rows = run_scenario(&cfg)?;
    print_rows(&rows);
    if let Some(path) = &cfg.out {
        let manifest = emit_results(&rows, &cfg, path)?;
        eprintln!("wrote {} and {}", path.display(), manifest.display());
    }
    Ok(())
}

fn print_rows(rows: &[ResultRow]) {
    println!("{:<18} {:>7} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8}", "profile", "snr_c", "stage", "th_a", "th_b", "th_c", "th_sys", "stderr");
    for r in rows {
        println!(
            "{:<18} {:>7.2} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.profile.name(),
            r.snr_c_db,
            r.stage.name(),
            r.th[0],
            r.th[1],
            r.th[2],
            r.th_sys,
            r.th_sys_stderr.unwrap_or(0.0)
        );
    }
}

fn rag_sim(args: RagArgs) -> Result<()> {
    if args.min_users == 0 || args.min_users > args.max_users {
        bail!("need 1 <= --min-users <= --max-users");
    }
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let params = RagParams {
        detection: match args.detection {
            Detection::Ideal => DetectionMode::Ideal,
            Detection::Correlator => DetectionMode::Correlator,
        },
        policy: if args.weak_triples_first { GroupPolicy::WeakTriplesFirst } else { GroupPolicy::StrongWeakFirst },
        ..RagParams::default()
    };
    println!("{:>5} {:>12} {:>12} {:>9} {:>12}", "users", "mean_rounds", "analytic", "rel_err", "retries/user");
    for k in args.min_users..=args.max_users {
        let users: Vec<(usize, f64)> = (0..k).map(|i| (i, args.snr)).collect();
        let (mut rounds, mut retries) = (0usize, 0usize);
        for t in 0..args.trials {
            let out = run_rag(&users, &params, args.seed.wrapping_add((k as u64) << 32 | t as u64))?;
            rounds += out.rounds;
            retries += out.retries;
        }
        let mean = rounds as f64 / args.trials as f64;
        let analytic = analytic_mean_rounds(k, params.preambles());
        println!(
            "{:>5} {:>12.4} {:>12.4} {:>9.4} {:>12.4}",
            k,
            mean,
            analytic,
            (mean - analytic).abs() / analytic,
            retries as f64 / (args.trials * k) as f64
        );
    }
    Ok(())
}

fn theory() -> Result<()> {
    println!("{:>6} {:>10} {:>10} {:>12}", "P_dB", "P", "rate_gain", "sic_sinr_dB");
    for i in -10..=40 {
        let db = f64::from(i);
        let p = db_to_linear(db);
        let sinr = sic_sinr(p, 1.0)?;
        println!("{:>6.1} {:>10.3} {:>10.4} {:>12.3}", db, p, rate_gain(p)?, 10.0 * sinr.log10());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::RagSim(args) => rag_sim(args),
        Command::Theory => theory(),
        Command::Selftest => selftest::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
