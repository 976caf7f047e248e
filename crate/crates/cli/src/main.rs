mod config;
mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::RawConfig;
use uclt_core::entropy::{covering_number, entropy, CoverEstimator, FiniteMetricSpace};
use uclt_core::ustat::hoeffding_decompose_all;

/// Uniform tail bounds for parametric U-statistics.
///
/// Any config key can be overridden as `--section.key value`.
#[derive(Parser)]
#[command(name = "uclt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, estimate, bound and compare in one go.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the normalized deviation panels and their moment tables.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Natural distance and entropy integral of the largest panel, or the
    /// covering number of a metric-space CSV at one radius.
    Entropy {
        #[arg(long, required_unless_present = "space")]
        config: Option<PathBuf>,
        #[arg(long, requires = "eps")]
        space: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = "greedy")]
        estimator: String,
    },
    /// Uniform bound report from the simulated panels.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare an empirical tail curve with bound curves.
    Verify {
        #[arg(long, required_unless_present = "empirical")]
        config: Option<PathBuf>,
        #[arg(long)]
        empirical: Option<PathBuf>,
        #[arg(long = "bound")]
        bounds: Vec<PathBuf>,
    },
    /// Hoeffding decomposition of the configured kernel on its alphabet.
    Decompose {
        #[arg(long)]
        config: PathBuf,
    },
}

const NOT_CERTIFIED: u8 = 2;

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match dispatch(cli.command, &overrides) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Pulls `--section.key [value]` pairs out before clap sees the arguments.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let is_key = a
            .strip_prefix("--")
            .is_some_and(|k| k.split('=').next().unwrap().contains('.'));
        if is_key {
            let has_value = a.contains('=');
            overrides.push(a);
            if !has_value {
                overrides.extend(it.next());
            }
        } else {
            plain.push(a);
        }
    }
    (plain, overrides)
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<RawConfig> {
    let mut raw = RawConfig::load(path)?;
    raw.apply_overrides(overrides)?;
    Ok(raw)
}

fn dispatch(command: Command, overrides: &[String]) -> Result<u8> {
    match command {
        Command::Run { config } => {
            let raw = load(&config, overrides)?;
            let cfg = raw.resolve()?;
            let fp = raw.simulation_fingerprint();
            stages::simulate(&cfg, &fp)?;
            let panels = stages::load_panels(&cfg, &fp)?;
            stages::entropy(&cfg, &panels)?;
            finish_bounds(&cfg, &panels)
        }
        Command::Simulate { config } => {
            let raw = load(&config, overrides)?;
            let cfg = raw.resolve()?;
            let panels = stages::simulate(&cfg, &raw.simulation_fingerprint())?;
            for (n, f) in &panels {
                println!("n = {n}: {} replications x {} parameters", f.replications(), f.width());
            }
            Ok(0)
        }
        Command::Entropy {
            config,
            space,
            eps,
            estimator,
        } => {
            if let Some(space) = space {
                let est: CoverEstimator = estimator.parse()?;
                let s = FiniteMetricSpace::read_csv(&space).with_context(|| format!("reading {}", space.display()))?;
                let eps = eps.expect("clap enforces --eps");
                println!("N = {}", covering_number(&s, eps, est));
                println!("H = {}", entropy(&s, eps, est));
                return Ok(0);
            }
            let raw = load(&config.expect("clap enforces --config"), overrides)?;
            let cfg = raw.resolve()?;
            let panels = stages::load_panels(&cfg, &raw.simulation_fingerprint())?;
            let s = stages::entropy(&cfg, &panels)?;
            println!("diam = {}", s.diam);
            println!("entropy_integral = {}", s.value);
            println!("finite = {}", s.finite);
            Ok(0)
        }
        Command::Bounds { config } => {
            let raw = load(&config, overrides)?;
            let cfg = raw.resolve()?;
            let panels = stages::load_panels(&cfg, &raw.simulation_fingerprint())?;
            finish_bounds(&cfg, &panels)
        }
        Command::Verify {
            config,
            empirical,
            bounds,
        } => {
            let (emp, bounds) = match empirical {
                Some(e) => {
                    if bounds.is_empty() {
                        bail!("--empirical needs at least one --bound curve");
                    }
                    (e, bounds)
                }
                None => {
                    let cfg = load(&config.expect("clap enforces --config"), overrides)?.resolve()?;
                    let dir = cfg.output_dir;
                    let mut b = vec![dir.join("upper_bound.csv")];
                    if dir.join("lower_bound.csv").exists() {
                        b.push(dir.join("lower_bound.csv"));
                    }
                    for p in std::iter::once(&dir.join("empirical_tail.csv")).chain(&b) {
                        if !p.exists() {
                            bail!("missing upstream artifact {} (run `bounds` first)", p.display());
                        }
                    }
                    (dir.join("empirical_tail.csv"), b)
                }
            };
            let report = stages::verify(&emp, &bounds)?;
            println!("violations = {}", report.violations.len());
            for v in &report.violations {
                println!(
                    "  u = {}: {} {} vs empirical {} (sigma {})",
                    v.u, v.kind, v.bound, v.empirical, v.sigma
                );
            }
            Ok(0)
        }
        Command::Decompose { config } => {
            let raw = load(&config, overrides)?;
            let alphabet = raw.alphabet_for_decompose()?;
            let mut kernel = raw.kernel()?;
            if let Some(a) = alphabet {
                kernel = kernel.with_alphabet(a)?;
            }
            let decomps = hoeffding_decompose_all(&kernel)?;
            for h in &decomps {
                let zetas: Vec<String> = h
                    .zetas
                    .iter()
                    .enumerate()
                    .map(|(c, z)| format!("zeta_{}={}", c + 1, z))
                    .collect();
                println!("{}: mean={} {} rank={}", h.t_label, h.mean, zetas.join(" "), h.rank);
            }
            let summary = uclt_core::ustat::rank_of(&decomps)?;
            println!("rank = {}", summary.rank);
            for (r, ts) in &summary.partition {
                println!("  rank {r}: {} parameter values", ts.len());
            }
            Ok(0)
        }
    }
}

fn finish_bounds(
    cfg: &config::ExperimentConfig,
    panels: &[(usize, uclt_core::empirics::FieldSampleMatrix)],
) -> Result<u8> {
    let out = stages::bounds(cfg, panels)?;
    if out.scalar_degenerate {
        println!("scalar-degenerate: a single parameter value, the bound is the scalar tail bound");
    }
    println!("violations = {}", out.violations);
    println!("report written to {}", cfg.output_dir.join("report.txt").display());
    if out.certified {
        println!("CERTIFIED");
        Ok(0)
    } else {
        println!("NOT-CERTIFIED");
        Ok(NOT_CERTIFIED)
    }
}
