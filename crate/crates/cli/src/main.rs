//! `cavity`: experiment harness for the clique dynamics.
//!
//! Usage: cavity <subcommand> [--config FILE] [--key value ...]
//!
//! Subcommands: gen, run, exact, annealed, phase-diagram, second-moment,
//! selfavg, fermi, cliquenum, plot. Every flag `--key value` overrides the
//! matching configuration key. Exit codes: 0 success, 2 configuration
//! error, 3 budget exceeded, 4 numerical failure.

mod config;
mod experiments;
mod manifest;
mod plot;

use cavity_core::CavityError;
use config::Config;
use std::path::Path;
use std::process::ExitCode;

const USAGE: &str = "\
usage: cavity <subcommand> [--config FILE] [--key value ...]

subcommands:
  gen            generate a graph instance       (n, p, seed)
  run            run the chain, write trajectory (graph|n p seed, k, beta, htilde, steps, seed)
  exact          full-kernel invariance check    (graph|n p seed, k, beta, htilde)
  annealed       annealed partition function     (n, k, p, beta, htilde [, mode])
  phase-diagram  critical lines over a beta grid (p, cbar [, beta_min beta_max beta_steps])
  second-moment  --mode brute|decomp|lemmas|selfavg
  selfavg        variance-ratio experiment       (p, cbar, beta, htilde, seed [, ks replicas])
  fermi          occupation solver               (--spectrum FILE --particles N --energy E)
  cliquenum      exact clique-number statistics  (n, p, seed [, graphs])
  plot           emit a plot script              (--kind K --csv PATH)

common flags: --out DIR, --seed N. CAVITY_THREADS caps the worker pool.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("cavity: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(args: &[String]) -> cavity_core::Result<()> {
    let Some(subcommand) = args.first() else {
        eprint!("{USAGE}");
        return Err(CavityError::invalid("missing subcommand".to_string()));
    };
    if subcommand == "--help" || subcommand == "help" || subcommand == "-h" {
        print!("{USAGE}");
        return Ok(());
    }
    init_thread_pool()?;
    let config = parse_flags(&args[1..])?;
    experiments::dispatch(subcommand, &config)
}

/// `--key value` pairs, with `--config FILE` loaded first so that explicit
/// flags override file values regardless of order.
fn parse_flags(args: &[String]) -> cavity_core::Result<Config> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut config_path: Option<String> = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CavityError::invalid(format!(
                "expected --flag, got {arg:?}"
            )));
        };
        let Some(value) = it.next() else {
            return Err(CavityError::invalid(format!("flag --{key} needs a value")));
        };
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            pairs.push((key.to_string(), value.clone()));
        }
    }
    let mut config = match config_path {
        Some(path) => Config::from_file(Path::new(&path))?,
        None => Config::default(),
    };
    for (key, value) in pairs {
        config.set_override(&key, &value);
    }
    Ok(config)
}

fn init_thread_pool() -> cavity_core::Result<()> {
    if let Ok(raw) = std::env::var("CAVITY_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| CavityError::invalid(format!("CAVITY_THREADS: bad value {raw:?}")))?;
        // Results are independent of the pool size (deterministic
        // reductions); ignore re-initialization in test harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn exit_code(err: &CavityError) -> u8 {
    match err {
        CavityError::InvalidParameter(_)
        | CavityError::Parse(_)
        | CavityError::SizeMismatch(_)
        | CavityError::Io(_) => 2,
        CavityError::BudgetExceeded { .. } => 3,
        CavityError::NonConvergence(_) | CavityError::Infeasible(_) => 4,
    }
}
