//! One function per subcommand. Every experiment resolves its parameters
//! from the merged configuration, writes CSV bodies that depend only on the
//! configuration, and records a manifest with content hashes of all inputs
//! and outputs.

use crate::config::Config;
use crate::manifest::Manifest;
use crate::plot::{emit_plot_script, PlotKind};
use cavity_core::configuration::Configuration;
use cavity_core::fermi::{occupation_solve, LevelSpectrum};
use cavity_core::graph::{clique_statistics, Graph};
use cavity_core::sampler::{run_chain, stationary_check};
use cavity_core::second_moment::{
    polyhedron_max, second_moment, self_averaging_experiment, SecondMomentMode,
};
use cavity_core::thermo::{
    annealed_log_z, beta_critical, htilde_critical, overlap_energy, overlap_entropy, AnnealedMode,
    ModelParams,
};
use cavity_core::{CavityError, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn dispatch(name: &str, config: &Config) -> Result<()> {
    match name {
        "gen" => gen(config),
        "run" => run(config),
        "exact" => exact(config),
        "annealed" => annealed(config),
        "phase-diagram" => phase_diagram(config),
        "second-moment" => second_moment_cmd(config),
        "selfavg" => selfavg(config),
        "fermi" => fermi(config),
        "cliquenum" => cliquenum(config),
        "plot" => plot(config),
        other => Err(CavityError::invalid(format!(
            "unknown experiment {other:?}"
        ))),
    }
}

fn out_dir(config: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(config.get_str("out").unwrap_or("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_output(dir: &Path, name: &str, body: &str, manifest: &mut Manifest) -> Result<()> {
    std::fs::write(dir.join(name), body)?;
    manifest.record_output(name, body.as_bytes());
    Ok(())
}

fn model_params(config: &Config, n: usize) -> Result<ModelParams<f64>> {
    ModelParams::new(
        n,
        config.require("k")?,
        config.require("p")?,
        config.require("beta")?,
        config.require("htilde")?,
    )
}

/// Parameters against a loaded instance: n comes from the graph, p defaults
/// to the density the instance was generated with.
fn model_params_for(config: &Config, graph: &Graph) -> Result<ModelParams<f64>> {
    ModelParams::new(
        graph.n(),
        config.require("k")?,
        config.get_or("p", graph.p())?,
        config.require("beta")?,
        config.require("htilde")?,
    )
}

/// Load the graph named by `graph = path`, or generate from (n, p, seed).
fn load_or_generate(config: &Config, manifest: &mut Manifest) -> Result<Graph> {
    if let Some(path) = config.get_str("graph") {
        let bytes = std::fs::read(path)?;
        manifest.record_input("graph", &bytes);
        return Graph::read_from(&mut bytes.as_slice());
    }
    let n = config.require("n")?;
    let p = config.require("p")?;
    let seed = config.require("seed")?;
    Graph::generate(n, p, seed)
}

fn gen(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("gen", config);
    let n: usize = config.require("n")?;
    let p: f64 = config.require("p")?;
    let seed: u64 = config.require("seed")?;
    let graph = Graph::generate(n, p, seed)?;
    let mut body = Vec::new();
    graph.write_to(&mut body)?;
    let text = String::from_utf8(body).expect("graph format is ascii");
    write_output(&dir, "graph.txt", &text, &mut manifest)?;
    manifest.note("graph.missing_links", graph.missing_count());
    manifest.write(&dir)?;
    println!(
        "gen: n={n} p={p} seed={seed} missing={} -> {}",
        graph.missing_count(),
        dir.join("graph.txt").display()
    );
    Ok(())
}

fn run(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("run", config);
    let graph = load_or_generate(config, &mut manifest)?;
    let params = model_params_for(config, &graph)?;
    let steps: usize = config.require("steps")?;
    let seed: u64 = config.require("seed")?;
    let init = match config.get_str("init") {
        Some(line) => Some(Configuration::parse(line, graph.n())?),
        None => None,
    };
    let traj = run_chain(&graph, &params, steps, seed, init)?;
    manifest.note("initial_state", traj.states[0].serialize());
    let mut csv = String::from("step,energy,overlap,logZsigma,state\n");
    for t in 0..traj.steps() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            t + 1,
            traj.energies[t],
            traj.overlaps[t],
            traj.log_z[t],
            traj.states[t + 1].serialize()
        )
        .unwrap();
    }
    write_output(&dir, "trajectory.csv", &csv, &mut manifest)?;
    manifest.write(&dir)?;
    println!(
        "run: {} steps from {} -> {}",
        steps,
        traj.states[0].serialize(),
        dir.join("trajectory.csv").display()
    );
    Ok(())
}

fn exact(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("exact", config);
    let graph = load_or_generate(config, &mut manifest)?;
    let params = model_params_for(config, &graph)?;
    let cap: u128 = config.get_or("enumeration_cap", 5000)?;
    let report = stationary_check(&graph, &params, cap)?;
    let mut csv = String::from("states,l1_residual,detailed_balance_max\n");
    writeln!(
        csv,
        "{},{},{}",
        report.state_count, report.l1_residual, report.detailed_balance_max
    )
    .unwrap();
    write_output(&dir, "kernel_check.csv", &csv, &mut manifest)?;
    manifest.write(&dir)?;
    println!(
        "exact: {} states, ||muP-mu||_1 = {:.3e}, max reversibility residual = {:.3e}",
        report.state_count, report.l1_residual, report.detailed_balance_max
    );
    Ok(())
}

fn annealed(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("annealed", config);
    let n: usize = config.require("n")?;
    let params = model_params(config, n)?;
    let mode = config.get_str("mode").unwrap_or("exact-sum");
    match mode {
        "exact-sum" => {
            let total = annealed_log_z(&params, AnnealedMode::ExactSum)?;
            let nf = n as f64;
            let mut csv = String::from("q,log_term\n");
            for q in 0..=params.k {
                let term =
                    overlap_entropy(|m| cavity_core::numeric::ln_binomial(nf, m), params.k, q)
                        + overlap_energy(&params, q);
                writeln!(csv, "{q},{term}").unwrap();
            }
            write_output(&dir, "annealed.csv", &csv, &mut manifest)?;
            manifest.note("log_annealed_z", total);
            println!("annealed exact-sum: ln E Z = {total}");
        }
        "asymptotic" => {
            let total = annealed_log_z(&params, AnnealedMode::Asymptotic)?;
            manifest.note("log_annealed_z_leading", total);
            manifest.note("dropped_terms", "o(k)");
            let mut csv = String::from("quantity,value\n");
            writeln!(csv, "log_annealed_z_leading,{total}").unwrap();
            write_output(&dir, "annealed.csv", &csv, &mut manifest)?;
            println!("annealed asymptotic: leading terms = {total} (+ o(k) dropped)");
        }
        other => {
            return Err(CavityError::invalid(format!(
                "annealed mode must be exact-sum or asymptotic, got {other:?}"
            )))
        }
    }
    manifest.write(&dir)?;
    Ok(())
}

fn phase_diagram(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("phase-diagram", config);
    let p: f64 = config.require("p")?;
    let cbar: f64 = config.require("cbar")?;
    let beta_min: f64 = config.get_or("beta_min", 0.1)?;
    let beta_max: f64 = config.get_or("beta_max", 5.0)?;
    let steps: usize = config.get_or("beta_steps", 50)?;
    if !(beta_min > 0.0 && beta_max > beta_min && steps >= 2) {
        return Err(CavityError::invalid(
            "need 0 < beta_min < beta_max and beta_steps >= 2".to_string(),
        ));
    }
    let beta_c = beta_critical(p, cbar)?;
    let mut csv = String::from("beta,htilde_c,beta_c_flag\n");
    let mut flagged = false;
    for i in 0..steps {
        let beta = beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64;
        let hc = htilde_critical(beta, p, cbar)?;
        let flag = if !flagged && beta >= beta_c {
            flagged = true;
            1
        } else {
            0
        };
        writeln!(csv, "{beta},{hc},{flag}").unwrap();
    }
    write_output(&dir, "phase_diagram.csv", &csv, &mut manifest)?;
    manifest.note("beta_c", beta_c);
    emit_plot_script(
        &dir.join("phase_diagram.csv"),
        PlotKind::PhaseDiagram,
        &dir.join("plot_phase_diagram.py"),
    )?;
    manifest.note("plot_script", "plot_phase_diagram.py");
    manifest.write(&dir)?;
    println!(
        "phase-diagram: {} grid points, beta_c = {beta_c} -> {}",
        steps,
        dir.join("phase_diagram.csv").display()
    );
    Ok(())
}

fn second_moment_cmd(config: &Config) -> Result<()> {
    let mode = config.require_str("mode")?;
    match mode {
        "brute" | "decomp" => {
            let dir = out_dir(config)?;
            let mut manifest = Manifest::new("second-moment", config);
            let n: usize = config.require("n")?;
            let params = model_params(config, n)?;
            let budget: u128 = config.get_or("cell_budget", 100_000_000)?;
            let sm_mode = if mode == "brute" {
                SecondMomentMode::Brute
            } else {
                SecondMomentMode::Decomposition
            };
            let value = second_moment(&params, sm_mode, budget)?;
            let mut csv = String::from("mode,n,k,p,beta,htilde,log_second_moment\n");
            writeln!(
                csv,
                "{mode},{n},{},{},{},{},{value}",
                params.k, params.p, params.beta, params.htilde
            )
            .unwrap();
            write_output(&dir, "second_moment.csv", &csv, &mut manifest)?;
            manifest.write(&dir)?;
            println!("second-moment {mode}: ln E Z^2 = {value}");
        }
        "lemmas" => {
            let dir = out_dir(config)?;
            let mut manifest = Manifest::new("second-moment", config);
            let k: usize = config.require("k")?;
            let p: f64 = config.require("p")?;
            let beta: f64 = config.require("beta")?;
            let c: f64 = config.require("cbar")?;
            let offset: f64 = config.get_or("offset", 0.3)?;
            let ln_n = ModelParams::<f64>::ln_n_for(k, p, c);
            let hc = htilde_critical(beta, p, c)?;
            let mut csv = String::from("side,g_min,htilde,q,g,g5,value\n");
            for &(side, ht) in &[("above", hc + offset), ("below", hc - offset)] {
                for g_min in [0usize, 2] {
                    let params = ModelParams {
                        n: usize::MAX,
                        k,
                        p,
                        beta,
                        htilde: ht,
                    };
                    let m = polyhedron_max(&params, ln_n, g_min);
                    writeln!(
                        csv,
                        "{side},{g_min},{ht},{},{},{},{}",
                        m.q, m.g, m.g5, m.value
                    )
                    .unwrap();
                }
            }
            write_output(&dir, "lemma_argmax.csv", &csv, &mut manifest)?;
            manifest.write(&dir)?;
            println!(
                "second-moment lemmas -> {}",
                dir.join("lemma_argmax.csv").display()
            );
        }
        "selfavg" => return selfavg(config),
        other => {
            return Err(CavityError::invalid(format!(
                "second-moment mode must be brute|decomp|lemmas|selfavg, got {other:?}"
            )))
        }
    }
    Ok(())
}

fn selfavg(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("selfavg", config);
    let p: f64 = config.require("p")?;
    let cbar: f64 = config.require("cbar")?;
    let beta: f64 = config.require("beta")?;
    let htilde: f64 = config.require("htilde")?;
    let seed: u64 = config.require("seed")?;
    let replicas: usize = config.get_or("replicas", 200)?;
    let ks = config.get_list("ks")?.unwrap_or_else(|| vec![2, 3, 4]);
    let budget: u128 = config.get_or("enumeration_cap", 10_000_000)?;
    let rows = self_averaging_experiment(p, cbar, beta, htilde, &ks, replicas, seed, budget)?;
    let mut csv = String::from("k,n,replicas,log_mean_z,variance_ratio,n_ref\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.k, r.n, r.replicas, r.log_mean_z, r.variance_ratio, r.n_ref
        )
        .unwrap();
    }
    write_output(&dir, "selfavg.csv", &csv, &mut manifest)?;
    manifest.write(&dir)?;
    println!(
        "selfavg: {} sizes -> {}",
        rows.len(),
        dir.join("selfavg.csv").display()
    );
    Ok(())
}

fn fermi(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("fermi", config);
    let path = config.require_str("spectrum")?;
    let bytes = std::fs::read(path)?;
    manifest.record_input("spectrum", &bytes);
    let text = String::from_utf8_lossy(&bytes);
    let mut degeneracy: Vec<f64> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(jtok), Some(gtok)) = (it.next(), it.next()) else {
            return Err(CavityError::Parse(format!(
                "spectrum line {}: expected `j g_j`",
                lineno + 1
            )));
        };
        let j: usize = jtok
            .parse()
            .map_err(|_| CavityError::Parse(format!("spectrum line {}: bad level", lineno + 1)))?;
        let g: f64 = gtok
            .parse()
            .map_err(|_| CavityError::Parse(format!("spectrum line {}: bad count", lineno + 1)))?;
        if degeneracy.len() <= j {
            degeneracy.resize(j + 1, 0.0);
        }
        degeneracy[j] = g;
    }
    let spectrum = LevelSpectrum::new(degeneracy);
    let particles: f64 = config.require("particles")?;
    let energy: f64 = config.require("energy")?;
    let tol: f64 = config.get_or("tol", 1e-8)?;
    let sol = occupation_solve(&spectrum, particles, energy, tol)?;
    let mut csv = String::from("lambda,mu,entropy,residual_particles,residual_energy\n");
    writeln!(
        csv,
        "{},{},{},{},{}",
        sol.lambda, sol.mu, sol.entropy, sol.residual_particles, sol.residual_energy
    )
    .unwrap();
    write_output(&dir, "fermi.csv", &csv, &mut manifest)?;
    manifest.write(&dir)?;
    println!(
        "fermi: lambda = {}, mu = {}, entropy = {}, residuals = ({:.2e}, {:.2e})",
        sol.lambda, sol.mu, sol.entropy, sol.residual_particles, sol.residual_energy
    );
    Ok(())
}

fn cliquenum(config: &Config) -> Result<()> {
    let dir = out_dir(config)?;
    let mut manifest = Manifest::new("cliquenum", config);
    let n: usize = config.require("n")?;
    let p: f64 = config.require("p")?;
    let seed: u64 = config.require("seed")?;
    let graphs: usize = config.get_or("graphs", 50)?;
    let node_budget: u64 =
        config.get_or("node_budget", cavity_core::clique::DEFAULT_NODE_BUDGET)?;
    let (_, window) = clique_statistics::<f64>(n, p, 2)?;
    use rayon::prelude::*;
    let results: Vec<(usize, usize)> = (0..graphs)
        .into_par_iter()
        .map(|i| {
            let graph = Graph::generate(n, p, cavity_core::seeding::mix(seed, i as u64))
                .expect("validated parameters");
            let (omega, _) = cavity_core::clique::max_clique_with_budget(&graph, node_budget)
                .expect("node budget");
            (i, omega)
        })
        .collect();
    let mut csv = String::from("graph,omega,center,lower,upper,inside\n");
    let mut inside_count = 0usize;
    for (i, omega) in &results {
        let inside = (*omega as f64 - window.center).abs() <= 1.5;
        inside_count += inside as usize;
        writeln!(
            csv,
            "{i},{omega},{},{},{},{}",
            window.center, window.lower, window.upper, inside as u8
        )
        .unwrap();
    }
    write_output(&dir, "cliquenum.csv", &csv, &mut manifest)?;
    manifest.note("inside_window", inside_count);
    manifest.write(&dir)?;
    println!(
        "cliquenum: {inside_count}/{graphs} graphs inside {:.3} +- 1.5",
        window.center
    );
    Ok(())
}

fn plot(config: &Config) -> Result<()> {
    let kind = PlotKind::parse(config.require_str("kind")?)?;
    let csv = PathBuf::from(config.require_str("csv")?);
    let default_out = csv.with_file_name(format!(
        "plot_{}.py",
        csv.file_stem()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    let out = config
        .get_str("script")
        .map(PathBuf::from)
        .unwrap_or(default_out);
    emit_plot_script(&csv, kind, &out)?;
    println!("plot: wrote {}", out.display());
    Ok(())
}
