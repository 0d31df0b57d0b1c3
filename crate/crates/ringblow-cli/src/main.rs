//! `ringblow` — command line front end for the ring blow-up toolkit.
//!
//! Exit codes: 0 on success, 1 on error (bad flags, bad config, solver
//! failure), 2 when a verification report does not pass.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ringblow::corrections::{duhamel_check, DuhamelConfig, SourceKind};
use ringblow::harness::{
    fit_law, run_verify, sim_config_from_ini, trajectory_rows, write_json,
    write_sim_diagnostics_csv, write_snapshots, write_trajectory_csv,
};
use ringblow::pde_sim::{run_blowup, SimConfig};
use ringblow::reduced_dynamics::{
    compute_constants, solve_lambda, solve_xi, ReducedConfig, StarHistory,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ringblow", version, about = "Ring blow-up toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the constant block (c0, c*, mu0, kappa*) and write JSON.
    Constants {
        /// Right-hand side coefficient a* of the reduced lambda equation.
        #[arg(long = "a-star", default_value_t = -1.0, allow_negative_numbers = true)]
        a_star: f64,
        /// Output path (default: constants.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the reduced lambda/xi dynamics and write trajectory.csv.
    Reduced {
        /// Space dimension (5, 6, or 7).
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Blow-up time of the ansatz.
        #[arg(long = "T", default_value_t = 1e-4)]
        t_end: f64,
        /// Geometric grid ratio (nodes at T(1 - q^k)).
        #[arg(long = "grid-q", default_value_t = 0.9)]
        grid_q: f64,
        /// Right-hand side coefficient a*.
        #[arg(long = "a-star", default_value_t = -1.0, allow_negative_numbers = true)]
        a_star: f64,
        #[arg(long = "out-dir", default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the ring blow-up simulation and write trajectory, snapshots, fits.
    Simulate {
        /// INI config file; defaults to the desk-scale n = 5 setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "out-dir", default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run a verification suite and write verify_report.json.
    Verify {
        /// One of: estimates, duhamel, sim, all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Output path (default: verify_report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one weighted Duhamel lemma check and print the report.
    Duhamel {
        /// One of: inner-ball, annulus, constant.
        #[arg(long, default_value = "constant")]
        lemma: String,
        #[arg(long, default_value_t = 12_000)]
        samples: usize,
        #[arg(long, default_value_t = 20240915)]
        seed: u64,
        /// Optional JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> ringblow::Result<u8> {
    match cmd {
        Cmd::Constants { a_star, out } => {
            let c = compute_constants(a_star)?;
            let path = out.unwrap_or_else(|| PathBuf::from("constants.json"));
            write_json(&path, &c)?;
            println!(
                "c0 = {:.6}, c* = {:.6}, mu0 = {:.6}, kappa* = {:.6}; wrote {}",
                c.c0,
                c.c_star,
                c.mu0,
                c.kappa_star,
                path.display()
            );
            Ok(0)
        }
        Cmd::Reduced { n, t_end, grid_q, a_star, out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let consts = compute_constants(a_star)?;
            let cfg = ReducedConfig { t_end, grid_q, a_star, ..ReducedConfig::default() };
            let lam = solve_lambda(&cfg, &consts)?;
            let mut grid = lam.t.clone();
            grid.push(t_end);
            let xi = solve_xi(t_end, n, &grid, &|_| 0.0, &|_| [0.0; 3], [0.0; 3])?;
            let rows = trajectory_rows(&lam, &xi);
            let path = out_dir.join("trajectory.csv");
            write_trajectory_csv(&path, &rows)?;
            println!(
                "lambda solved on {} nodes in {} iterations; residual sup {:.3e}; \
                 fitted amplitude {:.4}; wrote {}",
                lam.t.len(),
                lam.iterations,
                lam.residual_sup,
                lam.kappa_hat,
                path.display()
            );
            Ok(0)
        }
        Cmd::Simulate { config, out_dir } => {
            let cfg = match config {
                Some(p) => sim_config_from_ini(&std::fs::read_to_string(&p)?)?,
                None => SimConfig::desk(5),
            };
            std::fs::create_dir_all(&out_dir)?;
            let sim = run_blowup(&cfg)?;
            write_sim_diagnostics_csv(&out_dir.join("trajectory.csv"), &sim.rows)?;
            let snaps = write_snapshots(&out_dir.join("snapshots"), &sim, cfg.n, cfg.t_end)?;
            let last = sim.rows.last().expect("run produced no rows");
            println!(
                "stop: {:?} at t = {:.4e} ({} rows, {} snapshots); lambda(t0) = {:.4e}",
                sim.stop,
                last.t,
                sim.rows.len(),
                snaps.len(),
                sim.lambda0
            );
            match fit_law(&sim.rows, cfg.n) {
                Ok(fit) => {
                    write_json(&out_dir.join("fits.json"), &fit)?;
                    println!(
                        "law fit: t_hat = {:.4e}, ring exponent {:.3}, ring coeff {:.3}",
                        fit.t_hat, fit.ring_exponent, fit.ring_coeff
                    );
                }
                Err(e) => println!("law fit unavailable: {e}"),
            }
            Ok(0)
        }
        Cmd::Verify { suite, out } => {
            let rep = run_verify(&suite)?;
            let path = out.unwrap_or_else(|| PathBuf::from("verify_report.json"));
            write_json(&path, &rep)?;
            for c in &rep.checks {
                println!(
                    "[{}] {} — C = {:.3} (threshold {:.3}); {}",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.fitted_c,
                    c.threshold,
                    c.detail
                );
            }
            println!("suite {:?}: pass = {}; wrote {}", rep.suite, rep.pass, path.display());
            Ok(if rep.pass { 0 } else { 2 })
        }
        Cmd::Duhamel { lemma, samples, seed, out } => {
            let kind = match lemma.as_str() {
                "inner-ball" => SourceKind::InnerBall,
                "annulus" => SourceKind::Annulus,
                "constant" => SourceKind::Constant,
                other => {
                    return Err(ringblow::Error::Config(format!(
                        "unknown lemma {other:?} (expected inner-ball, annulus, or constant)"
                    )))
                }
            };
            let cfg = DuhamelConfig {
                n: 5,
                nu: 0.985,
                nu2: 0.9,
                alpha: 0.04,
                beta: 0.49,
                delta: 0.3,
                holder_mu: 1.5,
                samples,
                seed,
            };
            let hist = StarHistory { t_end: 0.05, n: 5 };
            let rep = duhamel_check(kind, &cfg, &hist);
            for c in &rep.clauses {
                println!(
                    "[{}] {} — C = {:.3} (half budget {:.3})",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.fitted_c,
                    c.fitted_c_half
                );
            }
            println!("lemma [{}]: pass = {}", rep.kind, rep.pass);
            if let Some(path) = out {
                write_json(&path, &rep)?;
            }
            Ok(if rep.pass { 0 } else { 2 })
        }
    }
}
