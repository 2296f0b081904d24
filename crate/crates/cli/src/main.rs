use anyhow::Result;
use clap::{Parser, Subcommand};
use dirac_tails::background::build_chart;
use dirac_tails_cli::output::{self, write_json};
use dirac_tails_cli::run::{basic_summary, cmd_run, write_run};
use dirac_tails_cli::studies::{self, Verdict};
use dirac_tails_cli::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dirac-tails", version, about = "Late-time tails of Dirac fields on Schwarzschild")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single evolution: series.csv, diagnostics.csv, manifest.json.
    Run(Common),
    /// Self-convergence study at n, 2n, 4n, ...
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Tail exponents and amplitudes against the predicted profiles.
    Pricelaw(Common),
    /// Time integral of an l = 1 mode.
    Timeintegral(Common),
    /// Tabulated background geometry.
    ChartDump(Common),
    /// One run per value of `sweep.parameter`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&common.config)?;
    let dir = out_dir(common, &cfg);
    Ok((cfg, dir))
}

fn ensure(dir: &Path) -> Result<()> {
    Ok(std::fs::create_dir_all(dir)?)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, dir) = load(&c)?;
            let m = cmd_run(&cfg, &dir)?;
            println!("wrote {} ({:.1} s)", dir.display(), m.wall_clock_seconds);
        }
        Command::Convergence { common, levels, jobs } => {
            let (cfg, dir) = load(&common)?;
            let (report, _) = studies::convergence(&cfg, levels, jobs)?;
            ensure(&dir)?;
            write_json(&dir.join("convergence.json"), &report)?;
            for l in &report.levels {
                println!("n {:6}  tme {:.3e}  balance drift {:.3e}", l.n, l.tme_residual, l.charge_balance_max_rel_drift);
            }
            for o in &report.orders {
                println!("{} n {:6}  order l2 {:.3}  max {:.3}", o.observable, o.n, o.order_l2, o.order_max);
            }
            if report.pre_asymptotic {
                println!("pre-asymptotic: orders are outside [3.5, 4.5]; increase n");
            }
        }
        Command::Pricelaw(c) => {
            let (cfg, dir) = load(&c)?;
            let (report, out) = studies::pricelaw(&cfg)?;
            let mut summary = basic_summary(&out);
            for ch in &report.checks {
                if ch.verdict != Verdict::Exploratory {
                    summary.flag(&ch.name, ch.verdict == Verdict::Pass);
                }
            }
            let mut run_cfg = cfg.clone();
            run_cfg.observers = studies::pricelaw_observers(cfg.pricelaw.as_ref().map_or(10.0, |p| p.radius));
            write_run(&dir, &run_cfg, &out, summary)?;
            write_json(&dir.join("pricelaw.json"), &report)?;
            for ch in &report.checks {
                println!("{:?}  {}  [{:.4}, {:.4}] target {} ± {}  {}", ch.verdict, ch.name, ch.measured[0], ch.measured[1], ch.target, ch.tol, ch.note);
            }
            println!("verdict: {:?}", report.verdict);
            if report.verdict == Verdict::Fail {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Timeintegral(c) => {
            let (cfg, dir) = load(&c)?;
            let r = studies::cmd_timeintegral(&cfg, &dir)?;
            println!("N1' = {}  direct {}  integrability residual {:.3e}", r.n1_prime, r.n1_prime_direct, r.integrability_residual);
            for w in &r.warnings {
                println!("warning: {w}");
            }
        }
        Command::ChartDump(c) => {
            let (cfg, dir) = load(&c)?;
            let chart = build_chart(cfg.params()?, cfg.slicing_profile(), cfg.grid.n)?;
            ensure(&dir)?;
            output::write_chart(&dir.join("chart.csv"), &chart)?;
            println!("wrote {}", dir.join("chart.csv").display());
        }
        Command::Sweep { common, jobs } => {
            let (cfg, dir) = load(&common)?;
            ensure(&dir)?;
            for e in studies::sweep(&cfg, &dir, jobs)? {
                let exp = e.exponent.map_or("-".into(), |x| format!("{x:.4}"));
                println!("{:3}  {}  charge {:.6e}  drift {:.3e}  exponent {exp}", e.index, e.value, e.charge_final, e.charge_balance_max_rel_drift);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
