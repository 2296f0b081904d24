//! Single evolutions.

use crate::config::RunConfig;
use crate::output::{self, RunManifest, Summary, CODE_VERSION};
use anyhow::{Context, Result};
use dirac_tails::background::BackgroundChart;
use dirac_tails::diagnostics::{tme_residual_norm, Recorder};
use dirac_tails::evolve::{integrate, ModeState, Snapshot};
use std::path::Path;
use std::time::Instant;

pub struct RunOutcome {
    pub chart: BackgroundChart,
    pub recorder: Recorder,
    /// TME residual norm per record; empty unless enabled.
    pub tme: Vec<f64>,
    pub state: ModeState,
    /// Initial state, kept for post-processing.
    pub initial: ModeState,
    pub wall_clock_seconds: f64,
}

pub fn run_evolution(cfg: &RunConfig) -> Result<RunOutcome> {
    let prep = cfg.prepare()?;
    let start = Instant::now();
    let mut recorder = Recorder::new(prep.evolution.observers.clone());
    let mut tme = Vec::new();
    let want_tme = cfg.diagnostics.tme;
    let mut tme_sink = |s: &Snapshot<'_>| {
        if want_tme {
            tme.push(tme_residual_norm(s.state, s.chart, s.evolver));
        }
        Ok(())
    };
    let initial = prep.state.clone();
    let state = integrate(prep.state, &prep.evolution, &prep.chart, &mut [&mut recorder, &mut tme_sink])
        .context("evolution failed")?;
    // The recorder always estimates N–P for ℓ = 1.
    if !cfg.diagnostics.np {
        recorder.records.iter_mut().for_each(|r| r.np = None);
    }
    Ok(RunOutcome { chart: prep.chart, recorder, tme, state, initial, wall_clock_seconds: start.elapsed().as_secs_f64() })
}

/// Flags and metrics every run reports.
pub fn basic_summary(out: &RunOutcome) -> Summary {
    let mut s = Summary::default();
    let ch = out.recorder.charges();
    if let (Some(first), Some(last)) = (ch.first(), ch.last()) {
        let drift = ch.iter().map(|c| (c.balance - first.q).abs()).fold(0.0, f64::max);
        let rel = if first.q > 0.0 { drift / first.q } else { drift };
        s.metric("charge_initial", first.q);
        s.metric("charge_final", last.q);
        s.metric("charge_balance_max_rel_drift", rel);
        s.flag("charge_balance_ok", rel <= 1e-6);
    }
    let n1 = out.recorder.n1_series();
    if let (Some(a), Some(b)) = (n1.values.first(), n1.values.last()) {
        s.metric("n1_initial_re", a.re);
        s.metric("n1_initial_im", a.im);
        s.metric("n1_final_re", b.re);
        s.metric("n1_final_im", b.im);
    }
    s.flag("finite", true);
    s
}

/// Writes `series.csv`, `diagnostics.csv`, `manifest.json` and optionally
/// `checkpoint.csv` into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutcome, summary: Summary) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    output::write_series(&dir.join("series.csv"), out)?;
    output::write_diagnostics(&dir.join("diagnostics.csv"), out)?;
    if cfg.diagnostics.checkpoint {
        output::write_checkpoint(&dir.join("checkpoint.csv"), out)?;
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        code_version: CODE_VERSION.to_string(),
        wall_clock_seconds: out.wall_clock_seconds,
        summary,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let out = run_evolution(cfg)?;
    let summary = basic_summary(&out);
    write_run(dir, cfg, &out, summary)
}
