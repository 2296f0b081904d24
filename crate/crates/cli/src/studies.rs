//! Convergence, price-law, time-integral and sweep studies.

use crate::config::{RunConfig, TailFamily};
use crate::output::{self, fmt};
use crate::run::{basic_summary, run_evolution, write_run, RunOutcome};
use anyhow::{anyhow, bail, Context, Result};
use dirac_tails::asymptotics::{time_integral, NpCase, ProfilePrediction, TimeIntegralReport, INTEGRABILITY_TOL};
use dirac_tails::diagnostics::{local_power_index, lpi_range, np_constant, tail_fit, tme_residual_norm, Series, MIN_FIT_START};
use dirac_tails::evolve::{integrate, Evolver, ModeState, Observer};
use dirac_tails::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| anyhow!("thread pool: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub tme_residual: f64,
    pub charge_balance_max_rel_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub observable: String,
    /// Coarsest `n` of the triple.
    pub n: usize,
    pub order_l2: f64,
    pub order_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub tau: f64,
    pub levels: Vec<LevelReport>,
    pub orders: Vec<OrderReport>,
    /// TME residual ratio between successive levels.
    pub tme_ratios: Vec<f64>,
    /// Set when any measured order lies outside `[3.5, 4.5]`.
    pub pre_asymptotic: bool,
}

pub const EXPECTED_ORDER: f64 = 4.0;
pub const ORDER_BAND: f64 = 0.5;

/// Self-convergence orders from three solutions sampled on common nodes.
pub fn self_convergence_order(coarse: &[Complex64], mid: &[Complex64], fine: &[Complex64]) -> (f64, f64) {
    let m: Vec<Complex64> = mid.iter().step_by(2).copied().collect();
    let f: Vec<Complex64> = fine.iter().step_by(4).copied().collect();
    let mut l2 = (0.0, 0.0);
    let mut mx: (f64, f64) = (0.0, 0.0);
    for i in 0..coarse.len() {
        let (a, b) = ((coarse[i] - m[i]).norm(), (m[i] - f[i]).norm());
        l2.0 += a * a;
        l2.1 += b * b;
        mx.0 = mx.0.max(a);
        mx.1 = mx.1.max(b);
    }
    ((l2.0 / l2.1).sqrt().log2(), (mx.0 / mx.1).log2())
}

/// Runs `levels` resolutions `n, 2n, 4n, …` to `tau_end` and compares `A`, `B`.
pub fn convergence(cfg: &RunConfig, levels: usize, jobs: usize) -> Result<(ConvergenceReport, Vec<RunOutcome>)> {
    if levels < 3 {
        bail!("convergence needs at least 3 levels, got {levels}");
    }
    let cfgs: Vec<RunConfig> = (0..levels)
        .map(|k| {
            let mut c = cfg.clone();
            c.grid.n = cfg.grid.n << k;
            c.diagnostics.tme = false;
            c
        })
        .collect();
    let outs: Vec<RunOutcome> = pool(jobs)?.install(|| cfgs.par_iter().map(run_evolution).collect::<Result<Vec<_>>>())?;
    let mut report = ConvergenceReport { tau: cfg.grid.tau_end, levels: vec![], orders: vec![], tme_ratios: vec![], pre_asymptotic: false };
    for o in &outs {
        let ev = Evolver::new(&o.chart, o.state.mode, 0.0);
        let s = basic_summary(o);
        report.levels.push(LevelReport {
            n: o.chart.n,
            tme_residual: tme_residual_norm(&o.state, &o.chart, &ev),
            charge_balance_max_rel_drift: s.metrics.get("charge_balance_max_rel_drift").copied().unwrap_or(f64::NAN),
        });
    }
    for w in report.levels.windows(2) {
        report.tme_ratios.push(w[0].tme_residual / w[1].tme_residual);
    }
    for k in 0..levels - 2 {
        let (c, m, f) = (&outs[k], &outs[k + 1], &outs[k + 2]);
        for (name, get) in [("A", ModeState::a as fn(&ModeState, &_) -> Vec<Complex64>), ("B", ModeState::b)] {
            let (l2, mx) = self_convergence_order(&get(&c.state, &c.chart), &get(&m.state, &m.chart), &get(&f.state, &f.chart));
            report.orders.push(OrderReport { observable: name.into(), n: c.chart.n, order_l2: l2, order_max: mx });
        }
    }
    report.pre_asymptotic =
        report.orders.iter().any(|o| !((o.order_l2 - EXPECTED_ORDER).abs() <= ORDER_BAND) || !o.order_l2.is_finite());
    Ok((report, outs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    /// Reported, not judged.
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `[min, max]` over the window, or a single value twice.
    pub measured: [f64; 2],
    pub target: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl Check {
    fn judge(name: &str, measured: Option<[f64; 2]>, target: f64, tol: f64, note: &str) -> Self {
        let (measured, verdict) = match measured {
            None => ([f64::NAN; 2], Verdict::Inconclusive),
            Some(m) if (m[0] - target).abs() <= tol && (m[1] - target).abs() <= tol => (m, Verdict::Pass),
            Some(m) => (m, Verdict::Fail),
        };
        Check { name: name.into(), measured, target, tol, verdict, note: note.into() }
    }

    fn at_least(name: &str, measured: Option<f64>, bound: f64, note: &str) -> Self {
        let verdict = match measured {
            None => Verdict::Inconclusive,
            Some(m) if m >= bound => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        let m = measured.unwrap_or(f64::NAN);
        Check { name: name.into(), measured: [m, m], target: bound, tol: 0.0, verdict, note: note.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLawReport {
    pub family: TailFamily,
    pub window: [f64; 2],
    pub ratio_at: f64,
    /// `N₁` or `N′₁`, whichever normalises the prediction.
    pub constant: Option<Complex64>,
    pub checks: Vec<Check>,
    /// `exponent` of a power-law fit over the window, per observable.
    pub fits: Vec<(String, f64)>,
    pub verdict: Verdict,
}

/// LPI min/max over `[a, b]`, computed from τ ≥ [`MIN_FIT_START`] on.
pub fn lpi_window(s: &Series, a: f64, b: f64) -> Option<(f64, f64)> {
    let tail = s.window(MIN_FIT_START, f64::INFINITY);
    let lpi = local_power_index(&tail, false).ok()?;
    if s.tau.last().is_none_or(|&t| t < b - 1e-9) {
        return None;
    }
    lpi_range(&lpi, a, b)
}

/// Observers the price-law study needs, in a fixed order.
pub fn pricelaw_observers(radius: f64) -> Vec<Observer> {
    vec![Observer::Radius { r: radius }, Observer::Scri, Observer::Moving { fraction: 0.5, min_r: radius }]
}

fn real_ratio(num: Option<Complex64>, den: Complex64) -> Option<f64> {
    num.map(|z| (z / den).re)
}

pub fn pricelaw(cfg: &RunConfig) -> Result<(PriceLawReport, RunOutcome)> {
    let pl = cfg.pricelaw.clone().ok_or_else(|| anyhow!("config has no [pricelaw] section"))?;
    let mut cfg = cfg.clone();
    cfg.observers = pricelaw_observers(pl.radius);
    let prep = cfg.prepare()?;
    let ev = Evolver::new(&prep.chart, prep.state.mode, 0.0);
    let (constant, case) = match pl.family {
        TailFamily::Nonvanishing => (Some(np_constant(&prep.state, &prep.chart, &ev).n1), NpCase::Nonvanishing),
        TailFamily::Vanishing => {
            let ti = time_integral(&prep.state, &prep.chart, &ev)?;
            ti.check(INTEGRABILITY_TOL)?;
            (Some(ti.n1_prime), NpCase::Vanishing)
        }
        TailFamily::HigherMode => (None, NpCase::Nonvanishing),
    };
    let out = run_evolution(&cfg)?;
    let rec = &out.recorder;
    let [a, b] = pl.window;
    let phi = rec.series(0, |o| o.phi_s);
    let psi_plus = rec.series(0, |o| o.psi_plus);
    let psi_minus = rec.series(0, |o| o.psi_minus);
    let scri = rec.series(1, |o| o.rad_minus);
    let moving = rec.series(2, |o| o.psi_minus);
    let lw = |s: &Series| lpi_window(s, a, b).map(|(lo, hi)| [lo, hi]);
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    let t = pl.ratio_at;
    let at = |k: usize| rec.records.iter().find(|r| r.tau >= t - 1e-9).map(|r| (r.tau, r.observers[k]));
    match pl.family {
        TailFamily::Nonvanishing => {
            let n1 = constant.unwrap_or_default();
            let pred = ProfilePrediction { mode: out.state.mode, j: 0, case, constant: n1 };
            checks.push(Check::judge("lpi.phi_s.r", lw(&phi), 3.0, 0.1, ""));
            checks.push(Check::judge("lpi.psi_minus.r", lw(&psi_minus), 3.0, 0.1, ""));
            checks.push(Check::judge("lpi.rad_minus.scri", lw(&scri), 2.0, 0.1, ""));
            let r_phi = at(0).and_then(|(tau, o)| real_ratio(Some(o.phi_s), pred.plus(tau, o.v)));
            checks.push(Check::judge("ratio.phi_s.r", r_phi.map(|x| [x, x]), 1.0, 0.05, "phi_s / (4 N1 tau^-1 v^-2)"));
            let r_scri = at(1).and_then(|(tau, o)| real_ratio(Some(o.rad_minus), pred.minus_radiation_at_scri(tau)));
            checks.push(Check::judge("ratio.rad_minus.scri", r_scri.map(|x| [x, x]), 1.0, 0.05, "expanded coefficient"));
            let r_closed =
                at(1).and_then(|(tau, o)| real_ratio(Some(o.rad_minus), pred.minus_radiation_at_scri_closed_form(tau)));
            checks.push(Check::judge("ratio.rad_minus.scri.closed_form", r_closed.map(|x| [x, x]), 1.0, 0.05, "closed-form coefficient"));
            fits.push(("phi_s.r".into(), &phi));
            fits.push(("rad_minus.scri".into(), &scri));
        }
        TailFamily::Vanishing => {
            let n1p = constant.unwrap_or_default();
            checks.push(Check::judge("lpi.psi_plus.r", lw(&psi_plus), 4.0, 0.15, ""));
            checks.push(Check::judge("lpi.psi_minus.r", lw(&psi_minus), 4.0, 0.15, ""));
            checks.push(Check::judge("lpi.rad_minus.scri", lw(&scri), 3.0, 0.15, ""));
            let r_phi = at(0).and_then(|(tau, o)| real_ratio(Some(o.phi_s), n1p * (-12.0 / (tau * tau * o.v * o.v))));
            checks.push(Check::judge("ratio.phi_s.r", r_phi.map(|x| [x, x]), 1.0, 0.1, "phi_s / (-12 N1' tau^-2 v^-2)"));
            fits.push(("psi_minus.r".into(), &psi_minus));
            fits.push(("rad_minus.scri".into(), &scri));
        }
        TailFamily::HigherMode => {
            let l0 = out.state.mode.ell as f64;
            let end = |s: &Series| lw(s).map(|m| m[0].max(m[1]));
            checks.push(Check::at_least("lpi.rad_minus.scri.max", end(&scri), 1.0 + l0 - 0.2, ""));
            checks.push(Check::at_least("lpi.psi_minus.moving.max", end(&moving), 2.0 + l0 - 0.3, "r = tau/2"));
            let interior = lw(&psi_minus).map(|m| m[1]);
            checks.push(Check {
                name: "lpi.psi_minus.r.max".into(),
                measured: [interior.unwrap_or(f64::NAN); 2],
                target: 2.0 * l0 + 2.0,
                tol: 0.0,
                verdict: Verdict::Exploratory,
                note: "interior rate, not judged".into(),
            });
            fits.push(("rad_minus.scri".into(), &scri));
        }
    }
    let fits = fits.into_iter().filter_map(|(k, s)| tail_fit(s, pl.window).ok().map(|f| (k, f.exponent))).collect();
    let judged: Vec<Verdict> = checks.iter().map(|c| c.verdict).filter(|v| *v != Verdict::Exploratory).collect();
    let verdict = if judged.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if judged.contains(&Verdict::Inconclusive) || out.state.tau < b - 1e-9 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok((PriceLawReport { family: pl.family, window: pl.window, ratio_at: pl.ratio_at, constant, checks, fits, verdict }, out))
}

/// Evolves to `time_integral.tau0` (if positive) and takes the time integral there.
pub fn cmd_timeintegral(cfg: &RunConfig, dir: &Path) -> Result<TimeIntegralReport> {
    let tau0 = cfg.time_integral.as_ref().map_or(0.0, |t| t.tau0);
    let prep = cfg.prepare()?;
    let mut evo = prep.evolution.clone();
    evo.tau_end = tau0;
    evo.output_every = tau0.max(1.0);
    let state = integrate(prep.state, &evo, &prep.chart, &mut [])?;
    let ev = Evolver::new(&prep.chart, state.mode, 0.0);
    let ti = time_integral(&state, &prep.chart, &ev)?;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let report = ti.report();
    output::write_json(&dir.join("timeintegral.json"), &report)?;
    let mut w = csv::Writer::from_path(dir.join("timeintegral.csv"))?;
    w.write_record(["sigma", "rad_plus.re", "rad_plus.im", "rad_minus.re", "rad_minus.im", "integral.re", "integral.im"])?;
    for i in 0..ti.sigma.len() {
        let row = [ti.sigma[i], ti.rad_plus[i].re, ti.rad_plus[i].im, ti.rad_minus[i].re, ti.rad_minus[i].im, ti.integral[i].re, ti.integral[i].im];
        w.write_record(row.iter().map(|&x| fmt(x)))?;
    }
    w.flush()?;
    ti.check(INTEGRABILITY_TOL)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub value: String,
    pub charge_final: f64,
    pub charge_balance_max_rel_drift: f64,
    /// Tail exponent of `Ψ₋` at the first observer over `fit_window`.
    pub exponent: Option<f64>,
}

/// Runs every sweep value, writing each run to `dir/run_KKK`. Results are
/// ordered by index whatever the worker count.
pub fn sweep(cfg: &RunConfig, dir: &Path, jobs: usize) -> Result<Vec<SweepEntry>> {
    let sw = cfg.sweep.clone().ok_or_else(|| anyhow!("config has no [sweep] section"))?;
    let cfgs: Vec<RunConfig> = sw.values.iter().map(|v| cfg.with_override(&sw.parameter, v)).collect::<Result<_>>()?;
    let entries = pool(jobs)?.install(|| {
        cfgs.par_iter()
            .enumerate()
            .map(|(k, c)| {
                let out = run_evolution(c)?;
                let summary = basic_summary(&out);
                write_run(&dir.join(format!("run_{k:03}")), c, &out, summary.clone())?;
                let exponent = match (sw.fit_window, out.recorder.observers.is_empty()) {
                    (Some(wd), false) => tail_fit(&out.recorder.series(0, |o| o.rad_minus), wd).ok().map(|f| f.exponent),
                    _ => None,
                };
                Ok(SweepEntry {
                    index: k,
                    value: sw.values[k].to_string(),
                    charge_final: summary.metrics.get("charge_final").copied().unwrap_or(f64::NAN),
                    charge_balance_max_rel_drift: summary.metrics.get("charge_balance_max_rel_drift").copied().unwrap_or(f64::NAN),
                    exponent,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    w.write_record(["index", &sw.parameter, "charge_final", "charge_balance_max_rel_drift", "exponent"])?;
    for e in &entries {
        w.write_record([
            e.index.to_string(),
            e.value.clone(),
            fmt(e.charge_final),
            fmt(e.charge_balance_max_rel_drift),
            e.exponent.map_or(String::new(), fmt),
        ])?;
    }
    w.flush()?;
    Ok(entries)
}
