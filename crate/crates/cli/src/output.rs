//! CSV and JSON artifacts. Floats are written with 17 significant digits.

use crate::config::RunConfig;
use crate::run::RunOutcome;
use anyhow::{Context, Result};
use dirac_tails::background::BackgroundChart;
use dirac_tails::diagnostics::OBSERVABLES;
use dirac_tails::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub flags: BTreeMap<String, bool>,
    /// Finite values only; non-finite entries are dropped on insert.
    pub metrics: BTreeMap<String, f64>,
}

impl Summary {
    pub fn flag(&mut self, key: &str, v: bool) {
        self.flags.insert(key.into(), v);
    }

    pub fn metric(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.metrics.insert(key.into(), v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub summary: Summary,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

fn push_c(row: &mut Vec<String>, z: Complex64) {
    row.push(fmt(z.re));
    row.push(fmt(z.im));
}

/// `tau`, then `label.observable.re/im` for each observer, plus `label.r`
/// and `label.v`.
pub fn write_series(path: &Path, out: &RunOutcome) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["tau".to_string()];
    for o in &out.recorder.observers {
        let l = o.label();
        header.push(format!("{l}.r"));
        header.push(format!("{l}.v"));
        for (name, _) in OBSERVABLES {
            header.push(format!("{l}.{name}.re"));
            header.push(format!("{l}.{name}.im"));
        }
    }
    w.write_record(&header)?;
    for rec in &out.recorder.records {
        let mut row = vec![fmt(rec.tau)];
        for s in &rec.observers {
            row.push(fmt(s.r));
            row.push(fmt(s.v));
            for z in [s.psi_plus, s.psi_minus, s.rad_plus, s.rad_minus, s.phi_s] {
                push_c(&mut row, z);
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics(path: &Path, out: &RunOutcome) -> Result<()> {
    let mut w = writer(path)?;
    let has_np = out.recorder.records.iter().any(|r| r.np.is_some());
    let has_tme = !out.tme.is_empty();
    let mut header: Vec<&str> = vec!["tau", "charge", "flux_horizon_cum", "flux_scri_cum", "balance"];
    if has_np {
        header.extend(["n1.re", "n1.im", "d1_tilde.re", "d1_tilde.im", "d1_reliable"]);
    }
    if has_tme {
        header.push("tme_residual");
    }
    w.write_record(&header)?;
    for (k, rec) in out.recorder.records.iter().enumerate() {
        let c = rec.charge;
        let mut row: Vec<String> =
            [c.tau, c.q, c.flux_horizon_cum, c.flux_scri_cum, c.balance].iter().map(|&x| fmt(x)).collect();
        if let Some(np) = rec.np {
            push_c(&mut row, np.n1);
            push_c(&mut row, np.d1_tilde);
            row.push(np.d1_reliable.to_string());
        }
        if has_tme {
            row.push(fmt(out.tme[k]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Final state on the grid.
pub fn write_checkpoint(path: &Path, out: &RunOutcome) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sigma", "psi_plus.re", "psi_plus.im", "psi_minus.re", "psi_minus.im"])?;
    let st = &out.state;
    for i in 0..st.len() {
        let mut row = vec![fmt(out.chart.sigma[i])];
        push_c(&mut row, st.psi_plus[i]);
        push_c(&mut row, st.psi_minus[i]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chart(path: &Path, chart: &BackgroundChart) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sigma", "rho", "mu", "delta", "rstar", "dh", "d2h", "big_h", "delta_h", "rho2_h", "height"])?;
    for i in 0..=chart.n {
        let height = if chart.sigma[i] > 0.0 && chart.sigma[i] < 1.0 {
            chart.height().eval(chart.rho[i]).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        let row = [
            chart.sigma[i],
            chart.rho[i],
            chart.mu[i],
            chart.delta[i],
            chart.rstar[i],
            chart.dh[i],
            chart.d2h[i],
            chart.big_h[i],
            chart.delta_h[i],
            chart.rho2_h[i],
            height,
        ];
        w.write_record(row.iter().map(|&x| fmt(x)))?;
    }
    w.flush()?;
    Ok(())
}
