//! Browser demo: background curves, a short tail run and spin-weighted
//! harmonics. The plain functions are usable natively; the `*_js` wrappers
//! are the wasm exports.

use dirac_tails::background::{build_chart, BlackHoleParams, SlicingProfile};
use dirac_tails::diagnostics::{local_power_index, np_constant, Recorder, MIN_FIT_START};
use dirac_tails::evolve::{integrate, make_initial_data, EvolutionConfig, Evolver, InitialDataSpec, Observer};
use dirac_tails::swsh::{harmonic_value, ModeIndex, SpinWeight};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
pub const MAX_N: usize = 1024;
/// Latest time the page may request.
pub const MAX_TAU: f64 = 1000.0;

/// Slicing and geometry on the σ grid.
#[wasm_bindgen]
pub struct Curves {
    sigma: Vec<f64>,
    rho2_h: Vec<f64>,
    dh: Vec<f64>,
    delta_h: Vec<f64>,
}

#[wasm_bindgen]
impl Curves {
    #[wasm_bindgen(getter)]
    pub fn sigma(&self) -> Vec<f64> {
        self.sigma.clone()
    }
    /// `ρ²H`, equal to `c0` at null infinity and infinite at the horizon.
    #[wasm_bindgen(getter)]
    pub fn rho2_h(&self) -> Vec<f64> {
        self.rho2_h.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn dh(&self) -> Vec<f64> {
        self.dh.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn delta_h(&self) -> Vec<f64> {
        self.delta_h.clone()
    }
}

pub fn chart_curves(mass: f64, n: usize) -> Result<Curves, String> {
    if n > MAX_N {
        return Err(format!("n must be at most {MAX_N}"));
    }
    let params = BlackHoleParams::new(mass).map_err(|e| e.to_string())?;
    let c = build_chart(params, SlicingProfile::default_for(mass), n).map_err(|e| e.to_string())?;
    Ok(Curves { sigma: c.sigma, rho2_h: c.rho2_h, dh: c.dh, delta_h: c.delta_h })
}

#[wasm_bindgen(js_name = chartCurves)]
pub fn chart_curves_js(mass: f64, n: usize) -> Result<Curves, JsError> {
    chart_curves(mass, n).map_err(|e| JsError::new(&e))
}

/// `|Ψ₋|` at null infinity and at `r = 10M`, with their local power indices.
#[wasm_bindgen]
pub struct TailRun {
    tau: Vec<f64>,
    scri: Vec<f64>,
    r10: Vec<f64>,
    lpi_tau: Vec<f64>,
    lpi_scri: Vec<f64>,
    lpi_r10: Vec<f64>,
    n1: f64,
}

#[wasm_bindgen]
impl TailRun {
    #[wasm_bindgen(getter)]
    pub fn tau(&self) -> Vec<f64> {
        self.tau.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn scri(&self) -> Vec<f64> {
        self.scri.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn r10(&self) -> Vec<f64> {
        self.r10.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lpi_tau(&self) -> Vec<f64> {
        self.lpi_tau.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lpi_scri(&self) -> Vec<f64> {
        self.lpi_scri.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lpi_r10(&self) -> Vec<f64> {
        self.lpi_r10.clone()
    }
    /// Real part of `N₁` on the initial slice (zero for the gaussian).
    #[wasm_bindgen(getter)]
    pub fn n1(&self) -> f64 {
        self.n1
    }
}

/// `family` is `"gaussian"` or `"np_tail"`; mass 1, `m = 1/2`.
pub fn tail_run(ell: u32, family: &str, n: usize, tau_end: f64) -> Result<TailRun, String> {
    if n > MAX_N || !(tau_end > 0.0 && tau_end <= MAX_TAU) {
        return Err(format!("need n <= {MAX_N} and 0 < tau_end <= {MAX_TAU}"));
    }
    let spec = match family {
        "gaussian" => InitialDataSpec::GaussianBump { center: 10.0, width: 2.0, amplitude: 1.0 },
        "np_tail" => InitialDataSpec::NpTail { n_target: 1.0, cutoff_radius: 20.0 },
        other => return Err(format!("unknown family {other}")),
    };
    let s = |e: dirac_tails::Error| e.to_string();
    let chart = build_chart(BlackHoleParams::new(1.0).map_err(s)?, SlicingProfile::default_for(1.0), n).map_err(s)?;
    let mode = ModeIndex::new(ell, 1).map_err(s)?;
    let st = make_initial_data(&spec, &chart, mode).map_err(s)?;
    let n1 = if ell == 1 { np_constant(&st, &chart, &Evolver::new(&chart, mode, 0.0)).n1.re } else { 0.0 };
    let observers = vec![Observer::Scri, Observer::Radius { r: 10.0 }];
    let cfg = EvolutionConfig { n, cfl: 0.5, ko_eps: 0.0, tau_end, output_every: 1.0, observers: observers.clone() };
    let mut rec = Recorder::new(observers);
    integrate(st, &cfg, &chart, &mut [&mut rec]).map_err(s)?;
    let scri = rec.series(0, |o| o.rad_minus);
    let r10 = rec.series(1, |o| o.rad_minus);
    let (mut lpi_tau, mut lpi_scri, mut lpi_r10) = (vec![], vec![], vec![]);
    let tail = |x: &dirac_tails::diagnostics::Series| local_power_index(&x.window(MIN_FIT_START, f64::INFINITY), true);
    if let (Ok(a), Ok(b)) = (tail(&scri), tail(&r10)) {
        for ((t, p), (_, q)) in a.into_iter().zip(b) {
            lpi_tau.push(t);
            lpi_scri.push(p);
            lpi_r10.push(q);
        }
    }
    Ok(TailRun {
        tau: scri.tau.clone(),
        scri: scri.values.iter().map(|v| v.norm()).collect(),
        r10: r10.values.iter().map(|v| v.norm()).collect(),
        lpi_tau,
        lpi_scri,
        lpi_r10,
        n1,
    })
}

#[wasm_bindgen(js_name = tailRun)]
pub fn tail_run_js(ell: u32, family: &str, n: usize, tau_end: f64) -> Result<TailRun, JsError> {
    tail_run(ell, family, n, tau_end).map_err(|e| JsError::new(&e))
}

/// `_sY_{ℓm}(θ)` at `samples` equispaced angles in `[0, π]`, spins and `m`
/// given doubled. Returns `[θ…, Y…]`.
pub fn harmonic_samples(twice_s: i32, ell: u32, twice_m: i32, samples: usize) -> Result<Vec<f64>, String> {
    let s = |e: dirac_tails::Error| e.to_string();
    let spin = SpinWeight::from_twice(twice_s).map_err(s)?;
    let mode = ModeIndex::new(ell, twice_m).map_err(s)?;
    mode.check(spin).map_err(s)?;
    if samples < 2 {
        return Err("need at least 2 samples".into());
    }
    let theta: Vec<f64> = (0..samples).map(|k| std::f64::consts::PI * k as f64 / (samples - 1) as f64).collect();
    let y: Vec<f64> = theta.iter().map(|&t| harmonic_value(spin, mode, t).0).collect();
    Ok(theta.into_iter().chain(y).collect())
}

#[wasm_bindgen(js_name = harmonicSamples)]
pub fn harmonic_samples_js(twice_s: i32, ell: u32, twice_m: i32, samples: usize) -> Result<Vec<f64>, JsError> {
    harmonic_samples(twice_s, ell, twice_m, samples).map_err(|e| JsError::new(&e))
}
