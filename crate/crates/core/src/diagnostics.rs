//! Charge and fluxes, Newman–Penrose estimates, weighted energies and
//! tail-exponent extraction.

use crate::background::{advanced_time, BackgroundChart};
use crate::error::{Error, Result};
use crate::evolve::{sample_scalar, tme_residual, Evolver, ModeState, Observer, Scalar, Snapshot, Sink};
use crate::stencil::{d1, d1_left, simpson_weights};
use crate::swsh::{eigenvalue_lambda, SpinWeight};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeRecord {
    pub tau: f64,
    pub q: f64,
    pub flux_horizon_cum: f64,
    pub flux_scri_cum: f64,
    /// `Q + cumulative outflow`, constant in the continuum.
    pub balance: f64,
}

/// `Q = ∫ [∂_r h |A|² + HΔ|B|²] dρ`, written on the σ grid as
/// `(1/2M) ∫₀¹ [∂_r h |Ψ₊|² + ΔH |Ψ₋|²] dσ`.
pub fn charge(state: &ModeState, chart: &BackgroundChart) -> f64 {
    let w = simpson_weights(chart.n, chart.dsigma);
    let sum: f64 = (0..=chart.n)
        .map(|i| w[i] * (chart.dh[i] * state.psi_plus[i].norm_sqr() + chart.delta_h[i] * state.psi_minus[i].norm_sqr()))
        .sum();
    sum / (2.0 * chart.mass())
}

/// Instantaneous outflows `(|A|² at the horizon, |Ψ₋|² at null infinity)`.
pub fn boundary_flux(state: &ModeState, chart: &BackgroundChart) -> (f64, f64) {
    crate::evolve::boundary_flux_of(&state.psi_plus, &state.psi_minus, chart.mass())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpEstimate {
    pub tau: f64,
    /// `lim ρ²V̂Φ⁽¹⁾`
    pub n1: Complex64,
    /// `lim ρ³V̂Φ⁽¹⁾`, meaningful only when `n1` vanishes.
    pub d1_tilde: Complex64,
    pub d1_reliable: bool,
}

/// Relative size of `N₁` (against the field scale) below which `D̃₁` is trusted.
pub const NP_VANISHING_TOL: f64 = 1e-6;

/// `q = ρ²V̂Φ⁽¹⁾ = −2M∂_σΦ⁽¹⁾ + ρ²H ∂_τΦ⁽¹⁾` on the first five nodes.
fn q_near_scri(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> [Complex64; 5] {
    let m = chart.mass();
    let (dp, _) = ev.rhs(state);
    let k = 9.min(chart.n + 1);
    let phi: Vec<Complex64> = (0..k).map(|i| state.psi_plus[i] / chart.mu[i].sqrt()).collect();
    let mut dphi = vec![Complex64::default(); k];
    d1(&phi, chart.dsigma, &mut dphi);
    let mut q = [Complex64::default(); 5];
    for i in 0..5 {
        let phi_t = dp[i] / chart.mu[i].sqrt();
        q[i] = dphi[i] * (-2.0 * m) + phi_t * chart.rho2_h[i];
    }
    q
}

pub fn np_constant(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> NpEstimate {
    let m = chart.mass();
    let q = q_near_scri(state, chart, ev);
    let d1_tilde = d1_left(&q, chart.dsigma) * (2.0 * m);
    let scale = state.psi_plus.iter().chain(&state.psi_minus).map(|v| v.norm()).fold(0.0, f64::max);
    NpEstimate {
        tau: state.tau,
        n1: q[0],
        d1_tilde,
        d1_reliable: q[0].norm() <= NP_VANISHING_TOL * scale.max(f64::MIN_POSITIVE),
    }
}

/// Richardson extrapolation of two estimates at spacings `h` and `h/2`.
pub fn richardson(coarse: f64, fine: f64, order: i32) -> f64 {
    let f = 2f64.powi(order);
    (f * fine - coarse) / (f - 1.0)
}

/// Discrete RMS norm of the Teukolsky residual.
pub fn tme_residual_norm(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> f64 {
    let r = tme_residual(state, chart, ev);
    (r.iter().map(|v| v.norm_sqr()).sum::<f64>() * chart.dsigma).sqrt()
}

/// Time series of one scalar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub tau: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl Series {
    pub fn push(&mut self, tau: f64, v: Complex64) {
        self.tau.push(tau);
        self.values.push(v);
    }

    pub fn from_fn(tau: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self { tau: tau.to_vec(), values: tau.iter().map(|&t| Complex64::new(f(t), 0.0)).collect() }
    }

    /// Samples with `τ ∈ [a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Series {
        let mut out = Series::default();
        for (t, v) in self.tau.iter().zip(&self.values) {
            if *t >= a && *t <= b {
                out.push(*t, *v);
            }
        }
        out
    }

    /// Linear interpolation in `τ`.
    pub fn at(&self, tau: f64) -> Option<Complex64> {
        let k = self.tau.partition_point(|&t| t < tau);
        if k == 0 || k >= self.tau.len() {
            return (self.tau.first() == Some(&tau)).then(|| self.values[0]);
        }
        let (t0, t1) = (self.tau[k - 1], self.tau[k]);
        let w = (tau - t0) / (t1 - t0);
        Some(self.values[k - 1] * (1.0 - w) + self.values[k] * w)
    }
}

/// Local power index `p(τ) = −τ d ln|f|/dτ` by centred differences in
/// `ln τ`, optionally after a 5-point running median of `|f|`.
pub fn local_power_index(series: &Series, median: bool) -> Result<Vec<(f64, f64)>> {
    let n = series.tau.len();
    if n < 3 {
        return Err(Error::Numerical("local power index needs at least 3 samples".into()));
    }
    let mut mag: Vec<f64> = series.values.iter().map(|v| v.norm()).collect();
    if median {
        let raw = mag.clone();
        for i in 2..n.saturating_sub(2) {
            let mut w = [raw[i - 2], raw[i - 1], raw[i], raw[i + 1], raw[i + 2]];
            w.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            mag[i] = w[2];
        }
    }
    let mut out = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let (a, b) = (mag[i - 1], mag[i + 1]);
        let (ta, tb) = (series.tau[i - 1], series.tau[i + 1]);
        if !(a > f64::MIN_POSITIVE && b > f64::MIN_POSITIVE && a.is_finite() && b.is_finite()) {
            return Err(Error::Numerical(format!("|f| underflows near tau = {}", series.tau[i])));
        }
        if !(ta > 0.0) {
            continue;
        }
        out.push((series.tau[i], -(b.ln() - a.ln()) / (tb.ln() - ta.ln())));
    }
    Ok(out)
}

/// Range of the local power index over `[tau_a, tau_b]`.
pub fn lpi_range(lpi: &[(f64, f64)], tau_a: f64, tau_b: f64) -> Option<(f64, f64)> {
    let vals: Vec<f64> = lpi.iter().filter(|(t, _)| *t >= tau_a && *t <= tau_b).map(|p| p.1).collect();
    if vals.is_empty() {
        return None;
    }
    Some((vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
}

/// Local power index at `tau`, by linear interpolation.
pub fn lpi_at(lpi: &[(f64, f64)], tau: f64) -> Option<f64> {
    let k = lpi.partition_point(|p| p.0 < tau);
    if k == 0 || k >= lpi.len() {
        return None;
    }
    let (a, b) = (lpi[k - 1], lpi[k]);
    Some(a.1 + (b.1 - a.1) * (tau - a.0) / (b.0 - a.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub window: [f64; 2],
    pub exponent: f64,
    pub amplitude: f64,
    pub residual: f64,
}

/// Earliest start of a fit window, in units of M.
pub const MIN_FIT_START: f64 = 50.0;

/// Least-squares fit of `ln|f| = ln a − p ln τ` on `window` (τ in units of M).
pub fn tail_fit(series: &Series, window: [f64; 2]) -> Result<TailFit> {
    let [ta, tb] = window;
    if !(tb > ta && ta >= MIN_FIT_START) {
        return Err(Error::Numerical(format!("fit window {window:?} must satisfy tau_b > tau_a >= 50")));
    }
    let pts: Vec<(f64, f64)> = series
        .tau
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= ta && **t <= tb)
        .map(|(t, v)| (t.ln(), v.norm().ln()))
        .collect();
    if pts.len() < 3 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Numerical("fit window holds fewer than 3 usable samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(Error::Numerical("fit window is too narrow in ln tau".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(TailFit { window, exponent: -slope, amplitude: intercept.exp(), residual })
}

/// Local exponent above which a weighted-energy integrand counts as non-integrable at σ = 0.
pub const DIVERGENCE_EXPONENT: f64 = 0.9;

struct Component {
    value: Vec<Complex64>,
    dtau: Vec<Complex64>,
    lambda: f64,
}

fn energy_integrand(c: &Component, chart: &BackgroundChart, p: f64, upto: usize) -> Vec<f64> {
    let m = chart.mass();
    let mut ds = vec![Complex64::default(); upto + 1];
    d1(&c.value[..=upto], chart.dsigma, &mut ds);
    (0..=upto)
        .map(|i| {
            let s = chart.sigma[i];
            let mu = chart.mu[i];
            // μ·q with q = ρ²V̂X = −2M∂_σX + ρ²H ∂_τX, and ρ²μH = ΔH.
            let mu_q = ds[i] * (-2.0 * m * mu) + c.dtau[i] * chart.delta_h[i];
            let y = ds[i] * (s * s / (2.0 * m)) + c.dtau[i] * chart.dh[i];
            let weight = if p == 2.0 {
                1.0
            } else if i == 0 {
                if p < 2.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (2.0 * m / s).powf(p - 2.0)
            };
            let bulk = if weight.is_infinite() && mu_q.norm_sqr() == 0.0 { 0.0 } else { weight * mu_q.norm_sqr() };
            (bulk
                + (1.0 + c.lambda) * c.value[i].norm_sqr()
                + mu_q.norm_sqr() * s * s / (4.0 * m * m)
                + y.norm_sqr())
                / (2.0 * m)
        })
        .collect()
}

/// Integral of a sampled integrand on nodes `0..=upto`, with a power-law
/// model near σ = 0 when the weight is singular there.
fn integrate_energy(f: &[f64], h: f64, singular: bool) -> f64 {
    let upto = f.len() - 1;
    if !singular {
        let k = upto - upto % 2;
        let w = simpson_weights(k, h);
        let mut s: f64 = (0..=k).map(|i| w[i] * f[i]).sum();
        if k < upto {
            s += 0.5 * h * (f[k] + f[upto]);
        }
        return s;
    }
    let (f1, f2, f8) = (f[1], f[2], f[8]);
    if f2 <= 0.0 {
        return integrate_energy(&f[2..], h, false);
    }
    let alpha = -(f8 / f2).ln() / 4f64.ln();
    if alpha >= DIVERGENCE_EXPONENT {
        return f64::INFINITY;
    }
    let local = if f1 > 0.0 { -(f2 / f1).ln() / 2f64.ln() } else { alpha };
    let head = 2.0 * h * f2 / (1.0 - local.min(DIVERGENCE_EXPONENT));
    head + integrate_energy(&f[2..], h, false)
}

/// Mode-reduced weighted energy at first order: for each field `X`,
/// `∫ [ρ^{p−2}|rVX|² + ρ⁻²((1+Λ)|X|² + |rVX|² + |YX|²)] dρ`
/// with `rV = ρμV̂`. Order `i = 0` uses `Ψ±`; order `i = 1` adds `Φ⁽¹⁾`
/// and `𝒱̂Φ₋` on `ρ ≥ 4M`. Returns `+∞` when the integrand is not
/// integrable at null infinity.
pub fn weighted_energy(state: &ModeState, chart: &BackgroundChart, ev: &Evolver, p: f64, order: u32) -> Result<f64> {
    if !(0.0..5.0).contains(&p) {
        return Err(Error::Domain(format!("weight p = {p} outside [0, 5)")));
    }
    if order > 1 {
        return Err(Error::Domain(format!("weighted energy implemented for order 0 and 1, got {order}")));
    }
    let m = chart.mass();
    let n = chart.n;
    let ell = state.mode.ell;
    let s1 = ev.time_derivative(state);
    let singular = p > 2.0;
    let mut total = 0.0;
    let comps = [
        Component { value: state.psi_plus.clone(), dtau: s1.psi_plus.clone(), lambda: eigenvalue_lambda(SpinWeight::PLUS_HALF, ell) },
        Component { value: state.psi_minus.clone(), dtau: s1.psi_minus.clone(), lambda: eigenvalue_lambda(SpinWeight::MINUS_HALF, ell) },
    ];
    for c in &comps {
        total += integrate_energy(&energy_integrand(c, chart, p, n), chart.dsigma, singular);
    }
    if order == 1 {
        let cut = n / 2;
        let s2 = ev.time_derivative(&s1);
        let sq = |i: usize| chart.mu[i].sqrt();
        let phi1: Vec<Complex64> = (0..=cut).map(|i| state.psi_plus[i] / sq(i)).collect();
        let phi1_t: Vec<Complex64> = (0..=cut).map(|i| s1.psi_plus[i] / sq(i)).collect();
        let phim: Vec<Complex64> = (0..=cut).map(|i| state.psi_minus[i] * sq(i)).collect();
        let phim_t: Vec<Complex64> = (0..=cut).map(|i| s1.psi_minus[i] * sq(i)).collect();
        let phim_tt: Vec<Complex64> = (0..=cut).map(|i| s2.psi_minus[i] * sq(i)).collect();
        let vhat = |f: &[Complex64], ft: &[Complex64]| -> Vec<Complex64> {
            let mut d = vec![Complex64::default(); f.len()];
            d1(f, chart.dsigma, &mut d);
            (0..f.len()).map(|i| d[i] * (-2.0 * m) + ft[i] * chart.rho2_h[i]).collect()
        };
        let ladder = [
            Component { value: phi1, dtau: phi1_t, lambda: eigenvalue_lambda(SpinWeight::PLUS_HALF, ell) },
            Component {
                value: vhat(&phim, &phim_t),
                dtau: vhat(&phim_t, &phim_tt),
                lambda: eigenvalue_lambda(SpinWeight::MINUS_HALF, ell),
            },
        ];
        for c in &ladder {
            total += integrate_energy(&energy_integrand(c, chart, p, cut), chart.dsigma, singular);
        }
    }
    Ok(total)
}

/// Values of the standard observables at one observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverSample {
    pub r: f64,
    /// Advanced time `v = τ + h(r)` (infinite at null infinity).
    pub v: f64,
    pub psi_plus: Complex64,
    pub psi_minus: Complex64,
    pub rad_plus: Complex64,
    pub rad_minus: Complex64,
    pub phi_s: Complex64,
}

pub const OBSERVABLES: [(&str, Scalar); 5] = [
    ("psi_plus", Scalar::PsiPlus),
    ("psi_minus", Scalar::PsiMinus),
    ("rad_plus", Scalar::RadPlus),
    ("rad_minus", Scalar::RadMinus),
    ("phi_s", Scalar::PhiS),
];

pub fn observe(state: &ModeState, chart: &BackgroundChart, obs: &Observer) -> Result<ObserverSample> {
    let r = obs.radius_at(state.tau, chart);
    let v = if r.is_infinite() { f64::INFINITY } else { advanced_time(state.tau, r, chart)? };
    let f = |w| sample_scalar(state, chart, r, w);
    Ok(ObserverSample {
        r,
        v,
        psi_plus: f(Scalar::PsiPlus),
        psi_minus: f(Scalar::PsiMinus),
        rad_plus: f(Scalar::RadPlus),
        rad_minus: f(Scalar::RadMinus),
        phi_s: f(Scalar::PhiS),
    })
}

/// One output time of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub tau: f64,
    pub charge: ChargeRecord,
    pub np: Option<NpEstimate>,
    pub observers: Vec<ObserverSample>,
}

/// Sink collecting charge, N–P estimates and observer samples.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub observers: Vec<Observer>,
    pub records: Vec<DiagnosticRecord>,
}

impl Recorder {
    pub fn new(observers: Vec<Observer>) -> Self {
        Self { observers, records: Vec::new() }
    }

    /// Series of one observable at observer `k`.
    pub fn series(&self, k: usize, pick: impl Fn(&ObserverSample) -> Complex64) -> Series {
        let mut s = Series::default();
        for r in &self.records {
            s.push(r.tau, pick(&r.observers[k]));
        }
        s
    }

    pub fn n1_series(&self) -> Series {
        let mut s = Series::default();
        for r in &self.records {
            if let Some(np) = r.np {
                s.push(r.tau, np.n1);
            }
        }
        s
    }

    pub fn charges(&self) -> Vec<ChargeRecord> {
        self.records.iter().map(|r| r.charge).collect()
    }
}

impl Sink for Recorder {
    fn record(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        let q = charge(snap.state, snap.chart);
        let charge = ChargeRecord {
            tau: snap.state.tau,
            q,
            flux_horizon_cum: snap.flux_horizon_cum,
            flux_scri_cum: snap.flux_scri_cum,
            balance: q + snap.flux_horizon_cum + snap.flux_scri_cum,
        };
        let np = (snap.state.mode.ell == 1).then(|| np_constant(snap.state, snap.chart, snap.evolver));
        let observers =
            self.observers.iter().map(|o| observe(snap.state, snap.chart, o)).collect::<Result<Vec<_>>>()?;
        self.records.push(DiagnosticRecord { tau: snap.state.tau, charge, np, observers });
        Ok(())
    }
}
