//! Method-of-lines evolution of one `(m, ℓ)` mode of the Dirac field.
//!
//! The mode coefficients `A` (spin +½) and `B` (spin −½) obey
//! `∂_τA = (∂_ρA − ℓB)/∂_r h` and `∂_τB = (ℓA − (r−M)B − Δ∂_ρB)/(ΔH)`.
//! The evolved variables are the radiation fields `Ψ₊ = ρA` and `Ψ₋ = ρB`,
//! whose equations have bounded coefficients on all of `σ ∈ [0, 1]`:
//!
//! ```text
//! ∂_τΨ₊ = [−(σ²/2M)∂_σΨ₊ − (σ/2M)Ψ₊ − ℓΨ₋] / ∂_r h
//! ∂_τΨ₋ = [2M(1−σ)∂_σΨ₋ + ℓΨ₊ − MΨ₋] / (ΔH)
//! ```
//!
//! `A` and `B` themselves are recovered as `σΨ/(2M)`.

use crate::background::{smooth_step, BackgroundChart};
use crate::error::{Error, Result};
use crate::stencil::{add_dissipation, d1, deriv, interp_uniform};
use crate::swsh::ModeIndex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One mode of the field on the chart's σ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub mode: ModeIndex,
    pub tau: f64,
    /// `Ψ₊ = ρA`
    pub psi_plus: Vec<Complex64>,
    /// `Ψ₋ = ρB`
    pub psi_minus: Vec<Complex64>,
}

impl ModeState {
    /// Zero state on `n` intervals (`n + 1` nodes).
    pub fn zeros(mode: ModeIndex, n: usize) -> Self {
        Self { mode, tau: 0.0, psi_plus: vec![ZERO; n + 1], psi_minus: vec![ZERO; n + 1] }
    }

    pub fn len(&self) -> usize {
        self.psi_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_plus.is_empty()
    }

    /// Radial coefficient `A` of `ψ_𝔰`.
    pub fn a(&self, chart: &BackgroundChart) -> Vec<Complex64> {
        scale_by(&self.psi_plus, chart, |s, m| s / (2.0 * m))
    }

    /// Radial coefficient `B` of `ψ_{−𝔰}`.
    pub fn b(&self, chart: &BackgroundChart) -> Vec<Complex64> {
        scale_by(&self.psi_minus, chart, |s, m| s / (2.0 * m))
    }

    /// `αX + βY` on matching grids.
    pub fn combine(alpha: Complex64, x: &ModeState, beta: Complex64, y: &ModeState) -> ModeState {
        let lin = |u: &[Complex64], v: &[Complex64]| u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect();
        ModeState {
            mode: x.mode,
            tau: x.tau,
            psi_plus: lin(&x.psi_plus, &y.psi_plus),
            psi_minus: lin(&x.psi_minus, &y.psi_minus),
        }
    }

    pub fn scaled(&self, c: Complex64) -> ModeState {
        ModeState {
            mode: self.mode,
            tau: self.tau,
            psi_plus: self.psi_plus.iter().map(|v| v * c).collect(),
            psi_minus: self.psi_minus.iter().map(|v| v * c).collect(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, (p, m)) in self.psi_plus.iter().zip(&self.psi_minus).enumerate() {
            if !(p.re.is_finite() && p.im.is_finite() && m.re.is_finite() && m.im.is_finite()) {
                return Err(Error::NonFinite { tau: self.tau, node: i });
            }
        }
        Ok(())
    }
}

fn scale_by(u: &[Complex64], chart: &BackgroundChart, f: impl Fn(f64, f64) -> f64) -> Vec<Complex64> {
    let m = chart.mass();
    u.iter().zip(&chart.sigma).map(|(v, &s)| v * f(s, m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observer {
    Scri,
    Horizon,
    /// Fixed areal radius.
    Radius { r: f64 },
    /// Moving radius `r = fraction·τ`, never below `min_r`.
    Moving { fraction: f64, min_r: f64 },
}

impl Observer {
    pub fn radius_at(&self, tau: f64, chart: &BackgroundChart) -> f64 {
        let m = chart.mass();
        match *self {
            Observer::Scri => f64::INFINITY,
            Observer::Horizon => 2.0 * m,
            Observer::Radius { r } => r,
            Observer::Moving { fraction, min_r } => (fraction * tau).max(min_r),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Observer::Scri => "scri".into(),
            Observer::Horizon => "horizon".into(),
            Observer::Radius { r } => format!("r{r}"),
            Observer::Moving { fraction, .. } => format!("r{fraction}tau"),
        }
    }

    fn validate(&self, m: f64) -> Result<()> {
        match *self {
            Observer::Radius { r } if !(r >= 2.0 * m) => {
                Err(Error::Config(format!("observer radius {r} is inside the horizon")))
            }
            Observer::Moving { fraction, min_r } if !(fraction > 0.0 && min_r >= 2.0 * m) => {
                Err(Error::Config("moving observer needs fraction > 0 and min_r >= 2M".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Number of σ intervals (the grid has `n + 1` nodes).
    pub n: usize,
    pub cfl: f64,
    pub ko_eps: f64,
    pub tau_end: f64,
    /// Output cadence in units of τ.
    pub output_every: f64,
    #[serde(default)]
    pub observers: Vec<Observer>,
}

pub const MIN_EVOLUTION_NODES: usize = 64;

impl EvolutionConfig {
    pub fn validate(&self, m: f64) -> Result<()> {
        if self.n < MIN_EVOLUTION_NODES || self.n % 2 != 0 {
            return Err(Error::Config(format!("n must be even and >= {MIN_EVOLUTION_NODES}, got {}", self.n)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Config(format!("cfl must lie in (0, 0.5], got {}", self.cfl)));
        }
        if !(self.ko_eps >= 0.0 && self.ko_eps <= 0.5) {
            return Err(Error::Config(format!("ko_eps must lie in [0, 0.5], got {}", self.ko_eps)));
        }
        if !(self.tau_end.is_finite() && self.output_every > 0.0) {
            return Err(Error::Config("tau_end must be finite and output_every positive".into()));
        }
        for o in &self.observers {
            o.validate(m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDataSpec {
    /// `A = 0`, `B = amplitude·exp(−(ρ−center)²/width²)` times a smooth
    /// window equal to 1 on `|ρ−center| ≤ 3·width` and 0 beyond `5·width`.
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    /// `B = 0`, `Φ⁽¹⁾ = −n_target·(σ/2M)·χ(ρ)` with a smooth cutoff χ rising
    /// from 0 at `cutoff_radius/2` to 1 at `cutoff_radius`.
    NpTail { n_target: f64, cutoff_radius: f64 },
    /// Radiation fields given on a uniform σ table (resampled to the grid).
    CustomTable {
        psi_plus_re: Vec<f64>,
        psi_plus_im: Vec<f64>,
        psi_minus_re: Vec<f64>,
        psi_minus_im: Vec<f64>,
    },
}

/// Half-width of the gaussian window in units of the width.
pub const GAUSSIAN_SUPPORT: f64 = 5.0;

pub fn make_initial_data(spec: &InitialDataSpec, chart: &BackgroundChart, mode: ModeIndex) -> Result<ModeState> {
    let m = chart.mass();
    let n = chart.n;
    let mut st = ModeState::zeros(mode, n);
    match spec {
        InitialDataSpec::GaussianBump { center, width, amplitude } => {
            let (c, w) = (*center, *width);
            let outer = c + GAUSSIAN_SUPPORT * w;
            if !(w > 0.0 && c.is_finite() && outer.is_finite() && amplitude.is_finite()) {
                return Err(Error::Config("gaussian bump needs finite center/amplitude and positive width".into()));
            }
            for i in 1..=n {
                let rho = chart.rho[i];
                let window = smooth_step((rho - c + GAUSSIAN_SUPPORT * w) / (2.0 * w))
                    * smooth_step((c + GAUSSIAN_SUPPORT * w - rho) / (2.0 * w));
                if window > 0.0 {
                    let b = amplitude * (-((rho - c) / w).powi(2)).exp() * window;
                    st.psi_minus[i] = Complex64::new(rho * b, 0.0);
                }
            }
        }
        InitialDataSpec::NpTail { n_target, cutoff_radius } => {
            let rc = *cutoff_radius;
            if !(rc > 4.0 * m && rc.is_finite() && n_target.is_finite()) {
                return Err(Error::Config("np_tail needs a finite cutoff radius above 4M".into()));
            }
            for i in 0..=n {
                let s = chart.sigma[i];
                let chi = if i == 0 { 1.0 } else { smooth_step((chart.rho[i] - 0.5 * rc) / (0.5 * rc)) };
                let phi1 = -n_target * s / (2.0 * m) * chi;
                st.psi_plus[i] = Complex64::new(chart.mu[i].sqrt() * phi1, 0.0);
            }
        }
        InitialDataSpec::CustomTable { psi_plus_re, psi_plus_im, psi_minus_re, psi_minus_im } => {
            let len = psi_plus_re.len();
            if len < 6 || [psi_plus_im.len(), psi_minus_re.len(), psi_minus_im.len()].iter().any(|&l| l != len) {
                return Err(Error::Config("custom table columns must share a length of at least 6".into()));
            }
            let h = 1.0 / (len - 1) as f64;
            for i in 0..=n {
                let s = chart.sigma[i];
                st.psi_plus[i] = Complex64::new(interp_uniform(psi_plus_re, h, s), interp_uniform(psi_plus_im, h, s));
                st.psi_minus[i] = Complex64::new(interp_uniform(psi_minus_re, h, s), interp_uniform(psi_minus_im, h, s));
            }
        }
    }
    st.check_finite()?;
    Ok(st)
}

/// Precomputed coefficients of the first-order system for one mode.
#[derive(Debug, Clone)]
pub struct Evolver {
    pub mode: ModeIndex,
    pub ko_eps: f64,
    dsigma: f64,
    speed: f64,
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    b3: Vec<f64>,
    ko_plus: Vec<f64>,
    ko_minus: Vec<f64>,
    work: Work,
}

#[derive(Debug, Clone, Default)]
struct Work {
    dp: Vec<Complex64>,
    dm: Vec<Complex64>,
    k: [(Vec<Complex64>, Vec<Complex64>); 4],
    yp: Vec<Complex64>,
    ym: Vec<Complex64>,
}

/// Boundary outflows `(|A(σ=1)|², |Ψ₋(σ=0)|²)`.
pub fn boundary_flux_of(psi_plus: &[Complex64], psi_minus: &[Complex64], mass: f64) -> (f64, f64) {
    let n = psi_plus.len() - 1;
    (psi_plus[n].norm_sqr() / (4.0 * mass * mass), psi_minus[0].norm_sqr())
}

impl Evolver {
    pub fn new(chart: &BackgroundChart, mode: ModeIndex, ko_eps: f64) -> Self {
        let m = chart.mass();
        let l = mode.ell as f64;
        let n = chart.n;
        let mut e = Evolver {
            mode,
            ko_eps,
            dsigma: chart.dsigma,
            speed: chart.max_speed(),
            a1: Vec::with_capacity(n + 1),
            a2: Vec::with_capacity(n + 1),
            a3: Vec::with_capacity(n + 1),
            b1: Vec::with_capacity(n + 1),
            b2: Vec::with_capacity(n + 1),
            b3: Vec::with_capacity(n + 1),
            ko_plus: Vec::new(),
            ko_minus: Vec::new(),
            work: Work::default(),
        };
        for i in 0..=n {
            let s = chart.sigma[i];
            let dh = chart.dh[i];
            let dhh = chart.delta_h[i];
            e.a1.push(-s * s / (2.0 * m * dh));
            e.a2.push(-s / (2.0 * m * dh));
            e.a3.push(-l / dh);
            e.b1.push(2.0 * m * (1.0 - s) / dhh);
            e.b2.push(l / dhh);
            e.b3.push(-m / dhh);
        }
        // Each field is damped at its own characteristic speed. Ψ₊ is nearly
        // frozen near null infinity, where a global-speed filter would drain N₁.
        e.ko_plus = e.a1.iter().map(|v| ko_eps * v.abs() / e.dsigma).collect();
        e.ko_minus = e.b1.iter().map(|v| ko_eps * v.abs() / e.dsigma).collect();
        let z = vec![ZERO; n + 1];
        e.work = Work {
            dp: z.clone(),
            dm: z.clone(),
            k: [(z.clone(), z.clone()), (z.clone(), z.clone()), (z.clone(), z.clone()), (z.clone(), z.clone())],
            yp: z.clone(),
            ym: z,
        };
        e
    }

    /// Largest characteristic σ-speed.
    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Largest stable step for a Courant factor.
    pub fn max_dt(&self, cfl: f64) -> f64 {
        cfl * self.dsigma / self.speed
    }

    fn rhs_raw(&self, pp: &[Complex64], pm: &[Complex64], dp: &mut [Complex64], dm: &mut [Complex64], op: &mut [Complex64], om: &mut [Complex64]) {
        d1(pp, self.dsigma, dp);
        d1(pm, self.dsigma, dm);
        for i in 0..pp.len() {
            op[i] = dp[i] * self.a1[i] + pp[i] * self.a2[i] + pm[i] * self.a3[i];
            om[i] = dm[i] * self.b1[i] + pp[i] * self.b2[i] + pm[i] * self.b3[i];
        }
    }

    /// `(∂_τΨ₊, ∂_τΨ₋)` from the field equations alone (no dissipation).
    pub fn rhs(&self, state: &ModeState) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = state.len();
        let (mut dp, mut dm) = (vec![ZERO; n], vec![ZERO; n]);
        let (mut op, mut om) = (vec![ZERO; n], vec![ZERO; n]);
        self.rhs_raw(&state.psi_plus, &state.psi_minus, &mut dp, &mut dm, &mut op, &mut om);
        (op, om)
    }

    /// The state `∂_τ X` as a [`ModeState`].
    pub fn time_derivative(&self, state: &ModeState) -> ModeState {
        let (p, m) = self.rhs(state);
        ModeState { mode: state.mode, tau: state.tau, psi_plus: p, psi_minus: m }
    }

    fn stage(&mut self, idx: usize) {
        let w = &mut self.work;
        let (op, om) = &mut w.k[idx];
        let (pp, pm) = (&w.yp, &w.ym);
        d1(pp, self.dsigma, &mut w.dp);
        d1(pm, self.dsigma, &mut w.dm);
        for i in 0..pp.len() {
            op[i] = w.dp[i] * self.a1[i] + pp[i] * self.a2[i] + pm[i] * self.a3[i];
            om[i] = w.dm[i] * self.b1[i] + pp[i] * self.b2[i] + pm[i] * self.b3[i];
        }
        if self.ko_eps != 0.0 {
            add_dissipation(pp, &self.ko_plus, op);
            add_dissipation(pm, &self.ko_minus, om);
        }
    }

    /// One classical RK4 step. Returns `(∫|Ψ₊(σ=1)|², ∫|Ψ₋(σ=0)|²)` over the
    /// step, integrated with the same Runge–Kutta weights as the field.
    pub fn step(&mut self, state: &mut ModeState, dt: f64) -> (f64, f64) {
        let n = state.len();
        let mut fh = [0.0; 4];
        let mut fs = [0.0; 4];
        let coef = [0.0, 0.5, 0.5, 1.0];
        for st in 0..4 {
            {
                let w = &mut self.work;
                if st == 0 {
                    w.yp.copy_from_slice(&state.psi_plus);
                    w.ym.copy_from_slice(&state.psi_minus);
                } else {
                    let (kp, km) = &w.k[st - 1];
                    let c = coef[st] * dt;
                    for i in 0..n {
                        w.yp[i] = state.psi_plus[i] + kp[i] * c;
                        w.ym[i] = state.psi_minus[i] + km[i] * c;
                    }
                }
                fh[st] = w.yp[n - 1].norm_sqr();
                fs[st] = w.ym[0].norm_sqr();
            }
            self.stage(st);
        }
        let w = &self.work;
        for i in 0..n {
            state.psi_plus[i] += (w.k[0].0[i] + (w.k[1].0[i] + w.k[2].0[i]) * 2.0 + w.k[3].0[i]) * (dt / 6.0);
            state.psi_minus[i] += (w.k[0].1[i] + (w.k[1].1[i] + w.k[2].1[i]) * 2.0 + w.k[3].1[i]) * (dt / 6.0);
        }
        state.tau += dt;
        let rk = |f: [f64; 4]| (f[0] + 2.0 * (f[1] + f[2]) + f[3]) * dt / 6.0;
        (rk(fh), rk(fs))
    }
}

/// Everything a diagnostic sink may look at during a run.
pub struct Snapshot<'a> {
    pub state: &'a ModeState,
    pub chart: &'a BackgroundChart,
    pub evolver: &'a Evolver,
    pub step: usize,
    /// `∫ |A(σ=1)|² dτ` since the start of the run.
    pub flux_horizon_cum: f64,
    /// `∫ |Ψ₋(σ=0)|² dτ` since the start of the run.
    pub flux_scri_cum: f64,
}

pub trait Sink {
    fn record(&mut self, snap: &Snapshot<'_>) -> Result<()>;
}

impl<F: FnMut(&Snapshot<'_>) -> Result<()>> Sink for F {
    fn record(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self(snap)
    }
}

/// Step sizes used by [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
}

pub fn schedule(config: &EvolutionConfig, tau0: f64, max_dt: f64) -> Schedule {
    let span = config.tau_end - tau0;
    if span <= 0.0 {
        return Schedule { dt: 0.0, steps: 0, stride: 1 };
    }
    let steps = (span / max_dt).ceil() as usize;
    let dt = span / steps as f64;
    let stride = ((config.output_every / dt).round() as usize).max(1);
    Schedule { dt, steps, stride }
}

/// Runs the evolution to `config.tau_end`, calling every sink at `τ₀`, at
/// each output time and at the final time.
pub fn integrate(
    state0: ModeState,
    config: &EvolutionConfig,
    chart: &BackgroundChart,
    sinks: &mut [&mut dyn Sink],
) -> Result<ModeState> {
    config.validate(chart.mass())?;
    if state0.len() != chart.n + 1 {
        return Err(Error::Config(format!("state has {} nodes, chart has {}", state0.len(), chart.n + 1)));
    }
    state0.check_finite()?;
    let mut ev = Evolver::new(chart, state0.mode, config.ko_eps);
    let sch = schedule(config, state0.tau, ev.max_dt(config.cfl));
    let tau0 = state0.tau;
    let mut state = state0;
    let m = chart.mass();
    let (mut fh, mut fs) = (0.0, 0.0);
    let emit = |state: &ModeState, ev: &Evolver, step: usize, fh: f64, fs: f64, sinks: &mut [&mut dyn Sink]| {
        let snap = Snapshot { state, chart, evolver: ev, step, flux_horizon_cum: fh, flux_scri_cum: fs };
        sinks.iter_mut().try_for_each(|s| s.record(&snap))
    };
    emit(&state, &ev, 0, fh, fs, sinks)?;
    for k in 1..=sch.steps {
        let (dh, ds) = ev.step(&mut state, sch.dt);
        fh += dh / (4.0 * m * m);
        fs += ds;
        // Pin τ to avoid drift from repeated addition.
        state.tau = tau0 + k as f64 * sch.dt;
        if k % sch.stride == 0 || k == sch.steps {
            state.check_finite()?;
            emit(&state, &ev, k, fh, fs, sinks)?;
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scalar {
    /// `ψ_𝔰` coefficient `A`
    PsiPlus,
    /// `ψ_{−𝔰}` coefficient `B`
    PsiMinus,
    /// `Φ_𝔰 = A`
    PhiPlus,
    /// `Φ_{−𝔰} = Δ^{1/2}B`
    PhiMinus,
    /// `Ψ₊ = ρA`
    RadPlus,
    /// `Ψ₋ = ρB`
    RadMinus,
    /// `Φ⁽¹⁾ = μ^{−1/2}ρA` (non-finite at the horizon unless `A` vanishes there)
    Phi1,
    /// `φ_𝔰 = A/(ρ−M)`
    PhiS,
}

fn scalar_from(which: Scalar, sigma: f64, m: f64, pp: Complex64, pm: Complex64) -> Complex64 {
    let mu = 1.0 - sigma;
    let inv_rho = sigma / (2.0 * m);
    match which {
        Scalar::PsiPlus | Scalar::PhiPlus => pp * inv_rho,
        Scalar::PsiMinus => pm * inv_rho,
        Scalar::PhiMinus => pm * mu.sqrt(),
        Scalar::RadPlus => pp,
        Scalar::RadMinus => pm,
        Scalar::Phi1 => pp / mu.sqrt(),
        // A/(ρ−M) = Ψ₊/(ρ(ρ−M)) = Ψ₊σ²/(2M²(2−σ))
        Scalar::PhiS => pp * (sigma * sigma / (2.0 * m * m * (2.0 - sigma))),
    }
}

/// Pointwise rescaling of the evolved fields.
pub fn derived_scalar(state: &ModeState, chart: &BackgroundChart, which: Scalar) -> Vec<Complex64> {
    let m = chart.mass();
    (0..state.len())
        .map(|i| scalar_from(which, chart.sigma[i], m, state.psi_plus[i], state.psi_minus[i]))
        .collect()
}

/// A derived scalar at an arbitrary radius, by interpolation of `Ψ±`.
pub fn sample_scalar(state: &ModeState, chart: &BackgroundChart, r: f64, which: Scalar) -> Complex64 {
    let m = chart.mass();
    let sigma = if r.is_infinite() { 0.0 } else { (2.0 * m / r).min(1.0) };
    let pp = interp_uniform(&state.psi_plus, chart.dsigma, sigma);
    let pm = interp_uniform(&state.psi_minus, chart.dsigma, sigma);
    scalar_from(which, sigma, m, pp, pm)
}

/// Residual of the mode-reduced Teukolsky equation for `Φ_𝔰 = A`,
/// `−r²Y(μV̂A) − ℓ²A − (r−3M)YA`, divided by `r²`. Time derivatives come
/// from the first-order system.
pub fn tme_residual(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> Vec<Complex64> {
    let m = chart.mass();
    let h = chart.dsigma;
    let l2 = (state.mode.ell as f64).powi(2);
    let s1 = ev.time_derivative(state);
    let s2 = ev.time_derivative(&s1);
    let a = state.a(chart);
    let at = s1.a(chart);
    let att = s2.a(chart);
    let w = &chart.drho_weight;
    let a_r: Vec<Complex64> = deriv(&a, h).iter().zip(w).map(|(d, w)| d * w).collect();
    let at_r: Vec<Complex64> = deriv(&at, h).iter().zip(w).map(|(d, w)| d * w).collect();
    // X = μV̂A = μ∂_ρA + (μH)∂_τA
    let x: Vec<Complex64> = (0..a.len()).map(|i| a_r[i] * chart.mu[i] + at[i] * chart.mu_h[i]).collect();
    let x_r: Vec<Complex64> = deriv(&x, h).iter().zip(w).map(|(d, w)| d * w).collect();
    (0..a.len())
        .map(|i| {
            let s = chart.sigma[i];
            let inv_r2 = s * s / (4.0 * m * m);
            let r_minus_3m_over_r2 = s / (2.0 * m) - 3.0 * m * inv_r2;
            let dh = chart.dh[i];
            let y_x = -x_r[i] + (at_r[i] * chart.mu[i] + att[i] * chart.mu_h[i]) * dh;
            let y_a = -a_r[i] + at[i] * dh;
            -y_x - a[i] * (l2 * inv_r2) - y_a * r_minus_3m_over_r2
        })
        .collect()
}
