//! Late-time profile coefficients, the `Φ⁽ⁱ⁾` ladder, the time integral of
//! an `ℓ = 1` mode and predicted tail profiles.

use crate::background::BackgroundChart;
use crate::diagnostics::np_constant;
use crate::error::{Error, Result};
use crate::evolve::{Evolver, ModeState};
use crate::stencil::{cumulative_integral, d1, deriv, extrapolate};
use crate::swsh::{eigenvalue_lambda, ModeIndex, SpinWeight};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which spin component a profile refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `+𝔰`: the scalar `φ_𝔰 = (r−M)⁻¹ψ_𝔰`
    Plus,
    /// `−𝔰`: the scalar `ψ_{−𝔰}`
    Minus,
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn double_sum(j: u32, x: f64) -> f64 {
    (0..=j).map(|n| (0..=n).map(|i| x.powi((j - i) as i32)).sum::<f64>()).sum()
}

fn sign_factorial(j: u32) -> f64 {
    4.0 * if j % 2 == 0 { 1.0 } else { -1.0 } * factorial(j)
}

/// Profile coefficient `c_{±𝔰,j}` as a function of `x = τ/v`, in the
/// published closed form.
pub fn c_coeff(branch: Branch, j: u32, x: f64) -> f64 {
    let pre = sign_factorial(j);
    match branch {
        Branch::Plus => pre * double_sum(j, x),
        Branch::Minus => {
            let single: f64 = (0..=j).map(|n| x.powi((j - n) as i32)).sum();
            let jf = j as f64;
            pre * ((jf + 2.0) * single - double_sum(j, x) + (jf + 1.0) * (x.powi(j as i32) - x.powi(j as i32 + 2)))
        }
    }
}

/// `c_{−𝔰,j}` assembled directly from its three contributions
/// `(j+1)(j+2)x^{j+2} − x S_j + (j+1)(1−x) S_{j+1}`, `S_j` the double sum.
///
/// Agrees with [`c_coeff`] at `x = 1` for every `j` but not in between:
/// for `j = 0` it is identically 4, where the closed form gives `4(2−x²)`.
/// Evolutions follow this form at null infinity.
pub fn c_minus_expanded(j: u32, x: f64) -> f64 {
    let jf = j as f64;
    sign_factorial(j)
        * ((jf + 1.0) * (jf + 2.0) * x.powi(j as i32 + 2) - x * double_sum(j, x)
            + (jf + 1.0) * (1.0 - x) * double_sum(j + 1, x))
}

/// Coefficient tables of the `Φ⁽ⁱ⁾` ladder, indexed from `i = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCoefficients {
    pub i_max: u32,
    /// `f_{i,1} = i²`
    pub f1: Vec<f64>,
    /// `f_{i,2} = −2i−1`
    pub f2: Vec<f64>,
    /// `g_i = i(i−1)(2i−1)`
    pub g: Vec<f64>,
    /// Lower-triangular `x[i][j]`, `1 ≤ j < i`; other entries are zero.
    pub x: Vec<Vec<f64>>,
}

pub const MAX_LADDER_ORDER: u32 = 6;

pub fn ladder_coeffs(i_max: u32) -> Result<LadderCoefficients> {
    if i_max > MAX_LADDER_ORDER {
        return Err(Error::Domain(format!("ladder order {i_max} exceeds {MAX_LADDER_ORDER}")));
    }
    let n = i_max as usize + 1;
    let f1: Vec<f64> = (0..n).map(|i| (i * i) as f64).collect();
    let f2: Vec<f64> = (0..n).map(|i| -2.0 * i as f64 - 1.0).collect();
    let g: Vec<f64> = (0..n).map(|i| (i as f64) * (i as f64 - 1.0) * (2.0 * i as f64 - 1.0)).collect();
    let mut x = vec![vec![0.0; n]; n];
    for i in 1..n.saturating_sub(1) {
        x[i + 1][i] = (i * (i + 1)) as f64;
        for j in 1..i {
            x[i + 1][j] = -g[i + 1] * x[i][j] / (f1[i + 1] - f1[j]);
        }
    }
    Ok(LadderCoefficients { i_max, f1, f2, g, x })
}

/// Highest ladder order available from [`phi_ladder`].
pub const MAX_PHI_ORDER: u32 = 3;

/// Advisory for orders whose accuracy needs a finer grid.
pub fn ladder_accuracy_warning(i: u32, n: usize) -> Option<String> {
    (i >= 3 && n < 2048).then(|| format!("order {i} stacks several numerical derivatives; N = {n} < 2048 is coarse"))
}

/// `τ`-jet of one field on nodes `0..=cut`: `jet[k] = ∂_τ^k X`.
type Jet = Vec<Vec<Complex64>>;

/// Applies `𝒱̂ = −2M∂_σ + ρ²H ∂_τ` to a jet, shortening it by one.
fn vhat_jet(jet: &Jet, chart: &BackgroundChart) -> Jet {
    let m = chart.mass();
    (0..jet.len() - 1)
        .map(|k| {
            let mut d = vec![Complex64::default(); jet[k].len()];
            d1(&jet[k], chart.dsigma, &mut d);
            (0..d.len()).map(|i| d[i] * (-2.0 * m) + jet[k + 1][i] * chart.rho2_h[i]).collect()
        })
        .collect()
}

/// Largest node with `σ ≤ ½` (`ρ ≥ 4M`); the ladder lives there.
fn ladder_cut(chart: &BackgroundChart) -> usize {
    chart.n / 2
}

/// `τ`-jets of `Ψ±` of length `order + 1`.
fn state_jets(state: &ModeState, ev: &Evolver, order: usize) -> Vec<ModeState> {
    let mut out = vec![state.clone()];
    for _ in 0..order {
        let next = ev.time_derivative(out.last().unwrap());
        out.push(next);
    }
    out
}

/// The jets of `Φ⁽ⁱ⁾` for `i = 0..=i_max` (`Φ⁽⁰⁾` unused, left empty),
/// each carrying `extra` time derivatives.
fn ladder_jets(state: &ModeState, chart: &BackgroundChart, ev: &Evolver, branch: Branch, i_max: u32, extra: usize) -> Vec<Jet> {
    let cut = ladder_cut(chart);
    let depth = i_max as usize + extra;
    let jets = state_jets(state, ev, depth);
    let first: Jet = match branch {
        // Φ⁽¹⁾ = μ^{−1/2}Ψ₊
        Branch::Plus => jets.iter().map(|s| (0..=cut).map(|i| s.psi_plus[i] / chart.mu[i].sqrt()).collect()).collect(),
        // Φ₋⁽¹⁾ = 𝒱̂Φ₋ with Φ₋ = Δ^{1/2}B = μ^{1/2}Ψ₋
        Branch::Minus => {
            let base: Jet = jets.iter().map(|s| (0..=cut).map(|i| s.psi_minus[i] * chart.mu[i].sqrt()).collect()).collect();
            vhat_jet(&base, chart)
        }
    };
    let mut out: Vec<Jet> = vec![Vec::new(), first];
    for _ in 2..=i_max {
        let next = vhat_jet(out.last().unwrap(), chart);
        out.push(next);
    }
    out
}

/// `Φ_𝔰⁽ⁱ⁾ = 𝒱̂^{i−1}Φ_𝔰⁽¹⁾` (plus branch) or `Φ_{−𝔰}⁽ⁱ⁾ = 𝒱̂^iΦ_{−𝔰}`
/// (minus branch) on the nodes with `ρ ≥ 4M`. Time derivatives come from
/// repeated application of the evolution operator.
pub fn phi_ladder(state: &ModeState, chart: &BackgroundChart, ev: &Evolver, branch: Branch, i: u32) -> Result<Vec<Complex64>> {
    if i == 0 || i > MAX_PHI_ORDER {
        return Err(Error::Domain(format!("ladder order {i} outside 1..={MAX_PHI_ORDER}")));
    }
    let jets = ladder_jets(state, chart, ev, branch, i, 0);
    Ok(jets[i as usize][0].clone())
}

/// Residual of the mode-reduced `Φ⁽ⁱ⁾` equation
/// `−2∂_u𝒱̂Φ⁽ⁱ⁾ + (−ℓ² + f_{i,1})Φ⁽ⁱ⁾ + f_{i,2}(r−3M)r⁻²𝒱̂Φ⁽ⁱ⁾
///  − 6f_{i,1}Mr⁻¹Φ⁽ⁱ⁾ + g_iMΦ⁽ⁱ⁻¹⁾` with `∂_u = ½μY`, on `ρ ≥ 4M`.
pub fn ladder_residual(state: &ModeState, chart: &BackgroundChart, ev: &Evolver, branch: Branch, i: u32) -> Result<Vec<Complex64>> {
    if i == 0 || i > MAX_PHI_ORDER {
        return Err(Error::Domain(format!("ladder order {i} outside 1..={MAX_PHI_ORDER}")));
    }
    let m = chart.mass();
    let c = ladder_coeffs(i)?;
    let iu = i as usize;
    let jets = ladder_jets(state, chart, ev, branch, i, 2);
    let x = &jets[iu];
    let w = vhat_jet(x, chart);
    let mut dw = vec![Complex64::default(); w[0].len()];
    d1(&w[0], chart.dsigma, &mut dw);
    // ðð′ and ð′ð both act as −ℓ² on the ±½ harmonics.
    let angular = -eigenvalue_lambda(SpinWeight::PLUS_HALF, state.mode.ell);
    Ok((0..w[0].len())
        .map(|k| {
            let s = chart.sigma[k];
            let mu = chart.mu[k];
            let inv_r = s / (2.0 * m);
            // Y = −∂_ρ + ∂_r h ∂_τ with ∂_ρ = −(σ²/2M)∂_σ.
            let y_w = dw[k] * (s * s / (2.0 * m)) + w[1][k] * chart.dh[k];
            let mut r = -(y_w * mu) + x[0][k] * (angular + c.f1[iu]) + w[0][k] * (c.f2[iu] * (inv_r - 3.0 * m * inv_r * inv_r))
                - x[0][k] * (6.0 * c.f1[iu] * m * inv_r);
            if iu >= 2 {
                r += jets[iu - 1][0][k] * (c.g[iu] * m);
            }
            r
        })
        .collect())
}

/// `μ^{1/2}H̃_𝔰(Φ_𝔰)` on all nodes, finite on `σ ∈ [0, 1]`. With
/// `Φ_𝔰 = A = Ψ₊/ρ` it equals `(r−M)P`,
/// `P = ∂_r h(μH)∂_τΨ₊ − (σ/M)(μ∂_r h − 1)(Ψ₊ + σ∂_σΨ₊) + σ(2−σ)∂_r hΨ₊/(4M) + μ∂²_r hΨ₊`.
pub fn tilde_h_regularized(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> Vec<Complex64> {
    let m = chart.mass();
    let (dt, _) = ev.rhs(state);
    let ds = deriv(&state.psi_plus, chart.dsigma);
    (0..=chart.n)
        .map(|i| {
            let s = chart.sigma[i];
            let mu = chart.mu[i];
            let dh = chart.dh[i];
            let p = state.psi_plus[i];
            let val = dt[i] * (dh * chart.mu_h[i]) - (p + ds[i] * s) * (s / m * (mu * dh - 1.0))
                + p * (s * (2.0 - s) * dh / (4.0 * m) + mu * chart.d2h[i]);
            // r − M = M(2−σ)/σ; the bracket vanishes like σ² at σ = 0.
            if i == 0 {
                Complex64::default()
            } else {
                val * chart.r_minus_m[i]
            }
        })
        .collect()
}

/// `H̃_𝔰(Φ_𝔰)` on nodes `0..n` (the horizon node, where it has an
/// integrable `μ^{−1/2}` singularity, is omitted).
pub fn tilde_h(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> Vec<Complex64> {
    let k = tilde_h_regularized(state, chart, ev);
    (0..chart.n).map(|i| k[i] / chart.mu[i].sqrt()).collect()
}

/// Relative tolerance on the integrability condition.
pub const INTEGRABILITY_TOL: f64 = 1e-6;

/// Nodes used for extrapolating to σ = 0.
const EXTRAP: std::ops::RangeInclusive<usize> = 3..=10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegralResult {
    pub tau0: f64,
    pub sigma: Vec<f64>,
    /// `g_𝔰`, with `∂_τ g_𝔰 = Φ_𝔰`.
    pub g_plus: Vec<Complex64>,
    /// `g_{−𝔰} = −Y g_𝔰`
    pub g_minus: Vec<Complex64>,
    /// `ρ g_𝔰`
    pub rad_plus: Vec<Complex64>,
    /// `ρ g_{−𝔰}`
    pub rad_minus: Vec<Complex64>,
    /// `I(ρ) = ∫_{2M}^ρ H̃_𝔰 dρ′` on the σ nodes.
    pub integral: Vec<Complex64>,
    pub integral_total: Complex64,
    pub d1_tilde: Complex64,
    /// `M·I(∞) − (2/3)D̃₁`
    pub n1_prime: Complex64,
    /// `lim ρ²V̂(μ^{−1/2}ρ g_𝔰)` evaluated at the grid endpoint.
    pub n1_prime_direct: Complex64,
    /// `|−2 lim ρg_𝔰 − I(∞)| / |I(∞)|`
    pub integrability_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegralReport {
    pub tau0: f64,
    pub integral_total: Complex64,
    pub d1_tilde: Complex64,
    pub n1_prime: Complex64,
    pub n1_prime_direct: Complex64,
    pub integrability_residual: f64,
    pub warnings: Vec<String>,
}

impl TimeIntegralResult {
    pub fn report(&self) -> TimeIntegralReport {
        TimeIntegralReport {
            tau0: self.tau0,
            integral_total: self.integral_total,
            d1_tilde: self.d1_tilde,
            n1_prime: self.n1_prime,
            n1_prime_direct: self.n1_prime_direct,
            integrability_residual: self.integrability_residual,
            warnings: self.warnings.clone(),
        }
    }

    /// Fails with both sides of the integrability condition when it is violated.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.integrability_residual > tol {
            let lim = self.integral_total * (1.0 - self.integrability_residual);
            return Err(Error::Numerical(format!(
                "integrability condition fails: I(inf) = {}, limit side ~ {} (relative residual {:.3e})",
                self.integral_total, lim, self.integrability_residual
            )));
        }
        Ok(())
    }

    /// `(ρg_𝔰, ρg_{−𝔰})` as Dirac data at `τ₀`.
    pub fn as_state(&self, mode: ModeIndex) -> ModeState {
        ModeState { mode, tau: self.tau0, psi_plus: self.rad_plus.clone(), psi_minus: self.rad_minus.clone() }
    }
}

fn lagrange_deriv(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let mut acc = Complex64::default();
    for j in 0..xs.len() {
        let mut lj = 1.0;
        let mut sum = 0.0;
        for k in 0..xs.len() {
            if k != j {
                lj *= (x - xs[k]) / (xs[j] - xs[k]);
                sum += 1.0 / (x - xs[k]);
            }
        }
        acc += ys[j] * (lj * sum);
    }
    acc
}

fn extrapolate_c(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let re: Vec<f64> = ys.iter().map(|v| v.re).collect();
    let im: Vec<f64> = ys.iter().map(|v| v.im).collect();
    Complex64::new(extrapolate(xs, &re, x), extrapolate(xs, &im, x))
}

fn cumulative_c(xs: &[f64], ys: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = ys.iter().map(|v| v.re).collect();
    let im: Vec<f64> = ys.iter().map(|v| v.im).collect();
    cumulative_integral(xs, &re).into_iter().zip(cumulative_integral(xs, &im)).map(|(a, b)| Complex64::new(a, b)).collect()
}

/// Time integral of an `ℓ = 1` mode on the slice `τ = state.tau`.
///
/// `I(ρ)` is accumulated from the horizon in `w = √(1−σ)` (equivalently
/// `√(ρ−2M)` up to a smooth factor), which makes the integrand smooth. Then
/// `∂_ρ((r−M)⁻¹g_𝔰) = I/((r−M)²Δ^{1/2})` is integrated from null infinity
/// with `(r−M)⁻¹g_𝔰 = 0` there.
pub fn time_integral(state: &ModeState, chart: &BackgroundChart, ev: &Evolver) -> Result<TimeIntegralResult> {
    if state.mode.ell != 1 {
        return Err(Error::Domain(format!("time integral needs an l = 1 mode, got l = {}", state.mode.ell)));
    }
    let m = chart.mass();
    let n = chart.n;
    let sig = &chart.sigma;
    let mut warnings = Vec::new();
    let np = np_constant(state, chart, ev);
    if !np.d1_reliable {
        warnings.push(format!("N1 = {} does not vanish; the time integral is not expected to be regular", np.n1));
    }

    // F(w) = 4M K/σ², K = μ^{1/2}H̃; its σ → 0 value is a 0/0 limit.
    let k = tilde_h_regularized(state, chart, ev);
    let mut f: Vec<Complex64> = (0..=n).map(|i| if i == 0 { Complex64::default() } else { k[i] * (4.0 * m / (sig[i] * sig[i])) }).collect();
    let xs: Vec<f64> = EXTRAP.map(|i| sig[i]).collect();
    f[0] = extrapolate_c(&xs, &f[EXTRAP], 0.0);

    // Ascending w runs from the horizon (σ = 1) to null infinity.
    let w: Vec<f64> = (0..=n).rev().map(|i| (1.0 - sig[i]).max(0.0).sqrt()).collect();
    let fw: Vec<Complex64> = (0..=n).rev().map(|i| f[i]).collect();
    let iw = cumulative_c(&w, &fw);
    let integral: Vec<Complex64> = (0..=n).map(|i| iw[n - i]).collect();
    let integral_total = integral[0];

    // J = (I/w) σ / (M²(2−σ)²), with I/w → F at the horizon.
    let j: Vec<Complex64> = (0..=n)
        .map(|i| {
            let s = sig[i];
            let iow = if i == n { f[n] } else { integral[i] / (1.0 - s).sqrt() };
            iow * (s / (m * m * (2.0 - s) * (2.0 - s)))
        })
        .collect();
    // G = (ρ−M)⁻¹ g_𝔰 = −∫₀^σ J.
    let big_g: Vec<Complex64> = cumulative_c(sig, &j).into_iter().map(|v| -v).collect();

    let mut g_plus = vec![Complex64::default(); n + 1];
    let mut rad_plus = vec![Complex64::default(); n + 1];
    for i in 1..=n {
        let s = sig[i];
        g_plus[i] = big_g[i] * (m * (2.0 - s) / s);
        rad_plus[i] = big_g[i] * (2.0 * m * m * (2.0 - s) / (s * s));
    }
    let gamma0 = extrapolate_c(&xs, &rad_plus[EXTRAP], 0.0);
    let dgamma0 = lagrange_deriv(&xs, &rad_plus[EXTRAP], 0.0);
    rad_plus[0] = gamma0;

    // ρg_{−𝔰} = ρ∂_ρ g_𝔰 − ∂_r h Ψ₊ = −(σ/2M)(γ + σ∂_σγ) − ∂_r h Ψ₊.
    let dgamma = deriv(&rad_plus, chart.dsigma);
    let rad_minus: Vec<Complex64> = (0..=n)
        .map(|i| {
            let s = sig[i];
            -(rad_plus[i] + dgamma[i] * s) * (s / (2.0 * m)) - state.psi_plus[i] * chart.dh[i]
        })
        .collect();
    let g_minus: Vec<Complex64> = (0..=n).map(|i| rad_minus[i] * (sig[i] / (2.0 * m))).collect();

    // ρ²V̂(μ^{−1/2}γ) at σ = 0, with ∂_τγ = Ψ₊ and ρ²H → c0.
    let n1_prime_direct = (dgamma0 + gamma0 * 0.5) * (-2.0 * m) + state.psi_plus[0] * chart.rho2_h[0];
    let n1_prime = integral_total * m - np.d1_tilde * (2.0 / 3.0);
    let scale = integral_total.norm();
    let integrability_residual = if scale > 0.0 {
        (gamma0 * -2.0 - integral_total).norm() / scale
    } else {
        (gamma0 * 2.0).norm()
    };
    Ok(TimeIntegralResult {
        tau0: state.tau,
        sigma: sig.clone(),
        g_plus,
        g_minus,
        rad_plus,
        rad_minus,
        integral,
        integral_total,
        d1_tilde: np.d1_tilde,
        n1_prime,
        n1_prime_direct,
        integrability_residual,
        warnings,
    })
}

/// Whether the first Newman–Penrose constant is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpCase {
    /// Input constant is `N₁`.
    Nonvanishing,
    /// Input constant is the time-integral constant `N′₁`.
    Vanishing,
}

/// Leading late-time profile of one `ℓ = 1` mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePrediction {
    pub mode: ModeIndex,
    /// Number of `∂_τ` applied.
    pub j: u32,
    pub case: NpCase,
    pub constant: Complex64,
}

impl ProfilePrediction {
    fn order(&self) -> u32 {
        match self.case {
            NpCase::Nonvanishing => self.j,
            NpCase::Vanishing => self.j + 1,
        }
    }

    /// `∂_τ^j φ_𝔰 ≈ c_{𝔰,k}(τ/v) v⁻² τ^{−1−k} N`.
    pub fn plus(&self, tau: f64, v: f64) -> Complex64 {
        let k = self.order();
        self.constant * (c_coeff(Branch::Plus, k, tau / v) * v.powi(-2) * tau.powi(-1 - k as i32))
    }

    /// `∂_τ^j ψ_{−𝔰} ≈ c_{−𝔰,k}(τ/v) v⁻¹ τ^{−2−k} N`, with the expanded
    /// coefficient [`c_minus_expanded`].
    pub fn minus(&self, tau: f64, v: f64) -> Complex64 {
        let k = self.order();
        self.constant * (c_minus_expanded(k, tau / v) / v * tau.powi(-2 - k as i32))
    }

    /// As [`Self::minus`] with the closed-form coefficient [`c_coeff`].
    pub fn minus_closed_form(&self, tau: f64, v: f64) -> Complex64 {
        let k = self.order();
        self.constant * (c_coeff(Branch::Minus, k, tau / v) / v * tau.powi(-2 - k as i32))
    }

    /// Limit of `ρ ∂_τ^j ψ_{−𝔰}` at null infinity, where `ρ/v → ½`.
    pub fn minus_radiation_at_scri(&self, tau: f64) -> Complex64 {
        let k = self.order();
        self.constant * (0.5 * c_minus_expanded(k, 0.0) * tau.powi(-2 - k as i32))
    }

    /// As [`Self::minus_radiation_at_scri`] with the closed-form coefficient.
    pub fn minus_radiation_at_scri_closed_form(&self, tau: f64) -> Complex64 {
        let k = self.order();
        self.constant * (0.5 * c_coeff(Branch::Minus, k, 0.0) * tau.powi(-2 - k as i32))
    }
}

pub fn predicted_profile(mode: ModeIndex, j: u32, case: NpCase, constant: Complex64, branch: Branch, tau: f64, v: f64) -> Complex64 {
    let p = ProfilePrediction { mode, j, case, constant };
    match branch {
        Branch::Plus => p.plus(tau, v),
        Branch::Minus => p.minus(tau, v),
    }
}
