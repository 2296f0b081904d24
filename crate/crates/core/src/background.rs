//! Schwarzschild geometry on the hyperboloidal slices `τ = v − h(r)`.
//!
//! The radial coordinate is compactified as `σ = 2M/ρ`, so `σ = 0` is future
//! null infinity and `σ = 1` is the future event horizon. The slicing is
//! fixed by `∂_r h`, which equals 1 near the horizon, `μ⁻¹` on a middle region
//! (where `h = r*`) and `2μ⁻¹ − c0/r²` far out.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mass of the black hole in geometric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackHoleParams {
    pub mass: f64,
}

impl BlackHoleParams {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { mass })
    }
}

impl Default for BlackHoleParams {
    fn default() -> Self {
        Self { mass: 1.0 }
    }
}

/// Height-function profile. Radii are absolute (not in units of M).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicingProfile {
    /// `lim r² H` at null infinity.
    pub c0: f64,
    /// Window `[r_a, r_b]` where `∂_r h` goes from 1 to `μ⁻¹`.
    pub blend_inner: [f64; 2],
    /// Window `[R_a, R_b]` where `∂_r h` goes from `μ⁻¹` to `2μ⁻¹ − c0/r²`.
    pub blend_outer: [f64; 2],
}

impl SlicingProfile {
    pub fn default_for(mass: f64) -> Self {
        Self {
            c0: 4.0 * mass * mass,
            blend_inner: [2.2 * mass, 4.0 * mass],
            blend_outer: [20.0 * mass, 40.0 * mass],
        }
    }

    pub fn validate(&self, params: &BlackHoleParams) -> Result<()> {
        let m = params.mass;
        let [ra, rb] = self.blend_inner;
        let [big_ra, big_rb] = self.blend_outer;
        let ordered = 2.0 * m < ra && ra < rb && rb <= big_ra && big_ra < big_rb;
        if !(ordered && big_rb.is_finite()) {
            return Err(Error::Config(format!(
                "blend windows must satisfy 2M < r_a < r_b <= R_a < R_b < inf, got {:?} {:?}",
                self.blend_inner, self.blend_outer
            )));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::Config(format!("c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }
}

/// `f(x)/(f(x)+f(1−x))` with `f(x) = exp(−1/x)`: a C^∞ step that is flat to
/// all orders at 0 and 1.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        let da = a / (x * x);
        let db = -b / ((1.0 - x) * (1.0 - x));
        (da * b - a * db) / ((a + b) * (a + b))
    }
}

pub fn mu(r: f64, mass: f64) -> Result<f64> {
    if !(r >= 2.0 * mass) {
        return Err(Error::Domain(format!("mu requires r >= 2M, got r = {r}")));
    }
    Ok(1.0 - 2.0 * mass / r)
}

/// Tortoise coordinate normalised by `r*(3M) = 0`.
pub fn rstar(r: f64, mass: f64) -> Result<f64> {
    if !(r > 2.0 * mass) {
        return Err(Error::Domain(format!("r* diverges for r <= 2M, got r = {r}")));
    }
    Ok(r - 3.0 * mass + 2.0 * mass * ((r - 2.0 * mass) / mass).ln())
}

#[derive(Debug, Clone, Copy)]
struct Blend {
    chi1: f64,
    dchi1: f64,
    chi2: f64,
    dchi2: f64,
}

fn blend(r: f64, s: &SlicingProfile) -> Blend {
    let [ra, rb] = s.blend_inner;
    let [big_ra, big_rb] = s.blend_outer;
    let x1 = (r - ra) / (rb - ra);
    let x2 = (r - big_ra) / (big_rb - big_ra);
    Blend {
        chi1: smooth_step(x1),
        dchi1: smooth_step_deriv(x1) / (rb - ra),
        chi2: smooth_step(x2),
        dchi2: smooth_step_deriv(x2) / (big_rb - big_ra),
    }
}

/// Slicing coefficients at one radius, computed without cancellation so that
/// they stay finite at both ends of the compactified grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicingCoefficients {
    /// `∂_r h`
    pub dh: f64,
    /// `∂²_r h`
    pub d2h: f64,
    /// `H = 2μ⁻¹ − ∂_r h` (infinite at the horizon)
    pub big_h: f64,
    /// `ΔH`
    pub delta_h: f64,
    /// `μH = 2 − μ ∂_r h`
    pub mu_h: f64,
}

/// Coefficients at compactified position `σ ∈ [0, 1]`.
pub fn slicing_at_sigma(sigma: f64, params: &BlackHoleParams, s: &SlicingProfile) -> SlicingCoefficients {
    let m = params.mass;
    let c0 = s.c0;
    let mu = 1.0 - sigma;
    let r = if sigma > 0.0 { 2.0 * m / sigma } else { f64::INFINITY };
    let b = if sigma > 0.0 {
        blend(r, s)
    } else {
        Blend { chi1: 1.0, dchi1: 0.0, chi2: 1.0, dchi2: 0.0 }
    };
    // c0/r² and 2M/r in σ form stay finite at σ = 0.
    let c0_r2 = c0 * sigma * sigma / (4.0 * m * m);
    let inv_mu_minus_1 = if mu > 0.0 { sigma / mu } else { f64::INFINITY };

    let mut dh = 1.0;
    if b.chi1 > 0.0 {
        dh += b.chi1 * inv_mu_minus_1;
    }
    if b.chi2 > 0.0 {
        dh += b.chi2 * (1.0 + inv_mu_minus_1 - c0_r2);
    }

    // H = (1−χ₂)μ⁻¹ + χ₂ c0/r² + (1−χ₁)(μ⁻¹ − 1), all terms nonnegative.
    let mut big_h = b.chi2 * c0_r2;
    if b.chi2 < 1.0 {
        big_h += (1.0 - b.chi2) * (1.0 + inv_mu_minus_1);
    }
    if b.chi1 < 1.0 {
        big_h += (1.0 - b.chi1) * inv_mu_minus_1;
    }

    // ΔH = (1−χ₂) r² + χ₂ c0 μ + (1−χ₁) 2Mr.
    let mut delta_h = b.chi2 * c0 * mu;
    if b.chi2 < 1.0 {
        delta_h += (1.0 - b.chi2) * r * r;
    }
    if b.chi1 < 1.0 {
        delta_h += (1.0 - b.chi1) * 2.0 * m * r;
    }

    // μH = (1−χ₂) + χ₂ μ c0/r² + (1−χ₁) σ.
    let mu_h = (1.0 - b.chi2) + b.chi2 * mu * c0_r2 + (1.0 - b.chi1) * sigma;

    // ∂_r(μ⁻¹) = −2M/(r−2M)² = −σ²/(2M μ²).
    let d2h = if sigma > 0.0 {
        let dinv_mu = if mu > 0.0 { -sigma * sigma / (2.0 * m * mu * mu) } else { f64::NEG_INFINITY };
        let mut acc = 0.0;
        if b.dchi1 != 0.0 {
            acc += b.dchi1 * inv_mu_minus_1;
        }
        if b.chi1 > 0.0 {
            acc += b.chi1 * dinv_mu;
        }
        if b.dchi2 != 0.0 {
            acc += b.dchi2 * (1.0 + inv_mu_minus_1 - c0_r2);
        }
        if b.chi2 > 0.0 {
            acc += b.chi2 * (dinv_mu + 2.0 * c0 * sigma * sigma * sigma / (8.0 * m * m * m));
        }
        acc
    } else {
        0.0
    };

    SlicingCoefficients { dh, d2h, big_h, delta_h, mu_h }
}

/// `∂_r h` at radius `r ≥ 2M`.
pub fn height_derivative(r: f64, params: &BlackHoleParams, s: &SlicingProfile) -> Result<f64> {
    let m = params.mass;
    if !(r >= 2.0 * m) {
        return Err(Error::Domain(format!("height derivative requires r >= 2M, got {r}")));
    }
    let sigma = if r.is_infinite() { 0.0 } else { 2.0 * m / r };
    Ok(slicing_at_sigma(sigma, params, s).dh)
}

/// `H = 2μ⁻¹ − ∂_r h` at radius `r > 2M`.
pub fn slicing_h(r: f64, params: &BlackHoleParams, s: &SlicingProfile) -> Result<f64> {
    let m = params.mass;
    if !(r > 2.0 * m) {
        return Err(Error::Domain(format!("H requires r > 2M, got {r}")));
    }
    let sigma = if r.is_infinite() { 0.0 } else { 2.0 * m / r };
    Ok(slicing_at_sigma(sigma, params, s).big_h)
}

/// Height function `h(r)`, normalised by `h = r*` on `[r_b, R_a]`.
///
/// Only the two blend windows need quadrature; elsewhere `∂_r h` has an
/// elementary antiderivative.
#[derive(Debug, Clone, Copy)]
pub struct HeightFunction {
    params: BlackHoleParams,
    slicing: SlicingProfile,
    h_ra: f64,
    h_big_rb: f64,
}

const HEIGHT_TOL: f64 = 1e-13;

impl HeightFunction {
    pub fn new(params: BlackHoleParams, slicing: SlicingProfile) -> Result<Self> {
        slicing.validate(&params)?;
        let m = params.mass;
        let [ra, rb] = slicing.blend_inner;
        let [big_ra, big_rb] = slicing.blend_outer;
        let dh = |r: f64| slicing_at_sigma(2.0 * m / r, &params, &slicing).dh;
        let inner = quadrature::double_exponential::integrate(dh, ra, rb, HEIGHT_TOL).integral;
        let outer = quadrature::double_exponential::integrate(dh, big_ra, big_rb, HEIGHT_TOL).integral;
        let h_ra = rstar(rb, m)? - inner;
        let h_big_rb = rstar(big_ra, m)? + outer;
        Ok(Self { params, slicing, h_ra, h_big_rb })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        let m = self.params.mass;
        if !(r >= 2.0 * m) || !r.is_finite() {
            return Err(Error::Domain(format!("h requires 2M <= r < inf, got {r}")));
        }
        let [ra, rb] = self.slicing.blend_inner;
        let [big_ra, big_rb] = self.slicing.blend_outer;
        let dh = |x: f64| slicing_at_sigma(2.0 * m / x, &self.params, &self.slicing).dh;
        if r <= ra {
            Ok(self.h_ra - (ra - r))
        } else if r < rb {
            Ok(self.h_ra + quadrature::double_exponential::integrate(dh, ra, r, HEIGHT_TOL).integral)
        } else if r <= big_ra {
            rstar(r, m)
        } else if r < big_rb {
            Ok(rstar(big_ra, m)? + quadrature::double_exponential::integrate(dh, big_ra, r, HEIGHT_TOL).integral)
        } else {
            let c0 = self.slicing.c0;
            let prim = |x: f64| 2.0 * (x + 2.0 * m * ((x - 2.0 * m) / m).ln()) + c0 / x;
            Ok(self.h_big_rb + prim(r) - prim(big_rb))
        }
    }
}

/// Geometry tabulated on `N+1` uniform σ nodes.
#[derive(Debug, Clone)]
pub struct BackgroundChart {
    pub params: BlackHoleParams,
    pub slicing: SlicingProfile,
    pub n: usize,
    pub dsigma: f64,
    pub sigma: Vec<f64>,
    /// `ρ = 2M/σ`; `+∞` at σ = 0.
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub rstar: Vec<f64>,
    pub dh: Vec<f64>,
    pub d2h: Vec<f64>,
    pub big_h: Vec<f64>,
    pub delta_h: Vec<f64>,
    pub mu_h: Vec<f64>,
    /// `ρ² H = ΔH/μ`, equal to `c0` at σ = 0; infinite at the horizon.
    pub rho2_h: Vec<f64>,
    pub r_minus_m: Vec<f64>,
    /// `∂_ρ = w ∂_σ` with `w = −σ²/(2M)`.
    pub drho_weight: Vec<f64>,
    height: HeightFunction,
}

pub const MIN_NODES: usize = 16;

impl BackgroundChart {
    pub fn mass(&self) -> f64 {
        self.params.mass
    }

    pub fn height(&self) -> &HeightFunction {
        &self.height
    }

    /// Largest characteristic σ-speed of the first-order system.
    pub fn max_speed(&self) -> f64 {
        let m = self.params.mass;
        (0..=self.n)
            .map(|i| {
                let s = self.sigma[i];
                let out = s * s / (2.0 * m * self.dh[i]);
                let inn = 2.0 * m * (1.0 - s) / self.delta_h[i];
                out.max(inn)
            })
            .fold(0.0, f64::max)
    }

    /// Index of the node nearest to radius `r`.
    pub fn nearest_node(&self, r: f64) -> usize {
        let s = 2.0 * self.params.mass / r;
        ((s / self.dsigma).round() as usize).min(self.n)
    }
}

pub fn build_chart(params: BlackHoleParams, slicing: SlicingProfile, n: usize) -> Result<BackgroundChart> {
    if n < MIN_NODES {
        return Err(Error::Config(format!("need at least {MIN_NODES} intervals, got {n}")));
    }
    slicing.validate(&params)?;
    let height = HeightFunction::new(params, slicing)?;
    let m = params.mass;
    let dsigma = 1.0 / n as f64;
    let mut c = BackgroundChart {
        params,
        slicing,
        n,
        dsigma,
        sigma: Vec::with_capacity(n + 1),
        rho: Vec::with_capacity(n + 1),
        mu: Vec::with_capacity(n + 1),
        delta: Vec::with_capacity(n + 1),
        rstar: Vec::with_capacity(n + 1),
        dh: Vec::with_capacity(n + 1),
        d2h: Vec::with_capacity(n + 1),
        big_h: Vec::with_capacity(n + 1),
        delta_h: Vec::with_capacity(n + 1),
        mu_h: Vec::with_capacity(n + 1),
        rho2_h: Vec::with_capacity(n + 1),
        r_minus_m: Vec::with_capacity(n + 1),
        drho_weight: Vec::with_capacity(n + 1),
        height,
    };
    for i in 0..=n {
        // i/n rather than i*dσ keeps nested grids bit-identical.
        let s = i as f64 / n as f64;
        let rho = if i == 0 { f64::INFINITY } else { 2.0 * m / s };
        let mu = 1.0 - s;
        let k = slicing_at_sigma(s, &params, &slicing);
        c.sigma.push(s);
        c.rho.push(rho);
        c.mu.push(mu);
        c.delta.push(if i == 0 { f64::INFINITY } else { rho * rho * mu });
        c.rstar.push(match i {
            0 => f64::INFINITY,
            _ if i == n => f64::NEG_INFINITY,
            _ => rstar(rho, m)?,
        });
        c.dh.push(k.dh);
        c.d2h.push(k.d2h);
        c.big_h.push(k.big_h);
        c.delta_h.push(k.delta_h);
        c.mu_h.push(k.mu_h);
        c.rho2_h.push(if i == n { f64::INFINITY } else { k.delta_h / mu });
        c.r_minus_m.push(if i == 0 { f64::INFINITY } else { rho - m });
        c.drho_weight.push(-s * s / (2.0 * m));
    }
    Ok(c)
}

/// Double-null coordinates `(u, v)` of the point `(τ, ρ)`.
pub fn to_double_null(tau: f64, rho: f64, chart: &BackgroundChart) -> Result<(f64, f64)> {
    let m = chart.params.mass;
    if !(rho > 2.0 * m) {
        return Err(Error::Domain(format!("u is undefined on the horizon, rho = {rho}")));
    }
    let v = tau + chart.height.eval(rho)?;
    let u = v - 2.0 * rstar(rho, m)?;
    Ok((u, v))
}

/// Advanced time `v = τ + h(ρ)`, defined up to and including the horizon.
pub fn advanced_time(tau: f64, rho: f64, chart: &BackgroundChart) -> Result<f64> {
    Ok(tau + chart.height.eval(rho)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_values() {
        assert_eq!(mu(2.0, 1.0).unwrap(), 0.0);
        assert!((mu(3.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(mu(1.9, 1.0).is_err());
    }

    #[test]
    fn step_is_flat_and_monotone() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 1..100 {
            let v = smooth_step(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn step_derivative_matches_difference() {
        for k in 1..20 {
            let x = k as f64 / 20.0;
            let e = 1e-6;
            let fd = (smooth_step(x + e) - smooth_step(x - e)) / (2.0 * e);
            assert!((fd - smooth_step_deriv(x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn slicing_endpoint_values() {
        let p = BlackHoleParams::new(1.0).unwrap();
        let s = SlicingProfile::default_for(1.0);
        let horizon = slicing_at_sigma(1.0, &p, &s);
        assert_eq!(horizon.dh, 1.0);
        assert_eq!(horizon.delta_h, 8.0);
        assert_eq!(horizon.mu_h, 2.0);
        let scri = slicing_at_sigma(0.0, &p, &s);
        assert_eq!(scri.dh, 2.0);
        assert_eq!(scri.delta_h, 4.0);
        assert_eq!(scri.mu_h, 0.0);
    }

    #[test]
    fn bad_windows_rejected() {
        let p = BlackHoleParams::new(1.0).unwrap();
        let mut s = SlicingProfile::default_for(1.0);
        s.blend_inner = [1.5, 4.0];
        assert!(build_chart(p, s, 64).is_err());
        let mut s = SlicingProfile::default_for(1.0);
        s.blend_outer = [30.0, 20.0];
        assert!(build_chart(p, s, 64).is_err());
    }
}
