//! Half-integer spin-weighted spherical harmonics and the edth operators.
//!
//! Modes are labelled by the shifted index `ℓ = j + 1/2 ≥ 1`, where `j` is
//! the usual angular momentum. Half-integers are stored as twice their value.
//!
//! Phase convention: `Y^s_{m,ℓ}(θ) = √((2j+1)/4π) · d^j_{−m,s}(θ)` with the
//! standard Wigner small-d matrix. With this choice
//! `ð Y^s = −√((ℓ+s+½)(ℓ−s−½)) Y^{s+1}` and
//! `ð′ Y^s = +√((ℓ+s−½)(ℓ−s+½)) Y^{s−1}`, and `Y^s_{m}` is real and
//! positive at the north pole when `m = −s`.
//! The `e^{imφ}` factor is never sampled; every operator acts per `m`.

use crate::error::{Error, Result};
use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::num::NonZeroUsize;

/// Largest |s| supported by the operator tests.
pub const MAX_TWICE_SPIN: i32 = 5;

/// Half-odd spin weight stored as `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinWeight {
    twice: i32,
}

impl SpinWeight {
    pub const PLUS_HALF: SpinWeight = SpinWeight { twice: 1 };
    pub const MINUS_HALF: SpinWeight = SpinWeight { twice: -1 };

    pub fn from_twice(twice: i32) -> Result<Self> {
        if twice % 2 == 0 || twice.abs() > MAX_TWICE_SPIN {
            return Err(Error::Domain(format!("spin weight 2s = {twice} must be odd with |s| <= 5/2")));
        }
        Ok(Self { twice })
    }

    pub fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn raised(self) -> Result<Self> {
        Self::from_twice(self.twice + 2)
    }

    pub fn lowered(self) -> Result<Self> {
        Self::from_twice(self.twice - 2)
    }
}

/// Shifted angular index `ℓ` and azimuthal number `m` (stored as `2m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub ell: u32,
    pub twice_m: i32,
}

impl ModeIndex {
    pub fn new(ell: u32, twice_m: i32) -> Result<Self> {
        let mode = Self { ell, twice_m };
        mode.check(SpinWeight::PLUS_HALF)?;
        Ok(mode)
    }

    pub fn m(self) -> f64 {
        self.twice_m as f64 / 2.0
    }

    /// `2j = 2ℓ − 1`.
    pub fn twice_j(self) -> i32 {
        2 * self.ell as i32 - 1
    }

    /// Checks that the mode exists for spin weight `s`.
    pub fn check(self, s: SpinWeight) -> Result<()> {
        let j2 = self.twice_j();
        if self.ell == 0 || self.twice_m % 2 == 0 || self.twice_m.abs() > j2 || s.twice().abs() > j2 {
            return Err(Error::Domain(format!(
                "no harmonic with s = {}, m = {}, l = {}",
                s.value(),
                self.m(),
                self.ell
            )));
        }
        Ok(())
    }
}

/// `Λ_ℓ(s) = (ℓ − ½ + s)(ℓ − s + ½)`; `−Λ_ℓ` is the eigenvalue of `ðð′`.
pub fn eigenvalue_lambda(s: SpinWeight, ell: u32) -> f64 {
    let l = ell as f64;
    let s = s.value();
    (l - 0.5 + s) * (l - s + 0.5)
}

/// Coefficients `(c, c′)` with `ð Y^s_ℓ = c Y^{s+1}_ℓ` and `ð′ Y^s_ℓ = c′ Y^{s−1}_ℓ`.
pub fn edth_coefficients(s: SpinWeight, ell: u32) -> (f64, f64) {
    let l = ell as f64;
    let s = s.value();
    let raise = -((l + s + 0.5) * (l - s - 0.5)).max(0.0).sqrt();
    let lower = ((l + s - 0.5) * (l - s + 0.5)).max(0.0).sqrt();
    (raise, lower)
}

/// Eigenvalue of the Teukolsky angular operator `T_s = ðð′ − |s| + s`.
pub fn teukolsky_eigenvalue(s: SpinWeight, ell: u32) -> f64 {
    let l = ell as f64;
    let a = s.value().abs() - 0.5;
    a * a - l * l
}

fn factorial(n: i32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Wigner small-d `d^j_{m′m}(θ)` and its θ-derivative, arguments doubled.
pub fn wigner_d(j2: i32, mp2: i32, m2: i32, theta: f64) -> (f64, f64) {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let jp = (j2 + mp2) / 2;
    let jm = (j2 - mp2) / 2;
    let kp = (j2 + m2) / 2;
    let km = (j2 - m2) / 2;
    let pre = (factorial(jp) * factorial(jm) * factorial(kp) * factorial(km)).sqrt();
    let dmm = (mp2 - m2) / 2;
    let k_lo = 0.max(-dmm);
    let k_hi = kp.min(jm);
    let (mut val, mut der) = (0.0, 0.0);
    for k in k_lo..=k_hi {
        let sign = if (k + dmm) % 2 == 0 { 1.0 } else { -1.0 };
        let denom = factorial(kp - k) * factorial(k) * factorial(jm - k) * factorial(k + dmm);
        let a = j2 - 2 * k - dmm; // power of cos(θ/2)
        let b = 2 * k + dmm; // power of sin(θ/2)
        let coef = sign * pre / denom;
        val += coef * c.powi(a) * s.powi(b);
        let mut d = 0.0;
        if a > 0 {
            d -= a as f64 * c.powi(a - 1) * s.powi(b + 1);
        }
        if b > 0 {
            d += b as f64 * c.powi(a + 1) * s.powi(b - 1);
        }
        der += coef * 0.5 * d;
    }
    (val, der)
}

/// `Y^s_{m,ℓ}(θ)` and `∂_θ Y^s_{m,ℓ}(θ)`.
pub fn harmonic_value(s: SpinWeight, mode: ModeIndex, theta: f64) -> (f64, f64) {
    let j2 = mode.twice_j();
    let norm = ((j2 + 1) as f64 / (4.0 * PI)).sqrt();
    let (v, d) = wigner_d(j2, -mode.twice_m, s.twice(), theta);
    (norm * v, norm * d)
}

/// Per-`m` angular profile sampled at the Gauss–Legendre nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFunction {
    pub s: SpinWeight,
    pub twice_m: i32,
    pub samples: Vec<Complex64>,
}

/// Gauss–Legendre grid in `cos θ` with a band limit `ℓ_max`.
#[derive(Debug, Clone)]
pub struct AngularGrid {
    pub ell_max: u32,
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Relative reconstruction residual above which input is treated as aliased.
pub const ALIASING_TOL: f64 = 1e-9;

impl AngularGrid {
    pub fn new(ell_max: u32) -> Self {
        let count = 2 * ell_max as usize + 4;
        let gl = GaussLegendre::new(NonZeroUsize::new(count).expect("nonzero node count"));
        let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite nodes"));
        Self {
            ell_max,
            theta: pairs.iter().map(|p| p.0.acos()).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn ell_range(&self, s: SpinWeight, twice_m: i32) -> std::ops::RangeInclusive<u32> {
        let j2_min = s.twice().abs().max(twice_m.abs());
        ((j2_min + 1) / 2) as u32..=self.ell_max
    }

    pub fn eval_harmonic(&self, s: SpinWeight, mode: ModeIndex) -> Result<AngularFunction> {
        mode.check(s)?;
        let samples = self
            .theta
            .iter()
            .map(|&t| Complex64::new(harmonic_value(s, mode, t).0, 0.0))
            .collect();
        Ok(AngularFunction { s, twice_m: mode.twice_m, samples })
    }

    /// `∫ conj(f) g sinθ dθ dφ` for profiles sharing `m`.
    pub fn inner(&self, f: &AngularFunction, g: &AngularFunction) -> Complex64 {
        debug_assert_eq!(f.twice_m, g.twice_m);
        let sum: Complex64 = self
            .weights
            .iter()
            .zip(f.samples.iter().zip(&g.samples))
            .map(|(w, (a, b))| a.conj() * b * *w)
            .sum();
        sum * (2.0 * PI)
    }

    pub fn norm_sq(&self, f: &AngularFunction) -> f64 {
        self.inner(f, f).re
    }

    /// Harmonic coefficients of `f`, indexed from the lowest admissible `ℓ`.
    pub fn project(&self, f: &AngularFunction) -> Result<Vec<(u32, Complex64)>> {
        let mut out = Vec::new();
        for ell in self.ell_range(f.s, f.twice_m) {
            let y = self.eval_harmonic(f.s, ModeIndex { ell, twice_m: f.twice_m })?;
            out.push((ell, self.inner(&y, f)));
        }
        Ok(out)
    }

    pub fn synthesize(&self, s: SpinWeight, twice_m: i32, coeffs: &[(u32, Complex64)]) -> Result<AngularFunction> {
        let mut samples = vec![Complex64::new(0.0, 0.0); self.len()];
        for &(ell, c) in coeffs {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let y = self.eval_harmonic(s, ModeIndex { ell, twice_m })?;
            for (acc, v) in samples.iter_mut().zip(&y.samples) {
                *acc += c * v;
            }
        }
        Ok(AngularFunction { s, twice_m, samples })
    }

    fn band_limited_coeffs(&self, f: &AngularFunction) -> Result<Vec<(u32, Complex64)>> {
        let coeffs = self.project(f)?;
        let back = self.synthesize(f.s, f.twice_m, &coeffs)?;
        let total = self.norm_sq(f).sqrt();
        let diff = AngularFunction {
            s: f.s,
            twice_m: f.twice_m,
            samples: f.samples.iter().zip(&back.samples).map(|(a, b)| a - b).collect(),
        };
        let resid = self.norm_sq(&diff).sqrt();
        if total > 0.0 && resid > ALIASING_TOL * total {
            return Err(Error::Aliasing(resid / total));
        }
        Ok(coeffs)
    }

    /// `ð f = (∂_θ − m cscθ − s cotθ) f`, raising the spin weight.
    pub fn edth(&self, f: &AngularFunction) -> Result<AngularFunction> {
        let s1 = f.s.raised()?;
        let coeffs: Vec<_> = self
            .band_limited_coeffs(f)?
            .into_iter()
            .filter(|&(ell, _)| (2 * ell as i32 - 1) >= s1.twice().abs())
            .map(|(ell, c)| (ell, c * edth_coefficients(f.s, ell).0))
            .collect();
        self.synthesize(s1, f.twice_m, &coeffs)
    }

    /// `ð′ f = (∂_θ + m cscθ + s cotθ) f`, lowering the spin weight.
    pub fn edth_prime(&self, f: &AngularFunction) -> Result<AngularFunction> {
        let s1 = f.s.lowered()?;
        let coeffs: Vec<_> = self
            .band_limited_coeffs(f)?
            .into_iter()
            .filter(|&(ell, _)| (2 * ell as i32 - 1) >= s1.twice().abs())
            .map(|(ell, c)| (ell, c * edth_coefficients(f.s, ell).1))
            .collect();
        self.synthesize(s1, f.twice_m, &coeffs)
    }

    /// `T_s f = (ðð′ − |s| + s) f`.
    pub fn teukolsky_angular(&self, f: &AngularFunction) -> Result<AngularFunction> {
        let coeffs: Vec<_> = self
            .band_limited_coeffs(f)?
            .into_iter()
            .map(|(ell, c)| (ell, c * teukolsky_eigenvalue(f.s, ell)))
            .collect();
        self.synthesize(f.s, f.twice_m, &coeffs)
    }
}
