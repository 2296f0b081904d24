//! Finite-difference, quadrature and interpolation kernels on uniform grids.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Fourth-order first derivative on a uniform grid of spacing `h`, with
/// one-sided fourth-order closures on the two outermost nodes at each end.
pub fn d1<T>(u: &[T], h: f64, out: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = u.len();
    assert!(n >= 5 && out.len() == n);
    let c = 1.0 / (12.0 * h);
    out[0] = (u[1] * 48.0 - u[0] * 25.0 - u[2] * 36.0 + u[3] * 16.0 - u[4] * 3.0) * c;
    out[1] = (u[2] * 18.0 - u[0] * 3.0 - u[1] * 10.0 - u[3] * 6.0 + u[4]) * c;
    for i in 2..n - 2 {
        out[i] = ((u[i + 1] - u[i - 1]) * 8.0 - (u[i + 2] - u[i - 2])) * c;
    }
    let l = n - 1;
    out[l] = (u[l] * 25.0 - u[l - 1] * 48.0 + u[l - 2] * 36.0 - u[l - 3] * 16.0 + u[l - 4] * 3.0) * c;
    out[l - 1] = (u[l] * 3.0 + u[l - 1] * 10.0 - u[l - 2] * 18.0 + u[l - 3] * 6.0 - u[l - 4]) * c;
}

/// Convenience wrapper allocating the output.
pub fn deriv<T>(u: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let mut out = vec![T::default(); u.len()];
    d1(u, h, &mut out);
    out
}

/// One-sided fourth-order derivative at the left end of `u`.
pub fn d1_left<T>(u: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    (u[1] * 48.0 - u[0] * 25.0 - u[2] * 36.0 + u[3] * 16.0 - u[4] * 3.0) * (1.0 / (12.0 * h))
}

/// Adds the fourth-difference Kreiss–Oliger term `−(k_i/16)·δ⁴u` to `out` on
/// nodes `2..n−2`, where `k_i = ε·v_i/h` for strength `ε`, local speed `v_i`
/// and spacing `h`.
pub fn add_dissipation(u: &[Complex64], k: &[f64], out: &mut [Complex64]) {
    let n = u.len();
    for i in 2..n - 2 {
        let d4 = u[i - 2] + u[i + 2] - (u[i - 1] + u[i + 1]) * 4.0 + u[i] * 6.0;
        out[i] += d4 * (-k[i] / 16.0);
    }
}

/// Composite Simpson weights for `n+1` nodes with spacing `h` (n even).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson's rule needs an even number of intervals");
    let mut w = vec![0.0; n + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Integral of the Lagrange interpolant through `(xs, ys)` over `[a, b]`.
fn lagrange_integral(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    // Five-point Gauss–Legendre is exact for the degree ≤ 9 interpolants used here.
    const GX: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const GW: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GX.iter()
        .zip(GW.iter())
        .map(|(&g, &w)| w * lagrange_eval(xs, ys, mid + half * g))
        .sum::<f64>()
        * half
}

/// Value at `x` of the polynomial interpolating `(xs, ys)`.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                l *= (x - xk) / (xj - xk);
            }
        }
        acc += l * yj;
    }
    acc
}

/// Cumulative integral `∫_{x_0}^{x_i} y` on monotone, possibly non-uniform
/// nodes, using local degree-5 interpolants.
pub fn cumulative_integral(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 6 && ys.len() == n);
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let start = i.saturating_sub(2).min(n - 6);
        let seg = start..start + 6;
        out[i + 1] = out[i] + lagrange_integral(&xs[seg.clone()], &ys[seg], xs[i], xs[i + 1]);
    }
    out
}

/// Interpolates samples on the uniform grid `σ_i = i h` at `x` with a
/// centred 6-point stencil.
pub fn interp_uniform<T>(u: &[T], h: f64, x: f64) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = u.len() - 1;
    let pos = x / h;
    let base = (pos.floor() as isize - 2).clamp(0, n as isize - 5) as usize;
    let mut acc = T::default();
    for j in base..base + 6 {
        let mut l = 1.0;
        for k in base..base + 6 {
            if k != j {
                l *= (pos - k as f64) / (j as f64 - k as f64);
            }
        }
        acc = acc + u[j] * l;
    }
    acc
}

/// Extrapolates `ys` sampled at `xs` to `x` with the full interpolant.
pub fn extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    lagrange_eval(xs, ys, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_exact_on_quartics() {
        let h = 0.1;
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * h).collect();
        let u: Vec<f64> = xs.iter().map(|x| 1.0 + x - 2.0 * x * x + x.powi(3) - 0.5 * x.powi(4)).collect();
        let du = deriv(&u, h);
        for (x, d) in xs.iter().zip(du) {
            let exact = 1.0 - 4.0 * x + 3.0 * x * x - 2.0 * x.powi(3);
            assert!((d - exact).abs() < 1e-12, "x = {x}: {d} vs {exact}");
        }
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let n = 8;
        let h = 1.0 / n as f64;
        let w = simpson_weights(n, h);
        let s: f64 = (0..=n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cumulative_on_nonuniform_nodes() {
        let xs: Vec<f64> = (0..400).map(|i| ((i as f64) / 399.0).sqrt()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let c = cumulative_integral(&xs, &ys);
        for (x, ci) in xs.iter().zip(c) {
            assert!((ci - x.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_is_exact_on_quintics() {
        let h = 0.05;
        let u: Vec<f64> = (0..=20).map(|i| (i as f64 * h).powi(5)).collect();
        for &x in &[0.0, 0.013, 0.5, 0.977, 1.0] {
            assert!((interp_uniform(&u, h, x) - x.powi(5)).abs() < 1e-13);
        }
    }
}
