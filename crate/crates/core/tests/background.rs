use dirac_tails::background::*;
use gauss_quad::GaussLegendre;
use proptest::prelude::*;
use std::num::NonZeroUsize;

fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let gl = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|k| gl.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &f)).sum()
}

fn setup(mass: f64) -> (BlackHoleParams, SlicingProfile) {
    (BlackHoleParams::new(mass).unwrap(), SlicingProfile::default_for(mass))
}

#[test]
fn mu_examples() {
    assert_eq!(mu(2.0, 1.0).unwrap(), 0.0);
    assert!((mu(3.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!((mu(1e12, 1.0).unwrap() - 1.0).abs() < 1e-11);
}

#[test]
fn tortoise_examples() {
    for m in [0.5, 1.0, 3.0] {
        assert!(rstar(3.0 * m, m).unwrap().abs() < 1e-14 * m);
    }
    // Independent oracle: ∫_{3M}^{4M} μ⁻¹ dr.
    let quad = gl_integrate(|r| 1.0 / mu(r, 1.0).unwrap(), 3.0, 4.0, 4);
    assert!((rstar(4.0, 1.0).unwrap() - quad).abs() < 1e-13);
    assert!((rstar(4.0, 1.0).unwrap() - (1.0 + 2.0 * 2f64.ln())).abs() < 1e-14);
    assert!(rstar(2.0 + 1e-12, 1.0).unwrap() < -50.0);
    assert!(rstar(2.0, 1.0).is_err());
}

#[test]
fn tortoise_derivative_is_inverse_mu() {
    let m = 1.0;
    for r in [2.1, 2.5, 3.0, 5.0, 17.0, 400.0] {
        let f = |x: f64| rstar(x, m).unwrap();
        let h = 1e-3 * (r - 2.0 * m);
        let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
        let d2 = (f(r + h / 2.0) - f(r - h / 2.0)) / h;
        let rich = (4.0 * d2 - d1) / 3.0;
        assert!((mu(r, m).unwrap() * rich - 1.0).abs() < 1e-9, "r = {r}");
    }
}

#[test]
fn height_derivative_regimes() {
    let (p, s) = setup(1.0);
    assert_eq!(height_derivative(2.0, &p, &s).unwrap(), 1.0);
    for r in [4.0, 7.5, 12.0, 20.0] {
        let dh = height_derivative(r, &p, &s).unwrap();
        assert!((dh - 1.0 / mu(r, 1.0).unwrap()).abs() < 1e-14, "r = {r}");
    }
    let r = 1e6;
    let h = slicing_h(r, &p, &s).unwrap();
    assert!((r * r * h - s.c0).abs() < 1e-6 * s.c0);
}

#[test]
fn rho2_h_extrapolates_to_c0() {
    let (p, s) = setup(1.0);
    let chart = build_chart(p, s, 256).unwrap();
    let xs: Vec<f64> = (1..=6).map(|i| chart.sigma[i]).collect();
    let ys: Vec<f64> = (1..=6).map(|i| chart.rho2_h[i]).collect();
    let c0 = dirac_tails::stencil::extrapolate(&xs, &ys, 0.0);
    assert!((c0 - s.c0).abs() < 1e-8);
    assert_eq!(chart.rho2_h[0], s.c0);
}

#[test]
fn height_function_matches_independent_quadrature() {
    let (p, s) = setup(1.0);
    let h = HeightFunction::new(p, s).unwrap();
    let rb = s.blend_inner[1];
    let anchor = rstar(rb, 1.0).unwrap();
    for r in [2.0, 2.1, 2.7, 3.3, 25.0, 31.0, 39.0, 55.0, 300.0] {
        let dh = |x: f64| height_derivative(x, &p, &s).unwrap();
        let quad = if r < rb { -gl_integrate(dh, r, rb, 64) } else { gl_integrate(dh, rb, r, 256) };
        assert!((h.eval(r).unwrap() - (anchor + quad)).abs() < 1e-9 * (1.0 + r), "r = {r}");
    }
    for r in [5.0, 10.0, 19.0] {
        assert!((h.eval(r).unwrap() - rstar(r, 1.0).unwrap()).abs() < 1e-14 * r);
    }
}

#[test]
fn advanced_time_behaves_like_half_rho_far_out() {
    let (p, s) = setup(1.0);
    let chart = build_chart(p, s, 64).unwrap();
    // v − τ = h ≈ 2r far out, so h/r → 2.
    let r = 1e7;
    let ratio = (advanced_time(0.0, r, &chart).unwrap()) / r;
    assert!((ratio - 2.0).abs() < 1e-4);
}

#[test]
fn chart_invariants() {
    let (p, s) = setup(1.0);
    let chart = build_chart(p, s, 64).unwrap();
    assert_eq!(chart.delta_h[64], 8.0);
    assert!((chart.delta_h[0] - s.c0).abs() < 1e-14);
    for i in 1..=64 {
        assert!((chart.rho[i] * chart.sigma[i] - 2.0).abs() < 1e-14);
        assert!(chart.delta_h[i] > 0.0);
        if i < 64 {
            assert!(chart.delta[i] > 0.0);
            assert!((chart.mu[i] * chart.rho[i] * chart.rho[i] * chart.big_h[i] - chart.delta_h[i]).abs() < 1e-10 * chart.delta_h[i]);
        }
    }
    assert_eq!(chart.delta[64], 0.0);
    let k = chart.nearest_node(3.0);
    assert!(chart.rstar[k].abs() < 0.1);
}

#[test]
fn nested_charts_agree_at_common_nodes() {
    let (p, s) = setup(1.0);
    let a = build_chart(p, s, 64).unwrap();
    let b = build_chart(p, s, 128).unwrap();
    for i in 0..=64 {
        assert_eq!(a.sigma[i], b.sigma[2 * i]);
        assert_eq!(a.delta_h[i], b.delta_h[2 * i]);
        assert_eq!(a.dh[i], b.dh[2 * i]);
    }
}

#[test]
fn bad_profiles_rejected() {
    let p = BlackHoleParams::new(1.0).unwrap();
    let mut s = SlicingProfile::default_for(1.0);
    s.blend_inner = [1.5, 4.0];
    assert!(build_chart(p, s, 64).is_err());
    let mut s = SlicingProfile::default_for(1.0);
    s.c0 = -1.0;
    assert!(s.validate(&p).is_err());
    assert!(BlackHoleParams::new(0.0).is_err());
    assert!(build_chart(p, SlicingProfile::default_for(1.0), 8).is_err());
}

proptest! {
    #[test]
    fn slicing_positivity(sigma in 0.0f64..=1.0, mass in 0.2f64..5.0) {
        let (p, s) = setup(mass);
        let k = slicing_at_sigma(sigma, &p, &s);
        prop_assert!(k.dh >= 0.0);
        prop_assert!(k.delta_h > 0.0 && k.delta_h.is_finite());
        prop_assert!(k.mu_h > 0.0);
        if sigma < 1.0 {
            prop_assert!(k.big_h > 0.0);
        }
    }

    #[test]
    fn mu_dr_star_identity(x in 0.01f64..100.0) {
        // dr*/dr = 1 + 2M/(r − 2M) analytically; compare against μ⁻¹.
        let r = 2.0 + x;
        let lhs = mu(r, 1.0).unwrap() * (1.0 + 2.0 / (r - 2.0));
        prop_assert!((lhs - 1.0).abs() < 1e-14);
    }
}
