use dirac_tails::background::{build_chart, BackgroundChart, BlackHoleParams, SlicingProfile};
use dirac_tails::diagnostics::{np_constant, tme_residual_norm};
use dirac_tails::evolve::*;
use dirac_tails::swsh::ModeIndex;
use dirac_tails::Complex64;
use proptest::prelude::*;

fn chart(mass: f64, n: usize) -> BackgroundChart {
    build_chart(BlackHoleParams::new(mass).unwrap(), SlicingProfile::default_for(mass), n).unwrap()
}

fn l1() -> ModeIndex {
    ModeIndex::new(1, 1).unwrap()
}

fn gaussian() -> InitialDataSpec {
    InitialDataSpec::GaussianBump { center: 10.0, width: 2.0, amplitude: 1.0 }
}

fn config(n: usize, tau_end: f64) -> EvolutionConfig {
    EvolutionConfig { n, cfl: 0.5, ko_eps: 0.0, tau_end, output_every: 1.0, observers: vec![] }
}

fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Right-hand sides written in terms of `(A, B)` and `ρ`:
/// `h′∂_τA = ∂_ρA − ℓB` and `ρ²μH ∂_τ(ρB) = −Δ∂_ρ(ρB) − MρB + ℓρA`.
/// Returns `(∂_τΨ₊, ∂_τΨ₋)` given `A, ∂_ρA, B, ∂_ρ(ρB)` at one node.
fn oracle_rhs(c: &BackgroundChart, i: usize, ell: f64, a: f64, a_r: f64, b: f64, rb_r: f64) -> (f64, f64) {
    let m = c.mass();
    let rho = c.rho[i];
    let delta = rho * rho * c.mu[i];
    let dpp = rho * (a_r - ell * b) / c.dh[i];
    let dpm = (-delta * rb_r - m * rho * b + ell * rho * a) / c.delta_h[i];
    (dpp, dpm)
}

#[test]
fn zero_state_is_fixed() {
    let c = chart(1.0, 64);
    let ev = Evolver::new(&c, l1(), 0.1);
    let z = ModeState::zeros(l1(), 64);
    let (p, m) = ev.rhs(&z);
    assert!(p.iter().chain(&m).all(|v| *v == Complex64::new(0.0, 0.0)));
    let out = integrate(z.clone(), &config(64, 5.0), &c, &mut []).unwrap();
    assert_eq!(out.psi_plus, z.psi_plus);
    assert_eq!(out.psi_minus, z.psi_minus);
}

/// `A = ρ⁻²`, `B = ρ⁻¹`: both radiation fields are polynomial in σ, so the
/// stencils are exact and the right-hand side must match to round-off.
#[test]
fn manufactured_power_law_data() {
    for mass in [1.0, 2.5] {
        let c = chart(mass, 128);
        let n = c.n;
        let mut st = ModeState::zeros(l1(), n);
        for i in 0..=n {
            st.psi_plus[i] = Complex64::new(c.sigma[i] / (2.0 * mass), 0.0);
            st.psi_minus[i] = Complex64::new(1.0, 0.0);
        }
        let ev = Evolver::new(&c, l1(), 0.0);
        let (p, m) = ev.rhs(&st);
        for i in 1..n {
            let rho = c.rho[i];
            let (ep, em) = oracle_rhs(&c, i, 1.0, rho.powi(-2), -2.0 * rho.powi(-3), 1.0 / rho, 0.0);
            assert!((p[i].re - ep).abs() < 1e-11 * (1.0 + ep.abs()), "plus i={i}");
            assert!((m[i].re - em).abs() < 1e-11 * (1.0 + em.abs()), "minus i={i}");
        }
    }
}

/// Non-polynomial manufactured data: the error must fall at the stencil order.
#[test]
fn manufactured_smooth_data_converges() {
    let mass = 1.0;
    let ell = 2u32;
    let mode = ModeIndex::new(ell, 1).unwrap();
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let c = chart(mass, n);
        let mut st = ModeState::zeros(mode, n);
        let mut expect_p = vec![0.0; n + 1];
        let mut expect_m = vec![0.0; n + 1];
        for i in 0..=n {
            let s = c.sigma[i];
            // Ψ₊ = sin 3σ, Ψ₋ = cos 2σ
            st.psi_plus[i] = Complex64::new((3.0 * s).sin(), 0.0);
            st.psi_minus[i] = Complex64::new((2.0 * s).cos(), 0.0);
            if i == 0 || i == n {
                continue;
            }
            let rho = c.rho[i];
            let ds_dr = -s * s / (2.0 * mass);
            let pp = (3.0 * s).sin();
            let a = pp / rho;
            let a_r = 3.0 * (3.0 * s).cos() * ds_dr / rho - pp / (rho * rho);
            let b = (2.0 * s).cos() / rho;
            let rb_r = -2.0 * (2.0 * s).sin() * ds_dr;
            let (ep, em) = oracle_rhs(&c, i, ell as f64, a, a_r, b, rb_r);
            expect_p[i] = ep;
            expect_m[i] = em;
        }
        let ev = Evolver::new(&c, mode, 0.0);
        let (p, m) = ev.rhs(&st);
        let e = (1..n).map(|i| (p[i].re - expect_p[i]).abs().max((m[i].re - expect_m[i]).abs())).fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(errs[0] / errs[1] > 7.5 && errs[1] / errs[2] > 7.5, "errors {errs:?}");
    assert!(errs[2] < 1e-6);
}

/// At the horizon with M = 1, ℓ = 1: `∂_τΨ₋ = (Ψ₊ − Ψ₋)/8`.
#[test]
fn horizon_relation() {
    let c = chart(1.0, 64);
    let ev = Evolver::new(&c, l1(), 0.0);
    let mut st = ModeState::zeros(l1(), 64);
    for i in 0..=64 {
        let x = i as f64 / 64.0;
        st.psi_plus[i] = Complex64::new(x.sin() + 0.3, x * x);
        st.psi_minus[i] = Complex64::new((2.0 * x).cos(), -x);
    }
    let (_, m) = ev.rhs(&st);
    let expect = (st.psi_plus[64] - st.psi_minus[64]) / 8.0;
    assert!((m[64] - expect).norm() < 1e-14);
}

#[test]
fn np_tail_data_fix_the_constant() {
    for (mass, target) in [(1.0, 1.0), (1.0, -2.5), (2.0, 1.0)] {
        let c = chart(mass, 512);
        let spec = InitialDataSpec::NpTail { n_target: target, cutoff_radius: 10.0 * mass };
        let st = make_initial_data(&spec, &c, l1()).unwrap();
        let ev = Evolver::new(&c, l1(), 0.0);
        let np = np_constant(&st, &c, &ev);
        assert!((np.n1.re - target).abs() < 1e-8 * target.abs(), "M={mass} target={target}: {}", np.n1);
        assert!(np.n1.im.abs() < 1e-12);
        assert_eq!(st.psi_minus.iter().map(|v| v.norm()).fold(0.0, f64::max), 0.0);
    }
    let c = chart(1.0, 128);
    let zero = make_initial_data(&InitialDataSpec::NpTail { n_target: 0.0, cutoff_radius: 10.0 }, &c, l1()).unwrap();
    assert!(zero.psi_plus.iter().chain(&zero.psi_minus).all(|v| v.norm() == 0.0));
}

#[test]
fn gaussian_has_no_np_constant() {
    let c = chart(1.0, 512);
    let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
    let ev = Evolver::new(&c, l1(), 0.0);
    assert_eq!(np_constant(&st, &c, &ev).n1.norm(), 0.0);
}

#[test]
fn derived_scalars() {
    let c = chart(1.0, 64);
    let st = make_initial_data(&InitialDataSpec::NpTail { n_target: 1.0, cutoff_radius: 10.0 }, &c, l1()).unwrap();
    let mut g = st.clone();
    g.psi_minus = st.psi_plus.iter().map(|v| v + 1.0).collect();
    let phim = derived_scalar(&g, &c, Scalar::PhiMinus);
    assert_eq!(phim[64], Complex64::new(0.0, 0.0));
    let phi1 = derived_scalar(&st, &c, Scalar::Phi1);
    let rad = derived_scalar(&st, &c, Scalar::RadPlus);
    for i in 0..64 {
        if rad[i].norm() > 0.0 {
            assert!((phi1[i] / rad[i] - 1.0 / c.mu[i].sqrt()).norm() < 1e-14);
        }
    }
}

#[test]
fn empty_time_span_is_identity() {
    let c = chart(1.0, 64);
    let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
    let out = integrate(st.clone(), &config(64, 0.0), &c, &mut []).unwrap();
    assert_eq!(out, st);
}

#[test]
fn runs_are_deterministic() {
    let c = chart(1.0, 128);
    let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
    let mut cfg = config(128, 30.0);
    cfg.ko_eps = 0.1;
    let a = integrate(st.clone(), &cfg, &c, &mut []).unwrap();
    let b = integrate(st, &cfg, &c, &mut []).unwrap();
    assert_eq!(a, b);
}

#[test]
fn global_phase_commutes_with_evolution() {
    let c = chart(1.0, 128);
    let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
    let phase = Complex64::from_polar(1.0, 0.7);
    let cfg = config(128, 20.0);
    let a = integrate(st.scaled(phase), &cfg, &c, &mut []).unwrap();
    let b = integrate(st, &cfg, &c, &mut []).unwrap().scaled(phase);
    let scale = b.psi_minus.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(max_err(&a.psi_plus, &b.psi_plus) < 1e-13 * scale);
    assert!(max_err(&a.psi_minus, &b.psi_minus) < 1e-13 * scale);
}

#[test]
fn tme_residual_converges() {
    let mut norms = Vec::new();
    for n in [128, 256, 512] {
        let c = chart(1.0, n);
        let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
        let ev = Evolver::new(&c, l1(), 0.0);
        norms.push(tme_residual_norm(&st, &c, &ev));
    }
    assert!(norms[0] / norms[1] > 12.0 && norms[1] / norms[2] > 12.0, "{norms:?}");
}

#[test]
fn invalid_configs_rejected() {
    let c = chart(1.0, 64);
    let st = ModeState::zeros(l1(), 64);
    let mut cfg = config(64, 1.0);
    cfg.cfl = 0.9;
    assert!(integrate(st.clone(), &cfg, &c, &mut []).is_err());
    let mut cfg = config(64, 1.0);
    cfg.observers = vec![Observer::Radius { r: 1.0 }];
    assert!(integrate(st.clone(), &cfg, &c, &mut []).is_err());
    assert!(integrate(ModeState::zeros(l1(), 32), &config(64, 1.0), &c, &mut []).is_err());
    let mut bad = st;
    bad.psi_plus[3] = Complex64::new(f64::NAN, 0.0);
    assert!(integrate(bad, &config(64, 1.0), &c, &mut []).is_err());
    let spec = InitialDataSpec::GaussianBump { center: 10.0, width: -1.0, amplitude: 1.0 };
    assert!(make_initial_data(&spec, &c, l1()).is_err());
}

#[test]
fn sinks_see_every_output_time() {
    let c = chart(1.0, 64);
    let st = make_initial_data(&gaussian(), &c, l1()).unwrap();
    let mut taus = Vec::new();
    let mut sink = |s: &Snapshot<'_>| {
        taus.push(s.state.tau);
        Ok(())
    };
    integrate(st, &config(64, 10.0), &c, &mut [&mut sink]).unwrap();
    assert_eq!(taus.first(), Some(&0.0));
    assert!((taus.last().unwrap() - 10.0).abs() < 1e-12);
    assert!(taus.len() >= 11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rhs_is_complex_linear(seed in any::<u64>(), ar in -2.0f64..2.0, ai in -2.0f64..2.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = chart(1.0, 64);
        let ev = Evolver::new(&c, l1(), 0.0);
        let mut rand_state = || {
            let mut s = ModeState::zeros(l1(), 64);
            for i in 0..=64 {
                s.psi_plus[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                s.psi_minus[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            s
        };
        let x = rand_state();
        let y = rand_state();
        let alpha = Complex64::new(ar, ai);
        let one = Complex64::new(1.0, 0.0);
        let lhs = ev.time_derivative(&ModeState::combine(alpha, &x, one, &y));
        let rhs = ModeState::combine(alpha, &ev.time_derivative(&x), one, &ev.time_derivative(&y));
        let scale = 1.0 + rhs.psi_plus.iter().chain(&rhs.psi_minus).map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(max_err(&lhs.psi_plus, &rhs.psi_plus) < 1e-12 * scale);
        prop_assert!(max_err(&lhs.psi_minus, &rhs.psi_minus) < 1e-12 * scale);
    }
}

#[test]
fn dissipation_keeps_the_np_constant() {
    let c = chart(1.0, 256);
    let spec = InitialDataSpec::NpTail { n_target: 1.0, cutoff_radius: 20.0 };
    let st = make_initial_data(&spec, &c, l1()).unwrap();
    let mut n1 = Vec::new();
    for ko in [0.0, 0.2] {
        let mut cfg = config(256, 200.0);
        cfg.ko_eps = ko;
        let out = integrate(st.clone(), &cfg, &c, &mut []).unwrap();
        n1.push(np_constant(&out, &c, &Evolver::new(&c, l1(), ko)).n1.re);
    }
    assert!((n1[1] - n1[0]).abs() < 1e-3, "{n1:?}");
}
