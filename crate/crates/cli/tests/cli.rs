use dirac_tails_cli::config::RunConfig;
use dirac_tails_cli::output::RunManifest;
use dirac_tails_cli::studies::{self, Verdict};
use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
[mode]
ell = 1
twice_m = 1

[grid]
n = 128
cfl = 0.5
ko_eps = 0.1
tau_end = 6.0
output_every = 0.5

[initial_data]
family = "gaussian_bump"
center = 10.0
width = 2.0
amplitude = 1.0

[[observers]]
kind = "scri"

[[observers]]
kind = "radius"
r = 10.0

[diagnostics]
tme = true
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dirac-tails"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn missing_config_is_an_error() {
    let out = bin().args(["run", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let bad = SMALL.replace("[grid]\n", "[grid]\nresolution = 3\n");
    let e = RunConfig::from_toml_str(&bad).unwrap_err();
    assert!(format!("{e:#}").contains("resolution"), "{e:#}");
    assert!(RunConfig::from_toml_str(&format!("colour = 1\n{SMALL}")).is_err());
    assert!(RunConfig::from_toml_str(&SMALL.replace("n = 128", "n = 63")).is_err());
    assert!(RunConfig::from_toml_str(&SMALL.replace("cfl = 0.5", "cfl = 0.9")).is_err());
    assert!(RunConfig::from_toml_str(&SMALL.replace("twice_m = 1", "twice_m = 2")).is_err());
    assert!(RunConfig::from_toml_str(&SMALL.replace("r = 10.0", "r = 1.0")).is_err());
    assert!(RunConfig::from_toml_str(&SMALL.replace("gaussian_bump", "top_hat")).is_err());
}

#[test]
fn run_is_deterministic_and_reproducible_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let manifest = a.join("manifest.json");
    run_ok(&["run", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    for f in ["series.csv", "diagnostics.csv", "checkpoint.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
        assert_eq!(read(&a.join(f)), read(&c.join(f)), "{f} from manifest");
    }
    let series = String::from_utf8(read(&a.join("series.csv"))).unwrap();
    let header = series.lines().next().unwrap();
    assert!(header.starts_with("tau,scri.r,scri.v,scri.psi_plus.re"));
    assert!(header.contains("r10.rad_minus.im"));
    assert_eq!(series.lines().count(), 1 + 13);
    let diag = String::from_utf8(read(&a.join("diagnostics.csv"))).unwrap();
    assert!(diag.lines().next().unwrap().ends_with("tme_residual"));
}

#[test]
fn manifest_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(SMALL).unwrap();
    let m = dirac_tails_cli::run::cmd_run(&cfg, tmp.path()).unwrap();
    let text = fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    let back: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.config, cfg);
    assert!(back.summary.flags["finite"]);
    assert!(back.summary.metrics["charge_initial"] > 0.0);
    assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&m).unwrap());
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[sweep]\nparameter = \"grid.ko_eps\"\nvalues = [0.2, 0.0, 0.1]\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(read(&a.join("sweep.csv")), read(&b.join("sweep.csv")));
    for k in 0..3 {
        let run = format!("run_{k:03}");
        assert_eq!(read(&a.join(&run).join("series.csv")), read(&b.join(&run).join("series.csv")));
    }
    let m: RunManifest = serde_json::from_slice(&read(&a.join("run_001/manifest.json"))).unwrap();
    assert_eq!(m.config.grid.ko_eps, 0.0);
    assert!(m.config.sweep.is_none());
}

#[test]
fn sweep_override_validates_key_and_value() {
    let cfg = RunConfig::from_toml_str(SMALL).unwrap();
    assert_eq!(cfg.with_override("grid.n", &toml::Value::Integer(256)).unwrap().grid.n, 256);
    assert_eq!(cfg.with_override("mass", &toml::Value::Float(2.0)).unwrap().mass, 2.0);
    assert!(cfg.with_override("grid.size", &toml::Value::Integer(256)).is_err());
    assert!(cfg.with_override("grid.n", &toml::Value::Integer(7)).is_err());
    assert!(cfg.with_override("grid.n", &toml::Value::String("x".into())).is_err());
}

#[test]
fn chart_dump_tabulates_every_node() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    run_ok(&["chart-dump", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let text = fs::read_to_string(tmp.path().join("chart.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 129);
    assert!(text.lines().next().unwrap().starts_with("sigma,rho,mu"));
}

#[test]
fn convergence_needs_three_levels_and_flags_coarse_grids() {
    let cfg = RunConfig::from_toml_str(&SMALL.replace("n = 128", "n = 64").replace("ko_eps = 0.1", "ko_eps = 0.0")).unwrap();
    assert!(studies::convergence(&cfg, 2, 1).is_err());
    let (report, _) = studies::convergence(&cfg, 3, 1).unwrap();
    assert_eq!(report.levels.iter().map(|l| l.n).collect::<Vec<_>>(), vec![64, 128, 256]);
    assert_eq!(report.orders.len(), 2);
    assert!(report.pre_asymptotic, "{report:?}");
}

#[test]
fn self_convergence_order_of_a_fourth_order_sequence() {
    // u_h = 1 + h⁴ at each node: differences shrink by 16.
    let mk = |n: usize| vec![dirac_tails::Complex64::new(1.0 + (1.0 / n as f64).powi(4), 0.0); n + 1];
    let (l2, mx) = studies::self_convergence_order(&mk(8), &mk(16), &mk(32));
    assert!((l2 - 4.0).abs() < 1e-9 && (mx - 4.0).abs() < 1e-9);
}

#[test]
fn pricelaw_is_inconclusive_before_the_window() {
    let text = SMALL.replace("tau_end = 6.0", "tau_end = 20.0")
        + "\n[pricelaw]\nfamily = \"vanishing\"\nwindow = [400.0, 800.0]\nratio_at = 700.0\n";
    let cfg = RunConfig::from_toml_str(&text).unwrap();
    let (report, _) = studies::pricelaw(&cfg).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
    assert!(report.constant.unwrap().norm() > 0.0);
    let wrong = text.replace("family = \"vanishing\"", "family = \"higher_mode\"");
    assert!(RunConfig::from_toml_str(&wrong).is_err());
}

#[test]
fn timeintegral_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("n = 128", "n = 512");
    let cfg = write_config(tmp.path(), "ti.toml", &text);
    let stdout = run_ok(&["timeintegral", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(stdout.contains("N1'"));
    let r: serde_json::Value = serde_json::from_slice(&read(&tmp.path().join("timeintegral.json"))).unwrap();
    assert!(r["integrability_residual"].as_f64().unwrap() < 1e-6);
    let csv = fs::read_to_string(tmp.path().join("timeintegral.csv")).unwrap();
    assert!(csv.lines().count() > 500);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
