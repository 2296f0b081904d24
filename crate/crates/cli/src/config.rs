//! TOML run configuration.

use anyhow::{anyhow, bail, Context, Result};
use dirac_tails::background::{build_chart, BackgroundChart, BlackHoleParams, SlicingProfile};
use dirac_tails::evolve::{make_initial_data, EvolutionConfig, InitialDataSpec, ModeState, Observer};
use dirac_tails::swsh::{ModeIndex, SpinWeight};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub ell: u32,
    /// `2m`, odd.
    pub twice_m: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Number of σ intervals.
    pub n: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_ko")]
    pub ko_eps: f64,
    pub tau_end: f64,
    #[serde(default = "default_output_every")]
    pub output_every: f64,
}

fn default_mass() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.25
}
fn default_ko() -> f64 {
    0.1
}
fn default_output_every() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Overridden by `--out`.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsToggles {
    /// N–P columns in `diagnostics.csv` (ℓ = 1 only).
    #[serde(default = "default_true")]
    pub np: bool,
    /// Teukolsky residual column in `diagnostics.csv`.
    #[serde(default)]
    pub tme: bool,
    /// Final state as `checkpoint.csv`.
    #[serde(default = "default_true")]
    pub checkpoint: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        Self { np: true, tme: false, checkpoint: true }
    }
}

/// Which tail law a price-law study checks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    /// `ℓ = 1`, `N₁ ≠ 0`
    Nonvanishing,
    /// `ℓ = 1`, `N₁ = 0`; amplitudes use `N′₁` from the time integral.
    Vanishing,
    /// `ℓ₀ ≥ 2`, compact data
    HigherMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceLawConfig {
    pub family: TailFamily,
    /// LPI window `[τ_a, τ_b]`.
    pub window: [f64; 2],
    /// Time at which amplitude ratios are taken.
    pub ratio_at: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted key into this configuration, e.g. `grid.ko_eps`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
    /// Optional tail-fit window for the per-run summary.
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeIntegralConfig {
    /// Slice on which the time integral is taken; the data are evolved there first.
    #[serde(default)]
    pub tau0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub mode: ModeConfig,
    /// Defaults to [`SlicingProfile::default_for`] the mass.
    pub slicing: Option<SlicingProfile>,
    pub grid: GridConfig,
    pub initial_data: InitialDataSpec,
    #[serde(default)]
    pub observers: Vec<Observer>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
    pub pricelaw: Option<PriceLawConfig>,
    pub time_integral: Option<TimeIntegralConfig>,
    pub sweep: Option<SweepConfig>,
}

/// Everything a run needs, built and validated from a [`RunConfig`].
pub struct Prepared {
    pub chart: BackgroundChart,
    pub state: ModeState,
    pub evolution: EvolutionConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| anyhow!("invalid config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the config embedded in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: crate::output::RunManifest =
                serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))?;
            m.config.validate()?;
            return Ok(m.config);
        }
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn params(&self) -> Result<BlackHoleParams> {
        Ok(BlackHoleParams::new(self.mass)?)
    }

    pub fn slicing_profile(&self) -> SlicingProfile {
        self.slicing.unwrap_or_else(|| SlicingProfile::default_for(self.mass))
    }

    pub fn mode_index(&self) -> Result<ModeIndex> {
        let mode = ModeIndex::new(self.mode.ell, self.mode.twice_m)?;
        mode.check(SpinWeight::PLUS_HALF)?;
        Ok(mode)
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            n: self.grid.n,
            cfl: self.grid.cfl,
            ko_eps: self.grid.ko_eps,
            tau_end: self.grid.tau_end,
            output_every: self.grid.output_every,
            observers: self.observers.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        self.slicing_profile().validate(&params)?;
        self.mode_index()?;
        self.evolution().validate(self.mass)?;
        if !(self.grid.tau_end >= 0.0) {
            bail!("grid.tau_end must be nonnegative");
        }
        if let Some(p) = &self.pricelaw {
            if !(p.window[1] > p.window[0] && p.window[0] >= 0.0) {
                bail!("pricelaw.window must be increasing");
            }
            if p.family != TailFamily::HigherMode && self.mode.ell != 1 {
                bail!("pricelaw family {:?} needs l = 1", p.family);
            }
            if p.family == TailFamily::HigherMode && self.mode.ell < 2 {
                bail!("pricelaw family higher_mode needs l >= 2");
            }
            if !(p.radius > 2.0 * self.mass) {
                bail!("pricelaw.radius must lie outside the horizon");
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bail!("sweep.values is empty");
            }
        }
        Ok(())
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let chart = build_chart(self.params()?, self.slicing_profile(), self.grid.n)?;
        let state = make_initial_data(&self.initial_data, &chart, self.mode_index()?)?;
        Ok(Prepared { chart, state, evolution: self.evolution() })
    }

    /// Copy with one dotted key replaced; the result is re-validated.
    pub fn with_override(&self, key: &str, value: &toml::Value) -> Result<Self> {
        let mut root = toml::Value::try_from(self).context("config does not serialise")?;
        let mut cur = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let table = cur.as_table_mut().ok_or_else(|| anyhow!("sweep key {key}: {part} is not inside a table"))?;
            if k + 1 == parts.len() {
                if !table.contains_key(*part) {
                    bail!("sweep key {key} does not name a field present in the config");
                }
                table.insert(part.to_string(), value.clone());
                break;
            }
            cur = table.get_mut(*part).ok_or_else(|| anyhow!("sweep key {key}: no table {part}"))?;
        }
        let mut out: RunConfig = root.try_into().map_err(|e| anyhow!("sweep override {key} = {value}: {e}"))?;
        out.sweep = None;
        out.validate()?;
        Ok(out)
    }
}
