//! Flag and TOML configuration: every section is one struct that clap parses
//! from `--field` flags and serde reads from a `[section]` table. Flags win
//! over the file; anything still unset gets its default and is recorded.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use condensate_core::dynamics::Scheme;
use condensate_core::Boundary;
use condensate_sweep::linear_grid;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Angle in radians. Parses decimals and the literals `pi`, `-pi`, `pi/2`,
/// `2pi/3`, `3*pi/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        if let Ok(v) = t.parse::<f64>() {
            return if v.is_finite() { Ok(Angle(v)) } else { Err(format!("angle '{s}' is not finite")) };
        }
        let bad = || format!("cannot parse angle '{s}' (use radians or forms like pi, pi/2, 2pi/3)");
        let (num, den) = match t.split_once('/') {
            Some((a, b)) => (a, b.parse::<f64>().map_err(|_| bad())?),
            None => (t.as_str(), 1.0),
        };
        let coef = num.strip_suffix("pi").ok_or_else(bad)?;
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().map_err(|_| bad())?,
        };
        if den == 0.0 {
            return Err(bad());
        }
        // Exact for the special values: pi, pi/2 and 0 come out bit-identical
        // to the constants.
        Ok(Angle(if c == 1.0 && den == 1.0 { PI } else { c * PI / den }))
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Angle(v)),
            Raw::Int(v) => Ok(Angle(v as f64)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A list of values. Parses `a,b,c` or an inclusive range `start:stop:step`
/// (descending when `stop < start`); in TOML either an array or such a string.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("cannot parse grid '{s}' (use a,b,c or start:stop:step)");
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let v = match parts.len() {
            1 => s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?,
            3 => {
                let n: Vec<f64> = parts.iter().map(|x| x.parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
                let (a, b, step) = (n[0], n[1], n[2]);
                if !(step > 0.0) {
                    return Err(format!("grid step must be > 0 in '{s}'"));
                }
                if b >= a {
                    linear_grid(a, b, step)
                } else {
                    linear_grid(0.0, a - b, step)
                        .iter()
                        .map(|x| format!("{:.12}", a - x).parse().unwrap())
                        .collect()
                }
            }
            _ => return Err(bad()),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        Ok(Grid(v))
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Num {
            F(f64),
            I(i64),
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<Num>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Grid(
                v.into_iter()
                    .map(|x| match x {
                        Num::F(f) => f,
                        Num::I(i) => i as f64,
                    })
                    .collect(),
            )),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Fills `None` fields of `self` from `other`.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

macro_rules! merge_fields {
    ($ty:ty; $($f:ident),* $(,)?) => {
        impl Merge for $ty {
            fn merge(&mut self, other: Self) {
                $( if self.$f.is_none() { self.$f = other.$f; } )*
            }
        }
    };
}

/// Records which fields fell back to their defaults.
#[derive(Debug, Default)]
pub struct Defaults {
    pub fields: Vec<String>,
}

impl Defaults {
    pub fn fill<T>(&mut self, slot: &mut Option<T>, section: &str, name: &str, value: T) {
        if slot.is_none() {
            *slot = Some(value);
            self.fields.push(format!("{section}.{name}"));
        }
    }
}

fn bool_flag() -> clap::builder::ValueParser {
    clap::builder::BoolishValueParser::new().into()
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    /// Coherent hopping J.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    /// Correlated loss gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Pump kappa.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Two-body loss Gamma.
    #[arg(long = "Gamma")]
    #[serde(rename = "Gamma")]
    pub big_gamma: Option<f64>,
    /// Dissipative phase theta (radians, or pi, pi/2, ...).
    #[arg(long)]
    pub theta: Option<Angle>,
    /// Number of sites.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// open | periodic
    #[arg(long)]
    pub boundary: Option<Boundary>,
}
merge_fields!(ModelArgs; j, gamma, kappa, big_gamma, theta, n, boundary);

impl ModelArgs {
    pub fn resolve(&mut self, d: &mut Defaults, boundary: Boundary) {
        d.fill(&mut self.j, "model", "J", 1.0);
        d.fill(&mut self.gamma, "model", "gamma", 0.0);
        d.fill(&mut self.kappa, "model", "kappa", 0.0);
        d.fill(&mut self.big_gamma, "model", "Gamma", 1.0);
        d.fill(&mut self.theta, "model", "theta", Angle(PI));
        d.fill(&mut self.n, "model", "N", 100);
        d.fill(&mut self.boundary, "model", "boundary", boundary);
    }

    pub fn params(&self) -> Result<condensate_core::ModelParams, CliError> {
        Ok(condensate_core::ModelParams::builder()
            .hopping(self.j.unwrap())
            .corr_loss(self.gamma.unwrap())
            .pump(self.kappa.unwrap())
            .pair_loss(self.big_gamma.unwrap())
            .theta(self.theta.unwrap().0)
            .sites(self.n.unwrap())
            .boundary(self.boundary.unwrap())
            .build()?)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct IntegrationArgs {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_transient: Option<f64>,
    #[arg(long)]
    pub t_measure: Option<f64>,
    #[arg(long)]
    pub sample_stride: Option<usize>,
    /// rk4 | rk45
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
}
merge_fields!(IntegrationArgs; dt, t_transient, t_measure, sample_stride, scheme, abs_tol, rel_tol);

impl IntegrationArgs {
    pub fn resolve(&mut self, d: &mut Defaults) {
        let c = condensate_core::dynamics::IntegrationConfig::default();
        d.fill(&mut self.dt, "integration", "dt", c.dt);
        d.fill(&mut self.t_transient, "integration", "t_transient", c.t_transient);
        d.fill(&mut self.t_measure, "integration", "t_measure", c.t_measure);
        d.fill(&mut self.sample_stride, "integration", "sample_stride", c.sample_stride);
        d.fill(&mut self.scheme, "integration", "scheme", c.scheme);
        d.fill(&mut self.abs_tol, "integration", "abs_tol", c.abs_tol);
        d.fill(&mut self.rel_tol, "integration", "rel_tol", c.rel_tol);
    }

    pub fn config(&self, seed: u64) -> Result<condensate_core::dynamics::IntegrationConfig, CliError> {
        let c = condensate_core::dynamics::IntegrationConfig {
            dt: self.dt.unwrap(),
            t_transient: self.t_transient.unwrap(),
            t_measure: self.t_measure.unwrap(),
            sample_stride: self.sample_stride.unwrap(),
            scheme: self.scheme.unwrap(),
            abs_tol: self.abs_tol.unwrap(),
            rel_tol: self.rel_tol.unwrap(),
            seed,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Random initial condition.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct InitialArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Amplitude scale of the random initial state.
    #[arg(long)]
    pub ic_scale: Option<f64>,
}
merge_fields!(InitialArgs; seed, ic_scale);

impl InitialArgs {
    pub fn resolve(&mut self, d: &mut Defaults) {
        d.fill(&mut self.seed, "initial", "seed", 0);
        d.fill(&mut self.ic_scale, "initial", "ic_scale", 0.1);
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct SpectrumArgs {
    /// Also write the dense numerical spectrum.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub numeric: Option<bool>,
}
merge_fields!(SpectrumArgs; numeric);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct PbcArgs {
    /// Pump values (a,b,c or start:stop:step); default the model kappa.
    #[arg(long)]
    pub kappas: Option<Grid>,
    /// Momentum indices m (q = 2 pi m / N); default all.
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    #[arg(long)]
    pub k_refine: Option<usize>,
    #[arg(long)]
    pub stability_tol: Option<f64>,
}
merge_fields!(PbcArgs; kappas, ms, k_refine, stability_tol);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct SimulateArgs {
    /// Also write the trajectory as CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub csv: Option<bool>,
}
merge_fields!(SimulateArgs; csv);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct OrderArgs {
    /// Pump values; default the model kappa.
    #[arg(long)]
    pub kappas: Option<Grid>,
    /// Initial conditions per pump, seeds `seed .. seed + n_seeds`.
    #[arg(long)]
    pub n_seeds: Option<u64>,
    /// First bulk site (1-based, inclusive).
    #[arg(long)]
    pub bulk_first: Option<usize>,
    /// Last bulk site (1-based, inclusive).
    #[arg(long)]
    pub bulk_last: Option<usize>,
}
merge_fields!(OrderArgs; kappas, n_seeds, bulk_first, bulk_last);

/// Static-condensate solver settings.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct StaticArgs {
    #[arg(long)]
    pub relax_time: Option<f64>,
    #[arg(long)]
    pub relax_dt: Option<f64>,
    #[arg(long)]
    pub max_newton: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
}
merge_fields!(StaticArgs; relax_time, relax_dt, max_newton, newton_tol);

impl StaticArgs {
    pub fn resolve(&mut self, d: &mut Defaults) {
        let s = condensate_core::obc::StaticOptions::default();
        d.fill(&mut self.relax_time, "static", "relax_time", s.relax_time);
        d.fill(&mut self.relax_dt, "static", "relax_dt", s.dt);
        d.fill(&mut self.max_newton, "static", "max_newton", s.max_newton);
        d.fill(&mut self.newton_tol, "static", "newton_tol", s.tol);
    }

    pub fn options(&self) -> Result<condensate_core::obc::StaticOptions, CliError> {
        let o = condensate_core::obc::StaticOptions {
            relax_time: self.relax_time.unwrap(),
            dt: self.relax_dt.unwrap(),
            max_newton: self.max_newton.unwrap(),
            tol: self.newton_tol.unwrap(),
        };
        if !(o.relax_time >= 0.0 && o.dt > 0.0 && o.tol > 0.0 && o.max_newton > 0) {
            return Err(CliError::Validation("static: need relax_time >= 0, relax_dt > 0, newton_tol > 0, max_newton >= 1".into()));
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct CepArgs {
    /// Pump values, walked in order; start deep in the static phase.
    #[arg(long)]
    pub kappas: Option<Grid>,
}
merge_fields!(CepArgs; kappas);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct StaticLineArgs {
    /// Loss values; default the model gamma.
    #[arg(long)]
    pub gammas: Option<Grid>,
    #[arg(long)]
    pub kappa_top: Option<f64>,
    #[arg(long)]
    pub kappa_step: Option<f64>,
    /// Bisection tolerance on kappa_c.
    #[arg(long)]
    pub kappa_tol: Option<f64>,
    /// Pumps for the kink-position scaling at the model gamma; skipped if unset.
    #[arg(long)]
    pub kink_kappas: Option<Grid>,
}
merge_fields!(StaticLineArgs; gammas, kappa_top, kappa_step, kappa_tol, kink_kappas);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct LyapunovArgs {
    /// Number of exponents.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub t_total: Option<f64>,
    #[arg(long)]
    pub renorm_interval: Option<f64>,
}
merge_fields!(LyapunovArgs; k, t_total, renorm_interval);

impl LyapunovArgs {
    pub fn resolve(&mut self, d: &mut Defaults) {
        let c = condensate_core::chaos::LyapunovConfig::default();
        d.fill(&mut self.k, "lyapunov", "k", c.k);
        d.fill(&mut self.t_total, "lyapunov", "t_total", c.t_total);
        d.fill(&mut self.renorm_interval, "lyapunov", "renorm_interval", c.renorm_interval);
    }

    pub fn config(&self, dt: f64) -> Result<condensate_core::chaos::LyapunovConfig, CliError> {
        let c = condensate_core::chaos::LyapunovConfig {
            k: self.k.unwrap(),
            dt,
            t_total: self.t_total.unwrap(),
            renorm_interval: self.renorm_interval.unwrap(),
        };
        if c.k == 0 || !(c.t_total > 0.0) || !(c.renorm_interval > 0.0) || c.renorm_interval > c.t_total {
            return Err(CliError::Validation("lyapunov: need k >= 1 and 0 < renorm_interval <= t_total".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct EmbedArgs {
    /// Site (1-based) whose phase is embedded; default N/2.
    #[arg(long)]
    pub site: Option<usize>,
    /// Embedding delay, a multiple of the sampling interval.
    #[arg(long)]
    pub delay: Option<f64>,
    /// Also embed the particle-hole image and report the Hausdorff distance.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub ph: Option<bool>,
    /// Use the unwrapped phase instead of arg in (-pi, pi].
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub unwrap: Option<bool>,
}
merge_fields!(EmbedArgs; site, delay, ph, unwrap);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct SweepArgs {
    #[arg(long)]
    pub kappas: Option<Grid>,
    #[arg(long)]
    pub gammas: Option<Grid>,
    #[arg(long)]
    pub n_initial_conditions: Option<usize>,
    #[arg(long)]
    pub ic_scales: Option<Grid>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Period detection on every time-dependent attractor.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub period: Option<bool>,
    /// Lyapunov spectrum per dynamic attractor, configured by [lyapunov].
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = bool_flag())]
    pub lyapunov: Option<bool>,
    #[arg(long)]
    pub omega_tol: Option<f64>,
    #[arg(long)]
    pub dedup_omega: Option<f64>,
    #[arg(long)]
    pub dedup_q: Option<f64>,
    #[arg(long)]
    pub dedup_amplitude: Option<f64>,
    #[arg(long)]
    pub dedup_period: Option<f64>,
    #[arg(long)]
    pub dedup_edge_extent: Option<usize>,
}
merge_fields!(
    SweepArgs;
    kappas,
    gammas,
    n_initial_conditions,
    ic_scales,
    base_seed,
    period,
    lyapunov,
    omega_tol,
    dedup_omega,
    dedup_q,
    dedup_amplitude,
    dedup_period,
    dedup_edge_extent
);

/// The whole config file. Sections a command does not use are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelArgs,
    #[serde(default)]
    pub integration: IntegrationArgs,
    #[serde(default)]
    pub initial: InitialArgs,
    #[serde(default)]
    pub spectrum: SpectrumArgs,
    #[serde(default)]
    pub pbc: PbcArgs,
    #[serde(default)]
    pub simulate: SimulateArgs,
    #[serde(default)]
    pub order_params: OrderArgs,
    #[serde(default, rename = "static")]
    pub statics: StaticArgs,
    #[serde(default)]
    pub cep: CepArgs,
    #[serde(default)]
    pub static_line: StaticLineArgs,
    #[serde(default)]
    pub lyapunov: LyapunovArgs,
    #[serde(default)]
    pub embed: EmbedArgs,
    #[serde(default)]
    pub sweep: SweepArgs,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// `--config` and `--out`, shared by the single-run commands.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory for outputs (default runs/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved configuration echoed next to every output, in config-file form.
#[derive(Debug, Default)]
pub struct Echo {
    table: toml::Table,
}

impl Echo {
    pub fn section<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = toml::Value::try_from(value).map_err(|e| CliError::Validation(format!("cannot echo [{name}]: {e}")))?;
        self.table.insert(name.to_string(), v);
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.table).expect("tables of plain values always serialize")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.table).expect("toml values map onto json")
    }
}

impl fmt::Display for Echo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}
