// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a versioned JSON document. Unknown fields are rejected
//! and errors carry the offending field path and line.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use weakval_core::lindblad::{build_dissipator, sodium_dissipator, AnalyticChannel, Evolution};
use weakval_core::meter::MeterState;
use weakval_core::operator::{jy_six_level, ket, pauli, pauli_dot, sigma_minus, sigma_plus, Axis};
use weakval_core::scenarios::{sodium_anomalous_post_ket, sodium_constant_post_ket, sodium_initial_ket};
use weakval_core::weakvalue::epsilon_kets;
use weakval_core::{
    BlochVector, DissipationChannel, FockSpace, Operator, Rate, WeakMeasurementSetup, C64,
};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Real number or `[re, im]` pair.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Num> for C64 {
    fn from(n: Num) -> C64 {
        match n {
            Num::Real(x) => C64::new(x, 0.0),
            Num::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub system: Option<SystemSpec>,
    pub observable: Option<ObservableSpec>,
    pub channel: Option<ChannelSpec>,
    pub sweep: Option<SweepSpec>,
    pub meter: Option<MeterSpec>,
    pub measured: Option<MeasuredSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dim: usize,
    pub initial: StateSpec,
    pub postselection: StateSpec,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Ket(Vec<Num>),
    Density(Vec<Vec<Num>>),
    Bloch([f64; 3]),
    Named(NamedState),
    EpsilonInitial(f64),
    EpsilonPost(f64),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    Excited,
    Ground,
    SodiumInitial,
    SodiumAnomalousPost,
    SodiumConstantPost,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Named(NamedObservable),
    Matrix(Vec<Vec<Num>>),
    /// `identity * 1 + coefficients . sigma`.
    Pauli {
        #[serde(default = "zero")]
        identity: Num,
        coefficients: [Num; 3],
    },
}

fn zero() -> Num {
    Num::Real(0.0)
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedObservable {
    Jy6,
    SigmaX,
    SigmaY,
    SigmaZ,
    SigmaPlus,
    SigmaMinus,
    Identity,
}

/// How a two-level channel is propagated.
#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ClosedForm,
    Numeric,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    AmplitudeDamping {
        gamma: f64,
        #[serde(default)]
        method: Method,
    },
    Sodium {
        gamma: f64,
    },
    NonmarkovJc {
        gamma0: f64,
        lambda: f64,
        #[serde(default)]
        method: Method,
    },
    Custom {
        jumps: Vec<JumpSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub matrix: Vec<Vec<Num>>,
    pub rate: f64,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Grid in units of the channel rate (`Gamma tau`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MeterModel {
    #[default]
    Rabi,
    Jc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterSpec {
    pub omega_f: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    pub state: MeterStateSpec,
    pub g: f64,
    pub t: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub model: MeterModel,
}

fn default_n_max() -> usize {
    FockSpace::DEFAULT_N_MAX
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeterStateSpec {
    Vacuum,
    Number { n: usize },
    Thermal {
        #[serde(default)]
        n_eq: Option<f64>,
        #[serde(default)]
        k_b_t: Option<f64>,
    },
}

/// Quadrature averages read off the meter, with the dissipation time `tau`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSpec {
    pub q: f64,
    pub p: f64,
    #[serde(default)]
    pub tau: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub stem: Option<String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core_config_err(field: &str) -> impl Fn(weakval_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            config_err(format!("field `{path}`: {inner}"))
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(config_err(format!(
                "field `version`: unsupported version {}, expected {CONFIG_VERSION}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<&SystemSpec, CliError> {
        self.system.as_ref().ok_or_else(|| config_err("missing field `system`"))
    }

    pub fn channel(&self) -> Result<&ChannelSpec, CliError> {
        self.channel.as_ref().ok_or_else(|| config_err("missing field `channel`"))
    }

    pub fn sweep(&self) -> Result<&SweepSpec, CliError> {
        self.sweep.as_ref().ok_or_else(|| config_err("missing field `sweep`"))
    }

    pub fn meter(&self) -> Result<&MeterSpec, CliError> {
        self.meter.as_ref().ok_or_else(|| config_err("missing field `meter`"))
    }

    pub fn observable_op(&self, dim: usize) -> Result<Operator, CliError> {
        let spec = self.observable.as_ref().ok_or_else(|| config_err("missing field `observable`"))?;
        let op = spec.build()?;
        if op.dim() != dim {
            return Err(config_err(format!(
                "field `observable`: dimension {} does not match system.dim {dim}",
                op.dim()
            )));
        }
        Ok(op)
    }

    /// Setup with the configured observable and, when present, the meter coupling.
    pub fn setup(&self) -> Result<WeakMeasurementSetup, CliError> {
        let sys = self.system()?;
        let obs = self.observable_op(sys.dim)?;
        self.setup_with(obs)
    }

    pub fn setup_with(&self, observable: Operator) -> Result<WeakMeasurementSetup, CliError> {
        let sys = self.system()?;
        let si = sys.initial.build(sys.dim).map_err(|e| prefix("system.initial", e))?;
        let sf = sys.postselection.build(sys.dim).map_err(|e| prefix("system.postselection", e))?;
        let mut setup = WeakMeasurementSetup::new(si, sf, observable).map_err(core_config_err("system"))?;
        if let Some(m) = &self.meter {
            setup = setup.with_coupling(m.g, m.t).map_err(core_config_err("meter"))?;
        }
        Ok(setup)
    }
}

fn prefix(field: &str, e: CliError) -> CliError {
    match e {
        CliError::Config(m) => CliError::Config(format!("field `{field}`: {m}")),
        other => other,
    }
}

fn matrix_from_rows(rows: &[Vec<Num>]) -> Result<Operator, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config_err("matrix must be square and non-empty"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| C64::from(rows[i][j]));
    Operator::from_matrix(m).map_err(|e| config_err(e.to_string()))
}

fn named_ket(name: NamedState) -> DVector<C64> {
    match name {
        NamedState::Excited => ket(2, 0),
        NamedState::Ground => ket(2, 1),
        NamedState::SodiumInitial => sodium_initial_ket(),
        NamedState::SodiumAnomalousPost => sodium_anomalous_post_ket(),
        NamedState::SodiumConstantPost => sodium_constant_post_ket(),
    }
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<Operator, CliError> {
        let rho = match self {
            StateSpec::Ket(amps) => {
                let v = DVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::from(a)));
                Operator::pure_state(&v).map_err(|e| config_err(e.to_string()))?
            }
            StateSpec::Density(rows) => matrix_from_rows(rows)?,
            StateSpec::Bloch([x, y, z]) => BlochVector::new(*x, *y, *z)
                .to_density()
                .map_err(|e| config_err(e.to_string()))?,
            StateSpec::Named(name) => Operator::pure_state(&named_ket(*name)).map_err(|e| config_err(e.to_string()))?,
            StateSpec::EpsilonInitial(eps) | StateSpec::EpsilonPost(eps) => {
                let (i, f) = epsilon_kets(*eps).map_err(|e| config_err(e.to_string()))?;
                let v = if matches!(self, StateSpec::EpsilonInitial(_)) { i } else { f };
                Operator::pure_state(&v).map_err(|e| config_err(e.to_string()))?
            }
        };
        if rho.dim() != dim {
            return Err(config_err(format!("dimension {} does not match system.dim {dim}", rho.dim())));
        }
        Ok(rho)
    }
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Operator, CliError> {
        Ok(match self {
            ObservableSpec::Named(n) => match n {
                NamedObservable::Jy6 => jy_six_level(),
                NamedObservable::SigmaX => pauli(Axis::X),
                NamedObservable::SigmaY => pauli(Axis::Y),
                NamedObservable::SigmaZ => pauli(Axis::Z),
                NamedObservable::SigmaPlus => sigma_plus(),
                NamedObservable::SigmaMinus => sigma_minus(),
                NamedObservable::Identity => Operator::identity(2),
            },
            ObservableSpec::Matrix(rows) => matrix_from_rows(rows).map_err(|e| prefix("observable.matrix", e))?,
            ObservableSpec::Pauli {
                identity,
                coefficients,
            } => {
                let m = coefficients.map(C64::from);
                &(&Operator::identity(2) * C64::from(*identity)) + &pauli_dot(m)
            }
        })
    }
}

impl ChannelSpec {
    pub fn build(&self, dim: usize) -> Result<Box<dyn Evolution>, CliError> {
        let err = core_config_err("channel");
        let need_two = |name: &str| {
            if dim != 2 {
                Err(config_err(format!("field `channel`: {name} acts on two levels, system.dim is {dim}")))
            } else {
                Ok(())
            }
        };
        Ok(match *self {
            ChannelSpec::AmplitudeDamping { gamma, method } => {
                need_two("amplitude_damping")?;
                match method {
                    Method::ClosedForm => {
                        let ch = AnalyticChannel::AmplitudeDamping { gamma };
                        ch.validate().map_err(err)?;
                        Box::new(ch)
                    }
                    Method::Numeric => Box::new(weakval_core::lindblad::amplitude_damping(gamma).map_err(err)?),
                }
            }
            ChannelSpec::NonmarkovJc { gamma0, lambda, method } => {
                need_two("nonmarkov_jc")?;
                match method {
                    Method::ClosedForm => {
                        let ch = AnalyticChannel::NonMarkovJc { gamma0, lambda };
                        ch.validate().map_err(err)?;
                        Box::new(ch)
                    }
                    Method::Numeric => Box::new(weakval_core::lindblad::nonmarkov_jc(gamma0, lambda).map_err(err)?),
                }
            }
            ChannelSpec::Sodium { gamma } => {
                if dim != 6 {
                    return Err(config_err(format!("field `channel`: sodium acts on six levels, system.dim is {dim}")));
                }
                Box::new(sodium_dissipator(gamma).map_err(err)?)
            }
            ChannelSpec::Custom { ref jumps } => {
                let channels = jumps
                    .iter()
                    .enumerate()
                    .map(|(k, j)| {
                        let l = matrix_from_rows(&j.matrix).map_err(|e| prefix(&format!("channel.jumps[{k}]"), e))?;
                        let label = j.label.clone().unwrap_or_else(|| format!("L{k}"));
                        DissipationChannel::new(l, Rate::constant(j.rate), label).map_err(core_config_err("channel.jumps"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Box::new(build_dissipator(channels, dim).map_err(err)?)
            }
        })
    }
}

impl SweepSpec {
    /// The `Gamma tau` grid.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let bad = |m: &str| config_err(format!("field `sweep`: {m}"));
        if self.count == 0 {
            return Err(bad("count must be positive"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start < 0.0 {
            return Err(bad("start and stop must be finite and non-negative"));
        }
        if self.count > 1 && !(self.stop > self.start) {
            return Err(bad("stop must exceed start"));
        }
        Ok(match self.spacing {
            Spacing::Linear => weakval_core::scenarios::linear_grid(self.start, self.stop, self.count),
            Spacing::Log => {
                if !(self.start > 0.0) {
                    return Err(bad("log spacing needs start > 0"));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                weakval_core::scenarios::linear_grid(a, b, self.count)
                    .into_iter()
                    .map(f64::exp)
                    .collect()
            }
        })
    }
}

impl MeterSpec {
    pub fn space(&self) -> Result<FockSpace, CliError> {
        FockSpace::with_hbar(self.n_max, self.omega_f, self.hbar).map_err(core_config_err("meter"))
    }

    pub fn state(&self) -> Result<MeterState, CliError> {
        Ok(match self.state {
            MeterStateSpec::Vacuum => MeterState::Vacuum,
            MeterStateSpec::Number { n } => MeterState::Number(n),
            MeterStateSpec::Thermal { n_eq, k_b_t } => match (n_eq, k_b_t) {
                (Some(n), None) if n >= 0.0 => MeterState::Thermal { n_eq: n },
                (None, Some(kt)) if kt >= 0.0 => MeterState::thermal_at(self.omega_f, kt, self.hbar),
                _ => {
                    return Err(config_err(
                        "field `meter.state`: thermal needs exactly one non-negative `n_eq` or `k_b_t`",
                    ))
                }
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_names_its_path() {
        let e = RunConfig::parse(r#"{"version": 1, "sweep": {"start": 0, "stop": 1, "count": 2, "extra": 3}}"#)
            .unwrap_err();
        let CliError::Config(msg) = e else { panic!() };
        assert!(msg.contains("sweep") && msg.contains("extra"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn wrong_version_rejected() {
        assert!(matches!(RunConfig::parse(r#"{"version": 2}"#), Err(CliError::Config(_))));
    }

    #[test]
    fn channel_unknown_field_rejected() {
        let e = RunConfig::parse(r#"{"version": 1, "channel": {"kind": "sodium", "gamma": 1, "beta": 2}}"#);
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn complex_entries_parse() {
        let cfg = RunConfig::parse(
            r#"{"version": 1, "system": {"dim": 2, "initial": {"ket": [1, [0, 1]]}, "postselection": {"bloch": [0, 0, 1]}},
                "observable": {"pauli": {"coefficients": [1, 0, 0]}}}"#,
        )
        .unwrap();
        let s = cfg.setup().unwrap();
        assert!((s.sigma_i().get(0, 1) - C64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn log_grid() {
        let s = SweepSpec {
            start: 0.01,
            stop: 1.0,
            count: 3,
            spacing: Spacing::Log,
        };
        let g = s.grid().unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
    }
}
