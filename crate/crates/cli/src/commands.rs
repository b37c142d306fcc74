// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use weakval_core::lindblad::Evolution;
use weakval_core::meter::{
    commutator_averages, invert_weak_value, jc_shifts, rabi_shifts_number_state, simulate_jc, simulate_rabi,
    Interaction,
};
use weakval_core::operator::{sigma_minus, sigma_plus};
use weakval_core::scenarios::{self, Noise, ScenarioResult, ShortTimeChannel};
use weakval_core::weakvalue::{trace_over_tau, weak_value_dissipative};
use weakval_core::{Error, MeterAverages, ShiftReport, C64};

use crate::config::{MeterModel, RunConfig};
use crate::output::{fmt_f64, to_csv, to_json, trace_csv, write_atomic};
use crate::{ChannelName, Cli, CliError, Command, Format, ScenarioArgs, ScenarioName};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::WeakValue { config } => weak_value(cli, &RunConfig::from_path(config)?),
        Command::Scenario(args) => scenario(cli, args),
        Command::Invert { config } => invert(cli, &RunConfig::from_path(config)?),
        Command::Shifts { config, simulate } => shifts(cli, &RunConfig::from_path(config)?, *simulate),
    }
}

fn out_path(cli: &Cli, stem: &str, ext: &str) -> PathBuf {
    cli.out.join(format!("{stem}.{ext}"))
}

fn report_written(path: &Path) {
    println!("wrote {}", path.display());
}

/// Dissipation times for the configured `Gamma tau` grid.
fn taus(cfg: &RunConfig, ev: &dyn Evolution) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let grid = cfg.sweep()?.grid()?;
    let scale = ev.rate_scale();
    let taus = grid.iter().map(|g| g / scale).collect();
    Ok((grid, taus))
}

pub fn weak_value(cli: &Cli, cfg: &RunConfig) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let ev = cfg.channel()?.build(setup.dim())?;
    let (_, taus) = taus(cfg, ev.as_ref())?;
    let trace = trace_over_tau(&setup, ev.as_ref(), &taus)?;
    log::info!("{}: {} points, {} gaps", ev.describe(), trace.len(), trace.gap_count());
    if trace.gap_count() == trace.len() {
        return Err(CliError::AllGaps);
    }
    let stem = cfg.output.stem.as_deref().unwrap_or("trace");
    let (path, bytes) = match cli.format {
        Format::Csv => (out_path(cli, stem, "csv"), trace_csv(&trace)?),
        Format::Json => (out_path(cli, stem, "json"), to_json(&trace)?),
    };
    write_atomic(&path, &bytes)?;
    report_written(&path);
    Ok(())
}

fn scenario_param_err(e: Error) -> CliError {
    match e {
        Error::InvalidParameter(_) | Error::EpsilonOutOfRange(_) => CliError::Config(e.to_string()),
        other => CliError::Core(other),
    }
}

pub fn run_scenario(args: &ScenarioArgs, seed: Option<u64>) -> Result<ScenarioResult, CliError> {
    let noise = args.noise.map(|sigma| Noise {
        sigma,
        seed: seed.unwrap_or(0),
    });
    let res = match args.name {
        ScenarioName::SodiumAnomalous => scenarios::sodium_anomalous(),
        ScenarioName::SodiumConstant => scenarios::sodium_constant(),
        ScenarioName::EstimateGamma => scenarios::estimate_gamma_scenario(args.gamma, args.epsilon, noise),
        ScenarioName::Classify => {
            let ch = match args.channel {
                ChannelName::AmplitudeDamping => ShortTimeChannel::AmplitudeDamping { gamma: args.gamma },
                ChannelName::NonmarkovJc => ShortTimeChannel::NonmarkovJc {
                    gamma0: args.gamma0,
                    lambda: args.lambda,
                },
            };
            scenarios::classify_scenario(ch, args.epsilon, noise)
        }
        ScenarioName::EstimateLambda => {
            scenarios::estimate_lambda_scenario(args.gamma0, args.lambda, args.epsilon, noise)
        }
    };
    res.map_err(scenario_param_err)
}

pub fn scenario(cli: &Cli, args: &ScenarioArgs) -> Result<(), CliError> {
    let res = run_scenario(args, cli.seed)?;
    let name = args.name.as_str();
    let json = out_path(cli, name, "json");
    write_atomic(&json, &to_json(&res)?)?;
    report_written(&json);
    if let Some(trace) = &res.trace {
        let csv = out_path(cli, name, "csv");
        write_atomic(&csv, &trace_csv(trace)?)?;
        report_written(&csv);
    }
    for c in &res.checks {
        println!(
            "{} {} value={} tolerance={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            fmt_f64(c.value),
            fmt_f64(c.tolerance)
        );
    }
    if !res.passed() {
        let failed: Vec<_> = res.failures().map(|c| c.name.clone()).collect();
        return Err(CliError::Assertion(format!("{name}: {}", failed.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct InversionReport {
    weak_value: C64,
    q: f64,
    p: f64,
    g: f64,
    t: f64,
    tau: f64,
    averages: MeterAverages,
}

pub fn invert(cli: &Cli, cfg: &RunConfig) -> Result<(), CliError> {
    let meter = cfg.meter()?;
    let measured = cfg
        .measured
        .as_ref()
        .ok_or_else(|| CliError::Config("missing field `measured`".into()))?;
    if !(measured.tau >= 0.0) {
        return Err(CliError::Config("field `measured.tau`: must be non-negative".into()));
    }
    let space = meter.space()?;
    let state = meter.state()?;
    let averages = commutator_averages(&space, &state, meter.t, measured.tau)?;
    let wv = invert_weak_value(measured.q, measured.p, &averages, meter.g, meter.t)?;
    println!("{} {}", fmt_f64(wv.re), fmt_f64(wv.im));
    let report = InversionReport {
        weak_value: wv,
        q: measured.q,
        p: measured.p,
        g: meter.g,
        t: meter.t,
        tau: measured.tau,
        averages,
    };
    let stem = cfg.output.stem.as_deref().unwrap_or("invert");
    let path = out_path(cli, stem, "json");
    write_atomic(&path, &to_json(&report)?)?;
    report_written(&path);
    Ok(())
}

struct ShiftRow {
    gamma_tau: f64,
    report: Option<ShiftReport>,
    simulated: Option<(f64, f64)>,
}

pub fn shifts(cli: &Cli, cfg: &RunConfig, simulate: bool) -> Result<(), CliError> {
    let meter = cfg.meter()?;
    let space = meter.space()?;
    let state = meter.state()?;
    let n = state
        .occupation()
        .ok_or_else(|| CliError::Config("field `meter.state`: shifts need a number-diagonal state".into()))?;
    let setup = match meter.model {
        MeterModel::Rabi => cfg.setup()?,
        MeterModel::Jc => cfg.setup_with(sigma_plus())?,
    };
    if meter.model == MeterModel::Jc && setup.dim() != 2 {
        return Err(CliError::Config("field `meter.model`: jc needs a two-level system".into()));
    }
    let ev = cfg.channel()?.build(setup.dim())?;
    let (grid, taus) = taus(cfg, ev.as_ref())?;
    let (g, t, delta) = (meter.g, meter.t, meter.delta);

    log::info!("{:?} meter, {} points, n_max {}", meter.model, grid.len(), meter.n_max);
    let rows = grid
        .par_iter()
        .zip(&taus)
        .map(|(&gamma_tau, &tau)| -> Result<ShiftRow, CliError> {
            let vanishing = |r: Result<C64, Error>| match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::PostselectionVanishes(_)) => Ok(None),
                Err(e) => Err(e),
            };
            let report = match meter.model {
                MeterModel::Rabi => vanishing(weak_value_dissipative(&setup, ev.as_ref(), tau).map(|w| w.value))?
                    .map(|wv| rabi_shifts_number_state(n, wv, g, t, tau, &space)),
                MeterModel::Jc => {
                    let wp = vanishing(weak_value_dissipative(&setup, ev.as_ref(), tau).map(|w| w.value))?;
                    let minus = setup.with_observable(sigma_minus())?;
                    let wm = vanishing(weak_value_dissipative(&minus, ev.as_ref(), tau).map(|w| w.value))?;
                    wp.zip(wm).map(|(wp, wm)| jc_shifts(wp, wm, n, g, t, tau, &space, delta))
                }
            };
            let simulated = if simulate && report.is_some() {
                let r = match meter.model {
                    MeterModel::Rabi => simulate_rabi(&setup, ev.as_ref(), &state, &space, tau, Interaction::Exact),
                    MeterModel::Jc => simulate_jc(&setup, ev.as_ref(), &state, &space, tau, delta, Interaction::Exact),
                };
                vanishing(r.map(|r| C64::new(r.q, r.p)))?.map(|z| (z.re, z.im))
            } else {
                None
            };
            Ok(ShiftRow {
                gamma_tau,
                report,
                simulated,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    if rows.iter().all(|r| r.report.is_none()) {
        return Err(CliError::AllGaps);
    }
    let stem = cfg.output.stem.as_deref().unwrap_or("shifts");
    let (path, bytes) = match cli.format {
        Format::Json => {
            let reports: Vec<Option<&ShiftReport>> = rows.iter().map(|r| r.report.as_ref()).collect();
            (out_path(cli, stem, "json"), to_json(&reports)?)
        }
        Format::Csv => {
            let mut header = vec!["gamma_tau"];
            match meter.model {
                MeterModel::Rabi => header.extend(["re_wv", "im_wv"]),
                MeterModel::Jc => header.extend(["re_wv_plus", "im_wv_plus", "re_wv_minus", "im_wv_minus"]),
            }
            header.extend(["q_shift", "p_shift"]);
            if simulate {
                header.extend(["q_simulated", "p_simulated"]);
            }
            let width = header.len();
            let body = rows.iter().map(|r| {
                let mut row = vec![fmt_f64(r.gamma_tau)];
                match &r.report {
                    Some(rep) => {
                        for w in &rep.weak_values {
                            row.extend([fmt_f64(w.re), fmt_f64(w.im)]);
                        }
                        row.extend([fmt_f64(rep.q_shift), fmt_f64(rep.p_shift)]);
                    }
                    None => row.resize(width - if simulate { 2 } else { 0 }, fmt_f64(f64::NAN)),
                }
                if simulate {
                    let (q, p) = r.simulated.unwrap_or((f64::NAN, f64::NAN));
                    row.extend([fmt_f64(q), fmt_f64(p)]);
                }
                row
            });
            (out_path(cli, stem, "csv"), to_csv(&header, body)?)
        }
    };
    write_atomic(&path, &bytes)?;
    report_written(&path);
    Ok(())
}
