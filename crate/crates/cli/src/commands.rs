//! The subcommands. Each returns its artifacts in memory; [`Output::write`]
//! puts them on disk.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use mwm_core::csvio::{format_value, CsvTable};
use mwm_core::fit::{
    CurveKind, Dataset, FitOptions, FitProblem, FitResult, FreeParam, ModelParams, Param,
};
use mwm_core::gamma::{
    gamma_pi, gamma_weak, single_mode_g_prime, single_mode_gamma_minus, single_mode_gamma_plus,
};
use mwm_core::oracle::{free_decay, phase_cycle, FockCutoff, OracleExperiment};
use mwm_core::signals::{
    self, time_resolved_curve, weak_polarization_terms_hooked, ExpansionHooks, TimeRule,
};
use mwm_core::units::energy_to_angfreq;
use mwm_core::{
    Coeffs3, DiffractionOrder, EnsembleSpec, Medium, Observable, PulseSequence, SignalCurve,
    SpectralDensity, WeakSignal,
};

use crate::config::{DataKind, RunConfig, SignalKind};
use crate::error::{CliError, CliResult};

/// Files produced by a command plus a human-readable summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    /// (file name, contents), in a fixed order.
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// Set when a verification command found a breach.
    pub breach: Option<String>,
}

impl Output {
    pub fn push_table(&mut self, name: impl Into<String>, table: &CsvTable) -> CliResult<()> {
        self.files.push((name.into(), table.to_string()?));
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// Compact float for file names: 0.2 → "0.2".
fn tag(x: f64) -> String {
    format!("{x}")
}

fn order_name(w: WeakSignal) -> &'static str {
    match w {
        WeakSignal::FourWave => "4wm",
        WeakSignal::SixWave => "6wm",
    }
}

fn parse_weak(name: &str) -> CliResult<WeakSignal> {
    match name.to_ascii_lowercase().as_str() {
        "4wm" => Ok(WeakSignal::FourWave),
        "6wm" => Ok(WeakSignal::SixWave),
        other => DiffractionOrder::parse(other)
            .and_then(|o| WeakSignal::from_order(&o))
            .map_err(|e| CliError::config("order", e)),
    }
}

fn reservoir_meta(meta: &mut Vec<(String, String)>, medium: &Medium<f64>) {
    meta.push(("reservoir".into(), format!("{:?}", medium.reservoir)));
    meta.push(("temperature_K".into(), medium.temperature.to_string()));
}

/// 2α·ln(1 + Ω_c²τ²), Ω_c in rad/ps.
fn ohmic_zero_temperature(alpha: f64, omega_c_mev: f64, tau: f64) -> f64 {
    let w = energy_to_angfreq(omega_c_mev);
    2.0 * alpha * (w * w * tau * tau).ln_1p()
}

/// Closed form of Γ for the π train, where one exists.
fn gamma_closed_form(
    sd: &SpectralDensity<f64>,
    temp: f64,
    times: &[f64],
    t: f64,
) -> CliResult<Option<f64>> {
    Ok(match (sd, times.len()) {
        (&SpectralDensity::Ohmic { alpha, omega_c }, 1) if temp == 0.0 => {
            Some(ohmic_zero_temperature(alpha, omega_c, t - times[0]))
        }
        (&SpectralDensity::SingleMode { g_sq, omega_p }, n @ (1 | 2)) => {
            let gp = single_mode_g_prime(g_sq, omega_p, temp)?;
            let w = energy_to_angfreq(omega_p);
            Some(if n == 1 {
                single_mode_gamma_plus(gp, w, times[0], t)
            } else {
                single_mode_gamma_minus(gp, w, times[0], times[1], t)?
            })
        }
        _ => None,
    })
}

/// Γ(t) of every requested π train and weak coefficient triple.
pub fn cmd_gamma(cfg: &RunConfig) -> CliResult<Output> {
    let sec = cfg
        .gamma
        .as_ref()
        .ok_or_else(|| CliError::config("gamma", "section required"))?;
    let medium = cfg.medium()?;
    let (sd, temp, qc) = (&medium.reservoir, medium.temperature, medium.quad);
    let grid = sec.t.values("gamma.t")?;
    let mut trains = sec.pi_trains.clone();
    if trains.is_empty() && sec.weak_coeffs.is_empty() {
        trains.push(vec![0.0]);
    }
    let mut out = Output::default();
    for (k, times) in trains.iter().enumerate() {
        if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::config("gamma.pi_trains", "each train needs increasing times"));
        }
        let last = *times.last().unwrap();
        let ts: Vec<f64> = grid.iter().copied().filter(|&t| t >= last).collect();
        let rows: Vec<Vec<f64>> = ts
            .par_iter()
            .map(|&t| -> CliResult<Vec<f64>> {
                let g = gamma_pi(sd, temp, times, t, &qc)?;
                Ok(match gamma_closed_form(sd, temp, times, t)? {
                    Some(c) => vec![t, g, c],
                    None => vec![t, g],
                })
            })
            .collect::<CliResult<_>>()?;
        let mut header = vec!["t_ps".to_string(), "gamma".to_string()];
        if rows.first().is_some_and(|r| r.len() == 3) {
            header.push("closed_form".into());
        }
        let mut table = CsvTable::new(header);
        table.meta.push(("variant".into(), "pi_train".into()));
        table.meta.push(("M".into(), (times.len() - 1).to_string()));
        let list: Vec<String> = times.iter().map(|t| t.to_string()).collect();
        table.meta.push(("pulse_times_ps".into(), list.join(" ")));
        reservoir_meta(&mut table.meta, &medium);
        table.rows = rows;
        out.push_table(format!("gamma_pi_{k}_M{}.csv", times.len() - 1), &table)?;
    }
    if !sec.weak_coeffs.is_empty() {
        let times = sec
            .weak_times
            .ok_or_else(|| CliError::config("gamma.weak_times", "required with weak_coeffs"))?;
        for label in &sec.weak_coeffs {
            let c: Coeffs3 = label
                .parse()
                .map_err(|e| CliError::config("gamma.weak_coeffs", e))?;
            let ts: Vec<f64> = grid.iter().copied().filter(|&t| t >= times[2]).collect();
            let rows: Vec<Vec<f64>> = ts
                .par_iter()
                .map(|&t| Ok(vec![t, gamma_weak(sd, temp, &c, times, t, &qc)?]))
                .collect::<CliResult<_>>()?;
            let mut table = CsvTable::new(vec!["t_ps".into(), "gamma".into()]);
            table.meta.push(("variant".into(), format!("weak {c}")));
            let list: Vec<String> = times.iter().map(|t| t.to_string()).collect();
            table.meta.push(("pulse_times_ps".into(), list.join(" ")));
            reservoir_meta(&mut table.meta, &medium);
            table.rows = rows;
            let name: String = label
                .chars()
                .map(|ch| match ch {
                    '+' => 'p',
                    '-' => 'm',
                    other => other,
                })
                .collect();
            out.push_table(format!("gamma_weak_{name}.csv"), &table)?;
        }
    }
    let _ = writeln!(out.summary, "gamma: wrote {} curves", out.files.len());
    Ok(out)
}

fn filtered_curve(
    obs: Observable,
    seq: &PulseSequence<f64>,
    medium: &Medium<f64>,
    grid: &[f64],
) -> CliResult<SignalCurve<f64>> {
    let start = obs.start_time(seq).max(seq.last_time());
    let ts: Vec<f64> = grid.iter().copied().filter(|&t| t >= start).collect();
    Ok(time_resolved_curve(obs, seq, medium, &ts)?)
}

/// Time-resolved intensities of π trains (with the free-induction reference)
/// or of the weak three-pulse echoes.
pub fn cmd_signal(cfg: &RunConfig) -> CliResult<Output> {
    let sec = cfg
        .signal
        .as_ref()
        .ok_or_else(|| CliError::config("signal", "section required"))?;
    let medium = cfg.medium()?;
    let grid = sec.t.values("signal.t")?;
    let mut out = Output::default();
    match sec.kind {
        SignalKind::PiTrain => {
            if sec.m.is_empty() {
                out.summary.push_str("signal: empty M list, nothing to do\n");
                return Ok(out);
            }
            if sec.delta.is_empty() {
                return Err(CliError::config("signal.delta", "need at least one spacing"));
            }
            let theta0 = sec.theta0 * PI;
            let reference = PulseSequence::free_induction(sec.t0, theta0)
                .map_err(|e| CliError::core_config("signal", e))?;
            let curve = filtered_curve(Observable::FreeInduction, &reference, &medium, &grid)?;
            out.push_table("signal_free_induction.csv", &curve.to_table())?;
            let lasts: Vec<Option<f64>> = if sec.last_delta.is_empty() {
                vec![None]
            } else {
                sec.last_delta.iter().copied().map(Some).collect()
            };
            for &m in &sec.m {
                for &d in &sec.delta {
                    for &last in &lasts {
                        let mut times: Vec<f64> =
                            (1..m).map(|k| sec.t0 + d * k as f64).collect();
                        if m > 0 {
                            let prev = times.last().copied().unwrap_or(sec.t0);
                            times.push(prev + last.unwrap_or(d));
                        }
                        let seq = PulseSequence::pi_train(sec.t0, theta0, &times)
                            .map_err(|e| CliError::core_config("signal", e))?;
                        let obs = if m == 0 {
                            Observable::FreeInduction
                        } else {
                            Observable::PiTrain
                        };
                        let mut curve = filtered_curve(obs, &seq, &medium, &grid)?;
                        curve.push_meta("M", m);
                        curve.push_meta("delta_ps", d);
                        let mut name = format!("signal_pi_M{m}_D{}", tag(d));
                        if let Some(l) = last {
                            curve.push_meta("last_delta_ps", l);
                            name.push_str(&format!("_L{}", tag(l)));
                        }
                        out.push_table(format!("{name}.csv"), &curve.to_table())?;
                    }
                }
            }
        }
        SignalKind::Weak => {
            let times = sec
                .times
                .ok_or_else(|| CliError::config("signal.times", "required for weak signals"))?;
            let thetas = sec.thetas.map(|x| x * PI);
            let t1s = if sec.t1.is_empty() { vec![times[1]] } else { sec.t1.clone() };
            for name in &sec.orders {
                let w = parse_weak(name)?;
                for &t1 in &t1s {
                    let seq = PulseSequence::weak_three([times[0], t1, times[2]], thetas)
                        .map_err(|e| CliError::core_config("signal", e))?;
                    let curve = filtered_curve(Observable::Weak(w), &seq, &medium, &grid)?;
                    out.push_table(
                        format!("signal_{}_t1_{}.csv", order_name(w), tag(t1)),
                        &curve.to_table(),
                    )?;
                }
            }
        }
    }
    let _ = writeln!(out.summary, "signal: wrote {} curves", out.files.len());
    Ok(out)
}

/// Time-integrated 4WM and 6WM intensities versus t₁, one file per
/// (t₂, T, δ_B) combination.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Output> {
    let sec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", "section required"))?;
    let base = cfg.medium_section()?;
    let temps = if sec.temperatures.is_empty() { vec![base.temperature] } else { sec.temperatures.clone() };
    let widths = if sec.delta_b.is_empty() { vec![base.delta_b] } else { sec.delta_b.clone() };
    let ti = cfg.time_integration(TimeRule::Adaptive)?;
    let thetas = sec.thetas.map(|x| x * PI);
    let mut combos = Vec::new();
    for &t2 in &sec.t2 {
        if !(t2 > sec.t0) {
            return Err(CliError::config("sweep.t2", format!("{t2} is not after t0")));
        }
        let t1s = match (&sec.t1, sec.t1_count) {
            (Some(g), _) => g.values("sweep.t1")?,
            (None, Some(n)) => (1..=n)
                .map(|k| sec.t0 + (t2 - sec.t0) * k as f64 / (n + 1) as f64)
                .collect(),
            (None, None) => unreachable!("validated"),
        };
        if let Some(bad) = t1s.iter().find(|&&x| !(x > sec.t0 && x < t2)) {
            return Err(CliError::config("sweep.t1", format!("{bad} outside (t0, t2 = {t2})")));
        }
        for &temp in &temps {
            for &db in &widths {
                combos.push((t2, temp, db, t1s.clone()));
            }
        }
    }
    let tables: Vec<(String, CsvTable)> = combos
        .par_iter()
        .map(|(t2, temp, db, t1s)| -> CliResult<(String, CsvTable)> {
            let medium = cfg.medium_with(*temp, *db)?;
            let template = PulseSequence::weak_three([sec.t0, 0.5 * (sec.t0 + t2), *t2], thetas)
                .map_err(|e| CliError::core_config("sweep", e))?;
            let (four, six) = signals::sweep_t1(&template, &medium, t1s, &ti)?;
            let mut table = CsvTable::new(vec!["t1_ps".into(), "I_4wm".into(), "I_6wm".into()]);
            table.meta.push(("observable".into(), "time-integrated intensity".into()));
            table.meta.push(("order_4wm".into(), four.order.to_string()));
            table.meta.push(("order_6wm".into(), six.order.to_string()));
            table.meta.push(("t0_ps".into(), sec.t0.to_string()));
            table.meta.push(("t2_ps".into(), t2.to_string()));
            table.meta.push(("delta_b_meV".into(), db.to_string()));
            let th: Vec<String> = sec.thetas.iter().map(|t| t.to_string()).collect();
            table.meta.push(("theta_over_pi".into(), th.join(" ")));
            reservoir_meta(&mut table.meta, &medium);
            table.rows = four
                .samples
                .iter()
                .zip(&six.samples)
                .map(|(a, b)| vec![a.0, a.1, b.1])
                .collect();
            let name = format!("sweep_t2_{}_T_{}_dB_{}.csv", tag(*t2), tag(*temp), tag(*db));
            Ok((name, table))
        })
        .collect::<CliResult<_>>()?;
    let mut out = Output::default();
    for (name, table) in &tables {
        out.push_table(name.clone(), table)?;
    }
    let _ = writeln!(out.summary, "sweep: wrote {} files", out.files.len());
    Ok(out)
}

/// Phase-cycled truncated-Fock oracle against the analytic nine-term expansion.
pub fn cmd_oracle_check(cfg: &RunConfig) -> CliResult<Output> {
    let default;
    let sec = match cfg.oracle.as_ref() {
        Some(s) => s,
        None => {
            default = toml::from_str::<crate::config::OracleSection>("")
                .map_err(|e| CliError::Config(e.to_string()))?;
            &default
        }
    };
    let cutoff = sec.n_cut.map_or(FockCutoff::Auto, FockCutoff::Fixed);
    let thetas = sec.thetas.map(|x| x * PI);
    let hooks = ExpansionHooks {
        negate_gamma_phases: sec.negate_gamma_phases,
    };
    let sd = SpectralDensity::single_mode(sec.g * sec.g, sec.omega_p)
        .map_err(|e| CliError::core_config("oracle", e))?;
    let seq = PulseSequence::weak_three(sec.times, thetas).map_err(|e| CliError::core_config("oracle", e))?;
    let mut table = CsvTable::new(
        [
            "temperature_K", "n0", "n1", "n2", "oracle_re", "oracle_im", "analytic_re", "analytic_im", "rel_dev",
        ]
        .map(String::from)
        .to_vec(),
    );
    table.meta.push(("omega_p_meV".into(), sec.omega_p.to_string()));
    table.meta.push(("g_meV".into(), sec.g.to_string()));
    table.meta.push(("tolerance".into(), sec.tolerance.to_string()));
    let mut out = Output::default();
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut breaches = Vec::new();
    for &temp in &sec.temperatures {
        let exp = OracleExperiment {
            omega_p: sec.omega_p,
            g_p: sec.g,
            temperature: temp,
            cutoff,
            times: sec.times,
            thetas,
            t: sec.t,
        };
        let oracle = phase_cycle(&exp)?;
        let medium = Medium::new(sd.clone(), temp, EnsembleSpec::homogeneous()).with_quad(cfg.quad()?);
        let terms = weak_polarization_terms_hooked(&seq, &medium, sec.t, hooks)?;
        for term in &terms {
            let o = oracle.amplitude(&term.order);
            let dev = (o - term.amplitude).norm() / o.norm().max(1e-300);
            let c = |m: usize| f64::from(term.order.coeff(m));
            table.rows.push(vec![
                temp, c(0), c(1), c(2), o.re, o.im, term.amplitude.re, term.amplitude.im, dev,
            ]);
            let label = term.order.to_string();
            match worst.iter_mut().find(|(l, _)| *l == label) {
                Some(w) => w.1 = w.1.max(dev),
                None => worst.push((label.clone(), dev)),
            }
            if !(dev <= sec.tolerance) {
                breaches.push(format!("T={temp} K order {label}: {dev:.3e}"));
            }
        }
        let _ = writeln!(
            out.summary,
            "T = {temp} K: N_cut = {}, completeness defect {:.3e}",
            oracle.n_cut,
            oracle.completeness_defect()
        );
        if temp == 0.0 {
            let period = 2.0 * PI / energy_to_angfreq(sec.omega_p);
            let t0 = sec.times[0];
            let states = free_decay(sec.omega_p, sec.g, 0.0, cutoff, PI / 2.0, t0, &[t0 + 0.5 * period, t0 + period])?;
            let (mid, full) = (states[0].qubit_purity(), states[1].qubit_purity());
            let _ = writeln!(
                out.summary,
                "T = 0 K purity: {mid:.6} at half period, {full:.12} at 2π/Ω_p"
            );
            if !((1.0 - full).abs() <= sec.tolerance) {
                breaches.push(format!("purity at 2π/Ω_p is {full}"));
            }
        }
    }
    for (label, dev) in &worst {
        let _ = writeln!(out.summary, "order {label:>14}: max relative deviation {dev:.3e}");
    }
    if !breaches.is_empty() {
        out.breach = Some(breaches.join("; "));
    }
    let _ = writeln!(
        out.summary,
        "oracle-check: {}",
        if breaches.is_empty() { "PASS" } else { "BREACH" }
    );
    out.push_table("oracle_check.csv", &table)?;
    Ok(out)
}

fn observable_of(name: &str) -> CliResult<Observable> {
    match name.to_ascii_lowercase().as_str() {
        "pi_train" => Ok(Observable::PiTrain),
        "free_induction" => Ok(Observable::FreeInduction),
        other => parse_weak(other).map(Observable::Weak),
    }
}

/// Builds the fit problem: data from the CSVs, everything else from the config.
pub fn fit_problem(cfg: &RunConfig) -> CliResult<FitProblem<f64>> {
    let sec = cfg
        .fit
        .as_ref()
        .ok_or_else(|| CliError::config("fit", "section required"))?;
    let m = cfg.medium_section()?;
    let base = ModelParams {
        reservoir: cfg.reservoir()?,
        temperature: m.temperature,
        delta_b: m.delta_b,
    };
    let mut datasets = Vec::new();
    for (i, d) in sec.data.iter().enumerate() {
        let field = format!("fit.data[{i}]");
        let table = CsvTable::read_file(cfg.resolve(&d.file)).map_err(|e| CliError::config(&field, e))?;
        let y = table.column(&d.column).map_err(|e| CliError::config(&field, e))?;
        let samples: Vec<(f64, f64)> = table.rows.iter().map(|r| r[0]).zip(y).collect();
        let obs = observable_of(&d.observable)?;
        let pis = |v: &[f64]| v.iter().map(|x| x * PI).collect::<Vec<f64>>();
        let kind = match (d.kind, obs) {
            (DataKind::Integrated, Observable::Weak(signal)) => {
                let (t0, t2) = match d.times.as_slice() {
                    [t0, t2] | [t0, _, t2] => (*t0, *t2),
                    _ => return Err(CliError::config(&field, "times must be [t0, t2] or [t0, t1, t2]")),
                };
                let thetas = match &d.thetas {
                    Some(v) if v.len() == 3 => [v[0] * PI, v[1] * PI, v[2] * PI],
                    Some(_) => return Err(CliError::config(&field, "need three thetas")),
                    None => [PI / 2.0; 3],
                };
                let template = PulseSequence::weak_three([t0, 0.5 * (t0 + t2), t2], thetas)
                    .map_err(|e| CliError::core_config(&field, e))?;
                CurveKind::IntegratedVsT1 { template, signal }
            }
            (DataKind::Integrated, _) => {
                return Err(CliError::config(&field, "integrated data must be 4wm or 6wm"))
            }
            (DataKind::TimeResolved, Observable::Weak(_)) => {
                let thetas = d.thetas.as_deref().map(pis).unwrap_or_else(|| vec![PI / 2.0; 3]);
                if d.times.len() != 3 || thetas.len() != 3 {
                    return Err(CliError::config(&field, "weak signals need three times and thetas"));
                }
                let sequence = PulseSequence::weak_three(
                    [d.times[0], d.times[1], d.times[2]],
                    [thetas[0], thetas[1], thetas[2]],
                )
                .map_err(|e| CliError::core_config(&field, e))?;
                CurveKind::TimeResolved { sequence, observable: obs }
            }
            (DataKind::TimeResolved, _) => {
                let (&t0, controls) = d
                    .times
                    .split_first()
                    .ok_or_else(|| CliError::config(&field, "times must not be empty"))?;
                let theta0 = d.thetas.as_ref().and_then(|v| v.first()).map_or(PI / 2.0, |x| x * PI);
                let sequence = PulseSequence::pi_train(t0, theta0, controls)
                    .map_err(|e| CliError::core_config(&field, e))?;
                CurveKind::TimeResolved { sequence, observable: obs }
            }
        };
        datasets.push(Dataset {
            kind,
            samples,
            weight: d.weight,
        });
    }
    let free = sec
        .free
        .iter()
        .map(|f| -> CliResult<FreeParam<f64>> {
            let param: Param = f.param.parse().map_err(|e| CliError::config("fit.free.param", e))?;
            Ok(FreeParam {
                param,
                initial: f.initial,
                lower: f.lower,
                upper: f.upper,
            })
        })
        .collect::<CliResult<_>>()?;
    let mut problem = FitProblem {
        datasets,
        base,
        free,
        options: FitOptions {
            starts: sec.starts,
            max_iterations: sec.max_iterations,
            fd_step: sec.fd_step,
            time: cfg.time_integration(TimeRule::Envelope)?,
            quad: cfg.quad()?,
            ..FitOptions::default()
        },
    };
    problem.validate().map_err(|e| CliError::core_config("fit", e))?;
    if sec.noise > 0.0 {
        problem.add_relative_noise(sec.noise, cfg.seed);
    }
    Ok(problem)
}

/// Estimates table: `param,estimate,sigma`.
pub fn estimates_csv(fit: &FitResult<f64>) -> String {
    let mut s = String::from("param,estimate,sigma\n");
    for e in &fit.estimates {
        let _ = writeln!(s, "{},{},{}", e.param, format_value(e.value), format_value(e.sigma));
    }
    s
}

/// Reads what [`estimates_csv`] writes.
pub fn parse_estimates(text: &str) -> CliResult<Vec<(Param, f64, f64)>> {
    let bad = |l: &str| CliError::Config(format!("bad estimates row `{l}`"));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(bad(l));
            }
            let p: Param = f[0].parse().map_err(|_| bad(l))?;
            let v: f64 = f[1].parse().map_err(|_| bad(l))?;
            let s: f64 = f[2].parse().map_err(|_| bad(l))?;
            Ok((p, v, s))
        })
        .collect()
}

/// Fits the free parameters to every dataset at once.
pub fn cmd_fit(cfg: &RunConfig) -> CliResult<Output> {
    let problem = fit_problem(cfg)?;
    let fit = problem.solve()?;
    let x = fit.raw.x.clone();
    let curves = problem.model_curves(&x)?;
    let mut out = Output::default();
    let r = &fit.raw;
    let mut report = String::new();
    let _ = writeln!(report, "converged: {}", r.converged);
    let _ = writeln!(report, "iterations: {}", r.iterations);
    let _ = writeln!(report, "winning start: {}", r.start);
    let _ = writeln!(report, "initial cost: {:e}", r.initial_cost);
    let _ = writeln!(report, "final cost: {:e}", r.cost);
    let _ = writeln!(report, "residual norm: {:e}", r.residual_norm);
    let _ = writeln!(report, "ill-conditioned: {}", r.ill_conditioned);
    for e in &fit.estimates {
        let _ = writeln!(report, "{} = {} ± {}", e.param, e.value, e.sigma);
    }
    out.files.push(("fit_report.txt".into(), report.clone()));
    out.files.push(("fit_estimates.csv".into(), estimates_csv(&fit)));
    for (k, (d, model)) in problem.datasets.iter().zip(curves).enumerate() {
        let w = d.effective_weight();
        let x_name = match d.kind {
            CurveKind::IntegratedVsT1 { .. } => "t1_ps",
            CurveKind::TimeResolved { .. } => "t_ps",
        };
        let mut table = CsvTable::new(
            [x_name, "data", "model", "weighted_residual"].map(String::from).to_vec(),
        );
        table.meta.push(("order".into(), d.order().to_string()));
        table.meta.push(("weight".into(), w.to_string()));
        table.rows = d
            .samples
            .iter()
            .zip(model)
            .map(|(&(xv, yv), m)| vec![xv, yv, m, w * (m - yv)])
            .collect();
        out.push_table(format!("fit_residuals_{k}.csv"), &table)?;
    }
    out.summary = report;
    Ok(out)
}

/// A gnuplot script plotting every CSV in `dir` (column 1 against the rest).
pub fn plot_script(dir: &Path) -> CliResult<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut s = String::from("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    for name in names {
        let table = CsvTable::read_file(dir.join(&name))?;
        if table.header.len() < 2 {
            continue;
        }
        let _ = writeln!(s, "\nset title '{name}'\nset xlabel '{}'", table.header[0]);
        let parts: Vec<String> = (2..=table.header.len())
            .map(|c| format!("'{name}' using 1:{c} with lines"))
            .collect();
        let _ = writeln!(s, "plot {}\npause -1", parts.join(", \\\n     "));
    }
    Ok(s)
}
