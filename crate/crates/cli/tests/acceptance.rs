//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p mwm-cli --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use mwm_cli::{cmd_oracle_check, cmd_sweep, with_jobs, RunConfig};
use mwm_core::fit::{CurveKind, Dataset, FitOptions, FitProblem, FreeParam, ModelParams, Param};
use mwm_core::gamma::gamma_pi;
use mwm_core::signals::{
    intensity, intensity_pi_train, intensity_weak, sweep_t1, time_resolved_curve, TimeRule,
};
use mwm_core::{
    EnsembleSpec, Medium, Observable, PulseSequence, QuadConfig, SpectralDensity, TimeIntegration,
    WeakSignal,
};

const HBAR: f64 = 0.6582119569;
const KB: f64 = 0.08617333262;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn ohmic_fig2(delta_b: f64) -> Medium<f64> {
    Medium::new(
        SpectralDensity::ohmic(0.1, 8.0).unwrap(),
        10.0,
        EnsembleSpec::new(delta_b).unwrap(),
    )
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn ohmic_zero_temperature() -> Verdict {
    let sd = SpectralDensity::ohmic(0.1, 8.0).unwrap();
    let wc = 8.0 / HBAR;
    let qc = QuadConfig::default();
    let mut worst = 0.0f64;
    for tau in linspace(0.01, 2.0, 50) {
        let g = gamma_pi(&sd, 0.0, &[0.0], tau, &qc).unwrap();
        let exact = 2.0 * 0.1 * (1.0 + wc * wc * tau * tau).ln();
        worst = worst.max((g - exact).abs() / exact);
    }
    verdict(worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

fn single_mode_suite() -> Verdict {
    let (g, omega_p_mev, temp) = (0.6f64, 8.0, 10.0);
    let sd = SpectralDensity::single_mode(g * g, omega_p_mev).unwrap();
    let w = omega_p_mev / HBAR;
    let gp = 2.0 * g * g / (omega_p_mev * omega_p_mev) / (omega_p_mev / (2.0 * KB * temp)).tanh();
    let qc = QuadConfig::default();
    let mut worst = 0.0f64;
    for t in linspace(0.0, 3.0, 301) {
        let f_plus = 2.0 * (1.0 - (w * t).cos());
        let num = gamma_pi(&sd, temp, &[0.0], t, &qc).unwrap();
        worst = worst.max((num - gp * f_plus).abs());
    }
    for d in [0.3, 1.0, PI / 2.0, 2.5, PI] {
        let t1 = d / w;
        for t in linspace(t1, t1 + 3.0, 301) {
            // |e^{iΩt₀} − 2e^{iΩt₁} + e^{iΩt}|², expanded
            let f_minus = 6.0 - 4.0 * d.cos() - 4.0 * (w * t - d).cos() + 2.0 * (w * t).cos();
            let num = gamma_pi(&sd, temp, &[0.0, t1], t, &qc).unwrap();
            worst = worst.max((num - gp * f_minus).abs());
        }
    }
    let t1 = PI / w;
    let mut dominated = true;
    let mut worst_pi = 0.0f64;
    for t in linspace(t1, t1 + 5.0, 1000) {
        let minus = gamma_pi(&sd, temp, &[0.0, t1], t, &qc).unwrap();
        let plus = gamma_pi(&sd, temp, &[0.0], t, &qc).unwrap();
        worst_pi = worst_pi.max((minus - gp * (6.0 * (w * t).cos() + 10.0)).abs());
        dominated &= minus >= plus - 1e-12;
    }
    verdict(
        worst <= 1e-10 && worst_pi <= 1e-10 && dominated,
        format!(
            "f+/f- max error {worst:.1e}, 6cos+10 max error {worst_pi:.1e}, Γ₋ ≥ Γ₊ on 1000 points: {dominated}"
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let cfg = RunConfig::parse("[oracle]\nn_cut = 40\ntemperatures = [0.0, 10.0, 100.0]\n", ".").unwrap();
    match cmd_oracle_check(&cfg) {
        Ok(out) => {
            let worst = out
                .summary
                .lines()
                .filter(|l| l.starts_with("order"))
                .filter_map(|l| l.rsplit(' ').next()?.parse::<f64>().ok())
                .fold(0.0, f64::max);
            verdict(
                out.breach.is_none(),
                format!("nine orders at T = 0, 10, 100 K; worst relative deviation {worst:.1e}"),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn ideal_pi_consistency() -> Verdict {
    let medium = ohmic_fig2(0.0);
    let delta = 0.2;
    let weak = PulseSequence::weak_three([0.0, delta, 2.0 * delta], [PI / 2.0, PI, PI]).unwrap();
    let train = PulseSequence::equally_spaced_pi_train(0.0, PI / 2.0, 2, delta).unwrap();
    let mut worst = 0.0f64;
    for t in linspace(2.0 * delta, 2.0 * delta + 2.0, 101) {
        let a = intensity_weak(&weak, &medium, WeakSignal::SixWave, t).unwrap();
        let b = intensity_pi_train(&train, &medium, t).unwrap();
        worst = worst.max((a - b).abs() / b);
    }
    verdict(worst <= 1e-6, format!("max relative difference {worst:.1e}"))
}

fn echo_timing() -> Verdict {
    let medium = ohmic_fig2(5.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (t1, t2) in [(0.1, 0.2), (0.2, 0.6)] {
        let seq = PulseSequence::weak_three([0.0, t1, t2], [PI / 2.0; 3]).unwrap();
        let grid: Vec<f64> = (0..=1500).map(|k| t2 + k as f64 * 1e-3).collect();
        for (w, expected) in [
            (WeakSignal::SixWave, t2 + (t2 - t1) - t1),
            (WeakSignal::FourWave, 2.0 * t2),
        ] {
            let curve = time_resolved_curve(Observable::Weak(w), &seq, &medium, &grid).unwrap();
            let (peak, _) = curve.peak().unwrap();
            let off = peak - expected;
            pass &= off.abs() <= 1e-3 + 1e-12;
            let name = if w == WeakSignal::SixWave { "6WM" } else { "4WM" };
            parts.push(format!("{name}({t1},{t2}) {:+.0} fs", off * 1e3));
        }
    }
    verdict(pass, format!("argmax − echo time: {}", parts.join(", ")))
}

fn acceleration_regime() -> Verdict {
    let medium = ohmic_fig2(0.0);
    let fid = PulseSequence::free_induction(0.0, PI / 2.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [1usize, 3, 5] {
        let train = PulseSequence::equally_spaced_pi_train(0.0, PI / 2.0, m, 0.2).unwrap();
        let tm = train.last_time();
        let mut bad = Vec::new();
        for t in linspace(tm, tm + 2.0, 201).into_iter().skip(1) {
            let a = intensity(Observable::PiTrain, &train, &medium, t).unwrap();
            let b = intensity(Observable::FreeInduction, &fid, &medium, t).unwrap();
            if a > b {
                bad.push(t);
            }
        }
        pass &= bad.is_empty();
        parts.push(match (bad.first(), bad.last()) {
            (Some(lo), Some(hi)) => {
                format!("M={m}: {} samples above free induction on [{lo:.2}, {hi:.2}] ps", bad.len())
            }
            _ => format!("M={m}: ok"),
        });
    }
    verdict(pass, parts.join("; "))
}

fn crossover() -> Verdict {
    let sd = SpectralDensity::gaussian_ohmic(0.1, 8.0, 0.05, 13.0, 4.0).unwrap();
    let medium = Medium::new(sd, 10.0, EnsembleSpec::new(5.0).unwrap());
    let template = PulseSequence::weak_three([0.0, 0.3, 0.6], [PI / 2.0; 3]).unwrap();
    let t1s: Vec<f64> = (1..=29).map(|k| 0.02 * k as f64).collect();
    let (four, six) = sweep_t1(&template, &medium, &t1s, &TimeIntegration::default()).unwrap();
    let diff: Vec<f64> = four.samples.iter().zip(&six.samples).map(|(a, b)| b.1 - a.1).collect();
    let first_neg = diff.iter().position(|&d| d < 0.0);
    let later_pos = first_neg.and_then(|i| diff[i..].iter().position(|&d| d > 0.0).map(|j| i + j));
    match (first_neg, later_pos) {
        (Some(i), Some(j)) => verdict(
            true,
            format!("6WM − 4WM < 0 at t1 = {:.2} ps, > 0 at t1 = {:.2} ps", t1s[i], t1s[j]),
        ),
        _ => verdict(false, format!("no negative→positive change: {diff:?}")),
    }
}

fn fit_problem(initial: (f64, f64), starts: usize) -> FitProblem<f64> {
    let template = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0; 3]).unwrap();
    let t1s: Vec<f64> = (1..=8).map(|k| 0.2 * k as f64 / 9.0).collect();
    let datasets = [WeakSignal::FourWave, WeakSignal::SixWave]
        .map(|signal| Dataset {
            kind: CurveKind::IntegratedVsT1 {
                template: template.clone(),
                signal,
            },
            samples: t1s.iter().map(|&x| (x, 0.0)).collect(),
            weight: None,
        })
        .to_vec();
    let mut p = FitProblem {
        datasets,
        base: ModelParams {
            reservoir: SpectralDensity::ohmic(0.1, 8.0).unwrap(),
            temperature: 10.0,
            delta_b: 5.0,
        },
        free: vec![
            FreeParam {
                param: Param::Alpha,
                initial: initial.0,
                lower: 0.02,
                upper: 0.5,
            },
            FreeParam {
                param: Param::OmegaC,
                initial: initial.1,
                lower: 2.0,
                upper: 20.0,
            },
        ],
        options: FitOptions {
            starts,
            time: TimeIntegration::default(),
            ..FitOptions::default()
        },
    };
    // data from the adaptive integrator, fits with the envelope rule
    p.synthesize(&[0.1, 8.0]).unwrap();
    p.options.time.rule = TimeRule::Envelope;
    p
}

fn relative_errors(p: &FitProblem<f64>) -> Option<(f64, f64)> {
    let fit = p.solve().ok()?;
    Some((
        (fit.value(Param::Alpha)? / 0.1 - 1.0).abs(),
        (fit.value(Param::OmegaC)? / 8.0 - 1.0).abs(),
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fit_round_trip() -> Verdict {
    let clean = fit_problem((0.15, 6.0), 8);
    let Some((ea, ew)) = relative_errors(&clean) else {
        return verdict(false, "noiseless fit failed");
    };
    let mut clean1 = clean.clone();
    clean1.options.starts = 1;
    let mut errs_a = Vec::new();
    let mut errs_w = Vec::new();
    let mut failures = 0;
    for seed in 0..100u64 {
        let mut p = clean1.clone();
        p.add_relative_noise(0.01, seed);
        match relative_errors(&p) {
            Some((a, w)) => {
                errs_a.push(a);
                errs_w.push(w);
            }
            None => {
                failures += 1;
                errs_a.push(f64::INFINITY);
                errs_w.push(f64::INFINITY);
            }
        }
    }
    let (ma, mw) = (median(errs_a), median(errs_w));
    verdict(
        ea <= 0.01 && ew <= 0.01 && ma <= 0.05 && mw <= 0.05,
        format!(
            "noiseless errors α {ea:.1e}, Ω_c {ew:.1e}; 1% noise medians α {ma:.2e}, Ω_c {mw:.2e} ({failures} failed trials)"
        ),
    )
}

fn determinism() -> Verdict {
    let text = "\
[reservoir]
kind = \"ohmic\"
alpha = 0.1
omega_c = 4.0

[medium]
temperature = 10.0
delta_b = 0.0

[sweep]
t2 = [0.2]
temperatures = [10.0, 50.0, 100.0]
t1_count = 6
";
    let cfg = RunConfig::parse(text, ".").unwrap();
    let one = with_jobs(Some(1), || cmd_sweep(&cfg));
    let eight = with_jobs(Some(8), || cmd_sweep(&cfg));
    match (one, eight) {
        (Ok(a), Ok(b)) => {
            let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
            a.write(dirs[0].path()).unwrap();
            b.write(dirs[1].path()).unwrap();
            let same = a.files.len() == b.files.len()
                && a.files.iter().all(|(name, _)| {
                    std::fs::read(dirs[0].path().join(name)).unwrap()
                        == std::fs::read(dirs[1].path().join(name)).unwrap()
                });
            verdict(same, format!("{} CSVs compared byte for byte", a.files.len()))
        }
        (a, b) => verdict(false, format!("{:?} / {:?}", a.err(), b.err())),
    }
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("ohmic T=0 closed form", Duration::from_secs(5), ohmic_zero_temperature),
        ("single-mode analytic suite", Duration::from_secs(5), single_mode_suite),
        ("oracle equivalence", Duration::from_secs(120), oracle_equivalence),
        ("ideal-pi consistency", Duration::from_secs(30), ideal_pi_consistency),
        ("echo timing", Duration::from_secs(60), echo_timing),
        ("acceleration regime", Duration::from_secs(60), acceleration_regime),
        ("crossover", Duration::from_secs(300), crossover),
        ("fit round trip", Duration::from_secs(600), fit_round_trip),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let pass = v.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {} [{:.1} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
