//! Observable layer: pulse prefactors, decoherence exponents and the
//! inhomogeneous envelope combined into time-resolved and time-integrated
//! intensities for each diffraction order.
//!
//! Intensities are per-qubit and dimensionless. An order whose detuning time
//! argument is τ picks up the ensemble factor exp(−τ²δ_B²/2) in amplitude and
//! exp(−τ²δ_B²) in intensity (δ_B in rad/ps).

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::{self, QuadConfig, SpectralGrid};
use crate::kernels::{Coeffs3, GammaKind, Sign};
use crate::pulses::{enumerate_weak_orders, DetuningArg, DiffractionOrder, PulseMode, PulseSequence};
use crate::quad::{self, QuadOptions};
use crate::real::Real;
use crate::spectral::SpectralDensity;
use crate::units::PhysConst;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec<T> {
    /// Inhomogeneous width δ_B in meV; 0 means homogeneous.
    pub delta_b: T,
}

impl<T: Real> EnsembleSpec<T> {
    pub fn new(delta_b: T) -> Result<Self> {
        if !(delta_b >= T::zero() && delta_b.is_finite()) {
            return Err(Error::invalid("delta_b", format!("must be >= 0, got {delta_b}")));
        }
        Ok(Self { delta_b })
    }

    pub fn homogeneous() -> Self {
        Self { delta_b: T::zero() }
    }

    pub fn width_rad_per_ps(&self) -> T {
        PhysConst::<T>::codata().energy_to_angfreq(self.delta_b)
    }

    /// exp(−τ²δ_B²), the intensity envelope.
    pub fn intensity_envelope(&self, tau: T) -> T {
        let x = tau * self.width_rad_per_ps();
        (-x * x).exp()
    }

    /// exp(−τ²δ_B²/2), the amplitude envelope.
    pub fn amplitude_envelope(&self, tau: T) -> T {
        let x = tau * self.width_rad_per_ps();
        (-x * x * T::lit(0.5)).exp()
    }
}

/// Everything a forward evaluation needs besides the pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium<T> {
    pub reservoir: SpectralDensity<T>,
    /// Kelvin.
    pub temperature: T,
    pub ensemble: EnsembleSpec<T>,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Medium<T> {
    pub fn new(reservoir: SpectralDensity<T>, temperature: T, ensemble: EnsembleSpec<T>) -> Self {
        Self {
            reservoir,
            temperature,
            ensemble,
            quad: QuadConfig::default(),
        }
    }

    pub fn with_quad(mut self, quad: QuadConfig<T>) -> Self {
        self.quad = quad;
        self
    }
}

/// The two echo directions of the three-pulse experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeakSignal {
    /// 2k₂ − k₀
    FourWave,
    /// 2k₂ − 2k₁ + k₀
    SixWave,
}

impl WeakSignal {
    pub fn order(self) -> DiffractionOrder {
        match self {
            WeakSignal::FourWave => DiffractionOrder::four_wave(),
            WeakSignal::SixWave => DiffractionOrder::six_wave(),
        }
    }

    pub fn coeffs(self) -> Coeffs3 {
        use Sign::*;
        match self {
            WeakSignal::FourWave => Coeffs3::of(Minus, Plus, Plus),
            WeakSignal::SixWave => Coeffs3::of(Minus, Plus, Minus),
        }
    }

    pub fn from_order(order: &DiffractionOrder) -> Result<Self> {
        if *order == DiffractionOrder::four_wave() {
            Ok(WeakSignal::FourWave)
        } else if *order == DiffractionOrder::six_wave() {
            Ok(WeakSignal::SixWave)
        } else {
            Err(Error::invalid(
                "order",
                format!("{order} is not a tracked echo direction (use 2k2-k0 or 2k2-2k1+k0)"),
            ))
        }
    }

    /// Pulse-area weight of the intensity.
    pub fn prefactor<T: Real>(self, thetas: [T; 3]) -> T {
        let [t0, t1, t2] = thetas;
        let half = T::lit(0.5);
        let base = T::lit(0.25) * t0.sin().powi(2) * (t2 * half).sin().powi(4);
        match self {
            WeakSignal::FourWave => base * (t1 * half).cos().powi(4),
            WeakSignal::SixWave => base * (t1 * half).sin().powi(4),
        }
    }
}

/// What is being observed: selects the intensity formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// The π train's own direction (−1)^M K^(M).
    PiTrain,
    /// Direction k₀ of the exciting pulse alone.
    FreeInduction,
    Weak(WeakSignal),
}

impl Observable {
    pub fn order<T: Real>(&self, seq: &PulseSequence<T>) -> DiffractionOrder {
        match self {
            Observable::PiTrain => seq.signal_direction(),
            Observable::FreeInduction => DiffractionOrder::new(vec![1]),
            Observable::Weak(w) => w.order(),
        }
    }

    /// Time after which the signal is observed.
    pub fn start_time<T: Real>(&self, seq: &PulseSequence<T>) -> T {
        match self {
            Observable::FreeInduction => seq.first_time(),
            _ => seq.last_time(),
        }
    }
}

fn weak_times<T: Real>(seq: &PulseSequence<T>) -> Result<[T; 3]> {
    if seq.mode() != PulseMode::WeakThreePulse {
        return Err(Error::invalid("sequence", "expected a three-pulse sequence"));
    }
    let t = seq.times();
    Ok([t[0], t[1], t[2]])
}

fn weak_thetas<T: Real>(seq: &PulseSequence<T>) -> [T; 3] {
    let th = seq.thetas();
    [th[0], th[1], th[2]]
}

/// Time-resolved intensity of a π train in its phase-matching direction.
pub fn intensity_pi_train<T: Real>(seq: &PulseSequence<T>, medium: &Medium<T>, t: T) -> Result<T> {
    if seq.mode() != PulseMode::PiTrain {
        return Err(Error::invalid("sequence", "expected a π train"));
    }
    let times = seq.times();
    let gamma = gamma::gamma_pi(&medium.reservoir, medium.temperature, &times, t, &medium.quad)?;
    let tau = seq.signal_direction().detuning_time(&times, t);
    let pre = T::lit(0.25) * seq.pulses()[0].theta.sin().powi(2);
    Ok(pre * (-T::lit(2.0) * gamma).exp() * medium.ensemble.intensity_envelope(tau))
}

/// Free-induction intensity in direction k₀, using only the exciting pulse.
pub fn intensity_free_induction<T: Real>(seq: &PulseSequence<T>, medium: &Medium<T>, t: T) -> Result<T> {
    let first = seq.pulses()[0];
    let single = PulseSequence::free_induction(first.t, first.theta)?;
    intensity_pi_train(&single, medium, t)
}

/// Time-resolved intensity of the 4WM or 6WM echo.
pub fn intensity_weak<T: Real>(
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    which: WeakSignal,
    t: T,
) -> Result<T> {
    let times = weak_times(seq)?;
    let pre = which.prefactor(weak_thetas(seq));
    if t < times[2] {
        return Err(Error::Domain(format!("t = {t} precedes the last pulse")));
    }
    if pre == T::zero() {
        return Ok(T::zero());
    }
    let gamma = gamma::gamma_weak(
        &medium.reservoir,
        medium.temperature,
        &which.coeffs(),
        times,
        t,
        &medium.quad,
    )?;
    let tau = which.order().detuning_time(&times, t);
    Ok(pre * (-T::lit(2.0) * gamma).exp() * medium.ensemble.intensity_envelope(tau))
}

/// Dispatches on the observable.
pub fn intensity<T: Real>(
    obs: Observable,
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    t: T,
) -> Result<T> {
    match obs {
        Observable::PiTrain => intensity_pi_train(seq, medium, t),
        Observable::FreeInduction => intensity_free_induction(seq, medium, t),
        Observable::Weak(w) => intensity_weak(seq, medium, w, t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakTerm<T> {
    pub order: DiffractionOrder,
    pub detuning: DetuningArg,
    /// Per-qubit complex amplitude, ensemble envelope included.
    pub amplitude: Complex<T>,
}

/// Deliberate corruptions of the analytic expansion, used to prove that the
/// oracle comparison detects sign mistakes.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpansionHooks {
    pub negate_gamma_phases: bool,
}

/// The nine complex amplitudes of the three-pulse polarization, in the order
/// of [`enumerate_weak_orders`].
pub fn weak_polarization_terms<T: Real>(
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    t: T,
) -> Result<Vec<WeakTerm<T>>> {
    weak_polarization_terms_hooked(seq, medium, t, ExpansionHooks::default())
}

#[doc(hidden)]
pub fn weak_polarization_terms_hooked<T: Real>(
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    t: T,
    hooks: ExpansionHooks,
) -> Result<Vec<WeakTerm<T>>> {
    let times = weak_times(seq)?;
    let ex = gamma::weak_exponents(&medium.reservoir, medium.temperature, times, t, &medium.quad)?;
    let [th0, th1, th2] = weak_thetas(seq);
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let (c0, s0) = ((th0 * half).cos(), (th0 * half).sin());
    let (c1, s1) = ((th1 * half).cos(), (th1 * half).sin());
    let (c2, s2) = ((th2 * half).cos(), (th2 * half).sin());
    let (c0s, s0s) = (c0 * c0, s0 * s0);
    let (c1s, s1s) = (c1 * c1, s1 * s1);
    let (c2s, s2s) = (c2 * c2, s2 * s2);
    let (sin0, sin1, sin2) = (th0.sin(), th1.sin(), th2.sin());

    let sgn = if hooks.negate_gamma_phases { -T::one() } else { T::one() };
    let phase = |k: GammaKind| sgn * ex.phase_of(k);
    let cis = |x: T| Complex::from_polar(T::one(), x);
    let real = |x: T| Complex::new(x, T::zero());
    let decay = |k: usize| (-ex.gamma[k]).exp();
    // e^{iγ}·p − e^{−iγ}·q
    let mix = |g: T, p: T, q: T| cis(g) * p - cis(-g) * q;

    let g_mm0 = phase(GammaKind::MinusMinusZero);
    let g_mp0 = phase(GammaKind::MinusPlusZero);
    let g_p00 = phase(GammaKind::MinusZeroZeroPlus);
    let g_m00 = phase(GammaKind::MinusZeroZeroMinus);
    let g_0pm = phase(GammaKind::MinusZeroPm);

    let raw: [Complex<T>; 9] = [
        // k0
        real(decay(0) * half * sin0 * c1s * c2s),
        // k1
        mix(g_mm0, c0s, s0s) * (decay(1) * half * sin1 * c2s),
        // k2
        (mix(g_p00, c0s, s0s) * c1s + mix(g_m00, s0s, c0s) * s1s) * (decay(2) * half * sin2),
        // 2k1 − k0
        real(-decay(3) * half * sin0 * s1s * c2s),
        // 2k2 − k0
        real(-decay(4) * half * sin0 * c1s * s2s),
        // 2k2 − k1
        -mix(g_mp0, c0s, s0s) * (decay(5) * half * sin1 * s2s),
        // k2 − k1 + k0
        real(-decay(6) * g_0pm.cos() * quarter * sin0 * sin1 * sin2),
        // k2 + k1 − k0
        real(-decay(7) * g_0pm.cos() * quarter * sin0 * sin1 * sin2),
        // 2k2 − 2k1 + k0
        real(decay(8) * half * sin0 * s1s * s2s),
    ];

    Ok(enumerate_weak_orders()
        .into_iter()
        .zip(raw)
        .map(|(w, amp)| {
            let tau = w.order.detuning_time(&times, t);
            WeakTerm {
                amplitude: amp * medium.ensemble.amplitude_envelope(tau),
                order: w.order,
                detuning: w.detuning,
            }
        })
        .collect())
}

/// How I^int is integrated over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeRule {
    /// Adaptive panels until the signal has died (or up to `upper`).
    #[default]
    Adaptive,
    /// Fixed composite rule over the window where the inhomogeneous envelope
    /// is non-negligible, with Γ from a shared [`SpectralGrid`]. Needs
    /// δ_B > 0. Deterministic and smooth in every parameter, which is what
    /// finite-difference fitting wants.
    Envelope,
}

/// Controls the time integration of intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegration<T> {
    /// Fixed upper limit in ps, or `None` to extend until the signal has died.
    pub upper: Option<T>,
    pub rel_tol: T,
    /// First panel width in ps; later panels grow geometrically.
    pub panel: T,
    /// Give up (non-convergence) beyond this many ps after the start.
    pub horizon: T,
    pub rule: TimeRule,
}

impl<T: Real> Default for TimeIntegration<T> {
    fn default() -> Self {
        Self {
            upper: None,
            rel_tol: T::lit(1e-7),
            panel: T::lit(0.05),
            horizon: T::lit(200.0),
            rule: TimeRule::Adaptive,
        }
    }
}

const AUTO_CUTOFF_RATIO: f64 = 1e-12;
const AUTO_QUIET_PANELS: usize = 5;

/// I^int = ∫ I(t) dt from the last pulse (first pulse for free induction).
pub fn integrated_intensity<T: Real>(
    obs: Observable,
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    ti: &TimeIntegration<T>,
) -> Result<T> {
    let start = obs.start_time(seq);
    if let Observable::Weak(w) = obs {
        if w.prefactor(weak_thetas(seq)) == T::zero() {
            return Ok(T::zero());
        }
    }
    if ti.rule == TimeRule::Envelope {
        let window = envelope_window(obs, seq, medium, ti)?;
        let grid = SpectralGrid::new(
            &medium.reservoir,
            medium.temperature,
            window.end - seq.first_time(),
            &medium.quad,
        )?;
        return integrate_on_grid(obs, seq, medium, &grid, &window);
    }
    let mut err: Option<Error> = None;
    let mut f = |t: T| match intensity(obs, seq, medium, t) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            T::zero()
        }
    };
    // the echo peak, when after the start, is a natural breakpoint
    let echo = crate::pulses::echo_time(seq, &obs.order(seq)).ok().map(|e| e.t).filter(|&e| e > start);

    let result = match ti.upper {
        Some(upper) => {
            if !(upper > start) {
                return Ok(T::zero());
            }
            let mut breaks: Vec<T> = Vec::new();
            let mut x = start + ti.panel;
            while x < upper && breaks.len() < 100_000 {
                breaks.push(x);
                x = x + ti.panel;
            }
            breaks.extend(echo);
            let opts = QuadOptions {
                abs_tol: T::lit(1e-15),
                rel_tol: ti.rel_tol,
                max_panels: 4 * breaks.len() + 2000,
            };
            quad::integrate(&mut f, start, upper, &breaks, &opts).map(|(v, _)| v)
        }
        None => integrate_until_quiet(&mut f, start, echo, ti),
    };
    if let Some(e) = err {
        return Err(e);
    }
    result
}

/// Time window and panel count of the envelope rule.
#[derive(Debug, Clone, Copy)]
struct Window<T> {
    start: T,
    end: T,
    panels: usize,
}

/// Envelope half-width in units of 1/δ_B: e^{−36} is below any tolerance.
const ENVELOPE_REACH: f64 = 6.0;
const MAX_PANEL_PS: f64 = 0.25;

fn envelope_window<T: Real>(
    obs: Observable,
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    ti: &TimeIntegration<T>,
) -> Result<Window<T>> {
    let delta = medium.ensemble.width_rad_per_ps();
    if !(delta > T::zero()) {
        return Err(Error::invalid(
            "time_rule",
            "the envelope rule needs an inhomogeneous width delta_b > 0",
        ));
    }
    let start = obs.start_time(seq);
    let center = crate::pulses::echo_time(seq, &obs.order(seq))
        .map(|e| e.t)
        .unwrap_or(start)
        .max(start);
    let mut end = center + T::lit(ENVELOPE_REACH) / delta;
    if let Some(upper) = ti.upper {
        end = end.min(upper);
    }
    let width = (T::lit(2.0) / delta).min(T::lit(MAX_PANEL_PS));
    let panels = ((end - start) / width).ceil().to_usize().unwrap_or(1).max(1);
    Ok(Window { start, end: end.max(start), panels })
}

fn prefactor<T: Real>(obs: Observable, seq: &PulseSequence<T>) -> T {
    match obs {
        Observable::Weak(w) => w.prefactor(weak_thetas(seq)),
        _ => T::lit(0.25) * seq.pulses()[0].theta.sin().powi(2),
    }
}

fn integrate_on_grid<T: Real>(
    obs: Observable,
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    grid: &SpectralGrid<T>,
    window: &Window<T>,
) -> Result<T> {
    let pre = prefactor(obs, seq);
    if pre == T::zero() || !(window.end > window.start) {
        return Ok(T::zero());
    }
    let (ts, ws) = quad::composite_nodes(window.start, window.end, window.panels);
    let times = seq.times();
    let gammas = match obs {
        Observable::PiTrain => grid.gamma_pi_series(&times, &ts)?,
        Observable::FreeInduction => grid.gamma_pi_series(&times[..1], &ts)?,
        Observable::Weak(w) => grid.gamma_weak_series(&w.coeffs(), weak_times(seq)?, &ts)?,
    };
    let order = obs.order(seq);
    let sum: T = ts
        .iter()
        .zip(&ws)
        .zip(&gammas)
        .map(|((&t, &w), &g)| {
            let tau = order.detuning_time(&times, t);
            w * (-T::lit(2.0) * g).exp() * medium.ensemble.intensity_envelope(tau)
        })
        .sum();
    Ok(pre * sum)
}

fn integrate_until_quiet<T: Real, F: FnMut(T) -> T>(
    f: &mut F,
    start: T,
    echo: Option<T>,
    ti: &TimeIntegration<T>,
) -> Result<T> {
    let growth = T::lit(1.15);
    let max_width = T::lit(1.0);
    let mut total = T::zero();
    let mut peak = T::zero();
    let mut quiet = 0usize;
    let mut a = start;
    let mut width = ti.panel;
    let end = start + ti.horizon;
    while a < end {
        let mut b = a + width;
        if let Some(e) = echo {
            if e > a && e < b {
                b = e;
            }
        }
        // sample the panel through the quadrature nodes to track the peak
        let mut local_max = T::zero();
        let scale = peak.max(T::min_positive_value()) * (b - a);
        let opts = QuadOptions {
            abs_tol: (ti.rel_tol * scale).max(T::lit(1e-300)),
            rel_tol: ti.rel_tol,
            max_panels: 400,
        };
        let (v, _) = quad::integrate(
            |t| {
                let y = f(t);
                local_max = local_max.max(y.abs());
                y
            },
            a,
            b,
            &[],
            &opts,
        )?;
        total = total + v;
        peak = peak.max(local_max);
        if local_max <= T::lit(AUTO_CUTOFF_RATIO) * peak {
            quiet += 1;
            if quiet >= AUTO_QUIET_PANELS {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        a = b;
        width = (width * growth).min(max_width);
    }
    Err(Error::IntegrationNotConverged {
        partial: total.to_f64_lossy(),
        bound: (peak * ti.horizon).to_f64_lossy(),
    })
}

/// Which axis a curve is sampled along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// Observation time t (ps).
    Time,
    /// First control pulse time t₁ (ps), for integrated sweeps.
    FirstPulse,
}

impl Abscissa {
    pub fn column(self) -> &'static str {
        match self {
            Abscissa::Time => "t_ps",
            Abscissa::FirstPulse => "t1_ps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalCurve<T> {
    pub order: DiffractionOrder,
    pub abscissa: Abscissa,
    pub samples: Vec<(T, T)>,
    /// Free-form provenance, written as `# key: value` lines.
    pub meta: Vec<(String, String)>,
}

impl<T: Real> SignalCurve<T> {
    pub fn new(order: DiffractionOrder, abscissa: Abscissa) -> Self {
        Self {
            order,
            abscissa,
            samples: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn peak(&self) -> Option<(T, T)> {
        self.samples
            .iter()
            .copied()
            .fold(None, |acc: Option<(T, T)>, s| match acc {
                Some(best) if best.1 >= s.1 => Some(best),
                _ => Some(s),
            })
    }

    /// Full width at half maximum of the contiguous region around the peak.
    pub fn fwhm(&self) -> Option<T> {
        let (k, _) = self
            .samples
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, T)>, (k, s)| match acc {
                Some(best) if best.1 >= s.1 => Some(best),
                _ => Some((k, s.1)),
            })?;
        let half = self.samples[k].1 * T::lit(0.5);
        let mut lo = k;
        while lo > 0 && self.samples[lo - 1].1 >= half {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < self.samples.len() && self.samples[hi + 1].1 >= half {
            hi += 1;
        }
        Some(self.samples[hi].0 - self.samples[lo].0)
    }
}

fn describe_medium<T: Real>(curve: &mut SignalCurve<T>, medium: &Medium<T>) {
    curve.push_meta("reservoir", format!("{:?}", medium.reservoir));
    curve.push_meta("temperature_K", medium.temperature);
    curve.push_meta("delta_b_meV", medium.ensemble.delta_b);
    curve.push_meta(
        "normalization",
        "per-qubit intensity including pulse-area prefactors",
    );
}

/// Samples I(t) on `grid`, in parallel, preserving grid order.
pub fn time_resolved_curve<T: Real>(
    obs: Observable,
    seq: &PulseSequence<T>,
    medium: &Medium<T>,
    grid: &[T],
) -> Result<SignalCurve<T>> {
    let values: Vec<T> = grid
        .par_iter()
        .map(|&t| intensity(obs, seq, medium, t))
        .collect::<Result<_>>()?;
    let mut curve = SignalCurve::new(obs.order(seq), Abscissa::Time);
    curve.push_meta("order", curve.order.to_string());
    let times: Vec<String> = seq.times().iter().map(|t| t.to_string()).collect();
    curve.push_meta("pulse_times_ps", times.join(" "));
    let thetas: Vec<String> = seq.thetas().iter().map(|t| (*t / T::PI()).to_string()).collect();
    curve.push_meta("theta_over_pi", thetas.join(" "));
    describe_medium(&mut curve, medium);
    curve.samples = grid.iter().copied().zip(values).collect();
    Ok(curve)
}

/// I^int of one echo direction as t₁ sweeps with t₀ and t₂ fixed, in grid order.
pub fn integrated_vs_t1<T: Real>(
    template: &PulseSequence<T>,
    medium: &Medium<T>,
    which: WeakSignal,
    t1_grid: &[T],
    ti: &TimeIntegration<T>,
) -> Result<Vec<T>> {
    let times = weak_times(template)?;
    let (t0, t2) = (times[0], times[2]);
    if let Some(&bad) = t1_grid.iter().find(|&&x| !(x > t0 && x < t2)) {
        return Err(Error::invalid("t1_grid", format!("t1 = {bad} outside (t0, t2)")));
    }
    let obs = Observable::Weak(which);
    let seqs: Vec<PulseSequence<T>> =
        t1_grid.iter().map(|&t1| template.with_times(&[t0, t1, t2])).collect::<Result<_>>()?;
    if seqs.is_empty() {
        return Ok(Vec::new());
    }
    if ti.rule == TimeRule::Envelope {
        let windows: Vec<Window<T>> =
            seqs.iter().map(|s| envelope_window(obs, s, medium, ti)).collect::<Result<_>>()?;
        let span = windows.iter().fold(T::zero(), |s, w| s.max(w.end - t0));
        // one spectral grid serves the whole sweep
        let grid = SpectralGrid::new(&medium.reservoir, medium.temperature, span, &medium.quad)?;
        return seqs
            .par_iter()
            .zip(&windows)
            .map(|(s, w)| integrate_on_grid(obs, s, medium, &grid, w))
            .collect();
    }
    seqs.par_iter().map(|s| integrated_intensity(obs, s, medium, ti)).collect()
}

/// I^int of the 4WM and 6WM echoes as t₁ sweeps with t₀ and t₂ fixed.
pub fn sweep_t1<T: Real>(
    template: &PulseSequence<T>,
    medium: &Medium<T>,
    t1_grid: &[T],
    ti: &TimeIntegration<T>,
) -> Result<(SignalCurve<T>, SignalCurve<T>)> {
    let times = weak_times(template)?;
    let (t0, t2) = (times[0], times[2]);
    let four = integrated_vs_t1(template, medium, WeakSignal::FourWave, t1_grid, ti)?;
    let six = integrated_vs_t1(template, medium, WeakSignal::SixWave, t1_grid, ti)?;
    let points: Vec<(T, T)> = four.into_iter().zip(six).collect();
    let mut curves = [WeakSignal::FourWave, WeakSignal::SixWave].map(|w| {
        let mut c = SignalCurve::new(w.order(), Abscissa::FirstPulse);
        c.push_meta("order", w.order().to_string());
        c.push_meta("observable", "time-integrated intensity");
        c.push_meta("t0_ps", t0);
        c.push_meta("t2_ps", t2);
        let thetas: Vec<String> =
            template.thetas().iter().map(|t| (*t / T::PI()).to_string()).collect();
        c.push_meta("theta_over_pi", thetas.join(" "));
        describe_medium(&mut c, medium);
        c
    });
    for (&t1, &(four, six)) in t1_grid.iter().zip(&points) {
        curves[0].samples.push((t1, four));
        curves[1].samples.push((t1, six));
    }
    let [four, six] = curves;
    Ok((four, six))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn medium(sd: SpectralDensity<f64>, temp: f64, delta_b: f64) -> Medium<f64> {
        Medium::new(sd, temp, EnsembleSpec::new(delta_b).unwrap())
    }

    fn ohmic() -> SpectralDensity<f64> {
        SpectralDensity::<f64>::ohmic(0.1, 8.0).unwrap()
    }

    #[test]
    fn full_coherence_at_excitation() {
        let m = medium(ohmic(), 10.0, 0.0);
        let seq = PulseSequence::free_induction(0.0, PI / 2.0).unwrap();
        assert!((intensity_pi_train(&seq, &m, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((intensity_free_induction(&seq, &m, 0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn free_induction_envelope_example() {
        let hom = medium(ohmic(), 10.0, 0.0);
        let inh = medium(ohmic(), 10.0, 5.0);
        let seq = PulseSequence::free_induction(0.0, PI / 2.0).unwrap();
        let ratio = intensity_free_induction(&seq, &inh, 0.2).unwrap()
            / intensity_free_induction(&seq, &hom, 0.2).unwrap();
        let x: f64 = 0.2 * 5.0 / crate::units::HBAR_MEV_PS;
        assert!((ratio - (-x * x).exp()).abs() < 1e-13);
        assert!((x * x - 2.3082).abs() < 1e-3);
        assert!((ratio - 0.0995).abs() < 1e-3);
    }

    #[test]
    fn echo_envelope_peaks_after_last_interval() {
        let m = EnsembleSpec::new(5.0).unwrap();
        let seq = PulseSequence::pi_train(0.0, PI / 2.0, &[0.3]).unwrap();
        let order = seq.signal_direction();
        let tau = order.detuning_time(&seq.times(), 0.6);
        assert!(tau.abs() < 1e-15);
        assert_eq!(m.intensity_envelope(tau), 1.0);
    }

    #[test]
    fn pi_train_envelope_matches_alternating_interval_formula() {
        let seq = PulseSequence::pi_train(0.1, PI / 2.0, &[0.25, 0.6, 0.8, 1.3]).unwrap();
        let times = seq.times();
        let big_m = seq.control_count();
        let t = 1.7;
        let iv = seq.intervals();
        let mut alt = 0.0;
        for (m, d) in iv.iter().enumerate() {
            alt += if m % 2 == 0 { *d } else { -*d };
        }
        let sign = if big_m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let expect = (t - times[big_m]) + sign * alt;
        let got = seq.signal_direction().detuning_time(&times, t);
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn weak_prefactor_limits() {
        let ideal = [PI / 2.0, PI, PI];
        assert!((WeakSignal::SixWave.prefactor(ideal) - 0.25).abs() < 1e-15);
        assert!(WeakSignal::FourWave.prefactor(ideal).abs() < 1e-30);
        let half = [PI / 2.0; 3];
        assert!((WeakSignal::SixWave.prefactor(half) - 1.0 / 64.0).abs() < 1e-16);
        assert!((WeakSignal::FourWave.prefactor(half) - 1.0 / 64.0).abs() < 1e-16);
        assert_eq!(WeakSignal::SixWave.prefactor([PI / 2.0, PI / 2.0, 0.0]), 0.0);
    }

    #[test]
    fn polarization_terms_limits() {
        let m = medium(ohmic(), 10.0, 0.0);
        let ideal = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0, PI, PI]).unwrap();
        let terms = weak_polarization_terms(&ideal, &m, 0.3).unwrap();
        for term in &terms {
            if term.order != DiffractionOrder::six_wave() {
                assert!(term.amplitude.norm() < 1e-15, "{}", term.order);
            }
        }
        let dark = PulseSequence::weak_three([0.0, 0.1, 0.2], [0.0, 0.0, 0.0]).unwrap();
        for term in weak_polarization_terms(&dark, &m, 0.3).unwrap() {
            assert_eq!(term.amplitude.norm(), 0.0);
        }
    }

    #[test]
    fn polarization_terms_reproduce_tracked_intensities() {
        let m = medium(ohmic(), 10.0, 3.0);
        let seq = PulseSequence::weak_three([0.0, 0.08, 0.2], [0.6, 1.3, 2.2]).unwrap();
        for &t in &[0.2, 0.31, 0.45] {
            let terms = weak_polarization_terms(&seq, &m, t).unwrap();
            for w in [WeakSignal::FourWave, WeakSignal::SixWave] {
                let amp = terms.iter().find(|x| x.order == w.order()).unwrap().amplitude;
                let i = intensity_weak(&seq, &m, w, t).unwrap();
                assert!((amp.norm_sqr() - i).abs() < 1e-9 * i.max(1e-12), "{w:?} {t}");
            }
        }
    }

    #[test]
    fn weak_intensity_vanishes_without_last_pulse() {
        let m = medium(ohmic(), 10.0, 5.0);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0, PI / 2.0, 0.0]).unwrap();
        for w in [WeakSignal::FourWave, WeakSignal::SixWave] {
            assert_eq!(intensity_weak(&seq, &m, w, 0.4).unwrap(), 0.0);
            let v = integrated_intensity(Observable::Weak(w), &seq, &m, &TimeIntegration::default()).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn gaussian_echo_integral() {
        // Γ ≡ 0 via a vanishing coupling: the integral is a Gaussian in τ
        let sd = SpectralDensity::<f64>::ohmic(0.0, 8.0).unwrap();
        let delta_b = 5.0;
        let m = medium(sd, 10.0, delta_b);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.6], [PI / 2.0; 3]).unwrap();
        let d = crate::units::energy_to_angfreq(delta_b);
        let pre = 1.0 / 64.0;
        // 4WM echo at 1.2 ps sits well inside the window: full √π/δ
        let four = integrated_intensity(
            Observable::Weak(WeakSignal::FourWave),
            &seq,
            &m,
            &TimeIntegration::default(),
        )
        .unwrap();
        let full = pre * PI.sqrt() / d;
        assert!((four - full).abs() < 1e-7 * full, "{four} {full}");
        // echo exactly at the last pulse: half the Gaussian
        let edge = PulseSequence::weak_three([0.0, 0.3, 0.6], [PI / 2.0; 3]).unwrap();
        let six = integrated_intensity(
            Observable::Weak(WeakSignal::SixWave),
            &edge,
            &m,
            &TimeIntegration::default(),
        )
        .unwrap();
        assert!((six - full / 2.0).abs() < 1e-7 * full, "{six}");
    }

    #[test]
    fn fixed_upper_limit_matches_auto() {
        let m = medium(ohmic(), 10.0, 5.0);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0; 3]).unwrap();
        let obs = Observable::Weak(WeakSignal::FourWave);
        let auto = integrated_intensity(obs, &seq, &m, &TimeIntegration::default()).unwrap();
        let fixed = integrated_intensity(
            obs,
            &seq,
            &m,
            &TimeIntegration {
                upper: Some(3.0),
                ..TimeIntegration::default()
            },
        )
        .unwrap();
        assert!((auto - fixed).abs() < 1e-7 * auto);
    }

    #[test]
    fn power_law_tail_fails_to_converge() {
        // T = 0, homogeneous: I ∝ t^{-4α} is not integrable
        let m = medium(ohmic(), 0.0, 0.0);
        let seq = PulseSequence::free_induction(0.0, PI / 2.0).unwrap();
        let ti = TimeIntegration {
            horizon: 5.0,
            ..TimeIntegration::default()
        };
        let err = integrated_intensity(Observable::FreeInduction, &seq, &m, &ti).unwrap_err();
        assert!(matches!(err, Error::IntegrationNotConverged { .. }));
    }

    #[test]
    fn sweep_rejects_bad_grid_and_handles_empty() {
        let m = medium(ohmic(), 10.0, 5.0);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0; 3]).unwrap();
        let ti = TimeIntegration::default();
        assert!(sweep_t1(&seq, &m, &[0.25], &ti).is_err());
        let (a, b) = sweep_t1(&seq, &m, &[], &ti).unwrap();
        assert!(a.samples.is_empty() && b.samples.is_empty());
    }

    #[test]
    fn curve_helpers() {
        let mut c = SignalCurve::<f64>::new(DiffractionOrder::six_wave(), Abscissa::Time);
        c.samples = vec![(0.0, 0.1), (1.0, 0.6), (2.0, 1.0), (3.0, 0.5), (4.0, 0.2)];
        assert_eq!(c.peak(), Some((2.0, 1.0)));
        assert_eq!(c.fwhm(), Some(2.0));
    }

    #[test]
    fn envelope_rule_matches_adaptive() {
        let sds = [
            SpectralDensity::<f64>::ohmic(0.1, 8.0).unwrap(),
            SpectralDensity::<f64>::gaussian_ohmic(0.1, 8.0, 0.05, 13.0, 4.0).unwrap(),
        ];
        let fast = TimeIntegration {
            rule: TimeRule::Envelope,
            ..TimeIntegration::default()
        };
        for sd in sds {
            for temp in [0.0, 10.0, 100.0] {
                let m = medium(sd.clone(), temp, 5.0);
                for times in [[0.0, 0.1, 0.2], [0.0, 0.45, 0.6]] {
                    let seq = PulseSequence::weak_three(times, [PI / 2.0; 3]).unwrap();
                    for w in [WeakSignal::FourWave, WeakSignal::SixWave] {
                        let obs = Observable::Weak(w);
                        let a = integrated_intensity(obs, &seq, &m, &TimeIntegration::default()).unwrap();
                        let b = integrated_intensity(obs, &seq, &m, &fast).unwrap();
                        assert!((a - b).abs() <= 1e-6 * a, "{w:?} T={temp} {times:?}: {a} {b}");
                    }
                }
                let pi = PulseSequence::equally_spaced_pi_train(0.0, PI / 2.0, 3, 0.2).unwrap();
                for obs in [Observable::PiTrain, Observable::FreeInduction] {
                    let a = integrated_intensity(obs, &pi, &m, &TimeIntegration::default()).unwrap();
                    let b = integrated_intensity(obs, &pi, &m, &fast).unwrap();
                    assert!((a - b).abs() <= 1e-6 * a, "{obs:?} T={temp}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn envelope_sweep_matches_pointwise() {
        let m = medium(ohmic(), 10.0, 5.0);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0; 3]).unwrap();
        let fast = TimeIntegration {
            rule: TimeRule::Envelope,
            ..TimeIntegration::default()
        };
        let grid = [0.05, 0.1, 0.15];
        let (four, six) = sweep_t1(&seq, &m, &grid, &fast).unwrap();
        for (k, &t1) in grid.iter().enumerate() {
            let s = seq.with_times(&[0.0, t1, 0.2]).unwrap();
            let a = integrated_intensity(Observable::Weak(WeakSignal::SixWave), &s, &m, &fast).unwrap();
            assert!((six.samples[k].1 - a).abs() <= 1e-9 * a);
            let b = integrated_intensity(Observable::Weak(WeakSignal::FourWave), &s, &m, &fast).unwrap();
            assert!((four.samples[k].1 - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn envelope_rule_needs_broadening() {
        let m = medium(ohmic(), 10.0, 0.0);
        let seq = PulseSequence::weak_three([0.0, 0.1, 0.2], [PI / 2.0; 3]).unwrap();
        let fast = TimeIntegration {
            rule: TimeRule::Envelope,
            ..TimeIntegration::default()
        };
        assert!(integrated_intensity(Observable::Weak(WeakSignal::SixWave), &seq, &m, &fast).is_err());
    }
}
