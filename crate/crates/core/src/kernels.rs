//! Filter functions of Ω and the pulse timing: everything that sits inside
//! the frequency integrals apart from the spectral density and temperature.
//!
//! All frequencies are angular (rad/ps) and times are in ps.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::gamma::QuadConfig;
use crate::quad;
use crate::real::{sinc, Real};
use crate::spectral::SpectralDensity;
use crate::units::PhysConst;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
    Zero,
}

impl Sign {
    #[inline]
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
            Sign::Zero => 0,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
            Sign::Zero => '0',
        }
    }
}

/// Signs (c₂, c₁, c₀) of the interval phases in Γ_{c₂c₁c₀}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coeffs3 {
    pub c2: Sign,
    pub c1: Sign,
    pub c0: Sign,
}

impl Coeffs3 {
    pub fn new(c2: Sign, c1: Sign, c0: Sign) -> Result<Self> {
        if [c2, c1, c0].iter().all(|&s| s == Sign::Zero) {
            return Err(Error::invalid("coeffs", "at least one sign must be nonzero"));
        }
        Ok(Self { c2, c1, c0 })
    }

    pub(crate) const fn of(c2: Sign, c1: Sign, c0: Sign) -> Self {
        Self { c2, c1, c0 }
    }

    pub fn values<T: Real>(&self) -> [T; 3] {
        [self.c2, self.c1, self.c0].map(|s| T::lit(s.value() as f64))
    }
}

impl fmt::Display for Coeffs3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.c2.symbol(), self.c1.symbol(), self.c0.symbol())
    }
}

impl FromStr for Coeffs3 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let signs: Vec<Sign> = s
            .chars()
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                '0' => Ok(Sign::Zero),
                _ => Err(Error::invalid("coeffs", format!("bad sign `{c}` in `{s}`"))),
            })
            .collect::<Result<_>>()?;
        match signs[..] {
            [c2, c1, c0] => Coeffs3::new(c2, c1, c0),
            _ => Err(Error::invalid("coeffs", format!("expected three signs, got `{s}`"))),
        }
    }
}

/// The phase functions γ entering the three-pulse polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaKind {
    /// γ_{--0}: Im{[a⁽²⁾ + a⁽¹⁾] a⁽⁰⁾*}
    MinusMinusZero,
    /// γ_{-+0}: Im{[a⁽²⁾ − a⁽¹⁾] a⁽⁰⁾*}
    MinusPlusZero,
    /// γ⁺_{-00}: Im{a⁽²⁾ [a⁽¹⁾ + a⁽⁰⁾]*}
    MinusZeroZeroPlus,
    /// γ⁻_{-00}: Im{a⁽²⁾ [a⁽¹⁾ − a⁽⁰⁾]*}
    MinusZeroZeroMinus,
    /// γ_{-0-} = γ_{-0+}: Im{a⁽²⁾ a⁽¹⁾*}
    MinusZeroPm,
}

impl GammaKind {
    pub const ALL: [GammaKind; 5] = [
        GammaKind::MinusMinusZero,
        GammaKind::MinusPlusZero,
        GammaKind::MinusZeroZeroPlus,
        GammaKind::MinusZeroZeroMinus,
        GammaKind::MinusZeroPm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GammaKind::MinusMinusZero => "gamma_--0",
            GammaKind::MinusPlusZero => "gamma_-+0",
            GammaKind::MinusZeroZeroPlus => "gamma+_-00",
            GammaKind::MinusZeroZeroMinus => "gamma-_-00",
            GammaKind::MinusZeroPm => "gamma_-0pm",
        }
    }

    /// Im part of the bilinear for given interval phases (a₂, a₁, a₀).
    #[inline]
    pub(crate) fn bilinear<T: Real>(self, a: [Complex<T>; 3]) -> T {
        let [a2, a1, a0] = a;
        match self {
            GammaKind::MinusMinusZero => ((a2 + a1) * a0.conj()).im,
            GammaKind::MinusPlusZero => ((a2 - a1) * a0.conj()).im,
            GammaKind::MinusZeroZeroPlus => (a2 * (a1 + a0).conj()).im,
            GammaKind::MinusZeroZeroMinus => (a2 * (a1 - a0).conj()).im,
            GammaKind::MinusZeroPm => (a2 * a1.conj()).im,
        }
    }
}

/// a(Ω) = e^{iΩ t_start} − e^{iΩ t_end}.
#[inline]
pub fn a_m<T: Real>(omega: T, t_start: T, t_end: T) -> Complex<T> {
    Complex::from_polar(T::one(), omega * t_start) - Complex::from_polar(T::one(), omega * t_end)
}

/// a(Ω)/Ω written as −iτ e^{iΩ t_mid} sinc(Ωτ/2), finite at Ω = 0.
#[inline]
pub(crate) fn a_over_omega<T: Real>(omega: T, t_start: T, t_end: T) -> Complex<T> {
    let tau = t_end - t_start;
    let mid = (t_start + t_end) * T::lit(0.5);
    let mag = tau * sinc(omega * tau * T::lit(0.5));
    // −i·mag·e^{iΩ mid}
    let (s, c) = (omega * mid).sin_cos();
    Complex::new(mag * s, -mag * c)
}

/// Alternating sum Σ_m (−1)^m a(t_m, t_{m+1}) over the π-train intervals,
/// the last one ending at `t`.
#[inline]
fn pi_sum<T: Real>(times: &[T], t: T, a: impl Fn(T, T) -> Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (m, pair) in times.windows(2).enumerate() {
        let term = a(pair[0], pair[1]);
        acc = if m % 2 == 0 { acc + term } else { acc - term };
    }
    let m = times.len() - 1;
    let last = a(times[m], t);
    if m.is_multiple_of(2) {
        acc + last
    } else {
        acc - last
    }
}

/// f(Ω,t) for the π train with pulse times `times` = (t₀, …, t_M).
pub fn filter_pi<T: Real>(omega: T, times: &[T], t: T) -> T {
    assert!(!times.is_empty(), "filter_pi needs at least the exciting pulse");
    pi_sum(times, t, |a, b| a_m(omega, a, b)).norm_sqr()
}

/// f(Ω,t)/Ω², finite at Ω = 0 where it equals (Σ signed interval lengths)².
#[inline]
pub(crate) fn filter_pi_over_omega_sq<T: Real>(omega: T, times: &[T], t: T) -> T {
    pi_sum(times, t, |a, b| a_over_omega(omega, a, b)).norm_sqr()
}

/// (a⁽²⁾, a⁽¹⁾, a⁽⁰⁾) for the three-pulse timing.
#[inline]
pub fn weak_phases<T: Real>(omega: T, times: [T; 3], t: T) -> [Complex<T>; 3] {
    [
        a_m(omega, times[2], t),
        a_m(omega, times[1], times[2]),
        a_m(omega, times[0], times[1]),
    ]
}

#[inline]
pub(crate) fn weak_phases_over_omega<T: Real>(omega: T, times: [T; 3], t: T) -> [Complex<T>; 3] {
    [
        a_over_omega(omega, times[2], t),
        a_over_omega(omega, times[1], times[2]),
        a_over_omega(omega, times[0], times[1]),
    ]
}

#[inline]
pub(crate) fn combine<T: Real>(c: &Coeffs3, a: &[Complex<T>; 3]) -> T {
    let [c2, c1, c0] = c.values::<T>();
    (a[0] * c2 + a[1] * c1 + a[2] * c0).norm_sqr()
}

/// f_{c₂c₁c₀}(Ω,t) = |c₂a⁽²⁾ + c₁a⁽¹⁾ + c₀a⁽⁰⁾|².
pub fn filter_weak<T: Real>(omega: T, c: &Coeffs3, times: [T; 3], t: T) -> T {
    combine(c, &weak_phases(omega, times, t))
}

/// The Im{…} bilinear of the requested γ (without the I(Ω)/Ω² weight).
pub fn gamma_integrand_imag<T: Real>(omega: T, kind: GammaKind, times: [T; 3], t: T) -> T {
    kind.bilinear(weak_phases(omega, times, t))
}

/// Θ(t_end, t_start) = ∫ dΩ I(Ω)[Ωτ − sin Ωτ]/Ω².
///
/// A global phase of the bath propagator; it cancels in every intensity and
/// is exposed only for cross-checks.
pub fn theta_phase<T: Real>(
    sd: &SpectralDensity<T>,
    t_start: T,
    t_end: T,
    qc: &QuadConfig<T>,
) -> Result<T> {
    if t_end < t_start {
        return Err(Error::Domain("theta_phase needs t_end >= t_start".into()));
    }
    let tau = t_end - t_start;
    if tau == T::zero() {
        return Ok(T::zero());
    }
    let c = PhysConst::<T>::codata();
    // integrand in energy units: I(E)/E · [ωτ − sin ωτ]/ω with ω = E/ħ
    let kernel = |w: T| {
        let x = w * tau;
        if x.abs() < T::lit(1e-3) {
            let x2 = x * x;
            // (x − sin x)/ω = τ·x²/6·(1 − x²/20)
            tau * x2 / T::lit(6.0) * (T::one() - x2 / T::lit(20.0))
        } else {
            (x - x.sin()) / w
        }
    };
    match *sd {
        SpectralDensity::SingleMode { g_sq, omega_p } => {
            Ok(g_sq / omega_p * kernel(c.energy_to_angfreq(omega_p)) / c.hbar)
        }
        _ => {
            let upper = qc.cutoff_for(sd);
            let opts = qc.options();
            let (v, _) = quad::integrate(
                |e| sd.density_over_energy(e) * kernel(c.energy_to_angfreq(e)) / c.hbar,
                T::zero(),
                upper,
                &[],
                &opts,
            )?;
            Ok(v)
        }
    }
}
