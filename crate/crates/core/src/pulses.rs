//! Impulsive pulse sequences and the integer bookkeeping of phase-matching
//! directions.
//!
//! Wavevectors never appear as 3-vectors: a direction is an integer
//! combination `Σ n_m k_m` of the pulse wavevectors.

use std::fmt;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse<T> {
    /// Arrival time in ps.
    pub t: T,
    /// Pulse area θ in rad.
    pub theta: T,
    /// Index m of the wavevector k_m carried by the pulse.
    pub k_label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseMode {
    /// Exciting pulse followed by ideal π pulses.
    PiTrain,
    /// Exciting pulse plus two control pulses of arbitrary area.
    WeakThreePulse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence<T> {
    pulses: Vec<Pulse<T>>,
    mode: PulseMode,
}

impl<T: Real> PulseSequence<T> {
    pub fn new(pulses: Vec<Pulse<T>>, mode: PulseMode) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::invalid("pulses", "sequence needs at least one pulse"));
        }
        let two_pi = T::lit(2.0) * T::PI();
        for (m, p) in pulses.iter().enumerate() {
            if !p.t.is_finite() {
                return Err(Error::invalid(format!("pulses[{m}].t"), "must be finite"));
            }
            if !(p.theta >= T::zero() && p.theta <= two_pi) {
                return Err(Error::invalid(
                    format!("pulses[{m}].theta"),
                    format!("must lie in [0, 2π], got {}", p.theta),
                ));
            }
            if m > 0 && !(p.t > pulses[m - 1].t) {
                return Err(Error::invalid(
                    format!("pulses[{m}].t"),
                    "pulse times must be strictly increasing",
                ));
            }
        }
        match mode {
            PulseMode::PiTrain => {
                let tol = T::lit(1e-9);
                for (m, p) in pulses.iter().enumerate().skip(1) {
                    if (p.theta - T::PI()).abs() > tol {
                        return Err(Error::invalid(
                            format!("pulses[{m}].theta"),
                            "control pulses of a π train must have area π",
                        ));
                    }
                }
            }
            PulseMode::WeakThreePulse => {
                if pulses.len() != 3 {
                    return Err(Error::invalid(
                        "pulses",
                        format!("three-pulse mode needs exactly 3 pulses, got {}", pulses.len()),
                    ));
                }
            }
        }
        Ok(Self { pulses, mode })
    }

    /// Exciting pulse of area `theta0` at `t0` followed by π pulses at the
    /// given times.
    pub fn pi_train(t0: T, theta0: T, control_times: &[T]) -> Result<Self> {
        let mut pulses = vec![Pulse {
            t: t0,
            theta: theta0,
            k_label: 0,
        }];
        for (m, &t) in control_times.iter().enumerate() {
            pulses.push(Pulse {
                t,
                theta: T::PI(),
                k_label: m + 1,
            });
        }
        Self::new(pulses, PulseMode::PiTrain)
    }

    /// `m` π pulses at t0 + Δ, t0 + 2Δ, …
    pub fn equally_spaced_pi_train(t0: T, theta0: T, m: usize, delta: T) -> Result<Self> {
        let times: Vec<T> = (1..=m).map(|k| t0 + delta * T::from_usize_lossy(k)).collect();
        Self::pi_train(t0, theta0, &times)
    }

    pub fn free_induction(t0: T, theta0: T) -> Result<Self> {
        Self::pi_train(t0, theta0, &[])
    }

    pub fn weak_three(times: [T; 3], thetas: [T; 3]) -> Result<Self> {
        let pulses = (0..3)
            .map(|m| Pulse {
                t: times[m],
                theta: thetas[m],
                k_label: m,
            })
            .collect();
        Self::new(pulses, PulseMode::WeakThreePulse)
    }

    pub fn mode(&self) -> PulseMode {
        self.mode
    }

    pub fn pulses(&self) -> &[Pulse<T>] {
        &self.pulses
    }

    pub fn times(&self) -> Vec<T> {
        self.pulses.iter().map(|p| p.t).collect()
    }

    pub fn thetas(&self) -> Vec<T> {
        self.pulses.iter().map(|p| p.theta).collect()
    }

    /// Number of control pulses M after the exciting pulse.
    pub fn control_count(&self) -> usize {
        self.pulses.len() - 1
    }

    pub fn first_time(&self) -> T {
        self.pulses[0].t
    }

    pub fn last_time(&self) -> T {
        self.pulses.last().unwrap().t
    }

    /// Δ_m = t_{m+1} − t_m between pulses.
    pub fn intervals(&self) -> Vec<T> {
        self.pulses.windows(2).map(|w| w[1].t - w[0].t).collect()
    }

    /// Same pulses with new arrival times.
    pub fn with_times(&self, times: &[T]) -> Result<Self> {
        if times.len() != self.pulses.len() {
            return Err(Error::invalid("times", "length must match the pulse count"));
        }
        let pulses = self
            .pulses
            .iter()
            .zip(times)
            .map(|(p, &t)| Pulse { t, ..*p })
            .collect();
        Self::new(pulses, self.mode)
    }

    /// The direction this sequence radiates into when it is a π train.
    pub fn signal_direction(&self) -> DiffractionOrder {
        match self.mode {
            PulseMode::PiTrain => phase_matching_direction(self.control_count()),
            PulseMode::WeakThreePulse => DiffractionOrder::six_wave(),
        }
    }
}

/// Integer coefficients `(n₀, n₁, …)` of a direction `Σ n_m k_m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiffractionOrder {
    coeffs: Vec<i32>,
}

impl DiffractionOrder {
    /// Trailing zero coefficients are dropped so that `k1` and `(0, 1, 0)`
    /// compare equal.
    pub fn new(mut coeffs: Vec<i32>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0 {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// 2k₂ − k₀, the four-wave-mixing echo.
    pub fn four_wave() -> Self {
        Self::new(vec![-1, 0, 2])
    }

    /// 2k₂ − 2k₁ + k₀, the six-wave-mixing echo.
    pub fn six_wave() -> Self {
        Self::new(vec![1, -2, 2])
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> i32 {
        self.coeffs.get(m).copied().unwrap_or(0)
    }

    pub fn coefficient_sum(&self) -> i32 {
        self.coeffs.iter().sum()
    }

    /// Whether some pulse enters conjugated, which is what lets the
    /// inhomogeneous phases realign after the last pulse.
    pub fn is_rephasing(&self) -> bool {
        self.coeffs.iter().any(|&n| n < 0)
    }

    /// Time argument τ = t − Σ n_m t_m multiplying the detuning ν − ω in
    /// this order's phase factor.
    pub fn detuning_time<T: Real>(&self, pulse_times: &[T], t: T) -> T {
        let shift: T = self
            .coeffs
            .iter()
            .zip(pulse_times)
            .map(|(&n, &tm)| T::lit(n as f64) * tm)
            .sum();
        t - shift
    }

    /// Parses labels like `2k2-2k1+k0`.
    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::invalid("order", format!("cannot parse direction `{label}`"));
        let s: String = label.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(bad());
        }
        let mut coeffs: Vec<i32> = Vec::new();
        let bytes = s.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let mut sign = 1;
            if bytes[i] == b'+' || bytes[i] == b'-' {
                if bytes[i] == b'-' {
                    sign = -1;
                }
                i += 1;
            } else if i != 0 {
                return Err(bad());
            }
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mag: i32 = if i == start { 1 } else { s[start..i].parse().map_err(|_| bad())? };
            if i >= bytes.len() || bytes[i] != b'k' {
                return Err(bad());
            }
            i += 1;
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i == start {
                return Err(bad());
            }
            let idx: usize = s[start..i].parse().map_err(|_| bad())?;
            if idx > 64 {
                return Err(bad());
            }
            if coeffs.len() <= idx {
                coeffs.resize(idx + 1, 0);
            }
            coeffs[idx] += sign * mag;
        }
        Ok(Self::new(coeffs))
    }
}

impl fmt::Display for DiffractionOrder {
    /// Highest wavevector index first: `2k2-2k1+k0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, &n) in self.coeffs.iter().enumerate().rev() {
            if n == 0 {
                continue;
            }
            let sign = if n < 0 {
                "-"
            } else if first {
                ""
            } else {
                "+"
            };
            let mag = n.unsigned_abs();
            if mag == 1 {
                write!(f, "{sign}k{m}")?;
            } else {
                write!(f, "{sign}{mag}k{m}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Direction (−1)^M K^(M) with K^(M) = k₀ + 2 Σ_{m=1}^{M} (−1)^m k_m.
pub fn phase_matching_direction(m: usize) -> DiffractionOrder {
    let overall = if m.is_multiple_of(2) { 1 } else { -1 };
    let mut coeffs = vec![overall];
    for k in 1..=m {
        let s = if k % 2 == 0 { 2 } else { -2 };
        coeffs.push(overall * s);
    }
    DiffractionOrder::new(coeffs)
}

/// Detuning time argument of a three-pulse order written as
/// `t − t₂ + delta1·Δ₁ + delta0·Δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetuningArg {
    pub delta1: i32,
    pub delta0: i32,
}

impl DetuningArg {
    pub fn evaluate<T: Real>(&self, times: [T; 3], t: T) -> T {
        let d0 = times[1] - times[0];
        let d1 = times[2] - times[1];
        t - times[2] + T::lit(self.delta1 as f64) * d1 + T::lit(self.delta0 as f64) * d0
    }
}

impl fmt::Display for DetuningArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t-t2")?;
        for (c, name) in [(self.delta1, "D1"), (self.delta0, "D0")] {
            match c {
                0 => {}
                1 => write!(f, "+{name}")?,
                -1 => write!(f, "-{name}")?,
                c if c > 0 => write!(f, "+{c}{name}")?,
                c => write!(f, "{c}{name}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakOrder {
    pub order: DiffractionOrder,
    pub detuning: DetuningArg,
}

/// The nine directions of the three-pulse expansion, in the order
/// k₀, k₁, k₂, 2k₁−k₀, 2k₂−k₀, 2k₂−k₁, k₂−k₁+k₀, k₂+k₁−k₀, 2k₂−2k₁+k₀.
pub fn enumerate_weak_orders() -> Vec<WeakOrder> {
    WEAK_ORDER_COEFFS
        .iter()
        .map(|&c| {
            let (n1, n2) = (c[1], c[2]);
            WeakOrder {
                order: DiffractionOrder::new(c.to_vec()),
                detuning: DetuningArg {
                    delta1: 1 - n2,
                    delta0: 1 - n1 - n2,
                },
            }
        })
        .collect()
}

pub(crate) const WEAK_ORDER_COEFFS: [[i32; 3]; 9] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [-1, 2, 0],
    [-1, 0, 2],
    [0, -1, 2],
    [1, -1, 1],
    [-1, 1, 1],
    [1, -2, 2],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoTime<T> {
    /// Time at which the detuning argument vanishes.
    pub t: T,
    /// The rephasing point falls before the last pulse, so only the tail of
    /// the echo is observable.
    pub pre_window: bool,
}

/// Rephasing time of `order` for the given sequence.
pub fn echo_time<T: Real>(seq: &PulseSequence<T>, order: &DiffractionOrder) -> Result<EchoTime<T>> {
    if order.coeffs().len() > seq.pulses().len() {
        return Err(Error::invalid(
            "order",
            format!("{order} refers to more pulses than the sequence has"),
        ));
    }
    if !order.is_rephasing() {
        return Err(Error::NoEcho(order.to_string()));
    }
    let times = seq.times();
    let t = order.detuning_time(&times, T::zero()).neg();
    Ok(EchoTime {
        t,
        pre_window: t < seq.last_time(),
    })
}
