//! Reservoir spectral densities I(Ω), the thermalized boson factor
//! η(Ω,T) = I(Ω)·coth(ħΩ/2k_BT), and the characteristic frequency Ω_th.
//!
//! Energies here are in meV. I(Ω) also carries meV so that
//! `∫ dΩ I(Ω)/Ω²` is dimensionless in any unit.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::units::PhysConst;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity<T> {
    /// αΩ·exp(−Ω/Ω_c)
    Ohmic { alpha: T, omega_c: T },
    /// Ohmic plus a Gaussian phonon line α_pΩ²/(√π γ_p)·exp[−(Ω−Ω_p)²/γ_p²].
    GaussianOhmic {
        alpha: T,
        omega_c: T,
        alpha_p: T,
        omega_p: T,
        gamma_p: T,
    },
    /// |g_p|²·δ(Ω − Ω_p); `g_sq` in meV².
    SingleMode { g_sq: T, omega_p: T },
    /// Measured spectrum, linearly interpolated and zero outside its range.
    Tabulated(Tabulated<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated<T> {
    omega: Vec<T>,
    value: Vec<T>,
}

impl<T: Real> Tabulated<T> {
    pub fn new(samples: Vec<(T, T)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("samples", "need at least two samples"));
        }
        let mut omega = Vec::with_capacity(samples.len());
        let mut value = Vec::with_capacity(samples.len());
        for (k, &(w, v)) in samples.iter().enumerate() {
            if !w.is_finite() || !v.is_finite() || w < T::zero() {
                return Err(Error::invalid("samples", format!("row {k}: bad sample ({w}, {v})")));
            }
            if v < T::zero() {
                return Err(Error::invalid("samples", format!("row {k}: negative density {v}")));
            }
            if let Some(&prev) = omega.last() {
                if !(w > prev) {
                    return Err(Error::invalid(
                        "samples",
                        format!("row {k}: frequencies must be strictly increasing"),
                    ));
                }
            }
            omega.push(w);
            value.push(v);
        }
        Ok(Self { omega, value })
    }

    pub fn samples(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.omega.iter().copied().zip(self.value.iter().copied())
    }

    pub fn range(&self) -> (T, T) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    fn interpolate(&self, w: T) -> T {
        let (lo, hi) = self.range();
        if w < lo || w > hi {
            return T::zero();
        }
        let k = match self.omega.binary_search_by(|x| x.partial_cmp(&w).unwrap()) {
            Ok(k) => return self.value[k],
            Err(k) => k,
        };
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let (v0, v1) = (self.value[k - 1], self.value[k]);
        v0 + (v1 - v0) * (w - w0) / (w1 - w0)
    }
}

fn check_nonneg<T: Real>(field: &str, x: T) -> Result<()> {
    if x.is_finite() && x >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {x}")))
    }
}

fn check_pos<T: Real>(field: &str, x: T) -> Result<()> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {x}")))
    }
}

impl<T: Real> SpectralDensity<T> {
    pub fn ohmic(alpha: T, omega_c: T) -> Result<Self> {
        check_nonneg("alpha", alpha)?;
        check_pos("omega_c", omega_c)?;
        Ok(Self::Ohmic { alpha, omega_c })
    }

    pub fn gaussian_ohmic(alpha: T, omega_c: T, alpha_p: T, omega_p: T, gamma_p: T) -> Result<Self> {
        check_nonneg("alpha", alpha)?;
        check_pos("omega_c", omega_c)?;
        check_nonneg("alpha_p", alpha_p)?;
        check_pos("omega_p", omega_p)?;
        check_pos("gamma_p", gamma_p)?;
        Ok(Self::GaussianOhmic {
            alpha,
            omega_c,
            alpha_p,
            omega_p,
            gamma_p,
        })
    }

    pub fn single_mode(g_sq: T, omega_p: T) -> Result<Self> {
        check_nonneg("g_sq", g_sq)?;
        check_pos("omega_p", omega_p)?;
        Ok(Self::SingleMode { g_sq, omega_p })
    }

    pub fn tabulated(samples: Vec<(T, T)>) -> Result<Self> {
        Ok(Self::Tabulated(Tabulated::new(samples)?))
    }

    /// Re-checks the invariants, e.g. after fields were edited in place.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Ohmic { alpha, omega_c } => Self::ohmic(alpha, omega_c).map(|_| ()),
            Self::GaussianOhmic {
                alpha,
                omega_c,
                alpha_p,
                omega_p,
                gamma_p,
            } => Self::gaussian_ohmic(alpha, omega_c, alpha_p, omega_p, gamma_p).map(|_| ()),
            Self::SingleMode { g_sq, omega_p } => Self::single_mode(g_sq, omega_p).map(|_| ()),
            Self::Tabulated(ref t) => Tabulated::new(t.samples().collect()).map(|_| ()),
        }
    }

    pub fn is_single_mode(&self) -> bool {
        matches!(self, Self::SingleMode { .. })
    }

    /// I(Ω) in meV for Ω in meV.
    pub fn density(&self, omega: T) -> Result<T> {
        if !(omega >= T::zero()) {
            return Err(Error::Domain(format!("negative frequency {omega}")));
        }
        match self {
            Self::SingleMode { .. } => Err(Error::Unsupported(
                "single-mode density is a delta function; use the closed-form decoherence paths"
                    .into(),
            )),
            _ => Ok(self.density_over_energy(omega) * omega),
        }
    }

    /// I(Ω)/Ω, finite as Ω → 0 for every continuous variant.
    pub(crate) fn density_over_energy(&self, omega: T) -> T {
        match *self {
            Self::Ohmic { alpha, omega_c } => alpha * (-omega / omega_c).exp(),
            Self::GaussianOhmic {
                alpha,
                omega_c,
                alpha_p,
                omega_p,
                gamma_p,
            } => {
                let ohm = alpha * (-omega / omega_c).exp();
                let z = (omega - omega_p) / gamma_p;
                let line = alpha_p * omega / (T::PI().sqrt() * gamma_p) * (-z * z).exp();
                ohm + line
            }
            Self::SingleMode { .. } => T::zero(),
            Self::Tabulated(ref tab) => {
                if omega > T::zero() {
                    tab.interpolate(omega) / omega
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Thermalized boson factor η(Ω,T) = I(Ω)·coth(ħΩ/2k_BT) in meV.
    pub fn eta(&self, omega: T, temp_k: T) -> Result<T> {
        if !(omega > T::zero()) {
            return Err(Error::Domain(format!("eta needs Ω > 0, got {omega}")));
        }
        if temp_k < T::zero() {
            return Err(Error::Domain(format!("negative temperature {temp_k} K")));
        }
        if self.is_single_mode() {
            return self.density(omega);
        }
        Ok(self.eta_unchecked(omega, temp_k, &PhysConst::codata()))
    }

    /// η evaluated as (I/Ω)·(Ω coth), well defined down to Ω = 0.
    #[inline]
    pub(crate) fn eta_unchecked(&self, omega: T, temp_k: T, c: &PhysConst<T>) -> T {
        self.density_over_energy(omega) * c.energy_times_coth(omega, temp_k)
    }

    /// Upper end of the search bracket for Ω_th and a sensible scale for
    /// the quadrature cutoff.
    fn search_extent(&self) -> T {
        match *self {
            Self::Ohmic { omega_c, .. } => T::lit(10.0) * omega_c,
            Self::GaussianOhmic {
                omega_c,
                omega_p,
                gamma_p,
                ..
            } => T::lit(10.0) * omega_c.max(omega_p + T::lit(3.0) * gamma_p),
            Self::SingleMode { omega_p, .. } => omega_p,
            Self::Tabulated(ref tab) => tab.range().1,
        }
    }

    /// Default quadrature cutoff in meV: max(40 Ω_c, Ω_p + 8 γ_p).
    pub fn default_cutoff(&self) -> T {
        match *self {
            Self::Ohmic { omega_c, .. } => T::lit(40.0) * omega_c,
            Self::GaussianOhmic {
                omega_c,
                omega_p,
                gamma_p,
                ..
            } => (T::lit(40.0) * omega_c).max(omega_p + T::lit(8.0) * gamma_p),
            Self::SingleMode { omega_p, .. } => omega_p,
            Self::Tabulated(ref tab) => tab.range().1,
        }
    }

    /// Frequency range (meV) carrying essentially all of the weight; used to
    /// place oscillation-tracking breakpoints.
    pub(crate) fn significant_extent(&self) -> T {
        match *self {
            Self::Ohmic { omega_c, .. } => T::lit(25.0) * omega_c,
            Self::GaussianOhmic {
                omega_c,
                omega_p,
                gamma_p,
                ..
            } => (T::lit(25.0) * omega_c).max(omega_p + T::lit(6.0) * gamma_p),
            Self::SingleMode { omega_p, .. } => omega_p,
            Self::Tabulated(ref tab) => tab.range().1,
        }
    }

    /// Ω_th: the frequency (meV) at which η(Ω,T) peaks.
    ///
    /// A coarse scan picks the highest lobe, then golden-section search
    /// refines it to 1e-6 meV.
    pub fn omega_th(&self, temp_k: T) -> T {
        if let Self::SingleMode { omega_p, .. } = *self {
            return omega_p;
        }
        let c = PhysConst::codata();
        let eta = |w: T| self.eta_unchecked(w, temp_k, &c);
        let (lo, hi) = match self {
            Self::Tabulated(tab) => tab.range(),
            _ => (T::zero(), self.search_extent()),
        };
        let n = 4000usize;
        let step = (hi - lo) / T::from_usize_lossy(n);
        let mut best = (0usize, eta(lo));
        for k in 1..=n {
            let v = eta(lo + step * T::from_usize_lossy(k));
            if v > best.1 {
                best = (k, v);
            }
        }
        let a = lo + step * T::from_usize_lossy(best.0.saturating_sub(1));
        let b = (lo + step * T::from_usize_lossy(best.0 + 1)).min(hi);
        golden_max(eta, a, b, T::lit(1e-6))
    }

    /// Largest π-pulse interval (ps) for which successive displacements of
    /// the bath stay out of phase: π / (2 Ω_th), Ω_th in rad/ps.
    pub fn stabilization_interval(&self, temp_k: T) -> T {
        let w = PhysConst::<T>::codata().energy_to_angfreq(self.omega_th(temp_k));
        T::PI() / (T::lit(2.0) * w)
    }
}

fn golden_max<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) * T::lit(0.5);
    // endpoint maxima (e.g. η peaked at Ω → 0 at high T)
    [a, x, b]
        .into_iter()
        .fold((x, f(x)), |acc, p| if f(p) > acc.1 { (p, f(p)) } else { acc })
        .0
}
