//! Physical constants and the conversions between meV, ps and rad/ps.
//!
//! Everything inside the crate works with angular frequencies in rad/ps and
//! times in ps; energies in meV appear only at the API boundary.

use crate::error::{Error, Result};
use crate::real::Real;

/// Reduced Planck constant in meV·ps (CODATA 2018).
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;
/// Boltzmann constant in meV/K (CODATA 2018).
pub const KB_MEV_PER_K: f64 = 0.086_173_332_62;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConst<T> {
    /// meV·ps
    pub hbar: T,
    /// meV/K
    pub kb: T,
}

impl<T: Real> PhysConst<T> {
    pub fn codata() -> Self {
        Self {
            hbar: T::lit(HBAR_MEV_PS),
            kb: T::lit(KB_MEV_PER_K),
        }
    }

    /// Overrides the constants. Only meant for tests that check how results
    /// scale with ħ or k_B.
    #[doc(hidden)]
    pub fn with_values(hbar: T, kb: T) -> Result<Self> {
        if !(hbar > T::zero() && kb > T::zero()) {
            return Err(Error::Domain("physical constants must be positive".into()));
        }
        Ok(Self { hbar, kb })
    }

    #[inline]
    pub fn energy_to_angfreq(&self, e_mev: T) -> T {
        e_mev / self.hbar
    }

    #[inline]
    pub fn angfreq_to_energy(&self, omega: T) -> T {
        omega * self.hbar
    }

    /// coth(E / 2 k_B T), exactly 1 at T = 0.
    pub fn coth_thermal(&self, e_mev: T, temp_k: T) -> Result<T> {
        if !(e_mev > T::zero()) {
            return Err(Error::Domain(format!(
                "coth_thermal needs a positive energy, got {e_mev}"
            )));
        }
        if temp_k < T::zero() {
            return Err(Error::Domain(format!("negative temperature {temp_k} K")));
        }
        Ok(self.coth_unchecked(e_mev, temp_k))
    }

    #[inline]
    pub(crate) fn coth_unchecked(&self, e_mev: T, temp_k: T) -> T {
        if temp_k == T::zero() {
            return T::one();
        }
        let x = e_mev / (T::lit(2.0) * self.kb * temp_k);
        if x > T::lit(40.0) {
            T::one()
        } else {
            T::one() / x.tanh()
        }
    }

    /// E·coth(E / 2 k_B T); tends to 2 k_B T as E → 0.
    #[inline]
    pub(crate) fn energy_times_coth(&self, e_mev: T, temp_k: T) -> T {
        if temp_k == T::zero() {
            return e_mev;
        }
        let two_kt = T::lit(2.0) * self.kb * temp_k;
        let x = e_mev / two_kt;
        if x > T::one() {
            e_mev * self.coth_unchecked(e_mev, temp_k)
        } else {
            two_kt * crate::real::x_coth_x(x)
        }
    }
}

impl<T: Real> Default for PhysConst<T> {
    fn default() -> Self {
        Self::codata()
    }
}

/// E / ħ with the CODATA ħ.
pub fn energy_to_angfreq<T: Real>(e_mev: T) -> T {
    PhysConst::<T>::codata().energy_to_angfreq(e_mev)
}

pub fn angfreq_to_energy<T: Real>(omega: T) -> T {
    PhysConst::<T>::codata().angfreq_to_energy(omega)
}

/// coth(E / 2 k_B T) with the CODATA constants.
pub fn coth_thermal<T: Real>(e_mev: T, temp_k: T) -> Result<T> {
    PhysConst::<T>::codata().coth_thermal(e_mev, temp_k)
}
