//! Exact evolution of one qubit coupled to a single truncated boson mode.
//!
//! The state lives on qubit ⊗ Fock{0..N_cut}. Free evolution is taken in the
//! interaction picture of the boson, where it reduces to the conditional
//! displacement exp[σ_z(αb† − α*b)] with α depending on absolute time, so the
//! state tracks the current time. Direction-resolved amplitudes come from
//! phase cycling over a 5×5×5 grid of pulse phases.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pulses::{enumerate_weak_orders, DiffractionOrder};
use crate::real::Real;
use crate::units::PhysConst;

const TAIL_BOUND: f64 = 1e-10;
const LEAKAGE_BOUND: f64 = 1e-8;

/// Square dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let src = &rhs.data[k * n..(k + 1) * n];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// exp(A) by scaling and squaring with a Taylor core.
    pub fn expm(&self) -> Self {
        let norm = self.norm_one();
        let mut squarings = 0u32;
        let mut s = T::one();
        while norm / s > T::lit(0.25) {
            s = s * T::lit(2.0);
            squarings += 1;
        }
        let a = self.scale(Complex::new(T::one() / s, T::zero()));
        let mut result = Self::identity(self.n);
        let mut term = Self::identity(self.n);
        for k in 1..=30 {
            term = term.matmul(&a).scale(Complex::new(T::one() / T::from_usize_lossy(k), T::zero()));
            result = result.add(&term);
            if term.norm_one() <= T::eps() * result.norm_one() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Fock cutoff selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FockCutoff {
    /// Smallest thermal-tail cutoff plus headroom for the largest
    /// displacement a three-interval sequence can produce.
    Auto,
    Fixed(usize),
}

/// Mean thermal occupation 1/(e^{ħΩ/k_BT} − 1); 0 at T = 0.
pub fn mean_occupation<T: Real>(omega_p_mev: T, temp_k: T) -> T {
    if temp_k == T::zero() {
        return T::zero();
    }
    let x = omega_p_mev / (PhysConst::<T>::codata().kb * temp_k);
    T::one() / x.exp_m1()
}

/// Truncated, renormalized thermal populations over levels 0..=n_cut.
fn thermal_populations<T: Real>(omega_p_mev: T, temp_k: T, n_cut: usize) -> Vec<T> {
    let mut p = vec![T::zero(); n_cut + 1];
    if temp_k == T::zero() {
        p[0] = T::one();
        return p;
    }
    let x = omega_p_mev / (PhysConst::<T>::codata().kb * temp_k);
    let r = (-x).exp();
    let mut w = T::one();
    for v in p.iter_mut() {
        *v = w;
        w = w * r;
    }
    let z: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v = *v / z);
    p
}

fn tail_cutoff<T: Real>(omega_p_mev: T, temp_k: T) -> usize {
    if temp_k == T::zero() {
        return 0;
    }
    let x = omega_p_mev / (PhysConst::<T>::codata().kb * temp_k);
    // population of the top level after renormalization ≈ (1 − r)·r^N
    let r = (-x).exp();
    let mut n = 0usize;
    while (T::one() - r) * r.powi(n as i32) >= T::lit(TAIL_BOUND) && n < 100_000 {
        n += 1;
    }
    n
}

/// Qubit ⊗ truncated boson density matrix with its coupling parameters.
///
/// Index layout: qubit-major, `q·(N_cut+1) + n` with q = 0 for |↓⟩ and 1 for |↑⟩.
#[derive(Debug, Clone)]
pub struct ThermalOracleState<T> {
    pub rho: DenseMatrix<T>,
    pub n_cut: usize,
    /// rad/ps
    pub omega_p: T,
    /// rad/ps
    pub g_p: T,
    /// K
    pub temperature: T,
    /// Current time in ps, the reference for displacement phases.
    pub time: T,
}

/// Prepares |↓⟩ ⊗ ρ_th(T) at time `t0`. Ω_p and g_p are given in meV.
pub fn build_thermal<T: Real>(
    omega_p_mev: T,
    g_p_mev: T,
    temp_k: T,
    cutoff: FockCutoff,
    t0: T,
) -> Result<ThermalOracleState<T>> {
    if !(omega_p_mev > T::zero()) {
        return Err(Error::invalid("omega_p", format!("must be > 0, got {omega_p_mev}")));
    }
    if !(g_p_mev.is_finite() && temp_k >= T::zero()) {
        return Err(Error::invalid("g_p/temperature", "must be finite, T >= 0"));
    }
    let tail_n = tail_cutoff(omega_p_mev, temp_k);
    let n_cut = match cutoff {
        FockCutoff::Fixed(n) => {
            let p = thermal_populations(omega_p_mev, temp_k, n);
            if p[n] >= T::lit(TAIL_BOUND) && n > 0 {
                return Err(Error::Cutoff(format!(
                    "N_cut = {n} leaves thermal tail {:e} (need < {TAIL_BOUND:e}, try N_cut >= {tail_n})",
                    p[n]
                )));
            }
            if n == 0 && temp_k > T::zero() && p[0] < T::one() {
                return Err(Error::Cutoff("N_cut = 0 cannot hold a thermal state".into()));
            }
            n
        }
        FockCutoff::Auto => {
            let beta = T::lit(6.0) * (g_p_mev / omega_p_mev).abs();
            let tail = T::from_usize_lossy(tail_n);
            let head = T::lit(4.0) * beta * beta + T::lit(8.0) * beta * (tail + T::one()).sqrt();
            tail_n + head.ceil().to_usize().unwrap_or(0) + 12
        }
    };
    let c = PhysConst::<T>::codata();
    let pops = thermal_populations(omega_p_mev, temp_k, n_cut);
    let dim = 2 * (n_cut + 1);
    let mut rho = DenseMatrix::zeros(dim);
    for (n, &p) in pops.iter().enumerate() {
        rho[(n, n)] = Complex::new(p, T::zero());
    }
    Ok(ThermalOracleState {
        rho,
        n_cut,
        omega_p: c.energy_to_angfreq(omega_p_mev),
        g_p: c.energy_to_angfreq(g_p_mev),
        temperature: temp_k,
        time: t0,
    })
}

/// exp[(θ/2)(σ₊e^{iφ} − σ₋e^{−iφ})] acting on the qubit.
fn pulse_matrix<T: Real>(theta: T, phi: T) -> [[Complex<T>; 2]; 2] {
    let half = theta * T::lit(0.5);
    let (c, s) = (half.cos(), half.sin());
    let cc = Complex::new(c, T::zero());
    // rows/cols: 0 = ↓, 1 = ↑
    [
        [cc, -Complex::from_polar(s, -phi)],
        [Complex::from_polar(s, phi), cc],
    ]
}

/// Truncated displacement exp(βb† − β*b) on Fock{0..n_cut}.
fn displacement<T: Real>(beta: Complex<T>, n_cut: usize) -> DenseMatrix<T> {
    let dim = n_cut + 1;
    let mut g = DenseMatrix::zeros(dim);
    for n in 0..n_cut {
        let amp = T::from_usize_lossy(n + 1).sqrt();
        // b†|n⟩ = √(n+1)|n+1⟩
        g[(n + 1, n)] = beta * amp;
        // −β* b|n+1⟩ = −β*√(n+1)|n⟩
        g[(n, n + 1)] = -beta.conj() * amp;
    }
    g.expm()
}

/// Conditional displacement pair (↓ block, ↑ block) for one interval,
/// each carrying the global phase e^{iΘ}.
#[derive(Debug, Clone)]
struct FreeStep<T> {
    down: DenseMatrix<T>,
    up: DenseMatrix<T>,
}

impl<T: Real> ThermalOracleState<T> {
    fn block(&self) -> usize {
        self.n_cut + 1
    }

    pub fn apply_pulse(&mut self, theta: T, phi: T) {
        let u = pulse_matrix(theta, phi);
        let b = self.block();
        let mut out = DenseMatrix::zeros(self.rho.dim());
        // (U ρ U†)_{(q,n),(q',n')} = Σ U_{qr} ρ_{(r,n),(r',n')} U*_{q'r'}
        for q in 0..2 {
            for qp in 0..2 {
                for r in 0..2 {
                    for rp in 0..2 {
                        let w = u[q][r] * u[qp][rp].conj();
                        if w.norm_sqr() == T::zero() {
                            continue;
                        }
                        for n in 0..b {
                            for np in 0..b {
                                let v = self.rho[(r * b + n, rp * b + np)];
                                out[(q * b + n, qp * b + np)] = out[(q * b + n, qp * b + np)] + w * v;
                            }
                        }
                    }
                }
            }
        }
        self.rho = out;
    }

    fn free_step(&self, dt: T) -> FreeStep<T> {
        let w = self.omega_p;
        let (t_start, t_end) = (self.time, self.time + dt);
        let phase = |t: T| Complex::from_polar(T::one(), w * t);
        let alpha = (phase(t_start) - phase(t_end)) * (self.g_p / w);
        let wt = w * dt;
        let global = Complex::from_polar(T::one(), self.g_p * self.g_p * (wt - wt.sin()) / (w * w));
        FreeStep {
            down: displacement(-alpha, self.n_cut).scale(global),
            up: displacement(alpha, self.n_cut).scale(global),
        }
    }

    fn apply_free(&mut self, step: &FreeStep<T>, dt: T) -> Result<()> {
        let b = self.block();
        let blocks = [&step.down, &step.up];
        let mut out = DenseMatrix::zeros(self.rho.dim());
        for q in 0..2 {
            for qp in 0..2 {
                let mut sub = DenseMatrix::zeros(b);
                for n in 0..b {
                    for np in 0..b {
                        sub[(n, np)] = self.rho[(q * b + n, qp * b + np)];
                    }
                }
                let conj = blocks[q].matmul(&sub).matmul(&blocks[qp].adjoint());
                for n in 0..b {
                    for np in 0..b {
                        out[(q * b + n, qp * b + np)] = conj[(n, np)];
                    }
                }
            }
        }
        self.rho = out;
        self.time = self.time + dt;
        self.check_leakage()
    }

    fn check_leakage(&self) -> Result<()> {
        let b = self.block();
        let top = self.rho[(b - 1, b - 1)].re + self.rho[(2 * b - 1, 2 * b - 1)].re;
        if top > T::lit(LEAKAGE_BOUND) {
            return Err(Error::Cutoff(format!(
                "top Fock level population {top:e} exceeds {LEAKAGE_BOUND:e} at N_cut = {}",
                self.n_cut
            )));
        }
        Ok(())
    }

    /// Free evolution by `dt` ps starting from the current time.
    pub fn evolve_free(&mut self, dt: T) -> Result<()> {
        if !(dt >= T::zero()) {
            return Err(Error::Domain(format!("negative time step {dt}")));
        }
        if dt == T::zero() {
            return Ok(());
        }
        let step = self.free_step(dt);
        self.apply_free(&step, dt)
    }

    pub fn evolve_to(&mut self, t: T) -> Result<()> {
        self.evolve_free(t - self.time)
    }

    /// Tr[(σ₊ ⊗ 1) ρ] = Σ_n ⟨↓,n|ρ|↑,n⟩.
    pub fn polarization(&self) -> Complex<T> {
        let b = self.block();
        (0..b).fold(Complex::new(T::zero(), T::zero()), |acc, n| acc + self.rho[(n, b + n)])
    }

    pub fn trace(&self) -> Complex<T> {
        self.rho.trace()
    }

    /// Qubit populations (↓, ↑).
    pub fn populations(&self) -> (T, T) {
        let b = self.block();
        let down = (0..b).map(|n| self.rho[(n, n)].re).sum();
        let up = (0..b).map(|n| self.rho[(b + n, b + n)].re).sum();
        (down, up)
    }

    /// Tr[ρ_q²] of the reduced qubit state.
    pub fn qubit_purity(&self) -> T {
        let (down, up) = self.populations();
        let coh = self.polarization();
        down * down + up * up + T::lit(2.0) * coh.norm_sqr()
    }

    pub fn hermiticity_defect(&self) -> T {
        self.rho.max_abs_diff(&self.rho.adjoint())
    }
}

/// A weak three-pulse experiment for the oracle. Energies in meV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleExperiment<T> {
    pub omega_p: T,
    pub g_p: T,
    pub temperature: T,
    pub cutoff: FockCutoff,
    pub times: [T; 3],
    pub thetas: [T; 3],
    /// Observation time, ≥ t₂.
    pub t: T,
}

const CYCLE: usize = 5;

/// Fourier components of the polarization over the pulse phases.
#[derive(Debug, Clone)]
pub struct PhaseCycleResult<T> {
    /// Indexed by (n₀+2, n₁+2, n₂+2) with every nₘ ∈ [−2, 2].
    components: Vec<Complex<T>>,
    /// Polarization with all pulse phases zero.
    pub total: Complex<T>,
    pub n_cut: usize,
}

impl<T: Real> PhaseCycleResult<T> {
    fn slot(n: [i32; 3]) -> Option<usize> {
        if n.iter().any(|&x| !(-2..=2).contains(&x)) {
            return None;
        }
        let k = |x: i32| (x + 2) as usize;
        Some(k(n[0]) * CYCLE * CYCLE + k(n[1]) * CYCLE + k(n[2]))
    }

    /// Amplitude radiated into `order`; zero when outside the resolvable range.
    pub fn amplitude(&self, order: &DiffractionOrder) -> Complex<T> {
        if order.coeffs().len() > 3 {
            return Complex::new(T::zero(), T::zero());
        }
        let n = [order.coeff(0), order.coeff(1), order.coeff(2)];
        Self::slot(n)
            .map(|s| self.components[s])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// All resolvable components, including the non-radiating ones.
    pub fn components(&self) -> impl Iterator<Item = ([i32; 3], Complex<T>)> + '_ {
        (0..CYCLE * CYCLE * CYCLE).map(move |s| {
            let n = [
                (s / (CYCLE * CYCLE)) as i32 - 2,
                ((s / CYCLE) % CYCLE) as i32 - 2,
                (s % CYCLE) as i32 - 2,
            ];
            (n, self.components[s])
        })
    }

    /// |total − Σ of the nine expected orders|.
    pub fn completeness_defect(&self) -> T {
        let sum = enumerate_weak_orders()
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, w| acc + self.amplitude(&w.order));
        (sum - self.total).norm()
    }
}

/// Runs the oracle over the 5×5×5 phase grid and extracts every order
/// n = (n₀, n₁, n₂) with |nₘ| ≤ 2 via c_n = (1/125)·Σ_φ P(φ)·e^{+i n·φ}.
pub fn phase_cycle<T: Real>(exp: &OracleExperiment<T>) -> Result<PhaseCycleResult<T>> {
    let [t0, t1, t2] = exp.times;
    if !(t0 < t1 && t1 < t2 && t2 <= exp.t) {
        return Err(Error::invalid("times", "need t0 < t1 < t2 <= t"));
    }
    let base = build_thermal(exp.omega_p, exp.g_p, exp.temperature, exp.cutoff, t0)?;
    let ends = [t1, t2, exp.t];
    // free steps depend only on the timing; share them across the phase grid
    let mut probe = base.clone();
    let mut steps = Vec::with_capacity(3);
    for &te in &ends {
        let dt = te - probe.time;
        steps.push((probe.free_step(dt), dt));
        probe.time = te;
    }
    let step_phase = T::lit(2.0) * T::PI() / T::from_usize_lossy(CYCLE);
    let grid: Vec<[usize; 3]> = (0..CYCLE * CYCLE * CYCLE)
        .map(|s| [s / (CYCLE * CYCLE), (s / CYCLE) % CYCLE, s % CYCLE])
        .collect();
    let values: Vec<Complex<T>> = grid
        .par_iter()
        .map(|p| -> Result<Complex<T>> {
            let mut st = base.clone();
            for m in 0..3 {
                st.apply_pulse(exp.thetas[m], step_phase * T::from_usize_lossy(p[m]));
                let (step, dt) = &steps[m];
                st.apply_free(step, *dt)?;
            }
            Ok(st.polarization())
        })
        .collect::<Result<_>>()?;

    let norm = T::one() / T::from_usize_lossy(values.len());
    let mut components = Vec::with_capacity(values.len());
    for s in 0..CYCLE * CYCLE * CYCLE {
        let n = [
            (s / (CYCLE * CYCLE)) as i32 - 2,
            ((s / CYCLE) % CYCLE) as i32 - 2,
            (s % CYCLE) as i32 - 2,
        ];
        let mut acc = Complex::new(T::zero(), T::zero());
        for (p, v) in grid.iter().zip(&values) {
            let arg = (0..3).fold(T::zero(), |a, m| {
                a + T::lit(f64::from(n[m])) * step_phase * T::from_usize_lossy(p[m])
            });
            acc = acc + *v * Complex::from_polar(T::one(), arg);
        }
        components.push(acc * norm);
    }
    Ok(PhaseCycleResult {
        components,
        total: values[0],
        n_cut: base.n_cut,
    })
}

/// Free decay after a single pulse of area `theta` at `t0`, sampled at `ts`.
pub fn free_decay<T: Real>(
    omega_p_mev: T,
    g_p_mev: T,
    temp_k: T,
    cutoff: FockCutoff,
    theta: T,
    t0: T,
    ts: &[T],
) -> Result<Vec<ThermalOracleState<T>>> {
    let mut st = build_thermal(omega_p_mev, g_p_mev, temp_k, cutoff, t0)?;
    st.apply_pulse(theta, T::zero());
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        // each sample starts from the post-pulse state to avoid error build-up
        let mut s = st.clone();
        s.evolve_to(t)?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{single_mode_g_prime, single_mode_gamma_plus};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let mut d = DenseMatrix::<f64>::zeros(2);
        d[(0, 0)] = c(1.0, 0.0);
        d[(1, 1)] = c(0.0, PI);
        let e = d.expm();
        assert!((e[(0, 0)] - c(1f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-13);
        let mut r = DenseMatrix::<f64>::zeros(2);
        r[(0, 1)] = c(-3.0, 0.0);
        r[(1, 0)] = c(3.0, 0.0);
        let e = r.expm();
        assert!((e[(0, 0)] - c(3f64.cos(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 0)] - c(3f64.sin(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn occupation_examples() {
        let kb = crate::units::KB_MEV_PER_K;
        let e = 2f64.ln() * kb * 10.0;
        assert!((mean_occupation(e, 10.0) - 1.0).abs() < 1e-12);
        assert_eq!(mean_occupation(8.0f64, 0.0), 0.0);
        let n = mean_occupation(8.0f64, 10.0);
        assert!((n - 1.0 / ((8.0 / (kb * 10.0)).exp() - 1.0)).abs() < 1e-18);
        assert!((n - 9.2943e-5).abs() < 1e-8);
    }

    #[test]
    fn thermal_construction() {
        let st = build_thermal(8.0f64, 0.5, 0.0, FockCutoff::Auto, 0.0).unwrap();
        assert_eq!(st.rho[(0, 0)], c(1.0, 0.0));
        assert!((st.trace() - c(1.0, 0.0)).norm() < 1e-15);
        let hot = build_thermal(8.0f64, 0.5, 100.0, FockCutoff::Fixed(40), 0.0).unwrap();
        assert!(hot.rho[(40, 40)].re < 1e-10);
        assert!((hot.trace() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(matches!(
            build_thermal(8.0f64, 0.5, 100.0, FockCutoff::Fixed(5), 0.0),
            Err(Error::Cutoff(_))
        ));
        assert!(build_thermal(0.0f64, 0.5, 10.0, FockCutoff::Auto, 0.0).is_err());
    }

    #[test]
    fn pulse_examples() {
        let mut st = build_thermal(8.0f64, 0.5, 10.0, FockCutoff::Fixed(8), 0.0).unwrap();
        st.apply_pulse(PI, 0.3);
        let (d, u) = st.populations();
        assert!(d.abs() < 1e-15 && (u - 1.0).abs() < 1e-15);
        st.apply_pulse(2.0 * PI, 1.1);
        let (d2, u2) = st.populations();
        assert!((d2 - d).abs() < 1e-15 && (u2 - u).abs() < 1e-15);

        let mut half = build_thermal(8.0f64, 0.5, 10.0, FockCutoff::Fixed(8), 0.0).unwrap();
        half.apply_pulse(PI / 2.0, 0.0);
        let (d, u) = half.populations();
        assert!((d - 0.5).abs() < 1e-15 && (u - 0.5).abs() < 1e-15);
        assert!((half.polarization().norm() - 0.5).abs() < 1e-15);
        assert!((half.trace() - c(1.0, 0.0)).norm() < 1e-14);

        let theta = 0.7;
        let mut p = build_thermal(8.0f64, 0.5, 0.0, FockCutoff::Fixed(4), 0.0).unwrap();
        assert_eq!(p.polarization(), c(0.0, 0.0));
        p.apply_pulse(theta, 0.0);
        assert!((p.polarization().norm() - 0.5 * theta.sin()).abs() < 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let mut st = build_thermal(8.0f64, 0.5, 10.0, FockCutoff::Fixed(8), 0.2).unwrap();
        st.apply_pulse(PI / 2.0, 0.0);
        let before = st.rho.clone();
        st.evolve_free(0.0).unwrap();
        assert_eq!(st.rho, before);
        assert!(st.evolve_free(-1.0).is_err());
    }

    #[test]
    fn thermal_displacement_identity() {
        // Tr[D(β)ρ_th] = exp[−(|β|²/2)·coth(ħΩ/2k_BT)]
        let n_cut = 60;
        for &temp in &[0.0, 10.0, 100.0] {
            let st = build_thermal(8.0f64, 0.5, temp, FockCutoff::Fixed(n_cut), 0.0).unwrap();
            let beta = c(0.3, -0.45);
            let d = displacement(beta, n_cut);
            let mut tr = c(0.0, 0.0);
            for i in 0..=n_cut {
                for j in 0..=n_cut {
                    tr += d[(i, j)] * st.rho[(j, i)];
                }
            }
            let coth = crate::units::coth_thermal(8.0, temp).unwrap();
            let expect = (-(beta.norm_sqr() / 2.0) * coth).exp();
            assert!((tr - c(expect, 0.0)).norm() < 1e-12, "T={temp}: {tr} vs {expect}");
        }
    }

    #[test]
    fn free_decay_matches_single_mode_gamma() {
        let (omega, g) = (8.0, 0.9);
        let w = crate::units::energy_to_angfreq(omega);
        for &temp in &[0.0, 10.0, 100.0] {
            let gp = single_mode_g_prime(g * g, omega, temp).unwrap();
            let ts: Vec<f64> = (1..=12).map(|k| 0.07 * k as f64).collect();
            let states =
                free_decay(omega, g, temp, FockCutoff::Fixed(40), PI / 2.0, 0.0, &ts).unwrap();
            for (st, &t) in states.iter().zip(&ts) {
                let got = -(2.0 * st.polarization().norm()).ln();
                let expect = single_mode_gamma_plus(gp, w, 0.0, t);
                assert!((got - expect).abs() < 1e-8, "T={temp} t={t}: {got} {expect}");
                assert!((st.trace() - c(1.0, 0.0)).norm() < 1e-12);
                assert!(st.hermiticity_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn purity_recoheres_at_mode_period() {
        let (omega, g) = (8.0, 0.9);
        let period = 2.0 * PI / crate::units::energy_to_angfreq(omega);
        let ts = [0.3 * period, period, 1.5 * period, 2.0 * period];
        let states = free_decay(omega, g, 0.0, FockCutoff::Auto, PI / 2.0, 0.0, &ts).unwrap();
        let purities: Vec<f64> = states.iter().map(|s| s.qubit_purity()).collect();
        for p in &purities {
            assert!(*p <= 1.0 + 1e-12);
        }
        assert!(purities[0] < 0.99);
        assert!(purities[1] >= 1.0 - 1e-8 && purities[3] >= 1.0 - 1e-8, "{purities:?}");
    }

    #[test]
    fn leakage_is_reported() {
        let mut st = build_thermal(8.0f64, 6.0, 0.0, FockCutoff::Fixed(3), 0.0).unwrap();
        st.apply_pulse(PI / 2.0, 0.0);
        let half_period = PI / crate::units::energy_to_angfreq(8.0);
        assert!(matches!(st.evolve_free(half_period), Err(Error::Cutoff(_))));
    }

    #[test]
    fn phase_cycle_is_complete() {
        let exp = OracleExperiment {
            omega_p: 8.0,
            g_p: 0.6,
            temperature: 10.0,
            cutoff: FockCutoff::Fixed(14),
            times: [0.0, 0.13, 0.31],
            thetas: [0.7, 1.1, 1.9],
            t: 0.52,
        };
        let r = phase_cycle(&exp).unwrap();
        assert!(r.completeness_defect() < 1e-12);
        let tracked: Vec<DiffractionOrder> = enumerate_weak_orders().into_iter().map(|w| w.order).collect();
        for (n, v) in r.components() {
            let order = DiffractionOrder::new(n.to_vec());
            if !tracked.contains(&order) {
                assert!(v.norm() < 1e-13, "{order}: {v}");
            }
        }
    }
}
