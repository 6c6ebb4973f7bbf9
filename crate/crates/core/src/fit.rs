//! Simultaneous least-squares estimation of reservoir and ensemble
//! parameters from several direction-resolved curves.
//!
//! The solver is a bounded Levenberg–Marquardt iteration with a central
//! finite-difference Jacobian, restarted from a Halton set of points in the
//! bound box. It works on any [`ResidualModel`]; [`FitProblem`] is the one
//! backed by the signal forward model.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pulses::{DiffractionOrder, PulseSequence};
use crate::real::Real;
use crate::signals::{self, EnsembleSpec, Medium, Observable, TimeIntegration, WeakSignal};
use crate::spectral::SpectralDensity;
use crate::gamma::QuadConfig;

/// A physical parameter the forward model depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Alpha,
    OmegaC,
    AlphaP,
    OmegaP,
    GammaP,
    DeltaB,
    Temperature,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::Alpha,
        Param::OmegaC,
        Param::AlphaP,
        Param::OmegaP,
        Param::GammaP,
        Param::DeltaB,
        Param::Temperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::OmegaC => "omega_c",
            Param::AlphaP => "alpha_p",
            Param::OmegaP => "omega_p",
            Param::GammaP => "gamma_p",
            Param::DeltaB => "delta_b",
            Param::Temperature => "temperature",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("param", format!("unknown parameter `{s}`")))
    }
}

/// Full parameter set of the forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub reservoir: SpectralDensity<T>,
    pub temperature: T,
    pub delta_b: T,
}

impl<T: Real> ModelParams<T> {
    pub fn get(&self, p: Param) -> Result<T> {
        let missing = || Error::invalid(p.name(), "not a parameter of this reservoir model");
        Ok(match (p, &self.reservoir) {
            (Param::Temperature, _) => self.temperature,
            (Param::DeltaB, _) => self.delta_b,
            (Param::Alpha, SpectralDensity::Ohmic { alpha, .. })
            | (Param::Alpha, SpectralDensity::GaussianOhmic { alpha, .. }) => *alpha,
            (Param::OmegaC, SpectralDensity::Ohmic { omega_c, .. })
            | (Param::OmegaC, SpectralDensity::GaussianOhmic { omega_c, .. }) => *omega_c,
            (Param::AlphaP, SpectralDensity::GaussianOhmic { alpha_p, .. }) => *alpha_p,
            (Param::OmegaP, SpectralDensity::GaussianOhmic { omega_p, .. }) => *omega_p,
            (Param::GammaP, SpectralDensity::GaussianOhmic { gamma_p, .. }) => *gamma_p,
            _ => return Err(missing()),
        })
    }

    pub fn set(&mut self, p: Param, v: T) -> Result<()> {
        self.get(p)?;
        match p {
            Param::Temperature => self.temperature = v,
            Param::DeltaB => self.delta_b = v,
            _ => {
                self.reservoir = match self.reservoir.clone() {
                    SpectralDensity::Ohmic { alpha, omega_c } => match p {
                        Param::Alpha => SpectralDensity::ohmic(v, omega_c)?,
                        _ => SpectralDensity::ohmic(alpha, v)?,
                    },
                    SpectralDensity::GaussianOhmic {
                        mut alpha,
                        mut omega_c,
                        mut alpha_p,
                        mut omega_p,
                        mut gamma_p,
                    } => {
                        match p {
                            Param::Alpha => alpha = v,
                            Param::OmegaC => omega_c = v,
                            Param::AlphaP => alpha_p = v,
                            Param::OmegaP => omega_p = v,
                            _ => gamma_p = v,
                        }
                        SpectralDensity::gaussian_ohmic(alpha, omega_c, alpha_p, omega_p, gamma_p)?
                    }
                    other => other,
                };
            }
        }
        Ok(())
    }

    pub fn medium(&self, quad: QuadConfig<T>) -> Result<Medium<T>> {
        Ok(Medium::new(self.reservoir.clone(), self.temperature, EnsembleSpec::new(self.delta_b)?)
            .with_quad(quad))
    }
}

/// A free parameter with its box and starting value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParam<T> {
    pub param: Param,
    pub initial: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind<T> {
    /// I(t) of one observable after a fixed pulse sequence.
    TimeResolved {
        sequence: PulseSequence<T>,
        observable: Observable,
    },
    /// I^int versus t₁ of one echo direction; t₀, t₂ and the areas come from
    /// the template.
    IntegratedVsT1 {
        template: PulseSequence<T>,
        signal: WeakSignal,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub kind: CurveKind<T>,
    /// (abscissa, intensity) pairs: t or t₁ in ps.
    pub samples: Vec<(T, T)>,
    /// Residual weight; `None` means 1/max|data|.
    pub weight: Option<T>,
}

impl<T: Real> Dataset<T> {
    pub fn order(&self) -> DiffractionOrder {
        match &self.kind {
            CurveKind::TimeResolved {
                sequence,
                observable,
            } => observable.order(sequence),
            CurveKind::IntegratedVsT1 { signal, .. } => signal.order(),
        }
    }

    pub fn effective_weight(&self) -> T {
        self.weight.unwrap_or_else(|| {
            let peak = self.samples.iter().fold(T::zero(), |m, s| m.max(s.1.abs()));
            if peak > T::zero() {
                T::one() / peak
            } else {
                T::one()
            }
        })
    }

    /// Forward model at the dataset's abscissae.
    pub fn model(&self, medium: &Medium<T>, ti: &TimeIntegration<T>) -> Result<Vec<T>> {
        let xs: Vec<T> = self.samples.iter().map(|s| s.0).collect();
        match &self.kind {
            CurveKind::TimeResolved {
                sequence,
                observable,
            } => xs
                .iter()
                .map(|&t| signals::intensity(*observable, sequence, medium, t))
                .collect(),
            CurveKind::IntegratedVsT1 { template, signal } => {
                signals::integrated_vs_t1(template, medium, *signal, &xs, ti)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Number of multistart points, the initial guess included.
    pub starts: usize,
    pub max_iterations: usize,
    /// Converged when the step, in units of the bound widths, is below this.
    pub step_tol: T,
    /// Converged when the relative cost decrease of an accepted step is below this.
    pub improvement_tol: T,
    /// Finite-difference step as a fraction of the bound width.
    pub fd_step: T,
    pub time: TimeIntegration<T>,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iterations: 100,
            step_tol: T::lit(1e-10),
            improvement_tol: T::lit(1e-12),
            fd_step: T::lit(1e-4),
            time: TimeIntegration {
                rule: signals::TimeRule::Envelope,
                ..TimeIntegration::default()
            },
            quad: QuadConfig::default(),
        }
    }
}

/// Anything that maps a parameter vector to a residual vector.
pub trait ResidualModel<T: Real>: Sync {
    fn residuals(&self, x: &[T]) -> Result<Vec<T>>;
}

impl<T: Real, F> ResidualModel<T> for F
where
    F: Fn(&[T]) -> Result<Vec<T>> + Sync,
{
    fn residuals(&self, x: &[T]) -> Result<Vec<T>> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem<T> {
    pub datasets: Vec<Dataset<T>>,
    /// Values of every parameter; free ones are overwritten during the fit.
    pub base: ModelParams<T>,
    pub free: Vec<FreeParam<T>>,
    pub options: FitOptions<T>,
}

impl<T: Real> FitProblem<T> {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::invalid("datasets", "need at least one dataset"));
        }
        for fp in &self.free {
            self.base.get(fp.param)?;
            if !(fp.lower.is_finite() && fp.upper.is_finite() && fp.lower < fp.upper) {
                return Err(Error::invalid(fp.param.name(), "bounds must be finite and ordered"));
            }
            if !(fp.initial >= fp.lower && fp.initial <= fp.upper) {
                return Err(Error::invalid(fp.param.name(), "initial guess outside bounds"));
            }
        }
        if self.options.starts == 0 {
            return Err(Error::invalid("starts", "must be >= 1"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Vec<(T, T)> {
        self.free.iter().map(|f| (f.lower, f.upper)).collect()
    }

    pub fn initial(&self) -> Vec<T> {
        self.free.iter().map(|f| f.initial).collect()
    }

    pub fn params_at(&self, x: &[T]) -> Result<ModelParams<T>> {
        let mut p = self.base.clone();
        for (fp, &v) in self.free.iter().zip(x) {
            p.set(fp.param, v)?;
        }
        Ok(p)
    }

    /// Model curves at `x`, one per dataset.
    pub fn model_curves(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        let medium = self.params_at(x)?.medium(self.options.quad)?;
        self.datasets
            .par_iter()
            .enumerate()
            .map(|(index, d)| {
                d.model(&medium, &self.options.time).map_err(|e| Error::Dataset {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Weighted (model − data) concatenated across datasets.
    pub fn residuals(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.free.len() {
            return Err(Error::invalid("params", "length differs from the free set"));
        }
        for (fp, &v) in self.free.iter().zip(x) {
            if !(v >= fp.lower && v <= fp.upper) {
                return Err(Error::Domain(format!("{} = {v} outside its bounds", fp.param)));
            }
        }
        let curves = self.model_curves(x)?;
        let mut out = Vec::new();
        for (d, model) in self.datasets.iter().zip(curves) {
            let w = d.effective_weight();
            out.extend(d.samples.iter().zip(model).map(|(s, m)| w * (m - s.1)));
        }
        Ok(out)
    }

    /// Replaces every sample's intensity with the model value at `x`.
    pub fn synthesize(&mut self, x: &[T]) -> Result<()> {
        let curves = self.model_curves(x)?;
        for (d, model) in self.datasets.iter_mut().zip(curves) {
            for (s, m) in d.samples.iter_mut().zip(model) {
                s.1 = m;
            }
        }
        Ok(())
    }

    /// Multiplies every sample by (1 + rel_sigma·N(0,1)), deterministically in `seed`.
    pub fn add_relative_noise(&mut self, rel_sigma: T, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in &mut self.datasets {
            for s in &mut d.samples {
                let z: f64 = StandardNormal.sample(&mut rng);
                s.1 = s.1 * (T::one() + rel_sigma * T::lit(z));
            }
        }
    }

    pub fn solve(&self) -> Result<FitResult<T>> {
        self.validate()?;
        let model = |x: &[T]| self.residuals(x);
        let raw = solve_bounded(&model, &self.initial(), &self.bounds(), &self.options)?;
        Ok(FitResult {
            estimates: self
                .free
                .iter()
                .zip(raw.x.iter().zip(&raw.sigma))
                .map(|(fp, (&v, &s))| Estimate {
                    param: fp.param,
                    value: v,
                    sigma: s,
                })
                .collect(),
            raw,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub param: Param,
    pub value: T,
    /// One standard deviation from the residual Jacobian.
    pub sigma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub estimates: Vec<Estimate<T>>,
    pub raw: LsqResult<T>,
}

impl<T: Real> FitResult<T> {
    pub fn value(&self, p: Param) -> Option<T> {
        self.estimates.iter().find(|e| e.param == p).map(|e| e.value)
    }
}

/// Outcome of one bounded least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult<T> {
    pub x: Vec<T>,
    pub sigma: Vec<T>,
    /// ½‖r‖² at the solution.
    pub cost: T,
    pub initial_cost: T,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest/largest Jacobian singular value below 1e-10.
    pub ill_conditioned: bool,
    /// Cost after each accepted iteration of the winning start.
    pub trace: Vec<T>,
    /// Which multistart point won (0 is the initial guess).
    pub start: usize,
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Start points: the initial guess, then Halton points of the bound box.
pub fn start_points<T: Real>(initial: &[T], bounds: &[(T, T)], count: usize) -> Vec<Vec<T>> {
    let mut out = vec![initial.to_vec()];
    for k in 1..count {
        out.push(
            bounds
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| lo + (hi - lo) * T::lit(halton(k, PRIMES[j % PRIMES.len()])))
                .collect(),
        );
    }
    out
}

type Matrix<T> = Vec<Vec<T>>;

/// Central-difference Jacobian (one-sided at a bound), columns in parallel.
fn jacobian<T: Real, M: ResidualModel<T>>(
    model: &M,
    x: &[T],
    r0: &[T],
    bounds: &[(T, T)],
    rel_step: T,
) -> Result<Matrix<T>> {
    let cols: Vec<Vec<T>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = bounds[j];
            let h = rel_step * (hi - lo);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] = (x[j] + h).min(hi);
            xm[j] = (x[j] - h).max(lo);
            let rp = if xp[j] > x[j] { Some(model.residuals(&xp)?) } else { None };
            let rm = if xm[j] < x[j] { Some(model.residuals(&xm)?) } else { None };
            let col = match (rp, rm) {
                (Some(p), Some(m)) => {
                    let d = xp[j] - xm[j];
                    p.iter().zip(&m).map(|(&a, &b)| (a - b) / d).collect()
                }
                (Some(p), None) => {
                    let d = xp[j] - x[j];
                    p.iter().zip(r0).map(|(&a, &b)| (a - b) / d).collect()
                }
                (None, Some(m)) => {
                    let d = x[j] - xm[j];
                    r0.iter().zip(&m).map(|(&a, &b)| (a - b) / d).collect()
                }
                (None, None) => vec![T::zero(); r0.len()],
            };
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(cols)
}

fn normal_equations<T: Real>(cols: &Matrix<T>, r: &[T]) -> (Matrix<T>, Vec<T>) {
    let n = cols.len();
    let mut jtj = vec![vec![T::zero(); n]; n];
    let mut jtr = vec![T::zero(); n];
    for i in 0..n {
        for k in i..n {
            let v: T = cols[i].iter().zip(&cols[k]).map(|(&a, &b)| a * b).sum();
            jtj[i][k] = v;
            jtj[k][i] = v;
        }
        jtr[i] = cols[i].iter().zip(r).map(|(&a, &b)| a * b).sum();
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_linear<T: Real>(mut a: Matrix<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues<T: Real>(mut a: Matrix<T>) -> Vec<T> {
    let n = a.len();
    for _ in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: T = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= T::eps() * T::eps() * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn half_norm_sq<T: Real>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum::<T>() * T::lit(0.5)
}

/// One LM descent from `x0`.
fn descend<T: Real, M: ResidualModel<T>>(
    model: &M,
    x0: &[T],
    bounds: &[(T, T)],
    opts: &FitOptions<T>,
) -> Result<LsqResult<T>> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = model.residuals(&x)?;
    let mut cost = half_norm_sq(&r);
    let initial_cost = cost;
    let mut trace = vec![cost];
    let mut lambda = T::lit(1e-3);
    let mut converged = n == 0;
    let mut iterations = 0;
    let widths: Vec<T> = bounds.iter().map(|b| b.1 - b.0).collect();
    let mut cols = jacobian(model, &x, &r, bounds, opts.fd_step)?;
    if n > 0 && cols.iter().all(|c| c.iter().all(|&v| v == T::zero())) {
        return Err(Error::ZeroSensitivity);
    }
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&cols, &r);
        // variables pinned at a bound by the gradient stay fixed this step
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let (lo, hi) = bounds[i];
                !((x[i] <= lo && jtr[i] > T::zero()) || (x[i] >= hi && jtr[i] < T::zero()))
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < T::lit(1e16) {
            let mut a: Matrix<T> = free
                .iter()
                .map(|&i| free.iter().map(|&k| jtj[i][k]).collect())
                .collect();
            for (ii, &i) in free.iter().enumerate() {
                let d = jtj[i][i].max(T::lit(1e-30));
                a[ii][ii] = a[ii][ii] + lambda * d;
            }
            let rhs: Vec<T> = free.iter().map(|&i| -jtr[i]).collect();
            let Some(reduced) = solve_linear(a, rhs) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let mut step = vec![T::zero(); n];
            for (ii, &i) in free.iter().enumerate() {
                step[i] = reduced[ii];
            }
            let trial: Vec<T> = x
                .iter()
                .zip(&step)
                .zip(bounds)
                .map(|((&xi, &si), &(lo, hi))| (xi + si).max(lo).min(hi))
                .collect();
            let moved = trial
                .iter()
                .zip(&x)
                .zip(&widths)
                .map(|((&a, &b), &w)| ((a - b) / w).powi(2))
                .sum::<T>()
                .sqrt();
            if moved < opts.step_tol {
                converged = true;
                break;
            }
            let r_trial = match model.residuals(&trial) {
                Ok(v) => v,
                Err(e) if e.is_numeric() => {
                    lambda = lambda * T::lit(4.0);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let c_trial = half_norm_sq(&r_trial);
            if c_trial < cost {
                let improvement = (cost - c_trial) / cost.max(T::min_positive_value());
                x = trial;
                r = r_trial;
                cost = c_trial;
                trace.push(cost);
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                accepted = true;
                if improvement < opts.improvement_tol || moved < opts.step_tol {
                    converged = true;
                }
                break;
            }
            lambda = lambda * T::lit(4.0);
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
        if accepted && !converged {
            cols = jacobian(model, &x, &r, bounds, opts.fd_step)?;
        }
    }
    let (jtj, _) = normal_equations(&cols, &r);
    let eig = symmetric_eigenvalues(jtj.clone());
    let smax = eig.iter().fold(T::zero(), |m, &v| m.max(v.abs())).sqrt();
    let smin = eig.iter().fold(T::infinity(), |m, &v| m.min(v.abs())).sqrt();
    let ill_conditioned = n > 0 && !(smin >= T::lit(1e-10) * smax);
    let m = r.len();
    let dof = if m > n { T::from_usize_lossy(m - n) } else { T::one() };
    let s2 = T::lit(2.0) * cost / dof;
    let sigma = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            solve_linear(jtj.clone(), e)
                .map(|col| (col[i] * s2).max(T::zero()).sqrt())
                .unwrap_or(T::infinity())
        })
        .collect();
    Ok(LsqResult {
        x,
        sigma,
        cost,
        initial_cost,
        residual_norm: (T::lit(2.0) * cost).sqrt(),
        iterations,
        converged,
        ill_conditioned,
        trace,
        start: 0,
    })
}

/// Bounded LM from every start point; the lowest converged cost wins.
pub fn solve_bounded<T: Real, M: ResidualModel<T>>(
    model: &M,
    initial: &[T],
    bounds: &[(T, T)],
    opts: &FitOptions<T>,
) -> Result<LsqResult<T>> {
    let starts = start_points(initial, bounds, opts.starts.max(1));
    let runs: Vec<Result<LsqResult<T>>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            descend(model, x0, bounds, opts).map(|mut r| {
                r.start = k;
                r
            })
        })
        .collect();
    let mut best: Option<LsqResult<T>> = None;
    let mut best_any: Option<LsqResult<T>> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if r.converged && best.as_ref().is_none_or(|b| r.cost < b.cost) {
                    best = Some(r.clone());
                }
                if best_any.as_ref().is_none_or(|b| r.cost < b.cost) {
                    best_any = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, best_any, first_err) {
        (Some(b), _, _) => Ok(b),
        (None, Some(a), _) => Err(Error::FitNotConverged {
            best_cost: a.cost.to_f64_lossy(),
            best_params: a.x.iter().map(|v| v.to_f64_lossy()).collect(),
        }),
        (None, None, Some(e)) => Err(e),
        (None, None, None) => unreachable!("at least one start"),
    }
}

/// Richardson-style health check: max relative deviation between the
/// finite-difference Jacobians at `rel_step` and `rel_step/2`.
pub fn jacobian_check<T: Real, M: ResidualModel<T>>(
    model: &M,
    x: &[T],
    bounds: &[(T, T)],
    rel_step: T,
) -> Result<T> {
    let r0 = model.residuals(x)?;
    let a = jacobian(model, x, &r0, bounds, rel_step)?;
    let b = jacobian(model, x, &r0, bounds, rel_step * T::lit(0.5))?;
    let scale = a.iter().flatten().fold(T::zero(), |m, &v| m.max(v.abs()));
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let dev = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()));
    Ok(dev / scale)
}

impl<T: Real> FitProblem<T> {
    pub fn jacobian_check(&self, x: &[T], rel_step: T) -> Result<T> {
        let model = |p: &[T]| self.residuals(p);
        jacobian_check(&model, x, &self.bounds(), rel_step)
    }
}
