//! Adaptive 15-point Gauss–Kronrod quadrature over a finite interval.
//!
//! The integrand may be vector valued (`[T; N]`) so that several integrals
//! sharing the same expensive oscillatory factors are computed in one pass.
//! Panels are split globally by largest tolerance-scaled error; caller-supplied
//! breakpoints seed the initial partition.

use crate::error::{Error, Result};
use crate::real::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_panels: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-12),
            rel_tol: T::lit(1e-10),
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T, const N: usize> {
    pub value: [T; N],
    pub error: [T; N],
    pub panels: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Panel<T, const N: usize> {
    a: T,
    b: T,
    value: [T; N],
    error: [T; N],
    splittable: bool,
}

struct Nodes<T> {
    xgk: [T; 8],
    wgk: [T; 8],
    wg: [T; 4],
}

impl<T: Real> Nodes<T> {
    fn new() -> Self {
        Self {
            xgk: XGK.map(T::lit),
            wgk: WGK.map(T::lit),
            wg: WG.map(T::lit),
        }
    }
}

fn gk15<T: Real, const N: usize, F: FnMut(T) -> [T; N]>(
    f: &mut F,
    nodes: &Nodes<T>,
    a: T,
    b: T,
) -> ([T; N], [T; N]) {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let mut fv = [[T::zero(); N]; 15];
    fv[7] = f(center);
    for j in 0..7 {
        let dx = half * nodes.xgk[j];
        fv[j] = f(center - dx);
        fv[14 - j] = f(center + dx);
    }
    let mut kronrod = [T::zero(); N];
    let mut error = [T::zero(); N];
    for i in 0..N {
        let mut rk = nodes.wgk[7] * fv[7][i];
        let mut rg = nodes.wg[3] * fv[7][i];
        let mut rabs = rk.abs();
        for j in 0..7 {
            let s = fv[j][i] + fv[14 - j][i];
            rk = rk + nodes.wgk[j] * s;
            rabs = rabs + nodes.wgk[j] * (fv[j][i].abs() + fv[14 - j][i].abs());
            if j % 2 == 1 {
                rg = rg + nodes.wg[j / 2] * s;
            }
        }
        let mean = rk * T::lit(0.5);
        let mut asc = nodes.wgk[7] * (fv[7][i] - mean).abs();
        for j in 0..7 {
            asc = asc + nodes.wgk[j] * ((fv[j][i] - mean).abs() + (fv[14 - j][i] - mean).abs());
        }
        let hk = half.abs();
        let resasc = asc * hk;
        let resabs = rabs * hk;
        let mut err = ((rk - rg) * half).abs();
        // QUADPACK error scaling
        if resasc != T::zero() && err != T::zero() {
            let scale = (T::lit(200.0) * err / resasc).powf(T::lit(1.5));
            err = resasc * scale.min(T::one());
        }
        let floor = T::lit(50.0) * T::epsilon() * resabs;
        if resabs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && err < floor {
            err = floor;
        }
        kronrod[i] = rk * half;
        error[i] = err;
    }
    (kronrod, error)
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// Converges when every component satisfies
/// `error_i <= max(abs_tol, rel_tol * |value_i|)`.
pub fn integrate_vec<T, const N: usize, F>(
    mut f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T, N>>
where
    T: Real,
    F: FnMut(T) -> [T; N],
{
    if !(b > a) {
        return Ok(QuadResult {
            value: [T::zero(); N],
            error: [T::zero(); N],
            panels: 0,
            evaluations: 0,
        });
    }
    let nodes = Nodes::new();
    let mut cuts: Vec<T> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let min_width = (b - a) * T::lit(64.0) * T::epsilon();
    let mut panels: Vec<Panel<T, N>> = Vec::with_capacity(cuts.len() * 2);
    let mut evaluations = 0usize;
    for w in cuts.windows(2) {
        let (value, error) = gk15(&mut f, &nodes, w[0], w[1]);
        evaluations += 15;
        panels.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
            splittable: (w[1] - w[0]) > min_width,
        });
    }

    loop {
        let mut total = [T::zero(); N];
        let mut total_err = [T::zero(); N];
        for p in &panels {
            for i in 0..N {
                total[i] = total[i] + p.value[i];
                total_err[i] = total_err[i] + p.error[i];
            }
        }
        let tol: [T; N] = std::array::from_fn(|i| opts.abs_tol.max(opts.rel_tol * total[i].abs()));
        let converged = (0..N).all(|i| total_err[i] <= tol[i]);
        if converged {
            return Ok(QuadResult {
                value: total,
                error: total_err,
                panels: panels.len(),
                evaluations,
            });
        }

        let mut worst: Option<(usize, T)> = None;
        for (k, p) in panels.iter().enumerate() {
            if !p.splittable {
                continue;
            }
            let mut score = T::zero();
            for i in 0..N {
                score = score.max(p.error[i] / tol[i]);
            }
            if worst.is_none_or(|(_, s)| score > s) {
                worst = Some((k, score));
            }
        }
        let Some((k, _)) = worst else {
            // nothing left to split; the error estimate is at roundoff level
            return Ok(QuadResult {
                value: total,
                error: total_err,
                panels: panels.len(),
                evaluations,
            });
        };
        if panels.len() >= opts.max_panels {
            return Err(Error::QuadratureNotConverged {
                estimate: total[0].to_f64_lossy(),
                error: total_err[0].to_f64_lossy(),
            });
        }
        let p = panels[k];
        let mid = (p.a + p.b) * T::lit(0.5);
        let (v1, e1) = gk15(&mut f, &nodes, p.a, mid);
        let (v2, e2) = gk15(&mut f, &nodes, mid, p.b);
        evaluations += 30;
        let half_width = mid - p.a;
        panels[k] = Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
            splittable: half_width > min_width,
        };
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
            splittable: half_width > min_width,
        });
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<T, F>(
    mut f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    opts: &QuadOptions<T>,
) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let r = integrate_vec(|x| [f(x)], a, b, breakpoints, opts)?;
    Ok((r.value[0], r.error[0]))
}

/// Composite 15-point Kronrod rule on `panels` equal panels of `[a, b]`.
///
/// Returns nodes and weights; intended for integrands that are evaluated
/// many times on the same grid.
pub fn composite_nodes<T: Real>(a: T, b: T, panels: usize) -> (Vec<T>, Vec<T>) {
    let nodes = Nodes::<T>::new();
    let panels = panels.max(1);
    let width = (b - a) / T::from_usize_lossy(panels);
    let half = width * T::lit(0.5);
    let mut xs = Vec::with_capacity(15 * panels);
    let mut ws = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let center = a + width * T::from_usize_lossy(p) + half;
        for j in 0..7 {
            xs.push(center - half * nodes.xgk[j]);
            ws.push(half * nodes.wgk[j]);
        }
        xs.push(center);
        ws.push(half * nodes.wgk[7]);
        for j in (0..7).rev() {
            xs.push(center + half * nodes.xgk[j]);
            ws.push(half * nodes.wgk[j]);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_rule_integrates_smooth_functions() {
        let (xs, ws) = composite_nodes(0.0f64, 3.0, 4);
        assert_eq!(xs.len(), 60);
        let total: f64 = ws.iter().sum();
        assert!((total - 3.0).abs() < 1e-14);
        let v: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (5.0 * x).cos()).sum();
        assert!((v - (15.0f64).sin() / 5.0).abs() < 1e-13);
        assert!(xs.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn polynomial_is_exact() {
        let opts = QuadOptions::default();
        let (v, _) = integrate(|x: f64| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, &[], &opts).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integral() {
        let opts = QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 5000,
        };
        // ∫_0^50 cos(20x) e^{-x/10} dx
        let (v, _) = integrate(|x: f64| (20.0 * x).cos() * (-x / 10.0).exp(), 0.0, 50.0, &[], &opts).unwrap();
        let a = 0.1;
        let w = 20.0;
        let exact = (a - (-a * 50.0f64).exp() * (a * (w * 50.0f64).cos() - w * (w * 50.0f64).sin()))
            / (a * a + w * w);
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn vector_components_share_nodes() {
        let opts = QuadOptions::default();
        let r = integrate_vec(|x: f64| [x.sin(), x.cos(), 1.0], 0.0, std::f64::consts::PI, &[1.0, 2.0], &opts)
            .unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
        assert!((r.value[2] - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn panel_budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_panels: 3,
        };
        let err = integrate(|x: f64| (200.0 * x).sin() * x.sqrt(), 0.0, 10.0, &[], &opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureNotConverged { .. }));
    }

    #[test]
    fn empty_interval_is_zero() {
        let (v, e) = integrate(|x: f64| x, 1.0, 1.0, &[], &QuadOptions::default()).unwrap();
        assert_eq!((v, e), (0.0, 0.0));
    }

    #[test]
    fn works_in_single_precision() {
        let opts = QuadOptions {
            abs_tol: 1e-5f32,
            rel_tol: 1e-5,
            max_panels: 200,
        };
        let (v, _) = integrate(|x: f32| x.exp(), 0.0, 1.0, &[], &opts).unwrap();
        assert!((v - (1.0f32.exp() - 1.0)).abs() < 1e-5);
    }
}
