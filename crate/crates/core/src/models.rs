//! Flux triples `(f, v, η)`, the polynomial bump kernel and its cell averages.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature;

/// Number of samples used to estimate `‖η'‖∞` and `‖η''‖∞`.
pub const KERNEL_NORM_SAMPLES: usize = 10_001;

/// The bump `η(x) = α ((x-a)(b-x))^{5/2}` on `[a, b]`, zero elsewhere,
/// with `α` chosen so that `∫η = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub norm_deta: f64,
    pub norm_d2eta: f64,
}

impl KernelSpec {
    pub fn normalized(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidKernel { a, b });
        }
        let mass = quadrature::integrate_rel(&|x| bump(a, b, x), a, b, 1e-14);
        let mut kernel = KernelSpec {
            a,
            b,
            alpha: 1.0 / mass,
            norm_deta: 0.0,
            norm_d2eta: 0.0,
        };
        let step = (b - a) / (KERNEL_NORM_SAMPLES - 1) as f64;
        for i in 0..KERNEL_NORM_SAMPLES {
            let x = a + i as f64 * step;
            kernel.norm_deta = kernel.norm_deta.max(kernel.derivative(x).abs());
            kernel.norm_d2eta = kernel.norm_d2eta.max(kernel.second_derivative(x).abs());
        }
        Ok(kernel)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.alpha * bump(self.a, self.b, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        let q = (x - self.a) * (self.b - x);
        2.5 * self.alpha * q.powf(1.5) * (self.a + self.b - 2.0 * x)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        let q = (x - self.a) * (self.b - x);
        let s = self.a + self.b - 2.0 * x;
        self.alpha * (3.75 * q.sqrt() * s * s - 5.0 * q.powf(1.5))
    }

    /// Largest distance of the support from the origin.
    pub fn radius(&self) -> f64 {
        self.a.abs().max(self.b.abs())
    }
}

fn bump(a: f64, b: f64, x: f64) -> f64 {
    if x <= a || x >= b {
        return 0.0;
    }
    ((x - a) * (b - x)).powf(2.5)
}

/// Cell-averaged kernel weights.
///
/// Weight `m` is `(1/h) ∫ η` over `[(m - 1/2) h, (m + 1/2) h]`, the dual cell
/// centred at offset `m h`; this is the spacing between the interface
/// averages that enter the convolution sum.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    pub h: f64,
    pub m_lo: isize,
    pub weights: Vec<f64>,
}

impl KernelTable {
    pub fn m_hi(&self) -> isize {
        self.m_lo + self.weights.len() as isize - 1
    }

    /// Weight at offset `m`; zero outside the table.
    pub fn weight(&self, m: isize) -> f64 {
        if m < self.m_lo {
            return 0.0;
        }
        self.weights.get((m - self.m_lo) as usize).copied().unwrap_or(0.0)
    }

    /// `Σ_m h η_m`, equal to `∫η` up to quadrature error.
    pub fn mass(&self) -> f64 {
        self.weights.iter().map(|w| self.h * w).sum()
    }
}

pub fn kernel_cell_averages(kernel: &KernelSpec, grid: &Grid) -> KernelTable {
    let h = grid.h;
    let m_lo = (kernel.a / h - 0.5).floor() as isize + 1;
    let m_hi = (kernel.b / h + 0.5).ceil() as isize - 1;
    let weights = (m_lo..=m_hi)
        .map(|m| {
            let lo = ((m as f64 - 0.5) * h).max(kernel.a);
            let hi = ((m as f64 + 0.5) * h).min(kernel.b);
            if hi <= lo {
                return 0.0;
            }
            quadrature::integrate_rel(&|x| kernel.eval(x), lo, hi, 1e-14) / h
        })
        .collect();
    KernelTable { h, m_lo, weights }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelName {
    TrafficForward,
    TrafficBackward,
    TvExample,
    LimitFamily,
}

impl ModelName {
    pub const ALL: [ModelName; 4] = [
        ModelName::TrafficForward,
        ModelName::TrafficBackward,
        ModelName::TvExample,
        ModelName::LimitFamily,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::TrafficForward => "traffic_forward",
            ModelName::TrafficBackward => "traffic_backward",
            ModelName::TvExample => "tv_example",
            ModelName::LimitFamily => "limit_family",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// `f(t, x, ρ)`. None of the built-in fluxes depend on `t` or `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxFn {
    /// `f = ρ`
    Identity,
    /// `f = ρ (1 - ρ)`
    Logistic,
}

impl FluxFn {
    #[inline]
    pub fn eval(self, _t: f64, _x: f64, rho: f64) -> f64 {
        match self {
            FluxFn::Identity => rho,
            FluxFn::Logistic => rho * (1.0 - rho),
        }
    }

    #[inline]
    pub fn d_rho(self, _t: f64, _x: f64, rho: f64) -> f64 {
        match self {
            FluxFn::Identity => 1.0,
            FluxFn::Logistic => 1.0 - 2.0 * rho,
        }
    }
}

/// Speed law `v(r)` applied to the convolution `r = ρ ∗ η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityFn {
    /// `v = v_max (1 - r)`
    Linear { v_max: f64 },
    /// `v = (1 - r)^3` for `r < 1`, zero for `r ≥ 1`, held at `v(0)` for `r < 0`.
    CubicCutoff,
}

impl VelocityFn {
    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            VelocityFn::Linear { v_max } => v_max * (1.0 - r),
            VelocityFn::CubicCutoff => {
                let s = 1.0 - r.max(0.0);
                if s <= 0.0 {
                    0.0
                } else {
                    s * s * s
                }
            }
        }
    }

    pub fn derivative(self, r: f64) -> f64 {
        match self {
            VelocityFn::Linear { v_max } => -v_max,
            VelocityFn::CubicCutoff => {
                if r < 0.0 || r >= 1.0 {
                    0.0
                } else {
                    -3.0 * (1.0 - r).powi(2)
                }
            }
        }
    }

    pub fn second_derivative(self, r: f64) -> f64 {
        match self {
            VelocityFn::Linear { .. } => 0.0,
            VelocityFn::CubicCutoff => {
                if r < 0.0 || r >= 1.0 {
                    0.0
                } else {
                    6.0 * (1.0 - r)
                }
            }
        }
    }
}

/// A flux triple with the norm metadata used by the CFL condition and the
/// a priori bounds. Norms are taken over `invariant_range`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub flux: FluxFn,
    pub velocity: VelocityFn,
    pub kernel: KernelSpec,
    /// Constant `C` bounding `|∂x f|` and `|∂²xx f|` by `C |ρ|`.
    pub c_x: f64,
    pub norm_dr_f: f64,
    /// `‖∂²ρx f‖∞`
    pub norm_d2rx_f: f64,
    pub norm_v: f64,
    pub norm_dv: f64,
    pub norm_d2v: f64,
    pub invariant_range: (f64, f64),
    /// Levels `ρ̄` with `f(t, x, ρ̄) = 0` for all `t, x`.
    pub flat_levels: Vec<f64>,
}

impl ModelSpec {
    #[inline]
    pub fn f(&self, t: f64, x: f64, rho: f64) -> f64 {
        self.flux.eval(t, x, rho)
    }

    #[inline]
    pub fn v(&self, r: f64) -> f64 {
        self.velocity.eval(r)
    }

    /// `‖η'‖_{W^{1,∞}} = ‖η'‖∞ + ‖η''‖∞`
    pub fn norm_deta_w1(&self) -> f64 {
        self.kernel.norm_deta + self.kernel.norm_d2eta
    }

    /// `‖v‖_{W^{2,∞}} = ‖v‖∞ + ‖v'‖∞ + ‖v''‖∞`
    pub fn norm_v_w2(&self) -> f64 {
        self.norm_v + self.norm_dv + self.norm_d2v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub v_max: f64,
    /// Kernel support `(a, b)`. Required by `tv_example`; overrides the
    /// horizon of the traffic models.
    pub kernel: Option<(f64, f64)>,
    /// Half width `a` of the symmetric `limit_family` kernel on `(-a, a)`.
    pub width: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            v_max: 1.0,
            kernel: None,
            width: None,
        }
    }
}

pub fn builtin_model(name: ModelName, params: &ModelParams) -> Result<ModelSpec> {
    match name {
        ModelName::TrafficForward | ModelName::TrafficBackward => {
            let v_max = params.v_max;
            if !(v_max > 0.0 && v_max.is_finite()) {
                return Err(Error::Config(format!("v_max = {v_max} must be positive")));
            }
            let (a, b) = params.kernel.unwrap_or(if name == ModelName::TrafficForward {
                (-0.25, 0.0)
            } else {
                (0.0, 0.25)
            });
            Ok(ModelSpec {
                name,
                flux: FluxFn::Logistic,
                velocity: VelocityFn::Linear { v_max },
                kernel: KernelSpec::normalized(a, b)?,
                c_x: 0.0,
                norm_dr_f: 1.0,
                norm_d2rx_f: 0.0,
                norm_v: v_max,
                norm_dv: v_max,
                norm_d2v: 0.0,
                invariant_range: (0.0, 1.0),
                flat_levels: vec![0.0, 1.0],
            })
        }
        ModelName::TvExample => {
            let (a, b) = params
                .kernel
                .ok_or_else(|| Error::Config("tv_example needs kernel_a and kernel_b".into()))?;
            // The convolution may exceed 1 here; |1 - r| ≤ 1 holds for r in [0, 2].
            Ok(ModelSpec {
                name,
                flux: FluxFn::Identity,
                velocity: VelocityFn::Linear { v_max: 1.0 },
                kernel: KernelSpec::normalized(a, b)?,
                c_x: 0.0,
                norm_dr_f: 1.0,
                norm_d2rx_f: 0.0,
                norm_v: 1.0,
                norm_dv: 1.0,
                norm_d2v: 0.0,
                invariant_range: (0.0, 2.0),
                flat_levels: vec![0.0],
            })
        }
        ModelName::LimitFamily => {
            let a = params
                .width
                .ok_or_else(|| Error::Config("limit_family needs width".into()))?;
            Ok(ModelSpec {
                name,
                flux: FluxFn::Identity,
                velocity: VelocityFn::CubicCutoff,
                kernel: KernelSpec::normalized(-a, a)?,
                c_x: 0.0,
                norm_dr_f: 1.0,
                norm_d2rx_f: 0.0,
                norm_v: 1.0,
                norm_dv: 3.0,
                norm_d2v: 6.0,
                invariant_range: (0.0, 1.0),
                flat_levels: vec![0.0],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn closed_form_alpha(a: f64, b: f64) -> f64 {
        1024.0 / (5.0 * PI * (b - a).powi(6))
    }

    // Adaptive Simpson, kept independent of the Gauss–Kronrod routine.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn alpha_matches_simpson_and_closed_form() {
        let k = KernelSpec::normalized(0.0, 0.2).unwrap();
        let simpson_mass = simpson(&|x| bump(0.0, 0.2, x), 0.0, 0.2, 1e-22);
        let alpha_simpson = 1.0 / simpson_mass;
        let alpha_exact = closed_form_alpha(0.0, 0.2);
        assert!((alpha_exact - 1.0186e6).abs() / 1.0186e6 < 1e-4);
        assert!((k.alpha - alpha_exact).abs() / alpha_exact < 1e-12);
        assert!((k.alpha - alpha_simpson).abs() / alpha_exact < 1e-8);
        let mass = simpson(&|x| k.eval(x), 0.0, 0.2, 1e-16);
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn alpha_is_translation_invariant() {
        let k1 = KernelSpec::normalized(0.0, 0.2).unwrap();
        let k2 = KernelSpec::normalized(-0.1, 0.1).unwrap();
        assert!((k1.alpha - k2.alpha).abs() / k1.alpha < 1e-12);
    }

    #[test]
    fn degenerate_support_rejected() {
        assert!(matches!(KernelSpec::normalized(0.0, 0.0), Err(Error::InvalidKernel { .. })));
        assert!(matches!(KernelSpec::normalized(0.3, 0.1), Err(Error::InvalidKernel { .. })));
    }

    #[test]
    fn kernel_shape_and_derivative_norms() {
        let k = KernelSpec::normalized(-0.25, 0.0).unwrap();
        assert_eq!(k.eval(-0.25), 0.0);
        assert_eq!(k.eval(0.0), 0.0);
        assert_eq!(k.derivative(-0.25), 0.0);
        assert!(k.eval(-0.1) > 0.0);
        // closed forms with w the half width: max|η'| = 5α (3w²/4)^{3/2} w/2, max|η''| = 5α w³
        let w: f64 = 0.125;
        let d1 = 5.0 * k.alpha * (0.75 * w * w).powf(1.5) * w / 2.0;
        let d2 = 5.0 * k.alpha * w.powi(3);
        assert!((k.norm_deta - d1).abs() / d1 < 1e-6, "{} vs {}", k.norm_deta, d1);
        assert!((k.norm_d2eta - d2).abs() / d2 < 1e-6, "{} vs {}", k.norm_d2eta, d2);
        // finite differences against the analytic derivatives
        for &x in &[-0.2, -0.15, -0.125, -0.05, -0.01] {
            let e = 1e-6;
            let fd1 = (k.eval(x + e) - k.eval(x - e)) / (2.0 * e);
            let fd2 = (k.derivative(x + e) - k.derivative(x - e)) / (2.0 * e);
            assert!((fd1 - k.derivative(x)).abs() <= 1e-5 * k.norm_deta);
            assert!((fd2 - k.second_derivative(x)).abs() <= 1e-5 * k.norm_d2eta);
        }
    }

    fn grid(h_cells: usize, x_min: f64, x_max: f64) -> Grid {
        Grid::new(x_min, x_max, h_cells, 0.05, 0.3).unwrap()
    }

    #[test]
    fn cell_averages_preserve_mass() {
        for &(a, b) in &[(0.0, 0.2), (-0.1, 0.1), (-0.25, 0.0), (-0.013, 0.171)] {
            let k = KernelSpec::normalized(a, b).unwrap();
            for &n in &[100, 333, 1000] {
                let t = kernel_cell_averages(&k, &grid(n, 0.0, 1.0));
                assert!((t.mass() - 1.0).abs() < 1e-10, "({a},{b}) n={n}: {}", t.mass());
                assert!(t.weights.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn aligned_support_weights() {
        // support [0, 0.2] with h = 0.01: 19 full dual cells and two half cells
        let k = KernelSpec::normalized(0.0, 0.2).unwrap();
        let t = kernel_cell_averages(&k, &grid(100, 0.0, 1.0));
        let nonzero = t.weights.iter().filter(|&&w| w > 0.0).count();
        assert_eq!(nonzero, 21);
        assert_eq!(t.m_lo, 0);
        assert_eq!(t.m_hi(), 20);
        assert_eq!(t.weight(-1), 0.0);
        assert_eq!(t.weight(21), 0.0);
    }

    #[test]
    fn symmetric_kernel_symmetric_table() {
        let k = KernelSpec::normalized(-0.1, 0.1).unwrap();
        let t = kernel_cell_averages(&k, &grid(370, 0.0, 1.0));
        assert_eq!(t.m_lo, -t.m_hi());
        for m in 0..=t.m_hi() {
            let (l, r) = (t.weight(-m), t.weight(m));
            assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0), "m={m}: {l} vs {r}");
        }
    }

    #[test]
    fn unknown_model_rejected() {
        assert!(matches!("nope".parse::<ModelName>(), Err(Error::UnknownModel(_))));
        for name in ModelName::ALL {
            assert_eq!(name.as_str().parse::<ModelName>().unwrap(), name);
        }
    }

    fn all_models() -> Vec<ModelSpec> {
        vec![
            builtin_model(ModelName::TrafficForward, &ModelParams::default()).unwrap(),
            builtin_model(ModelName::TrafficBackward, &ModelParams { v_max: 2.0, ..Default::default() }).unwrap(),
            builtin_model(ModelName::TvExample, &ModelParams { kernel: Some((0.0, 0.2)), ..Default::default() }).unwrap(),
            builtin_model(ModelName::LimitFamily, &ModelParams { width: Some(0.25), ..Default::default() }).unwrap(),
        ]
    }

    #[test]
    fn flat_levels_and_vanishing_flux_at_zero() {
        for m in all_models() {
            for i in 0..7 {
                for j in 0..7 {
                    let (t, x) = (i as f64 * 1.7, -5.0 + j as f64 * 1.3);
                    assert_eq!(m.f(t, x, 0.0), 0.0);
                    for &level in &m.flat_levels {
                        assert!(m.f(t, x, level).abs() <= 1e-12, "{}: level {level}", m.name);
                    }
                }
            }
        }
    }

    #[test]
    fn traffic_flat_levels() {
        let m = builtin_model(ModelName::TrafficForward, &ModelParams::default()).unwrap();
        assert_eq!(m.flat_levels, vec![0.0, 1.0]);
        assert_eq!(m.f(0.0, 0.0, 1.0), 0.0);
        assert_eq!((m.kernel.a, m.kernel.b), (-0.25, 0.0));
        let back = builtin_model(ModelName::TrafficBackward, &ModelParams::default()).unwrap();
        assert_eq!((back.kernel.a, back.kernel.b), (0.0, 0.25));
    }

    #[test]
    fn tv_example_velocity_zero_is_not_flat() {
        let m = builtin_model(ModelName::TvExample, &ModelParams { kernel: Some((0.0, 0.2)), ..Default::default() }).unwrap();
        assert_eq!(m.v(1.0), 0.0);
        assert_eq!(m.f(0.0, 0.0, 1.0), 1.0);
        assert!(!m.flat_levels.contains(&1.0));
        assert!(builtin_model(ModelName::TvExample, &ModelParams::default()).is_err());
    }

    #[test]
    fn limit_family_kernel() {
        let m = builtin_model(ModelName::LimitFamily, &ModelParams { width: Some(0.25), ..Default::default() }).unwrap();
        assert_eq!((m.kernel.a, m.kernel.b), (-0.25, 0.25));
        assert!((m.kernel.b - m.kernel.a - 0.5).abs() < 1e-15);
        let mass = quadrature::integrate_rel(&|x| m.kernel.eval(x), -0.25, 0.25, 1e-14);
        assert!((mass - 1.0).abs() < 1e-10);
        assert_eq!(m.v(1.0), 0.0);
        assert_eq!(m.v(1.5), 0.0);
        assert_eq!(m.v(-0.5), 1.0);
        assert!((m.v(0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn stored_norms_dominate_sampled_derivatives() {
        let step = 1e-5;
        for m in all_models() {
            let (lo, hi) = m.invariant_range;
            let n = 2000;
            let (mut df, mut v, mut dv, mut d2v) = (0f64, 0f64, 0f64, 0f64);
            for i in 0..=n {
                let r = lo + (hi - lo) * i as f64 / n as f64;
                let (rm, rp) = ((r - step).max(lo), (r + step).min(hi));
                df = df.max(((m.f(0.0, 0.0, rp) - m.f(0.0, 0.0, rm)) / (rp - rm)).abs());
                v = v.max(m.v(r).abs());
                dv = dv.max(((m.v(rp) - m.v(rm)) / (rp - rm)).abs());
                if r - step >= lo && r + step <= hi {
                    d2v = d2v.max(((m.v(rp) - 2.0 * m.v(r) + m.v(rm)) / (step * step)).abs());
                }
            }
            let ok = |sampled: f64, stored: f64| sampled <= stored * (1.0 + 1e-6) + 1e-6;
            assert!(ok(df, m.norm_dr_f), "{}: df {df}", m.name);
            assert!(ok(v, m.norm_v), "{}: v {v}", m.name);
            assert!(ok(dv, m.norm_dv), "{}: dv {dv}", m.name);
            // second differences carry rounding noise of order eps·‖v‖/step²
            let noise = 8.0 * f64::EPSILON * m.norm_v / (step * step);
            assert!(d2v <= m.norm_d2v * (1.0 + 1e-6) + noise, "{}: d2v {d2v}", m.name);
        }
    }
}
