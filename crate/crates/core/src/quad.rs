//! One-dimensional quadrature.
//!
//! Two tools cover every integral in the crate:
//!
//! * [`integrate`] / [`integrate_complex`]: adaptive Gauss–Kronrod 15(7)
//!   bisection for smooth (possibly mildly oscillatory) integrands with an
//!   absolute/relative tolerance target and an a-posteriori error estimate.
//! * [`HermiteSamples`]: a panel rule for Fourier-type integrals
//!   `∫ f(t)·e^{iωt} dt` where `f` is smooth but `ω` may be large. `f` is
//!   replaced per panel by its cubic Hermite interpolant (values and exact
//!   derivatives at the panel ends) and the oscillatory factor is integrated
//!   exactly, so the cost and accuracy are independent of `ω`.

use crate::linalg::C64;

/// Kronrod abscissae for the 15-point rule on [-1, 1] (positive half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_47,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Embedded 7-point Gauss weights; the Gauss nodes are the odd-indexed
/// entries of `XGK` (indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_69,
    0.279_705_391_489_276_67,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    /// A-posteriori absolute error estimate (sum of per-segment estimates).
    pub abs_error: f64,
    pub evaluations: usize,
    /// False when the segment budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

/// One Gauss–Kronrod 15(7) evaluation on [a, b].
fn qk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    (value, error)
}

/// Adaptive Gauss–Kronrod integration of a complex-valued integrand.
///
/// Splits the current worst segment until the summed error estimate drops
/// below `max(abs_tol, rel_tol·|value|)` or the segment budget is exhausted.
pub fn integrate_complex(
    f: impl Fn(f64) -> C64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult<C64> {
    const MAX_SEGMENTS: usize = 4096;
    if a == b {
        return QuadResult { value: C64::new(0.0, 0.0), abs_error: 0.0, evaluations: 0, converged: true };
    }
    let (value, error) = qk15(&f, a, b);
    let mut segments = vec![Segment { a, b, value, error }];
    let mut evaluations = 15;
    loop {
        let total: C64 = segments.iter().map(|s| s.value).sum();
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        let target = abs_tol.max(rel_tol * total.norm());
        if total_err <= target {
            return QuadResult { value: total, abs_error: total_err, evaluations, converged: true };
        }
        if segments.len() >= MAX_SEGMENTS {
            return QuadResult { value: total, abs_error: total_err, evaluations, converged: false };
        }
        // Split the segment with the largest error estimate.
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("segment list is never empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        let (lv, le) = qk15(&f, seg.a, mid);
        let (rv, re) = qk15(&f, mid, seg.b);
        evaluations += 30;
        segments.push(Segment { a: seg.a, b: mid, value: lv, error: le });
        segments.push(Segment { a: mid, b: seg.b, value: rv, error: re });
    }
}

/// Adaptive Gauss–Kronrod integration of a real-valued integrand.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult<f64> {
    let r = integrate_complex(|t| C64::new(f(t), 0.0), a, b, abs_tol, rel_tol);
    QuadResult { value: r.value.re, abs_error: r.abs_error, evaluations: r.evaluations, converged: r.converged }
}

/// Moments `M_k = ∫₀^h τ^k e^{iωτ} dτ` for k = 0..=3.
///
/// Uses the upward recurrence for |ωh| away from zero and a power series
/// below it, where the recurrence would cancel catastrophically.
fn panel_moments(omega: f64, h: f64) -> [C64; 4] {
    let wh = omega * h;
    let mut m = [C64::new(0.0, 0.0); 4];
    if wh.abs() < 0.5 {
        // M_k = h^{k+1} Σ_m (iωh)^m / (m!·(k+m+1))
        let iwh = C64::new(0.0, wh);
        for (k, mk) in m.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0); // (iωh)^m / m!
            let mut sum = term / (k as f64 + 1.0);
            for mm in 1..40 {
                term *= iwh / mm as f64;
                let contrib = term / (k + mm + 1) as f64;
                sum += contrib;
                if contrib.norm() < 1e-20 * sum.norm().max(1e-300) {
                    break;
                }
            }
            *mk = sum * h.powi(k as i32 + 1);
        }
    } else {
        let iw = C64::new(0.0, omega);
        let e = C64::new(0.0, wh).exp(); // e^{iωh}
        m[0] = (e - C64::new(1.0, 0.0)) / iw;
        let mut hk = 1.0; // h^k
        for k in 1..4 {
            hk *= h;
            m[k] = (e * hk - m[k - 1] * k as f64) / iw;
        }
    }
    m
}

/// Uniform samples of a smooth complex function and its exact derivative,
/// supporting ω-independent evaluation of `∫ f(t)·e^{iωt} dt`.
#[derive(Clone, Debug)]
pub struct HermiteSamples {
    a: f64,
    h: f64,
    f: Vec<C64>,
    df: Vec<C64>,
}

impl HermiteSamples {
    /// Samples `eval` (returning `(f, f′)`) at `panels + 1` uniform nodes on
    /// `[a, b]`. `panels` must be ≥ 1.
    pub fn build(a: f64, b: f64, panels: usize, eval: impl Fn(f64) -> (C64, C64)) -> Self {
        assert!(panels >= 1 && b > a, "need at least one panel on a nonempty interval");
        let h = (b - a) / panels as f64;
        let mut f = Vec::with_capacity(panels + 1);
        let mut df = Vec::with_capacity(panels + 1);
        for i in 0..=panels {
            let (v, d) = eval(a + i as f64 * h);
            f.push(v);
            df.push(d);
        }
        HermiteSamples { a, h, f, df }
    }

    /// Number of panels.
    pub fn panels(&self) -> usize {
        self.f.len() - 1
    }

    /// `∫_a^b f(t)·e^{iωt} dt` with the cubic-Hermite panel rule.
    pub fn fourier(&self, omega: f64) -> C64 {
        let h = self.h;
        let m = panel_moments(omega, h);
        let mut total = C64::new(0.0, 0.0);
        for k in 0..self.panels() {
            let (f0, f1) = (self.f[k], self.f[k + 1]);
            let (d0, d1) = (self.df[k], self.df[k + 1]);
            let c0 = f0;
            let c1 = d0;
            let c2 = ((f1 - f0) * (3.0 / h) - d0 * 2.0 - d1) / h;
            let c3 = ((f0 - f1) * (2.0 / h) + d0 + d1) / (h * h);
            let t0 = self.a + k as f64 * h;
            let phase = C64::new(0.0, omega * t0).exp();
            total += phase * (c0 * m[0] + c1 * m[1] + c2 * m[2] + c3 * m[3]);
        }
        total
    }

    /// `∫_a^b f(t) dt` (the ω = 0 special case).
    pub fn integral(&self) -> C64 {
        self.fourier(0.0)
    }
}

/// Panel count for which the cubic-Hermite interpolation error of `f` stays
/// below `tol` over an interval of length `len`, given a bound `max_f4` on
/// |f⁗|. The truncation bound is `len·h⁴·max_f4/384`.
pub fn hermite_panel_count(len: f64, max_f4: f64, tol: f64) -> usize {
    if len <= 0.0 {
        return 1;
    }
    let h4 = 384.0 * tol / (len * max_f4.max(1e-300));
    let h = h4.powf(0.25);
    ((len / h).ceil() as usize).clamp(16, 4_000_000)
}
