//! Diagonal kernels `K(z, w) = Σ b_n (z w̄)^n`: metric, curvature, rank-one
//! covariant derivatives and the kernel/shift dictionary.
//!
//! A kernel is stored as `b_0` plus the weights of its backward shift, with
//! `b_{n+1} = b_n / w_n²`. Everything radial is evaluated in `t = r²`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::shifts::{binomial, WeightSequence};

pub const SERIES_REL_TOL: f64 = 1e-14;
pub const SERIES_RATIO_CAP: f64 = 0.999;
pub const MAX_SERIES_TERMS: usize = 20_000_000;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalKernel {
    b0: f64,
    /// `None` is the constant kernel `b_0`; a finite weight list gives a polynomial.
    shift: Option<WeightSequence>,
    label: Option<String>,
    szego_power: Option<u32>,
}

impl DiagonalKernel {
    pub fn from_shift(b0: f64, shift: WeightSequence) -> LabResult<Self> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(LabError::Domain(format!("b_0 = {b0} must be positive")));
        }
        if let Some(limit) = shift.limit() {
            // ratio test: b_{n+1}/b_n → 1/w∞² must not exceed 1
            if !(limit > 0.0) || 1.0 / (limit * limit) > 1.0 + 1e-10 {
                return Err(LabError::Domain(format!(
                    "coefficient ratio tends to {} > 1: radius of convergence below 1",
                    1.0 / (limit * limit)
                )));
            }
        }
        Ok(Self { b0, shift: Some(shift), label: None, szego_power: None })
    }

    /// Polynomial kernel with the given positive coefficients.
    pub fn from_coefficients(b: &[f64]) -> LabResult<Self> {
        if let Some(n) = b.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(LabError::Domain(format!("coefficient b_{n} must be positive")));
        }
        match b {
            [] => Err(LabError::Domain("empty coefficient list".into())),
            [b0] => Ok(Self { b0: *b0, shift: None, label: None, szego_power: None }),
            _ => {
                let w = b.windows(2).map(|p| (p[0] / p[1]).sqrt()).collect();
                Self::from_shift(b[0], WeightSequence::explicit(w)?)
            }
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// `k` when this is `(1 − t)^{-k}`.
    pub fn szego_power(&self) -> Option<u32> {
        self.szego_power
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn shift(&self) -> Option<&WeightSequence> {
        self.shift.as_ref()
    }

    /// Coefficients `b_0, b_1, …`; finite for polynomial kernels.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = Some(self.b0);
        let mut n = 0usize;
        std::iter::from_fn(move || {
            let current = next?;
            next = self
                .shift
                .as_ref()
                .and_then(|w| w.weight_squared(n))
                .map(|w2| current / w2);
            n += 1;
            Some(current)
        })
    }

    pub fn coeffs(&self, count: usize) -> Vec<f64> {
        self.coefficients().take(count).collect()
    }
}

/// `(1 − t)^{-k}`, `b_n = C(n+k−1, n)`.
pub fn szego_power_coeffs(k: u32) -> LabResult<DiagonalKernel> {
    let shift = WeightSequence::szego(k)?;
    let mut kernel = DiagonalKernel::from_shift(1.0, shift)?.with_label(&format!("szego-{k}"));
    kernel.szego_power = Some(k);
    Ok(kernel)
}

pub fn hardy_kernel() -> DiagonalKernel {
    szego_power_coeffs(1).expect("valid preset").with_label("hardy")
}

pub fn bergman_kernel() -> DiagonalKernel {
    szego_power_coeffs(2).expect("valid preset").with_label("bergman")
}

/// Weights `√(b_n / b_{n+1})` of the adjoint of `M_z` on the kernel's space.
pub fn shift_from_kernel(k: &DiagonalKernel) -> LabResult<WeightSequence> {
    k.shift
        .clone()
        .ok_or_else(|| LabError::Domain("constant kernel has no shift weights".into()))
}

fn check_radius(r: f64) -> LabResult<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(LabError::Domain(format!("radius {r} outside [0, 1)")));
    }
    Ok(())
}

/// `g^{(d)}(t)` for `d = 0..=order`, `g(t) = Σ b_n t^n`.
pub fn radial_series(k: &DiagonalKernel, t: f64, order: usize) -> LabResult<Vec<f64>> {
    if !(0.0..1.0).contains(&t) {
        return Err(LabError::Domain(format!("t = {t} outside [0, 1)")));
    }
    let mut sums = vec![0.0; order + 1];
    if t == 0.0 {
        for (d, b) in k.coefficients().take(order + 1).enumerate() {
            sums[d] = b * (1..=d).product::<usize>() as f64;
        }
        return Ok(sums);
    }
    let mut coeffs = k.coefficients().peekable();
    let mut tn = 1.0; // t^n
    let mut n = 0usize;
    while let Some(b) = coeffs.next() {
        if n >= MAX_SERIES_TERMS {
            return Err(LabError::Truncation(format!(
                "series at t = {t} did not converge within {MAX_SERIES_TERMS} terms"
            )));
        }
        let next_b = coeffs.peek().copied();
        let mut converged = next_b.is_some();
        for d in 0..=order {
            if n < d {
                converged = false;
                continue;
            }
            let falling: f64 = (0..d).map(|s| (n - s) as f64).product();
            let term = b * falling * tn / t.powi(d as i32);
            sums[d] += term;
            if let Some(nb) = next_b {
                let ratio = nb / b * t * (n + 1) as f64 / (n + 1 - d) as f64;
                let small = term <= SERIES_REL_TOL * sums[d];
                let geometric = ratio < 1.0 && term * ratio / (1.0 - ratio) <= SERIES_REL_TOL * sums[d];
                if !((small && ratio < SERIES_RATIO_CAP) || geometric) {
                    converged = false;
                }
            }
        }
        if converged {
            break;
        }
        tn *= t;
        n += 1;
    }
    Ok(sums)
}

/// `h(r) = Σ b_n r^{2n}`.
pub fn metric_eval(k: &DiagonalKernel, r: f64) -> LabResult<f64> {
    check_radius(r)?;
    Ok(radial_series(k, r * r, 0)?[0])
}

/// Derivatives of `L = log g` in `t`, orders `0..=4`.
fn log_derivatives(g: &[f64]) -> [f64; 5] {
    let u = |d: usize| g.get(d).copied().unwrap_or(0.0) / g[0];
    let (u1, u2, u3, u4) = (u(1), u(2), u(3), u(4));
    [
        g[0].ln(),
        u1,
        u2 - u1 * u1,
        u3 - 3.0 * u2 * u1 + 2.0 * u1.powi(3),
        u4 - 4.0 * u3 * u1 - 3.0 * u2 * u2 + 12.0 * u2 * u1 * u1 - 6.0 * u1.powi(4),
    ]
}

/// Curvature `−∂∂̄ log h` from the series, `−(t L″ + L′)` with `L = log g`.
pub fn curvature_series(k: &DiagonalKernel, r: f64) -> LabResult<f64> {
    check_radius(r)?;
    let t = r * r;
    let g = radial_series(k, t, 2)?;
    Ok(-(t * (g[2] * g[0] - g[1] * g[1]) / (g[0] * g[0]) + g[1] / g[0]))
}

/// `−n / (1 − r²)²`, available for Szegő-power kernels.
pub fn curvature_closed_form(k: &DiagonalKernel, r: f64) -> LabResult<f64> {
    check_radius(r)?;
    let n = k
        .szego_power
        .ok_or_else(|| LabError::Configuration("closed-form curvature needs a Szegő-power kernel".into()))?;
    let s = 1.0 - r * r;
    Ok(-(n as f64) / (s * s))
}

/// `−¼ Δ log h` at the point `(r, 0)`, with five-point central differences
/// along both axes; the metric is radial, so off-axis samples use `|z|`.
pub fn curvature_fd(k: &DiagonalKernel, r: f64, step: f64) -> LabResult<f64> {
    check_radius(r)?;
    if !(step > 0.0) {
        return Err(LabError::Domain(format!("step {step} must be positive")));
    }
    let h = step.min((1.0 - r) / 10.0);
    if r + 2.0 * h >= 1.0 || (r * r + 4.0 * h * h).sqrt() >= 1.0 {
        return Err(LabError::Domain(format!("stencil around r = {r} with step {h} leaves the disc")));
    }
    let f = |x: f64, y: f64| metric_eval(k, x.hypot(y)).map(f64::ln);
    let f0 = f(r, 0.0)?;
    let second = |g: &dyn Fn(f64) -> LabResult<f64>| -> LabResult<f64> {
        Ok((-g(2.0 * h)? + 16.0 * g(h)? - 30.0 * f0 + 16.0 * g(-h)? - g(-2.0 * h)?) / (12.0 * h * h))
    };
    let fxx = second(&|d| f(r + d, 0.0))?;
    let fyy = second(&|d| f(r, d))?;
    Ok(-0.25 * (fxx + fyy))
}

/// `∂^i ∂̄^j 𝒦` at the real point `ω = r`, `i + j ≤ 2`.
///
/// In rank one the connection commutators vanish, so covariant and ordinary
/// derivatives agree. With `𝒦 = F(t)`: `∂𝒦 = ∂̄𝒦 = F′ r`,
/// `∂∂̄𝒦 = F′ + t F″`, `∂²𝒦 = ∂̄²𝒦 = F″ r²`.
pub fn covariant_derivatives_rank1(k: &DiagonalKernel, r: f64, i: usize, j: usize) -> LabResult<f64> {
    if i + j > 2 {
        return Err(LabError::Configuration(format!(
            "covariant derivative order ({i}, {j}) not supported (total order <= 2)"
        )));
    }
    check_radius(r)?;
    if (i, j) == (0, 0) {
        return curvature_series(k, r);
    }
    let t = r * r;
    let l = log_derivatives(&radial_series(k, t, 4)?);
    let f1 = -(2.0 * l[2] + t * l[3]);
    let f2 = -(3.0 * l[3] + t * l[4]);
    Ok(match (i, j) {
        (1, 0) | (0, 1) => f1 * r,
        (1, 1) => f1 + t * f2,
        _ => f2 * t,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRatioBound {
    pub bound: f64,
    pub certified: bool,
    /// Product coefficients `c_i` of `(Σ a_n t^n)(Σ b_n t^n)` over the scan.
    pub product_coeffs: Vec<f64>,
    pub first_failure: Option<usize>,
}

/// Lower bound for `K1 / K2` from the coefficients of `K1 · (1/K2)`.
///
/// `inv_k2` is `a_0, …, a_k` with `a_0 = 1`; `c_i = Σ a_n b_{i−n}` is scanned
/// for `i < window` together with `1 + a_1 b_{i−1}/b_i + … ≥ 0`.
pub fn kernel_ratio_lower_bound(k1: &DiagonalKernel, inv_k2: &[f64], window: usize, tol: f64) -> LabResult<KernelRatioBound> {
    match inv_k2.first() {
        None => return Err(LabError::Domain("empty inverse-kernel coefficient list".into())),
        Some(&a0) if (a0 - 1.0).abs() > tol => {
            return Err(LabError::Domain(format!("inverse kernel must have constant term 1, got {a0}")))
        }
        _ => {}
    }
    let b = k1.coeffs(window);
    let mut product_coeffs = Vec::with_capacity(window);
    let mut first_failure = None;
    for i in 0..window {
        let c: f64 = (0..=i.min(inv_k2.len() - 1))
            .filter(|&n| i - n < b.len())
            .map(|n| inv_k2[n] * b[i - n])
            .sum();
        let bi = b.get(i).copied().unwrap_or(0.0);
        let per_index_ok = bi == 0.0 || c / bi >= -tol;
        if first_failure.is_none() && (c < -tol * bi.max(1.0) || !per_index_ok) {
            first_failure = Some(i);
        }
        product_coeffs.push(c);
    }
    Ok(KernelRatioBound { bound: k1.b0, certified: first_failure.is_none(), product_coeffs, first_failure })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMethod {
    ClosedForm,
    Series,
    FiniteDifference,
}

impl CurvatureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureMethod::ClosedForm => "closed-form",
            CurvatureMethod::Series => "series",
            CurvatureMethod::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub method: CurvatureMethod,
}

impl CurvatureProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value,method\n");
        for (r, v) in self.radii.iter().zip(&self.values) {
            out.push_str(&format!("{r:.16e},{v:.16e},{}\n", self.method.as_str()));
        }
        out
    }
}

pub fn curvature_at(k: &DiagonalKernel, r: f64, method: CurvatureMethod, step: f64) -> LabResult<f64> {
    match method {
        CurvatureMethod::ClosedForm => curvature_closed_form(k, r),
        CurvatureMethod::Series => curvature_series(k, r),
        CurvatureMethod::FiniteDifference => curvature_fd(k, r, step),
    }
}

pub fn curvature_profile(k: &DiagonalKernel, radii: &[f64], method: CurvatureMethod, step: f64) -> LabResult<CurvatureProfile> {
    let values = radii.iter().map(|&r| curvature_at(k, r, method, step)).collect::<LabResult<_>>()?;
    Ok(CurvatureProfile { radii: radii.to_vec(), values, method })
}

/// `C(n+k−1, n)` for cross-checks against the coefficient recursion.
pub fn szego_coefficient(k: u32, n: u64) -> f64 {
    binomial(n + k as u64 - 1, n) as f64
}
