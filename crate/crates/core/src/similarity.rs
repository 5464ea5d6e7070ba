//! Radial similarity diagnostics: `det h_T / K^n` profiles, boundary
//! verdicts, the subharmonic-witness residual and the commutator example
//! `T = [[M*, X M* − M* X], [0, M*]]` on the Hardy space.

use num_complex::Complex64;
use serde::Serialize;

use crate::blockops::{frame_solver, Block, BlockOperator};
use crate::error::{LabError, LabResult};
use crate::matrix::ComplexMatrix;
use crate::rkhs::{curvature_series, hardy_kernel, metric_eval, CurvatureProfile, DiagonalKernel};
use crate::shifts::WeightSequence;

pub const DEFAULT_UPPER_BOUND: f64 = 1e6;
pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const STABILITY_REL_CHANGE: f64 = 0.05;
pub const DEFAULT_WITNESS_STEP: f64 = 1e-3;
pub const ANALYTIC_RADIUS_CAP: f64 = 1.0 - 1.0 / 4096.0;
pub const FRAME_DEFAULT_ORDER: usize = 512;

/// `r_k = 1 − 2^{−k}` for `k_min ≤ k ≤ k_max`.
pub fn boundary_dyadic(k_min: u32, k_max: u32) -> LabResult<Vec<f64>> {
    if k_min == 0 || k_min > k_max || k_max > 52 {
        return Err(LabError::Configuration(format!("dyadic range {k_min}..={k_max} is invalid")));
    }
    Ok((k_min..=k_max).map(|k| 1.0 - 2f64.powi(-(k as i32))).collect())
}

/// `count` evenly spaced radii from `start` to `stop` inclusive.
pub fn linear_radii(start: f64, stop: f64, count: usize) -> LabResult<Vec<f64>> {
    if count < 2 || !(start < stop) {
        return Err(LabError::Configuration("linear grid needs count >= 2 and start < stop".into()));
    }
    Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect())
}

/// Real diagonal operator `diag(x_0, …, x_{m−1}, f, f, …)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalX {
    pub entries: Vec<f64>,
    pub fill: f64,
}

impl DiagonalX {
    pub fn new(entries: Vec<f64>, fill: f64) -> LabResult<Self> {
        if entries.iter().chain([&fill]).any(|x| !x.is_finite()) {
            return Err(LabError::Domain("diagonal entries must be finite".into()));
        }
        Ok(Self { entries, fill })
    }

    pub fn entry(&self, i: usize) -> f64 {
        self.entries.get(i).copied().unwrap_or(self.fill)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x.abs()).fold(self.fill.abs(), f64::max)
    }

    /// `S = X M* − M* X`: backward shift with weights `x_j − x_{j+1}`.
    pub fn commutator(&self, order: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(order, order, |i, j| {
            Complex64::new(if j == i + 1 { self.entry(i) - self.entry(i + 1) } else { 0.0 }, 0.0)
        })
    }
}

/// Where `det h_T(r)` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricSource {
    /// Direct sum of the adjoint multiplication operators of these kernels.
    Kernels(Vec<DiagonalKernel>),
    /// Rank-two frame of an upper-triangular 2×2 block operator.
    Frame(BlockOperator),
    /// Closed form `h² + h‖Xt‖² − |⟨t, Xt⟩|²` of the commutator example.
    Commutator(DiagonalX),
}

impl MetricSource {
    fn radius_cap(&self) -> f64 {
        match self {
            MetricSource::Frame(_) => crate::blockops::FRAME_RADIUS_CAP,
            _ => ANALYTIC_RADIUS_CAP,
        }
    }

    pub fn det(&self, r: f64) -> LabResult<f64> {
        if !(0.0..1.0).contains(&r) || r > self.radius_cap() + 1e-15 {
            return Err(LabError::Domain(format!("radius {r} outside [0, {}]", self.radius_cap())));
        }
        match self {
            MetricSource::Kernels(ks) => ks.iter().map(|k| metric_eval(k, r)).product(),
            MetricSource::Frame(b) => frame_solver(b, Complex64::new(r, 0.0)).map(|f| f.det),
            MetricSource::Commutator(x) => Ok(commutator_det_jet(x, r * r).v),
        }
    }

    /// `−∂∂̄ log det h_T` from an analytic route, where one exists.
    pub fn trace_curvature(&self, r: f64) -> LabResult<f64> {
        match self {
            MetricSource::Kernels(ks) => ks.iter().map(|k| curvature_series(k, r)).sum(),
            MetricSource::Commutator(x) => {
                let t = r * r;
                Ok(commutator_det_jet(x, t).radial_curvature(t))
            }
            MetricSource::Frame(_) => Err(LabError::Configuration(
                "frame sources have no analytic trace curvature; pair them with a closed-form source".into(),
            )),
        }
    }
}

/// Value and first two `t`-derivatives of a radial function.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Jet {
    v: f64,
    d1: f64,
    d2: f64,
}

impl Jet {
    fn constant(v: f64) -> Self {
        Jet { v, d1: 0.0, d2: 0.0 }
    }

    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }

    fn scale(self, c: f64) -> Jet {
        Jet { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    fn monomial(t: f64, i: usize) -> Jet {
        let p = |k: i32| if k < 0 { 0.0 } else { t.powi(k) };
        let i_f = i as f64;
        Jet { v: p(i as i32), d1: i_f * p(i as i32 - 1), d2: i_f * (i_f - 1.0) * p(i as i32 - 2) }
    }

    /// `−(t(g″g − g′²)/g² + g′/g)`.
    fn radial_curvature(self, t: f64) -> f64 {
        -(t * (self.d2 * self.v - self.d1 * self.d1) / (self.v * self.v) + self.d1 / self.v)
    }
}

/// `Σ_{i<m} c_i t^i + c_∞ t^m/(1 − t)`.
fn tail_series(coeffs: &[f64], fill: f64, t: f64) -> Jet {
    let m = coeffs.len();
    let mut out = Jet::constant(0.0);
    for (i, &c) in coeffs.iter().enumerate() {
        out = out.add(Jet::monomial(t, i).scale(c));
    }
    if fill != 0.0 {
        let s = 1.0 / (1.0 - t);
        let geo = Jet { v: s, d1: s * s, d2: 2.0 * s * s * s };
        out = out.add(Jet::monomial(t, m).mul(geo).scale(fill));
    }
    out
}

fn commutator_det_jet(x: &DiagonalX, t: f64) -> Jet {
    let s = 1.0 / (1.0 - t);
    let h = Jet { v: s, d1: s * s, d2: 2.0 * s * s * s };
    let sq: Vec<f64> = x.entries.iter().map(|v| v * v).collect();
    let a = tail_series(&sq, x.fill * x.fill, t);
    let b = tail_series(&x.entries, x.fill, t);
    h.mul(h).add(h.mul(a)).add(b.mul(b).scale(-1.0))
}

/// The 2×2 operator `[[M*, X M* − M* X], [0, M*]]`.
pub fn commutator_operator(x: &DiagonalX, order: usize) -> LabResult<BlockOperator> {
    BlockOperator::upper_2x2(
        Block::Shift(WeightSequence::hardy()),
        Block::Explicit(x.commutator(order)),
        Block::Shift(WeightSequence::hardy()),
        order,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityDiagnostic {
    pub radii: Vec<f64>,
    pub ratio: Vec<f64>,
    pub upper_bound_ok: Option<bool>,
    pub boundary_limit_positive: Option<bool>,
    pub witness_residual: Option<f64>,
    #[serde(skip)]
    pub laplacian_phi: Vec<Option<f64>>,
    #[serde(skip)]
    pub trace_curv_diff: Vec<Option<f64>>,
    pub notes: Vec<String>,
}

impl SimilarityDiagnostic {
    pub fn phi(&self) -> Vec<f64> {
        self.ratio.iter().map(|x| x.ln()).collect()
    }

    /// Names the first failed hypothesis, or reports numerical consistency.
    pub fn summary(&self) -> String {
        match (self.upper_bound_ok, self.boundary_limit_positive) {
            (Some(false), _) => "ratio not bounded above on the grid".into(),
            (_, Some(false)) => "boundary limit not positive or not stabilized".into(),
            (Some(true), Some(true)) => "ratio hypotheses numerically consistent".into(),
            _ => "verdicts not computed".into(),
        }
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut out = String::from("r,ratio,phi,laplacian_phi,trace_curv_diff,residual\n");
        for (i, (&r, &q)) in self.radii.iter().zip(&self.ratio).enumerate() {
            let lap = self.laplacian_phi.get(i).copied().flatten();
            let diff = self.trace_curv_diff.get(i).copied().flatten();
            let res = lap.zip(diff).map(|(l, d)| (d - l).abs());
            out.push_str(&format!(
                "{r:.16e},{q:.16e},{:.16e},{},{},{}\n",
                q.ln(),
                cell(lap),
                cell(diff),
                cell(res)
            ));
        }
        out
    }
}

fn check_radii(radii: &[f64], cap: f64) -> LabResult<()> {
    if radii.is_empty() {
        return Err(LabError::Configuration("empty radius grid".into()));
    }
    if radii.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(LabError::Configuration("radii must be strictly increasing".into()));
    }
    if radii[0] < 0.0 || radii[radii.len() - 1] > cap + 1e-15 {
        return Err(LabError::Domain(format!("radii must lie in [0, {cap}]")));
    }
    Ok(())
}

/// `det h_T(r) / K(r, r)^n` along the grid; verdicts unset.
pub fn det_ratio_profile(source: &MetricSource, k: &DiagonalKernel, n: u32, radii: &[f64]) -> LabResult<SimilarityDiagnostic> {
    check_radii(radii, source.radius_cap())?;
    let mut ratio = Vec::with_capacity(radii.len());
    for &r in radii {
        let det = source.det(r).map_err(|e| match e {
            LabError::Truncation(m) => LabError::Truncation(format!("at r = {r}: {m}")),
            other => other,
        })?;
        ratio.push(det / metric_eval(k, r)?.powi(n as i32));
    }
    let mut notes = Vec::new();
    if let MetricSource::Frame(_) = source {
        notes.push(format!("frame source: radii capped at {}", crate::blockops::FRAME_RADIUS_CAP));
    }
    Ok(SimilarityDiagnostic {
        radii: radii.to_vec(),
        ratio,
        upper_bound_ok: None,
        boundary_limit_positive: None,
        witness_residual: None,
        laplacian_phi: Vec::new(),
        trace_curv_diff: Vec::new(),
        notes,
    })
}

/// Bounded above by `upper`, and the last four samples stay above `floor`
/// with consecutive relative changes under 5%.
pub fn boundedness_verdict(d: &SimilarityDiagnostic, upper: f64, floor: f64) -> SimilarityDiagnostic {
    let mut out = d.clone();
    out.upper_bound_ok = Some(d.ratio.iter().all(|&x| x < upper));
    let n = d.ratio.len();
    let positive = if n < 4 {
        out.notes.push("fewer than four samples: boundary limit not assessed".into());
        false
    } else {
        let tail = &d.ratio[n - 4..];
        tail.iter().all(|&x| x > floor)
            && tail.windows(2).all(|p| ((p[1] - p[0]) / p[0]).abs() < STABILITY_REL_CHANGE)
    };
    out.boundary_limit_positive = Some(positive);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub radii: Vec<f64>,
    pub laplacian_phi: Vec<f64>,
    pub trace_curv_diff: Vec<f64>,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
    pub phi_sup: f64,
    pub subharmonic: bool,
    pub skipped: Vec<f64>,
}

/// `φ = log(det h_T / K^n)` against `n 𝒦_K − trace 𝒦_T = ∂∂̄φ`.
///
/// `phi_source` feeds `φ` (differenced on a five-point stencil);
/// `trace_source` supplies `trace 𝒦_T` analytically.
pub fn subharmonic_witness_check(
    phi_source: &MetricSource,
    trace_source: &MetricSource,
    k: &DiagonalKernel,
    n: u32,
    radii: &[f64],
    step: f64,
    tol: f64,
) -> LabResult<WitnessReport> {
    check_radii(radii, phi_source.radius_cap())?;
    let phi = |r: f64| -> LabResult<f64> {
        let q = phi_source.det(r)? / metric_eval(k, r)?.powi(n as i32);
        if !(q > 0.0) {
            return Err(LabError::Domain(format!("ratio {q} at r = {r} is not positive")));
        }
        Ok(q.ln())
    };
    let mut rep = WitnessReport {
        radii: Vec::new(),
        laplacian_phi: Vec::new(),
        trace_curv_diff: Vec::new(),
        max_residual: 0.0,
        threshold: 0.0,
        pass: true,
        phi_sup: 0.0,
        subharmonic: true,
        skipped: Vec::new(),
    };
    let mut used_step = step;
    for &r in radii {
        rep.phi_sup = rep.phi_sup.max(phi(r)?.abs());
        let cap = phi_source.radius_cap();
        let h = step.min((1.0 - r) / 10.0);
        if r - 2.0 * h <= 0.0 || r + 2.0 * h > cap {
            rep.skipped.push(r);
            continue;
        }
        used_step = used_step.min(h);
        let (fm2, fm1, f0, fp1, fp2) = (phi(r - 2.0 * h)?, phi(r - h)?, phi(r)?, phi(r + h)?, phi(r + 2.0 * h)?);
        let d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
        let d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
        let lap = 0.25 * (d2 + d1 / r);
        let diff = n as f64 * curvature_series(k, r)? - trace_source.trace_curvature(r)?;
        rep.max_residual = rep.max_residual.max((lap - diff).abs());
        rep.subharmonic &= lap >= -tol;
        rep.radii.push(r);
        rep.laplacian_phi.push(lap);
        rep.trace_curv_diff.push(diff);
    }
    rep.threshold = 1e-4f64.max(50.0 * used_step * used_step);
    rep.pass = rep.max_residual < rep.threshold;
    Ok(rep)
}

impl SimilarityDiagnostic {
    pub fn attach_witness(&mut self, w: &WitnessReport) {
        self.witness_residual = Some(w.max_residual);
        let find = |r: f64, v: &[f64]| w.radii.iter().position(|&x| x == r).map(|i| v[i]);
        self.laplacian_phi = self.radii.iter().map(|&r| find(r, &w.laplacian_phi)).collect();
        self.trace_curv_diff = self.radii.iter().map(|&r| find(r, &w.trace_curv_diff)).collect();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub profile: SimilarityDiagnostic,
    pub frame_det: Vec<f64>,
    pub closed_form_det: Vec<f64>,
    pub closed_form_check: bool,
    pub x_norm: f64,
    pub pinch_ok: bool,
}

/// Frame determinant against the closed form, and `1 ≤ det h_T / K² ≤ 1 + ‖X‖²`.
pub fn commutator_example(x: &DiagonalX, order: usize, radii: &[f64]) -> LabResult<CommutatorReport> {
    let b = commutator_operator(x, order)?;
    let frame = MetricSource::Frame(b);
    let closed = MetricSource::Commutator(x.clone());
    let profile = det_ratio_profile(&frame, &hardy_kernel(), 2, radii)?;
    let mut frame_det = Vec::new();
    let mut closed_form_det = Vec::new();
    let mut closed_form_check = true;
    for &r in radii {
        let f = frame.det(r)?;
        let c = closed.det(r)?;
        closed_form_check &= ((f - c) / c).abs() <= 1e-8;
        frame_det.push(f);
        closed_form_det.push(c);
    }
    let x_norm = x.norm();
    let pinch_ok = profile.ratio.iter().all(|&q| q >= 1.0 - 1e-10 && q <= 1.0 + x_norm * x_norm + 1e-10);
    Ok(CommutatorReport { profile, frame_det, closed_form_det, closed_form_check, x_norm, pinch_ok })
}

/// Determinant of a block-diagonal gram: pointwise product.
pub fn direct_sum_det(h1: &[f64], h2: &[f64]) -> LabResult<Vec<f64>> {
    if h1.len() != h2.len() {
        return Err(LabError::Configuration(format!("grid sizes differ: {} vs {}", h1.len(), h2.len())));
    }
    Ok(h1.iter().zip(h2).map(|(a, b)| a * b).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientReport {
    pub quotients: Vec<f64>,
    pub passes: bool,
}

/// `|𝒦_A| / |𝒦_B| ∈ [1/c, c]` at every sample. Failure rules out similarity
/// by an operator with `‖X‖²‖X⁻¹‖² ≤ c`.
pub fn curvature_quotient_necessary(a: &CurvatureProfile, b: &CurvatureProfile, condition_bound: f64) -> LabResult<QuotientReport> {
    if a.radii != b.radii {
        return Err(LabError::Configuration("curvature profiles use different grids".into()));
    }
    if !(condition_bound >= 1.0) {
        return Err(LabError::Domain(format!("condition bound {condition_bound} must be >= 1")));
    }
    let quotients: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x.abs() / y.abs()).collect();
    let lo = 1.0 / condition_bound;
    let passes = quotients.iter().all(|&q| q >= lo * (1.0 - 1e-12) && q <= condition_bound * (1.0 + 1e-12));
    Ok(QuotientReport { quotients, passes })
}
