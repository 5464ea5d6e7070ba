//! Weighted backward shifts: weight rules, finite sections, defect operators,
//! hypercontractivity reports, the Agler-type weight-ratio bound and the
//! Shields partial-product test.
//!
//! Weight indexing follows the matrix: `weight(j)` sits at entry `(j, j+1)`,
//! so `T e_{j+1} = w_j e_j`. Rational tails are written in the *column*
//! index `i = j + 1`, which is the index of the basis vector being shifted.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::matrix::{psd_check, ComplexMatrix, PsdVerdict};

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_HORIZON: usize = 4096;
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Integer polynomial, coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial(pub Vec<i64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }

    /// Degree ignoring trailing zero coefficients; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|&c| c != 0)
    }

    fn leading(&self) -> Option<i64> {
        self.degree().map(|d| self.0[d])
    }

    /// Cauchy bound: every real root has modulus below this.
    fn root_bound(&self) -> f64 {
        match self.degree() {
            None | Some(0) => 0.0,
            Some(d) => {
                let lead = self.0[d].abs() as f64;
                1.0 + self.0[..d].iter().map(|&c| c.abs() as f64 / lead).fold(0.0, f64::max)
            }
        }
    }
}

/// `i ↦ sqrt(p(i)/q(i))` for column indices `i ≥ offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalTail {
    pub numerator: Polynomial,
    pub denominator: Polynomial,
    pub offset: usize,
}

impl RationalTail {
    fn squared(&self, column: usize) -> f64 {
        let x = column as f64;
        self.numerator.eval(x) / self.denominator.eval(x)
    }

    fn weight(&self, column: usize) -> f64 {
        self.squared(column).sqrt()
    }

    /// Past this column the rational function has no zeros or poles.
    fn stable_from(&self) -> usize {
        self.numerator.root_bound().max(self.denominator.root_bound()).ceil() as usize + 1
    }

    fn validate(&self) -> LabResult<()> {
        if self.offset == 0 {
            return Err(LabError::Domain("tail offset is a column index and must be >= 1".into()));
        }
        if self.denominator.degree().is_none() {
            return Err(LabError::Domain("tail denominator is the zero polynomial".into()));
        }
        if self.numerator.degree() > self.denominator.degree() {
            return Err(LabError::Domain("tail grows without bound (deg p > deg q)".into()));
        }
        let last = self.stable_from().max(self.offset).min(self.offset + 1_000_000);
        for i in self.offset..=last {
            let q = self.denominator.eval(i as f64);
            if q == 0.0 {
                return Err(LabError::Domain(format!("tail denominator vanishes at i = {i}")));
            }
            let v = self.numerator.eval(i as f64) / q;
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::Domain(format!("tail weight^2 = {v} is not positive at i = {i}")));
            }
        }
        Ok(())
    }

    fn limit_squared(&self) -> f64 {
        match (self.numerator.degree(), self.denominator.degree()) {
            (Some(dp), Some(dq)) if dp == dq => {
                self.numerator.leading().unwrap() as f64 / self.denominator.leading().unwrap() as f64
            }
            _ => 0.0,
        }
    }
}

/// Positive weight rule: explicit prefix, optional rational tail, global scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    prefix: Vec<f64>,
    tail: Option<RationalTail>,
    scale: f64,
    name: Option<String>,
}

impl WeightSequence {
    pub fn new(prefix: Vec<f64>, tail: Option<RationalTail>) -> LabResult<Self> {
        if let Some(j) = prefix.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(LabError::Domain(format!(
                "weight {j} = {} is not a positive finite number",
                prefix[j]
            )));
        }
        if let Some(t) = &tail {
            if t.offset > prefix.len() + 1 {
                return Err(LabError::Domain(format!(
                    "tail starts at column {} but the prefix only covers columns 1..={}",
                    t.offset,
                    prefix.len()
                )));
            }
            t.validate()?;
        }
        if prefix.is_empty() && tail.is_none() {
            return Err(LabError::Domain("empty weight sequence".into()));
        }
        Ok(Self { prefix, tail, scale: 1.0, name: None })
    }

    pub fn explicit(weights: Vec<f64>) -> LabResult<Self> {
        Self::new(weights, None)
    }

    /// Weights `sqrt((j+1)/(n+j))`: the adjoint of `M_z` for the kernel `(1 − z w̄)^{-n}`.
    pub fn szego(n: u32) -> LabResult<Self> {
        if n == 0 {
            return Err(LabError::Domain("Szegő power must be >= 1".into()));
        }
        let tail = RationalTail {
            numerator: Polynomial(vec![0, 1]),
            denominator: Polynomial(vec![n as i64 - 1, 1]),
            offset: 1,
        };
        Ok(Self::new(Vec::new(), Some(tail))?.named(&format!("szego-{n}")))
    }

    pub fn hardy() -> Self {
        Self::szego(1).expect("valid preset").named("hardy")
    }

    pub fn bergman() -> Self {
        Self::szego(2).expect("valid preset").named("bergman")
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn scaled(mut self, c: f64) -> LabResult<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(LabError::Domain(format!("scale {c} must be positive")));
        }
        self.scale *= c;
        Ok(self)
    }

    /// Copy with `weight(j)` replaced; earlier weights are frozen into the prefix.
    pub fn with_weight(&self, j: usize, value: f64) -> LabResult<Self> {
        let mut prefix = self.weights(j.max(self.prefix.len()) + 1)?;
        prefix.iter_mut().for_each(|w| *w /= self.scale);
        prefix[j] = value / self.scale;
        let tail = self.tail.clone().map(|mut t| {
            t.offset = t.offset.max(prefix.len() + 1);
            t
        });
        let mut out = Self::new(prefix, tail)?;
        out.scale = self.scale;
        Ok(out)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> Option<&RationalTail> {
        self.tail.as_ref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_finite_list(&self) -> bool {
        self.tail.is_none()
    }

    /// `w_j`, the entry at `(j, j+1)`. `None` past the end of a finite list.
    pub fn weight(&self, j: usize) -> Option<f64> {
        if j < self.prefix.len() {
            return Some(self.prefix[j] * self.scale);
        }
        self.tail.as_ref().map(|t| t.weight(j + 1) * self.scale)
    }

    /// `w_j²` without the square root round trip.
    pub fn weight_squared(&self, j: usize) -> Option<f64> {
        let s2 = self.scale * self.scale;
        if j < self.prefix.len() {
            return Some(self.prefix[j] * self.prefix[j] * s2);
        }
        self.tail.as_ref().map(|t| t.squared(j + 1) * s2)
    }

    pub fn weights(&self, count: usize) -> LabResult<Vec<f64>> {
        (0..count)
            .map(|j| {
                self.weight(j).ok_or_else(|| {
                    LabError::Domain(format!(
                        "weight list has {} entries, {count} needed",
                        self.prefix.len()
                    ))
                })
            })
            .collect()
    }

    /// `sup_j w_j`, including the limit of the tail rule.
    pub fn supremum(&self) -> f64 {
        let mut sup = self.prefix.iter().copied().fold(0.0, f64::max);
        if let Some(t) = &self.tail {
            let start = t.offset.max(self.prefix.len() + 1);
            let end = t.stable_from().max(start + DEFAULT_HORIZON).min(start + 100_000);
            for i in start..=end {
                sup = sup.max(t.weight(i));
            }
            sup = sup.max(t.limit_squared().sqrt());
        }
        sup * self.scale
    }

    /// `lim w_j` if the rule has one.
    pub fn limit(&self) -> Option<f64> {
        self.tail.as_ref().map(|t| t.limit_squared().sqrt() * self.scale)
    }
}

/// A finite section of an operator, possibly a grid of `blocks × blocks`
/// equal-order pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    matrix: ComplexMatrix,
    order: usize,
    blocks: usize,
    window_margin: usize,
}

impl TruncatedOperator {
    pub fn new(matrix: ComplexMatrix, order: usize, blocks: usize) -> LabResult<Self> {
        if blocks == 0 || order == 0 || matrix.rows() != order * blocks || !matrix.is_square() {
            return Err(LabError::Dimension(format!(
                "{}x{} matrix is not a {blocks}x{blocks} grid of order-{order} blocks",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { matrix, order, blocks, window_margin: 0 })
    }

    pub fn single(matrix: ComplexMatrix) -> LabResult<Self> {
        let n = matrix.rows();
        Self::new(matrix, n, 1)
    }

    pub fn with_window_margin(mut self, margin: usize) -> LabResult<Self> {
        if margin >= self.order {
            return Err(LabError::Configuration(format!(
                "window margin {margin} must be below the truncation order {}",
                self.order
            )));
        }
        self.window_margin = margin;
        Ok(self)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn dim(&self) -> usize {
        self.order * self.blocks
    }

    pub fn window_margin(&self) -> usize {
        self.window_margin
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { matrix: self.matrix.scale_real(c), ..self.clone() }
    }

    /// Indices kept when the last `margin` indices of every block are dropped.
    pub fn interior_indices(&self, margin: usize) -> Vec<usize> {
        let keep = self.order.saturating_sub(margin);
        (0..self.blocks).flat_map(|b| (0..keep).map(move |i| b * self.order + i)).collect()
    }

    /// Block `(bi, bj)` of the grid.
    pub fn block(&self, bi: usize, bj: usize) -> ComplexMatrix {
        self.matrix.block(bi * self.order, bj * self.order, self.order, self.order)
    }
}

/// Backward shift section: `(j, j+1)` holds `w_j`.
pub fn materialize(w: &WeightSequence, n: usize) -> LabResult<TruncatedOperator> {
    if n < 2 {
        return Err(LabError::Configuration(format!("truncation order {n} must be >= 2")));
    }
    let ws = w.weights(n - 1)?;
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            Complex64::new(ws[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    TruncatedOperator::single(m)
}

/// `Σ_{j=0}^{k} (−1)^j C(k,j) (T*)^j T^j`.
pub fn defect_operator(t: &TruncatedOperator, k: usize) -> LabResult<ComplexMatrix> {
    weighted_gram_sum(t.matrix(), &alternating_binomials(k)?)
}

/// Same operator by Pascal's rule `D_k = D_{k−1} − T* D_{k−1} T`, `D_0 = I`.
pub fn defect_operator_recursive(t: &TruncatedOperator, k: usize) -> LabResult<ComplexMatrix> {
    if k == 0 {
        return Err(LabError::Configuration("defect order must be >= 1".into()));
    }
    let m = t.matrix();
    let adj = m.adjoint();
    let mut d = ComplexMatrix::identity(m.rows());
    for _ in 0..k {
        d = &d - &(&(&adj * &d) * m);
    }
    Ok(d)
}

fn alternating_binomials(k: usize) -> LabResult<Vec<f64>> {
    if k == 0 {
        return Err(LabError::Configuration("defect order must be >= 1".into()));
    }
    Ok((0..=k)
        .map(|j| {
            let c = binomial(k as u64, j as u64) as f64;
            if j % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect())
}

/// `Σ a_i (T*)^i T^i`.
fn weighted_gram_sum(m: &ComplexMatrix, coeffs: &[f64]) -> LabResult<ComplexMatrix> {
    if !m.is_square() {
        return Err(LabError::Dimension("operator must be square".into()));
    }
    let n = m.rows();
    let mut power = ComplexMatrix::identity(n);
    let mut acc = ComplexMatrix::zeros(n, n);
    for (i, &a) in coeffs.iter().enumerate() {
        if i > 0 {
            power = m * &power;
        }
        if a != 0.0 {
            acc = &acc + &(&power.adjoint() * &power).scale_real(a);
        }
    }
    Ok(acc)
}

/// `S = Σ_{j=1}^{n} (−1)^{j+1} C(n,j) (T*)^j T^j = I − D_n`.
pub fn sandwich_operator(t: &TruncatedOperator, n: usize) -> LabResult<ComplexMatrix> {
    let d = defect_operator(t, n)?;
    Ok(&ComplexMatrix::identity(d.rows()) - &d)
}

/// Per-order defect verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub orders: Vec<usize>,
    pub min_eigenvalues: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub verdicts: Vec<bool>,
    /// Effective dimension of the window used at each order.
    pub windows: Vec<usize>,
}

impl DefectReport {
    pub fn passes(&self) -> bool {
        self.verdicts.iter().all(|&v| v)
    }

    pub fn first_failure(&self) -> Option<usize> {
        self.verdicts.iter().position(|v| !v).map(|i| self.orders[i])
    }

    pub fn window(&self) -> usize {
        self.windows.iter().copied().min().unwrap_or(0)
    }
}

/// Defect verdicts for orders `1..=n`, each on the window that drops `k`
/// trailing indices per block.
pub fn defect_report(t: &TruncatedOperator, n: usize, tol: f64) -> LabResult<DefectReport> {
    if n == 0 {
        return Err(LabError::Configuration("hypercontractivity order must be >= 1".into()));
    }
    if t.order() <= 2 * n + 4 {
        return Err(LabError::Configuration(format!(
            "truncation order {} too small for order {n}: need N > {}",
            t.order(),
            2 * n + 4
        )));
    }
    let mut report = DefectReport {
        orders: Vec::new(),
        min_eigenvalues: Vec::new(),
        thresholds: Vec::new(),
        verdicts: Vec::new(),
        windows: Vec::new(),
    };
    let m = t.matrix();
    let adj = m.adjoint();
    let mut d = ComplexMatrix::identity(m.rows());
    for k in 1..=n {
        d = &d - &(&(&adj * &d) * m);
        let idx = t.interior_indices(k + t.window_margin());
        let v = psd_check(&d.principal(&idx), tol)?;
        report.orders.push(k);
        report.min_eigenvalues.push(v.min_eigenvalue);
        report.thresholds.push(v.threshold);
        report.verdicts.push(v.is_psd);
        report.windows.push(idx.len());
    }
    Ok(report)
}

pub fn hypercontractivity_report(w: &WeightSequence, n: usize, order: usize, tol: f64) -> LabResult<DefectReport> {
    if order <= 2 * n + 4 {
        return Err(LabError::Configuration(format!("N = {order} must exceed 2n + 4 = {}", 2 * n + 4)));
    }
    defect_report(&materialize(w, order)?, n, tol)
}

/// Result of scanning `w_{j+1}/w_j ≤ (1+j)/(n+j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AglerBound {
    pub first_violation: Option<usize>,
    pub scanned: usize,
    /// `sup_j w_{j+1}/w_j` over the scan (recorded side condition).
    pub sup_ratio: f64,
    /// `w_H^{1/H}` at the end of the scan when space weights were given
    /// (recorded side condition, should tend to 1).
    pub root_test: Option<f64>,
}

fn scan_ratios(ratios: impl Iterator<Item = f64>, n: usize, tol: f64) -> (Option<usize>, usize, f64) {
    let mut first = None;
    let mut sup = 0.0f64;
    let mut count = 0;
    for (j, r) in ratios.enumerate() {
        sup = sup.max(r);
        let bound = (1.0 + j as f64) / (n as f64 + j as f64);
        if first.is_none() && r > bound + tol {
            first = Some(j);
        }
        count += 1;
    }
    (first, count, sup)
}

/// Scans space weights `w_0, w_1, …` (norm `Σ |a_j|² w_j`) for the first
/// `j < horizon` with `w_{j+1}/w_j > (1+j)/(n+j) + tol`.
pub fn agler_weight_bound(space_weights: &[f64], n: usize, horizon: usize, tol: f64) -> LabResult<AglerBound> {
    if n == 0 {
        return Err(LabError::Configuration("order must be >= 1".into()));
    }
    if let Some(j) = space_weights.iter().position(|w| !(*w > 0.0)) {
        return Err(LabError::Domain(format!("space weight {j} is not positive")));
    }
    let h = horizon.min(space_weights.len().saturating_sub(1));
    let (first_violation, scanned, sup_ratio) =
        scan_ratios((0..h).map(|j| space_weights[j + 1] / space_weights[j]), n, tol);
    let root_test = (h > 0).then(|| space_weights[h].powf(1.0 / h as f64));
    Ok(AglerBound { first_violation, scanned, sup_ratio, root_test })
}

/// Same scan for a backward shift, whose weights satisfy `w_j² = v_{j+1}/v_j`
/// for the space weights `v`.
pub fn agler_bound_for_shift(w: &WeightSequence, n: usize, horizon: usize, tol: f64) -> LabResult<AglerBound> {
    if n == 0 {
        return Err(LabError::Configuration("order must be >= 1".into()));
    }
    let ws = w.weights(horizon)?;
    let (first_violation, scanned, sup_ratio) = scan_ratios(ws.iter().map(|x| x * x), n, tol);
    let log_v: f64 = ws.iter().map(|x| 2.0 * x.ln()).sum();
    let root_test = (horizon > 0).then(|| (log_v / horizon as f64).exp());
    Ok(AglerBound { first_violation, scanned, sup_ratio, root_test })
}

/// Space weights `v_0 = 1, v_{j+1} = v_j w_j²` of a backward shift.
pub fn space_weights_from_shift(w: &WeightSequence, len: usize) -> LabResult<Vec<f64>> {
    let ws = w.weights(len.saturating_sub(1))?;
    let mut out = Vec::with_capacity(len);
    let mut v = 1.0;
    out.push(v);
    for x in ws {
        v *= x * x;
        out.push(v);
    }
    out.truncate(len);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShieldsVerdict {
    SimilarConsistent,
    NotSimilar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShieldsReport {
    pub horizons: Vec<usize>,
    pub sup_ratio_at_horizons: Vec<f64>,
    pub inf_ratio_at_horizons: Vec<f64>,
    /// Values at the base horizon.
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub verdict: ShieldsVerdict,
}

/// `(sup, inf)` of `Π_{l=i}^{j} a_l/b_l` over `0 ≤ i ≤ j < horizon`.
pub fn partial_product_extremes(a: &WeightSequence, b: &WeightSequence, horizon: usize) -> LabResult<(f64, f64)> {
    if horizon == 0 {
        return Err(LabError::Configuration("horizon must be positive".into()));
    }
    let mut best_max = f64::NEG_INFINITY;
    let mut best_min = f64::INFINITY;
    let mut run_max = 0.0f64;
    let mut run_min = 0.0f64;
    for l in 0..horizon {
        let (x, y) = pair(a, b, l)?;
        let s = x.ln() - y.ln();
        run_max = s + run_max.max(0.0);
        run_min = s + run_min.min(0.0);
        best_max = best_max.max(run_max);
        best_min = best_min.min(run_min);
    }
    Ok((best_max.exp(), best_min.exp()))
}

fn pair(a: &WeightSequence, b: &WeightSequence, l: usize) -> LabResult<(f64, f64)> {
    match (a.weight(l), b.weight(l)) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(LabError::Domain(format!("weight sequence ends before index {l}"))),
    }
}

/// `Π_{l=i}^{j} a_l/b_l`, summed in log space.
pub fn partial_ratio(a: &WeightSequence, b: &WeightSequence, i: usize, j: usize) -> LabResult<f64> {
    let mut s = 0.0;
    for l in i..=j {
        let (x, y) = pair(a, b, l)?;
        s += x.ln() - y.ln();
    }
    Ok(s.exp())
}

/// Necessary-condition screen for similarity of two weighted shifts.
///
/// Evaluated at horizons `H, 2H, 4H`; `NotSimilar` when the sup at `4H`
/// exceeds the divergence threshold and grew strictly across the three
/// horizons (or the inf fell below its reciprocal while strictly shrinking).
pub fn shields_similarity(a: &WeightSequence, b: &WeightSequence, horizon: usize) -> LabResult<ShieldsReport> {
    if horizon < 2 {
        return Err(LabError::Configuration("horizon must be >= 2".into()));
    }
    let horizons = vec![horizon, 2 * horizon, 4 * horizon];
    let mut sups = Vec::new();
    let mut infs = Vec::new();
    for &h in &horizons {
        let (s, i) = partial_product_extremes(a, b, h)?;
        sups.push(s);
        infs.push(i);
    }
    let grows = sups.windows(2).all(|p| p[1] > p[0]);
    let shrinks = infs.windows(2).all(|p| p[1] < p[0]);
    let diverges = (sups[2] > DIVERGENCE_THRESHOLD && grows) || (infs[2] < 1.0 / DIVERGENCE_THRESHOLD && shrinks);
    Ok(ShieldsReport {
        horizons,
        sup_ratio: sups[0],
        inf_ratio: infs[0],
        sup_ratio_at_horizons: sups,
        inf_ratio_at_horizons: infs,
        verdict: if diverges { ShieldsVerdict::NotSimilar } else { ShieldsVerdict::SimilarConsistent },
    })
}

/// PSD verdict for `Σ a_i (T*)^i T^i` on the window dropping `k` indices.
pub fn kernel_defect(t: &TruncatedOperator, inv_kernel_coeffs: &[f64], tol: f64) -> LabResult<PsdVerdict> {
    match inv_kernel_coeffs.first() {
        None => return Err(LabError::Domain("empty inverse-kernel coefficient list".into())),
        Some(&a0) if a0 != 1.0 => {
            return Err(LabError::Domain(format!("inverse kernel must have constant term 1, got {a0}")))
        }
        _ => {}
    }
    let k = inv_kernel_coeffs.len() - 1;
    if k + t.window_margin() >= t.order() {
        return Err(LabError::Configuration("window is empty for this polynomial degree".into()));
    }
    let m = weighted_gram_sum(t.matrix(), inv_kernel_coeffs)?;
    psd_check(&m.principal(&t.interior_indices(k + t.window_margin())), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-10;

    fn counterexample_t2() -> WeightSequence {
        let tail = RationalTail {
            numerator: Polynomial(vec![0, 1]),
            denominator: Polynomial(vec![1, 1]),
            offset: 2,
        };
        WeightSequence::new(vec![(13.0f64 / 25.0).sqrt()], Some(tail)).unwrap()
    }

    fn re(z: Complex64) -> f64 {
        assert!(z.im.abs() < 1e-15);
        z.re
    }

    #[test]
    fn unweighted_shift_section() {
        let t = materialize(&WeightSequence::hardy(), 3).unwrap();
        let expect = ComplexMatrix::from_real_rows(&[vec![0., 1., 0.], vec![0., 0., 1.], vec![0., 0., 0.]]).unwrap();
        assert_eq!(t.matrix(), &expect);
    }

    #[test]
    fn bergman_section_weights() {
        let t = materialize(&WeightSequence::bergman(), 3).unwrap();
        assert!((re(t.matrix().get(0, 1)) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((re(t.matrix().get(1, 2)) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn counterexample_section_weights() {
        let t = materialize(&counterexample_t2(), 4).unwrap();
        let m = t.matrix();
        assert!((re(m.get(0, 1)) - (13.0f64 / 25.0).sqrt()).abs() < 1e-15);
        assert!((re(m.get(1, 2)) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((re(m.get(2, 3)) - (3.0f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn materialize_rejects_tiny_and_short() {
        assert!(matches!(materialize(&WeightSequence::hardy(), 1), Err(LabError::Configuration(_))));
        let short = WeightSequence::explicit(vec![1.0, 1.0]).unwrap();
        assert!(matches!(materialize(&short, 8), Err(LabError::Domain(_))));
    }

    #[test]
    fn nonpositive_weights_are_domain_errors() {
        assert!(matches!(WeightSequence::explicit(vec![1.0, 0.0]), Err(LabError::Domain(_))));
        assert!(matches!(WeightSequence::explicit(vec![-0.5]), Err(LabError::Domain(_))));
        let bad_tail = RationalTail { numerator: Polynomial(vec![-3, 1]), denominator: Polynomial(vec![1]), offset: 1 };
        assert!(matches!(WeightSequence::new(vec![], Some(bad_tail)), Err(LabError::Domain(_))));
        let pole = RationalTail { numerator: Polynomial(vec![1]), denominator: Polynomial(vec![-4, 1]), offset: 1 };
        assert!(matches!(WeightSequence::new(vec![], Some(pole)), Err(LabError::Domain(_))));
        let growing = RationalTail { numerator: Polynomial(vec![0, 0, 1]), denominator: Polynomial(vec![1, 1]), offset: 1 };
        assert!(WeightSequence::new(vec![], Some(growing)).is_err());
    }

    #[test]
    fn first_order_defect_is_i_minus_tstar_t() {
        let t = materialize(&WeightSequence::bergman(), 10).unwrap();
        let d1 = defect_operator(&t, 1).unwrap();
        let direct = &ComplexMatrix::identity(10) - &(&t.matrix().adjoint() * t.matrix());
        assert!((&d1 - &direct).max_abs_entry() < 1e-15);
    }

    #[test]
    fn hardy_contraction_defect_is_rank_one() {
        let t = materialize(&WeightSequence::hardy(), 16).unwrap();
        let d = defect_operator(&t, 1).unwrap();
        let v = psd_check(&d, TOL).unwrap();
        assert!(v.is_psd);
        assert!(v.min_eigenvalue.abs() < 1e-15);
        assert!((re(d.get(0, 0)) - 1.0).abs() < 1e-15);
        assert!(d.max_abs_entry() <= 1.0);
    }

    #[test]
    fn szego_defect_is_projection_on_e0() {
        for n in 1..=3u32 {
            let t = materialize(&WeightSequence::szego(n).unwrap(), 32).unwrap();
            let d = defect_operator(&t, n as usize).unwrap();
            let idx = t.interior_indices(n as usize);
            let w = d.principal(&idx);
            let mut e0 = ComplexMatrix::zeros(w.rows(), w.rows());
            e0 = &e0 + &ComplexMatrix::from_fn(w.rows(), w.rows(), |i, j| {
                Complex64::new(if i == 0 && j == 0 { 1.0 } else { 0.0 }, 0.0)
            });
            assert!((&w - &e0).max_abs_entry() < 1e-12, "n = {n}");
            // I - D_n acts as the identity on e_i, i >= 1
            let s = sandwich_operator(&t, n as usize).unwrap();
            for i in 1..idx.len() {
                assert!((re(s.get(i, i)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn report_for_bergman_and_counterexample() {
        let r = hypercontractivity_report(&WeightSequence::bergman(), 2, 32, TOL).unwrap();
        assert!(r.passes());
        assert_eq!(r.orders, vec![1, 2]);
        assert_eq!(r.windows, vec![31, 30]);
        let r = hypercontractivity_report(&counterexample_t2(), 2, 32, TOL).unwrap();
        assert!(r.verdicts[0]);
        assert!(!r.verdicts[1]);
        assert!((r.min_eigenvalues[1] + 1.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn report_window_too_small() {
        assert!(matches!(
            hypercontractivity_report(&WeightSequence::bergman(), 2, 8, TOL),
            Err(LabError::Configuration(_))
        ));
    }

    #[test]
    fn first_order_verdict_tracks_weight_bound() {
        let ok = WeightSequence::explicit(vec![0.3, 1.0, 0.9, 0.99, 1.0, 0.2, 0.5, 0.7, 0.8, 0.1, 0.4]).unwrap();
        assert!(hypercontractivity_report(&ok, 1, 12, TOL).unwrap().passes());
        let bad = WeightSequence::explicit(vec![0.3, 1.0, 1.01, 0.99, 1.0, 0.2, 0.5, 0.7, 0.8, 0.1, 0.4]).unwrap();
        assert!(!hypercontractivity_report(&bad, 1, 12, TOL).unwrap().passes());
    }

    #[test]
    fn agler_bound_equality_case() {
        for n in 1..=4u64 {
            let space: Vec<f64> = (0..=100u64).map(|j| 1.0 / binomial(n + j - 1, j) as f64).collect();
            let r = agler_weight_bound(&space, n as usize, 100, 1e-12).unwrap();
            assert_eq!(r.first_violation, None, "n = {n}");
            let r = agler_bound_for_shift(&WeightSequence::szego(n as u32).unwrap(), n as usize, 100, 1e-12).unwrap();
            assert_eq!(r.first_violation, None);
        }
    }

    #[test]
    fn agler_bound_flags_counterexample() {
        let r = agler_bound_for_shift(&counterexample_t2(), 2, 100, 1e-12).unwrap();
        assert_eq!(r.first_violation, Some(0));
        let space = space_weights_from_shift(&counterexample_t2(), 101).unwrap();
        assert!((space[1] - 13.0 / 25.0).abs() < 1e-15);
        assert_eq!(agler_weight_bound(&space, 2, 100, 1e-12).unwrap().first_violation, Some(0));
    }

    #[test]
    fn agler_bound_hardy() {
        let r = agler_weight_bound(&vec![1.0; 51], 1, 50, 1e-12).unwrap();
        assert_eq!(r.first_violation, None);
        assert_eq!(r.scanned, 50);
        assert!(agler_weight_bound(&[1.0, 0.0], 1, 1, 1e-12).is_err());
    }

    #[test]
    fn shields_identical_sequences() {
        let a = WeightSequence::bergman();
        let r = shields_similarity(&a, &a, 64).unwrap();
        assert_eq!(r.sup_ratio, 1.0);
        assert_eq!(r.inf_ratio, 1.0);
        assert_eq!(r.verdict, ShieldsVerdict::SimilarConsistent);
    }

    #[test]
    fn shields_hardy_vs_bergman_telescopes() {
        let a = WeightSequence::hardy();
        let b = WeightSequence::bergman();
        let r = partial_ratio(&a, &b, 0, 98).unwrap();
        assert!((r - 10.0).abs() < 1e-9);
        // closed form sqrt((j+2)/(i+1))
        let r = partial_ratio(&a, &b, 3, 14).unwrap();
        assert!((r - (16.0f64 / 4.0).sqrt()).abs() < 1e-12);
        let (sup, inf) = partial_product_extremes(&a, &b, 99).unwrap();
        assert!((sup - 10.0).abs() < 1e-9);
        assert!((inf - (100.0f64 / 99.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shields_single_factor_perturbation() {
        let a = WeightSequence::bergman();
        let b = a.with_weight(0, 0.5).unwrap();
        assert!((b.weight(0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(b.weight(7), a.weight(7));
        let r = shields_similarity(&b, &a, 256).unwrap();
        assert_eq!(r.verdict, ShieldsVerdict::SimilarConsistent);
        assert!((r.sup_ratio - 1.0).abs() < 1e-12);
        assert!((r.inf_ratio - 0.5 / 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_defect_examples() {
        let hardy = materialize(&WeightSequence::hardy(), 24).unwrap();
        assert!(kernel_defect(&hardy, &[1.0, -1.0], TOL).unwrap().is_psd);
        let bergman = materialize(&WeightSequence::bergman(), 24).unwrap();
        assert!(kernel_defect(&bergman, &[1.0, -2.0, 1.0], TOL).unwrap().is_psd);
        let t2 = materialize(&counterexample_t2(), 24).unwrap();
        assert!(!kernel_defect(&t2, &[1.0, -2.0, 1.0], TOL).unwrap().is_psd);
        assert!(matches!(kernel_defect(&t2, &[], TOL), Err(LabError::Domain(_))));
        assert!(matches!(kernel_defect(&t2, &[2.0, -1.0], TOL), Err(LabError::Domain(_))));
    }

    #[test]
    fn supremum_includes_tail_limit() {
        assert_eq!(WeightSequence::hardy().supremum(), 1.0);
        let s = WeightSequence::szego(3).unwrap().supremum();
        assert!((s - 1.0).abs() < 1e-15);
        let t = counterexample_t2().scaled(0.5).unwrap();
        assert!((t.supremum() - 0.5).abs() < 1e-15);
        assert_eq!(WeightSequence::explicit(vec![0.2, 0.7]).unwrap().supremum(), 0.7);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 4), 15);
        assert_eq!(binomial(40, 20), 137_846_528_820);
        assert_eq!(binomial(3, 5), 0);
    }
}
