//! Block operators on `H ⊕ … ⊕ H` built from shifts, diagonals and explicit
//! matrices: contraction tests, the two-block closed forms, holomorphic
//! frames and reducibility detectors.

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{LabError, LabResult};
use crate::matrix::{psd_check, ComplexMatrix, PsdVerdict, MAX_CONDITION};
use crate::random::uniform;
use crate::shifts::{binomial, defect_report, materialize, sandwich_operator, defect_operator, TruncatedOperator, WeightSequence};

pub const FRAME_RADIUS_CAP: f64 = 0.95;
pub const FRAME_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Zero,
    Shift(WeightSequence),
    /// Diagonal with the listed leading entries, then `fill` forever.
    Diagonal { entries: Vec<Complex64>, fill: Complex64 },
    Explicit(ComplexMatrix),
}

impl Block {
    pub fn real_diagonal(entries: &[f64], fill: f64) -> Self {
        Block::Diagonal {
            entries: entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            fill: Complex64::new(fill, 0.0),
        }
    }

    pub fn scalar(c: f64) -> Self {
        Self::real_diagonal(&[], c)
    }

    pub fn matrix(&self, order: usize) -> LabResult<ComplexMatrix> {
        match self {
            Block::Zero => Ok(ComplexMatrix::zeros(order, order)),
            Block::Shift(w) => Ok(materialize(w, order)?.matrix().clone()),
            Block::Diagonal { entries, fill } => Ok(ComplexMatrix::from_diagonal(
                &(0..order).map(|i| entries.get(i).copied().unwrap_or(*fill)).collect::<Vec<_>>(),
            )),
            Block::Explicit(m) => {
                if m.rows() != order || m.cols() != order {
                    return Err(LabError::Configuration(format!(
                        "explicit block is {}x{}, expected {order}x{order}",
                        m.rows(),
                        m.cols()
                    )));
                }
                Ok(m.clone())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Block::Zero => true,
            Block::Diagonal { entries, fill } => *fill == Complex64::new(0.0, 0.0) && entries.iter().all(|z| z.norm() == 0.0),
            Block::Explicit(m) => m.max_abs_entry() == 0.0,
            Block::Shift(_) => false,
        }
    }

    /// Truncated spectral norm, and the analytic norm when the block has a rule.
    pub fn norms(&self, order: usize) -> LabResult<(f64, f64)> {
        let truncated = self.matrix(order)?.spectral_norm();
        let analytic = match self {
            Block::Zero => 0.0,
            Block::Shift(w) => w.supremum(),
            Block::Diagonal { entries, fill } => entries.iter().map(|z| z.norm()).fold(fill.norm(), f64::max),
            Block::Explicit(_) => truncated,
        };
        Ok((truncated, analytic))
    }

    /// `max(truncated, analytic)`: finite sections underestimate shift norms.
    pub fn norm(&self, order: usize) -> LabResult<f64> {
        let (t, a) = self.norms(order)?;
        Ok(t.max(a))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    blocks: Vec<Vec<Block>>,
    order: usize,
    upper_triangular: bool,
}

impl BlockOperator {
    pub fn new(blocks: Vec<Vec<Block>>, order: usize, upper_triangular: bool) -> LabResult<Self> {
        let m = blocks.len();
        if m == 0 || blocks.iter().any(|row| row.len() != m) {
            return Err(LabError::Configuration("block grid must be square and nonempty".into()));
        }
        if order < 2 {
            return Err(LabError::Configuration(format!("block order {order} must be >= 2")));
        }
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Block::Explicit(mat) = b {
                    if mat.rows() != order || mat.cols() != order {
                        return Err(LabError::Configuration(format!(
                            "block ({i},{j}) is {}x{}, expected {order}x{order}",
                            mat.rows(),
                            mat.cols()
                        )));
                    }
                }
                if upper_triangular && j < i && !b.is_zero() {
                    return Err(LabError::Configuration(format!(
                        "block ({i},{j}) lies below the diagonal of an upper-triangular operator"
                    )));
                }
            }
        }
        Ok(Self { blocks, order, upper_triangular })
    }

    /// `[[T1, T12], [0, T2]]`.
    pub fn upper_2x2(t1: Block, t12: Block, t2: Block, order: usize) -> LabResult<Self> {
        Self::new(vec![vec![t1, t12], vec![Block::Zero, t2]], order, true)
    }

    pub fn diagonal(diag: Vec<Block>, order: usize) -> LabResult<Self> {
        let m = diag.len();
        let blocks = diag
            .into_iter()
            .enumerate()
            .map(|(i, b)| (0..m).map(|j| if i == j { b.clone() } else { Block::Zero }).collect())
            .collect();
        Self::new(blocks, order, true)
    }

    pub fn grid(&self) -> usize {
        self.blocks.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.upper_triangular
    }

    pub fn block(&self, i: usize, j: usize) -> &Block {
        &self.blocks[i][j]
    }

    pub fn with_order(&self, order: usize) -> LabResult<Self> {
        Self::new(self.blocks.clone(), order, self.upper_triangular)
    }

    fn require_2x2(&self, what: &str) -> LabResult<()> {
        if self.grid() != 2 || !self.upper_triangular {
            return Err(LabError::Configuration(format!("{what} needs an upper-triangular 2x2 block operator")));
        }
        Ok(())
    }
}

pub fn assemble(b: &BlockOperator) -> LabResult<TruncatedOperator> {
    let rows = b
        .blocks
        .iter()
        .map(|row| row.iter().map(|blk| blk.matrix(b.order)).collect::<LabResult<Vec<_>>>())
        .collect::<LabResult<Vec<_>>>()?;
    TruncatedOperator::new(ComplexMatrix::from_blocks(&rows)?, b.order, b.grid())
}

/// PSD verdict of `I − T*T` on the window dropping one trailing index per block.
pub fn contraction_check(t: &TruncatedOperator, tol: f64) -> LabResult<PsdVerdict> {
    let m = t.matrix();
    let d = &ComplexMatrix::identity(m.rows()) - &(&m.adjoint() * m);
    psd_check(&d.principal(&t.interior_indices(1 + t.window_margin())), tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    pub row: usize,
    pub col: usize,
    pub contraction: bool,
    pub norm: f64,
    pub unit_norm: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionScan {
    pub assembled: PsdVerdict,
    pub blocks: Vec<BlockReport>,
    /// Each block column `[T_1j; …; T_mj]` is `T` restricted to the j-th summand.
    pub column_contractions: Vec<bool>,
    pub row_square_sums: Vec<f64>,
    pub column_square_sums: Vec<f64>,
    /// Blocks failing individually although the assembled operator contracts.
    pub block_violations: Vec<(usize, usize)>,
    /// Row or column square-norm sums above `1 + tol`.
    pub sum_violations: Vec<String>,
}

pub fn blockwise_contraction_scan(b: &BlockOperator, tol: f64) -> LabResult<ContractionScan> {
    let t = assemble(b)?;
    let assembled = contraction_check(&t, tol)?;
    let m = b.grid();
    let mut blocks = Vec::new();
    let mut norms = vec![vec![0.0; m]; m];
    let mut block_violations = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let blk = TruncatedOperator::single(b.block(i, j).matrix(b.order)?)?;
            let contraction = contraction_check(&blk, tol)?.is_psd;
            let norm = b.block(i, j).norm(b.order)?;
            norms[i][j] = norm;
            if assembled.is_psd && !contraction {
                block_violations.push((i, j));
            }
            blocks.push(BlockReport { row: i, col: j, contraction, norm, unit_norm: (norm - 1.0).abs() <= tol });
        }
    }
    let mut column_contractions = Vec::new();
    for j in 0..m {
        let n = b.order;
        let stacked = ComplexMatrix::from_fn(m * n, n, |r, c| t.matrix().get(r, j * n + c));
        let d = &ComplexMatrix::identity(b.order) - &(&stacked.adjoint() * &stacked);
        let idx: Vec<usize> = (0..b.order - 1 - t.window_margin()).collect();
        column_contractions.push(psd_check(&d.principal(&idx), tol)?.is_psd);
    }
    let row_square_sums: Vec<f64> = (0..m).map(|i| norms[i].iter().map(|x| x * x).sum()).collect();
    let column_square_sums: Vec<f64> = (0..m).map(|j| (0..m).map(|i| norms[i][j].powi(2)).sum()).collect();
    let mut sum_violations = Vec::new();
    for (i, s) in row_square_sums.iter().enumerate() {
        if *s > 1.0 + tol {
            sum_violations.push(format!("row {i}: sum of squared block norms {s:.6} > 1"));
        }
    }
    for (j, s) in column_square_sums.iter().enumerate() {
        if *s > 1.0 + tol {
            sum_violations.push(format!("column {j}: sum of squared block norms {s:.6} > 1"));
        }
    }
    Ok(ContractionScan {
        assembled,
        blocks,
        column_contractions,
        row_square_sums,
        column_square_sums,
        block_violations,
        sum_violations,
    })
}

/// `‖T1‖² ≤ 1/2` and `‖T12‖² ≤ (1 − ‖T2‖²)/2`: enough for `T` to contract.
pub fn contraction_sufficient(b: &BlockOperator, tol: f64) -> LabResult<bool> {
    b.require_2x2("contraction_sufficient")?;
    let n1 = b.block(0, 0).norm(b.order)?;
    let n12 = b.block(0, 1).norm(b.order)?;
    let n2 = b.block(1, 1).norm(b.order)?;
    Ok(n1 * n1 <= 0.5 + tol && n12 * n12 <= (1.0 - n2 * n2) / 2.0 + tol)
}

/// Two-block example: `T1 e_i = a_i e_{i−1}`, `T2 e_j = b_j e_{j−1}`,
/// `T12 e_j = d_{j+1} e_j` for `j < k`. Slices start at index 1
/// (`a[0] = a_1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Ex48Instance {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
}

impl Ex48Instance {
    /// Smallest margin across the inequality families; negative means violated.
    pub fn slack(&self) -> f64 {
        let mut s = f64::INFINITY;
        let bm = |i: usize| if i == 0 { 0.0 } else { self.b[i - 1] };
        for (i, &d) in self.d.iter().enumerate() {
            // d_{i+1}² ≤ (1 − a_{i+1}²)(1 − b_i²), b_0 = 0
            s = s.min((1.0 - self.a[i].powi(2)) * (1.0 - bm(i).powi(2)) - d * d);
        }
        for &a in &self.a {
            s = s.min(1.0 - a * a);
        }
        for &b in &self.b {
            s = s.min(1.0 - b * b);
        }
        s
    }

    fn check(&self) -> LabResult<()> {
        let k = self.d.len();
        if self.a.len() < k || self.b.len() + 1 < k {
            return Err(LabError::Configuration(format!(
                "need at least {k} weights a and {} weights b",
                k.saturating_sub(1)
            )));
        }
        if let Some(i) = self.a[..k].iter().position(|&a| a == 1.0) {
            return Err(LabError::Singularity(format!("a_{} = 1 lies in the excluded case", i + 1)));
        }
        Ok(())
    }

    pub fn closed_form(&self, tol: f64) -> LabResult<bool> {
        self.check()?;
        Ok(self.slack() >= -tol)
    }

    /// Block operator of order `a.len() + 1` (so every listed weight is used).
    pub fn block_operator(&self) -> LabResult<BlockOperator> {
        let n = self.a.len() + 1;
        if self.b.len() + 1 != n || self.d.len() > n {
            return Err(LabError::Configuration("a and b must have equal length >= k".into()));
        }
        let shift = |w: &[f64]| {
            Block::Explicit(ComplexMatrix::from_fn(n, n, |i, j| {
                Complex64::new(if j == i + 1 { w[i] } else { 0.0 }, 0.0)
            }))
        };
        BlockOperator::upper_2x2(shift(&self.a), Block::real_diagonal(&self.d, 0.0), shift(&self.b), n)
    }
}

/// Boundary band around the closed-form threshold where either verdict is accepted.
pub const EX48_BAND: f64 = 1e-8;

/// Random instance of order `order`: `k ≤ k_max`, `a_i ∈ U[0, 0.95]`,
/// `b_j ∈ U[0, 1]` (occasionally above 1 for `j ≥ k`), and `d_i` a
/// random multiple in `[0.5, 1.5]` of its bound.
pub fn random_ex48_instance(rng: &mut impl rand::Rng, order: usize, k_max: usize) -> Ex48Instance {
    let len = order - 1;
    let k = rng.random_range(0..=k_max.min(len - 1));
    let a: Vec<f64> = (0..len).map(|_| uniform(rng, 0.0, 0.95)).collect();
    let b: Vec<f64> = (0..len)
        .map(|j| {
            // b[j] is b_{j+1}
            if j + 1 >= k && rng.random::<f64>() < 0.1 {
                uniform(rng, 1.0, 1.2)
            } else {
                uniform(rng, 0.0, 1.0)
            }
        })
        .collect();
    let d = (0..k)
        .map(|i| {
            let b_prev = if i == 0 { 0.0 } else { b[i - 1] };
            let bound = ((1.0 - a[i] * a[i]) * (1.0 - b_prev * b_prev)).max(0.0);
            uniform(rng, 0.5, 1.5) * bound.sqrt()
        })
        .collect();
    Ex48Instance { a, b, d }
}

impl Ex48Instance {
    /// The weights seen by the interior window of the assembled section
    /// (the last `a` and `b` fall outside it).
    pub fn windowed(&self) -> Ex48Instance {
        let keep = self.a.len().saturating_sub(1);
        Ex48Instance { a: self.a[..keep].to_vec(), b: self.b[..keep].to_vec(), d: self.d.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ex48Trial {
    pub k: usize,
    pub slack: f64,
    pub closed_form: bool,
    pub oracle: bool,
    pub oracle_min_eigenvalue: f64,
    /// `None` when `I − T1*T1` is too ill-conditioned for the comparison.
    pub schur: Option<bool>,
    pub in_band: bool,
}

impl Ex48Trial {
    pub fn agrees(&self) -> bool {
        self.in_band || self.closed_form == self.oracle
    }

    pub fn schur_agrees(&self) -> bool {
        self.in_band || self.schur.is_none_or(|s| s == self.oracle)
    }
}

/// Closed form, eigenvalue oracle and Schur form on one instance.
pub fn ex48_trial(inst: &Ex48Instance, schur_cond_cap: f64, tol: f64) -> LabResult<Ex48Trial> {
    let view = inst.windowed();
    let slack = view.slack();
    let closed_form = view.closed_form(0.0)?;
    let t = assemble(&inst.block_operator()?)?;
    let verdict = contraction_check(&t, tol)?;
    let part = |i, j| TruncatedOperator::single(t.block(i, j));
    let (t1, t12, t2) = (part(0, 0)?, part(0, 1)?, part(1, 1)?);
    let id = ComplexMatrix::identity(t1.dim());
    let cond = (&id - &(&t1.matrix().adjoint() * t1.matrix())).condition_number()?;
    let schur = if cond < schur_cond_cap {
        Some(ex48_schur_condition(&t1, &t12, &t2, tol)?.is_psd)
    } else {
        None
    };
    Ok(Ex48Trial {
        k: inst.d.len(),
        slack,
        closed_form,
        oracle: verdict.is_psd,
        oracle_min_eigenvalue: verdict.min_eigenvalue,
        schur,
        in_band: slack.abs() < EX48_BAND,
    })
}

pub fn ex48_closed_form(a: &[f64], b: &[f64], d: &[f64], tol: f64) -> LabResult<bool> {
    Ex48Instance { a: a.to_vec(), b: b.to_vec(), d: d.to_vec() }.closed_form(tol)
}

/// `(I − T2*T2) − T12*[I + T1 (I − T1*T1)⁻¹ T1*] T12` on the second block's window.
pub fn ex48_schur_condition(
    t1: &TruncatedOperator,
    t12: &TruncatedOperator,
    t2: &TruncatedOperator,
    tol: f64,
) -> LabResult<PsdVerdict> {
    let n = t1.dim();
    if t12.dim() != n || t2.dim() != n {
        return Err(LabError::Dimension("blocks must share one order".into()));
    }
    let id = ComplexMatrix::identity(n);
    let (a1, a12, a2) = (t1.matrix(), t12.matrix(), t2.matrix());
    let defect1 = &id - &(&a1.adjoint() * a1);
    let cond = defect1.condition_number()?;
    if !(cond < MAX_CONDITION) {
        return Err(LabError::Singularity(format!("I − T1*T1 has condition number {cond:.3e}")));
    }
    let inner = &id + &(a1 * &defect1.solve(&a1.adjoint())?);
    let schur = &(&id - &(&a2.adjoint() * a2)) - &(&(&a12.adjoint() * &inner) * a12);
    let idx: Vec<usize> = (0..n - 1).collect();
    psd_check(&schur.hermitian_part().principal(&idx), tol)
}

/// Kernel section `t(ω)` of a backward shift: `c_0 = 1`, `c_{i+1} = ω c_i / w_i`.
pub fn kernel_section(w: &WeightSequence, omega: Complex64, len: usize) -> LabResult<Vec<Complex64>> {
    let ws = w.weights(len.saturating_sub(1))?;
    let mut out = Vec::with_capacity(len);
    let mut c = Complex64::new(1.0, 0.0);
    out.push(c);
    for wi in ws {
        c = c * omega / wi;
        out.push(c);
    }
    out.truncate(len);
    Ok(out)
}

fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    // ⟨x, y⟩, linear in x
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn norm_sq(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameGram {
    /// `h_{ij} = ⟨γ_j, γ_i⟩`.
    pub gram: ComplexMatrix,
    pub det: f64,
    pub residual: f64,
    pub t1: Vec<Complex64>,
    pub t2: Vec<Complex64>,
    pub x: Vec<Complex64>,
}

/// Frame `γ1 = (t1, 0)`, `γ2 = (x, t2)` with `(T1 − ω) x = −T12 t2`, and its gram matrix.
pub fn frame_solver(b: &BlockOperator, omega: Complex64) -> LabResult<FrameGram> {
    b.require_2x2("frame_solver")?;
    if omega.norm() > FRAME_RADIUS_CAP {
        return Err(LabError::Domain(format!("|ω| = {} exceeds the frame cap {FRAME_RADIUS_CAP}", omega.norm())));
    }
    let (w1, w2) = match (b.block(0, 0), b.block(1, 1)) {
        (Block::Shift(w1), Block::Shift(w2)) => (w1, w2),
        _ => return Err(LabError::Configuration("frame_solver needs backward shifts on the diagonal".into())),
    };
    let n = b.order;
    let t1 = kernel_section(w1, omega, n)?;
    let t2 = kernel_section(w2, omega, n)?;
    let y = b.block(0, 1).matrix(n)?.mul_vec(&t2);
    let ws = w1.weights(n - 1)?;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n - 1 {
        x[i + 1] = (omega * x[i] - y[i]) / ws[i];
    }
    let y_norm = norm_sq(&y).sqrt();
    let residual = (y[n - 1] - omega * x[n - 1]).norm();
    if residual > FRAME_RESIDUAL_TOL * y_norm.max(f64::MIN_POSITIVE) && y_norm > 0.0 {
        return Err(LabError::Truncation(format!(
            "frame residual {residual:.3e} at |ω| = {} exceeds {FRAME_RESIDUAL_TOL:e}·‖T12 t2‖; increase N",
            omega.norm()
        )));
    }
    let h11 = norm_sq(&t1);
    let h22 = norm_sq(&x) + norm_sq(&t2);
    let h12 = dot(&x, &t1);
    let gram = ComplexMatrix::new(2, 2, vec![Complex64::new(h11, 0.0), h12, h12.conj(), Complex64::new(h22, 0.0)])?;
    let det = h11 * h22 - h12.norm_sqr();
    Ok(FrameGram { gram, det, residual, t1, t2, x })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector {
    UnitNormBlock,
    Cascade,
    RankOneDefect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reducibility {
    Reducible,
    Undetermined,
}

impl Serialize for Reducibility {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Reducibility::Reducible => s.serialize_bool(true),
            Reducibility::Undetermined => s.serialize_str("undetermined"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducibilityVerdict {
    pub reducible: Reducibility,
    pub witness: Option<String>,
    pub detector: Detector,
    pub notes: Vec<String>,
}

impl ReducibilityVerdict {
    fn undetermined(detector: Detector, note: String) -> Self {
        Self { reducible: Reducibility::Undetermined, witness: None, detector, notes: vec![note] }
    }

    pub fn is_reducible(&self) -> bool {
        self.reducible == Reducibility::Reducible
    }
}

/// A diagonal block of norm one in a contraction splits off: its row and
/// column must vanish.
pub fn unit_norm_reducibility(b: &BlockOperator, tol: f64) -> LabResult<ReducibilityVerdict> {
    let det = Detector::UnitNormBlock;
    let t = assemble(b)?;
    if !contraction_check(&t, tol)?.is_psd {
        return Ok(ReducibilityVerdict::undetermined(det, "assembled operator is not a contraction".into()));
    }
    let mut notes = Vec::new();
    for i in 0..b.grid() {
        let (truncated, analytic) = b.block(i, i).norms(b.order)?;
        if (truncated - 1.0).abs() <= tol {
            let mut offenders = Vec::new();
            for j in (0..b.grid()).filter(|&j| j != i) {
                for (r, c) in [(i, j), (j, i)] {
                    if b.block(r, c).norm(b.order)? > tol {
                        offenders.push(format!("({},{})", r + 1, c + 1));
                    }
                }
            }
            if offenders.is_empty() {
                return Ok(ReducibilityVerdict {
                    reducible: Reducibility::Reducible,
                    witness: Some(format!("block ({},{}) has norm 1; its row and column vanish", i + 1, i + 1)),
                    detector: det,
                    notes,
                });
            }
            notes.push(format!(
                "block ({},{}) has norm 1 but blocks {} are nonzero: contradicts zero forcing in a contraction",
                i + 1,
                i + 1,
                offenders.join(", ")
            ));
        } else if (analytic - 1.0).abs() <= tol {
            notes.push(format!(
                "block ({},{}) has norm 1 as a supremum (section norm {truncated:.6}); norm not attained",
                i + 1,
                i + 1
            ));
        }
    }
    if notes.is_empty() {
        notes.push("no diagonal block of norm 1".into());
    }
    Ok(ReducibilityVerdict { reducible: Reducibility::Undetermined, witness: None, detector: det, notes })
}

/// `γ_m Σ_{j=1}^{min(n, m+1)} (−1)^{j+1} C(n,j) Π_{s=m−j+1}^{m−1} γ_s²`,
/// the factor multiplying `T12* e_m` in the lower part of `S (e_{m+1}, 0)`.
pub fn cascade_coefficient(gamma: &[f64], n: usize, m: usize) -> f64 {
    let mut sum = 0.0;
    for j in 1..=n.min(m + 1) {
        let prod: f64 = (m + 1 - j..m).map(|s| gamma[s] * gamma[s]).product();
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * binomial(n as u64, j as u64) as f64 * prod;
    }
    gamma[m] * sum
}

/// Zero-forcing cascade for `[[S_n, T12], [0, T2]]` with `S_n` the Szegő-n shift.
pub fn cascade_reducibility(b: &BlockOperator, n: usize, tol: f64) -> LabResult<ReducibilityVerdict> {
    b.require_2x2("cascade_reducibility")?;
    let det = Detector::Cascade;
    let order = b.order;
    let model = WeightSequence::szego(n as u32)?.weights(order - 1)?;
    let gamma = match b.block(0, 0) {
        Block::Shift(w) => w.weights(order - 1)?,
        _ => return Err(LabError::Configuration("top-left block must be a backward shift".into())),
    };
    if gamma.iter().zip(&model).any(|(g, m)| (g - m).abs() > 1e-12) {
        return Err(LabError::Configuration(format!("top-left block is not the Szegő-{n} shift")));
    }
    let t = assemble(b)?;
    let report = defect_report(&t, n, tol)?;
    if let Some(k) = report.first_failure() {
        return Ok(ReducibilityVerdict::undetermined(
            det,
            format!("assembled operator is not {n}-hypercontractive: defect of order {k} is not PSD"),
        ));
    }
    let s = sandwich_operator(&t, n)?;
    let last = order.saturating_sub(n + 3);
    let mut notes = Vec::new();
    let mut worst_lower = 0.0f64;
    for m in 0..=last {
        let c = cascade_coefficient(&gamma, n, m);
        if c.abs() <= tol {
            return Ok(ReducibilityVerdict::undetermined(det, format!("cascade coefficient vanishes at m = {m}")));
        }
        let col: Vec<Complex64> = (0..2 * order).map(|i| s.get(i, m + 1)).collect();
        let top_dev = (0..order)
            .map(|i| (col[i] - Complex64::new(if i == m + 1 { 1.0 } else { 0.0 }, 0.0)).norm())
            .fold(0.0, f64::max);
        if top_dev > 1e-8 {
            notes.push(format!("S e_{} deviates from e_{} by {top_dev:.3e} in the first summand", m + 1, m + 1));
        }
        worst_lower = worst_lower.max(norm_sq(&col[order..]).sqrt());
    }
    let t12 = b.block(0, 1).norm(order)?;
    if t12 <= tol {
        return Ok(ReducibilityVerdict {
            reducible: Reducibility::Reducible,
            witness: Some(format!("T12 = 0 forced (cascade over m = 0..={last})")),
            detector: det,
            notes,
        });
    }
    notes.push(format!(
        "contradiction: defects pass up to order {n} but ‖T12‖ = {t12:.3e}; largest lower component of S(e_(m+1), 0) is {worst_lower:.3e}"
    ));
    Ok(ReducibilityVerdict { reducible: Reducibility::Undetermined, witness: None, detector: det, notes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankOneReport {
    pub verdict: ReducibilityVerdict,
    pub singular_values: Vec<f64>,
    pub radii: Vec<f64>,
    /// Recovered `‖e(ω)‖²` along the radii.
    pub metric: Vec<f64>,
    /// `−n/(1 − r²)²` when the metric matched.
    pub curvature: Vec<f64>,
}

/// Rank-one order-`n` defect `e ⊗ e`: recover `‖e(ω)‖²` and compare with `(1 − r²)^{-n}`.
pub fn rank_one_defect_check(t: &TruncatedOperator, n: usize, radii: &[f64], tol: f64) -> LabResult<RankOneReport> {
    let det = Detector::RankOneDefect;
    let dim = t.dim();
    if n + 2 > dim {
        return Err(LabError::Configuration("window empty for this order".into()));
    }
    let d = defect_operator(t, n)?;
    let idx = t.interior_indices(n + t.window_margin());
    let window = d.principal(&idx).hermitian_part();
    let (eigs, vecs) = window.hermitian_eigen()?;
    let mut sv: Vec<f64> = eigs.iter().map(|e| e.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let mut report = RankOneReport {
        verdict: ReducibilityVerdict::undetermined(det, String::new()),
        singular_values: sv.iter().take(4).copied().collect(),
        radii: radii.to_vec(),
        metric: Vec::new(),
        curvature: Vec::new(),
    };
    let top = *eigs.last().unwrap();
    if (top - 1.0).abs() > 1e-8 || sv.get(1).copied().unwrap_or(0.0) > tol {
        report.verdict.notes = vec![format!(
            "defect is not a rank-one projection: top eigenvalue {top:.6e}, second singular value {:.3e}",
            sv.get(1).copied().unwrap_or(0.0)
        )];
        return Ok(report);
    }
    let mut e = vec![Complex64::new(0.0, 0.0); dim];
    for (k, &i) in idx.iter().enumerate() {
        e[i] = vecs[idx.len() - 1][k];
    }
    let m = t.matrix();
    for &r in radii {
        if !(0.0..1.0).contains(&r) {
            return Err(LabError::Domain(format!("radius {r} outside [0, 1)")));
        }
        let omega = Complex64::new(r, 0.0);
        // rows 0..dim−2 of (T − ω) x = 0, last row ⟨x, e⟩ = 1
        let sys = ComplexMatrix::from_fn(dim, dim, |i, j| {
            if i + 1 < dim {
                m.get(i, j) - if i == j { omega } else { Complex64::new(0.0, 0.0) }
            } else {
                e[j].conj()
            }
        });
        let mut rhs = ComplexMatrix::zeros(dim, 1);
        rhs = &rhs + &ComplexMatrix::from_fn(dim, 1, |i, _| Complex64::new(if i + 1 == dim { 1.0 } else { 0.0 }, 0.0));
        let x = sys.solve(&rhs)?;
        let metric: f64 = (0..dim).map(|i| x.get(i, 0).norm_sqr()).sum();
        let expected = (1.0 - r * r).powi(-(n as i32));
        if ((metric - expected) / expected).abs() > 1e-8 {
            report.metric.push(metric);
            report.verdict.notes = vec![format!(
                "recovered ‖e(ω)‖² = {metric:.12e} at r = {r} differs from (1 − r²)^-{n} = {expected:.12e}"
            )];
            return Ok(report);
        }
        report.metric.push(metric);
        report.curvature.push(-(n as f64) / (1.0 - r * r).powi(2));
    }
    report.verdict = ReducibilityVerdict {
        reducible: Reducibility::Reducible,
        witness: Some(format!("order-{n} defect is e ⊗ e; curvature −{n}/(1 − r²)² on the sampled radii")),
        detector: det,
        notes: Vec::new(),
    };
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsometryReport {
    pub isometry: bool,
    pub first_deviation: Option<usize>,
    /// Forced curvature when `T*` is an isometry.
    pub curvature: Option<String>,
}

/// `T T* = I` for a backward shift iff every weight is 1.
pub fn adjoint_isometry_check(w: &WeightSequence, horizon: usize, tol: f64) -> LabResult<IsometryReport> {
    let ws = w.weights(horizon)?;
    let first_deviation = ws.iter().position(|x| (x - 1.0).abs() > tol);
    let isometry = first_deviation.is_none();
    Ok(IsometryReport {
        isometry,
        first_deviation,
        curvature: isometry.then(|| "-1/(1-r^2)^2".to_string()),
    })
}
