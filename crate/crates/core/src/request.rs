//! JSON request schema and dispatch for the `cdlab` binary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blockops::{
    adjoint_isometry_check, assemble, blockwise_contraction_scan, cascade_reducibility, contraction_sufficient,
    ex48_trial, random_ex48_instance, rank_one_defect_check, unit_norm_reducibility, Block, BlockOperator,
};
use crate::error::LabError;
use crate::matrix::{ComplexMatrix, DEFAULT_TOL};
use crate::random::instance_rng;
use crate::rkhs::{
    curvature_at, curvature_closed_form, curvature_series, szego_power_coeffs, CurvatureMethod, CurvatureProfile,
    DiagonalKernel, DEFAULT_FD_STEP,
};
use crate::shifts::{
    agler_bound_for_shift, defect_report, hypercontractivity_report, shields_similarity, Polynomial,
    RationalTail, WeightSequence, DEFAULT_HORIZON, DEFAULT_ORDER,
};
use crate::similarity::{
    boundary_dyadic, boundedness_verdict, commutator_example, commutator_operator, det_ratio_profile, linear_radii,
    subharmonic_witness_check, DiagonalX, MetricSource, DEFAULT_FLOOR, DEFAULT_UPPER_BOUND, DEFAULT_WITNESS_STEP,
    FRAME_DEFAULT_ORDER,
};

pub const N_RANGE: (usize, usize) = (8, 4096);
pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-2);
pub const MAX_HORIZON: usize = 1 << 24;
pub const DEFAULT_N_ENV: &str = "CDLAB_DEFAULT_N";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Schema(String),
    Semantic(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Semantic(m) => write!(f, "invalid request: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Semantic(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Szego,
    Hardy,
    Bergman,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub num: Vec<i64>,
    pub den: Vec<i64>,
    pub offset: usize,
}

/// A preset, or an explicit prefix with an optional rational tail.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub preset: Option<PresetName>,
    pub power: Option<u32>,
    pub prefix: Option<Vec<f64>>,
    pub tail: Option<TailSpec>,
    pub scale: Option<f64>,
}

fn preset_weights(preset: PresetName, power: Option<u32>, path: &str) -> CliResult<WeightSequence> {
    match (preset, power) {
        (PresetName::Szego, Some(k)) => Ok(WeightSequence::szego(k)?),
        (PresetName::Szego, None) => Err(schema(format!("{path}.power: required for preset \"szego\""))),
        (PresetName::Hardy, None) => Ok(WeightSequence::hardy()),
        (PresetName::Bergman, None) => Ok(WeightSequence::bergman()),
        (_, Some(_)) => Err(schema(format!("{path}.power: only allowed with preset \"szego\""))),
    }
}

impl WeightSpec {
    pub fn build(&self, path: &str) -> CliResult<WeightSequence> {
        let w = match (&self.preset, &self.prefix, &self.tail) {
            (Some(p), None, None) => preset_weights(*p, self.power, path)?,
            (Some(_), _, _) => return Err(schema(format!("{path}: \"preset\" excludes \"prefix\" and \"tail\""))),
            (None, prefix, tail) => {
                if self.power.is_some() {
                    return Err(schema(format!("{path}.power: only allowed with a preset")));
                }
                if prefix.is_none() && tail.is_none() {
                    return Err(schema(format!("{path}: needs \"preset\", \"prefix\" or \"tail\"")));
                }
                let tail = tail.as_ref().map(|t| RationalTail {
                    numerator: Polynomial(t.num.clone()),
                    denominator: Polynomial(t.den.clone()),
                    offset: t.offset,
                });
                WeightSequence::new(prefix.clone().unwrap_or_default(), tail)?
            }
        };
        Ok(match self.scale {
            Some(c) => w.scaled(c)?,
            None => w,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub preset: Option<PresetName>,
    pub power: Option<u32>,
    pub coefficients: Option<Vec<f64>>,
    pub shift: Option<WeightSpec>,
    pub b0: Option<f64>,
}

impl KernelSpec {
    pub fn build(&self, path: &str) -> CliResult<DiagonalKernel> {
        let given = [self.preset.is_some(), self.coefficients.is_some(), self.shift.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(schema(format!("{path}: give exactly one of \"preset\", \"coefficients\", \"shift\"")));
        }
        if self.b0.is_some() && self.shift.is_none() {
            return Err(schema(format!("{path}.b0: only allowed with \"shift\"")));
        }
        if let Some(p) = self.preset {
            return Ok(match (p, self.power) {
                (PresetName::Szego, Some(k)) => szego_power_coeffs(k)?,
                (PresetName::Szego, None) => return Err(schema(format!("{path}.power: required for preset \"szego\""))),
                (PresetName::Hardy, None) => crate::rkhs::hardy_kernel(),
                (PresetName::Bergman, None) => crate::rkhs::bergman_kernel(),
                (_, Some(_)) => return Err(schema(format!("{path}.power: only allowed with preset \"szego\""))),
            });
        }
        if self.power.is_some() {
            return Err(schema(format!("{path}.power: only allowed with a preset")));
        }
        if let Some(c) = &self.coefficients {
            return Ok(DiagonalKernel::from_coefficients(c)?);
        }
        let w = self.shift.as_ref().unwrap().build(&format!("{path}.shift"))?;
        Ok(DiagonalKernel::from_shift(self.b0.unwrap_or(1.0), w)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiiSpec {
    BoundaryDyadic { k_min: u32, k_max: u32 },
    Linear { start: f64, stop: f64, count: usize },
    List { values: Vec<f64> },
}

impl RadiiSpec {
    pub fn build(&self) -> CliResult<Vec<f64>> {
        Ok(match self {
            RadiiSpec::BoundaryDyadic { k_min, k_max } => boundary_dyadic(*k_min, *k_max)?,
            RadiiSpec::Linear { start, stop, count } => linear_radii(*start, *stop, *count)?,
            RadiiSpec::List { values } => {
                if values.is_empty() {
                    return Err(CliError::Semantic("radius list is empty".into()));
                }
                values.clone()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockEntry {
    Zero,
    Shift(WeightSpec),
    Diagonal {
        entries: Vec<f64>,
        #[serde(default)]
        fill: f64,
    },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub grid: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub blocks: Vec<Vec<BlockEntry>>,
    pub upper_triangular: Option<bool>,
}

impl BlockSpec {
    pub fn build(&self, default_n: usize, path: &str) -> CliResult<BlockOperator> {
        if let Some(g) = self.grid {
            if g != self.blocks.len() {
                return Err(schema(format!("{path}.grid: {g} does not match {} block rows", self.blocks.len())));
            }
        }
        let order = check_n(self.n.unwrap_or(default_n))?;
        let mut rows = Vec::new();
        for (i, row) in self.blocks.iter().enumerate() {
            let mut out = Vec::new();
            for (j, e) in row.iter().enumerate() {
                let p = format!("{path}.blocks[{i}][{j}]");
                out.push(match e {
                    BlockEntry::Zero => Block::Zero,
                    BlockEntry::Shift(w) => Block::Shift(w.build(&format!("{p}.shift"))?),
                    BlockEntry::Diagonal { entries, fill } => {
                        if entries.iter().chain([fill]).any(|x| !x.is_finite()) {
                            return Err(CliError::Semantic(format!("{p}: diagonal entries must be finite")));
                        }
                        Block::real_diagonal(entries, *fill)
                    }
                    BlockEntry::Matrix(m) => Block::Explicit(ComplexMatrix::from_real_rows(m)?),
                });
            }
            rows.push(out);
        }
        Ok(BlockOperator::new(rows, order, self.upper_triangular.unwrap_or(true))?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XSpec {
    pub entries: Vec<f64>,
    #[serde(default)]
    pub fill: f64,
}

impl XSpec {
    fn build(&self) -> CliResult<DiagonalX> {
        Ok(DiagonalX::new(self.entries.clone(), self.fill)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Kernels(Vec<KernelSpec>),
    Frame(BlockSpec),
    Commutator(XSpec),
}

impl SourceSpec {
    fn build(&self, default_n: usize, path: &str) -> CliResult<MetricSource> {
        Ok(match self {
            SourceSpec::Kernels(ks) => MetricSource::Kernels(
                ks.iter()
                    .enumerate()
                    .map(|(i, k)| k.build(&format!("{path}.kernels[{i}]")))
                    .collect::<CliResult<_>>()?,
            ),
            SourceSpec::Frame(b) => MetricSource::Frame(b.build(default_n, &format!("{path}.frame"))?),
            SourceSpec::Commutator(x) => MetricSource::Commutator(x.build()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypercontractRequest {
    pub shift: Option<WeightSpec>,
    pub operator: Option<BlockSpec>,
    pub order: usize,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub tol: Option<f64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShieldsRequest {
    pub a: WeightSpec,
    pub b: WeightSpec,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureRequest {
    pub kernel: KernelSpec,
    pub radii: RadiiSpec,
    pub method: Option<CurvatureMethod>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEx48Spec {
    pub seed: u64,
    pub instances: usize,
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionRequest {
    pub operator: Option<BlockSpec>,
    pub random_ex48: Option<RandomEx48Spec>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorName {
    UnitNormBlock,
    Cascade,
    RankOneDefect,
    AdjointIsometry,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceRequest {
    pub operator: BlockSpec,
    pub detector: Option<DetectorName>,
    pub order: Option<usize>,
    pub radii: Option<RadiiSpec>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSpec {
    pub step: Option<f64>,
    pub trace_source: Option<SourceSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimdiagRequest {
    pub source: SourceSpec,
    pub kernel: KernelSpec,
    pub multiplicity: u32,
    pub radii: Option<RadiiSpec>,
    pub bound: Option<f64>,
    pub floor: Option<f64>,
    pub witness: Option<WitnessSpec>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExCommutatorRequest {
    pub x: XSpec,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub radii: Option<RadiiSpec>,
    pub step: Option<f64>,
}

/// One request; the JSON `"command"` field selects the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisRequest {
    Hypercontract(HypercontractRequest),
    Shields(ShieldsRequest),
    Curvature(CurvatureRequest),
    Contraction(ContractionRequest),
    Reduce(ReduceRequest),
    Simdiag(SimdiagRequest),
    ExCommutator(ExCommutatorRequest),
}

fn field<T: serde::de::DeserializeOwned>(v: Value) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            schema(inner.to_string())
        } else {
            schema(format!("{path}: {inner}"))
        }
    })
}

/// Report destinations named inside the request; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub report: Option<std::path::PathBuf>,
    pub csv: Option<std::path::PathBuf>,
}

/// Strict parse; schema violations carry the offending field path.
pub fn parse_request(text: &str) -> CliResult<AnalysisRequest> {
    parse_document(text).map(|(req, _)| req)
}

/// Like [`parse_request`], also returning the optional `"output"` block.
pub fn parse_document(text: &str) -> CliResult<(AnalysisRequest, OutputPaths)> {
    let v: Value = serde_json::from_str(text).map_err(|e| schema(format!("malformed JSON: {e}")))?;
    let Value::Object(mut obj) = v else {
        return Err(schema("request must be a JSON object"));
    };
    let command = match obj.remove("command") {
        Some(Value::String(c)) => c,
        Some(_) => return Err(schema("command: expected a string")),
        None => return Err(schema("command: missing field")),
    };
    let output: OutputPaths = match obj.remove("output") {
        Some(o) => field(o).map_err(|e| match e {
            CliError::Schema(m) => schema(format!("output.{m}")),
            other => other,
        })?,
        None => OutputPaths::default(),
    };
    let body = Value::Object(obj);
    let req = match command.as_str() {
        "hypercontract" => AnalysisRequest::Hypercontract(field(body)?),
        "shields" => AnalysisRequest::Shields(field(body)?),
        "curvature" => AnalysisRequest::Curvature(field(body)?),
        "contraction" => AnalysisRequest::Contraction(field(body)?),
        "reduce" => AnalysisRequest::Reduce(field(body)?),
        "simdiag" => AnalysisRequest::Simdiag(field(body)?),
        "ex-commutator" => AnalysisRequest::ExCommutator(field(body)?),
        other => return Err(schema(format!("command: unknown command {other:?}"))),
    };
    Ok((req, output))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides every command's default truncation order.
    pub default_n: Option<usize>,
    pub threads: Option<usize>,
}

impl RunOptions {
    /// Reads `CDLAB_DEFAULT_N`.
    pub fn from_env() -> CliResult<Self> {
        let default_n = match std::env::var(DEFAULT_N_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Semantic(format!("{DEFAULT_N_ENV}={v:?} is not a count")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { default_n, threads: None })
    }

    fn n(&self, requested: Option<usize>, fallback: usize) -> CliResult<usize> {
        check_n(requested.or(self.default_n).unwrap_or(fallback))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Value,
    pub csv: Option<String>,
}

impl RunOutput {
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("serializable report");
        s.push('\n');
        s
    }
}

fn check_n(n: usize) -> CliResult<usize> {
    if n < N_RANGE.0 || n > N_RANGE.1 {
        return Err(CliError::Semantic(format!("N = {n} outside [{}, {}]", N_RANGE.0, N_RANGE.1)));
    }
    Ok(n)
}

fn check_tol(tol: Option<f64>) -> CliResult<f64> {
    let t = tol.unwrap_or(DEFAULT_TOL);
    if !(t >= TOL_RANGE.0 && t <= TOL_RANGE.1) {
        return Err(CliError::Semantic(format!("tol = {t} outside [{:e}, {:e}]", TOL_RANGE.0, TOL_RANGE.1)));
    }
    Ok(t)
}

fn check_horizon(h: Option<usize>) -> CliResult<usize> {
    let h = h.unwrap_or(DEFAULT_HORIZON);
    if !(2..=MAX_HORIZON).contains(&h) {
        return Err(CliError::Semantic(format!("horizon {h} outside [2, {MAX_HORIZON}]")));
    }
    Ok(h)
}

fn check_step(step: Option<f64>, default: f64) -> CliResult<f64> {
    let s = step.unwrap_or(default);
    if !(s > 0.0 && s < 0.1) {
        return Err(CliError::Semantic(format!("step {s} outside (0, 0.1)")));
    }
    Ok(s)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

/// Runs one request, fanning grids and instances out over `opts.threads`.
pub fn run(req: &AnalysisRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Semantic(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(req, opts))
}

fn dispatch(req: &AnalysisRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    match req {
        AnalysisRequest::Hypercontract(r) => run_hypercontract(r, opts),
        AnalysisRequest::Shields(r) => run_shields(r),
        AnalysisRequest::Curvature(r) => run_curvature(r),
        AnalysisRequest::Contraction(r) => run_contraction(r, opts),
        AnalysisRequest::Reduce(r) => run_reduce(r, opts),
        AnalysisRequest::Simdiag(r) => run_simdiag(r, opts),
        AnalysisRequest::ExCommutator(r) => run_ex_commutator(r, opts),
    }
}

fn run_hypercontract(r: &HypercontractRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let tol = check_tol(r.tol)?;
    let n = opts.n(r.n, DEFAULT_ORDER)?;
    let (report, agler) = match (&r.shift, &r.operator) {
        (Some(w), None) => {
            let w = w.build("shift")?;
            let horizon = check_horizon(r.horizon)?;
            if r.order == 0 {
                return Err(CliError::Semantic("order must be >= 1".into()));
            }
            let agler = agler_bound_for_shift(&w, r.order, horizon.min(n.max(DEFAULT_HORIZON)), 1e-12)?;
            (hypercontractivity_report(&w, r.order, n, tol)?, Some(agler))
        }
        (None, Some(b)) => {
            if r.horizon.is_some() {
                return Err(schema("horizon: only used with \"shift\""));
            }
            let op = b.build(n, "operator")?;
            (defect_report(&assemble(&op)?, r.order, tol)?, None)
        }
        _ => return Err(schema("give exactly one of \"shift\" and \"operator\"")),
    };
    let mut csv = String::from("order,min_eigenvalue,threshold,verdict,window\n");
    for i in 0..report.orders.len() {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{},{}\n",
            report.orders[i], report.min_eigenvalues[i], report.thresholds[i], report.verdicts[i], report.windows[i]
        ));
    }
    Ok(RunOutput {
        report: json!({
            "command": "hypercontract",
            "order": r.order,
            "N": n,
            "tol": tol,
            "verdict": report.passes(),
            "defect": to_value(&report),
            "agler": agler.map(|a| to_value(&a)),
        }),
        csv: Some(csv),
    })
}

fn run_shields(r: &ShieldsRequest) -> CliResult<RunOutput> {
    let a = r.a.build("a")?;
    let b = r.b.build("b")?;
    let rep = shields_similarity(&a, &b, check_horizon(r.horizon)?)?;
    let mut csv = String::from("horizon,sup_ratio,inf_ratio\n");
    for i in 0..rep.horizons.len() {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e}\n",
            rep.horizons[i], rep.sup_ratio_at_horizons[i], rep.inf_ratio_at_horizons[i]
        ));
    }
    let mut report = to_value(&rep);
    report["command"] = json!("shields");
    Ok(RunOutput { report, csv: Some(csv) })
}

fn run_curvature(r: &CurvatureRequest) -> CliResult<RunOutput> {
    let k = r.kernel.build("kernel")?;
    let radii = r.radii.build()?;
    let method = r.method.unwrap_or(CurvatureMethod::Series);
    let step = check_step(r.step, DEFAULT_FD_STEP)?;
    let values = radii
        .par_iter()
        .map(|&x| curvature_at(&k, x, method, step))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = CurvatureProfile { radii: radii.clone(), values, method };
    let closed_form_match = match k.szego_power() {
        Some(_) => {
            let mut ok = true;
            for (&x, &v) in radii.iter().zip(&profile.values) {
                let c = curvature_closed_form(&k, x)?;
                ok &= match method {
                    CurvatureMethod::FiniteDifference => {
                        (v - curvature_series(&k, x)?).abs() <= 1e-6f64.max(10.0 * step * step)
                    }
                    _ => (v - c).abs() <= 1e-10 * c.abs(),
                };
            }
            Some(ok)
        }
        None => None,
    };
    Ok(RunOutput {
        report: json!({
            "command": "curvature",
            "method": method,
            "kernel": k.label(),
            "closed_form_match": closed_form_match,
            "radii": profile.radii,
            "values": profile.values,
        }),
        csv: Some(profile.to_csv()),
    })
}

fn run_contraction(r: &ContractionRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let tol = check_tol(r.tol)?;
    match (&r.operator, &r.random_ex48) {
        (Some(b), None) => {
            let op = b.build(opts.n(r.n, DEFAULT_ORDER)?, "operator")?;
            let scan = blockwise_contraction_scan(&op, tol)?;
            let sufficient = if op.grid() == 2 && op.is_upper_triangular() {
                Some(contraction_sufficient(&op, tol)?)
            } else {
                None
            };
            let mut csv = String::from("row,col,contraction,norm,unit_norm\n");
            for b in &scan.blocks {
                csv.push_str(&format!("{},{},{},{:.16e},{}\n", b.row, b.col, b.contraction, b.norm, b.unit_norm));
            }
            Ok(RunOutput {
                report: json!({
                    "command": "contraction",
                    "contraction": scan.assembled.is_psd,
                    "sufficient_condition": sufficient,
                    "scan": to_value(&scan),
                }),
                csv: Some(csv),
            })
        }
        (None, Some(spec)) => {
            let n = opts.n(r.n, 32)?;
            let k_max = spec.k_max.unwrap_or(5);
            if k_max + 2 > n {
                return Err(CliError::Semantic(format!("k_max = {k_max} too large for N = {n}")));
            }
            let trials = (0..spec.instances)
                .into_par_iter()
                .map(|i| {
                    let mut rng = instance_rng(spec.seed, i as u64);
                    ex48_trial(&random_ex48_instance(&mut rng, n, k_max), 1e6, tol)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut csv = String::from("index,k,slack,closed_form,oracle,oracle_min_eigenvalue,schur,in_band\n");
            for (i, t) in trials.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{:.16e},{},{},{:.16e},{},{}\n",
                    t.k,
                    t.slack,
                    t.closed_form,
                    t.oracle,
                    t.oracle_min_eigenvalue,
                    t.schur.map(|s| s.to_string()).unwrap_or_default(),
                    t.in_band
                ));
            }
            let count = |f: &dyn Fn(&crate::blockops::Ex48Trial) -> bool| trials.iter().filter(|t| f(t)).count();
            Ok(RunOutput {
                report: json!({
                    "command": "contraction",
                    "mode": "random_ex48",
                    "seed": spec.seed,
                    "N": n,
                    "instances": trials.len(),
                    "in_band": count(&|t| t.in_band),
                    "contractions": count(&|t| t.oracle),
                    "disagreements": count(&|t| !t.agrees()),
                    "schur_compared": count(&|t| t.schur.is_some() && !t.in_band),
                    "schur_disagreements": count(&|t| !t.schur_agrees()),
                }),
                csv: Some(csv),
            })
        }
        _ => Err(schema("give exactly one of \"operator\" and \"random_ex48\"")),
    }
}

fn run_reduce(r: &ReduceRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let tol = check_tol(r.tol)?;
    let op = r.operator.build(opts.n(r.n, DEFAULT_ORDER)?, "operator")?;
    let detector = r.detector.unwrap_or(DetectorName::UnitNormBlock);
    let needs_order = || r.order.ok_or_else(|| schema(format!("order: required for detector {detector:?}")));
    let report = match detector {
        DetectorName::UnitNormBlock => to_value(&unit_norm_reducibility(&op, tol)?),
        DetectorName::Cascade => to_value(&cascade_reducibility(&op, needs_order()?, tol)?),
        DetectorName::RankOneDefect => {
            let radii = match &r.radii {
                Some(s) => s.build()?,
                None => vec![0.1, 0.2, 0.3, 0.4, 0.5],
            };
            let rep = rank_one_defect_check(&assemble(&op)?, needs_order()?, &radii, tol)?;
            let mut v = to_value(&rep.verdict);
            v["singular_values"] = json!(rep.singular_values);
            v["radii"] = json!(rep.radii);
            v["metric"] = json!(rep.metric);
            v["curvature"] = json!(rep.curvature);
            v
        }
        DetectorName::AdjointIsometry => {
            let w = match op.block(0, 0) {
                Block::Shift(w) if op.grid() == 1 => w.clone(),
                _ => return Err(CliError::Semantic("adjoint-isometry needs a single shift block".into())),
            };
            let mut v = to_value(&adjoint_isometry_check(&w, op.order(), tol)?);
            v["detector"] = json!("adjoint-isometry");
            v
        }
    };
    let mut report = report;
    report["command"] = json!("reduce");
    Ok(RunOutput { report, csv: None })
}

fn run_simdiag(r: &SimdiagRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let tol = check_tol(r.tol)?;
    let n = opts.n(r.n, FRAME_DEFAULT_ORDER)?;
    let source = r.source.build(n, "source")?;
    let kernel = r.kernel.build("kernel")?;
    let radii = match (&r.radii, &source) {
        (Some(s), _) => s.build()?,
        (None, MetricSource::Frame(_)) => vec![0.80, 0.85, 0.90, 0.95],
        (None, _) => boundary_dyadic(3, 12)?,
    };
    let profile = det_ratio_profile(&source, &kernel, r.multiplicity, &radii)?;
    let mut diag = boundedness_verdict(
        &profile,
        r.bound.unwrap_or(DEFAULT_UPPER_BOUND),
        r.floor.unwrap_or(DEFAULT_FLOOR),
    );
    let witness = match &r.witness {
        Some(w) => {
            let trace = match &w.trace_source {
                Some(t) => t.build(n, "witness.trace_source")?,
                None => source.clone(),
            };
            let step = check_step(w.step, DEFAULT_WITNESS_STEP)?;
            let rep = subharmonic_witness_check(&source, &trace, &kernel, r.multiplicity, &radii, step, tol)?;
            diag.attach_witness(&rep);
            Some(rep)
        }
        None => None,
    };
    Ok(RunOutput {
        report: json!({
            "command": "simdiag",
            "summary": diag.summary(),
            "diagnostic": to_value(&diag),
            "witness": witness.map(|w| to_value(&w)),
        }),
        csv: Some(diag.to_csv()),
    })
}

fn run_ex_commutator(r: &ExCommutatorRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let n = opts.n(r.n, FRAME_DEFAULT_ORDER)?;
    let x = r.x.build()?;
    let radii = match &r.radii {
        Some(s) => s.build()?,
        None => linear_radii(0.1, 0.9, 9)?,
    };
    let mut rep = commutator_example(&x, n, &radii)?;
    let step = check_step(r.step, DEFAULT_WITNESS_STEP)?;
    let frame = MetricSource::Frame(commutator_operator(&x, n)?);
    let witness = subharmonic_witness_check(
        &frame,
        &MetricSource::Commutator(x.clone()),
        &crate::rkhs::hardy_kernel(),
        2,
        &radii,
        step,
        DEFAULT_TOL,
    )?;
    rep.profile.attach_witness(&witness);
    Ok(RunOutput {
        report: json!({
            "command": "ex-commutator",
            "N": n,
            "closed_form_check": rep.closed_form_check,
            "pinch_ok": rep.pinch_ok,
            "x_norm": rep.x_norm,
            "frame_det": rep.frame_det,
            "closed_form_det": rep.closed_form_det,
            "ratio": rep.profile.ratio,
            "radii": rep.profile.radii,
            "witness": to_value(&witness),
        }),
        csv: Some(rep.profile.to_csv()),
    })
}
