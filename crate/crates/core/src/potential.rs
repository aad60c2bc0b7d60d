//! Piecewise γ-Hölder potentials `V(x, y)` on the 2-torus, Hölder seminorm
//! probing, and the drift integral / good-set machinery at resonant scales.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{self, PlanOptions, Segment};
use crate::frequency::Frequency;

/// The concrete model behind a [`PotentialSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Constant { c: f64 },
    /// `λ cos(2πy)`.
    Cosine { lambda: f64 },
    /// `V₁(x) + λ cos(2πy)` with `V₁` a piecewise-constant sample table
    /// (nearest-sample lookup on the uniform grid `i/n`).
    Separable { table: Arc<[f64]>, lambda: f64 },
    /// `2λ(y − ⌊y + ½⌋)`: slope `2λ`, jump `−2λ` at `y = ½`.
    Sawtooth { lambda: f64 },
    /// `λ |sin(πy)|^γ`.
    HoelderCusp { lambda: f64, gamma: f64 },
}

/// Named builtin models accepted by [`builtin_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    Constant,
    Cosine,
    Separable,
    Sawtooth,
    HoelderCusp,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 5] = [
        BuiltinModel::Constant,
        BuiltinModel::Cosine,
        BuiltinModel::Separable,
        BuiltinModel::Sawtooth,
        BuiltinModel::HoelderCusp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::Constant => "constant",
            BuiltinModel::Cosine => "cosine",
            BuiltinModel::Separable => "separable",
            BuiltinModel::Sawtooth => "sawtooth",
            BuiltinModel::HoelderCusp => "hoelder_cusp",
        }
    }
}

impl std::str::FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown potential model `{s}`")))
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters for [`builtin_model`]. `lambda` doubles as the value `c` of
/// the constant model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub table: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn lambda(lambda: f64) -> Self {
        ModelParams {
            lambda: Some(lambda),
            ..Default::default()
        }
    }
}

/// Position of a point relative to the model's pieces: `y` interval index
/// and sample-table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Piece {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    model: Model,
    gamma: f64,
    breakpoints: Vec<f64>,
    sup_bound: f64,
    holder_bound: f64,
    label: String,
}

pub fn builtin_model(model: BuiltinModel, params: &ModelParams) -> Result<PotentialSpec> {
    let lambda = || {
        params.lambda.filter(|l| l.is_finite()).ok_or_else(|| {
            Error::Config(format!("model `{model}` needs a finite `lambda` parameter"))
        })
    };
    let spec = match model {
        BuiltinModel::Constant => {
            let c = lambda()?;
            PotentialSpec {
                model: Model::Constant { c },
                gamma: 1.0,
                breakpoints: vec![0.0, 1.0],
                sup_bound: c.abs(),
                holder_bound: 0.0,
                label: format!("constant c={c}"),
            }
        }
        BuiltinModel::Cosine => {
            let lambda = lambda()?;
            PotentialSpec {
                model: Model::Cosine { lambda },
                gamma: 1.0,
                breakpoints: vec![0.0, 1.0],
                sup_bound: lambda.abs(),
                holder_bound: 2.0 * PI * lambda.abs(),
                label: format!("cosine lambda={lambda}"),
            }
        }
        BuiltinModel::Separable => {
            let lambda = lambda()?;
            let table = params
                .table
                .clone()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| Error::Config("model `separable` needs a sample table".into()))?;
            if table.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sample table holds non-finite values".into()));
            }
            let table_sup = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            PotentialSpec {
                label: format!("separable n={} lambda={lambda}", table.len()),
                model: Model::Separable {
                    table: table.into(),
                    lambda,
                },
                gamma: 1.0,
                breakpoints: vec![0.0, 1.0],
                sup_bound: table_sup + lambda.abs(),
                holder_bound: 2.0 * PI * lambda.abs(),
            }
        }
        BuiltinModel::Sawtooth => {
            let lambda = lambda()?;
            PotentialSpec {
                model: Model::Sawtooth { lambda },
                gamma: 1.0,
                breakpoints: vec![0.0, 0.5, 1.0],
                sup_bound: lambda.abs(),
                holder_bound: 2.0 * lambda.abs(),
                label: format!("sawtooth lambda={lambda}"),
            }
        }
        BuiltinModel::HoelderCusp => {
            let lambda = lambda()?;
            let gamma = params
                .gamma
                .ok_or_else(|| Error::Config("model `hoelder_cusp` needs `gamma`".into()))?;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
            }
            PotentialSpec {
                model: Model::HoelderCusp { lambda, gamma },
                gamma,
                breakpoints: vec![0.0, 1.0],
                sup_bound: lambda.abs(),
                // |sin a|^γ − |sin b|^γ ≤ |sin a − sin b|^γ ≤ (π|a − b|)^γ
                holder_bound: lambda.abs() * PI.powf(gamma),
                label: format!("hoelder_cusp lambda={lambda} gamma={gamma}"),
            }
        }
    };
    Ok(spec)
}

/// Parses `x,value` rows on the uniform grid `x_i = i/n`. A header row is
/// allowed.
pub fn parse_sample_table(text: &str) -> Result<Vec<f64>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(x), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Config(format!(
                "sample table line {}: expected `x,value`",
                lineno + 1
            )));
        };
        match (x.parse::<f64>(), v.parse::<f64>()) {
            (Ok(x), Ok(v)) => rows.push((x, v)),
            _ if rows.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Config(format!(
                    "sample table line {}: unparsable row `{line}`",
                    lineno + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("sample table is empty".into()));
    }
    let n = rows.len() as f64;
    for (i, (x, _)) in rows.iter().enumerate() {
        if (x - i as f64 / n).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sample table row {i}: x = {x} is off the uniform grid i/{n}"
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

#[inline]
fn frac(v: f64) -> f64 {
    v - v.floor()
}

impl PotentialSpec {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `0 = a₁ < … < a_m = 1`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn holder_bound(&self) -> f64 {
        self.holder_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `V(x, y)` for arbitrary real arguments (both reduced mod 1).
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (x, y) = (frac(x), frac(y));
        self.eval_piece(x, y, self.locate(x, y))
    }

    pub(crate) fn locate(&self, x: f64, y: f64) -> Piece {
        let (x, y) = (frac(x), frac(y));
        let yi = self.breakpoints[1..self.breakpoints.len() - 1]
            .iter()
            .take_while(|&&b| y >= b)
            .count();
        let xi = match &self.model {
            Model::Separable { table, .. } => {
                let n = table.len();
                ((x * n as f64).round() as usize) % n
            }
            _ => 0,
        };
        Piece { x: xi, y: yi }
    }

    /// Evaluates the formula of `piece`, extended continuously to the closed
    /// interval. `y` need not be reduced.
    pub(crate) fn eval_piece(&self, _x: f64, y: f64, piece: Piece) -> f64 {
        match &self.model {
            Model::Constant { c } => *c,
            Model::Cosine { lambda } => lambda * (2.0 * PI * y).cos(),
            Model::Separable { table, lambda } => table[piece.x] + lambda * (2.0 * PI * y).cos(),
            Model::Sawtooth { lambda } => {
                let y = frac(y + 0.25) - 0.25;
                // y ∈ [−¼, ¾): pick the branch by piece, not by the rounded y.
                let y = if piece.y == 0 {
                    if y > 0.625 {
                        y - 1.0
                    } else {
                        y
                    }
                } else if y < 0.125 {
                    y + 1.0
                } else {
                    y
                };
                if piece.y == 0 {
                    2.0 * lambda * y
                } else {
                    2.0 * lambda * (y - 1.0)
                }
            }
            Model::HoelderCusp { lambda, gamma } => lambda * (PI * y).sin().abs().powf(*gamma),
        }
    }

    /// `V(x, y + δ) − V(x, y)` where `y` lies in `p1` and `y + δ` in `p2`.
    /// Keeps full relative precision for tiny `δ` when both points share a
    /// smooth branch.
    pub(crate) fn shifted_difference(&self, x: f64, y: f64, delta: f64, p1: Piece, p2: Piece) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        match &self.model {
            Model::Constant { .. } => 0.0,
            Model::Cosine { lambda } | Model::Separable { lambda, .. } => {
                -2.0 * lambda * (PI * (2.0 * y + delta)).sin() * (PI * delta).sin()
            }
            Model::Sawtooth { lambda } => {
                if p1 == p2 {
                    2.0 * lambda * delta
                } else {
                    self.eval_piece(x, y + delta, p2) - self.eval_piece(x, y, p1)
                }
            }
            Model::HoelderCusp { lambda, gamma } => {
                let s0 = (PI * y).sin();
                let s1 = (PI * (y + delta)).sin();
                let rel = 2.0 * (PI * (y + 0.5 * delta)).cos() * (0.5 * PI * delta).sin() / s0;
                // ratio form only where s1/s0 is safely positive
                if s0 != 0.0 && s0.signum() == s1.signum() && rel > -0.5 {
                    lambda * s0.abs().powf(*gamma) * (gamma * rel.ln_1p()).exp_m1()
                } else {
                    self.eval_piece(x, y + delta, p2) - self.eval_piece(x, y, p1)
                }
            }
        }
    }

    /// `V(b⁺) − V(b⁻)` at interior breakpoint index `i` (index 0 is the
    /// wrap-around point `0 ≡ 1`).
    pub(crate) fn jump(&self, i: usize) -> f64 {
        match &self.model {
            Model::Sawtooth { lambda } if i == 1 => -2.0 * lambda,
            _ => 0.0,
        }
    }

    /// Extra `y` values where `y ↦ |V(x, y + δ) − V(x, y)|` has a kink.
    pub(crate) fn kink_points(&self, delta: f64) -> Vec<f64> {
        match &self.model {
            Model::Cosine { .. } | Model::Separable { .. } | Model::HoelderCusp { .. }
                if delta != 0.0 =>
            {
                vec![frac(-0.5 * delta), frac(0.5 - 0.5 * delta)]
            }
            _ => Vec::new(),
        }
    }

    /// Cell boundaries in `x` of the sample table, if any.
    pub(crate) fn x_breakpoints(&self) -> Option<Vec<f64>> {
        match &self.model {
            Model::Separable { table, .. } if table.len() > 1 => {
                let n = table.len() as f64;
                Some((0..table.len()).map(|i| (i as f64 + 0.5) / n).collect())
            }
            _ => None,
        }
    }
}

/// Maximum sampled Hölder quotient `|V(x,y₁) − V(x,y₂)| / |y₁ − y₂|^γ` on each
/// breakpoint interval, over dyadic pair separations `len·2^{-j}`.
///
/// Fails with the witness pair if any quotient exceeds the declared bound.
pub fn holder_seminorm_estimate(spec: &PotentialSpec, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::Precondition("holder_seminorm_estimate needs samples >= 2".into()));
    }
    const X_SAMPLES: usize = 4;
    let levels = (samples as f64).log2().ceil() as u32 + 10;
    let tolerance = spec.holder_bound * (1.0 + 1e-9) + 1e-12;
    let mut out = Vec::with_capacity(spec.breakpoints.len() - 1);
    for (i, w) in spec.breakpoints.windows(2).enumerate() {
        let (a, len) = (w[0], w[1] - w[0]);
        let mut best = 0.0f64;
        for xi in 0..X_SAMPLES {
            let x = (xi as f64 + 0.5) / X_SAMPLES as f64;
            let piece = Piece {
                y: i,
                ..spec.locate(x, a)
            };
            for j in 1..=levels {
                let h = len * 0.5f64.powi(j as i32);
                let denom = h.powf(spec.gamma);
                let stride = (len - h) / samples as f64;
                for k in 0..samples {
                    let y1 = a + k as f64 * stride;
                    let y2 = y1 + h;
                    let quotient = (spec.eval_piece(x, y2, piece) - spec.eval_piece(x, y1, piece))
                        .abs()
                        / denom;
                    if quotient > tolerance {
                        return Err(Error::InvariantViolation(format!(
                            "{}: Hölder quotient {quotient:.6} exceeds declared bound {:.6} at x = {x}, y1 = {y1}, y2 = {y2}",
                            spec.label, spec.holder_bound
                        )));
                    }
                    best = best.max(quotient);
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub q: u64,
    /// `∫₀^q |V(t, ωt) − V(t, ω(t + q))| dt`.
    pub integral_value: f64,
    /// `|I^c|` for the good set at this scale.
    pub good_set_complement_measure: f64,
    /// `e^{−(γβ̂ − ε) q}`, for comparison only.
    pub bound_reference: f64,
    /// Set when the crossing enumeration was abandoned for uniform panels.
    pub uniform_fallback: bool,
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_85,
];

/// Composite 4-point Gauss–Legendre quadrature of the drift
/// `|V(t, ωt) − V(t, ωt + δ_q)|` on `[0, q]`, with `δ_q = qω − round(qω)`
/// taken from exact arithmetic and panels split at every breakpoint
/// crossing of either argument.
pub fn drift_integral(
    spec: &PotentialSpec,
    freq: &Frequency,
    q: u64,
    quad_points_per_unit: usize,
    epsilon: f64,
) -> Result<DriftReport> {
    if q == 0 {
        return Err(Error::Precondition("drift_integral needs q >= 1".into()));
    }
    if quad_points_per_unit < 4 {
        return Err(Error::Precondition("need at least 4 quadrature nodes per unit".into()));
    }
    let omega = freq.omega();
    let shift = freq.signed_shift(&q.into());
    let qf = q as f64;

    let (segments, uniform_fallback) = match flow::plan(
        spec,
        omega,
        0.0,
        qf,
        shift,
        PlanOptions {
            align: true,
            kinks: true,
            unit_marks: false,
        },
    ) {
        Ok(plan) => (plan.segments, false),
        Err(Error::Scale(_)) => {
            let plan = flow::plan(
                spec,
                omega,
                0.0,
                qf,
                shift,
                PlanOptions {
                    align: false,
                    kinks: false,
                    unit_marks: true,
                },
            )?;
            (plan.segments, true)
        }
        Err(e) => return Err(e),
    };

    // Hölder cusps at panel ends spoil Gauss order; cluster nodes there.
    let (grading, min_sub) = if spec.gamma < 1.0 {
        ((1.5 / spec.gamma).ceil().clamp(2.0, 8.0) as i32, 4.0)
    } else {
        (1, 1.0)
    };
    let mut total = 0.0;
    for seg in &segments {
        match seg {
            Segment::Panel(panel) => {
                let len = panel.b - panel.a;
                let n = ((len * quad_points_per_unit as f64) / 4.0).ceil().max(min_sub) as usize;
                let width = len / n as f64;
                let mut acc = 0.0;
                for k in 0..n {
                    let center = (k as f64 + 0.5) / n as f64;
                    for (node, weight) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
                        let (u, du) = flow::grade(center + 0.5 * node / n as f64, grading);
                        let t = panel.a + len * u;
                        acc += weight * du * panel.drift(spec, omega, shift, t).abs();
                    }
                }
                total += 0.5 * width * acc;
            }
            Segment::Impulse { dw_integral, .. } => total += dw_integral.abs(),
        }
    }

    let beta = freq.beta_hat();
    let bound_reference = if beta.is_infinite() {
        0.0
    } else {
        (-(spec.gamma * beta - epsilon) * qf).exp()
    };
    let radius = if beta.is_infinite() {
        0.0
    } else {
        2.0 * (-(beta - epsilon) * qf).exp()
    };
    Ok(DriftReport {
        q,
        integral_value: total,
        good_set_complement_measure: complement_measure(spec, omega, q, radius),
        bound_reference,
        uniform_fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodSetMeasure {
    /// `|I^c|`, exact up to rounding.
    pub complement_measure: f64,
    /// Exclusion radius `2 e^{−(β̂−ε) q}` around each translated breakpoint.
    pub radius: f64,
    /// `q e^{−(β̂−ε) q}`: the shape of the bound on `|I^c|` without its constant.
    pub reference: f64,
}

/// Measure of `I^c = {t ∈ [0, q] : dist(ωt, a_i + ℓ) < 2e^{−(β̂−ε)q}}`,
/// `1 ≤ i ≤ m−1`, `0 ≤ ℓ ≤ q−1`, as an exact union of intervals.
pub fn good_set_measure(
    spec: &PotentialSpec,
    freq: &Frequency,
    q: u64,
    epsilon: f64,
) -> Result<GoodSetMeasure> {
    let beta = freq.beta_hat();
    if beta.is_infinite() {
        return Err(Error::Precondition(
            "rational frequency: beta = +inf, the good set is all of [0, q]".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < beta) {
        return Err(Error::Precondition(format!(
            "need 0 < epsilon < beta_hat = {beta:.6}, got {epsilon}"
        )));
    }
    let rate = (-(beta - epsilon) * q as f64).exp();
    let radius = 2.0 * rate;
    Ok(GoodSetMeasure {
        complement_measure: complement_measure(spec, freq.omega(), q, radius),
        radius,
        reference: q as f64 * rate,
    })
}

/// `|{t ∈ [0, q] : ∃ i < m, ℓ < q with |ωt − (a_i + ℓ)| < radius}|`.
pub fn complement_measure(spec: &PotentialSpec, omega: f64, q: u64, radius: f64) -> f64 {
    if !(radius > 0.0) {
        return 0.0;
    }
    let qf = q as f64;
    let bps = &spec.breakpoints[..spec.breakpoints.len() - 1];
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(bps.len() * q as usize);
    for l in 0..q {
        for &a in bps {
            let c = a + l as f64;
            let lo = ((c - radius) / omega).max(0.0);
            let hi = ((c + radius) / omega).min(qf);
            if hi > lo {
                intervals.push((lo, hi));
            }
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        current = match current {
            Some((clo, chi)) if lo <= chi => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((clo, chi)) = current {
        total += chi - clo;
    }
    total
}
