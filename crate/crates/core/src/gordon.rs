//! Near-periodicity defects, the variation-of-constants identity, three-block
//! norms and per-energy exclusion reports.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;

use rayon::prelude::*;

use crate::cocycle::{
    self, op_norm_2x2, propagate, shoot_omega, StateVec, TransferRequest, MAX_INTERVAL,
};
use crate::error::{Error, Result};
use crate::flow::{self, Field, Pair, VocState};
use crate::frequency::{Frequency, ResonanceLadder};
use crate::lyapunov::LyapunovEstimate;
use crate::potential::PotentialSpec;

pub const DEFAULT_MARGIN: f64 = 0.2;
pub const DEFAULT_N_PHI: usize = 32;
pub const BLOCK_THRESHOLD: f64 = 0.125;
pub const BLOCK_SLACK: f64 = 1e-6;
/// Largest `(L̂ + β̂)·q` accepted before refusing a scale.
pub const SCALE_BUDGET_LN: f64 = 690.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defects {
    pub q: u64,
    /// `‖T(E, 0, q) − T(E, q, 2q)‖`.
    pub d1: f64,
    /// `‖T(E, 0, −q) − T(E, 0, q)⁻¹‖`.
    pub d2: f64,
}

fn scale_of(q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Precondition("scale q must be >= 1".into()));
    }
    let qf = q as f64;
    if 2.0 * qf > MAX_INTERVAL {
        return Err(Error::Scale(format!("scale q = {q} exceeds the integration window")));
    }
    Ok(qf)
}

fn difference_matrix(field: &Field<'_>, to: f64) -> Result<[f64; 4]> {
    let mut states = [
        Pair {
            y: [0.0; 2],
            z: [1.0, 0.0],
        },
        Pair {
            y: [0.0; 2],
            z: [0.0, 1.0],
        },
    ];
    flow::difference_flow(field, 0.0, to, &mut states)?;
    Ok([states[0].y[0], states[1].y[0], states[0].y[1], states[1].y[1]])
}

/// Both defects, from the coupled difference system with the exact shift
/// `δ = qω − round(qω)`. Using `V(x + q, ·) = V(x, ·)`:
/// `T(q, 2q)` is the flow on `[0, q]` of the potential shifted by `δ`, and
/// `T(q, 0)` is the shifted flow on `[0, −q]`.
pub fn periodicity_defects(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    q: u64,
    h: f64,
) -> Result<Defects> {
    let qf = scale_of(q)?;
    TransferRequest::new(energy, 0.0, qf).with_step(h).check()?;
    let field = Field {
        spec,
        omega: freq.omega(),
        energy,
        shift: freq.signed_shift(&q.into()),
        h,
    };
    let d1 = op_norm_2x2(&difference_matrix(&field, qf)?);
    let d2 = op_norm_2x2(&difference_matrix(&field, -qf)?);
    if !d1.is_finite() || !d2.is_finite() {
        return Err(Error::Scale(format!("defects at q = {q} overflow double precision")));
    }
    Ok(Defects { q, d1, d2 })
}

/// Defects by subtracting independently integrated transfer matrices. Loses
/// all digits once the defects fall below `‖T‖·10⁻¹⁶`; kept as a cross-check.
pub fn periodicity_defects_direct(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    q: u64,
    h: f64,
) -> Result<Defects> {
    let qf = scale_of(q)?;
    let t = |a: f64, b: f64| cocycle::transfer(spec, freq, &TransferRequest::new(energy, a, b).with_step(h));
    let forward = t(0.0, qf)?;
    let d1 = forward.distance(&t(qf, 2.0 * qf)?);
    let d2 = t(0.0, -qf)?.distance(&forward.inverse()?);
    Ok(Defects { q, d1, d2 })
}

/// `Y(q)` two ways, for the difference `Y = u₁ − u₂` of the solutions with
/// data `φ` under `V(x, ωx)` and `V(x, ωx + δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocComparison {
    /// `∫₀^q T₁(t → q) F(t) dt` by composite Simpson quadrature.
    pub integral: [f64; 2],
    /// RK4 on the coupled difference system with `Y(0) = 0`.
    pub direct: [f64; 2],
    /// Max component deviation.
    pub deviation: f64,
    /// `‖direct‖`.
    pub norm: f64,
}

impl VocComparison {
    /// `deviation ≤ rel·‖Y(q)‖ + abs`.
    pub fn agrees(&self, rel: f64, abs: f64) -> bool {
        self.deviation <= rel * self.norm + abs
    }
}

pub fn variation_of_constants_oracle(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    q: u64,
    phi: &StateVec,
    h: f64,
) -> Result<VocComparison> {
    let qf = scale_of(q)?;
    TransferRequest::new(energy, 0.0, qf).with_step(h).check()?;
    let field = Field {
        spec,
        omega: freq.omega(),
        energy,
        shift: freq.signed_shift(&q.into()),
        h,
    };
    let (du, u) = phi.components();
    let mut pair = [Pair {
        y: [0.0; 2],
        z: [du, u],
    }];
    flow::difference_flow(&field, 0.0, qf, &mut pair)?;
    let mut voc = VocState {
        acc: [0.0; 2],
        z: [du, u],
    };
    flow::voc_flow(&field, 0.0, qf, &mut voc)?;
    let direct = pair[0].y;
    let integral = voc.acc;
    let deviation = (integral[0] - direct[0])
        .abs()
        .max((integral[1] - direct[1]).abs());
    Ok(VocComparison {
        integral,
        direct,
        deviation,
        norm: direct[0].hypot(direct[1]),
    })
}

/// `n` directions at angles `(k + ½)·2π/n` plus the four coordinate
/// directions.
pub fn phi_net(n: usize) -> Vec<StateVec> {
    (0..n)
        .map(|k| StateVec::unit((k as f64 + 0.5) * TAU / n as f64))
        .chain((0..4).map(|k| StateVec::unit(k as f64 * FRAC_PI_2)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorms {
    pub phi: StateVec,
    /// `‖(u', u)‖` at `−q`, `q`, `2q` by direct shooting from `φ` at 0.
    pub propagated: [f64; 3],
    pub max: f64,
    /// `‖B⁻¹φ‖`, `‖Bφ‖`, `‖B²φ‖` with `B = T(E, 0, q)`.
    pub powers: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeBlock {
    pub q: u64,
    pub defects: Defects,
    pub per_phi: Vec<BlockNorms>,
    /// Minimum over `φ` of the propagated max.
    pub min_max: f64,
    /// Index into `per_phi` attaining `min_max`.
    pub argmin: usize,
}

impl ThreeBlock {
    pub fn defects_small(&self) -> bool {
        self.defects.d1 <= BLOCK_THRESHOLD && self.defects.d2 <= BLOCK_THRESHOLD
    }

    /// Small defects but a decaying block triple.
    pub fn violates(&self) -> bool {
        self.defects_small() && self.min_max < BLOCK_THRESHOLD - BLOCK_SLACK
    }
}

fn three_block_unchecked(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    q: u64,
    phis: &[StateVec],
    h: f64,
) -> Result<ThreeBlock> {
    if phis.is_empty() {
        return Err(Error::Precondition("empty phi set".into()));
    }
    if let Some(bad) = phis.iter().find(|p| (p.norm() - 1.0).abs() > 1e-10) {
        return Err(Error::Precondition(format!("phi {bad:?} is not a unit vector")));
    }
    let defects = periodicity_defects(spec, freq, energy, q, h)?;
    let qf = q as f64;
    let omega = freq.omega();
    let b = cocycle::transfer(spec, freq, &TransferRequest::new(energy, 0.0, qf).with_step(h))?;
    let b_inv = b.inverse()?;
    let b2 = b.mul(&b);
    let per_phi = phis
        .par_iter()
        .map(|phi| {
            let back = shoot_omega(spec, omega, energy, 0.0, -qf, h, phi)?;
            let one = shoot_omega(spec, omega, energy, 0.0, qf, h, phi)?;
            let two = shoot_omega(spec, omega, energy, qf, 2.0 * qf, h, &one)?;
            let propagated = [back.norm(), one.norm(), two.norm()];
            let powers = [
                propagate(phi, &b_inv).norm(),
                propagate(phi, &b).norm(),
                propagate(phi, &b2).norm(),
            ];
            Ok(BlockNorms {
                phi: *phi,
                max: propagated.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                propagated,
                powers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmin, min_max) = per_phi
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, b)| if b.max < acc.1 { (i, b.max) } else { acc });
    Ok(ThreeBlock {
        q,
        defects,
        per_phi,
        min_max,
        argmin,
    })
}

/// Block norms at `−q`, `q`, `2q` for every `φ`. Fails with a theory
/// violation if both defects are at most `1/8` while some `φ` keeps all
/// three norms below `1/8 − 10⁻⁶`.
pub fn three_block_test(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    q: u64,
    phis: &[StateVec],
    h: f64,
) -> Result<ThreeBlock> {
    let tb = three_block_unchecked(spec, freq, energy, q, phis, h)?;
    if tb.violates() {
        return Err(Error::TheoryViolation {
            q,
            min_max: tb.min_max,
            d1: tb.defects.d1,
            d2: tb.defects.d2,
        });
    }
    Ok(tb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionProfile {
    pub phi: StateVec,
    pub x: Vec<f64>,
    /// `ln‖(u'(x), u(x))‖`.
    pub log_norms: Vec<f64>,
}

impl SolutionProfile {
    pub fn norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|v| v.exp()).collect()
    }
}

/// Samples the shooting solution with data `φ` at `n_samples` evenly spaced
/// points of `[0, x_max]` (`x_max` may be negative).
pub fn decay_profile(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    phi: &StateVec,
    x_max: f64,
    n_samples: usize,
    h: f64,
) -> Result<SolutionProfile> {
    if n_samples < 2 {
        return Err(Error::Precondition("decay_profile needs n_samples >= 2".into()));
    }
    if !(x_max.abs() <= MAX_INTERVAL) {
        return Err(Error::Scale(format!("x_max = {x_max} exceeds the integration window")));
    }
    TransferRequest::new(energy, 0.0, x_max).with_step(h).check()?;
    let omega = freq.omega();
    let x: Vec<f64> = (0..n_samples)
        .map(|k| x_max * k as f64 / (n_samples - 1) as f64)
        .collect();
    let mut v = *phi;
    let mut log_norms = vec![v.log_norm()];
    for w in x.windows(2) {
        v = shoot_omega(spec, omega, energy, w[0], w[1], h, &v)?;
        log_norms.push(v.log_norm());
    }
    Ok(SolutionProfile {
        phi: *phi,
        x,
        log_norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ExcludedConsistent,
    Inconclusive,
    RegimeNotMet,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ExcludedConsistent => "excluded-consistent",
            Verdict::Inconclusive => "inconclusive",
            Verdict::RegimeNotMet => "regime-not-met",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRecord {
    pub q: u64,
    pub d1: f64,
    pub d2: f64,
    /// Propagated norms at `−q`, `q`, `2q` for the worst `φ`.
    pub three_block_norms: [f64; 3],
    /// `min_φ max` of the propagated triple.
    pub three_block_max: f64,
    pub n_phi: usize,
    /// `e^{(L̂ − γβ̂ + ε) q}`.
    pub defect_bound_ref: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GordonReport {
    pub energy: f64,
    pub gamma: f64,
    pub beta_hat: f64,
    pub epsilon: f64,
    pub margin: f64,
    pub l_hat: f64,
    pub l_stderr: f64,
    pub records: Vec<ScaleRecord>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    /// Set when small defects coexisted with a decaying block triple.
    pub violation: bool,
}

impl GordonReport {
    pub fn regime_met(&self) -> bool {
        regime_met(self.l_hat, self.l_stderr, self.gamma, self.beta_hat, self.margin)
    }
}

fn regime_met(l_hat: f64, stderr: f64, gamma: f64, beta: f64, margin: f64) -> bool {
    l_hat + 3.0 * stderr < gamma * beta - margin
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GordonOptions {
    pub h: f64,
    pub n_phi: usize,
}

impl Default for GordonOptions {
    fn default() -> Self {
        GordonOptions {
            h: crate::cocycle::DEFAULT_STEP,
            n_phi: DEFAULT_N_PHI,
        }
    }
}

/// Refuses scales whose `e^{(L̂ + β̂) q}` leaves double range.
pub fn check_scale_budget(l_hat: f64, beta_hat: f64, q: u64) -> Result<()> {
    let rate = l_hat.max(0.0) + if beta_hat.is_finite() { beta_hat } else { 0.0 };
    let ln = rate * q as f64;
    if ln > SCALE_BUDGET_LN {
        return Err(Error::Scale(format!(
            "(L + beta)·q = {ln:.1} at q = {q} exceeds the budget {SCALE_BUDGET_LN}"
        )));
    }
    Ok(())
}

/// Assembles defects, block norms and the regime check into a verdict.
/// Only a scale-budget refusal is an error; every other failure downgrades
/// the verdict with a reason.
pub fn exclusion_report(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    ladder: &ResonanceLadder,
    lyap: &LyapunovEstimate,
    margin: f64,
    opts: &GordonOptions,
) -> Result<GordonReport> {
    let gamma = spec.gamma();
    let beta = ladder.beta_hat;
    for s in &ladder.scales {
        check_scale_budget(lyap.l_hat, beta, s.q)?;
    }
    let phis = phi_net(opts.n_phi);
    let mut reasons = Vec::new();
    let mut records = Vec::with_capacity(ladder.scales.len());
    let mut violation = false;
    let mut all_pass = true;
    for s in &ladder.scales {
        let bound_ref = if beta.is_finite() {
            ((lyap.l_hat - gamma * beta + ladder.epsilon) * s.q as f64).exp()
        } else {
            0.0
        };
        match three_block_unchecked(spec, freq, energy, s.q, &phis, opts.h) {
            Ok(tb) => {
                let worst = &tb.per_phi[tb.argmin];
                let bad = tb.violates();
                if bad {
                    violation = true;
                    reasons.push(format!(
                        "q = {}: defects D1 = {:.3e}, D2 = {:.3e} within 1/8 but block max {:.6} < 1/8",
                        s.q, tb.defects.d1, tb.defects.d2, tb.min_max
                    ));
                }
                if !tb.defects_small() {
                    all_pass = false;
                    reasons.push(format!(
                        "q = {}: defects D1 = {:.3e}, D2 = {:.3e} exceed 1/8",
                        s.q, tb.defects.d1, tb.defects.d2
                    ));
                } else if tb.min_max < BLOCK_THRESHOLD - BLOCK_SLACK {
                    all_pass = false;
                }
                records.push(ScaleRecord {
                    q: s.q,
                    d1: tb.defects.d1,
                    d2: tb.defects.d2,
                    three_block_norms: worst.propagated,
                    three_block_max: tb.min_max,
                    n_phi: phis.len(),
                    defect_bound_ref: bound_ref,
                    violation: bad,
                });
            }
            Err(Error::Scale(msg)) => return Err(Error::Scale(msg)),
            Err(e) => {
                all_pass = false;
                reasons.push(format!("q = {}: {e}", s.q));
            }
        }
    }
    let regime = regime_met(lyap.l_hat, lyap.stderr, gamma, beta, margin);
    if !regime {
        reasons.push(format!(
            "L_hat + 3 stderr = {:.4} is not below gamma·beta_hat − margin = {:.4}",
            lyap.l_hat + 3.0 * lyap.stderr,
            gamma * beta - margin
        ));
    }
    if ladder.scales.is_empty() {
        reasons.push(
            ladder
                .diagnostic
                .clone()
                .unwrap_or_else(|| "empty resonance ladder".into()),
        );
    }
    let verdict = if violation {
        Verdict::Inconclusive
    } else if !regime {
        Verdict::RegimeNotMet
    } else if ladder.scales.is_empty() || !all_pass {
        Verdict::Inconclusive
    } else {
        Verdict::ExcludedConsistent
    };
    Ok(GordonReport {
        energy,
        gamma,
        beta_hat: beta,
        epsilon: ladder.epsilon,
        margin,
        l_hat: lyap.l_hat,
        l_stderr: lyap.stderr,
        records,
        verdict,
        reasons,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::liouville_builder;
    use crate::potential::{builtin_model, BuiltinModel, ModelParams};

    fn constant(c: f64) -> PotentialSpec {
        builtin_model(BuiltinModel::Constant, &ModelParams::lambda(c)).unwrap()
    }

    #[test]
    fn constant_potential_has_no_defects() {
        let f = liouville_builder(1.0, 4).unwrap();
        let d = periodicity_defects(&constant(2.0), &f, 0.5, 5, 1e-3).unwrap();
        assert!(d.d1 <= 1e-8 && d.d2 <= 1e-8);
    }

    #[test]
    fn net_has_unit_vectors() {
        let net = phi_net(32);
        assert_eq!(net.len(), 36);
        assert!(net.iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rotation_blocks_have_unit_norm() {
        let f = liouville_builder(1.0, 4).unwrap();
        let tb = three_block_test(&constant(0.0), &f, 1.0, 5, &[StateVec::new(1.0, 0.0)], 1e-3).unwrap();
        for n in tb.per_phi[0].propagated {
            assert!((n - 1.0).abs() < 1e-6, "{n}");
        }
    }

    #[test]
    fn hyperbolic_block_matches_closed_form() {
        let f = liouville_builder(1.0, 4).unwrap();
        let tb = three_block_test(&constant(1.0), &f, 0.0, 3, &[StateVec::new(0.0, 1.0)], 1e-3).unwrap();
        let expected = 3f64.sinh().hypot(3f64.cosh());
        assert!((tb.per_phi[0].propagated[1] - expected).abs() < 1e-8 * expected);
        assert!((tb.per_phi[0].powers[1] - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn pure_decay_profile() {
        let f = liouville_builder(1.0, 4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = decay_profile(&constant(0.0), &f, -1.0, &StateVec::new(-s, s), 20.0, 21, 1e-3).unwrap();
        for (x, n) in p.x.iter().zip(p.norms()) {
            assert!((n / (-x).exp() - 1.0).abs() < 1e-6, "x={x} n={n}");
        }
    }

    #[test]
    fn scale_budget() {
        assert!(check_scale_budget(2.0, 1.0, 100).is_ok());
        assert!(matches!(check_scale_budget(2.0, 1.0, 300), Err(Error::Scale(_))));
    }

    #[test]
    fn verdict_names() {
        assert_eq!(Verdict::ExcludedConsistent.to_string(), "excluded-consistent");
        assert_eq!(Verdict::RegimeNotMet.as_str(), "regime-not-met");
    }
}
