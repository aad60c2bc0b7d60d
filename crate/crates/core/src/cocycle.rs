//! Log-scaled SL(2,R) algebra, transfer matrices of `−y'' + V(x, ωx) y = E y`,
//! and the three-norm lower bound for `B², B, B⁻¹`.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{self, mat_mul, mat_vec, Field, PlanOptions, Segment};
use crate::frequency::Frequency;
use crate::potential::PotentialSpec;

/// Stored entries are rescaled into the log scale once their max-abs entry
/// leaves `[RENORM_LOW, RENORM_HIGH]`.
const RENORM_HIGH: f64 = 1e4;
const RENORM_LOW: f64 = 1.0;

/// Largest determinant drift accepted by [`Sl2::inverse`].
pub const INTEGRITY_TOLERANCE: f64 = 1e-6;

/// Largest singular value of a general 2×2 matrix.
pub fn op_norm_2x2(m: &[f64; 4]) -> f64 {
    let s: f64 = m.iter().map(|v| v * v).sum();
    let d = (m[0] * m[3] - m[1] * m[2]).abs();
    0.5 * ((s + 2.0 * d).sqrt() + (s - 2.0 * d).max(0.0).sqrt())
}

fn max_abs(m: &[f64; 4]) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `e^{log_scale} · m`, a real 2×2 matrix with determinant `1 + det_drift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sl2 {
    m: [f64; 4],
    log_scale: f64,
    det_drift: f64,
}

impl Sl2 {
    pub fn identity() -> Self {
        Sl2 {
            m: [1.0, 0.0, 0.0, 1.0],
            log_scale: 0.0,
            det_drift: 0.0,
        }
    }

    /// Builds `[[t11, t12], [t21, t22]]`; fails if the determinant is not 1
    /// to within [`INTEGRITY_TOLERANCE`].
    pub fn new(t11: f64, t12: f64, t21: f64, t22: f64) -> Result<Self> {
        let m = [t11, t12, t21, t22];
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("non-finite matrix entry".into()));
        }
        let det_drift = t11 * t22 - t12 * t21 - 1.0;
        if det_drift.abs() > INTEGRITY_TOLERANCE {
            return Err(Error::Integrity(format!(
                "determinant {} is not 1",
                1.0 + det_drift
            )));
        }
        Ok(Sl2::from_parts(m, 0.0, det_drift))
    }

    pub(crate) fn from_parts(m: [f64; 4], log_scale: f64, det_drift: f64) -> Self {
        let mut out = Sl2 {
            m,
            log_scale,
            det_drift,
        };
        out.renormalize();
        out
    }

    fn renormalize(&mut self) {
        let n = max_abs(&self.m);
        if n > RENORM_HIGH || (n < RENORM_LOW && self.log_scale > 0.0 && n > 0.0) {
            // power-of-two rescaling keeps the stored entries exact
            let e = n.log2().round();
            let f = 2f64.powi(-(e as i32));
            for v in &mut self.m {
                *v *= f;
            }
            self.log_scale += e * LN_2;
        }
    }

    /// Row-major stored entries (without the `e^{log_scale}` factor).
    pub fn stored(&self) -> [f64; 4] {
        self.m
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn det_drift(&self) -> f64 {
        self.det_drift
    }

    /// Row-major entries `e^{log_scale} · m`; may overflow for huge products.
    pub fn entries(&self) -> [f64; 4] {
        let f = self.log_scale.exp();
        self.m.map(|v| v * f)
    }

    /// `det` of the stored entries implied by the tracked drift.
    fn stored_det(&self) -> f64 {
        (1.0 + self.det_drift) * (-2.0 * self.log_scale).exp()
    }

    pub fn mul(&self, rhs: &Sl2) -> Sl2 {
        Sl2::from_parts(
            mat_mul(&self.m, &rhs.m),
            self.log_scale + rhs.log_scale,
            (1.0 + self.det_drift) * (1.0 + rhs.det_drift) - 1.0,
        )
    }

    /// Adjugate inverse. The result keeps this matrix's log scale, since
    /// `(e^s m)⁻¹ = e^s adj(m) / det(e^s m)`.
    pub fn inverse(&self) -> Result<Sl2> {
        if self.det_drift.abs() > INTEGRITY_TOLERANCE {
            return Err(Error::Integrity(format!(
                "determinant drift {:.3e} exceeds {INTEGRITY_TOLERANCE:e}",
                self.det_drift
            )));
        }
        let [a, b, c, d] = self.m;
        let k = 1.0 / (1.0 + self.det_drift);
        Ok(Sl2 {
            m: [d * k, -b * k, -c * k, a * k],
            log_scale: self.log_scale,
            det_drift: k - 1.0,
        })
    }

    /// `ln σ_max` including the log scale.
    pub fn log_norm(&self) -> Result<f64> {
        let s: f64 = self.m.iter().map(|v| v * v).sum();
        let d = self.stored_det().abs();
        if s < 2.0 * d * (1.0 - 1e-12) {
            return Err(Error::Integrity(format!(
                "squared-entry sum {s} below 2·det = {}",
                2.0 * d
            )));
        }
        let sigma = 0.5 * ((s + 2.0 * d).sqrt() + (s - 2.0 * d).max(0.0).sqrt());
        Ok(sigma.ln() + self.log_scale)
    }

    /// Largest singular value (operator 2-norm).
    pub fn operator_norm(&self) -> Result<f64> {
        self.log_norm().map(f64::exp)
    }

    /// `‖self − other‖` with both log scales unwound to the larger one.
    pub fn distance(&self, other: &Sl2) -> f64 {
        let top = self.log_scale.max(other.log_scale);
        let fa = (self.log_scale - top).exp();
        let fb = (other.log_scale - top).exp();
        let diff = [
            self.m[0] * fa - other.m[0] * fb,
            self.m[1] * fa - other.m[1] * fb,
            self.m[2] * fa - other.m[2] * fb,
            self.m[3] * fa - other.m[3] * fb,
        ];
        op_norm_2x2(&diff) * top.exp()
    }

    pub fn apply(&self, v: &StateVec) -> StateVec {
        propagate(v, self)
    }
}

/// Free-function form of [`Sl2::inverse`].
pub fn sl2_inverse(b: &Sl2) -> Result<Sl2> {
    b.inverse()
}

pub fn operator_norm(b: &Sl2) -> Result<f64> {
    b.operator_norm()
}

/// The column `(u'(x), u(x))ᵀ`, scaled by `e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec {
    pub du: f64,
    pub u: f64,
    pub log_scale: f64,
}

impl StateVec {
    pub fn new(du: f64, u: f64) -> Self {
        StateVec {
            du,
            u,
            log_scale: 0.0,
        }
    }

    /// `(cos θ, sin θ)`.
    pub fn unit(angle: f64) -> Self {
        StateVec::new(angle.cos(), angle.sin())
    }

    pub fn log_norm(&self) -> f64 {
        self.du.hypot(self.u).ln() + self.log_scale
    }

    pub fn norm(&self) -> f64 {
        self.log_norm().exp()
    }

    pub(crate) fn raw(&self) -> [f64; 2] {
        [self.du, self.u]
    }

    pub(crate) fn from_raw(v: [f64; 2], log_scale: f64) -> Self {
        let mut out = StateVec {
            du: v[0],
            u: v[1],
            log_scale,
        };
        out.rescale();
        out
    }

    fn rescale(&mut self) {
        let n = self.du.abs().max(self.u.abs());
        if n > RENORM_HIGH || (n < 1.0 / RENORM_HIGH && n > 0.0) {
            let e = n.log2().round();
            let f = 2f64.powi(-(e as i32));
            self.du *= f;
            self.u *= f;
            self.log_scale += e * LN_2;
        }
    }

    /// Unscaled components; may overflow or underflow.
    pub fn components(&self) -> (f64, f64) {
        let f = self.log_scale.exp();
        (self.du * f, self.u * f)
    }
}

/// Matrix–vector product with log-scale accumulation.
pub fn propagate(phi: &StateVec, b: &Sl2) -> StateVec {
    StateVec::from_raw(mat_vec(&b.m, phi.raw()), phi.log_scale + b.log_scale)
}

/// Which of the three norms attained the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimonWitness {
    Square,
    Identity,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimonCheck {
    /// `‖B²φ‖`, `‖Bφ‖`, `‖B⁻¹φ‖`.
    pub norms: [f64; 3],
    pub max: f64,
    pub witness: SimonWitness,
}

/// Evaluates `max{‖B²φ‖, ‖Bφ‖, ‖B⁻¹φ‖}` and fails if it falls below `¼`.
pub fn simon_bound_check(b: &Sl2, phi: &StateVec) -> Result<SimonCheck> {
    if (phi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "phi must be a unit vector, norm = {}",
            phi.norm()
        )));
    }
    let inv = b.inverse()?;
    let b_phi = propagate(phi, b);
    let norms = [
        propagate(&b_phi, b).norm(),
        b_phi.norm(),
        propagate(phi, &inv).norm(),
    ];
    let (idx, max) = norms
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(max >= 0.25 - 1e-12) {
        return Err(Error::BoundViolation { max_norm: max });
    }
    let witness = [SimonWitness::Square, SimonWitness::Identity, SimonWitness::Inverse][idx];
    Ok(SimonCheck {
        norms,
        max,
        witness,
    })
}

/// A random element of SL(2,R): a standard Gaussian matrix with columns
/// ordered for positive determinant, rescaled to determinant 1. Draws with an
/// entry above `max_entry` are rejected.
pub fn random_sl2<R: Rng + ?Sized>(rng: &mut R, max_entry: f64) -> Sl2 {
    loop {
        let mut g = [0.0f64; 4];
        for v in &mut g {
            *v = rng.sample(StandardNormal);
        }
        let mut det = g[0] * g[3] - g[1] * g[2];
        if det < 0.0 {
            g.swap(0, 1);
            g.swap(2, 3);
            det = -det;
        }
        if det < 1e-300 {
            continue;
        }
        let f = det.sqrt().recip();
        let m = g.map(|v| v * f);
        if max_abs(&m) > max_entry {
            continue;
        }
        let det_drift = m[0] * m[3] - m[1] * m[2] - 1.0;
        return Sl2 {
            m,
            log_scale: 0.0,
            det_drift,
        };
    }
}

/// Uniformly random unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> StateVec {
    StateVec::unit(rng.random::<f64>() * std::f64::consts::TAU)
}

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_DET_TOLERANCE: f64 = 1e-6;
pub const MAX_STEP: f64 = 1e-2;
pub const MAX_INTERVAL: f64 = 1e4;

/// Energy, interval `from → to` (either order), RK4 step and determinant
/// drift tolerance for [`transfer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRequest {
    pub energy: f64,
    pub from: f64,
    pub to: f64,
    pub h: f64,
    pub tolerance: f64,
    /// Split panels at breakpoint crossings. Turning this off is only useful
    /// for studying the order loss at discontinuities.
    pub align: bool,
    #[doc(hidden)]
    pub det_fault: f64,
}

impl TransferRequest {
    pub fn new(energy: f64, from: f64, to: f64) -> Self {
        TransferRequest {
            energy,
            from,
            to,
            h: DEFAULT_STEP,
            tolerance: DEFAULT_DET_TOLERANCE,
            align: true,
            det_fault: 0.0,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn unaligned(mut self) -> Self {
        self.align = false;
        self
    }

    /// Test hook: adds `fault` to every panel determinant.
    #[doc(hidden)]
    pub fn with_det_fault(mut self, fault: f64) -> Self {
        self.det_fault = fault;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        self.validate(MAX_STEP)
    }

    fn validate(&self, max_step: f64) -> Result<()> {
        if !self.energy.is_finite() || !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::Precondition("non-finite transfer request".into()));
        }
        if !(self.h > 0.0 && self.h <= max_step) {
            return Err(Error::Precondition(format!(
                "step h = {} outside (0, {max_step}]",
                self.h
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Precondition("tolerance must be positive".into()));
        }
        if (self.to - self.from).abs() > MAX_INTERVAL {
            return Err(Error::Precondition(format!(
                "interval length {} exceeds {MAX_INTERVAL}",
                (self.to - self.from).abs()
            )));
        }
        Ok(())
    }
}

/// `T(E, from, to)`: maps `(u', u)` at `from` to `(u', u)` at `to`.
pub fn transfer(spec: &PotentialSpec, freq: &Frequency, req: &TransferRequest) -> Result<Sl2> {
    req.validate(MAX_STEP)?;
    transfer_omega(spec, freq.omega(), req)
}

/// [`transfer`] without the step-size ceiling, for convergence-order studies
/// at coarse steps.
pub fn transfer_relaxed(spec: &PotentialSpec, freq: &Frequency, req: &TransferRequest) -> Result<Sl2> {
    req.validate(f64::INFINITY)?;
    transfer_omega(spec, freq.omega(), req)
}

pub(crate) fn transfer_omega(spec: &PotentialSpec, omega: f64, req: &TransferRequest) -> Result<Sl2> {
    let plan = flow::plan(spec, omega, req.from, req.to, 0.0, PlanOptions::transfer(req.align))?;
    let field = Field {
        spec,
        omega,
        energy: req.energy,
        shift: 0.0,
        h: req.h,
    };
    let mut acc = Sl2::identity();
    let mut ln_det = 0.0;
    for seg in &plan.segments {
        if let Segment::Panel(panel) = seg {
            let m = field.panel_matrix(panel, plan.forward);
            let det = m[0] * m[3] - m[1] * m[2] + req.det_fault;
            ln_det += det.ln();
            acc = Sl2::from_parts(mat_mul(&m, &acc.m), acc.log_scale, 0.0);
        }
    }
    let drift = ln_det.exp_m1();
    if !(drift.abs() <= req.tolerance) {
        return Err(Error::StepSize {
            drift,
            tolerance: req.tolerance,
            step: req.h,
        });
    }
    acc.det_drift = drift;
    Ok(acc)
}

/// Evaluates many requests concurrently; results are in request order.
pub fn transfer_batch(spec: &PotentialSpec, freq: &Frequency, reqs: &[TransferRequest]) -> Vec<Result<Sl2>> {
    reqs.par_iter().map(|r| transfer(spec, freq, r)).collect()
}

/// Integrates the solution with data `phi` at `from` to `to` directly,
/// without forming the transfer matrix.
pub fn shoot(
    spec: &PotentialSpec,
    freq: &Frequency,
    energy: f64,
    from: f64,
    to: f64,
    h: f64,
    phi: &StateVec,
) -> Result<StateVec> {
    TransferRequest::new(energy, from, to).with_step(h).check()?;
    shoot_omega(spec, freq.omega(), energy, from, to, h, phi)
}

pub(crate) fn shoot_omega(
    spec: &PotentialSpec,
    omega: f64,
    energy: f64,
    from: f64,
    to: f64,
    h: f64,
    phi: &StateVec,
) -> Result<StateVec> {
    let plan = flow::plan(spec, omega, from, to, 0.0, PlanOptions::transfer(true))?;
    let field = Field {
        spec,
        omega,
        energy,
        shift: 0.0,
        h,
    };
    let mut v = *phi;
    for seg in &plan.segments {
        if let Segment::Panel(panel) = seg {
            v = StateVec::from_raw(field.panel_vector(panel, plan.forward, v.raw()), v.log_scale);
        }
    }
    Ok(v)
}
