//! Exact continued-fraction arithmetic for the frequency ω.
//!
//! A [`Frequency`] is always given by its partial quotients `a₁, a₂, …` with
//! `ω = 1/(a₁ + 1/(a₂ + …))`, never by a floating-point literal: the distances
//! `‖q ω‖` that matter here are far below double precision. Every distance is
//! evaluated with integer arithmetic against the deepest stored convergent and
//! carries a certified error bound.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::bignum::{exp_ceil, ln_big, ratio_to_f64};
use crate::error::{Error, Result};

/// Levels with `q_n` at least this large enter the limsup estimate `β̂`.
pub const DEFAULT_TAIL_Q: u64 = 20;

/// Largest partial quotient the Liouville builder will materialize.
pub const DEFAULT_BUDGET_BITS: u64 = 1 << 16;

/// Default cap on resonant scales.
pub const DEFAULT_MAX_Q: u64 = 200;

/// Relative precision demanded by [`Frequency::distance_to_integers`].
const CERTIFY_RELATIVE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyKind {
    /// The stored quotients are a prefix of an (unknown) infinite expansion.
    IrrationalTruncation,
    /// ω equals the last convergent exactly.
    ExactRational,
}

/// Convergent `p_n / q_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigUint,
    pub q: BigUint,
}

#[derive(Debug, Clone)]
pub struct Frequency {
    quotients: Vec<BigUint>,
    kind: FrequencyKind,
    convergents: Vec<Convergent>,
    omega: f64,
}

impl Frequency {
    pub fn from_partial_quotients(quotients: Vec<BigUint>, kind: FrequencyKind) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::Precondition(
                "a frequency needs at least one partial quotient".into(),
            ));
        }
        if let Some(i) = quotients.iter().position(Zero::is_zero) {
            return Err(Error::Precondition(format!(
                "partial quotient a_{} is zero; all quotients must be >= 1",
                i + 1
            )));
        }
        if kind == FrequencyKind::ExactRational && quotients.len() > 1 {
            if quotients.last().is_some_and(One::is_one) {
                return Err(Error::Precondition(
                    "exact rational expansions must end in a quotient >= 2".into(),
                ));
            }
        }
        let convergents = run_recurrence(&quotients);
        let last = convergents.last().expect("nonempty");
        let omega = ratio_to_f64(&last.p, &last.q);
        Ok(Frequency {
            quotients,
            kind,
            convergents,
            omega,
        })
    }

    pub fn from_quotients(quotients: &[u64], kind: FrequencyKind) -> Result<Self> {
        Self::from_partial_quotients(quotients.iter().map(|&a| BigUint::from(a)).collect(), kind)
    }

    /// The reduced fraction `p/q` (taken mod 1), expanded by Euclid's algorithm.
    pub fn rational(p: u64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Precondition("rational frequency with zero denominator".into()));
        }
        let g = p.gcd(&q);
        let (mut num, mut den) = ((p % q) / g, q / g);
        if num == 0 {
            return Err(Error::Precondition(format!(
                "{p}/{q} is an integer; ω must lie strictly between 0 and 1 mod 1"
            )));
        }
        // ω = num/den < 1, so the expansion starts at a₁ = ⌊den/num⌋.
        let mut quotients = Vec::new();
        while num != 0 {
            quotients.push(BigUint::from(den / num));
            let r = den % num;
            den = num;
            num = r;
        }
        Self::from_partial_quotients(quotients, FrequencyKind::ExactRational)
    }

    /// `(√5 − 1)/2` truncated to `depth` quotients.
    pub fn golden_mean(depth: usize) -> Result<Self> {
        Self::from_quotients(&vec![1; depth], FrequencyKind::IrrationalTruncation)
    }

    pub fn kind(&self) -> FrequencyKind {
        self.kind
    }

    pub fn is_rational(&self) -> bool {
        self.kind == FrequencyKind::ExactRational
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn partial_quotients(&self) -> &[BigUint] {
        &self.quotients
    }

    /// Double-precision value of the deepest convergent.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// First `depth` convergents `(p_1, q_1), …`.
    pub fn convergents(&self, depth: usize) -> Result<&[Convergent]> {
        if depth > self.depth() {
            return Err(Error::OutOfDepth {
                requested: depth,
                available: self.depth(),
            });
        }
        Ok(&self.convergents[..depth])
    }

    fn last(&self) -> &Convergent {
        self.convergents.last().expect("nonempty")
    }

    fn previous_q(&self) -> BigUint {
        let n = self.convergents.len();
        if n >= 2 {
            self.convergents[n - 2].q.clone()
        } else {
            BigUint::one()
        }
    }

    /// Natural log of the width of the interval known to contain ω, or
    /// `-inf` for exact rationals.
    ///
    /// With the tail unknown, ω lies between `p_N/q_N` and
    /// `(p_N + p_{N−1})/(q_N + q_{N−1})`.
    fn ln_uncertainty(&self) -> f64 {
        match self.kind {
            FrequencyKind::ExactRational => f64::NEG_INFINITY,
            FrequencyKind::IrrationalTruncation => {
                let q = &self.last().q;
                -(ln_big(q) + ln_big(&(q + self.previous_q())))
            }
        }
    }

    /// Signed residue `k p_N mod q_N` mapped to the nearest-integer
    /// representative, as `(numerator, negative)` over `q_N`.
    fn nearest_residue(&self, k: &BigUint) -> (BigUint, bool) {
        let last = self.last();
        let r = (k * &last.p) % &last.q;
        let twice: BigUint = &r << 1u32;
        if twice <= last.q {
            (r, false)
        } else {
            (&last.q - r, true)
        }
    }

    /// `‖k ω‖` with a certified absolute error bound.
    pub fn distance_to_integers(&self, k: &BigUint) -> Result<CertifiedDistance> {
        if k.is_zero() {
            return Err(Error::Precondition("distance_to_integers needs k >= 1".into()));
        }
        let (num, _) = self.nearest_residue(k);
        let q = &self.last().q;
        let value = ratio_to_f64(&num, q);
        let ln_value = if num.is_zero() {
            f64::NEG_INFINITY
        } else {
            ln_big(&num) - ln_big(q)
        };
        let ln_error = ln_big(k) + self.ln_uncertainty();
        let error_bound = ln_error.exp();
        let certified = match self.kind {
            FrequencyKind::ExactRational => true,
            FrequencyKind::IrrationalTruncation => {
                ln_value.is_finite() && ln_error <= CERTIFY_RELATIVE.ln() + ln_value
            }
        };
        if !certified {
            // Need q_N^2 ≳ k / (1e-3 ‖kω‖); with ‖kω‖ unknown use 1/k as a floor.
            let ln_target = if ln_value.is_finite() { ln_value } else { -ln_big(k) };
            let ln_needed = ln_big(k) - CERTIFY_RELATIVE.ln() - ln_target;
            let required_bits = (ln_needed / (2.0 * std::f64::consts::LN_2)).ceil() as u64 + 1;
            return Err(Error::Precision {
                depth: self.depth(),
                required_bits,
            });
        }
        Ok(CertifiedDistance {
            value,
            ln_value,
            error_bound,
            ln_error_bound: ln_error,
        })
    }

    /// `kω − round(kω)` as `f64`, evaluated against the deepest convergent.
    ///
    /// Unlike `k * omega()` this keeps full relative precision for tiny
    /// shifts.
    pub fn signed_shift(&self, k: &BigUint) -> f64 {
        let (num, negative) = self.nearest_residue(k);
        let v = ratio_to_f64(&num, &self.last().q);
        if negative {
            -v
        } else {
            v
        }
    }

    pub fn beta_estimate(&self, depth: usize) -> Result<BetaEstimate> {
        self.beta_estimate_with_tail(depth, DEFAULT_TAIL_Q)
    }

    /// Convergent-ratio estimate `r_n = ln(q_{n+1})/q_n` for `n < depth`,
    /// with the direct form `−ln‖q_n ω‖/q_n` as a diagnostic where it can be
    /// certified.
    pub fn beta_estimate_with_tail(&self, depth: usize, tail_q: u64) -> Result<BetaEstimate> {
        if depth < 2 && !self.is_rational() {
            return Err(Error::Precondition("beta_estimate needs depth >= 2".into()));
        }
        let convergents = self.convergents(depth)?;
        let mut levels = Vec::with_capacity(depth.saturating_sub(1));
        for n in 1..depth {
            let q = &convergents[n - 1].q;
            let q_next = &convergents[n].q;
            let q_f = q.to_f64().unwrap_or(f64::INFINITY);
            let ratio = ln_big(q_next) / q_f;
            let direct = self
                .distance_to_integers(q)
                .ok()
                .filter(|d| d.ln_value.is_finite())
                .map(|d| -d.ln_value / q_f);
            let direct_tolerance = (q_f / q_next.to_f64().unwrap_or(f64::INFINITY)).ln_1p() / q_f;
            levels.push(BetaLevel {
                n,
                q: q.clone(),
                ratio,
                direct,
                direct_tolerance,
            });
        }
        if self.is_rational() {
            return Ok(BetaEstimate {
                levels,
                running_max: f64::INFINITY,
                beta_hat: f64::INFINITY,
                depth,
                tail_q,
            });
        }
        let running_max = levels.iter().map(|l| l.ratio).fold(0.0, f64::max);
        let tail = BigUint::from(tail_q);
        let beta_hat = levels
            .iter()
            .filter(|l| l.q >= tail)
            .map(|l| l.ratio)
            .reduce(f64::max)
            .unwrap_or_else(|| levels.last().map_or(0.0, |l| l.ratio));
        Ok(BetaEstimate {
            levels,
            running_max,
            beta_hat,
            depth,
            tail_q,
        })
    }

    /// `β̂` over the full stored depth.
    pub fn beta_hat(&self) -> f64 {
        self.beta_estimate(self.depth())
            .map(|b| b.beta_hat)
            .unwrap_or(0.0)
    }

    /// Convergent denominators `q ≤ max_q` that are resonant at level `ε`:
    /// `‖qω‖ ≤ e^{−(β̂−ε)q}`.
    ///
    /// Rational frequencies short-circuit to the periodic ladder holding
    /// only their denominator.
    pub fn resonant_scales(&self, epsilon: f64, max_q: u64) -> Result<ResonanceLadder> {
        if !(epsilon > 0.0) {
            return Err(Error::Precondition(format!("epsilon must be > 0, got {epsilon}")));
        }
        if self.is_rational() {
            let q = &self.last().q;
            let scales = match q.to_u64().filter(|&q| q <= max_q) {
                Some(q) => vec![ResonantScale {
                    n: self.depth(),
                    q,
                    ln_distance: f64::NEG_INFINITY,
                    ln_bound: f64::NEG_INFINITY,
                    shift: 0.0,
                }],
                None => Vec::new(),
            };
            let diagnostic = scales
                .is_empty()
                .then(|| format!("period {q} exceeds max_q = {max_q}"));
            return Ok(ResonanceLadder {
                epsilon,
                beta_hat: f64::INFINITY,
                periodic: true,
                scales,
                diagnostic,
            });
        }
        let beta = self.beta_estimate(self.depth())?;
        if epsilon >= beta.beta_hat {
            return Err(Error::Precondition(format!(
                "epsilon = {epsilon} must be below beta_hat = {:.6}",
                beta.beta_hat
            )));
        }
        let rate = beta.beta_hat - epsilon;
        let mut scales = Vec::new();
        for level in &beta.levels {
            let Some(q) = level.q.to_u64().filter(|&q| q <= max_q) else {
                continue;
            };
            if level.ratio < rate {
                continue;
            }
            let ln_bound = -rate * q as f64;
            // Certified value when available, else the continued-fraction
            // bound ‖q_n ω‖ < 1/q_{n+1} = e^{−r_n q_n}.
            let (ln_distance, ln_upper) = match self.distance_to_integers(&level.q) {
                Ok(d) => (
                    d.ln_value,
                    d.ln_value + (d.ln_error_bound - d.ln_value).exp().ln_1p(),
                ),
                Err(_) => {
                    let ln = -level.ratio * q as f64;
                    (ln, ln)
                }
            };
            if ln_upper > ln_bound {
                continue;
            }
            scales.push(ResonantScale {
                n: level.n,
                q,
                ln_distance,
                ln_bound,
                shift: self.signed_shift(&level.q),
            });
        }
        let diagnostic = scales.is_empty().then(|| {
            format!(
                "no convergent denominator q <= {max_q} satisfies ||q omega|| <= exp(-(beta_hat - eps) q) with beta_hat = {:.6}, eps = {epsilon}",
                beta.beta_hat
            )
        });
        Ok(ResonanceLadder {
            epsilon,
            beta_hat: beta.beta_hat,
            periodic: false,
            scales,
            diagnostic,
        })
    }
}

fn run_recurrence(quotients: &[BigUint]) -> Vec<Convergent> {
    let (mut p_prev, mut q_prev) = (BigUint::one(), BigUint::zero());
    let (mut p, mut q) = (BigUint::zero(), BigUint::one());
    let mut out = Vec::with_capacity(quotients.len());
    for a in quotients {
        let p_next = a * &p + &p_prev;
        let q_next = a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        out.push(Convergent {
            p: p.clone(),
            q: q.clone(),
        });
    }
    out
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FrequencyKind::ExactRational => {
                let last = self.last();
                write!(f, "rational: {}/{}", last.p, last.q)
            }
            FrequencyKind::IrrationalTruncation => {
                write!(f, "cfrac:")?;
                for a in &self.quotients {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Frequency {
    type Err = Error;

    /// Parses `cfrac: a1 a2 …` or `rational: p/q`.
    fn from_str(s: &str) -> Result<Self> {
        let (tag, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("frequency record `{s}` lacks a `kind:` tag")))?;
        match tag.trim() {
            "cfrac" => {
                let quotients = body
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<BigUint>()
                            .map_err(|_| Error::Config(format!("bad partial quotient `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_partial_quotients(quotients, FrequencyKind::IrrationalTruncation)
                    .map_err(|e| Error::Config(e.to_string()))
            }
            "rational" => {
                let (p, q) = body
                    .trim()
                    .split_once('/')
                    .ok_or_else(|| Error::Config(format!("rational `{}` is not p/q", body.trim())))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad integer `{}`", t.trim())))
                };
                Self::rational(parse(p)?, parse(q)?).map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!("unknown frequency kind `{other}`"))),
        }
    }
}

/// `‖kω‖` with `|‖kω‖ − value| ≤ error_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedDistance {
    pub value: f64,
    /// `ln value`, finite even when `value` underflows.
    pub ln_value: f64,
    pub error_bound: f64,
    pub ln_error_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaLevel {
    pub n: usize,
    pub q: BigUint,
    /// `ln(q_{n+1}) / q_n`.
    pub ratio: f64,
    /// `−ln‖q_n ω‖ / q_n` when certified.
    pub direct: Option<f64>,
    /// `ln(1 + q_n/q_{n+1}) / q_n`: the direct form lies in
    /// `[ratio, ratio + direct_tolerance]`.
    pub direct_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub levels: Vec<BetaLevel>,
    /// Max of `r_n` over every available level.
    pub running_max: f64,
    /// Max of `r_n` over levels with `q_n ≥ tail_q` (the last ratio when no
    /// level qualifies); `+inf` for rationals.
    pub beta_hat: f64,
    pub depth: usize,
    pub tail_q: u64,
}

impl BetaEstimate {
    pub fn is_infinite(&self) -> bool {
        self.beta_hat.is_infinite()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.ratio).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonantScale {
    pub n: usize,
    pub q: u64,
    pub ln_distance: f64,
    /// `−(β̂ − ε) q`.
    pub ln_bound: f64,
    /// `qω − round(qω)`.
    pub shift: f64,
}

impl ResonantScale {
    pub fn bound(&self) -> f64 {
        self.ln_bound.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceLadder {
    pub epsilon: f64,
    pub beta_hat: f64,
    /// Set for exact rationals: the single scale is the period.
    pub periodic: bool,
    pub scales: Vec<ResonantScale>,
    pub diagnostic: Option<String>,
}

impl ResonanceLadder {
    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn qs(&self) -> Vec<u64> {
        self.scales.iter().map(|s| s.q).collect()
    }
}

/// Partial quotients `a₁ = 1`, `a_{n+1} = ⌈e^{β q_n}⌉`, giving a frequency
/// whose convergent ratios approach `target_beta` from above.
pub fn liouville_builder(target_beta: f64, depth: usize) -> Result<Frequency> {
    liouville_builder_with_budget(target_beta, depth, DEFAULT_BUDGET_BITS)
}

pub fn liouville_builder_with_budget(
    target_beta: f64,
    depth: usize,
    budget_bits: u64,
) -> Result<Frequency> {
    if !(target_beta > 0.0) || !target_beta.is_finite() {
        return Err(Error::Precondition(format!(
            "target beta must be finite and > 0, got {target_beta}"
        )));
    }
    if depth < 2 {
        return Err(Error::Precondition("Liouville builder needs depth >= 2".into()));
    }
    let mut quotients = vec![BigUint::one()];
    let (mut q_prev, mut q) = (BigUint::one(), BigUint::one());
    while quotients.len() < depth {
        let a = exp_ceil(target_beta, &q, budget_bits).ok_or(Error::Budget {
            achieved_depth: quotients.len(),
            budget_bits,
        })?;
        let q_next = &a * &q + &q_prev;
        q_prev = std::mem::replace(&mut q, q_next);
        quotients.push(a);
    }
    Frequency::from_partial_quotients(quotients, FrequencyKind::IrrationalTruncation)
}
