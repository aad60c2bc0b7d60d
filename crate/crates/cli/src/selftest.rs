//! Oracle suites run by `quasilab selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasilab_core::{
    builtin_model, liouville_builder, random_sl2, random_unit, simon_bound_check, transfer_relaxed,
    variation_of_constants_oracle, BuiltinModel, Frequency, ModelParams, PotentialSpec, TransferRequest,
};

/// Per-panel determinant offset used by the `det-drift` fault.
pub const DET_FAULT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    DetDrift,
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    pub seed: u64,
    pub step: f64,
    pub fault: Option<Fault>,
    pub fuzz_instances: usize,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            seed: 0,
            step: 1e-3,
            fault: None,
            fuzz_instances: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub fn run_all(opts: &SelftestOptions) -> Vec<SuiteResult> {
    vec![
        simon_fuzz(opts),
        closed_forms(opts),
        order_check(opts),
        wronskian(opts),
        variation_of_constants(opts),
        cocycle_identity(opts),
    ]
}

pub fn render(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    for r in results {
        let mark = if r.pass { "PASS" } else { "FAIL" };
        s.push_str(&format!("{:<24} {mark}  {}\n", r.name, r.detail));
    }
    s
}

fn model(m: BuiltinModel, lambda: f64) -> PotentialSpec {
    builtin_model(m, &ModelParams::lambda(lambda)).expect("builtin parameters are valid")
}

fn builtins() -> Vec<PotentialSpec> {
    vec![
        model(BuiltinModel::Constant, 1.0),
        model(BuiltinModel::Cosine, 1.0),
        builtin_model(
            BuiltinModel::Separable,
            &ModelParams {
                lambda: Some(1.0),
                gamma: None,
                table: Some(vec![0.5, -0.5, 0.25, 0.0]),
            },
        )
        .expect("valid table"),
        model(BuiltinModel::Sawtooth, 1.0),
        builtin_model(
            BuiltinModel::HoelderCusp,
            &ModelParams {
                lambda: Some(1.0),
                gamma: Some(0.5),
                table: None,
            },
        )
        .expect("valid cusp"),
    ]
}

fn simon_fuzz(opts: &SelftestOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = f64::INFINITY;
    let mut failure = None;
    for i in 0..opts.fuzz_instances {
        let b = random_sl2(&mut rng, 1e3);
        let phi = random_unit(&mut rng);
        match simon_bound_check(&b, &phi) {
            Ok(c) => worst = worst.min(c.max),
            Err(e) => {
                failure = Some(format!("instance {i}: {e}"));
                break;
            }
        }
    }
    SuiteResult {
        name: "simon-fuzz",
        pass: failure.is_none(),
        detail: failure.unwrap_or(format!("{} instances, smallest max {worst:.6}", opts.fuzz_instances)),
    }
}

/// `T(0, x)` for `y'' = (c − E) y` with `κ² = |c − E|`.
fn closed_form(c_minus_e: f64, x: f64) -> [f64; 4] {
    let k = c_minus_e.abs().sqrt();
    if c_minus_e > 0.0 {
        let (s, c) = ((k * x).sinh(), (k * x).cosh());
        [c, k * s, s / k, c]
    } else {
        let (s, c) = (k * x).sin_cos();
        [c, -k * s, s / k, c]
    }
}

/// Largest entry error, relative to the largest entry when that exceeds 1.
fn closed_form_error(energy: f64, h: f64) -> Result<f64, String> {
    let spec = model(BuiltinModel::Constant, 0.0);
    let f = Frequency::golden_mean(30).map_err(|e| e.to_string())?;
    let req = TransferRequest::new(energy, 0.0, 10.0).with_step(h);
    let t = transfer_relaxed(&spec, &f, &req).map_err(|e| e.to_string())?;
    let want = closed_form(-energy, 10.0);
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let err = t
        .entries()
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(err / scale)
}

const CLOSED_FORM_ENERGIES: [f64; 4] = [-1.0, 1.0, -4.0, 4.0];

fn closed_forms(opts: &SelftestOptions) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for e in CLOSED_FORM_ENERGIES {
        match closed_form_error(e, opts.step) {
            Ok(err) => worst = worst.max(err),
            Err(msg) => {
                return SuiteResult {
                    name: "closed-forms",
                    pass: false,
                    detail: format!("E = {e}: {msg}"),
                }
            }
        }
    }
    SuiteResult {
        name: "closed-forms",
        pass: worst <= 1e-8,
        detail: format!("V = 0, length 10, h = {}: worst error {worst:.3e} (limit 1e-8)", opts.step),
    }
}

/// Error ratios between steps `10h` and `5h`, where the truncation error
/// dominates round-off at the default `h`.
fn order_check(opts: &SelftestOptions) -> SuiteResult {
    let (coarse, fine) = (10.0 * opts.step, 5.0 * opts.step);
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    for e in [-1.0, 1.0, 4.0] {
        match (closed_form_error(e, coarse), closed_form_error(e, fine)) {
            (Ok(a), Ok(b)) => {
                let ratio = a / b;
                worst = worst.min(if ratio.is_nan() { 0.0 } else { ratio });
            }
            (Err(m), _) | (_, Err(m)) => notes.push(format!("E = {e}: {m}")),
        }
    }
    let pass = notes.is_empty() && worst >= 8.0;
    let detail = if notes.is_empty() {
        let verdict = if worst >= 8.0 { "fourth order" } else { "degraded order" };
        format!("h = {coarse} -> {fine}: smallest error ratio {worst:.2} (need >= 8), {verdict}")
    } else {
        format!("h = {coarse} -> {fine}: degraded order, integration refused: {}", notes.join("; "))
    };
    SuiteResult {
        name: "order-check",
        pass,
        detail,
    }
}

fn wronskian(opts: &SelftestOptions) -> SuiteResult {
    let f = match liouville_builder(1.0, 4) {
        Ok(f) => f,
        Err(e) => {
            return SuiteResult {
                name: "wronskian",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let mut worst: f64 = 0.0;
    for spec in builtins() {
        let mut req = TransferRequest::new(0.5, 0.0, 1000.0).with_step(opts.step);
        if opts.fault == Some(Fault::DetDrift) {
            req = req.with_det_fault(DET_FAULT);
        }
        match transfer_relaxed(&spec, &f, &req) {
            Ok(t) => worst = worst.max(t.det_drift().abs()),
            Err(e) => {
                return SuiteResult {
                    name: "wronskian",
                    pass: false,
                    detail: format!("{}: {e}", spec.label()),
                }
            }
        }
    }
    SuiteResult {
        name: "wronskian",
        pass: worst <= 1e-8,
        detail: format!("all builtins, length 1000: worst |det - 1| = {worst:.3e} (limit 1e-8)"),
    }
}

fn variation_of_constants(opts: &SelftestOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let f = match liouville_builder(1.0, 4) {
        Ok(f) => f,
        Err(e) => {
            return SuiteResult {
                name: "variation-of-constants",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for spec in [model(BuiltinModel::Cosine, 1.0), model(BuiltinModel::Sawtooth, 1.0)] {
        for q in [1u64, 4, 13, 50] {
            let phi = random_unit(&mut rng);
            match variation_of_constants_oracle(&spec, &f, 0.5, q, &phi, opts.step) {
                Ok(c) => {
                    pass &= c.agrees(1e-6, 1e-12);
                    worst = worst.max(c.deviation / c.norm.max(f64::MIN_POSITIVE));
                }
                Err(e) => {
                    return SuiteResult {
                        name: "variation-of-constants",
                        pass: false,
                        detail: format!("{} q = {q}: {e}", spec.label()),
                    }
                }
            }
        }
    }
    SuiteResult {
        name: "variation-of-constants",
        pass,
        detail: format!("cosine and sawtooth, q <= 50: worst relative deviation {worst:.3e} (limit 1e-6)"),
    }
}

fn cocycle_identity(opts: &SelftestOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc0c1);
    let f = Frequency::golden_mean(30).expect("golden mean");
    let spec = model(BuiltinModel::Cosine, 1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let e: f64 = rng.random_range(-1.0..3.0);
        let y: f64 = rng.random_range(-10.0..10.0);
        let x = y + rng.random_range(1.0..30.0);
        let z = rng.random_range(y..x);
        let run = |a: f64, b: f64| transfer_relaxed(&spec, &f, &TransferRequest::new(e, a, b).with_step(opts.step));
        match (run(y, x), run(y, z), run(z, x)) {
            (Ok(full), Ok(left), Ok(right)) => {
                let rel = full.distance(&right.mul(&left)) / full.operator_norm().unwrap_or(f64::NAN);
                worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
            }
            (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => {
                return SuiteResult {
                    name: "cocycle-identity",
                    pass: false,
                    detail: err.to_string(),
                }
            }
        }
    }
    SuiteResult {
        name: "cocycle-identity",
        pass: worst <= 1e-7,
        detail: format!("8 random splits: worst relative defect {worst:.3e} (limit 1e-7)"),
    }
}
