//! The twelve acceptance criteria, each reported as one PASS/FAIL line.
//! Run with `cargo test -p quasilab-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_bigint::BigUint;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasilab_core::lyapunov::least_squares;
use quasilab_core::{
    builtin_model, drift_integral, liouville_builder, lyapunov, lyapunov_scan, periodicity_defects, random_sl2,
    random_unit, simon_bound_check, transfer_relaxed, variation_of_constants_oracle, BuiltinModel, Frequency,
    FrequencyKind, LyapunovParams, ModelParams, PotentialSpec, TransferRequest,
};

type Verdict = (bool, String);

fn model(m: BuiltinModel, lambda: f64) -> PotentialSpec {
    builtin_model(m, &ModelParams::lambda(lambda)).unwrap()
}

fn all_models() -> Vec<PotentialSpec> {
    vec![
        model(BuiltinModel::Constant, 1.5),
        model(BuiltinModel::Cosine, 1.0),
        builtin_model(
            BuiltinModel::Separable,
            &ModelParams {
                lambda: Some(1.0),
                gamma: None,
                table: Some(vec![0.4, -0.2, 0.9, 0.0, -0.7]),
            },
        )
        .unwrap(),
        model(BuiltinModel::Sawtooth, 1.0),
        builtin_model(
            BuiltinModel::HoelderCusp,
            &ModelParams {
                lambda: Some(1.0),
                gamma: Some(0.5),
                table: None,
            },
        )
        .unwrap(),
    ]
}

fn c1_simon_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let b = random_sl2(&mut rng, 1e3);
        let phi = random_unit(&mut rng);
        match simon_bound_check(&b, &phi) {
            Ok(c) => worst = worst.min(c.max),
            Err(e) => return (false, format!("check refused an instance: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst >= 0.25 - 1e-12 && secs < 5.0,
        format!("1e5 instances, smallest max {worst:.6}, {secs:.2} s"),
    )
}

/// `T(0, x)` for `y'' = s k² y`, entries ordered `[t11, t12, t21, t22]`
/// acting on `(y', y)`.
fn closed_form(s: f64, k: f64, x: f64) -> [f64; 4] {
    if s > 0.0 {
        let (sh, ch) = ((k * x).sinh(), (k * x).cosh());
        [ch, k * sh, sh / k, ch]
    } else {
        let (sn, cs) = (k * x).sin_cos();
        [cs, -k * sn, sn / k, cs]
    }
}

/// Absolute entry error, divided by the largest entry when that exceeds 1.
fn closed_form_error(s: f64, k: f64, h: f64) -> f64 {
    let f = Frequency::golden_mean(30).unwrap();
    let spec = model(BuiltinModel::Constant, 0.0);
    let t = transfer_relaxed(&spec, &f, &TransferRequest::new(-s * k * k, 0.0, 10.0).with_step(h)).unwrap();
    let want = closed_form(s, k, 10.0);
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let err = t.entries().iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    err / scale
}

fn c2_closed_forms() -> Verdict {
    let cases = [(1.0, 1.0), (-1.0, 1.0), (1.0, 2.0), (-1.0, 2.0)];
    let worst = cases.iter().map(|&(s, k)| closed_form_error(s, k, 1e-3)).fold(0.0, f64::max);
    // At h = 1e-3 the error is already at round-off, so the order is read
    // off at coarser steps where truncation dominates.
    let ratio = cases
        .iter()
        .map(|&(s, k)| closed_form_error(s, k, 1e-2) / closed_form_error(s, k, 5e-3))
        .fold(f64::INFINITY, f64::min);
    (
        worst <= 1e-8 && ratio >= 8.0,
        format!("worst error {worst:.2e} at h = 1e-3, smallest halving ratio {ratio:.2}"),
    )
}

fn c3_wronskian() -> Verdict {
    let freqs = [Frequency::golden_mean(30).unwrap(), liouville_builder(1.0, 4).unwrap()];
    let mut worst: f64 = 0.0;
    for f in &freqs {
        for spec in all_models() {
            let t = transfer_relaxed(&spec, f, &TransferRequest::new(0.5, 0.0, 1000.0)).unwrap();
            worst = worst.max(t.det_drift().abs());
        }
    }
    (worst <= 1e-8, format!("5 models x 2 frequencies, worst |det T - 1| = {worst:.2e}"))
}

fn c4_lyapunov_closed_forms() -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let f = Frequency::golden_mean(30).unwrap();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    pool.install(|| {
        for c in [0.0, 3.0] {
            let spec = model(BuiltinModel::Constant, c);
            let grid: Vec<f64> = (0..10).map(|i| c - 4.5 + i as f64).collect();
            for est in lyapunov_scan(&spec, &f, &grid, &LyapunovParams::default()).unwrap() {
                let exact = (c - est.energy).max(0.0).sqrt();
                worst = worst.max((est.l_hat - exact).abs());
            }
        }
    });
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-2 && secs < 30.0,
        format!("V = 0 and V = 3, worst |L - L_exact| = {worst:.2e}, {secs:.2} s on one thread"),
    )
}

fn c5_continued_fractions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let one = BigUint::from(1u32);
    for case in 0..10_000 {
        let len = rng.random_range(3..=40);
        let a: Vec<u64> = (0..len).map(|_| rng.random_range(1..=1_000_000)).collect();
        let f = Frequency::from_quotients(&a, FrequencyKind::IrrationalTruncation).unwrap();
        let c = f.convergents(len).unwrap();
        let (mut p_prev, mut q_prev) = (BigUint::from(0u32), one.clone());
        for (n, cv) in c.iter().enumerate() {
            let det_ok = if n % 2 == 0 {
                &cv.p * &q_prev == &p_prev * &cv.q + &one
            } else {
                &cv.p * &q_prev + &one == &p_prev * &cv.q
            };
            if cv.p.gcd(&cv.q) != one || !det_ok {
                return (false, format!("sequence {case}, level {}: {a:?}", n + 1));
            }
            p_prev = cv.p.clone();
            q_prev = cv.q.clone();
        }
        let last = c.last().unwrap();
        for n in 0..c.len() - 2 {
            let x = &c[n].q * &last.p;
            let y = &c[n].p * &last.q;
            let gap = if x > y { x - y } else { y - x };
            if !(&gap * (&c[n + 1].q + &c[n].q) > last.q && &gap * &c[n + 1].q < last.q) {
                return (false, format!("sandwich fails at sequence {case}, level {}", n + 1));
            }
        }
    }
    (true, "1e4 sequences: gcd, determinant identity and sandwich exact".into())
}

fn c6_builder_round_trip() -> Verdict {
    let mut worst: f64 = 0.0;
    for (beta, depth) in [(0.5, 5), (1.0, 4), (2.0, 3)] {
        let est = liouville_builder(beta, depth).unwrap().beta_estimate(depth).unwrap();
        worst = worst.max((est.beta_hat - beta).abs() / beta);
    }
    (worst <= 0.15, format!("beta in {{0.5, 1, 2}}, worst relative error {worst:.4}"))
}

fn c7_rational_degeneracy() -> Verdict {
    let mut worst_d: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for (p, q) in [(1u64, 3u64), (2, 5), (3, 8)] {
        let f = Frequency::rational(p, q).unwrap();
        for spec in all_models() {
            for e in [-5.0, -2.5, 0.0, 1.0, 2.5, 5.0] {
                let d = periodicity_defects(&spec, &f, e, q, 1e-3).unwrap();
                worst_d = worst_d.max(d.d1).max(d.d2);
            }
            worst_drift = worst_drift.max(drift_integral(&spec, &f, q, 64, 0.05).unwrap().integral_value);
        }
    }
    (
        worst_d <= 1e-7 && worst_drift <= 1e-10,
        format!("p/q in {{1/3, 2/5, 3/8}}, worst D {worst_d:.2e}, worst drift {worst_drift:.2e}"),
    )
}

fn c8_variation_of_constants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = liouville_builder(1.0, 4).unwrap();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for spec in [model(BuiltinModel::Cosine, 1.0), model(BuiltinModel::Sawtooth, 1.0)] {
        for q in [1u64, 4, 13, 50] {
            for _ in 0..16 {
                let phi = random_unit(&mut rng);
                let c = variation_of_constants_oracle(&spec, &f, 0.7, q, &phi, 1e-3).unwrap();
                pass &= c.agrees(1e-6, 1e-12);
                worst = worst.max(c.deviation / c.norm.max(f64::MIN_POSITIVE));
            }
        }
    }
    (pass, format!("cosine and sawtooth, q <= 50, 16 phi each: worst relative deviation {worst:.2e}"))
}

const DECAY_EPS: f64 = 0.1;

fn c9_drift_decay() -> Verdict {
    let f = liouville_builder(1.0, 4).unwrap();
    let spec = model(BuiltinModel::Cosine, 1.0);
    let qs = f.resonant_scales(DECAY_EPS, 200).unwrap().qs();
    let x: Vec<f64> = qs.iter().map(|&q| q as f64).collect();
    let y: Vec<f64> = qs
        .iter()
        .map(|&q| drift_integral(&spec, &f, q, 64, DECAY_EPS).unwrap().integral_value.ln())
        .collect();
    if x.len() < 2 {
        return (false, format!("ladder {qs:?} too short to fit"));
    }
    let slope = least_squares(&x, &y).0;
    let bound = -(spec.gamma() * f.beta_hat() - 2.0 * DECAY_EPS) + 0.1;
    (slope <= bound, format!("ladder {qs:?}, slope {slope:.4} vs bound {bound:.4}"))
}

fn c10_defect_decay() -> Verdict {
    let f = liouville_builder(1.0, 4).unwrap();
    let spec = model(BuiltinModel::Cosine, 1.0);
    let beta = f.beta_hat();
    let qs = f.resonant_scales(DECAY_EPS, 200).unwrap().qs();
    let mut notes = Vec::new();
    let mut pass = qs.len() >= 2;
    for e in [0.0, 0.5, 1.0, 2.0] {
        let est = lyapunov(&spec, &f, e, 200.0, 8, 1e-3).unwrap();
        if est.l_hat + 3.0 * est.stderr >= spec.gamma() * beta {
            continue;
        }
        let x: Vec<f64> = qs.iter().map(|&q| q as f64).collect();
        let y: Vec<f64> = qs
            .iter()
            .map(|&q| periodicity_defects(&spec, &f, e, q, 1e-3).unwrap().d1.ln())
            .collect();
        let slope = least_squares(&x, &y).0;
        let bound = est.l_hat - spec.gamma() * beta + 2.0 * DECAY_EPS + 0.1;
        pass &= slope <= bound;
        notes.push(format!("E={e}: {slope:.3} vs {bound:.3}"));
    }
    pass &= !notes.is_empty();
    (pass, format!("ladder {qs:?}; {}", notes.join(", ")))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Copies a shipped config into `dir/configs/` so its `../out/` paths land in `dir/out/`.
fn stage_config(dir: &Path, name: &str) -> PathBuf {
    let text = std::fs::read_to_string(workspace_root().join("configs").join(name)).unwrap();
    std::fs::create_dir_all(dir.join("configs")).unwrap();
    let path = dir.join("configs").join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_quasilab")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr),
    )
}

fn c11_conditional_blocks() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage_config(dir.path(), "demo_gordon.toml");
    let (code, log) = run(&["gordon", "--config", cfg.to_str().unwrap()]);
    if code != 0 {
        return (false, format!("gordon exited {code}: {log}"));
    }
    let csv = std::fs::read_to_string(dir.path().join("out/demo_gordon.csv")).unwrap();
    let (mut tested, mut violations) = (0, 0);
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1].is_empty() {
            continue;
        }
        let val = |i: usize| cells[i].parse::<f64>().unwrap();
        if val(2) <= 0.125 && val(3) <= 0.125 {
            tested += 1;
            if val(5) < 0.125 - 1e-6 {
                violations += 1;
            }
        }
    }
    (
        tested > 0 && violations == 0,
        format!("demo scan: {tested} (E, q) pairs with small defects, {violations} violations"),
    )
}

fn c12_determinism() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for (cmd, name, stem) in [("lyap", "demo_lyap.toml", "demo_lyap"), ("gordon", "demo_gordon.toml", "demo_gordon")] {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            let dir = tempfile::tempdir().unwrap();
            let cfg = stage_config(dir.path(), name);
            let (code, log) = run(&["--threads", threads, cmd, "--config", cfg.to_str().unwrap()]);
            pass &= code == 0;
            let files: Vec<Vec<u8>> = ["csv", "svg", "json"]
                .iter()
                .map(|ext| std::fs::read(dir.path().join(format!("out/{stem}.{ext}"))).unwrap_or_default())
                .collect();
            outputs.push((log, files));
        }
        let same = outputs[0] == outputs[1] && outputs[0].1.iter().all(|f| !f.is_empty());
        pass &= same;
        notes.push(format!("{cmd} {}", if same { "identical" } else { "differs" }));
    }
    (pass, format!("1 vs 4 threads: {}", notes.join(", ")))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("simon bound fuzz", c1_simon_fuzz),
        ("closed-form transfer matrices", c2_closed_forms),
        ("wronskian conservation", c3_wronskian),
        ("lyapunov closed forms", c4_lyapunov_closed_forms),
        ("continued-fraction exactness", c5_continued_fractions),
        ("liouville builder round trip", c6_builder_round_trip),
        ("rational-frequency degeneracy", c7_rational_degeneracy),
        ("variation-of-constants oracle", c8_variation_of_constants),
        ("drift decay along resonant scales", c9_drift_decay),
        ("defect decay along resonant scales", c10_defect_decay),
        ("conditional three-block bound", c11_conditional_blocks),
        ("determinism", c12_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check();
        println!("criterion {:>2} {:<36} {}  {detail}", i + 1, name, if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
