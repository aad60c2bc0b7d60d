use proptest::prelude::*;
use quasilab_core::{
    builtin_model, liouville_builder, operator_norm, propagate, random_sl2, random_unit, shoot,
    simon_bound_check, sl2_inverse, transfer, transfer_batch, transfer_relaxed, BuiltinModel,
    Error, Frequency, ModelParams, PotentialSpec, Sl2, StateVec, TransferRequest,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(m: BuiltinModel, lambda: f64) -> PotentialSpec {
    builtin_model(m, &ModelParams::lambda(lambda)).unwrap()
}

fn all_models() -> Vec<PotentialSpec> {
    let table: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).sin()).collect();
    vec![
        model(BuiltinModel::Constant, 0.7),
        model(BuiltinModel::Cosine, 1.0),
        builtin_model(
            BuiltinModel::Separable,
            &ModelParams {
                lambda: Some(0.5),
                gamma: None,
                table: Some(table),
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

fn golden() -> Frequency {
    Frequency::golden_mean(30).unwrap()
}

/// `T(0, x)` for `y'' = (c − E) y` in `(u', u)` coordinates.
fn closed_form(c_minus_e: f64, x: f64) -> [f64; 4] {
    if c_minus_e > 0.0 {
        let k = c_minus_e.sqrt();
        let (s, c) = ((k * x).sinh(), (k * x).cosh());
        [c, k * s, s / k, c]
    } else if c_minus_e < 0.0 {
        let k = (-c_minus_e).sqrt();
        let (s, c) = (k * x).sin_cos();
        [c, -k * s, s / k, c]
    } else {
        [1.0, 0.0, x, 1.0]
    }
}

fn max_abs_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn matrix_algebra_examples() {
    let id = Sl2::identity();
    assert_eq!(sl2_inverse(&id).unwrap().entries(), [1.0, 0.0, 0.0, 1.0]);
    let d = Sl2::new(2.0, 0.0, 0.0, 0.5).unwrap();
    assert_eq!(sl2_inverse(&d).unwrap().entries(), [0.5, 0.0, 0.0, 2.0]);
    let sh = Sl2::new(1.0, 1.0, 0.0, 1.0).unwrap();
    assert_eq!(sl2_inverse(&sh).unwrap().entries(), [1.0, -1.0, 0.0, 1.0]);
    assert!((operator_norm(&id).unwrap() - 1.0).abs() < 1e-15);
    assert!((operator_norm(&d).unwrap() - 2.0).abs() < 1e-15);
    let golden_ratio = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((operator_norm(&sh).unwrap() - golden_ratio).abs() < 1e-14);
    assert!(matches!(Sl2::new(1.0, 0.0, 0.0, 2.0), Err(Error::Integrity(_))));
}

#[test]
fn propagate_examples() {
    let phi = StateVec::new(0.3, -0.4);
    assert_eq!(propagate(&phi, &Sl2::identity()).components(), (0.3, -0.4));
    let b = Sl2::new(1.0, 0.0, 2.0, 1.0).unwrap();
    assert_eq!(propagate(&StateVec::new(1.0, 0.0), &b).components(), (1.0, 2.0));
}

#[test]
fn simon_examples() {
    let phi = StateVec::unit(0.37);
    let c = simon_bound_check(&Sl2::identity(), &phi).unwrap();
    assert!(c.norms.iter().all(|n| (n - 1.0).abs() < 1e-15));
    let b = Sl2::new(100.0, 0.0, 0.0, 0.01).unwrap();
    let c = simon_bound_check(&b, &StateVec::new(0.0, 1.0)).unwrap();
    assert!((c.norms[0] - 1e-4).abs() < 1e-18);
    assert!((c.norms[1] - 1e-2).abs() < 1e-16);
    assert!((c.norms[2] - 100.0).abs() < 1e-12);
    assert!((c.max - 100.0).abs() < 1e-12);
    assert!(simon_bound_check(&b, &StateVec::new(0.0, 1.1)).is_err());
}

#[test]
fn simon_bound_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100_000 {
        let b = random_sl2(&mut rng, 1e3);
        let phi = random_unit(&mut rng);
        let c = simon_bound_check(&b, &phi).unwrap();
        assert!(c.max >= 0.25 - 1e-12);
    }
}

#[test]
fn closed_form_transfer_matrices() {
    let f = golden();
    let zero = model(BuiltinModel::Constant, 0.0);
    let t = transfer(&zero, &f, &TransferRequest::new(0.0, 0.0, 3.5)).unwrap();
    assert!(max_abs_diff(&t.entries(), &[1.0, 0.0, 3.5, 1.0]) < 1e-12);
    let t = transfer(&zero, &f, &TransferRequest::new(-1.0, 0.0, 1.0)).unwrap();
    let want = [1.0f64.cosh(), 1.0f64.sinh(), 1.0f64.sinh(), 1.0f64.cosh()];
    assert!(max_abs_diff(&t.entries(), &want) < 1e-8);

    for c in [0.0, 2.5] {
        let spec = model(BuiltinModel::Constant, c);
        for k in [1.0f64, 2.0] {
            for sign in [1.0, -1.0] {
                let e = c - sign * k * k;
                let t = transfer(&spec, &f, &TransferRequest::new(e, 0.0, 10.0)).unwrap();
                let want = closed_form(sign * k * k, 10.0);
                let err = max_abs_diff(&t.entries(), &want);
                let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                // growing case at k = 2 has entries ~ e^20; compare relatively
                let tol = if sign > 0.0 && k > 1.0 { 1e-8 * scale } else { 1e-8 };
                assert!(err < tol, "c={c} E={e}: err {err:e}");
            }
        }
    }
}

fn closed_form_error(spec: &PotentialSpec, c_minus_e: f64, energy: f64, h: f64) -> f64 {
    let req = TransferRequest::new(energy, 0.0, 10.0).with_step(h);
    let t = transfer_relaxed(spec, &golden(), &req).unwrap();
    max_abs_diff(&t.entries(), &closed_form(c_minus_e, 10.0))
}

#[test]
fn smooth_order_is_four() {
    let spec = model(BuiltinModel::Constant, 0.0);
    for e in [-1.0, 1.0, 4.0] {
        let a = closed_form_error(&spec, -e, e, 1e-2);
        let b = closed_form_error(&spec, -e, e, 5e-3);
        assert!(a / b >= 8.0, "E={e}: {a:e} -> {b:e}");
    }
}

/// Aggregate error of the piecewise model against a fine aligned reference.
fn piecewise_error(spec: &PotentialSpec, f: &Frequency, h: f64, aligned: bool) -> f64 {
    let mut total = 0.0;
    for e in [0.3, 1.0, 2.5] {
        let reference = transfer(spec, f, &TransferRequest::new(e, 0.0, 10.0).with_step(1e-4)).unwrap();
        let mut req = TransferRequest::new(e, 0.0, 10.0).with_step(h);
        if !aligned {
            req = req.unaligned();
        }
        let t = transfer_relaxed(spec, f, &req).unwrap();
        total += max_abs_diff(&t.entries(), &reference.entries());
    }
    total
}

#[test]
fn piecewise_order_with_and_without_alignment() {
    let f = golden();
    let saw = model(BuiltinModel::Sawtooth, 1.0);
    let coarse = piecewise_error(&saw, &f, 1e-2, false);
    let fine = piecewise_error(&saw, &f, 2.5e-3, false);
    let rate = (coarse / fine).sqrt();
    assert!((2.0..8.0).contains(&rate), "unaligned rate {rate}");

    let coarse = piecewise_error(&saw, &f, 1e-2, true);
    let fine = piecewise_error(&saw, &f, 5e-3, true);
    assert!(coarse / fine >= 8.0, "aligned ratio {}", coarse / fine);

    let cos = model(BuiltinModel::Cosine, 1.0);
    let coarse = piecewise_error(&cos, &f, 1e-2, true);
    let fine = piecewise_error(&cos, &f, 5e-3, true);
    assert!(coarse / fine >= 8.0, "cosine ratio {}", coarse / fine);
}

#[test]
fn wronskian_is_conserved_on_every_model() {
    let freqs = [golden(), liouville_builder(1.0, 4).unwrap()];
    for f in &freqs {
        for spec in all_models() {
            for e in [-1.0, 0.5, 3.0] {
                let t = transfer(&spec, f, &TransferRequest::new(e, 0.0, 1000.0)).unwrap();
                assert!(t.det_drift().abs() <= 1e-8, "{} E={e}: {:e}", spec.label(), t.det_drift());
            }
        }
    }
}

#[test]
fn det_fault_is_reported_not_corrected() {
    let spec = model(BuiltinModel::Cosine, 1.0);
    let req = TransferRequest::new(0.5, 0.0, 50.0).with_det_fault(1e-5);
    assert!(matches!(transfer(&spec, &golden(), &req), Err(Error::StepSize { .. })));
}

#[test]
fn request_preconditions() {
    let spec = model(BuiltinModel::Cosine, 1.0);
    let f = golden();
    assert!(transfer(&spec, &f, &TransferRequest::new(0.0, 0.0, 1.0).with_step(0.02)).is_err());
    assert!(transfer(&spec, &f, &TransferRequest::new(0.0, 0.0, 2e4)).is_err());
    assert!(transfer(&spec, &f, &TransferRequest::new(0.0, 0.0, 1.0).with_tolerance(0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cocycle_identity(
        idx in 0usize..5,
        e in -2.0f64..4.0,
        y in -20.0f64..20.0,
        len in 1.0f64..40.0,
        frac in 0.01f64..0.99,
    ) {
        let spec = &all_models()[idx];
        let f = liouville_builder(1.0, 4).unwrap();
        let x = y + len;
        let z = y + frac * len;
        let full = transfer(spec, &f, &TransferRequest::new(e, y, x)).unwrap();
        let left = transfer(spec, &f, &TransferRequest::new(e, y, z)).unwrap();
        let right = transfer(spec, &f, &TransferRequest::new(e, z, x)).unwrap();
        let composed = right.mul(&left);
        let norm = full.operator_norm().unwrap();
        prop_assert!(full.distance(&composed) <= 1e-7 * norm, "{} vs {}", full.distance(&composed), norm);
    }

    #[test]
    fn inverse_consistency(
        idx in 0usize..5,
        e in -2.0f64..4.0,
        y in -20.0f64..20.0,
        len in 1.0f64..40.0,
    ) {
        let spec = &all_models()[idx];
        let f = golden();
        let fwd = transfer(spec, &f, &TransferRequest::new(e, y, y + len)).unwrap();
        let back = transfer(spec, &f, &TransferRequest::new(e, y + len, y)).unwrap();
        let inv = sl2_inverse(&fwd).unwrap();
        let norm = back.operator_norm().unwrap();
        prop_assert!(back.distance(&inv) <= 1e-7 * norm);
    }
}

#[test]
fn composed_propagation_matches_direct() {
    let spec = model(BuiltinModel::Cosine, 1.0);
    let f = golden();
    let phi = StateVec::unit(0.9);
    let a = transfer(&spec, &f, &TransferRequest::new(0.3, 0.0, 1.0)).unwrap();
    let b = transfer(&spec, &f, &TransferRequest::new(0.3, 1.0, 2.0)).unwrap();
    let direct = transfer(&spec, &f, &TransferRequest::new(0.3, 0.0, 2.0)).unwrap();
    let (u1, v1) = propagate(&propagate(&phi, &a), &b).components();
    let (u2, v2) = propagate(&phi, &direct).components();
    assert!((u1 - u2).abs().max((v1 - v2).abs()) < 1e-7);

    let shot = shoot(&spec, &f, 0.3, 0.0, 2.0, 1e-3, &phi).unwrap();
    let (u3, v3) = shot.components();
    assert!((u3 - u2).abs().max((v3 - v2).abs()) < 1e-9);
}

#[test]
fn batch_preserves_request_order() {
    let spec = model(BuiltinModel::Cosine, 1.0);
    let f = golden();
    let reqs: Vec<_> = (0..12).map(|i| TransferRequest::new(i as f64 * 0.4 - 1.0, 0.0, 5.0 + i as f64)).collect();
    let batch = transfer_batch(&spec, &f, &reqs);
    for (req, got) in reqs.iter().zip(batch) {
        assert_eq!(got.unwrap(), transfer(&spec, &f, req).unwrap());
    }
}
