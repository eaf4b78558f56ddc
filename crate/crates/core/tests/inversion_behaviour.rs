use dampwave::goursat::forward_trace;
use dampwave::inversion::{
    invert_layer_stripping, refine_gauss_newton, trace_misfit, uniqueness_twin_test, GaussNewtonConfig, InversionConfig,
};
use dampwave::oracle::oracle_trace_constant;
use dampwave::{Error, Profile64, Trace64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1.0 / 400.0;

fn bump() -> Profile64 {
    Profile64::gaussian_bump(1.0, 0.5, 0.6, 0.05).unwrap()
}

fn relative_error(nodes: &[f64], truth: &Profile64, dr: f64, r_max: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in nodes.iter().enumerate() {
        let r = k as f64 * dr;
        if r <= r_max + 1e-12 {
            let a = truth.eval(r).unwrap().0;
            num += (v - a) * (v - a);
            den += a * a;
        }
    }
    (num / den).sqrt()
}

#[test]
fn constant_oracle_data_every_layer_converges() {
    let d = oracle_trace_constant(1.0, 2.0, H / 2.0).unwrap();
    let cfg = InversionConfig::new(1.0, 50, H);
    let rep = invert_layer_stripping(&d, &cfg).unwrap();
    assert_eq!(rep.nodes()[0], 1.0);
    assert!(rep.nodes().iter().all(|v| (v - 1.0).abs() < 1e-3));
    assert!(rep.per_layer_misfit.iter().all(|&m| m <= cfg.secant_tol));
    assert!(rep.final_misfit < 1e-6);
}

#[test]
fn error_falls_under_joint_refinement() {
    let truth = bump();
    let err = |layers: usize, h: f64| {
        let d = forward_trace(&truth, 2.0, h / 2.0).unwrap();
        let rep = invert_layer_stripping(&d, &InversionConfig::new(truth.eval(0.0).unwrap().0, layers, h)).unwrap();
        relative_error(rep.nodes(), &truth, 1.0 / layers as f64, 0.9)
    };
    let coarse = err(25, 1.0 / 200.0);
    let fine = err(50, 1.0 / 400.0);
    assert!(fine < coarse, "{coarse} → {fine}");
}

#[test]
fn refinement_from_the_truth_stops_at_once() {
    // Data from the solver itself, so the truth has zero residual.
    let dr = 1.0 / 20.0;
    let nodes: Vec<f64> = (0..=20).map(|k| bump().eval(k as f64 * dr).unwrap().0).collect();
    let truth = Profile64::sampled_spline(0.0, dr, nodes.clone()).unwrap();
    let h = 1.0 / 100.0;
    let d = forward_trace(&truth, 2.0, h).unwrap();
    let cfg = InversionConfig::new(nodes[0], 20, h).with_gauss_newton(GaussNewtonConfig {
        lambda: 0.0,
        ..Default::default()
    });
    let rep = refine_gauss_newton(&truth, &d, &cfg).unwrap();
    // Resampling the spline at its own nodes costs a few ulps at most.
    assert_eq!(rep.misfit_history.len(), 1);
    assert!(rep.misfit_history[0] < 1e-25);
    for (a, b) in rep.nodes().iter().zip(&nodes) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(!rep.stagnated);
}

#[test]
fn noisy_data_with_stronger_regularisation() {
    let truth = bump();
    let mut d = forward_trace(&truth, 2.0, H / 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    for v in d.values_mut().iter_mut().skip(1) {
        *v += rng.gen_range(-1e-5..=1e-5);
    }
    let cfg = InversionConfig::new(truth.eval(0.0).unwrap().0, 50, H).with_gauss_newton(GaussNewtonConfig {
        lambda: 1e-4,
        ..Default::default()
    });
    let rep = invert_layer_stripping(&d, &cfg).unwrap();
    assert!(rep.misfit_history.windows(2).all(|w| w[1] <= w[0]));
    let err = relative_error(rep.nodes(), &truth, 0.02, 0.8);
    assert!(err <= 0.05, "{err}");
}

#[test]
fn wrong_sign_a0_does_not_flip_the_profile() {
    // The trace is not even in A (only its t → 0 limit is), so a0 = −1
    // against data from A ≡ 1 neither returns A ≡ −1 nor fits the data.
    let d = oracle_trace_constant(1.0, 2.0, H / 2.0).unwrap();
    let rep = invert_layer_stripping(&d, &InversionConfig::new(-1.0, 50, H)).unwrap();
    assert!(rep.nodes().iter().all(|&v| v < 0.0));
    let drift = rep.nodes().iter().map(|v| (v + 1.0).abs()).fold(0.0, f64::max);
    assert!(drift > 0.1, "{drift}");
    let right = invert_layer_stripping(&d, &InversionConfig::new(1.0, 50, H)).unwrap();
    assert!(rep.final_misfit > 1e3 * right.final_misfit);
}

#[test]
fn negative_constant_with_matching_a0() {
    let d = oracle_trace_constant(-1.0, 2.0, H / 2.0).unwrap();
    let rep = invert_layer_stripping(&d, &InversionConfig::new(-1.0, 50, H)).unwrap();
    assert!(rep.nodes().iter().all(|v| (v + 1.0).abs() < 1e-3));
}

#[test]
fn secant_budget_exhaustion_names_the_layer() {
    let d = forward_trace(&bump(), 2.0, H / 2.0).unwrap();
    let mut cfg = InversionConfig::new(bump().eval(0.0).unwrap().0, 50, H);
    cfg.max_secant_iters = 1;
    match invert_layer_stripping(&d, &cfg) {
        Err(Error::LayerFailed { layer, lo, hi, .. }) => {
            assert!(layer >= 1);
            assert!(lo <= hi);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn amplitude_bound_stops_blow_up() {
    let d = forward_trace(&bump(), 2.0, H / 2.0).unwrap();
    let mut cfg = InversionConfig::new(bump().eval(0.0).unwrap().0, 50, H);
    cfg.amplitude_bound = 1.2;
    assert!(matches!(invert_layer_stripping(&d, &cfg), Err(Error::Divergence { .. })));
}

#[test]
fn report_serialises_and_profile_loads_back() {
    let d = oracle_trace_constant(1.0, 1.0, 1.0 / 100.0).unwrap();
    let rep = invert_layer_stripping(&d, &InversionConfig::new(1.0, 5, 1.0 / 50.0)).unwrap();
    let json = serde_json::to_string(&rep).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["profile"]["kind"], "sampled-spline");
    let back = Profile64::from_json(&rep.profile.to_json().unwrap()).unwrap();
    assert_eq!(back, rep.profile);
    assert!(trace_misfit(&back, &d, 1.0 / 50.0).unwrap() < 1e-6);
}

#[test]
fn twin_ramp_outside_the_ball() {
    let ramp = Profile64::polynomial(vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
    let rep = uniqueness_twin_test(&Profile64::constant(1.0), &ramp, 2.0, H).unwrap();
    assert_eq!(rep.trace_gap, 0.0);
    assert_eq!(rep.profile_gap_inside, 0.0);
    assert!((rep.profile_gap_outside - 1.0).abs() < 1e-12);
}

#[test]
fn trace_csv_feeds_the_inversion() {
    let d = oracle_trace_constant(1.0, 1.0, 1.0 / 100.0).unwrap();
    let back = Trace64::from_csv(&d.to_csv()).unwrap();
    assert_eq!(back.values(), d.values());
}
