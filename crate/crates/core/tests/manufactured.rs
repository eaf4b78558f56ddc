//! Manufactured solutions for the characteristic march.

use std::sync::Arc;

use dampwave::goursat::{march_characteristic_grid, solve_goursat, time_derivative, Forcing, SolverConfig};
use dampwave::{Profile64, WaveField};

/// `w = sin(μ)·ν − sin(ν)·μ` vanishes on the axis `μ = ν` and on the cone `ν = 0`.
fn w_exact(mu: f64, nu: f64) -> f64 {
    mu.sin() * nu - nu.sin() * mu
}

fn w_t(mu: f64, nu: f64) -> f64 {
    0.5 * (mu.cos() * nu - nu.sin() + mu.sin() - nu.cos() * mu)
}

fn damping(r: f64) -> f64 {
    0.8 + 0.5 * r
}

/// `g = (w_μν + A·w_t)/r`, so that `w_tt − w_rr + A·w_t = r·g`.
fn forcing() -> Forcing<f64> {
    Arc::new(|r: f64, t: f64| {
        let (mu, nu) = ((t + r) / 2.0, (t - r) / 2.0);
        (mu.cos() - nu.cos() + damping(r) * w_t(mu, nu)) / r
    })
}

fn max_error(h: f64, cols: usize) -> f64 {
    let cone = vec![0.0; cols + 1];
    let coef: Vec<f64> = (0..=cols).map(|k| damping(k as f64 * h)).collect();
    let g = forcing();
    let w = march_characteristic_grid(h, cols, &cone, &coef, Some(&g)).unwrap();
    let mut err = 0.0f64;
    let mut at = 0;
    for i in 0..=cols {
        for j in 0..=i {
            err = err.max((w[at] - w_exact(i as f64 * h, j as f64 * h)).abs());
            at += 1;
        }
    }
    err
}

#[test]
fn box_scheme_is_second_order() {
    let errors: Vec<f64> = [20usize, 40, 80].iter().map(|&n| max_error(1.0 / n as f64, n)).collect();
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order > 1.9, "errors {errors:?}");
    }
    assert!(errors[2] < 1e-4);
}

#[test]
fn forcing_through_the_solver_config() {
    // Zero damping: the cone data vanish and only the forcing drives the field.
    let zero = Profile64::zero();
    let g = |r: f64, t: f64| {
        let (mu, nu) = ((t + r) / 2.0, (t - r) / 2.0);
        (mu.cos() - nu.cos()) / r
    };
    let h = 1.0 / 100.0;
    let f = solve_goursat(&zero, &SolverConfig::new(1.0, h).with_forcing(g)).unwrap();
    let mut err = 0.0f64;
    for i in 0..=f.cols() {
        for j in 0..=i {
            err = err.max((f.w(i, j) - w_exact(i as f64 * h, j as f64 * h)).abs());
        }
    }
    assert!(err < 1e-4, "{err}");
}

#[test]
fn time_derivative_of_sampled_field() {
    let h = 1.0 / 200.0;
    let f = WaveField::from_fn(h, 100, |r, t| w_exact((t + r) / 2.0, (t - r) / 2.0));
    for &(r, t) in &[(0.1, 0.5), (0.25, 0.75), (0.05, 0.95)] {
        let exact = w_t((t + r) / 2.0, (t - r) / 2.0) / r;
        let got = time_derivative(&f, r, t).unwrap();
        assert!((got - exact).abs() < 1e-3 * exact.abs().max(1.0), "({r}, {t}): {got} vs {exact}");
    }
}
