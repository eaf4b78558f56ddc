use std::f64::consts::PI;

use dampwave::identity::{
    closed_i1, closed_i2, delta_prime_surface, delta_prime_surface_doubled, exact_i1, exact_i2, identity_residual,
    quadrature_i3_i4_i5, richardson_delta_prime, volterra_check,
};
use dampwave::goursat::{solve_goursat, SolverConfig};
use dampwave::Profile64;

fn pair() -> (Profile64, Profile64) {
    (Profile64::gaussian_bump(1.0, 0.5, 0.3, 0.01).unwrap(), Profile64::constant(1.0))
}

#[test]
fn mollified_delta_prime_has_positive_orientation() {
    let phi = |s: f64| ((-s).exp(), -(-s).exp());
    let r = 0.6;
    let d = delta_prime_surface(phi, r, 0.05).unwrap();
    let expected = 4.0 * PI * (-(-r).exp() * r * r + 2.0 * r * (-r).exp());
    assert!((d.closed_form - expected).abs() < 1e-12);
    assert!(d.closed_form > 0.0 && d.mollified > 0.0);
    assert!((richardson_delta_prime(phi, r, false).unwrap() - expected).abs() < 1e-8);
}

#[test]
fn doubled_argument_is_half() {
    let phi = |s: f64| (s.sin() + 2.0, s.cos());
    for eps in [0.1, 0.05] {
        let single = delta_prime_surface(phi, 0.7, eps / 2.0).unwrap();
        let doubled = delta_prime_surface_doubled(phi, 0.7, eps).unwrap();
        // δ(2y)·2 = δ_{ε/2}(y) exactly, so the mollified values match too.
        assert!((doubled.mollified - single.mollified / 2.0).abs() < 1e-9);
        assert!((doubled.closed_form - single.closed_form / 2.0).abs() < 1e-12);
    }
    assert!(delta_prime_surface_doubled(phi, 0.02, 0.05).is_err());
}

#[test]
fn exact_wavefront_terms_are_rescaled_closed_forms() {
    let (p1, p2) = pair();
    for sigma in [0.1, 0.3, 0.45] {
        assert_eq!(exact_i1(&p1, &p2, sigma).unwrap(), closed_i1(&p1, &p2, sigma).unwrap() / 2.0);
        assert_eq!(exact_i2(&p1, &p2, sigma).unwrap(), -closed_i2(&p1, &p2, sigma).unwrap().bracket / 2.0);
    }
}

#[test]
fn closed_forms_do_not_close_the_identity() {
    let (p1, p2) = pair();
    let rows = identity_residual(&p1, &p2, 1.0, 1.0 / 200.0).unwrap();
    let exact = rows.iter().map(|b| b.residual.abs()).fold(0.0, f64::max);
    let with_closed = rows
        .iter()
        .map(|b| {
            let c1 = closed_i1(&p1, &p2, b.sigma).unwrap();
            let c2 = closed_i2(&p1, &p2, b.sigma).unwrap().bracket;
            (c1 + c2 + b.i3 + b.i4 + b.i5 + b.data_term).abs()
        })
        .fold(0.0, f64::max);
    assert!(exact < 1e-5, "{exact}");
    assert!(with_closed > 1e3 * exact, "{with_closed}");
}

#[test]
fn cone_terms_are_needed() {
    let (p1, p2) = pair();
    let h = 1.0 / 200.0;
    let cfg = SolverConfig::new(1.0, h);
    let f1 = solve_goursat(&p1, &cfg).unwrap();
    let f2 = solve_goursat(&p2, &cfg).unwrap();
    let v = quadrature_i3_i4_i5(&p1, &p2, &f1, &f2, 0.3).unwrap();
    let (i3, i4, _) = v.totals();
    assert!(v.cone_i3.abs() > 0.1 * i3.abs());
    assert!(v.cone_i4.abs() > 0.1 * i4.abs());
}

#[test]
fn volterra_defect_is_second_order_for_a_bump() {
    let (p1, p2) = pair();
    let coarse = volterra_check(&p1, &p2, 1.0, 1.0 / 100.0).unwrap().max_defect;
    let fine = volterra_check(&p1, &p2, 1.0, 1.0 / 200.0).unwrap().max_defect;
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

#[test]
fn breakdown_factors() {
    let rows = identity_residual(&Profile64::constant(2.0), &Profile64::constant(1.0), 1.0, 1.0 / 100.0).unwrap();
    for b in &rows {
        assert!((b.integrating_factor - (2.0 * b.sigma).exp()).abs() < 1e-9);
        assert!((b.a_tilde - (-1.5 * b.sigma).exp()).abs() < 1e-12);
        assert!(b.cone_factor >= 1.0);
    }
}
