use dampwave::goursat::forward_trace;
use dampwave::identity::identity_residual;
use dampwave::oracle::oracle_trace_constant;
use dampwave::Profile64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_before_a_profile_change_is_bit_identical(
        a in 0.2f64..2.0,
        bump in 0.1f64..1.0,
        edge_steps in 20usize..80,
    ) {
        let h = 0.01;
        let edge = edge_steps as f64 * h;
        let p1 = Profile64::constant(a);
        let p2 = Profile64::polynomial(vec![a, 0.0, 0.0, bump], edge).unwrap();
        let d1 = forward_trace(&p1, 2.0, h).unwrap();
        let d2 = forward_trace(&p2, 2.0, h).unwrap();
        // d_m reads w up to μ = (m + 2)h.
        let seen = edge_steps - 3;
        for m in 0..=seen {
            prop_assert_eq!(d1.values()[m].to_bits(), d2.values()[m].to_bits(), "m = {}", m);
        }
        prop_assert!(d1.values().iter().zip(d2.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn constant_damping_matches_closed_form(a in -1.5f64..3.0) {
        let h = 1.0 / 200.0;
        let d = forward_trace(&Profile64::constant(a), 1.0, h).unwrap();
        let exact = oracle_trace_constant(a, 1.0, d.dt()).unwrap();
        for (x, y) in d.values().iter().zip(exact.values()) {
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn profile_json_round_trip(base in -2.0f64..2.0, amp in -1.0f64..1.0, center in 0.0f64..1.0, width in 0.01f64..0.5) {
        let p = Profile64::gaussian_bump(base, amp, center, width).unwrap();
        let text = p.to_json().unwrap();
        let back = Profile64::from_json(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn identity_closes_for_constant_pairs(a1 in 0.0f64..2.0, a2 in 0.0f64..2.0) {
        let rows = identity_residual(&Profile64::constant(a1), &Profile64::constant(a2), 1.0, 1.0 / 100.0).unwrap();
        let worst = rows.iter().map(|b| b.residual.abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-5, "{}", worst);
    }
}

#[test]
fn single_precision_tracks_double() {
    let h = 1.0 / 100.0;
    let d64 = forward_trace(&Profile64::gaussian_bump(1.0, 0.3, 0.4, 0.05).unwrap(), 1.0, h).unwrap();
    let p32 = dampwave::RadialProfile::<f32>::gaussian_bump(1.0, 0.3, 0.4, 0.05).unwrap();
    let d32 = forward_trace(&p32, 1.0f32, h as f32).unwrap();
    for (x, y) in d64.values().iter().zip(d32.values()) {
        assert!((x - *y as f64).abs() < 1e-5, "{x} vs {y}");
    }
}
