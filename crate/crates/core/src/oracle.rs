//! Closed-form regular part for constant damping `a`.
//!
//! With `u = e^{−at/2}·ũ` the damped equation becomes the Klein–Gordon-type
//! equation `ũ_tt − Δũ − (a²/4)ũ = δ`, whose regular part behind the cone is
//! `(a/8π)·I₁(aτ/2)/τ`, `τ = √(t² − r²)`.

use crate::error::{Error, Result};
use crate::goursat::Trace;
use crate::Scalar;

const MAX_ARGUMENT: f64 = 100.0;

/// `Σ_{m≥0} (z/2)^{2m} / (m!(m+1)!)`, so that `I₁(z) = (z/2)·series`.
fn i1_series<S: Scalar>(z: S) -> Result<S> {
    if !(z.abs() <= S::lit(MAX_ARGUMENT)) {
        return Err(Error::Range { z: z.to_f64_lossy() });
    }
    let q = z * z / S::lit(4.0);
    let tol = S::lit(S::SERIES_TOL);
    let mut term = S::one();
    let mut sum = S::one();
    let mut m = 0usize;
    loop {
        m += 1;
        term = term * q / (S::from_usize_exact(m) * S::from_usize_exact(m + 1));
        sum = sum + term;
        if term <= tol * sum {
            return Ok(sum);
        }
    }
}

/// Modified Bessel function `I₁`.
pub fn bessel_i1<S: Scalar>(z: S) -> Result<S> {
    Ok(z / S::lit(2.0) * i1_series(z)?)
}

/// `I₁(z)/z`, equal to 1/2 at the origin.
pub fn bessel_i1_over_z<S: Scalar>(z: S) -> Result<S> {
    Ok(i1_series(z)? / S::lit(2.0))
}

/// `v(r, t)` for constant damping `a`, `t > r ≥ 0`.
pub fn oracle_field_constant<S: Scalar>(a: S, r: S, t: S) -> Result<S> {
    if !(r >= S::zero()) {
        return Err(Error::domain("radius", r));
    }
    if !(t > r) {
        return Err(Error::domain("time behind the cone", t));
    }
    let tau = ((t - r) * (t + r)).sqrt();
    let half = S::lit(0.5);
    let eight_pi = S::lit(8.0) * S::PI();
    Ok((-half * a * t).exp() * a / eight_pi * (half * a) * bessel_i1_over_z(half * a * tau)?)
}

/// Limit of [`oracle_field_constant`] as `t → r⁺`: `(a²/32π)·e^{−ar/2}`.
pub fn oracle_cone_limit<S: Scalar>(a: S, r: S) -> S {
    a * a / (S::lit(32.0) * S::PI()) * (-a * r / S::lit(2.0)).exp()
}

/// Receiver trace `v(0, m·dt)`, `m = 0..=T/dt`, with `d₀ = a²/32π`.
pub fn oracle_trace_constant<S: Scalar>(a: S, horizon: S, dt: S) -> Result<Trace<S>> {
    let samples = crate::goursat::whole_steps(horizon, dt, "trace horizon / dt")?;
    let mut values = Vec::with_capacity(samples + 1);
    values.push(oracle_cone_limit(a, S::zero()));
    for m in 1..=samples {
        values.push(oracle_field_constant(a, S::zero(), S::from_usize_exact(m) * dt)?);
    }
    Ok(Trace::new(dt, values))
}
