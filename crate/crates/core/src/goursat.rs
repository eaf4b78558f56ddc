//! Characteristic boundary value problem for the regular part `v`.
//!
//! Radial symmetry and the substitution `w = r·v` turn the damped equation
//! into `w_tt − w_rr + A(r)·w_t = 0`; in characteristic coordinates
//! `μ = (t + r)/2`, `ν = (t − r)/2` this is
//!
//! ```text
//! w_μν + (A(μ − ν)/2)·(w_μ + w_ν) = (μ − ν)·g
//! ```
//!
//! with `w = r·v_b(r)` on the cone `ν = 0` and `w = 0` on the axis `μ = ν`.
//! A second-order box scheme marches it on the triangle `0 ≤ ν ≤ μ`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::oracle_trace_constant;
use crate::profiles::{cone_w_on_grid, RadialProfile};
use crate::Scalar;

/// Source term `g(r, t)` added to the equation for `v`.
pub type Forcing<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;

/// Number of μ columns computed past `T/2`, needed to read the trace at
/// `t = T` from the radii `2h` and `4h`.
const EXTRA_COLUMNS: usize = 2;

/// `total / step` as a whole number, or an error naming `what`.
pub(crate) fn whole_steps<S: Scalar>(total: S, step: S, what: &str) -> Result<usize> {
    if !(total > S::zero()) || !(step > S::zero()) || !total.is_finite() {
        return Err(Error::InvalidConfig(format!("{what}: need positive finite values")));
    }
    let q = total / step;
    let n = q.round();
    if (q - n).abs() > S::lit(1e-6) * n.max(S::one()) || n < S::one() {
        return Err(Error::InvalidConfig(format!(
            "{what} = {} is not a positive integer",
            q.to_f64_lossy()
        )));
    }
    n.to_usize()
        .ok_or_else(|| Error::InvalidConfig(format!("{what} is too large")))
}

#[derive(Clone)]
pub struct SolverConfig<S> {
    /// Trace horizon `T`; the trace covers `(0, T]`.
    pub horizon: S,
    /// Grid step in both μ and ν.
    pub step: S,
    pub forcing: Option<Forcing<S>>,
}

impl<S: Scalar> SolverConfig<S> {
    pub fn new(horizon: S, step: S) -> Self {
        Self {
            horizon,
            step,
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, g: impl Fn(S, S) -> S + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(g));
        self
    }

    /// `T/(2h)`.
    pub fn levels(&self) -> Result<usize> {
        whole_steps(self.horizon, S::lit(2.0) * self.step, "T/(2h)")
    }
}

impl<S: std::fmt::Debug> std::fmt::Debug for SolverConfig<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("horizon", &self.horizon)
            .field("step", &self.step)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// `w = r·v` on the characteristic grid: `w[i][j]` sits at `μ = i·h`,
/// `ν = j·h`, i.e. `t = (i + j)h`, `r = (i − j)h`, for `0 ≤ j ≤ i ≤ cols`.
#[derive(Clone, Debug)]
pub struct WaveField<S> {
    h: S,
    n_levels: usize,
    cols: usize,
    w: Vec<S>,
    fingerprint: u64,
}

impl<S: Scalar> WaveField<S> {
    /// Samples `w(r, t)` on the grid; for manufactured fields and tests.
    pub fn from_fn(h: S, n_levels: usize, w: impl Fn(S, S) -> S) -> Self {
        let cols = n_levels + EXTRA_COLUMNS;
        let mut data = Vec::with_capacity(tri(cols + 1, 0));
        for i in 0..=cols {
            for j in 0..=i {
                let (r, t) = (S::from_usize_exact(i - j) * h, S::from_usize_exact(i + j) * h);
                data.push(w(r, t));
            }
        }
        Self {
            h,
            n_levels,
            cols,
            w: data,
            fingerprint: 0,
        }
    }

    pub fn h(&self) -> S {
        self.h
    }

    /// `T/(2h)`.
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Largest μ index stored.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn horizon(&self) -> S {
        S::lit(2.0) * S::from_usize_exact(self.n_levels) * self.h
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `w` at `μ = i·h`, `ν = j·h`. Panics outside `0 ≤ j ≤ i ≤ cols`.
    #[inline]
    pub fn w(&self, i: usize, j: usize) -> S {
        assert!(j <= i && i <= self.cols, "grid index ({i}, {j}) outside the triangle");
        self.w[tri(i, j)]
    }

    /// `v = w/r` off the axis.
    pub fn v(&self, i: usize, j: usize) -> S {
        self.w(i, j) / (S::from_usize_exact(i - j) * self.h)
    }

    /// `∂_t w = (w_μ + w_ν)/2` by central differences; one-sided on the cone
    /// and at the last column, zero on the axis (where `w ≡ 0`).
    pub(crate) fn dt_w(&self, i: usize, j: usize) -> S {
        if i == j {
            return S::zero();
        }
        let two_h = S::lit(2.0) * self.h;
        let (three, four) = (S::lit(3.0), S::lit(4.0));
        let w_mu = if i < self.cols {
            (self.w(i + 1, j) - self.w(i - 1, j)) / two_h
        } else {
            (three * self.w(i, j) - four * self.w(i - 1, j) + self.w(i - 2, j)) / two_h
        };
        let w_nu = if j > 0 {
            (self.w(i, j + 1) - self.w(i, j - 1)) / two_h
        } else if i >= 2 {
            (-three * self.w(i, 0) + four * self.w(i, 1) - self.w(i, 2)) / two_h
        } else {
            (self.w(i, 1) - self.w(i, 0)) / self.h
        };
        (w_mu + w_nu) / S::lit(2.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,nu,r,t,w\n");
        for i in 0..=self.cols {
            for j in 0..=i {
                let (mu, nu) = (S::from_usize_exact(i) * self.h, S::from_usize_exact(j) * self.h);
                out.push_str(&format!("{},{},{},{},{}\n", mu, nu, mu - nu, mu + nu, self.w(i, j)));
            }
        }
        out
    }
}

/// Receiver data `d_m ≈ v(0, m·dt)`; `d_0` holds the limit `t → 0⁺`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace<S> {
    dt: S,
    values: Vec<S>,
}

impl<S: Scalar> Trace<S> {
    pub fn new(dt: S, values: Vec<S>) -> Self {
        Self { dt, values }
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn horizon(&self) -> S {
        S::from_usize_exact(self.values.len() - 1) * self.dt
    }

    pub fn index_of(&self, t: S) -> Result<usize> {
        let q = t / self.dt;
        let m = q.round();
        if !(t >= S::zero()) || (q - m).abs() > S::lit(1e-6) || m.to_usize().is_none_or(|m| m >= self.values.len()) {
            return Err(Error::domain("trace time", t));
        }
        Ok(m.to_usize().expect("checked above"))
    }

    /// Sample at a grid time `t`.
    pub fn at(&self, t: S) -> Result<S> {
        Ok(self.values[self.index_of(t)?])
    }

    /// `t,v0` CSV; the `t = 0` row holds the extrapolated limit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v0\n");
        for (m, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", S::from_usize_exact(m) * self.dt, v));
        }
        out
    }

    /// Parses the `t,v0` CSV written by [`Trace::to_csv`]. Rows must be on a
    /// uniform grid starting at `t = 0`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "t,v0" => {}
            _ => return Err(Error::InvalidConfig("trace CSV must start with header `t,v0`".into())),
        }
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (n, line) in lines.enumerate() {
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<S> {
                c.and_then(|s| s.trim().parse::<f64>().ok())
                    .map(S::lit)
                    .ok_or_else(|| Error::InvalidConfig(format!("trace CSV row {}: expected two numbers", n + 2)))
            };
            ts.push(parse(cols.next())?);
            vs.push(parse(cols.next())?);
        }
        if ts.len() < 2 || ts[0] != S::zero() {
            return Err(Error::InvalidConfig("trace CSV needs at least two rows starting at t = 0".into()));
        }
        let dt = ts[1];
        for (m, t) in ts.iter().enumerate() {
            let expected = S::from_usize_exact(m) * dt;
            if (*t - expected).abs() > S::lit(1e-9) * expected.max(S::one()) {
                return Err(Error::InvalidConfig(format!("trace CSV row {}: non-uniform time grid", m + 2)));
            }
        }
        Ok(Self::new(dt, vs))
    }
}

/// Runs the box scheme on a triangle of `cols + 1` μ columns.
///
/// `cone_w[i]` is `w` at `μ = i·h` on the cone, `coef[k]` is `A(k·h)`; both
/// need `cols + 1` entries. Cell `(i, j)` has corners `a = w[i][j]`,
/// `b = w[i+1][j]`, `c = w[i][j+1]`, `d = w[i+1][j+1]` and is closed by
/// `(d − b − c + a)/h² + (A_c/2)(d − a)/h = r_c·g_c` at its center, where
/// `r_c = (i − j)h`.
pub fn march_characteristic_grid<S: Scalar>(
    h: S,
    cols: usize,
    cone_w: &[S],
    coef: &[S],
    forcing: Option<&Forcing<S>>,
) -> Result<Vec<S>> {
    assert!(cone_w.len() > cols && coef.len() > cols, "boundary arrays too short");
    for &a in &coef[1..=cols] {
        if !(a.abs() * h < S::one()) {
            return Err(Error::StepSize {
                h: h.to_f64_lossy(),
                coefficient: a.to_f64_lossy(),
            });
        }
    }
    let mut w = vec![S::zero(); tri(cols + 1, 0)];
    for (i, &b) in cone_w.iter().enumerate().take(cols + 1) {
        w[tri(i, 0)] = b;
    }
    let half_h = h / S::lit(2.0);
    let h2 = h * h;
    for jj in 1..=cols {
        w[tri(jj, jj)] = S::zero();
        for ii in jj + 1..=cols {
            let a = w[tri(ii - 1, jj - 1)];
            let b = w[tri(ii, jj - 1)];
            let c = w[tri(ii - 1, jj)];
            let damp = coef[ii - jj] * half_h;
            let source = match forcing {
                Some(g) => {
                    let r = S::from_usize_exact(ii - jj) * h;
                    let t = S::from_usize_exact(ii + jj - 1) * h;
                    r * g(r, t) * h2
                }
                None => S::zero(),
            };
            w[tri(ii, jj)] = (b + c - a * (S::one() - damp) + source) / (S::one() + damp);
        }
    }
    Ok(w)
}

fn fingerprint<S: Scalar>(p: &RadialProfile<S>, cfg: &SolverConfig<S>) -> u64 {
    let mut hasher = DefaultHasher::new();
    serde_json::to_string(p).unwrap_or_default().hash(&mut hasher);
    cfg.horizon.to_f64_lossy().to_bits().hash(&mut hasher);
    cfg.step.to_f64_lossy().to_bits().hash(&mut hasher);
    cfg.forcing.is_some().hash(&mut hasher);
    hasher.finish()
}

/// Solves for `w = r·v` up to the trace horizon.
///
/// The profile is read only on `[0, T/2]`: beyond that radius it is held
/// constant, so anything outside the ball that the trace on `[0, T]` can see
/// has no influence on the output, bit for bit.
pub fn solve_goursat<S: Scalar>(p: &RadialProfile<S>, cfg: &SolverConfig<S>) -> Result<WaveField<S>> {
    p.validate()?;
    let n_levels = cfg.levels()?;
    let h = cfg.step;
    let cols = n_levels + EXTRA_COLUMNS;
    let seen = p.truncated(cfg.horizon / S::lit(2.0));
    let cone = cone_w_on_grid(&seen, h, cols)?;
    let coef: Vec<S> = (0..=cols)
        .map(|k| seen.eval_unchecked(S::from_usize_exact(k) * h).0)
        .collect();
    let w = march_characteristic_grid(h, cols, &cone, &coef, cfg.forcing.as_ref())?;
    Ok(WaveField {
        h,
        n_levels,
        cols,
        w,
        fingerprint: fingerprint(p, cfg),
    })
}

/// Reads `v(0, t)` at `t = 2mh` from the radii `2h` and `4h` by the even
/// extrapolation `(4·v(2h) − v(4h))/3`. At `t = 2h` only the cone point
/// `r = 2h` exists, so the `r²` coefficient is borrowed from `t = 4h`.
/// `d₀` is the quadratic extrapolation `3d₁ − 3d₂ + d₃`.
pub fn extract_trace<S: Scalar>(f: &WaveField<S>) -> Result<Trace<S>> {
    let n = f.n_levels;
    if n < 3 {
        return Err(Error::InsufficientResolution { levels: n, needed: 3 });
    }
    let three = S::lit(3.0);
    let mut values = vec![S::zero(); n + 1];
    let mut first_curvature = S::zero();
    for (m, value) in values.iter_mut().enumerate().skip(2) {
        let v2 = f.v(m + 1, m - 1);
        let v4 = f.v(m + 2, m - 2);
        *value = (S::lit(4.0) * v2 - v4) / three;
        if m == 2 {
            first_curvature = (v4 - v2) / three;
        }
    }
    values[1] = f.v(2, 0) - first_curvature;
    values[0] = three * values[1] - three * values[2] + values[3];
    Ok(Trace::new(S::lit(2.0) * f.h, values))
}

/// Solve and read the trace in one call.
pub fn forward_trace<S: Scalar>(p: &RadialProfile<S>, horizon: S, h: S) -> Result<Trace<S>> {
    extract_trace(&solve_goursat(p, &SolverConfig::new(horizon, h))?)
}

fn grid_index<S: Scalar>(x: S, what: &'static str) -> Result<usize> {
    let n = x.round();
    if !(x >= -S::lit(1e-9)) || (x - n).abs() > S::lit(1e-6) {
        return Err(Error::domain(what, x));
    }
    n.to_usize().ok_or_else(|| Error::domain(what, x))
}

/// `∂_t v(r, t) = ∂_t w / r` at a grid point; on the axis, the even
/// extrapolation of `∂_t v` from `r = 2h` and `r = 4h`.
pub fn time_derivative<S: Scalar>(f: &WaveField<S>, r: S, t: S) -> Result<S> {
    let two_h = S::lit(2.0) * f.h;
    if !(r >= S::zero()) || !(t > r) {
        return Err(Error::domain("time-derivative point", t - r));
    }
    let i = grid_index((t + r) / two_h, "μ index")?;
    let j = grid_index((t - r) / two_h, "ν index")?;
    if i > f.cols || j > i {
        return Err(Error::domain("time-derivative point", t));
    }
    if i > j {
        return Ok(f.dt_w(i, j) / (S::from_usize_exact(i - j) * f.h));
    }
    if j < 2 || i + 2 > f.cols {
        return Err(Error::domain("axis point too close to the grid edge", t));
    }
    let at2 = f.dt_w(i + 1, j - 1) / two_h;
    let at4 = f.dt_w(i + 2, j - 2) / (S::lit(2.0) * two_h);
    Ok((S::lit(4.0) * at2 - at4) / S::lit(3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ObservedOrder<S> {
    /// First row: nothing to compare against.
    NotApplicable,
    /// Both errors vanish.
    Exact,
    Rate(S),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow<S> {
    pub h: S,
    pub error: S,
    pub order: ObservedOrder<S>,
}

/// Max trace error for each step, against the closed form when `p` is a
/// constant and otherwise against the Richardson extrapolation
/// `(4·d_{h/4} − d_{h/2})/3` from two extra refinements of the finest step.
/// Errors are compared on the coarsest trace grid, `t > 0`.
pub fn convergence_study<S: Scalar>(p: &RadialProfile<S>, horizon: S, steps: &[S]) -> Result<Vec<ConvergenceRow<S>>> {
    if steps.len() < 2 {
        return Err(Error::Usage("convergence study needs at least two steps".into()));
    }
    if steps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Usage("steps must be strictly descending".into()));
    }
    let traces = steps
        .iter()
        .map(|&h| forward_trace(p, horizon, h))
        .collect::<Result<Vec<_>>>()?;
    let coarse_dt = S::lit(2.0) * steps[0];
    let samples = whole_steps(horizon, coarse_dt, "T/(2h)")?;
    let times: Vec<S> = (1..=samples).map(|m| S::from_usize_exact(m) * coarse_dt).collect();

    let reference: Vec<S> = match p.as_constant() {
        Some(a) => {
            let exact = oracle_trace_constant(a, horizon, coarse_dt)?;
            exact.values()[1..].to_vec()
        }
        None => {
            let finest = steps[steps.len() - 1];
            let half = forward_trace(p, horizon, finest / S::lit(2.0))?;
            let quarter = forward_trace(p, horizon, finest / S::lit(4.0))?;
            times
                .iter()
                .map(|&t| Ok((S::lit(4.0) * quarter.at(t)? - half.at(t)?) / S::lit(3.0)))
                .collect::<Result<_>>()?
        }
    };

    let mut rows: Vec<ConvergenceRow<S>> = Vec::with_capacity(steps.len());
    for (k, (&h, trace)) in steps.iter().zip(&traces).enumerate() {
        let mut error = S::zero();
        for (t, r) in times.iter().zip(&reference) {
            error = error.max((trace.at(*t)? - *r).abs());
        }
        let order = match rows.last() {
            None => ObservedOrder::NotApplicable,
            Some(prev) if prev.error == S::zero() && error == S::zero() => ObservedOrder::Exact,
            Some(prev) => ObservedOrder::Rate((prev.error / error).ln() / (steps[k - 1] / h).ln()),
        };
        rows.push(ConvergenceRow { h, error, order });
    }
    Ok(rows)
}

/// Richardson estimate `max|d_h − d_{2h}|/3` of the trace error at step `h`.
pub fn solver_error_estimate<S: Scalar>(p: &RadialProfile<S>, horizon: S, h: S) -> Result<S> {
    let fine = forward_trace(p, horizon, h)?;
    let coarse = forward_trace(p, horizon, S::lit(2.0) * h)?;
    let mut e = S::zero();
    for m in 1..coarse.values().len() {
        let t = S::from_usize_exact(m) * coarse.dt();
        e = e.max((fine.at(t)? - coarse.values()[m]).abs());
    }
    Ok(e / S::lit(3.0))
}
