//! Recovery of the damping profile on `[0, T/2]` from the receiver trace.
//!
//! The forward map is causal: the trace at `t` sees the profile only on
//! `[0, t/2]`. Layer stripping exploits this by fixing one spline node per
//! data time `2σ_k`; an optional Levenberg–Marquardt pass then fits all
//! nodes to the whole trace at once.
//!
//! This module runs in `f64` only.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goursat::{forward_trace, Trace};
use crate::profiles::{RadialProfile, Shape};

/// Tolerance below which a negative `d₀` is treated as round-off.
pub const D0_TOLERANCE: f64 = 1e-8;

fn default_secant_tol() -> f64 {
    1e-10
}
fn default_max_secant_iters() -> usize {
    30
}
fn default_amplitude_bound() -> f64 {
    1e3
}
fn default_lambda() -> f64 {
    1e-6
}
fn default_gn_iters() -> usize {
    10
}
fn default_step_tol() -> f64 {
    1e-10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussNewtonConfig {
    /// Weight of the squared second differences of the node values.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gn_iters")]
    pub max_iters: usize,
    /// Stop once `‖Δx‖ ≤ step_tol·(1 + ‖x‖)`.
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
}

impl Default for GaussNewtonConfig {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            max_iters: default_gn_iters(),
            step_tol: default_step_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// `A(0)`; the data determine only its magnitude.
    pub a0: f64,
    pub n_layers: usize,
    pub solver_h: f64,
    #[serde(default = "default_secant_tol")]
    pub secant_tol: f64,
    #[serde(default = "default_max_secant_iters")]
    pub max_secant_iters: usize,
    /// Any node with `|A|` above this aborts the march.
    #[serde(default = "default_amplitude_bound")]
    pub amplitude_bound: f64,
    #[serde(default)]
    pub gn: Option<GaussNewtonConfig>,
}

impl InversionConfig {
    pub fn new(a0: f64, n_layers: usize, solver_h: f64) -> Self {
        Self {
            a0,
            n_layers,
            solver_h,
            secant_tol: default_secant_tol(),
            max_secant_iters: default_max_secant_iters(),
            amplitude_bound: default_amplitude_bound(),
            gn: None,
        }
    }

    pub fn with_gauss_newton(mut self, gn: GaussNewtonConfig) -> Self {
        self.gn = Some(gn);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !self.a0.is_finite() {
            return bad("a0 must be finite");
        }
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1");
        }
        if !(self.solver_h > 0.0) || !self.solver_h.is_finite() {
            return bad("solver_h must be positive");
        }
        if !(self.secant_tol > 0.0) {
            return bad("secant_tol must be positive");
        }
        if self.max_secant_iters == 0 {
            return bad("max_secant_iters must be at least 1");
        }
        if !(self.amplitude_bound > self.a0.abs()) {
            return bad("amplitude_bound must exceed |a0|");
        }
        if let Some(gn) = &self.gn {
            if !(gn.lambda >= 0.0) || !(gn.step_tol >= 0.0) {
                return bad("gauss-newton lambda and step_tol must be non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Iterations {
    /// Secant steps summed over all layers.
    pub layer_stripping: usize,
    /// Accepted plus rejected Levenberg–Marquardt trials.
    pub gauss_newton: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionReport {
    pub profile: RadialProfile<f64>,
    /// `|F(A)(2σ_k) − d(2σ_k)|` when layer `k` was fixed; zero for the pinned node.
    pub per_layer_misfit: Vec<f64>,
    /// RMS of `F(A)(t_m) − d(t_m)` over the solver trace grid, `t_m > 0`.
    pub final_misfit: f64,
    pub iterations: Iterations,
    /// Objective after each accepted refinement step, starting with the
    /// initial profile. Empty without refinement.
    pub misfit_history: Vec<f64>,
    /// Refinement hit `max_iters` without ever lowering the objective.
    pub stagnated: bool,
}

impl InversionReport {
    pub fn nodes(&self) -> &[f64] {
        match self.profile.shape() {
            Shape::SampledSpline(s) => s.values(),
            _ => &[],
        }
    }

    /// CSV with columns `iter,misfit`.
    pub fn misfit_csv(&self) -> String {
        let mut out = String::from("iter,misfit\n");
        for (k, m) in self.misfit_history.iter().enumerate() {
            out.push_str(&format!("{k},{m}\n"));
        }
        out
    }
}

/// `|A(0)| = √(32π·d₀)`; the sign is not in the data.
pub fn estimate_a0_magnitude(d: &Trace<f64>) -> Result<f64> {
    let d0 = *d
        .values()
        .first()
        .ok_or_else(|| Error::Usage("empty trace".into()))?;
    if d0 < -D0_TOLERANCE {
        return Err(Error::InconsistentData { d0 });
    }
    Ok((32.0 * std::f64::consts::PI * d0.max(0.0)).sqrt())
}

/// The first layer's sub-triangle must be deep enough to read a trace from.
const MIN_LEVELS_PER_LAYER: usize = 3;

struct Layout {
    horizon: f64,
    dr: f64,
    /// Solver levels per layer.
    levels_per_layer: usize,
}

fn layout(d: &Trace<f64>, cfg: &InversionConfig) -> Result<Layout> {
    cfg.validate()?;
    let horizon = d.horizon();
    let dr = horizon / (2.0 * cfg.n_layers as f64);
    let q = dr / cfg.solver_h;
    if (q - q.round()).abs() > 1e-6 || q.round() < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "layer width {dr} is not a whole number of solver steps {}",
            cfg.solver_h
        )));
    }
    if q.round() < MIN_LEVELS_PER_LAYER as f64 {
        return Err(Error::InvalidConfig(format!(
            "layer width {dr} spans fewer than {MIN_LEVELS_PER_LAYER} solver steps"
        )));
    }
    Ok(Layout {
        horizon,
        dr,
        levels_per_layer: q.round() as usize,
    })
}

fn spline(dr: f64, nodes: &[f64]) -> Result<RadialProfile<f64>> {
    if nodes.len() == 1 {
        return RadialProfile::sampled_spline(0.0, dr, vec![nodes[0]; 2]);
    }
    RadialProfile::sampled_spline(0.0, dr, nodes.to_vec())
}

/// Trace residuals `F(A)(t_m) − d(t_m)` for `m = 1..`, on the solver's
/// trace grid.
fn residuals(p: &RadialProfile<f64>, d: &Trace<f64>, horizon: f64, h: f64) -> Result<Vec<f64>> {
    let f = forward_trace(p, horizon, h)?;
    (1..f.values().len())
        .map(|m| Ok(f.values()[m] - d.at(m as f64 * f.dt())?))
        .collect()
}

fn rms(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
}

/// RMS trace misfit of `p` against `d` at solver step `h`.
pub fn trace_misfit(p: &RadialProfile<f64>, d: &Trace<f64>, h: f64) -> Result<f64> {
    Ok(rms(&residuals(p, d, d.horizon(), h)?))
}

/// Marches `σ_k = k·Δr`, fixing node `k` so that the trace computed on the
/// sub-triangle of horizon `2σ_k` matches `d(2σ_k)`. The secant iteration
/// starts from the previous node and its linear extrapolation. Runs
/// [`refine_gauss_newton`] afterwards when `cfg.gn` is set.
pub fn invert_layer_stripping(d: &Trace<f64>, cfg: &InversionConfig) -> Result<InversionReport> {
    let lay = layout(d, cfg)?;
    let h = cfg.solver_h;
    let mut nodes = vec![cfg.a0];
    let mut per_layer = vec![0.0];
    let mut steps = 0usize;

    for k in 1..=cfg.n_layers {
        let sigma = k as f64 * lay.dr;
        let target = d.at(2.0 * sigma)?;
        // The trace at 2σ_k is read from r = 2h and 4h, so it sees the
        // profile up to σ_k + 2h. Solve two levels deeper over a ghost node
        // extrapolated quadratically, which also keeps the natural end
        // condition of the spline away from σ_k.
        let m = k * lay.levels_per_layer;
        let horizon = 2.0 * (m + 2) as f64 * h;
        let mismatch = |x: f64, nodes: &mut Vec<f64>| -> Result<f64> {
            nodes.push(x);
            let n = nodes.len();
            let ghost = if n >= 3 { 3.0 * x - 3.0 * nodes[n - 2] + nodes[n - 3] } else { 2.0 * x - nodes[n - 2] };
            nodes.push(ghost);
            let p = spline(lay.dr, nodes);
            nodes.pop();
            nodes.pop();
            let tr = forward_trace(&p?, horizon, h)?;
            Ok(tr.values()[m] - target)
        };

        let prev = nodes[k - 1];
        let mut x0 = prev;
        let mut f0 = mismatch(x0, &mut nodes)?;
        let guess = if k >= 2 { 2.0 * prev - nodes[k - 2] } else { prev };
        let mut x1 = if (guess - prev).abs() > 1e-6 * (1.0 + prev.abs()) {
            guess
        } else {
            prev + 1e-3 * (1.0 + prev.abs())
        };
        let mut f1 = f0;
        let mut converged = f0.abs() <= cfg.secant_tol;
        if converged {
            x1 = x0;
        } else {
            for _ in 0..cfg.max_secant_iters {
                steps += 1;
                if !(x1.abs() <= cfg.amplitude_bound) {
                    return Err(Error::Divergence { layer: k, value: x1 });
                }
                f1 = mismatch(x1, &mut nodes)?;
                if f1.abs() <= cfg.secant_tol {
                    converged = true;
                    break;
                }
                if f1 == f0 {
                    break;
                }
                let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
                x0 = x1;
                f0 = f1;
                x1 = x2;
            }
        }
        if !converged {
            return Err(Error::LayerFailed {
                layer: k,
                lo: x0.min(x1),
                hi: x0.max(x1),
                residual: f1.abs(),
            });
        }
        nodes.push(x1);
        per_layer.push(f1.abs());
    }

    let profile = spline(lay.dr, &nodes)?;
    let final_misfit = rms(&residuals(&profile, d, lay.horizon, h)?);
    let report = InversionReport {
        profile,
        per_layer_misfit: per_layer,
        final_misfit,
        iterations: Iterations {
            layer_stripping: steps,
            gauss_newton: 0,
        },
        misfit_history: Vec::new(),
        stagnated: false,
    };
    match &cfg.gn {
        Some(_) => {
            let refined = refine_gauss_newton(&report.profile, d, cfg)?;
            Ok(InversionReport {
                per_layer_misfit: report.per_layer_misfit,
                iterations: Iterations {
                    layer_stripping: steps,
                    gauss_newton: refined.iterations.gauss_newton,
                },
                ..refined
            })
        }
        None => Ok(report),
    }
}

/// Second-difference operator on `n + 1` nodes, `(n − 1) × (n + 1)`.
fn second_differences(n: usize) -> DMatrix<f64> {
    let mut d2 = DMatrix::zeros(n.saturating_sub(1), n + 1);
    for j in 1..n {
        d2[(j - 1, j - 1)] = 1.0;
        d2[(j - 1, j)] = -2.0;
        d2[(j - 1, j + 1)] = 1.0;
    }
    d2
}

/// Levenberg–Marquardt on `Σ_m (F(A)(t_m) − d_m)² + λ‖D₂A‖²` over the
/// spline nodes, node 0 held at `cfg.a0`. The initial profile is resampled
/// onto the layer grid of `cfg`. Only steps that lower the objective are
/// accepted.
pub fn refine_gauss_newton(init: &RadialProfile<f64>, d: &Trace<f64>, cfg: &InversionConfig) -> Result<InversionReport> {
    let lay = layout(d, cfg)?;
    let gn = cfg.gn.unwrap_or_default();
    let h = cfg.solver_h;
    let n = cfg.n_layers;
    let mut x: Vec<f64> = (0..=n)
        .map(|j| init.eval(j as f64 * lay.dr).map(|v| v.0))
        .collect::<Result<_>>()?;
    x[0] = cfg.a0;

    let d2 = second_differences(n);
    let objective = |x: &[f64], r: &[f64]| -> f64 {
        let reg = &d2 * DVector::from_column_slice(x);
        r.iter().map(|v| v * v).sum::<f64>() + gn.lambda * reg.norm_squared()
    };
    let eval = |x: &[f64]| -> Result<Vec<f64>> { residuals(&spline(lay.dr, x)?, d, lay.horizon, h) };

    let mut r = eval(&x)?;
    let mut phi = objective(&x, &r);
    let mut history = vec![phi];
    let mut trials = 0usize;
    let mut mu = 1e-3;
    let mut improved = false;
    let mut exhausted = true;

    // Columns of d2 for the free nodes.
    let d2_free = d2.columns(1, n).into_owned();
    let reg_hessian = d2_free.transpose() * &d2_free * gn.lambda;

    'outer: while trials < gn.max_iters {
        let jac_cols = (1..=n)
            .into_par_iter()
            .map(|j| {
                let step = 1e-7 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                xp[j] += step;
                let rp = eval(&xp)?;
                Ok(rp.iter().zip(&r).map(|(a, b)| (a - b) / step).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let m = r.len();
        let jac = DMatrix::from_fn(m, n, |i, j| jac_cols[j][i]);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r)
            + (d2_free.transpose() * (&d2 * DVector::from_column_slice(&x))) * gn.lambda;
        let normal = &jtj + &reg_hessian;

        loop {
            if trials >= gn.max_iters {
                break 'outer;
            }
            trials += 1;
            let mut lhs = normal.clone();
            for j in 0..n {
                lhs[(j, j)] += mu * jtj[(j, j)].max(1e-300);
            }
            let step = match lhs.clone().cholesky() {
                Some(c) => c.solve(&(-&grad)),
                None => match lhs.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        mu *= 10.0;
                        continue;
                    }
                },
            };
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step.norm() <= gn.step_tol * (1.0 + xnorm) {
                exhausted = false;
                break 'outer;
            }
            let mut trial = x.clone();
            for j in 0..n {
                trial[j + 1] += step[j];
            }
            if trial.iter().any(|v| !(v.abs() <= cfg.amplitude_bound)) {
                mu *= 4.0;
                continue;
            }
            let rt = match eval(&trial) {
                Ok(rt) => rt,
                Err(e) if e.is_numeric() => {
                    mu *= 4.0;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let phi_t = objective(&trial, &rt);
            if phi_t < phi {
                x = trial;
                r = rt;
                phi = phi_t;
                history.push(phi);
                improved = true;
                mu = (mu / 3.0).max(1e-12);
                continue 'outer;
            }
            mu *= 4.0;
        }
    }

    Ok(InversionReport {
        profile: spline(lay.dr, &x)?,
        per_layer_misfit: Vec::new(),
        final_misfit: rms(&r),
        iterations: Iterations {
            layer_stripping: 0,
            gauss_newton: trials,
        },
        misfit_history: history,
        stagnated: exhausted && !improved && gn.max_iters > 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwinReport {
    /// `max |d₁ − d₂|` over the whole trace.
    pub trace_gap: f64,
    /// `max |A₁ − A₂|` sampled on `[0, T/2]`.
    pub profile_gap_inside: f64,
    /// `max |A₁ − A₂|` sampled on `(T/2, T]`.
    pub profile_gap_outside: f64,
}

const TWIN_SAMPLES: usize = 2000;

fn sampled_gap(p1: &RadialProfile<f64>, p2: &RadialProfile<f64>, lo: f64, hi: f64) -> Result<f64> {
    let mut gap = 0.0f64;
    let mut points: Vec<f64> = (0..=TWIN_SAMPLES)
        .map(|k| lo + (hi - lo) * k as f64 / TWIN_SAMPLES as f64)
        .collect();
    points.extend(p1.breakpoints().into_iter().chain(p2.breakpoints()).filter(|&b| b >= lo && b <= hi));
    for r in points {
        gap = gap.max((p1.eval(r)?.0 - p2.eval(r)?.0).abs());
    }
    Ok(gap)
}

/// `max |d₁ − d₂|` over `[0, T]` at step `h`.
pub fn trace_gap(p1: &RadialProfile<f64>, p2: &RadialProfile<f64>, horizon: f64, h: f64) -> Result<f64> {
    let d1 = forward_trace(p1, horizon, h)?;
    let d2 = forward_trace(p2, horizon, h)?;
    Ok(d1
        .values()
        .iter()
        .zip(d2.values())
        .fold(0.0f64, |g, (a, b)| g.max((a - b).abs())))
}

/// Traces of two profiles that coincide on `[0, T/2]`. Profiles that differ
/// inside the ball are a usage error; see [`trace_gap`] for that case.
pub fn uniqueness_twin_test(p1: &RadialProfile<f64>, p2: &RadialProfile<f64>, horizon: f64, h: f64) -> Result<TwinReport> {
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon", horizon));
    }
    let half = horizon / 2.0;
    let inside = sampled_gap(p1, p2, 0.0, half)?;
    if inside > 0.0 {
        return Err(Error::Usage(format!(
            "profiles differ by {inside:e} inside the ball of radius {half}"
        )));
    }
    Ok(TwinReport {
        trace_gap: trace_gap(p1, p2, horizon, h)?,
        profile_gap_inside: inside,
        profile_gap_outside: sampled_gap(p1, p2, half, horizon)?,
    })
}
