//! Radial damping profiles and the ray geometry of the progressing-wave
//! split: ray average `k`, attenuation `R`, transport ratio `PR/R` and the
//! characteristic boundary data `v_b` on the cone `t = r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Simpson;
use crate::Scalar;

/// Damping coefficient `A(r)`, `r = |x|`, extended constantly beyond
/// `support_radius`.
///
/// JSON form: `{"kind": "...", "params": {...}, "support_radius": r}`. An
/// absent `support_radius` means no extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RadialProfile<S> {
    #[serde(flatten)]
    shape: Shape<S>,
    #[serde(default = "unbounded", skip_serializing_if = "is_unbounded")]
    support_radius: S,
}

fn unbounded<S: Scalar>() -> S {
    S::infinity()
}

fn is_unbounded<S: Scalar>(r: &S) -> bool {
    r.is_infinite()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", bound = "S: Scalar")]
pub enum Shape<S> {
    Constant {
        value: S,
    },
    /// `intercept + slope·r`
    Linear {
        #[serde(default)]
        intercept: S,
        slope: S,
    },
    /// `base + amplitude·exp(−(r − center)²/width)`
    GaussianBump {
        #[serde(default)]
        base: S,
        amplitude: S,
        center: S,
        width: S,
    },
    /// `Σ coeffs[k]·(r − shift)₊^k`; equal to `coeffs[0]` for `r < shift`.
    Polynomial {
        coeffs: Vec<S>,
        #[serde(default)]
        shift: S,
    },
    SampledSpline(CubicSpline<S>),
}

/// Natural cubic interpolant on the uniform grid `r0 + j·dr`, continued
/// linearly outside the node range (which keeps it C²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineNodes<S>", into = "SplineNodes<S>", bound = "S: Scalar")]
pub struct CubicSpline<S> {
    r0: S,
    dr: S,
    values: Vec<S>,
    second: Vec<S>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct SplineNodes<S> {
    r0: S,
    dr: S,
    values: Vec<S>,
}

impl<S: Scalar> TryFrom<SplineNodes<S>> for CubicSpline<S> {
    type Error = Error;

    fn try_from(n: SplineNodes<S>) -> Result<Self> {
        CubicSpline::new(n.r0, n.dr, n.values)
    }
}

impl<S: Scalar> From<CubicSpline<S>> for SplineNodes<S> {
    fn from(s: CubicSpline<S>) -> Self {
        SplineNodes {
            r0: s.r0,
            dr: s.dr,
            values: s.values,
        }
    }
}

impl<S: Scalar> CubicSpline<S> {
    pub fn new(r0: S, dr: S, values: Vec<S>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidProfile("spline needs at least two nodes".into()));
        }
        if !(dr > S::zero()) || !dr.is_finite() || !(r0 >= S::zero()) || !r0.is_finite() {
            return Err(Error::InvalidProfile("spline grid needs r0 ≥ 0 and dr > 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("spline values must be finite".into()));
        }
        let second = natural_second_derivatives(dr, &values);
        Ok(Self {
            r0,
            dr,
            values,
            second,
        })
    }

    pub fn r0(&self) -> S {
        self.r0
    }

    pub fn dr(&self) -> S {
        self.dr
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn node(&self, j: usize) -> S {
        self.r0 + S::from_usize_exact(j) * self.dr
    }

    fn last(&self) -> S {
        self.node(self.values.len() - 1)
    }

    fn segment(&self, j: usize, t: S) -> (S, S, S) {
        let one = S::one();
        let six = S::lit(6.0);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.second[j], self.second[j + 1]);
        let h = self.dr;
        let s = one - t;
        let a = s * y0 + t * y1 + h * h / six * ((s * s * s - s) * m0 + (t * t * t - t) * m1);
        let three = S::lit(3.0);
        let da = (y1 - y0) / h + h / six * (-(three * s * s - one) * m0 + (three * t * t - one) * m1);
        let dda = s * m0 + t * m1;
        (a, da, dda)
    }

    fn eval(&self, r: S) -> (S, S, S) {
        let n = self.values.len() - 1;
        if r <= self.r0 {
            let (a, da, _) = self.segment(0, S::zero());
            return (a + da * (r - self.r0), da, S::zero());
        }
        let last = self.last();
        if r >= last {
            let (a, da, _) = self.segment(n - 1, S::one());
            return (a + da * (r - last), da, S::zero());
        }
        let u = (r - self.r0) / self.dr;
        let j = u.floor().to_usize().unwrap_or(0).min(n - 1);
        self.segment(j, u - S::from_usize_exact(j))
    }
}

fn natural_second_derivatives<S: Scalar>(dr: S, y: &[S]) -> Vec<S> {
    let n = y.len() - 1;
    let mut m = vec![S::zero(); n + 1];
    if n < 2 {
        return m;
    }
    // Thomas algorithm for M[j-1] + 4 M[j] + M[j+1] = 6 Δ²y[j] / dr², j = 1..n-1.
    let six_over = S::lit(6.0) / (dr * dr);
    let four = S::lit(4.0);
    let mut diag = vec![S::zero(); n];
    let mut rhs = vec![S::zero(); n];
    for j in 1..n {
        let b = six_over * (y[j + 1] - S::lit(2.0) * y[j] + y[j - 1]);
        if j == 1 {
            diag[j] = four;
            rhs[j] = b;
        } else {
            let w = S::one() / diag[j - 1];
            diag[j] = four - w;
            rhs[j] = b - w * rhs[j - 1];
        }
    }
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for j in (1..n - 1).rev() {
        m[j] = (rhs[j] - m[j + 1]) / diag[j];
    }
    m
}

impl<S: Scalar> RadialProfile<S> {
    fn from_shape(shape: Shape<S>) -> Self {
        Self {
            shape,
            support_radius: S::infinity(),
        }
    }

    pub fn constant(value: S) -> Self {
        Self::from_shape(Shape::Constant { value })
    }

    pub fn zero() -> Self {
        Self::constant(S::zero())
    }

    pub fn linear(intercept: S, slope: S) -> Self {
        Self::from_shape(Shape::Linear { intercept, slope })
    }

    pub fn gaussian_bump(base: S, amplitude: S, center: S, width: S) -> Result<Self> {
        if !(width > S::zero()) {
            return Err(Error::InvalidProfile("gaussian width must be positive".into()));
        }
        Ok(Self::from_shape(Shape::GaussianBump {
            base,
            amplitude,
            center,
            width,
        }))
    }

    pub fn polynomial(coeffs: Vec<S>, shift: S) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidProfile("polynomial needs at least one coefficient".into()));
        }
        if !(shift >= S::zero()) {
            return Err(Error::InvalidProfile("polynomial shift must be ≥ 0".into()));
        }
        Ok(Self::from_shape(Shape::Polynomial { coeffs, shift }))
    }

    pub fn sampled_spline(r0: S, dr: S, values: Vec<S>) -> Result<Self> {
        Ok(Self::from_shape(Shape::SampledSpline(CubicSpline::new(r0, dr, values)?)))
    }

    /// Replaces the support radius.
    pub fn with_support_radius(mut self, radius: S) -> Result<Self> {
        if !(radius >= S::zero()) {
            return Err(Error::InvalidProfile("support radius must be ≥ 0".into()));
        }
        self.support_radius = radius;
        Ok(self)
    }

    /// The same profile, held constant beyond `radius` (if that is smaller
    /// than the current support radius).
    pub fn truncated(&self, radius: S) -> Self {
        let mut out = self.clone();
        out.support_radius = self.support_radius.min(radius);
        out
    }

    pub fn shape(&self) -> &Shape<S> {
        &self.shape
    }

    pub fn support_radius(&self) -> S {
        self.support_radius
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Constant { .. } => "constant",
            Shape::Linear { .. } => "linear",
            Shape::GaussianBump { .. } => "gaussian-bump",
            Shape::Polynomial { .. } => "polynomial",
            Shape::SampledSpline(_) => "sampled-spline",
        }
    }

    /// The value if the profile is a constant.
    pub fn as_constant(&self) -> Option<S> {
        match self.shape {
            Shape::Constant { value } => Some(value),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_radius.is_nan() || self.support_radius < S::zero() {
            return Err(Error::InvalidProfile("support radius must be ≥ 0".into()));
        }
        let finite = |xs: &[S]| xs.iter().all(|x| x.is_finite());
        let ok = match &self.shape {
            Shape::Constant { value } => finite(&[*value]),
            Shape::Linear { intercept, slope } => finite(&[*intercept, *slope]),
            Shape::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                if !(*width > S::zero()) {
                    return Err(Error::InvalidProfile("gaussian width must be positive".into()));
                }
                finite(&[*base, *amplitude, *center, *width])
            }
            Shape::Polynomial { coeffs, shift } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidProfile("polynomial needs at least one coefficient".into()));
                }
                if !(*shift >= S::zero()) {
                    return Err(Error::InvalidProfile("polynomial shift must be ≥ 0".into()));
                }
                finite(coeffs) && shift.is_finite()
            }
            Shape::SampledSpline(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile("parameters must be finite".into()))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn eval_shape(&self, r: S) -> (S, S, S) {
        let zero = S::zero();
        match &self.shape {
            Shape::Constant { value } => (*value, zero, zero),
            Shape::Linear { intercept, slope } => (*intercept + *slope * r, *slope, zero),
            Shape::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let x = r - *center;
                let e = *amplitude * (-(x * x) / *width).exp();
                let two = S::lit(2.0);
                (
                    *base + e,
                    -two * x / *width * e,
                    (S::lit(4.0) * x * x / (*width * *width) - two / *width) * e,
                )
            }
            Shape::Polynomial { coeffs, shift } => {
                if r < *shift {
                    return (coeffs[0], zero, zero);
                }
                let x = r - *shift;
                let (mut p, mut dp, mut ddp) = (zero, zero, zero);
                for &c in coeffs.iter().rev() {
                    ddp = ddp * x + S::lit(2.0) * dp;
                    dp = dp * x + p;
                    p = p * x + c;
                }
                (p, dp, ddp)
            }
            Shape::SampledSpline(s) => s.eval(r),
        }
    }

    /// `(A, A′, A″)` at radius `r`.
    pub fn eval(&self, r: S) -> Result<(S, S, S)> {
        if !(r >= S::zero()) {
            return Err(Error::domain("radius", r));
        }
        Ok(self.eval_unchecked(r))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, r: S) -> (S, S, S) {
        if r > self.support_radius {
            let (a, _, _) = self.eval_shape(self.support_radius);
            (a, S::zero(), S::zero())
        } else {
            self.eval_shape(r)
        }
    }

    /// Radii in `(0, ∞)` where the profile is less smooth than analytic:
    /// spline knots, the polynomial shift and the support radius.
    pub fn breakpoints(&self) -> Vec<S> {
        let sr = self.support_radius;
        let mut out: Vec<S> = match &self.shape {
            Shape::Polynomial { shift, .. } if *shift > S::zero() => vec![*shift],
            Shape::SampledSpline(s) => (0..s.values.len()).map(|j| s.node(j)).collect(),
            _ => Vec::new(),
        };
        out.retain(|&b| b > S::zero() && b < sr);
        if sr.is_finite() && sr > S::zero() {
            out.push(sr);
        }
        out
    }

    /// Smallest radius where `A′` may jump (so `A″` carries a point mass).
    fn slope_jump_radius(&self) -> S {
        let sr = self.support_radius;
        let mut r = S::infinity();
        if let Shape::Polynomial { coeffs, shift } = &self.shape {
            if *shift > S::zero() && coeffs.get(1).is_some_and(|c| *c != S::zero()) {
                r = *shift;
            }
        }
        if sr.is_finite() && r > sr {
            let (_, da, _) = self.eval_shape(sr);
            if da != S::zero() {
                r = sr;
            }
        }
        r
    }
}

/// Ray average `k(r) = ∫₀¹ A(s·r) ds` and its first two radial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayAverage<S> {
    pub k: S,
    pub dk: S,
    pub d2k: S,
}

/// On-cone quantities at radius `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeData<S> {
    pub r: S,
    pub k: S,
    pub k1: S,
    pub k2: S,
    /// `R(r, r)`
    pub r_on_cone: S,
    /// `v_b(r) = v(x, |x|)` for `|x| = r`
    pub v_boundary: S,
}

pub fn eval_profile<S: Scalar>(p: &RadialProfile<S>, r: S) -> Result<(S, S, S)> {
    p.eval(r)
}

/// `k`, `k′`, `k″` at radius `r`.
///
/// All three are moments over `s ∈ [0, 1]`: `k = ∫A(sr)`, `k′ = ∫s·A′(sr)`,
/// `k″ = ∫s²·A″(sr)`, integrated piecewise between breakpoints so that
/// spline pieces are integrated exactly. Past a slope jump of `A` the second
/// moment misses the point mass of `A″`, so there `r·k″ = A′ − 2k′` is used.
pub fn ray_average<S: Scalar>(p: &RadialProfile<S>, r: S) -> Result<RayAverage<S>> {
    if !(r >= S::zero()) {
        return Err(Error::domain("radius", r));
    }
    let (a, da, dda) = p.eval_unchecked(r);
    if r == S::zero() {
        return Ok(RayAverage {
            k: a,
            dk: da / S::lit(2.0),
            d2k: dda / S::lit(3.0),
        });
    }
    let breaks: Vec<S> = p
        .breakpoints()
        .into_iter()
        .filter(|&b| b < r)
        .map(|b| b / r)
        .collect();
    let m = Simpson::default().integrate_pieces(
        |s| {
            let (a, da, dda) = p.eval_unchecked(s * r);
            [a, s * da, s * s * dda]
        },
        S::zero(),
        S::one(),
        &breaks,
    )?;
    let [k, dk, mut d2k] = m.value;
    if r > p.slope_jump_radius() {
        d2k = (da - S::lit(2.0) * dk) / r;
    }
    Ok(RayAverage { k, dk, d2k })
}

/// `R(r, t) = exp(−t·k(r)/2)`.
pub fn attenuation_r<S: Scalar>(p: &RadialProfile<S>, r: S, t: S) -> Result<S> {
    let k = ray_average(p, r)?.k;
    Ok((-t * k / S::lit(2.0)).exp())
}

/// `PR/R = k²/4 + (t/2)Δk − (t²/4)k′² − A·k/2`, `Δk = k″ + 2k′/r`
/// (`3k″(0)` at the origin).
pub fn transport_ratio<S: Scalar>(p: &RadialProfile<S>, r: S, t: S) -> Result<S> {
    let RayAverage { k, dk, d2k } = ray_average(p, r)?;
    let (a, _, _) = p.eval_unchecked(r);
    let two = S::lit(2.0);
    let four = S::lit(4.0);
    let laplacian = if r == S::zero() {
        S::lit(3.0) * d2k
    } else {
        d2k + two * dk / r
    };
    Ok(k * k / four + t / two * laplacian - t * t / four * dk * dk - a * k / two)
}

/// `PR/R` on the cone `t = r`, written so that the `2k′/r` term of the
/// Laplacian is multiplied through by `t = r` (finite at the origin).
fn cone_transport_ratio<S: Scalar>(p: &RadialProfile<S>, r: S) -> Result<S> {
    let RayAverage { k, dk, d2k } = ray_average(p, r)?;
    let (a, _, _) = p.eval_unchecked(r);
    let two = S::lit(2.0);
    let four = S::lit(4.0);
    Ok(k * k / four + r / two * d2k + dk - r * r / four * dk * dk - a * k / two)
}

/// `v_b(r) = −(R(r,r)/8π)·∫₀¹ PR/R(sr, sr) ds`.
pub fn goursat_boundary<S: Scalar>(p: &RadialProfile<S>, r: S) -> Result<S> {
    if !(r >= S::zero()) {
        return Err(Error::domain("radius", r));
    }
    let eight_pi = S::lit(8.0) * S::PI();
    if r == S::zero() {
        return Ok(-cone_transport_ratio(p, r)? / eight_pi);
    }
    let breaks: Vec<S> = p
        .breakpoints()
        .into_iter()
        .filter(|&b| b < r)
        .map(|b| b / r)
        .collect();
    let mut failure = None;
    let integral = Simpson::default().integrate_pieces(
        |s| match cone_transport_ratio(p, s * r) {
            Ok(v) => [v],
            Err(e) => {
                failure.get_or_insert(e);
                [S::zero()]
            }
        },
        S::zero(),
        S::one(),
        &breaks,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(-attenuation_r(p, r, r)? / eight_pi * integral.value[0])
}

pub fn cone_data<S: Scalar>(p: &RadialProfile<S>, r: S) -> Result<ConeData<S>> {
    let ray = ray_average(p, r)?;
    Ok(ConeData {
        r,
        k: ray.k,
        k1: ray.dk,
        k2: ray.d2k,
        r_on_cone: (-r * ray.k / S::lit(2.0)).exp(),
        v_boundary: goursat_boundary(p, r)?,
    })
}

/// `w = r·v_b(r)` at `r = i·h`, `i = 0..=count`.
///
/// Uses `r·∫₀¹ PR/R(sr, sr) ds = ∫₀^r PR/R(ρ, ρ) dρ` and accumulates the
/// right-hand side cell by cell, which costs one quadrature per cell instead
/// of one per radius.
pub fn cone_w_on_grid<S: Scalar>(p: &RadialProfile<S>, h: S, count: usize) -> Result<Vec<S>> {
    let eight_pi = S::lit(8.0) * S::PI();
    let breaks = p.breakpoints();
    let q = Simpson::with_tolerance(S::lit(S::QUAD_TOL) * h);
    let mut out = Vec::with_capacity(count + 1);
    out.push(S::zero());
    let mut cumulative = S::zero();
    let mut failure = None;
    for i in 1..=count {
        let (a, b) = (S::from_usize_exact(i - 1) * h, S::from_usize_exact(i) * h);
        let piece = q.integrate_pieces(
            |rho| match cone_transport_ratio(p, rho) {
                Ok(v) => [v],
                Err(e) => {
                    failure.get_or_insert(e);
                    [S::zero()]
                }
            },
            a,
            b,
            &breaks,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        cumulative = cumulative + piece.value[0];
        let k = ray_average(p, b)?.k;
        out.push(-(-b * k / S::lit(2.0)).exp() * cumulative / eight_pi);
    }
    Ok(out)
}
