//! The adjoint integral identity for two damping profiles, term by term.
//!
//! With `u = u₁ − u₂`, `q = q₁ − q₂` and `A = A₁ − A₂`, testing the equation
//! for `u` against `u₁(x, 2σ − t)` gives, for every `σ > 0`,
//!
//! ```text
//! ∫∫ q ∂_t u₂(x,t) u₁(x,2σ−t) dt dx = −(d₁ − d₂)(2σ)
//! ```
//!
//! Splitting both `u_i` into wavefront and regular part produces five terms
//! `I₁ … I₅`; the residual `I₁+…+I₅ + (d₁ − d₂)(2σ)` must vanish.
//!
//! Two normalisations of the wavefront terms are exposed:
//!
//! * [`closed_i1`] / [`closed_i2`]: the customary closed forms
//!   `−ÃK/8π` and `−(1/8π)(Ã′ + ÃK)`, with `Ã = A·R₁·R₂` and `K = k₂(σ)`.
//!   Their algebra (the two forms of `I₂`, the sum `I₁+I₂`, the integrating
//!   factor) is what [`closed_forms_check`] verifies.
//! * [`exact_i1`] / [`exact_i2`]: the actual values of the two integrals.
//!   The product `δ(t−r)·δ(2σ−t−r)` carries a Jacobian `1/2`, and
//!   `∫δ′(r−s)ψ(s)ds = +ψ′(r)`, so the exact terms are `½·closed_i1` and
//!   `−½·closed_i2`.
//!
//! The regular parts `v_i` jump from `v_b` to zero across the cone, so
//! `∂_t v_i` carries a surface term `δ(t − r)·v_b`. Those contributions are
//! the `cone_*` fields of [`VolumeTerms`]; without them the identity does not
//! close.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::goursat::{extract_trace, solve_goursat, SolverConfig, WaveField};
use crate::profiles::{attenuation_r, ray_average, RadialProfile};
use crate::quadrature::Simpson;
use crate::Scalar;

fn check_sigma<S: Scalar>(sigma: S) -> Result<()> {
    if sigma > S::zero() && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("σ", sigma))
    }
}

struct PairAt<S> {
    a: S,
    da: S,
    a1: S,
    a2: S,
    r1: S,
    r2: S,
    k2: S,
}

fn pair_at<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<PairAt<S>> {
    let (a1, da1, _) = p1.eval(sigma)?;
    let (a2, da2, _) = p2.eval(sigma)?;
    let k1 = ray_average(p1, sigma)?.k;
    let k2 = ray_average(p2, sigma)?.k;
    let half = S::lit(0.5);
    Ok(PairAt {
        a: a1 - a2,
        da: da1 - da2,
        a1,
        a2,
        r1: (-half * sigma * k1).exp(),
        r2: (-half * sigma * k2).exp(),
        k2,
    })
}

fn eight_pi<S: Scalar>() -> S {
    S::lit(8.0) * S::PI()
}

/// `Ã(σ) = A(σ)·R₁(σ)·R₂(σ)`.
pub fn a_tilde<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    let (a1, _, _) = p1.eval(sigma)?;
    let (a2, _, _) = p2.eval(sigma)?;
    Ok((a1 - a2) * attenuation_r(p1, sigma, sigma)? * attenuation_r(p2, sigma, sigma)?)
}

/// `dÃ/dσ` by the product rule, with `dR_i/dσ = −½(k_i + σk_i′)R_i` taken
/// from the ray-average derivatives.
pub fn a_tilde_derivative<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    let (a1, da1, _) = p1.eval(sigma)?;
    let (a2, da2, _) = p2.eval(sigma)?;
    let ray1 = ray_average(p1, sigma)?;
    let ray2 = ray_average(p2, sigma)?;
    let half = S::lit(0.5);
    let r1 = (-half * sigma * ray1.k).exp();
    let r2 = (-half * sigma * ray2.k).exp();
    let dr1 = -half * (ray1.k + sigma * ray1.dk) * r1;
    let dr2 = -half * (ray2.k + sigma * ray2.dk) * r2;
    let a = a1 - a2;
    Ok((da1 - da2) * r1 * r2 + a * dr1 * r2 + a * r1 * dr2)
}

/// Closed form `−A(σ)R₁(σ)R₂(σ)/8π · ∫₀¹A₂(sσ)ds`.
pub fn closed_i1<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    check_sigma(sigma)?;
    let q = pair_at(p1, p2, sigma)?;
    Ok(-q.a * q.r1 * q.r2 / eight_pi() * q.k2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedI2<S> {
    /// `−(1/8π)·R₁R₂·[A′ − ½A(A₁+A₂) + A·k₂]`
    pub bracket: S,
    /// `−(1/8π)·(dÃ/dσ + Ã·k₂)`
    pub a_tilde_form: S,
}

/// Both algebraic forms of the closed `I₂`.
pub fn closed_i2<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<ClosedI2<S>> {
    check_sigma(sigma)?;
    let q = pair_at(p1, p2, sigma)?;
    let half = S::lit(0.5);
    let bracket = -(q.r1 * q.r2 * (q.da - half * q.a * (q.a1 + q.a2) + q.a * q.k2)) / eight_pi();
    let at = q.a * q.r1 * q.r2;
    let a_tilde_form = -(a_tilde_derivative(p1, p2, sigma)? + at * q.k2) / eight_pi();
    Ok(ClosedI2 { bracket, a_tilde_form })
}

/// Value of the wavefront–wavefront integral `I₁` (half the closed form).
pub fn exact_i1<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    Ok(closed_i1(p1, p2, sigma)? / S::lit(2.0))
}

/// Value of the `δ′·δ` integral `I₂`: `+D_r(σ)/16π`, i.e. `−½` times the
/// closed form.
pub fn exact_i2<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    Ok(-closed_i2(p1, p2, sigma)?.bracket / S::lit(2.0))
}

/// `exp(2∫₀^σ k₂(s) ds)`.
pub fn integrating_factor<S: Scalar>(p2: &RadialProfile<S>, sigma: S) -> Result<S> {
    if sigma == S::zero() {
        return Ok(S::one());
    }
    let mut failure = None;
    let integral = Simpson::default().integrate_pieces(
        |s| match ray_average(p2, s) {
            Ok(r) => [r.k],
            Err(e) => {
                failure.get_or_insert(e);
                [S::zero()]
            }
        },
        S::zero(),
        sigma,
        &p2.breakpoints(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((S::lit(2.0) * integral.value[0]).exp())
}

/// Pure-algebra checks on the closed forms at one `σ`.
#[derive(Clone, Copy, Debug)]
pub struct ClosedFormsCheck<S> {
    /// `|bracket − Ã-form|` of the closed `I₂`.
    pub i2_forms_gap: S,
    /// `|I₁ + I₂ + (1/8π)(2Ã·k₂ + dÃ/dσ)|` for the closed forms.
    pub sum_gap: S,
}

pub fn closed_forms_check<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, sigma: S) -> Result<ClosedFormsCheck<S>> {
    let i1 = closed_i1(p1, p2, sigma)?;
    let i2 = closed_i2(p1, p2, sigma)?;
    let at = a_tilde(p1, p2, sigma)?;
    let dat = a_tilde_derivative(p1, p2, sigma)?;
    let k2 = ray_average(p2, sigma)?.k;
    let expected = -(S::lit(2.0) * at * k2 + dat) / eight_pi();
    Ok(ClosedFormsCheck {
        i2_forms_gap: (i2.bracket - i2.a_tilde_form).abs(),
        sum_gap: (i1 + i2.bracket - expected).abs(),
    })
}

/// The three terms that involve regular parts, reduced to radial integrals
/// (`dx = 4πr²dr`) and evaluated by the composite trapezoid rule on grid
/// points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct VolumeTerms<S> {
    /// `∫₀^σ A·R₂·∂_t v₁(r, 2σ−r)·r dr`
    pub i3: S,
    /// `∫₀^σ A·R₁·∂_t v₂(r, 2σ−r)·r dr`
    pub i4: S,
    /// `4π∫₀^σ r²A ∫_r^{2σ−r} ∂_t v₂(r,t)·v₁(r,2σ−t) dt dr`
    pub i5: S,
    /// `½σ·A(σ)R₂(σ)·v_b₁(σ)` from the jump of `v₁` across the cone.
    pub cone_i3: S,
    /// `½σ·A(σ)R₁(σ)·v_b₂(σ)` from the jump of `v₂` across the cone.
    pub cone_i4: S,
    /// `4π∫₀^σ r²A·v_b₂(r)·v₁(r, 2σ−r) dr`
    pub cone_i5: S,
}

impl<S: Scalar> VolumeTerms<S> {
    /// `(I₃, I₄, I₅)` including the cone contributions.
    pub fn totals(&self) -> (S, S, S) {
        (
            self.i3 + self.cone_i3,
            self.i4 + self.cone_i4,
            self.i5 + self.cone_i5,
        )
    }

    /// Everything except the two surface terms that are proportional to
    /// `A(σ)`.
    fn volterra_kernel(&self) -> S {
        self.i3 + self.i4 + self.i5 + self.cone_i5
    }
}

/// `A = A₁ − A₂` and `R_i(r, r)` at `r = k·h`.
struct RadialTables<S> {
    a: Vec<S>,
    r1: Vec<S>,
    r2: Vec<S>,
}

impl<S: Scalar> RadialTables<S> {
    fn new(p1: &RadialProfile<S>, p2: &RadialProfile<S>, h: S, count: usize) -> Result<Self> {
        let mut t = Self {
            a: Vec::with_capacity(count + 1),
            r1: Vec::with_capacity(count + 1),
            r2: Vec::with_capacity(count + 1),
        };
        for k in 0..=count {
            let r = S::from_usize_exact(k) * h;
            t.a.push(p1.eval(r)?.0 - p2.eval(r)?.0);
            t.r1.push(attenuation_r(p1, r, r)?);
            t.r2.push(attenuation_r(p2, r, r)?);
        }
        Ok(t)
    }
}

/// Trapezoid rule over the samples `f(0), …, f(last)`.
fn trapezoid<S: Scalar>(step: S, last: usize, f: impl Fn(usize) -> S) -> S {
    if last == 0 {
        return S::zero();
    }
    let mut sum = S::lit(0.5) * (f(0) + f(last));
    for k in 1..last {
        sum = sum + f(k);
    }
    step * sum
}

fn volume_terms_at<S: Scalar>(t: &RadialTables<S>, f1: &WaveField<S>, f2: &WaveField<S>, i: usize) -> VolumeTerms<S> {
    let h = f1.h();
    let half = S::lit(0.5);
    let four_pi = S::lit(4.0) * S::PI();
    // On the column μ = σ the point at radius k·h is (i, i − k); r·∂_t v = ∂_t w.
    let i3 = trapezoid(h, i, |k| t.a[k] * t.r2[k] * f1.dt_w(i, i - k));
    let i4 = trapezoid(h, i, |k| t.a[k] * t.r1[k] * f2.dt_w(i, i - k));
    // At radius k·h the time t = k·h + 2l·h is (k + l, l) on field 2 and 2σ − t is (i − l, i − k − l) on field 1.
    let i5 = four_pi
        * trapezoid(
            h,
            i,
            |k| {
                let inner = trapezoid(S::lit(2.0) * h, i - k, |l| f2.dt_w(k + l, l) * f1.w(i - l, i - k - l));
                t.a[k] * inner
            },
        );
    let cone_i3 = half * t.a[i] * t.r2[i] * f1.w(i, 0);
    let cone_i4 = half * t.a[i] * t.r1[i] * f2.w(i, 0);
    let cone_i5 = four_pi * trapezoid(h, i, |k| t.a[k] * f2.w(k, 0) * f1.w(i, i - k));
    VolumeTerms {
        i3,
        i4,
        i5,
        cone_i3,
        cone_i4,
        cone_i5,
    }
}

/// `I₃`, `I₄`, `I₅` at a grid-aligned `σ` from two solved fields.
pub fn quadrature_i3_i4_i5<S: Scalar>(
    p1: &RadialProfile<S>,
    p2: &RadialProfile<S>,
    f1: &WaveField<S>,
    f2: &WaveField<S>,
    sigma: S,
) -> Result<VolumeTerms<S>> {
    check_sigma(sigma)?;
    let h = f1.h();
    if f2.h() != h || f2.n_levels() != f1.n_levels() {
        return Err(Error::Usage("fields must share the grid".into()));
    }
    let q = sigma / h;
    let i = q.round();
    if (q - i).abs() > S::lit(1e-6) {
        return Err(Error::domain("σ (not on the grid)", sigma));
    }
    let i = i.to_usize().ok_or_else(|| Error::domain("σ", sigma))?;
    if i > f1.n_levels() {
        return Err(Error::domain("σ beyond the field horizon", sigma));
    }
    let tables = RadialTables::new(p1, p2, h, i)?;
    Ok(volume_terms_at(&tables, f1, f2, i))
}

/// Every term of the identity at one `σ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityBreakdown<S> {
    pub sigma: S,
    pub i1: S,
    pub i2: S,
    pub i3: S,
    pub i4: S,
    pub i5: S,
    /// `d₁(2σ) − d₂(2σ)`
    pub data_term: S,
    /// `I₁+I₂+I₃+I₄+I₅ + data_term`
    pub residual: S,
    /// `Ã(σ) = A(σ)R₁(σ)R₂(σ)`
    pub a_tilde: S,
    /// `exp(2∫₀^σ∫₀¹A₂(ts)dt ds)`
    pub integrating_factor: S,
    /// `exp(∫₀^σ 8πs·(v_b₁/R₁ + v_b₂/R₂) ds)`, the factor that turns the
    /// exact `I₁+I₂` plus the cone terms into a total derivative.
    pub cone_factor: S,
    #[serde(skip)]
    pub volume: VolumeTerms<S>,
}

/// CSV with columns `sigma,I1,I2,I3,I4,I5,data_term,residual`.
pub fn breakdown_csv<S: Scalar>(rows: &[IdentityBreakdown<S>]) -> String {
    let mut out = String::from("sigma,I1,I2,I3,I4,I5,data_term,residual\n");
    for b in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.sigma, b.i1, b.i2, b.i3, b.i4, b.i5, b.data_term, b.residual
        ));
    }
    out
}

/// Breakdown at every `σ = i·h`, `i = 1..=T/(2h)`.
pub fn identity_residual<S: Scalar>(
    p1: &RadialProfile<S>,
    p2: &RadialProfile<S>,
    horizon: S,
    h: S,
) -> Result<Vec<IdentityBreakdown<S>>> {
    let n = SolverConfig::new(horizon, h).levels()?;
    // Two spare levels keep every σ ≤ T/2 away from the grid edge, where the
    // solver holds the profile constant and differences become one-sided.
    let cfg = SolverConfig::new(horizon + S::lit(4.0) * h, h);
    let f1 = solve_goursat(p1, &cfg)?;
    let f2 = solve_goursat(p2, &cfg)?;
    let d1 = extract_trace(&f1)?;
    let d2 = extract_trace(&f2)?;
    let tables = RadialTables::new(p1, p2, h, n)?;

    // Cumulative trapezoid for the exponent of the cone factor.
    let eight_pi = eight_pi::<S>();
    let rate: Vec<S> = (0..=n)
        .map(|i| eight_pi * (f1.w(i, 0) / tables.r1[i] + f2.w(i, 0) / tables.r2[i]))
        .collect();
    let mut cone_factor = vec![S::one(); n + 1];
    let mut exponent = S::zero();
    for i in 1..=n {
        exponent = exponent + h * S::lit(0.5) * (rate[i - 1] + rate[i]);
        cone_factor[i] = exponent.exp();
    }

    (1..=n)
        .into_par_iter()
        .map(|i| {
            let sigma = S::from_usize_exact(i) * h;
            let i1 = exact_i1(p1, p2, sigma)?;
            let i2 = exact_i2(p1, p2, sigma)?;
            let volume = volume_terms_at(&tables, &f1, &f2, i);
            let (i3, i4, i5) = volume.totals();
            let data_term = d1.values()[i] - d2.values()[i];
            Ok(IdentityBreakdown {
                sigma,
                i1,
                i2,
                i3,
                i4,
                i5,
                data_term,
                residual: i1 + i2 + i3 + i4 + i5 + data_term,
                a_tilde: tables.a[i] * tables.r1[i] * tables.r2[i],
                integrating_factor: integrating_factor(p2, sigma)?,
                cone_factor: cone_factor[i],
                volume,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct VolterraCheck<S> {
    pub sigma: Vec<S>,
    pub defect: Vec<S>,
    pub max_defect: S,
}

/// Checks the differential form of the identity,
///
/// ```text
/// (1/16π)·d/dσ[Ã·E] = −E·[I₃ + I₄ + I₅ + I₅ᶜ + (d₁ − d₂)(2σ)]
/// ```
///
/// where `E` is [`IdentityBreakdown::cone_factor`], `I₃…I₅` are the regular
/// parts and `I₅ᶜ` the cone part of `I₅`. The derivative is a central
/// difference over the σ samples. When the traces agree the bracket has no
/// data term and the right-hand side is a Volterra operator acting on `Ã`.
pub fn volterra_check<S: Scalar>(p1: &RadialProfile<S>, p2: &RadialProfile<S>, horizon: S, h: S) -> Result<VolterraCheck<S>> {
    let rows = identity_residual(p1, p2, horizon, h)?;
    let a0 = p1.eval(S::zero())?.0 - p2.eval(S::zero())?.0;
    let weighted: Vec<S> = std::iter::once(a0)
        .chain(rows.iter().map(|b| b.a_tilde * b.cone_factor))
        .collect();
    let two_h = S::lit(2.0) * h;
    let sixteen_pi = S::lit(16.0) * S::PI();
    let mut out = VolterraCheck {
        sigma: Vec::new(),
        defect: Vec::new(),
        max_defect: S::zero(),
    };
    for i in 1..rows.len() {
        let b = &rows[i - 1];
        let lhs = (weighted[i + 1] - weighted[i - 1]) / two_h / sixteen_pi;
        let rhs = -b.cone_factor * (b.volume.volterra_kernel() + b.data_term);
        let defect = (lhs - rhs).abs();
        out.max_defect = out.max_defect.max(defect);
        out.sigma.push(b.sigma);
        out.defect.push(defect);
    }
    Ok(out)
}

/// Mollifier widths for the `δ′` surface formula, halved each step.
pub const DELTA_WIDTHS: [f64; 3] = [0.1, 0.05, 0.025];

/// A mollified `δ′` integral next to its closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaPrimeSurface<S> {
    pub mollified: S,
    pub closed_form: S,
}

/// Standard bump `exp(−1/(1 − x²))` on `(−1, 1)` and its derivative, both
/// divided by the unit-mass constant.
struct Bump<S> {
    mass: S,
}

impl<S: Scalar> Bump<S> {
    fn new() -> Result<Self> {
        let mass = Simpson::with_tolerance(S::lit(S::QUAD_TOL * 1e-3))
            .integrate_scalar(|x| Self::raw(x).0, -S::one(), S::one())?;
        Ok(Self { mass })
    }

    fn raw(x: S) -> (S, S) {
        let one = S::one();
        let q = one - x * x;
        if q <= S::zero() {
            return (S::zero(), S::zero());
        }
        let b = (-one / q).exp();
        (b, -S::lit(2.0) * x / (q * q) * b)
    }

    /// `δ_ε′(y)`.
    fn delta_prime(&self, y: S, eps: S) -> S {
        Self::raw(y / eps).1 / (self.mass * eps * eps)
    }
}

fn check_width<S: Scalar>(r: S, eps: S) -> Result<()> {
    if !(eps > S::zero()) || !(eps < r) {
        return Err(Error::domain("mollifier width (must satisfy 0 < ε < r)", eps));
    }
    Ok(())
}

/// `4π·∂_s(φ(s)s²)` at `s = r`; `phi` returns `(φ, φ′)`.
fn surface_derivative<S: Scalar>(phi: &impl Fn(S) -> (S, S), r: S) -> S {
    let (f, df) = phi(r);
    S::lit(4.0) * S::PI() * (df * r * r + S::lit(2.0) * r * f)
}

/// `∫δ′(r − |x|)φ dx` for a radial test function, mollified as
/// `∫₀^∞ δ_ε′(r − s)·φ(s)·4πs² ds`, next to `4π·∂_s(φs²)|_{s=r}`.
///
/// With `δ′` the derivative with respect to its argument the limit is
/// `+4π∂_s(φs²)`; the orientation `δ′(|x| − r)` flips the sign.
pub fn delta_prime_surface<S: Scalar>(phi: impl Fn(S) -> (S, S), r: S, eps: S) -> Result<DeltaPrimeSurface<S>> {
    check_width(r, eps)?;
    let bump = Bump::new()?;
    let four_pi = S::lit(4.0) * S::PI();
    let mollified = Simpson::default().integrate_scalar(
        |s| bump.delta_prime(r - s, eps) * phi(s).0 * four_pi * s * s,
        r - eps,
        r + eps,
    )?;
    Ok(DeltaPrimeSurface {
        mollified,
        closed_form: surface_derivative(&phi, r),
    })
}

/// The doubled-argument variant `∫δ′(2r − 2|x|)φ dx`, with `δ′(2r − 2|x|)`
/// read as `∂_r[δ(2r − 2|x|)]`; it equals half of [`delta_prime_surface`].
/// (Differentiating with respect to the argument instead gives a quarter,
/// since `δ(2y) = δ(y)/2`.)
pub fn delta_prime_surface_doubled<S: Scalar>(phi: impl Fn(S) -> (S, S), r: S, eps: S) -> Result<DeltaPrimeSurface<S>> {
    check_width(r, eps)?;
    let bump = Bump::new()?;
    let four_pi = S::lit(4.0) * S::PI();
    let two = S::lit(2.0);
    let half_eps = eps / two;
    let mollified = Simpson::default().integrate_scalar(
        |s| two * bump.delta_prime(two * (r - s), eps) * phi(s).0 * four_pi * s * s,
        r - half_eps,
        r + half_eps,
    )?;
    Ok(DeltaPrimeSurface {
        mollified,
        closed_form: surface_derivative(&phi, r) / two,
    })
}

/// Two rounds of Richardson extrapolation over [`DELTA_WIDTHS`]; the
/// mollification error is even in `ε`.
pub fn richardson_delta_prime<S: Scalar, F>(phi: F, r: S, doubled: bool) -> Result<S>
where
    F: Fn(S) -> (S, S) + Copy,
{
    let m = DELTA_WIDTHS
        .iter()
        .map(|&e| {
            let eps = S::lit(e);
            if doubled {
                delta_prime_surface_doubled(phi, r, eps).map(|d| d.mollified)
            } else {
                delta_prime_surface(phi, r, eps).map(|d| d.mollified)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (three, fifteen) = (S::lit(3.0), S::lit(15.0));
    let ra = (S::lit(4.0) * m[1] - m[0]) / three;
    let rb = (S::lit(4.0) * m[2] - m[1]) / three;
    Ok((S::lit(16.0) * rb - ra) / fifteen)
}
