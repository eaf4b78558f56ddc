//! Adaptive composite Simpson quadrature.
//!
//! Integrands may be vector valued (`[S; N]`) so that several moments of the
//! same function share one panel tree. The error test is applied to the
//! largest component.

use crate::error::{Error, Result};
use crate::Scalar;

/// Upper bound on accepted panels for one integral.
pub const MAX_PANELS: usize = 1 << 14;

const MAX_DEPTH: u32 = 48;

#[derive(Clone, Copy, Debug)]
pub struct Simpson<S> {
    /// Absolute tolerance for the whole interval.
    pub abs_tol: S,
    pub max_panels: usize,
}

impl<S: Scalar> Default for Simpson<S> {
    fn default() -> Self {
        Self {
            abs_tol: S::lit(S::QUAD_TOL),
            max_panels: MAX_PANELS,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<S, const N: usize> {
    pub value: [S; N],
    pub error: S,
    pub panels: usize,
}

struct Panel<S, const N: usize> {
    a: S,
    b: S,
    fa: [S; N],
    fm: [S; N],
    fb: [S; N],
    whole: [S; N],
    tol: S,
    depth: u32,
}

fn simpson_rule<S: Scalar, const N: usize>(width: S, fa: &[S; N], fm: &[S; N], fb: &[S; N]) -> [S; N] {
    let sixth = width / S::lit(6.0);
    std::array::from_fn(|k| sixth * (fa[k] + S::lit(4.0) * fm[k] + fb[k]))
}

impl<S: Scalar> Simpson<S> {
    pub fn with_tolerance(abs_tol: S) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<const N: usize, F>(&self, mut f: F, a: S, b: S) -> Result<Estimate<S, N>>
    where
        F: FnMut(S) -> [S; N],
    {
        let zero = [S::zero(); N];
        if a == b {
            return Ok(Estimate {
                value: zero,
                error: S::zero(),
                panels: 0,
            });
        }
        let half = S::lit(0.5);
        let fifteen = S::lit(15.0);

        let (fa, fb) = (f(a), f(b));
        let m = half * (a + b);
        let fm = f(m);
        let mut stack = vec![Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: simpson_rule(b - a, &fa, &fm, &fb),
            tol: self.abs_tol,
            depth: 0,
        }];

        let mut total = zero;
        let mut err_total = S::zero();
        let mut panels = 0usize;
        while let Some(p) = stack.pop() {
            let m = half * (p.a + p.b);
            let lm = half * (p.a + m);
            let rm = half * (m + p.b);
            let (flm, frm) = (f(lm), f(rm));
            let left = simpson_rule(m - p.a, &p.fa, &flm, &p.fm);
            let right = simpson_rule(p.b - m, &p.fm, &frm, &p.fb);

            let mut err = S::zero();
            for k in 0..N {
                err = err.max((left[k] + right[k] - p.whole[k]).abs() / fifteen);
            }
            // Below this width the two halves are indistinguishable in floating point.
            let unresolvable = (p.b - p.a).abs() <= S::epsilon() * S::lit(64.0) * (p.a.abs() + p.b.abs());
            if err <= p.tol || unresolvable {
                for k in 0..N {
                    total[k] = total[k] + left[k] + right[k] + (left[k] + right[k] - p.whole[k]) / fifteen;
                }
                err_total = err_total + err;
                panels += 1;
                continue;
            }
            if p.depth >= MAX_DEPTH || panels + stack.len() + 2 > self.max_panels {
                return Err(Error::Quadrature {
                    estimate: (err_total + err).to_f64_lossy(),
                    tolerance: self.abs_tol.to_f64_lossy(),
                    panels: panels + stack.len() + 1,
                });
            }
            let tol = half * p.tol;
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol,
                depth: p.depth + 1,
            });
        }
        Ok(Estimate {
            value: total,
            error: err_total,
            panels,
        })
    }

    pub fn integrate_scalar<F>(&self, mut f: F, a: S, b: S) -> Result<S>
    where
        F: FnMut(S) -> S,
    {
        self.integrate(|x| [f(x)], a, b).map(|e| e.value[0])
    }

    /// Integrates over `[a, b]` split at the interior `breaks` (which need not
    /// be sorted; points outside `(a, b)` are ignored). The tolerance is shared
    /// out in proportion to piece length.
    pub fn integrate_pieces<const N: usize, F>(&self, mut f: F, a: S, b: S, breaks: &[S]) -> Result<Estimate<S, N>>
    where
        F: FnMut(S) -> [S; N],
    {
        let mut nodes: Vec<S> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        if nodes.is_empty() {
            return self.integrate(f, a, b);
        }
        nodes.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        nodes.dedup();
        nodes.insert(0, a);
        nodes.push(b);

        let length = b - a;
        let mut out = Estimate {
            value: [S::zero(); N],
            error: S::zero(),
            panels: 0,
        };
        for w in nodes.windows(2) {
            let piece = Simpson {
                abs_tol: self.abs_tol * (w[1] - w[0]) / length,
                max_panels: self.max_panels,
            };
            let e = piece.integrate(&mut f, w[0], w[1])?;
            for k in 0..N {
                out.value[k] = out.value[k] + e.value[k];
            }
            out.error = out.error + e.error;
            out.panels += e.panels;
        }
        Ok(out)
    }
}
