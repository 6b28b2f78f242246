//! One-dimensional quadrature rules, selectable by name.
//!
//! Integrands handed to these rules are smooth on the closed interval; any
//! singular point of the caller's function is placed at a segment boundary by
//! the caller.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOutcome {
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

pub trait Quadrature: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Integrates `f` over `[a, b]`. Rules may move the endpoints inward by a
    /// fixed nudge; the integrand must accept any point of the closed interval.
    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> QuadratureOutcome;
}

/// Adaptive Simpson with an absolute tolerance per call.
///
/// A panel whose error estimate is already at rounding level relative to its
/// own value is accepted, since halving further cannot help.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSimpson {
    pub tolerance: f64,
    pub max_depth: u32,
    /// Number of equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
    /// Integrand evaluations allowed before giving up as non-convergent.
    pub max_evaluations: usize,
}

impl Default for AdaptiveSimpson {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_depth: 40,
            initial_panels: 8,
            max_evaluations: 2_000_000,
        }
    }
}

const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

impl AdaptiveSimpson {
    fn refine(
        &self,
        f: &dyn Fn(f64) -> f64,
        p: Panel,
        eps: f64,
        depth: u32,
        state: &mut (usize, bool),
    ) -> f64 {
        let Panel { a, m, b, fa, fm, fb, whole } = p;
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        state.0 += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        let floor = ROUNDOFF * (left.abs() + right.abs());
        if delta.abs() <= 15.0 * eps.max(floor) {
            return left + right + delta / 15.0;
        }
        if depth >= self.max_depth || !delta.is_finite() || state.0 >= self.max_evaluations {
            state.1 = false;
            return left + right + delta / 15.0;
        }
        let l = Panel { a, m: lm, b: m, fa, fm: flm, fb: fm, whole: left };
        let r = Panel { a: m, m: rm, b, fa: fm, fm: frm, fb, whole: right };
        self.refine(f, l, 0.5 * eps, depth + 1, state) + self.refine(f, r, 0.5 * eps, depth + 1, state)
    }
}

impl Quadrature for AdaptiveSimpson {
    fn name(&self) -> &'static str {
        "simpson"
    }

    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> QuadratureOutcome {
        let panels = self.initial_panels.max(1);
        let width = (b - a) / panels as f64;
        let eps = self.tolerance / panels as f64;
        let mut state = (0usize, true);
        let mut total = 0.0;
        let mut fa = f(a);
        state.0 += 1;
        for k in 0..panels {
            let pa = a + width * k as f64;
            let pb = if k + 1 == panels { b } else { a + width * (k + 1) as f64 };
            let pm = 0.5 * (pa + pb);
            let (fm, fb) = (f(pm), f(pb));
            state.0 += 2;
            let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
            let panel = Panel { a: pa, m: pm, b: pb, fa, fm, fb, whole };
            total += self.refine(f, panel, eps, 0, &mut state);
            fa = fb;
        }
        QuadratureOutcome {
            value: total,
            converged: state.1,
            evaluations: state.0,
        }
    }
}

/// Composite trapezoid on a fixed node count, with both endpoints moved
/// inward by `nudge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub nodes: usize,
    pub nudge: f64,
}

impl Default for Trapezoid {
    fn default() -> Self {
        Self {
            nodes: 4001,
            nudge: 1e-9,
        }
    }
}

impl Quadrature for Trapezoid {
    fn name(&self) -> &'static str {
        "trapezoid"
    }

    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> QuadratureOutcome {
        let n = self.nodes.max(2);
        let lo = a + self.nudge;
        let hi = b - self.nudge;
        let h = (hi - lo) / (n - 1) as f64;
        let mut sum = 0.5 * (f(lo) + f(hi));
        for k in 1..n - 1 {
            sum += f(lo + h * k as f64);
        }
        // The nudged-off slivers are covered with the endpoint values.
        let value = sum * h + self.nudge * (f(lo) + f(hi));
        QuadratureOutcome {
            value,
            converged: value.is_finite(),
            evaluations: n + 2,
        }
    }
}

/// Named quadrature configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureKind {
    Simpson(AdaptiveSimpson),
    Trapezoid(Trapezoid),
}

impl Default for QuadratureKind {
    fn default() -> Self {
        QuadratureKind::Simpson(AdaptiveSimpson::default())
    }
}

impl QuadratureKind {
    pub const NAMES: [&'static str; 2] = ["simpson", "trapezoid"];

    /// Looks up a rule by name. `tolerance` tunes Simpson; `nodes` tunes the
    /// trapezoid rule. `None` keeps the defaults.
    pub fn by_name(name: &str, tolerance: Option<f64>, nodes: Option<usize>) -> Result<Self> {
        match name {
            "simpson" => {
                let mut s = AdaptiveSimpson::default();
                if let Some(tol) = tolerance {
                    if !(tol > 0.0 && tol.is_finite()) {
                        return Err(Error::InvalidConfig(format!("quadrature tolerance {tol}")));
                    }
                    s.tolerance = tol;
                }
                Ok(QuadratureKind::Simpson(s))
            }
            "trapezoid" => {
                let mut t = Trapezoid::default();
                if let Some(n) = nodes {
                    if n < 2 {
                        return Err(Error::InvalidConfig(format!("trapezoid needs >= 2 nodes, got {n}")));
                    }
                    t.nodes = n;
                }
                Ok(QuadratureKind::Trapezoid(t))
            }
            other => Err(Error::UnknownStrategy {
                kind: "quadrature",
                name: other.to_string(),
                available: Self::NAMES.join(", "),
            }),
        }
    }

    pub fn rule(&self) -> &dyn Quadrature {
        match self {
            QuadratureKind::Simpson(s) => s,
            QuadratureKind::Trapezoid(t) => t,
        }
    }

    pub fn name(&self) -> &'static str {
        self.rule().name()
    }

    /// Same rule with a tighter or looser setting: tolerance divided by
    /// `factor` for Simpson, node count multiplied for trapezoid.
    pub fn refined(&self, factor: f64) -> Self {
        match *self {
            QuadratureKind::Simpson(mut s) => {
                s.tolerance /= factor;
                QuadratureKind::Simpson(s)
            }
            QuadratureKind::Trapezoid(mut t) => {
                t.nodes = ((t.nodes - 1) as f64 * factor).round() as usize + 1;
                QuadratureKind::Trapezoid(t)
            }
        }
    }
}

impl fmt::Display for QuadratureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureKind::Simpson(s) => {
                write!(f, "simpson(tol={:e},max_depth={})", s.tolerance, s.max_depth)
            }
            QuadratureKind::Trapezoid(t) => {
                write!(f, "trapezoid(nodes={},nudge={:e})", t.nodes, t.nudge)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let q = AdaptiveSimpson::default();
        let out = q.integrate(&|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0);
        // x^4/4 - x^2 + x on [-1, 3] = (81/4 - 9 + 3) - (1/4 - 1 - 1) = 16
        assert!((out.value - 16.0).abs() < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn simpson_smooth_transcendental() {
        let q = AdaptiveSimpson { tolerance: 1e-10, ..Default::default() };
        let out = q.integrate(&|x: f64| x.exp(), 0.0, 2.0);
        assert!((out.value - (2f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn simpson_flags_depth_exhaustion() {
        let q = AdaptiveSimpson { tolerance: 1e-14, max_depth: 2, initial_panels: 1, ..Default::default() };
        let out = q.integrate(&|x: f64| (50.0 * x).sin(), 0.0, 3.0);
        assert!(!out.converged);
        assert!(out.value.is_finite());
    }

    #[test]
    fn simpson_stops_at_evaluation_budget() {
        let q = AdaptiveSimpson { tolerance: 1e-14, max_evaluations: 500, ..Default::default() };
        let out = q.integrate(&|x: f64| (50.0 * x).sin(), 0.0, 3.0);
        assert!(!out.converged);
        assert!(out.evaluations < 1000);
    }

    #[test]
    fn trapezoid_linear_is_exact() {
        let q = Trapezoid { nodes: 11, nudge: 0.0 };
        let out = q.integrate(&|x| 2.0 * x + 1.0, 0.0, 4.0);
        assert!((out.value - 20.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_nudge_keeps_constant_exact() {
        let q = Trapezoid::default();
        let out = q.integrate(&|_| 3.0, 1.0, 51.0);
        assert!((out.value - 150.0).abs() < 1e-9);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(QuadratureKind::by_name("simpson", None, None).unwrap().name(), "simpson");
        let t = QuadratureKind::by_name("trapezoid", None, Some(101)).unwrap();
        assert_eq!(t, QuadratureKind::Trapezoid(Trapezoid { nodes: 101, nudge: 1e-9 }));
        assert_eq!(
            t.refined(2.0),
            QuadratureKind::Trapezoid(Trapezoid { nodes: 201, nudge: 1e-9 })
        );
        assert!(matches!(
            QuadratureKind::by_name("gauss", None, None),
            Err(Error::UnknownStrategy { .. })
        ));
    }
}
