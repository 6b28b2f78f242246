//! The generalized fairness family over group utilities
//!
//! ```text
//! f(v; t) = sign(1 - t) * (sum_g vbar_g^(1 - t))^(1 / t),   vbar = v / sum(v)
//! ```
//!
//! together with its limits, partial derivatives, pairwise elasticity, the
//! rich/poor threshold, the EF-Curve and its normalized area (EF), and the
//! accuracy/fairness transfer ratio.
//!
//! The family has a removable point at `t = 0` (filled with `exp(H(vbar))`)
//! and a jump at `t = 1` (left limit `+|G|`, right limit `-|G|`). Bare `t = 1`
//! is rejected unless a [`Side`] is requested. Natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupId, UtilityVector};
use crate::quadrature::QuadratureKind;

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Offset applied to grid points that land exactly on `t = 1`.
pub const GRID_NUDGE: f64 = 1e-6;

/// Which one-sided limit to take at the jump `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `t -> 1⁻`, value `+|G|`.
    Below,
    /// `t -> 1⁺`, value `-|G|`.
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessParams {
    /// Tax base.
    pub t: f64,
    /// Floor applied to normalized utilities (relative to the total).
    pub epsilon: f64,
    pub side: Option<Side>,
}

impl FairnessParams {
    pub fn new(t: f64) -> Self {
        Self {
            t,
            epsilon: DEFAULT_EPSILON,
            side: None,
        }
    }

    pub fn one_sided(t: f64, side: Side) -> Self {
        Self {
            side: Some(side),
            ..Self::new(t)
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::InvalidTaxBase(self.t));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be in (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Normalized utilities with the epsilon floor applied, plus their logs.
#[derive(Debug, Clone)]
pub struct Normalized {
    vbar: Vec<f64>,
    ln_vbar: Vec<f64>,
    clamped: Vec<GroupId>,
}

impl Normalized {
    pub fn new(v: &UtilityVector, epsilon: f64) -> Result<Self> {
        let mut vbar = v.normalize()?.into_inner();
        let mut clamped = Vec::new();
        for (g, x) in vbar.iter_mut().enumerate() {
            if *x < epsilon {
                *x = epsilon;
                clamped.push(GroupId::from(g));
            }
        }
        if !clamped.is_empty() {
            let total: f64 = vbar.iter().sum();
            vbar.iter_mut().for_each(|x| *x /= total);
        }
        let ln_vbar = vbar.iter().map(|x| x.ln()).collect();
        Ok(Self {
            vbar,
            ln_vbar,
            clamped,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.vbar
    }

    pub fn groups(&self) -> usize {
        self.vbar.len()
    }

    /// Groups whose utility was raised to the epsilon floor.
    pub fn clamped(&self) -> &[GroupId] {
        &self.clamped
    }

    pub fn entropy(&self) -> f64 {
        -self
            .vbar
            .iter()
            .zip(&self.ln_vbar)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }

    /// `ln sum_g vbar_g^(1 - t)`.
    fn ln_power_sum(&self, t: f64) -> f64 {
        if t.abs() <= 1.0 {
            // sum vbar = 1, so S - 1 = sum vbar * expm1(-t ln vbar)
            let excess: f64 = self
                .vbar
                .iter()
                .zip(&self.ln_vbar)
                .map(|(p, l)| p * (-t * l).exp_m1())
                .sum();
            excess.ln_1p()
        } else {
            log_sum_exp(self.ln_vbar.iter().map(|l| (1.0 - t) * l))
        }
    }

    /// `ln S / t`, continuous through `t = 0`.
    fn ln_power_mean(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.entropy();
        }
        if t.abs() < 1e-7 {
            // cumulant expansion: H + t Var(ln vbar) / 2
            let h = self.entropy();
            let mean = -h;
            let var: f64 = self
                .vbar
                .iter()
                .zip(&self.ln_vbar)
                .map(|(p, l)| p * (l - mean) * (l - mean))
                .sum();
            return h + 0.5 * t * var;
        }
        self.ln_power_sum(t) / t
    }

    /// `f(v; t)`; `side` is consulted only at `t = 1`.
    pub fn fairness(&self, t: f64, side: Option<Side>) -> Result<f64> {
        let groups = self.groups() as f64;
        if t == 1.0 {
            return match side {
                Some(Side::Below) => Ok(groups),
                Some(Side::Above) => Ok(-groups),
                None => Err(Error::SingularTaxBase),
            };
        }
        let magnitude = self.ln_power_mean(t).exp();
        Ok(if t < 1.0 { magnitude } else { -magnitude })
    }

    /// `d f / d vbar_g` with the normalized utilities treated as free variables.
    pub fn partial(&self, t: f64, group: GroupId) -> Result<f64> {
        if t == 0.0 || t == 1.0 {
            return Err(Error::InvalidTaxBase(t));
        }
        let g = group.index();
        if g >= self.groups() {
            return Err(Error::UnknownGroup(g));
        }
        let ln_s = self.ln_power_sum(t);
        let ln_mag = ((1.0 - t).abs() / t.abs()).ln() - t * self.ln_vbar[g] + (1.0 / t - 1.0) * ln_s;
        Ok(t.signum() * ln_mag.exp())
    }

    /// `(vbar_r / vbar_p)^(-|t|)`.
    pub fn elasticity(&self, rich: GroupId, poor: GroupId, t: f64) -> Result<f64> {
        let (r, p) = (rich.index(), poor.index());
        if r >= self.groups() {
            return Err(Error::UnknownGroup(r));
        }
        if p >= self.groups() {
            return Err(Error::UnknownGroup(p));
        }
        Ok((-t.abs() * (self.ln_vbar[r] - self.ln_vbar[p])).exp())
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn fairness_general(v: &UtilityVector, p: &FairnessParams) -> Result<f64> {
    p.validate()?;
    Normalized::new(v, p.epsilon)?.fairness(p.t, p.side)
}

/// Shannon entropy (natural log) of the normalized utilities, no floor;
/// `0 ln 0 = 0`.
pub fn entropy_fairness(v: &UtilityVector) -> Result<f64> {
    let vbar = v.normalize()?;
    Ok(-vbar
        .as_slice()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>())
}

/// `(|1 - t| / t) vbar_g^(-t) (sum vbar^(1 - t))^(1/t - 1)`.
pub fn fairness_partial(v: &UtilityVector, p: &FairnessParams, group: GroupId) -> Result<f64> {
    p.validate()?;
    Normalized::new(v, p.epsilon)?.partial(p.t, group)
}

/// Elasticity of the rich group against the poor one, `(vbar_r / vbar_p)^(-|t|)`.
pub fn elasticity(v: &UtilityVector, rich: GroupId, poor: GroupId, p: &FairnessParams) -> Result<f64> {
    p.validate()?;
    Normalized::new(v, p.epsilon)?.elasticity(rich, poor, p.t)
}

/// Reciprocal of [`elasticity`]: how much more a unit of utility for the poor
/// group weighs than one for the rich group.
pub fn support_weight(v: &UtilityVector, rich: GroupId, poor: GroupId, p: &FairnessParams) -> Result<f64> {
    Ok(1.0 / elasticity(v, rich, poor, p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wealth {
    Rich,
    Poor,
}

/// `theta = (sum v / sum v^(1 - t))^(1/t)` in raw utility units. Groups above
/// it lower `f` when their utility grows.
pub fn rich_poor_threshold(v: &UtilityVector, p: &FairnessParams) -> Result<f64> {
    p.validate()?;
    let t = p.t;
    if t == 0.0 || t == 1.0 {
        return Err(Error::InvalidTaxBase(t));
    }
    let total = v.normalize().map(|_| v.total())?;
    let floor = p.epsilon * total;
    let ln_v: Vec<f64> = v.as_slice().iter().map(|x| x.max(floor).ln()).collect();
    let ln_num = log_sum_exp(ln_v.iter().copied());
    let ln_den = log_sum_exp(ln_v.iter().map(|l| (1.0 - t) * l));
    Ok(((ln_num - ln_den) / t).exp())
}

pub fn classify_groups(v: &UtilityVector, p: &FairnessParams) -> Result<Vec<Wealth>> {
    let theta = rich_poor_threshold(v, p)?;
    Ok(v.as_slice()
        .iter()
        .map(|x| {
            // relative slack so that exact ties are not split by rounding
            if *x > theta * (1.0 + 1e-12) {
                Wealth::Rich
            } else {
                Wealth::Poor
            }
        })
        .collect())
}

/// Named end points of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedMetric {
    /// `t -> 0`: `exp(H(vbar))`.
    Entropy,
    /// `t -> +inf`: `-1 / min_g vbar_g`.
    MaxMin,
}

pub fn named_fairness(v: &UtilityVector, metric: NamedMetric, epsilon: f64) -> Result<f64> {
    let n = Normalized::new(v, epsilon)?;
    Ok(match metric {
        NamedMetric::Entropy => n.entropy().exp(),
        NamedMetric::MaxMin => -1.0 / n.values().iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfConfig {
    /// Half-width `M` of the integration window `[1 - M, 1 + M]`.
    pub half_width: f64,
    pub quadrature: QuadratureKind,
    pub epsilon: f64,
}

impl Default for EfConfig {
    fn default() -> Self {
        Self {
            half_width: 50.0,
            quadrature: QuadratureKind::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl EfConfig {
    fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidConfig(format!("M = {} must be > 0", self.half_width)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be in (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfOutcome {
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub clamped: Vec<GroupId>,
}

/// Integration segments of `[1 - M, 1 + M]` split at `0` and `1`, each with
/// the side to use at `t = 1`.
fn ef_segments(m: f64) -> Vec<(f64, f64, Side)> {
    let (lo, hi) = (1.0 - m, 1.0 + m);
    let mut segs = Vec::with_capacity(3);
    if lo < 0.0 {
        segs.push((lo, 0.0, Side::Below));
        segs.push((0.0, 1.0, Side::Below));
    } else {
        segs.push((lo, 1.0, Side::Below));
    }
    segs.push((1.0, hi, Side::Above));
    segs
}

/// `EF = integral over [1 - M, 1 + M] of f(v; t) / (2 M |G|) dt`, reporting
/// convergence instead of failing.
pub fn ef_metric_detailed(v: &UtilityVector, cfg: &EfConfig) -> Result<EfOutcome> {
    cfg.validate()?;
    let n = Normalized::new(v, cfg.epsilon)?;
    let z = 2.0 * cfg.half_width * n.groups() as f64;
    let rule = cfg.quadrature.rule();
    let mut out = EfOutcome {
        value: 0.0,
        converged: true,
        evaluations: 0,
        clamped: n.clamped().to_vec(),
    };
    for (a, b, side) in ef_segments(cfg.half_width) {
        let integrand = |t: f64| {
            n.fairness(t, Some(side))
                .expect("side is always supplied")
                / z
        };
        let seg = rule.integrate(&integrand, a, b);
        out.value += seg.value;
        out.converged &= seg.converged;
        out.evaluations += seg.evaluations;
    }
    Ok(out)
}

/// EF value; non-convergence is an error carrying the partial value.
pub fn ef_metric(v: &UtilityVector, cfg: &EfConfig) -> Result<f64> {
    let out = ef_metric_detailed(v, cfg)?;
    if !out.converged {
        return Err(Error::NonConvergent {
            a: 1.0 - cfg.half_width,
            b: 1.0 + cfg.half_width,
            partial: out.value,
        });
    }
    Ok(out.value)
}

/// `n` evenly spaced points on `[1 - M, 1 + M]`; a point landing on `t = 1`
/// is moved to `1 - GRID_NUDGE`.
pub fn default_t_grid(half_width: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (1.0 - half_width, 1.0 + half_width);
    match n {
        0 => Vec::new(),
        1 => vec![nudge_off_one(lo)],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|k| nudge_off_one(lo + step * k as f64)).collect()
        }
    }
}

fn nudge_off_one(t: f64) -> f64 {
    if t == 1.0 {
        1.0 - GRID_NUDGE
    } else {
        t
    }
}

/// EF-Curve samples `(t, f(v; t) / |G|)`. A bare `t = 1` in the grid is
/// nudged like [`default_t_grid`] does.
pub fn ef_curve(v: &UtilityVector, t_grid: &[f64], cfg: &EfConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let n = Normalized::new(v, cfg.epsilon)?;
    let groups = n.groups() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let t = nudge_off_one(t);
            if !t.is_finite() {
                return Err(Error::InvalidTaxBase(t));
            }
            Ok((t, n.fairness(t, None)? / groups))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffDiagnostics {
    /// `1 - 1 / (1 + k)`.
    pub gamma: f64,
    /// `1 - sum v^(1-|t|) / (sum v * sum v^(-|t|))`.
    pub gamma_closed_form: f64,
    pub k_value: f64,
    /// Gradient of total user utility w.r.t. group utilities (all ones).
    pub accuracy_direction: Vec<f64>,
    /// `1 - vbar`.
    pub fairness_direction: Vec<f64>,
}

/// Transfer ratio of fairness pressure into accuracy loss at tax base `|t|`.
pub fn transfer_ratio(v: &UtilityVector, p: &FairnessParams) -> Result<TradeoffDiagnostics> {
    p.validate()?;
    let a = p.t.abs();
    if a == 0.0 {
        return Err(Error::InvalidTaxBase(p.t));
    }
    let n = Normalized::new(v, p.epsilon)?;
    let vbar = n.values();
    let groups = vbar.len();

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for poor in 0..groups {
        let weight = vbar[poor].powf(1.0 - a);
        denominator += weight;
        for rich in (0..groups).filter(|r| *r != poor) {
            numerator += weight * n.elasticity(GroupId::from(rich), GroupId::from(poor), a)?;
        }
    }
    let k_value = numerator / denominator;
    let gamma = 1.0 - 1.0 / (1.0 + k_value);

    let total = v.total();
    let floor = p.epsilon * total;
    let raw: Vec<f64> = v.as_slice().iter().map(|x| x.max(floor)).collect();
    let s_1 = raw.iter().map(|x| x.powf(1.0 - a)).sum::<f64>();
    let s_0 = raw.iter().sum::<f64>();
    let s_neg = raw.iter().map(|x| x.powf(-a)).sum::<f64>();
    let gamma_closed_form = 1.0 - s_1 / (s_0 * s_neg);

    Ok(TradeoffDiagnostics {
        gamma,
        gamma_closed_form,
        k_value,
        accuracy_direction: vec![1.0; groups],
        fairness_direction: vbar.iter().map(|x| 1.0 - x).collect(),
    })
}
