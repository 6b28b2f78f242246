//! Accuracy and fairness metrics over ranked lists, Pareto sweeps, and tuning
//! a re-ranker to a target NDCG band.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::{ef_metric_detailed, entropy_fairness, EfConfig};
use crate::model::{accumulate_utilities, GroupCatalog, RankedList, ScoreTable, UserId};
use crate::rerank::{vanilla_topk, Registry, RerankOutcome, RerankParams};

fn check_pairing(original: &[RankedList], fair: &[RankedList]) -> Result<()> {
    if original.len() != fair.len() {
        return Err(Error::ListMismatch(format!(
            "{} original lists vs {} fair lists",
            original.len(),
            fair.len()
        )));
    }
    if let Some((o, f)) = original.iter().zip(fair).find(|(o, f)| o.user != f.user) {
        return Err(Error::ListMismatch(format!("user {} paired with user {}", o.user, f.user)));
    }
    Ok(())
}

fn dcg(list: &RankedList) -> f64 {
    list.entries
        .iter()
        .enumerate()
        .map(|(pos, e)| e.original / ((pos + 2) as f64).log2())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgOutcome {
    pub mean: f64,
    /// Users whose original list has zero DCG and were left out of the mean.
    pub skipped: Vec<UserId>,
}

/// Mean over users of `DCG(fair) / DCG(original)`, positions discounted by
/// `log2(rank + 1)` and gains taken from the original scores.
pub fn ndcg_at_k(original: &[RankedList], fair: &[RankedList]) -> Result<NdcgOutcome> {
    check_pairing(original, fair)?;
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut skipped = Vec::new();
    for (o, f) in original.iter().zip(fair) {
        let ideal = dcg(o);
        if ideal == 0.0 {
            log::warn!("user {}: original list has zero DCG, skipped in NDCG", o.user);
            skipped.push(o.user);
            continue;
        }
        sum += dcg(f) / ideal;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(NdcgOutcome {
        mean: sum / counted as f64,
        skipped,
    })
}

/// `(sum of original-list scores - sum of fair-list scores) / (|U| K)`.
pub fn loss_at_k(original: &[RankedList], fair: &[RankedList], k: usize) -> Result<f64> {
    check_pairing(original, fair)?;
    if k == 0 || original.is_empty() {
        return Err(Error::InvalidConfig("Loss@K needs K >= 1 and at least one user".into()));
    }
    let total = |lists: &[RankedList]| -> f64 {
        lists
            .iter()
            .flat_map(|l| l.entries.iter().map(|e| e.original))
            .sum()
    };
    Ok((total(original) - total(fair)) / (original.len() * k) as f64)
}

/// EF of the group utilities accumulated from `fair`.
pub fn ef_at_k(fair: &[RankedList], catalog: &GroupCatalog, cfg: &EfConfig) -> Result<f64> {
    let v = accumulate_utilities(fair, catalog)?;
    crate::fairness::ef_metric(&v, cfg)
}

/// Parameters echoed into a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSettings {
    pub algorithm: String,
    pub k: usize,
    pub half_width: f64,
    pub t: Option<f64>,
    pub eta_percent: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub settings: EvalSettings,
    pub users: usize,
    pub ndcg_at_k: f64,
    pub ndcg_skipped_users: usize,
    pub loss_at_k: f64,
    pub ef_at_k: f64,
    pub ef_converged: bool,
    /// `exp(H)` of the final group shares.
    pub entropy_fairness: f64,
    pub group_names: Vec<String>,
    pub group_utilities: Vec<f64>,
    pub clamped_groups: Vec<String>,
}

impl EvalReport {
    /// Flat `key=value` lines; floats in 17 significant digits.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let num = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), num);
        let s = &self.settings;
        let mut kv = vec![
            ("algorithm".to_string(), s.algorithm.clone()),
            ("k".into(), s.k.to_string()),
            ("m".into(), num(s.half_width)),
            ("t".into(), opt(s.t)),
            ("eta".into(), opt(s.eta_percent)),
            ("lambda".into(), opt(s.lambda)),
            ("users".into(), self.users.to_string()),
            ("ndcg_at_k".into(), num(self.ndcg_at_k)),
            ("ndcg_skipped_users".into(), self.ndcg_skipped_users.to_string()),
            ("loss_at_k".into(), num(self.loss_at_k)),
            ("ef_at_k".into(), num(self.ef_at_k)),
            ("ef_converged".into(), self.ef_converged.to_string()),
            ("entropy_fairness".into(), num(self.entropy_fairness)),
        ];
        for (name, u) in self.group_names.iter().zip(&self.group_utilities) {
            kv.push((format!("utility.{name}"), num(*u)));
        }
        kv.push(("clamped_groups".into(), self.clamped_groups.join(";")));
        kv
    }
}

/// NDCG@K, Loss@K and EF@K of `fair` against `original`. Non-convergence of
/// the EF integral is reported in the flag rather than failing.
pub fn evaluate(
    original: &[RankedList],
    fair: &[RankedList],
    catalog: &GroupCatalog,
    settings: EvalSettings,
    ef_cfg: &EfConfig,
) -> Result<EvalReport> {
    let ndcg = ndcg_at_k(original, fair)?;
    let loss = loss_at_k(original, fair, settings.k)?;
    let v = accumulate_utilities(fair, catalog)?;
    let ef = ef_metric_detailed(&v, ef_cfg)?;
    if !ef.converged {
        log::warn!("EF integral did not reach its tolerance; value {} is approximate", ef.value);
    }
    let clamped_groups: Vec<String> = ef.clamped.iter().map(|g| catalog.group_name(*g).to_string()).collect();
    if !clamped_groups.is_empty() {
        log::warn!("groups with zero utility were clamped: {}", clamped_groups.join(", "));
    }
    Ok(EvalReport {
        settings,
        users: original.len(),
        ndcg_at_k: ndcg.mean,
        ndcg_skipped_users: ndcg.skipped.len(),
        loss_at_k: loss,
        ef_at_k: ef.value,
        ef_converged: ef.converged,
        entropy_fairness: entropy_fairness(&v)?,
        group_names: catalog.group_names().to_vec(),
        group_utilities: v.into_inner(),
        clamped_groups,
    })
}

/// For each `(ndcg, ef)` pair, whether another pair is at least as good in
/// both and strictly better in one. Pairs with a NaN are never dominated and
/// never dominate.
pub fn dominated_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|i| !points[*i].0.is_nan() && !points[*i].1.is_nan())
        .collect();
    order.sort_by(|a, b| points[*b].0.total_cmp(&points[*a].0));
    let mut flags = vec![false; points.len()];
    // Best EF among points with strictly higher NDCG than the current block.
    let mut best_above = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let ndcg = points[order[start]].0;
        let end = start + order[start..].iter().take_while(|i| points[**i].0 == ndcg).count();
        let block = &order[start..end];
        let block_best = block.iter().map(|i| points[*i].1).fold(f64::NEG_INFINITY, f64::max);
        for &i in block {
            let ef = points[i].1;
            flags[i] = best_above >= ef || block_best > ef;
        }
        best_above = best_above.max(block_best);
        start = end;
    }
    flags
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub algorithm: String,
    pub params: RerankParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub algorithm: String,
    pub t: f64,
    pub eta_percent: f64,
    pub lambda: f64,
    pub ndcg: f64,
    pub loss: f64,
    pub ef: f64,
    pub dominated: bool,
    pub error: Option<String>,
}

struct Scored {
    outcome: RerankOutcome,
    ndcg: f64,
    loss: f64,
    ef: f64,
}

fn run_scored(
    registry: &Registry,
    cfg: &SweepConfig,
    table: &ScoreTable,
    catalog: &GroupCatalog,
    original: &[RankedList],
    ef_cfg: &EfConfig,
) -> Result<Scored> {
    let ranker = registry.build(&cfg.algorithm, &cfg.params)?;
    let outcome = ranker.rerank(table, catalog)?;
    let ndcg = ndcg_at_k(original, &outcome.lists)?.mean;
    let loss = loss_at_k(original, &outcome.lists, cfg.params.k)?;
    let ef = ef_at_k(&outcome.lists, catalog, ef_cfg)?;
    Ok(Scored { outcome, ndcg, loss, ef })
}

/// Runs every configuration (in parallel; output keeps grid order) against the
/// vanilla top-K of the same K, then marks dominance. A failing configuration
/// is recorded with its error and NaN metrics.
pub fn pareto_sweep(
    table: &ScoreTable,
    catalog: &GroupCatalog,
    grid: &[SweepConfig],
    registry: &Registry,
    ef_cfg: &EfConfig,
) -> Result<Vec<ParetoPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let mut points: Vec<ParetoPoint> = grid
        .par_iter()
        .map(|cfg| {
            let scored = vanilla_topk(table, cfg.params.k)
                .and_then(|original| run_scored(registry, cfg, table, catalog, &original, ef_cfg));
            let (ndcg, loss, ef, error) = match scored {
                Ok(s) => (s.ndcg, s.loss, s.ef, None),
                Err(e) => {
                    log::warn!("sweep point {} t={} failed: {e}", cfg.algorithm, cfg.params.t);
                    (f64::NAN, f64::NAN, f64::NAN, Some(e.to_string()))
                }
            };
            ParetoPoint {
                algorithm: cfg.algorithm.clone(),
                t: cfg.params.t,
                eta_percent: cfg.params.eta_percent,
                lambda: cfg.params.lambda,
                ndcg,
                loss,
                ef,
                dominated: false,
                error,
            }
        })
        .collect();
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.ndcg, p.ef)).collect();
    for (p, d) in points.iter_mut().zip(dominated_flags(&pairs)) {
        p.dominated = d;
    }
    Ok(points)
}

/// Parameter searched by [`tune_to_ndcg_band`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuningKnob {
    /// Tax base, bisected linearly.
    T { lo: f64, hi: f64 },
    /// Regularization weight, bisected in log space (`lo > 0`).
    Lambda { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningSpec {
    pub knob: TuningKnob,
    pub band: (f64, f64),
    pub max_iterations: usize,
}

impl TuningSpec {
    pub fn new(knob: TuningKnob) -> Self {
        Self {
            knob,
            band: (0.985, 0.995),
            max_iterations: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedPoint {
    pub value: f64,
    pub ndcg: f64,
    pub loss: f64,
    pub ef: f64,
    pub iterations: usize,
    pub outcome: RerankOutcome,
}

/// Bisection on the knob, assuming NDCG falls as the knob grows: `lo` must
/// sit above the band and `hi` below it.
pub fn tune_to_ndcg_band(
    table: &ScoreTable,
    catalog: &GroupCatalog,
    base: &SweepConfig,
    spec: &TuningSpec,
    registry: &Registry,
    ef_cfg: &EfConfig,
) -> Result<TunedPoint> {
    let (band_lo, band_hi) = spec.band;
    let (mut lo, mut hi, log_scale) = match spec.knob {
        TuningKnob::T { lo, hi } => (lo, hi, false),
        TuningKnob::Lambda { lo, hi } => {
            if !(lo > 0.0) {
                return Err(Error::InvalidConfig("lambda bisection needs lo > 0".into()));
            }
            (lo.ln(), hi.ln(), true)
        }
    };
    let original = vanilla_topk(table, base.params.k)?;
    let eval_at = |x: f64| -> Result<(f64, Scored)> {
        let value = if log_scale { x.exp() } else { x };
        let mut cfg = base.clone();
        match spec.knob {
            TuningKnob::T { .. } => cfg.params.t = value,
            TuningKnob::Lambda { .. } => cfg.params.lambda = value,
        }
        Ok((value, run_scored(registry, &cfg, table, catalog, &original, ef_cfg)?))
    };
    let mut closest = f64::NAN;
    let mut note = |ndcg: f64| {
        let gap = |x: f64| if x > band_hi { x - band_hi } else { band_lo - x };
        if closest.is_nan() || gap(ndcg) < gap(closest) {
            closest = ndcg;
        }
    };
    for end in [lo, hi] {
        let (value, s) = eval_at(end)?;
        note(s.ndcg);
        if (band_lo..=band_hi).contains(&s.ndcg) {
            return Ok(TunedPoint { value, ndcg: s.ndcg, loss: s.loss, ef: s.ef, iterations: 0, outcome: s.outcome });
        }
        let expected_above = end == lo;
        if (s.ndcg > band_hi) != expected_above {
            return Err(Error::BandNotReached { lo: band_lo, hi: band_hi, closest });
        }
    }
    for it in 1..=spec.max_iterations {
        let mid = 0.5 * (lo + hi);
        let (value, s) = eval_at(mid)?;
        note(s.ndcg);
        if (band_lo..=band_hi).contains(&s.ndcg) {
            return Ok(TunedPoint { value, ndcg: s.ndcg, loss: s.loss, ef: s.ef, iterations: it, outcome: s.outcome });
        }
        if s.ndcg > band_hi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BandNotReached { lo: band_lo, hi: band_hi, closest })
}
