//! Reference re-rankers: plain top-K by score, and a streaming greedy that
//! adds a lambda-weighted fairness gain to each item's score.

use serde::{Deserialize, Serialize};

use super::elastic::apply_update;
use super::{validate_k, RerankOutcome, Reranker, UpdateScope};
use crate::error::{Error, Result};
use crate::model::{
    accumulate_utilities, rank_order, Candidate, GroupCatalog, ItemId, RankedEntry, RankedList,
    ScoreTable, UserId, UtilityVector,
};

pub fn vanilla_topk(table: &ScoreTable, k: usize) -> Result<Vec<RankedList>> {
    validate_k(k)?;
    Ok(table
        .users()
        .iter()
        .map(|u| {
            let entries = u
                .candidates
                .iter()
                .map(|c| RankedEntry {
                    item: c.item,
                    original: c.score,
                    adjusted: c.score,
                })
                .collect();
            RankedList::top_k(u.id, entries, k)
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct VanillaTopK {
    k: usize,
}

impl VanillaTopK {
    pub fn new(k: usize) -> Result<Self> {
        validate_k(k)?;
        Ok(Self { k })
    }
}

impl Reranker for VanillaTopK {
    fn name(&self) -> &'static str {
        "vanilla"
    }

    fn rerank(&self, table: &ScoreTable, catalog: &GroupCatalog) -> Result<RerankOutcome> {
        let lists = vanilla_topk(table, self.k)?;
        let utilities = accumulate_utilities(&lists, catalog)?;
        Ok(RerankOutcome {
            lists,
            utilities,
            trace: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Weight of the fairness gain.
    pub lambda: f64,
    /// Tax base of the fairness term.
    pub t: f64,
    /// Starting utility of every group, as in ElasticRank.
    pub initial_utility: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            t: 2.0,
            initial_utility: 1.0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda = {} must be finite and >= 0", self.lambda)));
        }
        if !self.t.is_finite() || self.t == 0.0 {
            return Err(Error::InvalidTaxBase(self.t));
        }
        if self.t == 1.0 && self.lambda > 0.0 {
            return Err(Error::SingularTaxBase);
        }
        if !(self.initial_utility > 0.0 && self.initial_utility.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial utility {} must be > 0",
                self.initial_utility
            )));
        }
        Ok(())
    }
}

/// `f(v; t)` on raw utilities, tracked through the power sums so one group
/// can be bumped in O(1).
struct PowerSums {
    t: f64,
    total: f64,
    power: f64,
}

impl PowerSums {
    fn new(v: &[f64], t: f64) -> Self {
        Self {
            t,
            total: v.iter().sum(),
            power: v.iter().map(|x| x.powf(1.0 - t)).sum(),
        }
    }

    fn value(&self, total: f64, power: f64) -> f64 {
        let t = self.t;
        let magnitude = ((power.ln() - (1.0 - t) * total.ln()) / t).exp();
        if t < 1.0 {
            magnitude
        } else {
            -magnitude
        }
    }

    fn current(&self) -> f64 {
        self.value(self.total, self.power)
    }

    fn with_bump(&self, v_g: f64, amount: f64) -> f64 {
        let t = self.t;
        let power = self.power - v_g.powf(1.0 - t) + (v_g + amount).powf(1.0 - t);
        self.value(self.total + amount, power)
    }
}

/// Streaming greedy with score `s + lambda * (f(v + s e_g) - f(v))`; the
/// gain is re-evaluated after every pick and `v` carries across users.
pub fn greedy_regularized(
    table: &ScoreTable,
    catalog: &GroupCatalog,
    cfg: &BaselineConfig,
    k: usize,
) -> Result<RerankOutcome> {
    validate_k(k)?;
    cfg.validate()?;
    let mut v = UtilityVector::filled(catalog.group_count(), cfg.initial_utility);
    let mut lists = Vec::with_capacity(table.user_count());
    for user in table.users() {
        let list = if cfg.lambda == 0.0 {
            let entries = user
                .candidates
                .iter()
                .map(|c| RankedEntry {
                    item: c.item,
                    original: c.score,
                    adjusted: c.score,
                })
                .collect();
            RankedList::top_k(user.id, entries, k)
        } else {
            greedy_user(user.id, &user.candidates, &v, catalog, cfg, k)
        };
        apply_update(&mut v, &list, &user.candidates, catalog, UpdateScope::Selected);
        lists.push(list);
    }
    Ok(RerankOutcome {
        lists,
        utilities: v,
        trace: None,
    })
}

fn greedy_user(
    user: UserId,
    candidates: &[Candidate],
    v: &UtilityVector,
    catalog: &GroupCatalog,
    cfg: &BaselineConfig,
    k: usize,
) -> RankedList {
    let mut working = v.as_slice().to_vec();
    let mut remaining: Vec<(ItemId, f64, usize)> = candidates
        .iter()
        .map(|c| (c.item, c.score, catalog.group_index(c.item)))
        .collect();
    let mut picked = Vec::with_capacity(k.min(remaining.len()));
    while picked.len() < k && !remaining.is_empty() {
        let sums = PowerSums::new(&working, cfg.t);
        let base = sums.current();
        let mut best: Option<(usize, RankedEntry)> = None;
        for (idx, (item, score, group)) in remaining.iter().enumerate() {
            let gain = sums.with_bump(working[*group], *score) - base;
            let entry = RankedEntry {
                item: *item,
                original: *score,
                adjusted: score + cfg.lambda * gain,
            };
            let better = match &best {
                None => true,
                Some((_, b)) => rank_order(&entry, b).is_lt(),
            };
            if better {
                best = Some((idx, entry));
            }
        }
        let (idx, entry) = best.expect("remaining is non-empty");
        let (_, score, group) = remaining.swap_remove(idx);
        working[group] += score;
        picked.push(entry);
    }
    // Gains at pick time need not be monotone; present the list by adjusted score.
    let n = picked.len();
    let mut list = RankedList::top_k(user, picked, n);
    list.underfilled = candidates.len() < k;
    list
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyRegularized {
    cfg: BaselineConfig,
    k: usize,
}

impl GreedyRegularized {
    pub fn new(cfg: BaselineConfig, k: usize) -> Result<Self> {
        validate_k(k)?;
        cfg.validate()?;
        Ok(Self { cfg, k })
    }
}

impl Reranker for GreedyRegularized {
    fn name(&self) -> &'static str {
        "greedy-reg"
    }

    fn rerank(&self, table: &ScoreTable, catalog: &GroupCatalog) -> Result<RerankOutcome> {
        greedy_regularized(table, catalog, &self.cfg, self.k)
    }
}
