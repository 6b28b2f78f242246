//! ElasticRank: additive curve-distance boost towards an anchor group.
//!
//! For each arriving user the groups are sorted by current utility, the group
//! at the `eta%` position becomes the anchor `a`, and every candidate's score is
//! shifted by `d(g(i), a)`. The top-K of the shifted scores form the list and
//! the group utilities are updated before the next user.

use serde::{Deserialize, Serialize};

use super::{validate_k, DistanceBasis, RerankOutcome, Reranker, TraceStep, UpdateScope};
use crate::error::{Error, Result};
use crate::model::{Candidate, GroupCatalog, GroupId, RankedEntry, RankedList, ScoreTable, UserId, UtilityVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticRankConfig {
    /// Tax base; `t = 1` switches the adjustment off.
    pub t: f64,
    /// Anchor position in the ascending utility order, as a percentage.
    pub eta_percent: f64,
    pub k: usize,
    /// Starting utility of every group.
    pub initial_utility: f64,
    pub update_scope: UpdateScope,
    pub distance_basis: DistanceBasis,
    pub record_trace: bool,
}

impl Default for ElasticRankConfig {
    fn default() -> Self {
        Self {
            t: 1.5,
            eta_percent: 90.0,
            k: 10,
            initial_utility: 1.0,
            update_scope: UpdateScope::Selected,
            distance_basis: DistanceBasis::Raw,
            record_trace: false,
        }
    }
}

impl ElasticRankConfig {
    pub fn validate(&self) -> Result<()> {
        validate_k(self.k)?;
        if !self.t.is_finite() {
            return Err(Error::InvalidTaxBase(self.t));
        }
        if !(0.0..100.0).contains(&self.eta_percent) {
            return Err(Error::InvalidConfig(format!(
                "eta = {} must lie in [0, 100)",
                self.eta_percent
            )));
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

/// `d = (1 - t) v_g^(-t) (v_a^(1-t) - v_g^(1-t))`.
pub fn curve_distance(v_g: f64, v_a: f64, t: f64) -> Result<f64> {
    for v in [v_g, v_a] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveUtility(v));
        }
    }
    Ok((1.0 - t) * v_g.powf(-t) * (v_a.powf(1.0 - t) - v_g.powf(1.0 - t)))
}

/// Group at position `floor(eta/100 * |G|)` (clamped) of the ascending
/// utility order, ties by ascending group id.
pub fn select_anchor(v: &UtilityVector, eta_percent: f64) -> GroupId {
    let values = v.as_slice();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
    let b = (eta_percent * values.len() as f64 / 100.0).floor().max(0.0) as usize;
    GroupId::from(order[b.min(values.len().saturating_sub(1))])
}

/// Anchor and per-group distance for the current utilities.
pub fn group_distances(v: &UtilityVector, cfg: &ElasticRankConfig) -> Result<(GroupId, Vec<f64>)> {
    if v.is_empty() {
        return Err(Error::DegenerateUtility);
    }
    let anchor = select_anchor(v, cfg.eta_percent);
    let basis = match cfg.distance_basis {
        DistanceBasis::Raw => v.clone(),
        DistanceBasis::Normalized => v.normalize()?,
    };
    let v_a = basis.get(anchor);
    let distances = basis
        .as_slice()
        .iter()
        .map(|v_g| curve_distance(*v_g, v_a, cfg.t))
        .collect::<Result<Vec<_>>>()?;
    Ok((anchor, distances))
}

fn rank_with_distances(
    user: UserId,
    candidates: &[Candidate],
    distances: &[f64],
    catalog: &GroupCatalog,
    k: usize,
) -> RankedList {
    let entries = candidates
        .iter()
        .map(|c| RankedEntry {
            item: c.item,
            original: c.score,
            adjusted: c.score + distances[catalog.group_index(c.item)],
        })
        .collect();
    RankedList::top_k(user, entries, k)
}

/// Re-ranks one user's candidates against the utilities `v`.
pub fn elastic_rerank_user(
    user: UserId,
    candidates: &[Candidate],
    v: &UtilityVector,
    catalog: &GroupCatalog,
    cfg: &ElasticRankConfig,
) -> Result<RankedList> {
    cfg.validate()?;
    if v.len() != catalog.group_count() {
        return Err(Error::InvalidConfig(format!(
            "utility vector has {} groups, catalog has {}",
            v.len(),
            catalog.group_count()
        )));
    }
    for c in candidates {
        catalog.group_of(c.item)?;
    }
    let (_, distances) = group_distances(v, cfg)?;
    Ok(rank_with_distances(user, candidates, &distances, catalog, cfg.k))
}

/// Adds the user's contribution to `v`; items are added in list order.
pub(crate) fn apply_update(
    v: &mut UtilityVector,
    list: &RankedList,
    candidates: &[Candidate],
    catalog: &GroupCatalog,
    scope: UpdateScope,
) {
    match scope {
        UpdateScope::Selected => {
            for e in &list.entries {
                v.add(GroupId::from(catalog.group_index(e.item)), e.original);
            }
        }
        UpdateScope::AllCandidates => {
            for c in candidates {
                v.add(GroupId::from(catalog.group_index(c.item)), c.score);
            }
        }
    }
}

/// Runs ElasticRank over every user in arrival order.
pub fn elastic_rerank_stream(
    table: &ScoreTable,
    catalog: &GroupCatalog,
    cfg: &ElasticRankConfig,
) -> Result<RerankOutcome> {
    cfg.validate()?;
    let mut v = UtilityVector::filled(catalog.group_count(), cfg.initial_utility);
    let mut lists = Vec::with_capacity(table.user_count());
    let mut trace = cfg.record_trace.then(Vec::new);
    for (step, user) in table.users().iter().enumerate() {
        let (anchor, distances) = group_distances(&v, cfg)?;
        let list = rank_with_distances(user.id, &user.candidates, &distances, catalog, cfg.k);
        if let Some(trace) = trace.as_mut() {
            trace.push(TraceStep {
                step,
                anchor,
                utilities: v.as_slice().to_vec(),
                distances,
            });
        }
        apply_update(&mut v, &list, &user.candidates, catalog, cfg.update_scope);
        lists.push(list);
    }
    Ok(RerankOutcome {
        lists,
        utilities: v,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct ElasticRank {
    cfg: ElasticRankConfig,
}

impl ElasticRank {
    pub fn new(cfg: ElasticRankConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ElasticRankConfig {
        &self.cfg
    }
}

impl Reranker for ElasticRank {
    fn name(&self) -> &'static str {
        "elastic"
    }

    fn rerank(&self, table: &ScoreTable, catalog: &GroupCatalog) -> Result<RerankOutcome> {
        elastic_rerank_stream(table, catalog, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ItemId;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn catalog(groups: &[u32]) -> GroupCatalog {
        let n = *groups.iter().max().unwrap() as usize + 1;
        GroupCatalog::new(
            (0..n).map(|g| format!("g{g}")).collect(),
            groups
                .iter()
                .enumerate()
                .map(|(i, g)| (format!("i{i}"), GroupId(*g)))
                .collect(),
        )
        .unwrap()
    }

    fn cands(xs: &[(u32, f64)]) -> Vec<Candidate> {
        xs.iter().map(|(i, s)| Candidate { item: ItemId(*i), score: *s }).collect()
    }

    #[test]
    fn distance_examples() {
        for t in [-3.0, 0.5, 1.0, 2.0, 7.5] {
            assert_eq!(curve_distance(2.0, 2.0, t).unwrap(), 0.0);
        }
        assert!(close(curve_distance(1.0, 3.0, 2.0).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(close(curve_distance(3.0, 1.0, 2.0).unwrap(), -2.0 / 27.0, 1e-15));
        assert!(close(curve_distance(3.0, 1.0, 2.0).unwrap(), -0.0741, 1e-4));
        assert_eq!(curve_distance(1.0, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn distance_sign_on_both_sides_of_one() {
        for t in [-2.0, 0.3, 0.99, 1.01, 1.5, 4.0] {
            assert!(curve_distance(1.0, 3.0, t).unwrap() > 0.0, "t={t}");
            assert!(curve_distance(3.0, 1.0, t).unwrap() < 0.0, "t={t}");
        }
    }

    #[test]
    fn distance_rejects_non_positive() {
        assert!(matches!(curve_distance(0.0, 1.0, 2.0), Err(Error::NonPositiveUtility(_))));
        assert!(matches!(curve_distance(1.0, -1.0, 2.0), Err(Error::NonPositiveUtility(_))));
    }

    #[test]
    fn anchor_examples() {
        let v = UtilityVector::new(vec![5.0, 1.0, 3.0, 2.0]);
        assert_eq!(select_anchor(&v, 50.0), GroupId(2));
        assert_eq!(select_anchor(&v, 0.0), GroupId(1));
        assert_eq!(select_anchor(&v, 95.0), GroupId(0));
        let tied = UtilityVector::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(select_anchor(&tied, 0.0), GroupId(0));
        assert_eq!(select_anchor(&tied, 99.0), GroupId(2));
    }

    #[test]
    fn single_group_matches_vanilla_order() {
        let cat = catalog(&[0, 0, 0, 0]);
        let c = cands(&[(0, 0.2), (1, 0.9), (2, 0.5), (3, 0.7)]);
        let cfg = ElasticRankConfig { t: 2.0, k: 2, ..Default::default() };
        let v = UtilityVector::new(vec![4.0]);
        let l = elastic_rerank_user(UserId(0), &c, &v, &cat, &cfg).unwrap();
        assert_eq!(l.items().map(|i| i.0).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn poor_group_overtakes_rich_item() {
        let cat = catalog(&[0, 1]);
        let c = cands(&[(0, 0.5), (1, 1.0)]);
        // eta = 50 over two groups picks the richer group g1 as anchor
        let cfg = ElasticRankConfig { t: 2.0, k: 1, eta_percent: 50.0, ..Default::default() };
        let v = UtilityVector::new(vec![1.0, 3.0]);
        let (anchor, d) = group_distances(&v, &cfg).unwrap();
        assert_eq!(anchor, GroupId(1));
        assert!(close(d[0], 2.0 / 3.0, 1e-15));
        assert_eq!(d[1], 0.0);
        let l = elastic_rerank_user(UserId(0), &c, &v, &cat, &cfg).unwrap();
        assert_eq!(l.entries[0].item, ItemId(0));
        assert!(close(l.entries[0].adjusted, 0.5 + 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn t_one_is_vanilla() {
        let cat = catalog(&[0, 1, 0, 1]);
        let c = cands(&[(0, 0.3), (1, 0.8), (2, 0.6), (3, 0.1)]);
        let cfg = ElasticRankConfig { t: 1.0, k: 3, ..Default::default() };
        let l = elastic_rerank_user(UserId(0), &c, &UtilityVector::new(vec![1.0, 9.0]), &cat, &cfg).unwrap();
        assert_eq!(l.items().map(|i| i.0).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert!(l.entries.iter().all(|e| e.adjusted == e.original));
    }

    #[test]
    fn under_filled_user_is_flagged() {
        let cat = catalog(&[0, 1]);
        let cfg = ElasticRankConfig { k: 5, ..Default::default() };
        let l = elastic_rerank_user(UserId(0), &cands(&[(0, 0.4)]), &UtilityVector::filled(2, 1.0), &cat, &cfg)
            .unwrap();
        assert!(l.underfilled);
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn normalized_basis_uses_shares() {
        let cfg = ElasticRankConfig {
            t: 2.0,
            eta_percent: 50.0,
            distance_basis: DistanceBasis::Normalized,
            ..Default::default()
        };
        let (_, d) = group_distances(&UtilityVector::new(vec![10.0, 30.0]), &cfg).unwrap();
        assert!(close(d[0], curve_distance(0.25, 0.75, 2.0).unwrap(), 1e-15));
        let (_, d2) = group_distances(&UtilityVector::new(vec![1.0, 3.0]), &cfg).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn config_validation() {
        let bad = [
            ElasticRankConfig { k: 0, ..Default::default() },
            ElasticRankConfig { eta_percent: 100.0, ..Default::default() },
            ElasticRankConfig { eta_percent: -1.0, ..Default::default() },
            ElasticRankConfig { initial_utility: 0.0, ..Default::default() },
            ElasticRankConfig { t: f64::NAN, ..Default::default() },
        ];
        for cfg in bad {
            assert!(ElasticRank::new(cfg).is_err());
        }
    }
}
