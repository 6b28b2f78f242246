//! Shared data model: candidate scores, item groups, group utilities and
//! ranked lists.
//!
//! Users, items and groups are re-indexed to dense integers at ingestion; the
//! original string ids are kept alongside for output.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! dense_id {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                Self(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(UserId);
dense_id!(ItemId);
dense_id!(GroupId);

/// Item to group mapping. Every item belongs to exactly one group and group
/// ids are dense `0..group_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCatalog {
    item_names: Vec<String>,
    item_group: Vec<GroupId>,
    group_names: Vec<String>,
    rosters: Vec<Vec<ItemId>>,
}

impl GroupCatalog {
    /// Builds a catalog from `(item name, group index)` pairs. Item ids follow
    /// the order of `items`.
    pub fn new(group_names: Vec<String>, items: Vec<(String, GroupId)>) -> Result<Self> {
        if group_names.is_empty() {
            return Err(Error::InvalidConfig("catalog needs at least one group".into()));
        }
        let mut rosters = vec![Vec::new(); group_names.len()];
        let mut item_names = Vec::with_capacity(items.len());
        let mut item_group = Vec::with_capacity(items.len());
        for (idx, (name, group)) in items.into_iter().enumerate() {
            if group.index() >= group_names.len() {
                return Err(Error::UnknownGroup(group.index()));
            }
            rosters[group.index()].push(ItemId::from(idx));
            item_names.push(name);
            item_group.push(group);
        }
        Ok(Self {
            item_names,
            item_group,
            group_names,
            rosters,
        })
    }

    pub fn group_count(&self) -> usize {
        self.group_names.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_names.len()
    }

    pub fn group_of(&self, item: ItemId) -> Result<GroupId> {
        self.item_group
            .get(item.index())
            .copied()
            .ok_or_else(|| Error::UnknownItem(item.to_string()))
    }

    /// Unchecked lookup for hot loops over validated tables.
    #[inline]
    pub(crate) fn group_index(&self, item: ItemId) -> usize {
        self.item_group[item.index()].index()
    }

    pub fn item_name(&self, item: ItemId) -> &str {
        &self.item_names[item.index()]
    }

    pub fn group_name(&self, group: GroupId) -> &str {
        &self.group_names[group.index()]
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn roster(&self, group: GroupId) -> &[ItemId] {
        &self.rosters[group.index()]
    }

    pub fn roster_sizes(&self) -> Vec<usize> {
        self.rosters.iter().map(Vec::len).collect()
    }

    pub fn item_by_name(&self, name: &str) -> Option<ItemId> {
        self.item_names
            .iter()
            .position(|n| n == name)
            .map(ItemId::from)
    }

    pub fn items(&self) -> impl Iterator<Item = (ItemId, &str, GroupId)> {
        self.item_names
            .iter()
            .zip(&self.item_group)
            .enumerate()
            .map(|(i, (n, g))| (ItemId::from(i), n.as_str(), *g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub item: ItemId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEntry {
    pub id: UserId,
    pub name: String,
    pub candidates: Vec<Candidate>,
}

/// Per-user candidate scores, held in user arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    users: Vec<UserEntry>,
}

impl ScoreTable {
    /// Validates items against the catalog and scores for finiteness and
    /// non-negativity. User ids are reassigned to arrival positions.
    pub fn new(users: Vec<(String, Vec<Candidate>)>, catalog: &GroupCatalog) -> Result<Self> {
        let mut out = Vec::with_capacity(users.len());
        for (pos, (name, candidates)) in users.into_iter().enumerate() {
            for c in &candidates {
                if c.item.index() >= catalog.item_count() {
                    return Err(Error::UnknownItem(c.item.to_string()));
                }
                if !c.score.is_finite() || c.score < 0.0 {
                    return Err(Error::InvalidScore {
                        user: name.clone(),
                        item: catalog.item_name(c.item).to_string(),
                        score: c.score,
                    });
                }
            }
            out.push(UserEntry {
                id: UserId::from(pos),
                name,
                candidates,
            });
        }
        Ok(Self { users: out })
    }

    pub fn users(&self) -> &[UserEntry] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn interaction_count(&self) -> usize {
        self.users.iter().map(|u| u.candidates.len()).sum()
    }

    /// Users with fewer than `k` candidates.
    pub fn underfilled(&self, k: usize) -> Vec<UserId> {
        self.users
            .iter()
            .filter(|u| u.candidates.len() < k)
            .map(|u| u.id)
            .collect()
    }
}

/// Accumulated utility per item group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(groups: usize) -> Self {
        Self(vec![0.0; groups])
    }

    pub fn filled(groups: usize, value: f64) -> Self {
        Self(vec![value; groups])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, group: GroupId) -> f64 {
        self.0[group.index()]
    }

    pub fn add(&mut self, group: GroupId, amount: f64) {
        self.0[group.index()] += amount;
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Elementwise sum; both vectors must cover the same groups.
    pub fn merged(&self, other: &UtilityVector) -> Result<UtilityVector> {
        if self.len() != other.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot merge utility vectors of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(UtilityVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scaled(&self, c: f64) -> UtilityVector {
        UtilityVector(self.0.iter().map(|x| x * c).collect())
    }

    /// `v_g / sum(v)`. Fails on empty, negative, non-finite or all-zero input.
    pub fn normalize(&self) -> Result<UtilityVector> {
        if self.0.is_empty() || self.0.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::DegenerateUtility);
        }
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::DegenerateUtility);
        }
        Ok(UtilityVector(self.0.iter().map(|x| x / total).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item: ItemId,
    /// Score from the base ranker.
    pub original: f64,
    /// Score used for ordering (original plus any fairness adjustment).
    pub adjusted: f64,
}

/// Top-K selection for one user. Rank positions start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user: UserId,
    pub entries: Vec<RankedEntry>,
    /// Set when the user had fewer than K candidates.
    pub underfilled: bool,
}

impl RankedList {
    /// Selects the `k` entries with largest adjusted score, ordered by adjusted
    /// score descending with ties broken by ascending item id.
    pub fn top_k(user: UserId, mut entries: Vec<RankedEntry>, k: usize) -> Self {
        let underfilled = entries.len() < k;
        if entries.len() > k && k > 0 {
            entries.select_nth_unstable_by(k - 1, rank_order);
        }
        entries.truncate(k);
        entries.sort_unstable_by(rank_order);
        Self {
            user,
            entries,
            underfilled,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|e| e.item)
    }

    /// 1-based position of `item`, if selected.
    pub fn rank_of(&self, item: ItemId) -> Option<usize> {
        self.entries.iter().position(|e| e.item == item).map(|p| p + 1)
    }
}

/// Descending adjusted score, then ascending item id.
pub fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.adjusted
        .total_cmp(&a.adjusted)
        .then_with(|| a.item.cmp(&b.item))
}

/// Per-group sum of ORIGINAL scores over every selected item.
pub fn accumulate_utilities(lists: &[RankedList], catalog: &GroupCatalog) -> Result<UtilityVector> {
    let mut v = UtilityVector::zeros(catalog.group_count());
    for list in lists {
        for e in &list.entries {
            let g = catalog.group_of(e.item)?;
            v.add(g, e.original);
        }
    }
    Ok(v)
}

/// Sum of original scores in one user's list.
pub fn user_utility(list: &RankedList) -> f64 {
    list.entries.iter().map(|e| e.original).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog(groups: &[usize]) -> GroupCatalog {
        let names = (0..groups.iter().max().unwrap() + 1)
            .map(|g| format!("g{g}"))
            .collect();
        let items = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("i{i}"), GroupId::from(*g)))
            .collect();
        GroupCatalog::new(names, items).unwrap()
    }

    fn entry(item: u32, s: f64) -> RankedEntry {
        RankedEntry {
            item: ItemId(item),
            original: s,
            adjusted: s,
        }
    }

    fn list(user: u32, entries: Vec<RankedEntry>) -> RankedList {
        RankedList {
            user: UserId(user),
            entries,
            underfilled: false,
        }
    }

    #[test]
    fn accumulate_empty_is_zero() {
        let cat = catalog(&[0, 1]);
        let v = accumulate_utilities(&[], &cat).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn accumulate_single_user() {
        let cat = catalog(&[0, 1]);
        let v = accumulate_utilities(&[list(0, vec![entry(0, 0.9), entry(1, 0.4)])], &cat).unwrap();
        assert_eq!(v.as_slice(), &[0.9, 0.4]);
    }

    #[test]
    fn accumulate_two_users_same_group() {
        let cat = catalog(&[0, 0, 1]);
        let lists = [list(0, vec![entry(0, 0.9)]), list(1, vec![entry(1, 0.6)])];
        let v = accumulate_utilities(&lists, &cat).unwrap();
        assert!((v.as_slice()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn accumulate_uses_original_scores() {
        let cat = catalog(&[0]);
        let mut e = entry(0, 0.3);
        e.adjusted = 5.0;
        let v = accumulate_utilities(&[list(0, vec![e])], &cat).unwrap();
        assert_eq!(v.as_slice(), &[0.3]);
    }

    #[test]
    fn accumulate_unknown_item_fails() {
        let cat = catalog(&[0]);
        let err = accumulate_utilities(&[list(0, vec![entry(7, 0.3)])], &cat).unwrap_err();
        assert!(matches!(err, Error::UnknownItem(_)));
    }

    #[test]
    fn user_utility_sums() {
        assert!((user_utility(&list(0, vec![entry(0, 0.9), entry(1, 0.4)])) - 1.3).abs() < 1e-15);
        assert_eq!(user_utility(&list(0, vec![])), 0.0);
        let three = list(0, vec![entry(0, 0.5), entry(1, 0.5), entry(2, 0.5)]);
        assert_eq!(user_utility(&three), 1.5);
    }

    #[test]
    fn normalize_examples() {
        let n = UtilityVector::new(vec![1.0, 3.0]).normalize().unwrap();
        assert_eq!(n.as_slice(), &[0.25, 0.75]);
        let n = UtilityVector::new(vec![2.0, 2.0, 2.0]).normalize().unwrap();
        for x in n.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let n = UtilityVector::new(vec![5.0, 0.0, 5.0]).normalize().unwrap();
        assert_eq!(n.as_slice(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn normalize_rejects_degenerate() {
        assert!(matches!(
            UtilityVector::zeros(3).normalize(),
            Err(Error::DegenerateUtility)
        ));
        assert!(UtilityVector::new(vec![]).normalize().is_err());
        assert!(UtilityVector::new(vec![1.0, f64::NAN]).normalize().is_err());
    }

    #[test]
    fn top_k_orders_and_breaks_ties_by_item() {
        let l = RankedList::top_k(
            UserId(0),
            vec![entry(3, 0.5), entry(1, 0.9), entry(2, 0.5), entry(0, 0.1)],
            3,
        );
        let items: Vec<u32> = l.items().map(|i| i.0).collect();
        assert_eq!(items, vec![1, 2, 3]);
        assert!(!l.underfilled);
        assert_eq!(l.rank_of(ItemId(2)), Some(2));
    }

    #[test]
    fn top_k_underfilled() {
        let l = RankedList::top_k(UserId(0), vec![entry(0, 0.5)], 3);
        assert_eq!(l.len(), 1);
        assert!(l.underfilled);
    }

    #[test]
    fn score_table_rejects_bad_scores() {
        let cat = catalog(&[0]);
        for bad in [-0.1, f64::NAN, f64::INFINITY] {
            let r = ScoreTable::new(
                vec![("u".into(), vec![Candidate { item: ItemId(0), score: bad }])],
                &cat,
            );
            assert!(matches!(r, Err(Error::InvalidScore { .. })));
        }
        let r = ScoreTable::new(
            vec![("u".into(), vec![Candidate { item: ItemId(4), score: 0.1 }])],
            &cat,
        );
        assert!(matches!(r, Err(Error::UnknownItem(_))));
    }

    proptest! {
        #[test]
        fn accumulate_is_additive_over_user_partitions(
            scores in prop::collection::vec(prop::collection::vec((0u32..6, 0.0f64..1.0), 0..4), 0..12),
            split in 0usize..12,
        ) {
            let cat = catalog(&[0, 1, 2, 0, 1, 2]);
            let lists: Vec<RankedList> = scores
                .iter()
                .enumerate()
                .map(|(u, es)| list(u as u32, es.iter().map(|(i, s)| entry(*i, *s)).collect()))
                .collect();
            let split = split.min(lists.len());
            let whole = accumulate_utilities(&lists, &cat).unwrap();
            let a = accumulate_utilities(&lists[..split], &cat).unwrap();
            let b = accumulate_utilities(&lists[split..], &cat).unwrap();
            let merged = a.merged(&b).unwrap();
            for (x, y) in whole.as_slice().iter().zip(merged.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let users: f64 = lists.iter().map(user_utility).sum();
            prop_assert!((whole.total() - users).abs() < 1e-12);
        }

        #[test]
        fn normalize_is_scale_invariant(
            v in prop::collection::vec(0.0f64..10.0, 1..8),
            c in 1e-3f64..1e3,
        ) {
            prop_assume!(v.iter().sum::<f64>() > 1e-9);
            let u = UtilityVector::new(v);
            let a = u.normalize().unwrap();
            let b = u.scaled(c).normalize().unwrap();
            prop_assert!((a.total() - 1.0).abs() < 1e-12);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
