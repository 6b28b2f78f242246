//! Re-rankers over a user arrival stream.
//!
//! Every algorithm implements [`Reranker`] and is registered by name in a
//! [`Registry`]; callers pick one at runtime from a config or command line.
//! The built-in names are `elastic`, `vanilla` and `greedy-reg`.

mod baseline;
mod elastic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupCatalog, GroupId, RankedList, ScoreTable, UtilityVector};

pub use baseline::{greedy_regularized, vanilla_topk, BaselineConfig, GreedyRegularized, VanillaTopK};
pub use elastic::{
    curve_distance, elastic_rerank_stream, elastic_rerank_user, group_distances, select_anchor,
    ElasticRank, ElasticRankConfig,
};

/// Which items feed the per-user utility update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateScope {
    /// Only items placed in the user's list.
    #[default]
    Selected,
    /// Every candidate of the user, grouped.
    AllCandidates,
}

impl FromStr for UpdateScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selected" => Ok(UpdateScope::Selected),
            "all-candidates" => Ok(UpdateScope::AllCandidates),
            other => Err(Error::InvalidConfig(format!(
                "update scope `{other}` (expected selected or all-candidates)"
            ))),
        }
    }
}

impl fmt::Display for UpdateScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateScope::Selected => "selected",
            UpdateScope::AllCandidates => "all-candidates",
        })
    }
}

/// Utility scale fed to the curve distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DistanceBasis {
    /// Accumulated utilities as they are.
    #[default]
    Raw,
    /// Utilities divided by their total, so the distance does not shrink as
    /// the stream grows.
    Normalized,
}

impl FromStr for DistanceBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(DistanceBasis::Raw),
            "normalized" => Ok(DistanceBasis::Normalized),
            other => Err(Error::InvalidConfig(format!(
                "distance basis `{other}` (expected raw or normalized)"
            ))),
        }
    }
}

impl fmt::Display for DistanceBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceBasis::Raw => "raw",
            DistanceBasis::Normalized => "normalized",
        })
    }
}

/// Group utilities and curve distances seen by one user, before its update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub anchor: GroupId,
    pub utilities: Vec<f64>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub lists: Vec<RankedList>,
    /// Utility state after the last user (includes any initial utility).
    pub utilities: UtilityVector,
    pub trace: Option<Vec<TraceStep>>,
}

pub trait Reranker: Send + Sync {
    fn name(&self) -> &'static str;

    fn rerank(&self, table: &ScoreTable, catalog: &GroupCatalog) -> Result<RerankOutcome>;
}

/// Union of every knob the built-in re-rankers read. Each factory picks the
/// fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankParams {
    pub k: usize,
    pub t: f64,
    pub eta_percent: f64,
    pub lambda: f64,
    pub initial_utility: f64,
    pub update_scope: UpdateScope,
    pub distance_basis: DistanceBasis,
    pub record_trace: bool,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            k: 10,
            t: 1.0,
            eta_percent: 90.0,
            lambda: 0.0,
            initial_utility: 1.0,
            update_scope: UpdateScope::Selected,
            distance_basis: DistanceBasis::Raw,
            record_trace: false,
        }
    }
}

type Factory = Box<dyn Fn(&RerankParams) -> Result<Box<dyn Reranker>> + Send + Sync>;

/// Name-keyed table of re-ranker constructors.
pub struct Registry {
    factories: BTreeMap<String, Factory>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with `elastic`, `vanilla` and `greedy-reg`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("elastic", |p| {
            let cfg = ElasticRankConfig {
                t: p.t,
                eta_percent: p.eta_percent,
                k: p.k,
                initial_utility: p.initial_utility,
                update_scope: p.update_scope,
                distance_basis: p.distance_basis,
                record_trace: p.record_trace,
            };
            Ok(Box::new(ElasticRank::new(cfg)?) as Box<dyn Reranker>)
        });
        r.register("vanilla", |p| {
            Ok(Box::new(VanillaTopK::new(p.k)?) as Box<dyn Reranker>)
        });
        r.register("greedy-reg", |p| {
            let cfg = BaselineConfig {
                lambda: p.lambda,
                t: p.t,
                initial_utility: p.initial_utility,
            };
            Ok(Box::new(GreedyRegularized::new(cfg, p.k)?) as Box<dyn Reranker>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&RerankParams) -> Result<Box<dyn Reranker>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &RerankParams) -> Result<Box<dyn Reranker>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "algorithm",
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(params)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn validate_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let r = Registry::with_builtins();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["elastic", "greedy-reg", "vanilla"]);
        let p = RerankParams::default();
        for name in ["elastic", "greedy-reg", "vanilla"] {
            assert_eq!(r.build(name, &RerankParams { t: 2.0, ..p.clone() }).unwrap().name(), name);
        }
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let err = Registry::with_builtins()
            .build("pmmf", &RerankParams::default())
            .err()
            .unwrap();
        assert!(err.to_string().contains("elastic, greedy-reg, vanilla"), "{err}");
    }

    #[test]
    fn custom_strategy_can_be_registered() {
        let mut r = Registry::empty();
        r.register("topk", |p| Ok(Box::new(VanillaTopK::new(p.k)?) as Box<dyn Reranker>));
        assert_eq!(r.build("topk", &RerankParams::default()).unwrap().name(), "vanilla");
    }

    #[test]
    fn parses_enums() {
        assert_eq!("all-candidates".parse::<UpdateScope>().unwrap(), UpdateScope::AllCandidates);
        assert_eq!("normalized".parse::<DistanceBasis>().unwrap(), DistanceBasis::Normalized);
        assert!("both".parse::<UpdateScope>().is_err());
    }
}
