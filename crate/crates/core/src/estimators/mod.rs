//! Column-mean estimators over sparse cascade observations.

mod annotate;
mod average;
mod cascade;
mod impute;
mod rank1;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use annotate::annotate_estimate;
pub use average::{estimate_direct_average, estimate_prefix_avg};
pub use cascade::{
    build_conditional_matrix, estimate_cascade_lite, estimate_cascade_smoothed, recurse, ConditionalMatrix,
};
pub use impute::{estimate_prefix_lowrank_impute, lowrank_complete, ImputeOptions};
pub use rank1::{rank1_project, Block, Rank1Result};
pub use report::{error_report, DepthError, ErrorReport};

use crate::error::{Error, Result};
use crate::profiler::{subtree_fill_in, ObservationSet};
use crate::trie::{ExecutionTrie, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    PrefixAvg,
    Impute,
    #[serde(rename = "lite")]
    CascadeLite,
    #[serde(rename = "smoothed")]
    CascadeSmoothed,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Direct, Method::PrefixAvg, Method::Impute, Method::CascadeLite, Method::CascadeSmoothed];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::PrefixAvg => "prefix_avg",
            Method::Impute => "impute",
            Method::CascadeLite => "lite",
            Method::CascadeSmoothed => "smoothed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.tag() == s).ok_or_else(|| {
            let tags: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
            Error::InvalidArgument(format!("unknown method `{s}`; expected one of {}", tags.join(", ")))
        })
    }
}

/// Estimated `mu` for every node, indexed by `NodeId` (root is 0).
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMeanEstimate {
    pub mu: Vec<f64>,
    pub method: Method,
    pub coverage: Option<f64>,
    /// Conditional cells or columns that fell back to a pooled value.
    pub fallback_cells: usize,
    /// Fit residual of iterative methods.
    pub residual: Option<f64>,
}

impl ColumnMeanEstimate {
    pub fn get(&self, node: NodeId) -> f64 {
        self.mu[node.index()]
    }

    pub fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("method".into(), self.method.tag().into());
        if let Some(c) = self.coverage {
            m.insert("coverage".into(), c.to_string());
        }
        m.insert("fallback_cells".into(), self.fallback_cells.to_string());
        if let Some(r) = self.residual {
            m.insert("residual".into(), r.to_string());
        }
        m
    }
}

/// Runs `method` with default options.
pub fn estimate(method: Method, obs: &ObservationSet, trie: &ExecutionTrie) -> ColumnMeanEstimate {
    match method {
        Method::Direct => estimate_direct_average(&subtree_fill_in(obs, trie), trie),
        Method::PrefixAvg => estimate_prefix_avg(&subtree_fill_in(obs, trie), trie),
        Method::Impute => estimate_prefix_lowrank_impute(&subtree_fill_in(obs, trie), trie, &ImputeOptions::default()),
        Method::CascadeLite => estimate_cascade_lite(obs, trie),
        Method::CascadeSmoothed => estimate_cascade_smoothed(obs, trie),
    }
}
