//! Highway → bridge → building metapath profiles and rule-based bridge roles.

use crate::graph::{compute_knn_edges, BuildingCategory, Edge, HetGraph, KnnParams, NodeId};
use crate::par::Exec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetapathProfile {
    pub bridge_id: NodeId,
    pub shop_paths: usize,
    pub hospital_paths: usize,
    pub residence_paths: usize,
    pub highway_count: usize,
    pub is_highway: bool,
}

impl MetapathProfile {
    pub fn counts(&self) -> [usize; 3] {
        [self.shop_paths, self.hospital_paths, self.residence_paths]
    }

    pub fn count(&self, c: BuildingCategory) -> usize {
        self.counts()[c.index()]
    }

    /// Raw bridge → building edge total.
    pub fn total_paths(&self) -> usize {
        self.counts().iter().sum()
    }

    /// Paths that also start on a highway: zero for non-highway bridges.
    pub fn highway_metapaths(&self) -> usize {
        if self.is_highway {
            self.total_paths()
        } else {
            0
        }
    }
}

/// Profiles for every bridge, in bridge id order, from the graph's own k-NN edges.
pub fn profile(graph: &HetGraph) -> Vec<MetapathProfile> {
    let edges = BuildingCategory::ALL.map(|c| graph.edges(c.relation()).to_vec());
    profile_from_edges(graph, &edges)
}

/// Profiles using an externally computed set of bridge → building edges.
pub fn profile_from_edges(graph: &HetGraph, edges: &[Vec<Edge>; 3]) -> Vec<MetapathProfile> {
    let bridges = graph.bridges();
    let mut slot = vec![usize::MAX; graph.node_count()];
    for (i, &b) in bridges.iter().enumerate() {
        slot[b] = i;
    }
    let mut counts = vec![[0usize; 3]; bridges.len()];
    for (c, list) in edges.iter().enumerate() {
        for e in list {
            counts[slot[e.src]][c] += 1;
        }
    }
    bridges
        .iter()
        .zip(counts)
        .map(|(&b, [s, h, r])| {
            let node = graph.node(b);
            MetapathProfile {
                bridge_id: b,
                shop_paths: s,
                hospital_paths: h,
                residence_paths: r,
                highway_count: node.highway_count,
                is_highway: node.highway_count > 0,
            }
        })
        .collect()
}

/// Share of `category` among the bridge's paths; 0 for an empty profile.
pub fn confidence(profile: &MetapathProfile, category: BuildingCategory) -> f64 {
    let total = profile.total_paths();
    if total == 0 {
        0.0
    } else {
        profile.count(category) as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierThresholds {
    pub supply_min: f64,
    pub medical_min: f64,
    pub residential_min: f64,
    pub balanced_max: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self { supply_min: 0.9, medical_min: 0.7, residential_min: 0.7, balanced_max: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid thresholds: need 0 <= balanced_max < medical_min, residential_min and medical_min <= supply_min <= 1")]
pub struct InvalidThresholds;

impl ClassifierThresholds {
    pub fn validate(&self) -> Result<(), InvalidThresholds> {
        let t = self;
        let ok = 0.0 <= t.balanced_max
            && t.balanced_max < t.medical_min
            && t.balanced_max < t.residential_min
            && t.medical_min <= t.supply_min
            && t.supply_min <= 1.0
            && t.residential_min <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(InvalidThresholds)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BridgeCategory {
    SupplyChain,
    MedicalAccess,
    ResidentialProtection,
    BalancedMultiUse,
    Mixed(BuildingCategory),
}

impl BridgeCategory {
    /// Budget tier: lower funds first.
    pub fn priority(self) -> u8 {
        match self {
            BridgeCategory::SupplyChain => 0,
            BridgeCategory::MedicalAccess => 1,
            BridgeCategory::ResidentialProtection => 2,
            BridgeCategory::Mixed(_) => 3,
            BridgeCategory::BalancedMultiUse => 4,
        }
    }

    /// Overlay color.
    pub fn color(self) -> &'static str {
        match self {
            BridgeCategory::SupplyChain => "#1f77b4",
            BridgeCategory::MedicalAccess => "#d62728",
            BridgeCategory::ResidentialProtection => "#2ca02c",
            BridgeCategory::BalancedMultiUse => "#7f7f7f",
            BridgeCategory::Mixed(_) => "#ff7f0e",
        }
    }

    pub fn all() -> [BridgeCategory; 7] {
        [
            BridgeCategory::SupplyChain,
            BridgeCategory::MedicalAccess,
            BridgeCategory::ResidentialProtection,
            BridgeCategory::BalancedMultiUse,
            BridgeCategory::Mixed(BuildingCategory::Shop),
            BridgeCategory::Mixed(BuildingCategory::Hospital),
            BridgeCategory::Mixed(BuildingCategory::Residence),
        ]
    }
}

impl fmt::Display for BridgeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BridgeCategory::SupplyChain => f.write_str("SupplyChain"),
            BridgeCategory::MedicalAccess => f.write_str("MedicalAccess"),
            BridgeCategory::ResidentialProtection => f.write_str("ResidentialProtection"),
            BridgeCategory::BalancedMultiUse => f.write_str("BalancedMultiUse"),
            BridgeCategory::Mixed(c) => write!(f, "Mixed({})", c.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown bridge category {0:?}")]
pub struct UnknownCategory(pub String);

impl FromStr for BridgeCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BridgeCategory::all().into_iter().find(|c| c.to_string() == s).ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl Serialize for BridgeCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BridgeCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeClassification {
    pub bridge_id: NodeId,
    pub category: BridgeCategory,
    pub confidence: f64,
    /// Argmax category; `None` for bridges without paths.
    pub dominant_category: Option<BuildingCategory>,
    pub total_paths: usize,
}

/// Argmax with ties resolved shop > hospital > residence.
pub fn dominant(profile: &MetapathProfile) -> BuildingCategory {
    let counts = profile.counts();
    let mut best = BuildingCategory::Shop;
    for c in BuildingCategory::ALL {
        if counts[c.index()] > counts[best.index()] {
            best = c;
        }
    }
    best
}

pub fn classify(profile: &MetapathProfile, thresholds: &ClassifierThresholds) -> BridgeClassification {
    let total = profile.total_paths();
    let top = dominant(profile);
    let conf = confidence(profile, top);
    let category = match top {
        _ if total == 0 => BridgeCategory::BalancedMultiUse,
        BuildingCategory::Shop if conf >= thresholds.supply_min => BridgeCategory::SupplyChain,
        BuildingCategory::Hospital if conf >= thresholds.medical_min => BridgeCategory::MedicalAccess,
        BuildingCategory::Residence if conf >= thresholds.residential_min => BridgeCategory::ResidentialProtection,
        _ if conf < thresholds.balanced_max => BridgeCategory::BalancedMultiUse,
        c => BridgeCategory::Mixed(c),
    };
    BridgeClassification {
        bridge_id: profile.bridge_id,
        category,
        confidence: conf,
        dominant_category: (total > 0).then_some(top),
        total_paths: total,
    }
}

pub fn classify_all(profiles: &[MetapathProfile], thresholds: &ClassifierThresholds) -> Vec<BridgeClassification> {
    profiles.iter().map(|p| classify(p, thresholds)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub params: KnnParams,
    /// Shop, hospital, residence path totals.
    pub totals: [usize; 3],
    /// Relative to the first row.
    pub delta: [i64; 3],
    /// Same totals restricted to highway bridges.
    pub highway_totals: [usize; 3],
}

/// Path totals for each k configuration; the graph itself is not modified.
pub fn coverage_report(graph: &HetGraph, k_values: &[KnnParams], exec: Exec) -> Vec<CoverageRow> {
    let mut rows: Vec<CoverageRow> = Vec::with_capacity(k_values.len());
    for params in k_values {
        let edges = compute_knn_edges(graph, params, exec);
        let profiles = profile_from_edges(graph, &edges);
        let mut totals = [0usize; 3];
        let mut highway_totals = [0usize; 3];
        for p in &profiles {
            for (c, n) in p.counts().into_iter().enumerate() {
                totals[c] += n;
                if p.is_highway {
                    highway_totals[c] += n;
                }
            }
        }
        let base = rows.first().map(|r| r.totals).unwrap_or(totals);
        let delta = std::array::from_fn(|c| totals[c] as i64 - base[c] as i64);
        rows.push(CoverageRow { params: *params, totals, delta, highway_totals });
    }
    rows
}
