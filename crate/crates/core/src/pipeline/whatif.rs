use super::{category_counts, CitySnapshot, CoverageTotals};
use crate::graph::{compute_knn_edges, KnnParams, NodeId};
use crate::metapath::{classify_all, profile_from_edges, BridgeCategory, BridgeClassification, ClassifierThresholds};
use crate::par::Exec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Parameter overrides; absent fields keep the snapshot's values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhatIfRequest {
    pub k_shop: Option<usize>,
    pub k_hospital: Option<usize>,
    pub k_residence: Option<usize>,
    pub thresholds: Option<ClassifierThresholds>,
    /// Number of bridges to fund.
    pub budget_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WhatIfError {
    #[error("{name} must be at least 1")]
    InvalidK { name: &'static str },
    #[error(transparent)]
    InvalidThresholds(#[from] crate::metapath::InvalidThresholds),
    #[error("budget_n = {requested} exceeds the {bridges} bridges")]
    BudgetTooLarge { requested: usize, bridges: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryChange {
    pub bridge_id: NodeId,
    pub name: String,
    pub before: BridgeCategory,
    pub after: BridgeCategory,
    pub confidence_before: f64,
    pub confidence_after: f64,
    /// Shop, hospital, residence paths.
    pub paths_before: [usize; 3],
    pub paths_after: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageDelta {
    pub before: CoverageTotals,
    pub after: CoverageTotals,
    pub shop: i64,
    pub hospital: i64,
    pub residence: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub rank: usize,
    pub bridge_id: NodeId,
    pub name: String,
    pub category: BridgeCategory,
    pub confidence: f64,
    pub total_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub params: KnnParams,
    pub thresholds: ClassifierThresholds,
    /// Bridges whose category changed.
    pub changed: Vec<CategoryChange>,
    /// Bridges whose path counts changed, whatever their category.
    pub profiles_changed: usize,
    pub coverage: CoverageDelta,
    pub category_counts_before: BTreeMap<String, usize>,
    pub category_counts_after: BTreeMap<String, usize>,
    pub budget: Option<Vec<BudgetEntry>>,
    pub classifications: Vec<BridgeClassification>,
}

/// Bridge ids in funding order: category priority, then confidence
/// descending, then total paths descending, then id.
pub fn rank_budget(classifications: &[BridgeClassification]) -> Vec<NodeId> {
    let mut order: Vec<&BridgeClassification> = classifications.iter().collect();
    order.sort_by(|a, b| {
        a.category
            .priority()
            .cmp(&b.category.priority())
            .then(b.confidence.total_cmp(&a.confidence))
            .then(b.total_paths.cmp(&a.total_paths))
            .then(a.bridge_id.cmp(&b.bridge_id))
    });
    order.into_iter().map(|c| c.bridge_id).collect()
}

/// Recomputes k-NN edges, profiles and classifications for new parameters.
/// The encoder and the snapshot are left untouched.
pub fn whatif(snapshot: &CitySnapshot, request: &WhatIfRequest) -> Result<WhatIfResponse, WhatIfError> {
    let base = snapshot.config.knn();
    let params = KnnParams {
        k_shop: request.k_shop.unwrap_or(base.k_shop),
        k_hospital: request.k_hospital.unwrap_or(base.k_hospital),
        k_residence: request.k_residence.unwrap_or(base.k_residence),
        radius_m: base.radius_m,
    };
    for (name, k) in [("k_shop", params.k_shop), ("k_hospital", params.k_hospital), ("k_residence", params.k_residence)] {
        if k == 0 {
            return Err(WhatIfError::InvalidK { name });
        }
    }
    let thresholds = request.thresholds.unwrap_or(snapshot.config.thresholds);
    thresholds.validate()?;
    let bridges = snapshot.bridge_count();
    if let Some(n) = request.budget_n {
        if n > bridges {
            return Err(WhatIfError::BudgetTooLarge { requested: n, bridges });
        }
    }

    let edges = compute_knn_edges(&snapshot.graph, &params, Exec::default());
    let profiles = profile_from_edges(&snapshot.graph, &edges);
    let after = classify_all(&profiles, &thresholds);
    let name = |id: NodeId| snapshot.graph.node(id).name.clone().unwrap_or_default();

    let changed = snapshot
        .classifications
        .iter()
        .zip(&after)
        .zip(snapshot.profiles.iter().zip(&profiles))
        .filter(|((b, a), _)| b.category != a.category)
        .map(|((b, a), (pb, pa))| CategoryChange {
            bridge_id: b.bridge_id,
            name: name(b.bridge_id),
            before: b.category,
            after: a.category,
            confidence_before: b.confidence,
            confidence_after: a.confidence,
            paths_before: pb.counts(),
            paths_after: pa.counts(),
        })
        .collect();
    let profiles_changed = snapshot.profiles.iter().zip(&profiles).filter(|(b, a)| b.counts() != a.counts()).count();

    let before_cov = CoverageTotals::of(&snapshot.profiles);
    let after_cov = CoverageTotals::of(&profiles);
    let coverage = CoverageDelta {
        before: before_cov,
        after: after_cov,
        shop: after_cov.shop as i64 - before_cov.shop as i64,
        hospital: after_cov.hospital as i64 - before_cov.hospital as i64,
        residence: after_cov.residence as i64 - before_cov.residence as i64,
    };

    let budget = request.budget_n.map(|n| {
        let by_id: BTreeMap<NodeId, &BridgeClassification> = after.iter().map(|c| (c.bridge_id, c)).collect();
        rank_budget(&after)
            .into_iter()
            .take(n)
            .enumerate()
            .map(|(i, id)| {
                let c = by_id[&id];
                BudgetEntry {
                    rank: i + 1,
                    bridge_id: id,
                    name: name(id),
                    category: c.category,
                    confidence: c.confidence,
                    total_paths: c.total_paths,
                }
            })
            .collect()
    });

    Ok(WhatIfResponse {
        params,
        thresholds,
        changed,
        profiles_changed,
        coverage,
        category_counts_before: category_counts(&snapshot.classifications),
        category_counts_after: category_counts(&after),
        budget,
        classifications: after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BuildingCategory;

    fn c(id: NodeId, category: BridgeCategory, confidence: f64, total_paths: usize) -> BridgeClassification {
        BridgeClassification { bridge_id: id, category, confidence, dominant_category: None, total_paths }
    }

    #[test]
    fn budget_ranking_rule() {
        let list = vec![
            c(10, BridgeCategory::BalancedMultiUse, 0.0, 0),
            c(11, BridgeCategory::Mixed(BuildingCategory::Shop), 0.6, 10),
            c(12, BridgeCategory::MedicalAccess, 0.8, 5),
            c(13, BridgeCategory::SupplyChain, 0.92, 12),
            c(14, BridgeCategory::SupplyChain, 0.95, 20),
            c(15, BridgeCategory::SupplyChain, 0.95, 40),
            c(16, BridgeCategory::ResidentialProtection, 1.0, 3),
            c(17, BridgeCategory::SupplyChain, 0.95, 40),
        ];
        assert_eq!(rank_budget(&list), vec![15, 17, 14, 13, 12, 16, 11, 10]);
    }
}
