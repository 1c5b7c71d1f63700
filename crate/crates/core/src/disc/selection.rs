//! Self-labeling: rank samples by their two anomalous-degree norms and pick
//! the least anomalous as normal-class training data and a small most
//! anomalous tail as the anomaly class.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// A sample is as anomalous as its worse indicator.
    MaxRank,
    SumRank,
    DOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingPolicy {
    pub positive_fraction: f64,
    /// `p`: share of samples labeled anomalous.
    pub negative_fraction: f64,
    /// Ground-truth anomaly ids; each replaces one self-labeled negative.
    pub known_anomaly_ids: Vec<usize>,
    pub combine: CombineRule,
    pub min_samples: usize,
}

impl Default for LabelingPolicy {
    fn default() -> Self {
        LabelingPolicy {
            positive_fraction: 0.5,
            negative_fraction: 0.075,
            known_anomaly_ids: Vec::new(),
            combine: CombineRule::MaxRank,
            min_samples: 10,
        }
    }
}

impl LabelingPolicy {
    pub fn validate(&self) -> Result<()> {
        let (pf, p) = (self.positive_fraction, self.negative_fraction);
        if !(p > 0.0) || !(pf > 0.0) || !(pf + p <= 1.0) {
            return Err(Error::InvalidPolicy(format!(
                "positive_fraction {pf} and negative_fraction {p} must be positive with sum <= 1"
            )));
        }
        Ok(())
    }

    pub fn n_positives(&self, n: usize) -> usize {
        (self.positive_fraction * n as f64).floor() as usize
    }

    pub fn n_negatives(&self, n: usize) -> usize {
        (self.negative_fraction * n as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SelfLabeled,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Positive,
    Negative(Provenance),
    Excluded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub id: usize,
    pub d_norm: f64,
    pub sigma_norm: f64,
    pub rank_d: usize,
    pub rank_sigma: usize,
    pub combined: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSelection {
    /// Sample ids labeled normal, in ascending combined rank.
    pub positives: Vec<usize>,
    /// Sample ids labeled anomalous, ground truth first, then self-labeled
    /// in descending combined rank.
    pub negatives: Vec<(usize, Provenance)>,
    /// One row per input sample, in input order.
    pub audit: Vec<RankRow>,
}

impl TrainingSelection {
    pub fn negative_ids(&self) -> Vec<usize> {
        self.negatives.iter().map(|&(id, _)| id).collect()
    }

    pub fn ground_truth_count(&self) -> usize {
        self.negatives
            .iter()
            .filter(|(_, p)| *p == Provenance::GroundTruth)
            .count()
    }

    pub fn audit_csv(&self) -> String {
        let mut out = String::from("sample_id,d_norm,sigma_norm,rank_d,rank_sigma,combined_rank,role,provenance\n");
        for r in &self.audit {
            let (role, prov) = match r.role {
                Role::Positive => ("positive", ""),
                Role::Negative(Provenance::SelfLabeled) => ("negative", "self_labeled"),
                Role::Negative(Provenance::GroundTruth) => ("negative", "ground_truth"),
                Role::Excluded => ("excluded", ""),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{role},{prov}",
                r.id, r.d_norm, r.sigma_norm, r.rank_d, r.rank_sigma, r.combined
            );
        }
        out
    }
}

/// Rank 1 is the smallest value; ties go to the smaller id.
fn ranks(values: &[f64], ids: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(ids[a].cmp(&ids[b])));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

pub fn select_training_samples(
    ids: &[usize],
    d_norms: &[f64],
    sigma_norms: &[f64],
    policy: &LabelingPolicy,
) -> Result<TrainingSelection> {
    policy.validate()?;
    let n = ids.len();
    if d_norms.len() != n || sigma_norms.len() != n {
        return Err(Error::LengthMismatch(d_norms.len(), sigma_norms.len()));
    }
    if n < policy.min_samples.max(1) {
        return Err(Error::TooFewSamples {
            n,
            min: policy.min_samples.max(1),
        });
    }
    if ids.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(Error::InvalidPolicy("sample ids must be unique".into()));
    }
    let rank_d = ranks(d_norms, ids);
    let rank_sigma = ranks(sigma_norms, ids);
    let combined: Vec<usize> = (0..n)
        .map(|i| match policy.combine {
            CombineRule::MaxRank => rank_d[i].max(rank_sigma[i]),
            CombineRule::SumRank => rank_d[i] + rank_sigma[i],
            CombineRule::DOnly => rank_d[i],
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (combined[i], ids[i]));

    let n_pos = policy.n_positives(n);
    let n_neg = policy.n_negatives(n);
    let known_set: BTreeSet<usize> = policy.known_anomaly_ids.iter().copied().collect();
    // known anomalies present in this sample set, most anomalous first
    let mut known: Vec<usize> = order
        .iter()
        .rev()
        .copied()
        .filter(|&i| known_set.contains(&ids[i]))
        .collect();
    if known.len() > n_neg {
        log::warn!(
            "{} known anomalies exceed the {n_neg} negative slots; keeping the highest ranked",
            known.len()
        );
        known.truncate(n_neg);
    }
    let unknown = |i: &&usize| !known_set.contains(&ids[**i]);
    let positives: Vec<usize> = order.iter().filter(unknown).take(n_pos).copied().collect();
    let self_negatives: Vec<usize> = order
        .iter()
        .rev()
        .filter(unknown)
        .take(n_neg - known.len())
        .copied()
        .collect();

    let mut role = vec![Role::Excluded; n];
    for &i in &positives {
        role[i] = Role::Positive;
    }
    let negatives: Vec<(usize, Provenance)> = known
        .iter()
        .map(|&i| (i, Provenance::GroundTruth))
        .chain(self_negatives.iter().map(|&i| (i, Provenance::SelfLabeled)))
        .collect();
    for &(i, prov) in &negatives {
        if role[i] != Role::Excluded {
            return Err(Error::OverlappingSelection(ids[i]));
        }
        role[i] = Role::Negative(prov);
    }
    let audit = (0..n)
        .map(|i| RankRow {
            id: ids[i],
            d_norm: d_norms[i],
            sigma_norm: sigma_norms[i],
            rank_d: rank_d[i],
            rank_sigma: rank_sigma[i],
            combined: combined[i],
            role: role[i],
        })
        .collect();
    Ok(TrainingSelection {
        positives: positives.iter().map(|&i| ids[i]).collect(),
        negatives: negatives.iter().map(|&(i, p)| (ids[i], p)).collect(),
        audit,
    })
}
