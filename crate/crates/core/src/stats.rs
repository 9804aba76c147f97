//! User-study statistics and classifier score metrics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("vote table is empty")]
    EmptyTable,
    #[error("unknown explainer `{0}`")]
    UnknownExplainer(String),
    #[error("no informative pairs (a_wins + b_wins = 0)")]
    NoInformativePairs,
    #[error("both classes must be present")]
    SingleClass,
    #[error("{0} scores but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("duplicate vote for question `{question}`, user `{user}`, explainer `{explainer}`")]
    DuplicateVote {
        question: String,
        user: String,
        explainer: String,
    },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub question_id: String,
    pub user_id: String,
    pub explainer: String,
    #[serde(deserialize_with = "de_bool01", serialize_with = "ser_bool01")]
    pub agreed: bool,
}

fn de_bool01<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(serde::de::Error::custom(format!(
            "agreed must be 0 or 1, got `{other}`"
        ))),
    }
}

fn ser_bool01<S: serde::Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

/// Survey votes with at most one record per (question, user, explainer).
#[derive(Debug, Clone, Default)]
pub struct VoteTable {
    records: Vec<VoteRecord>,
}

impl VoteTable {
    pub fn new(records: Vec<VoteRecord>) -> Result<Self, StatsError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert((&r.question_id, &r.user_id, &r.explainer)) {
                return Err(StatsError::DuplicateVote {
                    question: r.question_id.clone(),
                    user: r.user_id.clone(),
                    explainer: r.explainer.clone(),
                });
            }
        }
        Ok(VoteTable { records })
    }

    /// Reads `question_id,user_id,explainer,agreed` CSV.
    pub fn from_csv(reader: impl Read) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let records = rdr.deserialize().collect::<Result<Vec<VoteRecord>, _>>()?;
        VoteTable::new(records)
    }

    pub fn records(&self) -> &[VoteRecord] {
        &self.records
    }

    pub fn explainers(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.explainer.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteCount {
    pub explainer: String,
    pub votes: u64,
    pub percent: u64,
}

/// Agreement totals per explainer with integer percentages of all agreements.
pub fn vote_counts(table: &VoteTable) -> Result<Vec<VoteCount>, StatsError> {
    if table.records.is_empty() {
        return Err(StatsError::EmptyTable);
    }
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &table.records {
        *totals.entry(&r.explainer).or_default() += u64::from(r.agreed);
    }
    let counts: Vec<(String, u64)> = totals.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(percentages(&counts))
}

/// Rounds each `votes / total` to an integer percent (half-up).
pub fn percentages(counts: &[(String, u64)]) -> Vec<VoteCount> {
    let total: u64 = counts.iter().map(|(_, v)| v).sum();
    counts
        .iter()
        .map(|(name, votes)| VoteCount {
            explainer: name.clone(),
            votes: *votes,
            percent: if total == 0 {
                0
            } else {
                (200 * votes + total) / (2 * total)
            },
        })
        .collect()
}

/// Per (question, user) outcomes: `a` wins when only `a` was agreed with.
pub fn pairwise_preferences(table: &VoteTable, a: &str, b: &str) -> Result<(u64, u64), StatsError> {
    let explainers = table.explainers();
    for e in [a, b] {
        if !explainers.contains(e) {
            return Err(StatsError::UnknownExplainer(e.to_string()));
        }
    }
    let mut agreed: BTreeMap<(&str, &str), (bool, bool)> = BTreeMap::new();
    for r in &table.records {
        let slot = agreed.entry((&r.question_id, &r.user_id)).or_default();
        if r.explainer == a {
            slot.0 |= r.agreed;
        }
        if r.explainer == b {
            slot.1 |= r.agreed;
        }
    }
    let mut wins = (0, 0);
    for (aa, bb) in agreed.into_values() {
        match (aa, bb) {
            (true, false) => wins.0 += 1,
            (false, true) => wins.1 += 1,
            _ => {}
        }
    }
    Ok(wins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTestResult {
    pub hypothesis: (String, String),
    pub a_wins: u64,
    pub b_wins: u64,
    pub p_two_tail: f64,
    pub alpha_corrected: f64,
    pub passed: bool,
}

/// Exact two-tailed binomial sign test at p = ½: `min(1, 2·P[X ≥ max(a, b)])`.
///
/// Tail terms are summed from the smallest upward in log space.
pub fn sign_test_p(a_wins: u64, b_wins: u64) -> Result<f64, StatsError> {
    let n = a_wins + b_wins;
    if n == 0 {
        return Err(StatsError::NoInformativePairs);
    }
    let k = a_wins.max(b_wins);
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (k..=n)
        .rev()
        .map(|j| (ln_binomial(n, j) - ln2n).exp())
        .sum();
    Ok((2.0 * tail).min(1.0))
}

pub fn sign_test(
    a_wins: u64,
    b_wins: u64,
    alpha: f64,
    bonferroni_k: u32,
) -> Result<SignTestResult, StatsError> {
    sign_test_named(("A", "B"), a_wins, b_wins, alpha, bonferroni_k)
}

pub fn sign_test_named(
    hypothesis: (&str, &str),
    a_wins: u64,
    b_wins: u64,
    alpha: f64,
    bonferroni_k: u32,
) -> Result<SignTestResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidValue(format!("alpha {alpha} not in (0, 1)")));
    }
    if bonferroni_k == 0 {
        return Err(StatsError::InvalidValue("Bonferroni factor must be >= 1".into()));
    }
    let p = sign_test_p(a_wins, b_wins)?;
    let alpha_corrected = alpha / f64::from(bonferroni_k);
    Ok(SignTestResult {
        hypothesis: (hypothesis.0.to_string(), hypothesis.1.to_string()),
        a_wins,
        b_wins,
        p_two_tail: p,
        alpha_corrected,
        passed: p < alpha_corrected,
    })
}

/// Runs every unordered explainer pair (alphabetical `A > B`) with a
/// Bonferroni factor equal to the number of pairs.
pub fn sign_test_all_pairs(table: &VoteTable, alpha: f64) -> Result<Vec<SignTestResult>, StatsError> {
    let names: Vec<&str> = table.explainers().into_iter().collect();
    let pairs: Vec<(&str, &str)> = names
        .iter()
        .enumerate()
        .flat_map(|(i, a)| names[i + 1..].iter().map(move |b| (*a, *b)))
        .collect();
    let k = u32::try_from(pairs.len().max(1))
        .map_err(|_| StatsError::InvalidValue("too many explainers".into()))?;
    pairs
        .into_iter()
        .map(|(a, b)| {
            let (wa, wb) = pairwise_preferences(table, a, b)?;
            sign_test_named((a, b), wa, wb, alpha, k)
        })
        .collect()
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(StatsError::InvalidValue(format!("non-finite score {s}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(StatsError::SingleClass);
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties ½.
///
/// Computed from midranks (Mann–Whitney U), O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, StatsError> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += midrank * tied_pos as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// `(TPR + TNR) / 2` with `score >= threshold` predicted positive.
pub fn balanced_accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64, StatsError> {
    let (pos, neg) = check_scores(scores, labels)?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        if predicted && l {
            tp += 1;
        } else if !predicted && !l {
            tn += 1;
        }
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    score: f64,
    label: u8,
}

/// Reads `score,label` CSV with labels in {0, 1}.
pub fn read_scores_csv(reader: impl Read) -> Result<(Vec<f64>, Vec<bool>), StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.deserialize() {
        let row: ScoreRow = row?;
        let label = match row.label {
            0 => false,
            1 => true,
            other => return Err(StatsError::InvalidValue(format!("label {other} not in {{0,1}}"))),
        };
        scores.push(row.score);
        labels.push(label);
    }
    Ok((scores, labels))
}
