//! Membership-inference metrics and replication retrieval.
//!
//! Four per-sample MIA metrics (confidence, loss, entropy, modified entropy)
//! with member-vs-nonmember gap reporting, plus exact cosine top-k retrieval
//! for detecting verbatim content replication.

use crate::error::{Error, Result};
use crate::learner::{self, ModelParams, PROB_CLIP};
use crate::worldgen::{Dataset, LabeledSample};
use std::io::Write;
use std::path::Path;

/// Probability assigned to the true label, clipped at 1e-12.
pub fn confidence(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(probs[label].max(PROB_CLIP))
}

/// `-log confidence`; shares the clip so `confidence == exp(-sample_loss)`.
pub fn sample_loss(probs: &[f64], label: usize) -> Result<f64> {
    Ok(-confidence(probs, label)?.ln())
}

/// Shannon entropy `-sum p ln p`, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Label-aware entropy variant:
/// `-(1 - p_y) ln(p_y) - sum_{i != y} p_i ln(1 - p_i)`, clipped inside the logs.
/// Exactly zero for a one-hot correct prediction.
pub fn modified_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let py = probs[label];
    let mut m = -(1.0 - py) * py.max(PROB_CLIP).ln();
    for (i, &p) in probs.iter().enumerate() {
        if i != label {
            m -= p * (1.0 - p).max(PROB_CLIP).ln();
        }
    }
    Ok(m)
}

/// All four metrics for one prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub confidence: f64,
    pub loss: f64,
    pub entropy: f64,
    pub modified_entropy: f64,
}

pub fn sample_metrics(probs: &[f64], label: usize) -> Result<SampleMetrics> {
    Ok(SampleMetrics {
        confidence: confidence(probs, label)?,
        loss: sample_loss(probs, label)?,
        entropy: entropy(probs),
        modified_entropy: modified_entropy(probs, label)?,
    })
}

/// Member/nonmember means and their absolute gap for one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricGap {
    pub member_mean: f64,
    pub nonmember_mean: f64,
    pub abs_gap: f64,
}

/// Gap report over all four metrics plus the per-sample values behind it.
#[derive(Debug, Clone)]
pub struct MiaReport {
    pub confidence: MetricGap,
    pub loss: MetricGap,
    pub entropy: MetricGap,
    pub modified_entropy: MetricGap,
    pub member_count: usize,
    pub nonmember_count: usize,
    pub member_samples: Vec<SampleMetrics>,
    pub nonmember_samples: Vec<SampleMetrics>,
}

impl MiaReport {
    pub fn gaps(&self) -> [(&'static str, MetricGap); 4] {
        [
            ("confidence", self.confidence),
            ("loss", self.loss),
            ("entropy", self.entropy),
            ("modified_entropy", self.modified_entropy),
        ]
    }

    /// Per-sample metric export: `side,sample_index,confidence,loss,entropy,modified_entropy`.
    pub fn export_samples_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "side,sample_index,confidence,loss,entropy,modified_entropy")?;
        for (side, rows) in [("member", &self.member_samples), ("nonmember", &self.nonmember_samples)] {
            for (i, m) in rows.iter().enumerate() {
                writeln!(
                    out,
                    "{side},{i},{},{},{},{}",
                    m.confidence, m.loss, m.entropy, m.modified_entropy
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn metrics_for_set(params: &ModelParams, set: &Dataset) -> Result<Vec<SampleMetrics>> {
    let mut out = Vec::with_capacity(set.len());
    for s in &set.samples {
        let probs = learner::forward(params, &s.features)?;
        out.push(sample_metrics(&probs, s.label)?);
    }
    Ok(out)
}

fn gap(member: &[SampleMetrics], nonmember: &[SampleMetrics], pick: impl Fn(&SampleMetrics) -> f64) -> MetricGap {
    let mean = |rows: &[SampleMetrics]| rows.iter().map(&pick).sum::<f64>() / rows.len() as f64;
    let (m, n) = (mean(member), mean(nonmember));
    MetricGap { member_mean: m, nonmember_mean: n, abs_gap: (m - n).abs() }
}

/// Evaluates all four metrics over both sides and reports the mean gaps.
pub fn mia_report(params: &ModelParams, member_set: &Dataset, nonmember_set: &Dataset) -> Result<MiaReport> {
    if member_set.is_empty() || nonmember_set.is_empty() {
        return Err(Error::Contract("mia_report requires nonempty member and nonmember sets".into()));
    }
    let member = metrics_for_set(params, member_set)?;
    let nonmember = metrics_for_set(params, nonmember_set)?;
    Ok(MiaReport {
        confidence: gap(&member, &nonmember, |m| m.confidence),
        loss: gap(&member, &nonmember, |m| m.loss),
        entropy: gap(&member, &nonmember, |m| m.entropy),
        modified_entropy: gap(&member, &nonmember, |m| m.modified_entropy),
        member_count: member.len(),
        nonmember_count: nonmember.len(),
        member_samples: member,
        nonmember_samples: nonmember,
    })
}

/// Cosine similarity in f64; `None` when either vector has zero norm.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Option<f64> {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

/// Top-k result for one query; similarities descending, ties to the lower
/// reference index.
#[derive(Debug, Clone)]
pub struct QueryResult {
    pub query_index: usize,
    pub top: Vec<(usize, f64)>,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct RetrievalReport {
    pub results: Vec<QueryResult>,
    pub warnings: Vec<String>,
    pub threshold: f64,
}

impl RetrievalReport {
    /// Fraction of scored queries whose top-1 similarity reached the threshold.
    pub fn flagged_fraction(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        self.results.iter().filter(|r| r.flagged).count() as f64 / self.results.len() as f64
    }

    /// Export: `query_index,rank,reference_index,similarity,flagged`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "query_index,rank,reference_index,similarity,flagged")?;
        for r in &self.results {
            for (rank, (ref_idx, sim)) in r.top.iter().enumerate() {
                writeln!(out, "{},{},{},{},{}", r.query_index, rank + 1, ref_idx, sim, r.flagged)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Exact full-scan cosine top-k of every query against the reference set.
/// Zero-norm vectors are excluded with a recorded warning, not an error.
pub fn retrieval(
    queries: &[LabeledSample],
    references: &[LabeledSample],
    k: usize,
    threshold: f64,
) -> Result<RetrievalReport> {
    if k < 1 {
        return Err(Error::Config("retrieval requires k >= 1".into()));
    }
    if queries.is_empty() || references.is_empty() {
        return Err(Error::Contract("retrieval requires nonempty query and reference sets".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "retrieval threshold must be in (0, 1], got {threshold}"
        )));
    }

    let mut warnings = Vec::new();
    let usable_refs: Vec<usize> = references
        .iter()
        .enumerate()
        .filter_map(|(j, r)| {
            if r.features.iter().any(|&v| v != 0.0) {
                Some(j)
            } else {
                warnings.push(format!("reference {j} has zero norm; excluded"));
                None
            }
        })
        .collect();

    let mut results = Vec::with_capacity(queries.len());
    for (qi, q) in queries.iter().enumerate() {
        let mut sims: Vec<(usize, f64)> = Vec::with_capacity(usable_refs.len());
        let mut zero_query = false;
        for &j in &usable_refs {
            match cosine_similarity(&q.features, &references[j].features) {
                Some(sim) => sims.push((j, sim)),
                None => {
                    zero_query = true;
                    break;
                }
            }
        }
        if zero_query {
            warnings.push(format!("query {qi} has zero norm; excluded"));
            continue;
        }
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        sims.truncate(k);
        let flagged = sims.first().is_some_and(|&(_, sim)| sim >= threshold);
        results.push(QueryResult { query_index: qi, top: sims, flagged });
    }
    Ok(RetrievalReport { results, warnings, threshold })
}
