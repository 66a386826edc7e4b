//! Cross-validated backward elimination and clinical overrides.
//!
//! Each pass scores the current feature set by mean fold c-index, then
//! rescores it once per candidate group with that group dropped. The group
//! whose removal costs least is removed, provided the cost does not exceed
//! one standard deviation of the fold c-indices. Indicator columns of one
//! categorical variable form a single group.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{kfold_assignments, EncodedCohort};
use crate::cox::{fit_coefficients, FitOptions};
use crate::error::{Error, Result};
use crate::eval::concordance_index;
use crate::stats::mean_sd;

pub const DEFAULT_FOLDS: usize = 2;

/// Which fold spread bounds an acceptable c-index loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdRule {
    /// SD of the current set's fold c-indices.
    #[default]
    Baseline,
    /// SD of the candidate set's fold c-indices.
    Candidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub folds: usize,
    pub seed: u64,
    pub rule: SdRule,
    pub fit: FitOptions,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions { folds: DEFAULT_FOLDS, seed: 0, rule: SdRule::Baseline, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub folds: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CvScore {
    fn new(folds: Vec<f64>) -> Self {
        let (mean, sd) = mean_sd(&folds);
        CvScore { folds, mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    Removed,
    /// Fitting without the candidate failed; it stays for this pass.
    Skipped,
}

/// One candidate evaluated in one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub pass: usize,
    pub candidate: String,
    pub columns: Vec<String>,
    pub baseline_cv_c_index: CvScore,
    pub cv_c_index_without: Option<CvScore>,
    /// Baseline mean minus candidate mean.
    pub degradation: Option<f64>,
    pub threshold: Option<f64>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationLedger {
    pub folds: usize,
    pub seed: u64,
    pub rule: SdRule,
    pub steps: Vec<EliminationStep>,
}

impl EliminationLedger {
    /// One JSON object per step, newline-terminated.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut *w, s)?;
            w.write_all(b"\n").map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(())
    }

    pub fn removed(&self) -> Vec<&str> {
        self.steps.iter().filter(|s| s.decision == Decision::Removed).map(|s| s.candidate.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Surviving groups in input order.
    pub kept: Vec<String>,
    pub ledger: EliminationLedger,
}

struct CvPlan<'a> {
    cohort: &'a EncodedCohort,
    /// `(train rows, test rows)` per fold.
    splits: Vec<(Vec<usize>, Vec<usize>)>,
    fit: FitOptions,
}

impl CvPlan<'_> {
    fn score(&self, columns: &[usize]) -> Result<CvScore> {
        let sub = self.cohort.select_columns(columns);
        let mut folds = Vec::with_capacity(self.splits.len());
        for (train_rows, test_rows) in &self.splits {
            let train = sub.select_rows(train_rows);
            let (beta, _) = fit_coefficients(&train, &self.fit)?;
            let test = sub.select_rows(test_rows);
            let eta: Vec<f64> = (0..test.n()).map(|i| test.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum()).collect();
            folds.push(concordance_index(&test.times, &test.events, &eta)?);
        }
        Ok(CvScore::new(folds))
    }
}

pub fn backward_eliminate(cohort: &EncodedCohort, opts: &SelectOptions) -> Result<Selection> {
    let labels = kfold_assignments(&cohort.events, opts.folds, opts.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..opts.folds)
        .map(|k| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..cohort.n()).partition(|&i| labels[i] == k);
            (train, test)
        })
        .collect();
    for (k, (_, test)) in splits.iter().enumerate() {
        if !test.iter().any(|&i| cohort.events[i]) {
            return Err(Error::InvalidArgument(format!("fold {k} has no events")));
        }
    }
    let plan = CvPlan { cohort, splits, fit: opts.fit.clone() };
    let groups = cohort.feature_groups();
    let mut active: Vec<usize> = (0..groups.len()).collect();
    let columns_of = |set: &[usize]| -> Vec<usize> {
        let mut cols: Vec<usize> = set.iter().flat_map(|&g| groups[g].1.iter().copied()).collect();
        cols.sort_unstable();
        cols
    };
    let mut steps = Vec::new();

    for pass in 0.. {
        if active.is_empty() {
            break;
        }
        let baseline = plan.score(&columns_of(&active))?;
        let candidates: Vec<(usize, Result<CvScore>)> = active
            .par_iter()
            .map(|&g| {
                let rest: Vec<usize> = active.iter().copied().filter(|&h| h != g).collect();
                (g, plan.score(&columns_of(&rest)))
            })
            .collect();

        let mut best: Option<(usize, f64)> = None;
        let mut pass_steps = Vec::with_capacity(candidates.len());
        for (pos, (g, score)) in candidates.into_iter().enumerate() {
            let (name, cols) = &groups[g];
            let mut step = EliminationStep {
                pass,
                candidate: name.clone(),
                columns: cols.iter().map(|&j| cohort.feature_names[j].clone()).collect(),
                baseline_cv_c_index: baseline.clone(),
                cv_c_index_without: None,
                degradation: None,
                threshold: None,
                decision: Decision::Kept,
                note: None,
            };
            match score {
                Ok(s) => {
                    let degradation = baseline.mean - s.mean;
                    let threshold = match opts.rule {
                        SdRule::Baseline => baseline.sd,
                        SdRule::Candidate => s.sd,
                    };
                    if degradation <= threshold && best.is_none_or(|(_, d)| degradation < d) {
                        best = Some((pos, degradation));
                    }
                    step.cv_c_index_without = Some(s);
                    step.degradation = Some(degradation);
                    step.threshold = Some(threshold);
                }
                Err(e) => {
                    step.decision = Decision::Skipped;
                    step.note = Some(e.to_string());
                }
            }
            pass_steps.push(step);
        }
        let Some((pos, _)) = best else {
            steps.extend(pass_steps);
            break;
        };
        pass_steps[pos].decision = Decision::Removed;
        steps.extend(pass_steps);
        active.remove(pos);
    }

    Ok(Selection {
        kept: active.iter().map(|&g| groups[g].0.clone()).collect(),
        ledger: EliminationLedger { folds: opts.folds, seed: opts.seed, rule: opts.rule, steps },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReviewOverrides {
    /// Forced into the final set.
    pub allow: Vec<Override>,
    /// Forced out of the final set.
    pub block: Vec<Override>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideAction {
    Allow,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub feature: String,
    pub action: OverrideAction,
    pub reason: String,
    /// False when the feature was already in the requested state.
    pub changed: bool,
}

/// Applies reviewer overrides to an automatically selected set.
///
/// `universe` lists every known feature in output order.
pub fn clinical_review_filter(
    kept: &[String],
    universe: &[String],
    overrides: &ReviewOverrides,
) -> Result<(Vec<String>, Vec<OverrideRecord>)> {
    let known: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
    for f in kept.iter().chain(overrides.allow.iter().map(|o| &o.feature)).chain(overrides.block.iter().map(|o| &o.feature)) {
        if !known.contains(f.as_str()) {
            return Err(Error::UnknownFeature(f.clone()));
        }
    }
    if let Some(o) = overrides.allow.iter().find(|a| overrides.block.iter().any(|b| b.feature == a.feature)) {
        return Err(Error::InvalidArgument(format!("feature {} is both allowed and blocked", o.feature)));
    }
    let mut set: BTreeSet<&str> = kept.iter().map(String::as_str).collect();
    let mut records = Vec::new();
    for o in &overrides.allow {
        let changed = set.insert(o.feature.as_str());
        records.push(OverrideRecord { feature: o.feature.clone(), action: OverrideAction::Allow, reason: o.reason.clone(), changed });
    }
    for o in &overrides.block {
        let changed = set.remove(o.feature.as_str());
        records.push(OverrideRecord { feature: o.feature.clone(), action: OverrideAction::Block, reason: o.reason.clone(), changed });
    }
    let out = universe.iter().filter(|f| set.contains(f.as_str())).cloned().collect();
    Ok((out, records))
}

#[cfg(test)]
mod tests;
