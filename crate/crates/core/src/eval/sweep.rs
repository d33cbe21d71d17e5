use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::acquisition::{Cost, TerminationRule, TrajectoryRecord};
use crate::data::TaskDataset;
use crate::strategies::{run_episode, to_records, EpisodeOptions, EpisodeResult, Strategy};

/// One point of an accuracy-versus-cost curve is traced per control value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Control {
    Budget(Cost),
    /// Acquire everything; policy stopping disabled.
    Unlimited,
    /// Cost-penalty weight selecting one of a strategy's trained policies.
    Lambda(f64),
}

impl Control {
    pub fn kind(&self) -> &'static str {
        match self {
            Control::Budget(_) => "budget",
            Control::Unlimited => "unlimited",
            Control::Lambda(_) => "lambda",
        }
    }
}

/// Episode settings shared by every control value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepTemplate {
    /// Optional certainty threshold combined with each control's rule.
    pub confidence: Option<f64>,
    pub initial: Option<Vec<bool>>,
    pub mc_samples: usize,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        SweepTemplate { confidence: None, initial: None, mc_samples: crate::nn::DEFAULT_MC_SAMPLES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub control: Control,
    pub mean_cost: f64,
    /// Exact sum of episode costs.
    pub total_cost: Cost,
    pub accuracy: f64,
    pub n_episodes: usize,
    /// Recall per class; `None` for classes absent from the rows.
    pub class_recall: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub strategy: String,
    pub task: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub result: SweepResult,
    /// Acquisition log; episode ids are `control_index * rows + row_position`.
    pub trajectories: Vec<TrajectoryRecord>,
}

fn options(control: Control, strategy: &Strategy, template: &SweepTemplate, seed: u64) -> Result<EpisodeOptions, EvalError> {
    let base = match control {
        Control::Budget(b) => TerminationRule::Budget(b),
        Control::Unlimited | Control::Lambda(_) => TerminationRule::AllAcquired,
    };
    let rule = match template.confidence {
        Some(t) => TerminationRule::Composite(vec![base, TerminationRule::Confidence(t)]),
        None => base,
    };
    rule.validate().map_err(|e| EvalError::InvalidInput(e.to_string()))?;
    let mut opts = EpisodeOptions::new(rule, seed);
    opts.initial = template.initial.clone();
    opts.mc_samples = template.mc_samples;
    match control {
        Control::Unlimited => opts.allow_early_stop = false,
        Control::Lambda(l) => {
            opts.policy = strategy
                .lambdas()
                .iter()
                .position(|&x| x == l)
                .ok_or_else(|| EvalError::InvalidInput(format!("no policy trained for λ = {l}")))?;
        }
        Control::Budget(_) => {}
    }
    Ok(opts)
}

/// Runs every row once per control value. Episodes run in parallel; results
/// are reduced in row order, so output is deterministic under `seed`.
pub fn sweep(
    strategy: &Strategy,
    ds: &TaskDataset,
    rows: &[usize],
    controls: &[Control],
    template: &SweepTemplate,
    seed: u64,
) -> Result<SweepOutput, EvalError> {
    if !strategy.is_trained() {
        return Err(EvalError::UntrainedStrategy);
    }
    if rows.is_empty() || controls.is_empty() {
        return Err(EvalError::InvalidInput("sweep needs rows and controls".into()));
    }
    let mut points = Vec::with_capacity(controls.len());
    let mut trajectories = Vec::new();
    for (ci, &control) in controls.iter().enumerate() {
        let opts = options(control, strategy, template, seed)?;
        let episodes: Vec<EpisodeResult> = rows
            .par_iter()
            .map(|&r| run_episode(strategy, ds, r, &opts))
            .collect::<Result<_, _>>()?;
        for (i, e) in episodes.iter().enumerate() {
            trajectories.extend(to_records((ci * rows.len() + i) as u64, e));
        }
        points.push(summarize(control, &episodes, ds.num_classes));
    }
    points.sort_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost));
    Ok(SweepOutput {
        result: SweepResult { strategy: strategy.name().into(), task: ds.task_name.clone(), seed, points },
        trajectories,
    })
}

fn summarize(control: Control, episodes: &[EpisodeResult], num_classes: usize) -> SweepPoint {
    let n = episodes.len();
    let total: u128 = episodes.iter().map(|e| u128::from(e.total_cost.micros())).sum();
    let correct = episodes.iter().filter(|e| e.correct).count();
    let mut hits = vec![0usize; num_classes];
    let mut counts = vec![0usize; num_classes];
    for e in episodes {
        counts[e.label] += 1;
        hits[e.label] += usize::from(e.correct);
    }
    SweepPoint {
        control,
        mean_cost: total as f64 / n as f64 / 1e6,
        total_cost: Cost::from_micros(u64::try_from(total).unwrap_or(u64::MAX)),
        accuracy: correct as f64 / n as f64,
        n_episodes: n,
        class_recall: hits
            .iter()
            .zip(&counts)
            .map(|(&h, &c)| (c > 0).then(|| h as f64 / c as f64))
            .collect(),
    }
}
