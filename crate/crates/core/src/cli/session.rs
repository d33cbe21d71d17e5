use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::commands::{load_checkpoint, open_bundle};
use super::{CliError, RunConfig, SessionArgs};
use crate::acquisition::{AcquisitionState, Cost, FeatureCatalog, TerminationRule};
use crate::data::{TaskDataset, DIABETES_CLASSES};
use crate::strategies::{mix_seed, DecideOptions, Decision, Strategy};

fn class_name(ds: &TaskDataset, k: usize) -> String {
    if ds.task_name == "diabetes" && ds.num_classes == DIABETES_CLASSES.len() {
        DIABETES_CLASSES[k].to_string()
    } else {
        format!("class {k}")
    }
}

fn session_rule(cfg: &RunConfig, a: &SessionArgs) -> TerminationRule {
    let mut parts = Vec::new();
    if let Some(b) = a.budget {
        parts.push(TerminationRule::Budget(b));
    }
    if let Some(t) = a.confidence {
        parts.push(TerminationRule::Confidence(t));
    }
    match parts.len() {
        0 => cfg.rule.clone(),
        1 => parts.pop().expect("one rule"),
        _ => TerminationRule::Composite(parts),
    }
}

struct Session<'a> {
    strategy: &'a Strategy,
    ds: &'a TaskDataset,
    rule: TerminationRule,
    opts: DecideOptions,
    mc_samples: usize,
    seed: u64,
    state: AcquisitionState,
    skipped: Vec<bool>,
}

impl Session<'_> {
    fn catalog(&self) -> &FeatureCatalog {
        &self.ds.catalog
    }

    fn certainty(&self) -> Result<f64, CliError> {
        let s = mix_seed(self.seed, self.state.step() as u64);
        Ok(self.strategy.certainty(&self.state, self.catalog(), self.mc_samples, s)?)
    }

    fn report(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let probs = self.strategy.probs(&self.state, self.catalog())?;
        let k = crate::nn::argmax(&probs);
        let certainty = self.certainty()?;
        writeln!(
            out,
            "prediction: {} (p = {:.3}), certainty {:.3}, spent {}",
            class_name(self.ds, k),
            probs[k],
            certainty,
            self.state.spent()
        )?;
        Ok(())
    }

    /// Candidates the rule still allows, or the reason acquisition is over.
    fn candidates(&self) -> Result<Result<Vec<usize>, String>, CliError> {
        let catalog = self.catalog();
        let open: Vec<usize> =
            self.state.available_actions().into_iter().filter(|&j| !self.skipped[j]).collect();
        if open.is_empty() {
            return Ok(Err("no features left to acquire".into()));
        }
        if let Some(t) = confidence_threshold(&self.rule) {
            let c = self.certainty()?;
            if c >= t {
                return Ok(Err(format!("certainty {c:.3} reached the threshold {t}")));
            }
        }
        let affordable: Vec<usize> =
            self.rule.affordable(&self.state, catalog).into_iter().filter(|&j| !self.skipped[j]).collect();
        if affordable.is_empty() {
            let cheapest = open.iter().map(|&j| catalog.cost(j)).min().expect("non-empty");
            let budget = self.rule.budget().expect("only a budget makes features unaffordable");
            return Ok(Err(format!(
                "budget reached: spent {} + cheapest remaining {} exceeds budget {}; further acquisitions refused",
                self.state.spent(),
                cheapest,
                budget
            )));
        }
        Ok(Ok(affordable))
    }

    /// Runtime check of the acquisition invariants after every step.
    fn check(&self) -> Result<(), CliError> {
        self.state
            .check_invariants(self.catalog())
            .map_err(|e| CliError::Data(format!("session state invalid: {e}")))?;
        if let Some(b) = self.rule.budget() {
            if self.state.spent() > b {
                return Err(CliError::Data(format!("spent {} exceeds budget {b}", self.state.spent())));
            }
        }
        Ok(())
    }
}

fn confidence_threshold(rule: &TerminationRule) -> Option<f64> {
    match rule {
        TerminationRule::Confidence(t) => Some(*t),
        TerminationRule::Composite(rs) => rs.iter().filter_map(confidence_threshold).reduce(f64::min),
        _ => None,
    }
}

/// Reads one trimmed line; `None` at end of input.
fn read_line(input: &mut dyn BufRead) -> Result<Option<String>, CliError> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

pub(super) fn session(
    cfg: &mut RunConfig,
    a: SessionArgs,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let rule = session_rule(cfg, &a);
    rule.validate()?;
    let (_, ds) = open_bundle(cfg, a.bundle.clone())?;
    let ck_dir = a
        .checkpoints
        .clone()
        .or_else(|| cfg.data.checkpoints.clone())
        .unwrap_or_else(|| cfg.output.join(&ds.task_name).join("checkpoints"));
    let ck = load_checkpoint(&ck_dir, &a.strategy)?;
    let policy = match a.lambda {
        None => 0,
        Some(l) => ck
            .strategy
            .lambdas()
            .iter()
            .position(|&x| x == l)
            .ok_or_else(|| CliError::Config(format!("no policy trained for λ = {l}")))?,
    };
    let mut s = Session {
        strategy: &ck.strategy,
        ds: &ds,
        rule,
        opts: DecideOptions { policy, allow_early_stop: true },
        mc_samples: cfg.sweep.mc_samples,
        seed,
        state: AcquisitionState::new(&ds.catalog),
        skipped: vec![false; ds.num_features()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5e55));
    writeln!(
        out,
        "session: strategy {}, task {}, {} features; type a value, `skip`, or `quit`",
        ck.strategy.name(),
        ds.task_name,
        ds.num_features()
    )?;
    s.report(out)?;
    loop {
        let candidates = match s.candidates()? {
            Ok(c) => c,
            Err(reason) => {
                writeln!(out, "stop: {reason}")?;
                break;
            }
        };
        let j = match s.strategy.decide(&s.state, &candidates, s.catalog(), s.opts, &mut rng)? {
            Decision::Acquire(j) => j,
            Decision::Stop => {
                writeln!(out, "stop: the strategy chose to predict")?;
                break;
            }
        };
        let meta = &ds.catalog.entries()[j];
        let hint = match &ds.recipes[j] {
            crate::data::FeatureRecipe::OneHot { vocabulary, .. } => format!(" one of {}", vocabulary.codes.join("/")),
            _ => String::new(),
        };
        writeln!(out, "next: {} [{}, cost {}]{hint}", meta.name, meta.category, meta.cost)?;
        let mut quit = false;
        loop {
            write!(out, "value> ")?;
            out.flush()?;
            let Some(line) = read_line(input)? else {
                quit = true;
                break;
            };
            match line.as_str() {
                "quit" | "exit" => {
                    quit = true;
                    break;
                }
                "skip" => {
                    s.skipped[j] = true;
                    writeln!(out, "skipped {} (no charge)", meta.name)?;
                    break;
                }
                raw => match ds.recipes[j].encode(raw, meta.encoded_width) {
                    Ok(v) => {
                        s.state = s.state.query(j, &v, &ds.catalog)?;
                        s.check()?;
                        writeln!(out, "acquired {} = {raw}", meta.name)?;
                        s.report(out)?;
                        break;
                    }
                    Err(e) => writeln!(out, "{e}; try again")?,
                },
            }
        }
        if quit {
            writeln!(out, "stop: input ended")?;
            break;
        }
    }
    let total: Cost = s.state.total_cost(&ds.catalog)?;
    write!(out, "final ")?;
    s.report(out)?;
    writeln!(out, "acquired {} of {} features for {total}", s.state.num_acquired(), ds.num_features())?;
    Ok(())
}
