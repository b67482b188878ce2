//! JSON-Lines run transcripts and their replay.
//!
//! A transcript holds one record per stage input and output, one per
//! execution feedback and one per refinement. It starts with a `run` input
//! (backend, task, descriptor, configuration) and ends with a `result`
//! output, so a run can be rebuilt and re-executed from the file alone.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::execute::execute_and_evaluate;
use crate::refine::RefineReason;
use crate::run::{RunInput, RunSummary};
use crate::types::{Feedback, PipelineResult, ProblemSpec, SolverPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Run,
    Formulate,
    SelectStrategy,
    Upsample,
    GeneratePlan,
    Result,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptLine {
    StageInput {
        stage: Stage,
        revision: u32,
        payload: Value,
    },
    StageOutput {
        stage: Stage,
        revision: u32,
        payload: Value,
    },
    Feedback {
        revision: u32,
        feedback: Feedback,
    },
    Refinement {
        revision: u32,
        reason: RefineReason,
        plan: SolverPlan,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("corrupt transcript: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(m: impl Into<String>) -> TranscriptError {
    TranscriptError::Corrupt(m.into())
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("transcript lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| corrupt(format!("line {}: {e}", i + 1))))
            .collect::<Result<_, _>>()?;
        Ok(Self { lines })
    }

    /// Writes the transcript; refuses to overwrite an existing file, since
    /// every run owns a fresh one.
    pub fn write_new(&self, path: &Path) -> Result<(), TranscriptError> {
        let mut f = fs::OpenOptions::new().write(true).create_new(true).open(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, TranscriptError> {
        Self::parse_jsonl(&fs::read_to_string(path)?)
    }

    fn stage_payload(&self, want_input: bool, stage: Stage) -> Option<&Value> {
        self.lines.iter().find_map(|l| match l {
            TranscriptLine::StageInput { stage: s, payload, .. } if want_input && *s == stage => Some(payload),
            TranscriptLine::StageOutput { stage: s, payload, .. } if !want_input && *s == stage => Some(payload),
            _ => None,
        })
    }

    /// The run header.
    pub fn run_input(&self) -> Result<RunInput, TranscriptError> {
        let v = self
            .stage_payload(true, Stage::Run)
            .ok_or_else(|| corrupt("missing run record"))?;
        serde_json::from_value(v.clone()).map_err(|e| corrupt(format!("run record: {e}")))
    }

    /// Rebuilds the pipeline result and checks its invariants.
    pub fn reconstruct(&self) -> Result<PipelineResult, TranscriptError> {
        let spec: Option<ProblemSpec> = self
            .stage_payload(false, Stage::Formulate)
            .map(|v| serde_json::from_value(v.clone()))
            .transpose()
            .map_err(|e| corrupt(format!("spec: {e}")))?;
        let summary: RunSummary = self
            .stage_payload(false, Stage::Result)
            .map(|v| serde_json::from_value(v.clone()))
            .ok_or_else(|| corrupt("missing result record (truncated?)"))?
            .map_err(|e| corrupt(format!("result: {e}")))?;
        let mut plans = Vec::new();
        let mut feedbacks = Vec::new();
        for line in &self.lines {
            match line {
                TranscriptLine::StageOutput {
                    stage: Stage::GeneratePlan,
                    payload,
                    ..
                } => plans.push(
                    serde_json::from_value::<SolverPlan>(payload.clone()).map_err(|e| corrupt(format!("plan: {e}")))?,
                ),
                TranscriptLine::Refinement { revision, plan, .. } => {
                    if plan.revision != *revision {
                        return Err(corrupt(format!(
                            "refinement line {revision} holds plan {}",
                            plan.revision
                        )));
                    }
                    plans.push(plan.clone());
                }
                TranscriptLine::Feedback { revision, feedback } => {
                    if *revision as usize != feedbacks.len() {
                        return Err(corrupt(format!("feedback for revision {revision} out of order")));
                    }
                    feedbacks.push(feedback.clone());
                }
                _ => {}
            }
        }
        let mut strategy_history = Vec::new();
        for p in &plans {
            if strategy_history.last() != Some(&p.strategy) {
                strategy_history.push(p.strategy.clone());
            }
        }
        let result = PipelineResult {
            spec,
            strategy_history,
            plans,
            feedbacks,
            final_solution: summary.final_solution,
            final_objective: summary.final_objective,
            terminated_by: summary.terminated_by,
            warnings: summary.warnings,
        };
        result.check_invariants().map_err(corrupt)?;
        Ok(result)
    }
}

/// Outcome of replaying a transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub result: PipelineResult,
    /// Revisions whose re-executed feedback differs from the record.
    pub mismatched_revisions: Vec<u32>,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.mismatched_revisions.is_empty()
    }
}

/// Rebuilds the run and re-executes every recorded plan on the recorded
/// descriptor, comparing each fresh feedback with the stored one.
pub fn replay(transcript: &Transcript) -> Result<ReplayReport, TranscriptError> {
    let input = transcript.run_input()?;
    let result = transcript.reconstruct()?;
    let mut mismatched = Vec::new();
    for (plan, recorded) in result.plans.iter().zip(&result.feedbacks) {
        let (_, fresh) = execute_and_evaluate(plan, &input.theta, &input.config.exec);
        if !fresh.same_outcome(recorded) {
            mismatched.push(plan.revision);
        }
    }
    Ok(ReplayReport {
        result,
        mismatched_revisions: mismatched,
    })
}
