//! Entropy of trained versus untrained agents.

use std::fmt::Write as _;

use super::runner::evaluate_with;
use crate::envs::EnvKind;
use crate::error::{EbeError, Result};
use crate::learners::{QModel, Workspace};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub model: String,
    pub mean_h0: f64,
    pub mean_reward: f64,
}

pub const DIAGNOSTIC_HEADER: &str = "model,mean_h0,mean_reward";

/// Runs `episodes` greedy episodes per model on a freshly seeded environment.
pub fn entropy_diagnostic(
    models: &[(String, QModel<f64>)],
    env: EnvKind,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<DiagnosticRow>> {
    if episodes == 0 {
        return Err(EbeError::Empty("diagnostic episodes"));
    }
    let mut out = Vec::with_capacity(models.len());
    for (name, model) in models {
        let mut e = env.build(seed, max_steps);
        if model.num_actions() != e.num_actions() {
            return Err(EbeError::DimensionMismatch { expected: e.num_actions(), got: model.num_actions() });
        }
        let mut ws = Workspace::default();
        let (mean_reward, _, mean_h0) =
            evaluate_with(|env, _| model.q_values(env, &mut ws), e.as_mut(), episodes, max_steps)?;
        out.push(DiagnosticRow { model: name.clone(), mean_h0, mean_reward });
    }
    Ok(out)
}

pub fn diagnostic_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = format!("{DIAGNOSTIC_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.model, r.mean_h0, r.mean_reward).expect("writing to a string");
    }
    out
}
