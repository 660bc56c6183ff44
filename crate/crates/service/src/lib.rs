//! Command-line and HTTP front-ends for fdexplain.

pub mod cli;
pub mod http;

use std::sync::Arc;

use fdexplain::lang::{model_hash, parse_model};
use fdexplain::{chaotic_iteration, Closure, Csp, Environment, Program, Schedule, ValuePair};

/// A parsed and propagated model; immutable once built.
#[derive(Debug)]
pub struct LoadedModel {
    pub csp: Csp,
    pub program: Program,
    pub closure: Closure,
    pub hash: String,
}

impl LoadedModel {
    pub fn from_text(text: &str, schedule: Schedule) -> fdexplain::Result<Self> {
        let csp = parse_model(text)?;
        let program = Program::compile(&csp)?;
        let closure = chaotic_iteration(&program, &Environment::full(csp.universe()), schedule);
        let hash = model_hash(&csp);
        Ok(LoadedModel {
            csp,
            program,
            closure,
            hash,
        })
    }

    pub fn into_shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

pub fn schedule_for(seed: Option<u64>) -> Schedule {
    seed.map_or(Schedule::Fifo, Schedule::Shuffled)
}

/// Parses `VAR=value` against the model's universe.
pub fn parse_pair(model: &LoadedModel, text: &str) -> Result<ValuePair, String> {
    let (var, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected VAR=value, got `{text}`"))?;
    let value: i64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not an integer", value.trim()))?;
    resolve_pair(model, var.trim(), value)
}

pub fn resolve_pair(model: &LoadedModel, var: &str, value: i64) -> Result<ValuePair, String> {
    let u = model.csp.universe();
    let id = u.resolve(var).map_err(|e| e.to_string())?;
    let pair = ValuePair::new(id, value);
    u.check(pair).map_err(|e| e.to_string())?;
    Ok(pair)
}
