//! Policy backed by an external process speaking the `propose` protocol.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Policy, PolicyContext, PolicyError, Proposal};
use crate::chem::{ChemicalSystem, Structure};
use crate::plugin::{PluginError, PluginProcess, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPolicySpec {
    pub command: Vec<String>,
    /// seconds per request
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

impl ExternalPolicySpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.command.is_empty() {
            return Err("external.command is empty".into());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(format!("external.timeout_s must be positive, got {}", self.timeout_s));
        }
        Ok(())
    }
}

pub struct ExternalPolicy {
    process: PluginProcess,
}

impl ExternalPolicy {
    pub fn spawn(spec: &ExternalPolicySpec) -> Result<Self, PolicyError> {
        spec.validate().map_err(PolicyError::Spec)?;
        Ok(ExternalPolicy {
            process: PluginProcess::spawn(&spec.command, Duration::from_secs_f64(spec.timeout_s))?,
        })
    }
}

/// The state summary sent with every `propose` request.
pub fn propose_request(ctx: &PolicyContext<'_>) -> Map<String, Value> {
    let history: Vec<Value> = ctx
        .history
        .records()
        .iter()
        .map(|r| {
            json!({
                "structure": r.structure,
                "energy_per_atom": r.energy_per_atom,
                "e_above_hull": r.e_above_hull,
                "stable": r.stable,
                "novel": r.novel,
            })
        })
        .collect();
    let stable_set: Vec<Value> = ctx
        .hull
        .stable_ids()
        .into_iter()
        .filter_map(|id| ctx.hull.entry(id).ok())
        .map(|e| {
            json!({
                "formula": e.structure.composition().to_string(),
                "energy_per_atom": e.energy_per_atom,
                "structure": e.structure,
            })
        })
        .collect();
    let mut body = Map::new();
    body.insert("type".into(), json!("propose"));
    body.insert("budget_remaining".into(), json!(ctx.budget_remaining));
    body.insert("epsilon".into(), json!(ctx.hull.epsilon()));
    body.insert(
        "elements".into(),
        json!(ctx.system.elements().iter().map(|e| e.symbol()).collect::<Vec<_>>()),
    );
    body.insert("max_atoms".into(), json!(ctx.system.max_atoms()));
    body.insert("history".into(), Value::Array(history));
    body.insert("stable_set".into(), Value::Array(stable_set));
    body
}

/// Extracts and validates the proposed structure of a `propose` reply.
pub fn parse_propose_response(system: &ChemicalSystem, reply: &Map<String, Value>) -> Result<Structure, String> {
    let value = reply.get("structure").ok_or("missing structure")?;
    let s: Structure = serde_json::from_value(value.clone()).map_err(|e| format!("invalid structure: {e}"))?;
    system.check_structure(&s).map_err(|e| e.to_string())?;
    Ok(s)
}

impl Policy for ExternalPolicy {
    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Proposal, PolicyError> {
        let body = propose_request(ctx);
        let first = self.process.request(body.clone());
        let problem = match first {
            Ok(reply) => match parse_propose_response(ctx.system, &reply) {
                Ok(s) => return Ok(Proposal { structure: s, fallback: false }),
                Err(e) => e,
            },
            Err(PluginError::Malformed { reason, payload }) => {
                log::warn!("malformed proposal: {reason}; payload: {payload}");
                reason
            }
            Err(e) => return Err(e.into()),
        };
        log::warn!("re-prompting external policy: {problem}");
        let mut retry = body;
        retry.insert("error".into(), json!(problem));
        let reply = match self.process.request(retry) {
            Ok(reply) => reply,
            Err(PluginError::Malformed { reason, .. }) => return Err(PolicyError::InvalidProposal(reason)),
            Err(e) => return Err(e.into()),
        };
        let structure = parse_propose_response(ctx.system, &reply).map_err(PolicyError::InvalidProposal)?;
        Ok(Proposal { structure, fallback: false })
    }
}
