use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{Oracle, OracleError, OracleResult};
use crate::chem::Structure;
use crate::plugin::{PluginError, PluginProcess};

/// Oracle backed by an external process speaking the `evaluate` protocol.
pub struct ExternalOracle {
    process: PluginProcess,
}

impl ExternalOracle {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, OracleError> {
        Ok(ExternalOracle {
            process: PluginProcess::spawn(command, timeout)?,
        })
    }
}

/// Validates an `evaluate` response. Missing `relaxed_structure` falls back to the
/// submitted structure and missing `converged` reads as converged.
pub fn parse_evaluate_response(request: &Structure, reply: &Map<String, Value>) -> Result<OracleResult, OracleError> {
    let payload = || Value::Object(reply.clone()).to_string();
    let energy = reply
        .get("energy_per_atom")
        .and_then(Value::as_f64)
        .ok_or_else(|| PluginError::malformed("missing numeric energy_per_atom", payload()))?;
    if !energy.is_finite() {
        log::error!("non-finite energy from oracle plugin: {}", payload());
        return Err(OracleError::NonFinite(energy));
    }
    let relaxed = match reply.get("relaxed_structure") {
        None | Some(Value::Null) => request.clone(),
        Some(v) => serde_json::from_value::<Structure>(v.clone())
            .map_err(|e| PluginError::malformed(format!("bad relaxed_structure: {e}"), payload()))?,
    };
    if relaxed.composition() != request.composition() {
        return Err(PluginError::malformed("relaxed structure changed the species", payload()).into());
    }
    let converged = match reply.get("converged") {
        None | Some(Value::Null) => true,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(PluginError::malformed("converged is not a boolean", payload()).into()),
    };
    Ok(OracleResult {
        energy_per_atom: energy,
        relaxed,
        steps_used: 0,
        converged,
    })
}

impl Oracle for ExternalOracle {
    fn evaluate(&mut self, s: &Structure) -> Result<OracleResult, OracleError> {
        let mut body = Map::new();
        body.insert("type".into(), json!("evaluate"));
        body.insert("structure".into(), serde_json::to_value(s).expect("structures serialize"));
        let reply = self.process.request(body)?;
        parse_evaluate_response(s, &reply)
    }
}
