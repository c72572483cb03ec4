//! Line-delimited JSON transport to an external plugin process.
//!
//! One request object per line on the child's stdin, one response object per line on
//! its stdout. Every request carries an integer `id` that the response must echo.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde_json::{Map, Value};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("plugin command is empty")]
    EmptyCommand,
    #[error("failed to start plugin `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("plugin i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("plugin did not answer within {0:?}")]
    Timeout(Duration),
    #[error("plugin closed its output")]
    Closed,
    #[error("malformed plugin response ({reason}): {payload}")]
    Malformed { reason: String, payload: String },
}

impl PluginError {
    pub fn malformed(reason: impl Into<String>, payload: impl Into<String>) -> Self {
        let err = PluginError::Malformed {
            reason: reason.into(),
            payload: payload.into(),
        };
        log::error!("{err}");
        err
    }
}

pub struct PluginProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
    timeout: Duration,
    next_id: u64,
}

impl PluginProcess {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, PluginError> {
        let (program, args) = command.split_first().ok_or(PluginError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PluginError::Spawn {
                command: command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(PluginProcess {
            child,
            stdin,
            lines: rx,
            timeout,
            next_id: 1,
        })
    }

    /// Sends `body` with a fresh `id` and waits for the response carrying the same id.
    pub fn request(&mut self, mut body: Map<String, Value>) -> Result<Map<String, Value>, PluginError> {
        let id = self.next_id;
        self.next_id += 1;
        body.insert("id".into(), Value::from(id));
        let mut line = serde_json::to_string(&Value::Object(body)).expect("json values serialize");
        line.push('\n');
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;

        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(PluginError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(PluginError::Closed),
        };
        let value: Value =
            serde_json::from_str(&reply).map_err(|e| PluginError::malformed(format!("invalid json: {e}"), &reply))?;
        let Value::Object(map) = value else {
            return Err(PluginError::malformed("response is not an object", reply));
        };
        match map.get("id").and_then(Value::as_u64) {
            Some(got) if got == id => Ok(map),
            Some(got) => Err(PluginError::malformed(format!("expected id {id}, got {got}"), reply)),
            None => Err(PluginError::malformed("missing integer id", reply)),
        }
    }
}

impl Drop for PluginProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
