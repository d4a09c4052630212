//! Client side of the external-forecaster bridge.
//!
//! The forecaster runs as a child process speaking newline-delimited JSON on
//! stdin/stdout, one frame per line. Requests carry strictly increasing
//! `request_id`s and are answered one at a time, in order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::ContextWindow;
use crate::scalar::Scalar;

use super::{DayInputs, ForecastVector, Forecaster, InputSpace, SignalError};

pub const PROTOCOL_VERSION: &str = "1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
pub const DEFAULT_NUM_SAMPLES: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesContext {
    pub asset_id: String,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReturns {
    pub asset_id: String,
    pub returns: Vec<f64>,
}

/// One protocol frame. Serialized with `kind` as the first key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BridgeMessage {
    Hello {
        request_id: u64,
        protocol_version: String,
    },
    HelloAck {
        request_id: u64,
        model_id: String,
        n_parameters: u64,
        protocol_version: String,
    },
    ForecastRequest {
        request_id: u64,
        num_samples: u32,
        seed: u64,
        series: Vec<SeriesContext>,
    },
    ForecastResponse {
        request_id: u64,
        forecasts: BTreeMap<String, f64>,
    },
    FinetuneRequest {
        request_id: u64,
        date: NaiveDate,
        tau: u32,
        panel: Vec<SeriesReturns>,
    },
    FinetuneAck {
        request_id: u64,
        steps_done: u32,
        loss_last: Option<f64>,
    },
    Error {
        request_id: u64,
        message: String,
    },
    Shutdown {
        request_id: u64,
    },
}

impl BridgeMessage {
    pub fn request_id(&self) -> u64 {
        match self {
            BridgeMessage::Hello { request_id, .. }
            | BridgeMessage::HelloAck { request_id, .. }
            | BridgeMessage::ForecastRequest { request_id, .. }
            | BridgeMessage::ForecastResponse { request_id, .. }
            | BridgeMessage::FinetuneRequest { request_id, .. }
            | BridgeMessage::FinetuneAck { request_id, .. }
            | BridgeMessage::Error { request_id, .. }
            | BridgeMessage::Shutdown { request_id } => *request_id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BridgeMessage::Hello { .. } => "hello",
            BridgeMessage::HelloAck { .. } => "hello_ack",
            BridgeMessage::ForecastRequest { .. } => "forecast_request",
            BridgeMessage::ForecastResponse { .. } => "forecast_response",
            BridgeMessage::FinetuneRequest { .. } => "finetune_request",
            BridgeMessage::FinetuneAck { .. } => "finetune_ack",
            BridgeMessage::Error { .. } => "error",
            BridgeMessage::Shutdown { .. } => "shutdown",
        }
    }

    /// Encode as a single JSON line without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("bridge frames always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot start bridge {program:?}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bridge is down (exit status: {status})")]
    Down { status: String },
    #[error("no response to request {request_id} within {timeout:?}")]
    Timeout { request_id: u64, timeout: Duration },
    #[error("protocol violation: {reason}; offending line: {line:?}")]
    Protocol { reason: String, line: String },
    #[error("bridge reported an error for request {request_id}: {message}")]
    Remote { request_id: u64, message: String },
    #[error("handshake failed: {0}")]
    Handshake(String),
}

/// How to start the bridge process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
}

fn default_timeout_secs() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

impl BridgeConfig {
    pub fn new(program: impl Into<String>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout_secs = t.as_secs_f64();
        self
    }
}

/// Identity of the model behind a bridge, from its `hello_ack`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeInfo {
    pub model_id: String,
    pub n_parameters: u64,
    pub protocol_version: String,
}

pub struct BridgeClient {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    timeout: Duration,
    info: Option<BridgeInfo>,
    broken: bool,
}

impl BridgeClient {
    /// Start the bridge process and perform the `hello` handshake.
    pub fn spawn(config: &BridgeConfig) -> Result<Self, BridgeError> {
        let mut child = Command::new(&config.program)
            .args(&config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BridgeError::Spawn {
                program: config.program.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let timeout = if config.timeout_secs.is_finite() && config.timeout_secs > 0.0 {
            Duration::from_secs_f64(config.timeout_secs)
        } else {
            DEFAULT_TIMEOUT
        };
        let mut client = Self {
            child,
            stdin: Some(stdin),
            lines: rx,
            next_id: 1,
            timeout,
            info: None,
            broken: false,
        };
        client.handshake()?;
        Ok(client)
    }

    pub fn info(&self) -> Option<&BridgeInfo> {
        self.info.as_ref()
    }

    fn handshake(&mut self) -> Result<(), BridgeError> {
        let id = self.take_id();
        let reply = self.roundtrip(BridgeMessage::Hello {
            request_id: id,
            protocol_version: PROTOCOL_VERSION.into(),
        })?;
        match reply {
            BridgeMessage::HelloAck {
                model_id,
                n_parameters,
                protocol_version,
                ..
            } => {
                if protocol_version != PROTOCOL_VERSION {
                    return Err(BridgeError::Handshake(format!(
                        "bridge speaks protocol {protocol_version:?}, expected {PROTOCOL_VERSION:?}"
                    )));
                }
                self.info = Some(BridgeInfo {
                    model_id,
                    n_parameters,
                    protocol_version,
                });
                Ok(())
            }
            other => Err(BridgeError::Handshake(format!(
                "expected hello_ack, got {}",
                other.kind()
            ))),
        }
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn down(&mut self) -> BridgeError {
        self.broken = true;
        self.stdin = None;
        let status = match self.child.wait() {
            Ok(s) => s.to_string(),
            Err(e) => format!("unknown ({e})"),
        };
        BridgeError::Down { status }
    }

    /// Send one request and wait for the frame answering it.
    fn roundtrip(&mut self, request: BridgeMessage) -> Result<BridgeMessage, BridgeError> {
        if self.broken {
            return Err(BridgeError::Down {
                status: "session already failed".into(),
            });
        }
        let id = request.request_id();
        let mut line = request.to_line();
        line.push('\n');
        let write = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if write.is_err() {
            return Err(self.down());
        }

        let raw = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(raw)) => raw,
            Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => return Err(self.down()),
            Err(RecvTimeoutError::Timeout) => {
                self.broken = true;
                let _ = self.child.kill();
                let _ = self.child.wait();
                return Err(BridgeError::Timeout {
                    request_id: id,
                    timeout: self.timeout,
                });
            }
        };
        let reply = BridgeMessage::from_line(raw.trim_end()).map_err(|e| {
            self.broken = true;
            BridgeError::Protocol {
                reason: e.to_string(),
                line: raw.clone(),
            }
        })?;
        if reply.request_id() != id {
            self.broken = true;
            return Err(BridgeError::Protocol {
                reason: format!("expected request_id {id}, got {}", reply.request_id()),
                line: raw,
            });
        }
        if let BridgeMessage::Error {
            request_id,
            message,
        } = reply
        {
            return Err(BridgeError::Remote {
                request_id,
                message,
            });
        }
        Ok(reply)
    }

    /// Mean-of-samples next-step forecast for each series.
    pub fn forecast(
        &mut self,
        series: Vec<SeriesContext>,
        num_samples: u32,
        seed: u64,
    ) -> Result<BTreeMap<String, f64>, BridgeError> {
        let id = self.take_id();
        let wanted: Vec<String> = series.iter().map(|s| s.asset_id.clone()).collect();
        let reply = self.roundtrip(BridgeMessage::ForecastRequest {
            request_id: id,
            num_samples,
            seed,
            series,
        })?;
        let forecasts = match reply {
            BridgeMessage::ForecastResponse { forecasts, .. } => forecasts,
            other => {
                self.broken = true;
                return Err(BridgeError::Protocol {
                    reason: format!("expected forecast_response, got {}", other.kind()),
                    line: other.to_line(),
                });
            }
        };
        if forecasts.len() != wanted.len() || wanted.iter().any(|a| !forecasts.contains_key(a)) {
            return Err(BridgeError::Protocol {
                reason: format!(
                    "response covers {} assets, request had {}",
                    forecasts.len(),
                    wanted.len()
                ),
                line: serde_json::to_string(&forecasts).unwrap_or_default(),
            });
        }
        Ok(forecasts)
    }

    /// Ask the bridge to train on one day of history; returns (steps done, last loss).
    pub fn finetune(
        &mut self,
        date: NaiveDate,
        tau: u32,
        panel: Vec<SeriesReturns>,
    ) -> Result<(u32, Option<f64>), BridgeError> {
        let id = self.take_id();
        match self.roundtrip(BridgeMessage::FinetuneRequest {
            request_id: id,
            date,
            tau,
            panel,
        })? {
            BridgeMessage::FinetuneAck {
                steps_done,
                loss_last,
                ..
            } => Ok((steps_done, loss_last)),
            other => {
                self.broken = true;
                Err(BridgeError::Protocol {
                    reason: format!("expected finetune_ack, got {}", other.kind()),
                    line: other.to_line(),
                })
            }
        }
    }

    /// Send `shutdown`, close stdin and wait for the process to exit.
    pub fn shutdown(mut self) -> Result<ExitStatus, BridgeError> {
        if !self.broken {
            let id = self.take_id();
            if let Some(stdin) = self.stdin.as_mut() {
                let line = format!("{}\n", BridgeMessage::Shutdown { request_id: id }.to_line());
                let _ = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush());
            }
        }
        self.stdin = None;
        self.broken = true;
        self.child.wait().map_err(|e| BridgeError::Down {
            status: format!("wait failed: {e}"),
        })
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        // no-op on a child that was already reaped
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Request χ̂ (mean of `num_samples` sampled next values) for every window.
///
/// Windows are sent as given; when the engine works in EMA space they are
/// already transformed and the result still needs [`super::deadjust_forecast`].
pub fn bridge_forecast<T: Scalar>(
    client: &mut BridgeClient,
    date: NaiveDate,
    windows: &[ContextWindow<T>],
    num_samples: u32,
    seed: u64,
) -> Result<ForecastVector<T>, SignalError> {
    if windows.is_empty() {
        return Err(SignalError::InvalidParameter(
            "bridge_forecast needs at least one window".into(),
        ));
    }
    let series = windows
        .iter()
        .map(|w| SeriesContext {
            asset_id: w.asset_id.clone(),
            context: w.returns.iter().map(|v| v.as_f64()).collect(),
        })
        .collect();
    let forecasts = client.forecast(series, num_samples, seed)?;
    let mut out = ForecastVector::new(date, "bridge");
    for (asset, v) in forecasts {
        out.scores.insert(asset, T::lit(v));
    }
    out.check_finite()?;
    Ok(out)
}

/// Forecaster backed by a bridge process, optionally fine-tuned daily.
pub struct BridgeForecaster {
    config: BridgeConfig,
    client: Option<BridgeClient>,
    num_samples: u32,
    finetune_tau: Option<u32>,
}

impl BridgeForecaster {
    pub fn new(config: BridgeConfig, num_samples: u32, finetune_tau: Option<u32>) -> Self {
        Self {
            config,
            client: None,
            num_samples,
            finetune_tau,
        }
    }

    pub fn with_client(client: BridgeClient, num_samples: u32, finetune_tau: Option<u32>) -> Self {
        Self {
            config: BridgeConfig::new("<attached>"),
            client: Some(client),
            num_samples,
            finetune_tau,
        }
    }

    fn client(&mut self) -> Result<&mut BridgeClient, BridgeError> {
        if self.client.is_none() {
            self.client = Some(BridgeClient::spawn(&self.config)?);
        }
        Ok(self.client.as_mut().expect("set above"))
    }

    pub fn shutdown(&mut self) -> Option<Result<ExitStatus, BridgeError>> {
        self.client.take().map(BridgeClient::shutdown)
    }
}

impl<T: Scalar> Forecaster<T> for BridgeForecaster {
    fn tag(&self) -> String {
        match self.finetune_tau {
            Some(tau) => format!("bridge(num_samples={},tau={tau})", self.num_samples),
            None => format!("bridge(num_samples={})", self.num_samples),
        }
    }

    fn input_space(&self) -> InputSpace {
        InputSpace::Transformed
    }

    fn prepare(&mut self, _panel: &crate::panel::ResidualPanel<T>) -> Result<(), SignalError> {
        self.client()?;
        Ok(())
    }

    fn forecast(&mut self, day: &DayInputs<'_, T>) -> Result<ForecastVector<T>, SignalError> {
        let num_samples = self.num_samples;
        if let Some(tau) = self.finetune_tau {
            let panel = day
                .raw_windows()
                .into_iter()
                .map(|w| SeriesReturns {
                    asset_id: w.asset_id,
                    returns: w.returns.iter().map(|v| v.as_f64()).collect(),
                })
                .collect();
            let (steps, loss) = self.client()?.finetune(day.date, tau, panel)?;
            log::debug!("{}: fine-tuned {steps} steps, last loss {loss:?}", day.date);
        }
        let windows = day.windows();
        let mut out = bridge_forecast(self.client()?, day.date, &windows, num_samples, day.seed)?;
        out.source = <Self as Forecaster<T>>::tag(self);
        Ok(out)
    }

    fn finish(&mut self) {
        match self.shutdown() {
            Some(Ok(status)) if !status.success() => log::warn!("bridge exited with {status}"),
            Some(Err(e)) => log::warn!("bridge shutdown failed: {e}"),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecast_request_frame_is_bit_exact() {
        let msg = BridgeMessage::ForecastRequest {
            request_id: 7,
            num_samples: 20,
            seed: 42,
            series: vec![SeriesContext {
                asset_id: "A".into(),
                context: vec![0.001, -0.002],
            }],
        };
        assert_eq!(
            msg.to_line(),
            r#"{"kind":"forecast_request","request_id":7,"num_samples":20,"seed":42,"series":[{"asset_id":"A","context":[0.001,-0.002]}]}"#
        );
    }

    #[test]
    fn response_and_error_frames_parse() {
        let r = BridgeMessage::from_line(
            r#"{"kind":"forecast_response","request_id":7,"forecasts":{"A":0.0004}}"#,
        )
        .unwrap();
        assert_eq!(r.request_id(), 7);
        match r {
            BridgeMessage::ForecastResponse { forecasts, .. } => assert_eq!(forecasts["A"], 0.0004),
            other => panic!("{other:?}"),
        }
        let e = BridgeMessage::from_line(
            r#"{"kind":"error","request_id":3,"message":"context too long"}"#,
        )
        .unwrap();
        assert_eq!(e.kind(), "error");
        assert!(BridgeMessage::from_line(r#"{"kind":"bogus","request_id":1}"#).is_err());
    }

    #[test]
    fn finetune_frame_layout() {
        let msg = BridgeMessage::FinetuneRequest {
            request_id: 2,
            date: NaiveDate::from_ymd_opt(2002, 1, 3).unwrap(),
            tau: 15,
            panel: vec![SeriesReturns {
                asset_id: "A".into(),
                returns: vec![0.5, -0.25],
            }],
        };
        assert_eq!(
            msg.to_line(),
            r#"{"kind":"finetune_request","request_id":2,"date":"2002-01-03","tau":15,"panel":[{"asset_id":"A","returns":[0.5,-0.25]}]}"#
        );
    }

    #[test]
    fn floats_use_shortest_round_trip() {
        let v = 0.1 + 0.2;
        let msg = BridgeMessage::ForecastResponse {
            request_id: 1,
            forecasts: BTreeMap::from([("X".to_string(), v)]),
        };
        let line = msg.to_line();
        assert!(line.contains("0.30000000000000004"));
        assert_eq!(BridgeMessage::from_line(&line).unwrap(), msg);
    }

    #[test]
    fn spawn_failure_is_reported() {
        let err = BridgeClient::spawn(&BridgeConfig::new("/nonexistent/bridge-binary"))
            .err()
            .unwrap();
        assert!(matches!(err, BridgeError::Spawn { .. }));
    }
}
