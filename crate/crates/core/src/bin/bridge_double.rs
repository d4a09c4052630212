//! Scripted stand-in for a model bridge, used by the protocol tests.
//!
//! ```text
//! bridge-double [--mode echo|fixed|delay|crash|drop|malformed|mismatch|error]
//!               [--value X] [--delay-ms N] [--after N]
//! ```
//!
//! The first `--after` forecast requests (default 0) are answered in echo or
//! fixed mode; the selected misbehaviour starts afterwards.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::time::Duration;

use resid_arb::signal::bridge::{BridgeMessage, PROTOCOL_VERSION};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Echo,
    Fixed,
    Delay,
    Crash,
    Drop,
    Malformed,
    Mismatch,
    Error,
}

fn main() {
    let mut mode = Mode::Echo;
    let mut value = 0.0_f64;
    let mut delay_ms = 0u64;
    let mut after = 0usize;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut next = || args.next().expect("flag needs a value");
        match a.as_str() {
            "--mode" => {
                mode = match next().as_str() {
                    "echo" => Mode::Echo,
                    "fixed" => Mode::Fixed,
                    "delay" => Mode::Delay,
                    "crash" => Mode::Crash,
                    "drop" => Mode::Drop,
                    "malformed" => Mode::Malformed,
                    "mismatch" => Mode::Mismatch,
                    "error" => Mode::Error,
                    other => panic!("unknown mode {other}"),
                }
            }
            "--value" => value = next().parse().expect("--value takes a number"),
            "--delay-ms" => delay_ms = next().parse().expect("--delay-ms takes an integer"),
            "--after" => after = next().parse().expect("--after takes an integer"),
            other => panic!("unknown flag {other}"),
        }
    }

    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut served = 0usize;
    let mut last_id = 0u64;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let parsed = BridgeMessage::from_line(&line);
        if let Ok(msg) = &parsed {
            if msg.request_id() <= last_id {
                let reply = BridgeMessage::Error {
                    request_id: msg.request_id(),
                    message: format!("request_id {} does not follow {last_id}", msg.request_id()),
                };
                writeln!(out, "{}", reply.to_line()).ok();
                out.flush().ok();
                continue;
            }
            last_id = msg.request_id();
        }
        let reply = match parsed {
            Err(e) => {
                let kind = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
                    .unwrap_or_default();
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("request_id").and_then(|k| k.as_u64()))
                    .unwrap_or(0);
                Some(BridgeMessage::Error {
                    request_id: id,
                    message: format!("unsupported frame kind {kind:?}: {e}"),
                })
            }
            Ok(BridgeMessage::Hello { request_id, .. }) => Some(BridgeMessage::HelloAck {
                request_id,
                model_id: "scripted-double".into(),
                n_parameters: 0,
                protocol_version: PROTOCOL_VERSION.into(),
            }),
            Ok(BridgeMessage::Shutdown { .. }) => std::process::exit(0),
            Ok(BridgeMessage::FinetuneRequest {
                request_id, tau, ..
            }) => Some(BridgeMessage::FinetuneAck {
                request_id,
                steps_done: tau,
                loss_last: Some(0.0),
            }),
            Ok(BridgeMessage::ForecastRequest {
                request_id, series, ..
            }) => {
                served += 1;
                let misbehave = served > after;
                let forecasts: BTreeMap<String, f64> = series
                    .iter()
                    .map(|s| {
                        let v = match mode {
                            Mode::Fixed => value,
                            _ => s.context.last().copied().unwrap_or(0.0),
                        };
                        (s.asset_id.clone(), v)
                    })
                    .collect();
                let ok = BridgeMessage::ForecastResponse {
                    request_id,
                    forecasts,
                };
                if !misbehave {
                    Some(ok)
                } else {
                    match mode {
                        Mode::Echo | Mode::Fixed => Some(ok),
                        Mode::Delay => {
                            std::thread::sleep(Duration::from_millis(delay_ms));
                            Some(ok)
                        }
                        Mode::Crash => std::process::exit(17),
                        Mode::Drop => None,
                        Mode::Malformed => {
                            writeln!(out, "{{\"kind\":\"forecast_response\",").ok();
                            out.flush().ok();
                            None
                        }
                        Mode::Mismatch => Some(BridgeMessage::ForecastResponse {
                            request_id: request_id + 100,
                            forecasts: BTreeMap::new(),
                        }),
                        Mode::Error => Some(BridgeMessage::Error {
                            request_id,
                            message: "context too long".into(),
                        }),
                    }
                }
            }
            Ok(other) => Some(BridgeMessage::Error {
                request_id: other.request_id(),
                message: format!("unexpected frame kind {:?}", other.kind()),
            }),
        };
        if let Some(reply) = reply {
            writeln!(out, "{}", reply.to_line()).ok();
            out.flush().ok();
        }
    }
}
