//! Line protocol between the framework and an external agent process.
//!
//! One JSON object per line on the agent's stdin and stdout:
//!
//! ```text
//! -> {"type":"hello","context":{...}}          <- {"type":"ready"}
//! -> {"type":"observation","observation":{...}} <- {"type":"action","action":{"accel":..,"steer":..},"log":{...}}
//! -> {"type":"shutdown"}                         <- {"type":"bye"}
//! ```
//!
//! An agent may answer any request with `{"type":"error","message":"..."}`.
//! Floats are written with full precision so that an external agent sees
//! exactly the values an in-process agent would.

use serde::{Deserialize, Serialize};

use super::{AgentAction, AgentContext, AgentLog, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Hello { context: AgentContext },
    Observation { observation: Observation },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ready,
    Action {
        action: AgentAction,
        #[serde(default)]
        log: AgentLog,
    },
    Bye,
    Error {
        message: String,
    },
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages serialize")
}

pub fn decode_request(line: &str) -> Result<Request, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

pub fn decode_reply(line: &str) -> Result<Reply, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        assert_eq!(encode(&Request::Shutdown), r#"{"type":"shutdown"}"#);
        assert_eq!(decode_reply(r#"{"type":"ready"}"#).unwrap(), Reply::Ready);
        let r = decode_reply(r#"{"type":"action","action":{"accel":0.1,"steer":-0.2}}"#).unwrap();
        assert_eq!(
            r,
            Reply::Action {
                action: AgentAction {
                    accel: 0.1,
                    steer: -0.2
                },
                log: AgentLog::new()
            }
        );
        assert!(decode_reply(r#"{"type":"action","action":{"accel":1}}"#).is_err());
        assert!(decode_reply("garbage").is_err());
    }

    #[test]
    fn floats_survive_the_wire() {
        let x = 0.1 + 0.2;
        let msg = Reply::Action {
            action: AgentAction {
                accel: x,
                steer: 1.0 / 3.0,
            },
            log: AgentLog::new(),
        };
        assert_eq!(decode_reply(&encode(&msg)).unwrap(), msg);
    }
}
