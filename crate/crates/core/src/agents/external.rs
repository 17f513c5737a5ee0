use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{decode_reply, decode_request, encode, Reply, Request};
use super::{Agent, AgentAction, AgentError, AgentLog, AgentRef, BuiltinAgent, Observation};
use crate::agents::AgentContext;

/// Agent running in a child process. The process is killed and reaped when
/// the handle is dropped, whatever state it is in.
pub struct ExternalAgent {
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    timeout: Duration,
    step: u64,
}

impl ExternalAgent {
    pub fn spawn(argv: &[String], ctx: &AgentContext, timeout: Duration) -> Result<Self, AgentError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| AgentError::Handshake(format!("cannot start {:?}: {e}", argv[0])))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut agent = Self {
            stdin: child.stdin.take(),
            child: Some(child),
            lines,
            timeout,
            step: 0,
        };
        let hello = Request::Hello { context: ctx.clone() };
        match agent.exchange(&hello) {
            Ok(Reply::Ready) => Ok(agent),
            Ok(other) => Err(AgentError::Handshake(format!("expected ready, got {other:?}"))),
            Err(AgentError::Timeout { .. }) => Err(AgentError::Handshake("no reply to hello".into())),
            Err(e) => Err(AgentError::Handshake(e.to_string())),
        }
    }

    /// OS process id, while the process is alive.
    pub fn pid(&self) -> Option<u32> {
        self.child.as_ref().map(Child::id)
    }

    fn send(&mut self, req: &Request) -> Result<(), AgentError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| AgentError::Protocol("agent already closed".into()))?;
        writeln!(stdin, "{}", encode(req))
            .and_then(|_| stdin.flush())
            .map_err(|e| AgentError::Protocol(format!("agent input closed: {e}")))
    }

    fn recv(&mut self) -> Result<Reply, AgentError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(line) => line,
                Err(RecvTimeoutError::Timeout) => return Err(AgentError::Timeout { step: self.step }),
                Err(RecvTimeoutError::Disconnected) => return Err(AgentError::Protocol("agent process exited".into())),
            };
            if line.trim().is_empty() {
                continue;
            }
            return decode_reply(&line).map_err(|e| AgentError::Protocol(format!("bad reply {line:?}: {e}")));
        }
    }

    fn exchange(&mut self, req: &Request) -> Result<Reply, AgentError> {
        let result = self.send(req).and_then(|_| self.recv());
        if result.is_err() {
            self.kill();
        }
        result
    }

    fn kill(&mut self) {
        self.stdin = None;
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Agent for ExternalAgent {
    fn run_step(&mut self, obs: &Observation) -> Result<(AgentAction, AgentLog), AgentError> {
        self.step = obs.step;
        let req = Request::Observation {
            observation: obs.clone(),
        };
        match self.exchange(&req)? {
            Reply::Action { action, log } if action.is_finite() => Ok((action, log)),
            Reply::Action { .. } => {
                self.kill();
                Err(AgentError::Protocol("non-finite action".into()))
            }
            Reply::Error { message } => {
                self.kill();
                Err(AgentError::Internal(message))
            }
            other => {
                self.kill();
                Err(AgentError::Protocol(format!("expected action, got {other:?}")))
            }
        }
    }

    fn shutdown(&mut self) {
        if self.child.is_none() {
            return;
        }
        let _ = self.send(&Request::Shutdown);
        let _ = self.recv();
        self.stdin = None;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + self.timeout;
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Behaviour of [`serve_stdio`], for exercising failure handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubMode {
    Normal,
    /// Exit without replying once this step is reached.
    CrashAt(u64),
    /// Stop replying once this step is reached.
    HangAt(u64),
    /// Reply to observations with a line that is not JSON.
    Garbage,
    /// Never answer the hello.
    Silent,
}

impl std::str::FromStr for StubMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let step = |v: &str| v.parse::<u64>().map_err(|e| format!("{s}: {e}"));
        match s.split_once('=') {
            None if s == "normal" => Ok(Self::Normal),
            None if s == "garbage" => Ok(Self::Garbage),
            None if s == "silent" => Ok(Self::Silent),
            Some(("crash-at", v)) => Ok(Self::CrashAt(step(v)?)),
            Some(("hang-at", v)) => Ok(Self::HangAt(step(v)?)),
            _ => Err(format!("unknown stub mode {s:?}")),
        }
    }
}

/// Serve a built-in agent over the line protocol on stdin/stdout. Returns
/// after a shutdown request or end of input.
pub fn serve_stdio(agent_ref: &str, mode: StubMode) -> io::Result<()> {
    let (kind, params) = match AgentRef::parse(agent_ref) {
        Ok(AgentRef::Builtin(kind, params)) => (kind, params),
        _ => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "stub serves builtin agents only",
            ))
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut agent: Option<BuiltinAgent> = None;
    let reply = |out: &mut io::StdoutLock, r: &Reply| -> io::Result<()> {
        writeln!(out, "{}", encode(r))?;
        out.flush()
    };
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req = match decode_request(&line) {
            Ok(r) => r,
            Err(message) => {
                reply(&mut out, &Reply::Error { message })?;
                continue;
            }
        };
        match req {
            Request::Hello { context } => {
                if mode == StubMode::Silent {
                    continue;
                }
                agent = Some(BuiltinAgent::new(kind, params, context));
                reply(&mut out, &Reply::Ready)?;
            }
            Request::Observation { observation } => {
                match mode {
                    StubMode::CrashAt(n) if observation.step >= n => std::process::exit(3),
                    StubMode::HangAt(n) if observation.step >= n => loop {
                        thread::sleep(Duration::from_secs(3600));
                    },
                    StubMode::Garbage => {
                        writeln!(out, "this is not json")?;
                        out.flush()?;
                        continue;
                    }
                    _ => {}
                }
                let r = match agent.as_mut() {
                    None => Reply::Error {
                        message: "observation before hello".into(),
                    },
                    Some(a) => match a.run_step(&observation) {
                        Ok((action, log)) => Reply::Action { action, log },
                        Err(e) => Reply::Error { message: e.to_string() },
                    },
                };
                reply(&mut out, &r)?;
            }
            Request::Shutdown => {
                reply(&mut out, &Reply::Bye)?;
                return Ok(());
            }
        }
    }
    Ok(())
}
