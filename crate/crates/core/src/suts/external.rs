//! External SUTs: a child process speaking one JSON object per line.
//!
//! Request:  `{"id": n, "task": "classify"|"detect", "width": w, "height": h, "pixels_b64": <RGB8>}`
//! Reply:    `{"id": n, "probs": [..]}` or `{"id": n, "points": [[x, y, conf], ..]}`
//!
//! The process is spawned lazily, reused across requests and respawned after
//! it dies, times out or breaks the protocol. Requests are serialized through
//! a mutex, so one process never sees two requests at once.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{InterestPoint, SutError, SutOutput, SutTask};
use crate::image::ImageBuffer;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug)]
struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Running {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Debug, Default)]
struct State {
    proc: Option<Running>,
    next_id: u64,
}

#[derive(Debug)]
pub struct ExternalSut {
    pub command: Vec<String>,
    pub timeout: Duration,
    state: Mutex<State>,
}

impl ExternalSut {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self, SutError> {
        if command.is_empty() {
            return Err(SutError::Config("external SUT command is empty".into()));
        }
        Ok(Self { command, timeout, state: Mutex::new(State::default()) })
    }

    fn spawn(&self) -> Result<Running, SutError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SutError::SutCrashed(format!("cannot start {:?}: {e}", self.command[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Running { child, stdin, lines })
    }

    /// Number of requests issued so far (the next request id).
    pub fn requests_sent(&self) -> u64 {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).next_id
    }

    pub(crate) fn request(&self, task: SutTask, image: &ImageBuffer) -> Result<SutOutput, SutError> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let id = state.next_id;
        state.next_id += 1;
        let proc = match state.proc.take() {
            Some(mut p) => {
                if matches!(p.child.try_wait(), Ok(None)) {
                    p
                } else {
                    p.kill();
                    self.spawn()?
                }
            }
            None => self.spawn()?,
        };
        match self.exchange(proc, id, task, image) {
            Ok((out, proc)) => {
                state.proc = Some(proc);
                Ok(out)
            }
            Err(e) => Err(e),
        }
    }

    /// One round trip. On any failure the process is killed, so the next
    /// request starts from a fresh one.
    fn exchange(
        &self,
        mut proc: Running,
        id: u64,
        task: SutTask,
        image: &ImageBuffer,
    ) -> Result<(SutOutput, Running), SutError> {
        let req = json!({
            "id": id,
            "task": task.as_str(),
            "width": image.width,
            "height": image.height,
            "pixels_b64": base64::engine::general_purpose::STANDARD.encode(image.to_rgb8()),
        });
        let mut line = req.to_string();
        line.push('\n');
        if let Err(e) = proc.stdin.write_all(line.as_bytes()).and_then(|_| proc.stdin.flush()) {
            proc.kill();
            return Err(SutError::SutCrashed(format!("write failed: {e}")));
        }
        let reply = match proc.lines.recv_timeout(self.timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => {
                proc.kill();
                return Err(SutError::SutCrashed(format!("read failed: {e}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                proc.kill();
                return Err(SutError::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                proc.kill();
                return Err(SutError::SutCrashed("process exited".into()));
            }
        };
        match parse_reply(&reply, id, task) {
            Ok(out) => Ok((out, proc)),
            Err(msg) => {
                proc.kill();
                Err(SutError::SutCrashed(msg))
            }
        }
    }
}

impl Drop for ExternalSut {
    fn drop(&mut self) {
        if let Some(p) = self.state.get_mut().unwrap_or_else(|e| e.into_inner()).proc.take() {
            p.kill();
        }
    }
}

fn parse_reply(line: &str, id: u64, task: SutTask) -> Result<SutOutput, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("malformed reply: {e}"))?;
    if v.get("id").and_then(Value::as_u64) != Some(id) {
        return Err(format!("reply id does not match request {id}"));
    }
    match task {
        SutTask::Classify => {
            let probs = v
                .get("probs")
                .and_then(Value::as_array)
                .ok_or("reply lacks \"probs\"")?
                .iter()
                .map(|p| p.as_f64().ok_or_else(|| "non-numeric probability".to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SutOutput::Classification { probs })
        }
        SutTask::Detect => {
            let points = v
                .get("points")
                .and_then(Value::as_array)
                .ok_or("reply lacks \"points\"")?
                .iter()
                .map(|p| {
                    let a = p.as_array().filter(|a| a.len() == 3).ok_or("points must be [x, y, conf]")?;
                    let n: Vec<f64> = a.iter().filter_map(Value::as_f64).collect();
                    if n.len() != 3 {
                        return Err("non-numeric point".to_string());
                    }
                    Ok(InterestPoint { x: n[0], y: n[1], confidence: n[2] })
                })
                .collect::<Result<Vec<_>, String>>()?;
            Ok(SutOutput::InterestPoints { points })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_replies() {
        assert_eq!(
            parse_reply(r#"{"id": 3, "probs": [0.25, 0.75]}"#, 3, SutTask::Classify).unwrap(),
            SutOutput::Classification { probs: vec![0.25, 0.75] }
        );
        let SutOutput::InterestPoints { points } =
            parse_reply(r#"{"id": 0, "points": [[1, 2, 0.5]]}"#, 0, SutTask::Detect).unwrap()
        else {
            panic!()
        };
        assert_eq!(points, [InterestPoint { x: 1.0, y: 2.0, confidence: 0.5 }]);
    }

    #[test]
    fn rejects_bad_replies() {
        assert!(parse_reply("not json", 0, SutTask::Classify).is_err());
        assert!(parse_reply(r#"{"id": 1, "probs": [1.0]}"#, 0, SutTask::Classify).is_err());
        assert!(parse_reply(r#"{"id": 0, "points": [[1, 2]]}"#, 0, SutTask::Detect).is_err());
        assert!(parse_reply(r#"{"id": 0, "probs": [1.0]}"#, 0, SutTask::Detect).is_err());
    }

    #[test]
    fn missing_binary_is_a_crash() {
        let ext = ExternalSut::new(vec!["/nonexistent/sut".into()], Duration::from_secs(1)).unwrap();
        let img = ImageBuffer::filled(2, 2, [0.0; 3], crate::image::Provenance::Real);
        assert!(matches!(ext.request(SutTask::Classify, &img), Err(SutError::SutCrashed(_))));
    }
}
