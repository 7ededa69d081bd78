//! Out-of-process trackers speaking newline-delimited JSON over stdio.
//!
//! ```text
//! -> {"type":"init","frame":"<path-or-empty>","box":[x,y,w,h]}
//! <- {"type":"ready"}
//! -> {"type":"track","frame_id":<int>,"frame":"<path-or-empty>","prior":[x,y,w,h]}
//! <- {"type":"result","box":[x,y,w,h]}
//! -> {"type":"quit"}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{FrameRef, Tracker};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Init {
        frame: String,
        #[serde(rename = "box")]
        bbox: [f64; 4],
    },
    Track {
        frame_id: usize,
        frame: String,
        prior: [f64; 4],
    },
    Quit {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Response {
    Ready {},
    Result {
        #[serde(rename = "box")]
        bbox: [f64; 4],
    },
}

fn frame_path(frame: &FrameRef<'_>) -> String {
    frame.path.map(|p| p.display().to_string()).unwrap_or_default()
}

/// Child process driven through the JSON-lines protocol, one request at a time.
pub struct ExternalTracker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    last_elapsed: Option<f64>,
}

impl ExternalTracker {
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
            timeout,
            last_elapsed: None,
        })
    }

    /// Splits a command line on whitespace: program followed by arguments.
    pub fn from_command_line(command: &str, timeout: Duration) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::Protocol("empty external tracker command".into()))?;
        let args: Vec<String> = parts.collect();
        Self::spawn(&program, &args, timeout)
    }

    fn fail(frame: usize, message: impl Into<String>) -> Error {
        Error::Tracker {
            frame,
            message: message.into(),
        }
    }

    fn exchange(&mut self, frame: usize, request: &Request) -> Result<Response> {
        let line = serde_json::to_string(request).expect("requests serialize");
        let start = Instant::now();
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Self::fail(frame, "tracker input already closed"))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Self::fail(frame, format!("cannot write request: {e}")))?;
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(Self::fail(frame, format!("cannot read response: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Self::fail(frame, format!("no response within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Self::fail(frame, "tracker process exited")),
        };
        self.last_elapsed = Some(start.elapsed().as_secs_f64());
        serde_json::from_str(&reply).map_err(|e| Self::fail(frame, format!("malformed response {reply:?}: {e}")))
    }

    /// Sends `quit` and waits for the process to exit.
    pub fn shutdown(mut self) -> Result<()> {
        self.quit();
        self.child
            .wait()
            .map(|_| ())
            .map_err(|e| Error::Protocol(format!("waiting for tracker: {e}")))
    }

    fn quit(&mut self) {
        if let Some(mut stdin) = self.stdin.take() {
            let line = serde_json::to_string(&Request::Quit {}).expect("requests serialize");
            let _ = writeln!(stdin, "{line}");
        }
    }
}

impl Drop for ExternalTracker {
    fn drop(&mut self) {
        self.quit();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Tracker for ExternalTracker {
    fn initialize(&mut self, frame: &FrameRef<'_>, init: &BoundingBox) -> Result<()> {
        let request = Request::Init {
            frame: frame_path(frame),
            bbox: init.to_array(),
        };
        match self.exchange(frame.id, &request)? {
            Response::Ready {} => Ok(()),
            other => Err(Self::fail(frame.id, format!("expected ready, got {other:?}"))),
        }
    }

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        let request = Request::Track {
            frame_id: frame.id,
            frame: frame_path(frame),
            prior: prior.to_array(),
        };
        match self.exchange(frame.id, &request)? {
            Response::Result { bbox } => {
                let b = BoundingBox::from(bbox);
                b.validate()
                    .map_err(|_| Self::fail(frame.id, format!("invalid box {bbox:?}")))?;
                Ok(b)
            }
            other => Err(Self::fail(frame.id, format!("expected result, got {other:?}"))),
        }
    }

    fn last_elapsed(&self) -> Option<f64> {
        self.last_elapsed
    }
}

/// Runs the tracker side of the protocol until `quit` or end of input.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W, tracker: &mut dyn Tracker) -> Result<()> {
    let io = |e: std::io::Error| Error::Protocol(e.to_string());
    for line in input.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Request =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("bad request {line:?}: {e}")))?;
        let response = match request {
            Request::Init { frame, bbox } => {
                let path = std::path::PathBuf::from(&frame);
                let fr = FrameRef {
                    id: 0,
                    path: (!frame.is_empty()).then_some(path.as_path()),
                };
                tracker.initialize(&fr, &BoundingBox::from(bbox))?;
                Response::Ready {}
            }
            Request::Track { frame_id, frame, prior } => {
                let path = std::path::PathBuf::from(&frame);
                let fr = FrameRef {
                    id: frame_id,
                    path: (!frame.is_empty()).then_some(path.as_path()),
                };
                let b = tracker.track(&fr, &BoundingBox::from(prior))?;
                Response::Result { bbox: b.to_array() }
            }
            Request::Quit {} => return Ok(()),
        };
        writeln!(
            output,
            "{}",
            serde_json::to_string(&response).expect("responses serialize")
        )
        .map_err(io)?;
        output.flush().map_err(io)?;
    }
    Ok(())
}
