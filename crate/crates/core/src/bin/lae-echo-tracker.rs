//! Minimal external tracker for smoke-testing the line protocol.
//!
//! Answers every `track` request with its prior shifted by `--shift DX,DY`.
//! `--exit-after N` exits without answering the (N+1)-th track request;
//! `--garbage` answers every request with a line that is not JSON.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use lae_core::trackers::{serve, FrameRef, Tracker};
use lae_core::{BoundingBox, Error, Result};

struct Shift {
    dx: f64,
    dy: f64,
    remaining: Option<usize>,
}

impl Tracker for Shift {
    fn initialize(&mut self, _frame: &FrameRef<'_>, _init: &BoundingBox) -> Result<()> {
        Ok(())
    }

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        match &mut self.remaining {
            Some(0) => {
                return Err(Error::Tracker {
                    frame: frame.id,
                    message: "exiting as requested".into(),
                })
            }
            Some(n) => *n -= 1,
            None => {}
        }
        Ok(prior.translate(self.dx, self.dy))
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("lae-echo-tracker: {msg}\nusage: lae-echo-tracker [--shift DX,DY] [--exit-after N] [--garbage]");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let mut tracker = Shift {
        dx: 0.0,
        dy: 0.0,
        remaining: None,
    };
    let mut garbage = false;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--garbage" => garbage = true,
            "--shift" => {
                let Some((dx, dy)) = args.next().and_then(|v| {
                    let (a, b) = v.split_once(',')?;
                    Some((a.parse().ok()?, b.parse().ok()?))
                }) else {
                    return usage("--shift needs DX,DY");
                };
                tracker.dx = dx;
                tracker.dy = dy;
            }
            "--exit-after" => {
                let Some(n) = args.next().and_then(|v| v.parse().ok()) else {
                    return usage("--exit-after needs a count");
                };
                tracker.remaining = Some(n);
            }
            other => return usage(&format!("unknown argument {other:?}")),
        }
    }

    let stdin = io::stdin().lock();
    let mut stdout = io::stdout().lock();
    if garbage {
        for _ in stdin.lines() {
            if writeln!(stdout, "this is not json")
                .and_then(|_| stdout.flush())
                .is_err()
            {
                break;
            }
        }
        return ExitCode::SUCCESS;
    }
    match serve(stdin, stdout, &mut tracker) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lae-echo-tracker: {e}");
            ExitCode::FAILURE
        }
    }
}
