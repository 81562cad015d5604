//! Bridge to objectives computed by an external program.
//!
//! Each evaluation spawns the configured command and speaks a line-delimited
//! text protocol over its standard streams:
//!
//! ```text
//! request  (stdin, one line):   <id> <r> <x_1> ... <x_d>
//! response (stdout, r lines):   <id> <f_1> ... <f_m>
//! ```
//!
//! Fields are whitespace separated; blank lines in the response are ignored.
//! All objectives must be reported in minimization orientation. The id lets a
//! caller running several evaluations concurrently match responses to
//! requests.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::DesignPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommand {
    /// Program followed by its arguments.
    pub argv: Vec<String>,
    pub n_objectives: usize,
    pub timeout_secs: f64,
}

#[derive(Debug)]
pub struct ExternalEvaluator {
    command: ExternalCommand,
    next_id: AtomicU64,
}

impl ExternalEvaluator {
    pub fn new(command: ExternalCommand) -> Result<Self> {
        if command.argv.is_empty() {
            return Err(Error::Config("external evaluator needs a command".into()));
        }
        if command.n_objectives == 0 {
            return Err(Error::Config("external evaluator needs n_objectives >= 1".into()));
        }
        if !(command.timeout_secs > 0.0) {
            return Err(Error::Config("external evaluator timeout must be positive".into()));
        }
        Ok(Self {
            command,
            next_id: AtomicU64::new(0),
        })
    }

    pub fn command(&self) -> &ExternalCommand {
        &self.command
    }

    /// Formats a request line for `point`.
    pub fn request_line(id: u64, point: &DesignPoint, r: usize) -> String {
        let mut line = format!("{id} {r}");
        for x in point.coords() {
            line.push_str(&format!(" {x:.16e}"));
        }
        line.push('\n');
        line
    }

    /// Parses the program's stdout into `r` objective vectors.
    pub fn parse_response(
        output: &str,
        id: u64,
        r: usize,
        m: usize,
    ) -> std::result::Result<Vec<Vec<f64>>, String> {
        let mut reps = Vec::with_capacity(r);
        for (lineno, line) in output.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let got_id = fields.next().unwrap_or_default();
            if got_id.parse::<u64>().ok() != Some(id) {
                return Err(format!(
                    "line {}: expected request id {id}, got `{got_id}`",
                    lineno + 1
                ));
            }
            let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| format!("line {}: {e}", lineno + 1))?;
            if values.len() != m {
                return Err(format!(
                    "line {}: expected {m} objective values, got {}",
                    lineno + 1,
                    values.len()
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(format!("line {}: non-finite objective value", lineno + 1));
            }
            reps.push(values);
        }
        if reps.len() != r {
            return Err(format!("expected {r} replication lines, got {}", reps.len()));
        }
        Ok(reps)
    }

    pub fn evaluate(&self, point: &DesignPoint, r: usize) -> Result<Vec<Vec<f64>>> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let fail = |reason: String| Error::Evaluation {
            point: point.coords().to_vec(),
            reason,
        };

        let mut child = Command::new(&self.command.argv[0])
            .args(&self.command.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("cannot spawn `{}`: {e}", self.command.argv[0])))?;

        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // a program that exits without reading is reported via its status
            let _ = stdin.write_all(Self::request_line(id, point, r).as_bytes());
        }

        let mut stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut out = String::new();
            let mut err = String::new();
            let res = stdout.read_to_string(&mut out);
            let _ = stderr.read_to_string(&mut err);
            let _ = tx.send(res.map(|_| (out, err)));
        });

        let timeout = Duration::from_secs_f64(self.command.timeout_secs);
        let (out, err) = match rx.recv_timeout(timeout) {
            Ok(Ok(pair)) => pair,
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(fail(format!("reading output: {e}")));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(fail(format!("timed out after {:.1} s", self.command.timeout_secs)));
            }
        };
        let status = child.wait().map_err(|e| fail(format!("waiting for child: {e}")))?;
        if !status.success() {
            let tail: String = err.lines().rev().take(5).collect::<Vec<_>>().join(" | ");
            return Err(fail(format!("exited with {status}: {tail}")));
        }
        Self::parse_response(&out, id, r, self.command.n_objectives).map_err(fail)
    }
}
