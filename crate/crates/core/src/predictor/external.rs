//! Child-process predictor speaking the `RGBB` batch protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{wire, FrameInput, PredictError, Predictor};

/// Environment variable holding the per-batch reply timeout in milliseconds.
pub const TIMEOUT_ENV: &str = "XPLMARK_PREDICTOR_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 120_000;

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

/// A persistent child process. Requests are serialized; each batch is split
/// into chunks of at most `batch_size` frames.
pub struct CommandPredictor {
    session: Mutex<Session>,
    batch_size: usize,
    timeout: Duration,
}

impl CommandPredictor {
    /// Spawns `argv` with the timeout taken from [`TIMEOUT_ENV`].
    pub fn spawn(argv: &[String], batch_size: usize) -> Result<Self, PredictError> {
        let ms = match std::env::var(TIMEOUT_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| PredictError::InvalidSpec(format!("{TIMEOUT_ENV}=`{v}` is not an integer")))?,
            Err(_) => DEFAULT_TIMEOUT_MS,
        };
        Self::spawn_with_timeout(argv, batch_size, Duration::from_millis(ms))
    }

    pub fn spawn_with_timeout(argv: &[String], batch_size: usize, timeout: Duration) -> Result<Self, PredictError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| PredictError::InvalidSpec("empty command".into()))?;
        if batch_size == 0 {
            return Err(PredictError::InvalidSpec("batch size must be >= 1".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PredictError::Protocol(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(CommandPredictor {
            session: Mutex::new(Session {
                child,
                stdin,
                lines: rx,
            }),
            batch_size,
            timeout,
        })
    }

    fn run_chunk(&self, session: &mut Session, frames: &[&crate::maskio::RgbFrame]) -> Result<Vec<f64>, PredictError> {
        let bytes = wire::encode_batch(frames)?;
        let stdin = session
            .stdin
            .as_mut()
            .ok_or_else(|| PredictError::Protocol("predictor stdin closed".into()))?;
        stdin
            .write_all(&bytes)
            .and_then(|_| stdin.flush())
            .map_err(|e| PredictError::Protocol(format!("writing batch: {e}")))?;
        let deadline = Instant::now() + self.timeout;
        let mut scores = Vec::with_capacity(frames.len());
        while scores.len() < frames.len() {
            let left = deadline.saturating_duration_since(Instant::now());
            match session.lines.recv_timeout(left) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => scores.push(wire::parse_score_line(&line)?),
                Ok(Err(e)) => return Err(PredictError::Protocol(format!("reading reply: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(PredictError::Timeout(self.timeout.as_millis() as u64)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(PredictError::Protocol(format!(
                        "predictor exited after {} of {} scores",
                        scores.len(),
                        frames.len()
                    )))
                }
            }
        }
        Ok(scores)
    }
}

impl Predictor for CommandPredictor {
    fn predict_frames(&self, batch: &[FrameInput<'_>]) -> Result<Vec<f64>, PredictError> {
        let mut session = self
            .session
            .lock()
            .map_err(|_| PredictError::Protocol("predictor session poisoned".into()))?;
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.batch_size) {
            let frames: Vec<_> = chunk.iter().map(|i| i.frame).collect();
            out.extend(self.run_chunk(&mut session, &frames)?);
        }
        Ok(out)
    }
}

impl Drop for CommandPredictor {
    fn drop(&mut self) {
        if let Ok(session) = self.session.get_mut() {
            // closing stdin lets a well-behaved child exit on its own
            session.stdin.take();
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = session.child.try_wait() {
                    return;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            let _ = session.child.kill();
            let _ = session.child.wait();
        }
    }
}
