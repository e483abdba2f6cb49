use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::splice::ChimericModel;
use super::GraftError;

/// External scorer invoked as `command... <pdb-path>`, printing `NAME VALUE` lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Program followed by fixed arguments.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Upper bound on adapter processes running at once.
    pub max_concurrent: usize,
}

impl AdapterConfig {
    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let command: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        (!command.is_empty()).then_some(Self {
            command,
            timeout: Duration::from_secs(600),
            max_concurrent: 4,
        })
    }
}

static RUNNING: (Mutex<usize>, Condvar) = (Mutex::new(0), Condvar::new());

struct Slot;

impl Slot {
    fn acquire(limit: usize) -> Self {
        let (lock, cv) = &RUNNING;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= limit.max(1) {
            n = cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Slot
    }
}

impl Drop for Slot {
    fn drop(&mut self) {
        let (lock, cv) = &RUNNING;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        cv.notify_one();
    }
}

fn parse_scores(stdout: &str) -> BTreeMap<String, f64> {
    stdout
        .lines()
        .filter_map(|line| {
            let mut it = line.split_whitespace();
            let (name, value, rest) = (it.next()?, it.next()?, it.next());
            if rest.is_some() {
                return None;
            }
            let v: f64 = value.parse().ok()?;
            v.is_finite().then(|| (name.to_string(), v))
        })
        .collect()
}

/// Runs the adapter on the model and merges the parsed scores into `model.scores`.
/// On error the model is left untouched.
pub fn external_score(model: &mut ChimericModel, config: &AdapterConfig) -> Result<BTreeMap<String, f64>, GraftError> {
    let (program, args) = config
        .command
        .split_first()
        .ok_or_else(|| GraftError::AdapterLaunchFailure("empty command".into()))?;
    let mut file = tempfile::Builder::new()
        .prefix("chimera-")
        .suffix(".pdb")
        .tempfile()
        .map_err(|e| GraftError::AdapterLaunchFailure(e.to_string()))?;
    file.write_all(model.to_pdb().as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| GraftError::AdapterLaunchFailure(e.to_string()))?;

    let _slot = Slot::acquire(config.max_concurrent);
    let mut child = Command::new(program)
        .args(args)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| GraftError::AdapterLaunchFailure(format!("{program}: {e}")))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() >= config.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(GraftError::AdapterTimeout(config.timeout));
            }
            Ok(None) => thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(GraftError::AdapterLaunchFailure(e.to_string())),
        }
    };
    let output = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(GraftError::AdapterLaunchFailure(format!(
            "{program} exited with {status}"
        )));
    }
    let scores = parse_scores(&output);
    if scores.is_empty() {
        return Err(GraftError::AdapterParseFailure(output.chars().take(200).collect()));
    }
    model.scores.extend(scores.clone());
    Ok(scores)
}
