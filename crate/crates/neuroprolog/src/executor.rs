//! Sandboxed Prolog execution: each program runs in its own subprocess and
//! temp workspace under a hard wall-clock timeout, with stdout, stderr, and
//! the exit code captured verbatim.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::core::{PrologProgram, RawExecution};

/// Default wall-clock budget per execution, matching the dataset QA bound of
/// five seconds; reused for evaluation runs for consistency.
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    pub interpreter_path: PathBuf,
    pub timeout: Duration,
    pub workdir_root: PathBuf,
}

impl ExecutorConfig {
    pub fn new(interpreter_path: impl Into<PathBuf>) -> Self {
        ExecutorConfig {
            interpreter_path: interpreter_path.into(),
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            workdir_root: std::env::temp_dir(),
        }
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout = Duration::from_millis(ms);
        self
    }
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("Prolog interpreter not found or not executable: {path} ({detail})")]
    InterpreterMissing { path: String, detail: String },
    #[error("failed to launch interpreter: {0}")]
    SpawnFailure(String),
}

/// Abstract program runner. The subprocess-backed implementation is
/// [`SwiplExecutor`]; [`ScriptedExecutor`] replays canned results for
/// hermetic simulations.
pub trait ProgramExecutor: Send + Sync {
    fn execute(&self, program: &PrologProgram) -> Result<RawExecution, ExecutorError> {
        self.execute_with_aux(program, &[])
    }

    /// Run `program` with additional files placed beside it in the same
    /// workspace (for drivers that consult a sibling file).
    fn execute_with_aux(
        &self,
        program: &PrologProgram,
        aux_files: &[(&str, &str)],
    ) -> Result<RawExecution, ExecutorError>;
}

/// Runs programs through a SWI-Prolog executable: quiet invocation with
/// `--on-error=status` so interpreter errors surface as a nonzero exit.
pub struct SwiplExecutor {
    cfg: ExecutorConfig,
    version: String,
}

impl SwiplExecutor {
    /// Verifies the interpreter responds to `--version` before accepting the
    /// configuration.
    pub fn new(mut cfg: ExecutorConfig) -> Result<Self, ExecutorError> {
        let version = check_interpreter(&cfg)?;
        // A relative path would re-resolve against each program's temp
        // workspace once the child chdirs there; pin it now. Bare names stay
        // untouched for PATH lookup.
        if cfg.interpreter_path.components().count() > 1 {
            if let Ok(absolute) = cfg.interpreter_path.canonicalize() {
                cfg.interpreter_path = absolute;
            }
        }
        Ok(SwiplExecutor { cfg, version })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.cfg
    }
}

/// Returns the interpreter's version banner, or `InterpreterMissing` when the
/// configured path cannot be launched.
pub fn check_interpreter(cfg: &ExecutorConfig) -> Result<String, ExecutorError> {
    let path = cfg.interpreter_path.display().to_string();
    let output = Command::new(&cfg.interpreter_path)
        .arg("--version")
        .stdin(Stdio::null())
        .output()
        .map_err(|e| ExecutorError::InterpreterMissing {
            path: path.clone(),
            detail: e.to_string(),
        })?;
    let banner = String::from_utf8_lossy(&output.stdout).trim().to_string();
    if !output.status.success() || banner.is_empty() {
        return Err(ExecutorError::InterpreterMissing {
            path,
            detail: format!(
                "--version exited with {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    Ok(banner)
}

impl ProgramExecutor for SwiplExecutor {
    fn execute_with_aux(
        &self,
        program: &PrologProgram,
        aux_files: &[(&str, &str)],
    ) -> Result<RawExecution, ExecutorError> {
        let workspace = tempfile::Builder::new()
            .prefix("neuroprolog-")
            .tempdir_in(&self.cfg.workdir_root)
            .map_err(|e| ExecutorError::SpawnFailure(format!("workspace creation: {e}")))?;
        let program_path = workspace.path().join("program.pl");
        std::fs::write(&program_path, &program.source)
            .map_err(|e| ExecutorError::SpawnFailure(format!("writing program: {e}")))?;
        for (name, contents) in aux_files {
            std::fs::write(workspace.path().join(name), contents)
                .map_err(|e| ExecutorError::SpawnFailure(format!("writing {name}: {e}")))?;
        }

        let mut command = Command::new(&self.cfg.interpreter_path);
        command
            .arg("-q")
            .arg("--on-error=status")
            .arg("program.pl")
            .current_dir(workspace.path())
            .env_clear()
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            command.env("PATH", path);
        }
        // Give the child its own process group so a timeout kill reaps any
        // grandchildren too.
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            unsafe {
                command.pre_exec(|| {
                    libc::setsid();
                    Ok(())
                });
            }
        }

        let start = Instant::now();
        let child = command.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                ExecutorError::InterpreterMissing {
                    path: self.cfg.interpreter_path.display().to_string(),
                    detail: e.to_string(),
                }
            }
            _ => ExecutorError::SpawnFailure(e.to_string()),
        })?;
        Ok(supervise(child, start, self.cfg.timeout))
    }
}

/// Waits for the child under the timeout, draining pipes from reader threads
/// to avoid back-pressure deadlocks.
fn supervise(mut child: Child, start: Instant, timeout: Duration) -> RawExecution {
    let stdout_handle = drain_thread(child.stdout.take());
    let stderr_handle = drain_thread(child.stderr.take());
    let pid = child.id() as i32;

    let mut timed_out = false;
    let exit_status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if start.elapsed() >= timeout {
                    timed_out = true;
                    kill_process_group(pid);
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(_) => {
                let _ = child.wait();
                break None;
            }
        }
    };

    let stdout = stdout_handle.join().unwrap_or_default();
    let stderr = stderr_handle.join().unwrap_or_default();
    let elapsed = start.elapsed();
    let duration_ms = if timed_out {
        elapsed.as_millis().max(timeout.as_millis()) as u64
    } else {
        elapsed.as_millis() as u64
    };
    RawExecution {
        stdout,
        stderr,
        exit_code: if timed_out {
            None
        } else {
            exit_status.and_then(|s| s.code())
        },
        duration_ms,
        timed_out,
    }
}

fn drain_thread<R: Read + Send + 'static>(
    source: Option<R>,
) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut reader) = source {
            let _ = reader.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_process_group(pid: i32) {
    #[cfg(unix)]
    unsafe {
        // The child called setsid, so its pid doubles as the group id.
        libc::killpg(pid, libc::SIGKILL);
    }
    #[cfg(not(unix))]
    let _ = pid;
}

/// Deterministic in-memory executor: maps program source text to a canned
/// [`RawExecution`]. Used for hermetic pipeline simulations where subprocess
/// latency or nondeterministic durations are unwanted.
#[derive(Default)]
pub struct ScriptedExecutor {
    results: std::collections::HashMap<String, RawExecution>,
}

impl ScriptedExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, program_source: impl Into<String>, result: RawExecution) {
        self.results.insert(program_source.into(), result);
    }

    /// Convenience: a clean run printing `stdout_line`.
    pub fn insert_success(&mut self, program_source: impl Into<String>, stdout_line: &str) {
        self.insert(
            program_source,
            RawExecution {
                stdout: format!("{stdout_line}\n"),
                stderr: String::new(),
                exit_code: Some(0),
                duration_ms: 0,
                timed_out: false,
            },
        );
    }

    /// Convenience: a failed run with the given stderr text.
    pub fn insert_error(&mut self, program_source: impl Into<String>, stderr: &str) {
        self.insert(
            program_source,
            RawExecution {
                stdout: String::new(),
                stderr: stderr.to_string(),
                exit_code: Some(1),
                duration_ms: 0,
                timed_out: false,
            },
        );
    }
}

impl ProgramExecutor for ScriptedExecutor {
    fn execute_with_aux(
        &self,
        program: &PrologProgram,
        _aux_files: &[(&str, &str)],
    ) -> Result<RawExecution, ExecutorError> {
        match self.results.get(&program.source) {
            Some(result) => Ok(result.clone()),
            None => Err(ExecutorError::SpawnFailure(format!(
                "no scripted execution for program starting {:?}",
                program.source.lines().next().unwrap_or("")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_interpreter_is_reported() {
        let cfg = ExecutorConfig::new("/nonexistent/swipl");
        match check_interpreter(&cfg) {
            Err(ExecutorError::InterpreterMissing { path, .. }) => {
                assert!(path.contains("/nonexistent/swipl"));
            }
            other => panic!("expected InterpreterMissing, got {other:?}"),
        }
    }

    #[test]
    fn non_executable_file_is_reported_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-binary");
        std::fs::write(&path, "plain text").unwrap();
        let cfg = ExecutorConfig::new(&path);
        assert!(matches!(
            check_interpreter(&cfg),
            Err(ExecutorError::InterpreterMissing { .. })
        ));
    }

    #[test]
    fn scripted_executor_replays_and_misses() {
        let mut exec = ScriptedExecutor::new();
        exec.insert_success("p1", "42");
        let program = PrologProgram {
            source: "p1".into(),
            extracted_from: "p1".into(),
        };
        let run = exec.execute(&program).unwrap();
        assert_eq!(run.stdout, "42\n");
        assert!(run.succeeded());

        let unknown = PrologProgram {
            source: "p2".into(),
            extracted_from: "p2".into(),
        };
        assert!(exec.execute(&unknown).is_err());
    }
}
