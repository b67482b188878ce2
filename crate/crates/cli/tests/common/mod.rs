#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use precoding_cli::{main_with, Context};
use precoding_pipeline::remote::{Transport, TransportError};
use serde_json::Value;

/// Counts requests and fails every one of them.
#[derive(Default)]
pub struct Recorder {
    pub calls: AtomicUsize,
}

impl Transport for Recorder {
    fn post_json(&self, _: &str, _: &str, _: &Value, _: Duration) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Http("recorder does not answer".into()))
    }
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    /// The JSON object printed last on stdout.
    pub fn json(&self) -> Value {
        serde_json::from_str(self.stdout.lines().last().expect("some output")).expect("json summary")
    }
}

pub struct Sandbox {
    pub dir: tempfile::TempDir,
    pub env: HashMap<String, String>,
    pub recorder: Arc<Recorder>,
}

impl Sandbox {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = format!(
            "paths.transcript_dir = \"{}\"\npaths.report_dir = \"{}\"\n",
            dir.path().join("runs").display(),
            dir.path().join("reports").display()
        );
        std::fs::write(dir.path().join("config.toml"), config).unwrap();
        Self {
            dir,
            env: HashMap::new(),
            recorder: Arc::default(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("config.toml")
    }

    pub fn run(&self, args: &[&str]) -> Outcome {
        let config = self.config();
        let mut full: Vec<String> = vec![
            "agentic-precoding".into(),
            "--config".into(),
            config.display().to_string(),
        ];
        full.extend(args.iter().map(|s| s.to_string()));
        self.run_raw(&full)
    }

    pub fn run_raw(&self, args: &[String]) -> Outcome {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut ctx = Context {
            env: self.env.clone(),
            transport: self.recorder.clone(),
            stdout: &mut out,
            stderr: &mut err,
        };
        let code = main_with(args.iter().cloned(), &mut ctx);
        Outcome {
            code,
            stdout: String::from_utf8(out).unwrap(),
            stderr: String::from_utf8(err).unwrap(),
        }
    }

    pub fn requests(&self) -> usize {
        self.recorder.calls.load(Ordering::SeqCst)
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}
