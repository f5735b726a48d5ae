//! Execution context shared by all commands: buffered outputs, input
//! hashes, and the manifest written next to the results.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_bytes, sha256_file, InputHash, OutputHash, RunManifest, TOOL, VERSION};

pub trait Step: Serialize + DeserializeOwned {
    const NAME: &'static str;

    /// Fills defaults, resolves input paths and validates. Must not write
    /// anything; idempotent so that recorded configs can be re-prepared.
    fn prepare(&mut self) -> CliResult<()>;

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()>;
}

enum Output {
    Buffered(Vec<u8>),
    /// Written directly by the command (multi-file writers).
    OnDisk,
}

pub struct RunCtx {
    out_dir: PathBuf,
    outputs: Vec<(String, Output)>,
    inputs: Vec<InputHash>,
    summary: Map<String, Value>,
    failure: Option<String>,
}

impl RunCtx {
    pub fn new(out_dir: PathBuf) -> Self {
        RunCtx {
            out_dir,
            outputs: Vec::new(),
            inputs: Vec::new(),
            summary: Map::new(),
            failure: None,
        }
    }

    pub fn emit(&mut self, name: impl AsRef<Path>, bytes: impl Into<Vec<u8>>) {
        self.outputs
            .push((rel_name(name.as_ref()), Output::Buffered(bytes.into())));
    }

    pub fn emit_json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) {
        let text = serde_json::to_string_pretty(value).expect("serialisable output") + "\n";
        self.emit(name, text);
    }

    /// Absolute path for a file the command writes itself; call
    /// [`RunCtx::written`] afterwards.
    pub fn path_for(&self, name: impl AsRef<Path>) -> CliResult<PathBuf> {
        let p = self.out_dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
        }
        Ok(p)
    }

    pub fn written(&mut self, abs: &Path) {
        let rel = abs.strip_prefix(&self.out_dir).unwrap_or(abs);
        self.outputs.push((rel_name(rel), Output::OnDisk));
    }

    pub fn input_file(&mut self, path: &Path) -> CliResult<()> {
        if !self.inputs.iter().any(|i| i.path == path) {
            self.inputs.push(InputHash::file(path)?);
        }
        Ok(())
    }

    pub fn input_dir(&mut self, root: &Path, files: Vec<String>) -> CliResult<()> {
        self.inputs.push(InputHash::directory(root, files)?);
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("serialisable summary"));
    }

    /// Marks the run as numerically failed; outputs are still written and
    /// flagged in the manifest, and the process exits with code 4.
    pub fn not_converged(&mut self, message: impl Into<String>) {
        self.failure = Some(message.into());
    }
}

fn rel_name(p: &Path) -> String {
    p.components()
        .filter_map(|c| match c {
            std::path::Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

pub struct Invocation<'a> {
    pub command: &'a str,
    pub argv: Vec<String>,
    pub out_dir: PathBuf,
    pub threads: usize,
}

pub struct Completed {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

/// Validates, runs and persists one command.
pub fn execute<S: Step>(mut step: S, inv: Invocation<'_>) -> CliResult<Completed> {
    let started = Instant::now();
    step.prepare()?;
    let config = serde_json::to_value(&step).expect("serialisable config");
    let mut ctx = RunCtx::new(inv.out_dir.clone());
    step.run(&mut ctx)?;

    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", ctx.out_dir.display())))?;
    let mut outputs = Vec::new();
    for (name, out) in &ctx.outputs {
        let path = ctx.out_dir.join(name);
        let sha256 = match out {
            Output::Buffered(bytes) => {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
                }
                std::fs::write(&path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                sha256_bytes(bytes)
            }
            Output::OnDisk => sha256_file(&path)?,
        };
        outputs.push(OutputHash {
            path: name.clone(),
            sha256,
        });
    }
    let primary = outputs
        .first()
        .map(|o| o.path.clone())
        .unwrap_or_else(|| S::NAME.replace(' ', "-"));
    let stem = primary.rsplit_once('.').map(|(s, _)| s.to_string()).unwrap_or(primary);
    let manifest = RunManifest {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        command: inv.command.to_string(),
        argv: inv.argv,
        out_dir: ctx.out_dir.clone(),
        config,
        inputs: ctx.inputs,
        outputs,
        status: if ctx.failure.is_some() { "not_converged" } else { "ok" }.to_string(),
        note: ctx.failure.clone(),
        threads: inv.threads,
        duration_secs: started.elapsed().as_secs_f64(),
        summary: ctx.summary,
    };
    let manifest_path = ctx.out_dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&manifest_path, manifest.to_json())
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    if let Some(msg) = ctx.failure {
        return Err(CliError::NonConvergence(format!(
            "{msg} (outputs flagged in {})",
            manifest_path.display()
        )));
    }
    Ok(Completed {
        manifest_path,
        manifest,
    })
}
