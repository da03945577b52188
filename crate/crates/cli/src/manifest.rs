//! Run manifests: enough to repeat a command exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::commands::{Command, Outcome, KERNEL_FORMULA};
use crate::error::{CliError, CliResult};
use crate::formats;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub elapsed_ms: u64,
    pub formats: BTreeMap<String, String>,
}

fn format_versions(cmd: &Command) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("embedding_text".into(), formats::TEXT_VERSION.into());
    m.insert("embedding_bin".into(), format!("EMBF {:#04x}", formats::BIN_VERSION));
    m.insert("mask".into(), "PGM P5 maxval 255".into());
    if matches!(cmd, Command::Simulate(_)) {
        m.insert("kernel_schedule".into(), KERNEL_FORMULA.into());
    }
    m
}

/// Directory outputs hold `manifest.json`; file outputs get a sibling
/// `<name>.manifest.json`.
pub fn manifest_path(cmd: &Command) -> Option<PathBuf> {
    let out = cmd.out_path()?;
    Some(match cmd {
        Command::Discover(_) | Command::Compare(_) => {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        }
        _ => out.join("manifest.json"),
    })
}

pub fn load(path: &Path) -> CliResult<RunManifest> {
    let bytes = formats::read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::parse(path, format!("line {}: {e}", e.line())))
}

/// Runs `cmd` and writes its manifest; a replay runs the recorded command,
/// optionally redirected, and writes a fresh manifest for it.
pub fn run(cmd: &Command) -> CliResult<(Outcome, PathBuf)> {
    if let Command::Replay(r) = cmd {
        let mut inner = load(&r.manifest)?.command;
        if matches!(inner, Command::Replay(_)) {
            return Err(CliError::Config("a manifest cannot record a replay".into()));
        }
        if let Some(out) = &r.out {
            inner.set_out_path(out.clone());
        }
        return run(&inner);
    }
    let start = Instant::now();
    let outcome = cmd.execute()?;
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.clone(),
        inputs: outcome.inputs.clone(),
        outputs: outcome.outputs.clone(),
        elapsed_ms: start.elapsed().as_millis() as u64,
        formats: format_versions(cmd),
    };
    let path = manifest_path(cmd).expect("non-replay commands have an output");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    formats::write_file(&path, json.as_bytes())?;
    Ok((outcome, path))
}
