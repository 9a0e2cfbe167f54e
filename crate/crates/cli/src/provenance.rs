use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Everything needed to re-run a command: the arguments as typed, their parsed values and
/// the library version. No clock or host information, so reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct Record<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub argv: &'a [String],
    pub config: &'a C,
    pub outputs: Vec<String>,
}

pub fn path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

/// Write `<primary>.provenance.json` next to the first output.
pub fn write<C: Serialize>(argv: &[String], config: &C, outputs: &[&Path]) -> anyhow::Result<()> {
    let primary = outputs.first().context("command produced no outputs")?;
    let record = Record {
        tool: "fairflip",
        version: fairflip_core::VERSION,
        argv,
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = path_for(primary);
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing provenance {}", path.display()))
}
