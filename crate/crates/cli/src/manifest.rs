use std::path::{Path, PathBuf};

use serde_json::json;

use crate::args::Cli;
use crate::CliResult;

/// Record of one invocation: enough to rerun it and find its outputs.
pub struct Run {
    command: String,
    argv: Vec<String>,
    seed: u64,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(cli: &Cli) -> Self {
        let argv: Vec<String> = std::env::args().collect();
        let command = argv
            .iter()
            .skip(1)
            .find(|a| !a.starts_with('-') && is_command(a))
            .cloned()
            .unwrap_or_default();
        Self {
            command,
            argv,
            seed: cli.global.seed,
            outputs: Vec::new(),
        }
    }

    /// Path of `name` inside the output directory, registered as an output.
    pub fn output(&mut self, dir: &Path, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        dir.join(name)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let manifest = json!({
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "outputs": self.outputs,
        });
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }
}

fn is_command(a: &str) -> bool {
    matches!(
        a,
        "gen"
            | "scheme"
            | "sample"
            | "spectrum"
            | "casestudy"
            | "preanalysis"
            | "train"
            | "probe"
            | "verify"
    )
}
