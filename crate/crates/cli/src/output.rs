//! Output files. Each starts with a comment block holding the subcommand, the
//! root seed and the resolved config, so `--config <output file>` reruns it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

pub const CONFIG_PREFIX: &str = "# config: ";

pub fn header_block(command: &str, config: &ExperimentConfig) -> Result<String> {
    Ok(format!("# swmix {command}\n# seed: {}\n{CONFIG_PREFIX}{}\n", config.seed, serde_json::to_string(config)?))
}

/// Shortest round-trip text for a CSV cell; exponent form for tiny values.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// An output file under construction.
pub struct OutputFile {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl OutputFile {
    /// Creates `dir/name` (and `dir`) and writes the header block.
    pub fn create(dir: &Path, name: &str, command: &str, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = OutputFile { path, writer: BufWriter::new(file) };
        out.writer.write_all(header_block(command, config)?.as_bytes())?;
        Ok(out)
    }

    pub fn line(&mut self, text: impl AsRef<str>) -> Result<()> {
        writeln!(self.writer, "{}", text.as_ref()).with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.writer
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().with_context(|| format!("writing {}", self.path.display()))?;
        Ok(self.path)
    }
}
