//! Output writers. Every artifact embeds the resolved configuration and seed;
//! the `generated_at` timestamp is the only field excluded from byte-level
//! reproducibility comparisons.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// CSV writer preloaded with the reproducibility header.
    pub fn csv(&self, name: &str, command: &str, cfg: &RunConfig) -> std::io::Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "# mpemba {command}")?;
        writeln!(w, "# generated_at = {}", unix_now())?;
        for (k, v) in cfg.flatten() {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(w)
    }

    /// JSON artifact: {config, generated_at, data} with deterministic field
    /// order from the struct definitions.
    pub fn json<T: Serialize>(
        &self,
        name: &str,
        cfg: &RunConfig,
        data: &T,
    ) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            config: &'a RunConfig,
            generated_at: u64,
            data: &'a T,
        }
        let envelope = Envelope { config: cfg, generated_at: unix_now(), data };
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, &envelope)?;
        writeln!(w)?;
        Ok(())
    }
}
