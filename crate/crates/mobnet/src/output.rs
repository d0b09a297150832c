//! Staged output files and run manifests.
//!
//! Every file of a command is written to a temporary file in the output
//! directory and only renamed into place once the whole command succeeded,
//! so a failed run leaves no partial outputs behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use tempfile::NamedTempFile;

use crate::config::{RunConfig, MANIFEST_PREFIX};

pub struct Staged {
    dir: PathBuf,
    files: Vec<(String, NamedTempFile)>,
}

impl Staged {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>) -> Result<()> {
        if self.files.iter().any(|(n, _)| n == name) {
            bail!("output {name} written twice");
        }
        let mut tmp = NamedTempFile::new_in(&self.dir).with_context(|| format!("cannot stage {name}"))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            body(&mut w).with_context(|| format!("writing {name}"))?;
            w.flush()?;
        }
        self.files.push((name.to_string(), tmp));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Moves every staged file into place.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for (name, tmp) in self.files {
            let target = self.dir.join(&name);
            tmp.persist(&target)
                .map_err(|e| anyhow!("cannot move {} into place: {}", target.display(), e.error))?;
            out.push(target);
        }
        Ok(out)
    }
}

/// Config plus run metadata. Input paths are made absolute so the manifest
/// can be replayed from any working directory.
pub fn manifest_text(command: &str, cfg: &RunConfig, outputs: &[String], started: SystemTime, wall: Duration) -> Result<String> {
    let mut cfg = cfg.clone();
    for p in [
        &mut cfg.od_path,
        &mut cfg.income_path,
        &mut cfg.centroids_path,
        &mut cfg.features_path,
        &mut cfg.universe_path,
        &mut cfg.output_dir,
    ]
    .into_iter()
    .flatten()
    {
        *p = std::path::absolute(&*p)?;
    }
    let since = started.duration_since(UNIX_EPOCH).unwrap_or_default();
    let mut text = String::from("# mobnet run manifest; replay with `mobnet rerun <this file>`\n");
    let meta = [
        ("command", command.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("seed", cfg.seed.to_string()),
        ("started_unix_s", since.as_secs().to_string()),
        ("wall_time_s", format!("{:.3}", wall.as_secs_f64())),
        ("outputs", outputs.join(",")),
    ];
    for (k, v) in meta {
        text.push_str(&format!("{MANIFEST_PREFIX}{k} = {v}\n"));
    }
    text.push_str(&cfg.render());
    Ok(text)
}

pub fn manifest_name(command: &str) -> String {
    format!("{command}.manifest.conf")
}

/// The `manifest.command` entry of a manifest.
pub fn manifest_command(text: &str) -> Result<String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix(MANIFEST_PREFIX))
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "command")
        .map(|(_, v)| v.trim().to_string())
        .ok_or_else(|| anyhow!("manifest has no `manifest.command` entry"))
}
