//! Run directories: every file carries the config hash, and `manifest.txt`
//! lists a SHA-256 per file so two runs can be compared at a glance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::{CliError, Result};

pub struct RunDir {
    dir: PathBuf,
    command: String,
    hash: String,
    files: BTreeMap<String, String>,
    inputs: Vec<(String, String)>,
}

impl RunDir {
    /// `<output>/<command>`, created if needed, with the resolved config written.
    pub fn create(cfg: &RunConfig, command: &str) -> Result<Self> {
        let dir = cfg.output.join(command);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut run = Self {
            dir,
            command: command.to_string(),
            hash: cfg.hash(),
            files: BTreeMap::new(),
            inputs: Vec::new(),
        };
        run.text("config.txt", &cfg.canonical())?;
        Ok(run)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Record an input file's digest in the manifest.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs
            .push((role.to_string(), hex(&Sha256::digest(&bytes))));
        Ok(())
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.files
            .insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    /// A file whose writer emits its own header lines.
    pub fn raw<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> termstruct::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.put(name, buf)
    }

    /// A CSV preceded by a `# config_hash = ...` line.
    pub fn csv<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> termstruct::Result<()>,
    {
        let mut buf = format!("# config_hash = {}\n", self.hash).into_bytes();
        write(&mut buf)?;
        self.put(name, buf)
    }

    /// Key-value text with the hash as the leading comment.
    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let buf = format!("# config_hash = {}\n{body}", self.hash).into_bytes();
        self.put(name, buf)
    }

    /// Write `manifest.txt` and return the run directory.
    pub fn finish(self) -> Result<PathBuf> {
        let mut m = format!(
            "# config_hash = {}\n# command = {}\n",
            self.hash, self.command
        );
        for (role, digest) in &self.inputs {
            m.push_str(&format!("# input {role} = {digest}\n"));
        }
        for (name, digest) in &self.files {
            m.push_str(&format!("{digest}  {name}\n"));
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, m).map_err(|e| CliError::io(&path, e))?;
        Ok(self.dir)
    }
}
