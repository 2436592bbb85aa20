//! Output files. Every file starts with the run's provenance: a
//! `provenance` field in JSON, a first line in JSONL, a `#` comment in CSV
//! and a `//` comment in DOT.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Command;
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: Command, seed: Option<u64>) -> Provenance {
        Provenance {
            tool: "mcmlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed,
        }
    }

    pub fn comment(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "{} {} {} seed={seed}",
            self.tool,
            self.version,
            self.command.name()
        )
    }
}

/// Writes into one directory and remembers what was written.
pub struct OutDir {
    pub dir: PathBuf,
    pub pretty: bool,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: PathBuf, pretty: bool) -> Result<OutDir> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        Ok(OutDir {
            dir,
            pretty,
            written: vec![],
        })
    }

    fn put(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = if self.pretty {
            serde_json::to_string_pretty(value)?
        } else {
            serde_json::to_string(value)?
        };
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Header line `{"provenance": ...}`, then one line per record.
    pub fn jsonl<I: IntoIterator<Item = String>>(
        &mut self,
        name: &str,
        prov: &Provenance,
        lines: I,
    ) -> Result<PathBuf> {
        let mut text = serde_json::to_string(&serde_json::json!({ "provenance": prov }))?;
        text.push('\n');
        for l in lines {
            text.push_str(&l);
            text.push('\n');
        }
        self.put(name, text.as_bytes())
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, prov: &Provenance, rows: &[R]) -> Result<PathBuf> {
        let mut buf = format!("# {}\n", prov.comment()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| CliError::Io(self.dir.join(name), e))?;
        }
        self.put(name, &buf)
    }

    pub fn dot(&mut self, name: &str, prov: &Provenance, graph: &str) -> Result<PathBuf> {
        self.put(name, format!("// {}\n{graph}", prov.comment()).as_bytes())
    }
}

/// Reads a CSV written by [`OutDir::csv`], skipping the provenance line.
pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
