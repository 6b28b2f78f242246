//! Output plumbing: provenance headers, digests, atomic writes and the
//! readers for files this tool produced.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use elasticrank::{Error, Result};

pub const TOOL: &str = concat!("elasticrank ", env!("CARGO_PKG_VERSION"));

/// Fixed 17-significant-digit rendering used for every float in CSV/text output.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance block written at the top of every output file.
#[derive(Debug, Clone, Default)]
pub struct Header {
    pub command: String,
    pub config: BTreeMap<String, String>,
    /// Input role -> sha256 of the file.
    pub inputs: BTreeMap<String, String>,
}

impl Header {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        self.inputs.insert(role.to_string(), sha256_file(path)?);
        Ok(self)
    }

    fn body_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("tool={TOOL}"), format!("command={}", self.command)];
        lines.extend(self.config.iter().map(|(k, v)| format!("config.{k}={v}")));
        lines.extend(self.inputs.iter().map(|(k, v)| format!("input.{k}.sha256={v}")));
        lines
    }

    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.body_lines() {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// `# key=value` lines, ending with the config hash.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.body_lines() {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!("# config_hash={}\n", self.config_hash()));
        out
    }

    pub fn as_map(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self
            .body_lines()
            .into_iter()
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        m.insert("config_hash".into(), self.config_hash());
        m
    }
}

/// Reads the leading `# key=value` lines of a file written by this tool.
pub fn read_header(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = fs::File::open(path)?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once('=') {
            out.insert(k.to_string(), v.to_string());
        }
    }
    Ok(out)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// One line of a ranked-lists file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListRecord {
    pub user: String,
    pub items: Vec<String>,
    pub original: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub underfilled: bool,
}

pub fn read_list_records(path: &Path) -> Result<Vec<ListRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let rec: ListRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx as u64 + 1,
            message: e.to_string(),
        })?;
        if rec.items.len() != rec.original.len() || rec.items.len() != rec.adjusted.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx as u64 + 1,
                message: "items, original and adjusted differ in length".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// `(group name, utility)` rows of a utilities file.
pub fn read_utilities(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = fs::File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let parse = |line: u64, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "utility")
        .ok_or_else(|| parse(1, "missing `utility` column".into()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let value: f64 = rec
            .get(col)
            .ok_or_else(|| parse(line, "short row".into()))?
            .parse()
            .map_err(|_| parse(line, "utility is not a number".into()))?;
        out.push((rec.get(0).unwrap_or_default().to_string(), value));
    }
    Ok(out)
}
