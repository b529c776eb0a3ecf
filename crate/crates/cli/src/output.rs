//! Artifact writing: atomic replace, `%.17g` CSV, pretty JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use nonlocal_core::linalg::format_g17;

pub struct OutDir {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Write through a temporary file in the same directory, then rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| e.error)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// CSV builder with a fixed header.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    /// Row of leading text cells followed by numbers.
    pub fn row(&mut self, labels: &[&str], values: &[f64]) {
        debug_assert_eq!(labels.len() + values.len(), self.width);
        let cells: Vec<String> = labels
            .iter()
            .map(|s| s.to_string())
            .chain(values.iter().map(|v| format_g17(*v)))
            .collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// JSON number, or a string for non-finite values.
pub fn num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::json!(format_g17(x))
    }
}

pub fn nums(xs: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(xs.iter().map(|x| num(*x)).collect())
}
