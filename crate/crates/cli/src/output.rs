use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use stochbt::system::write_atomic;
use stochbt::Matrix;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| num(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sigma_csv(sigma: &[f64]) -> String {
    let mut out = String::from("index,sigma\n");
    for (i, s) in sigma.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, num(*s));
    }
    out
}

/// Output directory plus the resolved configuration echoed into `manifest.txt`.
pub struct Run {
    dir: PathBuf,
    config: Vec<(String, String)>,
    files: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config: vec![("command".into(), command.into())],
            files: Vec::new(),
        })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(self.dir.join(name), contents.as_bytes())?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let mut out = format!("stochbt {}\n", env!("CARGO_PKG_VERSION"));
        let argv: Vec<String> = std::env::args().collect();
        let _ = writeln!(out, "argv = {}", argv.join(" "));
        out.push_str("[config]\n");
        for (k, v) in &self.config {
            let _ = writeln!(out, "{k} = {v}");
        }
        out.push_str("[outputs]\n");
        for f in &self.files {
            let _ = writeln!(out, "{f}");
        }
        write_atomic(self.dir.join("manifest.txt"), out.as_bytes())?;
        Ok(())
    }
}
