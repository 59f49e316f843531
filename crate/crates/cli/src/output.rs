//! Report files. Every file names the tool version and the config hash:
//! CSV files in a leading `#` line, JSON files in a `meta` object.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

pub const TOOL: &str = "dissent";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    data: &'a T,
}

pub struct ReportWriter {
    dir: PathBuf,
    meta: Meta,
    csv: bool,
    json: bool,
    written: Vec<PathBuf>,
}

/// Six significant digits, shortest decimal form.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl ReportWriter {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let dir = config.out.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            meta: Meta {
                tool: TOOL,
                version: VERSION,
                config_sha256: config.hash(),
            },
            csv: config.wants(Format::Csv),
            json: config.wants(Format::Json),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        let mut buf = format!(
            "# {} {} config_sha256={}\n",
            self.meta.tool, self.meta.version, self.meta.config_sha256
        )
        .into_bytes();
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        if !self.json {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(&Envelope {
            meta: &self.meta,
            data,
        })?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}
