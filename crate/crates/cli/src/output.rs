//! Output directory with a shared metadata header and a sidecar run log.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qwalk::export::{Metadata, Table};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

/// SHA-256 of the command name and its resolved parameters.
pub fn config_hash<P: Serialize>(command: &str, params: &P) -> String {
    let body = serde_json::json!({ "command": command, "schema_version": SCHEMA_VERSION, "params": params });
    let digest = Sha256::digest(body.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Output {
    pub dir: PathBuf,
    pub meta: Metadata,
    pub written: Vec<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

impl Output {
    pub fn create<P: Serialize>(dir: &Path, command: &str, params: &P) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let meta = Metadata::new()
            .with("generator", concat!("qwalk ", env!("CARGO_PKG_VERSION")))
            .with("schema_version", SCHEMA_VERSION)
            .with("command", command)
            .with("config_sha256", config_hash(command, params));
        Ok(Output { dir: dir.to_path_buf(), meta, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let p = self.path(name);
        let text = table.to_csv(Some(&self.meta))?;
        std::fs::write(&p, text).map_err(io_err(&p))
    }

    /// JSON object with the metadata under `"meta"`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let p = self.path(name);
        let meta: serde_json::Map<String, serde_json::Value> =
            self.meta.0.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        let doc = serde_json::json!({ "meta": meta, "data": value });
        let mut text = serde_json::to_string_pretty(&doc).map_err(qwalk::error::Error::from)?;
        text.push('\n');
        std::fs::write(&p, text).map_err(io_err(&p))
    }

    /// 16-bit PGM with the metadata as header comments.
    pub fn pgm(&mut self, name: &str, image: &qwalk::optics::CameraImage) -> Result<(), CliError> {
        let p = self.path(name);
        let raw = image.to_pgm16();
        let mut bytes = b"P5\n".to_vec();
        for (k, v) in &self.meta.0 {
            bytes.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        bytes.extend_from_slice(&raw[3..]);
        std::fs::write(&p, bytes).map_err(io_err(&p))
    }

    #[cfg(feature = "png")]
    pub fn png(&mut self, name: &str, image: &qwalk::optics::CameraImage) -> Result<(), CliError> {
        let p = self.path(name);
        let file = std::fs::File::create(&p).map_err(io_err(&p))?;
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        for (k, v) in &self.meta.0 {
            enc.add_text_chunk(k.clone(), v.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let mut w = enc.write_header().map_err(|e| CliError::Io { path: p.clone(), source: e.into() })?;
        let data: Vec<u8> = image.to_u16().iter().flat_map(|v| v.to_be_bytes()).collect();
        w.write_image_data(&data).map_err(|e| CliError::Io { path: p.clone(), source: e.into() })
    }

    /// Appends one line to `run.log`; the only place wall-clock time appears.
    pub fn log_run(&self, status: &str, threads: usize, elapsed: f64) -> Result<(), CliError> {
        let p = self.dir.join("run.log");
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let hash = self.meta.0.iter().find(|(k, _)| k == "config_sha256").map(|(_, v)| v.as_str()).unwrap_or("");
        let command = self.meta.0.iter().find(|(k, _)| k == "command").map(|(_, v)| v.as_str()).unwrap_or("");
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&p).map_err(io_err(&p))?;
        writeln!(
            f,
            "unix={unix} command={command} config_sha256={hash} status={status} threads={threads} elapsed_s={elapsed:.3} files={}",
            self.written.len()
        )
        .map_err(io_err(&p))
    }
}
