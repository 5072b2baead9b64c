//! Run manifests and the output files that reference them.
//!
//! A manifest holds everything that determines a run's outputs and nothing
//! else (no timestamps, no host names), so an identical rerun writes
//! identical bytes. Its id is a prefix of the SHA-256 of its JSON form.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use storecost::Error;

use crate::config::RunConfig;

pub const ID_HEX_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub seed: u64,
    pub backend: Option<String>,
    pub approximate: bool,
    pub windowed: bool,
    pub inputs: Vec<InputRecord>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: format!("storecost {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            seed: config.seed(),
            backend: None,
            approximate: false,
            windowed: false,
            inputs: Vec::new(),
            parameters: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        let mut id = hex::encode(Sha256::digest(json.as_bytes()));
        id.truncate(ID_HEX_LEN);
        id
    }
}

/// Reads an input file and records its content hash.
pub fn read_input(manifest: &mut Manifest, path: &Path) -> Result<String, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    manifest.add_input(path, text.as_bytes());
    Ok(text)
}

/// Where an output goes; `None` is standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSink(pub Option<PathBuf>);

impl OutputSink {
    pub fn label(&self) -> String {
        self.0
            .as_ref()
            .map_or_else(|| "-".to_string(), |p| p.display().to_string())
    }
}

pub enum Payload {
    /// Tab- or comma-separated text; gets a `# manifest <id>` first line.
    Delimited(String),
    /// A JSON object; gets a top-level `manifest` field.
    Json(serde_json::Value),
    /// JSON objects, one per line; each gets a `manifest` field.
    JsonLines(Vec<serde_json::Value>),
}

fn stamp(mut value: serde_json::Value, id: &str) -> serde_json::Value {
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("manifest".into(), serde_json::Value::String(id.to_string()));
    }
    value
}

pub fn render(payload: Payload, id: &str) -> String {
    match payload {
        Payload::Delimited(body) => format!("# manifest {id}\n{body}"),
        Payload::Json(v) => {
            let mut s = serde_json::to_string_pretty(&stamp(v, id)).expect("json serializes");
            s.push('\n');
            s
        }
        Payload::JsonLines(rows) => rows
            .into_iter()
            .map(|r| serde_json::to_string(&stamp(r, id)).expect("json serializes") + "\n")
            .collect(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes every output, then the manifest: beside the first file output
/// as `<name>.manifest.json`, at `manifest_path` if given, or as
/// `storecost.manifest.json` in the working directory when everything went
/// to standard output.
pub fn finish(
    mut manifest: Manifest,
    outputs: Vec<(OutputSink, Payload)>,
    manifest_path: Option<&Path>,
) -> Result<PathBuf, Error> {
    manifest.outputs = outputs.iter().map(|(s, _)| s.label()).collect();
    let id = manifest.id();
    let first_file = outputs.iter().find_map(|(s, _)| s.0.clone());
    for (sink, payload) in outputs {
        let text = render(payload, &id);
        match &sink.0 {
            Some(path) => write_file(path, &text)?,
            None => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| Error::io("writing standard output", e))?;
            }
        }
    }
    let path = match (manifest_path, first_file) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(f)) => {
            let mut name = f.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".manifest.json");
            f.with_file_name(name)
        }
        (None, None) => PathBuf::from("storecost.manifest.json"),
    };
    let mut json = serde_json::to_value(&manifest).expect("manifest serializes");
    if let serde_json::Value::Object(map) = &mut json {
        map.insert("id".into(), serde_json::Value::String(id));
    }
    let mut text = serde_json::to_string_pretty(&json).expect("manifest serializes");
    text.push('\n');
    write_file(&path, &text)?;
    Ok(path)
}
