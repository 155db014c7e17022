//! The run manifest: inputs, outputs, parameters, and results of one
//! invocation, with SHA-256 hashes so a result can be traced back to its
//! exact inputs and re-run from the recorded parameters.

use std::fs;
use std::path::{Path, PathBuf};

use lapemb::Result;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| lapemb::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub struct Manifest {
    subcommand: &'static str,
    parameters: Map<String, Value>,
    results: Map<String, Value>,
    inputs: Vec<Value>,
    outputs: Vec<Value>,
    out_dir: PathBuf,
}

impl Manifest {
    pub fn new(subcommand: &'static str, out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| lapemb::Error::Io {
            path: out_dir.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            subcommand,
            parameters: Map::new(),
            results: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
        })
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_hex(path)?;
        self.inputs.push(serde_json::json!({
            "path": path.display().to_string(),
            "sha256": hash,
        }));
        Ok(())
    }

    /// Writes `text` under the output directory and records its hash.
    pub fn emit(&mut self, file_name: &str, text: &str) -> Result<()> {
        let path = self.out_dir.join(file_name);
        lapemb::io::write_text(&path, text)?;
        let hash = sha256_hex(&path)?;
        self.outputs.push(serde_json::json!({
            "path": file_name,
            "sha256": hash,
        }));
        Ok(())
    }

    pub fn write(self) -> Result<()> {
        let doc = serde_json::json!({
            "tool": "lapemb",
            "versions": {
                "lapemb": lapemb::VERSION,
                "lapemb-cli": env!("CARGO_PKG_VERSION"),
            },
            "subcommand": self.subcommand,
            "threads": std::env::var("LAPEMB_THREADS").ok(),
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": self.results,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("valid JSON document");
        text.push('\n');
        lapemb::io::write_text(&self.out_dir.join("manifest.json"), &text)
    }
}

/// JSON value for a float, mapping non-finite values to null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
