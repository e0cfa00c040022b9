use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use opsys::Result;

/// Everything needed to rerun a command.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    pub seeds: Vec<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub tool_version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
}

pub struct Run {
    subcommand: String,
    parameters: Value,
    seeds: Vec<u64>,
    tolerances: BTreeMap<String, f64>,
    start: Instant,
}

impl Run {
    pub fn new(subcommand: &str, parameters: &impl Serialize) -> Self {
        Run {
            subcommand: subcommand.into(),
            parameters: serde_json::to_value(parameters).unwrap_or(Value::Null),
            seeds: Vec::new(),
            tolerances: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seeds.push(s);
        self
    }

    pub fn tol(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.into(), v);
        self
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand.clone(),
            parameters: self.parameters.clone(),
            seeds: self.seeds.clone(),
            tolerances: self.tolerances.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            threads: rayon::current_num_threads(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        }
    }

    /// `{"format": 1, "manifest": …, "result": …}`.
    pub fn emit_json(&self, result: &impl Serialize, out: Option<&Path>) -> Result<()> {
        let doc = json!({
            "format": 1,
            "manifest": self.manifest(),
            "result": result,
        });
        write_text(&(serde_json::to_string_pretty(&doc)? + "\n"), out)
    }

    /// A document that is itself a versioned object (a tuple file): the
    /// manifest is added as one more key.
    pub fn emit_document(&self, doc_json: &str, out: Option<&Path>) -> Result<()> {
        let mut doc: Value = serde_json::from_str(doc_json)?;
        if let Value::Object(map) = &mut doc {
            map.insert("manifest".into(), serde_json::to_value(self.manifest())?);
        }
        write_text(&(serde_json::to_string_pretty(&doc)? + "\n"), out)
    }

    /// CSV goes to `out`, its manifest next to it as `<out>.manifest.json`.
    pub fn emit_csv(&self, csv: &str, out: Option<&Path>) -> Result<()> {
        let mut text = csv.replace("\r\n", "\n");
        if !text.ends_with('\n') {
            text.push('\n');
        }
        write_text(&text, out)?;
        if let Some(p) = out {
            let mut side = p.as_os_str().to_owned();
            side.push(".manifest.json");
            let doc = json!({ "format": 1, "manifest": self.manifest() });
            fs::write(Path::new(&side), serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        Ok(())
    }
}

fn write_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
