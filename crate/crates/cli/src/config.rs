//! Layered run configuration: defaults < `[command]` table of the
//! `--config` file < output-directory env var < flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{io_err, CliError, CliResult};

/// Overrides the output directory unless `--out-dir` is given.
pub const OUT_DIR_ENV: &str = "CASCADE_EDL_OUT_DIR";

fn section(path: &Path, command: &str) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    let mut out = Map::new();
    for (key, value) in table {
        match value {
            toml::Value::Table(t) if key == command => {
                for (k, v) in t {
                    out.insert(k, serde_json::to_value(v)?);
                }
            }
            toml::Value::Table(_) => {}
            _ => {
                return Err(CliError::Config(format!(
                    "{}: top-level key `{key}` must sit inside a [command] table",
                    path.display()
                )))
            }
        }
    }
    Ok(out)
}

/// Merges the layers and deserializes the resolved configuration. Flag
/// structs serialize unset options as null, which leaves lower layers alone.
pub fn resolve<F: Serialize, R: DeserializeOwned>(command: &str, config: Option<&Path>, flags: &F) -> CliResult<R> {
    let mut merged = match config {
        Some(p) => section(p, command)?,
        None => Map::new(),
    };
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            merged.insert("out_dir".into(), Value::String(dir));
        }
    }
    if let Value::Object(flags) = serde_json::to_value(flags)? {
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| {
        let origin = config.map_or(String::new(), |p| format!(" ({})", p.display()));
        CliError::Config(format!("[{command}]{origin}: {e}"))
    })
}

/// Writes the resolved configuration next to the command's outputs.
pub fn write_snapshot<R: Serialize>(out_dir: &Path, command: &str, resolved: &R) -> CliResult<PathBuf> {
    let path = out_dir.join(format!("{command}.resolved.toml"));
    let mut table = toml::Table::new();
    let body = toml::Table::try_from(resolved).map_err(|e| CliError::Config(format!("snapshot: {e}")))?;
    table.insert(command.into(), toml::Value::Table(body));
    let text = toml::to_string(&table).map_err(|e| CliError::Config(format!("snapshot: {e}")))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::Usage(format!("missing required `--{flag}` (flag or config key)")))
}
