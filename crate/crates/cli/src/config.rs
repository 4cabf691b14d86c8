//! Flag/file configuration merging: every subcommand accepts
//! `--config file.json`; values given as flags override the file, and
//! built-in defaults fill whatever remains.

use antikit::{Error, Result};

/// Default seed: the `ANTI_SEED` environment variable if set, else 0.
pub fn default_seed() -> Result<u64> {
    match std::env::var("ANTI_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("ANTI_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Load a JSON config file as a flat object.
pub fn load(path: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
    match serde_json::from_str(&text) {
        Ok(serde_json::Value::Object(map)) => Ok(map),
        Ok(_) => Err(Error::Config(format!("config {path} must be a JSON object"))),
        Err(e) => Err(Error::Config(format!("config {path} is not valid JSON: {e}"))),
    }
}

/// Resolve one option: explicit flag wins, then the config file, then
/// the built-in default.
pub fn resolve<T, F>(
    flag: Option<T>,
    cfg: &serde_json::Map<String, serde_json::Value>,
    key: &str,
    parse: F,
    default: T,
) -> Result<T>
where
    F: FnOnce(&serde_json::Value) -> Option<T>,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(v) => {
            parse(v).ok_or_else(|| Error::Config(format!("config field {key:?} has wrong type")))
        }
        None => Ok(default),
    }
}

pub fn as_u64(v: &serde_json::Value) -> Option<u64> {
    v.as_u64()
}

pub fn as_usize(v: &serde_json::Value) -> Option<usize> {
    v.as_u64().map(|x| x as usize)
}

pub fn as_f64(v: &serde_json::Value) -> Option<f64> {
    v.as_f64()
}

pub fn as_string(v: &serde_json::Value) -> Option<String> {
    v.as_str().map(str::to_string)
}

/// Write text to a file, or stdout when the path is "-".
pub fn write_output(path: &str, text: &str) -> Result<()> {
    if path == "-" {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {path}: {e}")))
    }
}
