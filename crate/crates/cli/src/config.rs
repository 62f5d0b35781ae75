//! Config resolution: built-in defaults, then the config file, then
//! `--set` overrides, then the seed from flag or environment.

use std::path::Path;

use serde_json::Value;

/// Why a run stopped, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input of any kind; exit 1.
    Invalid(String),
    /// NaN or Inf during a run; exit 2.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    /// The diagnostic flattened onto one line.
    pub fn line(&self) -> String {
        let msg = match self {
            Failure::Invalid(m) => m.clone(),
            Failure::Numerical(m) => format!("numerical failure: {m}"),
        };
        msg.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl From<gograd::Error> for Failure {
    fn from(e: gograd::Error) -> Self {
        match e {
            gograd::Error::Numerical { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(format!("i/o: {e}"))
    }
}

fn invalid<T>(msg: String) -> Result<T, Failure> {
    Err(Failure::Invalid(msg))
}

/// Reads a TOML or JSON config; the extension decides, TOML otherwise.
pub fn read_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str::<Value>(&text).map_err(|e| e.to_string())
    };
    match parsed {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => invalid(format!("config {} must be a table", path.display())),
        Err(e) => invalid(format!("config {}: {e}", path.display())),
    }
}

/// Overlays `over` onto `base`, recursing into tables and replacing everything else.
/// Keys missing from `base` are kept so deserialization can name them.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Text after `=` as JSON when it parses, a bare list `[a, b]` as strings,
/// anything else as a string.
fn parse_value(text: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(text) {
        return v;
    }
    let t = text.trim();
    if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        return Value::Array(
            inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.into())))
                .collect(),
        );
    }
    Value::String(t.into())
}

/// Applies one `section.key=value` override; every path segment must already exist.
pub fn apply_set(tree: &mut Value, assignment: &str) -> Result<(), Failure> {
    let Some((key, value)) = assignment.split_once('=') else {
        return invalid(format!("override {assignment:?} is not of the form key=value"));
    };
    let key = key.trim();
    let mut node = tree;
    for seg in key.split('.') {
        node = match node.get_mut(seg) {
            Some(n) => n,
            None => return invalid(format!("unknown config key {key:?}")),
        };
    }
    *node = parse_value(value);
    Ok(())
}

/// Defaults, file and overrides folded into one tree. The `experiment`
/// tag, when present, is pinned to the subcommand's.
pub fn resolve(
    defaults: Value,
    file: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Value, Failure> {
    let pinned = defaults.get("experiment").cloned();
    let mut tree = defaults;
    if let Some(path) = file {
        merge(&mut tree, read_file(path)?);
    }
    for o in overrides {
        apply_set(&mut tree, o)?;
    }
    if let Some(s) = seed {
        tree["seed"] = Value::from(s);
    }
    if let Some(p) = pinned {
        if tree.get("experiment") != Some(&p) {
            return invalid(format!(
                "experiment is {} but the subcommand runs {p}",
                tree["experiment"]
            ));
        }
    }
    Ok(tree)
}
