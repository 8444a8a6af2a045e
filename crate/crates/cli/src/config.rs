//! Loading and checking experiment config files.

use std::path::{Path, PathBuf};

use alsim::experiment::{DataSource, ExperimentConfig};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Keys the config file accepts on top of the experiment fields.
const FILE_KEYS: [&str; 2] = ["output_dir", "verbosity"];

/// A parsed config file: the experiment plus front-end settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub output_dir: Option<PathBuf>,
    pub verbosity: Option<String>,
}

/// Reads, parses and validates a JSON config. Relative data paths are
/// resolved against the config file's directory and must exist.
pub fn load_config(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses config text; `base` anchors relative data paths.
pub fn parse_config(text: &str, base: &Path) -> CliResult<ConfigFile> {
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    let output_dir = match obj.remove("output_dir") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError::Config("`output_dir` must be a string".into())),
    };
    let verbosity = match obj.remove("verbosity") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::Config("`verbosity` must be a string".into())),
    };
    let mut experiment: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Config(with_suggestion(&e.to_string())))?;
    experiment.validate()?;
    if let DataSource::Svmlight { path, .. } = &mut experiment.data {
        if path.is_relative() {
            *path = base.join(&*path);
        }
        if !path.is_file() {
            return Err(CliError::Data(format!(
                "data.path: {} does not exist",
                path.display()
            )));
        }
    }
    Ok(ConfigFile {
        experiment,
        output_dir,
        verbosity,
    })
}

/// Appends a "did you mean" hint to serde's unknown-key and unknown-variant
/// messages.
fn with_suggestion(message: &str) -> String {
    let Some((bad, expected)) = unknown_and_expected(message) else {
        return message.to_string();
    };
    let mut candidates = expected;
    if message.starts_with("unknown field") {
        candidates.extend(FILE_KEYS.iter().map(|s| s.to_string()));
    }
    let best = candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(&bad, c), c))
        .filter(|(score, _)| *score > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, c)) => format!("{message} (did you mean `{c}`?)"),
        None => message.to_string(),
    }
}

fn unknown_and_expected(message: &str) -> Option<(String, Vec<String>)> {
    let rest = message
        .strip_prefix("unknown field `")
        .or_else(|| message.strip_prefix("unknown variant `"))?;
    let (bad, rest) = rest.split_once('`')?;
    let expected = rest
        .split('`')
        .skip(1)
        .step_by(2)
        .map(str::to_string)
        .collect();
    Some((bad.to_string(), expected))
}
