//! Corpus, profile and config loading shared by the subcommands.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use jointcoref::formats::conll::{parse_conll, serialize_conll};
use jointcoref::formats::jsonl::{read_jsonl, write_jsonl};
use jointcoref::{Corpus, DatasetProfile, Split};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Input problem attributable to the user's data or configuration (exit code 2).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

pub fn data_error(msg: impl Into<String>) -> anyhow::Error {
    DataError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Conll,
    Jsonl,
}

impl Format {
    /// Guess from the extension; jsonlines unless it looks like CoNLL.
    pub fn infer(path: &Path) -> Format {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.ends_with("conll") || name.ends_with(".conll12") {
            Format::Conll
        } else {
            Format::Jsonl
        }
    }

    pub fn resolve(explicit: Option<Format>, path: &Path) -> Format {
        explicit.unwrap_or_else(|| Format::infer(path))
    }
}

/// A builtin profile name, or a JSON/TOML file holding a profile.
pub fn load_profile(spec: &str) -> Result<DatasetProfile> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(p) = DatasetProfile::builtin(spec) {
            return Ok(p);
        }
        return Err(data_error(format!(
            "profile {spec:?} is neither a readable file nor a builtin ({})",
            DatasetProfile::BUILTIN_NAMES.join(", ")
        )));
    }
    read_config(path).with_context(|| format!("loading profile {spec}"))
}

/// Parses a config file as TOML, or JSON when the extension says so.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text).map_err(|e| data_error(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| data_error(format!("{}: {e}", path.display())))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_corpus(path: &Path, format: Format, profile: &DatasetProfile, split: Split) -> Result<Corpus> {
    let corpus = match format {
        Format::Jsonl => read_jsonl(path, profile, split)?,
        Format::Conll => parse_conll(&read_text(path)?, profile, split)?,
    };
    Ok(corpus)
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Jsonl => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_jsonl(corpus, path)?;
            Ok(())
        }
        Format::Conll => write_text(path, &serialize_conll(corpus)),
    }
}

/// Relative paths in a config file are taken from the file's own directory.
pub fn relative_to(config: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config.parent().unwrap_or(Path::new("")).join(p)
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
