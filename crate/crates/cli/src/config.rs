//! Plain-text run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are flag
//! names without the leading dashes. Pairs are turned into flags placed
//! ahead of the command-line ones, and since the last occurrence of a flag
//! wins, the command line takes precedence.

use std::ffi::OsString;
use std::path::Path;

use crate::error::CliError;

pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected `key = value`, got `{line}`", origin.display(), i + 1))
        })?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(CliError::Usage(format!("{}:{}: empty key", origin.display(), i + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Path given to `--config`, if any.
fn config_path(argv: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it
                .next()
                .cloned()
                .map(Some)
                .ok_or_else(|| CliError::Usage("--config needs a file path".into()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// `argv` with the configuration file's flags spliced in right after the
/// subcommand name.
pub fn expand(argv: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let pairs = parse(&text, path)?;
    let Some(at) = argv
        .iter()
        .position(|a| subcommands.iter().any(|s| a.to_str() == Some(*s)))
    else {
        return Ok(argv);
    };
    let mut out: Vec<OsString> = argv[..=at].to_vec();
    for (k, v) in pairs {
        if v.eq_ignore_ascii_case("true") {
            out.push(format!("--{k}").into());
        } else {
            out.push(format!("--{k}={v}").into());
        }
    }
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}
