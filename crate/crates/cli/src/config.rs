//! `--config` support: a TOML table whose keys are flag names. Entries are
//! expanded into flags after the subcommand name; keys also given on the
//! command line are dropped, so explicit flags override the file.

use std::ffi::OsString;

/// Removes `--config <path>` / `--config=<path>` from `args`.
pub fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a file path".into());
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            found = Some(OsString::from(path));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// One `--key [value]` flag taken from a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigFlag {
    pub key: String,
    pub value: Option<String>,
}

/// Flags for every entry of a TOML document. Booleans become bare switches
/// when true; arrays are joined with commas.
pub fn config_flags(text: &str) -> Result<Vec<ConfigFlag>, String> {
    let table: toml::Table = text.parse().map_err(|e| format!("bad config file: {e}"))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let rendered = match value {
            toml::Value::Boolean(true) => {
                out.push(ConfigFlag { key, value: None });
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => return Err(format!("config key `{key}` has unsupported value {other}")),
        };
        out.push(ConfigFlag {
            key,
            value: Some(rendered),
        });
    }
    Ok(out)
}

fn given(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("{flag}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_value)
    })
}

/// Inserts the flags not already present in `args` right after the
/// subcommand name.
pub fn splice_after_subcommand(args: &mut Vec<OsString>, subcommands: &[&str], flags: Vec<ConfigFlag>) {
    let flags: Vec<OsString> = flags
        .into_iter()
        .filter(|f| !given(args, &f.key))
        .flat_map(|f| std::iter::once(format!("--{}", f.key)).chain(f.value))
        .map(OsString::from)
        .collect();
    let at = args
        .iter()
        .skip(1)
        .position(|a| subcommands.iter().any(|s| a == s))
        .map(|p| p + 2)
        .unwrap_or(args.len());
    args.splice(at..at, flags);
}
