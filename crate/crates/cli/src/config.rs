//! `key = value` run files. Each key names a long flag of the subcommand;
//! the file's flags are placed before the command-line ones so that the
//! command line wins.

use std::path::Path;

use crate::CliError;

/// Flags written as `--key value` pairs, in file order.
pub fn parse_config(text: &str) -> Result<Vec<String>, CliError> {
    let mut args = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
            line: k + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" || key.starts_with('-') {
            return Err(CliError::Parse {
                line: k + 1,
                message: format!("invalid key `{key}`"),
            });
        }
        args.push(format!("--{key}"));
        args.push(value.trim().to_string());
    }
    Ok(args)
}

pub fn load_config(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Removes `--config PATH` (or `--config=PATH`) from `argv` and splices the
/// file's flags in right after the subcommand name.
pub fn expand_args(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| CliError::Usage("--config needs a path".into()))?,
            );
        } else if let Some(p) = arg.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let file_args = load_config(Path::new(&path))?;
    // argv[0] is the program, argv[1] the subcommand
    let split = rest.len().min(2);
    let mut out: Vec<String> = rest[..split].to_vec();
    out.extend(file_args);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}
