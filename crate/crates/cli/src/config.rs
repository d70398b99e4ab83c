//! Plain `key = value` config files whose keys are long flag names.
//! Flags given on the command line take precedence.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected 'key = value', got '{raw}'", n + 1);
        };
        let key = k.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key '{}'", n + 1, k.trim());
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn given(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_value)
    })
}

/// Inserts `--key=value` for each config entry not already on the command
/// line, directly after the subcommand token.
pub fn merge(
    args: Vec<OsString>,
    subcommand: &str,
    entries: &[(String, String)],
) -> Result<Vec<OsString>> {
    let pos = args
        .iter()
        .skip(1)
        .position(|a| a == subcommand)
        .map(|p| p + 1)
        .with_context(|| format!("subcommand '{subcommand}' not found in arguments"))?;
    let extra: Vec<OsString> = entries
        .iter()
        .filter(|(k, _)| !given(&args, k))
        .map(|(k, v)| OsString::from(format!("--{k}={v}")))
        .collect();
    let mut out = args;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_and_skips_comments() {
        let e = parse("# run\nR = 50 # radius\n\nmeasure=nu\n").unwrap();
        assert_eq!(
            e,
            vec![("R".into(), "50".into()), ("measure".into(), "nu".into())]
        );
        assert!(parse("nonsense").is_err());
        assert!(parse("config = x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let entries = parse("R = 50\nn = 200\n").unwrap();
        let args = os(&["bin", "--threads", "2", "ns-estimate", "--n", "60"]);
        let merged = merge(args, "ns-estimate", &entries).unwrap();
        assert_eq!(
            merged,
            os(&[
                "bin",
                "--threads",
                "2",
                "ns-estimate",
                "--R=50",
                "--n",
                "60"
            ])
        );
    }
}
