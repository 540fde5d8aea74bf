use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lipconj_core::pwl_map::RealMap;
use lipconj_core::rational::parse_q;
use lipconj_core::{AnalyticMap, Error, MonotoneTable, PeriodicLift, PwlMap, Q};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Everything that ends a run early, with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Input(String),

    #[error("check failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_resource_cap() => 3,
            CliError::Core(Error::Divergent(_) | Error::ZeroCount { .. } | Error::NoPositiveRoot(_)) => 1,
            CliError::Core(_) | CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn rational(text: &str) -> CliResult<Q> {
    parse_q(text).map_err(|e| CliError::Core(e.into()))
}

pub fn rational_list(text: &str) -> CliResult<Vec<Q>> {
    text.split(',').map(|t| rational(t.trim())).collect()
}

/// `lo:hi` with integer ends.
pub fn cell_window(text: &str) -> CliResult<(i64, i64)> {
    let bad = || CliError::Input(format!("expected lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// A map named on the command line: `power:<t>`, `psi:<t>`, or a JSON file
/// holding an interval map, a lift, or a monotone table.
pub enum NamedMap {
    Analytic(AnalyticMap),
    Interval(PwlMap),
    Lift(PeriodicLift),
    Table(MonotoneTable),
}

impl NamedMap {
    pub fn resolve(spec: &str) -> CliResult<Self> {
        let path = PathBuf::from(spec);
        if !path.exists() {
            return spec.parse::<AnalyticMap>().map(NamedMap::Analytic).map_err(CliError::Core);
        }
        let value: serde_json::Value = read_json(&path)?;
        let parsed = if value.get("pairs").is_some() {
            serde_json::from_value(value).map(NamedMap::Table)
        } else if value.get("turning").is_some() {
            serde_json::from_value(value).map(NamedMap::Lift)
        } else {
            serde_json::from_value(value).map(NamedMap::Interval)
        };
        parsed.map_err(|e| CliError::Input(format!("{spec}: {e}")))
    }

    pub fn as_real_map(&self) -> &dyn RealMap {
        match self {
            NamedMap::Analytic(m) => m,
            NamedMap::Interval(m) => m,
            NamedMap::Lift(m) => m,
            NamedMap::Table(m) => m,
        }
    }
}

pub fn emit_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed reader (e.g. `| head`) is not an error of the computation
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Input(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes a header and rows to `path`, when a sidecar was requested.
pub fn write_csv(path: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let Some(path) = path else {
        return Ok(());
    };
    let io_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let cap = Error::ResourceCap {
            what: "x",
            count: 2,
            cap: 1,
        };
        assert_eq!(CliError::Core(cap).exit_code(), 3);
        assert_eq!(CliError::Core(Error::Divergent("s".into())).exit_code(), 1);
        assert_eq!(CliError::Core(Error::Invalid("s".into())).exit_code(), 2);
        assert_eq!(CliError::Input("s".into()).exit_code(), 2);
        assert_eq!(CliError::Failed("s".into()).exit_code(), 1);
    }

    #[test]
    fn windows_and_lists() {
        assert_eq!(cell_window("-3:4").unwrap(), (-3, 4));
        assert!(cell_window("4:-3").is_err());
        assert!(cell_window("4").is_err());
        assert_eq!(rational_list("1/2, 1/2").unwrap().len(), 2);
    }

    #[test]
    fn analytic_names_resolve() {
        assert!(matches!(NamedMap::resolve("power:2").unwrap(), NamedMap::Analytic(_)));
        assert!(NamedMap::resolve("no-such-file.json").is_err());
    }
}
