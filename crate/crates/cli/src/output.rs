use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::commands::CliError;
use crate::{Format, OutputArgs};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// CSV table with a fixed header; reals use the shortest round-trip form.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Table, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn into_bytes(self) -> Result<Vec<u8>, CliError> {
        self.writer.into_inner().map_err(|e| CliError::Data(e.to_string()))
    }
}

pub fn real(x: f64) -> String {
    permboot::fmt_real(x)
}

/// Delivers `bytes` to `--output` (or the default file) and/or stdout.
pub fn emit(out: &OutputArgs, command: &str, format: Format, bytes: &[u8]) -> Result<(), CliError> {
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let target: Option<PathBuf> = match (&out.output, out.stdout) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => None,
        (None, false) => Some(PathBuf::from(format!("permboot-{command}.{ext}"))),
    };
    if let Some(path) = target {
        write_atomic(&path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        eprintln!("permboot {command}: wrote {}", path.display());
    }
    if out.stdout {
        io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn table_uses_lf_and_round_trip_reals() {
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row([real(0.1), real(2.0 / 3.0)]).unwrap();
        let s = String::from_utf8(t.into_bytes().unwrap()).unwrap();
        assert_eq!(s, "a,b\n0.1,0.6666666666666666\n");
    }
}
