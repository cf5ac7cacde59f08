use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::BenchError;

/// Build and host facts recorded with every report. No timestamps, so
/// reruns with the same inputs produce identical files.
pub fn environment_stamp() -> BTreeMap<String, String> {
    let mut env = BTreeMap::new();
    env.insert("package".into(), format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")));
    env.insert("os".into(), std::env::consts::OS.into());
    env.insert("arch".into(), std::env::consts::ARCH.into());
    env.insert("profile".into(), if cfg!(debug_assertions) { "debug" } else { "release" }.into());
    env
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Named pass/fail flags; the report passes iff all are set.
    pub flags: BTreeMap<String, bool>,
    pub data: serde_json::Value,
    pub notes: Vec<String>,
    pub environment: BTreeMap<String, String>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, data: impl Serialize) -> Result<Self, BenchError> {
        Ok(Self {
            name: name.into(),
            flags: BTreeMap::new(),
            data: serde_json::to_value(data).map_err(|e| BenchError::Io(e.to_string()))?,
            notes: Vec::new(),
            environment: environment_stamp(),
        })
    }

    pub fn flag(&mut self, name: impl Into<String>, value: bool) -> &mut Self {
        self.flags.insert(name.into(), value);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.flags.values().all(|v| *v)
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        serde_json::to_string_pretty(self).map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Io(e.to_string()))
    }
}

/// Two-column CSV with a header row, values in `{:.12e}`.
pub fn write_two_column<W: Write>(writer: W, header: [&str; 2], rows: &[(f64, f64)]) -> Result<(), BenchError> {
    let io = |e: csv::Error| BenchError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(io)?;
    for (a, b) in rows {
        w.write_record([format!("{a:.12e}"), format!("{b:.12e}")]).map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_roundtrip_and_flags() {
        let mut r = ExperimentReport::new("demo", vec![1.0, 2.0]).unwrap();
        r.flag("a", true).flag("b", true);
        assert!(r.passed());
        r.flag("b", false);
        assert!(!r.passed());
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.flags, r.flags);
        assert_eq!(back.data, r.data);
    }

    #[test]
    fn two_column_output() {
        let mut buf = Vec::new();
        write_two_column(&mut buf, ["eps", "err"], &[(0.5, 0.25)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("eps,err"));
        assert_eq!(text.lines().count(), 2);
    }
}
