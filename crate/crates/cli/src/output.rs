//! Output directory, deterministic JSON and CSV writers, and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::CliError;

/// 17 significant digits, so every `f64` round-trips and reruns are byte-identical.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Core(e.into()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<(), CliError> {
    let bytes = to_json(value)?;
    io::stdout()
        .write_all(&bytes)
        .map_err(CliError::io("<stdout>"))
}

/// `SOURCE_DATE_EPOCH` when set, else the wall clock.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model_source: serde_json::Value,
    pub config: serde_json::Value,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    /// Refuses a non-empty directory unless `force` is set.
    pub fn create(root: &Path, force: bool) -> Result<Self, CliError> {
        if !force {
            if let Ok(mut entries) = fs::read_dir(root) {
                if entries.next().is_some() {
                    return Err(CliError::Usage(format!(
                        "output directory {} is not empty; pass --force to overwrite",
                        root.display()
                    )));
                }
            }
        }
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, to_json(value)?).map_err(CliError::io(&path))?;
        self.record(name);
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        self.record(name);
        Ok(())
    }

    /// Writes `manifest.json` last, listing every file written before it.
    pub fn finish(
        mut self,
        command: &str,
        model_source: serde_json::Value,
        config: serde_json::Value,
    ) -> Result<(), CliError> {
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.into(),
            model_source,
            config,
            timestamp: timestamp(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs,
        };
        self.json("manifest.json", &manifest)
    }
}
