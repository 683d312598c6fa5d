use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use maxstable::ExtReal;

use crate::CliError;

/// Output directory for one run. Every CSV opens with a
/// `# config_hash=<sha256>` line followed by the header row.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

impl Artifacts {
    pub fn create(dir: PathBuf, hash: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir, hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut file = File::create(&path).map_err(|e| io_err(&path, e))?;
        writeln!(file, "# config_hash={}", self.hash).map_err(|e| io_err(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes; infinities print as `inf` and `-inf`.
pub fn num(v: f64) -> String {
    // fold -0 into 0
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:?}")
}

pub fn ext(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => num(x),
        _ => v.to_string(),
    }
}

pub fn set(labels: &[String]) -> String {
    format!("{{{}}}", labels.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_use_plain_literals() {
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(ext(ExtReal::PosInf), "inf");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1e-16), "1e-16");
        assert_eq!(num(-0.0), "0.0");
        assert_eq!(set(&["a".into(), "b".into()]), "{a b}");
    }

    #[test]
    fn csv_starts_with_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let out = Artifacts::create(dir.path().to_path_buf(), "abc".into()).unwrap();
        out.csv("t.csv", &["x", "y"], vec![vec![num(1.0), ext(ExtReal::NegInf)]]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "# config_hash=abc\nx,y\n1.0,-inf\n");
    }
}
