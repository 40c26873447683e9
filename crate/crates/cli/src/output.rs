use std::fs;
use std::path::{Path, PathBuf};

use rnml_core::{Error, Result};

/// Nine decimal places, never `-0.000000000`.
pub fn headline(value: f64) -> String {
    let text = format!("{value:.9}");
    match text.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => text,
    }
}

/// A file to be written once every output of a command is ready.
pub struct Staged {
    path: PathBuf,
    contents: String,
}

impl Staged {
    pub fn new(path: impl AsRef<Path>, contents: String) -> Self {
        Self { path: path.as_ref().to_path_buf(), contents }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn temp_path(&self) -> PathBuf {
        let mut name = self.path.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        self.path.with_file_name(name)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes every file to a sibling temporary first and renames only after all
/// of them succeeded, so a failure leaves no new output behind.
pub fn write_all(files: &[Staged]) -> Result<()> {
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let tmp = f.temp_path();
        if let Err(e) = fs::write(&tmp, &f.contents) {
            for t in &written {
                let _ = fs::remove_file(t);
            }
            return Err(io_error(&tmp, e));
        }
        written.push(tmp);
    }
    for (f, tmp) in files.iter().zip(&written) {
        fs::rename(tmp, &f.path).map_err(|e| io_error(&f.path, e))?;
    }
    Ok(())
}
