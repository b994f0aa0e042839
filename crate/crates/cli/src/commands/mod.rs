mod reduce;
mod spectrum;
mod transform;
mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use reduce::reduce;
pub use spectrum::spectrum;
pub use transform::transform_qd;
pub use verify::verify;

use crate::error::{CliError, CliResult};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub out_dir: PathBuf,
    pub plot: bool,
    pub seed: u64,
}

/// Writes one artifact under `dir`, buffering and flushing.
pub(crate) fn emit(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut BufWriter<File>) -> vspectra::Result<()>,
) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let output = |source: std::io::Error| CliError::Output {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(output)?;
    let mut w = BufWriter::new(File::create(&path).map_err(output)?);
    match write(&mut w) {
        Ok(()) => {}
        Err(vspectra::Error::Io(e)) => return Err(output(e)),
        Err(e) => return Err(e.into()),
    }
    w.flush().map_err(output)?;
    Ok(path)
}

pub(crate) fn emit_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    emit(dir, name, |w| Ok(w.write_all(text.as_bytes())?))
}

pub(crate) fn emit_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    emit(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        Ok(writeln!(w)?)
    })
}
