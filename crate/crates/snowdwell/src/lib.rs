//! File formats, configuration and the `snowdwell` command-line tool built on
//! [`snowdwell_core`].
//!
//! - [`evd`]: the packed little-endian binary event format.
//! - [`csvio`]: CSV events, bounding boxes, velocity logs and tables.
//! - [`config`]: flat key-value configuration files.
//! - [`manifest`]: JSON run manifests written beside every output.
//! - [`cli`]: the subcommands.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod evd;
pub mod manifest;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use snowdwell_core::LabeledStream;

pub use cli::CliError;

/// Event stream file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Evd,
    Csv,
}

impl Format {
    /// `explicit`, else `.csv` files are CSV and everything else EVD.
    pub fn for_path(path: &Path, explicit: Option<Format>) -> Format {
        explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Evd,
        })
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads an EVD or CSV stream, telling them apart by the EVD magic. EVD
/// files take their sensor size from the header; lens and radius, and the
/// sensor size of CSV files, come from `cfg`.
pub fn read_stream(
    path: &Path,
    cfg: &config::FileConfig,
) -> Result<(LabeledStream, Format), CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let len = file.metadata().map(|m| m.len()).unwrap_or(0);
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let head = reader.fill_buf().map_err(|e| io_error(path, e))?;
    let p = path.display().to_string();
    if head.starts_with(&evd::MAGIC) {
        let mut s =
            evd::read_evd_sized(reader, len).map_err(|source| CliError::Evd { path: p, source })?;
        let (w, h) = (s.geometry.width_px, s.geometry.height_px);
        if cfg.width_px.is_some_and(|x| x != w) || cfg.height_px.is_some_and(|x| x != h) {
            return Err(CliError::Usage(format!(
                "{}: file is {w}x{h} but the config sets a different sensor size",
                path.display()
            )));
        }
        s.geometry = cfg.geometry(Some((w, h)))?;
        Ok((s, Format::Evd))
    } else {
        let s = csvio::read_csv(reader, cfg.geometry(None)?)
            .map_err(|source| CliError::Csv { path: p, source })?;
        Ok((s, Format::Csv))
    }
}

pub fn write_stream(path: &Path, stream: &LabeledStream, format: Format) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let w = BufWriter::with_capacity(1 << 20, file);
    let p = path.display().to_string();
    match format {
        Format::Evd => evd::write_evd(stream, w)
            .map(|_| ())
            .map_err(|source| CliError::Evd { path: p, source }),
        Format::Csv => {
            csvio::write_csv(stream, w).map_err(|source| CliError::Csv { path: p, source })
        }
    }
}
