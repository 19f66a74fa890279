use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use compreg_core::io::{format_number, write_comment_block};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn num(x: f64) -> String {
    format_number(x)
}

/// Empty field for a missing value.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::io(&format!("cannot create {}", dir.display()), e))?;
    Ok(dir)
}

/// The comment preamble of every CSV: the command and the result-relevant config.
pub fn preamble(command: &str, cfg: &RunConfig) -> String {
    format!("compreg {command}\n{}", cfg.result_relevant().to_toml())
}

pub fn write_resolved_config(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let path = dir.join("resolved_config.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path.display().to_string(), e))
}

pub fn write_table(
    path: &Path,
    preamble: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let context = path.display().to_string();
    let file = File::create(path).map_err(|e| CliError::io(&context, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write_comment_block(out, preamble)?;
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| CliError::io(&context, e))
}
