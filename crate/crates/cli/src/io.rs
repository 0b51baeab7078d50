use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use orsched_core::task::{parse_task_file, FormatError};
use orsched_core::CompositeTask;

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn parsed<T>(path: &Path, r: Result<T, FormatError>) -> Result<T> {
    r.with_context(|| format!("{}", path.display()))
}

pub fn tasks(path: &Path) -> Result<Vec<CompositeTask>> {
    parsed(path, parse_task_file(&read(path)?))
}
