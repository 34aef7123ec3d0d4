use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Header row plus one row per record.
pub fn to_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().context("flushing csv")?;
    Ok(String::from_utf8(bytes)?)
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .context("parsing csv")
}

pub fn write<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(rows)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    from_str(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}
