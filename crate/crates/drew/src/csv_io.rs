//! CSV ingestion and export. The header must be exactly `id,v0,...,v{d-1}`.

use std::io::{Read, Write};
use std::path::Path;

use drew_core::store::Store;

use crate::{DrewError, Result};

/// Parsed `(id, vector)` rows plus the column count.
pub type Rows = (Vec<(u64, Vec<f64>)>, usize);

pub fn read_rows<R: Read>(reader: R) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(DrewError::CsvFormat("header must start with `id`".into()));
    }
    let d = header.len() - 1;
    if d == 0 {
        return Err(DrewError::CsvFormat("header has no vector columns".into()));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("v{i}") {
            return Err(DrewError::CsvFormat(format!(
                "column {} is `{name}`, expected `v{i}`",
                i + 1
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let id = record[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| DrewError::CsvFormat(format!("row {row}: id: {e}")))?;
        let v = record
            .iter()
            .skip(1)
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| DrewError::CsvFormat(format!("row {row}: `{x}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, v));
    }
    Ok((rows, d))
}

/// Reads and normalizes a CSV into an unclustered store.
pub fn import<R: Read>(reader: R) -> Result<Store> {
    let (rows, d) = read_rows(reader)?;
    Ok(Store::ingest(rows, d)?)
}

pub fn import_path(path: &Path) -> Result<Store> {
    let f = std::fs::File::open(path).map_err(|e| DrewError::io(path, e))?;
    import(std::io::BufReader::new(f))
}

/// Writes the stored (normalized) vectors. Values use the shortest decimal
/// form that parses back to the same `f32`.
pub fn export<W: Write>(store: &Store, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..store.dim()).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(store.dim() + 1);
    for i in 0..store.len() {
        record.clear();
        record.push(store.id(i).to_string());
        record.extend(store.embedding(i).iter().map(f32::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| DrewError::io("<csv>", e))?;
    Ok(())
}
