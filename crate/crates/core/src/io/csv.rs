//! CSV tables with a header row.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `rows` to `path`; floats use the shortest round-trip decimal form.
pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Renders `rows` as CSV text.
pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        value: f64,
    }

    #[test]
    fn header_and_precision() {
        let text = to_csv_string(&[Row {
            name: "a",
            value: 0.1 + 0.2,
        }])
        .unwrap();
        assert_eq!(text, "name,value\na,0.30000000000000004\n");
        let back: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
    }
}
