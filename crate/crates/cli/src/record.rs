//! Result records and their CSV / JSON forms.
//!
//! CSV cells carry 12 significant digits; JSON keeps every bit. Both parse
//! back: JSON into an identical [`ResultRecord`], CSV into the record's table
//! after [`Table::rounded`].

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Emit;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_DIGITS: usize = 12;

/// One table cell. Non-finite numbers are stored as text (`nan`, `inf`,
/// `-inf`) so that JSON stays valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Text(non_finite(x).to_string())
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn from_csv(field: &str) -> Self {
        match field.parse::<f64>() {
            Ok(x) if x.is_finite() => Cell::Num(x),
            _ => Cell::Text(field.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(s) => s.parse().ok(),
        }
    }
}

fn non_finite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// `x` rounded to [`CSV_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", CSV_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest text that parses back to `round_sig(x)`.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return non_finite(x).to_string();
    }
    let r = round_sig(x);
    let a = r.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// JSON value for a number, text for non-finite ones.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(non_finite(x))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn rounded(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter().map(|c| if let Cell::Num(x) = c { Cell::Num(round_sig(*x)) } else { c.clone() }).collect()
            })
            .collect();
        Self { columns: self.columns.clone(), rows }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::to_csv))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CliError> {
        let mut input = csv::Reader::from_reader(r);
        let columns = input.headers()?.iter().map(str::to_string).collect();
        let rows = input
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(Cell::from_csv).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { columns, rows })
    }
}

pub type Fields = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub inputs: Fields,
    pub outputs: Fields,
    pub diagnostics: Fields,
    pub table: Table,
}

impl ResultRecord {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            inputs: Fields::new(),
            outputs: Fields::new(),
            diagnostics: Fields::new(),
            table: Table::default(),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let record: Self = serde_json::from_str(text)?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                record.schema_version
            )));
        }
        Ok(record)
    }
}

/// Streams table rows as CSV while they are produced, or holds them for a
/// final JSON document. CSV rows are flushed one at a time so an interrupted
/// run leaves every finished row on disk.
pub struct Emitter {
    emit: Option<Emit>,
    csv: Option<csv::Writer<Box<dyn Write>>>,
    sink: Option<Box<dyn Write>>,
    table: Table,
}

impl Emitter {
    pub fn new(emit: Option<Emit>, sink: Box<dyn Write>) -> Self {
        Self { emit, csv: None, sink: Some(sink), table: Table::default() }
    }

    /// Collects rows without writing anything.
    pub fn silent() -> Self {
        Self { emit: None, csv: None, sink: None, table: Table::default() }
    }

    pub fn begin(&mut self, columns: &[&str]) -> Result<(), CliError> {
        self.table = Table::new(columns);
        if self.emit == Some(Emit::Csv) {
            let sink = self.sink.take().expect("begin called once");
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(columns)?;
            w.flush()?;
            self.csv = Some(w);
        }
        Ok(())
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.table.columns.len());
        if let Some(w) = self.csv.as_mut() {
            w.write_record(cells.iter().map(Cell::to_csv))?;
            w.flush()?;
        }
        self.table.rows.push(cells);
        Ok(())
    }

    /// Attaches the table to `record` and writes the JSON form if requested.
    pub fn finish(mut self, record: &mut ResultRecord) -> Result<(), CliError> {
        record.table = std::mem::take(&mut self.table);
        if self.emit == Some(Emit::Json) {
            if let Some(mut sink) = self.sink.take() {
                sink.write_all(record.to_json()?.as_bytes())?;
                sink.write_all(b"\n")?;
                sink.flush()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_sig(-1.234567890123456e-7), "-1.23456789012e-7");
        assert_eq!(format_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(format_sig(f64::NAN), "nan");
        assert_eq!(format_sig(f64::NEG_INFINITY), "-inf");
        for x in [1e-300, 123456.789012345, -0.000123456789012345, 9.99999999999951] {
            let back: f64 = format_sig(x).parse().unwrap();
            assert_eq!(back, round_sig(x));
            assert!(((back - x) / x).abs() < 1e-11);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["theta", "value", "verdict"]);
        t.rows.push(vec![Cell::num(-1.0), Cell::num(std::f64::consts::E), Cell::text("exists")]);
        t.rows.push(vec![Cell::num(1e-9 / 3.0), Cell::num(f64::NAN), Cell::text("not_exists")]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t.rounded());
        assert_ne!(back, t);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut r = ResultRecord::new("eigen");
        r.inputs.insert("s".into(), num(0.5));
        r.outputs.insert("lambda".into(), num(std::f64::consts::PI / 7.0));
        r.outputs.insert("nan".into(), num(f64::NAN));
        r.table = Table::new(&["x", "phi"]);
        r.table.rows.push(vec![Cell::num(0.1 / 3.0), Cell::num(f64::INFINITY)]);
        let back = ResultRecord::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut bad = r.clone();
        bad.schema_version = 99;
        assert!(ResultRecord::from_json(&bad.to_json().unwrap()).is_err());
    }

    #[derive(Clone, Default)]
    struct Shared(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }

        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn csv_rows_reach_the_sink_immediately() {
        let sink = Shared::default();
        let mut e = Emitter::new(Some(Emit::Csv), Box::new(sink.clone()));
        e.begin(&["a", "b"]).unwrap();
        e.row(vec![Cell::num(1.0), Cell::text("x")]).unwrap();
        assert_eq!(String::from_utf8(sink.0.lock().unwrap().clone()).unwrap(), "a,b\n1,x\n");
        let mut r = ResultRecord::new("t");
        e.finish(&mut r).unwrap();
        assert_eq!(r.table.rows.len(), 1);
    }

    #[test]
    fn json_is_written_once_at_the_end() {
        let sink = Shared::default();
        let mut e = Emitter::new(Some(Emit::Json), Box::new(sink.clone()));
        e.begin(&["a"]).unwrap();
        e.row(vec![Cell::num(0.5)]).unwrap();
        assert!(sink.0.lock().unwrap().is_empty());
        let mut r = ResultRecord::new("t");
        e.finish(&mut r).unwrap();
        let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        assert_eq!(ResultRecord::from_json(&text).unwrap(), r);
    }
}
