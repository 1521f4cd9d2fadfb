//! Report tables and staged output directories.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use tempfile::TempDir;

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i128),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Float(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            // Beyond i64 JSON readers lose precision; keep the digits as a string.
            Cell::Int(n) => i64::try_from(*n).map_or_else(|_| Value::String(n.to_string()), Value::from),
            Cell::Float(x) => Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(n: $t) -> Self {
                Cell::Int(n as i128)
            }
        }
    )*};
}
int_cell!(i64, u64, i128, usize);

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// A named report with a fixed header, written as `<name>.csv` and/or
/// `<name>.json` (an array of objects).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}: row width", self.name);
        self.rows.push(row);
    }

    pub fn csv_string(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn json_string(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| (h.to_string(), c.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&Value::Array(rows)).expect("JSON values serialize");
        text.push('\n');
        text
    }
}

/// Output files are written into a hidden directory inside the destination
/// and moved into place by [`Staging::commit`]. Dropping without committing
/// removes everything written so far.
pub struct Staging {
    dest: PathBuf,
    dir: TempDir,
    entries: BTreeSet<PathBuf>,
}

impl Staging {
    pub fn new(dest: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dest).map_err(|e| CliError::Output(format!("{}: {e}", dest.display())))?;
        let dir = tempfile::Builder::new()
            .prefix(".tal-staging-")
            .tempdir_in(dest)
            .map_err(|e| CliError::Output(format!("{}: {e}", dest.display())))?;
        Ok(Self {
            dest: dest.to_path_buf(),
            dir,
            entries: BTreeSet::new(),
        })
    }

    /// Path inside the staging area for `rel`; its top-level component is
    /// moved into the destination on commit.
    pub fn path(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf, CliError> {
        let rel = rel.as_ref();
        let top = rel
            .components()
            .next()
            .ok_or_else(|| CliError::Output("empty output path".into()))?;
        self.entries.insert(PathBuf::from(top.as_os_str()));
        let path = self.dir.path().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(rel)?;
        fs::write(&path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    pub fn write_table(&mut self, table: &Table, formats: &BTreeSet<Format>) -> Result<(), CliError> {
        for f in formats {
            match f {
                Format::Csv => self.write(format!("{}.csv", table.name), table.csv_string()?)?,
                Format::Json => self.write(format!("{}.json", table.name), table.json_string())?,
            }
        }
        Ok(())
    }

    /// Moves every staged entry into the destination, replacing what was
    /// there.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for entry in &self.entries {
            let from = self.dir.path().join(entry);
            let to = self.dest.join(entry);
            if to.is_dir() {
                fs::remove_dir_all(&to)?;
            } else if to.exists() {
                fs::remove_file(&to)?;
            }
            fs::rename(&from, &to).map_err(|e| CliError::Output(format!("{}: {e}", to.display())))?;
            written.push(to);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("t", &["name", "n", "x", "ok"]);
        t.push(vec![
            "a,b".into(),
            Cell::Int(i128::from(i64::MAX) + 1),
            0.25.into(),
            true.into(),
        ]);
        t
    }

    #[test]
    fn csv_quotes_and_json_types() {
        let t = sample();
        assert_eq!(
            t.csv_string().unwrap(),
            "name,n,x,ok\n\"a,b\",9223372036854775808,0.25,true\n"
        );
        let v: Value = serde_json::from_str(&t.json_string()).unwrap();
        assert_eq!(v[0]["n"], "9223372036854775808");
        assert_eq!(v[0]["x"], 0.25);
    }

    #[test]
    fn empty_table_keeps_header() {
        let t = Table::new("e", &["a", "b"]);
        assert_eq!(t.csv_string().unwrap(), "a,b\n");
        assert_eq!(t.json_string(), "[]\n");
    }

    #[test]
    fn staging_commits_or_vanishes() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("partial.csv", "x").unwrap();
        }
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);

        fs::write(out.join("keep.txt"), "old").unwrap();
        fs::create_dir_all(out.join("tals")).unwrap();
        fs::write(out.join("tals/stale.json"), "[]").unwrap();
        let mut s = Staging::new(&out).unwrap();
        s.write_table(&sample(), &[Format::Csv, Format::Json].into()).unwrap();
        s.write("tals/0x1.json", "[]").unwrap();
        s.commit().unwrap();
        let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["keep.txt", "t.csv", "t.json", "tals"]);
        assert!(!out.join("tals/stale.json").exists());
    }
}
