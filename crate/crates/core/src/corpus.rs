//! NDJSON corpora: one [`AccessTrace`] per line, plus a companion file of
//! declared access lists keyed by transaction hash.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::access_list::AccessList;
use crate::primitives::TxHash;
use crate::trace::AccessTrace;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One line of the declared-list companion file. `access_list: null` records a
/// transaction without the field, which is distinct from an empty list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredTal {
    pub tx_hash: TxHash,
    pub access_list: Option<AccessList>,
}

/// Lazily parsed NDJSON records. Blank lines are skipped.
pub struct NdjsonReader<T, R = BufReader<File>> {
    lines: io::Lines<R>,
    line: usize,
    _record: std::marker::PhantomData<T>,
}

impl<T: DeserializeOwned, R: BufRead> NdjsonReader<T, R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            _record: std::marker::PhantomData,
        }
    }
}

impl<T: DeserializeOwned, R: BufRead> Iterator for NdjsonReader<T, R> {
    type Item = Result<T, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line += 1;
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(source) => {
                    return Some(Err(CorpusError::Io {
                        path: format!("line {}", self.line),
                        source,
                    }))
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&text).map_err(|e| CorpusError::Schema {
                line: self.line,
                message: e.to_string(),
            }));
        }
    }
}

pub fn write_ndjson<'a, T, W, I>(mut out: W, records: I) -> io::Result<usize>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

fn store<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<usize, CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_ndjson(BufWriter::new(file), records).map_err(|e| CorpusError::io(path, e))
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<NdjsonReader<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(NdjsonReader::new(BufReader::new(file)))
}

/// Writes traces in canonical form. Returns the number written.
pub fn store_corpus<'a>(path: &Path, traces: impl IntoIterator<Item = &'a AccessTrace>) -> Result<usize, CorpusError> {
    store(path, traces)
}

pub fn load_corpus(path: &Path) -> Result<NdjsonReader<AccessTrace>, CorpusError> {
    load(path)
}

pub fn store_declared<'a>(path: &Path, tals: impl IntoIterator<Item = &'a DeclaredTal>) -> Result<usize, CorpusError> {
    store(path, tals)
}

pub fn load_declared(path: &Path) -> Result<NdjsonReader<DeclaredTal>, CorpusError> {
    load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{Address, StorageKey};
    use crate::trace::{AccessEvent, StateLabel, TxContext};

    fn sample(n: u64) -> AccessTrace {
        let a = Address::from_ordinal;
        let mut ctx = TxContext::call(TxHash::from_low_u64(n), a(0x5e), a(0x7e), a(0xc0));
        ctx.block_number = 100 + n;
        ctx.effective_gas_price = 1_000_000_000 * n;
        let events = (0..n)
            .map(|i| AccessEvent::read(i, a(0xa0 + i), StorageKey::from_low_u64(i)))
            .collect();
        AccessTrace::new(ctx, events, StateLabel::Ibs).unwrap()
    }

    #[test]
    fn empty_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.ndjson");
        assert_eq!(store_corpus(&path, &[]).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert_eq!(load_corpus(&path).unwrap().count(), 0);
    }

    #[test]
    fn three_traces_are_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.ndjson");
        let second = dir.path().join("b.ndjson");
        let traces: Vec<_> = (1..=3).map(sample).collect();
        store_corpus(&first, &traces).unwrap();
        let loaded: Vec<_> = load_corpus(&first).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(loaded, traces);
        store_corpus(&second, &loaded).unwrap();
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }

    #[test]
    fn corrupt_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ndjson");
        store_corpus(&path, &[sample(1), sample(2)]).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        let second = text.lines().nth(1).unwrap().to_string();
        text = text.replace(&second, &second.replace("\"seq\":1", "\"seq\":0"));
        std::fs::write(&path, text).unwrap();
        let results: Vec<_> = load_corpus(&path).unwrap().collect();
        assert!(results[0].is_ok());
        assert!(
            matches!(results[1], Err(CorpusError::Schema { line: 2, .. })),
            "{:?}",
            results[1]
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/x.ndjson")),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn declared_lists_distinguish_absent_from_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("declared.ndjson");
        let records = vec![
            DeclaredTal {
                tx_hash: TxHash::from_low_u64(1),
                access_list: None,
            },
            DeclaredTal {
                tx_hash: TxHash::from_low_u64(2),
                access_list: Some(AccessList::default()),
            },
        ];
        store_declared(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"access_list\":null") && text.contains("\"access_list\":[]"));
        let loaded: Vec<_> = load_declared(&path).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(loaded, records);
    }
}
